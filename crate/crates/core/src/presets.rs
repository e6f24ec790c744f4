//! Bundled codes and reference weights.

use crate::code::{lift, parse_base_matrix, BaseMatrix, TannerGraph};
use crate::error::{Error, Result};
use crate::weights::WeightFile;

pub const WIMAX_576_R34: &str = "wimax-576-r34";
pub const IEEE80211N_648_R56: &str = "80211n-648-r56";
pub const NR5G_BG1_552: &str = "nr5g-bg1-552";

pub const CODE_IDS: [&str; 3] = [WIMAX_576_R34, IEEE80211N_648_R56, NR5G_BG1_552];

const WIMAX_TEXT: &str = include_str!("../data/wimax_576_r34.txt");
const IEEE80211N_TEXT: &str = include_str!("../data/ieee80211n_648_r56.txt");
const NR5G_TEXT: &str = include_str!("../data/nr5g_bg1_552.txt");
const WIMAX_WEIGHTS: &str = include_str!("../data/wimax_reference_weights.json");

pub fn base_matrix_text(id: &str) -> Result<&'static str> {
    match id {
        WIMAX_576_R34 => Ok(WIMAX_TEXT),
        IEEE80211N_648_R56 => Ok(IEEE80211N_TEXT),
        NR5G_BG1_552 => Ok(NR5G_TEXT),
        other => Err(Error::Config(format!(
            "unknown code `{other}` (bundled: {})",
            CODE_IDS.join(", ")
        ))),
    }
}

pub fn base_matrix(id: &str) -> Result<BaseMatrix> {
    parse_base_matrix(base_matrix_text(id)?)
}

pub fn code(id: &str) -> Result<TannerGraph> {
    lift(&base_matrix(id)?)
}

/// WiMAX weights: spatial sharing for iterations 1..=20, spatial+ucn for 21..=50.
pub fn wimax_reference_weights() -> WeightFile {
    WeightFile::parse(WIMAX_WEIGHTS).expect("bundled weight file is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::{complexity_estimate, DecoderKind};
    use crate::weights::SharingScheme;

    #[test]
    fn wimax_dimensions() {
        let b = base_matrix(WIMAX_576_R34).unwrap();
        assert_eq!((b.rows(), b.cols(), b.proto_edges(), b.z()), (6, 24, 88, 24));
        let g = code(WIMAX_576_R34).unwrap();
        assert_eq!(g.n(), 576);
        assert_eq!(g.num_edges(), 2112);
    }

    #[test]
    fn other_codes_lift() {
        let g = code(IEEE80211N_648_R56).unwrap();
        assert_eq!((g.n(), g.m()), (648, 108));
        let g = code(NR5G_BG1_552).unwrap();
        assert_eq!((g.n(), g.m()), (552, 288));
        assert!(code("nope").is_err());
    }

    #[test]
    fn wimax_complexity_table() {
        let g = code(WIMAX_576_R34).unwrap();
        let ms = complexity_estimate(&g, DecoderKind::MinSum, 50).unwrap();
        assert_eq!((ms.additions, ms.comparisons, ms.multiplications), (4224, 2256, 2112));
        assert_eq!(ms.total, 542_400);
        let nms = complexity_estimate(&g, DecoderKind::NeuralMinSum, 50).unwrap();
        assert_eq!((nms.multiplications, nms.total), (4800, 676_800));
    }

    #[test]
    fn reference_weights_layout() {
        let wf = wimax_reference_weights();
        let w = wf.to_weights().unwrap();
        assert_eq!(w.total_iterations(), 50);
        assert_eq!(w.parameter_count(), 130);
        assert_eq!(w.stage(0).scheme(), SharingScheme::Spatial);
        let post = w.stage(1).iteration_weights(21).unwrap();
        assert_eq!((post.vn[0], post.scn[0], post.ucn[0]), (1.14, 0.19, 0.58));
        let base = w.stage(0).iteration_weights(1).unwrap();
        assert_eq!((base.vn[3], base.scn[5], base.ucn[5]), (0.74, 0.74, 0.74));
        wf.check_graph(&code(WIMAX_576_R34).unwrap()).unwrap();
    }
}
