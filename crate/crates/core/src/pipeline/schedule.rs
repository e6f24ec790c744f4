//! Sub-stage windows of a training stage.

use crate::error::{Error, Result};

/// Iteration windows `(first, last)` trained in turn within `start..=end`.
///
/// Sub-stage `s` (1-based) covers
/// `max(start, start + (s-1) d1 - d2) ..= min(end, start + s d1 - 1)`,
/// and there are `ceil((end - start + 1) / d1)` sub-stages.
pub fn substage_windows(start: usize, end: usize, d1: usize, d2: usize) -> Result<Vec<(usize, usize)>> {
    if start == 0 || end < start {
        return Err(Error::Config(format!("invalid stage range {start}..={end}")));
    }
    if d1 == 0 {
        return Err(Error::Config("sub-stage step must be positive".into()));
    }
    let len = end - start + 1;
    let count = len.div_ceil(d1);
    Ok((1..=count)
        .map(|s| {
            let lo = (start + (s - 1) * d1).saturating_sub(d2).max(start);
            let hi = (start + s * d1 - 1).min(end);
            (lo, hi)
        })
        .collect())
}
