//! alist import/export. An alist code has no circulant structure, so it is
//! brought in as a base matrix with lifting factor 1 (every edge is its own
//! proto edge).

use super::{BaseMatrix, TannerGraph};
use crate::error::{Error, Result};

pub fn parse_alist(text: &str) -> Result<BaseMatrix> {
    let mut tokens = text
        .lines()
        .enumerate()
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let mut next = |what: &str| -> Result<usize> {
        let (line, tok) = tokens.next().ok_or(Error::Parse {
            line: 0,
            msg: format!("unexpected end of alist while reading {what}"),
        })?;
        tok.parse::<usize>().map_err(|_| Error::Parse {
            line,
            msg: format!("non-integer token `{tok}` in {what}"),
        })
    };

    let n = next("n")?;
    let m = next("m")?;
    let max_col = next("max column weight")?;
    let max_row = next("max row weight")?;
    let col_w: Vec<usize> = (0..n).map(|_| next("column weights")).collect::<Result<_>>()?;
    let row_w: Vec<usize> = (0..m).map(|_| next("row weights")).collect::<Result<_>>()?;

    let mut entries = vec![None; m * n];
    for (col, &w) in col_w.iter().enumerate() {
        if w > max_col {
            return Err(Error::Dimension(format!(
                "column {col} weight {w} exceeds declared maximum {max_col}"
            )));
        }
        // Some writers pad every line to the maximum weight with zeros.
        let mut taken = 0;
        while taken < w {
            let r = next("column lists")?;
            if r == 0 {
                continue;
            }
            if r > m {
                return Err(Error::Dimension(format!("row index {r} exceeds m={m}")));
            }
            entries[(r - 1) * n + col] = Some(0);
            taken += 1;
        }
    }

    let base = BaseMatrix::new(m, n, 1, entries)?;
    // The row lists are redundant; check them when present.
    for (row, &w) in row_w.iter().enumerate() {
        if w > max_row {
            return Err(Error::Dimension(format!(
                "row {row} weight {w} exceeds declared maximum {max_row}"
            )));
        }
        let actual = (0..n).filter(|&c| base.shift(row, c).is_some()).count();
        if actual != w {
            return Err(Error::Dimension(format!(
                "row {row}: declared weight {w}, column lists give {actual}"
            )));
        }
    }
    Ok(base)
}

/// Writes the lifted graph as an alist (1-based indices, no padding).
pub fn to_alist(graph: &TannerGraph) -> String {
    let (n, m) = (graph.n(), graph.m());
    let col_w: Vec<usize> = (0..n).map(|v| graph.vn_degree(v)).collect();
    let row_w: Vec<usize> = (0..m).map(|c| graph.cn_degree(c)).collect();
    let join = |v: &mut dyn Iterator<Item = usize>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
    let mut out = format!("{n} {m}\n");
    out.push_str(&format!(
        "{} {}\n",
        col_w.iter().max().copied().unwrap_or(0),
        row_w.iter().max().copied().unwrap_or(0)
    ));
    out.push_str(&join(&mut col_w.iter().copied()));
    out.push('\n');
    out.push_str(&join(&mut row_w.iter().copied()));
    out.push('\n');
    for v in 0..n {
        let mut cns: Vec<usize> = graph
            .vn_edges(v)
            .iter()
            .map(|&e| graph.edge_cn(e as usize) + 1)
            .collect();
        cns.sort_unstable();
        out.push_str(&join(&mut cns.into_iter()));
        out.push('\n');
    }
    for c in 0..m {
        let mut vns: Vec<usize> = graph
            .cn_edges(c)
            .iter()
            .map(|&e| graph.edge_vn(e as usize) + 1)
            .collect();
        vns.sort_unstable();
        out.push_str(&join(&mut vns.into_iter()));
        out.push('\n');
    }
    out
}
