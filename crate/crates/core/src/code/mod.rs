//! Quasi-cyclic LDPC codes: base matrices (protographs) and their lifted
//! Tanner graphs.
//!
//! Edges are numbered canonically: row-major over the non-absent base-matrix
//! entries, then by ascending lift offset. Proto edge `p` owns lifted edges
//! `p * z .. (p + 1) * z`. Weight files, gradient buffers and every
//! reduction follow this order.

mod alist;
mod complexity;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use alist::{parse_alist, to_alist};
pub use complexity::{complexity_estimate, weight_count, ComplexityReport, DecoderKind};

/// A protograph with circulant shift entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaseMatrix {
    rows: usize,
    cols: usize,
    z: usize,
    /// Row-major, `None` for absent entries.
    entries: Vec<Option<usize>>,
}

impl BaseMatrix {
    pub fn new(rows: usize, cols: usize, z: usize, entries: Vec<Option<usize>>) -> Result<Self> {
        if rows == 0 || cols == 0 || z == 0 {
            return Err(Error::Dimension(format!(
                "M, N and z must be positive (got M={rows}, N={cols}, z={z})"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {rows}x{cols} base matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        for (idx, entry) in entries.iter().enumerate() {
            if let Some(s) = *entry {
                if s >= z {
                    return Err(Error::ShiftOutOfRange {
                        row: idx / cols,
                        col: idx % cols,
                        value: s as i64,
                        z,
                    });
                }
            }
        }
        Ok(BaseMatrix { rows, cols, z, entries })
    }

    /// Number of proto check nodes (M).
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of proto variable nodes (N).
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Lifting factor.
    pub fn z(&self) -> usize {
        self.z
    }

    /// Number of proto edges (E).
    pub fn proto_edges(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn shift(&self, row: usize, col: usize) -> Option<usize> {
        self.entries[row * self.cols + col]
    }

    /// Design rate `(N - M) / N`.
    pub fn rate(&self) -> f64 {
        (self.cols as f64 - self.rows as f64) / self.cols as f64
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.rows, self.cols, self.z);
        for r in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|c| match self.shift(r, c) {
                    Some(s) => s.to_string(),
                    None => "-1".to_string(),
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

impl FromStr for BaseMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_base_matrix(s)
    }
}

/// Parses the `M N z` header followed by `M` rows of `N` shifts (`-1` = absent).
pub fn parse_base_matrix(text: &str) -> Result<BaseMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing `M N z` header".into(),
    })?;
    let dims = parse_ints(hline, header)?;
    if dims.len() != 3 {
        return Err(Error::Parse {
            line: hline,
            msg: format!("header needs 3 integers, found {}", dims.len()),
        });
    }
    if dims.iter().any(|&d| d <= 0) {
        return Err(Error::Parse {
            line: hline,
            msg: "M, N and z must be positive".into(),
        });
    }
    let (rows, cols, z) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);

    let mut entries = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (lineno, line) in lines {
        if seen_rows == rows {
            return Err(Error::Dimension(format!(
                "more than {rows} rows (extra data on line {lineno})"
            )));
        }
        let vals = parse_ints(lineno, line)?;
        if vals.len() != cols {
            return Err(Error::Dimension(format!(
                "line {lineno} has {} entries, expected {cols}",
                vals.len()
            )));
        }
        for (c, v) in vals.into_iter().enumerate() {
            match v {
                -1 => entries.push(None),
                v if v >= 0 && (v as usize) < z => entries.push(Some(v as usize)),
                v if v >= 0 => {
                    return Err(Error::ShiftOutOfRange {
                        row: seen_rows,
                        col: c,
                        value: v,
                        z,
                    })
                }
                v => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("negative entry {v} (only -1 marks an absent entry)"),
                    })
                }
            }
        }
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(Error::Dimension(format!("expected {rows} rows, found {seen_rows}")));
    }
    BaseMatrix::new(rows, cols, z, entries)
}

fn parse_ints(line: usize, text: &str) -> Result<Vec<i64>> {
    text.split_whitespace()
        .map(|tok| {
            tok.parse::<i64>().map_err(|_| Error::Parse {
                line,
                msg: format!("non-integer token `{tok}`"),
            })
        })
        .collect()
}

/// One lifted edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub vn: usize,
    pub cn: usize,
    pub proto_edge: usize,
    pub proto_vn: usize,
    pub proto_cn: usize,
}

/// Lifted Tanner graph with compressed adjacency in canonical edge order.
#[derive(Clone, Debug)]
pub struct TannerGraph {
    base: BaseMatrix,
    edge_vn: Vec<u32>,
    edge_cn: Vec<u32>,
    proto_vn: Vec<u32>,
    proto_cn: Vec<u32>,
    vn_start: Vec<u32>,
    vn_edges: Vec<u32>,
    cn_start: Vec<u32>,
    cn_edges: Vec<u32>,
}

/// Lifts a base matrix: lift offset `i` of entry `(r, c)` with shift `s`
/// joins VN `c*z + i` to CN `r*z + (i + s) mod z`.
pub fn lift(base: &BaseMatrix) -> Result<TannerGraph> {
    let z = base.z;
    let n_proto = base.proto_edges();
    if n_proto == 0 {
        return Err(Error::EmptyGraph);
    }
    let n = base.cols * z;
    let m = base.rows * z;
    let total = n_proto * z;

    let mut edge_vn = Vec::with_capacity(total);
    let mut edge_cn = Vec::with_capacity(total);
    let mut proto_vn = Vec::with_capacity(n_proto);
    let mut proto_cn = Vec::with_capacity(n_proto);
    for r in 0..base.rows {
        for c in 0..base.cols {
            if let Some(s) = base.shift(r, c) {
                proto_vn.push(c as u32);
                proto_cn.push(r as u32);
                for i in 0..z {
                    edge_vn.push((c * z + i) as u32);
                    edge_cn.push((r * z + (i + s) % z) as u32);
                }
            }
        }
    }

    let (vn_start, vn_edges) = csr(n, &edge_vn);
    let (cn_start, cn_edges) = csr(m, &edge_cn);
    let graph = TannerGraph {
        base: base.clone(),
        edge_vn,
        edge_cn,
        proto_vn,
        proto_cn,
        vn_start,
        vn_edges,
        cn_start,
        cn_edges,
    };
    for c in 0..m {
        let d = graph.cn_degree(c);
        if d < 2 {
            return Err(Error::DegenerateCheck(c, d));
        }
    }
    Ok(graph)
}

/// Builds start offsets and edge lists grouped by node; within a node edges
/// stay in ascending id order.
fn csr(nodes: usize, owner: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut start = vec![0u32; nodes + 1];
    for &o in owner {
        start[o as usize + 1] += 1;
    }
    for i in 0..nodes {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut edges = vec![0u32; owner.len()];
    for (e, &o) in owner.iter().enumerate() {
        edges[fill[o as usize] as usize] = e as u32;
        fill[o as usize] += 1;
    }
    (start, edges)
}

impl TannerGraph {
    pub fn base(&self) -> &BaseMatrix {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.vn_start.len() - 1
    }

    pub fn m(&self) -> usize {
        self.cn_start.len() - 1
    }

    pub fn z(&self) -> usize {
        self.base.z
    }

    pub fn num_edges(&self) -> usize {
        self.edge_vn.len()
    }

    pub fn num_proto_edges(&self) -> usize {
        self.proto_vn.len()
    }

    pub fn num_proto_vns(&self) -> usize {
        self.base.cols
    }

    pub fn rate(&self) -> f64 {
        self.base.rate()
    }

    pub fn edge(&self, e: usize) -> Edge {
        let proto_edge = e / self.base.z;
        Edge {
            vn: self.edge_vn[e] as usize,
            cn: self.edge_cn[e] as usize,
            proto_edge,
            proto_vn: self.proto_vn[proto_edge] as usize,
            proto_cn: self.proto_cn[proto_edge] as usize,
        }
    }

    #[inline]
    pub fn edge_vn(&self, e: usize) -> usize {
        self.edge_vn[e] as usize
    }

    #[inline]
    pub fn edge_cn(&self, e: usize) -> usize {
        self.edge_cn[e] as usize
    }

    #[inline]
    pub fn proto_edge_of(&self, e: usize) -> usize {
        e / self.base.z
    }

    #[inline]
    pub fn proto_vn_of_vn(&self, v: usize) -> usize {
        v / self.base.z
    }

    /// Proto VN (column) of a proto edge.
    pub fn proto_edge_vn(&self, p: usize) -> usize {
        self.proto_vn[p] as usize
    }

    /// Proto CN (row) of a proto edge.
    pub fn proto_edge_cn(&self, p: usize) -> usize {
        self.proto_cn[p] as usize
    }

    /// Edges incident to VN `v`, ascending edge id.
    #[inline]
    pub fn vn_edges(&self, v: usize) -> &[u32] {
        &self.vn_edges[self.vn_start[v] as usize..self.vn_start[v + 1] as usize]
    }

    /// Edges incident to CN `c`, ascending edge id.
    #[inline]
    pub fn cn_edges(&self, c: usize) -> &[u32] {
        &self.cn_edges[self.cn_start[c] as usize..self.cn_start[c + 1] as usize]
    }

    pub fn vn_degree(&self, v: usize) -> usize {
        (self.vn_start[v + 1] - self.vn_start[v]) as usize
    }

    pub fn cn_degree(&self, c: usize) -> usize {
        (self.cn_start[c + 1] - self.cn_start[c]) as usize
    }

    /// Parity of every check for a hard-decision vector.
    pub fn syndrome(&self, bits: &[u8]) -> Result<Vec<u8>> {
        if bits.len() != self.n() {
            return Err(Error::Length {
                expected: self.n(),
                got: bits.len(),
            });
        }
        Ok((0..self.m())
            .map(|c| {
                self.cn_edges(c)
                    .iter()
                    .fold(0u8, |acc, &e| acc ^ (bits[self.edge_vn[e as usize] as usize] & 1))
            })
            .collect())
    }

    pub fn is_codeword(&self, bits: &[u8]) -> Result<bool> {
        Ok(self.syndrome(bits)?.iter().all(|&p| p == 0))
    }

    /// Dense parity-check matrix, one row per CN. Only sensible for small codes.
    pub fn parity_matrix(&self) -> Vec<Vec<u8>> {
        let mut h = vec![vec![0u8; self.n()]; self.m()];
        for e in 0..self.num_edges() {
            h[self.edge_cn(e)][self.edge_vn(e)] ^= 1;
        }
        h
    }
}

impl fmt::Display for TannerGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} m={} edges={} (N={} M={} E={} z={}) rate={:.4}",
            self.n(),
            self.m(),
            self.num_edges(),
            self.base.cols,
            self.base.rows,
            self.num_proto_edges(),
            self.base.z,
            self.rate()
        )
    }
}
