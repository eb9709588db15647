//! Compressed differential heuristic: each vertex keeps its `r` farthest
//! pivots out of a pool of `P`, with an off-budget `P x P` pivot table used
//! to bound distances to pivots an endpoint did not keep.
//!
//! Directed graphs keep `ceil(r/2)` forward pivots (`d(p, v)`) and
//! `floor(r/2)` backward pivots (`d(v, p)`) per vertex. Undirected graphs
//! keep one list of `r`, which serves both roles.

use std::io::{Read, Write};

use thiserror::Error;

use crate::labels::{is_sentinel, read_f64s, read_u64, write_f64s, LabelTable};

#[derive(Debug, Error)]
pub enum CdhError {
    #[error("r must be at least 1")]
    ZeroR,
    #[error("r = {r} exceeds the pivot pool size {p}")]
    RExceedsPool { r: usize, p: usize },
    #[error("invalid CDH cache: {0}")]
    BadCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdhMode {
    /// Only pivots stored at both endpoints.
    Strict,
    /// Also bound missing pivot distances through the pivot table.
    Substitution,
}

/// Per-vertex pivot lists, sorted by pivot index.
#[derive(Debug, Clone, PartialEq)]
struct PivotLists {
    per_vertex: usize,
    index: Vec<u32>,
    dist: Vec<f64>,
}

impl PivotLists {
    fn of(&self, v: usize) -> (&[u32], &[f64]) {
        let span = v * self.per_vertex..(v + 1) * self.per_vertex;
        (&self.index[span.clone()], &self.dist[span])
    }

    fn find(&self, v: usize, pivot: u32) -> Option<f64> {
        let (idx, dist) = self.of(v);
        idx.binary_search(&pivot).ok().map(|i| dist[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdhLabels {
    p: usize,
    num_vertices: usize,
    directed: bool,
    fwd: PivotLists,
    bwd: Option<PivotLists>,
    /// `pivot_pivot[a * P + b] = d(p_a, p_b)`.
    pivot_pivot: Vec<f64>,
}

/// Top-`r` farthest pivots for one vertex; unreachable entries rank last and
/// ties go to the lowest pivot index. Returned sorted by pivot index.
fn top_r(row: impl Fn(usize) -> f64, p: usize, r: usize) -> Vec<(u32, f64)> {
    let mut cand: Vec<(u32, f64)> = (0..p).map(|k| (k as u32, row(k))).collect();
    cand.sort_by(|a, b| {
        let key = |(_, d): &(u32, f64)| if is_sentinel(*d) { f64::NEG_INFINITY } else { *d };
        key(b).total_cmp(&key(a)).then(a.0.cmp(&b.0))
    });
    cand.truncate(r);
    cand.sort_by_key(|c| c.0);
    cand
}

fn select(labels: &LabelTable, r: usize, backward: bool) -> PivotLists {
    let (p, n) = (labels.k0(), labels.num_vertices());
    let mut index = Vec::with_capacity(n * r);
    let mut dist = Vec::with_capacity(n * r);
    for v in 0..n {
        let chosen = if backward {
            top_r(|k| labels.d_in(k, v), p, r)
        } else {
            top_r(|k| labels.d_out(k, v), p, r)
        };
        for (k, d) in chosen {
            index.push(k);
            dist.push(d);
        }
    }
    PivotLists { per_vertex: r, index, dist }
}

/// Builds CDH labels from a pivot pool of size `P = labels.k0()`.
pub fn build_cdh(labels: &LabelTable, r: usize) -> Result<CdhLabels, CdhError> {
    let p = labels.k0();
    if r == 0 {
        return Err(CdhError::ZeroR);
    }
    if r > p {
        return Err(CdhError::RExceedsPool { r, p });
    }
    let directed = labels.is_directed();
    let (fwd, bwd) = if directed {
        let r_bwd = r / 2;
        (select(labels, r - r_bwd, false), Some(select(labels, r_bwd, true)))
    } else {
        (select(labels, r, false), None)
    };
    let ids = labels.landmark_ids();
    let mut pivot_pivot = vec![0.0; p * p];
    for a in 0..p {
        for b in 0..p {
            pivot_pivot[a * p + b] = labels.d_out(a, ids[b]);
        }
    }
    Ok(CdhLabels {
        p,
        num_vertices: labels.num_vertices(),
        directed,
        fwd,
        bwd,
        pivot_pivot,
    })
}

impl CdhLabels {
    pub fn pool_size(&self) -> usize {
        self.p
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Retained entries per vertex, both directions together.
    pub fn r(&self) -> usize {
        self.fwd.per_vertex + self.bwd.as_ref().map_or(0, |b| b.per_vertex)
    }

    /// Forward pivots at `v` with `d(p, v)`.
    pub fn forward(&self, v: usize) -> (&[u32], &[f64]) {
        self.fwd.of(v)
    }

    /// Backward pivots at `v` with `d(v, p)`. Aliases [`Self::forward`] on
    /// undirected graphs.
    pub fn backward(&self, v: usize) -> (&[u32], &[f64]) {
        self.bwd.as_ref().unwrap_or(&self.fwd).of(v)
    }

    fn bwd_lists(&self) -> &PivotLists {
        self.bwd.as_ref().unwrap_or(&self.fwd)
    }

    pub fn pivot_distance(&self, a: usize, b: usize) -> f64 {
        self.pivot_pivot[a * self.p + b]
    }

    /// Deployed bytes per vertex: a 4-byte distance, a 4-byte index and one
    /// byte of flag padding per retained entry.
    pub fn bytes_per_vertex(&self) -> usize {
        9 * self.r()
    }

    const MAGIC: [u8; 8] = *b"LMCDH001";

    /// Magic, P, V, per-vertex forward and backward counts (u64 LE), directed
    /// flag, the `P x P` pivot table, then per direction the u32 LE indices
    /// and f64 LE distances.
    pub fn write_cache<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&Self::MAGIC)?;
        let r_bwd = self.bwd.as_ref().map_or(0, |b| b.per_vertex);
        for x in [self.p, self.num_vertices, self.fwd.per_vertex, r_bwd] {
            out.write_all(&(x as u64).to_le_bytes())?;
        }
        out.write_all(&[self.directed as u8])?;
        write_f64s(&mut out, &self.pivot_pivot)?;
        for lists in std::iter::once(&self.fwd).chain(self.bwd.as_ref()) {
            let mut buf = Vec::with_capacity(lists.index.len() * 4);
            for i in &lists.index {
                buf.extend_from_slice(&i.to_le_bytes());
            }
            out.write_all(&buf)?;
            write_f64s(&mut out, &lists.dist)?;
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut input: R) -> Result<Self, CdhError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if magic != Self::MAGIC {
            return Err(CdhError::BadCache("bad magic".into()));
        }
        let mut head = [0usize; 4];
        for h in head.iter_mut() {
            *h = read_u64(&mut input)? as usize;
        }
        let [p, n, r_fwd, r_bwd] = head;
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        let directed = flag[0] == 1;
        let pivot_pivot = read_f64s(&mut input, p * p)?;
        let mut read_lists = |per_vertex: usize| -> Result<PivotLists, CdhError> {
            let mut raw = vec![0u8; n * per_vertex * 4];
            input.read_exact(&mut raw)?;
            let index = raw
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().expect("chunk of 4")))
                .collect();
            let dist = read_f64s(&mut input, n * per_vertex)?;
            Ok(PivotLists { per_vertex, index, dist })
        };
        let fwd = read_lists(r_fwd)?;
        let bwd = if directed { Some(read_lists(r_bwd)?) } else { None };
        Ok(Self {
            p,
            num_vertices: n,
            directed,
            fwd,
            bwd,
            pivot_pivot,
        })
    }
}

/// Upper bound on `d(p, x)` from `x`'s forward pivots: `min_q d(p, q) + d(q, x)`.
fn ub_from(labels: &CdhLabels, p: usize, x: usize) -> Option<f64> {
    let (idx, dist) = labels.forward(x);
    let mut best: Option<f64> = None;
    for (&q, &dqx) in idx.iter().zip(dist) {
        let dpq = labels.pivot_distance(p, q as usize);
        if is_sentinel(dqx) || is_sentinel(dpq) {
            continue;
        }
        let b = dpq + dqx;
        best = Some(best.map_or(b, |c: f64| c.min(b)));
    }
    best
}

/// Upper bound on `d(x, p)` from `x`'s backward pivots: `min_q d(x, q) + d(q, p)`.
fn ub_to(labels: &CdhLabels, x: usize, p: usize) -> Option<f64> {
    let (idx, dist) = labels.backward(x);
    let mut best: Option<f64> = None;
    for (&q, &dxq) in idx.iter().zip(dist) {
        let dqp = labels.pivot_distance(q as usize, p);
        if is_sentinel(dxq) || is_sentinel(dqp) {
            continue;
        }
        let b = dxq + dqp;
        best = Some(best.map_or(b, |c: f64| c.min(b)));
    }
    best
}

/// Lower bound on `d(p, x)`: `d(p, q) - d(x, q)` over backward pivots and
/// `d(q, x) - d(q, p)` over forward pivots.
fn lb_from(labels: &CdhLabels, p: usize, x: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut offer = |b: f64| best = Some(best.map_or(b, |c: f64| c.max(b)));
    let (idx, dist) = labels.backward(x);
    for (&q, &dxq) in idx.iter().zip(dist) {
        let dpq = labels.pivot_distance(p, q as usize);
        if !is_sentinel(dxq) && !is_sentinel(dpq) {
            offer(dpq - dxq);
        }
    }
    let (idx, dist) = labels.forward(x);
    for (&q, &dqx) in idx.iter().zip(dist) {
        let dqp = labels.pivot_distance(q as usize, p);
        if !is_sentinel(dqx) && !is_sentinel(dqp) {
            offer(dqx - dqp);
        }
    }
    best
}

/// Lower bound on `d(x, p)`: `d(x, q) - d(p, q)` over backward pivots and
/// `d(q, p) - d(q, x)` over forward pivots.
fn lb_to(labels: &CdhLabels, x: usize, p: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut offer = |b: f64| best = Some(best.map_or(b, |c: f64| c.max(b)));
    let (idx, dist) = labels.backward(x);
    for (&q, &dxq) in idx.iter().zip(dist) {
        let dpq = labels.pivot_distance(p, q as usize);
        if !is_sentinel(dxq) && !is_sentinel(dpq) {
            offer(dxq - dpq);
        }
    }
    let (idx, dist) = labels.forward(x);
    for (&q, &dqx) in idx.iter().zip(dist) {
        let dqp = labels.pivot_distance(q as usize, p);
        if !is_sentinel(dqx) && !is_sentinel(dqp) {
            offer(dqp - dqx);
        }
    }
    best
}

pub fn h_cdh(labels: &CdhLabels, u: usize, t: usize, mode: CdhMode) -> f64 {
    let mut h = 0.0f64;
    let sub = mode == CdhMode::Substitution;

    // Forward pivots: d(u, t) >= d(p, t) - d(p, u).
    let (iu, du) = labels.forward(u);
    for (&p, &dpu) in iu.iter().zip(du) {
        if is_sentinel(dpu) {
            continue;
        }
        match labels.fwd.find(t, p) {
            Some(dpt) if !is_sentinel(dpt) => h = h.max(dpt - dpu),
            Some(_) => {}
            None if sub => {
                if let Some(lb) = lb_from(labels, p as usize, t) {
                    h = h.max(lb - dpu);
                }
            }
            None => {}
        }
    }
    if sub {
        let (it, dt) = labels.forward(t);
        for (&p, &dpt) in it.iter().zip(dt) {
            if is_sentinel(dpt) || labels.fwd.find(u, p).is_some() {
                continue;
            }
            if let Some(ub) = ub_from(labels, p as usize, u) {
                h = h.max(dpt - ub);
            }
        }
    }

    // Backward pivots: d(u, t) >= d(u, p) - d(t, p).
    let bwd = labels.bwd_lists();
    let (iu, du) = labels.backward(u);
    for (&p, &dup) in iu.iter().zip(du) {
        if is_sentinel(dup) {
            continue;
        }
        match bwd.find(t, p) {
            Some(dtp) if !is_sentinel(dtp) => h = h.max(dup - dtp),
            Some(_) => {}
            None if sub => {
                if let Some(ub) = ub_to(labels, t, p as usize) {
                    h = h.max(dup - ub);
                }
            }
            None => {}
        }
    }
    if sub {
        let (it, dt) = labels.backward(t);
        for (&p, &dtp) in it.iter().zip(dt) {
            if is_sentinel(dtp) || bwd.find(u, p).is_some() {
                continue;
            }
            if let Some(lb) = lb_to(labels, u, p as usize) {
                h = h.max(lb - dtp);
            }
        }
    }
    h
}

/// One-step bidirectional pathmax across an edge of weight `w`.
pub fn bpmx_adjust(h_parent: f64, h_child: f64, edge_weight: f64) -> (f64, f64) {
    (
        h_parent.max(h_child - edge_weight),
        h_child.max(h_parent - edge_weight),
    )
}
