//! Admissible heuristics over landmark tables.
//!
//! Every bound is a maximum of triangle-inequality terms and 0. Terms that
//! touch a sentinel entry are skipped rather than clamped, so an all-masked
//! evaluation returns 0 and search degrades to Dijkstra.

use thiserror::Error;

use crate::cdh::{CdhLabels, CdhMode};
use crate::labels::{is_sentinel, LabelTable, SENTINEL};

/// Anything A* can query for a goal-directed lower bound.
pub trait Heuristic: Sync {
    fn estimate(&self, u: usize, t: usize) -> f64;
}

#[derive(Debug, Error, PartialEq)]
pub enum HeuristicError {
    #[error("smooth max/min of an empty vector")]
    Empty,
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
}

/// ALT bound with explicit forward and backward pool-row subsets.
///
/// Forward rows give `d(l, t) - d(l, u)`, backward rows `d(u, l) - d(t, l)`.
/// On an undirected table passing the same subset twice yields
/// `max_k |d(l_k, u) - d(l_k, t)|`.
pub fn h_alt(labels: &LabelTable, subset_fwd: &[usize], subset_bwd: &[usize], u: usize, t: usize) -> f64 {
    let mut h = 0.0f64;
    for &k in subset_fwd {
        let (du, dt) = (labels.d_out(k, u), labels.d_out(k, t));
        if !is_sentinel(du) && !is_sentinel(dt) {
            h = h.max(dt - du);
        }
    }
    for &k in subset_bwd {
        let (du, dt) = (labels.d_in(k, u), labels.d_in(k, t));
        if !is_sentinel(du) && !is_sentinel(dt) {
            h = h.max(du - dt);
        }
    }
    h
}

/// ALT on a fixed subset of pool rows, used in both directions.
#[derive(Debug, Clone)]
pub struct AltSubset<'a> {
    labels: &'a LabelTable,
    fwd: Vec<usize>,
    bwd: Vec<usize>,
}

impl<'a> AltSubset<'a> {
    pub fn new(labels: &'a LabelTable, subset: Vec<usize>) -> Self {
        Self {
            labels,
            bwd: subset.clone(),
            fwd: subset,
        }
    }

    pub fn with_directions(labels: &'a LabelTable, fwd: Vec<usize>, bwd: Vec<usize>) -> Self {
        Self { labels, fwd, bwd }
    }

    /// The whole pool.
    pub fn all(labels: &'a LabelTable) -> Self {
        Self::new(labels, (0..labels.k0()).collect())
    }

    /// The first `k` pool rows.
    pub fn prefix(labels: &'a LabelTable, k: usize) -> Self {
        Self::new(labels, (0..k.min(labels.k0())).collect())
    }

    pub fn subset(&self) -> &[usize] {
        &self.fwd
    }

    #[inline]
    pub fn value(&self, u: usize, t: usize) -> f64 {
        h_alt(self.labels, &self.fwd, &self.bwd, u, t)
    }
}

impl Heuristic for AltSubset<'_> {
    fn estimate(&self, u: usize, t: usize) -> f64 {
        self.value(u, t)
    }
}

/// Materialized per-vertex compressed labels, vertex-major.
///
/// Undirected tables keep everything in the forward block with `m_bwd = 0`
/// and evaluate `|y_i(u) - y_i(t)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedLabels {
    num_vertices: usize,
    directed: bool,
    m_fwd: usize,
    m_bwd: usize,
    y_fwd: Vec<f64>,
    y_bwd: Vec<f64>,
}

fn mix<'a>(rows: &[f64], k0: usize, table_row: impl Fn(usize) -> &'a [f64], n: usize) -> Vec<f64> {
    let m = rows.len() / k0.max(1);
    let mut y = vec![0.0; n * m];
    for i in 0..m {
        let a = &rows[i * k0..(i + 1) * k0];
        for (k, &w) in a.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let d = table_row(k);
            for v in 0..n {
                let cell = &mut y[v * m + i];
                if is_sentinel(*cell) {
                    continue;
                }
                *cell = if is_sentinel(d[v]) { SENTINEL } else { *cell + w * d[v] };
            }
        }
    }
    y
}

impl CompressedLabels {
    /// `y = A d(v)` for row-stochastic `a_fwd` (`m_fwd x K0`) and `a_bwd`. A
    /// compressed entry is the sentinel if any landmark with positive weight
    /// is unreachable.
    pub fn from_soft(labels: &LabelTable, a_fwd: &[f64], a_bwd: &[f64]) -> Self {
        let (k0, n) = (labels.k0(), labels.num_vertices());
        let y_fwd = mix(a_fwd, k0, |k| labels.out_row(k), n);
        let y_bwd = if labels.is_directed() {
            mix(a_bwd, k0, |k| labels.in_row(k), n)
        } else {
            Vec::new()
        };
        Self {
            num_vertices: n,
            directed: labels.is_directed(),
            m_fwd: a_fwd.len() / k0,
            m_bwd: y_bwd.len() / n.max(1),
            y_fwd,
            y_bwd,
        }
    }

    /// One-hot rows given as selected pool indices: a gather of teacher rows.
    pub fn from_selection(labels: &LabelTable, fwd: &[usize], bwd: &[usize]) -> Self {
        let n = labels.num_vertices();
        let gather = |sel: &[usize], forward: bool| {
            let m = sel.len();
            let mut y = vec![0.0; n * m];
            for (i, &k) in sel.iter().enumerate() {
                let row = if forward { labels.out_row(k) } else { labels.in_row(k) };
                for (v, &d) in row.iter().enumerate() {
                    y[v * m + i] = d;
                }
            }
            y
        };
        let directed = labels.is_directed();
        Self {
            num_vertices: n,
            directed,
            m_fwd: fwd.len(),
            m_bwd: if directed { bwd.len() } else { 0 },
            y_fwd: gather(fwd, true),
            y_bwd: if directed { gather(bwd, false) } else { Vec::new() },
        }
    }

    pub fn m(&self) -> usize {
        self.m_fwd + self.m_bwd
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn fwd(&self, v: usize) -> &[f64] {
        &self.y_fwd[v * self.m_fwd..(v + 1) * self.m_fwd]
    }

    pub fn bwd(&self, v: usize) -> &[f64] {
        &self.y_bwd[v * self.m_bwd..(v + 1) * self.m_bwd]
    }

    /// Deployed bytes per vertex with 32-bit storage.
    pub fn bytes_per_vertex(&self) -> usize {
        4 * self.m()
    }
}

pub fn h_compressed(y: &CompressedLabels, u: usize, t: usize) -> f64 {
    let mut h = 0.0f64;
    let (fu, ft) = (y.fwd(u), y.fwd(t));
    for (&a, &b) in fu.iter().zip(ft) {
        if is_sentinel(a) || is_sentinel(b) {
            continue;
        }
        h = h.max(if y.directed { b - a } else { (a - b).abs() });
    }
    if y.directed {
        for (&a, &b) in y.bwd(u).iter().zip(y.bwd(t)) {
            if !is_sentinel(a) && !is_sentinel(b) {
                h = h.max(a - b);
            }
        }
    }
    h
}

impl Heuristic for CompressedLabels {
    fn estimate(&self, u: usize, t: usize) -> f64 {
        h_compressed(self, u, t)
    }
}

/// The heuristic families compared by the benchmark.
pub enum HeuristicSpec<'a> {
    Zero,
    AltSubset(AltSubset<'a>),
    Compressed(&'a CompressedLabels),
    Cdh { labels: &'a CdhLabels, mode: CdhMode },
    Hybrid(Box<HeuristicSpec<'a>>, Box<HeuristicSpec<'a>>),
}

impl HeuristicSpec<'_> {
    pub fn evaluate(&self, u: usize, t: usize) -> f64 {
        match self {
            HeuristicSpec::Zero => 0.0,
            HeuristicSpec::AltSubset(h) => h.value(u, t),
            HeuristicSpec::Compressed(y) => h_compressed(y, u, t),
            HeuristicSpec::Cdh { labels, mode } => crate::cdh::h_cdh(labels, u, t, *mode),
            HeuristicSpec::Hybrid(a, b) => h_hybrid(a.as_ref(), b.as_ref(), u, t),
        }
    }
}

impl Heuristic for HeuristicSpec<'_> {
    fn estimate(&self, u: usize, t: usize) -> f64 {
        self.evaluate(u, t)
    }
}

impl Heuristic for dyn Fn(usize, usize) -> f64 + Sync + '_ {
    fn estimate(&self, u: usize, t: usize) -> f64 {
        self(u, t)
    }
}

/// Pointwise maximum of two admissible heuristics.
pub fn h_hybrid<A: Heuristic + ?Sized, B: Heuristic + ?Sized>(a: &A, b: &B, u: usize, t: usize) -> f64 {
    a.estimate(u, t).max(b.estimate(u, t))
}

fn check(values: &[f64], temperature: f64) -> Result<(), HeuristicError> {
    if values.is_empty() {
        return Err(HeuristicError::Empty);
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(HeuristicError::BadTemperature(temperature));
    }
    Ok(())
}

/// `log sum exp(x)` with the max shifted out.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + values.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// `M_T(x) = (1/T) log sum exp(T x) - log(m) / T`, which lies in
/// `[max(x) - log(m)/T, max(x)]`.
pub fn smooth_max(values: &[f64], temperature: f64) -> Result<f64, HeuristicError> {
    check(values, temperature)?;
    let scaled: Vec<f64> = values.iter().map(|x| temperature * x).collect();
    let m = values.len() as f64;
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Rounding can push the log-sum-exp a hair above the max.
    Ok(((log_sum_exp(&scaled) - m.ln()) / temperature).min(top))
}

/// `-(1/beta) log sum exp(-beta x)`, a lower bound on `min(x)`.
pub fn smooth_min(values: &[f64], beta: f64) -> Result<f64, HeuristicError> {
    check(values, beta)?;
    let scaled: Vec<f64> = values.iter().map(|x| -beta * x).collect();
    let low = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((-log_sum_exp(&scaled) / beta).min(low))
}
