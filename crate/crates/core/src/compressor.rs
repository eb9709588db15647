//! Learned row-stochastic compression of a landmark pool.
//!
//! A [`Selector`] holds logits `W` with one row per compressed dimension.
//! Training samples hard Gumbel-softmax rows and backpropagates through the
//! soft relaxation (straight-through). At deployment each row keeps only its
//! argmax landmark, so the deployed heuristic is ALT on the selected columns
//! and stays admissible whatever the logits are.
//!
//! On directed graphs the `m` rows split into `floor(m/2)` forward rows,
//! which mix `d(l, v)`, and the remaining backward rows, which mix
//! `d(v, l)`. Undirected selectors use forward rows only.

use std::io::{Read, Write};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::heuristic::{h_alt, log_sum_exp, CompressedLabels};
use crate::labels::{is_sentinel, read_f64s, read_u64, write_f64s, LabelTable};
use crate::rng;

#[derive(Debug, Error)]
pub enum CompressorError {
    #[error("m must be at least 1")]
    ZeroM,
    #[error("{m} rows per direction exceed the pool size {k0}")]
    MExceedsPool { m: usize, k0: usize },
    #[error("logit matrix has {got} entries, expected {expected}")]
    Shape { got: usize, expected: usize },
    #[error("empty query batch")]
    EmptyBatch,
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("query ({s}, {t}) touches an unreachable teacher label")]
    NonFiniteLabels { s: usize, t: usize },
    #[error("training needs at least two candidate vertices")]
    TooFewVertices,
    #[error("loss diverged at epoch {epoch}")]
    Diverged { epoch: usize, report: Box<TrainReport> },
    #[error("invalid checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Row `i` is raised on the contiguous block `[i K0/m, (i+1) K0/m)`.
    BlockSparse,
    /// Row `i` is raised on pool index `i`.
    IdentityFirstM,
}

/// Logit raise used by both initializations.
pub const INIT_LOGIT: f64 = 3.0;
/// Standard deviation of the block-sparse jitter.
pub const INIT_NOISE_STD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    k0: usize,
    directed: bool,
    m_fwd: usize,
    m_bwd: usize,
    w_fwd: Vec<f64>,
    w_bwd: Vec<f64>,
}

/// `(m_fwd, m_bwd)` for a total of `m` rows.
pub fn split_m(m: usize, directed: bool) -> (usize, usize) {
    if directed {
        (m / 2, m - m / 2)
    } else {
        (m, 0)
    }
}

fn softmax_into(z: &[f64], out: &mut [f64]) {
    let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(z) {
        *o = (x - top).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

fn softmax_rows(w: &[f64], k0: usize) -> Vec<f64> {
    let mut out = vec![0.0; w.len()];
    for (row, o) in w.chunks(k0).zip(out.chunks_mut(k0)) {
        softmax_into(row, o);
    }
    out
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = j;
        }
    }
    best
}

fn argmax_rows(w: &[f64], k0: usize) -> Vec<usize> {
    w.chunks(k0).map(argmax).collect()
}

impl Selector {
    pub fn from_logits(k0: usize, directed: bool, w_fwd: Vec<f64>, w_bwd: Vec<f64>) -> Result<Self, CompressorError> {
        if k0 == 0 {
            return Err(CompressorError::ZeroM);
        }
        for w in [&w_fwd, &w_bwd] {
            if w.len() % k0 != 0 {
                return Err(CompressorError::Shape {
                    got: w.len(),
                    expected: (w.len() / k0 + 1) * k0,
                });
            }
        }
        if !directed && !w_bwd.is_empty() {
            return Err(CompressorError::Shape { got: w_bwd.len(), expected: 0 });
        }
        Ok(Self {
            k0,
            directed,
            m_fwd: w_fwd.len() / k0,
            m_bwd: w_bwd.len() / k0,
            w_fwd,
            w_bwd,
        })
    }

    /// Logits whose softmax is exactly one-hot on the given columns.
    pub fn one_hot(k0: usize, directed: bool, fwd: &[usize], bwd: &[usize]) -> Self {
        let rows = |sel: &[usize]| {
            let mut w = vec![0.0; sel.len() * k0];
            for (i, &k) in sel.iter().enumerate() {
                w[i * k0 + k] = 1e3;
            }
            w
        };
        Self {
            k0,
            directed,
            m_fwd: fwd.len(),
            m_bwd: bwd.len(),
            w_fwd: rows(fwd),
            w_bwd: rows(bwd),
        }
    }

    pub fn k0(&self) -> usize {
        self.k0
    }

    pub fn m(&self) -> usize {
        self.m_fwd + self.m_bwd
    }

    pub fn m_fwd(&self) -> usize {
        self.m_fwd
    }

    pub fn m_bwd(&self) -> usize {
        self.m_bwd
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn logits_fwd(&self) -> &[f64] {
        &self.w_fwd
    }

    pub fn logits_bwd(&self) -> &[f64] {
        &self.w_bwd
    }

    /// Hard argmax columns per row (ties to the lowest index).
    pub fn argmax(&self) -> (Vec<usize>, Vec<usize>) {
        (argmax_rows(&self.w_fwd, self.k0), argmax_rows(&self.w_bwd, self.k0))
    }

    /// Row-wise `softmax(W)`.
    pub fn soft_rows(&self) -> (Vec<f64>, Vec<f64>) {
        (softmax_rows(&self.w_fwd, self.k0), softmax_rows(&self.w_bwd, self.k0))
    }

    /// Distinct (direction, column) pairs among the argmax selections over `m`.
    pub fn unique_ratio(&self) -> f64 {
        let (f, b) = self.argmax();
        let mut seen = std::collections::BTreeSet::new();
        seen.extend(f.iter().map(|&k| (0u8, k)));
        seen.extend(b.iter().map(|&k| (1u8, k)));
        seen.len() as f64 / self.m().max(1) as f64
    }

    const MAGIC: [u8; 8] = *b"LMSEL001";

    /// Magic, K0, m_fwd, m_bwd, epoch, seed (u64 LE), directed flag, then the
    /// forward and backward logits row-major as f64 LE.
    pub fn write_checkpoint<W: Write>(&self, epoch: usize, seed: u64, mut out: W) -> std::io::Result<()> {
        out.write_all(&Self::MAGIC)?;
        for x in [self.k0 as u64, self.m_fwd as u64, self.m_bwd as u64, epoch as u64, seed] {
            out.write_all(&x.to_le_bytes())?;
        }
        out.write_all(&[self.directed as u8])?;
        write_f64s(&mut out, &self.w_fwd)?;
        write_f64s(&mut out, &self.w_bwd)
    }

    /// Returns the selector with its epoch and seed.
    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(Self, usize, u64), CompressorError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if magic != Self::MAGIC {
            return Err(CompressorError::BadCheckpoint("bad magic".into()));
        }
        let k0 = read_u64(&mut input)? as usize;
        let m_fwd = read_u64(&mut input)? as usize;
        let m_bwd = read_u64(&mut input)? as usize;
        let epoch = read_u64(&mut input)? as usize;
        let seed = read_u64(&mut input)?;
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        let w_fwd = read_f64s(&mut input, m_fwd * k0)?;
        let w_bwd = read_f64s(&mut input, m_bwd * k0)?;
        Ok((Self::from_logits(k0, flag[0] == 1, w_fwd, w_bwd)?, epoch, seed))
    }
}

pub fn init_logits(k0: usize, m: usize, directed: bool, scheme: InitScheme, seed: u64) -> Result<Selector, CompressorError> {
    if m == 0 {
        return Err(CompressorError::ZeroM);
    }
    let (m_fwd, m_bwd) = split_m(m, directed);
    let widest = m_fwd.max(m_bwd);
    if widest > k0 {
        return Err(CompressorError::MExceedsPool { m: widest, k0 });
    }
    let mut r = rng::seeded(seed);
    let noise = Normal::new(0.0, INIT_NOISE_STD).expect("valid std");
    let mut rows = |m_dir: usize| -> Vec<f64> {
        let mut w = vec![0.0; m_dir * k0];
        for i in 0..m_dir {
            let row = &mut w[i * k0..(i + 1) * k0];
            match scheme {
                InitScheme::BlockSparse => {
                    for x in row.iter_mut() {
                        *x = noise.sample(&mut r);
                    }
                    for x in &mut row[i * k0 / m_dir..(i + 1) * k0 / m_dir] {
                        *x += INIT_LOGIT;
                    }
                }
                InitScheme::IdentityFirstM => row[i] = INIT_LOGIT,
            }
        }
        w
    };
    let w_fwd = rows(m_fwd);
    let w_bwd = rows(m_bwd);
    Ok(Selector {
        k0,
        directed,
        m_fwd,
        m_bwd,
        w_fwd,
        w_bwd,
    })
}

/// Gumbel perturbations for every logit, laid out like the selector.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise {
    pub fwd: Vec<f64>,
    pub bwd: Vec<f64>,
}

impl GumbelNoise {
    pub fn draw(sel: &Selector, r: &mut rng::Rng) -> Self {
        let mut gumbel = |len: usize| -> Vec<f64> {
            (0..len)
                .map(|_| {
                    let u: f64 = r.random::<f64>().max(f64::MIN_POSITIVE);
                    -(-u.ln()).ln()
                })
                .collect()
        };
        let fwd = gumbel(sel.w_fwd.len());
        let bwd = gumbel(sel.w_bwd.len());
        Self { fwd, bwd }
    }

    pub fn zeros(sel: &Selector) -> Self {
        Self {
            fwd: vec![0.0; sel.w_fwd.len()],
            bwd: vec![0.0; sel.w_bwd.len()],
        }
    }
}

/// Relaxed rows `p = softmax((W + g) / tau)` and their argmax columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub soft_fwd: Vec<f64>,
    pub soft_bwd: Vec<f64>,
    pub hard_fwd: Vec<usize>,
    pub hard_bwd: Vec<usize>,
}

impl Sample {
    /// The hard rows as dense one-hot matrices.
    pub fn hard_matrices(&self, k0: usize) -> (Vec<f64>, Vec<f64>) {
        let dense = |cols: &[usize]| {
            let mut a = vec![0.0; cols.len() * k0];
            for (i, &k) in cols.iter().enumerate() {
                a[i * k0 + k] = 1.0;
            }
            a
        };
        (dense(&self.hard_fwd), dense(&self.hard_bwd))
    }
}

pub fn relax(sel: &Selector, tau: f64, noise: &GumbelNoise) -> Sample {
    let k0 = sel.k0;
    let go = |w: &[f64], g: &[f64]| {
        let z: Vec<f64> = w.iter().zip(g).map(|(a, b)| (a + b) / tau).collect();
        (softmax_rows(&z, k0), argmax_rows(&z, k0))
    };
    let (soft_fwd, hard_fwd) = go(&sel.w_fwd, &noise.fwd);
    let (soft_bwd, hard_bwd) = go(&sel.w_bwd, &noise.bwd);
    Sample {
        soft_fwd,
        soft_bwd,
        hard_fwd,
        hard_bwd,
    }
}

/// Draws fresh Gumbel noise and relaxes at temperature `tau`.
pub fn sample_selection(sel: &Selector, tau: f64, r: &mut rng::Rng) -> Sample {
    relax(sel, tau, &GumbelNoise::draw(sel, r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardMode {
    /// Hard one-hot rows forward, soft relaxation backward.
    StraightThrough,
    /// Soft rows in both passes.
    Soft,
}

/// What the compressed heuristic is pulled toward.
#[derive(Debug, Clone, Copy)]
pub enum GapTarget<'a> {
    /// Full-pool ALT.
    Teacher,
    /// True distances, one per batch entry.
    Distance(&'a [f64]),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda_cond: f64,
    pub lambda_uniq: f64,
    pub lambda_cov: f64,
    /// Sharpness of the smoothed covering radius.
    pub cov_beta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_cond: 0.01,
            lambda_uniq: 0.0,
            lambda_cov: 0.0,
            cov_beta: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub gap: f64,
    pub entropy: f64,
    pub overlap: f64,
    pub cover: f64,
    pub grad_fwd: Vec<f64>,
    pub grad_bwd: Vec<f64>,
}

/// Backpropagates `dL/dp` through `p = softmax(z)` row by row, scaled by
/// `dz/dW`.
fn softmax_backward(p: &[f64], dp: &[f64], k0: usize, scale: f64, out: &mut [f64]) {
    for ((pr, gr), o) in p.chunks(k0).zip(dp.chunks(k0)).zip(out.chunks_mut(k0)) {
        let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for j in 0..k0 {
            o[j] += scale * pr[j] * (gr[j] - dot);
        }
    }
}

fn check_query(labels: &LabelTable, s: usize, t: usize) -> Result<(), CompressorError> {
    for k in 0..labels.k0() {
        for v in [s, t] {
            if is_sentinel(labels.d_out(k, v)) || is_sentinel(labels.d_in(k, v)) {
                return Err(CompressorError::NonFiniteLabels { s, t });
            }
        }
    }
    Ok(())
}

/// Loss and analytic gradient for one batch, with fixed Gumbel noise.
///
/// `loss = mean (target - h_A)_+ + l_cond R_ent + l_uniq R_uniq + l_cov r~`.
/// The outer max routes its gradient to the first maximizing row (forward
/// rows before backward rows), and only while that row's term is positive.
/// The positive part passes gradient only while the gap is positive. The
/// regularizers act on the temperature-free `softmax(W)`.
#[allow(clippy::too_many_arguments)]
pub fn loss_and_grad(
    sel: &Selector,
    labels: &LabelTable,
    batch: &[(usize, usize)],
    tau: f64,
    cfg: &LossConfig,
    noise: &GumbelNoise,
    mode: ForwardMode,
    target: GapTarget<'_>,
) -> Result<LossGrad, CompressorError> {
    if batch.is_empty() {
        return Err(CompressorError::EmptyBatch);
    }
    if tau.is_nan() || tau <= 0.0 {
        return Err(CompressorError::BadTemperature(tau));
    }
    if let GapTarget::Distance(d) = target {
        assert_eq!(d.len(), batch.len(), "one distance per batch entry");
    }
    let k0 = sel.k0;
    let directed = labels.is_directed();
    let sample = relax(sel, tau, noise);
    let (a_fwd, a_bwd) = match mode {
        ForwardMode::StraightThrough => sample.hard_matrices(k0),
        ForwardMode::Soft => (sample.soft_fwd.clone(), sample.soft_bwd.clone()),
    };
    let mut dp_fwd = vec![0.0; a_fwd.len()];
    let mut dp_bwd = vec![0.0; a_bwd.len()];
    let all: Vec<usize> = (0..k0).collect();
    let inv_b = 1.0 / batch.len() as f64;
    let mut gap_sum = 0.0;

    for (q, &(s, t)) in batch.iter().enumerate() {
        check_query(labels, s, t)?;
        // Forward rows mix d(l, .), backward rows mix d(., l).
        let mut best: Option<(bool, usize, f64, f64)> = None;
        for (backward, a, m_dir) in [(false, &a_fwd, sel.m_fwd), (true, &a_bwd, sel.m_bwd)] {
            for i in 0..m_dir {
                let row = &a[i * k0..(i + 1) * k0];
                let (mut ys, mut yt) = (0.0, 0.0);
                for k in 0..k0 {
                    if row[k] == 0.0 {
                        continue;
                    }
                    let (ds, dt) = if backward {
                        (labels.d_in(k, s), labels.d_in(k, t))
                    } else {
                        (labels.d_out(k, s), labels.d_out(k, t))
                    };
                    ys += row[k] * ds;
                    yt += row[k] * dt;
                }
                let (term, sign) = match (directed, backward) {
                    (false, _) => ((ys - yt).abs(), (ys - yt).signum()),
                    (true, false) => (yt - ys, 1.0),
                    (true, true) => (ys - yt, 1.0),
                };
                if best.is_none_or(|b| term > b.2) {
                    best = Some((backward, i, term, sign));
                }
            }
        }
        let (backward, i, term, sign) = best.expect("selector has rows");
        let h_a = term.max(0.0);
        let goal = match target {
            GapTarget::Teacher => h_alt(labels, &all, &all, s, t),
            GapTarget::Distance(d) => d[q],
        };
        let gap = goal - h_a;
        if gap <= 0.0 {
            continue;
        }
        gap_sum += gap;
        if term <= 0.0 {
            continue;
        }
        let dp = if backward { &mut dp_bwd } else { &mut dp_fwd };
        for k in 0..k0 {
            let dterm = match (directed, backward) {
                (false, _) => sign * (labels.d_out(k, s) - labels.d_out(k, t)),
                (true, false) => labels.d_out(k, t) - labels.d_out(k, s),
                (true, true) => labels.d_in(k, s) - labels.d_in(k, t),
            };
            dp[i * k0 + k] -= inv_b * dterm;
        }
    }

    let mut grad_fwd = vec![0.0; sel.w_fwd.len()];
    let mut grad_bwd = vec![0.0; sel.w_bwd.len()];
    softmax_backward(&sample.soft_fwd, &dp_fwd, k0, 1.0 / tau, &mut grad_fwd);
    softmax_backward(&sample.soft_bwd, &dp_bwd, k0, 1.0 / tau, &mut grad_bwd);

    let (q_fwd, q_bwd) = sel.soft_rows();
    let rows = sel.m().max(1) as f64;

    let mut entropy = 0.0;
    for (q_rows, w_len, grad) in [(&q_fwd, sel.m_fwd, &mut grad_fwd), (&q_bwd, sel.m_bwd, &mut grad_bwd)] {
        for i in 0..w_len {
            let q = &q_rows[i * k0..(i + 1) * k0];
            let h: f64 = -q.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>();
            entropy += h / rows;
            if cfg.lambda_cond > 0.0 {
                for j in 0..k0 {
                    let log_q = if q[j] > 0.0 { q[j].ln() } else { 0.0 };
                    grad[i * k0 + j] += cfg.lambda_cond / rows * (-q[j] * (log_q + h));
                }
            }
        }
    }

    let mut overlap = 0.0;
    for (q_rows, m_dir, grad) in [(&q_fwd, sel.m_fwd, &mut grad_fwd), (&q_bwd, sel.m_bwd, &mut grad_bwd)] {
        let mut col_sum = vec![0.0; k0];
        for row in q_rows.chunks(k0) {
            for (c, x) in col_sum.iter_mut().zip(row) {
                *c += x;
            }
        }
        // sum_{i<j} <q_i, q_j> = (|sum q|^2 - sum |q_i|^2) / 2
        let total: f64 = col_sum.iter().map(|c| c * c).sum();
        let own: f64 = q_rows.iter().map(|x| x * x).sum();
        overlap += 0.5 * (total - own);
        if cfg.lambda_uniq > 0.0 && m_dir > 1 {
            let dq: Vec<f64> = q_rows
                .chunks(k0)
                .flat_map(|row| row.iter().zip(&col_sum).map(|(x, c)| c - x).collect::<Vec<_>>())
                .collect();
            softmax_backward(q_rows, &dq, k0, cfg.lambda_uniq, grad);
        }
    }

    let mut cover = 0.0;
    if cfg.lambda_cov > 0.0 {
        let q_all: Vec<f64> = q_fwd.iter().chain(&q_bwd).copied().collect();
        let (value, dq) = soft_cover(labels, &q_all, cfg.cov_beta, true);
        cover = value;
        let dq = dq.expect("gradient requested");
        let split = q_fwd.len();
        softmax_backward(&q_fwd, &dq[..split], k0, cfg.lambda_cov, &mut grad_fwd);
        softmax_backward(&q_bwd, &dq[split..], k0, cfg.lambda_cov, &mut grad_bwd);
    }

    let gap = gap_sum * inv_b;
    Ok(LossGrad {
        loss: gap + cfg.lambda_cond * entropy + cfg.lambda_uniq * overlap + cfg.lambda_cov * cover,
        gap,
        entropy,
        overlap,
        cover,
        grad_fwd,
        grad_bwd,
    })
}

/// Smoothed covering radius of soft rows `q` (`R x K0`, all directions
/// stacked) and optionally its gradient with respect to `q`.
///
/// With `D` the (symmetrized on directed graphs) landmark distance and
/// `e_iv = sum_k q_ik D_kv`, the value is `(1/beta) log sum_v exp(beta s_v)`
/// where `s_v = -(1/beta) log sum_i exp(-beta e_iv)`. Vertices with an
/// unreachable pool landmark are left out.
fn soft_cover(labels: &LabelTable, q: &[f64], beta: f64, want_grad: bool) -> (f64, Option<Vec<f64>>) {
    let k0 = labels.k0();
    let rows = q.len() / k0;
    let n = labels.num_vertices();
    let dist = |k: usize, v: usize| -> Option<f64> {
        let out = labels.d_out(k, v);
        let back = labels.d_in(k, v);
        if is_sentinel(out) || is_sentinel(back) {
            None
        } else {
            Some(out.max(back))
        }
    };
    let mut verts = Vec::new();
    let mut d_cols: Vec<f64> = Vec::new();
    for v in 0..n {
        let col: Option<Vec<f64>> = (0..k0).map(|k| dist(k, v)).collect();
        if let Some(col) = col {
            verts.push(v);
            d_cols.extend(col);
        }
    }
    let mut s = Vec::with_capacity(verts.len());
    let mut e = vec![0.0; verts.len() * rows];
    for (j, col) in d_cols.chunks(k0).enumerate() {
        let ev = &mut e[j * rows..(j + 1) * rows];
        for (i, x) in ev.iter_mut().enumerate() {
            *x = q[i * k0..(i + 1) * k0].iter().zip(col).map(|(a, d)| a * d).sum();
        }
        let neg: Vec<f64> = ev.iter().map(|x| -beta * x).collect();
        s.push(-log_sum_exp(&neg) / beta);
    }
    let scaled: Vec<f64> = s.iter().map(|x| beta * x).collect();
    let value = log_sum_exp(&scaled) / beta;
    if !want_grad {
        return (value, None);
    }
    let mut a = vec![0.0; s.len()];
    softmax_into(&scaled, &mut a);
    let mut grad = vec![0.0; q.len()];
    let mut b = vec![0.0; rows];
    for (j, col) in d_cols.chunks(k0).enumerate() {
        let neg: Vec<f64> = e[j * rows..(j + 1) * rows].iter().map(|x| -beta * x).collect();
        softmax_into(&neg, &mut b);
        for i in 0..rows {
            let w = a[j] * b[i];
            if w == 0.0 {
                continue;
            }
            for (g, d) in grad[i * k0..(i + 1) * k0].iter_mut().zip(col) {
                *g += w * d;
            }
        }
    }
    (value, Some(grad))
}

/// Smoothed covering radius of the selector's `softmax(W)` rows.
pub fn smooth_covering_radius(labels: &LabelTable, sel: &Selector, beta: f64) -> f64 {
    let (f, b) = sel.soft_rows();
    let q: Vec<f64> = f.into_iter().chain(b).collect();
    soft_cover(labels, &q, beta, false).0
}

/// Hard-argmax deployment: a gather of the selected teacher rows.
pub fn deploy(sel: &Selector, labels: &LabelTable) -> CompressedLabels {
    let (f, b) = sel.argmax();
    CompressedLabels::from_selection(labels, &f, &b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossConfig,
    pub tau_start: f64,
    pub tau_end: f64,
    pub init: InitScheme,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    /// Epochs after which a copy of the selector is kept; 0 is the init.
    pub checkpoints: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 256,
            loss: LossConfig::default(),
            tau_start: 1.0,
            tau_end: 0.1,
            init: InitScheme::BlockSparse,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 42,
            checkpoints: Vec::new(),
        }
    }
}

impl TrainConfig {
    /// `tau_e = tau_start (tau_end / tau_start)^(e / E)`.
    pub fn tau(&self, epoch: usize) -> f64 {
        let frac = epoch as f64 / self.epochs.max(1) as f64;
        self.tau_start * (self.tau_end / self.tau_start).powf(frac)
    }
}

/// Where training pairs come from.
#[derive(Debug, Clone)]
pub enum TrainingQueries {
    /// Fresh uniform pairs over `vertices` every epoch.
    Resample { vertices: Vec<usize>, per_epoch: usize },
    /// The same pairs every epoch, reshuffled.
    Fixed(Vec<(usize, usize)>),
}

/// Default number of training pairs drawn per epoch.
pub const DEFAULT_PAIRS_PER_EPOCH: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epoch_loss: Vec<f64>,
    pub epoch_unique_ratio: Vec<f64>,
    pub epoch_tau: Vec<f64>,
    pub unique_ratio: f64,
    pub selected_fwd: Vec<usize>,
    pub selected_bwd: Vec<usize>,
    pub checkpoints: Vec<(usize, Selector)>,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub seed: u64,
}

impl TrainReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,loss,unique_ratio")?;
        for (e, (loss, u)) in self.epoch_loss.iter().zip(&self.epoch_unique_ratio).enumerate() {
            writeln!(out, "{},{loss},{u}", e + 1)?;
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(len: usize, cfg: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

fn epoch_pairs(queries: &TrainingQueries, r: &mut rng::Rng) -> Vec<(usize, usize)> {
    match queries {
        TrainingQueries::Resample { vertices, per_epoch } => (0..*per_epoch)
            .map(|_| loop {
                let s = vertices[r.random_range(0..vertices.len())];
                let t = vertices[r.random_range(0..vertices.len())];
                if s != t {
                    break (s, t);
                }
            })
            .collect(),
        TrainingQueries::Fixed(pairs) => {
            use rand::seq::SliceRandom;
            let mut p = pairs.clone();
            p.shuffle(r);
            p
        }
    }
}

/// Trains a selector with `m` rows against the full-pool teacher.
pub fn train(labels: &LabelTable, m: usize, cfg: &TrainConfig, queries: &TrainingQueries) -> Result<(Selector, TrainReport), CompressorError> {
    let mut sel = init_logits(labels.k0(), m, labels.is_directed(), cfg.init, cfg.seed)?;
    match queries {
        TrainingQueries::Resample { vertices, .. } if vertices.len() < 2 => return Err(CompressorError::TooFewVertices),
        TrainingQueries::Fixed(p) if p.is_empty() && cfg.epochs > 0 => return Err(CompressorError::EmptyBatch),
        _ => {}
    }
    let mut report = TrainReport {
        epoch_loss: Vec::with_capacity(cfg.epochs),
        epoch_unique_ratio: Vec::with_capacity(cfg.epochs),
        epoch_tau: Vec::with_capacity(cfg.epochs),
        unique_ratio: 0.0,
        selected_fwd: Vec::new(),
        selected_bwd: Vec::new(),
        checkpoints: Vec::new(),
        adam_betas: (cfg.beta1, cfg.beta2),
        adam_eps: cfg.eps,
        seed: cfg.seed,
    };
    if cfg.checkpoints.contains(&0) {
        report.checkpoints.push((0, sel.clone()));
    }
    let split = sel.w_fwd.len();
    let mut params: Vec<f64> = sel.w_fwd.iter().chain(&sel.w_bwd).copied().collect();
    let mut adam = Adam::new(params.len(), cfg);
    let mut grad = vec![0.0; params.len()];

    for epoch in 0..cfg.epochs {
        let tau = cfg.tau(epoch);
        let mut pair_rng = rng::seeded(rng::derive_seed(cfg.seed, 2 * epoch as u64 + 1));
        let mut noise_rng = rng::seeded(rng::derive_seed(cfg.seed, 2 * epoch as u64 + 2));
        let pairs = epoch_pairs(queries, &mut pair_rng);
        let mut total = 0.0;
        for batch in pairs.chunks(cfg.batch_size.max(1)) {
            let noise = GumbelNoise::draw(&sel, &mut noise_rng);
            let lg = loss_and_grad(&sel, labels, batch, tau, &cfg.loss, &noise, ForwardMode::StraightThrough, GapTarget::Teacher)?;
            let finite = lg.loss.is_finite() && lg.grad_fwd.iter().chain(&lg.grad_bwd).all(|g| g.is_finite());
            if !finite {
                report.unique_ratio = sel.unique_ratio();
                (report.selected_fwd, report.selected_bwd) = sel.argmax();
                return Err(CompressorError::Diverged {
                    epoch: epoch + 1,
                    report: Box::new(report),
                });
            }
            grad[..split].copy_from_slice(&lg.grad_fwd);
            grad[split..].copy_from_slice(&lg.grad_bwd);
            adam.update(&mut params, &grad);
            sel.w_fwd.copy_from_slice(&params[..split]);
            sel.w_bwd.copy_from_slice(&params[split..]);
            total += lg.loss * batch.len() as f64;
        }
        report.epoch_loss.push(total / pairs.len().max(1) as f64);
        report.epoch_unique_ratio.push(sel.unique_ratio());
        report.epoch_tau.push(tau);
        if cfg.checkpoints.contains(&(epoch + 1)) {
            report.checkpoints.push((epoch + 1, sel.clone()));
        }
        log::debug!("epoch {} tau {tau:.4} loss {:.6}", epoch + 1, report.epoch_loss[epoch]);
    }
    report.unique_ratio = sel.unique_ratio();
    (report.selected_fwd, report.selected_bwd) = sel.argmax();
    Ok((sel, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen_path;
    use crate::heuristic::{h_compressed, AltSubset};

    fn p7() -> LabelTable {
        LabelTable::compute(&gen_path(7).unwrap(), &[0, 2, 4, 6]).unwrap()
    }

    #[test]
    fn identity_init_argmax() {
        for (k0, m) in [(4, 4), (32, 8), (64, 16)] {
            let sel = init_logits(k0, m, false, InitScheme::IdentityFirstM, 1).unwrap();
            assert_eq!(sel.argmax().0, (0..m).collect::<Vec<_>>());
            let dir = init_logits(k0, m, true, InitScheme::IdentityFirstM, 1).unwrap();
            assert_eq!(dir.argmax(), ((0..m / 2).collect(), (0..m - m / 2).collect()));
        }
    }

    #[test]
    fn block_sparse_rows_stay_in_their_block() {
        let sel = init_logits(32, 8, false, InitScheme::BlockSparse, 7).unwrap();
        for (i, k) in sel.argmax().0.into_iter().enumerate() {
            assert!((4 * i..4 * i + 4).contains(&k));
        }
        assert!(matches!(init_logits(4, 5, false, InitScheme::BlockSparse, 0), Err(CompressorError::MExceedsPool { .. })));
        assert!(init_logits(4, 8, true, InitScheme::BlockSparse, 0).is_ok());
    }

    #[test]
    fn hard_rows_are_one_hot() {
        let sel = init_logits(6, 3, false, InitScheme::BlockSparse, 3).unwrap();
        let mut r = rng::seeded(5);
        for _ in 0..20 {
            let s = sample_selection(&sel, 0.5, &mut r);
            let (hard, _) = s.hard_matrices(6);
            for row in hard.chunks(6) {
                assert_eq!(row.iter().sum::<f64>(), 1.0);
                assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 1);
            }
            for row in s.soft_fwd.chunks(6) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_noise_low_temperature_is_argmax() {
        let sel = init_logits(8, 4, false, InitScheme::BlockSparse, 11).unwrap();
        let s = relax(&sel, 1e-4, &GumbelNoise::zeros(&sel));
        assert_eq!(s.hard_fwd, sel.argmax().0);
        for (row, &k) in s.soft_fwd.chunks(8).zip(&s.hard_fwd) {
            assert!((row[k] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_selection_has_zero_gap() {
        let labels = p7();
        let sel = Selector::one_hot(4, false, &[0, 1, 2, 3], &[]);
        let batch: Vec<(usize, usize)> = (0..7).flat_map(|s| (0..7).map(move |t| (s, t))).filter(|(s, t)| s != t).collect();
        let cfg = LossConfig { lambda_cond: 0.0, ..LossConfig::default() };
        let lg = loss_and_grad(&sel, &labels, &batch, 1.0, &cfg, &GumbelNoise::zeros(&sel), ForwardMode::StraightThrough, GapTarget::Teacher).unwrap();
        assert_eq!(lg.gap, 0.0);
        assert!(lg.loss >= 0.0);
        assert!(loss_and_grad(&sel, &labels, &[], 1.0, &cfg, &GumbelNoise::zeros(&sel), ForwardMode::Soft, GapTarget::Teacher).is_err());
    }

    #[test]
    fn deploy_gathers_teacher_rows() {
        let labels = p7();
        let sel = Selector::one_hot(4, false, &[3, 1, 3], &[]);
        let y = deploy(&sel, &labels);
        assert_eq!(y.fwd(2), &[4.0, 0.0, 4.0]);
        let alt = AltSubset::new(&labels, vec![1, 3]);
        for u in 0..7 {
            for t in 0..7 {
                assert_eq!(h_compressed(&y, u, t), alt.value(u, t));
            }
        }
    }

    #[test]
    fn zero_epochs_returns_init() {
        let labels = p7();
        let cfg = TrainConfig { epochs: 0, init: InitScheme::IdentityFirstM, ..TrainConfig::default() };
        let q = TrainingQueries::Resample { vertices: (0..7).collect(), per_epoch: 16 };
        let (sel, report) = train(&labels, 2, &cfg, &q).unwrap();
        assert_eq!(sel, init_logits(4, 2, false, InitScheme::IdentityFirstM, cfg.seed).unwrap());
        assert!(report.epoch_loss.is_empty());
        assert_eq!(report.unique_ratio, 1.0);
    }

    #[test]
    fn training_is_deterministic_and_checkpoints() {
        let labels = p7();
        let cfg = TrainConfig { epochs: 5, batch_size: 8, checkpoints: vec![0, 1, 5], ..TrainConfig::default() };
        let q = TrainingQueries::Resample { vertices: (0..7).collect(), per_epoch: 32 };
        let (a, ra) = train(&labels, 2, &cfg, &q).unwrap();
        let (b, rb) = train(&labels, 2, &cfg, &q).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert_eq!(ra.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(), vec![0, 1, 5]);
        assert!(ra.epoch_loss.iter().all(|&l| l >= 0.0));
        assert!(ra.epoch_tau.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn checkpoint_round_trip() {
        let sel = init_logits(5, 4, true, InitScheme::BlockSparse, 2).unwrap();
        let mut buf = Vec::new();
        sel.write_checkpoint(10, 99, &mut buf).unwrap();
        let (back, epoch, seed) = Selector::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!((back, epoch, seed), (sel, 10, 99));
    }

    #[test]
    fn one_hot_cover_is_near_exact() {
        let labels = p7();
        let sel = Selector::one_hot(4, false, &[1, 2], &[]);
        let beta = 50.0;
        let r = smooth_covering_radius(&labels, &sel, beta);
        assert!(r <= 2.0 + 7f64.ln() / beta + 1e-12);
        assert!(r >= 2.0 - 2f64.ln() / beta - 1e-12);
    }
}
