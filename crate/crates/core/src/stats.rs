//! Paired significance and equivalence tests.

use std::io::Write;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("p-value {0} outside (0, 1]")]
    BadP(f64),
    #[error("rate {0} outside (0, 1)")]
    BadRate(f64),
    #[error("non-finite observation")]
    NonFinite,
}

/// Observations paired by index.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSamples {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PairedSamples {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self, StatsError> {
        if a.len() != b.len() {
            return Err(StatsError::LengthMismatch(a.len(), b.len()));
        }
        if a.iter().chain(&b).any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        Ok(Self { a, b })
    }

    pub fn differences(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(x, y)| x - y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMethod {
    Wilcoxon,
    Fisher,
    Stouffer,
    Tost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    /// Normal deviate, where the test has one.
    pub z: Option<f64>,
    /// Sign of the effect: +1 when `a` tends to exceed `b`.
    pub direction: f64,
    pub degenerate: bool,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Average ranks (1-based) of `x`, plus the tie-group sizes.
fn rank_with_ties(x: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut ranks = vec![0.0; x.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Minimum nonzero differences for the normal approximation.
pub const WILCOXON_MIN_N: usize = 6;

/// Wilcoxon signed-rank test on `a - b` with zero differences dropped, tie
/// correction and a continuity correction.
///
/// Two-sided uses `T = min(R+, R-)`. One-sided tests the alternative that
/// `a` exceeds `b` using `R+`.
pub fn wilcoxon_signed_rank(samples: &PairedSamples, two_sided: bool) -> Result<TestResult, StatsError> {
    let d: Vec<f64> = samples.differences().into_iter().filter(|&x| x != 0.0).collect();
    if d.is_empty() {
        return Ok(TestResult {
            method: TestMethod::Wilcoxon,
            statistic: 0.0,
            p_value: 1.0,
            z: Some(0.0),
            direction: 0.0,
            degenerate: true,
        });
    }
    if d.len() < WILCOXON_MIN_N {
        return Err(StatsError::TooFew {
            needed: WILCOXON_MIN_N,
            got: d.len(),
        });
    }
    let n = d.len() as f64;
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let (ranks, ties) = rank_with_ties(&abs);
    let r_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let r_minus = n * (n + 1.0) / 2.0 - r_plus;
    let mean = n * (n + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let se = ((n * (n + 1.0) * (2.0 * n + 1.0) - 0.5 * tie_term) / 24.0).sqrt();
    let normal = std_normal();
    let (statistic, z, p) = if two_sided {
        let t = r_plus.min(r_minus);
        let corr = 0.5 * (t - mean).signum();
        let z = if se > 0.0 { (t - mean - corr) / se } else { 0.0 };
        (t, z, (2.0 * normal.cdf(-z.abs())).min(1.0))
    } else {
        let z = if se > 0.0 { (r_plus - mean - 0.5) / se } else { 0.0 };
        (r_plus, z, normal.cdf(-z))
    };
    Ok(TestResult {
        method: TestMethod::Wilcoxon,
        statistic,
        p_value: p,
        z: Some(z),
        direction: (r_plus - r_minus).signum(),
        degenerate: false,
    })
}

fn clamp_p(p: f64) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(StatsError::BadP(p));
    }
    if p == 0.0 {
        log::warn!("p-value of exactly 0 clamped to the smallest positive double");
        return Ok(f64::MIN_POSITIVE);
    }
    Ok(p)
}

/// Fisher's method: `-2 sum ln p` against chi-squared with `2k` degrees.
pub fn combine_fisher(ps: &[f64]) -> Result<TestResult, StatsError> {
    if ps.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    let mut stat = 0.0;
    for &p in ps {
        stat -= 2.0 * clamp_p(p)?.ln();
    }
    let chi = ChiSquared::new(2.0 * ps.len() as f64).expect("positive dof");
    Ok(TestResult {
        method: TestMethod::Fisher,
        statistic: stat,
        p_value: chi.sf(stat).clamp(0.0, 1.0),
        z: None,
        direction: 0.0,
        degenerate: false,
    })
}

/// Stouffer's method on two-sided p-values: each contributes
/// `sign * Phi^-1(1 - p/2)`, combined as `sum z / sqrt(k)` and tested
/// two-sided.
pub fn combine_stouffer(ps: &[f64], directions: &[f64]) -> Result<TestResult, StatsError> {
    if ps.is_empty() {
        return Err(StatsError::TooFew { needed: 1, got: 0 });
    }
    if ps.len() != directions.len() {
        return Err(StatsError::LengthMismatch(ps.len(), directions.len()));
    }
    let normal = std_normal();
    let mut sum = 0.0;
    for (&p, &dir) in ps.iter().zip(directions) {
        let p = clamp_p(p)?;
        let sign = if dir > 0.0 {
            1.0
        } else if dir < 0.0 {
            -1.0
        } else {
            0.0
        };
        sum -= sign * normal.inverse_cdf(p / 2.0);
    }
    let z = sum / (ps.len() as f64).sqrt();
    Ok(TestResult {
        method: TestMethod::Stouffer,
        statistic: z,
        p_value: (2.0 * normal.cdf(-z.abs())).min(1.0),
        z: Some(z),
        direction: z.signum(),
        degenerate: false,
    })
}

/// Benjamini-Hochberg step-up at rate `q`; flags in input order.
pub fn bh_fdr(ps: &[f64], q: f64) -> Result<Vec<bool>, StatsError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(StatsError::BadRate(q));
    }
    if let Some(&bad) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::BadP(bad));
    }
    let m = ps.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| ps[i].total_cmp(&ps[j]));
    let cutoff = (0..m).rev().find(|&rank| ps[order[rank]] <= (rank + 1) as f64 * q / m as f64);
    let mut flags = vec![false; m];
    if let Some(last) = cutoff {
        for &i in &order[..=last] {
            flags[i] = true;
        }
    }
    Ok(flags)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TostResult {
    pub mean: f64,
    pub se: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    /// The larger of the two one-sided p-values.
    pub p_value: f64,
    pub equivalent: bool,
    pub degenerate: bool,
}

/// Paired two one-sided t-tests of `|mean difference| < delta`.
pub fn tost_paired(differences: &[f64], delta: f64, alpha: f64) -> Result<TostResult, StatsError> {
    let n = differences.len();
    if n < 2 {
        return Err(StatsError::TooFew { needed: 2, got: n });
    }
    if differences.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mean = differences.iter().sum::<f64>() / n as f64;
    let var = differences.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    if se == 0.0 {
        let inside = mean.abs() < delta;
        let p = if inside { 0.0 } else { 1.0 };
        return Ok(TostResult {
            mean,
            se,
            p_lower: p,
            p_upper: p,
            p_value: p,
            equivalent: inside,
            degenerate: true,
        });
    }
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive dof");
    let p_lower = t.sf((mean + delta) / se);
    let p_upper = t.cdf((mean - delta) / se);
    let p_value = p_lower.max(p_upper);
    Ok(TostResult {
        mean,
        se,
        p_lower,
        p_upper,
        p_value,
        equivalent: p_lower < alpha && p_upper < alpha,
        degenerate: false,
    })
}

/// One row of the cross-seed summary table.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub label: String,
    pub fisher_p: f64,
    pub stouffer_p: f64,
    pub median_p: f64,
    pub fdr_flag: bool,
}

/// Combines per-seed `(p, direction)` pairs for each labelled comparison
/// and applies BH across the Fisher p-values.
pub fn summarize(groups: &[(String, Vec<(f64, f64)>)], q: f64) -> Result<Vec<SummaryRow>, StatsError> {
    let mut rows = Vec::with_capacity(groups.len());
    for (label, seeds) in groups {
        let ps: Vec<f64> = seeds.iter().map(|s| s.0).collect();
        let dirs: Vec<f64> = seeds.iter().map(|s| s.1).collect();
        let mut sorted = ps.clone();
        sorted.sort_by(f64::total_cmp);
        let k = sorted.len();
        let median_p = if k == 0 {
            f64::NAN
        } else if k % 2 == 1 {
            sorted[k / 2]
        } else {
            0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
        };
        rows.push(SummaryRow {
            label: label.clone(),
            fisher_p: combine_fisher(&ps)?.p_value,
            stouffer_p: combine_stouffer(&ps, &dirs)?.p_value,
            median_p,
            fdr_flag: false,
        });
    }
    let flags = bh_fdr(&rows.iter().map(|r| r.fisher_p).collect::<Vec<_>>(), q)?;
    for (r, f) in rows.iter_mut().zip(flags) {
        r.fdr_flag = f;
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "comparison,fisher_p,stouffer_p,median_p,fdr_flag")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.label, r.fisher_p, r.stouffer_p, r.median_p, r.fdr_flag as u8)?;
    }
    Ok(())
}
