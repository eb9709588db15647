//! Matched-memory benchmark cells, query sampling and the training-drift
//! diagnostics.
//!
//! At `B` bytes per vertex with 4-byte floats, AAC gets `m = B/4`
//! compressed values, directed ALT gets `K = B/8` landmarks (two tables) and
//! undirected ALT `K = B/4`. CDH entries cost 9 bytes, so `r = floor(B/9)`.
//! Evaluation always uses the 64-bit labels; the 4-byte width only enters
//! the byte accounting.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cdh::{build_cdh, CdhError, CdhMode};
use crate::compressor::{self, deploy, init_logits, CompressorError, InitScheme, TrainConfig, TrainingQueries};
use crate::graph::{self, Graph};
use crate::heuristic::{AltSubset, Heuristic, HeuristicSpec};
use crate::labels::{LabelError, LabelTable};
use crate::landmarks::{self, fps_select, LandmarkError};
use crate::rng;
use crate::search::{audit_with_reference, reference, AuditRecord, QueryReference, SearchError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid budget: {0}")]
    Budget(String),
    #[error("invalid query request: {0}")]
    Queries(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("methods in one cell saw different query sets")]
    QueryMismatch,
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Landmark(#[from] LandmarkError),
    #[error(transparent)]
    Compressor(#[from] CompressorError),
    #[error(transparent)]
    Cdh(#[from] CdhError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetSpec {
    pub bytes_per_vertex: usize,
    pub directed: bool,
}

impl BudgetSpec {
    pub fn new(bytes_per_vertex: usize, directed: bool) -> Result<Self, BenchError> {
        if bytes_per_vertex == 0 || !bytes_per_vertex.is_multiple_of(4) {
            return Err(BenchError::Budget(format!("{bytes_per_vertex} B/vertex is not a positive multiple of 4")));
        }
        let spec = Self { bytes_per_vertex, directed };
        if spec.alt_k() == 0 || spec.cdh_r() == 0 {
            return Err(BenchError::Budget(format!("{bytes_per_vertex} B/vertex leaves no landmark")));
        }
        Ok(spec)
    }

    pub fn aac_m(&self) -> usize {
        self.bytes_per_vertex / 4
    }

    pub fn alt_k(&self) -> usize {
        if self.directed {
            self.bytes_per_vertex / 8
        } else {
            self.bytes_per_vertex / 4
        }
    }

    pub fn cdh_r(&self) -> usize {
        self.bytes_per_vertex / 9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    Uniform,
    /// Endpoints mostly drawn from the highest-degree vertices.
    Hotspot,
    /// Endpoint probability proportional to `degree^1.5`.
    Powerlaw,
}

impl fmt::Display for QueryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryMode::Uniform => "uniform",
            QueryMode::Hotspot => "hotspot",
            QueryMode::Powerlaw => "powerlaw",
        })
    }
}

impl FromStr for QueryMode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(QueryMode::Uniform),
            "hotspot" => Ok(QueryMode::Hotspot),
            "powerlaw" => Ok(QueryMode::Powerlaw),
            other => Err(BenchError::Queries(format!("unknown query mode {other:?}"))),
        }
    }
}

/// Share of the component treated as the hotspot cluster.
pub const HOTSPOT_FRACTION: f64 = 0.01;
/// Probability that a hotspot-mode endpoint comes from the cluster.
pub const HOTSPOT_SHARE: f64 = 0.9;
pub const POWERLAW_EXPONENT: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    pub mode: QueryMode,
    pub pairs: Vec<(usize, usize)>,
    pub seed: u64,
}

impl QuerySet {
    /// SHA-256 over the pair list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for &(s, t) in &self.pairs {
            h.update((s as u64).to_le_bytes());
            h.update((t as u64).to_le_bytes());
        }
        graph::hex(&h.finalize())
    }
}

/// Draws `n` distinct-endpoint pairs inside the largest component.
pub fn sample_queries(graph: &Graph, n: usize, mode: QueryMode, seed: u64) -> Result<QuerySet, BenchError> {
    if n == 0 {
        return Err(BenchError::Queries("query count must be positive".into()));
    }
    let members = graph::components(graph).largest().to_vec();
    if members.len() < 2 {
        return Err(BenchError::Queries("component has fewer than 2 vertices".into()));
    }
    let mut r = rng::seeded(seed);
    let pairs = match mode {
        QueryMode::Uniform => draw_pairs(n, &mut r, |r| members[r.random_range(0..members.len())]),
        QueryMode::Hotspot => {
            let mut by_degree = members.clone();
            by_degree.sort_by(|&a, &b| graph.degree(b).cmp(&graph.degree(a)).then(a.cmp(&b)));
            let size = ((members.len() as f64 * HOTSPOT_FRACTION).ceil() as usize).max(2);
            let hot = &by_degree[..size.min(members.len())];
            draw_pairs(n, &mut r, |r| {
                if r.random::<f64>() < HOTSPOT_SHARE {
                    hot[r.random_range(0..hot.len())]
                } else {
                    members[r.random_range(0..members.len())]
                }
            })
        }
        QueryMode::Powerlaw => {
            let weights: Vec<f64> = members.iter().map(|&v| (graph.degree(v) as f64).powf(POWERLAW_EXPONENT)).collect();
            let dist = WeightedIndex::new(&weights).map_err(|e| BenchError::Queries(format!("degree weights: {e}")))?;
            draw_pairs(n, &mut r, |r| members[dist.sample(r)])
        }
    };
    Ok(QuerySet { mode, pairs, seed })
}

fn draw_pairs(n: usize, r: &mut rng::Rng, mut endpoint: impl FnMut(&mut rng::Rng) -> usize) -> Vec<(usize, usize)> {
    (0..n)
        .map(|_| {
            let s = endpoint(r);
            loop {
                let t = endpoint(r);
                if t != s {
                    break (s, t);
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Dijkstra,
    Alt,
    /// ALT on the first landmarks of the AAC teacher pool.
    AltFirstM,
    Aac,
    /// Identity rows on the first pool indices, untrained.
    AacForced,
    /// Identity init, then trained.
    AacIdentity,
    Cdh,
    CdhSub,
    CdhSubBpmx,
    /// Half the budget to ALT, half to AAC.
    Hybrid,
    GreedyMax,
    RandomSubset,
    FpsRr,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::Dijkstra,
        Method::Alt,
        Method::AltFirstM,
        Method::Aac,
        Method::AacForced,
        Method::AacIdentity,
        Method::Cdh,
        Method::CdhSub,
        Method::CdhSubBpmx,
        Method::Hybrid,
        Method::GreedyMax,
        Method::RandomSubset,
        Method::FpsRr,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Dijkstra => "dijkstra",
            Method::Alt => "alt",
            Method::AltFirstM => "alt_first_m",
            Method::Aac => "aac",
            Method::AacForced => "aac_forced",
            Method::AacIdentity => "aac_identity",
            Method::Cdh => "cdh",
            Method::CdhSub => "cdh_sub",
            Method::CdhSubBpmx => "cdh_sub_bpmx",
            Method::Hybrid => "hybrid",
            Method::GreedyMax => "greedy_max",
            Method::RandomSubset => "random_subset",
            Method::FpsRr => "fps_rr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| BenchError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpsStart {
    /// Lowest vertex id of the largest component.
    Canonical,
    Vertex(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Teacher pool size as a multiple of `m`.
    pub k0_factor: usize,
    /// CDH pivot pool size.
    pub cdh_pool: usize,
    pub train: TrainConfig,
    pub pairs_per_epoch: usize,
    pub fps_start: FpsStart,
    pub restarts: usize,
    pub validation_queries: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k0_factor: 4,
            cdh_pool: 64,
            train: TrainConfig::default(),
            pairs_per_epoch: compressor::DEFAULT_PAIRS_PER_EPOCH,
            fps_start: FpsStart::Canonical,
            restarts: 10,
            validation_queries: 100,
        }
    }
}

impl BenchConfig {
    /// FPS pool length that covers every method at the given budgets.
    pub fn pool_size(&self, budgets: &[BudgetSpec]) -> usize {
        budgets
            .iter()
            .map(|b| (self.k0_factor * b.aac_m()).max(b.alt_k()))
            .chain(std::iter::once(self.cdh_pool))
            .max()
            .unwrap_or(self.cdh_pool)
    }
}

/// One (graph, method, budget, seed) result with every per-query row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub graph_id: String,
    pub method: Method,
    pub budget: usize,
    pub seed: u64,
    pub mean_expansions: f64,
    pub dijkstra_mean_expansions: f64,
    pub reduction_pct: f64,
    pub violations: usize,
    pub suboptimal: usize,
    pub bytes_per_vertex: usize,
    pub query_hash: String,
    pub rows: Vec<AuditRecord>,
}

/// `100 (1 - method / dijkstra)` on mean expansions.
pub fn reduction_pct(method_mean: f64, dijkstra_mean: f64) -> f64 {
    100.0 * (1.0 - method_mean / dijkstra_mean)
}

/// Shared state for benchmarking many methods on one query set: the
/// Dijkstra references and an FPS landmark pool with its labels.
pub struct Cell<'g> {
    graph: &'g Graph,
    graph_id: String,
    queries: QuerySet,
    refs: Vec<QueryReference>,
    pool: LabelTable,
    members: Vec<usize>,
    cfg: BenchConfig,
}

impl<'g> Cell<'g> {
    pub fn new(graph: &'g Graph, graph_id: &str, queries: QuerySet, pool_size: usize, cfg: BenchConfig) -> Result<Self, BenchError> {
        let start = match cfg.fps_start {
            FpsStart::Canonical => landmarks::canonical_start(graph),
            FpsStart::Vertex(v) => v,
        };
        let size = graph::components(graph).largest().len();
        let pool = fps_select(graph, pool_size.min(size), start)?;
        let pool = LabelTable::compute(graph, &pool.landmark_ids)?;
        Self::with_pool(graph, graph_id, queries, pool, cfg)
    }

    /// Reuses an existing FPS pool, e.g. across seeds.
    pub fn with_pool(graph: &'g Graph, graph_id: &str, queries: QuerySet, pool: LabelTable, cfg: BenchConfig) -> Result<Self, BenchError> {
        let members = graph::components(graph).largest().to_vec();
        let refs = reference(graph, &queries.pairs)?;
        Ok(Self {
            graph,
            graph_id: graph_id.to_string(),
            queries,
            refs,
            pool,
            members,
            cfg,
        })
    }

    /// Uniform training pairs over the largest component.
    pub fn training_queries(&self) -> TrainingQueries {
        TrainingQueries::Resample {
            vertices: self.members.clone(),
            per_epoch: self.cfg.pairs_per_epoch,
        }
    }

    pub fn queries(&self) -> &QuerySet {
        &self.queries
    }

    /// Labels of the shared FPS pool.
    pub fn pool(&self) -> &LabelTable {
        &self.pool
    }

    pub fn references(&self) -> &[QueryReference] {
        &self.refs
    }

    fn train_cfg(&self, init: InitScheme, seed: u64) -> TrainConfig {
        TrainConfig {
            init,
            seed: rng::derive_seed(seed, 0xAAC),
            ..self.cfg.train.clone()
        }
    }

    /// Evaluates an arbitrary heuristic against the shared references.
    pub fn evaluate<H: Heuristic + ?Sized>(
        &self,
        method: Method,
        budget: usize,
        seed: u64,
        h: &H,
        bpmx: bool,
        bytes_per_vertex: usize,
    ) -> Result<BenchRecord, BenchError> {
        let rows = audit_with_reference(self.graph, &self.refs, h, bpmx)?;
        let n = rows.len().max(1) as f64;
        let mean = rows.iter().map(|r| r.method_expansions as f64).sum::<f64>() / n;
        let dij = rows.iter().map(|r| r.dijkstra_expansions as f64).sum::<f64>() / n;
        Ok(BenchRecord {
            graph_id: self.graph_id.clone(),
            method,
            budget,
            seed,
            mean_expansions: mean,
            dijkstra_mean_expansions: dij,
            reduction_pct: reduction_pct(mean, dij),
            violations: rows.iter().map(|r| r.heuristic_violations).sum(),
            suboptimal: rows.iter().filter(|r| r.suboptimal).count(),
            bytes_per_vertex,
            query_hash: self.queries.hash(),
            rows,
        })
    }

    /// Runs the full pipeline for one method at one budget.
    pub fn run(&self, method: Method, budget: BudgetSpec, seed: u64) -> Result<BenchRecord, BenchError> {
        let b = budget.bytes_per_vertex;
        let directed = self.graph.is_directed();
        let alt_bytes = |k: usize| if directed { 8 * k } else { 4 * k };
        let m = budget.aac_m();
        let k0 = (self.cfg.k0_factor * m).min(self.pool.k0());
        let teacher = self.pool.prefix(k0);
        let alt_k = budget.alt_k();
        match method {
            Method::Dijkstra => self.evaluate(method, b, seed, &HeuristicSpec::Zero, false, 0),
            Method::Alt => {
                let h = AltSubset::prefix(&self.pool, alt_k);
                self.evaluate(method, b, seed, &h, false, alt_bytes(alt_k))
            }
            Method::AltFirstM => {
                let k = if directed { m / 2 } else { m };
                let h = AltSubset::prefix(&teacher, k);
                self.evaluate(method, b, seed, &h, false, alt_bytes(k))
            }
            Method::AacForced => {
                let sel = init_logits(k0, m, directed, InitScheme::IdentityFirstM, seed)?;
                let y = deploy(&sel, &teacher);
                self.evaluate(method, b, seed, &y, false, y.bytes_per_vertex())
            }
            Method::Aac | Method::AacIdentity => {
                let init = if method == Method::Aac { InitScheme::BlockSparse } else { InitScheme::IdentityFirstM };
                let (sel, _) = compressor::train(&teacher, m, &self.train_cfg(init, seed), &self.training_queries())?;
                let y = deploy(&sel, &teacher);
                self.evaluate(method, b, seed, &y, false, y.bytes_per_vertex())
            }
            Method::Cdh | Method::CdhSub | Method::CdhSubBpmx => {
                let pivots = self.pool.prefix(self.cfg.cdh_pool);
                let cdh = build_cdh(&pivots, budget.cdh_r().min(pivots.k0()))?;
                let mode = if method == Method::Cdh { CdhMode::Strict } else { CdhMode::Substitution };
                let h = HeuristicSpec::Cdh { labels: &cdh, mode };
                self.evaluate(method, b, seed, &h, method == Method::CdhSubBpmx, cdh.bytes_per_vertex())
            }
            Method::Hybrid => {
                let half_k = (alt_k / 2).max(1);
                let half_m = (m / 2).max(if directed { 2 } else { 1 });
                let half_teacher = self.pool.prefix((self.cfg.k0_factor * half_m).min(self.pool.k0()));
                let cfg = self.train_cfg(InitScheme::BlockSparse, seed);
                let (sel, _) = compressor::train(&half_teacher, half_m, &cfg, &self.training_queries())?;
                let y = deploy(&sel, &half_teacher);
                let h = HeuristicSpec::Hybrid(
                    Box::new(HeuristicSpec::AltSubset(AltSubset::prefix(&self.pool, half_k))),
                    Box::new(HeuristicSpec::Compressed(&y)),
                );
                self.evaluate(method, b, seed, &h, false, alt_bytes(half_k) + y.bytes_per_vertex())
            }
            Method::GreedyMax => {
                let picked = landmarks::greedy_max_indices(&teacher, alt_k, &self.queries.pairs);
                let h = AltSubset::new(&teacher, picked);
                self.evaluate(method, b, seed, &h, false, alt_bytes(alt_k))
            }
            Method::RandomSubset => {
                let pool = landmarks::random_subset(self.graph, alt_k, rng::derive_seed(seed, 0x5AB))?;
                let labels = LabelTable::compute(self.graph, &pool.landmark_ids)?;
                self.evaluate(method, b, seed, &AltSubset::all(&labels), false, alt_bytes(alt_k))
            }
            Method::FpsRr => {
                let val = sample_queries(self.graph, self.cfg.validation_queries, QueryMode::Uniform, rng::derive_seed(seed, 0x7A1))?;
                let pool = landmarks::fps_random_restart(self.graph, alt_k, self.cfg.restarts, &val.pairs, seed)?;
                let labels = LabelTable::compute(self.graph, &pool.landmark_ids)?;
                self.evaluate(method, b, seed, &AltSubset::all(&labels), false, alt_bytes(alt_k))
            }
        }
    }
}

/// Samples uniform queries and runs one method.
pub fn run_cell(
    graph: &Graph,
    graph_id: &str,
    method: Method,
    cfg: &BenchConfig,
    budget: BudgetSpec,
    queries: QuerySet,
    seed: u64,
) -> Result<BenchRecord, BenchError> {
    let cell = Cell::new(graph, graph_id, queries, cfg.pool_size(&[budget]), cfg.clone())?;
    cell.run(method, budget, seed)
}

/// ALT on the first `m` (directed: `m/2`) landmarks of a `K0` FPS pool.
pub fn first_m_pool_arm(graph: &Graph, graph_id: &str, k0: usize, m: usize, queries: QuerySet, seed: u64, cfg: &BenchConfig) -> Result<BenchRecord, BenchError> {
    if m > k0 {
        return Err(BenchError::Budget(format!("m = {m} exceeds K0 = {k0}")));
    }
    let cell = Cell::new(graph, graph_id, queries, k0, cfg.clone())?;
    let k = if graph.is_directed() { m / 2 } else { m };
    let h = AltSubset::prefix(cell.pool(), k);
    let bytes = if graph.is_directed() { 8 * k } else { 4 * k };
    cell.evaluate(Method::AltFirstM, 4 * m, seed, &h, false, bytes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftRow {
    pub arm: String,
    pub seed: u64,
    pub epoch: Option<usize>,
    pub mean_expansions: f64,
    pub reduction_pct: f64,
    pub violations: usize,
    pub suboptimal: usize,
    pub unique_ratio: Option<f64>,
}

impl DriftRow {
    fn from_record(arm: &str, epoch: Option<usize>, unique_ratio: Option<f64>, r: &BenchRecord) -> Self {
        Self {
            arm: arm.to_string(),
            seed: r.seed,
            epoch,
            mean_expansions: r.mean_expansions,
            reduction_pct: r.reduction_pct,
            violations: r.violations,
            suboptimal: r.suboptimal,
            unique_ratio,
        }
    }
}

/// Compares FPS-ALT at matched memory, forced-first-m AAC and AAC trained to
/// each of `epochs` under every init in `inits`, one query set per seed.
#[allow(clippy::too_many_arguments)]
pub fn drift_diagnostic(
    graph: &Graph,
    k0: usize,
    m: usize,
    epochs: &[usize],
    seeds: &[u64],
    inits: &[InitScheme],
    queries_per_seed: usize,
    cfg: &BenchConfig,
) -> Result<Vec<DriftRow>, BenchError> {
    if m > k0 {
        return Err(BenchError::Budget(format!("m = {m} exceeds K0 = {k0}")));
    }
    let directed = graph.is_directed();
    let mut rows = Vec::new();
    for &seed in seeds {
        let queries = sample_queries(graph, queries_per_seed, QueryMode::Uniform, seed)?;
        let cell = Cell::new(graph, "drift", queries, k0, cfg.clone())?;
        let teacher = cell.pool();
        let k = if directed { m / 2 } else { m };
        let alt = cell.evaluate(Method::Alt, 4 * m, seed, &AltSubset::prefix(teacher, k), false, 4 * m)?;
        rows.push(DriftRow::from_record("fps_alt", None, None, &alt));
        let forced = init_logits(teacher.k0(), m, directed, InitScheme::IdentityFirstM, seed)?;
        let y = deploy(&forced, teacher);
        let rec = cell.evaluate(Method::AacForced, 4 * m, seed, &y, false, y.bytes_per_vertex())?;
        rows.push(DriftRow::from_record("aac_forced_first_m", None, Some(forced.unique_ratio()), &rec));
        for &init in inits {
            let arm = match init {
                InitScheme::BlockSparse => "aac_block_sparse",
                InitScheme::IdentityFirstM => "aac_identity_first_m",
            };
            let tc = TrainConfig {
                epochs: epochs.iter().copied().max().unwrap_or(0),
                checkpoints: epochs.to_vec(),
                ..cell.train_cfg(init, seed)
            };
            let (_, report) = compressor::train(teacher, m, &tc, &cell.training_queries())?;
            for (epoch, sel) in &report.checkpoints {
                let y = deploy(sel, teacher);
                let rec = cell.evaluate(Method::Aac, 4 * m, seed, &y, false, y.bytes_per_vertex())?;
                rows.push(DriftRow::from_record(arm, Some(*epoch), Some(sel.unique_ratio()), &rec));
            }
        }
    }
    Ok(rows)
}

pub const DRIFT_CSV_HEADER: &str = "arm,seed,epoch,mean_expansions,reduction_pct,violations,suboptimal,unique_ratio";

pub fn write_drift_csv<W: Write>(rows: &[DriftRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{DRIFT_CSV_HEADER}")?;
    for r in rows {
        let epoch = r.epoch.map(|e| e.to_string()).unwrap_or_default();
        let uniq = r.unique_ratio.map(|u| u.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{epoch},{},{},{},{},{uniq}",
            r.arm, r.seed, r.mean_expansions, r.reduction_pct, r.violations, r.suboptimal
        )?;
    }
    Ok(())
}

pub const CELL_CSV_HEADER: &str = "row_type,graph,method,budget,seed,query_id,s,t,dijkstra_cost,method_cost,expansions_method,expansions_dijkstra,violations,suboptimal,mean_expansions,dijkstra_mean_expansions,reduction_pct,bytes_per_vertex,query_hash";

/// One summary row per record followed by its per-query rows.
pub fn write_cell_csv<W: Write>(records: &[BenchRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CELL_CSV_HEADER}")?;
    for r in records {
        let key = format!("{},{},{},{}", r.graph_id, r.method, r.budget, r.seed);
        writeln!(
            out,
            "summary,{key},,,,,,,,{},{},{},{},{},{},{}",
            r.violations, r.suboptimal, r.mean_expansions, r.dijkstra_mean_expansions, r.reduction_pct, r.bytes_per_vertex, r.query_hash
        )?;
        for q in &r.rows {
            writeln!(
                out,
                "query,{key},{},{},{},{},{},{},{},{},{},,,,,",
                q.query_id, q.s, q.t, q.dijkstra_cost, q.method_cost, q.method_expansions, q.dijkstra_expansions, q.heuristic_violations, q.suboptimal as u8
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_sbm, Edge};

    #[test]
    fn budget_algebra() {
        for (b, r) in [(32, 3), (64, 7), (128, 14)] {
            let und = BudgetSpec::new(b, false).unwrap();
            let dir = BudgetSpec::new(b, true).unwrap();
            assert_eq!((und.aac_m(), und.alt_k(), und.cdh_r()), (b / 4, b / 4, r));
            assert_eq!((dir.aac_m(), dir.alt_k()), (b / 4, b / 8));
        }
        assert!(BudgetSpec::new(30, false).is_err());
        assert!(BudgetSpec::new(4, true).is_err());
    }

    #[test]
    fn uniform_queries_on_clique() {
        let k5 = gen_sbm(1, 5, 1.0, 0.0, 1.0, 1.0, 0).unwrap();
        let q = sample_queries(&k5, 50, QueryMode::Uniform, 42).unwrap();
        assert!(q.pairs.iter().all(|&(s, t)| s != t && s < 5 && t < 5));
        assert_eq!(q, sample_queries(&k5, 50, QueryMode::Uniform, 42).unwrap());
        assert_ne!(q.hash(), sample_queries(&k5, 50, QueryMode::Uniform, 43).unwrap().hash());
        assert!(sample_queries(&k5, 0, QueryMode::Uniform, 1).is_err());
    }

    #[test]
    fn hotspot_concentrates_on_hubs() {
        let g = gen_sbm(1, 300, 0.05, 0.0, 1.0, 2.0, 5).unwrap();
        let q = sample_queries(&g, 500, QueryMode::Hotspot, 1).unwrap();
        let mut members: Vec<usize> = graph::components(&g).largest().to_vec();
        members.sort_by(|&a, &b| g.degree(b).cmp(&g.degree(a)).then(a.cmp(&b)));
        let hot: Vec<usize> = members[..3].to_vec();
        let hits = q.pairs.iter().flat_map(|&(s, t)| [s, t]).filter(|v| hot.contains(v)).count();
        assert!(hits as f64 / 1000.0 > 0.8);
    }

    #[test]
    fn powerlaw_favours_the_star_center() {
        let leaves = 20;
        let edges = (1..=leaves).map(|v| Edge { source: 0, target: v, weight: 1.0 }).collect();
        let star = Graph::new(leaves + 1, false, edges).unwrap();
        let n = 4000;
        let q = sample_queries(&star, n, QueryMode::Powerlaw, 9).unwrap();
        let hub = (leaves as f64).powf(POWERLAW_EXPONENT);
        let total = hub + leaves as f64;
        let (p, leaf) = (hub / total, 1.0 / total);
        // s is the center with probability p; t is redrawn until it differs from s.
        let expected = 0.5 * (p + (1.0 - p) * p / (1.0 - leaf));
        let hits = q.pairs.iter().flat_map(|&(s, t)| [s, t]).filter(|&v| v == 0).count() as f64;
        let trials = 2.0 * n as f64;
        let sigma = (trials * expected * (1.0 - expected)).sqrt();
        assert!((hits - trials * expected).abs() < 3.0 * sigma, "{hits} vs {}", trials * expected);
        assert!(hits / trials > 10.0 / (leaves as f64 + 1.0));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("bogus".parse::<Method>().is_err());
    }

    #[test]
    fn zero_heuristic_cell_has_no_reduction() {
        let edges = (0..30).map(|i| Edge { source: i, target: (i + 1) % 30, weight: 1.0 + (i % 3) as f64 }).collect();
        let g = Graph::new(30, false, edges).unwrap();
        let q = sample_queries(&g, 20, QueryMode::Uniform, 3).unwrap();
        let cfg = BenchConfig { cdh_pool: 8, ..BenchConfig::default() };
        let budget = BudgetSpec::new(16, false).unwrap();
        let cell = Cell::new(&g, "ring", q, cfg.pool_size(&[budget]).min(30), cfg).unwrap();
        let dij = cell.run(Method::Dijkstra, budget, 3).unwrap();
        assert_eq!(dij.reduction_pct, 0.0);
        let alt = cell.run(Method::Alt, budget, 3).unwrap();
        assert_eq!(alt.query_hash, dij.query_hash);
        assert_eq!((alt.violations, alt.suboptimal), (0, 0));
        assert!(alt.reduction_pct > 0.0);
        let mut buf = Vec::new();
        write_cell_csv(&[dij], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 22);
        let cols = CELL_CSV_HEADER.split(',').count();
        assert!(text.lines().all(|l| l.split(',').count() == cols));
    }
}
