//! Landmark pools: farthest-point sampling and its variants, the greedy
//! query-adaptive oracle, and covering radii.
//!
//! FPS starts from a given vertex but does not include it. The first pick is
//! the vertex farthest from the start, and later picks are farthest from the
//! set chosen so far. All ties go to the lowest vertex id, so the pool is a
//! deterministic function of `(graph, start)` and shorter pools are prefixes
//! of longer ones. On directed graphs distances are symmetrized as
//! `max(d(l, v), d(v, l))`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{self, Graph};
use crate::heuristic::AltSubset;
use crate::labels::{dijkstra_sssp, is_sentinel, LabelError, LabelTable, SENTINEL};
use crate::rng;
use crate::search;

#[derive(Debug, Error)]
pub enum LandmarkError {
    #[error("start vertex {0} is not in the largest connected component")]
    StartOutsideComponent(usize),
    #[error("requested {requested} landmarks but the component has {available} vertices")]
    TooManyLandmarks { requested: usize, available: usize },
    #[error("at least one landmark is required")]
    NoLandmarks,
    #[error("validation query set is empty")]
    EmptyValidation,
    #[error("restart count must be at least 1")]
    NoRestarts,
    #[error("landmark subset is empty")]
    EmptySubset,
    #[error("subset index {index} out of range for a pool of {pool}")]
    IndexOutOfRange { index: usize, pool: usize },
    #[error("pool file: {0}")]
    Parse(String),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Search(#[from] search::SearchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMethod {
    Fps,
    FpsRandomRestart,
    RandomSubset,
    GreedyMax,
    Explicit,
}

impl fmt::Display for PoolMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolMethod::Fps => "fps",
            PoolMethod::FpsRandomRestart => "fps_random_restart",
            PoolMethod::RandomSubset => "random_subset",
            PoolMethod::GreedyMax => "greedy_max",
            PoolMethod::Explicit => "explicit",
        })
    }
}

impl FromStr for PoolMethod {
    type Err = LandmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "fps" => PoolMethod::Fps,
            "fps_random_restart" => PoolMethod::FpsRandomRestart,
            "random_subset" => PoolMethod::RandomSubset,
            "greedy_max" => PoolMethod::GreedyMax,
            "explicit" => PoolMethod::Explicit,
            other => return Err(LandmarkError::Parse(format!("unknown pool method {other:?}"))),
        })
    }
}

/// An ordered landmark sequence together with how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkPool {
    pub landmark_ids: Vec<usize>,
    pub method: PoolMethod,
    pub start_vertex: Option<usize>,
    pub seed: Option<u64>,
}

impl LandmarkPool {
    pub fn explicit(landmark_ids: Vec<usize>) -> Self {
        Self {
            landmark_ids,
            method: PoolMethod::Explicit,
            start_vertex: None,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.landmark_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmark_ids.is_empty()
    }

    /// The first `k` landmarks, keeping the provenance.
    pub fn prefix(&self, k: usize) -> Self {
        Self {
            landmark_ids: self.landmark_ids[..k.min(self.len())].to_vec(),
            ..self.clone()
        }
    }

    /// One landmark id per line after a `#` provenance header.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let opt = |x: Option<String>| x.unwrap_or_else(|| "none".to_string());
        writeln!(
            out,
            "# method={} start_vertex={} seed={} count={}",
            self.method,
            opt(self.start_vertex.map(|v| v.to_string())),
            opt(self.seed.map(|s| s.to_string())),
            self.len()
        )?;
        for l in &self.landmark_ids {
            writeln!(out, "{l}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self, LandmarkError> {
        let mut pool = Self::explicit(Vec::new());
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(header) = line.strip_prefix('#') {
                for field in header.split_whitespace() {
                    let Some((key, value)) = field.split_once('=') else { continue };
                    let num = |v: &str| -> Result<Option<u64>, LandmarkError> {
                        if v == "none" {
                            return Ok(None);
                        }
                        v.parse()
                            .map(Some)
                            .map_err(|_| LandmarkError::Parse(format!("bad {key} value {v:?}")))
                    };
                    match key {
                        "method" => pool.method = value.parse()?,
                        "start_vertex" => pool.start_vertex = num(value)?.map(|v| v as usize),
                        "seed" => pool.seed = num(value)?,
                        _ => {}
                    }
                }
            } else if !line.is_empty() {
                let id = line
                    .parse()
                    .map_err(|_| LandmarkError::Parse(format!("bad landmark id {line:?}")))?;
                pool.landmark_ids.push(id);
            }
        }
        Ok(pool)
    }
}

/// Worst-case distance from a covered vertex to its nearest landmark.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringReport {
    pub r_m: f64,
    pub witness_vertex: usize,
    pub symmetrized: bool,
    /// Vertices with no finite distance to any landmark of the subset.
    pub excluded: usize,
}

fn component_members(graph: &Graph) -> Vec<bool> {
    let report = graph::components(graph);
    let mut inside = vec![false; graph.num_vertices()];
    for &v in report.largest() {
        inside[v] = true;
    }
    inside
}

/// `max(d(l, v), d(v, l))` for directed graphs, `d(l, v)` otherwise.
fn metric_from(graph: &Graph, l: usize) -> Result<Vec<f64>, LabelError> {
    let mut d = dijkstra_sssp(graph, l, false)?;
    if graph.is_directed() {
        let back = dijkstra_sssp(graph, l, true)?;
        for (x, b) in d.iter_mut().zip(back) {
            if is_sentinel(b) {
                *x = SENTINEL;
            } else if !is_sentinel(*x) {
                *x = x.max(b);
            }
        }
    }
    Ok(d)
}

/// Farthest-point sampling inside the largest component.
pub fn fps_select(graph: &Graph, k: usize, start_vertex: usize) -> Result<LandmarkPool, LandmarkError> {
    let inside = component_members(graph);
    fps_in(graph, &inside, k, start_vertex)
}

fn fps_in(graph: &Graph, inside: &[bool], k: usize, start: usize) -> Result<LandmarkPool, LandmarkError> {
    if start >= graph.num_vertices() || !inside[start] {
        return Err(LandmarkError::StartOutsideComponent(start));
    }
    if k == 0 {
        return Err(LandmarkError::NoLandmarks);
    }
    let available = inside.iter().filter(|&&x| x).count();
    if k > available {
        return Err(LandmarkError::TooManyLandmarks { requested: k, available });
    }
    // Inside a strong component every distance is finite, so the running
    // minimum never sees the sentinel.
    let mut nearest = metric_from(graph, start)?;
    let mut ids = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best = usize::MAX;
        for v in 0..graph.num_vertices() {
            if inside[v] && (best == usize::MAX || nearest[v] > nearest[best]) {
                best = v;
            }
        }
        ids.push(best);
        let d = metric_from(graph, best)?;
        if ids.len() == 1 {
            nearest = d;
        } else {
            for (x, y) in nearest.iter_mut().zip(d) {
                *x = x.min(y);
            }
        }
        nearest[best] = f64::NEG_INFINITY;
    }
    Ok(LandmarkPool {
        landmark_ids: ids,
        method: PoolMethod::Fps,
        start_vertex: Some(start),
        seed: None,
    })
}

/// Lowest vertex id of the largest component: the canonical FPS start.
pub fn canonical_start(graph: &Graph) -> usize {
    graph::components(graph).largest()[0]
}

/// `k` distinct vertices drawn uniformly from the largest component.
pub fn random_subset(graph: &Graph, k: usize, seed: u64) -> Result<LandmarkPool, LandmarkError> {
    let mut members = graph::components(graph).largest().to_vec();
    if k == 0 {
        return Err(LandmarkError::NoLandmarks);
    }
    if k > members.len() {
        return Err(LandmarkError::TooManyLandmarks {
            requested: k,
            available: members.len(),
        });
    }
    let mut r = rng::seeded(seed);
    let (picked, _) = members.partial_shuffle(&mut r, k);
    Ok(LandmarkPool {
        landmark_ids: picked.to_vec(),
        method: PoolMethod::RandomSubset,
        start_vertex: None,
        seed: Some(seed),
    })
}

/// Runs FPS from `restarts` random start vertices and keeps the pool with
/// the best mean ALT expansion reduction on `validation`. Ties go to the
/// lowest start id.
pub fn fps_random_restart(
    graph: &Graph,
    k: usize,
    restarts: usize,
    validation: &[(usize, usize)],
    seed: u64,
) -> Result<LandmarkPool, LandmarkError> {
    if restarts == 0 {
        return Err(LandmarkError::NoRestarts);
    }
    if validation.is_empty() {
        return Err(LandmarkError::EmptyValidation);
    }
    let inside = component_members(graph);
    let mut members: Vec<usize> = (0..graph.num_vertices()).filter(|&v| inside[v]).collect();
    let mut r = rng::seeded(seed);
    let take = restarts.min(members.len());
    let (starts, _) = members.partial_shuffle(&mut r, take);
    let mut starts = starts.to_vec();
    starts.sort_unstable();

    let baseline: f64 = validation
        .par_iter()
        .map(|&(s, t)| search::dijkstra(graph, s, t).map(|res| res.expansions as f64))
        .collect::<Result<Vec<_>, _>>()?
        .iter()
        .sum();

    let scored = starts
        .par_iter()
        .map(|&start| -> Result<(usize, f64, LandmarkPool), LandmarkError> {
            let pool = fps_in(graph, &inside, k, start)?;
            let labels = LabelTable::compute(graph, &pool.landmark_ids)?;
            let h = AltSubset::all(&labels);
            let mut total = 0.0;
            for &(s, t) in validation {
                total += search::astar(graph, s, t, &h, false)?.expansions as f64;
            }
            Ok((start, 100.0 * (1.0 - total / baseline), pool))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut best: Option<(usize, f64, LandmarkPool)> = None;
    for cand in scored {
        if best.as_ref().is_none_or(|b| cand.1 > b.1) {
            best = Some(cand);
        }
    }
    let (start, score, mut pool) = best.expect("at least one restart");
    log::debug!("fps restart: best start {start} with {score:.2}% reduction");
    pool.method = PoolMethod::FpsRandomRestart;
    pool.seed = Some(seed);
    Ok(pool)
}

/// Greedy forward selection of `m` pool rows maximizing the mean ALT bound
/// over `queries`. Returns pool row indices in selection order.
pub fn greedy_max_indices(labels: &LabelTable, m: usize, queries: &[(usize, usize)]) -> Vec<usize> {
    let k0 = labels.k0();
    let m = m.min(k0);
    let per_landmark: Vec<Vec<f64>> = (0..k0)
        .map(|k| {
            let h = AltSubset::new(labels, vec![k]);
            queries.iter().map(|&(s, t)| h.value(s, t)).collect()
        })
        .collect();
    let mut current = vec![0.0; queries.len()];
    let mut chosen = Vec::with_capacity(m);
    let mut used = vec![false; k0];
    for _ in 0..m {
        let mut best: Option<(usize, f64)> = None;
        for k in (0..k0).filter(|&k| !used[k]) {
            let score: f64 = current
                .iter()
                .zip(&per_landmark[k])
                .map(|(c, h): (&f64, &f64)| c.max(*h))
                .sum::<f64>()
                / queries.len().max(1) as f64;
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((k, score));
            }
        }
        let (k, _) = best.expect("unused landmark remains");
        used[k] = true;
        chosen.push(k);
        for (c, h) in current.iter_mut().zip(&per_landmark[k]) {
            *c = f64::max(*c, *h);
        }
    }
    chosen
}

/// [`greedy_max_indices`] as a pool of vertex ids.
pub fn greedy_max_oracle(labels: &LabelTable, m: usize, queries: &[(usize, usize)]) -> LandmarkPool {
    let ids = greedy_max_indices(labels, m, queries)
        .into_iter()
        .map(|k| labels.landmark_ids()[k])
        .collect();
    LandmarkPool {
        landmark_ids: ids,
        method: PoolMethod::GreedyMax,
        start_vertex: None,
        seed: None,
    }
}

/// Covering radius of the pool rows in `subset`. With `symmetrized` the
/// distance is `max(d(l, v), d(v, l))` and a vertex is covered only through
/// landmarks reachable both ways; otherwise `d(l, v)` is used.
pub fn covering_radius(labels: &LabelTable, subset: &[usize], symmetrized: bool) -> Result<CoveringReport, LandmarkError> {
    if subset.is_empty() {
        return Err(LandmarkError::EmptySubset);
    }
    if let Some(&index) = subset.iter().find(|&&k| k >= labels.k0()) {
        return Err(LandmarkError::IndexOutOfRange { index, pool: labels.k0() });
    }
    let mut r_m = f64::NEG_INFINITY;
    let mut witness = 0;
    let mut excluded = 0;
    for v in 0..labels.num_vertices() {
        let mut nearest = f64::INFINITY;
        for &k in subset {
            let out = labels.d_out(k, v);
            if is_sentinel(out) {
                continue;
            }
            let d = if symmetrized {
                let back = labels.d_in(k, v);
                if is_sentinel(back) {
                    continue;
                }
                out.max(back)
            } else {
                out
            };
            nearest = nearest.min(d);
        }
        if nearest == f64::INFINITY {
            excluded += 1;
        } else if nearest > r_m {
            r_m = nearest;
            witness = v;
        }
    }
    Ok(CoveringReport {
        r_m,
        witness_vertex: witness,
        symmetrized,
        excluded,
    })
}
