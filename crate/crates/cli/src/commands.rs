//! One function per subcommand. Each resolves its settings, runs one
//! pipeline stage and writes its artifacts under a provenance header.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use landmark_astar::bench::{self, BenchConfig, BenchRecord, BudgetSpec, Cell, Method, QueryMode};
use landmark_astar::compressor::{self, InitScheme, TrainConfig, TrainingQueries};
use landmark_astar::graph::{self, Graph};
use landmark_astar::labels::{self, LabelTable};
use landmark_astar::landmarks::{self, LandmarkPool};
use landmark_astar::search;
use landmark_astar::stats::{self, PairedSamples};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CoreExt};
use crate::manifest::{hex, Settings};
use crate::provenance::{create_dir, write_binary, write_text, Provenance};
use crate::source::GraphSource;
use crate::{AuditArgs, BenchArgs, DriftArgs, GenArgs, GraphArgs, LabelsArgs, StatsArgs, TrainArgs};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_QUERIES: usize = 100;
pub const DEFAULT_METHODS: [Method; 3] = [Method::Alt, Method::Aac, Method::Cdh];
pub const DEFAULT_DRIFT_EPOCHS: [usize; 5] = [0, 50, 200, 500, 1000];

/// Shared inputs from global flags.
pub struct Context {
    pub settings: Settings,
    pub cache_dir: Option<PathBuf>,
}

impl Context {
    fn provenance(&self, seeds: &[u64]) -> Provenance {
        Provenance {
            manifest_hash: self.settings.hash(),
            seeds: seeds.to_vec(),
        }
    }

    fn graph(&mut self, args: &GraphArgs) -> Result<(Graph, String), CliError> {
        let s = &mut self.settings;
        // `source` is the natural key inside a `[graph]` manifest section.
        let spec: String = match s.optional("graph", args.graph.clone())? {
            Some(spec) => spec,
            None => s.untracked("source", None)?.ok_or_else(|| CliError::MissingInput("graph".into()))?,
        };
        s.record("graph", &spec);
        let directed = s.or("directed", args.directed.then_some(true), false)?;
        let seed = s.or("graph_seed", args.graph_seed, DEFAULT_SEED)?;
        let source = GraphSource::parse(&spec, directed)?;
        let graph = source.build(seed)?;
        s.record("graph_fingerprint", graph.fingerprint());
        log::info!(
            "graph {spec}: {} vertices, {} edges, {}",
            graph.num_vertices(),
            graph.num_edges(),
            if graph.is_directed() { "directed" } else { "undirected" }
        );
        Ok((graph, source.id()))
    }

    /// FPS pool of up to `k` landmarks with labels, through the cache when set.
    fn fps_labels(&self, graph: &Graph, k: usize, start: Option<usize>) -> Result<(LandmarkPool, LabelTable), CliError> {
        let start = start.unwrap_or_else(|| landmarks::canonical_start(graph));
        let k = k.min(graph::components(graph).largest().len());
        let pool = landmarks::fps_select(graph, k, start).core()?;
        let table = match &self.cache_dir {
            Some(dir) => labels::build_labels_cached(graph, &pool, dir),
            None => labels::build_labels(graph, &pool),
        }
        .core()?;
        Ok((pool, table))
    }
}

fn parse_init(key: &str, s: &str) -> Result<InitScheme, CliError> {
    match s {
        "block_sparse" => Ok(InitScheme::BlockSparse),
        "identity_first_m" => Ok(InitScheme::IdentityFirstM),
        _ => Err(CliError::invalid(key, s, "expected block_sparse or identity_first_m")),
    }
}

fn train_config(s: &mut Settings, epochs: Option<usize>, learning_rate: Option<f64>) -> Result<TrainConfig, CliError> {
    let d = TrainConfig::default();
    Ok(TrainConfig {
        epochs: s.or("epochs", epochs, d.epochs)?,
        learning_rate: s.or("learning_rate", learning_rate, d.learning_rate)?,
        ..d
    })
}

fn out_dir(s: &mut Settings, flag: &Option<String>) -> Result<PathBuf, CliError> {
    let dir = s.untracked::<String>("out", flag.clone())?.ok_or_else(|| CliError::MissingInput("out".into()))?;
    let dir = PathBuf::from(dir);
    create_dir(&dir)?;
    Ok(dir)
}

pub fn cmd_gen(mut ctx: Context, args: &GenArgs) -> Result<(), CliError> {
    let (graph, _) = ctx.graph(&args.graph)?;
    let out: String = ctx
        .settings
        .untracked("out", args.out.clone())?
        .ok_or_else(|| CliError::MissingInput("out".into()))?;
    let default_format = if out.ends_with(".gr") { "gr" } else { "edges" };
    let format: String = ctx.settings.or("format", args.format.clone(), default_format.to_string())?;
    let seed = ctx.settings.or("graph_seed", args.graph.graph_seed, DEFAULT_SEED)?;
    let prov = ctx.provenance(&[seed]);
    let path = Path::new(&out);
    match format.as_str() {
        "gr" => write_text(path, &prov, "c", |w| graph::write_dimacs_gr(&graph, w))?,
        "edges" => write_text(path, &prov, "#", |w| graph::write_edge_list(&graph, w))?,
        other => return Err(CliError::invalid("format", other, "expected gr or edges")),
    }
    println!("wrote {} ({} vertices, {} edges)", out, graph.num_vertices(), graph.num_edges());
    Ok(())
}

pub fn cmd_labels(mut ctx: Context, args: &LabelsArgs) -> Result<(), CliError> {
    let (graph, _) = ctx.graph(&args.graph)?;
    let k: usize = ctx.settings.required("k", args.k)?;
    let start: Option<usize> = ctx.settings.optional("start", args.start)?;
    let dir = out_dir(&mut ctx.settings, &args.out)?;
    let (pool, table) = ctx.fps_labels(&graph, k, start)?;
    let prov = ctx.provenance(&[]);
    write_text(&dir.join("pool.txt"), &prov, "#", |w| pool.write_text(w))?;
    write_binary(&dir.join("labels.bin"), &prov, |w| table.write_cache(w))?;
    let all: Vec<usize> = (0..table.k0()).collect();
    let radius = landmarks::covering_radius(&table, &all, graph.is_directed()).core()?;
    println!(
        "{} landmarks starting at {}; covering radius {}",
        pool.len(),
        pool.start_vertex.map(|v| v.to_string()).unwrap_or_default(),
        radius.r_m
    );
    Ok(())
}

pub fn cmd_train(mut ctx: Context, args: &TrainArgs) -> Result<(), CliError> {
    let (graph, _) = ctx.graph(&args.graph)?;
    let s = &mut ctx.settings;
    let k0: usize = s.required("k0", args.k0)?;
    let m: usize = s.required("m", args.m)?;
    let seed = s.or("seed", args.seed, DEFAULT_SEED)?;
    let init = parse_init("init", &s.or("init", args.init.clone(), "block_sparse".to_string())?)?;
    let checkpoints = s.list("checkpoints", args.checkpoints.clone(), Some(&[]))?;
    let per_epoch = s.or("pairs_per_epoch", args.pairs_per_epoch, compressor::DEFAULT_PAIRS_PER_EPOCH)?;
    let cfg = TrainConfig {
        init,
        seed,
        checkpoints: checkpoints.clone(),
        ..train_config(s, args.epochs, args.learning_rate)?
    };
    let dir = out_dir(s, &args.out)?;
    let (_, table) = ctx.fps_labels(&graph, k0, None)?;
    if table.k0() < k0 {
        log::warn!("largest component only holds {} landmarks", table.k0());
    }
    let queries = TrainingQueries::Resample {
        vertices: graph::components(&graph).largest().to_vec(),
        per_epoch,
    };
    let (selector, report) = compressor::train(&table, m, &cfg, &queries).core()?;
    let prov = ctx.provenance(&[seed]);
    write_binary(&dir.join("selector.ckpt"), &prov, |w| selector.write_checkpoint(cfg.epochs, seed, w))?;
    for (epoch, sel) in &report.checkpoints {
        write_binary(&dir.join(format!("selector_epoch{epoch}.ckpt")), &prov, |w| sel.write_checkpoint(*epoch, seed, w))?;
    }
    write_text(&dir.join("training.csv"), &prov, "#", |w| report.write_csv(w))?;
    let (fwd, bwd) = selector.argmax();
    println!(
        "trained {} epochs; unique ratio {:.3}; forward picks {:?}; backward picks {:?}",
        cfg.epochs,
        selector.unique_ratio(),
        fwd,
        bwd
    );
    Ok(())
}

pub fn cmd_bench(mut ctx: Context, args: &BenchArgs) -> Result<(), CliError> {
    let (graph, graph_id) = ctx.graph(&args.graph)?;
    let s = &mut ctx.settings;
    let budgets: Vec<usize> = s.nonempty_list("budgets", args.budgets.clone(), None)?;
    let methods: Vec<Method> = s.nonempty_list("methods", args.methods.clone(), Some(&DEFAULT_METHODS))?;
    let seeds: Vec<u64> = s.nonempty_list("seeds", args.seeds.clone(), Some(&[DEFAULT_SEED]))?;
    let n_queries = s.or("queries", args.queries, DEFAULT_QUERIES)?;
    let mode = s.or("mode", args.mode, QueryMode::Uniform)?;
    let cfg = BenchConfig {
        train: train_config(s, args.epochs, args.learning_rate)?,
        ..BenchConfig::default()
    };
    let dir = out_dir(s, &args.out)?;
    let specs: Vec<BudgetSpec> = budgets
        .iter()
        .map(|&b| BudgetSpec::new(b, graph.is_directed()))
        .collect::<Result<_, _>>()
        .core()?;
    let (_, pool) = ctx.fps_labels(&graph, cfg.pool_size(&specs), None)?;
    let cells: Vec<Cell> = seeds
        .par_iter()
        .map(|&seed| {
            let queries = bench::sample_queries(&graph, n_queries, mode, seed).core()?;
            Cell::with_pool(&graph, &graph_id, queries, pool.clone(), cfg.clone()).core()
        })
        .collect::<Result<_, CliError>>()?;
    let mut tasks = Vec::new();
    for &spec in &specs {
        for &method in &methods {
            for idx in 0..seeds.len() {
                tasks.push((spec, method, idx));
            }
        }
    }
    let records: Vec<BenchRecord> = tasks
        .par_iter()
        .map(|&(spec, method, idx)| {
            let r = cells[idx].run(method, spec, seeds[idx]).core();
            if let Ok(r) = &r {
                log::info!("{} B={} seed={}: {:.2}%", r.method, r.budget, r.seed, r.reduction_pct);
            }
            r
        })
        .collect::<Result<_, _>>()?;
    let path = dir.join("cells.csv");
    write_text(&path, &ctx.provenance(&seeds), "#", |w| bench::write_cell_csv(&records, w))?;
    for r in &records {
        println!(
            "{} {} B={} seed={} reduction={:.2}% violations={} suboptimal={}",
            r.graph_id, r.method, r.budget, r.seed, r.reduction_pct, r.violations, r.suboptimal
        );
    }
    println!("wrote {} cell records to {}", records.len(), path.display());
    Ok(())
}

pub fn cmd_drift(mut ctx: Context, args: &DriftArgs) -> Result<(), CliError> {
    let (graph, _) = ctx.graph(&args.graph)?;
    let s = &mut ctx.settings;
    let k0 = s.or("k0", args.k0, 32)?;
    let m = s.or("m", args.m, 8)?;
    let epochs: Vec<usize> = s.nonempty_list("epochs", args.epochs.clone(), Some(&DEFAULT_DRIFT_EPOCHS))?;
    let seeds: Vec<u64> = s.nonempty_list("seeds", args.seeds.clone(), Some(&[DEFAULT_SEED]))?;
    let n_queries = s.or("queries", args.queries, DEFAULT_QUERIES)?;
    let init_names: Vec<String> = s.nonempty_list(
        "inits",
        args.inits.clone(),
        Some(&["block_sparse".to_string(), "identity_first_m".to_string()]),
    )?;
    let inits: Vec<InitScheme> = init_names.iter().map(|n| parse_init("inits", n)).collect::<Result<_, _>>()?;
    let cfg = BenchConfig {
        train: TrainConfig {
            learning_rate: s.or("learning_rate", args.learning_rate, TrainConfig::default().learning_rate)?,
            ..TrainConfig::default()
        },
        ..BenchConfig::default()
    };
    let dir = out_dir(s, &args.out)?;
    let per_seed: Vec<Vec<bench::DriftRow>> = seeds
        .par_iter()
        .map(|&seed| bench::drift_diagnostic(&graph, k0, m, &epochs, &[seed], &inits, n_queries, &cfg).core())
        .collect::<Result<_, _>>()?;
    let rows: Vec<bench::DriftRow> = per_seed.into_iter().flatten().collect();
    let path = dir.join("drift.csv");
    write_text(&path, &ctx.provenance(&seeds), "#", |w| bench::write_drift_csv(&rows, w))?;
    for r in &rows {
        let epoch = r.epoch.map(|e| e.to_string()).unwrap_or_else(|| "-".into());
        println!("{} seed={} epoch={epoch} reduction={:.2}%", r.arm, r.seed, r.reduction_pct);
    }
    println!("wrote {} rows to {}", rows.len(), path.display());
    Ok(())
}

pub fn cmd_audit(mut ctx: Context, args: &AuditArgs) -> Result<(), CliError> {
    let (violations, suboptimal) = match ctx.settings.optional::<String>("input", args.input.clone())? {
        Some(input) => audit_cells(Path::new(&input))?,
        None => audit_fresh(&mut ctx, args)?,
    };
    println!("violations={violations} suboptimal={suboptimal}");
    if violations > 0 || suboptimal > 0 {
        return Err(CliError::AuditFailed { violations, suboptimal });
    }
    Ok(())
}

fn audit_fresh(ctx: &mut Context, args: &AuditArgs) -> Result<(usize, usize), CliError> {
    let (graph, graph_id) = ctx.graph(&args.graph)?;
    let s = &mut ctx.settings;
    let method = s.or("method", args.method, Method::Alt)?;
    let budget = s.or("budget", args.budget, 32)?;
    let seed = s.or("seed", args.seed, DEFAULT_SEED)?;
    let n_queries = s.or("queries", args.queries, DEFAULT_QUERIES)?;
    let mode = s.or("mode", args.mode, QueryMode::Uniform)?;
    let cfg = BenchConfig {
        train: train_config(s, args.epochs, None)?,
        ..BenchConfig::default()
    };
    let out: Option<String> = s.untracked("out", args.out.clone())?;
    let spec = BudgetSpec::new(budget, graph.is_directed()).core()?;
    let (_, pool) = ctx.fps_labels(&graph, cfg.pool_size(&[spec]), None)?;
    let queries = bench::sample_queries(&graph, n_queries, mode, seed).core()?;
    let cell = Cell::with_pool(&graph, &graph_id, queries, pool, cfg).core()?;
    let record = cell.run(method, spec, seed).core()?;
    if let Some(out) = out {
        write_text(Path::new(&out), &ctx.provenance(&[seed]), "#", |w| search::write_audit_csv(&record.rows, w))?;
    }
    Ok((record.violations, record.suboptimal))
}

struct CellCsv {
    path: PathBuf,
    rows: Vec<(usize, Vec<String>)>,
}

impl CellCsv {
    fn read(path: &Path) -> Result<Self, CliError> {
        let unreadable = |source| CliError::UnreadableFile {
            path: path.to_path_buf(),
            source,
        };
        let file = File::open(path).map_err(unreadable)?;
        let width = bench::CELL_CSV_HEADER.split(',').count();
        let mut rows = Vec::new();
        let mut seen_header = false;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(unreadable)?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if !seen_header {
                if line != bench::CELL_CSV_HEADER {
                    return Err(Self::malformed(path, idx + 1, "not a bench cell CSV header"));
                }
                seen_header = true;
                continue;
            }
            let fields: Vec<String> = line.split(',').map(str::to_string).collect();
            if fields.len() != width {
                return Err(Self::malformed(path, idx + 1, &format!("expected {width} fields, got {}", fields.len())));
            }
            rows.push((idx + 1, fields));
        }
        if !seen_header {
            return Err(Self::malformed(path, 0, "missing header"));
        }
        Ok(Self {
            path: path.to_path_buf(),
            rows,
        })
    }

    fn malformed(path: &Path, line: usize, message: &str) -> CliError {
        CliError::MalformedCsv {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        }
    }

    fn field<T: std::str::FromStr>(&self, line: usize, fields: &[String], col: usize) -> Result<T, CliError> {
        fields[col]
            .parse()
            .map_err(|_| Self::malformed(&self.path, line, &format!("bad value {:?} in column {}", fields[col], col + 1)))
    }
}

// Column positions in the cell CSV.
const COL_GRAPH: usize = 1;
const COL_METHOD: usize = 2;
const COL_BUDGET: usize = 3;
const COL_SEED: usize = 4;
const COL_QUERY: usize = 5;
const COL_EXPANSIONS: usize = 10;
const COL_VIOLATIONS: usize = 12;
const COL_SUBOPTIMAL: usize = 13;
const COL_REDUCTION: usize = 16;

fn audit_cells(path: &Path) -> Result<(usize, usize), CliError> {
    let csv = CellCsv::read(path)?;
    let (mut violations, mut suboptimal) = (0, 0);
    for (line, f) in csv.rows.iter().filter(|(_, f)| f[0] == "summary") {
        violations += csv.field::<usize>(*line, f, COL_VIOLATIONS)?;
        suboptimal += csv.field::<usize>(*line, f, COL_SUBOPTIMAL)?;
    }
    Ok((violations, suboptimal))
}

type CellKey = (String, usize, String);

pub fn cmd_stats(mut ctx: Context, args: &StatsArgs) -> Result<(), CliError> {
    let s = &mut ctx.settings;
    let input: String = s
        .untracked("input", args.input.clone())?
        .ok_or_else(|| CliError::MissingInput("input".into()))?;
    let baseline = s.or("baseline", args.baseline, Method::Alt)?;
    let q = s.or("q", args.q, 0.05)?;
    let delta = s.or("delta", args.delta, 1.0)?;
    let alpha = s.or("alpha", args.alpha, 0.05)?;
    let dir = out_dir(s, &args.out)?;
    let bytes = std::fs::read(&input).map_err(|source| CliError::UnreadableFile {
        path: input.clone().into(),
        source,
    })?;
    s.record("input_sha256", hex(&Sha256::digest(&bytes)));
    let csv = CellCsv::read(Path::new(&input))?;

    // (graph, budget, method) -> seed -> per-query expansions / reduction.
    let mut expansions: BTreeMap<CellKey, BTreeMap<u64, Vec<(usize, f64)>>> = BTreeMap::new();
    let mut reductions: BTreeMap<CellKey, BTreeMap<u64, f64>> = BTreeMap::new();
    for (line, f) in &csv.rows {
        let key = (f[COL_GRAPH].clone(), csv.field(*line, f, COL_BUDGET)?, f[COL_METHOD].clone());
        let seed: u64 = csv.field(*line, f, COL_SEED)?;
        match f[0].as_str() {
            "query" => expansions
                .entry(key)
                .or_default()
                .entry(seed)
                .or_default()
                .push((csv.field(*line, f, COL_QUERY)?, csv.field(*line, f, COL_EXPANSIONS)?)),
            "summary" => {
                reductions.entry(key).or_default().insert(seed, csv.field(*line, f, COL_REDUCTION)?);
            }
            other => return Err(CellCsv::malformed(&csv.path, *line, &format!("unknown row type {other:?}"))),
        }
    }

    let base_name = baseline.to_string();
    let mut groups = Vec::new();
    let mut tost_rows = Vec::new();
    for ((graph_id, budget, method), per_seed) in &expansions {
        if *method == base_name {
            continue;
        }
        let base_key = (graph_id.clone(), *budget, base_name.clone());
        let Some(base) = expansions.get(&base_key) else { continue };
        let label = format!("{graph_id}/{method}_vs_{base_name}@{budget}");
        let mut seeds = Vec::new();
        for (seed, rows) in per_seed {
            let Some(base_rows) = base.get(seed) else { continue };
            let aligned = |r: &[(usize, f64)]| {
                let mut r = r.to_vec();
                r.sort_by_key(|x| x.0);
                r
            };
            let (a, b) = (aligned(base_rows), aligned(rows));
            if a.iter().map(|x| x.0).ne(b.iter().map(|x| x.0)) {
                return Err(CellCsv::malformed(&csv.path, 0, &format!("{label} seed {seed}: query ids differ from the baseline")));
            }
            let samples = PairedSamples::new(a.iter().map(|x| x.1).collect(), b.iter().map(|x| x.1).collect()).core()?;
            let test = stats::wilcoxon_signed_rank(&samples, true).core()?;
            seeds.push((test.p_value, test.direction));
        }
        if seeds.is_empty() {
            continue;
        }
        let diffs: Vec<f64> = match (reductions.get(&(graph_id.clone(), *budget, method.clone())), reductions.get(&base_key)) {
            (Some(m), Some(b)) => m.iter().filter_map(|(seed, r)| b.get(seed).map(|br| r - br)).collect(),
            _ => Vec::new(),
        };
        if diffs.len() >= 2 {
            tost_rows.push((label.clone(), stats::tost_paired(&diffs, delta, alpha).core()?));
        } else {
            log::warn!("{label}: TOST needs at least two seeds");
        }
        groups.push((label, seeds));
    }
    if groups.is_empty() {
        return Err(CliError::invalid("baseline", &base_name, "no comparable records in the input"));
    }
    let summary = stats::summarize(&groups, q).core()?;
    let prov = ctx.provenance(&[]);
    write_text(&dir.join("stats.csv"), &prov, "#", |w| stats::write_summary_csv(&summary, w))?;
    write_text(&dir.join("tost.csv"), &prov, "#", |w| {
        writeln!(w, "comparison,delta,mean_diff,se,p_lower,p_upper,p_value,equivalent")?;
        for (label, t) in &tost_rows {
            writeln!(
                w,
                "{label},{delta},{},{},{},{},{},{}",
                t.mean, t.se, t.p_lower, t.p_upper, t.p_value, t.equivalent as u8
            )?;
        }
        Ok(())
    })?;
    for r in &summary {
        println!(
            "{} fisher_p={:.3e} stouffer_p={:.3e} median_p={:.3e} fdr={}",
            r.label, r.fisher_p, r.stouffer_p, r.median_p, r.fdr_flag
        );
    }
    Ok(())
}
