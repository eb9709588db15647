//! Landmark heuristics for exact A* shortest-path search under a fixed
//! per-vertex memory budget.
//!
//! The crate covers the whole pipeline: graph loading and generation,
//! landmark distance tables, landmark selection, the ALT and CDH baselines,
//! a learned landmark compressor, a metered A* engine with an admissibility
//! audit, matched-memory benchmarking and the paired statistics used to
//! compare methods.

pub mod bench;
pub mod cdh;
pub mod compressor;
pub mod graph;
pub mod heuristic;
pub mod labels;
pub mod landmarks;
pub mod rng;
pub mod search;
pub mod stats;

/// Any error the library can return.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Label(#[from] labels::LabelError),
    #[error(transparent)]
    Landmark(#[from] landmarks::LandmarkError),
    #[error(transparent)]
    Heuristic(#[from] heuristic::HeuristicError),
    #[error(transparent)]
    Compressor(#[from] compressor::CompressorError),
    #[error(transparent)]
    Cdh(#[from] cdh::CdhError),
    #[error(transparent)]
    Search(#[from] search::SearchError),
    #[error(transparent)]
    Bench(#[from] bench::BenchError),
    #[error(transparent)]
    Stats(#[from] stats::StatsError),
}
