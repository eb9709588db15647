//! Graph sources: `sbm:BxS[:p_in:p_out]`, `ba:NxM`, `path:N`, or a file
//! (`.gr` DIMACS, anything else a `u v w` edge list).

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use landmark_astar::graph::{self, Graph};

use crate::error::{CliError, CoreExt};

/// Weight range of the synthetic generators.
pub const WEIGHT_RANGE: (f64, f64) = (1.0, 10.0);
pub const SBM_P_IN: f64 = 0.05;
pub const SBM_P_OUT: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Sbm { blocks: usize, block_size: usize, p_in: f64, p_out: f64 },
    Ba { n: usize, m: usize },
    Path { n: usize },
    File { path: String, directed: bool },
}

impl GraphSource {
    pub fn parse(spec: &str, directed: bool) -> Result<Self, CliError> {
        let bad = |reason: &str| CliError::GraphSource {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad(&format!("{s:?} is not a count")));
        let pair = |s: &str| -> Result<(usize, usize), CliError> {
            let (a, b) = s.split_once('x').ok_or_else(|| bad("expected AxB"))?;
            Ok((num(a)?, num(b)?))
        };
        let Some((kind, rest)) = spec.split_once(':') else {
            return Ok(Self::File { path: spec.to_string(), directed });
        };
        match kind {
            "sbm" => {
                let parts: Vec<&str> = rest.split(':').collect();
                let (blocks, block_size) = pair(parts[0])?;
                let (p_in, p_out) = match parts.len() {
                    1 => (SBM_P_IN, SBM_P_OUT),
                    3 => {
                        let p = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("{s:?} is not a probability")));
                        (p(parts[1])?, p(parts[2])?)
                    }
                    _ => return Err(bad("expected sbm:BxS or sbm:BxS:p_in:p_out")),
                };
                Ok(Self::Sbm { blocks, block_size, p_in, p_out })
            }
            "ba" => {
                let (n, m) = pair(rest)?;
                Ok(Self::Ba { n, m })
            }
            "path" => Ok(Self::Path { n: num(rest)? }),
            // Windows drive letters and the like fall through to files.
            _ if Path::new(spec).exists() => Ok(Self::File { path: spec.to_string(), directed }),
            _ => Err(bad(&format!("unknown generator {kind:?}"))),
        }
    }

    pub fn build(&self, seed: u64) -> Result<Graph, CliError> {
        let (lo, hi) = WEIGHT_RANGE;
        match self {
            Self::Sbm { blocks, block_size, p_in, p_out } => graph::gen_sbm(*blocks, *block_size, *p_in, *p_out, lo, hi, seed).core(),
            Self::Ba { n, m } => graph::gen_ba(*n, *m, lo, hi, seed).core(),
            Self::Path { n } => graph::gen_path(*n).core(),
            Self::File { path, directed } => {
                let file = File::open(path).map_err(|source| CliError::UnreadableFile {
                    path: path.into(),
                    source,
                })?;
                let reader = BufReader::new(file);
                if path.ends_with(".gr") {
                    graph::parse_dimacs_gr(reader).core()
                } else {
                    graph::parse_edge_list(reader, *directed).core()
                }
            }
        }
    }

    /// Short name used in CSV `graph` columns.
    pub fn id(&self) -> String {
        match self {
            Self::Sbm { blocks, block_size, .. } => format!("sbm{blocks}x{block_size}"),
            Self::Ba { n, m } => format!("ba{n}x{m}"),
            Self::Path { n } => format!("path{n}"),
            Self::File { path, .. } => Path::new(path)
                .file_stem()
                .map(|s| s.to_string_lossy().replace(',', "_"))
                .unwrap_or_else(|| "file".to_string()),
        }
    }
}
