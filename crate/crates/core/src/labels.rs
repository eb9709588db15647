//! Single-source shortest paths and the landmark distance tables the
//! heuristics are built from.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{self, Graph};
use crate::landmarks::LandmarkPool;

/// Marker stored for unreachable entries. Masking compares for exact
/// equality with this value.
pub const SENTINEL: f64 = 1e18;

#[inline]
pub fn is_sentinel(x: f64) -> bool {
    x == SENTINEL
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("source vertex {vertex} out of range for {num_vertices} vertices")]
    SourceOutOfRange { vertex: usize, num_vertices: usize },
    #[error("landmark {landmark} lies outside the largest connected component")]
    LandmarkOutsideComponent { landmark: usize },
    #[error("vertex {0} is not a landmark of this table")]
    NotALandmark(usize),
    #[error("landmark pool is empty")]
    EmptyPool,
    #[error("invalid label cache: {0}")]
    BadCache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Copy, Clone, PartialEq)]
struct HeapEntry {
    dist: f64,
    vertex: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Binary-heap Dijkstra with lazy deletion. `reversed` runs on the
/// transposed graph, giving `d(v, source)` for every `v`. Unreachable
/// vertices hold [`SENTINEL`].
pub fn dijkstra_sssp(graph: &Graph, source: usize, reversed: bool) -> Result<Vec<f64>, LabelError> {
    let n = graph.num_vertices();
    if source >= n {
        return Err(LabelError::SourceOutOfRange {
            vertex: source,
            num_vertices: n,
        });
    }
    let mut dist = vec![SENTINEL; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        vertex: source,
    });
    while let Some(HeapEntry { dist: d, vertex: u }) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        let arcs = if reversed {
            graph.reverse_neighbors(u)
        } else {
            graph.neighbors(u)
        };
        for arc in arcs {
            let nd = d + arc.weight;
            if nd < dist[arc.to] {
                dist[arc.to] = nd;
                heap.push(HeapEntry {
                    dist: nd,
                    vertex: arc.to,
                });
            }
        }
    }
    Ok(dist)
}

/// Forward (`d(l_k, v)`) and backward (`d(v, l_k)`) distance tables for a
/// landmark pool, row-major `K0 x V`. On undirected graphs the backward
/// table is the same allocation as the forward one.
#[derive(Debug, Clone)]
pub struct LabelTable {
    landmark_ids: Vec<usize>,
    num_vertices: usize,
    directed: bool,
    d_out: Arc<Vec<f64>>,
    d_in: Arc<Vec<f64>>,
}

impl LabelTable {
    /// Runs the SSSPs for `landmark_ids` without any component check.
    pub fn compute(graph: &Graph, landmark_ids: &[usize]) -> Result<Self, LabelError> {
        if landmark_ids.is_empty() {
            return Err(LabelError::EmptyPool);
        }
        let run = |reversed: bool| -> Result<Vec<f64>, LabelError> {
            let rows: Vec<Vec<f64>> = landmark_ids
                .par_iter()
                .map(|&l| dijkstra_sssp(graph, l, reversed))
                .collect::<Result<_, _>>()?;
            Ok(rows.concat())
        };
        let d_out = Arc::new(run(false)?);
        let d_in = if graph.is_directed() {
            Arc::new(run(true)?)
        } else {
            Arc::clone(&d_out)
        };
        Ok(Self {
            landmark_ids: landmark_ids.to_vec(),
            num_vertices: graph.num_vertices(),
            directed: graph.is_directed(),
            d_out,
            d_in,
        })
    }

    /// Builds a table from precomputed rows. `d_in` is ignored (aliased) for
    /// undirected tables.
    pub fn from_rows(
        landmark_ids: Vec<usize>,
        num_vertices: usize,
        directed: bool,
        d_out: Vec<f64>,
        d_in: Option<Vec<f64>>,
    ) -> Result<Self, LabelError> {
        let expected = landmark_ids.len() * num_vertices;
        if d_out.len() != expected {
            return Err(LabelError::BadCache(format!(
                "forward table has {} entries, expected {expected}",
                d_out.len()
            )));
        }
        let d_out = Arc::new(d_out);
        let d_in = match (directed, d_in) {
            (true, Some(rows)) if rows.len() == expected => Arc::new(rows),
            (true, _) => return Err(LabelError::BadCache("directed table needs a backward table".into())),
            (false, _) => Arc::clone(&d_out),
        };
        Ok(Self {
            landmark_ids,
            num_vertices,
            directed,
            d_out,
            d_in,
        })
    }

    pub fn k0(&self) -> usize {
        self.landmark_ids.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn landmark_ids(&self) -> &[usize] {
        &self.landmark_ids
    }

    /// `d(l_k, v)`.
    #[inline]
    pub fn d_out(&self, k: usize, v: usize) -> f64 {
        self.d_out[k * self.num_vertices + v]
    }

    /// `d(v, l_k)`.
    #[inline]
    pub fn d_in(&self, k: usize, v: usize) -> f64 {
        self.d_in[k * self.num_vertices + v]
    }

    pub fn out_row(&self, k: usize) -> &[f64] {
        &self.d_out[k * self.num_vertices..(k + 1) * self.num_vertices]
    }

    pub fn in_row(&self, k: usize) -> &[f64] {
        &self.d_in[k * self.num_vertices..(k + 1) * self.num_vertices]
    }

    /// A table holding only the first `k` landmarks.
    pub fn prefix(&self, k: usize) -> Self {
        let k = k.min(self.k0());
        let cut = |rows: &Vec<f64>| rows[..k * self.num_vertices].to_vec();
        let d_out = Arc::new(cut(&self.d_out));
        let d_in = if self.directed { Arc::new(cut(&self.d_in)) } else { Arc::clone(&d_out) };
        Self {
            landmark_ids: self.landmark_ids[..k].to_vec(),
            num_vertices: self.num_vertices,
            directed: self.directed,
            d_out,
            d_in,
        }
    }

    /// True when the backward table is the forward table itself.
    pub fn shares_tables(&self) -> bool {
        Arc::ptr_eq(&self.d_out, &self.d_in)
    }

    /// Row indices of the given landmark vertices.
    pub fn indices_of(&self, vertices: &[usize]) -> Result<Vec<usize>, LabelError> {
        vertices
            .iter()
            .map(|&v| {
                self.landmark_ids
                    .iter()
                    .position(|&l| l == v)
                    .ok_or(LabelError::NotALandmark(v))
            })
            .collect()
    }

    const MAGIC: [u8; 8] = *b"LMLABEL1";

    /// Binary cache: magic, K0, V (u64 LE), directed flag byte, landmark ids
    /// (u64 LE), then the row-major f64 LE forward table and, when directed,
    /// the backward table.
    pub fn write_cache<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(&Self::MAGIC)?;
        out.write_all(&(self.k0() as u64).to_le_bytes())?;
        out.write_all(&(self.num_vertices as u64).to_le_bytes())?;
        out.write_all(&[self.directed as u8])?;
        for &l in &self.landmark_ids {
            out.write_all(&(l as u64).to_le_bytes())?;
        }
        write_f64s(&mut out, &self.d_out)?;
        if self.directed {
            write_f64s(&mut out, &self.d_in)?;
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut input: R) -> Result<Self, LabelError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if magic != Self::MAGIC {
            return Err(LabelError::BadCache("bad magic".into()));
        }
        let k0 = read_u64(&mut input)? as usize;
        let n = read_u64(&mut input)? as usize;
        let mut flag = [0u8; 1];
        input.read_exact(&mut flag)?;
        let directed = match flag[0] {
            0 => false,
            1 => true,
            other => return Err(LabelError::BadCache(format!("bad directed flag {other}"))),
        };
        let ids = (0..k0)
            .map(|_| read_u64(&mut input).map(|x| x as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let d_out = read_f64s(&mut input, k0 * n)?;
        let d_in = if directed {
            Some(read_f64s(&mut input, k0 * n)?)
        } else {
            None
        };
        Self::from_rows(ids, n, directed, d_out, d_in)
    }
}

pub(crate) fn write_f64s<W: Write>(out: &mut W, xs: &[f64]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)
}

pub(crate) fn read_u64<R: Read>(input: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn read_f64s<R: Read>(input: &mut R, count: usize) -> std::io::Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    input.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Computes the label table for `pool`, requiring every landmark to sit in
/// the graph's largest (strongly, when directed) connected component.
pub fn build_labels(graph: &Graph, pool: &LandmarkPool) -> Result<LabelTable, LabelError> {
    let report = graph::components(graph);
    let mut inside = vec![false; graph.num_vertices()];
    for &v in report.largest() {
        inside[v] = true;
    }
    for &l in &pool.landmark_ids {
        if l >= graph.num_vertices() || !inside[l] {
            return Err(LabelError::LandmarkOutsideComponent { landmark: l });
        }
    }
    LabelTable::compute(graph, &pool.landmark_ids)
}

/// Cache file name for a (graph, landmark list) pair.
pub fn cache_path(dir: &Path, graph: &Graph, landmark_ids: &[usize]) -> PathBuf {
    let mut h = Sha256::new();
    h.update(graph.fingerprint().as_bytes());
    for &l in landmark_ids {
        h.update((l as u64).to_le_bytes());
    }
    let key = graph::hex(&h.finalize());
    dir.join(format!("labels-{}.bin", &key[..24]))
}

/// [`build_labels`] behind an on-disk cache in `dir`.
pub fn build_labels_cached(graph: &Graph, pool: &LandmarkPool, dir: &Path) -> Result<LabelTable, LabelError> {
    let path = cache_path(dir, graph, &pool.landmark_ids);
    if let Ok(file) = std::fs::File::open(&path) {
        match LabelTable::read_cache(std::io::BufReader::new(file)) {
            Ok(table) if table.landmark_ids == pool.landmark_ids => return Ok(table),
            Ok(_) | Err(_) => log::warn!("ignoring stale label cache {}", path.display()),
        }
    }
    let table = build_labels(graph, pool)?;
    std::fs::create_dir_all(dir)?;
    let tmp = path.with_extension("tmp");
    table.write_cache(std::io::BufWriter::new(std::fs::File::create(&tmp)?))?;
    std::fs::rename(&tmp, &path)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_path, gen_sbm, Edge, Graph};
    use crate::landmarks::LandmarkPool;

    fn edge(source: usize, target: usize, weight: f64) -> Edge {
        Edge { source, target, weight }
    }

    #[test]
    fn path_distances() {
        let p7 = gen_path(7).unwrap();
        assert_eq!(dijkstra_sssp(&p7, 0, false).unwrap(), vec![0., 1., 2., 3., 4., 5., 6.]);
        assert!(dijkstra_sssp(&p7, 7, false).is_err());
    }

    #[test]
    fn unreachable_is_sentinel() {
        let g = Graph::new(2, true, vec![edge(0, 1, 1.0)]).unwrap();
        assert_eq!(dijkstra_sssp(&g, 1, false).unwrap(), vec![SENTINEL, 0.0]);
        assert_eq!(dijkstra_sssp(&g, 1, true).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn clique_distances() {
        let k5 = gen_sbm(1, 5, 1.0, 0.0, 1.0, 1.0, 1).unwrap();
        assert_eq!(dijkstra_sssp(&k5, 0, false).unwrap(), vec![0., 1., 1., 1., 1.]);
    }

    #[test]
    fn path_labels_alias_backward_table() {
        let p7 = gen_path(7).unwrap();
        let labels = build_labels(&p7, &LandmarkPool::explicit(vec![0, 6])).unwrap();
        assert_eq!(labels.out_row(0), &[0., 1., 2., 3., 4., 5., 6.]);
        assert_eq!(labels.out_row(1), &[6., 5., 4., 3., 2., 1., 0.]);
        assert!(labels.shares_tables());
    }

    #[test]
    fn directed_cycle_labels() {
        let g = Graph::new(3, true, vec![edge(0, 1, 1.0), edge(1, 2, 1.0), edge(2, 0, 1.0)]).unwrap();
        let labels = build_labels(&g, &LandmarkPool::explicit(vec![0])).unwrap();
        assert_eq!(labels.out_row(0), &[0., 1., 2.]);
        assert_eq!(labels.in_row(0), &[0., 2., 1.]);
        assert!(!labels.shares_tables());
    }

    #[test]
    fn landmark_outside_component_rejected() {
        let g = Graph::new(4, false, vec![edge(0, 1, 1.0), edge(1, 2, 1.0)]).unwrap();
        let err = build_labels(&g, &LandmarkPool::explicit(vec![3])).unwrap_err();
        assert!(matches!(err, LabelError::LandmarkOutsideComponent { landmark: 3 }));
    }

    #[test]
    fn cache_round_trip() {
        let g = Graph::new(3, true, vec![edge(0, 1, 1.5), edge(1, 2, 1.0), edge(2, 0, 2.0)]).unwrap();
        let labels = LabelTable::compute(&g, &[0, 2]).unwrap();
        let mut buf = Vec::new();
        labels.write_cache(&mut buf).unwrap();
        let back = LabelTable::read_cache(buf.as_slice()).unwrap();
        assert_eq!(back.landmark_ids(), labels.landmark_ids());
        assert_eq!(back.out_row(1), labels.out_row(1));
        assert_eq!(back.in_row(0), labels.in_row(0));
        assert!(LabelTable::read_cache(&buf[..10]).is_err());
    }
}
