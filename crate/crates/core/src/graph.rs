//! Weighted graphs: construction, DIMACS / edge-list I/O, synthetic
//! generators and connectivity analysis.
//!
//! A [`Graph`] is immutable once built. Vertex ids are dense and 0-based.
//! Undirected graphs store each edge once in [`Graph::edges`] and expose it
//! in both directions through the adjacency lists.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng as _;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for a graph with {num_vertices} vertices")]
    VertexOutOfRange { vertex: usize, num_vertices: usize },
    #[error("edge {tail}->{head} has invalid weight {weight} (weights must be finite and > 0)")]
    InvalidWeight {
        tail: usize,
        head: usize,
        weight: f64,
    },
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// One outgoing arc in an adjacency list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightUnit {
    Unitless,
    Meters,
}

#[derive(Debug, Clone)]
struct Adjacency {
    offsets: Vec<usize>,
    arcs: Vec<Arc>,
}

impl Adjacency {
    fn build(n: usize, arcs: impl Iterator<Item = (usize, usize, f64)> + Clone) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for (u, _, _) in arcs.clone() {
            offsets[u + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut out = vec![Arc { to: 0, weight: 0.0 }; offsets[n]];
        for (u, v, w) in arcs {
            out[fill[u]] = Arc { to: v, weight: w };
            fill[u] += 1;
        }
        Self { offsets, arcs: out }
    }

    fn arcs(&self, u: usize) -> &[Arc] {
        &self.arcs[self.offsets[u]..self.offsets[u + 1]]
    }
}

#[derive(Debug, Clone)]
pub struct Graph {
    num_vertices: usize,
    directed: bool,
    edges: Vec<Edge>,
    forward: Adjacency,
    /// `None` for undirected graphs, where the forward lists already hold both directions.
    reverse: Option<Adjacency>,
    weight_unit: WeightUnit,
}

impl Graph {
    /// Builds a graph from an edge list. Self-loops are dropped with a
    /// warning; parallel edges are kept.
    pub fn new(num_vertices: usize, directed: bool, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let mut kept = Vec::with_capacity(edges.len());
        let mut loops = 0usize;
        for e in edges {
            for vertex in [e.source, e.target] {
                if vertex >= num_vertices {
                    return Err(GraphError::VertexOutOfRange {
                        vertex,
                        num_vertices,
                    });
                }
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(GraphError::InvalidWeight {
                    tail: e.source,
                    head: e.target,
                    weight: e.weight,
                });
            }
            if e.source == e.target {
                loops += 1;
                continue;
            }
            kept.push(e);
        }
        if loops > 0 {
            log::warn!("dropped {loops} self-loop(s)");
        }
        let (forward, reverse) = if directed {
            let fwd = Adjacency::build(num_vertices, kept.iter().map(|e| (e.source, e.target, e.weight)));
            let rev = Adjacency::build(num_vertices, kept.iter().map(|e| (e.target, e.source, e.weight)));
            (fwd, Some(rev))
        } else {
            let both = kept
                .iter()
                .flat_map(|e| [(e.source, e.target, e.weight), (e.target, e.source, e.weight)]);
            (Adjacency::build(num_vertices, both), None)
        };
        Ok(Self {
            num_vertices,
            directed,
            edges: kept,
            forward,
            reverse,
            weight_unit: WeightUnit::Unitless,
        })
    }

    pub fn with_weight_unit(mut self, unit: WeightUnit) -> Self {
        self.weight_unit = unit;
        self
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn weight_unit(&self) -> WeightUnit {
        self.weight_unit
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Arcs leaving `u` (both directions of every incident edge when undirected).
    pub fn neighbors(&self, u: usize) -> &[Arc] {
        self.forward.arcs(u)
    }

    /// Arcs entering `u`, expressed as arcs of the transposed graph.
    pub fn reverse_neighbors(&self, u: usize) -> &[Arc] {
        match &self.reverse {
            Some(rev) => rev.arcs(u),
            None => self.forward.arcs(u),
        }
    }

    /// Total degree: out + in for directed graphs, incident edges otherwise.
    pub fn degree(&self, u: usize) -> usize {
        match &self.reverse {
            Some(rev) => self.forward.arcs(u).len() + rev.arcs(u).len(),
            None => self.forward.arcs(u).len(),
        }
    }

    pub fn check_vertex(&self, v: usize) -> Result<(), GraphError> {
        if v < self.num_vertices {
            Ok(())
        } else {
            Err(GraphError::VertexOutOfRange {
                vertex: v,
                num_vertices: self.num_vertices,
            })
        }
    }

    /// SHA-256 over the vertex count, direction flag and edge list; stable
    /// across runs and platforms. Used as a cache key.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_vertices as u64).to_le_bytes());
        h.update([self.directed as u8]);
        for e in &self.edges {
            h.update((e.source as u64).to_le_bytes());
            h.update((e.target as u64).to_le_bytes());
            h.update(e.weight.to_le_bytes());
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

fn parse_err(line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        line,
        message: message.into(),
    }
}

/// Reads a 9th DIMACS Challenge `.gr` file (`p sp n m` header, `a u v w`
/// arcs with 1-based ids, `c` comments). The result is directed.
pub fn parse_dimacs_gr<R: BufRead>(reader: R) -> Result<Graph, GraphError> {
    let mut header: Option<(usize, usize)> = None;
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("c") => continue,
            Some("p") => {
                if header.is_some() {
                    return Err(parse_err(lineno, "duplicate problem line"));
                }
                if tok.next() != Some("sp") {
                    return Err(parse_err(lineno, "expected `p sp <n> <m>`"));
                }
                let n = tok.next().and_then(|s| s.parse::<usize>().ok());
                let m = tok.next().and_then(|s| s.parse::<usize>().ok());
                match (n, m, tok.next()) {
                    (Some(n), Some(m), None) => {
                        header = Some((n, m));
                        edges.reserve(m);
                    }
                    _ => return Err(parse_err(lineno, "malformed problem line, expected `p sp <n> <m>`")),
                }
            }
            Some("a") => {
                let (n, _) = header.ok_or_else(|| parse_err(lineno, "arc line before `p sp` header"))?;
                let fields: Vec<&str> = tok.collect();
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected `a <u> <v> <w>`"));
                }
                let mut ids = [0usize; 2];
                for (slot, field) in ids.iter_mut().zip(&fields[..2]) {
                    let id: usize = field
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("invalid vertex id `{field}`")))?;
                    if id == 0 || id > n {
                        return Err(parse_err(lineno, format!("vertex {id} out of range 1..={n}")));
                    }
                    *slot = id - 1;
                }
                let w: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("invalid weight `{}`", fields[2])))?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(parse_err(lineno, format!("non-positive weight {w}")));
                }
                edges.push(Edge {
                    source: ids[0],
                    target: ids[1],
                    weight: w,
                });
            }
            Some(other) => return Err(parse_err(lineno, format!("unknown line type `{other}`"))),
        }
    }
    let (n, m) = header.ok_or_else(|| parse_err(0, "missing `p sp <n> <m>` header"))?;
    if m != edges.len() {
        log::warn!("header announces {m} arcs, found {}", edges.len());
    }
    Ok(Graph::new(n, true, edges)?.with_weight_unit(WeightUnit::Meters))
}

/// Writes a `.gr` file. Undirected edges are emitted as two arcs.
pub fn write_dimacs_gr<W: Write>(graph: &Graph, mut out: W) -> std::io::Result<()> {
    let arcs = if graph.is_directed() {
        graph.num_edges()
    } else {
        2 * graph.num_edges()
    };
    writeln!(out, "p sp {} {}", graph.num_vertices(), arcs)?;
    for e in graph.edges() {
        writeln!(out, "a {} {} {}", e.source + 1, e.target + 1, e.weight)?;
        if !graph.is_directed() {
            writeln!(out, "a {} {} {}", e.target + 1, e.source + 1, e.weight)?;
        }
    }
    Ok(())
}

/// Reads a plain `u v w` edge list (0-based, `#` comments). A
/// `# vertices <n>` comment fixes the vertex count; otherwise it is the
/// largest id plus one.
pub fn parse_edge_list<R: BufRead>(reader: R, directed: bool) -> Result<Graph, GraphError> {
    let mut declared: Option<usize> = None;
    let mut edges = Vec::new();
    let mut max_id: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            let mut tok = comment.split_whitespace();
            if tok.next() == Some("vertices") {
                let n = tok
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| parse_err(lineno, "malformed `# vertices <n>` line"))?;
                declared = Some(n);
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(lineno, "expected `<u> <v> <w>`"));
        }
        let u: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid vertex id `{}`", fields[0])))?;
        let v: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid vertex id `{}`", fields[1])))?;
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid weight `{}`", fields[2])))?;
        if !(w.is_finite() && w > 0.0) {
            return Err(parse_err(lineno, format!("non-positive weight {w}")));
        }
        max_id = Some(max_id.map_or(u.max(v), |m: usize| m.max(u).max(v)));
        edges.push(Edge {
            source: u,
            target: v,
            weight: w,
        });
    }
    let n = match (declared, max_id) {
        (Some(n), Some(m)) if m >= n => {
            return Err(parse_err(0, format!("vertex {m} out of range for declared {n} vertices")))
        }
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => 0,
    };
    Graph::new(n, directed, edges)
}

pub fn write_edge_list<W: Write>(graph: &Graph, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "# vertices {} {}",
        graph.num_vertices(),
        if graph.is_directed() { "directed" } else { "undirected" }
    )?;
    for e in graph.edges() {
        writeln!(out, "{} {} {}", e.source, e.target, e.weight)?;
    }
    Ok(())
}

fn check_weights(w_lo: f64, w_hi: f64) -> Result<(), GraphError> {
    if !(w_lo.is_finite() && w_hi.is_finite() && w_lo > 0.0 && w_hi >= w_lo) {
        return Err(GraphError::InvalidParameter(format!(
            "weight range [{w_lo}, {w_hi}] must satisfy 0 < w_lo <= w_hi"
        )));
    }
    Ok(())
}

fn draw_weight(rng: &mut rng::Rng, w_lo: f64, w_hi: f64) -> f64 {
    if w_lo == w_hi {
        w_lo
    } else {
        rng.random_range(w_lo..=w_hi)
    }
}

/// Undirected stochastic block model with uniform random edge weights.
pub fn gen_sbm(
    blocks: usize,
    block_size: usize,
    p_in: f64,
    p_out: f64,
    w_lo: f64,
    w_hi: f64,
    seed: u64,
) -> Result<Graph, GraphError> {
    if blocks == 0 || block_size == 0 {
        return Err(GraphError::InvalidParameter("blocks and block_size must be positive".into()));
    }
    for p in [p_in, p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(GraphError::InvalidParameter(format!("probability {p} outside [0, 1]")));
        }
    }
    check_weights(w_lo, w_hi)?;
    let n = blocks * block_size;
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if u / block_size == v / block_size { p_in } else { p_out };
            if p > 0.0 && rng.random::<f64>() < p {
                edges.push(Edge {
                    source: u,
                    target: v,
                    weight: draw_weight(&mut rng, w_lo, w_hi),
                });
            }
        }
    }
    Graph::new(n, false, edges)
}

/// Undirected Barabási–Albert graph: `m_attach` seed vertices, then each new
/// vertex links to `m_attach` distinct existing vertices chosen with
/// probability proportional to degree.
pub fn gen_ba(n: usize, m_attach: usize, w_lo: f64, w_hi: f64, seed: u64) -> Result<Graph, GraphError> {
    if m_attach == 0 || n <= m_attach {
        return Err(GraphError::InvalidParameter(format!(
            "need n > m_attach >= 1, got n={n}, m_attach={m_attach}"
        )));
    }
    check_weights(w_lo, w_hi)?;
    let mut rng = rng::seeded(seed);
    let mut edges = Vec::with_capacity((n - m_attach) * m_attach);
    let mut targets: Vec<usize> = (0..m_attach).collect();
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * n * m_attach);
    for source in m_attach..n {
        for &t in &targets {
            edges.push(Edge {
                source,
                target: t,
                weight: draw_weight(&mut rng, w_lo, w_hi),
            });
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m_attach));
        targets.clear();
        while targets.len() < m_attach {
            let pick = repeated[rng.random_range(0..repeated.len())];
            if !targets.contains(&pick) {
                targets.push(pick);
            }
        }
    }
    Graph::new(n, false, edges)
}

/// Unit-weight undirected path `0 - 1 - ... - (n-1)`.
pub fn gen_path(n: usize) -> Result<Graph, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameter(format!("path needs n >= 2, got {n}")));
    }
    let edges = (0..n - 1)
        .map(|i| Edge {
            source: i,
            target: i + 1,
            weight: 1.0,
        })
        .collect();
    Graph::new(n, false, edges)
}

#[derive(Debug, Clone)]
pub struct ComponentReport {
    /// Weak component id per vertex.
    pub weak: Vec<usize>,
    pub weak_count: usize,
    pub largest_weak: Vec<usize>,
    /// Strong component id per vertex (directed graphs only).
    pub strong: Option<Vec<usize>>,
    pub strong_count: usize,
    pub largest_strong: Option<Vec<usize>>,
}

impl ComponentReport {
    /// The component queries and landmarks are drawn from: the largest strong
    /// component for directed graphs, the largest weak one otherwise.
    pub fn largest(&self) -> &[usize] {
        self.largest_strong.as_deref().unwrap_or(&self.largest_weak)
    }
}

fn largest_class(ids: &[usize], count: usize) -> Vec<usize> {
    let mut sizes = vec![0usize; count];
    for &c in ids {
        sizes[c] += 1;
    }
    // Ties go to the class containing the lowest vertex id; ids are assigned
    // in order of first appearance so the lowest class id wins.
    let mut best = 0;
    for c in 1..count {
        if sizes[c] > sizes[best] {
            best = c;
        }
    }
    ids.iter()
        .enumerate()
        .filter(|&(_, &c)| c == best)
        .map(|(v, _)| v)
        .collect()
}

fn relabel_by_first_vertex(ids: &mut [usize], count: usize) {
    let mut map = vec![usize::MAX; count];
    let mut next = 0;
    for id in ids.iter_mut() {
        if map[*id] == usize::MAX {
            map[*id] = next;
            next += 1;
        }
        *id = map[*id];
    }
}

fn relabel_roots(mut ids: Vec<usize>) -> (Vec<usize>, usize) {
    let mut map = vec![usize::MAX; ids.len()];
    let mut next = 0;
    for id in ids.iter_mut() {
        if map[*id] == usize::MAX {
            map[*id] = next;
            next += 1;
        }
        *id = map[*id];
    }
    (ids, next)
}

fn weak_components(graph: &Graph) -> (Vec<usize>, usize) {
    let n = graph.num_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for e in graph.edges() {
        let a = find(&mut parent, e.source);
        let b = find(&mut parent, e.target);
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let ids: Vec<usize> = (0..n).map(|v| find(&mut parent, v)).collect();
    // Roots are the lowest vertex of each class, so first-appearance order
    // numbers classes by their lowest vertex.
    relabel_roots(ids)
}

/// Iterative Tarjan.
fn strong_components(graph: &Graph) -> (Vec<usize>, usize) {
    let n = graph.num_vertices();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut count = 0;
    let mut next_index = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos == 0 && index[v] == UNSEEN {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let arcs = graph.neighbors(v);
            if *pos < arcs.len() {
                let w = arcs[*pos].to;
                *pos += 1;
                if index[w] == UNSEEN {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp[w] = count;
                    if w == v {
                        break;
                    }
                }
                count += 1;
            }
        }
    }
    relabel_by_first_vertex(&mut comp, count);
    (comp, count)
}

pub fn components(graph: &Graph) -> ComponentReport {
    let (weak, weak_count) = weak_components(graph);
    let largest_weak = largest_class(&weak, weak_count);
    let (strong, strong_count, largest_strong) = if graph.is_directed() {
        let (ids, count) = strong_components(graph);
        let largest = largest_class(&ids, count);
        (Some(ids), count, Some(largest))
    } else {
        (None, weak_count, None)
    };
    ComponentReport {
        weak,
        weak_count,
        largest_weak,
        strong,
        strong_count,
        largest_strong,
    }
}
