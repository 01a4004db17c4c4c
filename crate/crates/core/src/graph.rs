//! Input graphs, vertex partitions, subgraph masks and centralized oracles.
//!
//! Vertex ids are 0-based in memory and 1-based in files. Ports are indices
//! into a vertex's adjacency list; a vertex never learns neighbour ids.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;

pub type VertexId = u32;
pub type Port = u32;
pub type Weight = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
    pub w: Weight,
}

/// One adjacency entry: the neighbour behind a port, the edge index and the
/// port under which the neighbour sees us.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdjEntry {
    pub nbr: VertexId,
    pub edge: u32,
    pub rev: Port,
    pub w: Weight,
}

/// Immutable undirected simple graph with distinct positive weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    adj: Vec<AdjEntry>,
}

impl WeightedGraph {
    /// Build and validate. Duplicate weights, self loops, parallel edges and
    /// out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::Graph("graph needs at least one vertex".into()));
        }
        let mut seen_w = BTreeSet::new();
        let mut seen_e = BTreeSet::new();
        for e in &edges {
            if e.u as usize >= n || e.v as usize >= n {
                return Err(Error::Graph(format!("edge ({}, {}) out of range", e.u + 1, e.v + 1)));
            }
            if e.u == e.v {
                return Err(Error::Graph(format!("self loop at {}", e.u + 1)));
            }
            if e.w == 0 {
                return Err(Error::Graph("weights must be positive".into()));
            }
            if !seen_w.insert(e.w) {
                return Err(Error::Graph(format!("duplicate weight {}", e.w)));
            }
            if !seen_e.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::Graph(format!("parallel edge ({}, {})", e.u + 1, e.v + 1)));
            }
        }
        let mut deg = vec![0usize; n];
        for e in &edges {
            deg[e.u as usize] += 1;
            deg[e.v as usize] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + deg[i];
        }
        let mut fill = offsets[..n].to_vec();
        let blank = AdjEntry { nbr: 0, edge: 0, rev: 0, w: 0 };
        let mut adj = vec![blank; offsets[n]];
        for (idx, e) in edges.iter().enumerate() {
            let (pu, pv) = (fill[e.u as usize], fill[e.v as usize]);
            fill[e.u as usize] += 1;
            fill[e.v as usize] += 1;
            let ru = (pu - offsets[e.u as usize]) as Port;
            let rv = (pv - offsets[e.v as usize]) as Port;
            adj[pu] = AdjEntry { nbr: e.v, edge: idx as u32, rev: rv, w: e.w };
            adj[pv] = AdjEntry { nbr: e.u, edge: idx as u32, rev: ru, w: e.w };
        }
        Ok(WeightedGraph { n, edges, offsets, adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, idx: u32) -> Edge {
        self.edges[idx as usize]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.offsets[v as usize + 1] - self.offsets[v as usize]
    }

    pub fn ports(&self, v: VertexId) -> &[AdjEntry] {
        &self.adj[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn port(&self, v: VertexId, p: Port) -> AdjEntry {
        self.ports(v)[p as usize]
    }

    /// Offset of vertex `v`'s first port in a flat per-port array.
    pub fn port_offset(&self, v: VertexId) -> usize {
        self.offsets[v as usize]
    }

    pub fn total_ports(&self) -> usize {
        self.adj.len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n as VertexId).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn max_weight(&self) -> Weight {
        self.edges.iter().map(|e| e.w).max().unwrap_or(1)
    }

    pub fn is_connected(&self) -> bool {
        bfs_depths(self, 0).iter().all(|d| d.is_some())
    }

    /// Edge index of the edge with weight `w`, if any.
    pub fn edge_by_weight(&self, w: Weight) -> Option<u32> {
        self.edges.iter().position(|e| e.w == w).map(|i| i as u32)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for e in &self.edges {
            s.push_str(&format!("{} {} {}\n", e.u + 1, e.v + 1, e.w));
        }
        s
    }
}

/// Parse the edge-list format: header `n m`, then `m` lines `u v w`.
pub fn parse_graph(text: &str, require_connected: bool) -> Result<WeightedGraph, Error> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "missing header".into() })?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(Error::Parse { line: hl, msg: format!("expected \"n m\", got {header:?}") });
    }
    let n: usize = parse_num(head[0], hl)?;
    let m: usize = parse_num(head[1], hl)?;
    let mut edges = Vec::with_capacity(m);
    for (ln, line) in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse { line: ln, msg: format!("expected \"u v w\", got {line:?}") });
        }
        let u: u32 = parse_num(f[0], ln)?;
        let v: u32 = parse_num(f[1], ln)?;
        let w: u64 = parse_num(f[2], ln)?;
        if u == 0 || v == 0 {
            return Err(Error::Parse { line: ln, msg: "vertex ids are 1-based".into() });
        }
        edges.push(Edge { u: u - 1, v: v - 1, w });
    }
    if edges.len() != m {
        return Err(Error::Parse { line: hl, msg: format!("header announces {m} edges, found {}", edges.len()) });
    }
    let g = WeightedGraph::new(n, edges)?;
    if require_connected && !g.is_connected() {
        return Err(Error::Graph("disconnected graph".into()));
    }
    Ok(g)
}

pub fn load_graph(path: &Path, require_connected: bool) -> Result<WeightedGraph, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_graph(&text, require_connected)
}

fn parse_num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, Error> {
    s.parse().map_err(|_| Error::Parse { line, msg: format!("bad number {s:?}") })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Path,
    Cycle,
    Star,
    RandomConnected,
    Grid,
    Complete,
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "path" => Ok(Family::Path),
            "cycle" => Ok(Family::Cycle),
            "star" => Ok(Family::Star),
            "random" | "random-connected" => Ok(Family::RandomConnected),
            "grid" => Ok(Family::Grid),
            "complete" => Ok(Family::Complete),
            other => Err(Error::Usage(format!("unsupported family {other:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Path => "path",
            Family::Cycle => "cycle",
            Family::Star => "star",
            Family::RandomConnected => "random",
            Family::Grid => "grid",
            Family::Complete => "complete",
        };
        f.write_str(s)
    }
}

/// Generate a connected graph of the given family. Weights are a seeded
/// permutation of `1..=m`. Random graphs get about `n` extra edges on top of
/// a random recursive tree.
pub fn generate_graph(family: Family, n: usize, seed: u64) -> Result<WeightedGraph, Error> {
    generate_with_density(family, n, seed, 1.0)
}

/// Like [`generate_graph`]; `extra_per_vertex` controls how many non-tree
/// edges a random graph receives (ignored by the other families).
pub fn generate_with_density(family: Family, n: usize, seed: u64, extra_per_vertex: f64) -> Result<WeightedGraph, Error> {
    if n == 0 {
        return Err(Error::Usage("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let n32 = n as u32;
    match family {
        Family::Path => pairs.extend((1..n32).map(|i| (i - 1, i))),
        Family::Cycle => {
            pairs.extend((1..n32).map(|i| (i - 1, i)));
            if n >= 3 {
                pairs.push((n32 - 1, 0));
            }
        }
        Family::Star => pairs.extend((1..n32).map(|i| (0, i))),
        Family::Complete => {
            for u in 0..n32 {
                for v in u + 1..n32 {
                    pairs.push((u, v));
                }
            }
        }
        Family::Grid => {
            let cols = (n as f64).sqrt().ceil() as u32;
            for i in 0..n32 {
                let (r, c) = (i / cols, i % cols);
                if c + 1 < cols && i + 1 < n32 {
                    pairs.push((i, i + 1));
                }
                if (r + 1) * cols + c < n32 {
                    pairs.push((i, i + cols));
                }
            }
        }
        Family::RandomConnected => {
            let mut order: Vec<u32> = (0..n32).collect();
            order.shuffle(&mut rng);
            let mut present = BTreeSet::new();
            for i in 1..n {
                let j = rng.gen_range(0..i);
                let (a, b) = (order[i], order[j]);
                present.insert((a.min(b), a.max(b)));
                pairs.push((a, b));
            }
            let max_edges = n * (n - 1) / 2;
            let extra = ((extra_per_vertex * n as f64).round() as usize).min(max_edges - pairs.len());
            let mut added = 0;
            let mut attempts = 0usize;
            while added < extra && attempts < 50 * extra + 100 {
                attempts += 1;
                let a = rng.gen_range(0..n32);
                let b = rng.gen_range(0..n32);
                if a == b || !present.insert((a.min(b), a.max(b))) {
                    continue;
                }
                pairs.push((a, b));
                added += 1;
            }
        }
    }
    let mut weights: Vec<Weight> = (1..=pairs.len() as Weight).collect();
    weights.shuffle(&mut rng);
    let edges = pairs.into_iter().zip(weights).map(|((u, v), w)| Edge { u, v, w }).collect();
    WeightedGraph::new(n, edges)
}

/// Part id per vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    parts: Vec<u32>,
}

impl Partition {
    /// Validate that every part induces a connected subgraph of `g`.
    pub fn new(g: &WeightedGraph, parts: Vec<u32>) -> Result<Self, Error> {
        if parts.len() != g.n() {
            return Err(Error::Graph(format!("partition covers {} of {} vertices", parts.len(), g.n())));
        }
        let p = Partition { parts };
        p.check_connected(g)?;
        Ok(p)
    }

    pub fn single(n: usize) -> Self {
        Partition { parts: vec![0; n] }
    }

    pub fn part(&self, v: VertexId) -> u32 {
        self.parts[v as usize]
    }

    pub fn parts(&self) -> &[u32] {
        &self.parts
    }

    pub fn count(&self) -> usize {
        self.parts.iter().collect::<BTreeSet<_>>().len()
    }

    fn check_connected(&self, g: &WeightedGraph) -> Result<(), Error> {
        let mut comp = vec![u32::MAX; g.n()];
        let mut seen_parts = BTreeSet::new();
        for s in 0..g.n() as VertexId {
            if comp[s as usize] != u32::MAX {
                continue;
            }
            let pid = self.part(s);
            if !seen_parts.insert(pid) {
                return Err(Error::Graph(format!("disconnected part {pid}")));
            }
            comp[s as usize] = s;
            let mut q = VecDeque::from([s]);
            while let Some(x) = q.pop_front() {
                for a in g.ports(x) {
                    if comp[a.nbr as usize] == u32::MAX && self.part(a.nbr) == pid {
                        comp[a.nbr as usize] = s;
                        q.push_back(a.nbr);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parse `v part_id` lines (1-based vertex ids, any integer part ids).
pub fn parse_partition(g: &WeightedGraph, text: &str) -> Result<Partition, Error> {
    let mut parts = vec![None; g.n()];
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 2 {
            return Err(Error::Parse { line: i + 1, msg: format!("expected \"v part\", got {line:?}") });
        }
        let v: usize = parse_num(f[0], i + 1)?;
        let p: u32 = parse_num(f[1], i + 1)?;
        if v == 0 || v > g.n() {
            return Err(Error::Parse { line: i + 1, msg: format!("vertex {v} out of range") });
        }
        parts[v - 1] = Some(p);
    }
    let parts = parts
        .into_iter()
        .enumerate()
        .map(|(v, p)| p.ok_or_else(|| Error::Graph(format!("vertex {} has no part", v + 1))))
        .collect::<Result<Vec<_>, _>>()?;
    Partition::new(g, parts)
}

pub fn load_partition(g: &WeightedGraph, path: &Path) -> Result<Partition, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_partition(g, &text)
}

/// Random partition into at most `parts` connected parts: grow the parts
/// from random seeds by a simultaneous BFS.
pub fn random_partition(g: &WeightedGraph, parts: usize, seed: u64) -> Partition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut ids: Vec<u32> = (0..g.n() as u32).collect();
    ids.shuffle(&mut rng);
    let mut owner = vec![u32::MAX; g.n()];
    let mut q = VecDeque::new();
    for (i, &s) in ids.iter().take(parts.max(1)).enumerate() {
        owner[s as usize] = i as u32;
        q.push_back(s);
    }
    while let Some(x) = q.pop_front() {
        let mut nbrs: Vec<VertexId> = g.ports(x).iter().map(|a| a.nbr).collect();
        nbrs.shuffle(&mut rng);
        for y in nbrs {
            if owner[y as usize] == u32::MAX {
                owner[y as usize] = owner[x as usize];
                q.push_back(y);
            }
        }
    }
    Partition { parts: owner }
}

/// Edges of a subgraph H. Each member edge is recorded by exactly one
/// endpoint (the lower vertex id); the other endpoint learns membership from
/// a probe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgraphMask {
    recorded: Vec<bool>,
    member: Vec<bool>,
}

impl SubgraphMask {
    pub fn from_edges(g: &WeightedGraph, members: &BTreeSet<u32>) -> Self {
        let mut recorded = vec![false; g.total_ports()];
        let mut member = vec![false; g.m()];
        for &e in members {
            member[e as usize] = true;
            let ed = g.edge(e);
            let rec = ed.u.min(ed.v);
            let port = g.ports(rec).iter().position(|a| a.edge == e).unwrap();
            recorded[g.port_offset(rec) + port] = true;
        }
        SubgraphMask { recorded, member }
    }

    pub fn full(g: &WeightedGraph) -> Self {
        Self::from_edges(g, &(0..g.m() as u32).collect())
    }

    /// Whether `v` records the edge behind `port`.
    pub fn records(&self, g: &WeightedGraph, v: VertexId, port: Port) -> bool {
        self.recorded[g.port_offset(v) + port as usize]
    }

    pub fn contains(&self, edge: u32) -> bool {
        self.member[edge as usize]
    }

    /// `w_H(e)`: the weight for members, `None` (infinite) otherwise.
    pub fn weight(&self, g: &WeightedGraph, edge: u32) -> Option<Weight> {
        self.contains(edge).then(|| g.edge(edge).w)
    }

    pub fn len(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Mask of the edges whose endpoints share a part.
pub fn induced_mask(g: &WeightedGraph, p: &Partition) -> SubgraphMask {
    let members = g
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, e)| p.part(e.u) == p.part(e.v))
        .map(|(i, _)| i as u32)
        .collect();
    SubgraphMask::from_edges(g, &members)
}

struct Dsu {
    parent: Vec<u32>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n as u32).collect() }
    }
    fn find(&mut self, x: u32) -> u32 {
        let mut r = x;
        while self.parent[r as usize] != r {
            r = self.parent[r as usize];
        }
        let mut c = x;
        while self.parent[c as usize] != r {
            let nx = self.parent[c as usize];
            self.parent[c as usize] = r;
            c = nx;
        }
        r
    }
    fn union(&mut self, a: u32, b: u32) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra as usize] = rb;
        true
    }
}

/// Kruskal on `w` (or on `w_H` when a mask is given). Returns edge indices.
pub fn oracle_msf(g: &WeightedGraph, mask: Option<&SubgraphMask>) -> BTreeSet<u32> {
    let mut order: Vec<u32> = (0..g.m() as u32).filter(|&e| mask.is_none_or(|m| m.contains(e))).collect();
    order.sort_by_key(|&e| g.edge(e).w);
    let mut dsu = Dsu::new(g.n());
    let mut out = BTreeSet::new();
    for e in order {
        let ed = g.edge(e);
        if dsu.union(ed.u, ed.v) {
            out.insert(e);
        }
    }
    out
}

/// Connected components of (V, E_H) as a component id per vertex.
pub fn components(g: &WeightedGraph, mask: Option<&SubgraphMask>) -> Vec<u32> {
    let mut dsu = Dsu::new(g.n());
    for (i, e) in g.edges().iter().enumerate() {
        if mask.is_none_or(|m| m.contains(i as u32)) {
            dsu.union(e.u, e.v);
        }
    }
    (0..g.n() as u32).map(|v| dsu.find(v)).collect()
}

/// Hop distances from `root` (`None` for unreachable vertices).
pub fn bfs_depths(g: &WeightedGraph, root: VertexId) -> Vec<Option<u32>> {
    let mut d = vec![None; g.n()];
    d[root as usize] = Some(0);
    let mut q = VecDeque::from([root]);
    while let Some(x) = q.pop_front() {
        let dx = d[x as usize].unwrap();
        for a in g.ports(x) {
            if d[a.nbr as usize].is_none() {
                d[a.nbr as usize] = Some(dx + 1);
                q.push_back(a.nbr);
            }
        }
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphStats {
    pub n: usize,
    pub m: usize,
    pub diameter: u32,
    pub bfs_depth: Option<u32>,
}

/// Exact unweighted diameter by all-pairs BFS (oracle side only).
pub fn graph_stats(g: &WeightedGraph) -> GraphStats {
    let diameter = (0..g.n() as VertexId)
        .map(|s| bfs_depths(g, s).into_iter().flatten().max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    GraphStats { n: g.n(), m: g.m(), diameter, bfs_depth: None }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> WeightedGraph {
        parse_graph("3 3\n1 2 1\n2 3 2\n1 3 3\n", true).unwrap()
    }

    #[test]
    fn parses_triangle() {
        let g = tri();
        assert_eq!((g.n(), g.m()), (3, 3));
        assert_eq!(g.degree(0), 2);
    }

    #[test]
    fn rejects_duplicate_weight() {
        let err = parse_graph("3 2\n1 2 5\n2 3 5\n", false).unwrap_err();
        assert!(err.to_string().contains("duplicate weight"));
    }

    #[test]
    fn single_vertex_without_edges() {
        let g = parse_graph("1 0\n", true).unwrap();
        assert_eq!((g.n(), g.m()), (1, 0));
    }

    #[test]
    fn rejects_disconnected_in_mst_mode() {
        assert!(parse_graph("3 1\n1 2 1\n", true).is_err());
        assert!(parse_graph("3 1\n1 2 1\n", false).is_ok());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match parse_graph("2 1\n1 x 3\n", false) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn families() {
        let p = generate_graph(Family::Path, 5, 3).unwrap();
        assert_eq!(p.m(), 4);
        let c = generate_graph(Family::Cycle, 4, 7).unwrap();
        let mut ws: Vec<_> = c.edges().iter().map(|e| e.w).collect();
        ws.sort();
        assert_eq!(ws, vec![1, 2, 3, 4]);
        let a = generate_graph(Family::RandomConnected, 64, 1).unwrap();
        let b = generate_graph(Family::RandomConnected, 64, 1).unwrap();
        assert_eq!(a.edges(), b.edges());
        assert!(a.is_connected());
        for n in [1, 2, 7, 10, 17] {
            assert!(generate_graph(Family::Grid, n, 0).unwrap().is_connected());
        }
        assert!("hypercube".parse::<Family>().is_err());
    }

    #[test]
    fn ports_are_consistent() {
        let g = generate_graph(Family::RandomConnected, 50, 9).unwrap();
        for v in 0..g.n() as u32 {
            for (p, a) in g.ports(v).iter().enumerate() {
                let back = g.port(a.nbr, a.rev);
                assert_eq!((back.nbr, back.rev, back.edge), (v, p as u32, a.edge));
            }
        }
    }

    #[test]
    fn induced_masks() {
        let g = tri();
        let p = Partition::new(&g, vec![0, 0, 1]).unwrap();
        let m = induced_mask(&g, &p);
        assert_eq!(m.len(), 1);
        assert!(m.contains(0));
        assert_eq!(m.weight(&g, 1), None);
        let all = induced_mask(&g, &Partition::single(3));
        assert_eq!(all.len(), 3);
        let p5 = generate_graph(Family::Path, 5, 0).unwrap();
        let parts = Partition::new(&p5, vec![0, 0, 0, 1, 1]).unwrap();
        assert_eq!(induced_mask(&p5, &parts).len(), 3);
    }

    #[test]
    fn each_member_recorded_once() {
        let g = generate_graph(Family::RandomConnected, 40, 2).unwrap();
        let p = random_partition(&g, 4, 2);
        let m = induced_mask(&g, &p);
        for (i, e) in g.edges().iter().enumerate() {
            let pu = g.ports(e.u).iter().position(|a| a.edge == i as u32).unwrap() as u32;
            let pv = g.ports(e.v).iter().position(|a| a.edge == i as u32).unwrap() as u32;
            let count = m.records(&g, e.u, pu) as u32 + m.records(&g, e.v, pv) as u32;
            assert_eq!(count, m.contains(i as u32) as u32);
        }
    }

    #[test]
    fn disconnected_part_rejected() {
        let p5 = generate_graph(Family::Path, 5, 0).unwrap();
        let err = Partition::new(&p5, vec![0, 1, 0, 1, 1]).unwrap_err();
        assert!(err.to_string().contains("disconnected part"));
    }

    #[test]
    fn kruskal_small_cases() {
        let g = tri();
        let ws: BTreeSet<_> = oracle_msf(&g, None).iter().map(|&e| g.edge(e).w).collect();
        assert_eq!(ws, BTreeSet::from([1, 2]));
        let c = parse_graph("4 4\n1 2 1\n2 3 2\n3 4 3\n4 1 4\n", true).unwrap();
        let ws: BTreeSet<_> = oracle_msf(&c, None).iter().map(|&e| c.edge(e).w).collect();
        assert_eq!(ws, BTreeSet::from([1, 2, 3]));
    }

    #[test]
    fn stats_diameter() {
        let p = generate_graph(Family::Path, 6, 0).unwrap();
        assert_eq!(graph_stats(&p).diameter, 5);
        let s = generate_graph(Family::Star, 6, 0).unwrap();
        assert_eq!(graph_stats(&s).diameter, 2);
    }
}
