//! Undirected unweighted graphs, the builders used by the experiments, and
//! their standard matrices.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use log::info;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::Csr;

/// Undirected, unweighted, loop-free graph. Adjacency is stored in CSR form
/// with both directions present and sorted neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adj: Csr,
    coords: Option<Vec<[f64; 2]>>,
}

impl Graph {
    /// Builds a graph from an undirected edge list. Self-loops are rejected
    /// and duplicate edges collapse.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut t = Vec::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidSize(format!(
                    "edge ({i},{j}) out of range for n={n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidSize(format!("self-loop at vertex {i}")));
            }
            t.push((i, j, 1.0));
            t.push((j, i, 1.0));
        }
        let mut adj = Csr::from_triplets(n, n, t);
        // duplicates were summed; flatten back to 0/1
        adj = Csr::from_triplets(n, n, adj.iter().map(|(i, j, _)| (i, j, 1.0)).collect());
        Ok(Graph { adj, coords: None })
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 2]>) -> Self {
        assert_eq!(coords.len(), self.n());
        self.coords = Some(coords);
        self
    }

    pub fn n(&self) -> usize {
        self.adj.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.adj.nnz() / 2
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        self.adj.row(i).0
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Edges (i, j) with i < j, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .filter(|&(i, j, _)| i < j)
            .map(|(i, j, _)| (i, j))
    }

    /// Hop distances from `src`; `None` for unreachable vertices.
    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        let mut q = VecDeque::new();
        dist[src] = Some(0);
        q.push_back(src);
        while let Some(u) = q.pop_front() {
            let du = dist[u].unwrap();
            for &v in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    q.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n() == 0 || self.bfs(0).iter().all(Option::is_some)
    }

    pub fn adjacency(&self) -> Csr {
        self.adj.clone()
    }

    pub fn degree_vector(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.degree(i) as f64).collect()
    }

    /// L = D - A
    pub fn laplacian(&self) -> Csr {
        let deg = self.degree_vector();
        let t = self
            .adj
            .iter()
            .map(|(i, j, _)| (i, j, -1.0))
            .chain(deg.iter().enumerate().map(|(i, &d)| (i, i, d)))
            .collect();
        Csr::from_triplets(self.n(), self.n(), t)
    }

    /// L_sym = D^{-1/2} L D^{-1/2}
    pub fn sym_normalized_laplacian(&self) -> Result<Csr> {
        let deg = self.degree_vector();
        if let Some(i) = deg.iter().position(|&d| d == 0.0) {
            return Err(Error::IsolatedVertex(i));
        }
        let t = self
            .adj
            .iter()
            .map(|(i, j, _)| (i, j, -1.0 / (deg[i] * deg[j]).sqrt()))
            .chain((0..self.n()).map(|i| (i, i, 1.0)))
            .collect();
        Ok(Csr::from_triplets(self.n(), self.n(), t))
    }

    /// Writes the "n m" header followed by one "i j" line per edge.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n(), self.num_edges())?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(k, l)| match l {
            Ok(s) if s.trim().is_empty() => None,
            other => Some((k + 1, other)),
        });
        let (ln, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            col: 1,
            msg: "empty edge list".into(),
        })?;
        let header = header?;
        let nums = parse_pair(&header, ln)?;
        let (n, m) = (nums.0, nums.1);
        let mut edges = Vec::with_capacity(m);
        for (ln, line) in lines {
            edges.push(parse_pair(&line?, ln)?);
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: 1,
                col: 1,
                msg: format!("header declares {m} edges, found {}", edges.len()),
            });
        }
        Graph::from_edges(n, edges)
    }
}

fn parse_pair(line: &str, ln: usize) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let mut next = |col| -> Result<usize> {
        let tok = it.next().ok_or_else(|| Error::Parse {
            line: ln,
            col,
            msg: "missing field".into(),
        })?;
        tok.parse().map_err(|e| Error::Parse {
            line: ln,
            col,
            msg: format!("{tok:?}: {e}"),
        })
    };
    Ok((next(1)?, next(2)?))
}

/// Circulant graph C(N, Q): vertices 0..N, edges (i, i ± q mod N) for q in Q.
pub fn build_circulant(n: usize, generators: &[usize]) -> Result<Graph> {
    let mut prev = 0;
    for &q in generators {
        if q == 0 || q <= prev || 2 * q >= n {
            return Err(Error::InvalidGenerator { n, q });
        }
        prev = q;
    }
    let edges = generators
        .iter()
        .flat_map(|&q| (0..n).map(move |i| (i, (i + q) % n)));
    Graph::from_edges(n, edges)
}

/// Path t_0 - t_1 - ... - t_{m-1}.
pub fn build_path(m: usize) -> Result<Graph> {
    if m < 2 {
        return Err(Error::InvalidSize(format!(
            "path needs at least 2 vertices, got {m}"
        )));
    }
    Graph::from_edges(m, (0..m - 1).map(|i| (i, i + 1)))
}

/// How vertex coordinates of a random geometric graph are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// i.i.d. uniform on [0,1]^2.
    #[default]
    Uniform,
    /// One point per randomly chosen cell of a ⌈√n⌉×⌈√n⌉ grid, uniform within
    /// the cell. Far fewer isolated vertices near the connectivity radius.
    Stratified,
}

/// Random geometric graph on uniform points in [0,1]^2; edge iff distance <= radius.
pub fn build_random_geometric(n: usize, radius: f64, seed: u64) -> Result<Graph> {
    build_random_geometric_with(n, radius, seed, Placement::Uniform)
}

pub fn build_random_geometric_with(
    n: usize,
    radius: f64,
    seed: u64,
    placement: Placement,
) -> Result<Graph> {
    if n == 0 {
        return Err(Error::InvalidSize(
            "random geometric graph needs n >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<[f64; 2]> = match placement {
        Placement::Uniform => (0..n)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect(),
        Placement::Stratified => {
            let k = (n as f64).sqrt().ceil() as usize;
            let mut cells: Vec<usize> = (0..k * k).collect();
            cells.shuffle(&mut rng);
            cells[..n]
                .iter()
                .map(|&c| {
                    let (cx, cy) = ((c % k) as f64, (c / k) as f64);
                    [
                        (cx + rng.random::<f64>()) / k as f64,
                        (cy + rng.random::<f64>()) / k as f64,
                    ]
                })
                .collect()
        }
    };
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            if dx * dx + dy * dy <= r2 {
                edges.push((i, j));
            }
        }
    }
    Ok(Graph::from_edges(n, edges)?.with_coords(coords))
}

/// Regenerates with seed, seed+1, ... until the graph is connected.
/// Returns the graph and the seed that produced it.
pub fn build_random_geometric_connected(
    n: usize,
    radius: f64,
    seed: u64,
    placement: Placement,
    max_attempts: usize,
) -> Result<(Graph, u64)> {
    for a in 0..max_attempts as u64 {
        let s = seed.wrapping_add(a);
        let g = build_random_geometric_with(n, radius, s, placement)?;
        if g.is_connected() {
            if a > 0 {
                info!("random geometric graph: seed {seed} disconnected, using seed {s}");
            }
            return Ok((g, s));
        }
    }
    Err(Error::Disconnected {
        attempts: max_attempts,
    })
}

/// Symmetrized k-nearest-neighbor graph under planar Euclidean distance.
/// Distance ties go to the smaller vertex index.
pub fn build_knn(coords: &[[f64; 2]], k: usize) -> Result<Graph> {
    let n = coords.len();
    if k >= n {
        return Err(Error::InvalidK { n, k });
    }
    let mut edges = Vec::with_capacity(n * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        for j in (0..n).filter(|&j| j != i) {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            cand.push((dx * dx + dy * dy, j));
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(cand[..k].iter().map(|&(_, j)| (i, j)));
    }
    Ok(Graph::from_edges(n, edges)?.with_coords(coords.to_vec()))
}

/// Cartesian product G1 × G2 with adjacency A1 ⊗ I + I ⊗ A2; vertex (u, v)
/// has index u * |V2| + v.
pub fn cartesian_product(g1: &Graph, g2: &Graph) -> Result<Graph> {
    if g1.n() == 0 || g2.n() == 0 {
        return Err(Error::InvalidSize(
            "cartesian product of an empty graph".into(),
        ));
    }
    let (n1, n2) = (g1.n(), g2.n());
    let mut edges = Vec::with_capacity(g1.num_edges() * n2 + g2.num_edges() * n1);
    for (u, w) in g1.edges() {
        edges.extend((0..n2).map(|v| (u * n2 + v, w * n2 + v)));
    }
    for (v, w) in g2.edges() {
        edges.extend((0..n1).map(|u| (u * n2 + v, u * n2 + w)));
    }
    Graph::from_edges(n1 * n2, edges)
}

/// Largest hop distance between vertex pairs carrying a nonzero entry with
/// |value| > tol. `None` means some nonzero links two components.
pub fn geodesic_width_of<I>(entries: I, graph: &Graph, tol: f64) -> Option<usize>
where
    I: IntoIterator<Item = (usize, usize, f64)>,
{
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); graph.n()];
    for (i, j, v) in entries {
        if v.abs() > tol {
            by_row[i].push(j);
        }
    }
    let mut width = 0;
    for (i, cols) in by_row.iter().enumerate() {
        if cols.iter().all(|&j| j == i) {
            continue;
        }
        let dist = graph.bfs(i);
        for &j in cols {
            width = width.max(dist[j]?);
        }
    }
    Some(width)
}

pub fn geodesic_width_sparse(h: &Csr, graph: &Graph) -> Option<usize> {
    geodesic_width_of(h.iter(), graph, 0.0)
}

pub fn geodesic_width_dense(h: &DMatrix<f64>, graph: &Graph, tol: f64) -> Option<usize> {
    let n = h.nrows();
    geodesic_width_of(
        (0..n).flat_map(|i| (0..n).map(move |j| (i, j, h[(i, j)]))),
        graph,
        tol,
    )
}

/// Reads a coordinates CSV with header and rows "id,x,y".
pub fn read_coords_csv<R: std::io::Read>(r: R) -> Result<Vec<[f64; 2]>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let field = |c: usize| -> Result<f64> {
            let s = rec.get(c).ok_or_else(|| Error::Parse {
                line,
                col: c + 1,
                msg: "missing field".into(),
            })?;
            s.parse().map_err(|e| Error::Parse {
                line,
                col: c + 1,
                msg: format!("{s:?}: {e}"),
            })
        };
        out.push([field(1)?, field(2)?]);
    }
    Ok(out)
}

pub fn write_coords_csv<W: Write>(coords: &[[f64; 2]], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["id", "x", "y"])?;
    for (i, c) in coords.iter().enumerate() {
        wr.write_record([i.to_string(), c[0].to_string(), c[1].to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Time-varying signal: `m` snapshots of length `n`, stored time-major so
/// entry (vertex i, time j) sits at j * n + i. That layout makes L_T ⊗ I act
/// on the time index.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalGrid {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl SignalGrid {
    pub fn from_snapshots(snapshots: &[Vec<f64>]) -> Result<Self> {
        let m = snapshots.len();
        let n = snapshots.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for s in snapshots {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: s.len(),
                });
            }
            data.extend_from_slice(s);
        }
        Ok(SignalGrid { n, m, data })
    }

    pub fn unvectorize(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: data.len(),
            });
        }
        Ok(SignalGrid { n, m, data })
    }

    pub fn vectorize(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn snapshot(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn get(&self, vertex: usize, time: usize) -> f64 {
        self.data[time * self.n + vertex]
    }
}
