//! Round-synchronous simulation of vertex agents that only talk to graph
//! neighbours.
//!
//! The only non-local step in every filtering and inverse-filtering algorithm
//! is a shift application (S z)(i) = S_ii z(i) + Σ_{j∈N_i} S_ij z(j). Here
//! that step is one exchange round: every agent sends its current value to
//! its neighbours, then combines its inbox with its own row of S. All other
//! arithmetic in the algorithms is elementwise and therefore local to each
//! vertex; agent state is kept as one array per quantity, indexed by vertex.

use std::io::Write;
use std::sync::Mutex;

use log::info;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::inverse::{iterative_approx, Approximant, SolveOptions, SolveTrace};
use crate::operator::{FnMap, LinearMap};
use crate::polyfilter::{apply_ops, cheb_to_monomial, PolyCoeffs};
use crate::shifts::ShiftFamily;

/// Largest product-graph size whose Kronecker shifts are expanded for simulation.
pub const KRON_SIM_CAP: usize = 4096;

/// One agent's row of a shift, restricted to itself and its neighbours.
#[derive(Debug, Clone)]
struct LocalRow {
    diag: f64,
    /// Aligned with the agent's sorted neighbour list.
    off: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VertexAgent {
    pub id: usize,
    neighbors: Vec<usize>,
    rows: Vec<LocalRow>,
}

impl VertexAgent {
    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }
}

#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
pub struct Message {
    pub round: usize,
    pub src: usize,
    pub dst: usize,
    pub payload_size: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct CommStats {
    pub rounds: usize,
    pub messages_per_round: Vec<usize>,
    pub sent_per_vertex: Vec<usize>,
    pub received_per_vertex: Vec<usize>,
    pub flops: usize,
    #[serde(skip)]
    pub log: Option<Vec<Message>>,
}

#[derive(Serialize)]
struct Summary {
    rounds: usize,
    total_messages: usize,
    max_sent_per_vertex: usize,
    max_received_per_vertex: usize,
    flops: usize,
}

impl CommStats {
    pub fn total_messages(&self) -> usize {
        self.messages_per_round.iter().sum()
    }

    /// Writes "round,src,dst,payload_size" for every logged message.
    pub fn write_log_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["round", "src", "dst", "payload_size"])?;
        for m in self.log.iter().flatten() {
            wr.serialize((m.round, m.src, m.dst, m.payload_size))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Summary {
            rounds: self.rounds,
            total_messages: self.total_messages(),
            max_sent_per_vertex: self.sent_per_vertex.iter().copied().max().unwrap_or(0),
            max_received_per_vertex: self.received_per_vertex.iter().copied().max().unwrap_or(0),
            flops: self.flops,
        })?)
    }
}

/// A set of agents on one graph holding local rows of a shift family.
pub struct Network<'g> {
    graph: &'g Graph,
    agents: Vec<VertexAgent>,
    order: Vec<usize>,
    stats: Mutex<CommStats>,
}

impl<'g> Network<'g> {
    /// Distributes the rows of each shift to its vertex. Kronecker shifts are
    /// expanded when the product is at most [`KRON_SIM_CAP`] vertices.
    pub fn new(graph: &'g Graph, family: &ShiftFamily) -> Result<Self> {
        let n = graph.n();
        if family.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: family.dim(),
            });
        }
        if family.has_structured() {
            if n > KRON_SIM_CAP {
                return Err(Error::Unsupported(format!(
                    "Kronecker shifts on {n} vertices exceed the simulation cap {KRON_SIM_CAP}"
                )));
            }
            info!("expanding Kronecker-structured shifts on {n} vertices for simulation");
        }
        let mut agents: Vec<VertexAgent> = (0..n)
            .map(|i| VertexAgent {
                id: i,
                neighbors: graph.neighbors(i).to_vec(),
                rows: Vec::new(),
            })
            .collect();
        for s in family.shifts() {
            let m = s.to_csr();
            for (i, agent) in agents.iter_mut().enumerate() {
                let mut row = LocalRow {
                    diag: 0.0,
                    off: vec![0.0; agent.neighbors.len()],
                };
                let (idx, val) = m.row(i);
                for (&j, &v) in idx.iter().zip(val) {
                    if j == i {
                        row.diag = v;
                    } else {
                        match agent.neighbors.binary_search(&j) {
                            Ok(p) => row.off[p] = v,
                            Err(_) => {
                                return Err(Error::WidthViolation {
                                    i,
                                    j,
                                    width: graph.bfs(i)[j],
                                })
                            }
                        }
                    }
                }
                agent.rows.push(row);
            }
        }
        let stats = CommStats {
            sent_per_vertex: vec![0; n],
            received_per_vertex: vec![0; n],
            ..Default::default()
        };
        Ok(Network {
            graph,
            agents,
            order: (0..n).collect(),
            stats: Mutex::new(stats),
        })
    }

    /// Keeps every message for later inspection.
    pub fn with_message_log(self) -> Self {
        self.stats.lock().unwrap().log = Some(Vec::new());
        self
    }

    /// Order in which agents send and compute within a round.
    pub fn with_order(mut self, order: Vec<usize>) -> Self {
        assert_eq!(order.len(), self.agents.len());
        self.order = order;
        self
    }

    pub fn agents(&self) -> &[VertexAgent] {
        &self.agents
    }

    pub fn d(&self) -> usize {
        self.agents.first().map_or(0, |a| a.rows.len())
    }

    pub fn stats(&self) -> CommStats {
        self.stats.lock().unwrap().clone()
    }

    pub fn take_stats(&self) -> CommStats {
        let mut s = self.stats.lock().unwrap();
        let n = self.agents.len();
        let fresh = CommStats {
            sent_per_vertex: vec![0; n],
            received_per_vertex: vec![0; n],
            log: s.log.as_ref().map(|_| Vec::new()),
            ..Default::default()
        };
        std::mem::replace(&mut *s, fresh)
    }

    /// Records local arithmetic done outside exchange rounds.
    pub fn add_local_flops(&self, f: usize) {
        self.stats.lock().unwrap().flops += f;
    }

    /// One synchronous exchange round followed by the local weighted sum
    /// with shift `k`. Reads only the snapshot `z` of the previous round.
    pub fn shift_round(&self, k: usize, z: &[f64], y: &mut [f64]) {
        let n = self.agents.len();
        let mut stats = self.stats.lock().unwrap();
        let round = stats.rounds;
        // inbox[i][p] holds the value received from agent i's p-th neighbour
        let mut inbox: Vec<Vec<f64>> = self
            .agents
            .iter()
            .map(|a| vec![0.0; a.neighbors.len()])
            .collect();
        let mut count = 0;
        for &src in &self.order {
            for &dst in &self.agents[src].neighbors {
                assert!(
                    self.graph.has_edge(src, dst),
                    "message {src}->{dst} is not along an edge"
                );
                let p = self.agents[dst]
                    .neighbors
                    .binary_search(&src)
                    .expect("symmetric adjacency");
                inbox[dst][p] = z[src];
                stats.sent_per_vertex[src] += 1;
                stats.received_per_vertex[dst] += 1;
                count += 1;
                if let Some(log) = stats.log.as_mut() {
                    log.push(Message {
                        round,
                        src,
                        dst,
                        payload_size: 1,
                    });
                }
            }
        }
        let mut flops = 0;
        for &i in &self.order {
            let row = &self.agents[i].rows[k];
            let mut acc = row.diag * z[i];
            for (w, v) in row.off.iter().zip(&inbox[i]) {
                acc += w * v;
            }
            y[i] = acc;
            flops += 2 * (row.off.len() + 1);
        }
        debug_assert_eq!(y.len(), n);
        stats.messages_per_round.push(count);
        stats.rounds += 1;
        stats.flops += flops;
    }

    fn shift_maps(&self) -> Vec<NetShift<'_, 'g>> {
        (0..self.d()).map(|k| NetShift { net: self, k }).collect()
    }
}

/// Shift `k` of a network, applied by exchange rounds.
pub struct NetShift<'a, 'g> {
    net: &'a Network<'g>,
    k: usize,
}

impl LinearMap for NetShift<'_, '_> {
    fn dim(&self) -> usize {
        self.net.agents.len()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.net.shift_round(self.k, x, y)
    }

    fn mults(&self) -> usize {
        self.net
            .agents
            .iter()
            .map(|a| a.rows[self.k].off.len() + 1)
            .sum()
    }
}

fn check(net: &Network, d: usize, x: &[f64]) -> Result<()> {
    if net.d() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: net.d(),
        });
    }
    if x.len() != net.agents.len() {
        return Err(Error::DimensionMismatch {
            expected: net.agents.len(),
            got: x.len(),
        });
    }
    Ok(())
}

/// Distributed polynomial filtering through the U_m column recursion.
pub fn sim_filter_on(net: &Network, h: &PolyCoeffs, x: &[f64]) -> Result<(Vec<f64>, CommStats)> {
    check(net, h.d(), x)?;
    let maps = net.shift_maps();
    let ops: Vec<&dyn LinearMap> = maps.iter().map(|m| m as &dyn LinearMap).collect();
    let (y, st) = apply_ops(h, &ops, x)?;
    // counted mults include the rounds; add only the local coefficient work
    let round_mults: usize = net.stats().flops / 2;
    net.add_local_flops(st.mults.saturating_sub(round_mults));
    Ok((y, net.take_stats()))
}

pub fn sim_filter(
    graph: &Graph,
    family: &ShiftFamily,
    h: &PolyCoeffs,
    x: &[f64],
) -> Result<(Vec<f64>, CommStats)> {
    let net = Network::new(graph, family)?;
    sim_filter_on(&net, h, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseMethod {
    Iopa,
    Icpa,
}

/// Distributed IOPA/ICPA: each iteration applies G and H by exchange rounds
/// and updates e(i), x(i) locally. Residual norms in the returned trace are
/// observer-side diagnostics, not part of the protocol.
pub fn sim_inverse_on(
    net: &Network,
    method: InverseMethod,
    h: &PolyCoeffs,
    g: &Approximant,
    b: &[f64],
    m: usize,
) -> Result<(Vec<f64>, SolveTrace, CommStats)> {
    check(net, h.d(), b)?;
    let gp = match (method, g) {
        (_, Approximant::Polynomial(p)) => p.clone(),
        (InverseMethod::Icpa, Approximant::Chebyshev(c)) => cheb_to_monomial(c)?,
        (_, Approximant::ScaledIdentity(gamma)) => PolyCoeffs::constant(h.d(), *gamma),
        (_, other) => {
            return Err(Error::Unsupported(format!(
                "cannot distribute approximant {other:?}"
            )))
        }
    };
    if gp.d() != h.d() {
        return Err(Error::DimensionMismatch {
            expected: h.d(),
            got: gp.d(),
        });
    }
    let maps = net.shift_maps();
    let ops: Vec<&dyn LinearMap> = maps.iter().map(|m| m as &dyn LinearMap).collect();
    let n = b.len();
    let hm = FnMap::new(n, |x: &[f64]| apply_ops(h, &ops, x).expect("checked").0);
    let gm = FnMap::new(n, |x: &[f64]| apply_ops(&gp, &ops, x).expect("checked").0);
    let tr = iterative_approx(&hm, &gm, b, &SolveOptions::fixed(m));
    net.add_local_flops(4 * n * tr.iterations);
    Ok((tr.x.clone(), tr, net.take_stats()))
}

pub fn sim_inverse(
    graph: &Graph,
    family: &ShiftFamily,
    method: InverseMethod,
    h: &PolyCoeffs,
    g: &Approximant,
    b: &[f64],
    m: usize,
) -> Result<(Vec<f64>, SolveTrace, CommStats)> {
    let net = Network::new(graph, family)?;
    sim_inverse_on(&net, method, h, g, b, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_random_geometric_connected, Placement};
    use crate::inverse::{iopa_solve, solve_with};
    use crate::operator::Operator;
    use crate::polyfilter::apply;
    use crate::shifts::{circulant_family, circulant_laplacian_spectrum, validate_shift};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_round_for_shift() {
        let (g, fam) = circulant_family(12, &[1]).unwrap();
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let h = PolyCoeffs::univariate(vec![0.0, 1.0]);
        let (y, st) = sim_filter(&g, &fam, &h, &x).unwrap();
        assert_eq!(st.rounds, 1);
        assert_eq!(st.total_messages(), 24);
        assert_eq!(y, fam.shifts()[0].apply(&x));
    }

    #[test]
    fn matches_centralized_two_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (g, fam) = circulant_family(30, &[1, 3]).unwrap();
        let mut h = PolyCoeffs::zeros(vec![2, 3]);
        for v in 0..h.len() {
            let l = h.multi_index(v);
            h.set(&l, rng.random_range(-1.0..1.0));
        }
        let x: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let net = Network::new(&g, &fam).unwrap().with_message_log();
        let (y, st) = sim_filter_on(&net, &h, &x).unwrap();
        let want = apply(&h, &fam, &x).unwrap();
        for (p, q) in y.iter().zip(&want) {
            assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }
        // 3 columns × 3 rounds over S_2, then 3 rounds over S_1... plus seeding
        assert_eq!(st.rounds, 3 * 3 + 2);
        let log = st.log.as_ref().unwrap();
        assert!(log.iter().all(|m| g.has_edge(m.src, m.dst)));
        let per_vertex_bound = 4 * g.max_degree() * 12;
        assert!(st.sent_per_vertex.iter().all(|&s| s <= per_vertex_bound));
        let mut csv = Vec::new();
        st.write_log_csv(&mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap().lines().count(),
            log.len() + 1
        );
        assert!(st.summary_json().unwrap().contains("\"rounds\": 11"));
    }

    #[test]
    fn schedule_order_is_irrelevant() {
        let (g, _) =
            build_random_geometric_connected(60, 0.25, 5, Placement::Uniform, 100).unwrap();
        let s =
            validate_shift(Operator::Sparse(g.sym_normalized_laplacian().unwrap()), &g).unwrap();
        let fam = ShiftFamily::new(vec![s]).unwrap();
        let h = PolyCoeffs::univariate(vec![0.3, -1.2, 0.7, 0.05]);
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
        let a = sim_filter(&g, &fam, &h, &x).unwrap().0;
        let mut order: Vec<usize> = (0..60).collect();
        order.reverse();
        order.swap(3, 40);
        let net = Network::new(&g, &fam).unwrap().with_order(order);
        let b = sim_filter_on(&net, &h, &x).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn non_local_row_rejected() {
        let (g, _) = circulant_family(10, &[1]).unwrap();
        let wide = crate::sparse::Csr::from_triplets(10, 10, vec![(0, 5, 1.0), (5, 0, 1.0)]);
        let fam = ShiftFamily::new_unchecked(vec![crate::shifts::Shift::unchecked(
            Operator::Sparse(wide),
        )]);
        assert!(matches!(
            Network::new(&g, &fam),
            Err(Error::WidthViolation { .. })
        ));
    }

    #[test]
    fn inverse_matches_centralized() {
        let g = crate::graph::build_circulant(200, &[1, 2, 5]).unwrap();
        let s =
            validate_shift(Operator::Sparse(g.sym_normalized_laplacian().unwrap()), &g).unwrap();
        let fam = ShiftFamily::new(vec![s])
            .unwrap()
            .with_spectrum(circulant_laplacian_spectrum(200, &[1, 2, 5]));
        let h = PolyCoeffs::univariate(vec![6.75, -0.75, -1.0]);
        let b: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let (central, fit) = iopa_solve(&h, &fam, &b, 1, &SolveOptions::fixed(6)).unwrap();
        let (x, tr, st) =
            sim_inverse(&g, &fam, InverseMethod::Iopa, &h, &fit.approximant(), &b, 6).unwrap();
        for (p, q) in x.iter().zip(&central.x) {
            assert!((p - q).abs() < 1e-10);
        }
        for (p, q) in tr.residuals.iter().zip(&central.residuals) {
            assert!((p - q).abs() < 1e-10);
        }
        // per iteration: one round for G (degree 1), two for H (degree 2)
        assert_eq!(st.rounds, 6 * 3);
        let (x0, _, _) =
            sim_inverse(&g, &fam, InverseMethod::Iopa, &h, &fit.approximant(), &b, 0).unwrap();
        assert!(x0.iter().all(|v| *v == 0.0));
        let c = solve_with(&h, &fit.approximant(), &fam, &b, &SolveOptions::fixed(6)).unwrap();
        assert_eq!(c.x, central.x);
    }
}
