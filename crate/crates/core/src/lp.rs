//! Dense two-phase simplex, specialised to the uniform-approximation LP
//! min_c max_i |1 − (P c)_i|.
//!
//! The primal has few columns and many rows, so the solver works on its dual
//! (few rows, 2N columns), then reads the primal solution back off the
//! simplex multipliers of the optimal basis.

use log::debug;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const EPS: f64 = 1e-11;

/// Standard-form LP min cᵀx s.t. A x = b, x ≥ 0, b ≥ 0.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Simplex multipliers π with Bᵀπ = c_B.
    pub duals: DVector<f64>,
    pub basis: Vec<usize>,
    pub pivots: usize,
}

struct Tableau {
    /// m constraint rows followed by one objective row; last column is rhs.
    t: DMatrix<f64>,
    basis: Vec<usize>,
    pivots: usize,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.t.nrows() - 1
    }

    fn cols(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[(r, c)];
        let ncols = self.t.ncols();
        for j in 0..ncols {
            self.t[(r, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == r {
                continue;
            }
            let f = self.t[(i, c)];
            if f != 0.0 {
                for j in 0..ncols {
                    let v = self.t[(r, j)];
                    self.t[(i, j)] -= f * v;
                }
            }
        }
        self.basis[r] = c;
        self.pivots += 1;
    }

    /// Minimizes the objective row over columns with `allowed[j]`.
    fn run(&mut self, allowed: &[bool]) -> Result<()> {
        let m = self.rows();
        let obj = m;
        let max_pivots = 50 * (self.cols() + m) + 1000;
        let mut degenerate_streak = 0usize;
        loop {
            // reduced costs live in the objective row (as c_j − z_j)
            let bland = degenerate_streak > 50;
            let mut enter = None;
            let mut best = -EPS;
            for (j, _) in allowed.iter().enumerate().filter(|(_, a)| **a) {
                let rc = self.t[(obj, j)];
                if rc < -EPS {
                    if bland {
                        enter = Some(j);
                        break;
                    }
                    if rc < best {
                        best = rc;
                        enter = Some(j);
                    }
                }
            }
            let Some(c) = enter else { return Ok(()) };
            let rhs = self.cols();
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[(i, c)];
                if a > EPS {
                    let ratio = self.t[(i, rhs)] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-14
                                || (ratio <= lr + 1e-14 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Lp("unbounded".into()));
            };
            degenerate_streak = if ratio.abs() < 1e-14 {
                degenerate_streak + 1
            } else {
                0
            };
            self.pivot(r, c);
            if self.pivots > max_pivots {
                return Err(Error::Lp(format!(
                    "no convergence after {} pivots",
                    self.pivots
                )));
            }
        }
    }
}

/// Two-phase tableau simplex.
pub fn solve_standard(lp: &StandardLp) -> Result<LpSolution> {
    let (m, n) = lp.a.shape();
    if lp.b.iter().any(|v| *v < 0.0) {
        return Err(Error::Lp("rhs must be nonnegative".into()));
    }
    // columns: n structural, m artificial, rhs
    let mut t = DMatrix::zeros(m + 1, n + m + 1);
    for i in 0..m {
        for j in 0..n {
            t[(i, j)] = lp.a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = lp.b[i];
    }
    // phase-one objective: Σ artificials, expressed in non-basic terms
    for j in 0..n {
        t[(m, j)] = -(0..m).map(|i| lp.a[(i, j)]).sum::<f64>();
    }
    t[(m, n + m)] = -lp.b.sum();
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
        pivots: 0,
    };
    tab.run(&vec![true; n + m])?;
    let infeas = -tab.t[(m, n + m)];
    if infeas > 1e-9 * (1.0 + lp.b.amax()) {
        return Err(Error::Lp(format!(
            "infeasible (phase one residual {infeas:e})"
        )));
    }
    // drive remaining artificials out of the basis
    let mut redundant = Vec::new();
    for r in 0..m {
        if tab.basis[r] >= n {
            match (0..n).find(|&j| tab.t[(r, j)].abs() > 1e-9) {
                Some(j) => tab.pivot(r, j),
                None => redundant.push(r),
            }
        }
    }
    // phase two objective row: c_j − c_Bᵀ B⁻¹ a_j
    for j in 0..=n + m {
        tab.t[(m, j)] = if j < n { lp.c[j] } else { 0.0 };
    }
    for r in 0..m {
        let bj = tab.basis[r];
        let cb = if bj < n { lp.c[bj] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=n + m {
                let v = tab.t[(r, j)];
                tab.t[(m, j)] -= cb * v;
            }
        }
    }
    let mut allowed = vec![true; n + m];
    allowed[n..].iter_mut().for_each(|a| *a = false);
    tab.run(&allowed)?;
    let mut x = DVector::zeros(n);
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.t[(r, n + m)];
        }
    }
    let objective = lp.c.dot(&x);
    // π_i = c_B B⁻¹ e_i: read from the artificial columns, whose original
    // coefficients form the identity
    let duals = DVector::from_fn(m, |i, _| -tab.t[(m, n + i)]);
    if !redundant.is_empty() {
        debug!("simplex: {} redundant rows", redundant.len());
    }
    Ok(LpSolution {
        x,
        objective,
        duals,
        basis: tab.basis,
        pivots: tab.pivots,
    })
}

/// Best uniform fit of the constant 1 by the columns of `p`:
/// returns (c, s) with s = max_i |1 − (P c)_i| minimal.
pub fn minimax_fit(p: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    let (nr, nc) = p.shape();
    if nr == 0 || nc == 0 {
        return Err(Error::Lp("empty design matrix".into()));
    }
    // dual: Σ_i (u_i − w_i) P_i = 0, Σ_i (u_i + w_i) = 1, minimize Σu − Σw
    let mut a = DMatrix::zeros(nc + 1, 2 * nr);
    for i in 0..nr {
        for k in 0..nc {
            a[(k, i)] = p[(i, k)];
            a[(k, nr + i)] = -p[(i, k)];
        }
        a[(nc, i)] = 1.0;
        a[(nc, nr + i)] = 1.0;
    }
    let mut b = DVector::zeros(nc + 1);
    b[nc] = 1.0;
    let c = DVector::from_fn(2 * nr, |j, _| if j < nr { 1.0 } else { -1.0 });
    let sol = solve_standard(&StandardLp { a, b, c })?;
    let mut coeffs = DVector::from_fn(nc, |k, _| sol.duals[k]);
    let mut s = max_dev(p, &coeffs);
    // near-interpolation the least-squares fit is as good as any
    let ls = p
        .clone()
        .svd(true, true)
        .solve(&DVector::from_element(nr, 1.0), 1e-14)
        .ok();
    for c in [polish(p, &sol.basis), ls].into_iter().flatten() {
        let sp = max_dev(p, &c);
        if sp < s {
            coeffs = c;
            s = sp;
        }
    }
    debug!(
        "minimax LP: {} pivots, dual objective {:.3e}, achieved {:.3e}",
        sol.pivots, -sol.objective, s
    );
    Ok((coeffs, s))
}

fn max_dev(p: &DMatrix<f64>, c: &DVector<f64>) -> f64 {
    (p * c).iter().map(|v| (1.0 - v).abs()).fold(0.0, f64::max)
}

/// Multipliers lose digits when the optimal basis is ill-conditioned. The
/// basic columns name the extremal points, so re-solve 1 − P_i c = σ_i s on
/// them directly (u columns carry σ = −1, w columns σ = +1).
fn polish(p: &DMatrix<f64>, basis: &[usize]) -> Option<DVector<f64>> {
    let (nr, nc) = p.shape();
    let rows: Vec<(usize, f64)> = basis
        .iter()
        .filter(|&&j| j < 2 * nr)
        .map(|&j| if j < nr { (j, -1.0) } else { (j - nr, 1.0) })
        .collect();
    if rows.is_empty() {
        return None;
    }
    let mut a = DMatrix::zeros(rows.len(), nc + 1);
    for (r, &(i, sigma)) in rows.iter().enumerate() {
        for k in 0..nc {
            a[(r, k)] = p[(i, k)];
        }
        a[(r, nc)] = sigma;
    }
    let x = a
        .svd(true, true)
        .solve(&DVector::from_element(rows.len(), 1.0), 1e-14)
        .ok()?;
    Some(x.rows(0, nc).into_owned())
}
