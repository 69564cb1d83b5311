#![allow(dead_code)]

use nalgebra::DMatrix;
use polyshift::operator::Operator;
use polyshift::{Csr, PolyCoeffs, Shift, ShiftFamily};
use rand::Rng;

/// Random orthogonal matrix from the QR factor of a Gaussian-ish matrix.
pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    a.qr().q()
}

/// d commuting symmetric shifts V diag(λ_k) Vᵀ with random distinct spectra.
pub fn random_commuting_family<R: Rng>(n: usize, d: usize, rng: &mut R) -> ShiftFamily {
    let v = random_orthogonal(n, rng);
    let shifts = (0..d)
        .map(|_| {
            let lam = nalgebra::DVector::from_fn(n, |_, _| rng.random_range(0.0..2.0));
            let s = &v * DMatrix::from_diagonal(&lam) * v.transpose();
            let s = (&s + s.transpose()) * 0.5;
            Shift::unchecked(Operator::Sparse(Csr::from_dense(&s)))
        })
        .collect();
    ShiftFamily::new(shifts).expect("commuting by construction")
}

pub fn random_poly<R: Rng>(degrees: Vec<usize>, rng: &mut R) -> PolyCoeffs {
    let mut h = PolyCoeffs::zeros(degrees);
    for v in 0..h.len() {
        let l = h.multi_index(v);
        h.set(&l, rng.random_range(-1.0..1.0));
    }
    h
}

pub fn random_vec<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

pub fn h1() -> PolyCoeffs {
    PolyCoeffs::univariate(vec![27.0 / 4.0, -0.75, -1.0])
}
