//! Random states, unitaries and measurements for property tests and sweeps.

use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::{self, CMatrix, C64};
use super::operator::Operator;
use super::povm::PovmSet;
use super::state::{StateVector, UnitaryOp};
use crate::error::Result;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_amplitudes<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..dim).map(|_| gaussian(rng)).collect();
    let n = linalg::norm_sqr(&v).sqrt();
    v.into_iter().map(|a| a / n).collect()
}

/// Haar-random pure state on a single labeled system.
pub fn random_state<R: Rng + ?Sized>(label: &str, dim: usize, rng: &mut R) -> Result<StateVector> {
    StateVector::ket(label, random_amplitudes(dim, rng))
}

/// Haar-random unitary via QR of a complex Gaussian matrix with phase fix.
pub fn haar_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<UnitaryOp> {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for row in 0..dim {
            q[(row, k)] *= phase;
        }
    }
    UnitaryOp::new(q)
}

/// Random POVM with `outcomes` full-rank elements: `E_k = S^{-1/2} A_k S^{-1/2}`.
pub fn random_povm<R: Rng + ?Sized>(dim: usize, outcomes: usize, rng: &mut R) -> Result<PovmSet> {
    let raw: Vec<CMatrix> = (0..outcomes)
        .map(|_| {
            let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
            &g * g.adjoint()
        })
        .collect();
    let total = raw.iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m);
    let inv_root = linalg::hermitian_fn(&total, |v| 1.0 / v.sqrt());
    let elements = raw
        .iter()
        .map(|a| {
            let e = &inv_root * a * &inv_root;
            Operator::Dense((&e + e.adjoint()) * C64::new(0.5, 0.0))
        })
        .collect();
    PovmSet::new(elements)
}

/// Projective measurement in a Haar-random orthonormal basis.
pub fn random_basis_measurement<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<PovmSet> {
    let u = haar_unitary(dim, rng)?.matrix();
    let kets: Vec<Vec<C64>> = (0..dim)
        .map(|k| u.column(k).iter().copied().collect())
        .collect();
    PovmSet::projective(&kets)
}
