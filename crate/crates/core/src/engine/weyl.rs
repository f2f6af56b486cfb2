//! Weyl (generalised Pauli) operators, maximally entangled states and Bell bases.
//!
//! `σ_(x,z) = Xˣ Zᶻ` with `X|k⟩ = |k+1 mod d⟩`, `Z|k⟩ = ωᵏ|k⟩`, `ω = e^{2πi/d}`,
//! flattened as `i = x·d + z`. For qubits this gives σ₀ = 𝟙, σ₁ = Z (phase −1
//! on |1⟩), σ₂ = X (flip), σ₃ = XZ (flip and phase).

use std::f64::consts::PI;

use super::layout::SubsystemLayout;
use super::linalg::{CMatrix, C64};
use super::povm::PovmSet;
use super::state::{StateVector, UnitaryOp};
use crate::error::{Result, SimError};

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(SimError::InvalidDimension(d))
    } else {
        Ok(())
    }
}

/// The matrix of `σ_(x,z)`.
pub fn weyl_matrix(d: usize, x: usize, z: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for k in 0..d {
        let phase = C64::from_polar(1.0, 2.0 * PI * ((z * k) % d) as f64 / d as f64);
        m[((k + x) % d, k)] = phase;
    }
    m
}

pub fn weyl(d: usize, index: usize) -> Result<UnitaryOp> {
    check_dim(d)?;
    if index >= d * d {
        return Err(SimError::InvalidIndex {
            label: "weyl".into(),
            digit: index,
            dim: d * d,
        });
    }
    UnitaryOp::new(weyl_matrix(d, index / d, index % d))
}

/// All d² correction unitaries in flattened order.
pub fn weyl_operators(d: usize) -> Result<Vec<UnitaryOp>> {
    check_dim(d)?;
    (0..d * d).map(|i| weyl(d, i)).collect()
}

/// |Φ⁺⟩ = (1/√d) Σ_k |k⟩|k⟩ on the given pair of labels.
pub fn maximally_entangled(d: usize, labels: [&str; 2]) -> Result<StateVector> {
    check_dim(d)?;
    let layout = SubsystemLayout::new([(labels[0], d), (labels[1], d)])?;
    let mut amps = vec![C64::new(0.0, 0.0); d * d];
    let a = 1.0 / (d as f64).sqrt();
    for k in 0..d {
        amps[k * d + k] = C64::new(a, 0.0);
    }
    StateVector::new(layout, amps)
}

/// |Φ⁺⟩ between two groups of subsystems, pairing them component-wise.
pub fn maximally_entangled_groups(
    d: usize,
    left: &[impl AsRef<str>],
    right: &[impl AsRef<str>],
) -> Result<StateVector> {
    if left.len() != right.len() || left.is_empty() {
        return Err(SimError::InvalidArgument("group sizes differ".into()));
    }
    let mut state = maximally_entangled(d, [left[0].as_ref(), right[0].as_ref()])?;
    for (l, r) in left.iter().zip(right).skip(1) {
        state = state.tensor(&maximally_entangled(d, [l.as_ref(), r.as_ref()])?)?;
    }
    let order: Vec<&str> = left
        .iter()
        .map(|s| s.as_ref())
        .chain(right.iter().map(|s| s.as_ref()))
        .collect();
    state.permute(&order)
}

/// Bell basis `(𝟙 ⊗ σ_i)|Φ⁺⟩`: the Weyl operator acts on the second label.
pub fn bell_basis(d: usize, labels: [&str; 2]) -> Result<Vec<StateVector>> {
    let phi = maximally_entangled(d, labels)?;
    weyl_operators(d)?
        .iter()
        .map(|w| phi.apply(w, &[labels[1]]))
        .collect()
}

/// Projective Bell measurement on a pair of d-level systems; outcome i ↔ `bell_basis[i]`.
pub fn bell_povm(d: usize) -> Result<PovmSet> {
    let states = bell_basis(d, ["p", "q"])?;
    let kets: Vec<Vec<C64>> = states.iter().map(|s| s.amplitudes().to_vec()).collect();
    let mut povm = PovmSet::projective(&kets)?;
    povm.set_labels((0..d * d).map(|i| format!("bell{i}")).collect())?;
    Ok(povm)
}

/// Correction for ordinary teleportation with Bell pair (input, sender half):
/// after outcome i the receiver holds `σ̄_i|ψ⟩`, undone by `σ_iᵀ`.
pub fn pre_correction(d: usize, i: usize) -> Result<UnitaryOp> {
    Ok(weyl(d, i)?.transpose())
}

/// Correction for post-selected teleportation with Bell pair (receiver half,
/// receiver system): the sender applies `σ_i` before post-selecting.
pub fn post_correction(d: usize, i: usize) -> Result<UnitaryOp> {
    weyl(d, i)
}

/// Index of `σ_a σ_b` up to phase.
pub fn weyl_product_index(d: usize, a: usize, b: usize) -> usize {
    let (xa, za) = (a / d, a % d);
    let (xb, zb) = (b / d, b % d);
    ((xa + xb) % d) * d + (za + zb) % d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::linalg;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn qubit_indexing_matches_flip_and_phase_rule() {
        let ops = weyl_operators(2).unwrap();
        let z = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]);
        let x = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        assert!(linalg::max_abs_diff(&ops[0].matrix(), &linalg::identity(2)) < 1e-15);
        assert!(linalg::max_abs_diff(&ops[1].matrix(), &z) < 1e-15);
        assert!(linalg::max_abs_diff(&ops[2].matrix(), &x) < 1e-15);
        // σ₃: |0⟩ → |1⟩, |1⟩ → −|0⟩
        let s3 = ops[3].matrix();
        assert!((s3[(1, 0)] - c(1.0)).norm() < 1e-15);
        assert!((s3[(0, 1)] - c(-1.0)).norm() < 1e-15);
    }

    #[test]
    fn qubit_weyl_square_to_identity_up_to_phase() {
        for w in weyl_operators(2).unwrap() {
            let sq = w.matrix() * w.matrix();
            let phase = sq[(0, 0)];
            assert!((phase.norm() - 1.0).abs() < 1e-14);
            assert!(linalg::max_abs_diff(&sq, &(linalg::identity(2) * phase)) < 1e-14);
        }
    }

    #[test]
    fn trace_orthogonality_up_to_five() {
        for d in 2..=5 {
            let ops = weyl_operators(d).unwrap();
            assert_eq!(ops.len(), d * d);
            for (i, a) in ops.iter().enumerate() {
                assert!(linalg::unitarity_defect(&a.matrix()) < crate::EPS_UNITARY);
                for (j, b) in ops.iter().enumerate() {
                    let t = (a.matrix().adjoint() * b.matrix()).trace();
                    let expect = if i == j { d as f64 } else { 0.0 };
                    assert!((t - c(expect)).norm() < 1e-12, "d={d} i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn bell_basis_is_orthonormal() {
        for d in 2..=5 {
            let basis = bell_basis(d, ["A", "a"]).unwrap();
            for (i, u) in basis.iter().enumerate() {
                for (j, v) in basis.iter().enumerate() {
                    let g = u.inner(v).unwrap();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((g - c(expect)).norm() < crate::EPS_NORM);
                }
            }
        }
    }

    #[test]
    fn maximally_entangled_examples() {
        let phi = maximally_entangled(2, ["A", "B"]).unwrap();
        let l = phi.layout().clone();
        let zz = StateVector::basis_state(&l, &[0, 0]).unwrap();
        assert!((zz.inner(&phi).unwrap() - c(std::f64::consts::FRAC_1_SQRT_2)).norm() < 1e-15);
        assert_eq!(
            maximally_entangled(1, ["A", "B"]),
            Err(SimError::InvalidDimension(1))
        );
        let phi3 = maximally_entangled(3, ["A", "B"]).unwrap();
        let red = phi3.reduced_density(&["B"]).unwrap();
        for r in 0..3 {
            for col in 0..3 {
                let e = if r == col { 1.0 / 3.0 } else { 0.0 };
                assert!((red.matrix()[(r, col)] - c(e)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn product_index_matches_composition_up_to_phase() {
        for d in 2..=4 {
            for a in 0..d * d {
                for b in 0..d * d {
                    let prod = weyl(d, a).unwrap().matrix() * weyl(d, b).unwrap().matrix();
                    let k = weyl_product_index(d, a, b);
                    let overlap = (weyl(d, k).unwrap().matrix().adjoint() * prod).trace();
                    assert!((overlap.norm() - d as f64).abs() < 1e-12);
                }
            }
        }
    }
}
