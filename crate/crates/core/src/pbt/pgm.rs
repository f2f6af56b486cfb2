//! Port-based measurements on `input ⊗ port₁ ⊗ … ⊗ portₙ`.
//!
//! With `σ_i = |Φ⁺⟩⟨Φ⁺|_{in,portᵢ} ⊗ 𝟙/D^{n-1}` and `ρ = Σσ_i = WW†`, where the
//! columns of `W` are `|Φ⁺⟩_{in,portᵢ}|k⟩_rest / D^{(n-1)/2}`, every element
//! lives on the span of `W` plus a multiple of the identity. The Gram matrix
//! `G = W†W = XΛX†` gives the isometry `Q = WXΛ^{-1/2}` onto that span and
//! `Q†W_i = Λ^{-1/2}X†G_{:,i}`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::engine::linalg::{self, CMatrix, C64};
use crate::engine::{Operator, PovmSet, StructuredOp};
use crate::error::{Result, SimError};
use crate::limits::{ensure_within, saturating_pow};
use crate::EPS_POVM;

/// Eigenvalues of ρ below this are treated as zero.
pub const PINV_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Deterministic,
    Probabilistic,
}

/// A port-based measurement with `n` ports of dimension `dim`.
#[derive(Debug, Clone)]
pub struct PbtChannel {
    n: usize,
    dim: usize,
    variant: Variant,
    povm: PovmSet,
    /// Columns of `W` projected on the support: block `i` is `Q†W_i`.
    projected_columns: CMatrix,
    defects: (f64, f64),
}

/// Column matrix `W` and its Gram matrix.
fn port_columns(n: usize, dim: usize) -> (CMatrix, usize) {
    let rest = saturating_pow(dim, n - 1) as usize;
    let total = saturating_pow(dim, n + 1) as usize;
    let scale = 1.0 / ((dim as f64).sqrt() * (rest as f64).sqrt());
    let mut w = CMatrix::zeros(total, n * rest);
    // Digits: input first, then ports 1..n; `k` enumerates the other ports.
    for i in 0..n {
        for k in 0..rest {
            let mut others = Vec::with_capacity(n - 1);
            let mut r = k;
            for _ in 0..n - 1 {
                others.push(r % dim);
                r /= dim;
            }
            others.reverse();
            for j in 0..dim {
                let mut idx = j;
                let mut o = others.iter();
                for p in 0..n {
                    let digit = if p == i { j } else { *o.next().expect("digit") };
                    idx = idx * dim + digit;
                }
                w[(idx, i * rest + k)] = C64::new(scale, 0.0);
            }
        }
    }
    (w, rest)
}

struct Spectral {
    q: CMatrix,
    lambda: Vec<f64>,
    /// `Q†W`, blocks of `rest` columns per port.
    qw: CMatrix,
}

fn spectral(w: &CMatrix) -> Spectral {
    let g = w.adjoint() * w;
    let (values, vectors) = linalg::eigh(&g);
    let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > PINV_CUTOFF).collect();
    let x = CMatrix::from_fn(g.nrows(), keep.len(), |r, c| vectors[(r, keep[c])]);
    let lambda: Vec<f64> = keep.iter().map(|&k| values[k]).collect();
    let inv_sqrt = CMatrix::from_fn(keep.len(), keep.len(), |r, c| {
        if r == c {
            C64::new(1.0 / lambda[r].sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let q = w * &x * &inv_sqrt;
    let qw = &inv_sqrt * x.adjoint() * &g;
    Spectral { q, lambda, qw }
}

fn check_size(n: usize, dim: usize) -> Result<()> {
    if n == 0 {
        return Err(SimError::InvalidArgument("port count must be at least 1".into()));
    }
    if dim < 2 {
        return Err(SimError::InvalidDimension(dim));
    }
    let total = saturating_pow(dim, n + 1);
    let rank = (n as u128).saturating_mul(saturating_pow(dim, n - 1));
    ensure_within(total)?;
    ensure_within(total.saturating_mul(rank))
}

/// Structured completeness and positivity defects for elements sharing one
/// isometry: `|Σ scalars − 1| + max|Σ cores|` and the least eigenvalue.
fn structured_defects(elements: &[StructuredOp]) -> (f64, f64) {
    let r = elements[0].core().nrows();
    let mut scalar = C64::new(0.0, 0.0);
    let mut core = CMatrix::zeros(r, r);
    let mut min_eig = f64::INFINITY;
    for e in elements {
        scalar += e.scalar();
        core += e.core();
        min_eig = min_eig.min(e.min_eigenvalue());
    }
    // Σ = (Σs)𝟙 + Q(Σcore)Q†, so compare Σcore with (1 − Σs)𝟙 on the support.
    for k in 0..r {
        core[(k, k)] += scalar - 1.0;
    }
    let support = core.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let outside = if r < elements[0].dim() { (scalar - 1.0).norm() } else { 0.0 };
    (support.max(outside), min_eig)
}

impl PbtChannel {
    fn finish(
        n: usize,
        dim: usize,
        variant: Variant,
        elements: Vec<StructuredOp>,
        spec: Spectral,
    ) -> Result<Self> {
        let defects = structured_defects(&elements);
        if defects.0 > EPS_POVM || defects.1 < -EPS_POVM {
            return Err(SimError::InvalidPovm(format!(
                "port-based measurement defects {defects:?}"
            )));
        }
        let mut labels: Vec<String> = (1..=n).map(|i| format!("port{i}")).collect();
        if variant == Variant::Probabilistic {
            labels.push("fail".into());
        }
        let mut povm = PovmSet::new_unchecked(elements.into_iter().map(Operator::Structured).collect());
        povm.set_labels(labels)?;
        Ok(Self {
            n,
            dim,
            variant,
            povm,
            projected_columns: spec.qw,
            defects,
        })
    }

    pub fn ports(&self) -> usize {
        self.n
    }

    /// Dimension of the input and of each port.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn povm(&self) -> &PovmSet {
        &self.povm
    }

    /// Total dimension `D^{n+1}` the measurement acts on.
    pub fn total_dim(&self) -> usize {
        self.povm.dim()
    }

    /// `(completeness defect, least eigenvalue)` of the element set.
    pub fn defects(&self) -> (f64, f64) {
        self.defects
    }

    /// Outcome index heralding port `i` (0-based).
    pub fn port_outcome(&self, i: usize) -> usize {
        i
    }

    pub fn failure_outcome(&self) -> Option<usize> {
        match self.variant {
            Variant::Deterministic => None,
            Variant::Probabilistic => Some(self.n),
        }
    }

    /// Number of |Φ⁺⟩ ports consumed.
    pub fn ebits(&self) -> usize {
        self.n
    }

    /// `tr Π_k` for every outcome.
    pub fn element_traces(&self) -> Vec<f64> {
        let n = self.total_dim() as f64;
        self.povm
            .elements()
            .iter()
            .map(|e| match e {
                Operator::Structured(s) => s.scalar().re * n + s.core().trace().re,
                Operator::Dense(m) => m.trace().re,
            })
            .collect()
    }

    /// `tr(Π_i σ_i)` for each port, from the compressed representation.
    pub fn overlap_traces(&self) -> Vec<f64> {
        let rest = self.projected_columns.ncols() / self.n;
        (0..self.n)
            .map(|i| {
                let block = self.projected_columns.columns(i * rest, rest).into_owned();
                let Operator::Structured(e) = self.povm.element(i) else {
                    unreachable!("port-based elements are structured")
                };
                let core_part = (block.adjoint() * e.core() * &block).trace().re;
                let scalar_part = e.scalar().re * block.norm_squared();
                core_part + scalar_part
            })
            .collect()
    }
}

/// Square-root measurement with the residual `𝟙 − ΣΠ_i` split evenly over
/// the `n` outcomes: `Π_i = Q M_i Q† + (𝟙 − QQ†)/n`.
pub fn build_pgm(n: usize, dim: usize) -> Result<PbtChannel> {
    check_size(n, dim)?;
    let (w, rest) = port_columns(n, dim);
    let spec = spectral(&w);
    let basis = Arc::new(spec.q.clone());
    let inv: Vec<f64> = spec.lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
    let share = 1.0 / n as f64;
    let elements = (0..n)
        .map(|i| {
            // Q†W_i Λ^{-1/2}-scaled: M_i = Λ^{-1/2}(Q†W_i)(Q†W_i)†Λ^{-1/2}.
            let block = spec.qw.columns(i * rest, rest);
            let scaled = CMatrix::from_fn(block.nrows(), block.ncols(), |r, c| block[(r, c)] * inv[r]);
            let mut core = &scaled * scaled.adjoint();
            for k in 0..core.nrows() {
                core[(k, k)] -= C64::new(share, 0.0);
            }
            StructuredOp::new(C64::new(share, 0.0), Arc::clone(&basis), core)
        })
        .collect::<Result<Vec<_>>>()?;
    PbtChannel::finish(n, dim, Variant::Deterministic, elements, spec)
}

/// Exact-or-fail measurement `Π_i = c·|Φ⁺⟩⟨Φ⁺|_{in,portᵢ} ⊗ 𝟙` with
/// `c = 1/λ_max(Σ_i |Φ⁺⟩⟨Φ⁺|_{in,portᵢ} ⊗ 𝟙)` and one merged failure outcome.
pub fn pbt_probabilistic(n: usize, dim: usize) -> Result<PbtChannel> {
    check_size(n, dim)?;
    let (w, rest) = port_columns(n, dim);
    let spec = spectral(&w);
    let basis = Arc::new(spec.q.clone());
    // Σ P_i = D^{n-1}·WW†, whose nonzero spectrum is D^{n-1}·Λ.
    let top = spec.lambda.iter().cloned().fold(0.0, f64::max) * rest as f64;
    let c = 1.0 / top;
    let mut elements = (0..n)
        .map(|i| {
            let block = spec.qw.columns(i * rest, rest);
            let core = (&block * block.adjoint()) * C64::new(c * rest as f64, 0.0);
            StructuredOp::new(C64::new(0.0, 0.0), Arc::clone(&basis), core)
        })
        .collect::<Result<Vec<_>>>()?;
    let r = spec.lambda.len();
    let fail_core = CMatrix::from_fn(r, r, |a, b| {
        if a == b {
            C64::new(-c * rest as f64 * spec.lambda[a], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    elements.push(StructuredOp::new(C64::new(1.0, 0.0), Arc::clone(&basis), fail_core)?);
    PbtChannel::finish(n, dim, Variant::Probabilistic, elements, spec)
}
