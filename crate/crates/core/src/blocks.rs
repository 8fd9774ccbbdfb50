//! Block structure of Choi matrices and certification of generalized extreme channels.
//!
//! A Choi matrix on `d²` dimensions splits into a `d × d` grid of `d × d`
//! blocks `C_kl`, one per pair of output levels. Positivity forces
//! `C_kl = √C_k · B_kl · √C_l` with `B_kl` a contraction; generalized extreme
//! channels have rank at most `d`, unitary `B_kl` and the chain rule
//! `B_kl = B_{k,k+1} ⋯ B_{l−1,l}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{validate_probabilities, ChoiState};
use crate::error::{Error, Result};
use crate::linalg::{self, max_abs, ComplexMatrix, RANK_TOL_REL};

/// `d × d` grid of blocks of a Choi matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiBlocks {
    dim: usize,
    blocks: Vec<ComplexMatrix>,
}

impl ChoiBlocks {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `C_kl`; `C_lk = C_kl†`.
    pub fn block(&self, k: usize, l: usize) -> &ComplexMatrix {
        &self.blocks[k * self.dim + l]
    }

    pub fn diagonal(&self, k: usize) -> &ComplexMatrix {
        self.block(k, k)
    }

    pub fn reassemble(&self) -> ComplexMatrix {
        let d = self.dim;
        ComplexMatrix::from_fn(d * d, d * d, |r, c| {
            self.block(r / d, c / d)[(r % d, c % d)]
        })
    }
}

pub fn choi_blocks(c: &ComplexMatrix, d: usize) -> Result<ChoiBlocks> {
    let n = linalg::ensure_square(c)?;
    if n != d * d {
        return Err(Error::DimensionMismatch {
            expected: d * d,
            actual: n,
        });
    }
    let blocks = (0..d * d)
        .map(|kl| {
            let (k, l) = (kl / d, kl % d);
            c.view((k * d, l * d), (d, d)).into_owned()
        })
        .collect();
    Ok(ChoiBlocks { dim: d, blocks })
}

/// Contraction factor `B_kl` of an off-diagonal block.
#[derive(Debug, Clone, PartialEq)]
pub struct Contraction {
    /// `pinv(√C_k) · C_kl · pinv(√C_l)`.
    pub factor: ComplexMatrix,
    /// Singular values of the factor restricted to `supp C_k × supp C_l`.
    pub singular_values: Vec<f64>,
    /// Largest singular value; at most one for PSD input.
    pub norm: f64,
    /// How far `C_kl` leaks outside the supports of `C_k` and `C_l`.
    pub support_leak: f64,
}

fn support_threshold(blocks: &ChoiBlocks) -> f64 {
    let top = (0..blocks.dim())
        .flat_map(|k| linalg::eigvalsh(blocks.diagonal(k)))
        .fold(0.0f64, f64::max);
    RANK_TOL_REL * top
}

/// Extracts `B_kl`; fails if `C_kl` is not supported on `supp C_k × supp C_l` within `tol`.
pub fn extract_contraction(
    blocks: &ChoiBlocks,
    k: usize,
    l: usize,
    tol: f64,
) -> Result<Contraction> {
    let d = blocks.dim();
    for idx in [k, l] {
        if idx >= d {
            return Err(Error::IndexOutOfRange { index: idx, dim: d });
        }
    }
    let thr = support_threshold(blocks);
    contraction_with_threshold(blocks, k, l, thr, tol)
}

fn contraction_with_threshold(
    blocks: &ChoiBlocks,
    k: usize,
    l: usize,
    thr: f64,
    tol: f64,
) -> Result<Contraction> {
    let (ck, cl, ckl) = (blocks.diagonal(k), blocks.diagonal(l), blocks.block(k, l));
    let qk = linalg::support_basis(ck, thr);
    let ql = linalg::support_basis(cl, thr);
    let pk = &qk * qk.adjoint();
    let pl = &ql * ql.adjoint();
    let support_leak = max_abs(&(ckl - &pk * ckl * &pl));
    if support_leak > tol {
        return Err(Error::Invariant {
            what: "off-diagonal block support",
            residual: support_leak,
            tol,
        });
    }
    let factor = linalg::pinv_sqrt(ck, thr) * ckl * linalg::pinv_sqrt(cl, thr);
    let restricted = qk.adjoint() * &factor * &ql;
    let singular_values = linalg::singular_values(&restricted);
    let norm = singular_values.first().copied().unwrap_or(0.0);
    Ok(Contraction {
        factor,
        singular_values,
        norm,
        support_leak,
    })
}

/// Outcome of [`certify_generalized_extreme`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenExtReport {
    pub certified: bool,
    pub rank: usize,
    pub rank_ok: bool,
    /// `max |σ − 1|` over the restricted singular values of all `B_kl`.
    pub unitarity_residual: f64,
    /// `max ‖B_kl − B_{k,k+1} ⋯ B_{l−1,l}‖` on `supp C_k × supp C_l`.
    pub chain_residual: f64,
    pub support_leak: f64,
    pub tolerance: f64,
}

/// Default certification tolerance.
pub const CERTIFY_TOL: f64 = 1e-7;

/// Checks the generalized-extreme block structure. Passing is sufficient for
/// the structure; failing does not prove the channel lies outside the set.
pub fn certify_generalized_extreme(c: &ChoiState, tol: f64) -> Result<GenExtReport> {
    let d = c.dim();
    let blocks = choi_blocks(c.matrix(), d)?;
    let rank = c.rank();
    let thr = support_threshold(&blocks);
    let mut unitarity_residual = 0.0f64;
    let mut chain_residual = 0.0f64;
    let mut support_leak = 0.0f64;
    let mut factors = vec![None; d * d];
    for k in 0..d {
        for l in k + 1..d {
            // Leak is reported rather than treated as fatal here.
            let con = contraction_with_threshold(&blocks, k, l, thr, f64::INFINITY)?;
            support_leak = support_leak.max(con.support_leak);
            for s in &con.singular_values {
                unitarity_residual = unitarity_residual.max((s - 1.0).abs());
            }
            factors[k * d + l] = Some(con.factor);
        }
    }
    for k in 0..d.saturating_sub(2) {
        let qk = linalg::support_basis(blocks.diagonal(k), thr);
        let mut chain = factors[k * d + k + 1].clone();
        for l in k + 2..d {
            let step = factors[(l - 1) * d + l].as_ref().expect("filled above");
            let prod = chain.take().map(|m| m * step).expect("chain starts filled");
            let ql = linalg::support_basis(blocks.diagonal(l), thr);
            let direct = factors[k * d + l].as_ref().expect("filled above");
            let diff = qk.adjoint() * (direct - &prod) * &ql;
            chain_residual = chain_residual.max(max_abs(&diff));
            chain = Some(prod);
        }
    }
    let rank_ok = rank <= d;
    Ok(GenExtReport {
        certified: rank_ok
            && unitarity_residual <= tol
            && chain_residual <= tol
            && support_leak <= tol,
        rank,
        rank_ok,
        unitarity_residual,
        chain_residual,
        support_leak,
        tolerance: tol,
    })
}

/// `max_{k,l} ‖C_kl − Σ_t p_t C^{(t)}_kl‖_max`.
pub fn blockwise_mixture_residual(c: &ChoiState, parts: &[(f64, &ChoiState)]) -> Result<f64> {
    let d = c.dim();
    validate_probabilities(&parts.iter().map(|p| p.0).collect::<Vec<_>>(), 1e-9)?;
    let target = choi_blocks(c.matrix(), d)?;
    let comps = parts
        .iter()
        .map(|(_, ch)| {
            if ch.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: ch.dim(),
                });
            }
            choi_blocks(ch.matrix(), d)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for k in 0..d {
        for l in 0..d {
            let mut acc = target.block(k, l).clone();
            for ((p, _), b) in parts.iter().zip(&comps) {
                acc -= b.block(k, l) * Complex64::new(*p, 0.0);
            }
            worst = worst.max(max_abs(&acc));
        }
    }
    Ok(worst)
}
