//! Parametrized extreme channels built from a qudit ancilla dilation.
//!
//! The two-qudit dilation acts on `system ⊗ ancilla` (index `s·d + a`). A
//! product of multiplexed rotations `M_jk(α, β) = CG_jk(α) · CG_kj(−β)` is
//! followed by ancilla-controlled shifts `X_i ⊗ |i⟩⟨i|`; measuring the
//! ancilla yields Kraus operators `F_i = X_i · diag(ã_i)`. Dressing with
//! unitaries gives `K_i = W F_i V`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::channel::{weyl_x, ChoiState, KrausChannel};
use crate::error::{Error, Result};
use crate::linalg::{self, phase, ComplexMatrix, ONE, ZERO};

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { dim: d, min: 2 });
    }
    Ok(())
}

/// Number of dressing unitaries `ϰ = ⌈(d−1)(d²+d+1) / (d(d+1))⌉`.
pub fn kappa(d: usize) -> Result<usize> {
    check_dim(d)?;
    let num = (d - 1) * (d * d + d + 1);
    let den = d * (d + 1);
    Ok(num.div_ceil(den))
}

/// `ϰ·d(d²−1) + d(d²−d) + (d−1)`: parameters of a `d`-term decomposition.
pub fn parameter_count(d: usize) -> Result<usize> {
    let k = kappa(d)?;
    Ok(k * d * (d * d - 1) + d * (d * d - d) + (d - 1))
}

/// Real parameters of one extreme component.
pub fn component_parameter_count(d: usize) -> Result<usize> {
    Ok(d * (d - 1) + kappa(d)? * (d * d - 1))
}

/// Multiplexer index pairs `(j, k)`, `j > k`, in written order
/// `j = d−1..1`, `k = j−1..0`. Application order is the reverse.
pub fn mux_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for j in (1..d).rev() {
        for k in (0..j).rev() {
            out.push((j, k));
        }
    }
    out
}

/// Level pairs `(j, k)`, `j < k`, in the order consumed by [`unitary_from_params`].
pub fn unitary_pairs(d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(d * (d - 1) / 2);
    for j in 0..d {
        for k in j + 1..d {
            out.push((j, k));
        }
    }
    out
}

/// Left-multiplies rows `j`, `k` of `m` by
/// `[[cos θ, −e^{iφ} sin θ], [e^{−iφ} sin θ, cos θ]]`.
pub fn apply_two_level_left(m: &mut ComplexMatrix, j: usize, k: usize, theta: f64, phi: f64) {
    let (s, c) = theta.sin_cos();
    let up = phase(phi) * s;
    let down = phase(-phi) * s;
    for col in 0..m.ncols() {
        let a = m[(j, col)];
        let b = m[(k, col)];
        m[(j, col)] = a * c - up * b;
        m[(k, col)] = down * a + b * c;
    }
}

/// Matrix of a phased two-level rotation on levels `(j, k)`.
pub fn two_level(d: usize, j: usize, k: usize, theta: f64, phi: f64) -> ComplexMatrix {
    let mut m = linalg::identity(d);
    apply_two_level_left(&mut m, j, k, theta, phi);
    m
}

/// Real rotation `G_jk(θ)`: `|j⟩ → cos θ|j⟩ + sin θ|k⟩`, `|k⟩ → cos θ|k⟩ − sin θ|j⟩`.
pub fn givens(d: usize, j: usize, k: usize, theta: f64) -> ComplexMatrix {
    two_level(d, j, k, theta, 0.0)
}

/// Special unitary from `d² − 1` reals: `d(d−1)/2` pairs `(θ, φ)` of phased
/// two-level rotations followed by `d − 1` diagonal phases. The matrix is
/// `T_1 ⋯ T_m · diag(e^{iδ_0}, …, e^{iδ_{d−2}}, e^{−iΣδ})`.
pub fn unitary_from_params(d: usize, block: &[f64]) -> Result<ComplexMatrix> {
    check_dim(d)?;
    if block.len() != d * d - 1 {
        return Err(Error::DimensionMismatch {
            expected: d * d - 1,
            actual: block.len(),
        });
    }
    let pairs = unitary_pairs(d);
    let deltas = &block[2 * pairs.len()..];
    let last = -deltas.iter().sum::<f64>();
    let diag = DVector::from_fn(d, |i, _| phase(if i + 1 < d { deltas[i] } else { last }));
    let mut u = ComplexMatrix::from_diagonal(&diag);
    for (p, &(j, k)) in pairs.iter().enumerate().rev() {
        apply_two_level_left(&mut u, j, k, block[2 * p], block[2 * p + 1]);
    }
    Ok(u)
}

/// Angles and dressing blocks of one extreme component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeParams {
    pub dim: usize,
    /// `(α_jk, β_jk)` in the written order of [`mux_pairs`].
    pub mux_angles: Vec<[f64; 2]>,
    /// Blocks multiplied into `V = U_0 U_1 ⋯`, applied before the dilation.
    pub prior: Vec<Vec<f64>>,
    /// Blocks multiplied into `W`, applied after measurement.
    pub posterior: Vec<Vec<f64>>,
}

impl ExtremeParams {
    pub fn new(
        dim: usize,
        mux_angles: Vec<[f64; 2]>,
        prior: Vec<Vec<f64>>,
        posterior: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let p = Self {
            dim,
            mux_angles,
            prior,
            posterior,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim;
        let k = kappa(d)?;
        if self.mux_angles.len() != d * (d - 1) / 2 {
            return Err(Error::InvalidParameter(format!(
                "expected {} multiplexer angle pairs, got {}",
                d * (d - 1) / 2,
                self.mux_angles.len()
            )));
        }
        if self.prior.len() != k.div_ceil(2) || self.posterior.len() != k / 2 {
            return Err(Error::InvalidParameter(format!(
                "expected {} prior and {} posterior blocks, got {} and {}",
                k.div_ceil(2),
                k / 2,
                self.prior.len(),
                self.posterior.len()
            )));
        }
        for b in self.prior.iter().chain(&self.posterior) {
            if b.len() != d * d - 1 {
                return Err(Error::DimensionMismatch {
                    expected: d * d - 1,
                    actual: b.len(),
                });
            }
        }
        if self.flat_iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite angle".into()));
        }
        Ok(())
    }

    /// All angles zero: every dressing unitary and multiplexer is the identity.
    pub fn identity(d: usize) -> Result<Self> {
        let k = kappa(d)?;
        Ok(Self {
            dim: d,
            mux_angles: vec![[0.0; 2]; d * (d - 1) / 2],
            prior: vec![vec![0.0; d * d - 1]; k.div_ceil(2)],
            posterior: vec![vec![0.0; d * d - 1]; k / 2],
        })
    }

    /// Uniform multiplexer angles, rotation angles in `[0, π/2)` and phases in `[0, 2π)`.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self> {
        let mut p = Self::identity(d)?;
        for a in &mut p.mux_angles {
            a[0] = rng.random_range(0.0..2.0 * PI);
            a[1] = rng.random_range(0.0..2.0 * PI);
        }
        let m = d * (d - 1) / 2;
        for b in p.prior.iter_mut().chain(p.posterior.iter_mut()) {
            for (i, x) in b.iter_mut().enumerate() {
                *x = if i < 2 * m && i % 2 == 0 {
                    rng.random_range(0.0..FRAC_PI_2)
                } else {
                    rng.random_range(0.0..2.0 * PI)
                };
            }
        }
        Ok(p)
    }

    fn flat_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.mux_angles
            .iter()
            .flat_map(|a| a.iter().copied())
            .chain(self.prior.iter().flatten().copied())
            .chain(self.posterior.iter().flatten().copied())
    }

    /// Multiplexer angles, then prior blocks, then posterior blocks.
    pub fn to_flat(&self) -> Vec<f64> {
        self.flat_iter().collect()
    }

    pub fn from_flat(d: usize, x: &[f64]) -> Result<Self> {
        let n = component_parameter_count(d)?;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        let k = kappa(d)?;
        let m = d * (d - 1) / 2;
        let bl = d * d - 1;
        let mux_angles = (0..m).map(|i| [x[2 * i], x[2 * i + 1]]).collect();
        let blocks: Vec<Vec<f64>> = x[2 * m..].chunks(bl).map(<[f64]>::to_vec).collect();
        let (prior, posterior) = blocks.split_at(k.div_ceil(2));
        Self::new(d, mux_angles, prior.to_vec(), posterior.to_vec())
    }

    /// `V = U(prior_0) U(prior_1) ⋯`.
    pub fn prior_unitary(&self) -> Result<ComplexMatrix> {
        product_of_blocks(self.dim, &self.prior)
    }

    /// `W = U(posterior_0) U(posterior_1) ⋯`.
    pub fn posterior_unitary(&self) -> Result<ComplexMatrix> {
        product_of_blocks(self.dim, &self.posterior)
    }
}

fn product_of_blocks(d: usize, blocks: &[Vec<f64>]) -> Result<ComplexMatrix> {
    let mut u = linalg::identity(d);
    for b in blocks {
        u *= unitary_from_params(d, b)?;
    }
    Ok(u)
}

/// Real ancilla amplitudes `ã[i][ℓ]`: the multiplexers send `|ℓ⟩_s|0⟩_a` to
/// `|ℓ⟩_s Σ_i ã[i][ℓ] |i⟩_a`.
pub fn ancilla_amplitudes(d: usize, mux_angles: &[[f64; 2]]) -> Result<DMatrix<f64>> {
    check_dim(d)?;
    let pairs = mux_pairs(d);
    if mux_angles.len() != pairs.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            actual: mux_angles.len(),
        });
    }
    let mut u = DMatrix::<f64>::zeros(d, d);
    for l in 0..d {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        for (&(j, k), &[alpha, beta]) in pairs.iter().zip(mux_angles).rev() {
            let theta = if l == j {
                alpha
            } else if l == k {
                beta
            } else {
                continue;
            };
            let (s, c) = theta.sin_cos();
            let (vj, vk) = (v[j], v[k]);
            v[j] = c * vj - s * vk;
            v[k] = s * vj + c * vk;
        }
        for i in 0..d {
            u[(i, l)] = v[i];
        }
    }
    Ok(u)
}

/// `F_i = X_i · diag(ã[i][·])`.
pub fn extreme_f(d: usize, mux_angles: &[[f64; 2]]) -> Result<Vec<ComplexMatrix>> {
    let u = ancilla_amplitudes(d, mux_angles)?;
    Ok((0..d)
        .map(|i| {
            let mut f = linalg::zeros(d, d);
            for c in 0..d {
                f[((c + d - i) % d, c)] = Complex64::new(u[(i, c)], 0.0);
            }
            f
        })
        .collect())
}

/// Kraus operators `K_i = W F_i V`.
pub fn extreme_kraus(p: &ExtremeParams) -> Result<KrausChannel> {
    p.validate()?;
    let v = p.prior_unitary()?;
    let w = p.posterior_unitary()?;
    let ops = extreme_f(p.dim, &p.mux_angles)?
        .into_iter()
        .map(|f| &w * f * &v)
        .collect();
    KrausChannel::from_ops_unchecked(ops)
}

/// `CG_jk(θ) = |j⟩⟨j|_s ⊗ G_jk(θ) + (𝟙 − |j⟩⟨j|)_s ⊗ 𝟙` on `system ⊗ ancilla`.
pub fn controlled_givens(
    d: usize,
    control: usize,
    j: usize,
    k: usize,
    theta: f64,
) -> ComplexMatrix {
    let mut proj = linalg::zeros(d, d);
    proj[(control, control)] = ONE;
    let rest = linalg::identity(d) - &proj;
    linalg::kron(&proj, &givens(d, j, k, theta)) + linalg::kron(&rest, &linalg::identity(d))
}

/// `M_jk(α, β) = CG_jk(α) · CG_kj(−β)`.
pub fn multiplexer(d: usize, j: usize, k: usize, alpha: f64, beta: f64) -> ComplexMatrix {
    controlled_givens(d, j, j, k, alpha) * controlled_givens(d, k, k, j, -beta)
}

/// `CX_i = X_i ⊗ |i⟩⟨i|_a + 𝟙 ⊗ (𝟙 − |i⟩⟨i|)_a`.
pub fn ancilla_controlled_shift(d: usize, i: usize) -> Result<ComplexMatrix> {
    let mut proj = linalg::zeros(d, d);
    proj[(i, i)] = ONE;
    let rest = linalg::identity(d) - &proj;
    Ok(linalg::kron(&weyl_x(d, i)?, &proj) + linalg::kron(&linalg::identity(d), &rest))
}

/// The undressed dilation `(∏_{i=d−1}^{1} CX_i) · ∏ M_jk` as a `d² × d²` unitary.
pub fn dilation_unitary(d: usize, mux_angles: &[[f64; 2]]) -> Result<ComplexMatrix> {
    check_dim(d)?;
    let pairs = mux_pairs(d);
    if mux_angles.len() != pairs.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            actual: mux_angles.len(),
        });
    }
    let mut u = linalg::identity(d * d);
    for i in (1..d).rev() {
        u *= ancilla_controlled_shift(d, i)?;
    }
    for (&(j, k), &[a, b]) in pairs.iter().zip(mux_angles) {
        u *= multiplexer(d, j, k, a, b);
    }
    Ok(u)
}

/// The `d`-sparse Choi matrix `Σ_i Σ_{k,l} ã_{i,l+i} ã_{i,k+i} |l, l+i⟩⟨k, k+i|` of the `F_i`.
pub fn sparse_extreme_choi(d: usize, mux_angles: &[[f64; 2]]) -> Result<ComplexMatrix> {
    let u = ancilla_amplitudes(d, mux_angles)?;
    let mut c = linalg::zeros(d * d, d * d);
    for i in 0..d {
        for l in 0..d {
            let row = l * d + (l + i) % d;
            for k in 0..d {
                let col = k * d + (k + i) % d;
                c[(row, col)] += Complex64::new(u[(i, (l + i) % d)] * u[(i, (k + i) % d)], 0.0);
            }
        }
    }
    Ok(c)
}

/// Choi state of [`extreme_kraus`], built from the sparse form and `W ⊗ Vᵀ`.
pub fn extreme_choi(p: &ExtremeParams) -> Result<ChoiState> {
    p.validate()?;
    let ce = sparse_extreme_choi(p.dim, &p.mux_angles)?;
    let t = linalg::kron(&p.posterior_unitary()?, &p.prior_unitary()?.transpose());
    Ok(ChoiState::from_parts_unchecked(
        p.dim,
        &t * ce * t.adjoint(),
    ))
}

/// Coefficients `b_{iμν}` with `F_i† F_{i+μ} = Σ_ν b_{iμν} |ν⟩⟨ν+μ|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BTensor {
    dim: usize,
    entries: Vec<Complex64>,
}

impl BTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, mu: usize, nu: usize) -> Complex64 {
        let d = self.dim;
        self.entries[(i * d + mu) * d + nu]
    }

    /// `B_μ` with rows `i` and columns `ν`.
    pub fn matrix(&self, mu: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.dim, self.dim, |i, nu| self.get(i, mu, nu))
    }
}

/// Fourier coefficients `a_ij = (1/d) Σ_ℓ ã_iℓ e^{−i2πℓj/d}`.
pub fn fourier_coefficients(d: usize, mux_angles: &[[f64; 2]]) -> Result<ComplexMatrix> {
    let u = ancilla_amplitudes(d, mux_angles)?;
    Ok(ComplexMatrix::from_fn(d, d, |i, j| {
        (0..d)
            .map(|l| phase(-2.0 * PI * (l * j) as f64 / d as f64) * u[(i, l)])
            .sum::<Complex64>()
            / d as f64
    }))
}

/// `b_{iμν} = Σ_{k,l} a*_{ik} a_{i+μ,l} e^{i2π[μl + ν(l−k)]/d}`.
pub fn b_tensor(d: usize, mux_angles: &[[f64; 2]]) -> Result<BTensor> {
    let a = fourier_coefficients(d, mux_angles)?;
    let mut entries = vec![ZERO; d * d * d];
    for i in 0..d {
        for mu in 0..d {
            let ip = (i + mu) % d;
            for nu in 0..d {
                let mut acc = ZERO;
                for k in 0..d {
                    for l in 0..d {
                        let e = (mu * l + nu * l) as f64 - (nu * k) as f64;
                        acc += a[(i, k)].conj() * a[(ip, l)] * phase(2.0 * PI * e / d as f64);
                    }
                }
                entries[(i * d + mu) * d + nu] = acc;
            }
        }
    }
    Ok(BTensor { dim: d, entries })
}

/// Whether the `F_i† F_j` span all `d²` operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extremality {
    Extreme,
    QuasiExtreme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalityReport {
    pub class: Extremality,
    /// `|det B_μ|` after scaling each `B_μ` to unit Frobenius norm.
    pub normalized_dets: Vec<f64>,
    pub min_abs_det: f64,
    pub tolerance: f64,
}

pub const EXTREMALITY_TOL: f64 = 1e-8;

/// Classifies a component by the determinants of the `B_μ`.
pub fn check_extremality(d: usize, mux_angles: &[[f64; 2]], tol: f64) -> Result<ExtremalityReport> {
    let b = b_tensor(d, mux_angles)?;
    let normalized_dets: Vec<f64> = (0..d)
        .map(|mu| {
            let m = b.matrix(mu);
            let n = m.norm();
            if n == 0.0 {
                0.0
            } else {
                (m / Complex64::new(n, 0.0)).determinant().norm()
            }
        })
        .collect();
    let min_abs_det = normalized_dets
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(ExtremalityReport {
        class: if min_abs_det > tol {
            Extremality::Extreme
        } else {
            Extremality::QuasiExtreme
        },
        normalized_dets,
        min_abs_det,
        tolerance: tol,
    })
}
