//! Channels, Choi states and density matrices on a single qudit.
//!
//! Choi matrices use the unnormalized convention `C = Σ_i res(K_i) res(K_i)†`
//! with `res(K)[a*d + b] = K[a, b]`, so the first tensor factor is the output
//! and tracing it out yields the identity.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, eigh, ensure_square, identity, max_abs, ComplexMatrix, Tolerances, RANK_TOL_REL, ZERO,
};

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { dim: d, min: 2 });
    }
    Ok(())
}

/// Generalized Pauli shift `X_i = Σ_ℓ |ℓ⟩⟨ℓ+i|`.
pub fn weyl_x(d: usize, i: usize) -> Result<ComplexMatrix> {
    check_dim(d)?;
    if i >= d {
        return Err(Error::IndexOutOfRange { index: i, dim: d });
    }
    let mut m = linalg::zeros(d, d);
    for l in 0..d {
        m[(l, (l + i) % d)] = linalg::ONE;
    }
    Ok(m)
}

/// Generalized Pauli clock `Z_j = diag(e^{i2πℓj/d})`.
pub fn weyl_z(d: usize, j: usize) -> Result<ComplexMatrix> {
    check_dim(d)?;
    if j >= d {
        return Err(Error::IndexOutOfRange { index: j, dim: d });
    }
    let diag = DVector::from_iterator(
        d,
        (0..d).map(|l| linalg::phase(2.0 * std::f64::consts::PI * (l * j) as f64 / d as f64)),
    );
    Ok(ComplexMatrix::from_diagonal(&diag))
}

/// Row-major vectorization.
pub fn res(m: &ComplexMatrix) -> DVector<Complex64> {
    let (r, c) = m.shape();
    DVector::from_fn(r * c, |k, _| m[(k / c, k % c)])
}

/// Which tensor factor of a bipartite operator to trace out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subsystem {
    First,
    Second,
}

/// Partial trace over one factor of an operator on `C^{d_a} ⊗ C^{d_b}`.
pub fn partial_trace_dims(
    m: &ComplexMatrix,
    d_a: usize,
    d_b: usize,
    over: Subsystem,
) -> Result<ComplexMatrix> {
    let n = ensure_square(m)?;
    if n != d_a * d_b {
        return Err(Error::DimensionMismatch {
            expected: d_a * d_b,
            actual: n,
        });
    }
    Ok(match over {
        Subsystem::First => ComplexMatrix::from_fn(d_b, d_b, |b, bp| {
            (0..d_a).map(|a| m[(a * d_b + b, a * d_b + bp)]).sum()
        }),
        Subsystem::Second => ComplexMatrix::from_fn(d_a, d_a, |a, ap| {
            (0..d_b).map(|b| m[(a * d_b + b, ap * d_b + b)]).sum()
        }),
    })
}

/// Partial trace of a `d² × d²` operator over one qudit factor.
pub fn partial_trace(m: &ComplexMatrix, d: usize, over: Subsystem) -> Result<ComplexMatrix> {
    partial_trace_dims(m, d, d, over)
}

/// A CPTP map given by Kraus operators.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    ops: Vec<ComplexMatrix>,
}

impl KrausChannel {
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        Self::with_tolerance(ops, Tolerances::default().structural)
    }

    pub fn with_tolerance(ops: Vec<ComplexMatrix>, tol: f64) -> Result<Self> {
        let ch = Self::from_ops_unchecked(ops)?;
        let residual = ch.completeness_residual();
        if residual > tol {
            return Err(Error::Invariant {
                what: "trace preservation",
                residual,
                tol,
            });
        }
        Ok(ch)
    }

    /// Only shapes are validated.
    pub fn from_ops_unchecked(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops.first().ok_or_else(|| {
            Error::InvalidParameter("a channel needs at least one Kraus operator".into())
        })?;
        let d = ensure_square(first)?;
        check_dim(d)?;
        for k in &ops {
            if k.shape() != (d, d) {
                return Err(Error::Shape {
                    rows: k.nrows(),
                    cols: k.ncols(),
                    expected: format!("{d}x{d}"),
                });
            }
        }
        Ok(Self { dim: d, ops })
    }

    pub fn identity(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            dim: d,
            ops: vec![identity(d)],
        })
    }

    /// Channel with a single unitary Kraus operator.
    pub fn unitary(u: ComplexMatrix, tol: f64) -> Result<Self> {
        Self::with_tolerance(vec![u], tol)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn into_ops(self) -> Vec<ComplexMatrix> {
        self.ops
    }

    pub fn num_ops(&self) -> usize {
        self.ops.len()
    }

    /// `max |Σ K†K − 𝟙|`.
    pub fn completeness_residual(&self) -> f64 {
        let mut s = linalg::zeros(self.dim, self.dim);
        for k in &self.ops {
            s += k.adjoint() * k;
        }
        max_abs(&(s - identity(self.dim)))
    }

    pub fn choi(&self) -> ChoiState {
        kraus_to_choi(self)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        apply_channel(self, rho)
    }
}

/// Unnormalized Choi matrix of a CPTP map.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiState {
    dim: usize,
    matrix: ComplexMatrix,
}

impl ChoiState {
    pub fn new(dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(dim, matrix, Tolerances::default())
    }

    /// Checks hermiticity, trace `d`, `Tr_out C = 𝟙` and positivity.
    pub fn with_tolerance(dim: usize, matrix: ComplexMatrix, tol: Tolerances) -> Result<Self> {
        check_dim(dim)?;
        let n = ensure_square(&matrix)?;
        if n != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                actual: n,
            });
        }
        let herm = linalg::hermitian_residual(&matrix);
        if herm > tol.structural {
            return Err(Error::Invariant {
                what: "Choi hermiticity",
                residual: herm,
                tol: tol.structural,
            });
        }
        let tp = max_abs(&(partial_trace(&matrix, dim, Subsystem::First)? - identity(dim)));
        if tp > tol.structural {
            return Err(Error::Invariant {
                what: "Choi partial trace",
                residual: tp,
                tol: tol.structural,
            });
        }
        let min_eig = linalg::eigvalsh(&matrix)[0];
        if min_eig < -tol.spectral {
            return Err(Error::Invariant {
                what: "Choi positivity",
                residual: -min_eig,
                tol: tol.spectral,
            });
        }
        Ok(Self { dim, matrix })
    }

    pub(crate) fn from_parts_unchecked(dim: usize, matrix: ComplexMatrix) -> Self {
        Self { dim, matrix }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigvalsh(&self.matrix)
    }

    pub fn rank(&self) -> usize {
        linalg::numerical_rank(&self.eigenvalues(), RANK_TOL_REL)
    }

    pub fn to_kraus(&self) -> Result<KrausChannel> {
        choi_to_kraus(self)
    }
}

/// A qudit density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerances::default())
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: Tolerances) -> Result<Self> {
        let n = ensure_square(&matrix)?;
        if n == 0 {
            return Err(Error::DimensionTooSmall { dim: 0, min: 1 });
        }
        let herm = linalg::hermitian_residual(&matrix);
        if herm > tol.structural {
            return Err(Error::Invariant {
                what: "state hermiticity",
                residual: herm,
                tol: tol.structural,
            });
        }
        let tr = (linalg::trace(&matrix) - linalg::ONE).norm();
        if tr > tol.structural {
            return Err(Error::Invariant {
                what: "unit trace",
                residual: tr,
                tol: tol.structural,
            });
        }
        let min_eig = linalg::eigvalsh(&matrix)[0];
        if min_eig < -tol.spectral {
            return Err(Error::Invariant {
                what: "state positivity",
                residual: -min_eig,
                tol: tol.spectral,
            });
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix) -> Self {
        Self { matrix }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: identity(d) * Complex64::new(1.0 / d as f64, 0.0),
        }
    }

    /// `|ψ⟩⟨ψ|` for the normalized input vector.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidParameter("state vector has zero norm".into()));
        }
        let v = psi / Complex64::new(n, 0.0);
        Ok(Self {
            matrix: &v * v.adjoint(),
        })
    }

    pub fn basis(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::IndexOutOfRange { index: k, dim: d });
        }
        let mut v = DVector::from_element(d, ZERO);
        v[k] = linalg::ONE;
        Self::pure(&v)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

/// `C = Σ_i res(K_i) res(K_i)†`.
pub fn kraus_to_choi(ch: &KrausChannel) -> ChoiState {
    let d = ch.dim();
    let r = ComplexMatrix::from_fn(d * d, ch.num_ops(), |row, i| ch.ops[i][(row / d, row % d)]);
    ChoiState::from_parts_unchecked(d, &r * r.adjoint())
}

/// Kraus operators from the eigenpairs of `C` above `RANK_TOL_REL · λ_max`.
pub fn choi_to_kraus(c: &ChoiState) -> Result<KrausChannel> {
    choi_to_kraus_with_tol(c, RANK_TOL_REL)
}

/// As [`choi_to_kraus`], keeping eigenpairs with `λ > rel_tol · λ_max`.
pub fn choi_to_kraus_with_tol(c: &ChoiState, rel_tol: f64) -> Result<KrausChannel> {
    let d = c.dim();
    let (vals, vecs) = eigh(c.matrix());
    let top = vals.last().copied().unwrap_or(0.0);
    let ops: Vec<ComplexMatrix> = (0..vals.len())
        .rev()
        .filter(|&i| vals[i] > rel_tol * top)
        .map(|i| {
            let s = Complex64::new(vals[i].sqrt(), 0.0);
            ComplexMatrix::from_fn(d, d, |a, b| vecs[(a * d + b, i)] * s)
        })
        .collect();
    KrausChannel::from_ops_unchecked(ops)
}

/// `Σ K ρ K†`.
pub fn apply_channel(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != ch.dim() {
        return Err(Error::DimensionMismatch {
            expected: ch.dim(),
            actual: rho.dim(),
        });
    }
    let mut out = linalg::zeros(ch.dim(), ch.dim());
    for k in ch.ops() {
        out += k * rho.matrix() * k.adjoint();
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// `½ Σ|λ_i(A − B)|` for Hermitian inputs of equal shape.
pub fn trace_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let n = ensure_square(a)?;
    if b.shape() != a.shape() {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.nrows(),
        });
    }
    let tol = 1e-8 * (1.0 + max_abs(a).max(max_abs(b)));
    for (m, what) in [
        (a, "first argument hermiticity"),
        (b, "second argument hermiticity"),
    ] {
        let r = linalg::hermitian_residual(m);
        if r > tol {
            return Err(Error::Invariant {
                what,
                residual: r,
                tol,
            });
        }
    }
    Ok(0.5 * linalg::trace_norm_hermitian(&(a - b)))
}

/// Trace distance between two Choi states.
pub fn choi_distance(a: &ChoiState, b: &ChoiState) -> Result<f64> {
    trace_distance(a.matrix(), b.matrix())
}

/// Convex combination of Choi matrices; probabilities must lie on the simplex.
pub fn mix_choi(parts: &[(f64, &ChoiState)]) -> Result<ChoiState> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidProbabilities("empty mixture".into()))?;
    let d = first.1.dim();
    validate_probabilities(&parts.iter().map(|p| p.0).collect::<Vec<_>>(), 1e-9)?;
    let mut m = linalg::zeros(d * d, d * d);
    for (p, c) in parts {
        if c.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: c.dim(),
            });
        }
        m += c.matrix() * Complex64::new(*p, 0.0);
    }
    Ok(ChoiState::from_parts_unchecked(d, m))
}

/// Nonnegative entries summing to one within `tol`.
pub fn validate_probabilities(p: &[f64], tol: f64) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidProbabilities("empty".into()));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidProbabilities(format!(
            "entry {x} is not a probability"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::InvalidProbabilities(format!("entries sum to {s}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{haar_unitary, random_channel, stream};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn weyl_relations() {
        for d in 2..6 {
            let x1 = weyl_x(d, 1).unwrap();
            let z1 = weyl_z(d, 1).unwrap();
            let w = linalg::phase(2.0 * std::f64::consts::PI / d as f64);
            // X Z = ω Z X
            assert!(max_abs(&(&x1 * &z1 - &z1 * &x1 * w)) < 1e-12);
            let mut p = identity(d);
            for _ in 0..d {
                p = &p * &x1;
            }
            assert!(max_abs(&(p - identity(d))) < 1e-12);
            for i in 0..d {
                let xi = weyl_x(d, i).unwrap();
                for l in 0..d {
                    assert_eq!(xi[(l, (l + i) % d)], linalg::ONE);
                }
            }
        }
        assert!(weyl_x(3, 3).is_err());
        assert!(weyl_z(1, 0).is_err());
    }

    #[test]
    fn identity_choi_is_maximally_entangled() {
        let c3 = kraus_to_choi(&KrausChannel::identity(3).unwrap());
        for r in 0..9 {
            for col in 0..9 {
                let expected = if r % 4 == 0 && col % 4 == 0 { 1.0 } else { 0.0 };
                assert!((c3.matrix()[(r, col)] - c(expected)).norm() < 1e-15);
            }
        }
        assert_eq!(c3.rank(), 1);
    }

    #[test]
    fn depolarizing_vs_identity_distance() {
        let q = ComplexMatrix::identity(4, 4) * c(0.5);
        let eta = kraus_to_choi(&KrausChannel::identity(2).unwrap());
        let dt = trace_distance(&q, eta.matrix()).unwrap();
        assert!((dt - 1.5).abs() < 1e-12);
        ChoiState::new(2, q).unwrap();
    }

    #[test]
    fn rank_deficient_choi_gives_two_kraus() {
        let mut rng = stream(5, 0);
        let u = haar_unitary(6, &mut rng);
        let ops: Vec<_> = (0..2)
            .map(|i| ComplexMatrix::from_fn(3, 3, |r, col| u[(r * 2 + i, col * 2)]))
            .collect();
        let ch = KrausChannel::new(ops).unwrap();
        let choi = kraus_to_choi(&ch);
        let back = choi_to_kraus_with_tol(&choi, 1e-9).unwrap();
        assert_eq!(back.num_ops(), 2);
        assert!(max_abs(&(kraus_to_choi(&back).matrix() - choi.matrix())) < 1e-10);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let half = identity(2) * c(0.5);
        assert!(KrausChannel::new(vec![half]).is_err());
        assert!(ChoiState::new(2, identity(4) * c(0.5)).is_ok());
        assert!(ChoiState::new(2, identity(4) * c(2.0)).is_err());
        assert!(DensityMatrix::new(identity(2)).is_err());
        assert!(trace_distance(&identity(2), &identity(3)).is_err());
        assert!(validate_probabilities(&[0.5, 0.6], 1e-9).is_err());
    }

    #[test]
    fn partial_trace_second_of_product() {
        let a = ComplexMatrix::from_fn(2, 2, |r, col| c((r + 2 * col) as f64));
        let b = identity(3);
        let pt = partial_trace_dims(&linalg::kron(&a, &b), 2, 3, Subsystem::Second).unwrap();
        assert!(max_abs(&(pt - &a * c(3.0))) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn choi_invariants(d in 2usize..5, seed in any::<u64>()) {
            let mut rng = stream(seed, 0);
            let ch = random_channel(d, d * d, &mut rng).unwrap();
            let choi = kraus_to_choi(&ch);
            let m = choi.matrix();
            prop_assert!(linalg::hermitian_residual(m) <= 1e-12);
            prop_assert!((linalg::trace(m) - c(d as f64)).norm() <= 1e-10);
            let pt = partial_trace(m, d, Subsystem::First).unwrap();
            prop_assert!(max_abs(&(pt - identity(d))) <= 1e-10);
            prop_assert!(choi.eigenvalues()[0] >= -1e-10);
            ChoiState::new(d, m.clone()).unwrap();
        }

        #[test]
        fn choi_round_trip(d in 2usize..5, seed in any::<u64>()) {
            let mut rng = stream(seed, 1);
            let ch = random_channel(d, d * d, &mut rng).unwrap();
            let choi = kraus_to_choi(&ch);
            let back = choi_to_kraus(&choi).unwrap();
            prop_assert!(back.completeness_residual() <= 1e-9);
            prop_assert!(max_abs(&(kraus_to_choi(&back).matrix() - choi.matrix())) <= 1e-10);
        }

        #[test]
        fn trace_distance_metric(d in 2usize..4, seed in any::<u64>()) {
            let mut rng = stream(seed, 2);
            let cs: Vec<_> = (0..3)
                .map(|_| kraus_to_choi(&random_channel(d, d, &mut rng).unwrap()))
                .collect();
            let ab = choi_distance(&cs[0], &cs[1]).unwrap();
            let ba = choi_distance(&cs[1], &cs[0]).unwrap();
            let bc = choi_distance(&cs[1], &cs[2]).unwrap();
            let ac = choi_distance(&cs[0], &cs[2]).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!(ac <= ab + bc + 1e-10);
            prop_assert!(choi_distance(&cs[0], &cs[0]).unwrap() <= 1e-12);
            prop_assert!(ab >= 0.0 && ab <= d as f64 + 1e-9);
        }

        #[test]
        fn channel_output_is_a_state(d in 2usize..5, seed in any::<u64>()) {
            let mut rng = stream(seed, 3);
            let ch = random_channel(d, 2, &mut rng).unwrap();
            let u = haar_unitary(d, &mut rng);
            let psi = u.column(0).into_owned();
            let out = apply_channel(&ch, &DensityMatrix::pure(&psi).unwrap()).unwrap();
            DensityMatrix::new(out.matrix().clone()).unwrap();
        }
    }
}
