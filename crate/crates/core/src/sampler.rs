//! Randomized execution of a decomposition: per shot, draw a component with
//! its mixture weight, run that component's circuit with a mid-circuit
//! measurement of the ancilla, and average the resulting system states.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::extreme_kraus;
use crate::channel::{apply_channel, trace_distance, DensityMatrix};
use crate::circuit::{apply_gate_left, synthesize, Circuit, Gate, Wire};
use crate::decompose::DecompositionParams;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};

/// A circuit split at its measurement point.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCircuit {
    dim: usize,
    /// `(U_pre)(𝟙 ⊗ |0⟩)`: a `d² × d` isometry.
    isometry: ComplexMatrix,
    /// System unitary applied after outcome `i`.
    post: Vec<ComplexMatrix>,
    measured: bool,
}

impl CompiledCircuit {
    pub fn new(c: &Circuit) -> Result<Self> {
        c.validate()?;
        let d = c.dim;
        let cut = c.measurement_point();
        let mut pre = linalg::identity(d * d);
        for g in &c.gates[..cut] {
            apply_gate_left(&mut pre, g, d);
        }
        let isometry = ComplexMatrix::from_fn(d * d, d, |r, s| pre[(r, s * d)]);
        let post = (0..d)
            .map(|i| {
                let mut u = linalg::identity(d);
                for g in &c.gates[cut..] {
                    match g {
                        Gate::ControlledSwap { level, j, k, .. } => {
                            if *level == i {
                                u.swap_rows(*j, *k);
                            }
                        }
                        other => {
                            let mut full = linalg::identity(d * d);
                            apply_gate_left(&mut full, other, d);
                            let local = ComplexMatrix::from_fn(d, d, |r, s| full[(r * d, s * d)]);
                            u = local * u;
                        }
                    }
                }
                u
            })
            .collect();
        Ok(Self {
            dim: d,
            isometry,
            post,
            measured: cut < c.gates.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Joint state before the measurement point.
    fn joint(&self, rho: &DensityMatrix) -> ComplexMatrix {
        &self.isometry * rho.matrix() * self.isometry.adjoint()
    }

    fn branch(&self, sigma: &ComplexMatrix, i: usize) -> (f64, ComplexMatrix) {
        let d = self.dim;
        let block = ComplexMatrix::from_fn(d, d, |s, t| sigma[(s * d + i, t * d + i)]);
        (linalg::trace(&block).re.max(0.0), block)
    }

    /// One run: the ancilla is measured if the circuit has classical
    /// controls, otherwise it is traced out. Returns the outcome (if measured)
    /// and the normalized system state.
    pub fn run<R: Rng + ?Sized>(
        &self,
        rho: &DensityMatrix,
        rng: &mut R,
    ) -> Result<(Option<usize>, DensityMatrix)> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: rho.dim(),
            });
        }
        let sigma = self.joint(rho);
        let branches: Vec<(f64, ComplexMatrix)> =
            (0..self.dim).map(|i| self.branch(&sigma, i)).collect();
        if !self.measured {
            let mut out = linalg::zeros(self.dim, self.dim);
            for (_, b) in &branches {
                out += b;
            }
            return Ok((None, DensityMatrix::from_matrix_unchecked(out)));
        }
        let weights: Vec<f64> = branches.iter().map(|b| b.0).collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidParameter(format!("Born weights: {e}")))?;
        let i = dist.sample(rng);
        let (p, block) = &branches[i];
        let u = &self.post[i];
        let out = u * (block / Complex64::new(*p, 0.0)) * u.adjoint();
        Ok((Some(i), DensityMatrix::from_matrix_unchecked(out)))
    }

    /// Expected output, averaged over measurement outcomes.
    pub fn expected(&self, rho: &DensityMatrix) -> DensityMatrix {
        let sigma = self.joint(rho);
        let mut out = linalg::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            let (_, block) = self.branch(&sigma, i);
            let u = &self.post[i];
            out += u * block * u.adjoint();
        }
        DensityMatrix::from_matrix_unchecked(out)
    }
}

/// Runs a circuit once on `ρ ⊗ |0⟩⟨0|` and returns the system state of the realized branch.
pub fn run_circuit_on_state<R: Rng + ?Sized>(
    c: &Circuit,
    rho: &DensityMatrix,
    rng: &mut R,
) -> Result<DensityMatrix> {
    Ok(CompiledCircuit::new(c)?.run(rho, rng)?.1)
}

/// `Σ_t p_t E_t(ρ)` with the components' Kraus operators.
pub fn exact_mixture_apply(
    decomp: &DecompositionParams,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    decomp.validate()?;
    if rho.dim() != decomp.dim {
        return Err(Error::DimensionMismatch {
            expected: decomp.dim,
            actual: rho.dim(),
        });
    }
    let mut out = linalg::zeros(decomp.dim, decomp.dim);
    for (p, c) in decomp.probabilities().iter().zip(&decomp.components) {
        out += apply_channel(&extreme_kraus(c)?, rho)?.matrix() * Complex64::new(*p, 0.0);
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub shots: usize,
    /// Draws of each mixture component.
    pub empirical_counts: Vec<usize>,
    /// Measured ancilla outcomes, per component.
    pub outcome_counts: Vec<Vec<usize>>,
    /// Classical dits drawn to select components; equals `shots`.
    pub dit_draws: usize,
    #[serde(with = "crate::io::matrix_serde")]
    pub estimated_state: ComplexMatrix,
    #[serde(with = "crate::io::matrix_serde")]
    pub exact_state: ComplexMatrix,
    /// Trace distance between the estimated and exact states.
    pub deviation: f64,
}

/// Simulates `shots` uses of the randomized channel on `ρ`.
pub fn sample_channel<R: Rng + ?Sized>(
    decomp: &DecompositionParams,
    rho: &DensityMatrix,
    shots: usize,
    rng: &mut R,
) -> Result<SampleReport> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    decomp.validate()?;
    let circuits = decomp
        .components
        .iter()
        .map(|c| CompiledCircuit::new(&synthesize(c)?))
        .collect::<Result<Vec<_>>>()?;
    let probs = decomp.probabilities();
    let exact = exact_mixture_apply(decomp, rho)?;
    let dit = WeightedIndex::new(&probs).map_err(|e| Error::InvalidProbabilities(e.to_string()))?;
    let d = decomp.dim;
    let mut empirical_counts = vec![0; probs.len()];
    let mut outcome_counts = vec![vec![0; d]; probs.len()];
    let mut dit_draws = 0;
    let mut acc = linalg::zeros(d, d);
    for _ in 0..shots {
        let t = dit.sample(rng);
        dit_draws += 1;
        empirical_counts[t] += 1;
        let (outcome, out) = circuits[t].run(rho, rng)?;
        if let Some(i) = outcome {
            outcome_counts[t][i] += 1;
        }
        acc += out.matrix();
    }
    let estimated_state = acc / Complex64::new(shots as f64, 0.0);
    let deviation = trace_distance(&estimated_state, exact.matrix())?;
    Ok(SampleReport {
        shots,
        empirical_counts,
        outcome_counts,
        dit_draws,
        estimated_state,
        exact_state: exact.matrix().clone(),
        deviation,
    })
}

/// Convenience alias of [`sample_channel`].
pub fn sample<R: Rng + ?Sized>(
    decomp: &DecompositionParams,
    rho: &DensityMatrix,
    shots: usize,
    rng: &mut R,
) -> Result<SampleReport> {
    sample_channel(decomp, rho, shots, rng)
}

/// Named input states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatePreset {
    MaximallyMixed,
    Zero,
    RandomPure,
}

impl std::str::FromStr for StatePreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" | "maximally-mixed" => Ok(Self::MaximallyMixed),
            "zero" | "0" => Ok(Self::Zero),
            "random" | "random-pure" => Ok(Self::RandomPure),
            other => Err(Error::InvalidParameter(format!(
                "unknown state preset `{other}` (expected mixed, zero or random-pure)"
            ))),
        }
    }
}

impl StatePreset {
    pub fn state<R: Rng + ?Sized>(self, d: usize, rng: &mut R) -> Result<DensityMatrix> {
        match self {
            Self::MaximallyMixed => Ok(DensityMatrix::maximally_mixed(d)),
            Self::Zero => DensityMatrix::basis(d, 0),
            Self::RandomPure => DensityMatrix::pure(&crate::random::haar_state(d, rng)),
        }
    }
}

/// Whether a gate list has a measurement point before its end.
pub fn is_measured(c: &Circuit) -> bool {
    c.gates.iter().any(|g| {
        matches!(
            g,
            Gate::ControlledSwap {
                classical: true,
                control: Wire::Ancilla,
                ..
            }
        )
    })
}
