//! Approximating a channel by a convex mixture of ansatz extreme channels.
//!
//! The mixture weights are a softmax of free logits, so the search space is
//! unconstrained. Each restart first descends a smooth Frobenius surrogate
//! ([`surrogate`]) and then runs [`simplex::minimize`] on the trace distance
//! between the target Choi matrix and the mixture.

pub mod simplex;
pub mod surrogate;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{
    ancilla_amplitudes, check_extremality, component_parameter_count, extreme_choi,
    unitary_from_params, ExtremalityReport, ExtremeParams, EXTREMALITY_TOL,
};
use crate::blocks::{
    blockwise_mixture_residual, certify_generalized_extreme, GenExtReport, CERTIFY_TOL,
};
use crate::channel::{trace_distance, ChoiState};
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};
use crate::random::{streams, substream};

pub use simplex::{SimplexOptions, SimplexResult};

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Logits and components of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionParams {
    pub dim: usize,
    pub logits: Vec<f64>,
    pub components: Vec<ExtremeParams>,
}

impl DecompositionParams {
    pub fn new(dim: usize, logits: Vec<f64>, components: Vec<ExtremeParams>) -> Result<Self> {
        let p = Self {
            dim,
            logits,
            components,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.logits.len() != self.components.len() {
            return Err(Error::InvalidParameter(format!(
                "{} logits for {} components",
                self.logits.len(),
                self.components.len()
            )));
        }
        if self.logits.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidParameter("non-finite logit".into()));
        }
        for c in &self.components {
            if c.dim != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: c.dim,
                });
            }
            c.validate()?;
        }
        Ok(())
    }

    pub fn terms(&self) -> usize {
        self.components.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        softmax(&self.logits)
    }

    /// `terms` copies of the identity component with equal weights.
    pub fn identity(d: usize, terms: usize) -> Result<Self> {
        Self::new(
            d,
            vec![0.0; terms],
            vec![ExtremeParams::identity(d)?; terms],
        )
    }

    /// Logits standard normal, components from [`ExtremeParams::random`].
    pub fn random<R: Rng + ?Sized>(d: usize, terms: usize, rng: &mut R) -> Result<Self> {
        let logits = (0..terms).map(|_| rng.sample(StandardNormal)).collect();
        let components = (0..terms)
            .map(|_| ExtremeParams::random(d, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(d, logits, components)
    }

    /// Logits followed by each component's flat parameters.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut x = self.logits.clone();
        for c in &self.components {
            x.extend(c.to_flat());
        }
        x
    }

    pub fn from_flat(d: usize, terms: usize, x: &[f64]) -> Result<Self> {
        let n = flat_len(d, terms)?;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        let m = component_parameter_count(d)?;
        let components = x[terms..]
            .chunks(m)
            .map(|c| ExtremeParams::from_flat(d, c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(d, x[..terms].to_vec(), components)
    }
}

/// Length of the flat vector for `terms` components.
pub fn flat_len(d: usize, terms: usize) -> Result<usize> {
    if terms == 0 {
        return Err(Error::InvalidParameter(
            "at least one term is required".into(),
        ));
    }
    Ok(terms * (1 + component_parameter_count(d)?))
}

/// `Σ p_t · extreme_choi(component_t)`.
pub fn mixture_choi(p: &DecompositionParams) -> Result<ChoiState> {
    p.validate()?;
    let d = p.dim;
    let mut m = linalg::zeros(d * d, d * d);
    for (w, c) in p.probabilities().iter().zip(&p.components) {
        m += extreme_choi(c)?.matrix() * Complex64::new(*w, 0.0);
    }
    Ok(ChoiState::from_parts_unchecked(d, linalg::symmetrize(&m)))
}

/// `D_t(target, mixture_choi(p))`.
pub fn objective(target: &ChoiState, p: &DecompositionParams) -> Result<f64> {
    if target.dim() != p.dim {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            actual: p.dim,
        });
    }
    trace_distance(target.matrix(), mixture_choi(p)?.matrix())
}

/// Allocation-light evaluation of the objective on flat parameter vectors.
#[derive(Debug, Clone)]
pub struct FlatObjective {
    dim: usize,
    terms: usize,
    target: ComplexMatrix,
}

impl FlatObjective {
    pub fn new(target: &ChoiState, terms: usize) -> Result<Self> {
        flat_len(target.dim(), terms)?;
        Ok(Self {
            dim: target.dim(),
            terms,
            target: target.matrix().clone(),
        })
    }

    pub fn len(&self) -> usize {
        flat_len(self.dim, self.terms).expect("checked in new")
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Columns `√p_t · res(K_{t,i})` for all terms and Kraus indices.
    fn kraus_columns(&self, x: &[f64]) -> ComplexMatrix {
        let d = self.dim;
        let m = component_parameter_count(d).expect("valid dim");
        let npairs = d * (d - 1) / 2;
        let bl = d * d - 1;
        let k = crate::ansatz::kappa(d).expect("valid dim");
        let nprior = k.div_ceil(2);
        let probs = softmax(&x[..self.terms]);
        let mut r = linalg::zeros(d * d, d * self.terms);
        let mut angles = vec![[0.0; 2]; npairs];
        for t in 0..self.terms {
            let c = &x[self.terms + t * m..self.terms + (t + 1) * m];
            for (i, a) in angles.iter_mut().enumerate() {
                *a = [c[2 * i], c[2 * i + 1]];
            }
            let u = ancilla_amplitudes(d, &angles).expect("valid angles");
            let mut v = linalg::identity(d);
            let mut w = linalg::identity(d);
            for (b, block) in c[2 * npairs..].chunks(bl).enumerate() {
                let ub = unitary_from_params(d, block).expect("valid block");
                if b < nprior {
                    v *= ub;
                } else {
                    w *= ub;
                }
            }
            let s = probs[t].sqrt();
            let mut fv = linalg::zeros(d, d);
            for i in 0..d {
                for row in 0..d {
                    let src = (row + i) % d;
                    let amp = u[(i, src)] * s;
                    for col in 0..d {
                        fv[(row, col)] = v[(src, col)] * amp;
                    }
                }
                let kop = &w * &fv;
                let col = t * d + i;
                for a in 0..d {
                    for b in 0..d {
                        r[(a * d + b, col)] = kop[(a, b)];
                    }
                }
            }
        }
        r
    }

    /// Mixture Choi matrix at `x`.
    pub fn mixture(&self, x: &[f64]) -> ComplexMatrix {
        let r = self.kraus_columns(x);
        &r * r.adjoint()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let diff = self.mixture(x) - &self.target;
        let v = 0.5 * linalg::trace_norm_hermitian(&diff);
        debug_assert!(
            (-1e-12..=self.dim as f64 + 1e-9).contains(&v),
            "objective {v} outside [0, d]"
        );
        v
    }
}

/// Budgets and tolerances for [`optimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Target diamond-norm error; success means `D_t ≤ ε/2`.
    pub epsilon: f64,
    pub max_restarts: usize,
    pub max_iters_per_restart: usize,
    pub seed: u64,
    /// Number of mixture terms; `None` means `d`.
    pub terms: Option<usize>,
    /// Simplex edge length when the surrogate stage is off.
    pub initial_step: f64,
    /// Quasi-Newton iterations on the surrogate per restart; 0 disables it.
    pub surrogate_iters: usize,
    /// Simplex edge length after the surrogate stage.
    pub polish_step: f64,
    pub ftol: f64,
    pub xtol: f64,
    /// Stop launching restarts once a batch contains a converged run.
    pub stop_when_converged: bool,
}

/// Restarts are launched in fixed-size batches so that early stopping does
/// not depend on the thread count.
pub const RESTART_BATCH: usize = 4;

impl OptimizerConfig {
    /// Default budgets for dimension `d`.
    pub fn for_dim(d: usize, epsilon: f64, seed: u64) -> Self {
        let (max_restarts, max_iters_per_restart) = match d {
            0..=2 => (20, 2000),
            3 => (60, 5000),
            _ => (100, 10000),
        };
        Self {
            epsilon,
            max_restarts,
            max_iters_per_restart,
            seed,
            terms: None,
            initial_step: 0.6,
            surrogate_iters: max_iters_per_restart,
            polish_step: 0.05,
            ftol: 1e-10,
            xtol: 1e-9,
            stop_when_converged: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_restarts == 0 || self.max_iters_per_restart == 0 {
            return Err(Error::InvalidParameter("budgets must be at least 1".into()));
        }
        if self.terms == Some(0) {
            return Err(Error::InvalidParameter(
                "at least one term is required".into(),
            ));
        }
        if !(self.initial_step > 0.0
            && self.polish_step > 0.0
            && self.ftol >= 0.0
            && self.xtol >= 0.0)
        {
            return Err(Error::InvalidParameter("invalid simplex tolerances".into()));
        }
        Ok(())
    }
}

/// Per-restart diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    pub best: f64,
    /// Trace distance at the random start.
    pub start: f64,
    pub surrogate_iterations: usize,
    /// Trace distance after the surrogate stage, if it ran.
    pub after_surrogate: Option<f64>,
    /// Simplex iterations.
    pub iterations: usize,
    pub evaluations: usize,
    /// Best-so-far objective sampled along the run.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub params: DecompositionParams,
    pub probabilities: Vec<f64>,
    pub achieved_dt: f64,
    pub diamond_bound: f64,
    pub epsilon: f64,
    pub converged: bool,
    pub restarts_used: usize,
    pub seed: u64,
    pub traces: Vec<RestartTrace>,
}

impl DecompositionResult {
    /// Evaluates `params` against `target` and fills the derived fields.
    pub fn assess(target: &ChoiState, params: DecompositionParams, epsilon: f64) -> Result<Self> {
        let achieved_dt = objective(target, &params)?;
        Ok(Self {
            probabilities: params.probabilities(),
            params,
            achieved_dt,
            diamond_bound: 2.0 * achieved_dt,
            epsilon,
            converged: achieved_dt <= epsilon / 2.0,
            restarts_used: 0,
            seed: 0,
            traces: Vec::new(),
        })
    }
}

fn run_restart(
    obj: &FlatObjective,
    sur: &surrogate::Surrogate,
    cfg: &OptimizerConfig,
    restart: usize,
) -> Result<(Vec<f64>, RestartTrace)> {
    let d = obj.dim;
    let mut rng = substream(cfg.seed, streams::OPTIMIZE, restart as u64);
    let x0 = DecompositionParams::random(d, obj.terms, &mut rng)?.to_flat();
    let start = obj.eval(&x0);
    let (mut x, mut step, mut surrogate_iterations, mut after_surrogate) =
        (x0, cfg.initial_step, 0, None);
    if cfg.surrogate_iters > 0 {
        let r = surrogate::descend(sur, &x, cfg.surrogate_iters);
        let f = obj.eval(&r.x);
        surrogate_iterations = r.iterations;
        after_surrogate = Some(f);
        // Keep the better start so the recorded history stays monotone.
        if f <= start {
            x = r.x;
            step = cfg.polish_step;
        }
    }
    let opts = SimplexOptions {
        initial_step: step,
        max_iters: cfg.max_iters_per_restart,
        ftol: cfg.ftol,
        xtol: cfg.xtol,
        target: if cfg.stop_when_converged {
            cfg.epsilon / 2.0
        } else {
            f64::NEG_INFINITY
        },
        history_stride: cfg.max_iters_per_restart.div_ceil(64).max(1),
    };
    let res = simplex::minimize(|x| obj.eval(x), &x, &opts);
    let mut history = vec![start];
    history.extend(res.history);
    Ok((
        res.x,
        RestartTrace {
            restart,
            best: res.fx,
            start,
            surrogate_iterations,
            after_surrogate,
            iterations: res.iterations,
            evaluations: res.evaluations,
            history,
        },
    ))
}

/// Multistart search. Deterministic in `(target, cfg)`; restarts run in
/// parallel on the current rayon pool.
pub fn optimize(target: &ChoiState, cfg: &OptimizerConfig) -> Result<DecompositionResult> {
    cfg.validate()?;
    let d = target.dim();
    let terms = cfg.terms.unwrap_or(d);
    let obj = FlatObjective::new(target, terms)?;
    let sur = surrogate::Surrogate::new(target, terms)?;
    let mut traces: Vec<RestartTrace> = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut next = 0;
    while next < cfg.max_restarts {
        let end = (next + RESTART_BATCH).min(cfg.max_restarts);
        let batch = (next..end)
            .into_par_iter()
            .map(|r| run_restart(&obj, &sur, cfg, r))
            .collect::<Result<Vec<_>>>()?;
        for (x, tr) in batch {
            let better = match &best {
                None => true,
                Some((f, idx, _)) => tr.best < *f || (tr.best == *f && tr.restart < *idx),
            };
            if better {
                best = Some((tr.best, tr.restart, x));
            }
            traces.push(tr);
        }
        next = end;
        let f = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if cfg.stop_when_converged && f <= cfg.epsilon / 2.0 {
            break;
        }
    }
    let (_, _, x) = best.expect("at least one restart");
    let params = DecompositionParams::from_flat(d, terms, &x)?;
    let mut result = DecompositionResult::assess(target, params, cfg.epsilon)?;
    result.restarts_used = traces.len();
    result.seed = cfg.seed;
    result.traces = traces;
    Ok(result)
}

/// Per-component diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub probability: f64,
    pub extremality: ExtremalityReport,
    pub certification: GenExtReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub achieved_dt: f64,
    pub diamond_bound: f64,
    /// Optimal probability of telling the mixture from the target in one use.
    pub distinguishing_probability: f64,
    pub converged: bool,
    pub probabilities: Vec<f64>,
    pub components: Vec<ComponentReport>,
    pub blockwise_residual: f64,
}

pub fn decompose_report(
    result: &DecompositionResult,
    target: &ChoiState,
) -> Result<DecompositionReport> {
    let p = &result.params;
    let probabilities = p.probabilities();
    let chois = p
        .components
        .iter()
        .map(extreme_choi)
        .collect::<Result<Vec<_>>>()?;
    let components = p
        .components
        .iter()
        .zip(&chois)
        .zip(&probabilities)
        .map(|((c, choi), &probability)| {
            Ok(ComponentReport {
                probability,
                extremality: check_extremality(c.dim, &c.mux_angles, EXTREMALITY_TOL)?,
                certification: certify_generalized_extreme(choi, CERTIFY_TOL)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let parts: Vec<(f64, &ChoiState)> = probabilities.iter().copied().zip(chois.iter()).collect();
    let achieved_dt = objective(target, p)?;
    Ok(DecompositionReport {
        achieved_dt,
        diamond_bound: 2.0 * achieved_dt,
        distinguishing_probability: 0.5 * (1.0 + achieved_dt),
        converged: result.converged,
        probabilities,
        components,
        blockwise_residual: blockwise_mixture_residual(target, &parts)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{kraus_to_choi, KrausChannel};
    use crate::linalg::max_abs;
    use crate::random::{haar_unitary, stream};
    use proptest::prelude::*;

    #[test]
    fn identity_mixture_is_eta() {
        for d in 2..5 {
            let mut p = DecompositionParams::identity(d, d).unwrap();
            p.logits = (0..d).map(|i| i as f64 * 0.7 - 1.0).collect();
            let eta = kraus_to_choi(&KrausChannel::identity(d).unwrap());
            assert!(max_abs(&(mixture_choi(&p).unwrap().matrix() - eta.matrix())) < 1e-14);
            assert!(objective(&eta, &p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn dominant_logit_selects_component() {
        let mut rng = stream(3, 0);
        let mut p = DecompositionParams::random(3, 3, &mut rng).unwrap();
        p.logits = vec![0.0, 30.0, 0.0];
        let one = extreme_choi(&p.components[1]).unwrap();
        assert!(max_abs(&(mixture_choi(&p).unwrap().matrix() - one.matrix())) < 1e-10);
    }

    #[test]
    fn depolarizing_vs_identity_mixture() {
        let target = ChoiState::new(2, linalg::identity(4) * Complex64::new(0.5, 0.0)).unwrap();
        let p = DecompositionParams::identity(2, 2).unwrap();
        assert!((objective(&target, &p).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn config_is_validated() {
        let mut c = OptimizerConfig::for_dim(2, 0.1, 0);
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
        let mut c = OptimizerConfig::for_dim(2, 0.1, 0);
        c.max_restarts = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unitary_qubit_target_is_recovered() {
        let u = haar_unitary(2, &mut stream(21, 0));
        let target = kraus_to_choi(&KrausChannel::unitary(u, 1e-10).unwrap());
        let cfg = OptimizerConfig::for_dim(2, 2e-4, 7);
        let r = optimize(&target, &cfg).unwrap();
        assert!(r.achieved_dt <= 1e-4, "{}", r.achieved_dt);
        assert!(r.converged);
        assert_eq!(r.diamond_bound, 2.0 * r.achieved_dt);
        let rep = decompose_report(&r, &target).unwrap();
        assert!(rep.components.iter().all(|c| c.certification.certified));
        assert!((rep.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn optimize_is_deterministic_and_traces_monotone() {
        let p = DecompositionParams::random(2, 2, &mut stream(5, 0)).unwrap();
        let target = mixture_choi(&p).unwrap();
        let mut cfg = OptimizerConfig::for_dim(2, 1e-9, 11);
        cfg.max_restarts = 3;
        cfg.max_iters_per_restart = 300;
        let a = optimize(&target, &cfg).unwrap();
        let b = optimize(&target, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.restarts_used, 3);
        for t in &a.traces {
            assert!(t.history.windows(2).all(|w| w[1] <= w[0]));
        }
        let best = a
            .traces
            .iter()
            .map(|t| t.best)
            .fold(f64::INFINITY, f64::min);
        assert!((a.achieved_dt - best).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn flat_objective_matches_reference(d in 2usize..5, seed in any::<u64>()) {
            let mut rng = stream(seed, 0);
            let p = DecompositionParams::random(d, d, &mut rng).unwrap();
            let other = DecompositionParams::random(d, d, &mut rng).unwrap();
            let target = mixture_choi(&other).unwrap();
            let f = FlatObjective::new(&target, d).unwrap();
            let x = p.to_flat();
            prop_assert_eq!(x.len(), f.len());
            prop_assert!(max_abs(&(f.mixture(&x) - mixture_choi(&p).unwrap().matrix())) <= 1e-12);
            let v = f.eval(&x);
            prop_assert!((v - objective(&target, &p).unwrap()).abs() <= 1e-10);
            prop_assert!((0.0..=d as f64).contains(&v));
            prop_assert_eq!(x.len(), crate::ansatz::parameter_count(d).unwrap() + 1);
        }

        #[test]
        fn probabilities_are_on_simplex(logits in proptest::collection::vec(-50.0f64..50.0, 1..6)) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-15);
            prop_assert!(p.iter().all(|&x| x > 0.0));
        }

        #[test]
        fn objective_is_convex_in_probabilities(seed in any::<u64>()) {
            let d = 3;
            let mut rng = stream(seed, 1);
            let target = kraus_to_choi(&crate::random::random_channel(d, d * d, &mut rng).unwrap());
            let comps: Vec<_> = (0..d).map(|_| ExtremeParams::random(d, &mut rng).unwrap()).collect();
            let chois: Vec<_> = comps.iter().map(|c| extreme_choi(c).unwrap()).collect();
            let eval = |p: &[f64]| {
                let mut m = linalg::zeros(d * d, d * d);
                for (w, c) in p.iter().zip(&chois) {
                    m += c.matrix() * Complex64::new(*w, 0.0);
                }
                trace_distance(target.matrix(), &m).unwrap()
            };
            let la: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let lb: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let (pa, pb) = (softmax(&la), softmax(&lb));
            let mid: Vec<f64> = pa.iter().zip(&pb).map(|(a, b)| 0.5 * (a + b)).collect();
            prop_assert!(eval(&mid) <= 0.5 * (eval(&pa) + eval(&pb)) + 1e-12);
        }
    }
}
