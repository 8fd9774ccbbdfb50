//! Gate-level circuits on one system qudit and one ancilla qudit.
//!
//! Each extreme component compiles to: the prior unitary `V` on the system,
//! one five-gate pattern per multiplexer, ancilla-controlled level swaps that
//! realize the shifts `X_i` (these may be driven by a classical measurement
//! record), and the posterior unitary `W`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::ansatz::{mux_pairs, ExtremeParams};
use crate::channel::KrausChannel;
use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wire {
    System,
    Ancilla,
}

impl Wire {
    fn other(self) -> Self {
        match self {
            Wire::System => Wire::Ancilla,
            Wire::Ancilla => Wire::System,
        }
    }
}

impl fmt::Display for Wire {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Wire::System => "s",
            Wire::Ancilla => "a",
        })
    }
}

/// Gates on a two-qudit register. Two-level gates act on levels `j`, `k` of one wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    /// `|j⟩ → cos θ|j⟩ + e^{−iφ} sin θ|k⟩`, `|k⟩ → cos θ|k⟩ − e^{iφ} sin θ|j⟩`.
    Givens {
        wire: Wire,
        j: usize,
        k: usize,
        theta: f64,
        phase: f64,
    },
    /// `diag(e^{iφ_0}, …, e^{iφ_{d−1}})`.
    Phase { wire: Wire, phases: Vec<f64> },
    /// Exchanges levels `j` and `k`.
    Swap { wire: Wire, j: usize, k: usize },
    /// Givens rotation on the other wire, applied when `control` holds `level`.
    ControlledGivens {
        control: Wire,
        level: usize,
        j: usize,
        k: usize,
        theta: f64,
    },
    /// Level swap on the other wire, applied when `control` holds `level`.
    /// `classical` marks swaps that may be driven by a measurement of the control.
    ControlledSwap {
        control: Wire,
        level: usize,
        j: usize,
        k: usize,
        classical: bool,
    },
}

impl Gate {
    fn target(&self) -> Wire {
        match self {
            Gate::Givens { wire, .. } | Gate::Phase { wire, .. } | Gate::Swap { wire, .. } => *wire,
            Gate::ControlledGivens { control, .. } | Gate::ControlledSwap { control, .. } => {
                control.other()
            }
        }
    }

    fn touches(&self, w: Wire) -> bool {
        match self {
            Gate::ControlledGivens { .. } | Gate::ControlledSwap { .. } => true,
            _ => self.target() == w,
        }
    }

    fn is_classical(&self) -> bool {
        matches!(
            self,
            Gate::ControlledSwap {
                classical: true,
                ..
            }
        )
    }

    fn validate(&self, d: usize) -> Result<()> {
        let check = |x: usize| {
            if x >= d {
                Err(Error::MalformedCircuit(format!(
                    "level {x} out of range for d = {d}"
                )))
            } else {
                Ok(())
            }
        };
        let pair = |j: usize, k: usize| {
            check(j)?;
            check(k)?;
            if j == k {
                return Err(Error::MalformedCircuit(format!(
                    "two-level gate on ({j}, {k})"
                )));
            }
            Ok(())
        };
        let finite = |x: f64| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::MalformedCircuit("non-finite angle".into()))
            }
        };
        match self {
            Gate::Givens {
                j, k, theta, phase, ..
            } => {
                pair(*j, *k)?;
                finite(*theta)?;
                finite(*phase)
            }
            Gate::Phase { phases, .. } => {
                if phases.len() != d {
                    return Err(Error::MalformedCircuit(format!(
                        "phase gate with {} entries on d = {d}",
                        phases.len()
                    )));
                }
                phases.iter().try_for_each(|&p| finite(p))
            }
            Gate::Swap { j, k, .. } => pair(*j, *k),
            Gate::ControlledGivens {
                level, j, k, theta, ..
            } => {
                check(*level)?;
                pair(*j, *k)?;
                finite(*theta)
            }
            Gate::ControlledSwap { level, j, k, .. } => {
                check(*level)?;
                pair(*j, *k)
            }
        }
    }

    /// Single-wire action as a `d × d` matrix, for uncontrolled gates.
    fn local_matrix(&self, d: usize) -> Option<ComplexMatrix> {
        match self {
            Gate::Givens {
                j, k, theta, phase, ..
            } => Some(crate::ansatz::two_level(d, *j, *k, *theta, *phase)),
            Gate::Phase { phases, .. } => Some(ComplexMatrix::from_diagonal(
                &nalgebra::DVector::from_iterator(d, phases.iter().map(|&p| linalg::phase(p))),
            )),
            Gate::Swap { j, k, .. } => Some(swap_matrix(d, *j, *k)),
            _ => None,
        }
    }

    /// Action on `system ⊗ ancilla` as a `d² × d²` matrix.
    pub fn matrix(&self, d: usize) -> ComplexMatrix {
        let id = linalg::identity(d);
        if let Some(m) = self.local_matrix(d) {
            return match self.target() {
                Wire::System => linalg::kron(&m, &id),
                Wire::Ancilla => linalg::kron(&id, &m),
            };
        }
        let (control, level, m) = match self {
            Gate::ControlledGivens {
                control,
                level,
                j,
                k,
                theta,
            } => (*control, *level, crate::ansatz::givens(d, *j, *k, *theta)),
            Gate::ControlledSwap {
                control,
                level,
                j,
                k,
                ..
            } => (*control, *level, swap_matrix(d, *j, *k)),
            _ => unreachable!("uncontrolled gates handled above"),
        };
        let mut proj = linalg::zeros(d, d);
        proj[(level, level)] = linalg::ONE;
        let rest = &id - &proj;
        match control {
            Wire::System => linalg::kron(&proj, &m) + linalg::kron(&rest, &id),
            Wire::Ancilla => linalg::kron(&m, &proj) + linalg::kron(&id, &rest),
        }
    }
}

fn swap_matrix(d: usize, j: usize, k: usize) -> ComplexMatrix {
    let mut m = linalg::identity(d);
    m.swap_rows(j, k);
    m
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::Givens {
                wire,
                j,
                k,
                theta,
                phase,
            } => {
                write!(f, "G[{wire}]({j},{k}) theta={theta:.6} phi={phase:.6}")
            }
            Gate::Phase { wire, phases } => {
                let ps: Vec<String> = phases.iter().map(|p| format!("{p:.6}")).collect();
                write!(f, "P[{wire}] ({})", ps.join(", "))
            }
            Gate::Swap { wire, j, k } => write!(f, "X[{wire}]({j},{k})"),
            Gate::ControlledGivens {
                control,
                level,
                j,
                k,
                theta,
            } => write!(
                f,
                "C{control}={level} G[{}]({j},{k}) theta={theta:.6}",
                control.other()
            ),
            Gate::ControlledSwap {
                control,
                level,
                j,
                k,
                classical,
            } => write!(
                f,
                "C{control}={level}{} X[{}]({j},{k})",
                if *classical { " (classical)" } else { "" },
                control.other()
            ),
        }
    }
}

/// Gates in application order on a `d`-level system and a `d`-level ancilla.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub dim: usize,
    pub gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(dim: usize, gates: Vec<Gate>) -> Result<Self> {
        let c = Self { dim, gates };
        c.validate()?;
        Ok(c)
    }

    /// Levels in range, and no gate touches the ancilla after a classical control.
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::DimensionTooSmall {
                dim: self.dim,
                min: 2,
            });
        }
        let mut seen_classical = false;
        for g in &self.gates {
            g.validate(self.dim)?;
            if g.is_classical() {
                if !matches!(
                    g,
                    Gate::ControlledSwap {
                        control: Wire::Ancilla,
                        ..
                    }
                ) {
                    return Err(Error::MalformedCircuit(
                        "classical control must come from the ancilla".into(),
                    ));
                }
                seen_classical = true;
            } else if seen_classical && g.touches(Wire::Ancilla) {
                return Err(Error::MalformedCircuit(format!(
                    "gate `{g}` acts on the ancilla after it was measured"
                )));
            }
        }
        Ok(())
    }

    pub fn census(&self) -> GateCounts {
        gate_counts(self)
    }

    /// Ancilla dits read out mid-circuit: one if any gate is classically controlled.
    pub fn classical_dits(&self) -> usize {
        usize::from(self.gates.iter().any(Gate::is_classical))
    }

    /// Index of the first classically controlled gate, or the gate count.
    pub fn measurement_point(&self) -> usize {
        self.gates
            .iter()
            .position(Gate::is_classical)
            .unwrap_or(self.gates.len())
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "# d = {}, wires: s (system), a (ancilla, starts in |0>)",
            self.dim
        )?;
        for (n, g) in self.gates.iter().enumerate() {
            if n == self.measurement_point() {
                writeln!(f, "measure a")?;
            }
            writeln!(f, "{n:4}  {g}")?;
        }
        if self.measurement_point() == self.gates.len() {
            writeln!(f, "measure a")?;
        }
        Ok(())
    }
}

/// Left-multiplies `m` (rows indexed by `s·d + a`) by a gate.
pub fn apply_gate_left(m: &mut ComplexMatrix, g: &Gate, d: usize) {
    let row = |w: Wire, x: usize, other: usize| match w {
        Wire::System => x * d + other,
        Wire::Ancilla => other * d + x,
    };
    match g {
        Gate::Phase { wire, phases } => {
            for (x, &phi) in phases.iter().enumerate().take(d) {
                let ph = linalg::phase(phi);
                for o in 0..d {
                    let r = row(*wire, x, o);
                    for c in 0..m.ncols() {
                        m[(r, c)] *= ph;
                    }
                }
            }
        }
        Gate::Givens {
            wire,
            j,
            k,
            theta,
            phase,
        } => {
            for o in 0..d {
                rotate_rows(m, row(*wire, *j, o), row(*wire, *k, o), *theta, *phase);
            }
        }
        Gate::Swap { wire, j, k } => {
            for o in 0..d {
                m.swap_rows(row(*wire, *j, o), row(*wire, *k, o));
            }
        }
        Gate::ControlledGivens {
            control,
            level,
            j,
            k,
            theta,
        } => {
            let t = control.other();
            rotate_rows(m, row(t, *j, *level), row(t, *k, *level), *theta, 0.0);
        }
        Gate::ControlledSwap {
            control,
            level,
            j,
            k,
            ..
        } => {
            let t = control.other();
            m.swap_rows(row(t, *j, *level), row(t, *k, *level));
        }
    }
}

fn rotate_rows(m: &mut ComplexMatrix, rj: usize, rk: usize, theta: f64, phi: f64) {
    let (s, c) = theta.sin_cos();
    let up = linalg::phase(phi) * s;
    let down = linalg::phase(-phi) * s;
    for col in 0..m.ncols() {
        let a = m[(rj, col)];
        let b = m[(rk, col)];
        m[(rj, col)] = a * c - up * b;
        m[(rk, col)] = down * a + b * c;
    }
}

fn product(d: usize, gates: &[Gate]) -> ComplexMatrix {
    let mut u = linalg::identity(d * d);
    for g in gates {
        apply_gate_left(&mut u, g, d);
    }
    u
}

/// Unitary of the whole circuit on `system ⊗ ancilla`, classical controls taken coherently.
pub fn circuit_unitary(c: &Circuit) -> Result<ComplexMatrix> {
    c.validate()?;
    Ok(product(c.dim, &c.gates))
}

/// Kraus operators `K_i = (𝟙 ⊗ ⟨i|) U (𝟙 ⊗ |0⟩)` of the measured circuit.
pub fn circuit_kraus(c: &Circuit) -> Result<KrausChannel> {
    let u = circuit_unitary(c)?;
    let d = c.dim;
    KrausChannel::from_ops_unchecked(
        (0..d)
            .map(|i| ComplexMatrix::from_fn(d, d, |r, col| u[(r * d + i, col * d)]))
            .collect(),
    )
}

/// Gate census.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCounts {
    pub givens: usize,
    pub controlled_givens: usize,
    pub controlled_swaps: usize,
    pub classical_swaps: usize,
    pub swaps: usize,
    pub phases: usize,
}

impl GateCounts {
    /// Gates with a continuous angle that need approximate compilation.
    pub fn continuous(&self) -> usize {
        self.givens + self.controlled_givens
    }

    pub fn total(&self) -> usize {
        self.givens + self.controlled_givens + self.controlled_swaps + self.swaps + self.phases
    }
}

pub fn gate_counts(c: &Circuit) -> GateCounts {
    let mut n = GateCounts::default();
    for g in &c.gates {
        match g {
            Gate::Givens { .. } => n.givens += 1,
            Gate::Phase { .. } => n.phases += 1,
            Gate::Swap { .. } => n.swaps += 1,
            Gate::ControlledGivens { .. } => n.controlled_givens += 1,
            Gate::ControlledSwap { classical, .. } => {
                n.controlled_swaps += 1;
                if *classical {
                    n.classical_swaps += 1;
                }
            }
        }
    }
    n
}

/// Phased Givens rotations and a final diagonal phase with
/// `u = T_1 ⋯ T_m · diag(e^{iφ})`, returned in application order.
pub fn decompose_unitary(u: &ComplexMatrix, wire: Wire) -> Result<Vec<Gate>> {
    let d = linalg::ensure_square(u)?;
    let mut m = u.clone();
    let mut rotations = Vec::with_capacity(d * (d - 1) / 2);
    for col in 0..d {
        for r in (col + 1..d).rev() {
            let (x, y) = (m[(r - 1, col)], m[(r, col)]);
            let theta = y.norm().atan2(x.norm());
            let phase = x.arg() - y.arg();
            // Left-multiply by T(θ, φ)† = T(−θ, φ).
            crate::ansatz::apply_two_level_left(&mut m, r - 1, r, -theta, phase);
            m[(r, col)] = Complex64::new(0.0, 0.0);
            rotations.push(Gate::Givens {
                wire,
                j: r - 1,
                k: r,
                theta,
                phase,
            });
        }
    }
    let mut gates = vec![Gate::Phase {
        wire,
        phases: (0..d).map(|i| m[(i, i)].arg()).collect(),
    }];
    gates.extend(rotations.into_iter().rev());
    Ok(gates)
}

/// Ancilla angles `(x1, x2, x3)` of the pattern
/// `G(x1) · C_{s=j}X · G(x2) · C_{s=k}X · G(x3)` for `M_jk(α, β)`.
pub fn multiplexer_angles(k: usize, alpha: f64, beta: f64) -> [f64; 3] {
    let x3 = 0.5 * (beta + FRAC_PI_2);
    let x1 = if k > 0 {
        0.5 * (FRAC_PI_2 - alpha)
    } else {
        -0.5 * (FRAC_PI_2 + alpha)
    };
    [x1, -x1 - x3, x3]
}

/// The five-gate pattern for `M_jk(α, β)` in application order. It agrees
/// with the multiplexer on every ancilla state reachable from `|0⟩` when the
/// multiplexers are applied in the order fixed by [`synthesize`].
pub fn multiplexer_gates(j: usize, k: usize, alpha: f64, beta: f64) -> Vec<Gate> {
    let [x1, x2, x3] = multiplexer_angles(k, alpha, beta);
    let rot = |theta| Gate::Givens {
        wire: Wire::Ancilla,
        j,
        k,
        theta,
        phase: 0.0,
    };
    let cswap = |level| Gate::ControlledSwap {
        control: Wire::System,
        level,
        j,
        k,
        classical: false,
    };
    vec![rot(x1), cswap(j), rot(x2), cswap(k), rot(x3)]
}

/// Level swaps realizing `|m⟩ → |m − i⟩` on the system when the ancilla holds `i`.
pub fn shift_gates(d: usize, i: usize) -> Vec<Gate> {
    let mut gates = Vec::new();
    let mut visited = vec![false; d];
    for start in 0..d {
        if visited[start] {
            continue;
        }
        let mut cycle = vec![start];
        visited[start] = true;
        let mut m = (start + d - i) % d;
        while m != start {
            visited[m] = true;
            cycle.push(m);
            m = (m + d - i) % d;
        }
        let last = *cycle.last().expect("non-empty cycle");
        for &c in &cycle[..cycle.len() - 1] {
            gates.push(Gate::ControlledSwap {
                control: Wire::Ancilla,
                level: i,
                j: c.max(last),
                k: c.min(last),
                classical: true,
            });
        }
    }
    gates
}

/// Compiles one extreme component to a circuit.
pub fn synthesize(p: &ExtremeParams) -> Result<Circuit> {
    p.validate()?;
    let d = p.dim;
    let mut gates = decompose_unitary(&p.prior_unitary()?, Wire::System)?;
    for (&(j, k), &[alpha, beta]) in mux_pairs(d).iter().zip(&p.mux_angles).rev() {
        gates.extend(multiplexer_gates(j, k, alpha, beta));
    }
    for i in 1..d {
        gates.extend(shift_gates(d, i));
    }
    gates.extend(decompose_unitary(&p.posterior_unitary()?, Wire::System)?);
    Circuit::new(d, gates)
}

/// `max_i ‖K_i(circuit) − K_i(ansatz)‖_max`.
pub fn synthesis_residual(p: &ExtremeParams, c: &Circuit) -> Result<f64> {
    let want = crate::ansatz::extreme_kraus(p)?;
    let got = circuit_kraus(c)?;
    Ok(want
        .ops()
        .iter()
        .zip(got.ops())
        .map(|(a, b)| linalg::max_abs(&(a - b)))
        .fold(0.0, f64::max))
}

/// Resource estimate for compiling every continuous gate to accuracy `ε / d²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub continuous_gates: usize,
    pub bits_per_gate: u32,
    pub compiled_estimate: usize,
}

/// `continuous_gates · ⌈log₂(d²/ε)⌉`, with the census taken from [`synthesize`].
pub fn cost_estimate(d: usize, epsilon: f64) -> Result<CostEstimate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let continuous_gates = synthesize(&ExtremeParams::identity(d)?)?
        .census()
        .continuous();
    let bits = ((d * d) as f64 / epsilon).log2().ceil().max(0.0) as u32;
    Ok(CostEstimate {
        continuous_gates,
        bits_per_gate: bits,
        compiled_estimate: continuous_gates * bits as usize,
    })
}

/// Diamond-norm bound `2‖U − Ũ‖` between two unitary channels.
pub fn unitary_diamond_bound(u: &ComplexMatrix, v: &ComplexMatrix) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::DimensionMismatch {
            expected: u.nrows(),
            actual: v.nrows(),
        });
    }
    for m in [u, v] {
        let r = linalg::unitarity_residual(m);
        if r > 1e-8 {
            return Err(Error::Invariant {
                what: "unitarity",
                residual: r,
                tol: 1e-8,
            });
        }
    }
    Ok(2.0 * linalg::spectral_norm(&(u - v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::{ancilla_controlled_shift, multiplexer};
    use crate::linalg::{max_abs, unitarity_residual};
    use crate::random::{haar_unitary, stream};
    use proptest::prelude::*;

    #[test]
    fn qutrit_census() {
        let c = synthesize(&ExtremeParams::identity(3).unwrap()).unwrap();
        let n = c.census();
        assert_eq!(n.givens, 15);
        assert_eq!(n.controlled_swaps, 10);
        assert_eq!(n.classical_swaps, 4);
        assert_eq!(n.controlled_givens, 0);
    }

    #[test]
    fn qutrit_shift_chain() {
        let got: Vec<(usize, usize, usize)> = (1..3)
            .flat_map(|i| shift_gates(3, i))
            .map(|g| match g {
                Gate::ControlledSwap { level, j, k, .. } => (level, j, k),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(got, vec![(1, 1, 0), (1, 2, 1), (2, 2, 0), (2, 2, 1)]);
    }

    #[test]
    fn shift_chains_match_controlled_shifts() {
        for d in 2..7 {
            for i in 1..d {
                let c = Circuit::new(d, shift_gates(d, i)).unwrap();
                let u = circuit_unitary(&c).unwrap();
                assert!(max_abs(&(u - ancilla_controlled_shift(d, i).unwrap())) < 1e-15);
            }
        }
    }

    #[test]
    fn cost_grows_by_census_when_epsilon_halves() {
        for d in 2..5 {
            let a = cost_estimate(d, 0.01).unwrap();
            let b = cost_estimate(d, 0.005).unwrap();
            assert_eq!(
                b.compiled_estimate - a.compiled_estimate,
                a.continuous_gates
            );
        }
        assert!(cost_estimate(3, 0.0).is_err());
        assert!(cost_estimate(3, 1.0).is_err());
    }

    #[test]
    fn diamond_bound_of_phase() {
        let phi: f64 = 0.3;
        let mut v = linalg::identity(2);
        v[(1, 1)] = linalg::phase(phi);
        let b = unitary_diamond_bound(&linalg::identity(2), &v).unwrap();
        assert!((b - 2.0 * (linalg::ONE - linalg::phase(phi)).norm()).abs() < 1e-14);
        assert!(
            unitary_diamond_bound(&linalg::identity(2), &(v * Complex64::new(0.5, 0.0))).is_err()
        );
    }

    #[test]
    fn malformed_circuits_are_rejected() {
        let bad_level = vec![Gate::Swap {
            wire: Wire::System,
            j: 0,
            k: 3,
        }];
        assert!(Circuit::new(3, bad_level).is_err());
        let after_measure = vec![
            Gate::ControlledSwap {
                control: Wire::Ancilla,
                level: 1,
                j: 1,
                k: 0,
                classical: true,
            },
            Gate::Givens {
                wire: Wire::Ancilla,
                j: 0,
                k: 1,
                theta: 0.1,
                phase: 0.0,
            },
        ];
        assert!(Circuit::new(2, after_measure).is_err());
    }

    #[test]
    fn gate_matrices_match_row_application() {
        let d = 3;
        let gates = vec![
            Gate::Givens {
                wire: Wire::Ancilla,
                j: 2,
                k: 0,
                theta: 0.4,
                phase: 1.1,
            },
            Gate::Phase {
                wire: Wire::System,
                phases: vec![0.1, 0.2, 0.3],
            },
            Gate::Swap {
                wire: Wire::Ancilla,
                j: 1,
                k: 2,
            },
            Gate::ControlledGivens {
                control: Wire::Ancilla,
                level: 1,
                j: 0,
                k: 2,
                theta: 0.7,
            },
            Gate::ControlledSwap {
                control: Wire::System,
                level: 2,
                j: 0,
                k: 1,
                classical: false,
            },
        ];
        for g in &gates {
            let mut m = linalg::identity(d * d);
            apply_gate_left(&mut m, g, d);
            assert!(max_abs(&(m - g.matrix(d))) < 1e-15, "{g}");
        }
    }

    #[test]
    fn multiplexer_pattern_is_not_the_full_unitary() {
        let m = multiplexer(3, 2, 1, 0.3, 0.8);
        let c = Circuit::new(3, multiplexer_gates(2, 1, 0.3, 0.8)).unwrap();
        assert!(max_abs(&(circuit_unitary(&c).unwrap() - m)) > 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn reck_reproduces_unitary(d in 2usize..6, seed in any::<u64>()) {
            let u = haar_unitary(d, &mut stream(seed, 0));
            let gates = decompose_unitary(&u, Wire::System).unwrap();
            prop_assert_eq!(gates.len(), d * (d - 1) / 2 + 1);
            let c = Circuit::new(d, gates).unwrap();
            let got = circuit_unitary(&c).unwrap();
            let want = linalg::kron(&u, &linalg::identity(d));
            prop_assert!(max_abs(&(got - want)) <= 1e-12);
        }

        #[test]
        fn synthesis_is_sound(d in 2usize..5, seed in any::<u64>()) {
            let p = ExtremeParams::random(d, &mut stream(seed, 1)).unwrap();
            let c = synthesize(&p).unwrap();
            prop_assert!(synthesis_residual(&p, &c).unwrap() <= 1e-10);
            prop_assert!(unitarity_residual(&circuit_unitary(&c).unwrap()) <= 1e-12);
            let n = c.census();
            prop_assert_eq!(n.givens, 5 * d * (d - 1) / 2);
            prop_assert_eq!(n.controlled_swaps, d * (d - 1) + (1..d).map(|i| d - num_gcd(d, i)).sum::<usize>());
        }

        #[test]
        fn pattern_agrees_on_reachable_states(d in 2usize..5, seed in any::<u64>()) {
            let p = ExtremeParams::random(d, &mut stream(seed, 2)).unwrap();
            let mut exact = linalg::identity(d * d);
            let mut gates = Vec::new();
            for (&(j, k), &[a, b]) in mux_pairs(d).iter().zip(&p.mux_angles).rev() {
                exact = multiplexer(d, j, k, a, b) * exact;
                gates.extend(multiplexer_gates(j, k, a, b));
            }
            let u = circuit_unitary(&Circuit::new(d, gates).unwrap()).unwrap();
            for s in 0..d {
                let col = s * d;
                let diff = (0..d * d).map(|r| (u[(r, col)] - exact[(r, col)]).norm()).fold(0.0, f64::max);
                prop_assert!(diff <= 1e-12);
            }
        }
    }

    fn num_gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            num_gcd(b, a % b)
        }
    }
}
