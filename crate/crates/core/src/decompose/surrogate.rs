//! Smooth surrogate `‖M(x) − C‖²_F` of the trace-distance objective, with an
//! analytic gradient, and a quasi-Newton descent on it.
//!
//! With `M = R R†` and `Δ = M − C`, `df = 4 Re⟨Δ R, dR⟩`; every parameter only
//! touches the columns of its own component, so the gradient is a sum of
//! small inner products against `Γ = reshape(Δ R)`.

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{flat_len, softmax};
use crate::ansatz::{
    ancilla_amplitudes, component_parameter_count, kappa, mux_pairs, two_level,
    unitary_from_params, unitary_pairs,
};
use crate::channel::ChoiState;
use crate::error::Result;
use crate::linalg::{self, phase, ComplexMatrix, ZERO};

/// `Re Σ conj(a) b` over all entries.
fn inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

struct Component {
    u: DMatrix<f64>,
    blocks: Vec<ComplexMatrix>,
    v: ComplexMatrix,
    w: ComplexMatrix,
    /// `F_i`, unscaled.
    f: Vec<ComplexMatrix>,
    /// `K_i = W F_i V`, unscaled.
    k: Vec<ComplexMatrix>,
}

#[derive(Debug, Clone)]
pub struct Surrogate {
    dim: usize,
    terms: usize,
    target: ComplexMatrix,
}

impl Surrogate {
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

    fn component(&self, c: &[f64]) -> Component {
        let d = self.dim;
        let npairs = d * (d - 1) / 2;
        let bl = d * d - 1;
        let nprior = kappa(d).expect("valid dim").div_ceil(2);
        let angles: Vec<[f64; 2]> = (0..npairs).map(|i| [c[2 * i], c[2 * i + 1]]).collect();
        let u = ancilla_amplitudes(d, &angles).expect("valid angles");
        let blocks: Vec<ComplexMatrix> = c[2 * npairs..]
            .chunks(bl)
            .map(|b| unitary_from_params(d, b).expect("valid block"))
            .collect();
        let prod = |bs: &[ComplexMatrix]| bs.iter().fold(linalg::identity(d), |acc, b| acc * b);
        let v = prod(&blocks[..nprior]);
        let w = prod(&blocks[nprior..]);
        let f: Vec<ComplexMatrix> = (0..d)
            .map(|i| {
                let mut m = linalg::zeros(d, d);
                for col in 0..d {
                    m[((col + d - i) % d, col)] = Complex64::new(u[(i, col)], 0.0);
                }
                m
            })
            .collect();
        let k = f.iter().map(|fi| &w * fi * &v).collect();
        Component {
            u,
            blocks,
            v,
            w,
            f,
            k,
        }
    }

    fn columns(&self, comps: &[Component], probs: &[f64]) -> ComplexMatrix {
        let d = self.dim;
        let mut r = linalg::zeros(d * d, d * self.terms);
        for (t, c) in comps.iter().enumerate() {
            let s = Complex64::new(probs[t].sqrt(), 0.0);
            for (i, k) in c.k.iter().enumerate() {
                for a in 0..d {
                    for b in 0..d {
                        r[(a * d + b, t * d + i)] = k[(a, b)] * s;
                    }
                }
            }
        }
        r
    }

    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], Vec<&'a [f64]>) {
        let m = component_parameter_count(self.dim).expect("valid dim");
        let (logits, rest) = x.split_at(self.terms);
        (logits, rest.chunks(m).collect())
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let (logits, cs) = self.split(x);
        let comps: Vec<Component> = cs.iter().map(|c| self.component(c)).collect();
        let r = self.columns(&comps, &softmax(logits));
        (&r * r.adjoint() - &self.target).norm_squared()
    }

    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim;
        let (logits, cs) = self.split(x);
        let probs = softmax(logits);
        let comps: Vec<Component> = cs.iter().map(|c| self.component(c)).collect();
        let r = self.columns(&comps, &probs);
        let delta = &r * r.adjoint() - &self.target;
        let value = delta.norm_squared();
        let g = &delta * &r;
        let npairs = d * (d - 1) / 2;
        let bl = d * d - 1;
        let nprior = kappa(d).expect("valid dim").div_ceil(2);
        let m = component_parameter_count(d).expect("valid dim");
        let mut grad = vec![0.0; x.len()];
        let mut h = vec![0.0; self.terms];
        for (t, c) in comps.iter().enumerate() {
            let s = probs[t].sqrt();
            let gamma: Vec<ComplexMatrix> = (0..d)
                .map(|i| ComplexMatrix::from_fn(d, d, |a, b| g[(a * d + b, t * d + i)]))
                .collect();
            h[t] = (0..d).map(|i| inner(&gamma[i], &c.k[i])).sum();
            let sc = Complex64::new(s, 0.0);
            let mut ev = linalg::zeros(d, d);
            let mut ew = linalg::zeros(d, d);
            let mut ubar = DMatrix::<f64>::zeros(d, d);
            for i in 0..d {
                ev += (&c.w * &c.f[i]).adjoint() * &gamma[i] * sc;
                ew += &gamma[i] * (&c.f[i] * &c.v).adjoint() * sc;
                let ef = c.w.adjoint() * &gamma[i] * c.v.adjoint() * sc;
                for col in 0..d {
                    ubar[(i, col)] = ef[((col + d - i) % d, col)].re;
                }
            }
            let off = self.terms + t * m;
            let angles: Vec<[f64; 2]> = (0..npairs)
                .map(|p| [x[off + 2 * p], x[off + 2 * p + 1]])
                .collect();
            amplitude_backprop(d, &angles, &c.u, &ubar, &mut grad[off..off + 2 * npairs]);
            let (prior, posterior) = c.blocks.split_at(nprior);
            for (bs, e, first) in [(prior, &ev, 0), (posterior, &ew, nprior)] {
                for b in 0..bs.len() {
                    let left = bs[..b].iter().fold(linalg::identity(d), |acc, u| acc * u);
                    let right = bs[b + 1..]
                        .iter()
                        .fold(linalg::identity(d), |acc, u| acc * u);
                    let eb = left.adjoint() * e * right.adjoint();
                    let start = off + 2 * npairs + (first + b) * bl;
                    block_gradient(d, &x[start..start + bl], &eb, &mut grad[start..start + bl]);
                }
            }
        }
        for s in 0..self.terms {
            grad[s] = 2.0
                * (0..self.terms)
                    .map(|t| h[t] * probs[t].sqrt() * (f64::from(u8::from(t == s)) - probs[s]))
                    .sum::<f64>();
        }
        for gv in &mut grad[self.terms..] {
            *gv *= 4.0;
        }
        (value, grad)
    }
}

/// Adds `∂(Σ ū ∘ u)/∂angles` for the amplitude matrix `u`.
fn amplitude_backprop(
    d: usize,
    angles: &[[f64; 2]],
    u: &DMatrix<f64>,
    ubar: &DMatrix<f64>,
    out: &mut [f64],
) {
    let pairs = mux_pairs(d);
    for l in 0..d {
        let mut v: Vec<f64> = u.column(l).iter().copied().collect();
        let mut lam: Vec<f64> = ubar.column(l).iter().copied().collect();
        // Walk the application order backwards: written order forwards.
        for (p, (&(j, k), &[alpha, beta])) in pairs.iter().zip(angles).enumerate() {
            let (theta, slot) = if l == j {
                (alpha, 2 * p)
            } else if l == k {
                (beta, 2 * p + 1)
            } else {
                continue;
            };
            let (sn, cs) = theta.sin_cos();
            // Undo the rotation to recover its input.
            let (vj, vk) = (cs * v[j] + sn * v[k], -sn * v[j] + cs * v[k]);
            out[slot] += lam[j] * (-sn * vj - cs * vk) + lam[k] * (cs * vj - sn * vk);
            let (lj, lk) = (cs * lam[j] + sn * lam[k], -sn * lam[j] + cs * lam[k]);
            v[j] = vj;
            v[k] = vk;
            lam[j] = lj;
            lam[k] = lk;
        }
    }
}

/// Writes `∂ Re⟨E, U(block)⟩` for one special-unitary block.
fn block_gradient(d: usize, block: &[f64], e: &ComplexMatrix, out: &mut [f64]) {
    let pairs = unitary_pairs(d);
    let mpairs = pairs.len();
    let deltas = &block[2 * mpairs..];
    let last = -deltas.iter().sum::<f64>();
    let diag: Vec<f64> = (0..d)
        .map(|i| if i + 1 < d { deltas[i] } else { last })
        .collect();
    let dmat = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |i, _| phase(diag[i])));
    let ts: Vec<ComplexMatrix> = pairs
        .iter()
        .enumerate()
        .map(|(p, &(j, k))| two_level(d, j, k, block[2 * p], block[2 * p + 1]))
        .collect();
    let mut suffix = vec![dmat.clone(); mpairs + 1];
    for p in (0..mpairs).rev() {
        suffix[p] = &ts[p] * &suffix[p + 1];
    }
    let mut prefix = linalg::identity(d);
    let i1 = Complex64::new(0.0, 1.0);
    for (p, &(j, k)) in pairs.iter().enumerate() {
        let ep = prefix.adjoint() * e * suffix[p + 1].adjoint();
        let (theta, phi) = (block[2 * p], block[2 * p + 1]);
        let (sn, cs) = theta.sin_cos();
        let (up, down) = (phase(phi), phase(-phi));
        let entries = |m: [[Complex64; 2]; 2]| -> f64 {
            (ep[(j, j)].conj() * m[0][0]
                + ep[(j, k)].conj() * m[0][1]
                + ep[(k, j)].conj() * m[1][0]
                + ep[(k, k)].conj() * m[1][1])
                .re
        };
        let c = |v: f64| Complex64::new(v, 0.0);
        out[2 * p] = entries([[c(-sn), -up * cs], [down * cs, c(-sn)]]);
        out[2 * p + 1] = entries([[ZERO, -i1 * up * sn], [-i1 * down * sn, ZERO]]);
        prefix *= &ts[p];
    }
    let ed = prefix.adjoint() * e;
    let tail = (ed[(d - 1, d - 1)].conj() * (-i1) * phase(last)).re;
    for q in 0..d - 1 {
        out[2 * mpairs + q] = (ed[(q, q)].conj() * i1 * phase(diag[q])).re + tail;
    }
}

struct Problem<'a>(&'a Surrogate);

impl CostFunction for Problem<'_> {
    type Param = Vec<f64>;
    type Output = f64;
    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.0.value(p))
    }
}

impl Gradient for Problem<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;
    fn gradient(&self, p: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.0.value_and_gradient(p).1)
    }
}

/// Result of [`descend`].
#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// L-BFGS on the surrogate from `x0`. Line-search failures end the descent
/// at the best point reached so far.
pub fn descend(s: &Surrogate, x0: &[f64], max_iters: usize) -> Descent {
    let fallback = || Descent {
        x: x0.to_vec(),
        value: s.value(x0),
        iterations: 0,
    };
    if max_iters == 0 {
        return fallback();
    }
    let solver = match LBFGS::new(MoreThuenteLineSearch::new(), 8)
        .with_tolerance_grad(1e-12)
        .and_then(|l| l.with_tolerance_cost(1e-15))
    {
        Ok(l) => l,
        Err(_) => return fallback(),
    };
    let run = Executor::new(Problem(s), solver)
        .configure(|st| st.param(x0.to_vec()).max_iters(max_iters as u64))
        .timer(false)
        .run();
    match run {
        Ok(res) => {
            let st = res.state();
            match st.get_best_param() {
                Some(x) => Descent {
                    x: x.clone(),
                    value: st.get_best_cost(),
                    iterations: st.get_iter() as usize,
                },
                None => fallback(),
            }
        }
        Err(_) => fallback(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::kraus_to_choi;
    use crate::decompose::{mixture_choi, DecompositionParams};
    use crate::random::{random_channel, stream};
    use rand::Rng;

    #[test]
    fn value_matches_mixture() {
        let mut rng = stream(1, 0);
        for d in 2..5 {
            let target = kraus_to_choi(&random_channel(d, d * d, &mut rng).unwrap());
            let p = DecompositionParams::random(d, d, &mut rng).unwrap();
            let s = Surrogate::new(&target, d).unwrap();
            let want = (mixture_choi(&p).unwrap().matrix() - target.matrix()).norm_squared();
            assert!((s.value(&p.to_flat()) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = stream(2, 0);
        for d in 2..5 {
            let target = kraus_to_choi(&random_channel(d, d * d, &mut rng).unwrap());
            let terms = if d == 4 { 2 } else { d };
            let s = Surrogate::new(&target, terms).unwrap();
            let x = DecompositionParams::random(d, terms, &mut rng)
                .unwrap()
                .to_flat();
            let (_, g) = s.value_and_gradient(&x);
            let h = 1e-6;
            let mut worst = 0.0f64;
            for _ in 0..40 {
                let k = rng.random_range(0..x.len());
                let (mut a, mut b) = (x.clone(), x.clone());
                a[k] += h;
                b[k] -= h;
                let fd = (s.value(&a) - s.value(&b)) / (2.0 * h);
                worst = worst.max((fd - g[k]).abs() / (1.0 + fd.abs()));
            }
            for k in 0..terms {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[k] += h;
                b[k] -= h;
                let fd = (s.value(&a) - s.value(&b)) / (2.0 * h);
                worst = worst.max((fd - g[k]).abs() / (1.0 + fd.abs()));
            }
            assert!(worst < 1e-6, "d = {d}: {worst}");
        }
    }

    #[test]
    fn descent_lowers_the_surrogate() {
        let mut rng = stream(3, 0);
        let target = kraus_to_choi(&random_channel(2, 4, &mut rng).unwrap());
        let s = Surrogate::new(&target, 2).unwrap();
        let x0 = DecompositionParams::random(2, 2, &mut rng)
            .unwrap()
            .to_flat();
        let r = descend(&s, &x0, 200);
        assert!(
            r.value < 1e-3 * s.value(&x0),
            "{} vs {}",
            r.value,
            s.value(&x0)
        );
        assert!((s.value(&r.x) - r.value).abs() < 1e-12);
    }
}
