//! Nelder-Mead simplex descent with dimension-adaptive coefficients and
//! re-initialization around the incumbent when the simplex collapses.

/// Settings for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimplexOptions {
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Iteration budget; a re-initialization counts as one iteration.
    pub max_iters: usize,
    /// The simplex counts as collapsed once `f_worst − f_best ≤ ftol · (1 + |f_best|)`.
    pub ftol: f64,
    /// ... or once every vertex lies within `xtol` of the best one.
    pub xtol: f64,
    /// Stop as soon as the best value is at or below this.
    pub target: f64,
    /// Record the best value every this many iterations.
    pub history_stride: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.5,
            max_iters: 1000,
            ftol: 1e-10,
            xtol: 1e-9,
            target: f64::NEG_INFINITY,
            history_stride: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub reinitializations: usize,
    /// Best value seen, sampled every `history_stride` iterations and at exit.
    pub history: Vec<f64>,
}

struct Coefficients {
    reflect: f64,
    expand: f64,
    contract: f64,
    shrink: f64,
}

impl Coefficients {
    fn adaptive(n: usize) -> Self {
        let n = n.max(2) as f64;
        Self {
            reflect: 1.0,
            expand: 1.0 + 2.0 / n,
            contract: 0.75 - 0.5 / n,
            shrink: 1.0 - 1.0 / n,
        }
    }
}

struct Simplex<'a, F> {
    f: &'a mut F,
    pts: Vec<Vec<f64>>,
    vals: Vec<f64>,
    /// Vertex indices sorted by value, ties broken by index.
    order: Vec<usize>,
    sum: Vec<f64>,
    evals: usize,
}

impl<'a, F: FnMut(&[f64]) -> f64> Simplex<'a, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn build(f: &'a mut F, center: &[f64], fc: f64, step: f64) -> Self {
        let n = center.len();
        let mut s = Simplex {
            f,
            pts: Vec::with_capacity(n + 1),
            vals: Vec::with_capacity(n + 1),
            order: Vec::new(),
            sum: vec![0.0; n],
            evals: 0,
        };
        s.pts.push(center.to_vec());
        s.vals.push(fc);
        for i in 0..n {
            let mut p = center.to_vec();
            p[i] += step;
            let v = s.eval(&p);
            s.pts.push(p);
            s.vals.push(v);
        }
        s.resum();
        s.sort();
        s
    }

    fn resum(&mut self) {
        self.sum.iter_mut().for_each(|x| *x = 0.0);
        for p in &self.pts {
            for (s, x) in self.sum.iter_mut().zip(p) {
                *s += x;
            }
        }
    }

    fn sort(&mut self) {
        let vals = &self.vals;
        self.order = (0..vals.len()).collect();
        self.order
            .sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
    }

    fn replace(&mut self, idx: usize, p: Vec<f64>, v: f64) {
        for ((s, new), old) in self.sum.iter_mut().zip(&p).zip(&self.pts[idx]) {
            *s += new - old;
        }
        self.pts[idx] = p;
        self.vals[idx] = v;
    }

    fn best(&self) -> (usize, f64) {
        let b = self.order[0];
        (b, self.vals[b])
    }

    fn collapsed(&self, ftol: f64, xtol: f64) -> bool {
        let (b, fb) = self.best();
        let fw = self.vals[*self.order.last().expect("non-empty simplex")];
        if fw - fb <= ftol * (1.0 + fb.abs()) {
            return true;
        }
        let xb = &self.pts[b];
        self.pts
            .iter()
            .all(|p| p.iter().zip(xb).all(|(a, c)| (a - c).abs() <= xtol))
    }

    /// One Nelder-Mead step.
    fn step(&mut self, c: &Coefficients) {
        let n = self.pts.len() - 1;
        let worst = self.order[n];
        let second = self.order[n - 1];
        let (best_idx, fb) = self.best();
        let fw = self.vals[worst];
        let fs = self.vals[second];
        let centroid: Vec<f64> = self
            .sum
            .iter()
            .zip(&self.pts[worst])
            .map(|(s, w)| (s - w) / n as f64)
            .collect();
        let along = |t: f64, pts: &Vec<Vec<f64>>| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[worst])
                .map(|(m, w)| m + t * (m - w))
                .collect()
        };
        let xr = along(c.reflect, &self.pts);
        let fr = self.eval(&xr);
        if fr < fb {
            let xe = along(c.reflect * c.expand, &self.pts);
            let fe = self.eval(&xe);
            if fe < fr {
                self.replace(worst, xe, fe);
            } else {
                self.replace(worst, xr, fr);
            }
        } else if fr < fs {
            self.replace(worst, xr, fr);
        } else {
            let (xc, fc, accept) = if fr < fw {
                let xc = along(c.reflect * c.contract, &self.pts);
                let fc = self.eval(&xc);
                (xc, fc, fc <= fr)
            } else {
                let xc = along(-c.contract, &self.pts);
                let fc = self.eval(&xc);
                (xc, fc, fc < fw)
            };
            if accept {
                self.replace(worst, xc, fc);
            } else {
                let xb = self.pts[best_idx].clone();
                for i in 0..=n {
                    if i == best_idx {
                        continue;
                    }
                    let p: Vec<f64> = self.pts[i]
                        .iter()
                        .zip(&xb)
                        .map(|(x, b)| b + c.shrink * (x - b))
                        .collect();
                    let v = self.eval(&p);
                    self.pts[i] = p;
                    self.vals[i] = v;
                }
                self.resum();
            }
        }
        self.sort();
    }
}

/// Minimizes `f` from `x0`. The best value over the run never increases.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    let n = x0.len();
    let coeffs = Coefficients::adaptive(n);
    let f0 = {
        let v = f(x0);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let stride = opts.history_stride.max(1);
    let mut history = vec![f0];
    let mut best_x = x0.to_vec();
    let mut best_f = f0;
    let mut evaluations = 1;
    let mut iterations = 0;
    let mut reinitializations = 0;
    if n == 0 || best_f <= opts.target {
        return SimplexResult {
            x: best_x,
            fx: best_f,
            iterations,
            evaluations,
            reinitializations,
            history,
        };
    }
    let mut step = opts.initial_step;
    let mut simplex = Simplex::build(&mut f, &best_x, best_f, step);
    iterations += 1;
    loop {
        let (b, fb) = simplex.best();
        if fb < best_f {
            best_f = fb;
            best_x.clone_from(&simplex.pts[b]);
        }
        if iterations % stride == 0 {
            history.push(best_f);
        }
        if best_f <= opts.target || iterations >= opts.max_iters {
            break;
        }
        if simplex.collapsed(opts.ftol, opts.xtol) {
            reinitializations += 1;
            // Cycle through shrinking edge lengths around the incumbent.
            step = opts.initial_step * 0.5f64.powi((reinitializations % 6) as i32);
            evaluations += simplex.evals;
            simplex = Simplex::build(&mut f, &best_x, best_f, step);
        } else {
            simplex.step(&coeffs);
        }
        iterations += 1;
    }
    evaluations += simplex.evals;
    if history.last() != Some(&best_f) || iterations % stride != 0 {
        history.push(best_f);
    }
    SimplexResult {
        x: best_x,
        fx: best_f,
        iterations,
        evaluations,
        reinitializations,
        history,
    }
}
