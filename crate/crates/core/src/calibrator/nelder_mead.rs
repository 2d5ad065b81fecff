//! Box-bounded Nelder–Mead with seeded restarts.
//!
//! Trial points are projected onto the box before evaluation, so every
//! evaluated point is feasible. After the simplex collapses, the search is
//! restarted around the incumbent with freshly drawn step signs and lengths;
//! it stops once a whole restart improves the objective by less than `tol`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct Options {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Initial simplex edge per coordinate.
    pub step: Vec<f64>,
    pub max_evals: usize,
    pub max_restarts: usize,
    /// Improvement over a full restart below which the search is converged.
    pub tol: f64,
    pub seed: u64,
}

impl Options {
    pub fn new(step: Vec<f64>, max_evals: usize, seed: u64) -> Self {
        let n = step.len();
        Self {
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            step,
            max_evals,
            max_restarts: 50,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// False when the evaluation budget ran out before the restart test passed.
    pub converged: bool,
}

struct Counter<'a, F> {
    f: F,
    opts: &'a Options,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counter<'_, F> {
    fn project(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.opts.lower[i], self.opts.upper[i]);
        }
    }

    fn eval(&mut self, x: &mut [f64]) -> f64 {
        self.project(x);
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.opts.max_evals
    }
}

/// One simplex run from `start`; returns the best vertex.
fn simplex_run<F: FnMut(&[f64]) -> f64>(
    c: &mut Counter<'_, F>,
    start: &[f64],
    f_start: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut pts: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut vals = vec![f_start];
    for i in 0..n {
        if c.exhausted() {
            break;
        }
        let mut p = start.to_vec();
        let len = c.opts.step[i] * rng.gen_range(0.5..1.5);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut trial = p[i] + sign * len;
        if trial < c.opts.lower[i] || trial > c.opts.upper[i] {
            trial = p[i] - sign * len;
        }
        p[i] = trial;
        let v = c.eval(&mut p);
        pts.push(p);
        vals.push(v);
    }
    if pts.len() < n + 1 {
        let b = argmin(&vals);
        return (pts[b].clone(), vals[b]);
    }

    while !c.exhausted() {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let (best, worst) = (vals[0], vals[n]);
        let spread = worst - best;
        let diameter = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= 1e-12 * (1.0 + best.abs())) || diameter < 1e-13 {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|i| pts[..n].iter().map(|p| p[i]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let mut xr = along(1.0);
        let fr = c.eval(&mut xr);
        if fr < vals[0] {
            let mut xe = along(2.0);
            let fe = c.eval(&mut xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (mut xc, outside) = if fr < vals[n] {
            (along(0.5), true)
        } else {
            (along(-0.5), false)
        };
        let fc = c.eval(&mut xc);
        if (outside && fc <= fr) || (!outside && fc < vals[n]) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for k in 1..=n {
            if c.exhausted() {
                break;
            }
            let mut p: Vec<f64> = pts[0]
                .iter()
                .zip(&pts[k])
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            vals[k] = c.eval(&mut p);
            pts[k] = p;
        }
    }
    let b = argmin(&vals);
    (pts[b].clone(), vals[b])
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i)
}

/// Minimizes `f` over the box, starting from `x0`. The returned point is never
/// worse than `x0` (after projection).
pub fn minimize<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &Options) -> Minimum {
    assert_eq!(x0.len(), opts.step.len(), "step length must match dimension");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut c = Counter { f, opts, evals: 0 };
    let mut best = x0.to_vec();
    let mut f_best = c.eval(&mut best);
    if x0.is_empty() {
        return Minimum {
            x: best,
            f: f_best,
            evals: c.evals,
            converged: true,
        };
    }
    let mut converged = false;
    for _ in 0..=opts.max_restarts {
        if c.exhausted() {
            break;
        }
        let (x, fx) = simplex_run(&mut c, &best, f_best, &mut rng);
        let improvement = f_best - fx;
        if fx < f_best {
            best = x;
            f_best = fx;
        }
        if !(improvement >= opts.tol) && !c.exhausted() {
            converged = true;
            break;
        }
    }
    Minimum {
        x: best,
        f: f_best,
        evals: c.evals,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] - 2.0).powi(2);
        let m = minimize(f, &[0.0, 0.0], &Options::new(vec![0.5, 0.5], 2000, 1));
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 2.0).abs() < 1e-5, "{:?}", m.x);
    }

    #[test]
    fn respects_lower_bound() {
        let f = |x: &[f64]| (x[0] + 1.0).powi(2) + (x[1] - 0.5).powi(2);
        let m = minimize(f, &[1.0, 1.0], &Options::new(vec![0.3, 0.3], 2000, 2));
        assert_eq!(m.x[0], 0.0);
        assert!((m.x[1] - 0.5).abs() < 1e-5);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let mut o = Options::new(vec![0.5, 0.5], 5000, 3);
        o.lower = vec![-5.0, -5.0];
        o.tol = 1e-12;
        let m = minimize(f, &[-1.2, 1.0], &o);
        assert!(m.f < 1e-8, "{}", m.f);
    }

    #[test]
    fn budget_exhaustion_is_flagged_and_never_worse() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 3.0).powi(2)).sum::<f64>();
        let x0 = vec![0.0; 6];
        let m = minimize(f, &x0, &Options::new(vec![1.0; 6], 20, 4));
        assert!(!m.converged);
        assert!(m.evals <= 20);
        assert!(m.f <= f(&x0));
    }

    #[test]
    fn deterministic_for_seed() {
        let f = |x: &[f64]| (x[0] - 0.3).abs() + (x[1] - 0.7).powi(2);
        let o = Options::new(vec![0.2, 0.2], 500, 7);
        assert_eq!(minimize(f, &[0.0, 0.0], &o), minimize(f, &[0.0, 0.0], &o));
    }
}
