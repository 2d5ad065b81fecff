use serde::{Deserialize, Serialize};

use super::nelder_mead::{minimize, Options};
use super::objective::sum_sq;
use crate::error::{Error, Result};
use crate::loss_engine::IntensitySchedule;
use crate::model::ModelKind;
use crate::pricer::PanelPricer;

/// Evaluation budget of one fit and how it is spent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBudget {
    pub max_evals: usize,
    /// Evaluations per simplex search on one maturity block.
    pub block_evals: usize,
    /// Run the maturity-by-maturity bootstrap first.
    pub bootstrap: bool,
    /// Objective improvement over a whole sweep below which the fit is converged.
    pub tol: f64,
}

impl FitBudget {
    pub fn new(max_evals: usize) -> Self {
        Self {
            max_evals,
            block_evals: 150,
            bootstrap: true,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fit {
    pub schedule: IntensitySchedule,
    pub objective: f64,
    pub errors: Vec<f64>,
    pub evals: usize,
    /// False if the budget ran out before a sweep stopped improving.
    pub converged: bool,
}

// The search runs on u = sqrt(increment): modes differ by orders of magnitude
// and the square root evens out the simplex scales while keeping the bound u >= 0.
fn to_search(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

fn from_search(u: f64) -> f64 {
    u * u
}

/// Initial simplex edge in search coordinates for a mode of size `amplitude`.
fn step_for(u: f64, amplitude: usize) -> f64 {
    (0.2 * u).max((0.02 / amplitude as f64).sqrt())
}

struct Problem<'a> {
    pricer: &'a PanelPricer,
    model: ModelKind,
    amplitudes: &'a [usize],
    knots: &'a [f64],
}

impl Problem<'_> {
    fn schedule(&self, incr: &[Vec<f64>]) -> Result<IntensitySchedule> {
        IntensitySchedule::from_increments(self.model, self.amplitudes.to_vec(), self.knots.to_vec(), incr)
    }

    /// Objective over `buckets`, or infinity if the point cannot be priced.
    fn partial(&self, incr: &[Vec<f64>], buckets: std::ops::Range<usize>) -> f64 {
        match self
            .schedule(incr)
            .and_then(|s| self.pricer.bucket_errors(&s, buckets))
        {
            Ok(e) => sum_sq(&e),
            Err(e) => {
                log::debug!("objective not evaluable: {e}");
                f64::INFINITY
            }
        }
    }

    /// Simplex search over the increments at `cells` (mode, interval), scoring `buckets`.
    fn block(
        &self,
        incr: &[Vec<f64>],
        cells: &[(usize, usize)],
        buckets: std::ops::Range<usize>,
        max_evals: usize,
        seed: u64,
    ) -> (Vec<f64>, f64, usize) {
        let u0: Vec<f64> = cells.iter().map(|&(j, k)| to_search(incr[j][k])).collect();
        let step: Vec<f64> = u0
            .iter()
            .zip(cells)
            .map(|(&u, &(j, _))| step_for(u, self.amplitudes[j]))
            .collect();
        let mut opts = Options::new(step, max_evals, seed);
        opts.max_restarts = 3;
        let mut work = incr.to_vec();
        let m = minimize(
            |u| {
                for (&(j, k), &v) in cells.iter().zip(u) {
                    work[j][k] = from_search(v);
                }
                self.partial(&work, buckets.clone())
            },
            &u0,
            &opts,
        );
        (m.x.into_iter().map(from_search).collect(), m.f, m.evals)
    }
}

fn column(n: usize, k: usize) -> Vec<(usize, usize)> {
    (0..n).map(|j| (j, k)).collect()
}

fn set(incr: &mut [Vec<f64>], cells: &[(usize, usize)], values: Vec<f64>) {
    for (&(j, k), v) in cells.iter().zip(values) {
        incr[j][k] = v;
    }
}

/// Optimizes the per-interval increments of a fixed set of amplitudes.
///
/// Interval `k` only moves quotes maturing at or after knot `k`, so the search
/// works block by block: an optional bootstrap fits each maturity on its own
/// (kept only if it lowers the joint objective), then sweeps re-fit every
/// block against all quotes it affects until a sweep stops paying off. The
/// result is never worse than `init`.
pub fn fit_intensities(
    pricer: &PanelPricer,
    model: ModelKind,
    amplitudes: &[usize],
    knots: &[f64],
    init: &[Vec<f64>],
    budget: FitBudget,
    seed: u64,
) -> Result<Fit> {
    let (n, b) = (amplitudes.len(), knots.len());
    if pricer.instruments().is_empty() {
        return Err(Error::validation("cannot calibrate to an empty quote panel"));
    }
    if b != pricer.schedules().len() {
        return Err(Error::validation(format!(
            "{b} knots for {} quoted maturities",
            pricer.schedules().len()
        )));
    }
    if init.len() != n || init.iter().any(|r| r.len() != b) {
        return Err(Error::validation("initial increments do not match amplitudes x knots"));
    }
    if init.iter().flatten().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::validation("initial increments must be finite and non-negative"));
    }
    let problem = Problem {
        pricer,
        model,
        amplitudes,
        knots,
    };
    problem.schedule(init)?.validate(&pricer.pool)?;

    let mut incr = init.to_vec();
    let mut f_best = problem.partial(&incr, 0..b);
    let mut evals = 1;
    let block_evals = budget.block_evals.max(n + 2);

    if budget.bootstrap {
        let mut trial = incr.clone();
        for k in 0..b {
            if evals + block_evals > budget.max_evals {
                break;
            }
            let cells = column(n, k);
            let (col, _, used) = problem.block(&trial, &cells, k..k + 1, block_evals, seed.wrapping_add(k as u64));
            evals += used;
            set(&mut trial, &cells, col);
        }
        let f_trial = problem.partial(&trial, 0..b);
        evals += 1;
        if f_trial < f_best {
            incr = trial;
            f_best = f_trial;
        }
    }

    let mut converged = false;
    let mut sweep = 0u64;
    while evals + block_evals <= budget.max_evals {
        let start = f_best;
        for k in (0..b).rev() {
            if evals + block_evals > budget.max_evals {
                break;
            }
            let head = problem.partial(&incr, 0..k);
            let cells = column(n, k);
            let (col, f_tail, used) = problem.block(
                &incr,
                &cells,
                k..b,
                block_evals,
                seed.wrapping_add(1000 + 100 * sweep + k as u64),
            );
            evals += used + 1;
            if head + f_tail <= f_best {
                set(&mut incr, &cells, col);
                f_best = head + f_tail;
            }
        }
        sweep += 1;
        if start - f_best < budget.tol {
            converged = true;
            break;
        }
    }

    let schedule = problem.schedule(&incr)?;
    let errors = pricer.errors(&schedule)?;
    let objective = sum_sq(&errors);
    if !converged {
        log::debug!("fit of amplitudes {amplitudes:?} stopped on its budget after {evals} evaluations");
    }
    Ok(Fit {
        schedule,
        objective,
        errors,
        evals,
        converged,
    })
}
