use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_intensities, Fit, FitBudget};
use crate::error::{Error, Result};
use crate::loss_engine::IntensitySchedule;
use crate::model::ModelKind;
use crate::pricer::{InstrumentKind, PanelPricer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedySettings {
    pub model: ModelKind,
    pub max_modes: usize,
    /// Stop once the objective falls below this.
    pub f_threshold: f64,
    /// A new mode whose final cumulated value is below this ends the search.
    pub negligible: f64,
    /// Budget of each candidate fit during an amplitude scan.
    pub candidate_evals: usize,
    /// Budget for refitting the winner of a scan (and for the first mode).
    pub refine_evals: usize,
    /// Budget of the final refit once the amplitudes are settled; 0 skips it.
    pub polish_evals: usize,
    pub seed: u64,
    /// Amplitudes to scan; `None` means every `1..=M`.
    pub candidates: Option<Vec<usize>>,
    pub parallel: bool,
}

impl GreedySettings {
    pub fn new(model: ModelKind) -> Self {
        Self {
            model,
            max_modes: 7,
            f_threshold: 1e-3,
            negligible: 1e-7,
            candidate_evals: 200,
            refine_evals: 6000,
            polish_evals: 40_000,
            seed: 20061002,
            candidates: None,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub amplitude: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub step: usize,
    pub amplitudes: Vec<usize>,
    pub added: usize,
    pub objective: f64,
    pub evals: usize,
    pub candidates: Vec<CandidateScore>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub schedule: IntensitySchedule,
    pub errors: Vec<f64>,
    pub objective: f64,
    pub log: Vec<GreedyStep>,
    /// Set when some fit exhausted its budget before converging.
    pub warning: bool,
    pub evals: usize,
}

/// Rough starting increments for the single-name mode, from the index spreads:
/// a flat hazard `s / (1 - R)` on every name.
fn single_name_guess(pricer: &PanelPricer, knots: &[f64]) -> Vec<f64> {
    let m = pricer.pool.size as f64;
    let lgd = (1.0 - pricer.pool.recovery).max(0.05);
    let mut prev = 0.0;
    knots
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let spread = pricer
                .instruments()
                .iter()
                .find(|i| i.bucket == k && i.kind == InstrumentKind::Index)
                .map_or(0.01 * lgd * 1e4, |i| i.mid);
            let total = m * t * spread / 1e4 / lgd;
            let d = (total - prev).max(0.0);
            prev = prev.max(total);
            d
        })
        .collect()
}

fn insert_mode(amplitudes: &[usize], incr: &[Vec<f64>], alpha: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let pos = amplitudes.partition_point(|&a| a < alpha);
    let mut a = amplitudes.to_vec();
    a.insert(pos, alpha);
    let mut x = incr.to_vec();
    x.insert(pos, vec![0.0; incr.first().map_or(0, Vec::len)]);
    (a, x)
}

/// Greedy amplitude search: start from the single-name mode, then repeatedly
/// add the amplitude whose warm-started refit lowers the objective most.
pub fn greedy_calibrate(pricer: &PanelPricer, settings: &GreedySettings) -> Result<CalibrationResult> {
    if settings.max_modes == 0 {
        return Err(Error::validation("max_modes must be at least 1"));
    }
    if pricer.instruments().is_empty() {
        return Err(Error::validation("cannot calibrate to an empty quote panel"));
    }
    let m = pricer.pool.size;
    let knots: Vec<f64> = pricer
        .schedules()
        .iter()
        .map(|s| s.times().last().copied().unwrap_or(0.0))
        .collect();
    let model = settings.model;

    let mut amplitudes = vec![1usize];
    let init = vec![single_name_guess(pricer, &knots)];
    let mut best: Fit = fit_intensities(
        pricer,
        model,
        &amplitudes,
        &knots,
        &init,
        FitBudget::new(settings.refine_evals),
        settings.seed,
    )?;
    let b = knots.len().max(1);
    let candidate_budget = FitBudget {
        max_evals: settings.candidate_evals,
        block_evals: settings.candidate_evals / b,
        bootstrap: false,
        ..FitBudget::new(settings.candidate_evals)
    };
    let refine_budget = FitBudget {
        bootstrap: false,
        ..FitBudget::new(settings.refine_evals)
    };
    let mut warning = !best.converged;
    let mut evals = best.evals;
    let mut log = vec![GreedyStep {
        step: 1,
        amplitudes: amplitudes.clone(),
        added: 1,
        objective: best.objective,
        evals: best.evals,
        candidates: Vec::new(),
    }];
    log::info!("mode 1 (amplitude 1): f = {:.6}", best.objective);

    while amplitudes.len() < settings.max_modes && best.objective >= settings.f_threshold {
        let step = amplitudes.len() + 1;
        let pool: Vec<usize> = match &settings.candidates {
            Some(c) => c.clone(),
            None => (1..=m).collect(),
        };
        let pool: Vec<usize> = pool
            .into_iter()
            .filter(|a| (1..=m).contains(a) && !amplitudes.contains(a))
            .collect();
        if pool.is_empty() {
            break;
        }
        let incumbent = best.schedule.increments();
        let seed = settings.seed.wrapping_add(step as u64 * 7919);
        let try_one = |&alpha: &usize| -> Result<(usize, Fit)> {
            let (a, x) = insert_mode(&amplitudes, &incumbent, alpha);
            let fit = fit_intensities(
                pricer,
                model,
                &a,
                &knots,
                &x,
                candidate_budget,
                seed,
            )?;
            Ok((alpha, fit))
        };
        let fits: Vec<(usize, Fit)> = if settings.parallel {
            pool.par_iter().map(try_one).collect::<Result<_>>()?
        } else {
            pool.iter().map(try_one).collect::<Result<_>>()?
        };
        evals += fits.iter().map(|(_, f)| f.evals).sum::<usize>();
        let candidates: Vec<CandidateScore> = fits
            .iter()
            .map(|(a, f)| CandidateScore {
                amplitude: *a,
                objective: f.objective,
            })
            .collect();
        let (alpha, winner) = fits
            .into_iter()
            .min_by(|x, y| x.1.objective.total_cmp(&y.1.objective).then(x.0.cmp(&y.0)))
            .expect("candidate pool is not empty");

        let (a, _) = insert_mode(&amplitudes, &incumbent, alpha);
        let refined = fit_intensities(
            pricer,
            model,
            &a,
            &knots,
            &winner.schedule.increments(),
            refine_budget,
            seed.wrapping_add(1),
        )?;
        evals += refined.evals;
        let refined = if refined.objective <= winner.objective {
            refined
        } else {
            winner
        };

        let j = refined.schedule.position(alpha).expect("mode was inserted");
        let added_mass = refined.schedule.cumulated[j].last().copied().unwrap_or(0.0);
        log.push(GreedyStep {
            step,
            amplitudes: a.clone(),
            added: alpha,
            objective: refined.objective,
            evals: refined.evals,
            candidates,
        });
        log::info!(
            "mode {step} (amplitude {alpha}): f = {:.6}, cumulated {:.3e}",
            refined.objective,
            added_mass
        );
        if added_mass < settings.negligible || refined.objective >= best.objective {
            break;
        }
        warning |= !refined.converged;
        amplitudes = a;
        best = refined;
    }

    if settings.polish_evals > 0 {
        let polished = fit_intensities(
            pricer,
            model,
            &amplitudes,
            &knots,
            &best.schedule.increments(),
            FitBudget {
                bootstrap: false,
                ..FitBudget::new(settings.polish_evals)
            },
            settings.seed.wrapping_add(1),
        )?;
        evals += polished.evals;
        log::info!("final refit: f = {:.6}", polished.objective);
        if polished.objective <= best.objective {
            best = polished;
        }
    }

    let schedule = best.schedule.without_negligible(settings.negligible)?;
    let errors = pricer.errors(&schedule)?;
    let objective = errors.iter().map(|e| e * e).sum();
    Ok(CalibrationResult {
        schedule,
        errors,
        objective,
        log,
        warning,
        evals,
    })
}
