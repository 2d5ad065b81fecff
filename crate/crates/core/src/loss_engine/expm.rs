//! Matrix exponential by scaling and squaring with a diagonal Padé approximant.

use nalgebra::DMatrix;

use super::generator::RateMatrix;
use crate::error::{Error, Result};

/// Degree of the diagonal Padé approximant.
pub const PADE_ORDER: usize = 8;

/// The scaled matrix is brought down to this 1-norm before the Padé step.
const SCALED_NORM: f64 = 0.5;

/// Largest negative entry that is silently clamped to zero in a transition matrix.
const CLAMP_LIMIT: f64 = 1e-12;

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `[q/q]` Padé coefficients `c_k = (2q-k)! q! / ((2q)! k! (q-k)!)`.
fn pade_coefficients(q: usize) -> Vec<f64> {
    let mut c = vec![1.0; q + 1];
    for k in 1..=q {
        c[k] = c[k - 1] * (q - k + 1) as f64 / (k * (2 * q - k + 1)) as f64;
    }
    c
}

/// `exp(A)` for a square matrix with finite entries.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::domain("matrix exponential of a non-square matrix"));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "matrix exponential of a matrix with non-finite entries".into(),
        ));
    }
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let x = a * 0.5f64.powi(squarings);

    let c = pade_coefficients(PADE_ORDER);
    let mut even = DMatrix::<f64>::identity(n, n) * c[0];
    let mut odd = DMatrix::<f64>::zeros(n, n);
    let mut power = DMatrix::<f64>::identity(n, n);
    for (k, ck) in c.iter().enumerate().skip(1) {
        power = &power * &x;
        if k % 2 == 0 {
            even += &power * *ck;
        } else {
            odd += &power * *ck;
        }
    }
    let numerator = &even + &odd;
    let denominator = &even - &odd;
    let lu = denominator.lu();
    let mut result = lu
        .solve(&numerator)
        .ok_or_else(|| Error::Numerical("singular Padé denominator".into()))?;
    for _ in 0..squarings {
        result = &result * &result;
    }
    Ok(result)
}

/// Transition matrix `exp(G)` of a generator: tiny negative round-off is
/// clamped to zero, and columns must sum to one within 1e-9.
pub fn matrix_exponential(generator: &RateMatrix) -> Result<DMatrix<f64>> {
    let mut p = expm(&generator.0)?;
    let mut worst_clamp = 0.0f64;
    for x in p.iter_mut() {
        if *x < 0.0 {
            if -*x > CLAMP_LIMIT {
                return Err(Error::Numerical(format!(
                    "transition probability {x:e} below clamp limit"
                )));
            }
            worst_clamp = worst_clamp.max(-*x);
            *x = 0.0;
        }
    }
    if worst_clamp > 0.0 {
        log::debug!("clamped negative transition entries, largest magnitude {worst_clamp:e}");
    }
    for (j, col) in p.column_iter().enumerate() {
        let s = col.sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Numerical(format!(
                "transition matrix column {j} sums to {s}"
            )));
        }
    }
    Ok(p)
}
