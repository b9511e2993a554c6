use serde::Serialize;

use super::LimitError;

/// Least-squares fit of `log(value)` against `log(ε)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Fits over entries with a positive, finite value.
pub fn fit_rate(eps: &[f64], values: &[f64]) -> Result<RateFit, LimitError> {
    fit_rate_above(eps, values, 0.0)
}

/// Fits over entries whose value exceeds `floor`; the rest count as
/// excluded.
pub fn fit_rate_above(eps: &[f64], values: &[f64], floor: f64) -> Result<RateFit, LimitError> {
    if eps.len() != values.len() {
        return Err(LimitError::InvalidConfig(format!(
            "{} epsilons but {} values",
            eps.len(),
            values.len()
        )));
    }
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(values)
        .filter(|(e, v)| **e > 0.0 && v.is_finite() && **v > floor && **v > 0.0)
        .map(|(e, v)| (e.ln(), v.ln()))
        .collect();
    let excluded = values.len() - pts.len();
    if pts.len() < 3 {
        return Err(LimitError::TooFewPoints {
            survivors: pts.len(),
            excluded,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(LimitError::InvalidConfig("all epsilons coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(RateFit {
        slope,
        intercept,
        r2,
        used: pts.len(),
        excluded,
    })
}
