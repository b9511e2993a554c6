use serde::Serialize;

use super::{LimitError, LimitField};
use crate::fem::{element_gradient, element_strain, Mesh};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportComparison {
    pub time: f64,
    pub support_cells: usize,
    /// `max |σ_D^A - σ_D^B|` where `|Ev^A| > threshold · max |∇v^A|`.
    pub support_max_diff: f64,
    pub off_support_max_diff: f64,
    /// `∫ |σ_D^A - σ_D^B| |Ev^A|`.
    pub weighted_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub threshold: f64,
    pub per_time: Vec<SupportComparison>,
    pub max_support_diff: f64,
    pub max_off_support_diff: f64,
    /// `∫₀ᵀ ∫ |σ_D^A - σ_D^B| |Ev^A|`.
    pub weighted_diff: f64,
    pub support_empty: bool,
}

pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-6;

/// Compares the deviatoric stresses of two limit fields on and off the
/// plastic support of the first one.
pub fn compare_limits(
    a: &LimitField,
    b: &LimitField,
    mesh: &Mesh,
    threshold: f64,
) -> Result<UniquenessReport, LimitError> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(LimitError::InvalidConfig(format!(
            "threshold must be non-negative, got {threshold}"
        )));
    }
    a.check_mesh(mesh)?;
    b.check_mesh(mesh)?;
    if a.times != b.times {
        return Err(LimitError::MismatchedTimes);
    }
    let mut per_time = Vec::new();
    let mut weighted_total = 0.0;
    for step in 1..a.times.len() {
        let v = a.velocity(step);
        let rates: Vec<f64> = (0..mesh.num_elements())
            .map(|t| element_strain(mesh, t, &v).norm())
            .collect();
        // Scaling by the full gradient keeps roundoff strain of a rigid
        // motion off the support.
        let scale = (0..mesh.num_elements())
            .map(|t| {
                element_gradient(mesh, t, &v)
                    .iter()
                    .flatten()
                    .map(|x| x * x)
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0_f64, f64::max);
        let cut = threshold * scale.max(rates.iter().fold(0.0_f64, |m, r| m.max(*r)));
        let mut c = SupportComparison {
            time: a.times[step],
            support_cells: 0,
            support_max_diff: 0.0,
            off_support_max_diff: 0.0,
            weighted_diff: 0.0,
        };
        for t in 0..mesh.num_elements() {
            let diff = (a.sigma[step][t].dev() - b.sigma[step][t].dev()).norm();
            if rates[t] > cut {
                c.support_cells += 1;
                c.support_max_diff = c.support_max_diff.max(diff);
            } else {
                c.off_support_max_diff = c.off_support_max_diff.max(diff);
            }
            c.weighted_diff += mesh.areas[t] * diff * rates[t];
        }
        weighted_total += (a.times[step] - a.times[step - 1]) * c.weighted_diff;
        per_time.push(c);
    }
    Ok(UniquenessReport {
        threshold,
        max_support_diff: per_time
            .iter()
            .map(|c| c.support_max_diff)
            .fold(0.0, f64::max),
        max_off_support_diff: per_time
            .iter()
            .map(|c| c.off_support_max_diff)
            .fold(0.0, f64::max),
        weighted_diff: weighted_total,
        support_empty: per_time.iter().all(|c| c.support_cells == 0),
        per_time,
    })
}
