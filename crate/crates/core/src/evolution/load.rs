use super::EvolutionError;
use crate::fem::{divergence_of, FieldP1, Forcing, Mesh};

/// Tolerance on `div w` at grid times.
pub const DIV_W_TOL: f64 = 1e-12;

/// Loads and boundary displacement on a time grid, affine in between.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadProgram {
    pub times: Vec<f64>,
    pub forcing: Vec<Forcing>,
    /// Boundary displacement `w` as a full P1 field per grid time.
    pub boundary: Vec<FieldP1>,
}

impl LoadProgram {
    /// Samples `data(t) -> (forcing, w)` at every grid time.
    pub fn sample(times: Vec<f64>, mut data: impl FnMut(f64) -> (Forcing, FieldP1)) -> Self {
        let (forcing, boundary) = times.iter().map(|&t| data(t)).unzip();
        Self {
            times,
            forcing,
            boundary,
        }
    }

    pub fn num_steps(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn max_dt(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<(), EvolutionError> {
        if self.times.is_empty() {
            return Err(EvolutionError::InvalidProgram("time grid is empty".into()));
        }
        if self.forcing.len() != self.times.len() || self.boundary.len() != self.times.len() {
            return Err(EvolutionError::InvalidProgram(
                "data length differs from time grid".into(),
            ));
        }
        if self.times.iter().any(|t| !t.is_finite()) {
            return Err(EvolutionError::InvalidProgram(
                "non-finite grid time".into(),
            ));
        }
        if let Some(k) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(EvolutionError::InvalidProgram(format!(
                "time grid not strictly increasing at index {}",
                k + 1
            )));
        }
        for (k, (f, w)) in self.forcing.iter().zip(&self.boundary).enumerate() {
            f.check(mesh)?;
            let div = divergence_of(w, mesh)?;
            if let Some(max) = div.iter().map(|d| d.abs()).reduce(f64::max) {
                if max > DIV_W_TOL {
                    return Err(EvolutionError::DivergentBoundaryData {
                        index: k,
                        max_divergence: max,
                    });
                }
            }
        }
        Ok(())
    }

    /// Affine interpolation of the data at time `t` (clamped to the grid).
    pub fn at(&self, t: f64) -> (Forcing, FieldP1) {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return (self.forcing[0].clone(), self.boundary[0].clone());
        }
        if t >= self.times[last] {
            return (self.forcing[last].clone(), self.boundary[last].clone());
        }
        let k = self.times.partition_point(|&s| s <= t).max(1);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let s = (t - t0) / (t1 - t0);
        let f = self.forcing[k - 1].combine(1.0 - s, &self.forcing[k], s);
        let w = self.boundary[k - 1]
            .iter()
            .zip(&self.boundary[k])
            .map(|(a, b)| [(1.0 - s) * a[0] + s * b[0], (1.0 - s) * a[1] + s * b[1]])
            .collect();
        (f, w)
    }
}

/// `t_k = T (k/M)^q`; `q = 1` is the uniform grid, larger `q` clusters
/// points near `t = 0`.
pub fn graded_times(horizon: f64, steps: usize, grading: f64) -> Vec<f64> {
    (0..=steps)
        .map(|k| {
            if k == steps {
                horizon
            } else {
                horizon * (k as f64 / steps as f64).powf(grading)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{interpolate, FaceSet};

    #[test]
    fn interpolates_affinely() {
        let m = Mesh::square(2, FaceSet::all()).unwrap();
        let p = LoadProgram::sample(vec![0.0, 1.0, 3.0], |t| {
            (Forcing::zeros(&m), interpolate(&m, |x| [t * x[1], 0.0]))
        });
        p.validate(&m).unwrap();
        let (_, w) = p.at(2.0);
        assert!((w[8][0] - 2.0).abs() < 1e-15);
        assert_eq!(p.at(-1.0).1, p.boundary[0]);
        assert_eq!(p.max_dt(), 2.0);
    }

    #[test]
    fn rejects_bad_programs() {
        let m = Mesh::square(2, FaceSet::all()).unwrap();
        let bad_grid = LoadProgram::sample(vec![0.0, 1.0, 1.0], |_| {
            (Forcing::zeros(&m), vec![[0.0; 2]; 9])
        });
        assert!(matches!(
            bad_grid.validate(&m),
            Err(EvolutionError::InvalidProgram(_))
        ));
        let divergent = LoadProgram::sample(vec![0.0, 1.0], |t| {
            (Forcing::zeros(&m), interpolate(&m, |x| [t * x[0], 0.0]))
        });
        assert!(matches!(
            divergent.validate(&m),
            Err(EvolutionError::DivergentBoundaryData { index: 1, .. })
        ));
    }

    #[test]
    fn graded_grid_endpoints() {
        let t = graded_times(2.0, 4, 3.0);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[4], 2.0);
        assert!((t[2] - 0.25).abs() < 1e-15);
        assert_eq!(graded_times(1.0, 2, 1.0), vec![0.0, 0.5, 1.0]);
    }
}
