use serde::{Deserialize, Serialize};

use super::EvolutionError;
use crate::fem::{strain_of, FieldP0, FieldP1, Mesh};
use crate::tensor::{HookeTensor, SymTensor, YieldSet};

/// How the Dirichlet datum enters the incremental problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// `u = w` at every Dirichlet node.
    #[default]
    Strong,
    /// Normal component pinned, tangential slip allowed at the price of
    /// boundary dissipation.
    Relaxed,
}

impl std::str::FromStr for BoundaryMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strong" => Ok(Self::Strong),
            "relaxed" => Ok(Self::Relaxed),
            _ => Err(format!(
                "unknown boundary mode {s:?} (expected strong or relaxed)"
            )),
        }
    }
}

impl std::fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Strong => "strong",
            Self::Relaxed => "relaxed",
        })
    }
}

/// Discrete state at one time: displacement, elastic and plastic strain,
/// stress.
#[derive(Clone, Debug, PartialEq)]
pub struct FEState {
    pub time: f64,
    pub u: FieldP1,
    pub e: FieldP0,
    pub p: FieldP0,
    pub sigma: FieldP0,
}

impl FEState {
    pub fn zero(mesh: &Mesh, time: f64) -> Self {
        let z = vec![SymTensor::zeros(2); mesh.num_elements()];
        Self {
            time,
            u: vec![[0.0; 2]; mesh.num_nodes()],
            e: z.clone(),
            p: z.clone(),
            sigma: z,
        }
    }

    /// State with `e = Eu - p` and `σ = C e`.
    pub fn from_displacement(
        mesh: &Mesh,
        hooke: &HookeTensor,
        time: f64,
        u: FieldP1,
        p: FieldP0,
    ) -> Result<Self, EvolutionError> {
        let eu = strain_of(&u, mesh)?;
        let e: FieldP0 = eu.iter().zip(&p).map(|(a, b)| *a - *b).collect();
        let sigma = e.iter().map(|x| hooke.apply(x)).collect();
        Ok(Self {
            time,
            u,
            e,
            p,
            sigma,
        })
    }

    pub fn sigma_dev(&self) -> impl Iterator<Item = SymTensor> + '_ {
        self.sigma.iter().map(SymTensor::dev)
    }

    pub fn max_sigma_dev(&self) -> f64 {
        self.sigma_dev().fold(0.0, |m, s| m.max(s.norm()))
    }

    /// Checks sizes, `Eu = e + p`, `tr p = 0`, `σ = C e` and `|σ_D| ≤ κ`
    /// within `tol` (relative where scale matters).
    pub fn check(
        &self,
        mesh: &Mesh,
        hooke: &HookeTensor,
        k: &YieldSet,
        tol: f64,
    ) -> Result<(), EvolutionError> {
        let ne = mesh.num_elements();
        if self.u.len() != mesh.num_nodes()
            || self.e.len() != ne
            || self.p.len() != ne
            || self.sigma.len() != ne
        {
            return Err(EvolutionError::InconsistentState(
                "field sizes do not match the mesh".into(),
            ));
        }
        let eu = strain_of(&self.u, mesh)?;
        for t in 0..ne {
            let split = (eu[t] - self.e[t] - self.p[t]).norm();
            if split > tol * (1.0 + eu[t].norm()) {
                return Err(EvolutionError::InconsistentState(format!(
                    "Eu != e + p in element {t} ({split:e})"
                )));
            }
            if !self.p[t].is_deviatoric() {
                return Err(EvolutionError::InconsistentState(format!(
                    "plastic strain not deviatoric in element {t}"
                )));
            }
            let s = hooke.apply(&self.e[t]);
            if (s - self.sigma[t]).norm() > tol * (1.0 + s.norm()) {
                return Err(EvolutionError::InconsistentState(format!(
                    "sigma != C e in element {t}"
                )));
            }
            let excess = self.sigma[t].dev().norm() - k.radius();
            if excess > tol * k.radius() {
                return Err(EvolutionError::InconsistentState(format!(
                    "deviatoric stress exceeds the yield radius by {excess:e} in element {t}"
                )));
            }
        }
        Ok(())
    }
}
