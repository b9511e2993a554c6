use super::{BoundaryMode, EvolutionError, FEState};
use crate::fem::{element_strain, load_vector, ElasticOperator, FemError, FieldP1, Forcing, Mesh};
use crate::tensor::{radial_return, HookeTensor, SymTensor, YieldSet};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionOptions {
    /// Inner iterations stop once the functional decreases by less than
    /// `tol (1 + |value|)`.
    pub tol: f64,
    pub max_iters: usize,
    pub mode: BoundaryMode,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 10_000,
            mode: BoundaryMode::Strong,
        }
    }
}

impl EvolutionOptions {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(EvolutionError::InvalidOptions(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(EvolutionError::InvalidOptions(
                "max_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Dirichlet node whose tangential displacement may slip in relaxed mode.
#[derive(Clone, Debug)]
struct SlipNode {
    node: usize,
    tangent: [f64; 2],
    /// `κ ℓ / √2`, `ℓ` the lumped Dirichlet boundary length at the node.
    weight: f64,
    /// Elastic stiffness along the tangent.
    stiffness: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: FEState,
    pub iterations: usize,
    /// Incremental functional before the first iteration and after each one.
    pub history: Vec<f64>,
    pub bulk_dissipation: f64,
    pub boundary_dissipation: f64,
    pub yielded_cells: usize,
}

/// Backward-Euler step solver for one mesh and Hooke law.
#[derive(Clone, Debug)]
pub struct IncrementalSolver<'m> {
    mesh: &'m Mesh,
    op: ElasticOperator,
    k: YieldSet,
    options: EvolutionOptions,
    slip: Vec<SlipNode>,
    node_elements: Vec<Vec<(usize, usize)>>,
}

struct Value {
    total: f64,
    /// Sum of magnitudes, bounds the rounding error of `total`.
    scale: f64,
}

impl<'m> IncrementalSolver<'m> {
    pub fn new(
        mesh: &'m Mesh,
        hooke: HookeTensor,
        k: YieldSet,
        options: EvolutionOptions,
    ) -> Result<Self, EvolutionError> {
        options.validate()?;
        let op = ElasticOperator::new(mesh, hooke)?;
        let mut node_elements = vec![Vec::new(); mesh.num_nodes()];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for (a, &node) in tri.iter().enumerate() {
                node_elements[node].push((t, a));
            }
        }
        let mut slip = Vec::new();
        if options.mode == BoundaryMode::Relaxed {
            let mut length = vec![0.0; mesh.num_nodes()];
            for e in mesh
                .boundary_edges
                .iter()
                .filter(|e| mesh.dirichlet_faces().contains(e.face))
            {
                length[e.nodes[0]] += 0.5 * e.length;
                length[e.nodes[1]] += 0.5 * e.length;
            }
            for node in mesh.dirichlet_nodes() {
                let faces: Vec<_> = mesh
                    .node_faces(node)
                    .iter()
                    .filter(|f| mesh.dirichlet_faces().contains(*f))
                    .collect();
                if faces.len() != 1 {
                    continue;
                }
                let nu = faces[0].normal();
                let tangent = [-nu[1], nu[0]];
                let mut stiffness = 0.0;
                for &(t, a) in &node_elements[node] {
                    let g = mesh.gradients[t][a];
                    let eps = tangent_strain(tangent, g);
                    stiffness += mesh.areas[t] * hooke.apply(&eps).ddot(&eps);
                }
                let weight = k.radius() * length[node] * std::f64::consts::FRAC_1_SQRT_2;
                slip.push(SlipNode {
                    node,
                    tangent,
                    weight,
                    stiffness,
                });
            }
        }
        Ok(Self {
            mesh,
            op,
            k,
            options,
            slip,
            node_elements,
        })
    }

    pub fn hooke(&self) -> &HookeTensor {
        self.op.hooke()
    }

    pub fn yield_set(&self) -> &YieldSet {
        &self.k
    }

    pub fn options(&self) -> &EvolutionOptions {
        &self.options
    }

    pub fn mesh(&self) -> &'m Mesh {
        self.mesh
    }

    /// Tangential slip `(u - w)·τ` at every slip node.
    fn slips(&self, u: &[[f64; 2]], w: &[[f64; 2]]) -> Vec<f64> {
        self.slip
            .iter()
            .map(|s| {
                (u[s.node][0] - w[s.node][0]) * s.tangent[0]
                    + (u[s.node][1] - w[s.node][1]) * s.tangent[1]
            })
            .collect()
    }

    /// Boundary dissipation of a slip increment, `Σ κ ℓ |Δs| / √2`.
    pub fn boundary_dissipation(
        &self,
        u_new: &[[f64; 2]],
        w_new: &[[f64; 2]],
        u_old: &[[f64; 2]],
        w_old: &[[f64; 2]],
    ) -> f64 {
        let (a, b) = (self.slips(u_new, w_new), self.slips(u_old, w_old));
        self.slip
            .iter()
            .zip(a.iter().zip(&b))
            .map(|(s, (x, y))| s.weight * (x - y).abs())
            .sum()
    }

    fn value(
        &self,
        u: &[[f64; 2]],
        p: &[SymTensor],
        p_prev: &[SymTensor],
        ds: &[f64],
        loads: &[[f64; 2]],
    ) -> Value {
        let hooke = self.op.hooke();
        let kappa = self.k.radius();
        let (mut elastic, mut diss) = (0.0, 0.0);
        for t in 0..self.mesh.num_elements() {
            let e = element_strain(self.mesh, t, u) - p[t];
            elastic += self.mesh.areas[t] * hooke.energy_density(&e);
            diss += self.mesh.areas[t] * kappa * (p[t] - p_prev[t]).norm();
        }
        let bdiss: f64 = self
            .slip
            .iter()
            .zip(ds)
            .map(|(s, d)| s.weight * d.abs())
            .sum();
        let (mut work, mut work_abs) = (0.0, 0.0);
        for (l, v) in loads.iter().zip(u) {
            let x = l[0] * v[0] + l[1] * v[1];
            work += x;
            work_abs += x.abs();
        }
        Value {
            total: elastic + diss + bdiss - work,
            scale: elastic + diss + bdiss + work_abs,
        }
    }

    /// One incremental minimization from `prev` (taken at boundary datum
    /// `w_prev`) to the loads `forcing`, `w` at `time`.
    pub fn step(
        &self,
        step: usize,
        prev: &FEState,
        w_prev: &[[f64; 2]],
        time: f64,
        forcing: &Forcing,
        w: &[[f64; 2]],
    ) -> Result<StepOutcome, EvolutionError> {
        let mesh = self.mesh;
        let fem = |source: FemError| EvolutionError::Solve { step, source };
        forcing.check(mesh).map_err(fem)?;
        crate::fem::check_len("boundary displacement", mesh.num_nodes(), w.len()).map_err(fem)?;
        crate::fem::check_len("boundary displacement", mesh.num_nodes(), w_prev.len())
            .map_err(fem)?;
        let hooke = *self.op.hooke();
        let loads = load_vector(mesh, forcing);

        let s_prev = self.slips(&prev.u, w_prev);
        let mut u: FieldP1 = prev.u.clone();
        for node in mesh.dirichlet_nodes() {
            u[node] = w[node];
        }
        for (s, sp) in self.slip.iter().zip(&s_prev) {
            u[s.node] = [
                w[s.node][0] + sp * s.tangent[0],
                w[s.node][1] + sp * s.tangent[1],
            ];
        }
        let mut p = prev.p.clone();
        let mut ds = vec![0.0; self.slip.len()];

        let first = self.value(&u, &p, &prev.p, &ds, &loads);
        let mut history = vec![first.total];
        let mut last = first;
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.options.max_iters {
            iterations += 1;
            u = self.op.solve(mesh, &p, &u, forcing).map_err(fem)?;
            if !self.slip.is_empty() {
                self.slip_sweep(&mut u, &p, w, &s_prev, &mut ds, &loads);
            }
            for t in 0..mesh.num_elements() {
                let e_dev = element_strain(mesh, t, &u).dev();
                p[t] = radial_return(&e_dev, &prev.p[t], &hooke, &self.k).plastic_strain;
            }
            let now = self.value(&u, &p, &prev.p, &ds, &loads);
            history.push(now.total);
            let increase = now.total - last.total;
            if increase > 1e-12 * (1.0 + now.scale.max(last.scale)) {
                return Err(EvolutionError::NonMonotone {
                    step,
                    iteration: iterations,
                    increase,
                });
            }
            let decrease = -increase;
            last = now;
            if decrease < self.options.tol * (1.0 + last.total.abs()) {
                converged = true;
                break;
            }
        }

        let state = FEState::from_displacement(mesh, &hooke, time, u, p).map_err(|e| match e {
            EvolutionError::Fem(source) => EvolutionError::Solve { step, source },
            other => other,
        })?;
        if !converged {
            return Err(EvolutionError::NonConvergence {
                step,
                iterations,
                history,
                last: Box::new(state),
            });
        }
        let kappa = self.k.radius();
        let mut bulk = 0.0;
        let mut yielded = 0;
        for t in 0..mesh.num_elements() {
            let dp = state.p[t] - prev.p[t];
            if dp != SymTensor::zeros(2) {
                yielded += 1;
            }
            bulk += mesh.areas[t] * kappa * dp.norm();
        }
        let boundary: f64 = self
            .slip
            .iter()
            .zip(&ds)
            .map(|(s, d)| s.weight * d.abs())
            .sum();
        Ok(StepOutcome {
            state,
            iterations,
            history,
            bulk_dissipation: bulk,
            boundary_dissipation: boundary,
            yielded_cells: yielded,
        })
    }

    /// One Gauss-Seidel pass over slip nodes; each update is the exact
    /// minimizer in that coordinate (soft threshold around the old slip).
    fn slip_sweep(
        &self,
        u: &mut FieldP1,
        p: &[SymTensor],
        w: &[[f64; 2]],
        s_prev: &[f64],
        ds: &mut [f64],
        loads: &[[f64; 2]],
    ) {
        let hooke = self.op.hooke();
        for (i, s) in self.slip.iter().enumerate() {
            let tau = s.tangent;
            let mut grad = -(loads[s.node][0] * tau[0] + loads[s.node][1] * tau[1]);
            for &(t, a) in &self.node_elements[s.node] {
                let sigma = hooke.apply(&(element_strain(self.mesh, t, u) - p[t]));
                let f = sigma.apply(&self.mesh.gradients[t][a]);
                grad += self.mesh.areas[t] * (f[0] * tau[0] + f[1] * tau[1]);
            }
            let current = s_prev[i] + ds[i];
            let target = current - grad / s.stiffness - s_prev[i];
            let shrink = s.weight / s.stiffness;
            let d = target.signum() * (target.abs() - shrink).max(0.0);
            ds[i] = d;
            let slip = s_prev[i] + d;
            u[s.node] = [w[s.node][0] + slip * tau[0], w[s.node][1] + slip * tau[1]];
        }
    }
}

fn tangent_strain(tau: [f64; 2], g: [f64; 2]) -> SymTensor {
    SymTensor::new2(
        tau[0] * g[0],
        0.5 * (tau[0] * g[1] + tau[1] * g[0]),
        tau[1] * g[1],
    )
}

/// One incremental step with a freshly assembled solver.
#[allow(clippy::too_many_arguments)]
pub fn incremental_step(
    mesh: &Mesh,
    prev: &FEState,
    w_prev: &[[f64; 2]],
    time: f64,
    forcing: &Forcing,
    w: &[[f64; 2]],
    hooke: HookeTensor,
    k: YieldSet,
    options: EvolutionOptions,
) -> Result<StepOutcome, EvolutionError> {
    IncrementalSolver::new(mesh, hooke, k, options)?.step(1, prev, w_prev, time, forcing, w)
}
