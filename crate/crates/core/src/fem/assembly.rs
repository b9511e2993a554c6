use super::{check_len, element_strain, load_vector, FemError, FieldP0, FieldP1, Forcing, Mesh};
use crate::linalg::{norm2, BandCholesky, BandMatrix};
use crate::tensor::{HookeTensor, SymTensor};

/// Relative residual above which a factorized solve is reported as failed.
const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

/// Strain of the basis field `φ_a e_d` on one element.
#[inline]
fn basis_strain(g: [f64; 2], d: usize) -> SymTensor {
    if d == 0 {
        SymTensor::new2(g[0], 0.5 * g[1], 0.0)
    } else {
        SymTensor::new2(0.0, 0.5 * g[0], g[1])
    }
}

/// Stiffness of the elastic problem with `p` frozen, factorized once and
/// reused across every solve sharing the same mesh and Hooke law.
#[derive(Clone, Debug)]
pub struct ElasticOperator {
    hooke: HookeTensor,
    /// Free-equation index of each global dof `2 node + comp`.
    dof_map: Vec<Option<usize>>,
    element_stiffness: Vec<[[f64; 6]; 6]>,
    matrix: BandMatrix,
    factor: BandCholesky,
}

impl ElasticOperator {
    pub fn new(mesh: &Mesh, hooke: HookeTensor) -> Result<Self, FemError> {
        let mut next = 0;
        let dof_map: Vec<Option<usize>> = (0..2 * mesh.num_nodes())
            .map(|dof| {
                if mesh.is_dirichlet_node(dof / 2) {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        let mut element_stiffness = Vec::with_capacity(mesh.num_elements());
        let mut matrix = BandMatrix::zeros(next, 2 * mesh.node_bandwidth() + 1);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let g = &mesh.gradients[t];
            let area = mesh.areas[t];
            let strains: Vec<SymTensor> = (0..6).map(|k| basis_strain(g[k / 2], k % 2)).collect();
            let mut ke = [[0.0; 6]; 6];
            for r in 0..6 {
                let s = hooke.apply(&strains[r]);
                for c in 0..6 {
                    ke[r][c] = area * s.ddot(&strains[c]);
                }
            }
            for r in 0..6 {
                let Some(i) = dof_map[2 * tri[r / 2] + r % 2] else {
                    continue;
                };
                for c in 0..6 {
                    let Some(j) = dof_map[2 * tri[c / 2] + c % 2] else {
                        continue;
                    };
                    if j <= i {
                        matrix.add(i, j, ke[r][c])?;
                    }
                }
            }
            element_stiffness.push(ke);
        }
        let factor = matrix.cholesky()?;
        Ok(Self {
            hooke,
            dof_map,
            element_stiffness,
            matrix,
            factor,
        })
    }

    pub fn hooke(&self) -> &HookeTensor {
        &self.hooke
    }

    pub fn num_free_dofs(&self) -> usize {
        self.matrix.size()
    }

    /// Minimizer of `½∫C(Eu - p):(Eu - p) - ∫f·u - ∫_ΓN g·u` with `u`
    /// fixed to `prescribed` at Dirichlet nodes (other entries unused).
    pub fn solve(
        &self,
        mesh: &Mesh,
        p: &[SymTensor],
        prescribed: &[[f64; 2]],
        forcing: &Forcing,
    ) -> Result<FieldP1, FemError> {
        check_len("plastic strain", mesh.num_elements(), p.len())?;
        check_len("boundary displacement", mesh.num_nodes(), prescribed.len())?;
        forcing.check(mesh)?;
        let mut u: FieldP1 = (0..mesh.num_nodes())
            .map(|k| {
                if mesh.is_dirichlet_node(k) {
                    prescribed[k]
                } else {
                    [0.0; 2]
                }
            })
            .collect();

        let loads = load_vector(mesh, forcing);
        let mut rhs = vec![0.0; self.num_free_dofs()];
        for (k, l) in loads.iter().enumerate() {
            for d in 0..2 {
                if let Some(i) = self.dof_map[2 * k + d] {
                    rhs[i] += l[d];
                }
            }
        }
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let tau = self.hooke.apply(&p[t]);
            let g = &mesh.gradients[t];
            let area = mesh.areas[t];
            let ud: [f64; 6] = std::array::from_fn(|c| u[tri[c / 2]][c % 2]);
            let ke = &self.element_stiffness[t];
            for r in 0..6 {
                let Some(i) = self.dof_map[2 * tri[r / 2] + r % 2] else {
                    continue;
                };
                let a = r / 2;
                let mut v = area * (tau.get(r % 2, 0) * g[a][0] + tau.get(r % 2, 1) * g[a][1]);
                for c in 0..6 {
                    v -= ke[r][c] * ud[c];
                }
                rhs[i] += v;
            }
        }

        let z = self.factor.solve(&rhs)?;
        let kz = self.matrix.mul_vec(&z);
        let res: Vec<f64> = kz.iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let scale = norm2(&rhs).max(norm2(&kz));
        if scale > 0.0 {
            let relative = norm2(&res) / scale;
            if !(relative <= SOLVE_RESIDUAL_TOL) {
                return Err(FemError::SolveResidual { relative });
            }
        }
        for (k, uk) in u.iter_mut().enumerate() {
            for d in 0..2 {
                if let Some(i) = self.dof_map[2 * k + d] {
                    uk[d] = z[i];
                }
            }
        }
        Ok(u)
    }

    /// Elementwise `C(Eu - p)`.
    pub fn stress(&self, mesh: &Mesh, u: &[[f64; 2]], p: &[SymTensor]) -> FieldP0 {
        (0..mesh.num_elements())
            .map(|t| self.hooke.apply(&(element_strain(mesh, t, u) - p[t])))
            .collect()
    }
}

/// One-shot elastic solve; builds and factorizes the stiffness each call.
pub fn solve_elastic(
    mesh: &Mesh,
    hooke: HookeTensor,
    p: &[SymTensor],
    w_dirichlet: &[[f64; 2]],
    forcing: &Forcing,
) -> Result<FieldP1, FemError> {
    for (element, pt) in p.iter().enumerate() {
        if !pt.is_deviatoric() {
            return Err(FemError::NotDeviatoric { element });
        }
    }
    ElasticOperator::new(mesh, hooke)?.solve(mesh, p, w_dirichlet, forcing)
}
