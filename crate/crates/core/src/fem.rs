//! P1 Galerkin matrices, nodal interpolation and the discrete L2 norm.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::sparse::CsrMatrix;

type TensorFn = dyn Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync;

/// Conductivity tensor `D(x, y)`, a symmetric 2×2 matrix field.
#[derive(Clone)]
pub enum DiffusionTensor {
    /// `σ·I`
    Scalar(f64),
    /// `diag(dx, dy)`
    Diagonal(f64, f64),
    Field(Arc<TensorFn>),
}

impl fmt::Debug for DiffusionTensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffusionTensor::Scalar(s) => write!(f, "Scalar({s})"),
            DiffusionTensor::Diagonal(a, b) => write!(f, "Diagonal({a}, {b})"),
            DiffusionTensor::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl Default for DiffusionTensor {
    fn default() -> Self {
        DiffusionTensor::Scalar(1.0)
    }
}

impl DiffusionTensor {
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync + 'static,
    {
        DiffusionTensor::Field(Arc::new(f))
    }

    pub fn at(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        match self {
            DiffusionTensor::Scalar(s) => [[*s, 0.0], [0.0, *s]],
            DiffusionTensor::Diagonal(a, b) => [[*a, 0.0], [0.0, *b]],
            DiffusionTensor::Field(f) => f(x, y),
        }
    }

    /// The constant diagonal `(dx, dy)`, if `D` has that form.
    pub fn constant_diagonal(&self) -> Option<(f64, f64)> {
        match self {
            DiffusionTensor::Scalar(s) => Some((*s, *s)),
            DiffusionTensor::Diagonal(a, b) => Some((*a, *b)),
            DiffusionTensor::Field(_) => None,
        }
    }

    /// Samples `D` at every triangle centroid of `mesh` and returns the smallest
    /// eigenvalue seen. Fails if any sample is asymmetric beyond 1e-14, non-finite,
    /// or has an eigenvalue below `alpha`.
    pub fn check_ellipticity(&self, mesh: &TriMesh, alpha: f64) -> Result<f64> {
        let mut smallest = f64::INFINITY;
        for t in 0..mesh.num_triangles() {
            let [x, y] = mesh.centroid(t);
            let d = self.at(x, y);
            if d.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue(format!("diffusion tensor at ({x}, {y})")));
            }
            if (d[0][1] - d[1][0]).abs() > 1e-14 {
                return Err(Error::InvalidConfig(format!("diffusion tensor not symmetric at ({x}, {y})")));
            }
            let mean = 0.5 * (d[0][0] + d[1][1]);
            let half_gap = (0.25 * (d[0][0] - d[1][1]).powi(2) + d[0][1] * d[0][1]).sqrt();
            let low = mean - half_gap;
            if low < alpha {
                return Err(Error::InvalidConfig(format!(
                    "diffusion tensor eigenvalue {low} below {alpha} at ({x}, {y})"
                )));
            }
            smallest = smallest.min(low);
        }
        Ok(smallest)
    }
}

/// Element mass matrix `(area/12)·[[2,1,1],[1,2,1],[1,1,2]]`.
pub fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// Element stiffness `area · ∇φᵢᵀ D ∇φⱼ` for a constant tensor `d`.
#[allow(clippy::needless_range_loop)]
pub fn local_stiffness(area: f64, gradients: &[[f64; 2]; 3], d: &[[f64; 2]; 2]) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        let dg = [
            d[0][0] * gradients[i][0] + d[0][1] * gradients[i][1],
            d[1][0] * gradients[i][0] + d[1][1] * gradients[i][1],
        ];
        for j in 0..3 {
            k[i][j] = area * (dg[0] * gradients[j][0] + dg[1] * gradients[j][1]);
        }
    }
    // Symmetrize so that A[i,j] and A[j,i] come from identical arithmetic.
    for i in 0..3 {
        for j in (i + 1)..3 {
            k[j][i] = k[i][j];
        }
    }
    k
}

fn assemble<F>(mesh: &TriMesh, mut local: F) -> CsrMatrix
where
    F: FnMut(usize) -> [[f64; 3]; 3],
{
    let n = mesh.num_nodes();
    let mut entries = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let k = local(t);
        for a in 0..3 {
            for b in 0..3 {
                entries.push((tri[a], tri[b], k[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &entries).expect("triangle indices are valid node indices")
}

/// Consistent P1 mass matrix `M[i,j] = (φᵢ, φⱼ)`.
pub fn assemble_mass(mesh: &TriMesh) -> CsrMatrix {
    assemble(mesh, |t| local_mass(mesh.triangle_geometry(t).area))
}

/// P1 stiffness matrix `A[i,j] = (D∇φᵢ, ∇φⱼ)` with `D` sampled at triangle centroids.
pub fn assemble_stiffness(mesh: &TriMesh, diffusion: &DiffusionTensor) -> CsrMatrix {
    assemble(mesh, |t| {
        let geo = mesh.triangle_geometry(t);
        let [x, y] = mesh.centroid(t);
        local_stiffness(geo.area, &geo.gradients, &diffusion.at(x, y))
    })
}

/// Values of `f` at the mesh nodes, in node order.
pub fn interpolate_nodal<F>(mesh: &TriMesh, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64, f64) -> f64,
{
    mesh.nodes()
        .iter()
        .map(|&[x, y]| {
            let v = f(x, y);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFiniteValue(format!("interpolant at ({x}, {y}) is {v}")))
            }
        })
        .collect()
}

/// `√(eᵀ M e)`, the L2 norm of the P1 function with nodal values `e`.
pub fn l2_norm(mass: &CsrMatrix, e: &[f64]) -> Result<f64> {
    let me = mass.spmv(e)?;
    let sq: f64 = me.iter().zip(e).map(|(a, b)| a * b).sum();
    // Rounding can push a tiny norm slightly negative.
    Ok(sq.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_mesh, Bounds};
    use approx::assert_abs_diff_eq;

    fn unit_triangle() -> TriMesh {
        TriMesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn unit_triangle_mass() {
        let m = assemble_mass(&unit_triangle()).to_dense();
        let expected = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(m[i][j], expected[i][j] / 24.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn unit_triangle_stiffness() {
        let a = assemble_stiffness(&unit_triangle(), &DiffusionTensor::Scalar(1.0)).to_dense();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(a[i][j], expected[i][j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn unit_square_stiffness_rows_sum_to_zero() {
        let mesh = build_uniform_mesh(Bounds::new(0.0, 0.0, 1.0, 1.0), 1.0).unwrap();
        let a = assemble_stiffness(&mesh, &DiffusionTensor::default());
        for s in a.spmv(&[1.0; 4]).unwrap() {
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-15);
        }
        // Lower-left/upper-right diagonal: the off-diagonal corners decouple.
        assert_eq!(a.get(1, 2), 0.0);
        assert_abs_diff_eq!(a.get(0, 0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn stiffness_is_linear_in_d() {
        let mesh = build_uniform_mesh(Bounds::cardiac_square(), 0.25).unwrap();
        let a1 = assemble_stiffness(&mesh, &DiffusionTensor::Scalar(1.0));
        let a2 = assemble_stiffness(&mesh, &DiffusionTensor::Scalar(2.0));
        for (x, y) in a1.values().iter().zip(a2.values()) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn mass_total_is_domain_area() {
        for h in [1.0 / 8.0, 1.0 / 16.0] {
            let mesh = build_uniform_mesh(Bounds::cardiac_square(), h).unwrap();
            let m = assemble_mass(&mesh);
            let total: f64 = m.values().iter().sum();
            assert_abs_diff_eq!(total, 6.25, epsilon = 1e-12);
            let ones = vec![1.0; mesh.num_nodes()];
            assert_abs_diff_eq!(l2_norm(&m, &ones).unwrap(), 2.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolation_of_coordinates() {
        let mesh = build_uniform_mesh(Bounds::cardiac_square(), 1.0 / 8.0).unwrap();
        let ones = interpolate_nodal(&mesh, |_, _| 1.0).unwrap();
        assert!(ones.iter().all(|&v| v == 1.0));
        let xs = interpolate_nodal(&mesh, |x, _| x).unwrap();
        assert_eq!(xs[0], -1.25);
        assert_eq!(*xs.last().unwrap(), 1.25);
        let err = interpolate_nodal(&mesh, |x, _| 1.0 / (x + 1.25)).unwrap_err();
        assert!(matches!(err, Error::NonFiniteValue(_)));
    }

    #[test]
    fn l2_norm_edge_cases() {
        let mesh = build_uniform_mesh(Bounds::cardiac_square(), 0.25).unwrap();
        let m = assemble_mass(&mesh);
        assert_eq!(l2_norm(&m, &vec![0.0; mesh.num_nodes()]).unwrap(), 0.0);
        assert!(matches!(l2_norm(&m, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ellipticity_check() {
        let mesh = build_uniform_mesh(Bounds::cardiac_square(), 0.25).unwrap();
        let low = DiffusionTensor::Diagonal(2.0, 0.5).check_ellipticity(&mesh, 0.1).unwrap();
        assert_abs_diff_eq!(low, 0.5, epsilon = 1e-15);
        assert!(DiffusionTensor::Scalar(0.05).check_ellipticity(&mesh, 0.1).is_err());
        let skew = DiffusionTensor::from_fn(|_, _| [[1.0, 0.1], [0.0, 1.0]]);
        assert!(skew.check_ellipticity(&mesh, 0.1).is_err());
    }
}
