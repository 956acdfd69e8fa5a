//! Uniform triangulations of axis-aligned rectangles.
//!
//! The rectangle is tiled with `nx × ny` square cells of side `h`; each cell is
//! split along the diagonal running from its lower-left to its upper-right
//! corner. Nodes are numbered row by row (`y` outer, `x` inner), so node
//! `(i, j)` has index `j * (nx + 1) + i`.

use std::io::Write;

use crate::error::{Error, Result};

/// Tolerance on `side / h` being an integer.
const SPACING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl Bounds {
    pub fn new(xmin: f64, ymin: f64, xmax: f64, ymax: f64) -> Self {
        Self {
            xmin,
            ymin,
            xmax,
            ymax,
        }
    }

    /// The square `[-1.25, 1.25]²` used throughout the convergence experiments.
    pub fn cardiac_square() -> Self {
        Self::new(-1.25, -1.25, 1.25, 1.25)
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self::cardiac_square()
    }
}

/// Area and constant P1 basis gradients of one triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGeometry {
    pub area: f64,
    pub gradients: [[f64; 2]; 3],
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    h: f64,
    bounds: Bounds,
    cells: (usize, usize),
}

fn cell_count(side: f64, h: f64) -> Result<usize> {
    let ratio = side / h;
    let n = ratio.round();
    if !(ratio.is_finite() && n >= 1.0 && (ratio - n).abs() <= SPACING_TOL * n.max(1.0)) {
        return Err(Error::NonDivisibleSpacing { side, h });
    }
    Ok(n as usize)
}

/// Builds the uniform triangulation of `bounds` with cell size `h`.
pub fn build_uniform_mesh(bounds: Bounds, h: f64) -> Result<TriMesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("mesh spacing must be positive, got {h}")));
    }
    if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
        return Err(Error::InvalidConfig(format!("degenerate bounds {bounds:?}")));
    }
    let nx = cell_count(bounds.width(), h)?;
    let ny = cell_count(bounds.height(), h)?;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // Pin the last row/column to the bounds so coordinates are exact there.
        let y = if j == ny { bounds.ymax } else { bounds.ymin + j as f64 * h };
        for i in 0..=nx {
            let x = if i == nx { bounds.xmax } else { bounds.xmin + i as f64 * h };
            nodes.push([x, y]);
        }
    }

    let stride = nx + 1;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let ll = j * stride + i;
            let lr = ll + 1;
            let ul = ll + stride;
            let ur = ul + 1;
            triangles.push([ll, lr, ur]);
            triangles.push([ll, ur, ul]);
        }
    }

    Ok(TriMesh {
        nodes,
        triangles,
        h,
        bounds,
        cells: (nx, ny),
    })
}

impl TriMesh {
    /// Builds a mesh from explicit nodes and triangles. Used for element-level
    /// checks; `h` is taken as the longest edge.
    pub fn from_parts(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidConfig("mesh has no nodes".into()));
        }
        let mut h: f64 = 0.0;
        for tri in &triangles {
            for &a in tri {
                if a >= nodes.len() {
                    return Err(Error::InvalidConfig(format!("triangle references node {a}")));
                }
            }
            for e in 0..3 {
                let (p, q) = (nodes[tri[e]], nodes[tri[(e + 1) % 3]]);
                h = h.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
            }
        }
        let (mut xmin, mut ymin) = (f64::INFINITY, f64::INFINITY);
        let (mut xmax, mut ymax) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &nodes {
            xmin = xmin.min(p[0]);
            xmax = xmax.max(p[0]);
            ymin = ymin.min(p[1]);
            ymax = ymax.max(p[1]);
        }
        Ok(Self {
            nodes,
            triangles,
            h,
            bounds: Bounds::new(xmin, ymin, xmax, ymax),
            cells: (0, 0),
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Grid spacing of the square cells.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Cells per side `(nx, ny)`; `(0, 0)` for meshes built with [`TriMesh::from_parts`].
    pub fn cells(&self) -> (usize, usize) {
        self.cells
    }

    /// Signed area and P1 basis gradients of triangle `t`.
    ///
    /// Panics if `t` is out of range.
    pub fn triangle_geometry(&self, t: usize) -> TriangleGeometry {
        let [a, b, c] = self.triangles[t];
        let (p0, p1, p2) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        let (x10, y10) = (p1[0] - p0[0], p1[1] - p0[1]);
        let (x20, y20) = (p2[0] - p0[0], p2[1] - p0[1]);
        let det = x10 * y20 - x20 * y10;
        let area = 0.5 * det;
        // ∇φ_i = rot90(opposite edge) / (2·area)
        let (x21, y21) = (p2[0] - p1[0], p2[1] - p1[1]);
        let gradients = [
            [-y21 / det, x21 / det],
            [y20 / det, -x20 / det],
            [-y10 / det, x10 / det],
        ];
        TriangleGeometry { area, gradients }
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (p0, p1, p2) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]
    }

    /// Index of the node at `(x, y)`, if the mesh is uniform and has one there.
    pub fn node_at(&self, x: f64, y: f64) -> Option<usize> {
        let (nx, ny) = self.cells;
        if nx == 0 {
            return self
                .nodes
                .iter()
                .position(|p| (p[0] - x).abs() <= 1e-9 * self.h && (p[1] - y).abs() <= 1e-9 * self.h);
        }
        let fi = (x - self.bounds.xmin) / self.h;
        let fj = (y - self.bounds.ymin) / self.h;
        let (i, j) = (fi.round(), fj.round());
        if (fi - i).abs() > 1e-9 || (fj - j).abs() > 1e-9 || i < 0.0 || j < 0.0 {
            return None;
        }
        let (i, j) = (i as usize, j as usize);
        (i <= nx && j <= ny).then(|| j * (nx + 1) + i)
    }

    /// Writes one `v x y` line per node and one `t i j k` line per triangle.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.nodes {
            writeln!(out, "v {} {}", p[0], p[1])?;
        }
        for t in &self.triangles {
            writeln!(out, "t {} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    /// Checks the structural invariants: valid distinct indices, positive
    /// orientation, total area and edge conformity.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let mut total = 0.0;
        let mut edges = std::collections::HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidConfig(format!("triangle {t} has bad indices {tri:?}")));
            }
            let area = self.triangle_geometry(t).area;
            if !(area > 0.0) {
                return Err(Error::InvalidConfig(format!("triangle {t} has non-positive area {area}")));
            }
            total += area;
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
            }
        }
        let expected = self.bounds.area();
        if ((total - expected) / expected).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("triangle areas sum to {total}, expected {expected}")));
        }
        let tol = 1e-12 * self.bounds.width().max(self.bounds.height());
        let on_boundary = |p: [f64; 2]| {
            (p[0] - self.bounds.xmin).abs() <= tol
                || (p[0] - self.bounds.xmax).abs() <= tol
                || (p[1] - self.bounds.ymin).abs() <= tol
                || (p[1] - self.bounds.ymax).abs() <= tol
        };
        for (&(a, b), &count) in &edges {
            match count {
                2 => {}
                1 => {
                    let (pa, pb) = (self.nodes[a], self.nodes[b]);
                    let same_side = ((pa[0] - pb[0]).abs() <= tol
                        && ((pa[0] - self.bounds.xmin).abs() <= tol || (pa[0] - self.bounds.xmax).abs() <= tol))
                        || ((pa[1] - pb[1]).abs() <= tol
                            && ((pa[1] - self.bounds.ymin).abs() <= tol || (pa[1] - self.bounds.ymax).abs() <= tol));
                    if !(on_boundary(pa) && on_boundary(pb) && same_side) {
                        return Err(Error::InvalidConfig(format!("interior edge ({a}, {b}) has one triangle")));
                    }
                }
                _ => return Err(Error::InvalidConfig(format!("edge ({a}, {b}) shared by {count} triangles"))),
            }
        }
        Ok(())
    }
}
