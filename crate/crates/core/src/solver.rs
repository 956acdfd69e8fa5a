//! Linearized backward Euler Galerkin time stepping.
//!
//! Each step solves
//!
//! ```text
//! (M + k·A)·vⁿ = M·(vⁿ⁻¹ + k·fⁿ⁻¹)
//! wⁿ = wⁿ⁻¹ + k·gⁿ⁻¹
//! ```
//!
//! where `fⁿ⁻¹ = I_ion(vⁿ⁻¹, wⁿ⁻¹) + I_app(tₙ₋₁)` and `gⁿ⁻¹ = g(vⁿ⁻¹, wⁿ⁻¹) + w_source(tₙ₋₁)`
//! are evaluated at the nodes. The gate equation carries the consistent mass
//! matrix on both sides, so it reduces to the nodal update above.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, interpolate_nodal, DiffusionTensor};
use crate::ionic::Reaction;
use crate::mesh::TriMesh;
use crate::sparse::{cg_solve, CgOptions, CsrMatrix};

/// Scalar field of `(x, y, t)`.
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Scalar field of `(x, y)`.
pub type SpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub reaction: Arc<dyn Reaction + Send + Sync>,
    pub diffusion: DiffusionTensor,
    /// Applied current; `None` is zero.
    pub i_app: Option<SpaceTimeFn>,
    /// Extra source in the gate equation; `None` is zero.
    pub w_source: Option<SpaceTimeFn>,
    pub cg: CgOptions,
    pub v0: SpaceFn,
    pub w0: SpaceFn,
}

impl fmt::Debug for SolverConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverConfig")
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("diffusion", &self.diffusion)
            .field("i_app", &self.i_app.is_some())
            .field("w_source", &self.w_source.is_some())
            .field("cg", &self.cg)
            .finish_non_exhaustive()
    }
}

impl SolverConfig {
    /// Uniform initial data `(v0, w0)`, zero sources, `D = I`.
    pub fn uniform<R>(reaction: R, v0: f64, w0: f64, dt: f64, t_final: f64) -> Self
    where
        R: Reaction + Send + Sync + 'static,
    {
        Self {
            dt,
            t_final,
            reaction: Arc::new(reaction),
            diffusion: DiffusionTensor::default(),
            i_app: None,
            w_source: None,
            cg: CgOptions::default(),
            v0: Arc::new(move |_, _| v0),
            w0: Arc::new(move |_, _| w0),
        }
    }

    /// Number of steps `T / k`, validated to be an integer.
    pub fn num_steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidConfig(format!("final time must be positive, got {}", self.t_final)));
        }
        let ratio = self.t_final / self.dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
            return Err(Error::InvalidConfig(format!(
                "final time {} is not an integer multiple of the time step {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub t: f64,
    pub n: usize,
}

impl SolverState {
    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(&self.w).all(|x| x.is_finite())
    }

    /// Writes `node,v,w` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "node,v,w")?;
        for (i, (v, w)) in self.v.iter().zip(&self.w).enumerate() {
            writeln!(out, "{i},{v},{w}")?;
        }
        Ok(())
    }
}

/// Assembled problem for one mesh and configuration.
pub struct Monodomain<'m> {
    mesh: &'m TriMesh,
    cfg: SolverConfig,
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    system: CsrMatrix,
    steps: usize,
}

impl<'m> Monodomain<'m> {
    /// Assembles `M`, `A` and `M + k·A` and interpolates the initial data.
    pub fn init(mesh: &'m TriMesh, cfg: SolverConfig) -> Result<(Self, SolverState)> {
        let steps = cfg.num_steps()?;
        let mass = assemble_mass(mesh);
        let stiffness = assemble_stiffness(mesh, &cfg.diffusion);
        let system = mass.add_scaled(cfg.dt, &stiffness)?;
        let v = interpolate_nodal(mesh, |x, y| (cfg.v0)(x, y))?;
        let w = interpolate_nodal(mesh, |x, y| (cfg.w0)(x, y))?;
        let state = SolverState { v, w, t: 0.0, n: 0 };
        Ok((
            Self {
                mesh,
                cfg,
                mass,
                stiffness,
                system,
                steps,
            },
            state,
        ))
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// `M + k·A`.
    pub fn system(&self) -> &CsrMatrix {
        &self.system
    }

    pub fn num_steps(&self) -> usize {
        self.steps
    }

    /// Advances `state` by one time step.
    pub fn step(&self, state: &SolverState) -> Result<SolverState> {
        if state.n >= self.steps {
            return Err(Error::InvalidConfig(format!(
                "state is already at the final step {}",
                self.steps
            )));
        }
        let k = self.cfg.dt;
        let t_prev = state.t;
        let nodes = self.mesh.nodes();
        let mut rhs_nodal = Vec::with_capacity(nodes.len());
        let mut w_next = Vec::with_capacity(nodes.len());
        for (i, &[x, y]) in nodes.iter().enumerate() {
            let (v, w) = (state.v[i], state.w[i]);
            let (mut f, mut g) = self.cfg.reaction.eval(v, w)?;
            if let Some(src) = &self.cfg.i_app {
                f += src(x, y, t_prev);
            }
            if let Some(src) = &self.cfg.w_source {
                g += src(x, y, t_prev);
            }
            rhs_nodal.push(v + k * f);
            w_next.push(w + k * g);
        }
        let rhs = self.mass.spmv(&rhs_nodal)?;
        // The reaction-only update is the initial guess; it is exact when A·v = 0.
        let sol = cg_solve(&self.system, &rhs, &rhs_nodal, &self.cfg.cg).map_err(|e| match e {
            Error::NoConvergence { iterations, residual } => Error::StepNoConvergence {
                step: state.n + 1,
                iterations,
                residual,
            },
            other => other,
        })?;
        let n = state.n + 1;
        let next = SolverState {
            v: sol.x,
            w: w_next,
            t: n as f64 * k,
            n,
        };
        if !next.is_finite() {
            return Err(Error::NonFiniteState { step: n });
        }
        Ok(next)
    }

    /// Steps from `state` to the final time, calling `observe` after every step.
    pub fn advance<F>(&self, mut state: SolverState, mut observe: F) -> Result<SolverState>
    where
        F: FnMut(&SolverState) -> Result<()>,
    {
        while state.n < self.steps {
            state = self.step(&state)?;
            observe(&state)?;
        }
        Ok(state)
    }
}

/// Runs `cfg` on `mesh` to the final time.
pub fn run(mesh: &TriMesh, cfg: SolverConfig) -> Result<SolverState> {
    let (problem, state) = Monodomain::init(mesh, cfg)?;
    problem.advance(state, |_| Ok(()))
}
