//! Reference solutions and refinement studies.
//!
//! Two kinds of study are supported:
//!
//! * **Homogeneous**: uniform initial data and no applied current. The
//!   diffusion term then vanishes identically, so the PDE solution is the
//!   solution of the pointwise ODE `v' = I_ion(v, w)`, `w' = g(v, w)`, which
//!   [`ode_reference`] resolves with fine-step RK4.
//! * **Manufactured**: a smooth exact solution satisfying the zero-flux
//!   boundary condition, with source terms obtained by substitution
//!   ([`ManufacturedProblem`]).
//!
//! Rates between consecutive levels are `ln(e₀/e₁) / ln(h₀/h₁)` in space and
//! `ln(e₀/e₁) / ln(k₀/k₁)` in time.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{interpolate_nodal, l2_norm, DiffusionTensor};
use crate::ionic::{IonicModel, ModelKind, Reaction};
use crate::mesh::{build_uniform_mesh, Bounds, TriMesh};
use crate::solver::{Monodomain, SolverConfig, SolverState};
use crate::sparse::CgOptions;

/// Integrates `y' = f(t, y)` for a two-component state with classical RK4,
/// using the smallest uniform step count whose step does not exceed `dt_max`.
pub fn rk4<F>(mut f: F, y0: [f64; 2], t_final: f64, dt_max: f64) -> Result<[f64; 2]>
where
    F: FnMut(f64, [f64; 2]) -> Result<[f64; 2]>,
{
    if !(dt_max > 0.0) || t_final < 0.0 {
        return Err(Error::InvalidConfig(format!("bad RK4 step {dt_max} or horizon {t_final}")));
    }
    let steps = (t_final / dt_max).ceil().max(if t_final > 0.0 { 1.0 } else { 0.0 }) as usize;
    if steps == 0 {
        return Ok(y0);
    }
    let dt = t_final / steps as f64;
    let axpy = |y: [f64; 2], a: f64, k: [f64; 2]| [y[0] + a * k[0], y[1] + a * k[1]];
    let mut y = y0;
    for n in 0..steps {
        let t = n as f64 * dt;
        let k1 = f(t, y)?;
        let k2 = f(t + 0.5 * dt, axpy(y, 0.5 * dt, k1))?;
        let k3 = f(t + 0.5 * dt, axpy(y, 0.5 * dt, k2))?;
        let k4 = f(t + dt, axpy(y, dt, k3))?;
        for c in 0..2 {
            y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if !(y[0].is_finite() && y[1].is_finite()) {
            return Err(Error::NonFiniteValue(format!("ODE reference blew up at t = {}", t + dt)));
        }
    }
    Ok(y)
}

/// Solution at `t_final` of `v' = I_ion(v, w)`, `w' = g(v, w)` from `(v0, w0)`.
pub fn ode_reference<R: Reaction + ?Sized>(
    model: &R,
    v0: f64,
    w0: f64,
    t_final: f64,
    dt_ref: f64,
) -> Result<(f64, f64)> {
    let [v, w] = rk4(
        |_, [v, w]| {
            let (i, g) = model.eval(v, w)?;
            Ok([i, g])
        },
        [v0, w0],
        t_final,
        dt_ref,
    )?;
    Ok((v, w))
}

/// Exact solution `v = e⁻ᵗ cos(ω(x - xmin)) cos(ω(y - ymin))`, `w = v / 2`
/// with the matching sources for a given ionic model and constant diagonal `D`.
#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    omega: f64,
    origin: (f64, f64),
    diffusion: (f64, f64),
    model: IonicModel,
}

pub const MANUFACTURED_GATE_RATIO: f64 = 0.5;

impl ManufacturedProblem {
    /// `omega` must be a multiple of `π / side` for both sides of `bounds`,
    /// which makes the normal flux vanish on the boundary.
    pub fn new(omega: f64, bounds: Bounds, diffusion: &DiffusionTensor, model: IonicModel) -> Result<Self> {
        for side in [bounds.width(), bounds.height()] {
            let m = omega * side / PI;
            if !m.is_finite() || (m - m.round()).abs() > 1e-9 * m.abs().max(1.0) {
                return Err(Error::InvalidWavenumber(omega));
            }
        }
        let diffusion = diffusion.constant_diagonal().ok_or_else(|| {
            Error::InvalidConfig("manufactured solutions need a constant diagonal diffusion tensor".into())
        })?;
        Ok(Self {
            omega,
            origin: (bounds.xmin, bounds.ymin),
            diffusion,
            model,
        })
    }

    /// Wavenumber `m·π/side` on the default square.
    pub fn with_mode(m: u32, model: IonicModel) -> Result<Self> {
        let bounds = Bounds::cardiac_square();
        Self::new(m as f64 * PI / bounds.width(), bounds, &DiffusionTensor::default(), model)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn v_exact(&self, x: f64, y: f64, t: f64) -> f64 {
        let (x0, y0) = self.origin;
        (-t).exp() * (self.omega * (x - x0)).cos() * (self.omega * (y - y0)).cos()
    }

    pub fn w_exact(&self, x: f64, y: f64, t: f64) -> f64 {
        MANUFACTURED_GATE_RATIO * self.v_exact(x, y, t)
    }

    /// `-div(D ∇v_exact)`.
    pub fn diffusion_term(&self, x: f64, y: f64, t: f64) -> f64 {
        (self.diffusion.0 + self.diffusion.1) * self.omega * self.omega * self.v_exact(x, y, t)
    }

    /// `∂v/∂t - div(D∇v) - I_ion(v, w)`, NaN where the model is singular.
    pub fn i_app(&self, x: f64, y: f64, t: f64) -> f64 {
        let v = self.v_exact(x, y, t);
        let w = self.w_exact(x, y, t);
        match self.model.eval(v, w) {
            Ok((i_ion, _)) => -v + self.diffusion_term(x, y, t) - i_ion,
            Err(_) => f64::NAN,
        }
    }

    /// `∂w/∂t - g(v, w)`, NaN where the model is singular.
    pub fn w_source(&self, x: f64, y: f64, t: f64) -> f64 {
        let v = self.v_exact(x, y, t);
        let w = self.w_exact(x, y, t);
        match self.model.eval(v, w) {
            Ok((_, g)) => -w - g,
            Err(_) => f64::NAN,
        }
    }

    /// Solver configuration with the exact initial data and both sources.
    pub fn solver_config(&self, dt: f64, t_final: f64, cg: CgOptions) -> SolverConfig {
        let p = Arc::new(self.clone());
        let (a, b, c, d) = (p.clone(), p.clone(), p.clone(), p);
        SolverConfig {
            dt,
            t_final,
            reaction: Arc::new(self.model),
            diffusion: DiffusionTensor::Diagonal(self.diffusion.0, self.diffusion.1),
            i_app: Some(Arc::new(move |x, y, t| a.i_app(x, y, t))),
            w_source: Some(Arc::new(move |x, y, t| b.w_source(x, y, t))),
            cg,
            v0: Arc::new(move |x, y| c.v_exact(x, y, 0.0)),
            w0: Arc::new(move |x, y| d.w_exact(x, y, 0.0)),
        }
    }
}

/// Per-level rates; `None` where no rate is defined.
pub type Rates = Vec<Option<f64>>;

/// Space and time rates between consecutive levels. Entry 0 is always `None`;
/// an entry is also `None` when the corresponding spacing did not change.
pub fn compute_rates(
    errors: &[f64],
    spacings: &[f64],
    timesteps: &[f64],
) -> Result<(Rates, Rates)> {
    if errors.len() != spacings.len() || errors.len() != timesteps.len() {
        return Err(Error::DimensionMismatch {
            expected: errors.len(),
            found: if errors.len() != spacings.len() {
                spacings.len()
            } else {
                timesteps.len()
            },
        });
    }
    for &x in errors.iter().chain(spacings).chain(timesteps) {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::NonPositiveInput(x));
        }
    }
    let rate = |e: &[f64], s: &[f64], n: usize| -> Option<f64> {
        let denom = (s[n - 1] / s[n]).ln();
        (denom != 0.0).then(|| (e[n - 1] / e[n]).ln() / denom)
    };
    let mut sroc = vec![None; errors.len()];
    let mut troc = vec![None; errors.len()];
    for n in 1..errors.len() {
        sroc[n] = rate(errors, spacings, n);
        troc[n] = rate(errors, timesteps, n);
    }
    Ok((sroc, troc))
}

/// One refinement level of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub h: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub level: usize,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub l2_error: f64,
    pub sroc: Option<f64>,
    pub troc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudyMode {
    /// Uniform initial data `(v0, w0)`, zero applied current.
    Homogeneous { v0: f64, w0: f64 },
    /// Exact solution with wavenumber `m·π/side`.
    Manufactured { mode: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    /// ODE oracle (homogeneous) or exact field (manufactured).
    Exact,
    /// A finer run of the same problem, sampled at the coarse nodes.
    FineGrid(Level),
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: IonicModel,
    pub mode: StudyMode,
    pub levels: Vec<Level>,
    pub t_final: f64,
    pub diffusion: DiffusionTensor,
    pub bounds: Bounds,
    pub cg: CgOptions,
    pub reference: Reference,
    /// Run levels on separate threads.
    pub parallel: bool,
    /// When set, every step of every level is written as
    /// `level{i}_step{n}.csv` into this directory.
    pub dump_dir: Option<PathBuf>,
}

impl StudyConfig {
    /// Levels with `dt = h²`.
    pub fn h_squared_levels(hs: &[f64]) -> Vec<Level> {
        hs.iter().map(|&h| Level { h, dt: h * h }).collect()
    }

    /// Homogeneous study from `(0.2, 0.1)` with `dt = h²`, `D = I`.
    pub fn homogeneous(model: IonicModel, hs: &[f64], t_final: f64) -> Self {
        Self {
            model,
            mode: StudyMode::Homogeneous { v0: 0.2, w0: 0.1 },
            levels: Self::h_squared_levels(hs),
            t_final,
            diffusion: DiffusionTensor::default(),
            bounds: Bounds::cardiac_square(),
            cg: CgOptions::default(),
            reference: Reference::Exact,
            parallel: true,
            dump_dir: None,
        }
    }

    pub fn manufactured(model: IonicModel, levels: Vec<Level>, t_final: f64) -> Self {
        Self {
            model,
            mode: StudyMode::Manufactured { mode: 1 },
            levels,
            t_final,
            diffusion: DiffusionTensor::default(),
            bounds: Bounds::cardiac_square(),
            cg: CgOptions::default(),
            reference: Reference::Exact,
            parallel: true,
            dump_dir: None,
        }
    }

    fn solver_config(&self, level: Level) -> Result<SolverConfig> {
        match self.mode {
            StudyMode::Homogeneous { v0, w0 } => {
                let mut cfg = SolverConfig::uniform(self.model, v0, w0, level.dt, self.t_final);
                cfg.diffusion = self.diffusion.clone();
                cfg.cg = self.cg;
                Ok(cfg)
            }
            StudyMode::Manufactured { .. } => {
                Ok(self.manufactured_problem()?.solver_config(level.dt, self.t_final, self.cg))
            }
        }
    }

    fn manufactured_problem(&self) -> Result<ManufacturedProblem> {
        let StudyMode::Manufactured { mode } = self.mode else {
            return Err(Error::InvalidConfig("not a manufactured study".into()));
        };
        let omega = mode as f64 * PI / self.bounds.width();
        ManufacturedProblem::new(omega, self.bounds, &self.diffusion, self.model)
    }

    /// RK4 step for the ODE oracle: 1/100 of the finest time step, a further
    /// 10× smaller for the discontinuous Mitchell-Schaeffer gate.
    pub fn oracle_step(&self) -> f64 {
        let finest = self.levels.iter().map(|l| l.dt).fold(f64::INFINITY, f64::min);
        let factor = if self.model.kind() == ModelKind::MitchellSchaeffer { 1000.0 } else { 100.0 };
        finest / factor
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidConfig("a study needs at least one level".into()));
        }
        for l in &self.levels {
            if !(l.h > 0.0 && l.dt > 0.0) {
                return Err(Error::InvalidConfig(format!("level {l:?} must have positive h and dt")));
            }
        }
        Ok(())
    }
}

struct LevelRun {
    mesh: TriMesh,
    mass: crate::sparse::CsrMatrix,
    state: SolverState,
    steps: usize,
}

fn run_level(cfg: &StudyConfig, level: Level, tag: &str) -> Result<LevelRun> {
    let mesh = build_uniform_mesh(cfg.bounds, level.h)?;
    let solver_cfg = cfg.solver_config(level)?;
    let (problem, state) = Monodomain::init(&mesh, solver_cfg)?;
    let state = problem.advance(state, |s| match &cfg.dump_dir {
        Some(dir) => s.write_csv(BufWriter::new(File::create(dir.join(format!("{tag}_step{:06}.csv", s.n)))?)),
        None => Ok(()),
    })?;
    let mass = problem.mass().clone();
    let steps = problem.num_steps();
    drop(problem);
    Ok(LevelRun {
        mesh,
        mass,
        state,
        steps,
    })
}

/// Runs every level and measures the L2 error of `v` at the final time.
pub fn convergence_study(cfg: &StudyConfig) -> Result<Vec<ConvergenceRecord>> {
    cfg.validate()?;

    let fine = match cfg.reference {
        Reference::FineGrid(level) => Some(run_level(cfg, level, "reference")?),
        Reference::Exact => None,
    };
    let ode = match (cfg.reference, cfg.mode) {
        (Reference::Exact, StudyMode::Homogeneous { v0, w0 }) => {
            Some(ode_reference(&cfg.model, v0, w0, cfg.t_final, cfg.oracle_step())?.0)
        }
        _ => None,
    };
    let exact = match (cfg.reference, cfg.mode) {
        (Reference::Exact, StudyMode::Manufactured { .. }) => Some(cfg.manufactured_problem()?),
        _ => None,
    };

    let measure = |index: usize, level: Level| -> Result<(usize, f64)> {
        let run = run_level(cfg, level, &format!("level{index}"))?;
        let reference: Vec<f64> = if let Some(v) = ode {
            vec![v; run.mesh.num_nodes()]
        } else if let Some(problem) = &exact {
            interpolate_nodal(&run.mesh, |x, y| problem.v_exact(x, y, cfg.t_final))?
        } else {
            let fine = fine.as_ref().expect("fine-grid reference was computed");
            run.mesh
                .nodes()
                .iter()
                .map(|&[x, y]| {
                    fine.mesh.node_at(x, y).map(|i| fine.state.v[i]).ok_or_else(|| {
                        Error::InvalidConfig(format!("reference grid has no node at ({x}, {y})"))
                    })
                })
                .collect::<Result<_>>()?
        };
        let diff: Vec<f64> = run.state.v.iter().zip(&reference).map(|(a, b)| a - b).collect();
        Ok((run.steps, l2_norm(&run.mass, &diff)?))
    };

    let results: Vec<Result<(usize, f64)>> = if cfg.parallel && cfg.levels.len() > 1 {
        let measure = &measure;
        std::thread::scope(|scope| {
            let handles: Vec<_> = cfg
                .levels
                .iter()
                .enumerate()
                .map(|(i, &l)| scope.spawn(move || measure(i, l)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("refinement level panicked"))
                .collect()
        })
    } else {
        cfg.levels.iter().enumerate().map(|(i, &l)| measure(i, l)).collect()
    };

    let mut records = Vec::with_capacity(cfg.levels.len());
    for (i, (level, result)) in cfg.levels.iter().zip(results).enumerate() {
        let (steps, l2_error) = result?;
        records.push(ConvergenceRecord {
            level: i,
            h: level.h,
            dt: level.dt,
            steps,
            l2_error,
            sroc: None,
            troc: None,
        });
    }
    if records.len() >= 2 && records.iter().all(|r| r.l2_error > 0.0) {
        let errors: Vec<f64> = records.iter().map(|r| r.l2_error).collect();
        let hs: Vec<f64> = records.iter().map(|r| r.h).collect();
        let dts: Vec<f64> = records.iter().map(|r| r.dt).collect();
        let (sroc, troc) = compute_rates(&errors, &hs, &dts)?;
        for (r, (s, t)) in records.iter_mut().zip(sroc.into_iter().zip(troc)) {
            r.sroc = s;
            r.troc = t;
        }
    }
    Ok(records)
}
