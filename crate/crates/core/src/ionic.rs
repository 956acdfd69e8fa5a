//! Reduced two-variable ionic models.
//!
//! Each model maps the state `(v, w)` to the pair `(I_ion, g)`: the ionic
//! current driving `v` and the rate of change of the gate `w`.
//!
//! | model | `I_ion` | `g` |
//! |-------|---------|-----|
//! | FitzHugh-Nagumo | `v(v-0.1)(1-v) - w` | `v - 2w` |
//! | Roger-McCulloch | `v(v-0.1)(1-v) - v·w` | `v - 2w` |
//! | Aliev-Panfilov | `-k·v(v-a)(v-1) - v·w` | `ε'·(-k·v(v-1-a) - w)`, `ε' = ε₀ + μ₁w/(v+μ₂)` |
//! | Mitchell-Schaeffer | `-(w/τ_in)·v²(v-1) - v/τ_out` | `(1-w)/τ_open` if `v ≤ u_gate`, else `-w/τ_close` |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Anything that produces the reaction pair `(I_ion, g)` from `(v, w)`.
pub trait Reaction {
    fn eval(&self, v: f64, w: f64) -> Result<(f64, f64)>;
}

impl<F> Reaction for F
where
    F: Fn(f64, f64) -> (f64, f64),
{
    fn eval(&self, v: f64, w: f64) -> Result<(f64, f64)> {
        Ok(self(v, w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApParams {
    pub k: f64,
    pub a: f64,
    pub eps0: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for ApParams {
    fn default() -> Self {
        Self {
            k: 8.0,
            a: 0.15,
            eps0: 0.002,
            mu1: 0.2,
            mu2: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsParams {
    pub tau_in: f64,
    pub tau_out: f64,
    pub tau_open: f64,
    pub tau_close: f64,
    pub u_gate: f64,
}

impl Default for MsParams {
    fn default() -> Self {
        Self {
            tau_in: 0.3,
            tau_out: 6.0,
            tau_open: 120.0,
            tau_close: 150.0,
            u_gate: 0.13,
        }
    }
}

pub fn eval_fhn(v: f64, w: f64) -> (f64, f64) {
    (v * (v - 0.1) * (1.0 - v) - w, v - 2.0 * w)
}

pub fn eval_rm(v: f64, w: f64) -> (f64, f64) {
    (v * (v - 0.1) * (1.0 - v) - v * w, v - 2.0 * w)
}

pub fn eval_ap(v: f64, w: f64, p: &ApParams) -> Result<(f64, f64)> {
    let denom = v + p.mu2;
    if denom.abs() < 1e-12 {
        return Err(Error::SingularDenominator(denom));
    }
    let eps = p.eps0 + p.mu1 * w / denom;
    let i_ion = -p.k * v * (v - p.a) * (v - 1.0) - v * w;
    let g = eps * (-p.k * v * (v - 1.0 - p.a) - w);
    Ok((i_ion, g))
}

pub fn eval_ms(v: f64, w: f64, p: &MsParams) -> (f64, f64) {
    let i_ion = -(w / p.tau_in) * v * v * (v - 1.0) - v / p.tau_out;
    let g = if v <= p.u_gate {
        (1.0 - w) / p.tau_open
    } else {
        -w / p.tau_close
    };
    (i_ion, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Fhn,
    RogerMcCulloch,
    AlievPanfilov,
    MitchellSchaeffer,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Fhn,
        ModelKind::RogerMcCulloch,
        ModelKind::AlievPanfilov,
        ModelKind::MitchellSchaeffer,
    ];

    /// Short command-line name.
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Fhn => "fhn",
            ModelKind::RogerMcCulloch => "rm",
            ModelKind::AlievPanfilov => "ap",
            ModelKind::MitchellSchaeffer => "ms",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown model '{s}'; valid models: fhn, rm, ap, ms")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IonicModel {
    Fhn,
    RogerMcCulloch,
    AlievPanfilov(ApParams),
    MitchellSchaeffer(MsParams),
}

impl IonicModel {
    /// The model with its default parameters.
    pub fn new(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Fhn => IonicModel::Fhn,
            ModelKind::RogerMcCulloch => IonicModel::RogerMcCulloch,
            ModelKind::AlievPanfilov => IonicModel::AlievPanfilov(ApParams::default()),
            ModelKind::MitchellSchaeffer => IonicModel::MitchellSchaeffer(MsParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            IonicModel::Fhn => ModelKind::Fhn,
            IonicModel::RogerMcCulloch => ModelKind::RogerMcCulloch,
            IonicModel::AlievPanfilov(_) => ModelKind::AlievPanfilov,
            IonicModel::MitchellSchaeffer(_) => ModelKind::MitchellSchaeffer,
        }
    }

    /// Names of the tunable parameters, in canonical order.
    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            IonicModel::Fhn | IonicModel::RogerMcCulloch => &[],
            IonicModel::AlievPanfilov(_) => &["k", "a", "eps0", "mu1", "mu2"],
            IonicModel::MitchellSchaeffer(_) => &["tau_in", "tau_out", "tau_open", "tau_close", "u_gate"],
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        let values = match self {
            IonicModel::Fhn | IonicModel::RogerMcCulloch => vec![],
            IonicModel::AlievPanfilov(p) => vec![p.k, p.a, p.eps0, p.mu1, p.mu2],
            IonicModel::MitchellSchaeffer(p) => vec![p.tau_in, p.tau_out, p.tau_open, p.tau_close, p.u_gate],
        };
        self.param_names().iter().copied().zip(values).collect()
    }

    /// Overrides one named parameter.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Usage(format!("parameter {name} must be finite, got {value}")));
        }
        let slot = match self {
            IonicModel::AlievPanfilov(p) => match name {
                "k" => Some(&mut p.k),
                "a" => Some(&mut p.a),
                "eps0" => Some(&mut p.eps0),
                "mu1" => Some(&mut p.mu1),
                "mu2" => Some(&mut p.mu2),
                _ => None,
            },
            IonicModel::MitchellSchaeffer(p) => match name {
                "tau_in" => Some(&mut p.tau_in),
                "tau_out" => Some(&mut p.tau_out),
                "tau_open" => Some(&mut p.tau_open),
                "tau_close" => Some(&mut p.tau_close),
                "u_gate" => Some(&mut p.u_gate),
                _ => None,
            },
            IonicModel::Fhn | IonicModel::RogerMcCulloch => None,
        };
        match slot {
            Some(s) => {
                *s = value;
                Ok(())
            }
            None => Err(Error::Usage(format!(
                "model {} has no parameter '{name}' (valid: {})",
                self.kind(),
                if self.param_names().is_empty() {
                    "none".to_string()
                } else {
                    self.param_names().join(", ")
                }
            ))),
        }
    }
}

impl Reaction for IonicModel {
    fn eval(&self, v: f64, w: f64) -> Result<(f64, f64)> {
        match self {
            IonicModel::Fhn => Ok(eval_fhn(v, w)),
            IonicModel::RogerMcCulloch => Ok(eval_rm(v, w)),
            IonicModel::AlievPanfilov(p) => eval_ap(v, w, p),
            IonicModel::MitchellSchaeffer(p) => Ok(eval_ms(v, w, p)),
        }
    }
}

/// Largest finite-difference slopes of `(I_ion, g)` over a sample grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzAudit {
    pub di_dv: f64,
    pub di_dw: f64,
    pub dg_dv: f64,
    pub dg_dw: f64,
    /// Grid points skipped because the model is singular there.
    pub skipped: usize,
}

/// Central-difference slope audit on an `n × n` grid over `v ∈ [-0.5, 1.5]`,
/// `w ∈ [0, 2]`.
pub fn lipschitz_audit<R: Reaction + ?Sized>(model: &R, n: usize) -> LipschitzAudit {
    const STEP: f64 = 1e-6;
    let mut audit = LipschitzAudit {
        di_dv: 0.0,
        di_dw: 0.0,
        dg_dv: 0.0,
        dg_dw: 0.0,
        skipped: 0,
    };
    let n = n.max(2);
    for i in 0..n {
        let v = -0.5 + 2.0 * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let w = 2.0 * j as f64 / (n - 1) as f64;
            let probes = (
                model.eval(v + STEP, w),
                model.eval(v - STEP, w),
                model.eval(v, w + STEP),
                model.eval(v, w - STEP),
            );
            let (Ok(vp), Ok(vm), Ok(wp), Ok(wm)) = probes else {
                audit.skipped += 1;
                continue;
            };
            let h2 = 2.0 * STEP;
            audit.di_dv = audit.di_dv.max(((vp.0 - vm.0) / h2).abs());
            audit.dg_dv = audit.dg_dv.max(((vp.1 - vm.1) / h2).abs());
            audit.di_dw = audit.di_dw.max(((wp.0 - wm.0) / h2).abs());
            audit.dg_dw = audit.dg_dw.max(((wp.1 - wm.1) / h2).abs());
        }
    }
    audit
}
