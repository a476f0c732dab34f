//! Monotone upwind discretization of the gradient-magnitude terms and the
//! explicit time steppers built on it.
//!
//! Both right-hand sides are of the form `a(x, u) * F(|grad u|)`. The Godunov
//! magnitude picks, per axis, the one-sided quotient that the motion direction
//! makes upwind:
//!
//! * `u_t = c |grad u|` with `c > 0` raises the level set function, so
//!   information travels from higher values: `speed_sign = -1`.
//! * `u_t = beta(u) (1 - |grad u|)` with `beta > 0` behaves like
//!   `u_t + beta |grad u| = beta`, information leaves the zero level:
//!   `speed_sign = +1`.
//!
//! With those choices a forward Euler step is nondecreasing in every stencil
//! value as long as `dt * rate <= 1`, where `rate` bounds the derivative of the
//! right-hand side with respect to the centre value (see [`RhsOperator::rate`]).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{one_sided_gradients, Field, Grid};
use crate::model::{beta, h_of_norm, CorrectorSpec, H1Spec, HVariant};

/// Node counts at or above this are evaluated in parallel.
const PAR_MIN_NODES: usize = 1 << 14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Euler,
    /// Heun's method, a convex combination of two Euler stages.
    #[default]
    Rk2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CflPolicy {
    #[serde(rename = "cfl")]
    pub cfl_number: f64,
    pub integrator: Integrator,
}

impl Default for CflPolicy {
    fn default() -> Self {
        CflPolicy {
            cfl_number: 0.5,
            integrator: Integrator::Rk2,
        }
    }
}

impl CflPolicy {
    pub fn new(cfl_number: f64, integrator: Integrator) -> Result<Self> {
        let p = CflPolicy {
            cfl_number,
            integrator,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn euler(cfl_number: f64) -> Self {
        CflPolicy {
            cfl_number,
            integrator: Integrator::Euler,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_number > 0.0 && self.cfl_number <= 1.0) {
            return Err(Error::Config(format!(
                "cfl must lie in (0, 1], got {}",
                self.cfl_number
            )));
        }
        Ok(())
    }
}

/// Upwind gradient magnitude from backward and forward quotients.
///
/// `speed_sign = +1`: per axis `max(max(Dm,0)^2, min(Dp,0)^2)`;
/// `speed_sign = -1`: per axis `max(min(Dm,0)^2, max(Dp,0)^2)`.
pub fn godunov_magnitude(dminus: &[f64], dplus: &[f64], speed_sign: f64) -> f64 {
    let mut s = 0.0;
    for (&m, &p) in dminus.iter().zip(dplus) {
        let a = if speed_sign >= 0.0 {
            m.max(0.0).max(-p.min(0.0))
        } else {
            (-m.min(0.0)).max(p.max(0.0))
        };
        s += a * a;
    }
    s.sqrt()
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Field-dependent quantities the monotone step size depends on.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StabilityBounds {
    /// Upper bound on the Godunov magnitude at any node, for either sign.
    pub grad_max: f64,
    pub abs_max: f64,
}

impl StabilityBounds {
    pub fn of(field: &Field) -> Self {
        let grid = field.grid();
        let dim = grid.dim();
        let mut grad_max: f64 = 0.0;
        for idx in 0..grid.len() {
            let (m, p) = one_sided_gradients(field, idx);
            let g: f64 = (0..dim)
                .map(|k| {
                    let a = m[k].abs().max(p[k].abs());
                    a * a
                })
                .sum::<f64>()
                .sqrt();
            grad_max = grad_max.max(g);
        }
        StabilityBounds {
            grad_max,
            abs_max: field.max_abs(),
        }
    }

    /// Bounds valid for every convex combination of the two fields.
    pub fn merge(self, other: StabilityBounds) -> Self {
        StabilityBounds {
            grad_max: self.grad_max.max(other.grad_max),
            abs_max: self.abs_max.max(other.abs_max),
        }
    }
}

/// A spatial operator `u -> R(u)` with a monotonicity rate.
pub trait RhsOperator: Sync {
    fn eval_node(&self, field: &Field, idx: usize, t: f64) -> f64;

    /// Bound on `-dR_i/du_i` over fields within `bounds`; an Euler step with
    /// unit weight is monotone for `dt <= 1 / rate`.
    fn rate(&self, grid: &Grid, bounds: &StabilityBounds) -> f64;
}

/// `c(x, time_scale * t) |grad u|`.
#[derive(Clone, Copy, Debug)]
pub struct Advection<'a> {
    pub h1: &'a H1Spec,
    pub time_scale: f64,
}

impl<'a> Advection<'a> {
    pub fn new(h1: &'a H1Spec) -> Self {
        Advection { h1, time_scale: 1.0 }
    }
}

impl RhsOperator for Advection<'_> {
    fn eval_node(&self, field: &Field, idx: usize, t: f64) -> f64 {
        let grid = field.grid();
        let dim = grid.dim();
        let x = grid.position(idx);
        let c = self.h1.speed(&x[..dim], self.time_scale * t);
        if c == 0.0 {
            return 0.0;
        }
        let (m, p) = one_sided_gradients(field, idx);
        c * godunov_magnitude(&m[..dim], &p[..dim], -sign(c))
    }

    fn rate(&self, grid: &Grid, _bounds: &StabilityBounds) -> f64 {
        self.h1.l2() * grid.stencil_norm()
    }
}

/// `beta(u) h(|grad u|)`.
#[derive(Clone, Copy, Debug)]
pub struct Corrector<'a> {
    pub corr: &'a CorrectorSpec,
}

impl RhsOperator for Corrector<'_> {
    fn eval_node(&self, field: &Field, idx: usize, _t: f64) -> f64 {
        let b = beta(self.corr, field.at(idx));
        if b == 0.0 {
            return 0.0;
        }
        let dim = field.grid().dim();
        let (m, p) = one_sided_gradients(field, idx);
        b * h_of_norm(self.corr, godunov_magnitude(&m[..dim], &p[..dim], sign(b)))
    }

    fn rate(&self, grid: &Grid, bounds: &StabilityBounds) -> f64 {
        let transport = self.corr.beta_bound(bounds.abs_max) * grid.stencil_norm();
        match self.corr.h_variant {
            HVariant::Plus => transport,
            HVariant::Signed => transport + self.corr.lipschitz_beta() * (bounds.grad_max - 1.0).max(0.0),
        }
    }
}

fn eval_parts(field: &Field, parts: &[(f64, &dyn RhsOperator)], t: f64) -> Vec<f64> {
    let node = |idx: usize| parts.iter().map(|(w, op)| w * op.eval_node(field, idx, t)).sum::<f64>();
    let n = field.grid().len();
    if n >= PAR_MIN_NODES {
        (0..n).into_par_iter().map(node).collect()
    } else {
        (0..n).map(node).collect()
    }
}

fn eval_one(field: &Field, op: &dyn RhsOperator, t: f64) -> Field {
    let values = eval_parts(field, &[(1.0, op)], t);
    field.with_values_unchecked(values, field.time())
}

/// Node-wise `c(x,t) |grad u|` with upwind gradient magnitude.
pub fn rhs_advection(field: &Field, h1: &H1Spec, t: f64) -> Field {
    eval_one(field, &Advection::new(h1), t)
}

/// Node-wise `beta(u) h(|grad u|)` with upwind gradient magnitude.
pub fn rhs_corrector(field: &Field, corr: &CorrectorSpec) -> Field {
    eval_one(field, &Corrector { corr }, field.time())
}

/// Largest step for which an Euler step of `sum w * R` is monotone.
pub fn admissible_dt(parts: &[(f64, &dyn RhsOperator)], grid: &Grid, bounds: &StabilityBounds) -> f64 {
    let rate: f64 = parts.iter().map(|(w, op)| w.abs() * op.rate(grid, bounds)).sum();
    if rate > 0.0 {
        1.0 / rate
    } else {
        f64::INFINITY
    }
}

/// Step size for `u_t = H1 + theta beta(u) h(grad u)`:
/// `cfl / (L2 s + theta (sup|beta| s + L_beta (g - 1)_+))` with
/// `s = sqrt(sum 1/dx_k^2)`; the gradient term only for the signed `h`.
/// In 1D this is `cfl dx / (L2 + theta sup|beta| (1 + k))` with
/// `k = L_beta dx (g - 1)_+ / sup|beta|`.
pub fn cfl_dt(
    grid: &Grid,
    h1: &H1Spec,
    corr: &CorrectorSpec,
    theta: f64,
    policy: &CflPolicy,
    bounds: &StabilityBounds,
) -> f64 {
    let adv = Advection::new(h1);
    let cor = Corrector { corr };
    policy.cfl_number * admissible_dt(&[(1.0, &adv), (theta, &cor)], grid, bounds)
}

/// One explicit step of `u_t = sum w R(u)`.
///
/// Refuses steps beyond the monotone bound for the current field.
pub fn step(field: &Field, parts: &[(f64, &dyn RhsOperator)], dt: f64, policy: &CflPolicy) -> Result<Field> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Usage(format!("step size must be positive, got {dt}")));
    }
    let limit = admissible_dt(parts, field.grid(), &StabilityBounds::of(field));
    if dt > limit * (1.0 + 1e-9) {
        return Err(Error::Usage(format!(
            "dt = {dt} exceeds the stability limit {limit} at t = {}",
            field.time()
        )));
    }
    Ok(step_unchecked(field, parts, dt, policy.integrator))
}

pub(crate) fn step_unchecked(field: &Field, parts: &[(f64, &dyn RhsOperator)], dt: f64, integrator: Integrator) -> Field {
    let t = field.time();
    let u = field.values();
    let r1 = eval_parts(field, parts, t);
    let stage1: Vec<f64> = u.iter().zip(&r1).map(|(a, r)| a + dt * r).collect();
    let values = match integrator {
        Integrator::Euler => stage1,
        Integrator::Rk2 => {
            let f1 = field.with_values_unchecked(stage1, t + dt);
            let r2 = eval_parts(&f1, parts, t + dt);
            u.iter()
                .zip(f1.values())
                .zip(&r2)
                .map(|((a, b), r)| 0.5 * a + 0.5 * (b + dt * r))
                .collect()
        }
    };
    field.with_values_unchecked(values, t + dt)
}
