//! Hamiltonians: the geometric evolution term `c(x,t)|p|`, the corrector
//! `beta(r) h(p)`, their time-periodic combination and its average.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form velocities with known Lipschitz constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Velocity {
    Constant { value: f64 },
    /// `c(x) = (1 - |x|)_+ + 1`.
    TentPlusOne,
    /// `c(x) = min(base + slope |x|, cap)` with `slope >= 0` and `cap >= base`.
    RadialRamp { base: f64, slope: f64, cap: f64 },
    /// `c(t) = base + amplitude sin(omega t)`.
    Oscillating { base: f64, amplitude: f64, omega: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum H1Spec {
    /// `H1(x, t, p) = c(x, t) |p|`.
    Velocity { c: Velocity },
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

impl H1Spec {
    pub fn constant(value: f64) -> Self {
        H1Spec::Velocity {
            c: Velocity::Constant { value },
        }
    }

    pub fn tent_plus_one() -> Self {
        H1Spec::Velocity {
            c: Velocity::TentPlusOne,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let H1Spec::Velocity { c } = self;
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("h1.c.{name} must be finite, got {v}")))
            }
        };
        match *c {
            Velocity::Constant { value } => finite("value", value),
            Velocity::TentPlusOne => Ok(()),
            Velocity::RadialRamp { base, slope, cap } => {
                finite("base", base)?;
                finite("slope", slope)?;
                finite("cap", cap)?;
                if slope < 0.0 || cap < base {
                    return Err(Error::Config(format!(
                        "radial ramp needs slope >= 0 and cap >= base, got slope = {slope}, base = {base}, cap = {cap}"
                    )));
                }
                Ok(())
            }
            Velocity::Oscillating {
                base,
                amplitude,
                omega,
            } => {
                finite("base", base)?;
                finite("amplitude", amplitude)?;
                finite("omega", omega)
            }
        }
    }

    /// Velocity value `c(x, t)`.
    pub fn speed(&self, x: &[f64], t: f64) -> f64 {
        let H1Spec::Velocity { c } = self;
        match *c {
            Velocity::Constant { value } => value,
            Velocity::TentPlusOne => (1.0 - norm(x)).max(0.0) + 1.0,
            Velocity::RadialRamp { base, slope, cap } => (base + slope * norm(x)).min(cap),
            Velocity::Oscillating {
                base,
                amplitude,
                omega,
            } => base + amplitude * (omega * t).sin(),
        }
    }

    /// True if `c` does not depend on `x`.
    pub fn is_space_homogeneous(&self) -> bool {
        let H1Spec::Velocity { c } = self;
        matches!(c, Velocity::Constant { .. } | Velocity::Oscillating { .. })
    }

    /// Lipschitz constant of `H1` in `x` per unit `|p|`.
    pub fn l1(&self) -> f64 {
        let H1Spec::Velocity { c } = self;
        match *c {
            Velocity::Constant { .. } | Velocity::Oscillating { .. } => 0.0,
            Velocity::TentPlusOne => 1.0,
            Velocity::RadialRamp { slope, .. } => slope,
        }
    }

    /// Lipschitz constant of `H1` in `p`, i.e. the largest speed.
    pub fn l2(&self) -> f64 {
        let H1Spec::Velocity { c } = self;
        match *c {
            Velocity::Constant { value } => value.abs(),
            Velocity::TentPlusOne => 2.0,
            Velocity::RadialRamp { base, cap, .. } => base.abs().max(cap.abs()),
            Velocity::Oscillating {
                base, amplitude, ..
            } => base.abs() + amplitude.abs(),
        }
    }

    /// Time-dependent Lipschitz rate `D(t)`; the constant `L1` for every
    /// velocity in the registry.
    pub fn d_rate(&self, _t: f64) -> f64 {
        self.l1()
    }
}

pub fn eval_h1(spec: &H1Spec, x: &[f64], t: f64, p: &[f64]) -> f64 {
    spec.speed(x, t) * norm(p)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HVariant {
    /// `h(p) = 1 - |p|`.
    #[default]
    Signed,
    /// `h(p) = (1 - |p|)_+`.
    Plus,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaKind {
    /// `r / sqrt(eps0^2 + r^2)`.
    #[default]
    SmoothSign,
    /// `sign(r) r^2 / sqrt(eps0^2 + r^2)`.
    SmoothSignSquared,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorSpec {
    pub eps0: f64,
    #[serde(default)]
    pub h_variant: HVariant,
    #[serde(default)]
    pub beta_kind: BetaKind,
}

impl CorrectorSpec {
    pub fn new(eps0: f64, h_variant: HVariant, beta_kind: BetaKind) -> Result<Self> {
        let spec = CorrectorSpec {
            eps0,
            h_variant,
            beta_kind,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps0.is_finite() && self.eps0 > 0.0) {
            return Err(Error::Config(format!(
                "corrector.eps0 must be positive, got {}",
                self.eps0
            )));
        }
        Ok(())
    }

    /// Global Lipschitz constant of `beta`.
    pub fn lipschitz_beta(&self) -> f64 {
        match self.beta_kind {
            BetaKind::SmoothSign => 1.0 / self.eps0,
            // max over s of s (2 + s^2) / (1 + s^2)^{3/2}, attained at s^2 = 2
            BetaKind::SmoothSignSquared => 4.0 * 2f64.sqrt() / (3.0 * 3f64.sqrt()),
        }
    }

    /// `sup |beta(r)|` over `|r| <= u_max`.
    pub fn beta_bound(&self, u_max: f64) -> f64 {
        beta(self, u_max.abs())
    }
}

pub fn beta(spec: &CorrectorSpec, r: f64) -> f64 {
    let e = spec.eps0;
    match spec.beta_kind {
        BetaKind::SmoothSign => r / e.hypot(r),
        BetaKind::SmoothSignSquared => r * r.abs() / e.hypot(r),
    }
}

/// `h` as a function of the gradient magnitude.
pub fn h_of_norm(spec: &CorrectorSpec, g: f64) -> f64 {
    match spec.h_variant {
        HVariant::Signed => 1.0 - g,
        HVariant::Plus => (1.0 - g).max(0.0),
    }
}

pub fn h_value(spec: &CorrectorSpec, p: &[f64]) -> f64 {
    h_of_norm(spec, norm(p))
}

/// Splitting schedule: `k1` steps of size `dt_split` on `H1`, then `k2` on
/// the corrector, repeated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub k1: u32,
    pub k2: u32,
    pub dt_split: f64,
}

impl Schedule {
    pub fn new(k1: u32, k2: u32, dt_split: f64) -> Result<Self> {
        let s = Schedule { k1, k2, dt_split };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k1 == 0 || self.k2 == 0 {
            return Err(Error::Config(format!(
                "schedule needs k1, k2 >= 1, got k1 = {}, k2 = {}",
                self.k1, self.k2
            )));
        }
        if !(self.dt_split.is_finite() && self.dt_split > 0.0) {
            return Err(Error::Config(format!(
                "schedule.dt_split must be positive, got {}",
                self.dt_split
            )));
        }
        Ok(())
    }

    /// Period length `(k1 + k2) dt_split`.
    pub fn eps(&self) -> f64 {
        (self.k1 + self.k2) as f64 * self.dt_split
    }

    pub fn theta(&self) -> f64 {
        self.k2 as f64 / self.k1 as f64
    }
}

/// Time-periodic Hamiltonian: `H1(x, t/(1+theta), p)` on the first
/// `1/(1+theta)` of each unit period in `tau`, the corrector on the rest.
#[allow(clippy::too_many_arguments)]
pub fn combined_h12(
    h1: &H1Spec,
    corr: &CorrectorSpec,
    sched: &Schedule,
    x: &[f64],
    t: f64,
    tau: f64,
    r: f64,
    p: &[f64],
) -> f64 {
    let theta = sched.theta();
    let frac = tau - tau.floor();
    if frac > 0.0 && frac <= 1.0 / (1.0 + theta) {
        eval_h1(h1, x, t / (1.0 + theta), p)
    } else {
        beta(corr, r) * h_value(corr, p)
    }
}

pub fn averaged_h(h1: &H1Spec, corr: &CorrectorSpec, theta: f64, x: &[f64], t: f64, r: f64, p: &[f64]) -> f64 {
    let a = eval_h1(h1, x, t / (1.0 + theta), p);
    let b = beta(corr, r) * h_value(corr, p);
    (a + theta * b) / (1.0 + theta)
}
