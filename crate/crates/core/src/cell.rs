//! The one-dimensional periodic cell problem `v'(tau) + lambda = H(tau)`.
//!
//! Solvability forces `lambda = int_0^1 H`, and then
//! `v(tau) = v(0) - lambda tau + int_0^tau H` is 1-periodic.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{beta, eval_h1, h_value, CorrectorSpec, H1Spec, Schedule};
use crate::oracles::integrate;

const QUAD_TOL: f64 = 1e-10;

#[derive(Clone)]
pub enum Piece {
    Constant(f64),
    /// Continuous on the closed piece interval.
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Piece::Constant(c) => write!(f, "Constant({c})"),
            Piece::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl Piece {
    fn eval(&self, tau: f64) -> f64 {
        match self {
            Piece::Constant(c) => *c,
            Piece::Function(g) => g(tau),
        }
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Piece::Constant(c) => c * (b - a),
            Piece::Function(g) => integrate(&|s| g(s), a, b, QUAD_TOL),
        }
    }
}

/// A 1-periodic function of `tau`, given on `[0, 1]` by pieces on the
/// half-open intervals `(tau_i, tau_{i+1}]`.
#[derive(Clone, Debug)]
pub struct PeriodicProfile {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

impl PeriodicProfile {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if breakpoints.len() < 2 || pieces.len() + 1 != breakpoints.len() {
            return Err(Error::Config(format!(
                "profile needs n + 1 breakpoints for n pieces, got {} and {}",
                breakpoints.len(),
                pieces.len()
            )));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::Config("profile breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("profile breakpoints must increase strictly".into()));
        }
        if pieces.iter().any(|p| matches!(p, Piece::Constant(c) if !c.is_finite())) {
            return Err(Error::Config("profile constants must be finite".into()));
        }
        Ok(PeriodicProfile { breakpoints, pieces })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![0.0, 1.0], vec![Piece::Constant(c)])
    }

    pub fn function(g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        PeriodicProfile {
            breakpoints: vec![0.0, 1.0],
            pieces: vec![Piece::Function(Arc::new(g))],
        }
    }

    /// `a` on `(0, 1/(1+theta)]`, `b` on the rest of the period.
    pub fn two_phase(a: f64, b: f64, theta: f64) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::Config(format!("theta must be positive, got {theta}")));
        }
        Self::new(
            vec![0.0, 1.0 / (1.0 + theta), 1.0],
            vec![Piece::Constant(a), Piece::Constant(b)],
        )
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let mut s = tau - tau.floor();
        if s == 0.0 {
            s = 1.0;
        }
        let i = self.breakpoints[1..]
            .iter()
            .position(|&b| s <= b)
            .unwrap_or(self.pieces.len() - 1);
        self.pieces[i].eval(s)
    }

    /// `int_0^tau H` for `tau` in `[0, 1]`.
    pub fn integral_to(&self, tau: f64) -> f64 {
        let mut acc = 0.0;
        for (i, piece) in self.pieces.iter().enumerate() {
            let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
            if tau <= a {
                break;
            }
            acc += piece.integral(a, b.min(tau));
        }
        acc
    }

    /// `int_0^1 |H|`.
    pub fn total_variation_mass(&self) -> f64 {
        self.pieces
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
                match p {
                    Piece::Constant(c) => c.abs() * (b - a),
                    Piece::Function(g) => integrate(&|s| g(s).abs(), a, b, QUAD_TOL),
                }
            })
            .sum()
    }
}

/// The effective value `lambda = int_0^1 H`.
pub fn cell_lambda(profile: &PeriodicProfile) -> f64 {
    profile.integral_to(1.0)
}

/// `v(tau) = v0 - lambda tau + int_0^tau H` for `tau` in `[0, 1]`.
pub fn cell_corrector(profile: &PeriodicProfile, v0: f64, tau: f64) -> f64 {
    let lambda = cell_lambda(profile);
    if tau >= 1.0 {
        // same operation order as lambda, so v(1) = v(0) exactly
        return v0 - lambda + profile.integral_to(1.0);
    }
    v0 - lambda * tau + profile.integral_to(tau)
}

/// The combined Hamiltonian at a fixed `(x, t, r, p)` as a function of the
/// fast variable.
pub fn freeze_h12(h1: &H1Spec, corr: &CorrectorSpec, sched: &Schedule, x: &[f64], t: f64, r: f64, p: &[f64]) -> Result<PeriodicProfile> {
    let theta = sched.theta();
    let a = eval_h1(h1, x, t / (1.0 + theta), p);
    let b = beta(corr, r) * h_value(corr, p);
    PeriodicProfile::two_phase(a, b, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{averaged_h, combined_h12, BetaKind, HVariant};
    use proptest::prelude::*;

    #[test]
    fn lambda_examples() {
        let theta = 3.0;
        let p = PeriodicProfile::two_phase(2.0, -1.0, theta).unwrap();
        assert!((cell_lambda(&p) - (2.0 - theta) / (1.0 + theta)).abs() < 1e-15);
        assert_eq!(cell_lambda(&PeriodicProfile::constant(4.5).unwrap()), 4.5);
        let s = PeriodicProfile::function(|t| (2.0 * std::f64::consts::PI * t).sin());
        assert!(cell_lambda(&s).abs() < 1e-10);
    }

    #[test]
    fn corrector_examples() {
        let theta = 1.5;
        let (a, b) = (0.7, -0.2);
        let p = PeriodicProfile::two_phase(a, b, theta).unwrap();
        assert_eq!(cell_corrector(&p, 3.0, 0.0), 3.0);
        assert_eq!(cell_corrector(&p, 3.0, 1.0), 3.0);
        let lam = cell_lambda(&p);
        let v = cell_corrector(&p, 3.0, 1.0 / (1.0 + theta));
        assert!((v - (3.0 + (a - lam) / (1.0 + theta))).abs() < 1e-14);
    }

    #[test]
    fn profile_validation() {
        assert!(PeriodicProfile::new(vec![0.0, 0.5], vec![Piece::Constant(1.0)]).is_err());
        assert!(PeriodicProfile::new(vec![0.0, 0.5, 0.5, 1.0], vec![Piece::Constant(1.0); 3]).is_err());
        assert!(PeriodicProfile::new(vec![0.0, 1.0], vec![]).is_err());
        assert!(PeriodicProfile::two_phase(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn eval_is_periodic_and_left_open() {
        let p = PeriodicProfile::two_phase(1.0, 2.0, 1.0).unwrap();
        assert_eq!(p.eval(0.5), 1.0);
        assert_eq!(p.eval(0.50001), 2.0);
        assert_eq!(p.eval(0.0), 2.0);
        assert_eq!(p.eval(1.25), 1.0);
        assert_eq!(p.eval(-0.25), 2.0);
    }

    #[test]
    fn frozen_h12_matches_combined() {
        let h1 = H1Spec::tent_plus_one();
        let c = CorrectorSpec::new(0.3, HVariant::Signed, BetaKind::SmoothSign).unwrap();
        let s = Schedule::new(2, 5, 0.01).unwrap();
        let (x, t, r, p) = ([0.4], 0.8, 0.2, [1.3]);
        let prof = freeze_h12(&h1, &c, &s, &x, t, r, &p).unwrap();
        for k in 0..100 {
            let tau = k as f64 / 100.0 + 0.003;
            assert_eq!(prof.eval(tau), combined_h12(&h1, &c, &s, &x, t, tau, r, &p));
        }
        let avg = averaged_h(&h1, &c, s.theta(), &x, t, r, &p);
        assert!((cell_lambda(&prof) - avg).abs() < 1e-12);
    }

    fn profile_strategy() -> impl Strategy<Value = PeriodicProfile> {
        prop::collection::vec((0.01..1.0f64, -5.0..5.0f64), 1..8).prop_map(|pieces| {
            let total: f64 = pieces.iter().map(|p| p.0).sum();
            let mut bps = vec![0.0];
            let mut acc = 0.0;
            for p in &pieces[..pieces.len() - 1] {
                acc += p.0 / total;
                bps.push(acc);
            }
            bps.push(1.0);
            PeriodicProfile::new(bps, pieces.iter().map(|p| Piece::Constant(p.1)).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn corrector_is_periodic(p in profile_strategy(), v0 in -10.0..10.0f64) {
            prop_assert!((cell_corrector(&p, v0, 1.0) - v0).abs() <= 1e-12);
        }

        #[test]
        fn corrector_is_bounded(p in profile_strategy(), v0 in -10.0..10.0f64, tau in 0.0..1.0f64) {
            let v = cell_corrector(&p, v0, tau);
            prop_assert!((v - v0).abs() <= 2.0 * p.total_variation_mass() + 1e-12);
        }

        #[test]
        fn two_phase_lambda_is_the_average(a in -10.0..10.0f64, b in -10.0..10.0f64, theta in 0.01..100.0f64) {
            let p = PeriodicProfile::two_phase(a, b, theta).unwrap();
            prop_assert!((cell_lambda(&p) - (a + theta * b) / (1.0 + theta)).abs() <= 1e-12);
        }
    }
}
