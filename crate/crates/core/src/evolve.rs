//! Time integration of the level-set evolution, the theta-equation, the
//! averaged equation and the alternating (iterative) scheme.
//!
//! Every solver lands exactly on its stop times: `T`, requested checkpoints
//! and, for the iterative scheme, all phase boundaries. The step that would
//! overshoot a stop is shortened.
//!
//! The theta-equation can be integrated in two ways (see [`ThetaScheme`]).
//! `Combined` takes one explicit step of `H1 + theta H2` with `dt ~ 1/theta`.
//! `Split` advances `H1` by its own CFL step `dt` and then relaxes the
//! corrector over `theta * dt` in sub-steps of the corrector CFL size. On
//! problems where the zero set has interior, the combined step runs at a
//! Courant number of order `1/theta`; the resulting numerical diffusion
//! seeds small values inside the zero plateau which the corrector then
//! amplifies at rate `theta / eps0`, and the zero set is lost. The split
//! step keeps the advection Courant number independent of `theta` and is
//! the default.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{linf_distance, Field, SolverMeta, Trajectory};
use crate::model::{CorrectorSpec, H1Spec, Schedule};
use crate::scheme::{step_unchecked, Advection, CflPolicy, Corrector, RhsOperator, StabilityBounds};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaScheme {
    #[default]
    Split,
    Combined,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub policy: CflPolicy,
    /// Record a snapshot every this many accepted steps; 0 records only stops.
    pub snap_every: usize,
    /// Extra stop times in `(0, T)`, each recorded as a snapshot.
    pub checkpoints: Vec<f64>,
    pub scheme: ThetaScheme,
    /// Overrides the CFL rule with a fixed outer step. Unchecked.
    pub fixed_dt: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            policy: CflPolicy::default(),
            snap_every: 0,
            checkpoints: Vec::new(),
            scheme: ThetaScheme::Split,
            fixed_dt: None,
        }
    }
}

impl RunOptions {
    pub fn new(policy: CflPolicy, snap_every: usize) -> Self {
        RunOptions {
            policy,
            snap_every,
            ..Default::default()
        }
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_scheme(mut self, scheme: ThetaScheme) -> Self {
        self.scheme = scheme;
        self
    }

    fn validate(&self, t_end: f64) -> Result<()> {
        self.policy.validate()?;
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::Config(format!("final time must be positive, got {t_end}")));
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::Config(format!("fixed dt must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

/// Which right-hand side is active on an interval between stops.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Phase {
    /// `w_adv H1(x, s t, .) + w_cor H2`.
    Mixed,
    /// `H1(x, s t, .)` alone.
    Evolve,
    /// `H2` alone.
    Correct,
}

struct Problem<'a> {
    h1: &'a H1Spec,
    corr: Option<&'a CorrectorSpec>,
    w_adv: f64,
    w_cor: f64,
    /// Theta entering the step-size rule of the mixed phase.
    theta_dt: f64,
    time_scale: f64,
}

const LAND_TOL: f64 = 1e-12;

fn lands(dt: f64, remaining: f64) -> bool {
    dt >= remaining * (1.0 - LAND_TOL)
}

fn check_finite(field: &Field) -> Result<()> {
    if field.values().iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup { time: field.time() })
    }
}

impl Problem<'_> {
    fn adv(&self) -> Advection<'_> {
        Advection {
            h1: self.h1,
            time_scale: self.time_scale,
        }
    }

    /// Relaxes the corrector alone for `duration`, in monotone sub-steps.
    fn relax(&self, field: Field, duration: f64, opts: &RunOptions) -> Result<Field> {
        let Some(corr) = self.corr else {
            return Ok(field);
        };
        let cor = Corrector { corr };
        let t_end = field.time() + duration;
        let mut cur = field;
        let mut rem = duration;
        while rem > 0.0 {
            let rate = cor.rate(cur.grid(), &StabilityBounds::of(&cur));
            let own = if rate > 0.0 {
                opts.policy.cfl_number / rate
            } else {
                f64::INFINITY
            };
            let dt = if lands(own, rem) { rem } else { own };
            cur = step_unchecked(&cur, &[(1.0, &cor)], dt, opts.policy.integrator);
            check_finite(&cur)?;
            rem = if dt == rem { 0.0 } else { rem - dt };
        }
        cur.set_time(t_end);
        Ok(cur)
    }

    /// One outer step of at most `remaining`; returns the new field and the
    /// step taken.
    fn advance(&self, cur: &Field, remaining: f64, phase: Phase, opts: &RunOptions) -> Result<(Field, f64)> {
        let grid = cur.grid();
        let cfl = opts.policy.cfl_number;
        let adv = self.adv();
        let pick = |rate: f64| {
            let own = opts
                .fixed_dt
                .unwrap_or(if rate > 0.0 { cfl / rate } else { f64::INFINITY });
            if lands(own, remaining) {
                remaining
            } else {
                own
            }
        };
        match phase {
            Phase::Evolve => {
                let dt = pick(adv.rate(grid, &StabilityBounds::default()));
                let next = step_unchecked(cur, &[(1.0, &adv)], dt, opts.policy.integrator);
                Ok((next, dt))
            }
            Phase::Correct => {
                let corr = self.corr.expect("corrector phase needs a corrector");
                let cor = Corrector { corr };
                let dt = pick(cor.rate(grid, &StabilityBounds::of(cur)));
                let next = step_unchecked(cur, &[(1.0, &cor)], dt, opts.policy.integrator);
                Ok((next, dt))
            }
            Phase::Mixed => {
                let active_cor = self.corr.filter(|_| self.w_cor > 0.0);
                match (opts.scheme, active_cor) {
                    (_, None) => {
                        let dt = pick(adv.rate(grid, &StabilityBounds::default()));
                        let next = step_unchecked(cur, &[(self.w_adv, &adv)], dt, opts.policy.integrator);
                        Ok((next, dt))
                    }
                    (ThetaScheme::Combined, Some(corr)) => {
                        let cor = Corrector { corr };
                        let b = StabilityBounds::of(cur);
                        let dt = pick(adv.rate(grid, &b) + self.theta_dt * cor.rate(grid, &b));
                        let parts: [(f64, &dyn RhsOperator); 2] = [(self.w_adv, &adv), (self.w_cor, &cor)];
                        let next = step_unchecked(cur, &parts, dt, opts.policy.integrator);
                        Ok((next, dt))
                    }
                    (ThetaScheme::Split, Some(corr)) => {
                        let cor = Corrector { corr };
                        let adv_rate = adv.rate(grid, &StabilityBounds::default());
                        let rate = if adv_rate > 0.0 {
                            adv_rate
                        } else {
                            self.theta_dt * cor.rate(grid, &StabilityBounds::of(cur))
                        };
                        let dt = pick(rate);
                        let mid = if adv_rate > 0.0 {
                            step_unchecked(cur, &[(self.w_adv, &adv)], dt, opts.policy.integrator)
                        } else {
                            let mut f = cur.clone();
                            f.set_time(cur.time() + dt);
                            f
                        };
                        check_finite(&mid)?;
                        let t_next = mid.time();
                        let mut mid = mid;
                        mid.set_time(cur.time());
                        let mut next = self.relax(mid, self.w_cor * dt, opts)?;
                        next.set_time(t_next);
                        Ok((next, dt))
                    }
                }
            }
        }
    }
}

/// Sorted, de-duplicated stops in `(0, t_end]` with the phase active on the
/// interval ending at each.
fn merge_stops(mut stops: Vec<(f64, Phase)>, checkpoints: &[f64], t_end: f64, phase_of: impl Fn(f64) -> Phase) -> Vec<(f64, Phase)> {
    for &c in checkpoints {
        if c > 0.0 && c < t_end {
            stops.push((c, phase_of(c)));
        }
    }
    stops.retain(|(t, _)| *t > 0.0 && *t <= t_end);
    stops.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, Phase)> = Vec::with_capacity(stops.len());
    for s in stops {
        match out.last() {
            Some(last) if (s.0 - last.0).abs() <= LAND_TOL * s.0.max(1.0) => {}
            _ => out.push(s),
        }
    }
    out
}

fn drive(problem: &Problem, u0: &Field, stops: &[(f64, Phase)], opts: &RunOptions, mut meta: SolverMeta) -> Result<Trajectory> {
    check_finite(u0)?;
    let t0 = u0.time();
    let mut snaps = vec![u0.clone()];
    let mut cur = u0.clone();
    meta.min_dt = f64::INFINITY;
    meta.max_dt = 0.0;
    for &(stop, phase) in stops {
        let stop_abs = t0 + stop;
        loop {
            let remaining = stop_abs - cur.time();
            if remaining <= LAND_TOL * stop_abs.max(1.0) {
                break;
            }
            let (mut next, dt) = problem.advance(&cur, remaining, phase, opts)?;
            let landed = dt == remaining;
            next.set_time(if landed { stop_abs } else { cur.time() + dt });
            check_finite(&next)?;
            meta.steps += 1;
            meta.min_dt = meta.min_dt.min(dt);
            meta.max_dt = meta.max_dt.max(dt);
            if landed || (opts.snap_every > 0 && meta.steps % opts.snap_every == 0) {
                snaps.push(next.clone());
            }
            cur = next;
        }
        if snaps.last().map(|f| f.time()) != Some(cur.time()) {
            // the stop coincided with the current time up to roundoff
            cur.set_time(stop_abs);
            snaps.push(cur.clone());
        }
    }
    if meta.steps == 0 {
        meta.min_dt = 0.0;
    }
    let mut traj = Trajectory::new(meta);
    for s in snaps {
        traj.push(s)?;
    }
    Ok(traj)
}

/// `w_t = H1(x, t, grad w)`.
pub fn solve_base(u0: &Field, h1: &H1Spec, t_end: f64, opts: &RunOptions) -> Result<Trajectory> {
    opts.validate(t_end)?;
    h1.validate()?;
    let problem = Problem {
        h1,
        corr: None,
        w_adv: 1.0,
        w_cor: 0.0,
        theta_dt: 0.0,
        time_scale: 1.0,
    };
    let stops = merge_stops(vec![(t_end, Phase::Mixed)], &opts.checkpoints, t_end, |_| Phase::Mixed);
    let meta = SolverMeta {
        solver: "base".into(),
        ..Default::default()
    };
    drive(&problem, u0, &stops, opts, meta)
}

/// `u_t = H1(x, t, grad u) + theta beta(u) h(grad u)`.
///
/// `theta = 0` takes exactly the steps of [`solve_base`].
pub fn solve_theta(u0: &Field, h1: &H1Spec, corr: &CorrectorSpec, theta: f64, t_end: f64, opts: &RunOptions) -> Result<Trajectory> {
    opts.validate(t_end)?;
    h1.validate()?;
    corr.validate()?;
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::Config(format!("theta must be nonnegative, got {theta}")));
    }
    let problem = Problem {
        h1,
        corr: Some(corr),
        w_adv: 1.0,
        w_cor: theta,
        theta_dt: theta,
        time_scale: 1.0,
    };
    let stops = merge_stops(vec![(t_end, Phase::Mixed)], &opts.checkpoints, t_end, |_| Phase::Mixed);
    let meta = SolverMeta {
        solver: "theta".into(),
        theta: Some(theta),
        ..Default::default()
    };
    drive(&problem, u0, &stops, opts, meta)
}

/// `u_t = (H1(x, t/(1+theta), grad u) + theta beta(u) h(grad u)) / (1+theta)`.
///
/// Uses the step-size rule of [`solve_theta`] with the same theta, which is
/// conservative by the factor `1+theta`.
pub fn solve_averaged(u0: &Field, h1: &H1Spec, corr: &CorrectorSpec, theta: f64, t_end: f64, opts: &RunOptions) -> Result<Trajectory> {
    opts.validate(t_end)?;
    h1.validate()?;
    corr.validate()?;
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::Config(format!("theta must be positive, got {theta}")));
    }
    let s = 1.0 / (1.0 + theta);
    let problem = Problem {
        h1,
        corr: Some(corr),
        w_adv: s,
        w_cor: theta * s,
        theta_dt: theta,
        time_scale: s,
    };
    let stops = merge_stops(vec![(t_end, Phase::Mixed)], &opts.checkpoints, t_end, |_| Phase::Mixed);
    let meta = SolverMeta {
        solver: "averaged".into(),
        theta: Some(theta),
        ..Default::default()
    };
    drive(&problem, u0, &stops, opts, meta)
}

/// Start and end of the evolution phase of every period up to `t_end`,
/// computed from integer step counts.
pub fn phase_times(sched: &Schedule, t_end: f64) -> Vec<(f64, f64)> {
    let per = (sched.k1 + sched.k2) as u64;
    let mut out = Vec::new();
    let mut i: u64 = 0;
    loop {
        let start = (i * per) as f64 * sched.dt_split;
        if start >= t_end * (1.0 - LAND_TOL) {
            break;
        }
        let mid = (i * per + sched.k1 as u64) as f64 * sched.dt_split;
        out.push((start, mid));
        i += 1;
    }
    out
}

/// The alternating scheme: `k1 dt_split` of `H1(x, t/(1+theta), .)` then
/// `k2 dt_split` of the corrector, repeated; the last period is cut at `T`.
/// Every phase boundary is recorded.
pub fn solve_iterative(u0: &Field, h1: &H1Spec, corr: &CorrectorSpec, sched: &Schedule, t_end: f64, opts: &RunOptions) -> Result<Trajectory> {
    opts.validate(t_end)?;
    h1.validate()?;
    corr.validate()?;
    sched.validate()?;
    let theta = sched.theta();
    let problem = Problem {
        h1,
        corr: Some(corr),
        w_adv: 1.0,
        w_cor: 1.0,
        theta_dt: 1.0,
        time_scale: 1.0 / (1.0 + theta),
    };
    let periods = phase_times(sched, t_end);
    let mut stops = Vec::with_capacity(2 * periods.len() + 1);
    for &(_, mid) in &periods {
        stops.push((mid.min(t_end), Phase::Evolve));
    }
    for (i, _) in periods.iter().enumerate() {
        let end = ((i as u64 + 1) * (sched.k1 + sched.k2) as u64) as f64 * sched.dt_split;
        stops.push((end.min(t_end), Phase::Correct));
    }
    stops.push((t_end, Phase::Correct));
    let mut stops = merge_stops(stops, &opts.checkpoints, t_end, |_| Phase::Correct);
    fix_phases(&mut stops, &periods);
    let meta = SolverMeta {
        solver: "iterative".into(),
        theta: Some(theta),
        ..Default::default()
    };
    drive(&problem, u0, &stops, opts, meta)
}

/// Assigns each stop the phase active on the interval that ends there.
fn fix_phases(stops: &mut [(f64, Phase)], periods: &[(f64, f64)]) {
    for s in stops.iter_mut() {
        let t = s.0;
        let tol = LAND_TOL * t.max(1.0);
        s.1 = periods
            .iter()
            .find(|(start, mid)| t > start + tol && t <= mid + tol)
            .map_or(Phase::Correct, |_| Phase::Evolve);
    }
}

/// `sup |u_theta(., t) - u_avg(., (1+theta) t)|` over the snapshots of
/// `traj_theta`. Each needs an averaged snapshot within one averaged step of
/// the rescaled time.
pub fn rescale_compare(traj_avg: &Trajectory, traj_theta: &Trajectory, theta: f64) -> Result<f64> {
    if traj_avg.is_empty() || traj_theta.is_empty() {
        return Err(Error::Usage("rescale_compare: empty trajectory".into()));
    }
    let tol = traj_avg.meta.max_dt.max(1e-12);
    let mut worst: f64 = 0.0;
    for f in traj_theta.snapshots() {
        let s = (1.0 + theta) * f.time();
        let g = traj_avg.at_time(s, tol).ok_or_else(|| {
            Error::Usage(format!(
                "no averaged snapshot near t = {s} (theta snapshot at {})",
                f.time()
            ))
        })?;
        worst = worst.max(linf_distance(g, f, None)?);
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReinitStats {
    pub steps: usize,
    pub last_change: f64,
    pub converged: bool,
    pub pseudo_time: f64,
}

/// Relaxes `u_t = beta(u) h(grad u)` until one step changes the field by
/// less than `tol` in the sup norm, or `max_steps` is reached.
pub fn reinitialize(u0: &Field, corr: &CorrectorSpec, tol: f64, max_steps: usize, policy: &CflPolicy) -> Result<(Field, ReinitStats)> {
    policy.validate()?;
    corr.validate()?;
    let cor = Corrector { corr };
    let mut cur = u0.clone();
    let mut stats = ReinitStats {
        steps: 0,
        last_change: f64::INFINITY,
        converged: false,
        pseudo_time: 0.0,
    };
    while stats.steps < max_steps {
        let rate = cor.rate(cur.grid(), &StabilityBounds::of(&cur));
        if rate == 0.0 {
            stats.last_change = 0.0;
            stats.converged = true;
            break;
        }
        let dt = policy.cfl_number / rate;
        let next = step_unchecked(&cur, &[(1.0, &cor)], dt, policy.integrator);
        check_finite(&next)?;
        stats.last_change = linf_distance(&cur, &next, None)?;
        stats.steps += 1;
        stats.pseudo_time += dt;
        cur = next;
        if stats.last_change < tol {
            stats.converged = true;
            break;
        }
    }
    cur.set_time(u0.time());
    Ok((cur, stats))
}
