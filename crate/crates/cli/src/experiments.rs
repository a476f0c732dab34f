use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use levelset_core::cell::{cell_corrector, cell_lambda, PeriodicProfile};
use levelset_core::evolve::{reinitialize, solve_averaged, solve_base, solve_iterative, solve_theta};
use levelset_core::geometry::{classify_continuity, extract_interface, gradient_deviation, hausdorff_distance, signed_distance_field, snapped_sign};
use levelset_core::grid::{discrete_lipschitz, Point};
use levelset_core::scheme::Integrator;
use levelset_core::oracles::{example_bounded_speed_d, example_bounded_speed_w, example_two_bumps, hopf_lax_w};
use levelset_core::{Field, Schedule, SolverMeta, Trajectory};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Config, Experiment, InitialFn, Reference, SchemaError, Setup};

const HOPF_LAX_RESOLUTION: usize = 400;

pub struct RunOutput {
    pub label: String,
    pub param: Option<f64>,
    pub fields: Vec<Field>,
    pub meta: Option<SolverMeta>,
}

pub struct Convergence {
    pub param: &'static str,
    pub rows: Vec<(f64, f64)>,
}

/// An extra CSV artifact.
pub struct Table {
    pub file: String,
    pub header: String,
    pub rows: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Constants {
    pub l0: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub eps0: Option<f64>,
    pub theta: Vec<f64>,
    pub k1: Option<u32>,
    pub k2: Option<u32>,
    pub dt_split: Vec<f64>,
    pub dx: Option<f64>,
    pub dt: Option<f64>,
}

pub struct Outcome {
    pub runs: Vec<RunOutput>,
    pub convergence: Option<Convergence>,
    pub results: Value,
    pub constants: Constants,
    pub warnings: Vec<String>,
    pub timings: Vec<(String, f64)>,
    pub tables: Vec<Table>,
}

type RefFn = Box<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

fn reference_fn(r: Reference, u0: Option<&InitialFn>) -> Result<RefFn> {
    Ok(match r {
        Reference::TwoBumpsW => Box::new(|x, t| example_two_bumps(x, t).0),
        Reference::TwoBumpsD => Box::new(|x, t| example_two_bumps(x, t).1),
        Reference::BoundedSpeedW => Box::new(example_bounded_speed_w),
        Reference::BoundedSpeedD => Box::new(example_bounded_speed_d),
        Reference::HopfLax => {
            let f = u0
                .cloned()
                .ok_or_else(|| SchemaError {
                    path: "reference".into(),
                    message: "hopf-lax needs a closed-form initial datum".into(),
                })?;
            Box::new(move |x, t| hopf_lax_w(&*f, x, t, HOPF_LAX_RESOLUTION))
        }
    })
}

fn in_region(p: &Point, dim: usize, radius: Option<f64>) -> bool {
    radius.map_or(true, |r| p[..dim].iter().all(|a| a.abs() <= r))
}

/// Sup-norm distance between a field and a pointwise reference.
fn error_against(field: &Field, reference: &(dyn Fn(&[f64], f64) -> f64 + Sync), radius: Option<f64>) -> f64 {
    let g = field.grid();
    let dim = g.dim();
    (0..g.len())
        .into_par_iter()
        .map(|i| {
            let p = g.position(i);
            if in_region(&p, dim, radius) {
                (field.at(i) - reference(&p[..dim], field.time())).abs()
            } else {
                0.0
            }
        })
        .reduce(|| 0.0, f64::max)
}

fn error_between(a: &Field, b: &Field, radius: Option<f64>) -> f64 {
    let g = a.grid();
    (0..g.len())
        .filter(|&i| in_region(&g.position(i), g.dim(), radius))
        .map(|i| (a.at(i) - b.at(i)).abs())
        .fold(0.0, f64::max)
}

/// Smallest distance from a sign change of `u0` to the domain boundary.
pub fn front_margin(u0: &Field) -> Option<f64> {
    let g = u0.grid();
    let dim = g.dim();
    let mut margin: Option<f64> = None;
    for idx in 0..g.len() {
        let [ix, iy] = g.unravel(idx);
        let sa = snapped_sign(u0.at(idx));
        for axis in 0..dim {
            let (i, stride) = if axis == 0 { (ix, 1) } else { (iy, g.n(0)) };
            if i + 1 >= g.n(axis) {
                continue;
            }
            let sb = snapped_sign(u0.at(idx + stride));
            if sa == sb {
                continue;
            }
            let mut p = g.position(idx);
            if sa != 0 && sb == 0 {
                p[axis] += g.dx(axis);
            } else if sa != 0 {
                p[axis] += g.dx(axis) * u0.at(idx) / (u0.at(idx) - u0.at(idx + stride));
            }
            let m = (0..dim).map(|a| (p[a] - g.lo(a)).min(g.hi(a) - p[a])).fold(f64::INFINITY, f64::min);
            margin = Some(margin.map_or(m, |old| old.min(m)));
        }
    }
    margin
}

/// Two adjacent exact zeros.
fn has_fat_zero_set(u0: &Field) -> bool {
    let g = u0.grid();
    (0..g.len()).any(|idx| {
        let [ix, iy] = g.unravel(idx);
        snapped_sign(u0.at(idx)) == 0
            && ((ix + 1 < g.n(0) && snapped_sign(u0.at(idx + 1)) == 0)
                || (g.dim() == 2 && iy + 1 < g.n(1) && snapped_sign(u0.at(idx + g.n(0))) == 0))
    })
}

fn theta_run(s: &Setup, cfg: &Config, theta: f64) -> Result<Trajectory> {
    let t = cfg.time.t_end;
    Ok(if theta == 0.0 {
        solve_base(&s.u0, &cfg.h1, t, &s.opts)?
    } else {
        solve_theta(&s.u0, &cfg.h1, &s.corr, theta, t, &s.opts)?
    })
}

fn label(prefix: &str, v: f64) -> String {
    format!("{prefix}_{v}")
}

fn run_output(label: String, param: Option<f64>, tr: Trajectory) -> RunOutput {
    let meta = Some(tr.meta.clone());
    RunOutput {
        label,
        param,
        fields: tr.snapshots().to_vec(),
        meta,
    }
}

fn max_dt(runs: &[RunOutput]) -> Option<f64> {
    runs.iter().filter_map(|r| r.meta.as_ref()).map(|m| m.max_dt).reduce(f64::max)
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64()))
}

pub fn run(cfg: &Config, base_dir: &Path) -> Result<Outcome> {
    if let Experiment::Cell { a, b, theta, samples } = cfg.experiment {
        return cell(a, b, theta, samples);
    }
    let s = cfg.setup(base_dir)?;
    let mut constants = Constants {
        l0: Some(discrete_lipschitz(&s.u0)),
        l1: Some(cfg.h1.l1()),
        l2: Some(cfg.h1.l2()),
        eps0: Some(s.corr.eps0),
        dx: Some(s.grid.min_dx()),
        ..Default::default()
    };
    let mut warnings = Vec::new();
    if !matches!(cfg.experiment, Experiment::Reinit { .. }) {
        let reach = cfg.h1.l2() * cfg.time.t_end;
        match front_margin(&s.u0) {
            Some(m) if reach >= m => warnings.push(format!(
                "cone margin: fronts can travel L2 T = {reach} but the nearest sign change is {m} from the boundary"
            )),
            Some(_) => {}
            None => warnings.push("cone margin: initial datum has no sign change".into()),
        }
        let exact_shift = cfg.cfl.cfl_number == 1.0 && cfg.cfl.integrator == Integrator::Euler && s.grid.dim() == 1;
        if has_fat_zero_set(&s.u0) && !exact_shift {
            warnings.push(
                "fat zero set: steps shorter than one cell leave small positive values on zero nodes, \
                 so the zero set erodes by a node per step; only cfl = 1 Euler in 1D shifts it exactly"
                    .into(),
            );
        }
    }
    let reference = cfg.reference.map(|r| reference_fn(r, s.u0_fn.as_ref())).transpose()?;
    let radius = cfg.error_radius;
    let mut timings = Vec::new();
    let mut tables = Vec::new();
    let mut convergence = None;

    let (runs, results) = match &cfg.experiment {
        Experiment::Evolve { theta } => {
            constants.theta = vec![*theta];
            let (tr, secs) = timed(|| theta_run(&s, cfg, *theta))?;
            timings.push((label("theta", *theta), secs));
            let errors: Vec<Value> = match &reference {
                Some(r) => tr
                    .snapshots()
                    .iter()
                    .map(|f| json!({"t": f.time(), "error": error_against(f, r.as_ref(), radius)}))
                    .collect(),
                None => Vec::new(),
            };
            let results = json!({
                "steps": tr.meta.steps,
                "final_error": errors.last().map(|e| e["error"].clone()),
                "errors": errors,
            });
            (vec![run_output(label("theta", *theta), Some(*theta), tr)], results)
        }
        Experiment::ThetaSweep { thetas } => {
            constants.theta = thetas.clone();
            let (base, base_secs) = timed(|| theta_run(&s, cfg, 0.0))?;
            timings.push(("base".into(), base_secs));
            let w_final = base.last().expect("non-empty trajectory");
            let target = match &reference {
                Some(_) => None,
                None => Some(signed_distance_field(w_final).context("distance of the level-set solution")?),
            };
            let swept: Vec<(f64, Trajectory, f64)> = thetas
                .par_iter()
                .map(|&th| timed(|| theta_run(&s, cfg, th)).map(|(tr, secs)| (th, tr, secs)))
                .collect::<Result<_>>()?;
            let mut rows = Vec::new();
            let mut haus = Vec::new();
            let mut runs = vec![run_output("base".into(), Some(0.0), base.clone())];
            for (th, tr, secs) in swept {
                let last = tr.last().expect("non-empty trajectory");
                let e = match (&reference, &target) {
                    (Some(r), _) => error_against(last, r.as_ref(), radius),
                    (None, Some(d)) => error_between(last, d, radius),
                    (None, None) => unreachable!(),
                };
                let h = match (extract_interface(last), extract_interface(w_final)) {
                    (Ok(a), Ok(b)) => Some(hausdorff_distance(&a, &b)),
                    _ => None,
                };
                rows.push((th, e));
                haus.push(json!({"theta": th, "hausdorff": h}));
                timings.push((label("theta", th), secs));
                runs.push(run_output(label("theta", th), Some(th), tr));
            }
            let decreasing = rows.windows(2).all(|w| w[1].1 < w[0].1);
            let results = json!({
                "target": if reference.is_some() { "reference" } else { "distance of the level-set solution" },
                "errors": rows.iter().map(|(t, e)| json!({"theta": t, "error": e})).collect::<Vec<_>>(),
                "strictly_decreasing": decreasing,
                "interface_hausdorff": haus,
            });
            convergence = Some(Convergence { param: "theta", rows });
            (runs, results)
        }
        Experiment::Reinit { tol, max_steps, band } => {
            let ((u, stats), secs) = timed(|| Ok(reinitialize(&s.u0, &s.corr, *tol, *max_steps, &cfg.cfl)?))?;
            timings.push(("reinit".into(), secs));
            let dev = gradient_deviation(&u, *band)?;
            let d0 = signed_distance_field(&s.u0)?;
            let g = &s.grid;
            let dist_err = (0..g.len())
                .filter(|&i| d0.at(i).abs() <= *band)
                .map(|i| (u.at(i) - d0.at(i)).abs())
                .fold(0.0, f64::max);
            let results = json!({
                "steps": stats.steps,
                "converged": stats.converged,
                "last_change": stats.last_change,
                "pseudo_time": stats.pseudo_time,
                "gradient_deviation": dev,
                "band": band,
                "distance_error_in_band": dist_err,
            });
            if !stats.converged {
                warnings.push(format!("reinit: no convergence after {} steps", stats.steps));
            }
            let runs = vec![RunOutput {
                label: "reinit".into(),
                param: None,
                fields: vec![s.u0.clone(), u],
                meta: None,
            }];
            (runs, results)
        }
        Experiment::Homogenize { k1, k2, eps } => {
            constants.k1 = Some(*k1);
            constants.k2 = Some(*k2);
            let theta = *k2 as f64 / *k1 as f64;
            constants.theta = vec![theta];
            constants.dt_split = eps.iter().map(|e| e / (k1 + k2) as f64).collect();
            let t_end = cfg.time.t_end;
            let swept: Vec<(f64, Trajectory, Trajectory, f64)> = eps
                .par_iter()
                .map(|&e| {
                    timed(|| {
                        let sched = Schedule::new(*k1, *k2, e / (k1 + k2) as f64)?;
                        let it = solve_iterative(&s.u0, &cfg.h1, &s.corr, &sched, t_end, &s.opts)?;
                        let times: Vec<f64> = it.times().into_iter().filter(|&t| t > 0.0 && t < t_end).collect();
                        let opts = s.opts.clone().with_checkpoints(times);
                        let av = solve_averaged(&s.u0, &cfg.h1, &s.corr, theta, t_end, &opts)?;
                        Ok((it, av))
                    })
                    .map(|((it, av), secs)| (e, it, av, secs))
                })
                .collect::<Result<_>>()?;
            let mut rows = Vec::new();
            let mut runs = Vec::new();
            for (e, it, av, secs) in swept {
                let mut err: f64 = 0.0;
                for f in it.snapshots() {
                    let a = av
                        .at_time(f.time(), 1e-9)
                        .with_context(|| format!("averaged run lacks a snapshot at t = {}", f.time()))?;
                    err = err.max(error_between(f, a, radius));
                }
                rows.push((e, err));
                timings.push((label("eps", e), secs));
                runs.push(run_output(label("eps", e), Some(e), it));
                runs.push(run_output(label("averaged_eps", e), Some(e), av));
            }
            let results = json!({
                "theta": theta,
                "errors": rows.iter().map(|(p, e)| json!({"eps": p, "error": e})).collect::<Vec<_>>(),
            });
            convergence = Some(Convergence { param: "eps", rows });
            (runs, results)
        }
        Experiment::Distance { theta } => {
            constants.theta = vec![*theta];
            let (tr, secs) = timed(|| theta_run(&s, cfg, *theta))?;
            timings.push((label("theta", *theta), secs));
            let mut dist = Vec::new();
            let mut rows = Vec::new();
            for f in tr.snapshots() {
                let d = signed_distance_field(f)?;
                let to_distance = error_between(f, &d, radius);
                let to_reference = reference.as_ref().map(|r| error_against(&d, r.as_ref(), radius));
                rows.push(json!({"t": f.time(), "solution_vs_distance": to_distance, "distance_vs_reference": to_reference}));
                dist.push(d);
            }
            let results = json!({ "snapshots": rows });
            let runs = vec![
                run_output(label("theta", *theta), Some(*theta), tr),
                RunOutput {
                    label: "distance".into(),
                    param: Some(*theta),
                    fields: dist,
                    meta: None,
                },
            ];
            (runs, results)
        }
        Experiment::Continuity { points, .. } => {
            let (tr, secs) = timed(|| theta_run(&s, cfg, 0.0))?;
            timings.push(("base".into(), secs));
            let dim = s.grid.dim();
            let params = cfg.extinction();
            let mut rows = Vec::new();
            let mut verdicts = Vec::new();
            for (i, p) in points.iter().enumerate() {
                if p.len() != dim + 1 {
                    return Err(SchemaError {
                        path: format!("experiment.points[{i}]"),
                        message: format!("needs {} coordinates followed by a time", dim),
                    }
                    .into());
                }
                let v = classify_continuity(&tr, &p[..dim], p[dim], &params)?;
                let coords: Vec<String> = p.iter().map(|a| a.to_string()).collect();
                rows.push(format!(
                    "{},{},{},{}",
                    coords.join(","),
                    serde_json::to_value(v.verdict)?.as_str().unwrap_or_default(),
                    v.witness.len(),
                    v.n_extinction()
                ));
                verdicts.push(serde_json::to_value(&v)?);
            }
            let header = if dim == 1 { "x,t" } else { "x,y,t" };
            tables.push(Table {
                file: "verdicts.csv".into(),
                header: format!("{header},verdict,n_nearest,n_extinction"),
                rows,
            });
            let results = json!({ "verdicts": verdicts });
            (vec![run_output("base".into(), Some(0.0), tr)], results)
        }
        Experiment::Cell { .. } => unreachable!("handled above"),
    };
    constants.dt = max_dt(&runs);
    Ok(Outcome {
        runs,
        convergence,
        results,
        constants,
        warnings,
        timings,
        tables,
    })
}

pub fn cell_table(profile: &PeriodicProfile, samples: usize) -> Vec<String> {
    (0..samples)
        .map(|k| {
            let tau = k as f64 / (samples - 1) as f64;
            format!("{tau},{},{}", profile.eval(tau), cell_corrector(profile, 0.0, tau))
        })
        .collect()
}

fn cell(a: f64, b: f64, theta: f64, samples: usize) -> Result<Outcome> {
    let profile = PeriodicProfile::two_phase(a, b, theta)?;
    let lambda = cell_lambda(&profile);
    let results = json!({
        "lambda": lambda,
        "average": (a + theta * b) / (1.0 + theta),
        "periodicity_gap": (cell_corrector(&profile, 0.0, 1.0) - cell_corrector(&profile, 0.0, 0.0)).abs(),
    });
    Ok(Outcome {
        runs: Vec::new(),
        convergence: None,
        results,
        constants: Constants {
            theta: vec![theta],
            ..Default::default()
        },
        warnings: Vec::new(),
        timings: Vec::new(),
        tables: vec![Table {
            file: "cell.csv".into(),
            header: "tau,h,v".into(),
            rows: cell_table(&profile, samples),
        }],
    })
}
