//! Acceptance gate: one line per criterion, nonzero exit if any fails.

use std::time::Instant;

use levelset_core::cell::{cell_corrector, cell_lambda, freeze_h12, PeriodicProfile};
use levelset_core::evolve::{reinitialize, rescale_compare, solve_averaged, solve_base, solve_iterative, solve_theta, RunOptions, ThetaScheme};
use levelset_core::geometry::{classify_continuity, extract_interface, gradient_deviation, hausdorff_distance, ExtinctionParams, Verdict};
use levelset_core::grid::{discrete_lipschitz, linf_distance, Field, GhostPolicy, Grid, Trajectory};
use levelset_core::model::{averaged_h, beta, eval_h1, h_value, BetaKind, CorrectorSpec, H1Spec, HVariant, Schedule, Velocity};
use levelset_core::oracles::{barrier_bounds, example_bounded_speed_d, example_two_bumps, lipschitz_bound, tent_u0, two_bump_u0, BarrierConstants};
use levelset_core::scheme::{admissible_dt, Advection, CflPolicy, Corrector, RhsOperator, StabilityBounds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// tolerances
const C1_ERR_DX: f64 = 5.0;
const C1_RUNTIME_S: f64 = 10.0;
const C3_FINAL_ERR: f64 = 0.05;
const C3_FINAL_ERR_DX: f64 = 5.0;
const C3_RUNTIME_S: f64 = 300.0;
/// Errors at or below this are at the roundoff floor and compare as equal.
const C3_ROUNDOFF_FLOOR: f64 = 1e-12;
const C4_STEP_TOL: f64 = 1e-6;
const C4_BAND: f64 = 0.5;
const C4_MAX_DEV: f64 = 0.05;
const C5_MIN_ORDER: f64 = 0.8;
const C6_FACTOR: f64 = 10.0;
const C6_MIN_SHRINK: f64 = 1.5;
const C7_HAUSDORFF_DX: f64 = 3.0;
const C8_MONO_TOL: f64 = 1e-10;
const C8_SLACK_DX: f64 = 5.0;
const C9_MIN_VALUE: f64 = 0.8;
const C10_TOL: f64 = 1e-12;
const C11_SLACK: f64 = 1e-12;
const SAMPLES: usize = 1000;

const THETAS: [f64; 4] = [2.0, 8.0, 32.0, 128.0];

struct Gate {
    failed: Vec<usize>,
}

impl Gate {
    fn record(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        println!("[{}] criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(id);
        }
    }
}

fn exact_policy() -> RunOptions {
    RunOptions::new(CflPolicy::euler(1.0), 0)
}

fn two_bump_grid(n: usize) -> Grid {
    Grid::uniform_1d(-8.0, 8.0, n).unwrap()
}

fn checkpoints(step: f64, t_end: f64) -> Vec<f64> {
    let k = (t_end / step).round() as usize;
    (1..k).map(|i| i as f64 * step).collect()
}

fn c1_c2(gate: &mut Gate) {
    let g = two_bump_grid(1601);
    let dx = g.dx(0);
    let u0 = Field::sample(two_bump_u0, &g, 0.0).unwrap();
    let mut opts = exact_policy().with_checkpoints(vec![0.5, 1.0, 1.5]);
    opts.snap_every = 1;
    let start = Instant::now();
    let tr = solve_base(&u0, &H1Spec::constant(1.0), 2.0, &opts).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    let mut errs = Vec::new();
    for t in [0.5, 1.5, 2.0] {
        let f = tr.at_time(t, 1e-12).expect("checkpoint");
        let exact = Field::sample(|x| example_two_bumps(x, t).0, &g, t).unwrap();
        let e = linf_distance(f, &exact, None).unwrap();
        errs.push(format!("t={t}: {e:.2e}"));
        worst = worst.max(e);
    }
    let pass = worst <= C1_ERR_DX * dx && secs < C1_RUNTIME_S;
    gate.record(
        1,
        "two-bump exact solution",
        pass,
        format!("{} (limit {:.2e}); runtime {secs:.2}s (limit {C1_RUNTIME_S}s)", errs.join(", "), C1_ERR_DX * dx),
    );

    let params = ExtinctionParams::default();
    let mut ok = true;
    let mut notes = Vec::new();
    let expected = [
        (0.0, 1.0, Verdict::Discontinuous),
        (1.0, 1.0, Verdict::Discontinuous),
        (-1.0, 1.0, Verdict::Discontinuous),
        (5.0, 1.0, Verdict::Continuous),
        (-5.0, 1.0, Verdict::Continuous),
        (0.0, 0.5, Verdict::Continuous),
    ];
    for (x, t, want) in expected {
        let v = classify_continuity(&tr, &[x], t, &params).unwrap();
        ok &= v.verdict == want;
        notes.push(format!("({x},{t})={:?}", v.verdict));
    }
    // the discontinuity segment is exactly -2 < x < 2 at t = 1
    let mut seg_ok = true;
    for k in -19..=19 {
        let x = 0.1 * k as f64;
        seg_ok &= classify_continuity(&tr, &[x], 1.0, &params).unwrap().verdict == Verdict::Discontinuous;
        for t in [0.8, 1.2] {
            seg_ok &= classify_continuity(&tr, &[x], t, &params).unwrap().verdict == Verdict::Continuous;
        }
    }
    for x in [2.5, 3.0, 6.0, -2.5, -3.0, -6.0] {
        seg_ok &= classify_continuity(&tr, &[x], 1.0, &params).unwrap().verdict == Verdict::Continuous;
    }
    gate.record(
        2,
        "discontinuity of the distance",
        ok && seg_ok,
        format!("{}; segment |x|<2 at t=1 only: {}", notes.join(" "), if seg_ok { "yes" } else { "no" }),
    );
}

struct Sweep {
    grid: Grid,
    base: Trajectory,
    runs: Vec<(f64, Trajectory)>,
    secs: f64,
}

fn sweep(h: HVariant) -> Sweep {
    let g = two_bump_grid(801);
    let u0 = Field::sample(two_bump_u0, &g, 0.0).unwrap();
    let corr = CorrectorSpec::new(g.dx(0), h, BetaKind::SmoothSign).unwrap();
    // snapshots on whole steps; partial steps smear a fat zero set by a node each
    let mut opts = exact_policy();
    opts.snap_every = 5;
    let h1 = H1Spec::constant(1.0);
    let start = Instant::now();
    let base = solve_base(&u0, &h1, 0.8, &opts).unwrap();
    let runs = THETAS
        .iter()
        .map(|&th| (th, solve_theta(&u0, &h1, &corr, th, 0.8, &opts).unwrap()))
        .collect();
    Sweep {
        grid: g,
        base,
        runs,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn c3_c7_c8(gate: &mut Gate) {
    let signed = sweep(HVariant::Signed);
    let g = &signed.grid;
    let dx = g.dx(0);
    let t = 0.8;
    let region = |i: usize| g.position(i)[0].abs() <= 6.0;
    let d = Field::sample(|x| example_two_bumps(x, t).1, g, t).unwrap();
    let errs: Vec<f64> = signed
        .runs
        .iter()
        .map(|(_, tr)| linf_distance(tr.last().unwrap(), &d, Some(&region)).unwrap())
        .collect();
    let decreasing = errs
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] <= C3_ROUNDOFF_FLOOR && w[1] <= C3_ROUNDOFF_FLOOR));
    let last = *errs.last().unwrap();
    let limit = C3_FINAL_ERR + C3_FINAL_ERR_DX * dx;
    let pass = decreasing && last <= limit && signed.secs < C3_RUNTIME_S;
    let table: Vec<String> = THETAS.iter().zip(&errs).map(|(th, e)| format!("theta={th}: {e:.2e}")).collect();
    gate.record(
        3,
        "theta-convergence to the distance",
        pass,
        format!(
            "{}; decreasing (floor {C3_ROUNDOFF_FLOOR:.0e}): {decreasing}; limit {limit:.3}; runtime {:.2}s",
            table.join(", "),
            signed.secs
        ),
    );

    let plus = sweep(HVariant::Plus);
    let mut worst_h: f64 = 0.0;
    for s in [&signed, &plus] {
        for (_, tr) in &s.runs {
            for (f, w) in tr.snapshots().iter().zip(s.base.snapshots()) {
                assert_eq!(f.time(), w.time());
                let a = extract_interface(f).unwrap();
                let b = extract_interface(w).unwrap();
                worst_h = worst_h.max(hausdorff_distance(&a, &b));
            }
        }
    }
    gate.record(
        7,
        "zero level preserved",
        worst_h <= C7_HAUSDORFF_DX * dx,
        format!("max Hausdorff distance {worst_h:.2e} over all snapshots (limit {:.2e})", C7_HAUSDORFF_DX * dx),
    );

    // order in theta on the positive set (h >= 0), barriers and Lipschitz bound
    let slack = C8_SLACK_DX * dx;
    let lip_w = 1.0;
    let mut mono_viol: f64 = 0.0;
    for k in 0..plus.base.len() {
        let w = &plus.base.snapshots()[k];
        for pair in plus.runs.windows(2) {
            let lo = &pair[0].1.snapshots()[k];
            let hi = &pair[1].1.snapshots()[k];
            for i in 0..g.len() {
                if w.at(i) > 3.0 * dx * lip_w {
                    mono_viol = mono_viol.max(lo.at(i) - hi.at(i));
                } else if w.at(i) < -3.0 * dx * lip_w {
                    mono_viol = mono_viol.max(hi.at(i) - lo.at(i));
                }
            }
        }
    }
    let consts = BarrierConstants { l0: 1.0, l1: 0.0, lip_w };
    let h1 = H1Spec::constant(1.0);
    let mut barrier_viol: f64 = f64::NEG_INFINITY;
    let mut lip_viol: f64 = f64::NEG_INFINITY;
    for s in [&signed, &plus] {
        for (_, tr) in &s.runs {
            for f in tr.snapshots() {
                let t = f.time();
                for i in 0..g.len() {
                    let x = g.position(i);
                    let (w, dd) = example_two_bumps(&x[..1], t);
                    if w > 0.0 {
                        let (lo, hi) = barrier_bounds(w, dd, t, &consts);
                        barrier_viol = barrier_viol.max(lo - f.at(i)).max(f.at(i) - hi);
                    }
                }
                let bound = lipschitz_bound(t, 1.0, &|s| h1.d_rate(s));
                lip_viol = lip_viol.max(discrete_lipschitz(f) - bound);
            }
        }
    }
    let pass = mono_viol <= C8_MONO_TOL && barrier_viol <= slack && lip_viol <= slack;
    gate.record(
        8,
        "order and bounds",
        pass,
        format!(
            "theta-order violation {mono_viol:.2e} (tol {C8_MONO_TOL:.0e}); barrier excess {barrier_viol:.2e}, Lipschitz excess {lip_viol:.2e} (slack {slack:.2e})"
        ),
    );
}

fn c4(gate: &mut Gate) {
    let g = Grid::square_2d(-2.0, 2.0, 201).unwrap();
    let u0 = Field::sample(|p| 0.2 * ((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0), &g, 0.0).unwrap();
    let corr = CorrectorSpec::new(g.dx(0), HVariant::Signed, BetaKind::SmoothSign).unwrap();
    let (u, stats) = reinitialize(&u0, &corr, C4_STEP_TOL, 200_000, &CflPolicy::euler(0.9)).unwrap();
    let dev = gradient_deviation(&u, C4_BAND).unwrap();
    gate.record(
        4,
        "corrector steady state",
        stats.converged && dev <= C4_MAX_DEV,
        format!(
            "{} steps, last change {:.2e} (tol {C4_STEP_TOL:.0e}); gradient deviation {dev:.3e} (limit {C4_MAX_DEV})",
            stats.steps, stats.last_change
        ),
    );
}

fn c5(gate: &mut Gate) {
    let g = Grid::uniform_1d(-1.0, 1.0, 201).unwrap();
    let u0 = Field::sample(|x| x[0], &g, 0.0).unwrap();
    let h1 = H1Spec::constant(1.0);
    let corr = CorrectorSpec::new(g.dx(0), HVariant::Signed, BetaKind::SmoothSign).unwrap();
    let mut errs = Vec::new();
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let sched = Schedule::new(1, 1, eps / 2.0).unwrap();
        let it = solve_iterative(&u0, &h1, &corr, &sched, 1.0, &RunOptions::new(CflPolicy::default(), 0)).unwrap();
        let times: Vec<f64> = it.times().into_iter().filter(|&t| t > 0.0 && t < 1.0).collect();
        let avg = solve_averaged(&u0, &h1, &corr, 1.0, 1.0, &RunOptions::new(CflPolicy::default(), 0).with_checkpoints(times)).unwrap();
        let mut e: f64 = 0.0;
        for f in it.snapshots() {
            let a = avg.at_time(f.time(), 1e-12).expect("matching time");
            e = e.max(linf_distance(f, a, None).unwrap());
        }
        errs.push((eps, e));
    }
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0].1 / w[1].1).log2()).collect();
    let mono = errs.windows(2).all(|w| w[1].1 < w[0].1);
    let pass = mono && orders.iter().all(|&o| o >= C5_MIN_ORDER);
    let table: Vec<String> = errs.iter().map(|(e, v)| format!("eps={e}: {v:.3e}")).collect();
    let ords: Vec<String> = orders.iter().map(|o| format!("{o:.2}")).collect();
    gate.record(
        5,
        "homogenization order",
        pass,
        format!("{}; orders [{}] (min {C5_MIN_ORDER})", table.join(", "), ords.join(", ")),
    );
}

fn rescale_case(u0: &Field, h1: &H1Spec, corr: &CorrectorSpec, theta: f64, t_end: f64) -> (f64, f64) {
    let opts = RunOptions::new(CflPolicy::euler(0.5), 0).with_scheme(ThetaScheme::Combined);
    let cps = checkpoints(t_end / 4.0, t_end);
    let th = solve_theta(u0, h1, corr, theta, t_end, &opts.clone().with_checkpoints(cps.clone())).unwrap();
    let cps_avg = cps.iter().map(|c| c * (1.0 + theta)).collect();
    let av = solve_averaged(u0, h1, corr, theta, t_end * (1.0 + theta), &opts.with_checkpoints(cps_avg)).unwrap();
    let disc = rescale_compare(&av, &th, theta).unwrap();
    let scale = u0.grid().min_dx() + th.meta.max_dt;
    (disc, scale)
}

fn c6(gate: &mut Gate) {
    let theta = 1.0;
    let h1 = H1Spec::constant(1.0);
    let g = Grid::uniform_1d(-1.0, 1.0, 101).unwrap();
    let corr = CorrectorSpec::new(g.dx(0), HVariant::Signed, BetaKind::SmoothSign).unwrap();
    let lin = Field::sample(|x| x[0], &g, 0.0).unwrap();
    let (d_lin, s_lin) = rescale_case(&lin, &h1, &corr, theta, 0.5);

    let radial = |n: usize| {
        let g = Grid::square_2d(-1.5, 1.5, n).unwrap();
        let corr = CorrectorSpec::new(g.dx(0), HVariant::Signed, BetaKind::SmoothSign).unwrap();
        let u0 = Field::sample(|p| 0.5 * (1.0 - p[0] * p[0] - p[1] * p[1]), &g, 0.0).unwrap();
        rescale_case(&u0, &h1, &corr, theta, 0.2)
    };
    let (d_c, s_c) = radial(61);
    let (d_f, s_f) = radial(121);
    let shrink = d_c / d_f;
    let pass = d_lin <= C6_FACTOR * s_lin && d_c <= C6_FACTOR * s_c && d_f <= C6_FACTOR * s_f && shrink >= C6_MIN_SHRINK;
    gate.record(
        6,
        "rescaling identity",
        pass,
        format!(
            "linear {d_lin:.2e} (limit {:.2e}); radial coarse {d_c:.2e} (limit {:.2e}), fine {d_f:.2e} (limit {:.2e}); shrink {shrink:.2} (min {C6_MIN_SHRINK})",
            C6_FACTOR * s_lin,
            C6_FACTOR * s_c,
            C6_FACTOR * s_f
        ),
    );
}

fn c9(gate: &mut Gate) {
    let g = Grid::uniform_1d(-6.0, 6.0, 1601).unwrap();
    let u0 = Field::sample(tent_u0, &g, 0.0).unwrap();
    let corr = CorrectorSpec::new(g.dx(0), HVariant::Plus, BetaKind::SmoothSign).unwrap();
    let tr = solve_theta(&u0, &H1Spec::tent_plus_one(), &corr, 32.0, 1.0, &exact_policy()).unwrap();
    let u = tr.last().unwrap();
    let xs = 2.0 - std::f64::consts::LN_2;
    let s = (xs - g.lo(0)) / g.dx(0);
    let i = s.floor() as usize;
    let a = s - i as f64;
    let val = (1.0 - a) * u.at(i) + a * u.at(i + 1);
    let d = example_bounded_speed_d(&[xs], 1.0);
    gate.record(
        9,
        "distance does not dominate",
        val >= C9_MIN_VALUE && val > d,
        format!("u(x*,1) = {val:.4} (min {C9_MIN_VALUE}) while d(x*,1) = {d:.4}"),
    );
}

fn c10(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst_l: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    for k in 0..SAMPLES {
        let h1 = H1Spec::Velocity {
            c: Velocity::Constant { value: rng.gen_range(-3.0..3.0) },
        };
        let h = if k % 2 == 0 { HVariant::Signed } else { HVariant::Plus };
        let corr = CorrectorSpec::new(rng.gen_range(0.01..1.0), h, BetaKind::SmoothSign).unwrap();
        let x = [rng.gen_range(-5.0..5.0)];
        let t = rng.gen_range(0.0..3.0);
        let r = rng.gen_range(-2.0..2.0);
        let p = [rng.gen_range(-3.0..3.0)];
        let (prof, theta) = if k % 4 < 2 {
            let theta = rng.gen_range(0.01..100.0);
            let a = eval_h1(&h1, &x, t / (1.0 + theta), &p);
            let b = beta(&corr, r) * h_value(&corr, &p);
            (PeriodicProfile::two_phase(a, b, theta).unwrap(), theta)
        } else {
            let sched = Schedule::new(rng.gen_range(1..50), rng.gen_range(1..50), 0.01).unwrap();
            (freeze_h12(&h1, &corr, &sched, &x, t, r, &p).unwrap(), sched.theta())
        };
        worst_l = worst_l.max((cell_lambda(&prof) - averaged_h(&h1, &corr, theta, &x, t, r, &p)).abs());
        let v0 = rng.gen_range(-10.0..10.0);
        worst_p = worst_p.max((cell_corrector(&prof, v0, 1.0) - cell_corrector(&prof, v0, 0.0)).abs());
    }
    gate.record(
        10,
        "cell problem",
        worst_l <= C10_TOL && worst_p <= C10_TOL,
        format!("{SAMPLES} samples: |lambda - averaged| max {worst_l:.2e}, |v(1) - v(0)| max {worst_p:.2e} (tol {C10_TOL:.0e})"),
    );
}

fn c11(gate: &mut Gate) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_all: f64 = f64::NEG_INFINITY;
    let mut worst_interior: f64 = f64::NEG_INFINITY;
    for k in 0..SAMPLES {
        let two_d = k % 3 == 0;
        let base = if two_d {
            Grid::square_2d(-1.0, 1.0, rng.gen_range(3..12))
        } else {
            Grid::uniform_1d(-1.0, 1.0, rng.gen_range(3..60))
        }
        .unwrap();
        let h1 = match k % 4 {
            0 => H1Spec::tent_plus_one(),
            1 => H1Spec::constant(rng.gen_range(-3.0..3.0)),
            2 => H1Spec::Velocity {
                c: Velocity::RadialRamp { base: rng.gen_range(-1.0..1.0), slope: rng.gen_range(0.0..2.0), cap: 1.5 },
            },
            _ => H1Spec::Velocity {
                c: Velocity::Oscillating { base: 0.3, amplitude: 1.0, omega: 4.0 },
            },
        };
        let h = if rng.gen_bool(0.5) { HVariant::Signed } else { HVariant::Plus };
        let kind = if rng.gen_bool(0.7) { BetaKind::SmoothSign } else { BetaKind::SmoothSignSquared };
        let corr = CorrectorSpec::new(rng.gen_range(0.01..1.0), h, kind).unwrap();
        let theta = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..200.0) };
        let amp = rng.gen_range(0.01..3.0);
        let u: Vec<f64> = (0..base.len()).map(|_| rng.gen_range(-amp..amp)).collect();
        let v: Vec<f64> = u.iter().map(|a| a + if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..amp) }).collect();
        let frac = rng.gen_range(0.0..1.0f64).max(1e-3);
        let t = rng.gen_range(0.0..2.0);
        for ghost in [GhostPolicy::Constant, GhostPolicy::Linear] {
            let g = base.clone().with_ghost(ghost);
            let fu = Field::new(g.clone(), u.clone(), t).unwrap();
            let fv = Field::new(g.clone(), v.clone(), t).unwrap();
            let adv = Advection::new(&h1);
            let cor = Corrector { corr: &corr };
            let parts: [(f64, &dyn RhsOperator); 2] = [(1.0, &adv), (theta, &cor)];
            let b = StabilityBounds::of(&fu).merge(StabilityBounds::of(&fv));
            let dt = frac * admissible_dt(&parts, &g, &b);
            let policy = CflPolicy::euler(1.0);
            let su = levelset_core::scheme::step(&fu, &parts, dt, &policy).unwrap();
            let sv = levelset_core::scheme::step(&fv, &parts, dt, &policy).unwrap();
            for i in 0..g.len() {
                let [ix, iy] = g.unravel(i);
                let face = ix == 0 || ix + 1 == g.n(0) || (two_d && (iy == 0 || iy + 1 == g.n(1)));
                let excess = su.at(i) - sv.at(i);
                match ghost {
                    GhostPolicy::Constant => worst_all = worst_all.max(excess),
                    GhostPolicy::Linear if !face => worst_interior = worst_interior.max(excess),
                    GhostPolicy::Linear => {}
                }
            }
        }
    }
    gate.record(
        11,
        "monotone step",
        worst_all <= C11_SLACK && worst_interior <= C11_SLACK,
        format!(
            "{SAMPLES} pairs: max order violation {worst_all:.2e} (all nodes, constant ghost), {worst_interior:.2e} (interior, linear ghost); slack {C11_SLACK:.0e}"
        ),
    );
}

fn main() {
    let mut gate = Gate { failed: Vec::new() };
    let start = Instant::now();
    c1_c2(&mut gate);
    c3_c7_c8(&mut gate);
    c4(&mut gate);
    c5(&mut gate);
    c6(&mut gate);
    c9(&mut gate);
    c10(&mut gate);
    c11(&mut gate);
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if gate.failed.is_empty() {
        println!("all criteria pass");
    } else {
        gate.failed.sort_unstable();
        println!("failing criteria: {:?}", gate.failed);
        std::process::exit(1);
    }
}
