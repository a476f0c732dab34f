//! Exact solutions and a priori bounds used as ground truth.

use serde::{Deserialize, Serialize};

/// Two unit tents centred at `x = -2` and `x = 2`.
pub fn two_bump_u0(x: &[f64]) -> f64 {
    let a = (1.0 - (x[0] - 2.0).abs()).max(0.0);
    let b = (1.0 - (x[0] + 2.0).abs()).max(0.0);
    a.max(b)
}

/// `(1 - |x|)_+`.
pub fn tent_u0(x: &[f64]) -> f64 {
    (1.0 - x.iter().map(|a| a * a).sum::<f64>().sqrt()).max(0.0)
}

/// Level-set solution `w` and signed distance `d` for the two-bump data
/// under unit outward speed.
///
/// The inner zero component `|x| <= 1 - t` vanishes at `t = 1`, after which
/// the positive set is the single interval `|x| < t + 3`.
pub fn example_two_bumps(x: &[f64], t: f64) -> (f64, f64) {
    let x = x[0];
    let left = (t + 1.0 - (x + 2.0).abs()).max(0.0);
    let right = (t + 1.0 - (x - 2.0).abs()).max(0.0);
    let w = left.max(right).min(1.0);
    let d = if t <= 1.0 {
        left.max(right)
    } else {
        (t + 3.0 - x.abs()).max(0.0)
    };
    (w, d)
}

/// Level-set solution for `c(x) = (1 - |x|)_+ + 1` and `u0 = (1 - |x|)_+`.
pub fn example_bounded_speed_w(x: &[f64], t: f64) -> f64 {
    let r = x[0].abs();
    let ln2 = std::f64::consts::LN_2;
    if r >= t + 1.0 {
        return 0.0;
    }
    if t <= ln2 {
        if r <= 2.0 * (1.0 - (-t).exp()) {
            1.0
        } else if r <= 1.0 {
            (2.0 - r) * t.exp() - 1.0
        } else {
            (t - r + 1.0).exp() - 1.0
        }
    } else if r <= t + 1.0 - ln2 {
        1.0
    } else {
        (t - r + 1.0).exp() - 1.0
    }
}

/// Signed distance for [`example_bounded_speed_w`]: `(t + 1 - |x|)_+`.
pub fn example_bounded_speed_d(x: &[f64], t: f64) -> f64 {
    (t + 1.0 - x[0].abs()).max(0.0)
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of a unimodal-near-the-optimum function.
fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `max u0(y)` over the closed ball `|y - x| <= t`, the unit-speed level-set
/// solution. Dense sampling with `resolution` points per unit ball volume,
/// then golden-section refinement around the best sample.
pub fn hopf_lax_w(u0: &dyn Fn(&[f64]) -> f64, x: &[f64], t: f64, resolution: usize) -> f64 {
    if t <= 0.0 {
        return u0(x);
    }
    let res = resolution.max(16) as f64;
    match x.len() {
        1 => {
            let n = ((2.0 * t * res).ceil() as usize).max(2);
            let h = 2.0 * t / n as f64;
            let mut best = (x[0], f64::NEG_INFINITY);
            for i in 0..=n {
                let y = x[0] - t + i as f64 * h;
                let v = u0(&[y]);
                if v > best.1 {
                    best = (y, v);
                }
            }
            let lo = (best.0 - h).max(x[0] - t);
            let hi = (best.0 + h).min(x[0] + t);
            let g = |y: f64| u0(&[y]);
            let (_, v) = golden_max(&g, lo, hi, 80);
            best.1.max(v)
        }
        _ => {
            let area = std::f64::consts::PI * t * t;
            let h = (area / res).sqrt();
            let m = (t / h).ceil() as i64;
            let mut best = ([x[0], x[1]], f64::NEG_INFINITY);
            let mut consider = |p: [f64; 2]| {
                let v = u0(&p);
                if v > best.1 {
                    best = (p, v);
                }
            };
            for i in -m..=m {
                for j in -m..=m {
                    let (dx, dy) = (i as f64 * h, j as f64 * h);
                    if dx * dx + dy * dy <= t * t {
                        consider([x[0] + dx, x[1] + dy]);
                    }
                }
            }
            let nb = ((2.0 * std::f64::consts::PI * t / h).ceil() as usize).max(8);
            for k in 0..nb {
                let a = 2.0 * std::f64::consts::PI * k as f64 / nb as f64;
                consider([x[0] + t * a.cos(), x[1] + t * a.sin()]);
            }
            // coordinate refinement inside the ball
            let inside = |p: [f64; 2]| {
                let (dx, dy) = (p[0] - x[0], p[1] - x[1]);
                let r = (dx * dx + dy * dy).sqrt();
                if r <= t {
                    p
                } else {
                    [x[0] + dx * t / r, x[1] + dy * t / r]
                }
            };
            let (mut p, mut v) = best;
            let mut step = h;
            for _ in 0..6 {
                for axis in 0..2 {
                    let g = |s: f64| {
                        let mut q = p;
                        q[axis] = s;
                        u0(&inside(q))
                    };
                    let (s, gv) = golden_max(&g, p[axis] - step, p[axis] + step, 40);
                    if gv > v {
                        p[axis] = s;
                        p = inside(p);
                        v = gv;
                    }
                }
                step *= 0.5;
            }
            v
        }
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    rec(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 48)
}

/// `max{L0, 1} exp(int_0^t D)`: a spatial Lipschitz bound for level-set
/// solutions with Lipschitz-in-x rate `D`.
pub fn lipschitz_bound(t: f64, l0: f64, d_rate: &dyn Fn(f64) -> f64) -> f64 {
    l0.max(1.0) * integrate(d_rate, 0.0, t, 1e-12).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierConstants {
    /// Lipschitz constant of the initial datum.
    pub l0: f64,
    /// Lipschitz constant of `H1` in `x`.
    pub l1: f64,
    /// Lipschitz constant in `x` of the level-set solution `w`.
    pub lip_w: f64,
}

/// Bounds `(lower, upper)` on a theta-solution at a point where the level-set
/// solution is `w_val` and the signed distance `d_val`.
///
/// On the positive side `eps w <= u <= l e^{L1 t} d` with
/// `eps = min{1/Lip w, 1}` and `l = max{L0, 1}`; mirrored on the negative side.
pub fn barrier_bounds(w_val: f64, d_val: f64, t: f64, k: &BarrierConstants) -> (f64, f64) {
    let eps = if k.lip_w > 0.0 { (1.0 / k.lip_w).min(1.0) } else { 1.0 };
    let outer = k.l0.max(1.0) * (k.l1 * t).exp() * d_val;
    let inner = eps * w_val;
    if w_val >= 0.0 {
        (inner, outer)
    } else {
        (outer, inner)
    }
}
