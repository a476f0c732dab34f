//! Zero level sets of grid fields and the geometry built on them: signed
//! distance, nearest points, extinction of interface pieces, continuity of
//! the distance in time and finite-propagation certificates.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{central_gradient, distance, Field, Grid, Point, Trajectory};

/// Values with magnitude at or below this count as exact zeros.
pub const ZERO_SNAP: f64 = 1e-12;

const PAR_MIN_NODES: usize = 1 << 12;

/// Sign with the zero snap applied.
pub fn snapped_sign(v: f64) -> i8 {
    if v > ZERO_SNAP {
        1
    } else if v < -ZERO_SNAP {
        -1
    } else {
        0
    }
}

/// Zero level set of one field as a point cloud.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterfaceSet {
    pub time: f64,
    pub dim: usize,
    pub points: Vec<Point>,
}

impl InterfaceSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distance from `x` to the closest point.
    pub fn distance_to(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| distance(p, x, self.dim))
            .fold(f64::INFINITY, f64::min)
    }

    /// Closest point and its distance.
    pub fn closest(&self, x: &[f64]) -> (Point, f64) {
        let mut best = (self.points[0], f64::INFINITY);
        for p in &self.points {
            let d = distance(p, x, self.dim);
            if d < best.1 {
                best = (*p, d);
            }
        }
        best
    }

    /// Rows `t,x[,y]`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for p in &self.points {
            if self.dim == 1 {
                writeln!(w, "{:?},{:?}", self.time, p[0])?;
            } else {
                writeln!(w, "{:?},{:?},{:?}", self.time, p[0], p[1])?;
            }
        }
        Ok(())
    }
}

/// Exact zeros as nodes plus linear-interpolation crossings on every grid
/// edge with a strict sign change.
pub fn extract_interface(field: &Field) -> Result<InterfaceSet> {
    let grid = field.grid();
    let u = field.values();
    let mut points = Vec::new();
    for idx in 0..grid.len() {
        let a = u[idx];
        let sa = snapped_sign(a);
        if sa == 0 {
            points.push(grid.position(idx));
            continue;
        }
        let [ix, iy] = grid.unravel(idx);
        for axis in 0..grid.dim() {
            let (i, stride) = if axis == 0 { (ix, 1) } else { (iy, grid.n(0)) };
            if i + 1 >= grid.n(axis) {
                continue;
            }
            let b = u[idx + stride];
            let sb = snapped_sign(b);
            if sb != 0 && sb != sa {
                let mut p = grid.position(idx);
                p[axis] += grid.dx(axis) * a / (a - b);
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyInterface { time: field.time() });
    }
    Ok(InterfaceSet {
        time: field.time(),
        dim: grid.dim(),
        points,
    })
}

fn map_nodes<T: Send>(grid: &Grid, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    if grid.len() >= PAR_MIN_NODES {
        (0..grid.len()).into_par_iter().map(f).collect()
    } else {
        (0..grid.len()).map(f).collect()
    }
}

/// Signed distance to the zero level set of `field`, by brute force over the
/// extracted point cloud.
pub fn signed_distance_field(field: &Field) -> Result<Field> {
    let iface = extract_interface(field)?;
    Ok(signed_distance_to(field, &iface))
}

fn signed_distance_to(field: &Field, iface: &InterfaceSet) -> Field {
    let grid = field.grid();
    let values = map_nodes(grid, |idx| {
        let s = snapped_sign(field.at(idx));
        if s == 0 {
            0.0
        } else {
            s as f64 * iface.distance_to(&grid.position(idx))
        }
    });
    field.with_values_unchecked(values, field.time())
}

/// All interface points whose distance to `x` is within `tol` of the
/// minimum.
pub fn nearest_points(x: &[f64], iface: &InterfaceSet, tol: f64) -> Vec<Point> {
    let dmin = iface.distance_to(x);
    iface
        .points
        .iter()
        .filter(|p| distance(p.as_slice(), x, iface.dim) <= dmin + tol)
        .copied()
        .collect()
}

/// Parameters of the discrete extinction test. `None` picks the defaults
/// `eps_ball = 3 dx`, `delta = 10` snapshot intervals, `tie_tol = dx / 2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ExtinctionParams {
    pub eps_ball: Option<f64>,
    pub delta: Option<f64>,
    pub tie_tol: Option<f64>,
}

/// Resolved extinction parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResolvedParams {
    pub eps_ball: f64,
    pub delta: f64,
    pub tie_tol: f64,
    pub dx: f64,
}

impl ExtinctionParams {
    pub fn resolve(&self, traj: &Trajectory, t: f64) -> Result<ResolvedParams> {
        let grid = traj
            .grid()
            .ok_or_else(|| Error::Usage("empty trajectory".into()))?;
        let dx = grid.min_dx();
        let delta = match self.delta {
            Some(d) => d,
            None => {
                let next = traj
                    .snapshots()
                    .iter()
                    .map(|f| f.time())
                    .find(|&s| s > t + ZERO_SNAP)
                    .ok_or_else(|| Error::Range(format!("no snapshot after t = {t}")))?;
                10.0 * (next - t)
            }
        };
        Ok(ResolvedParams {
            eps_ball: self.eps_ball.unwrap_or(3.0 * dx),
            delta,
            tie_tol: self.tie_tol.unwrap_or(0.5 * dx),
            dx,
        })
    }
}

/// Whether the interface around `x` vanishes right after `t`: every snapshot
/// in `(t, t + delta]` is strictly one-signed on the closed ball
/// `B_eps_ball(x)`.
pub fn detect_extinction(traj: &Trajectory, x: &[f64], t: f64, eps_ball: f64, delta: f64) -> Result<bool> {
    let grid = traj
        .grid()
        .ok_or_else(|| Error::Usage("empty trajectory".into()))?;
    if eps_ball < 2.0 * grid.min_dx() * (1.0 - 1e-9) {
        return Err(Error::Resolution(format!(
            "extinction ball radius {eps_ball} is below two grid spacings ({})",
            2.0 * grid.min_dx()
        )));
    }
    let last = traj.last().map_or(0.0, |f| f.time());
    if t + delta > last * (1.0 + 1e-12) + 1e-12 {
        return Err(Error::Range(format!(
            "window ({t}, {}] extends past the trajectory end {last}",
            t + delta
        )));
    }
    let window: Vec<&Field> = traj
        .snapshots()
        .iter()
        .filter(|f| f.time() > t + ZERO_SNAP && f.time() <= t + delta * (1.0 + 1e-12))
        .collect();
    if window.len() < 2 {
        return Err(Error::Resolution(format!(
            "only {} snapshot(s) in ({t}, {}]",
            window.len(),
            t + delta
        )));
    }
    let nodes = grid.nodes_in_ball(x, eps_ball);
    for f in window {
        let s0 = snapped_sign(f.at(nodes[0]));
        if s0 == 0 || nodes.iter().any(|&i| snapped_sign(f.at(i)) != s0) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Continuous,
    Discontinuous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NearestWitness {
    pub point: Point,
    pub extinction: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityVerdict {
    pub point: Point,
    pub time: f64,
    pub verdict: Verdict,
    pub witness: Vec<NearestWitness>,
    pub params: ResolvedParams,
}

impl ContinuityVerdict {
    pub fn n_extinction(&self) -> usize {
        self.witness.iter().filter(|w| w.extinction).count()
    }
}

/// The signed distance is continuous in time at `(x, t)` iff some nearest
/// interface point of `x` is not an extinction point.
pub fn classify_continuity(traj: &Trajectory, x: &[f64], t: f64, params: &ExtinctionParams) -> Result<ContinuityVerdict> {
    let p = params.resolve(traj, t)?;
    let snap = traj
        .at_time(t, 1e-9 * t.max(1.0))
        .ok_or_else(|| Error::Range(format!("no snapshot at t = {t}")))?;
    let iface = extract_interface(snap)?;
    let near = nearest_points(x, &iface, p.tie_tol);
    let mut witness = Vec::with_capacity(near.len());
    for z in near {
        let extinction = detect_extinction(traj, &z[..iface.dim], t, p.eps_ball, p.delta)?;
        witness.push(NearestWitness { point: z, extinction });
    }
    let verdict = if witness.iter().any(|w| !w.extinction) {
        Verdict::Continuous
    } else {
        Verdict::Discontinuous
    };
    let mut point = [0.0; 2];
    point[..x.len()].copy_from_slice(x);
    Ok(ContinuityVerdict {
        point,
        time: t,
        verdict,
        witness,
        params: p,
    })
}

/// Finite-propagation certificate: if `B_r(x)` is one-signed at `t`, then for
/// every later snapshot at `s` with `tau = speed (s - t) < r` the ball
/// `B_{r - tau}(x)` keeps that sign.
pub fn cone_check(traj: &Trajectory, x: &[f64], t: f64, r: f64, speed: f64) -> Result<bool> {
    if !(r > 0.0 && speed > 0.0) {
        return Err(Error::Usage(format!("cone needs r > 0 and speed > 0, got {r}, {speed}")));
    }
    let grid = traj
        .grid()
        .ok_or_else(|| Error::Usage("empty trajectory".into()))?;
    let t_apex = t + r / speed;
    let last = traj.last().map_or(0.0, |f| f.time());
    if last < t_apex * (1.0 - 1e-12) {
        return Err(Error::Range(format!(
            "cone reaches t = {t_apex} but the trajectory ends at {last}"
        )));
    }
    let base = traj
        .at_time(t, 1e-9 * t.max(1.0))
        .ok_or_else(|| Error::Range(format!("no snapshot at t = {t}")))?;
    let ball = grid.nodes_in_ball(x, r);
    let s0 = snapped_sign(base.at(ball[0]));
    if s0 == 0 || ball.iter().any(|&i| snapped_sign(base.at(i)) != s0) {
        return Err(Error::Usage(format!("B_{r}({x:?}) is not one-signed at t = {t}")));
    }
    for f in traj.snapshots() {
        let s = f.time();
        if s <= t {
            continue;
        }
        let tau = speed * (s - t);
        if tau >= r {
            break;
        }
        for i in grid.nodes_in_ball(x, r - tau) {
            if snapped_sign(f.at(i)) != s0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Nodes whose nearest interface point jumps against some node within two
/// cells, i.e. nodes close to the ridge where the distance is not smooth.
fn kink_mask(field: &Field, iface: &InterfaceSet) -> Vec<bool> {
    let grid = field.grid();
    let dim = grid.dim();
    let nearest: Vec<Point> = map_nodes(grid, |idx| iface.closest(&grid.position(idx)).0);
    let dx = grid.min_dx();
    map_nodes(grid, |idx| {
        let x = grid.position(idx);
        grid.nodes_in_ball(&x, 2.0 * dx).into_iter().any(|j| {
            let y = grid.position(j);
            distance(&nearest[idx], &nearest[j], dim) > 4.0 * distance(&x, &y, dim) + 2.0 * dx
        })
    })
}

/// `max | |grad u| - 1 |` with central differences, over nodes whose own
/// signed distance is within `band` and that are more than two cells from a
/// kink of the distance.
pub fn gradient_deviation(field: &Field, band: f64) -> Result<f64> {
    if !(band > 0.0) {
        return Err(Error::Usage(format!("band must be positive, got {band}")));
    }
    let iface = extract_interface(field)?;
    let sd = signed_distance_to(field, &iface);
    let kinks = kink_mask(field, &iface);
    let dim = field.grid().dim();
    let mut worst: Option<f64> = None;
    for idx in 0..field.grid().len() {
        if sd.at(idx).abs() > band || kinks[idx] {
            continue;
        }
        let g = central_gradient(field, idx);
        let norm = g[..dim].iter().map(|a| a * a).sum::<f64>().sqrt();
        let dev = (norm - 1.0).abs();
        worst = Some(worst.map_or(dev, |w: f64| w.max(dev)));
    }
    worst.ok_or_else(|| Error::Usage(format!("no kink-free nodes within band {band}")))
}

/// Symmetric Hausdorff distance between two point clouds.
pub fn hausdorff_distance(a: &InterfaceSet, b: &InterfaceSet) -> f64 {
    let directed = |p: &InterfaceSet, q: &InterfaceSet| {
        let f = |z: &Point| q.distance_to(z);
        if p.points.len() >= 256 {
            p.points.par_iter().map(f).reduce(|| 0.0, f64::max)
        } else {
            p.points.iter().map(f).fold(0.0, f64::max)
        }
    };
    directed(a, b).max(directed(b, a))
}
