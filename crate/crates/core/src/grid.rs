//! Uniform node-centred Cartesian grids in one or two dimensions, scalar
//! fields on them and one-sided difference stencils.
//!
//! Nodes include both endpoints of every axis. In 2D the flat node index is
//! `iy * nx + ix`, i.e. rows of constant `y` stored one after another with `x`
//! varying fastest. Missing neighbours at the domain faces are filled by a
//! ghost value according to the grid's [`GhostPolicy`].

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial position. Unused trailing components are zero in 1D.
pub type Point = [f64; 2];

/// One difference quotient per axis; unused axes are zero.
pub type Grad = [f64; 2];

/// How the missing neighbour at a domain face is filled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GhostPolicy {
    /// Linear extrapolation: the missing one-sided difference copies the
    /// available one. Exact on linear data, but the face update then depends
    /// on the inner neighbour with either sign, so schemes lose monotonicity
    /// at face nodes.
    #[default]
    Linear,
    /// Zero-gradient ghost: the missing difference is zero. Monotone, first
    /// order at the faces.
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    lo: [f64; 2],
    hi: [f64; 2],
    n: [usize; 2],
    dx: [f64; 2],
    #[serde(default)]
    ghost: GhostPolicy,
}

impl Grid {
    pub fn new(lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Self> {
        let dim = lo.len();
        if !(1..=2).contains(&dim) || hi.len() != dim || n.len() != dim {
            return Err(Error::Config(format!(
                "grid needs 1 or 2 axes with matching lo/hi/n lengths, got {}/{}/{}",
                lo.len(),
                hi.len(),
                n.len()
            )));
        }
        let mut grid = Grid {
            dim,
            lo: [0.0; 2],
            hi: [0.0; 2],
            n: [1; 2],
            dx: [0.0; 2],
            ghost: GhostPolicy::Linear,
        };
        for axis in 0..dim {
            if !(lo[axis].is_finite() && hi[axis].is_finite()) || hi[axis] <= lo[axis] {
                return Err(Error::Config(format!(
                    "axis {axis}: need finite lo < hi, got lo = {}, hi = {}",
                    lo[axis], hi[axis]
                )));
            }
            if n[axis] < 3 {
                return Err(Error::Config(format!(
                    "axis {axis}: need at least 3 nodes, got {}",
                    n[axis]
                )));
            }
            grid.lo[axis] = lo[axis];
            grid.hi[axis] = hi[axis];
            grid.n[axis] = n[axis];
            grid.dx[axis] = (hi[axis] - lo[axis]) / (n[axis] - 1) as f64;
        }
        Ok(grid)
    }

    pub fn uniform_1d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(&[lo], &[hi], &[n])
    }

    pub fn square_2d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(&[lo, lo], &[hi, hi], &[n, n])
    }

    pub fn with_ghost(mut self, ghost: GhostPolicy) -> Self {
        self.ghost = ghost;
        self
    }

    pub fn ghost(&self) -> GhostPolicy {
        self.ghost
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn dx(&self, axis: usize) -> f64 {
        self.dx[axis]
    }

    pub fn lo(&self, axis: usize) -> f64 {
        self.lo[axis]
    }

    pub fn hi(&self, axis: usize) -> f64 {
        self.hi[axis]
    }

    /// Smallest spacing over the active axes.
    pub fn min_dx(&self) -> f64 {
        self.dx[..self.dim].iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `sqrt(sum 1/dx_k^2)`, the norm of the stencil weights of a one-sided
    /// gradient magnitude with respect to the centre value.
    pub fn stencil_norm(&self) -> f64 {
        self.dx[..self.dim]
            .iter()
            .map(|d| 1.0 / (d * d))
            .sum::<f64>()
            .sqrt()
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.dx[axis]
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.n[0] + ix
    }

    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        [idx % self.n[0], idx / self.n[0]]
    }

    pub fn position(&self, idx: usize) -> Point {
        let [ix, iy] = self.unravel(idx);
        let mut p = [self.coord(0, ix), 0.0];
        if self.dim == 2 {
            p[1] = self.coord(1, iy);
        }
        p
    }

    /// Index of the node nearest to `p`, clamped to the grid.
    pub fn nearest_node(&self, p: &[f64]) -> usize {
        let mut ij = [0usize; 2];
        for (axis, slot) in ij.iter_mut().enumerate().take(self.dim) {
            let s = ((p[axis] - self.lo[axis]) / self.dx[axis]).round();
            *slot = s.clamp(0.0, (self.n[axis] - 1) as f64) as usize;
        }
        self.index(ij[0], ij[1])
    }

    /// Indices of all nodes within the closed ball `|y - p| <= radius`.
    pub fn nodes_in_ball(&self, p: &[f64], radius: f64) -> Vec<usize> {
        let mut range = [(0usize, 0usize); 2];
        for (axis, r) in range.iter_mut().enumerate() {
            if axis >= self.dim {
                *r = (0, 0);
                continue;
            }
            let a = ((p[axis] - radius - self.lo[axis]) / self.dx[axis]).floor();
            let b = ((p[axis] + radius - self.lo[axis]) / self.dx[axis]).ceil();
            let top = (self.n[axis] - 1) as f64;
            *r = (a.clamp(0.0, top) as usize, b.clamp(0.0, top) as usize);
        }
        let mut out = Vec::new();
        for iy in range[1].0..=range[1].1 {
            for ix in range[0].0..=range[0].1 {
                let idx = self.index(ix, iy);
                if distance(&self.position(idx), p, self.dim) <= radius * (1.0 + 1e-12) {
                    out.push(idx);
                }
            }
        }
        out
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// Euclidean distance over the first `dim` components.
pub fn distance(a: &[f64], b: &[f64], dim: usize) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        let d = a[k] - b[k];
        s += d * d;
    }
    s.sqrt()
}

/// One time slice of node values.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value {} at node {i} (position {:?})",
                values[i],
                &grid.position(i)[..grid.dim()]
            )));
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(Error::Data(format!("invalid field time {time}")));
        }
        Ok(Field { grid, values, time })
    }

    /// Node-wise evaluation of `f` at time `t`.
    pub fn sample<F>(f: F, grid: &Grid, t: f64) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let dim = grid.dim();
        let mut values = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let p = grid.position(idx);
            let v = f(&p[..dim]);
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "sample is {v} at node {idx} (position {:?})",
                    &p[..dim]
                )));
            }
            values.push(v);
        }
        Field::new(grid.clone(), values, t)
    }

    pub fn constant(grid: &Grid, value: f64, t: f64) -> Result<Self> {
        Field::new(grid.clone(), vec![value; grid.len()], t)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Replaces the values, keeping grid and time. Skips the finiteness check;
    /// solvers run their own blow-up detection.
    pub(crate) fn with_values_unchecked(&self, values: Vec<f64>, time: f64) -> Field {
        debug_assert_eq!(values.len(), self.grid.len());
        Field {
            grid: self.grid.clone(),
            values,
            time,
        }
    }

    pub(crate) fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest one-sided difference quotient magnitude over all nodes and axes.
    pub fn max_difference_quotient(&self) -> f64 {
        discrete_lipschitz(self)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# t={:?}", self.time)?;
        let dim = self.grid.dim();
        for (idx, v) in self.values.iter().enumerate() {
            let p = self.grid.position(idx);
            if dim == 1 {
                writeln!(w, "{:?},{:?}", p[0], v)?;
            } else {
                writeln!(w, "{:?},{:?},{:?}", p[0], p[1], v)?;
            }
        }
        Ok(())
    }

    /// Reads a field written by [`Field::write_csv`] back onto `grid`.
    pub fn read_csv<R: BufRead>(r: R, grid: &Grid) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data("empty field csv".into()))??;
        let time: f64 = header
            .strip_prefix("# t=")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Data(format!("bad field csv header {header:?}")))?;
        let dim = grid.dim();
        let mut values = Vec::with_capacity(grid.len());
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Data(format!("row {row}: {e}")))?;
            if cols.len() != dim + 1 {
                return Err(Error::Data(format!(
                    "row {row}: expected {} columns, got {}",
                    dim + 1,
                    cols.len()
                )));
            }
            if row >= grid.len() {
                return Err(Error::Data("more rows than grid nodes".into()));
            }
            let p = grid.position(row);
            if distance(&p, &cols, dim) > 1e-9 * (1.0 + p[0].abs() + p[1].abs()) {
                return Err(Error::Data(format!(
                    "row {row}: node position {:?} does not match grid",
                    &cols[..dim]
                )));
            }
            values.push(cols[dim]);
        }
        Field::new(grid.clone(), values, time)
    }
}

/// Backward and forward difference quotients at node `idx`.
///
/// At a face the missing quotient comes from the ghost policy: a copy of the
/// available one (linear ghost, exact on linear fields everywhere) or zero
/// (constant ghost).
pub fn one_sided_gradients(field: &Field, idx: usize) -> (Grad, Grad) {
    let grid = field.grid();
    let u = field.values();
    let [ix, iy] = grid.unravel(idx);
    let mut dminus = [0.0; 2];
    let mut dplus = [0.0; 2];
    for axis in 0..grid.dim() {
        let (i, stride) = if axis == 0 { (ix, 1) } else { (iy, grid.n(0)) };
        let n = grid.n(axis);
        let h = grid.dx(axis);
        let back = (i > 0).then(|| (u[idx] - u[idx - stride]) / h);
        let fwd = (i + 1 < n).then(|| (u[idx + stride] - u[idx]) / h);
        let lin = grid.ghost == GhostPolicy::Linear;
        let (m, p) = match (back, fwd) {
            (Some(m), Some(p)) => (m, p),
            (None, Some(p)) => (if lin { p } else { 0.0 }, p),
            (Some(m), None) => (m, if lin { m } else { 0.0 }),
            (None, None) => unreachable!("grid axes have at least 3 nodes"),
        };
        dminus[axis] = m;
        dplus[axis] = p;
    }
    (dminus, dplus)
}

/// Central difference gradient (one-sided at the faces).
pub fn central_gradient(field: &Field, idx: usize) -> Grad {
    let (m, p) = one_sided_gradients(field, idx);
    [0.5 * (m[0] + p[0]), 0.5 * (m[1] + p[1])]
}

/// Sup-norm distance, optionally restricted to nodes where `region` holds.
pub fn linf_distance(a: &Field, b: &Field, region: Option<&dyn Fn(usize) -> bool>) -> Result<f64> {
    if !a.grid().same_as(b.grid()) {
        return Err(Error::Usage("linf_distance: fields live on different grids".into()));
    }
    let mut m: f64 = 0.0;
    for (idx, (x, y)) in a.values().iter().zip(b.values()).enumerate() {
        if region.map_or(true, |r| r(idx)) {
            m = m.max((x - y).abs());
        }
    }
    Ok(m)
}

/// Largest `|u(i+1) - u(i)| / dx` over adjacent node pairs along every axis.
pub fn discrete_lipschitz(field: &Field) -> f64 {
    let grid = field.grid();
    let u = field.values();
    let mut m: f64 = 0.0;
    for idx in 0..grid.len() {
        let [ix, iy] = grid.unravel(idx);
        if ix + 1 < grid.n(0) {
            m = m.max((u[idx + 1] - u[idx]).abs() / grid.dx(0));
        }
        if grid.dim() == 2 && iy + 1 < grid.n(1) {
            m = m.max((u[idx + grid.n(0)] - u[idx]).abs() / grid.dx(1));
        }
    }
    m
}

/// Solver descriptor attached to a trajectory.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolverMeta {
    pub solver: String,
    pub theta: Option<f64>,
    pub steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
}

/// Time-ordered snapshots sharing one grid.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    snapshots: Vec<Field>,
    pub meta: SolverMeta,
}

impl Trajectory {
    pub fn new(meta: SolverMeta) -> Self {
        Trajectory {
            snapshots: Vec::new(),
            meta,
        }
    }

    pub fn push(&mut self, field: Field) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if !last.grid().same_as(field.grid()) {
                return Err(Error::Usage("trajectory snapshots must share one grid".into()));
            }
            if field.time() <= last.time() {
                return Err(Error::Usage(format!(
                    "snapshot times must increase strictly: {} after {}",
                    field.time(),
                    last.time()
                )));
            }
        }
        self.snapshots.push(field);
        Ok(())
    }

    pub fn snapshots(&self) -> &[Field] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn first(&self) -> Option<&Field> {
        self.snapshots.first()
    }

    pub fn last(&self) -> Option<&Field> {
        self.snapshots.last()
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.snapshots.first().map(|f| f.grid())
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|f| f.time()).collect()
    }

    /// Snapshot whose time is within `tol` of `t`, the closest one if several.
    pub fn at_time(&self, t: f64, tol: f64) -> Option<&Field> {
        self.snapshots
            .iter()
            .filter(|f| (f.time() - t).abs() <= tol)
            .min_by(|a, b| (a.time() - t).abs().total_cmp(&(b.time() - t).abs()))
    }
}
