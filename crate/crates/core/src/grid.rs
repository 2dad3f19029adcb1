//! Tensor space-time grids on intervals and axis-aligned rectangles, with a
//! labeled boundary partition and trapezoidal quadrature.
//!
//! The cylinder is `Q = Omega x (0, T)`. Nodes cover the closed spatial
//! domain (boundary nodes included) with uniform spacing per axis, and the
//! time axis carries `nt` levels from `0` to `T`. Fields store one value per
//! (space node, time level).

use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// One of the axis-aligned boundary pieces. In 1D only `XLow` (left
/// endpoint) and `XHigh` (right endpoint) exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    XLow,
    XHigh,
    YLow,
    YHigh,
}

impl Side {
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::XLow => [-1.0, 0.0],
            Side::XHigh => [1.0, 0.0],
            Side::YLow => [0.0, -1.0],
            Side::YHigh => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryLabel {
    Observed,
    Unobserved,
}

/// Which part of the boundary a quadrature or norm runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Observed,
    Unobserved,
    All,
}

#[derive(Debug, Clone)]
pub struct BoundaryNode {
    /// Flat node index into the grid.
    pub node: usize,
    /// Outward unit normal; corners get the normalized sum of the two
    /// adjacent side normals.
    pub normal: [f64; 2],
    /// Arc-length quadrature weight (1 per endpoint in 1D; trapezoidal along
    /// each side in 2D, corners accumulating half-cells from both sides).
    pub arc_weight: f64,
    /// Sides this node lies on (two for corners).
    pub sides: Vec<Side>,
}

#[derive(Debug)]
pub struct SpaceTimeGrid {
    pub dim: usize,
    /// Spatial extent per axis; `extent[1]` is unused in 1D.
    pub extent: [f64; 2],
    /// Node count per axis; `count[1] == 1` in 1D.
    pub count: [usize; 2],
    pub hx: f64,
    pub hy: f64,
    pub t_horizon: f64,
    pub nt: usize,
    pub tau: f64,
    boundary: Vec<BoundaryNode>,
    /// Map node index -> position in `boundary`, or usize::MAX for interior.
    boundary_lookup: Vec<usize>,
}

impl SpaceTimeGrid {
    pub fn n_nodes(&self) -> usize {
        self.count[0] * self.count[1]
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.count[0] + i
    }

    #[inline]
    pub fn node_ij(&self, k: usize) -> (usize, usize) {
        (k % self.count[0], k / self.count[0])
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.node_ij(k);
        (i as f64 * self.hx, j as f64 * self.hy)
    }

    #[inline]
    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.tau
    }

    pub fn boundary_nodes(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    pub fn boundary_position(&self, node: usize) -> Option<usize> {
        let p = self.boundary_lookup[node];
        (p != usize::MAX).then_some(p)
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_lookup[node] != usize::MAX
    }

    /// Spatial trapezoid weight of a node (product over axes).
    pub fn space_weight(&self, k: usize) -> f64 {
        let (i, j) = self.node_ij(k);
        let wx = trapezoid_weight(i, self.count[0], self.hx);
        let wy = if self.dim == 2 {
            trapezoid_weight(j, self.count[1], self.hy)
        } else {
            1.0
        };
        wx * wy
    }

    /// Trapezoid weight of a time level.
    pub fn time_weight(&self, level: usize) -> f64 {
        trapezoid_weight(level, self.nt, self.tau)
    }

    /// Trapezoid weights for a sub-window of time levels `[lo, hi]`
    /// (inclusive). Window edges get half weight, so nested windows give
    /// monotone quadrature.
    pub fn window_time_weight(&self, level: usize, lo: usize, hi: usize) -> f64 {
        if level < lo || level > hi || lo >= hi {
            0.0
        } else if level == lo || level == hi {
            self.tau / 2.0
        } else {
            self.tau
        }
    }

    /// Level range whose times lie inside `[t_lo, t_hi]`.
    pub fn level_window(&self, t_lo: f64, t_hi: f64) -> (usize, usize) {
        let eps = 1e-12 * self.t_horizon.max(1.0);
        let lo = (0..self.nt)
            .find(|&n| self.time(n) >= t_lo - eps)
            .unwrap_or(0);
        let hi = (0..self.nt)
            .rev()
            .find(|&n| self.time(n) <= t_hi + eps)
            .unwrap_or(self.nt - 1);
        (lo, hi)
    }
}

fn trapezoid_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i + 1 == n {
        h / 2.0
    } else {
        h
    }
}

/// Build a uniform tensor grid covering the closed domain.
///
/// `extent` and `nodes` carry one entry per spatial axis (1 or 2).
pub fn build_grid(extent: &[f64], nodes: &[usize], t_horizon: f64, nt: usize) -> Result<Arc<SpaceTimeGrid>> {
    let dim = extent.len();
    if dim == 0 || dim > 2 || nodes.len() != dim {
        return Err(Error::Grid(format!(
            "dimension must be 1 or 2 with matching node counts (got {} extents, {} counts)",
            extent.len(),
            nodes.len()
        )));
    }
    for &e in extent {
        if !(e > 0.0) {
            return Err(Error::Grid(format!("non-positive extent {e}")));
        }
    }
    for &n in nodes {
        if n < 3 {
            return Err(Error::Grid(format!("node count {n} < 3")));
        }
    }
    if !(t_horizon > 0.0) {
        return Err(Error::Grid(format!("non-positive time horizon {t_horizon}")));
    }
    if nt < 3 {
        return Err(Error::Grid(format!("time level count {nt} < 3")));
    }

    let nx = nodes[0];
    let ny = if dim == 2 { nodes[1] } else { 1 };
    let lx = extent[0];
    let ly = if dim == 2 { extent[1] } else { 0.0 };
    let hx = lx / (nx - 1) as f64;
    let hy = if dim == 2 { ly / (ny - 1) as f64 } else { 1.0 };
    let tau = t_horizon / (nt - 1) as f64;

    let mut grid = SpaceTimeGrid {
        dim,
        extent: [lx, ly],
        count: [nx, ny],
        hx,
        hy,
        t_horizon,
        nt,
        tau,
        boundary: Vec::new(),
        boundary_lookup: vec![usize::MAX; nx * ny],
    };

    let push = |grid: &mut SpaceTimeGrid, node: usize, side: Side, weight: f64| {
        if let Some(pos) = grid.boundary_position(node) {
            let b = &mut grid.boundary[pos];
            b.arc_weight += weight;
            if !b.sides.contains(&side) {
                b.sides.push(side);
                let n = side.normal();
                b.normal[0] += n[0];
                b.normal[1] += n[1];
                let len = (b.normal[0].powi(2) + b.normal[1].powi(2)).sqrt();
                b.normal[0] /= len;
                b.normal[1] /= len;
            }
        } else {
            grid.boundary_lookup[node] = grid.boundary.len();
            grid.boundary.push(BoundaryNode {
                node,
                normal: side.normal(),
                arc_weight: weight,
                sides: vec![side],
            });
        }
    };

    if dim == 1 {
        // Point measure: each endpoint has weight 1.
        push(&mut grid, 0, Side::XLow, 1.0);
        push(&mut grid, nx - 1, Side::XHigh, 1.0);
    } else {
        for j in 0..ny {
            let w = trapezoid_weight(j, ny, hy);
            let lo = j * nx;
            let hi = j * nx + nx - 1;
            push(&mut grid, lo, Side::XLow, w);
            push(&mut grid, hi, Side::XHigh, w);
        }
        for i in 0..nx {
            let w = trapezoid_weight(i, nx, hx);
            let lo = i;
            let hi = (ny - 1) * nx + i;
            push(&mut grid, lo, Side::YLow, w);
            push(&mut grid, hi, Side::YHigh, w);
        }
    }

    Ok(Arc::new(grid))
}

/// Labeled partition of the boundary into observed (`Gamma`) and unobserved
/// parts. A corner is observed when any of its sides is selected.
#[derive(Debug)]
pub struct BoundaryPartition {
    pub grid: Arc<SpaceTimeGrid>,
    pub gamma_sides: Vec<Side>,
    labels: Vec<BoundaryLabel>,
}

impl BoundaryPartition {
    pub fn label(&self, boundary_pos: usize) -> BoundaryLabel {
        self.labels[boundary_pos]
    }

    pub fn in_segment(&self, boundary_pos: usize, segment: Segment) -> bool {
        match segment {
            Segment::All => true,
            Segment::Observed => self.labels[boundary_pos] == BoundaryLabel::Observed,
            Segment::Unobserved => self.labels[boundary_pos] == BoundaryLabel::Unobserved,
        }
    }

    pub fn segment_node_count(&self, segment: Segment) -> usize {
        (0..self.labels.len())
            .filter(|&p| self.in_segment(p, segment))
            .count()
    }
}

pub fn partition_boundary(grid: &Arc<SpaceTimeGrid>, gamma: &[Side]) -> Result<BoundaryPartition> {
    if gamma.is_empty() {
        return Err(Error::Grid("observed subboundary must be non-empty".into()));
    }
    for &s in gamma {
        if grid.dim == 1 && matches!(s, Side::YLow | Side::YHigh) {
            return Err(Error::Grid(format!("side {s:?} does not exist in 1D")));
        }
    }
    let labels: Vec<BoundaryLabel> = grid
        .boundary
        .iter()
        .map(|b| {
            if b.sides.iter().any(|s| gamma.contains(s)) {
                BoundaryLabel::Observed
            } else {
                BoundaryLabel::Unobserved
            }
        })
        .collect();
    if !labels.contains(&BoundaryLabel::Observed) {
        return Err(Error::Grid("observed subboundary selects no nodes".into()));
    }
    Ok(BoundaryPartition {
        grid: grid.clone(),
        gamma_sides: gamma.to_vec(),
        labels,
    })
}

/// Values of a scalar function on grid nodes x time levels.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<SpaceTimeGrid>,
    /// Shape `(n_nodes, nt)`.
    pub values: Array2<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<SpaceTimeGrid>) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: Array2::zeros((grid.n_nodes(), grid.nt)),
        }
    }

    pub fn from_fn(grid: &Arc<SpaceTimeGrid>, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let mut values = Array2::zeros((grid.n_nodes(), grid.nt));
        for k in 0..grid.n_nodes() {
            let (x, y) = grid.coords(k);
            for n in 0..grid.nt {
                values[[k, n]] = f(x, y, grid.time(n));
            }
        }
        ScalarField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_expr(grid: &Arc<SpaceTimeGrid>, e: &Expr) -> Self {
        Self::from_fn(grid, |x, y, t| e.eval(x, y, t))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, c: f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: &self.values * c,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: &self.values - &other.values,
        }
    }

    pub fn l2_q(&self) -> f64 {
        integrate_interior_of(&self.grid, |k, n| self.values[[k, n]].powi(2))
            .max(0.0)
            .sqrt()
    }

    /// Discrete time derivative: centered inside, second-order one-sided at
    /// the first and last levels.
    pub fn dt(&self) -> Self {
        let g = &self.grid;
        let mut out = Array2::zeros((g.n_nodes(), g.nt));
        let tau = g.tau;
        for k in 0..g.n_nodes() {
            for n in 0..g.nt {
                out[[k, n]] = deriv1_line(|m| self.values[[k, m]], n, g.nt, tau);
            }
        }
        ScalarField {
            grid: g.clone(),
            values: out,
        }
    }

    pub fn dx(&self) -> Self {
        self.space_d1(0)
    }

    pub fn dy(&self) -> Self {
        assert_eq!(self.grid.dim, 2, "dy on a 1D field");
        self.space_d1(1)
    }

    pub fn dxx(&self) -> Self {
        self.space_d2(0)
    }

    pub fn dyy(&self) -> Self {
        assert_eq!(self.grid.dim, 2, "dyy on a 1D field");
        self.space_d2(1)
    }

    pub fn dxy(&self) -> Self {
        self.dx().space_d1(1)
    }

    fn space_d1(&self, axis: usize) -> Self {
        let g = &self.grid;
        let (nx, ny) = (g.count[0], g.count[1]);
        let h = if axis == 0 { g.hx } else { g.hy };
        let n_axis = if axis == 0 { nx } else { ny };
        let mut out = Array2::zeros((g.n_nodes(), g.nt));
        for n in 0..g.nt {
            for j in 0..ny {
                for i in 0..nx {
                    let k = g.node_index(i, j);
                    let pos = if axis == 0 { i } else { j };
                    let at = |m: usize| {
                        let kk = if axis == 0 {
                            g.node_index(m, j)
                        } else {
                            g.node_index(i, m)
                        };
                        self.values[[kk, n]]
                    };
                    out[[k, n]] = deriv1_line(at, pos, n_axis, h);
                }
            }
        }
        ScalarField {
            grid: g.clone(),
            values: out,
        }
    }

    fn space_d2(&self, axis: usize) -> Self {
        let g = &self.grid;
        let (nx, ny) = (g.count[0], g.count[1]);
        let h = if axis == 0 { g.hx } else { g.hy };
        let n_axis = if axis == 0 { nx } else { ny };
        let mut out = Array2::zeros((g.n_nodes(), g.nt));
        for n in 0..g.nt {
            for j in 0..ny {
                for i in 0..nx {
                    let k = g.node_index(i, j);
                    let pos = if axis == 0 { i } else { j };
                    let at = |m: usize| {
                        let kk = if axis == 0 {
                            g.node_index(m, j)
                        } else {
                            g.node_index(i, m)
                        };
                        self.values[[kk, n]]
                    };
                    out[[k, n]] = deriv2_line(at, pos, n_axis, h);
                }
            }
        }
        ScalarField {
            grid: g.clone(),
            values: out,
        }
    }
}

/// First derivative along a line of `n` samples with spacing `h`:
/// centered inside, 3-point one-sided at the ends.
pub fn deriv1_line(at: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    if i == 0 {
        (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
    } else if i + 1 == n {
        (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
    } else {
        (at(i + 1) - at(i - 1)) / (2.0 * h)
    }
}

/// Second derivative along a line: centered inside, 4-point one-sided at the
/// ends (3-point fallback when only 3 samples exist).
pub fn deriv2_line(at: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    let h2 = h * h;
    if i == 0 {
        if n >= 4 {
            (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / h2
        } else {
            (at(0) - 2.0 * at(1) + at(2)) / h2
        }
    } else if i + 1 == n {
        if n >= 4 {
            (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / h2
        } else {
            (at(n - 1) - 2.0 * at(n - 2) + at(n - 3)) / h2
        }
    } else {
        (at(i + 1) - 2.0 * at(i) + at(i - 1)) / h2
    }
}

fn integrate_interior_of(grid: &Arc<SpaceTimeGrid>, f: impl Fn(usize, usize) -> f64) -> f64 {
    let mut total = 0.0;
    for n in 0..grid.nt {
        let wt = grid.time_weight(n);
        let mut level = 0.0;
        for k in 0..grid.n_nodes() {
            level += grid.space_weight(k) * f(k, n);
        }
        total += wt * level;
    }
    total
}

/// Space-time trapezoidal quadrature of a field over the cylinder.
pub fn integrate_interior(f: &ScalarField) -> Result<f64> {
    if !f.all_finite() {
        return Err(Error::Grid("non-finite value in integrand".into()));
    }
    Ok(integrate_interior_of(&f.grid, |k, n| f.values[[k, n]]))
}

/// Weighted variant used throughout the estimate evaluators: integrates
/// `f(k, n)` over the cylinder without materializing a field.
pub fn integrate_q(grid: &Arc<SpaceTimeGrid>, f: impl Fn(usize, usize) -> f64) -> f64 {
    integrate_interior_of(grid, f)
}

/// Trace values on boundary nodes x time levels.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    pub grid: Arc<SpaceTimeGrid>,
    /// Shape `(n_boundary_nodes, nt)` in boundary-list order.
    pub values: Array2<f64>,
}

impl BoundaryTrace {
    pub fn zeros(grid: &Arc<SpaceTimeGrid>) -> Self {
        BoundaryTrace {
            grid: grid.clone(),
            values: Array2::zeros((grid.boundary_nodes().len(), grid.nt)),
        }
    }

    pub fn from_fn(grid: &Arc<SpaceTimeGrid>, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let nb = grid.boundary_nodes().len();
        let mut values = Array2::zeros((nb, grid.nt));
        for (p, b) in grid.boundary_nodes().iter().enumerate() {
            let (x, y) = grid.coords(b.node);
            for n in 0..grid.nt {
                values[[p, n]] = f(x, y, grid.time(n));
            }
        }
        BoundaryTrace {
            grid: grid.clone(),
            values,
        }
    }

    /// Restriction of a field to the boundary nodes.
    pub fn from_field(f: &ScalarField) -> Self {
        let grid = &f.grid;
        let nb = grid.boundary_nodes().len();
        let mut values = Array2::zeros((nb, grid.nt));
        for (p, b) in grid.boundary_nodes().iter().enumerate() {
            for n in 0..grid.nt {
                values[[p, n]] = f.values[[b.node, n]];
            }
        }
        BoundaryTrace {
            grid: grid.clone(),
            values,
        }
    }

    pub fn dt(&self) -> Self {
        let g = &self.grid;
        let nb = g.boundary_nodes().len();
        let mut out = Array2::zeros((nb, g.nt));
        for p in 0..nb {
            for n in 0..g.nt {
                out[[p, n]] = deriv1_line(|m| self.values[[p, m]], n, g.nt, g.tau);
            }
        }
        BoundaryTrace {
            grid: g.clone(),
            values: out,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        BoundaryTrace {
            grid: self.grid.clone(),
            values: &self.values * c,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        BoundaryTrace {
            grid: self.grid.clone(),
            values: &self.values - &other.values,
        }
    }
}

/// Time-trapezoid (x arc-length trapezoid in 2D) quadrature of a boundary
/// trace over the selected segment of `partial Omega x (0, T)`.
pub fn integrate_boundary(
    trace: &BoundaryTrace,
    partition: &BoundaryPartition,
    segment: Segment,
) -> Result<f64> {
    if partition.segment_node_count(segment) == 0 {
        return Err(Error::Grid(format!("boundary segment {segment:?} has no nodes")));
    }
    let grid = &trace.grid;
    let mut total = 0.0;
    for n in 0..grid.nt {
        let wt = grid.time_weight(n);
        let mut level = 0.0;
        for (p, b) in grid.boundary_nodes().iter().enumerate() {
            if partition.in_segment(p, segment) {
                level += b.arc_weight * trace.values[[p, n]];
            }
        }
        total += wt * level;
    }
    Ok(total)
}

/// As `integrate_boundary` but with a callback, used by the weighted
/// estimate evaluators. Returns 0 over an empty segment instead of erroring
/// (norm terms over an empty unobserved part vanish).
pub fn integrate_sigma(
    grid: &Arc<SpaceTimeGrid>,
    partition: &BoundaryPartition,
    segment: Segment,
    f: impl Fn(usize, usize) -> f64,
) -> f64 {
    let mut total = 0.0;
    for n in 0..grid.nt {
        let wt = grid.time_weight(n);
        let mut level = 0.0;
        for (p, b) in grid.boundary_nodes().iter().enumerate() {
            if partition.in_segment(p, segment) {
                level += b.arc_weight * f(p, n);
            }
        }
        total += wt * level;
    }
    total
}
