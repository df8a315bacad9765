//! Domains, uniform grids, nodal fields and trajectories, and the sup-norms
//! every other module measures with.
//!
//! Nodes of a rectangle grid are numbered with `x` fastest:
//! `index = j * n_x + i`. Intervals are grids with `n_y == 1`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { x_lo: f64, x_hi: f64 },
    Rectangle { x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64 },
}

impl Domain {
    pub fn interval(x_lo: f64, x_hi: f64) -> Result<Self> {
        check_bounds("x", x_lo, x_hi)?;
        Ok(Domain::Interval { x_lo, x_hi })
    }

    pub fn rectangle(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        check_bounds("x", x_lo, x_hi)?;
        check_bounds("y", y_lo, y_hi)?;
        Ok(Domain::Rectangle { x_lo, x_hi, y_lo, y_hi })
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn x_bounds(&self) -> (f64, f64) {
        match *self {
            Domain::Interval { x_lo, x_hi } | Domain::Rectangle { x_lo, x_hi, .. } => (x_lo, x_hi),
        }
    }

    /// `(0, 0)` for intervals.
    pub fn y_bounds(&self) -> (f64, f64) {
        match *self {
            Domain::Interval { .. } => (0.0, 0.0),
            Domain::Rectangle { y_lo, y_hi, .. } => (y_lo, y_hi),
        }
    }

    /// Length of an interval, area of a rectangle.
    pub fn volume(&self) -> f64 {
        match *self {
            Domain::Interval { x_lo, x_hi } => x_hi - x_lo,
            Domain::Rectangle { x_lo, x_hi, y_lo, y_hi } => (x_hi - x_lo) * (y_hi - y_lo),
        }
    }
}

fn check_bounds(axis: &str, lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::invalid(format!(
            "{axis}-bounds must be finite with lo < hi, got ({lo}, {hi})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    domain: Domain,
    n_x: usize,
    n_y: usize,
}

impl SpatialGrid {
    pub fn interval(domain: Domain, n_x: usize) -> Result<Self> {
        if domain.dim() != 1 {
            return Err(Error::invalid("interval grid needs an interval domain"));
        }
        if n_x < 3 {
            return Err(Error::invalid(format!("n_x must be >= 3, got {n_x}")));
        }
        Ok(SpatialGrid { domain, n_x, n_y: 1 })
    }

    pub fn rectangle(domain: Domain, n_x: usize, n_y: usize) -> Result<Self> {
        if domain.dim() != 2 {
            return Err(Error::invalid("rectangle grid needs a rectangle domain"));
        }
        if n_x < 3 || n_y < 3 {
            return Err(Error::invalid(format!("node counts must be >= 3, got ({n_x}, {n_y})")));
        }
        Ok(SpatialGrid { domain, n_x, n_y })
    }

    /// Grid on `domain`; `n_y` is ignored for intervals.
    pub fn new(domain: Domain, n_x: usize, n_y: usize) -> Result<Self> {
        match domain {
            Domain::Interval { .. } => Self::interval(domain, n_x),
            Domain::Rectangle { .. } => Self::rectangle(domain, n_x, n_y),
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn node_count(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn h_x(&self) -> f64 {
        let (lo, hi) = self.domain.x_bounds();
        (hi - lo) / (self.n_x - 1) as f64
    }

    /// Zero for intervals.
    pub fn h_y(&self) -> f64 {
        if self.n_y == 1 {
            return 0.0;
        }
        let (lo, hi) = self.domain.y_bounds();
        (hi - lo) / (self.n_y - 1) as f64
    }

    /// Largest spacing, the `h` in discretization error estimates.
    pub fn h_max(&self) -> f64 {
        self.h_x().max(self.h_y())
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n_x + i
    }

    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.n_x, node / self.n_x)
    }

    pub fn x_at(&self, i: usize) -> f64 {
        let (lo, hi) = self.domain.x_bounds();
        if i + 1 == self.n_x {
            hi
        } else {
            lo + i as f64 * self.h_x()
        }
    }

    pub fn y_at(&self, j: usize) -> f64 {
        let (lo, hi) = self.domain.y_bounds();
        if self.n_y == 1 {
            0.0
        } else if j + 1 == self.n_y {
            hi
        } else {
            lo + j as f64 * self.h_y()
        }
    }

    pub fn coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.ij(node);
        (self.x_at(i), self.y_at(j))
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let (i, j) = self.ij(node);
        let x_edge = i == 0 || i + 1 == self.n_x;
        match self.domain {
            Domain::Interval { .. } => x_edge,
            Domain::Rectangle { .. } => x_edge || j == 0 || j + 1 == self.n_y,
        }
    }

    /// Boundary node indices in increasing order. For an interval this is
    /// `[left, right]`.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| self.is_boundary(n)).collect()
    }

    /// Measure of the control cell owned by `node` (half cells on edges,
    /// quarter cells on rectangle corners). Sums to the domain volume.
    pub fn cell_measure(&self, node: usize) -> f64 {
        let (i, j) = self.ij(node);
        let wx = if i == 0 || i + 1 == self.n_x { 0.5 } else { 1.0 } * self.h_x();
        match self.domain {
            Domain::Interval { .. } => wx,
            Domain::Rectangle { .. } => {
                let wy = if j == 0 || j + 1 == self.n_y { 0.5 } else { 1.0 } * self.h_y();
                wx * wy
            }
        }
    }

    /// Portion of the boundary owned by a boundary node: 1 at interval
    /// endpoints, edge segments for rectangles. Zero for interior nodes.
    pub fn boundary_measure(&self, node: usize) -> f64 {
        if !self.is_boundary(node) {
            return 0.0;
        }
        match self.domain {
            Domain::Interval { .. } => 1.0,
            Domain::Rectangle { .. } => {
                let (i, j) = self.ij(node);
                let on_x_edge = i == 0 || i + 1 == self.n_x;
                let on_y_edge = j == 0 || j + 1 == self.n_y;
                let along_y = if j == 0 || j + 1 == self.n_y { 0.5 } else { 1.0 } * self.h_y();
                let along_x = if i == 0 || i + 1 == self.n_x { 0.5 } else { 1.0 } * self.h_x();
                let mut m = 0.0;
                if on_x_edge {
                    m += along_y;
                }
                if on_y_edge {
                    m += along_x;
                }
                m
            }
        }
    }

    /// Grid on the same domain with each spacing divided by `factor`.
    pub fn refined(&self, factor: usize) -> SpatialGrid {
        let factor = factor.max(1);
        let n_y = if self.n_y == 1 { 1 } else { (self.n_y - 1) * factor + 1 };
        SpatialGrid {
            domain: self.domain,
            n_x: (self.n_x - 1) * factor + 1,
            n_y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Mismatch(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_fn(grid: SpatialGrid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|n| {
                let (x, y) = grid.coords(n);
                f(x, y)
            })
            .collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// First non-finite node, if any.
    pub fn validate(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(node) => Err(Error::NonFinite { node }),
            None => Ok(()),
        }
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scaled(&self, s: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Field {
            grid: self.grid,
            values,
        })
    }
}

/// Maximum of |u| over the grid nodes.
pub fn sup_norm_space(field: &Field) -> Result<f64> {
    let mut sup = 0.0_f64;
    for (node, v) in field.values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { node });
        }
        sup = sup.max(v.abs());
    }
    Ok(sup)
}

/// Node and value of the largest |u|.
pub fn argmax_abs(field: &Field) -> (usize, f64) {
    field.values.iter().enumerate().fold(
        (0, 0.0),
        |(bn, bv), (n, &v)| if v.abs() > bv { (n, v.abs()) } else { (bn, bv) },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: SpatialGrid,
    times: Vec<f64>,
    fields: Vec<Field>,
}

impl Trajectory {
    pub fn new(grid: SpatialGrid, times: Vec<f64>, fields: Vec<Field>) -> Result<Self> {
        if times.len() != fields.len() {
            return Err(Error::Mismatch(format!(
                "{} time samples but {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("time samples must be strictly increasing"));
        }
        if fields.iter().any(|f| f.grid != grid) {
            return Err(Error::Mismatch("trajectory fields must share one grid".into()));
        }
        Ok(Trajectory { grid, times, fields })
    }

    /// Starts a trajectory with its initial field at `t0`.
    pub fn starting_at(t0: f64, initial: Field) -> Self {
        Trajectory {
            grid: initial.grid,
            times: vec![t0],
            fields: vec![initial],
        }
    }

    pub fn push(&mut self, t: f64, field: Field) -> Result<()> {
        if field.grid != self.grid {
            return Err(Error::Mismatch("field grid differs from trajectory grid".into()));
        }
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(Error::invalid(format!("time {t} does not follow {last}")));
            }
        }
        self.times.push(t);
        self.fields.push(field);
        Ok(())
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &Field)> {
        self.times
            .last()
            .map(|&t| (t, self.fields.last().expect("same length")))
    }

    /// `sup_norm_space` at every sample.
    pub fn sup_series(&self) -> Result<Vec<f64>> {
        self.fields.iter().map(sup_norm_space).collect()
    }

    /// Pointwise combination of two trajectories on identical samples.
    pub fn zip_with(&self, other: &Trajectory, f: impl Fn(f64, f64) -> f64) -> Result<Trajectory> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("trajectories live on different grids".into()));
        }
        if self.times.len() != other.times.len() || self.times.iter().zip(&other.times).any(|(a, b)| a != b) {
            return Err(Error::Mismatch("trajectories have different time samples".into()));
        }
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.zip_with(b, &f))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            grid: self.grid,
            times: self.times.clone(),
            fields,
        })
    }
}

/// Maximum of `sup_norm_space` over all samples.
pub fn sup_norm_spacetime(traj: &Trajectory) -> Result<f64> {
    if traj.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    traj.fields
        .iter()
        .try_fold(0.0_f64, |acc, f| Ok(acc.max(sup_norm_space(f)?)))
}

/// Pointwise `t1 - t2`.
pub fn diff_trajectory(t1: &Trajectory, t2: &Trajectory) -> Result<Trajectory> {
    t1.zip_with(t2, |a, b| a - b)
}
