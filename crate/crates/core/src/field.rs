//! Discrete space-time fields: sampling of analytic/tabulated data onto
//! grids, the solution field type, and the trajectory of unknown
//! coefficients.
//!
//! Layout conventions:
//! - space-time sample arrays are `[level * num_nodes + node]`;
//! - boundary sample arrays are `[level * num_boundary_nodes + k]` with `k`
//!   indexing `grid.boundary()` order;
//! - fields may start at a nonzero time level (continuation windows solve on
//!   sub-ranges of the global time grid), so accessors take absolute levels.

use crate::error::{Error, Result};
use crate::expr::{FieldSpec, Point, Var};
use crate::grid::{SpatialGrid, TimeGrid};

/// Sample a field at every (time level, node): `[level * nodes + node]`.
pub fn sample_field(f: &FieldSpec, grid: &SpatialGrid, tg: &TimeGrid) -> Result<Vec<f64>> {
    let nodes = grid.num_nodes();
    let mut out = vec![0.0; tg.num_levels() * nodes];
    for n in 0..tg.num_levels() {
        let t = tg.t(n);
        for idx in 0..nodes {
            let (x, y) = grid.coords(idx);
            out[n * nodes + idx] = f.eval(Point::new(t, x, y))?;
        }
    }
    Ok(out)
}

/// Sample a field at every (time level, boundary node).
pub fn sample_on_boundary(f: &FieldSpec, grid: &SpatialGrid, tg: &TimeGrid) -> Result<Vec<f64>> {
    let nb = grid.boundary().len();
    let mut out = vec![0.0; tg.num_levels() * nb];
    for n in 0..tg.num_levels() {
        let t = tg.t(n);
        for (k, b) in grid.boundary().iter().enumerate() {
            let (x, y) = grid.coords(b.index);
            out[n * nb + k] = f.eval(Point::new(t, x, y))?;
        }
    }
    Ok(out)
}

/// Sample a purely spatial field at every node for a fixed time.
pub fn sample_nodes_at(f: &FieldSpec, grid: &SpatialGrid, t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; grid.num_nodes()];
    for idx in 0..grid.num_nodes() {
        let (x, y) = grid.coords(idx);
        out[idx] = f.eval(Point::new(t, x, y))?;
    }
    Ok(out)
}

/// Sample a time-only field (true coefficient, measured series) on the time
/// grid. Spatial variables are rejected rather than silently pinned.
pub fn sample_time_series(f: &FieldSpec, tg: &TimeGrid, what: &str) -> Result<Vec<f64>> {
    if f.uses_var(Var::X) || f.uses_var(Var::Y) {
        return Err(Error::Field(format!(
            "{what} must be a function of t only, but references x or y"
        )));
    }
    let mut out = vec![0.0; tg.num_levels()];
    for n in 0..tg.num_levels() {
        out[n] = f.eval(Point::new(tg.t(n), 0.0, None))?;
    }
    Ok(out)
}

/// A scalar field on the grid over a contiguous range of time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    first_level: usize,
    num_levels: usize,
    num_nodes: usize,
    values: Vec<f64>,
}

impl StateField {
    pub fn zeros(first_level: usize, num_levels: usize, num_nodes: usize) -> StateField {
        assert!(num_levels > 0);
        StateField {
            first_level,
            num_levels,
            num_nodes,
            values: vec![0.0; num_levels * num_nodes],
        }
    }

    pub fn first_level(&self) -> usize {
        self.first_level
    }

    pub fn last_level(&self) -> usize {
        self.first_level + self.num_levels - 1
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Node values at an absolute time level.
    pub fn level(&self, level: usize) -> &[f64] {
        assert!(
            level >= self.first_level && level <= self.last_level(),
            "level {level} outside [{}, {}]",
            self.first_level,
            self.last_level()
        );
        let off = (level - self.first_level) * self.num_nodes;
        &self.values[off..off + self.num_nodes]
    }

    pub fn level_mut(&mut self, level: usize) -> &mut [f64] {
        assert!(level >= self.first_level && level <= self.last_level());
        let off = (level - self.first_level) * self.num_nodes;
        &mut self.values[off..off + self.num_nodes]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Max |u| over all levels and nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// The `s` unknown time functions sampled on a contiguous range of time
/// levels; row `i` holds `q_{i+1}(t_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTrajectory {
    s: usize,
    first_level: usize,
    num_levels: usize,
    values: Vec<f64>,
}

impl QTrajectory {
    pub fn zeros(s: usize, first_level: usize, num_levels: usize) -> QTrajectory {
        assert!(num_levels > 0);
        QTrajectory {
            s,
            first_level,
            num_levels,
            values: vec![0.0; s * num_levels],
        }
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn first_level(&self) -> usize {
        self.first_level
    }

    pub fn last_level(&self) -> usize {
        self.first_level + self.num_levels - 1
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn get(&self, comp: usize, level: usize) -> f64 {
        self.values[self.offset(comp, level)]
    }

    pub fn set(&mut self, comp: usize, level: usize, v: f64) {
        let off = self.offset(comp, level);
        self.values[off] = v;
    }

    fn offset(&self, comp: usize, level: usize) -> usize {
        assert!(comp < self.s);
        assert!(
            level >= self.first_level && level <= self.last_level(),
            "level {level} outside [{}, {}]",
            self.first_level,
            self.last_level()
        );
        comp * self.num_levels + (level - self.first_level)
    }

    /// Samples of component `comp` over the covered levels.
    pub fn component(&self, comp: usize) -> &[f64] {
        assert!(comp < self.s);
        &self.values[comp * self.num_levels..(comp + 1) * self.num_levels]
    }

    /// The q-vector (length s) at one absolute level.
    pub fn at_level(&self, level: usize) -> Vec<f64> {
        (0..self.s).map(|i| self.get(i, level)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Copy `other`'s values into the overlapping level range, keeping
    /// existing values at levels `other` does not cover (and, when
    /// `keep_first_shared` is set, also at `other`'s first level: at a
    /// window junction the earlier window's value wins).
    pub fn splice(&mut self, other: &QTrajectory, keep_first_shared: bool) {
        assert_eq!(self.s, other.s);
        let lo = other.first_level + usize::from(keep_first_shared);
        for level in lo.max(self.first_level)..=other.last_level().min(self.last_level()) {
            for comp in 0..self.s {
                self.set(comp, level, other.get(comp, level));
            }
        }
    }
}
