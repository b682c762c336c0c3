//! Tensor-product grids on an interval or axis-aligned rectangle, the time
//! grid, and the boundary description used by all surface integrals.
//!
//! Conventions, shared by data generation and inversion:
//! - node positions are exactly `i*h_x` (and `j*h_y`), `h = L/(N-1)`;
//! - flattened node index is `j*N_x + i` (row-major, `j = 0` in 1-D);
//! - 1-D boundary "integrals" use the counting measure: weight 1 at each
//!   endpoint, outward normal -1 and +1;
//! - 2-D boundary integrals use edge-wise trapezoid weights; a corner node
//!   belongs to both incident edges and carries `(h_x+h_y)/2`. Corner
//!   normals are unit diagonals and are only consulted by pointwise checks,
//!   never by the conormal boundary rows (those act edge-wise).

use crate::error::{Error, Result};

/// One node of the discrete boundary Γ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    /// Flattened node index into a full-grid vector.
    pub index: usize,
    /// Axis indices of the node.
    pub i: usize,
    pub j: usize,
    /// Quadrature weight (length measure in 2-D, counting measure in 1-D).
    pub weight: f64,
    /// Outward unit normal; `normal[1] = 0` in 1-D, unit diagonal at corners.
    pub normal: [f64; 2],
}

/// Uniform tensor-product grid over `[0, L_x]` (times `[0, L_y]` in 2-D).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    boundary: Vec<BoundaryNode>,
}

/// Build a grid. `extents` and `node_counts` use only their first `dim`
/// entries. Trace stencils need three nodes per axis, hence the lower bound.
pub fn build_grid(dim: usize, extents: [f64; 2], node_counts: [usize; 2]) -> Result<SpatialGrid> {
    if dim != 1 && dim != 2 {
        return Err(Error::Grid(format!("dim must be 1 or 2, got {dim}")));
    }
    let (lx, nx) = (extents[0], node_counts[0]);
    let (ly, ny) = if dim == 2 {
        (extents[1], node_counts[1])
    } else {
        (0.0, 1)
    };
    if !(lx > 0.0) || !lx.is_finite() || (dim == 2 && (!(ly > 0.0) || !ly.is_finite())) {
        return Err(Error::Grid("extents must be positive and finite".into()));
    }
    if nx < 3 || (dim == 2 && ny < 3) {
        return Err(Error::Grid(format!(
            "node counts must be >= 3 per axis (boundary stencils span three nodes), got {nx}x{ny}"
        )));
    }
    let hx = lx / (nx - 1) as f64;
    let hy = if dim == 2 { ly / (ny - 1) as f64 } else { 0.0 };
    let mut grid = SpatialGrid {
        dim,
        lx,
        ly,
        nx,
        ny,
        hx,
        hy,
        boundary: Vec::new(),
    };
    grid.boundary = grid.build_boundary();
    Ok(grid)
}

impl SpatialGrid {
    fn build_boundary(&self) -> Vec<BoundaryNode> {
        let mut nodes = Vec::new();
        if self.dim == 1 {
            nodes.push(BoundaryNode {
                index: 0,
                i: 0,
                j: 0,
                weight: 1.0,
                normal: [-1.0, 0.0],
            });
            nodes.push(BoundaryNode {
                index: self.nx - 1,
                i: self.nx - 1,
                j: 0,
                weight: 1.0,
                normal: [1.0, 0.0],
            });
            return nodes;
        }
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..self.ny {
            for i in 0..self.nx {
                let on_xmin = i == 0;
                let on_xmax = i == self.nx - 1;
                let on_ymin = j == 0;
                let on_ymax = j == self.ny - 1;
                if !(on_xmin || on_xmax || on_ymin || on_ymax) {
                    continue;
                }
                // trapezoid weight summed over incident edges: a corner is
                // the end of one x-run and one y-run
                let mut weight = 0.0;
                if on_ymin || on_ymax {
                    weight += if on_xmin || on_xmax { self.hx / 2.0 } else { self.hx };
                }
                if on_xmin || on_xmax {
                    weight += if on_ymin || on_ymax { self.hy / 2.0 } else { self.hy };
                }
                let mut normal = [0.0, 0.0];
                if on_xmin {
                    normal[0] = -1.0;
                }
                if on_xmax {
                    normal[0] = 1.0;
                }
                if on_ymin {
                    normal[1] = -1.0;
                }
                if on_ymax {
                    normal[1] = 1.0;
                }
                if normal[0] != 0.0 && normal[1] != 0.0 {
                    normal[0] *= inv_sqrt2;
                    normal[1] *= inv_sqrt2;
                }
                nodes.push(BoundaryNode {
                    index: j * self.nx + i,
                    i,
                    j,
                    weight,
                    normal,
                });
            }
        }
        nodes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn num_nodes(&self) -> usize {
        self.nx * self.ny
    }

    /// Flattened index of node `(i, j)`.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    /// Coordinates of a flattened node index; `y` is `None` in 1-D.
    pub fn coords(&self, index: usize) -> (f64, Option<f64>) {
        let i = index % self.nx;
        let j = index / self.nx;
        let y = if self.dim == 2 { Some(self.y(j)) } else { None };
        (self.x(i), y)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        if self.dim == 1 {
            i == 0 || i == self.nx - 1
        } else {
            i == 0 || i == self.nx - 1 || j == 0 || j == self.ny - 1
        }
    }

    /// Boundary nodes in flattened-index order (deterministic).
    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    /// Per-node boundary mask, indexed by flattened node index.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_nodes()];
        for b in &self.boundary {
            mask[b.index] = true;
        }
        mask
    }

    /// Total boundary measure: Σ w (perimeter in 2-D, 2 in 1-D).
    pub fn boundary_measure(&self) -> f64 {
        self.boundary.iter().map(|b| b.weight).sum()
    }

    /// Discrete surface integral Σ u·φ·w over the boundary nodes. Both
    /// slices hold one value per boundary node, in `boundary()` order. Exact
    /// for products linear along each edge.
    pub fn boundary_integral(&self, values: &[f64], weights_phi: &[f64]) -> Result<f64> {
        if values.len() != self.boundary.len() || weights_phi.len() != self.boundary.len() {
            return Err(Error::Grid(format!(
                "boundary integral: expected {} values per argument, got {} and {}",
                self.boundary.len(),
                values.len(),
                weights_phi.len()
            )));
        }
        let mut acc = 0.0;
        for (k, b) in self.boundary.iter().enumerate() {
            acc += values[k] * weights_phi[k] * b.weight;
        }
        Ok(acc)
    }

    /// Refined grid with `(N-1)*factor + 1` nodes per axis. Coarse node `i`
    /// sits at fine node `i*factor`.
    pub fn refine(&self, factor: usize) -> Result<SpatialGrid> {
        if factor < 2 {
            return Err(Error::Grid(format!("refine factor must be >= 2, got {factor}")));
        }
        build_grid(
            self.dim,
            [self.lx, self.ly],
            [(self.nx - 1) * factor + 1, if self.dim == 2 { (self.ny - 1) * factor + 1 } else { 0 }],
        )
    }
}

/// Uniform time grid on `[0, T]` with `steps` steps (`steps + 1` levels) and
/// continuation-window boundaries aligned to time nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    steps: usize,
    /// Window boundaries as level indices: strictly increasing, first 0,
    /// last `steps`.
    windows: Vec<usize>,
}

impl TimeGrid {
    pub fn new(t_end: f64, steps: usize) -> Result<TimeGrid> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(Error::Grid("time horizon must be positive and finite".into()));
        }
        if steps < 1 {
            return Err(Error::Grid("time grid needs at least one step".into()));
        }
        Ok(TimeGrid {
            t_end,
            steps,
            windows: vec![0, steps],
        })
    }

    /// Replace the window boundaries. Indices must start at 0, end at
    /// `steps`, and be strictly increasing.
    pub fn with_windows(mut self, boundaries: Vec<usize>) -> Result<TimeGrid> {
        if boundaries.first() != Some(&0) || boundaries.last() != Some(&self.steps) {
            return Err(Error::Grid(
                "window boundaries must start at level 0 and end at the final level".into(),
            ));
        }
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Grid("window boundaries must be strictly increasing".into()));
        }
        self.windows = boundaries;
        Ok(self)
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn num_levels(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn t(&self, level: usize) -> f64 {
        level as f64 * self.dt()
    }

    pub fn windows(&self) -> &[usize] {
        &self.windows
    }

    /// Refined grid with `steps*factor` steps; window boundaries are scaled
    /// so they stay on the same instants.
    pub fn refine(&self, factor: usize) -> Result<TimeGrid> {
        if factor < 2 {
            return Err(Error::Grid(format!("refine factor must be >= 2, got {factor}")));
        }
        Ok(TimeGrid {
            t_end: self.t_end,
            steps: self.steps * factor,
            windows: self.windows.iter().map(|&w| w * factor).collect(),
        })
    }
}
