//! Boundary traces of a discrete field and of operator images, and surface
//! pairings with the measurement weights.
//!
//! All stencils act on nodes ordered boundary-inward along an axis:
//! - first derivatives: 3-point one-sided in a boundary-crossing direction,
//!   centered tangentially; exact on quadratics;
//! - second derivatives: 4-point one-sided in a boundary-crossing direction,
//!   centered tangentially; exact on cubics;
//! - mixed u_xy: composition of the per-axis first-derivative stencils
//!   (one-sided at corners).
//!
//! The same one-sided first-derivative weights are used by the forward
//! solver's boundary rows, so the conormal condition and the extracted
//! conormal trace are consistent by construction. At a 2-D corner both
//! incident edges prescribe the same one-sided stencils on a tensor grid,
//! so the edge-wise evaluations coincide; no averaging is actually needed.

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::problem::DiscreteProblem;

/// One-sided first-derivative weights on (boundary, +1, +2) nodes; divide by
/// 2h and negate on a max-side boundary.
pub const ONE_SIDED_FIRST: [f64; 3] = [-3.0, 4.0, -1.0];

/// One-sided second-derivative weights on (boundary, +1, +2, +3) nodes;
/// divide by h^2 (no sign flip: even order).
pub const ONE_SIDED_SECOND: [f64; 4] = [2.0, -5.0, 4.0, -1.0];

/// First-derivative data at the boundary nodes.
#[derive(Debug, Clone)]
pub struct FirstDerivs {
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

/// First and second derivative data at the boundary nodes.
#[derive(Debug, Clone)]
pub struct BoundaryDerivs {
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub uxx: Vec<f64>,
    pub uyy: Vec<f64>,
    pub uxy: Vec<f64>,
}

/// Restriction of a node-value array to the boundary nodes (they are grid
/// nodes, so this is a copy in `grid.boundary()` order).
pub fn trace_value(grid: &SpatialGrid, values: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), grid.num_nodes());
    grid.boundary().iter().map(|b| values[b.index]).collect()
}

/// The 3-point axis stencil for a first derivative at node `i` of `n`,
/// returned as (offsets-from-i, weights) already divided by 2h and signed.
#[inline]
fn first_stencil(i: usize, n: usize, h: f64) -> ([isize; 3], [f64; 3]) {
    let d = 2.0 * h;
    if i == 0 {
        ([0, 1, 2], [ONE_SIDED_FIRST[0] / d, ONE_SIDED_FIRST[1] / d, ONE_SIDED_FIRST[2] / d])
    } else if i == n - 1 {
        ([0, -1, -2], [-ONE_SIDED_FIRST[0] / d, -ONE_SIDED_FIRST[1] / d, -ONE_SIDED_FIRST[2] / d])
    } else {
        ([-1, 0, 1], [-1.0 / d, 0.0, 1.0 / d])
    }
}

/// The axis stencil for a second derivative at node `i` of `n`: one-sided
/// 4-point at the ends, centered 3-point inside (padded with weight 0).
#[inline]
fn second_stencil(i: usize, n: usize, h: f64) -> ([isize; 4], [f64; 4]) {
    let d = h * h;
    if i == 0 {
        (
            [0, 1, 2, 3],
            [
                ONE_SIDED_SECOND[0] / d,
                ONE_SIDED_SECOND[1] / d,
                ONE_SIDED_SECOND[2] / d,
                ONE_SIDED_SECOND[3] / d,
            ],
        )
    } else if i == n - 1 {
        (
            [0, -1, -2, -3],
            [
                ONE_SIDED_SECOND[0] / d,
                ONE_SIDED_SECOND[1] / d,
                ONE_SIDED_SECOND[2] / d,
                ONE_SIDED_SECOND[3] / d,
            ],
        )
    } else {
        ([-1, 0, 1, 0], [1.0 / d, -2.0 / d, 1.0 / d, 0.0])
    }
}

/// Trace values and first partials at every boundary node. Needs >= 3 nodes
/// per axis (guaranteed by grid construction).
pub fn boundary_first_derivatives(grid: &SpatialGrid, values: &[f64]) -> Result<FirstDerivs> {
    assert_eq!(values.len(), grid.num_nodes());
    let nb = grid.boundary().len();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = FirstDerivs {
        u: vec![0.0; nb],
        ux: vec![0.0; nb],
        uy: vec![0.0; nb],
    };
    for (k, b) in grid.boundary().iter().enumerate() {
        out.u[k] = values[b.index];
        let (offs, w) = first_stencil(b.i, nx, grid.hx());
        for (o, c) in offs.iter().zip(w) {
            if c != 0.0 {
                let ii = (b.i as isize + o) as usize;
                out.ux[k] += c * values[grid.idx(ii, b.j)];
            }
        }
        if grid.dim() == 2 {
            let (offs, w) = first_stencil(b.j, ny, grid.hy());
            for (o, c) in offs.iter().zip(w) {
                if c != 0.0 {
                    let jj = (b.j as isize + o) as usize;
                    out.uy[k] += c * values[grid.idx(b.i, jj)];
                }
            }
        }
    }
    Ok(out)
}

/// Trace values and first/second partials at every boundary node. The
/// one-sided second-derivative stencils span 4 nodes, hence the size
/// requirement.
pub fn boundary_derivatives(grid: &SpatialGrid, values: &[f64]) -> Result<BoundaryDerivs> {
    if grid.nx() < 4 || (grid.dim() == 2 && grid.ny() < 4) {
        return Err(Error::Grid(format!(
            "second-derivative traces need >= 4 nodes per axis, grid is {}x{}",
            grid.nx(),
            grid.ny()
        )));
    }
    let first = boundary_first_derivatives(grid, values)?;
    let nb = grid.boundary().len();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = BoundaryDerivs {
        u: first.u,
        ux: first.ux,
        uy: first.uy,
        uxx: vec![0.0; nb],
        uyy: vec![0.0; nb],
        uxy: vec![0.0; nb],
    };
    for (k, b) in grid.boundary().iter().enumerate() {
        let (offs, w) = second_stencil(b.i, nx, grid.hx());
        for (o, c) in offs.iter().zip(w) {
            if c != 0.0 {
                let ii = (b.i as isize + o) as usize;
                out.uxx[k] += c * values[grid.idx(ii, b.j)];
            }
        }
        if grid.dim() == 2 {
            let (offs, w) = second_stencil(b.j, ny, grid.hy());
            for (o, c) in offs.iter().zip(w) {
                if c != 0.0 {
                    let jj = (b.j as isize + o) as usize;
                    out.uyy[k] += c * values[grid.idx(b.i, jj)];
                }
            }
            let (xo, xw) = first_stencil(b.i, nx, grid.hx());
            let (yo, yw) = first_stencil(b.j, ny, grid.hy());
            let mut acc = 0.0;
            for (ox, cx) in xo.iter().zip(xw) {
                if cx == 0.0 {
                    continue;
                }
                let ii = (b.i as isize + ox) as usize;
                for (oy, cy) in yo.iter().zip(yw) {
                    if cy != 0.0 {
                        let jj = (b.j as isize + oy) as usize;
                        acc += cx * cy * values[grid.idx(ii, jj)];
                    }
                }
            }
            out.uxy[k] = acc;
        }
    }
    Ok(out)
}

/// Which operator's boundary image to form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// The second-order part A_0 (leading + drift + reaction).
    Zeroth,
    /// The i-th first-order operator A_{i+1}, index into `dp.ops`.
    First(usize),
}

/// Boundary trace of `A u` for a field's node values at one time level,
/// with coefficients sampled at that level.
pub fn operator_trace(
    dp: &DiscreteProblem,
    kind: OperatorKind,
    values: &[f64],
    level: usize,
) -> Result<Vec<f64>> {
    let nb = dp.grid.boundary().len();
    let mut out = vec![0.0; nb];
    match kind {
        OperatorKind::Zeroth => {
            let d = boundary_derivatives(&dp.grid, values)?;
            for (k, b) in dp.grid.boundary().iter().enumerate() {
                let idx = b.index;
                let mut v = -dp.at(&dp.a11, level, idx) * d.uxx[k]
                    + dp.at(&dp.ax, level, idx) * d.ux[k]
                    + dp.at(&dp.a0, level, idx) * d.u[k];
                if dp.dim == 2 {
                    v += -2.0 * dp.at(&dp.a12, level, idx) * d.uxy[k]
                        - dp.at(&dp.a22, level, idx) * d.uyy[k]
                        + dp.at(&dp.ay, level, idx) * d.uy[k];
                }
                out[k] = v;
            }
        }
        OperatorKind::First(i) => {
            let op = &dp.ops[i];
            let d = boundary_first_derivatives(&dp.grid, values)?;
            for (k, b) in dp.grid.boundary().iter().enumerate() {
                let idx = b.index;
                let mut v = dp.at(&op.ax, level, idx) * d.ux[k] + dp.at(&op.a0, level, idx) * d.u[k];
                if dp.dim == 2 {
                    v += dp.at(&op.ay, level, idx) * d.uy[k];
                }
                out[k] = v;
            }
        }
    }
    Ok(out)
}

/// Pair a boundary trace against every measurement weight: the s-vector
/// `(<trace, φ_1>, ..., <trace, φ_s>)`.
pub fn pair_with_weights(dp: &DiscreteProblem, tr: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(dp.s);
    for j in 0..dp.s {
        out.push(dp.grid.boundary_integral(tr, &dp.phi[j])?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample_1d(grid: &SpatialGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..grid.nx()).map(|i| f(grid.x(i))).collect()
    }

    fn sample_2d(grid: &SpatialGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut v = vec![0.0; grid.num_nodes()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                v[grid.idx(i, j)] = f(grid.x(i), grid.y(j));
            }
        }
        v
    }

    #[test]
    fn trace_value_is_boundary_restriction() {
        let g = build_grid(1, [1.0, 0.0], [5, 0]).unwrap();
        let vals = sample_1d(&g, |x| x);
        assert_eq!(trace_value(&g, &vals), vec![0.0, 1.0]);

        let g2 = build_grid(2, [1.0, 1.0], [4, 4]).unwrap();
        let vals = sample_2d(&g2, |x, y| x + y);
        let tr = trace_value(&g2, &vals);
        // last boundary node is the (1,1) corner in index order
        assert_eq!(*tr.last().unwrap(), 2.0);
        let c = vec![3.0; g2.num_nodes()];
        assert!(trace_value(&g2, &c).iter().all(|&v| v == 3.0));
    }

    #[test]
    fn first_derivatives_exact_on_quadratics_1d() {
        let g = build_grid(1, [1.0, 0.0], [6, 0]).unwrap();
        let vals = sample_1d(&g, |x| x * x);
        let d = boundary_first_derivatives(&g, &vals).unwrap();
        assert!((d.ux[0] - 0.0).abs() < 1e-12);
        assert!((d.ux[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn derivatives_exact_on_low_degree_monomials_2d() {
        let g = build_grid(2, [1.0, 1.0], [6, 5]).unwrap();
        // total degree <= 2 for first derivatives
        let checks: Vec<(Box<dyn Fn(f64, f64) -> f64>, Box<dyn Fn(f64, f64) -> f64>, Box<dyn Fn(f64, f64) -> f64>)> = vec![
            (Box::new(|_x, _y| 1.0), Box::new(|_, _| 0.0), Box::new(|_, _| 0.0)),
            (Box::new(|x, _y| x), Box::new(|_, _| 1.0), Box::new(|_, _| 0.0)),
            (Box::new(|_x, y| y), Box::new(|_, _| 0.0), Box::new(|_, _| 1.0)),
            (Box::new(|x, _y| x * x), Box::new(|x, _| 2.0 * x), Box::new(|_, _| 0.0)),
            (Box::new(|x, y| x * y), Box::new(|_, y| y), Box::new(|x, _| x)),
            (Box::new(|_x, y| y * y), Box::new(|_, _| 0.0), Box::new(|_, y| 2.0 * y)),
        ];
        for (f, fx, fy) in checks {
            let vals = sample_2d(&g, &f);
            let d = boundary_first_derivatives(&g, &vals).unwrap();
            for (k, b) in g.boundary().iter().enumerate() {
                let (x, y) = (g.x(b.i), g.y(b.j));
                assert!((d.ux[k] - fx(x, y)).abs() < 1e-10, "ux at ({x},{y})");
                assert!((d.uy[k] - fy(x, y)).abs() < 1e-10, "uy at ({x},{y})");
            }
        }
    }

    #[test]
    fn second_derivatives_exact_on_cubics() {
        let g = build_grid(1, [1.0, 0.0], [7, 0]).unwrap();
        let vals = sample_1d(&g, |x| x * x * x);
        let d = boundary_derivatives(&g, &vals).unwrap();
        assert!((d.uxx[0] - 0.0).abs() < 1e-10);
        assert!((d.uxx[1] - 6.0).abs() < 1e-10);

        let vals = sample_1d(&g, |x| x * x);
        let d = boundary_derivatives(&g, &vals).unwrap();
        assert!((d.uxx[0] - 2.0).abs() < 1e-12);
        assert!((d.uxx[1] - 2.0).abs() < 1e-12);

        let g2 = build_grid(2, [1.0, 1.0], [6, 6]).unwrap();
        let vals = sample_2d(&g2, |x, y| x * x * x + y * y * y);
        let d = boundary_derivatives(&g2, &vals).unwrap();
        for (k, b) in g2.boundary().iter().enumerate() {
            let (x, y) = (g2.x(b.i), g2.y(b.j));
            assert!((d.uxx[k] - 6.0 * x).abs() < 1e-9, "uxx at ({x},{y}): {}", d.uxx[k]);
            assert!((d.uyy[k] - 6.0 * y).abs() < 1e-9, "uyy at ({x},{y}): {}", d.uyy[k]);
        }
    }

    #[test]
    fn mixed_derivative_exact_on_xy() {
        let g = build_grid(2, [1.0, 1.0], [5, 6]).unwrap();
        let vals = sample_2d(&g, |x, y| x * y + x * x * y * y);
        let d = boundary_derivatives(&g, &vals).unwrap();
        for (k, b) in g.boundary().iter().enumerate() {
            let (x, y) = (g.x(b.i), g.y(b.j));
            let exact = 1.0 + 4.0 * x * y;
            assert!((d.uxy[k] - exact).abs() < 1e-9, "uxy at ({x},{y}): {}", d.uxy[k]);
        }
    }

    #[test]
    fn grid_too_small_for_second_derivatives() {
        let g = build_grid(1, [1.0, 0.0], [3, 0]).unwrap();
        let vals = vec![0.0, 1.0, 2.0];
        assert!(boundary_first_derivatives(&g, &vals).is_ok());
        assert!(boundary_derivatives(&g, &vals).is_err());
    }

    #[test]
    fn sine_derivative_converges_at_second_order() {
        let pi = std::f64::consts::PI;
        let mut errs = Vec::new();
        for n in [11, 21, 41] {
            let g = build_grid(1, [1.0, 0.0], [n, 0]).unwrap();
            let vals = sample_1d(&g, |x| (pi * x).sin());
            let d = boundary_first_derivatives(&g, &vals).unwrap();
            errs.push((d.ux[0] - pi).abs());
        }
        let order = (errs[0] / errs[1]).log2().min((errs[1] / errs[2]).log2());
        assert!(order >= 1.9, "observed order {order}, errors {errs:?}");
    }

    #[test]
    fn pairing_is_linear_in_the_trace() {
        let g = build_grid(2, [1.0, 1.0], [7, 7]).unwrap();
        let nb = g.boundary().len();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let phi: Vec<f64> = (0..nb).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a: Vec<f64> = (0..nb).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let ia = g.boundary_integral(&a, &phi).unwrap();
        let ib = g.boundary_integral(&b, &phi).unwrap();
        let isum = g.boundary_integral(&sum, &phi).unwrap();
        assert!((isum - (ia + ib)).abs() < 1e-12);
    }
}
