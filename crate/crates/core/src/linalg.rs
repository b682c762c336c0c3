//! Direct linear algebra for the solver: a general banded LU factorization
//! with partial pivoting (the time-stepping matrices are banded: bandwidth 2
//! on an interval, 2*N_x on a rectangle in row-major node order), and small
//! dense matrices for the s x s solvability systems.
//!
//! Band storage is column-major LAPACK general-band layout: entry (i, j)
//! lives at `ab[j*ldab + kl + ku + i - j]`, with `kl` extra rows of fill
//! space so row interchanges stay inside the array.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn new(n: usize, kl: usize, ku: usize) -> BandMatrix {
        assert!(n > 0);
        let ldab = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        assert!(
            i + self.ku >= j && j + self.kl >= i,
            "entry ({i}, {j}) outside band (kl={}, ku={})",
            self.kl,
            self.ku
        );
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.ab[s] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i + self.ku < j || j + self.kl < i {
            return 0.0;
        }
        self.ab[j * self.ldab + (self.kl + self.ku + i - j)]
    }

    /// y = A x over the stored band.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let base = j * self.ldab + self.kl + self.ku;
            for i in lo..=hi {
                y[i] += self.ab[base + i - j] * xj;
            }
        }
        y
    }

    /// Multiply every entry of row `i` by `f(i)`.
    pub fn scale_rows(&mut self, f: impl Fn(usize) -> f64) {
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let base = j * self.ldab + self.kl + self.ku;
            for i in lo..=hi {
                self.ab[base + i - j] *= f(i);
            }
        }
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let base = j * self.ldab + self.kl + self.ku;
            for i in lo..=hi {
                sums[i] += self.ab[base + i - j].abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// LU factorization with partial pivoting. The factor owns its own
    /// storage, leaving `self` intact for residual checks.
    pub fn factor(&self) -> Result<BandLu> {
        let n = self.n;
        let (kl, ku, ldab) = (self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let mut ab = self.ab.clone();
        let mut ipiv = vec![0usize; n];

        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // pivot search in column j, rows j..=j+km
            let mut p = 0;
            let mut pmax = ab[j * ldab + kv].abs();
            for i in 1..=km {
                let v = ab[j * ldab + kv + i].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == 0.0 || !pmax.is_finite() {
                return Err(Error::SingularSystem {
                    level: 0,
                    detail: format!("zero or non-finite pivot in column {j}"),
                });
            }
            ipiv[j] = j + p;
            let last_col = (j + kv).min(n - 1);
            if p != 0 {
                // swap rows j and j+p across the affected columns
                for col in j..=last_col {
                    let ra = col * ldab + kv + j - col;
                    ab.swap(ra, ra + p);
                }
            }
            let piv = ab[j * ldab + kv];
            for i in 1..=km {
                let m = ab[j * ldab + kv + i] / piv;
                ab[j * ldab + kv + i] = m;
                if m == 0.0 {
                    continue;
                }
                for col in j + 1..=last_col {
                    let ra = col * ldab + kv + j - col;
                    let u = ab[ra];
                    if u != 0.0 {
                        ab[ra + i] -= m * u;
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
        })
    }
}

/// Factored band matrix (P A = L U).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Solve A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        assert_eq!(b.len(), self.n);
        let kv = self.kl + self.ku;
        // forward: apply P and L
        for j in 0..self.n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let km = self.kl.min(self.n - 1 - j);
                for i in 1..=km {
                    b[j + i] -= self.ab[j * self.ldab + kv + i] * bj;
                }
            }
        }
        // back substitution with U (bandwidth kl + ku)
        for j in (0..self.n).rev() {
            let d = self.ab[j * self.ldab + kv];
            if d == 0.0 {
                return Err(Error::SingularSystem {
                    level: 0,
                    detail: format!("zero diagonal in U at column {j}"),
                });
            }
            b[j] /= d;
            let bj = b[j];
            if bj != 0.0 {
                let lo = j.saturating_sub(kv);
                for row in lo..j {
                    b[row] -= self.ab[j * self.ldab + kv + row - j] * bj;
                }
            }
        }
        Ok(())
    }
}

/// Dense row-major matrix for the small s x s solvability systems.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMat {
    n: usize,
    a: Vec<f64>,
}

impl SmallMat {
    pub fn zeros(n: usize) -> SmallMat {
        assert!(n > 0);
        SmallMat {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> SmallMat {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n));
        SmallMat {
            n,
            a: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.a[i * self.n..(i + 1) * self.n].iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    /// In-place LU with partial pivoting; returns (lu, pivots, sign) or None
    /// when a pivot vanishes exactly.
    fn lu(&self) -> Option<(Vec<f64>, Vec<usize>, f64)> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut piv = vec![0usize; n];
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].abs();
            for i in k + 1..n {
                if a[i * n + k].abs() > best {
                    best = a[i * n + k].abs();
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                sign = -sign;
            }
            let d = a[k * n + k];
            for i in k + 1..n {
                let m = a[i * n + k] / d;
                a[i * n + k] = m;
                for j in k + 1..n {
                    a[i * n + j] -= m * a[k * n + j];
                }
            }
        }
        Some((a, piv, sign))
    }

    pub fn det(&self) -> f64 {
        match self.lu() {
            None => 0.0,
            Some((a, _, sign)) => {
                let mut d = sign;
                for k in 0..self.n {
                    d *= a[k * self.n + k];
                }
                d
            }
        }
    }

    /// Solve A x = b; `None` when singular.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let (a, piv, _) = self.lu()?;
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            if piv[k] != k {
                x.swap(k, piv[k]);
            }
            for i in k + 1..n {
                x[i] -= a[i * n + k] * x[k];
            }
        }
        for k in (0..n).rev() {
            for j in k + 1..n {
                x[k] -= a[k * n + j] * x[j];
            }
            x[k] /= a[k * n + k];
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<SmallMat> {
        let n = self.n;
        let mut inv = SmallMat::zeros(n);
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let x = self.solve(&e)?;
            for i in 0..n {
                inv.set(i, col, x[i]);
            }
        }
        Some(inv)
    }

    /// Infinity-norm condition number; +inf when singular.
    pub fn cond_inf(&self) -> f64 {
        match self.inverse() {
            None => f64::INFINITY,
            Some(inv) => self.norm_inf() * inv.norm_inf(),
        }
    }
}
