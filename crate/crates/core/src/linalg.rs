//! Dense symmetric matrices and a cyclic Jacobi eigenvalue routine.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Sweep cap for [`SymMatrix::eigenvalues`].
pub const MAX_JACOBI_SWEEPS: usize = 100;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Symmetric matrix in dense row-major storage. Both triangles are kept in
/// sync; constructors take the upper triangle as authoritative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    order: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        SymMatrix {
            order,
            entries: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.entries[i * order + i] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.entries[i * values.len() + i] = *v;
        }
        m
    }

    /// Builds a matrix from rows, mirroring the upper triangle onto the lower.
    /// Rejects input whose triangles disagree by more than `1e-12` relative.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: r.len(),
            });
        }
        let mut asym: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if !rows[i][j].is_finite() {
                    return Err(Error::NonFinite(format!("matrix entry ({i}, {j})")));
                }
                asym = asym.max((rows[i][j] - rows[j][i]).abs());
                scale = scale.max(rows[i][j].abs());
            }
        }
        if asym > 1e-12 * scale.max(1.0) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self::from_upper_fn(n, |i, j| rows[i][j]))
    }

    /// Builds a matrix by evaluating `f(i, j)` for `i <= j`.
    pub fn from_upper_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in i..order {
                let v = f(i, j);
                m.entries[i * order + j] = v;
                m.entries[j * order + i] = v;
            }
        }
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.order + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.order + j] = v;
        self.entries[j * self.order + i] = v;
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.order, other.order, "matrix order mismatch");
        SymMatrix {
            order: self.order,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add_scaled_identity(&self, s: f64) -> SymMatrix {
        let mut out = self.clone();
        for i in 0..self.order {
            out.entries[i * self.order + i] += s;
        }
        out
    }

    /// `uᵀ M u`.
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let n = self.order;
        (0..n).map(|i| u[i] * dot(&self.entries[i * n..(i + 1) * n], u)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.entries)
    }

    /// All eigenvalues in ascending order, each within `tol` of the exact
    /// spectrum.
    ///
    /// Cyclic Jacobi sweeps run until the off-diagonal Frobenius norm is at
    /// most `tol`; by Weyl's inequality the diagonal then lies within `tol` of
    /// the eigenvalues. `tol` is floored at a few ulps of `‖M‖_F`.
    pub fn eigenvalues(&self, tol: f64) -> Result<Vec<f64>> {
        if !(tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        let n = self.order;
        if self.entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        let mut a = self.entries.clone();
        let target = tol.max(4.0 * f64::EPSILON * self.frobenius_norm());
        let off_norm = |a: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += 2.0 * a[i * n + j] * a[i * n + j];
                }
            }
            s.sqrt()
        };
        let mut off = off_norm(&a);
        let mut sweeps = 0;
        while off > target {
            if sweeps == MAX_JACOBI_SWEEPS {
                return Err(Error::NoConvergence { sweeps, off_norm: off });
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                }
            }
            sweeps += 1;
            off = off_norm(&a);
        }
        let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        eig.sort_by(f64::total_cmp);
        Ok(eig)
    }

    pub fn max_eigenvalue(&self, tol: f64) -> Result<f64> {
        Ok(self.eigenvalues(tol)?.last().copied().unwrap_or(f64::NEG_INFINITY))
    }

    pub fn min_eigenvalue(&self, tol: f64) -> Result<f64> {
        Ok(self.eigenvalues(tol)?.first().copied().unwrap_or(f64::INFINITY))
    }

    /// Whether `self ⪯ other + ΔI`, i.e. `λ_max(self - other) <= Δ`.
    pub fn is_dominated_by(&self, other: &SymMatrix, delta: f64, tol: f64) -> Result<bool> {
        Ok(self.sub(other).max_eigenvalue(tol)? <= delta)
    }
}

pub fn max_eigenvalue(m: &SymMatrix, tol: f64) -> Result<f64> {
    m.max_eigenvalue(tol)
}
