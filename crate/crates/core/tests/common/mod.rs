//! Independent numerical oracles shared by the integration tests. Nothing here
//! calls into the moment code under test.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Probabilists' Hermite polynomial `He_n(x)` and `He_{n-1}(x)`.
fn hermite_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for m in 1..n {
        let next = x * cur - m as f64 * prev;
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (1.0, x);
    for m in 1..n {
        let m = m as f64;
        let next = ((2.0 * m + 1.0) * x * cur - m * prev) / (m + 1.0);
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn roots_by_scan(f: impl Fn(f64) -> f64 + Copy, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let steps = 20_000;
    let h = (hi - lo) / steps as f64;
    let mut roots = Vec::with_capacity(count);
    let mut x0 = lo;
    let mut f0 = f(x0);
    for i in 1..=steps {
        let x1 = lo + i as f64 * h;
        let f1 = f(x1);
        if f1 == 0.0 {
            roots.push(x1);
        } else if f0 != 0.0 && (f0 > 0.0) != (f1 > 0.0) {
            roots.push(bisect(f, x0, x1));
        }
        x0 = x1;
        f0 = f1;
    }
    assert_eq!(roots.len(), count, "root scan missed a node");
    roots
}

/// `n`-point Gauss–Hermite rule for the standard normal measure (weights
/// sum to one); exact for polynomials of degree `< 2n`.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let r = 2.0 * (n as f64).sqrt() + 2.0;
    let nodes = roots_by_scan(|x| hermite_pair(n, x).0, -r, r, n);
    let n_fact: f64 = (1..=n).map(|m| m as f64).product();
    nodes
        .into_iter()
        .map(|x| {
            let (_, prev) = hermite_pair(n, x);
            (x, n_fact / ((n * n) as f64 * prev * prev))
        })
        .collect()
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let nodes = roots_by_scan(|x| legendre_pair(n, x).0, -1.0, 1.0, n);
    nodes
        .into_iter()
        .map(|x| {
            let (p, prev) = legendre_pair(n, x);
            // P_n'(x) = n (x P_n - P_{n-1}) / (x^2 - 1)
            let dp = n as f64 * (x * p - prev) / (x * x - 1.0);
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

fn panel(f: &impl Fn(f64) -> f64, rule: &[(f64, f64)], a: f64, b: f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.iter().map(|&(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

fn adaptive(f: &impl Fn(f64) -> f64, rule: &[(f64, f64)], a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = panel(f, rule, a, m);
    let right = panel(f, rule, m, b);
    if depth == 0 || (left + right - whole).abs() <= tol {
        return left + right;
    }
    adaptive(f, rule, a, m, left, tol / 2.0, depth - 1) + adaptive(f, rule, m, b, right, tol / 2.0, depth - 1)
}

/// Adaptive Gauss–Legendre quadrature of `f` over `[a, b]` (finite).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let rule = gauss_legendre(12);
    let whole = panel(&f, &rule, a, b);
    adaptive(&f, &rule, a, b, whole, tol, 40)
}

pub fn phi(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

/// Beyond this the standard normal density times any degree-12 polynomial is
/// below 1e-25.
pub const TAIL_CUT: f64 = 14.0;

/// Orthonormal vectors spanning the complement of unit `v`, by Gram–Schmidt
/// on the standard basis.
pub fn complement(v: &[f64]) -> Vec<Vec<f64>> {
    let d = v.len();
    let mut frame: Vec<Vec<f64>> = vec![v.to_vec()];
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        for u in &frame {
            let c: f64 = u.iter().zip(&e).map(|(a, b)| a * b).sum();
            for (x, y) in e.iter_mut().zip(u) {
                *x -= c * y;
            }
        }
        let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            frame.push(e.into_iter().map(|x| x / n).collect());
        }
        if frame.len() == d {
            break;
        }
    }
    frame.remove(0);
    frame
}

pub fn monomial(alpha: &[u32], x: &[f64]) -> f64 {
    alpha.iter().zip(x).map(|(&a, &xi)| xi.powi(a as i32)).product()
}

/// `E[x^α 1{a <= v·x < b}]` for `x ~ N(0, I_d)`: writing `x = t v + Σ z_j u_j`,
/// the inner expectation over `z` is a tensor Gauss–Hermite rule (exact for
/// the degrees used) and the outer integral over `t` is adaptive.
pub fn strip_moment_quadrature(alpha: &[u32], v: &[f64], a: f64, b: f64) -> f64 {
    let d = v.len();
    let degree: u32 = alpha.iter().sum();
    let gh = gauss_hermite((degree as usize) / 2 + 2);
    let frame = complement(v);
    let m = frame.len();
    let inner = |t: f64| -> f64 {
        let mut total = 0.0;
        let mut idx = vec![0usize; m];
        loop {
            let mut x: Vec<f64> = v.iter().map(|vi| t * vi).collect();
            let mut w = 1.0;
            for (j, &k) in idx.iter().enumerate() {
                let (z, wz) = gh[k];
                w *= wz;
                for i in 0..d {
                    x[i] += z * frame[j][i];
                }
            }
            total += w * monomial(alpha, &x);
            let mut j = 0;
            while j < m {
                idx[j] += 1;
                if idx[j] < gh.len() {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == m {
                break;
            }
        }
        total * phi(t)
    };
    let lo = a.max(-TAIL_CUT);
    let hi = b.min(TAIL_CUT);
    if lo >= hi {
        return 0.0;
    }
    integrate(inner, lo, hi, 1e-14)
}

/// Angle between unit vectors, via `atan2(‖u × v‖, u·v)` in general dimension.
pub fn angle(u: &[f64], v: &[f64]) -> f64 {
    let c: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let mut s2 = 0.0;
    for i in 0..u.len() {
        for j in (i + 1)..u.len() {
            let w = u[i] * v[j] - u[j] * v[i];
            s2 += w * w;
        }
    }
    s2.sqrt().atan2(c)
}
