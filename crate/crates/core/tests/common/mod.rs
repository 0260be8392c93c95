//! Reference computations written independently of the library: closed
//! forms, finite differences, and brute-force quadrature.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

pub type V3 = [f64; 3];

pub fn dot(u: &V3, v: &V3) -> f64 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

pub fn norm(u: &V3) -> f64 {
    dot(u, u).sqrt()
}

pub fn normalize(u: &V3) -> V3 {
    let n = norm(u);
    [u[0] / n, u[1] / n, u[2] / n]
}

/// `(cos a, sin a cos b, sin a sin b)`.
pub fn chart_point(a: f64, b: f64) -> V3 {
    [a.cos(), a.sin() * b.cos(), a.sin() * b.sin()]
}

/// Removes the radial component.
pub fn tangent(x: &V3, v: &V3) -> V3 {
    let d = dot(x, v);
    [v[0] - d * x[0], v[1] - d * x[1], v[2] - d * x[2]]
}

pub fn max_abs_diff(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub fn vmf_log_density(mu: &V3, kappa: f64, x: &V3) -> f64 {
    kappa * dot(mu, x)
}

pub fn kent_log_density(frame: &[V3; 3], kappa: f64, alpha: f64, x: &V3) -> f64 {
    let t1 = dot(&frame[1], x);
    let t2 = dot(&frame[2], x);
    kappa * dot(&frame[0], x) + alpha * (t1 * t1 - t2 * t2)
}

/// Central-difference gradient of an ambient function.
pub fn fd_gradient(f: impl Fn(&V3) -> f64, x: &V3, h: f64) -> V3 {
    let mut g = [0.0; 3];
    for i in 0..3 {
        let (mut p, mut m) = (*x, *x);
        p[i] += h;
        m[i] -= h;
        g[i] = (f(&p) - f(&m)) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian of an ambient function, row-major.
pub fn fd_hessian(f: impl Fn(&V3) -> f64, x: &V3, h: f64) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let at = |si: f64, sj: f64| {
                let mut y = *x;
                y[i] += si * h;
                y[j] += sj * h;
                f(&y)
            };
            out[i][j] =
                (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0)) / (4.0 * h * h);
        }
    }
    out
}

/// Laplace–Beltrami operator on S² by finite differences in the chart:
/// `(1/sin a) ∂_a(sin a ∂_a f) + (1/sin² a) ∂²_b f`.
pub fn chart_laplacian(f: impl Fn(&V3) -> f64, a: f64, b: f64, h: f64) -> f64 {
    let at = |a: f64, b: f64| f(&chart_point(a, b));
    let c = at(a, b);
    let da = ((a + h / 2.0).sin() * (at(a + h, b) - c) - (a - h / 2.0).sin() * (c - at(a - h, b)))
        / (h * h * a.sin());
    let db = (at(a, b + h) - 2.0 * c + at(a, b - h)) / (h * h * a.sin().powi(2));
    da + db
}

/// `coth κ − 1/κ`.
pub fn vmf_mean_resultant_length(kappa: f64) -> f64 {
    1.0 / kappa.tanh() - 1.0 / kappa
}

/// First and second moments of a density `∝ exp(log_density)` on S² by the
/// midpoint rule on an `n × n` chart grid.
pub fn quadrature_moments(log_density: impl Fn(&V3) -> f64, n: usize) -> (V3, [[f64; 3]; 3]) {
    let (da, db) = (PI / n as f64, TAU / n as f64);
    let mut mass = 0.0;
    let mut m1 = [0.0; 3];
    let mut m2 = [[0.0; 3]; 3];
    let shift = (0..n)
        .flat_map(|i| (0..n).map(move |j| ((i as f64 + 0.5) * da, (j as f64 + 0.5) * db)))
        .map(|(a, b)| log_density(&chart_point(a, b)))
        .fold(f64::NEG_INFINITY, f64::max);
    for i in 0..n {
        let a = (i as f64 + 0.5) * da;
        for j in 0..n {
            let b = (j as f64 + 0.5) * db;
            let x = chart_point(a, b);
            let w = a.sin() * (log_density(&x) - shift).exp();
            mass += w;
            for r in 0..3 {
                m1[r] += w * x[r];
                for c in 0..3 {
                    m2[r][c] += w * x[r] * x[c];
                }
            }
        }
    }
    for r in 0..3 {
        m1[r] /= mass;
        for c in 0..3 {
            m2[r][c] /= mass;
        }
    }
    (m1, m2)
}

/// Small deterministic generator for test inputs (xorshift64*).
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1)
    }

    pub fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        (self.0.wrapping_mul(0x2545_F491_4F6C_DD1D) >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform on the sphere with the polar angle kept in `[a_lo, a_hi]`.
    pub fn chart_point_between(&mut self, a_lo: f64, a_hi: f64) -> (f64, f64) {
        let c = self.range(a_hi.cos(), a_lo.cos());
        (c.acos(), self.range(0.0, TAU))
    }
}
