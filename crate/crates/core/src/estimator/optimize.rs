//! Small-dimension derivative-free minimization: Nelder–Mead followed by a
//! few central-difference Newton steps.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub max_evals: usize,
    /// Stop when the simplex's objective spread falls below this.
    pub f_tol: f64,
    /// ... and every vertex is within this distance of the best one.
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            max_evals: 2000,
            f_tol: 1e-10,
            x_tol: 1e-8,
            initial_step: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &SearchOptions) -> Minimum {
    let dim = x0.len();
    let mut f = Counted { f, evals: 0 };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.to_vec(), f.call(x0)));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let fx = f.call(&x);
        simplex.push((x, fx));
    }

    let mut converged = false;
    while f.evals < opts.max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let spread = simplex
            .iter()
            .skip(1)
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= opts.f_tol && spread <= opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = along(-1.0);
        let fr = f.call(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f.call(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(-0.5);
                let fc = f.call(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = f.call(&xc);
                (xc, fc)
            };
            if fc < fr.min(worst) {
                simplex[dim] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = vertex
                        .0
                        .iter()
                        .zip(&x_best)
                        .map(|(v, b)| b + 0.5 * (v - b))
                        .collect();
                    let fx = f.call(&x);
                    *vertex = (x, fx);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    Minimum {
        x,
        f: fx,
        evals: f.evals,
        converged,
    }
}

/// Polishes a minimum with Newton steps on a central-difference gradient and
/// Hessian. Steps that do not lower the objective are rejected.
pub fn refine<F: FnMut(&[f64]) -> f64>(f: F, start: Minimum, opts: &SearchOptions) -> Minimum {
    let dim = start.x.len();
    let mut f = Counted { f, evals: 0 };
    let mut x = DVector::from_vec(start.x);
    let mut fx = start.f;
    let h = 1e-4;
    for _ in 0..8 {
        let at = |f: &mut Counted<F>, v: &DVector<f64>| f.call(v.as_slice());
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let (fp, fm) = (at(&mut f, &xp), at(&mut f, &xm));
            grad[i] = (fp - fm) / (2.0 * h);
            hess[(i, i)] = (fp - 2.0 * fx + fm) / (h * h);
            for j in 0..i {
                let mut corner = |si: f64, sj: f64| {
                    let mut v = x.clone();
                    v[i] += si * h;
                    v[j] += sj * h;
                    at(&mut f, &v)
                };
                let hij = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0)
                    + corner(-1.0, -1.0))
                    / (4.0 * h * h);
                hess[(i, j)] = hij;
                hess[(j, i)] = hij;
            }
        }
        let step = match hess.clone().cholesky() {
            Some(chol) => -chol.solve(&grad),
            None => -grad.clone(),
        };
        if !step.iter().all(|s| s.is_finite()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-6 {
            let cand = &x + &step * t;
            let fc = at(&mut f, &cand);
            if fc < fx {
                let moved = (&cand - &x).amax();
                let gained = fx - fc;
                x = cand;
                fx = fc;
                accepted = true;
                if moved < opts.x_tol || gained < opts.f_tol {
                    return Minimum {
                        x: x.data.into(),
                        f: fx,
                        evals: start.evals + f.evals,
                        converged: true,
                    };
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Minimum {
        x: x.data.into(),
        f: fx,
        evals: start.evals + f.evals,
        converged: start.converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let opts = SearchOptions {
            max_evals: 5000,
            ..Default::default()
        };
        let m = nelder_mead(rosen, &[-1.2, 1.0], &opts);
        assert!(m.converged);
        assert_abs_diff_eq!(m.x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.x[1], 1.0, epsilon = 1e-6);
        let r = refine(rosen, m, &opts);
        assert_abs_diff_eq!(r.x[0], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn quadratic_in_three_dims() {
        let f = |x: &[f64]| {
            (x[0] - 1.0).powi(2)
                + 2.0 * (x[1] + 0.5).powi(2)
                + 0.5 * (x[2] - 3.0).powi(2)
                + x[0] * x[1] * 0.3
        };
        let m = nelder_mead(f, &[0.0, 0.0, 0.0], &SearchOptions::default());
        let r = refine(f, m, &SearchOptions::default());
        // stationary point of the quadratic
        let a = nalgebra::Matrix3::new(2.0, 0.3, 0.0, 0.3, 4.0, 0.0, 0.0, 0.0, 1.0);
        let b = nalgebra::Vector3::new(2.0, -2.0, 3.0);
        let sol = a.lu().solve(&b).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(r.x[i], sol[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let f = |x: &[f64]| x[0].powi(2) + x[1].powi(2);
        let opts = SearchOptions {
            max_evals: 10,
            ..Default::default()
        };
        let m = nelder_mead(f, &[5.0, 5.0], &opts);
        assert!(!m.converged);
        assert!(m.evals <= 12);
    }

    #[test]
    fn nan_is_treated_as_uphill() {
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                (x[0] - 1.0).powi(2) + x[1].powi(2)
            }
        };
        let m = nelder_mead(f, &[0.5, 0.5], &SearchOptions::default());
        assert_abs_diff_eq!(m.x[0], 1.0, epsilon = 1e-6);
    }
}
