//! Damped Newton iteration for the small nonlinear systems of the transition
//! and boundary solvers (n <= 5, finite-difference Jacobians, Armijo
//! backtracking, optional trial-state validator).

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Absolute tolerance on the residual max-norm.
    pub tolerance: f64,
    /// Relative finite-difference step for the Jacobian.
    pub fd_step: f64,
    pub armijo_slope: f64,
    pub min_damping: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 50,
            tolerance: 1e-10,
            fd_step: 1e-7,
            armijo_slope: 1e-4,
            min_damping: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonReport {
    pub converged: bool,
    pub iterations: usize,
    /// Residual max-norm at the returned iterate.
    pub residual: f64,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solve `residual(x) = 0` in place. `validator` rejects trial iterates
/// outside the admissible domain (the line search then backtracks).
pub fn solve<F, V>(x: &mut [f64], residual: F, validator: V, opts: &NewtonOptions) -> NewtonReport
where
    F: Fn(&[f64], &mut [f64]),
    V: Fn(&[f64]) -> bool,
{
    let n = x.len();
    let mut r = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    residual(x, &mut r);
    let mut res_norm = max_norm(&r);

    for iter in 0..opts.max_iterations {
        if res_norm <= opts.tolerance {
            return NewtonReport {
                converged: true,
                iterations: iter,
                residual: res_norm,
            };
        }
        // Finite-difference Jacobian, column by column.
        let mut jac = DMatrix::<f64>::zeros(n, n);
        let mut x_pert = x.to_vec();
        for j in 0..n {
            let step = opts.fd_step * x[j].abs().max(1.0);
            x_pert[j] = x[j] + step;
            residual(&x_pert, &mut r_trial);
            for i in 0..n {
                jac[(i, j)] = (r_trial[i] - r[i]) / step;
            }
            x_pert[j] = x[j];
        }
        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let delta = match jac.lu().solve(&rhs) {
            Some(d) => d,
            None => {
                return NewtonReport {
                    converged: false,
                    iterations: iter,
                    residual: res_norm,
                }
            }
        };

        // Backtracking on the Euclidean norm.
        let base = norm2(&r);
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= opts.min_damping {
            let trial: Vec<f64> = x
                .iter()
                .zip(delta.iter())
                .map(|(xi, di)| xi + lambda * di)
                .collect();
            if validator(&trial) {
                residual(&trial, &mut r_trial);
                let trial_norm = norm2(&r_trial);
                if trial_norm.is_finite() && trial_norm <= (1.0 - opts.armijo_slope * lambda) * base
                {
                    x.copy_from_slice(&trial);
                    r.copy_from_slice(&r_trial);
                    res_norm = max_norm(&r);
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return NewtonReport {
                converged: res_norm <= opts.tolerance,
                iterations: iter,
                residual: res_norm,
            };
        }
    }
    NewtonReport {
        converged: res_norm <= opts.tolerance,
        iterations: opts.max_iterations,
        residual: res_norm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_quadratic_converges_fast() {
        let mut x = [3.0];
        let report = solve(
            &mut x,
            |x, r| r[0] = x[0] * x[0] - 4.0,
            |_| true,
            &NewtonOptions::default(),
        );
        assert!(report.converged);
        assert!(report.iterations < 10);
        assert!((x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn coupled_system() {
        // x^2 + y^2 = 5, x y = 2 -> (2, 1) from a nearby guess.
        let mut x = [1.7, 1.3];
        let report = solve(
            &mut x,
            |x, r| {
                r[0] = x[0] * x[0] + x[1] * x[1] - 5.0;
                r[1] = x[0] * x[1] - 2.0;
            },
            |_| true,
            &NewtonOptions::default(),
        );
        assert!(report.converged);
        assert!((x[0] - 2.0).abs() < 1e-8 && (x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn validator_keeps_iterates_admissible() {
        // Root at x = 2 with the domain restricted to x > 0; start far away.
        let mut x = [30.0];
        let report = solve(
            &mut x,
            |x, r| r[0] = x[0].ln() - 2.0_f64.ln(),
            |x| x[0] > 0.0,
            &NewtonOptions::default(),
        );
        assert!(report.converged);
        assert!((x[0] - 2.0).abs() < 1e-8);
    }
}
