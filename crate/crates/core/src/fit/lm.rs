//! Levenberg-Marquardt with Marquardt diagonal scaling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A least-squares problem in an unconstrained parameter vector.
pub trait LeastSquares {
    fn n_params(&self) -> usize;

    /// Residual vector; `None` when it cannot be evaluated (pole, overflow).
    fn residuals(&self, theta: &[f64]) -> Option<DVector<f64>>;

    /// Jacobian of the residuals, rows = points.
    fn jacobian(&self, theta: &[f64]) -> Option<DMatrix<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradientTol,
    StepTol,
    MaxIter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub theta: Vec<f64>,
    pub residuals: DVector<f64>,
    /// Sum of squared residuals.
    pub ss_res: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// SS_res after the start and after every accepted step.
    pub ss_history: Vec<f64>,
}

const LAMBDA_MAX: f64 = 1e32;

/// Runs LM from `theta0`. Returns `None` when the residuals are not finite there.
pub fn minimize<P: LeastSquares>(problem: &P, theta0: &[f64], s: &LmSettings) -> Option<LmOutcome> {
    let n = problem.n_params();
    let mut theta = DVector::from_column_slice(theta0);
    let mut r = finite(problem.residuals(theta.as_slice()))?;
    let mut ss = r.norm_squared();
    let mut history = vec![ss];
    let mut lambda = s.lambda_init;
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;

    let mut jac = problem.jacobian(theta.as_slice()).filter(|j| j.iter().all(|v| v.is_finite()));

    while iterations < s.max_iterations {
        let Some(j) = jac.as_ref() else { break };
        iterations += 1;

        let g = j.transpose() * &r;
        if g.amax() < s.gradient_tolerance {
            termination = Termination::GradientTol;
            break;
        }
        let jtj = j.transpose() * j;
        let diag_floor = jtj.diagonal().amax().max(f64::MIN_POSITIVE) * 1e-15;

        // Inner loop: raise damping until a step decreases SS_res or is negligible.
        let mut accepted = false;
        while lambda < LAMBDA_MAX {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let Some(step) = solve_spd(a, -&g) else {
                lambda *= s.lambda_up;
                continue;
            };
            if step.norm() <= s.step_tolerance * (theta.norm() + s.step_tolerance) {
                termination = Termination::StepTol;
                break;
            }
            let trial = &theta + &step;
            match finite(problem.residuals(trial.as_slice())) {
                Some(r_trial) if r_trial.norm_squared() < ss => {
                    theta = trial;
                    r = r_trial;
                    ss = r.norm_squared();
                    history.push(ss);
                    lambda = (lambda / s.lambda_down).max(1e-300);
                    accepted = true;
                    break;
                }
                _ => lambda *= s.lambda_up,
            }
        }
        if termination == Termination::StepTol {
            break;
        }
        if !accepted {
            // damping saturated without progress: no descent direction left
            termination = Termination::StepTol;
            break;
        }
        jac = problem.jacobian(theta.as_slice()).filter(|j| j.iter().all(|v| v.is_finite()));
    }

    Some(LmOutcome {
        theta: theta.as_slice().to_vec(),
        residuals: r,
        ss_res: ss,
        iterations,
        termination,
        ss_history: history,
    })
}

fn finite(r: Option<DVector<f64>>) -> Option<DVector<f64>> {
    r.filter(|v| v.iter().all(|x| x.is_finite()))
}

fn solve_spd(a: DMatrix<f64>, b: DVector<f64>) -> Option<DVector<f64>> {
    let x = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => a.lu().solve(&b)?,
    };
    x.iter().all(|v| v.is_finite()).then_some(x)
}
