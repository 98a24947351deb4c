//! Quasi-Newton maximization with box bounds, used for the likelihood
//! searches. Small parameter counts only (one coordinate per kernel
//! parameter), so the inverse Hessian is kept dense.

use ndarray::{Array1, Array2};

/// A maximization target with analytic gradients. `value` is allowed to be
/// cheaper than `value_grad`; the line search only asks for values.
pub(crate) trait Objective {
    fn dim(&self) -> usize;
    /// None when the objective cannot be evaluated at `p` (factorization
    /// failure after jitter escalation).
    fn value(&mut self, p: &[f64]) -> Option<f64>;
    fn value_grad(&mut self, p: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub p: Vec<f64>,
    pub value: f64,
    pub start_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;

fn clamp_into(p: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, lo), hi) in p.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*lo, *hi);
    }
}

/// Largest gradient component that still points into the feasible box.
fn projected_grad_norm(p: &[f64], grad: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut norm = 0.0f64;
    for i in 0..p.len() {
        let g = grad[i];
        let blocked = (p[i] <= lower[i] && g < 0.0) || (p[i] >= upper[i] && g > 0.0);
        if !blocked {
            norm = norm.max(g.abs());
        }
    }
    norm
}

/// BFGS ascent from `start`, clamped to the box. Returns None only when the
/// objective cannot be evaluated at the start point.
pub(crate) fn maximize<O: Objective>(
    obj: &mut O,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    max_iters: usize,
) -> Option<Outcome> {
    let dim = obj.dim();
    debug_assert_eq!(start.len(), dim);
    let mut p = start.to_vec();
    clamp_into(&mut p, lower, upper);
    let (mut fval, mut grad) = obj.value_grad(&p)?;
    let start_value = fval;

    let mut h: Array2<f64> = Array2::eye(dim);
    let mut identity_hessian = true;
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..max_iters {
        iterations += 1;
        if projected_grad_norm(&p, &grad, lower, upper) <= 1e-6 * (1.0 + fval.abs()) {
            converged = true;
            break;
        }

        let grad_arr = Array1::from_vec(grad.clone());
        let mut dir = h.dot(&grad_arr);
        let mut slope = dir.dot(&grad_arr);
        if !(slope > 0.0) || !slope.is_finite() {
            h = Array2::eye(dim);
            identity_hessian = true;
            dir = grad_arr.clone();
            slope = dir.dot(&grad_arr);
            if !(slope > 0.0) {
                break;
            }
        }

        // backtracking Armijo search along the clamped direction
        let mut step = 1.0;
        let mut accepted: Option<(Vec<f64>, f64)> = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut cand: Vec<f64> = p
                .iter()
                .zip(dir.iter())
                .map(|(&pi, &di)| pi + step * di)
                .collect();
            clamp_into(&mut cand, lower, upper);
            if cand == p {
                step *= 0.5;
                continue;
            }
            if let Some(fv) = obj.value(&cand) {
                if fv.is_finite() && fv >= fval + ARMIJO_C1 * step * slope {
                    accepted = Some((cand, fv));
                    break;
                }
            }
            step *= 0.5;
        }

        let (cand, _) = match accepted {
            Some(pair) => pair,
            None if !identity_hessian => {
                h = Array2::eye(dim);
                identity_hessian = true;
                continue;
            }
            None => break,
        };

        let Some((fnew, gnew)) = obj.value_grad(&cand) else {
            break;
        };

        // inverse BFGS update in minimization form: y = grad_old − grad_new
        let s: Vec<f64> = cand.iter().zip(&p).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = grad.iter().zip(&gnew).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let s_norm: f64 = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm: f64 = yv.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-12 * s_norm * y_norm {
            let rho = 1.0 / sy;
            let s_arr = Array1::from_vec(s);
            let y_arr = Array1::from_vec(yv);
            let hy = h.dot(&y_arr);
            let yhy = y_arr.dot(&hy);
            // H ← H + (ρ²·yᵀHy + ρ)·ssᵀ − ρ·(Hysᵀ + s(Hy)ᵀ)
            let coef = rho * rho * yhy + rho;
            for i in 0..dim {
                for j in 0..dim {
                    h[[i, j]] += coef * s_arr[i] * s_arr[j]
                        - rho * (hy[i] * s_arr[j] + s_arr[i] * hy[j]);
                }
            }
            identity_hessian = false;
        }

        p = cand;
        fval = fnew;
        grad = gnew;
    }

    Some(Outcome {
        p,
        value: fval,
        start_value,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        center: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn value(&mut self, p: &[f64]) -> Option<f64> {
            Some(
                -p.iter()
                    .zip(&self.center)
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum::<f64>(),
            )
        }
        fn value_grad(&mut self, p: &[f64]) -> Option<(f64, Vec<f64>)> {
            let v = self.value(p)?;
            let g = p
                .iter()
                .zip(&self.center)
                .map(|(a, c)| -2.0 * (a - c))
                .collect();
            Some((v, g))
        }
    }

    #[test]
    fn finds_interior_maximum() {
        let mut obj = Quadratic {
            center: vec![0.7, -1.2, 3.0],
        };
        let out = maximize(&mut obj, &[0.0; 3], &[-10.0; 3], &[10.0; 3], 100).unwrap();
        assert!(out.converged);
        for (a, c) in out.p.iter().zip(&obj.center) {
            assert!((a - c).abs() < 1e-5);
        }
        assert!(out.value >= out.start_value);
    }

    #[test]
    fn respects_box_bounds() {
        let mut obj = Quadratic {
            center: vec![5.0, 5.0],
        };
        let out = maximize(&mut obj, &[0.0; 2], &[-1.0; 2], &[1.0; 2], 100).unwrap();
        assert!(out.p.iter().all(|&v| v <= 1.0));
        assert!((out.p[0] - 1.0).abs() < 1e-9 && (out.p[1] - 1.0).abs() < 1e-9);
    }

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }
        fn value(&mut self, p: &[f64]) -> Option<f64> {
            let (x, y) = (p[0], p[1]);
            Some(-((1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2)))
        }
        fn value_grad(&mut self, p: &[f64]) -> Option<(f64, Vec<f64>)> {
            let (x, y) = (p[0], p[1]);
            let v = self.value(p)?;
            let gx = -(-2.0 * (1.0 - x) - 400.0 * x * (y - x * x));
            let gy = -(200.0 * (y - x * x));
            Some((v, vec![gx, gy]))
        }
    }

    #[test]
    fn handles_curved_valleys() {
        let out = maximize(&mut Rosenbrock, &[-1.2, 1.0], &[-5.0; 2], &[5.0; 2], 500).unwrap();
        assert!((out.p[0] - 1.0).abs() < 1e-3, "got {:?}", out.p);
        assert!((out.p[1] - 1.0).abs() < 1e-3);
    }
}
