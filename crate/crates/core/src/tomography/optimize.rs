//! Quasi-Newton minimization with finite-difference gradients.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop when the gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the objective changes by less than this on two consecutive steps.
    pub value_tolerance: f64,
    /// Central-difference step.
    pub step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iterations: 2000, gradient_tolerance: 1e-7, value_tolerance: 1e-10, step: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn gradient<F: Fn(&DVector<f64>) -> f64>(f: &F, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + h;
        let up = f(&probe);
        probe[i] = xi - h;
        let down = f(&probe);
        probe[i] = xi;
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

pub fn minimize_bfgs<F: Fn(&DVector<f64>) -> f64>(f: F, x0: DVector<f64>, opts: &BfgsOptions) -> BfgsOutcome {
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = gradient(&f, &x, opts.step);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut small_steps = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if g.norm() < opts.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut d = -(&h_inv * &g);
        let mut slope = d.dot(&g);
        if slope >= 0.0 {
            h_inv = DMatrix::identity(n, n);
            d = -g.clone();
            slope = d.dot(&g);
        }

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-14 {
            let trial = &x + &d * t;
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            // No descent along the current direction: restart once from steepest descent.
            if h_inv != DMatrix::identity(n, n) {
                h_inv = DMatrix::identity(n, n);
                continue;
            }
            break;
        };

        let g_new = gradient(&f, &x_new, opts.step);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            h_inv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }

        let change = (fx - f_new).abs();
        x = x_new;
        fx = f_new;
        g = g_new;
        if change < opts.value_tolerance {
            small_steps += 1;
            if small_steps >= 2 {
                converged = true;
                break;
            }
        } else {
            small_steps = 0;
        }
    }

    BfgsOutcome { gradient_norm: g.norm(), x, value: fx, iterations, converged }
}
