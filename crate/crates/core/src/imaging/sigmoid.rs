//! Symmetric four-parameter sigmoid `y = d + (a − d) / (1 + (x/c)^b)` fitted
//! to an eigenvalue-decay curve by Levenberg–Marquardt.
//!
//! `c` is a scale along the eigenvalue order and `b` a shape factor: larger
//! `b` means the dominant eigenvalues fall off faster.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve, Matrix};
use crate::scalar::Real;

pub const MAX_ITERATIONS: usize = 500;
pub const RELATIVE_TOLERANCE: f64 = 1e-10;

const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmoidFit<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    /// `1 − SS_res/SS_tot`; reported as 0 when the ordinates are constant.
    pub r_squared: T,
    /// `y_i − model(x_i)` at the fitted parameters.
    #[serde(skip)]
    pub residuals: Vec<T>,
    #[serde(skip)]
    pub iterations: usize,
}

fn model<T: Real>(x: T, a: T, b: T, c: T, d: T) -> T {
    d + (a - d) / (T::one() + (x / c).powf(b))
}

impl<T: Real> SigmoidFit<T> {
    pub fn eval(&self, x: T) -> T {
        model(x, self.a, self.b, self.c, self.d)
    }
}

#[derive(Clone, Copy)]
struct Params<T>([T; 4]);

impl<T: Real> Params<T> {
    fn a(&self) -> T {
        self.0[0]
    }
    fn b(&self) -> T {
        self.0[1]
    }
    fn c(&self) -> T {
        self.0[2]
    }
    fn d(&self) -> T {
        self.0[3]
    }

    fn admissible(&self) -> bool {
        self.0.iter().all(|v| v.is_finite()) && self.b() > T::zero() && self.c() > T::zero()
    }

    fn eval(&self, x: T) -> T {
        model(x, self.a(), self.b(), self.c(), self.d())
    }

    fn ssr(&self, xs: &[T], ys: &[T]) -> T {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = y - self.eval(x);
                r * r
            })
            .sum()
    }

    /// Rows `∂model/∂(a, b, c, d)` at each abscissa.
    fn jacobian(&self, xs: &[T]) -> Matrix<T> {
        let (a, b, c, d) = (self.a(), self.b(), self.c(), self.d());
        let mut j = Matrix::zeros(xs.len(), 4);
        for (i, &x) in xs.iter().enumerate() {
            let ratio = x / c;
            let u = ratio.powf(b);
            let inv = T::one() / (T::one() + u);
            let common = (a - d) * u * inv * inv;
            j[(i, 0)] = inv;
            j[(i, 1)] = -common * ratio.ln();
            j[(i, 2)] = common * b / c;
            j[(i, 3)] = T::one() - inv;
        }
        j
    }
}

fn median<T: Real>(xs: &[T]) -> T {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / T::lit(2.0)
    }
}

pub fn fit_sigmoid<T: Real>(points: &[(T, T)]) -> Result<SigmoidFit<T>> {
    fit_sigmoid_traced(points).map(|(fit, _)| fit)
}

/// Like [`fit_sigmoid`], also returning `R²` after every accepted step
/// (starting with the initial guess).
pub fn fit_sigmoid_traced<T: Real>(points: &[(T, T)]) -> Result<(SigmoidFit<T>, Vec<T>)> {
    if points.len() < 4 {
        return Err(Error::FitFailed(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !x.is_finite() || !y.is_finite() || !(*x > T::zero()))
    {
        return Err(Error::FitFailed(format!(
            "points must be finite with positive abscissa, got ({x}, {y})"
        )));
    }
    let xs: Vec<T> = points.iter().map(|p| p.0).collect();
    let ys: Vec<T> = points.iter().map(|p| p.1).collect();
    let n = T::from_usize_lossy(ys.len());
    let y_mean = ys.iter().copied().sum::<T>() / n;
    let ss_tot: T = ys.iter().map(|&y| (y - y_mean) * (y - y_mean)).sum();
    let ss_y: T = ys.iter().map(|&y| y * y).sum();
    let r_squared = |ssr: T| {
        if ss_tot > T::zero() {
            T::one() - ssr / ss_tot
        } else {
            T::zero()
        }
    };

    let y_max = ys.iter().copied().fold(T::neg_infinity(), T::max);
    let y_min = ys.iter().copied().fold(T::infinity(), T::min);
    let mut theta = Params([y_max, T::lit(2.0), median(&xs), y_min]);
    let mut ssr = theta.ssr(&xs, &ys);
    let mut trace = vec![r_squared(ssr)];
    let mut lambda = T::lit(LAMBDA_START);
    let floor = T::epsilon() * T::epsilon() * ss_y;
    let tol = T::lit(RELATIVE_TOLERANCE);

    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        if ssr <= floor {
            break;
        }
        iterations += 1;
        let jac = theta.jacobian(&xs);
        let mut normal = jac.transpose().matmul(&jac)?;
        let mut grad = [T::zero(); 4];
        for (i, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
            let r = y - theta.eval(x);
            for (k, g) in grad.iter_mut().enumerate() {
                *g += jac[(i, k)] * r;
            }
        }
        let diag_max = (0..4).map(|k| normal[(k, k)]).fold(T::zero(), T::max);
        if !(diag_max > T::zero()) {
            // No parameter moves the model: nothing left to fit.
            break;
        }
        let diag: Vec<T> = (0..4)
            .map(|k| normal[(k, k)].max(diag_max * T::lit(1e-12)))
            .collect();
        for k in 0..4 {
            normal[(k, k)] += lambda * diag[k];
        }
        let step = match solve(&normal, &grad) {
            Ok(s) => s,
            Err(_) => {
                lambda *= T::lit(10.0);
                if lambda > T::lit(LAMBDA_MAX) {
                    break;
                }
                continue;
            }
        };
        let mut trial = theta;
        for k in 0..4 {
            trial.0[k] += step[k];
        }
        let trial_ssr = if trial.admissible() {
            trial.ssr(&xs, &ys)
        } else {
            T::infinity()
        };
        if trial_ssr.is_finite() && trial_ssr < ssr {
            let rel = (ssr - trial_ssr) / ssr;
            theta = trial;
            ssr = trial_ssr;
            trace.push(r_squared(ssr));
            lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
            if rel < tol {
                break;
            }
        } else {
            lambda *= T::lit(10.0);
            if lambda > T::lit(LAMBDA_MAX) {
                break;
            }
        }
    }

    if !theta.admissible() {
        return Err(Error::FitFailed("parameters diverged".into()));
    }
    let residuals = xs.iter().zip(&ys).map(|(&x, &y)| y - theta.eval(x)).collect();
    Ok((
        SigmoidFit {
            a: theta.a(),
            b: theta.b(),
            c: theta.c(),
            d: theta.d(),
            r_squared: r_squared(ssr),
            residuals,
            iterations,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn curve(a: f64, b: f64, c: f64, d: f64) -> Vec<(f64, f64)> {
        (1..=12)
            .map(|i| {
                let x = i as f64 * 0.75;
                (x, model(x, a, b, c, d))
            })
            .collect()
    }

    #[test]
    fn recovers_exact_parameters() {
        let (a, b, c, d) = (1000.0, 2.5, 3.0, 50.0);
        let fit = fit_sigmoid(&curve(a, b, c, d)).unwrap();
        assert_relative_eq!(fit.a, a, max_relative = 1e-6);
        assert_relative_eq!(fit.b, b, max_relative = 1e-6);
        assert_relative_eq!(fit.c, c, max_relative = 1e-6);
        assert_relative_eq!(fit.d, d, max_relative = 1e-6);
        assert!((fit.r_squared - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn constant_points_are_degenerate() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 7.0)).collect();
        let fit = fit_sigmoid(&pts).unwrap();
        assert_relative_eq!(fit.a, 7.0, max_relative = 1e-12);
        assert_relative_eq!(fit.d, 7.0, max_relative = 1e-12);
        assert_eq!(fit.r_squared, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let three = [(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)];
        assert!(matches!(fit_sigmoid(&three), Err(Error::FitFailed(_))));
        let zero_x = [(0.0, 3.0), (1.0, 2.0), (2.0, 1.0), (3.0, 0.5)];
        assert!(fit_sigmoid(&zero_x).is_err());
        let nan = [(1.0, f64::NAN), (2.0, 2.0), (3.0, 1.0), (4.0, 0.5)];
        assert!(fit_sigmoid(&nan).is_err());
    }

    #[test]
    fn residuals_match_curve() {
        let pts: Vec<(f64, f64)> = vec![(1.0, 10.0), (2.0, 7.5), (3.0, 4.0), (4.0, 2.2), (5.0, 1.9), (6.0, 1.0)];
        let fit = fit_sigmoid(&pts).unwrap();
        for (&(x, y), r) in pts.iter().zip(&fit.residuals) {
            assert!((y - fit.eval(x) - r).abs() <= 1e-12);
        }
        assert!(fit.b > 0.0 && fit.c > 0.0);
        assert!(fit.r_squared <= 1.0);
    }

    #[test]
    fn r_squared_never_drops_on_accepted_steps() {
        let pts: Vec<(f64, f64)> = vec![(1.0, 90.0), (2.0, 70.0), (3.0, 41.0), (4.0, 22.0), (5.0, 15.0), (6.0, 12.0), (7.0, 11.0)];
        let (fit, trace) = fit_sigmoid_traced(&pts).unwrap();
        assert!(trace.len() >= 2);
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*trace.last().unwrap(), fit.r_squared);
    }

    #[test]
    fn json_shape() {
        let fit = fit_sigmoid(&curve(10.0, 2.0, 2.0, 1.0)).unwrap();
        let v = serde_json::to_value(&fit).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["a", "b", "c", "d", "r_squared"]);
    }
}
