//! Five-parameter logistic mapping from predicted scores to opinion scores.
//!
//! `q(s) = β1 (1/2 - 1 / (1 + exp(β2 (s - β3)))) + β4 s + β5`
//!
//! Fitted by Levenberg-Marquardt (damped Gauss-Newton) least squares on
//! standardized data. The default start is `β1 = range(gt)`,
//! `β2 = 1 / std(pred)`, `β3 = mean(pred)`, `β4 = 0`, `β5 = mean(gt)`. A second
//! run starts from the ordinary least-squares line (`β1 = 0`), and the lower
//! residual wins, so the fit is never worse than the best linear map.

use nalgebra::{Matrix5, Vector5};

use crate::error::{Error, Result};
use crate::prediction::compensated_sum;

pub const MAX_ITERATIONS: usize = 500;
/// Stop once an accepted step improves the SSE by less than this fraction.
pub const RELATIVE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Logistic5Params {
    pub beta: [f64; 5],
}

impl Logistic5Params {
    pub fn eval(&self, s: f64) -> f64 {
        let [b1, b2, b3, b4, b5] = self.beta;
        b1 * (0.5 - logistic(-b2 * (s - b3))) + b4 * s + b5
    }
}

/// `1 / (1 + exp(-x))` without overflow.
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug)]
pub struct LogisticFit {
    pub params: Logistic5Params,
    pub mapped: Vec<f64>,
    pub sse: f64,
}

fn sse_of(beta: &[f64; 5], s: &[f64], y: &[f64]) -> f64 {
    let p = Logistic5Params { beta: *beta };
    compensated_sum(s.iter().zip(y).map(|(&si, &yi)| {
        let r = p.eval(si) - yi;
        r * r
    }))
}

fn lm(mut beta: [f64; 5], s: &[f64], y: &[f64]) -> ([f64; 5], f64) {
    let mut sse = sse_of(&beta, s, y);
    let mut lambda = 1e-3;
    for _ in 0..MAX_ITERATIONS {
        if sse <= f64::MIN_POSITIVE {
            break;
        }
        let [b1, b2, b3, _, _] = beta;
        let mut jtj = Matrix5::<f64>::zeros();
        let mut jtr = Vector5::<f64>::zeros();
        let model = Logistic5Params { beta };
        for (&si, &yi) in s.iter().zip(y) {
            let g = logistic(-b2 * (si - b3));
            let dg = g * (1.0 - g);
            let row = Vector5::new(0.5 - g, b1 * dg * (si - b3), -b1 * dg * b2, si, 1.0);
            let r = model.eval(si) - yi;
            jtj += row * row.transpose();
            jtr += row * r;
        }
        let floor = 1e-12 * jtj.diagonal().max().max(1e-300);

        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = jtj;
            for i in 0..5 {
                damped[(i, i)] += lambda * jtj[(i, i)].max(floor);
            }
            let Some(step) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = beta;
            for i in 0..5 {
                trial[i] += step[i];
            }
            let trial_sse = sse_of(&trial, s, y);
            if trial_sse.is_finite() && trial_sse < sse {
                let improvement = (sse - trial_sse) / sse;
                beta = trial;
                sse = trial_sse;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if improvement < RELATIVE_TOLERANCE {
                    return (beta, sse);
                }
                break;
            }
            lambda *= 2.0;
        }
        if !accepted {
            break;
        }
    }
    (beta, sse)
}

fn mean(v: &[f64]) -> f64 {
    compensated_sum(v.iter().copied()) / v.len() as f64
}

fn std_dev(v: &[f64], m: f64) -> f64 {
    (compensated_sum(v.iter().map(|x| (x - m) * (x - m))) / v.len() as f64).sqrt()
}

/// Fits the logistic map of `pred` onto `gt` and returns the parameters with
/// the mapped predictions.
pub fn fit_logistic5(pred: &[f64], gt: &[f64]) -> Result<LogisticFit> {
    if pred.len() != gt.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    if pred.len() < 5 {
        return Err(Error::DegenerateInput("logistic fit needs at least 5 points"));
    }
    let (mu_s, mu_y) = (mean(pred), mean(gt));
    let (sd_s, sd_y) = (std_dev(pred, mu_s), std_dev(gt, mu_y));
    if sd_s == 0.0 || !sd_s.is_finite() {
        return Err(Error::DegenerateInput("constant predictions"));
    }
    let sd_y = if sd_y > 0.0 { sd_y } else { 1.0 };
    let s: Vec<f64> = pred.iter().map(|x| (x - mu_s) / sd_s).collect();
    let y: Vec<f64> = gt.iter().map(|x| (x - mu_y) / sd_y).collect();

    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let standard_start = [hi - lo, 1.0, 0.0, 0.0, 0.0];
    // standardized data: OLS slope is the correlation, intercept is zero
    let slope = compensated_sum(s.iter().zip(&y).map(|(a, b)| a * b)) / s.len() as f64;
    let linear_start = [0.0, 1.0, 0.0, slope, 0.0];

    let (b_std, sse_std) = lm(standard_start, &s, &y);
    let (b_lin, sse_lin) = lm(linear_start, &s, &y);
    let best = if sse_std <= sse_lin { b_std } else { b_lin };
    if best.iter().any(|b| !b.is_finite()) {
        return Err(Error::FitDiverged);
    }

    let standardized = Logistic5Params { beta: best };
    let mapped: Vec<f64> = s
        .iter()
        .map(|&si| mu_y + sd_y * standardized.eval(si))
        .collect();
    if mapped.iter().any(|m| !m.is_finite()) {
        return Err(Error::FitDiverged);
    }

    let [c1, c2, c3, c4, c5] = best;
    let b4 = sd_y * c4 / sd_s;
    let params = Logistic5Params {
        beta: [
            sd_y * c1,
            c2 / sd_s,
            mu_s + sd_s * c3,
            b4,
            sd_y * c5 + mu_y - b4 * mu_s,
        ],
    };
    let sse = compensated_sum(mapped.iter().zip(gt).map(|(m, g)| (m - g) * (m - g)));
    Ok(LogisticFit {
        params,
        mapped,
        sse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::stats::{plcc, rmse};

    fn linear_sse(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let slope = sxy / sxx;
        x.iter()
            .zip(y)
            .map(|(a, b)| {
                let r = my + slope * (a - mx) - b;
                r * r
            })
            .sum()
    }

    #[test]
    fn affine_target_is_reproduced() {
        let pred: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64 * 0.1).collect();
        let gt: Vec<f64> = pred.iter().map(|p| 1.7 * p - 4.0).collect();
        let fit = fit_logistic5(&pred, &gt).unwrap();
        assert!(rmse(&fit.mapped, &gt).unwrap() < 1e-6);
    }

    #[test]
    fn planted_logistic_recovered() {
        let truth = Logistic5Params {
            beta: [2.0, 1.5, 0.0, 0.1, 1.0],
        };
        let pred: Vec<f64> = (0..200).map(|i| -4.0 + 8.0 * i as f64 / 199.0).collect();
        let gt: Vec<f64> = pred.iter().map(|&s| truth.eval(s)).collect();
        let fit = fit_logistic5(&pred, &gt).unwrap();
        assert!(rmse(&fit.mapped, &gt).unwrap() < 1e-4);
        let reeval: Vec<f64> = pred.iter().map(|&s| fit.params.eval(s)).collect();
        assert!(rmse(&reeval, &fit.mapped).unwrap() < 1e-9);
    }

    #[test]
    fn never_worse_than_linear() {
        // monotone saturating target with a little structure
        let pred: Vec<f64> = (0..60).map(|i| i as f64 / 6.0).collect();
        let gt: Vec<f64> = pred
            .iter()
            .map(|&s| 5.0 * (1.0 - (-0.5 * s).exp()) + 0.05 * (s * 3.0).sin())
            .collect();
        let fit = fit_logistic5(&pred, &gt).unwrap();
        assert!(fit.sse <= linear_sse(&pred, &gt) + 1e-9);
        assert!(plcc(&fit.mapped, &gt).unwrap() >= plcc(&pred, &gt).unwrap() - 1e-9);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_logistic5(&[1.0; 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(fit_logistic5(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
