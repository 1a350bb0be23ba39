use nalgebra::{DMatrix, Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use super::DlcParams;
use crate::error::{Error, Result};
use crate::types::AsafSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub theta_hat: DlcParams,
    pub r_squared: f64,
    pub n_obs: usize,
    pub max_obs: f64,
    pub sse: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NlsOptions {
    pub max_iter: usize,
    /// Relative SSE decrease below which a run counts as converged.
    pub ftol: f64,
    pub xtol: f64,
}

impl Default for NlsOptions {
    fn default() -> Self {
        NlsOptions {
            max_iter: 400,
            ftol: 1e-12,
            xtol: 1e-10,
        }
    }
}

const GRID_RATE: [f64; 3] = [0.05, 0.1, 0.3];
const GRID_A2: [f64; 3] = [10.0, 30.0, 50.0];
const GRID_A4: [f64; 3] = [20.0, 40.0, 60.0];

/// Start points in fixed order: a1 slowest, then a2, a3, a4, k.
fn grid(max_obs: f64) -> Vec<DlcParams> {
    let mut out = Vec::with_capacity(486);
    for a1 in GRID_RATE {
        for a2 in GRID_A2 {
            for a3 in GRID_RATE {
                for a4 in GRID_A4 {
                    for k in [max_obs, 2.0 * max_obs] {
                        out.push(DlcParams::new(a1, a2, a3, a4, k).project());
                    }
                }
            }
        }
    }
    out
}

fn sse(points: &[(f64, f64)], th: &DlcParams) -> f64 {
    points.iter().map(|&(t, y)| (y - th.eval(t)).powi(2)).sum()
}

/// Normal equations at `th`: (JᵀJ, Jᵀr).
fn normal_equations(points: &[(f64, f64)], th: &DlcParams) -> (Matrix5<f64>, Vector5<f64>) {
    let mut jtj = Matrix5::zeros();
    let mut jtr = Vector5::zeros();
    for &(t, y) in points {
        let g = Vector5::from(th.gradient(t));
        let r = y - th.eval(t);
        jtj += g * g.transpose();
        jtr += g * r;
    }
    (jtj, jtr)
}

fn full_rank(points: &[(f64, f64)], th: &DlcParams) -> bool {
    let j = DMatrix::from_fn(points.len(), 5, |i, c| th.gradient(points[i].0)[c]);
    let sv = j.singular_values();
    let max = sv.max();
    max > 0.0 && sv.min() > 1e-10 * max
}

struct Run {
    theta: DlcParams,
    sse: f64,
    converged: bool,
}

/// Projected Levenberg-Marquardt from `start`.
fn levenberg_marquardt(points: &[(f64, f64)], start: DlcParams, opts: &NlsOptions) -> Option<Run> {
    let mut th = start.project();
    let mut f = sse(points, &th);
    let mut lambda = 1e-3;
    for _ in 0..opts.max_iter {
        let (jtj, jtr) = normal_equations(points, &th);
        let scale = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        loop {
            let mut a = jtj;
            for i in 0..5 {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12 * scale);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    return None;
                }
                continue;
            };
            let step = chol.solve(&jtr);
            let x = Vector5::from(th.to_array());
            let cand = DlcParams::from_array((x + step).into()).project();
            let fc = sse(points, &cand);
            if fc < f {
                let dx = (Vector5::from(cand.to_array()) - x).norm();
                let df = f - fc;
                th = cand;
                f = fc;
                lambda = (lambda / 3.0).max(1e-12);
                if df <= opts.ftol * f.max(f64::MIN_POSITIVE) || dx <= opts.xtol * (x.norm() + opts.xtol) {
                    return Some(Run {
                        theta: th,
                        sse: f,
                        converged: true,
                    });
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                // No descent direction left: a (possibly constrained) minimum.
                return Some(Run {
                    theta: th,
                    sse: f,
                    converged: true,
                });
            }
        }
    }
    Some(Run {
        theta: th,
        sse: f,
        converged: false,
    })
}

/// Derivative-free fallback on the projected objective.
fn nelder_mead(points: &[(f64, f64)], start: DlcParams, opts: &NlsOptions) -> Run {
    let obj = |x: &[f64; 5]| sse(points, &DlcParams::from_array(*x).project());
    let x0 = start.project().to_array();
    let mut simplex: Vec<([f64; 5], f64)> = Vec::with_capacity(6);
    simplex.push((x0, obj(&x0)));
    for i in 0..5 {
        let mut x = x0;
        x[i] += if x[i].abs() > 1e-8 { 0.1 * x[i] } else { 2.5e-4 };
        simplex.push((x, obj(&x)));
    }
    let mut converged = false;
    for _ in 0..opts.max_iter * 20 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[5].1);
        if (worst - best).abs() <= opts.ftol * best.abs().max(1e-300) + 1e-300 {
            converged = true;
            break;
        }
        let mut centroid = [0.0; 5];
        for (x, _) in &simplex[..5] {
            for i in 0..5 {
                centroid[i] += x[i] / 5.0;
            }
        }
        let along = |c: f64| {
            let mut p = [0.0; 5];
            for i in 0..5 {
                p[i] = centroid[i] + c * (simplex[5].0[i] - centroid[i]);
            }
            p
        };
        let xr = along(-1.0);
        let fr = obj(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = obj(&xe);
            simplex[5] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[4].1 {
            simplex[5] = (xr, fr);
        } else {
            let xc = if fr < simplex[5].1 { along(-0.5) } else { along(0.5) };
            let fc = obj(&xc);
            if fc < simplex[5].1.min(fr) {
                simplex[5] = (xc, fc);
            } else {
                let x0 = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    for i in 0..5 {
                        s.0[i] = x0[i] + 0.5 * (s.0[i] - x0[i]);
                    }
                    s.1 = obj(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    Run {
        theta: DlcParams::from_array(simplex[0].0).project(),
        sse: simplex[0].1,
        converged,
    }
}

/// Least-squares fit of the double-logistic curve to `(year, value)` points,
/// best of a fixed multistart grid.
pub fn nls_fit_points(points: &[(f64, f64)], opts: &NlsOptions) -> Result<FitReport> {
    let n = points.len();
    if n < 6 {
        return Err(Error::InsufficientData(format!("{n} observations; at least 6 needed")));
    }
    let max_obs = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<Run> = None;
    for start in grid(max_obs) {
        let run = if full_rank(points, &start) {
            levenberg_marquardt(points, start, opts).unwrap_or_else(|| nelder_mead(points, start, opts))
        } else {
            nelder_mead(points, start, opts)
        };
        if best.as_ref().is_none_or(|b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    let best = best.expect("grid is nonempty");
    let mean = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sst: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let sumsq: f64 = points.iter().map(|p| p.1 * p.1).sum();
    // Rounding leaves a tiny positive SST on constant series.
    let r_squared = if sst > 4.0 * f64::EPSILON * sumsq {
        1.0 - best.sse / sst
    } else {
        0.0
    };
    Ok(FitReport {
        theta_hat: best.theta,
        r_squared,
        n_obs: n,
        max_obs,
        sse: best.sse,
        converged: best.converged,
    })
}

pub fn nls_fit(series: &AsafSeries) -> Result<FitReport> {
    let points: Vec<(f64, f64)> = series.values.iter().map(|(&y, &v)| (f64::from(y), v)).collect();
    nls_fit_points(&points, &NlsOptions::default())
}
