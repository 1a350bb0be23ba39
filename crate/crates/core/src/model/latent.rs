//! Latent random walk with double-logistic drift, integrated out by a Kalman
//! filter.
//!
//! With `u_t = h_t - g(t)` the latent path is a driftless random walk started
//! at `N(0, σ²_h)`, and each observation is `y_t = g(t) + u_t + e_t`. Missing
//! years only advance the walk.

use rand::Rng;
use rand_distr::StandardNormal;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Filtered means and variances of `u_t`, plus the marginal log-likelihood.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub loglik: f64,
}

/// `ln p(y | θ, σ²_h, σ²_c)` with the latent path integrated out.
pub fn marginal_loglik(g: &[f64], obs: &[Option<f64>], sigma2_h: f64, sigma2_c: f64) -> f64 {
    let mut m = 0.0;
    let mut p = 0.0;
    let mut ll = 0.0;
    for (gt, yt) in g.iter().zip(obs) {
        p += sigma2_h;
        if let Some(y) = yt {
            let s = p + sigma2_c;
            let v = y - gt - m;
            ll -= 0.5 * (LN_2PI + s.ln() + v * v / s);
            let k = p / s;
            m += k * v;
            p *= sigma2_c / s;
        }
    }
    ll
}

pub fn filter(g: &[f64], obs: &[Option<f64>], sigma2_h: f64, sigma2_c: f64) -> Filtered {
    let n = g.len();
    let mut out = Filtered {
        mean: Vec::with_capacity(n),
        var: Vec::with_capacity(n),
        loglik: 0.0,
    };
    let mut m = 0.0;
    let mut p = 0.0;
    for (gt, yt) in g.iter().zip(obs) {
        p += sigma2_h;
        if let Some(y) = yt {
            let s = p + sigma2_c;
            let v = y - gt - m;
            out.loglik -= 0.5 * (LN_2PI + s.ln() + v * v / s);
            let k = p / s;
            m += k * v;
            p *= sigma2_c / s;
        }
        out.mean.push(m);
        out.var.push(p);
    }
    out
}

/// Draw of the latent value at the final year.
pub fn sample_last<R: Rng + ?Sized>(f: &Filtered, g_last: f64, rng: &mut R) -> f64 {
    let n = f.mean.len();
    let z: f64 = rng.sample(StandardNormal);
    g_last + f.mean[n - 1] + f.var[n - 1].max(0.0).sqrt() * z
}

/// Forward-filter backward-sample draw of the whole latent path `h`.
pub fn sample_path<R: Rng + ?Sized>(f: &Filtered, g: &[f64], sigma2_h: f64, rng: &mut R) -> Vec<f64> {
    let n = g.len();
    let mut u = vec![0.0; n];
    let z: f64 = rng.sample(StandardNormal);
    u[n - 1] = f.mean[n - 1] + f.var[n - 1].max(0.0).sqrt() * z;
    for t in (0..n - 1).rev() {
        let (m, p) = (f.mean[t], f.var[t]);
        let gain = p / (p + sigma2_h);
        let mean = m + gain * (u[t + 1] - m);
        let var = p * sigma2_h / (p + sigma2_h);
        let z: f64 = rng.sample(StandardNormal);
        u[t] = mean + var.max(0.0).sqrt() * z;
    }
    u.iter().zip(g).map(|(u, g)| u + g).collect()
}
