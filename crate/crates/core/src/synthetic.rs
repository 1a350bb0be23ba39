//! Data simulated from the hierarchical model with known parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal};

use crate::doublelogistic::DlcParams;
use crate::model::{CountryParams, Global, A2_MAX};
use crate::types::{AsafSeries, Sex};

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub n_countries: usize,
    pub first_year: i32,
    pub last_year: i32,
    pub global: Global,
    /// Clamp simulated `h` and `y` at zero.
    pub truncate: bool,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub series: Vec<AsafSeries>,
    pub countries: Vec<CountryParams>,
    /// Per country, per sex: latent `h` from `first_year`.
    pub latent: Vec<[Vec<f64>; 2]>,
    pub names: Vec<String>,
    pub global: Global,
}

fn normal_between<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64, lo: f64, hi: f64) -> f64 {
    let n = Normal::new(mean, var.sqrt()).expect("positive variance");
    for _ in 0..100_000 {
        let x = n.sample(rng);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
    mean.clamp(lo, hi)
}

/// `Gamma(2, rate 2/mean)`.
fn gamma_mean<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    Gamma::new(2.0, mean / 2.0).expect("positive mean").sample(rng)
}

/// One draw of the Level-3 country parameters given `g`.
pub fn sample_country<R: Rng + ?Sized>(g: &Global, rng: &mut R) -> CountryParams {
    let male = DlcParams::new(
        gamma_mean(rng, g.a1m),
        normal_between(rng, g.a2m, g.sigma2_a2m, f64::NEG_INFINITY, A2_MAX),
        gamma_mean(rng, g.a3m),
        normal_between(rng, g.a4, g.sigma2_a4, 0.0, 100.0),
        normal_between(rng, g.km, g.sigma2_km, 0.0, f64::INFINITY),
    );
    CountryParams {
        male,
        a1f: gamma_mean(rng, g.a1f),
        delta_a2: Normal::new(g.delta_a2, g.sigma2_delta_a2.sqrt()).unwrap().sample(rng),
        a3f: gamma_mean(rng, g.a3f),
        a4f: normal_between(rng, g.a4, g.sigma2_a4, 0.0, 100.0),
        kf: normal_between(rng, g.kf, g.sigma2_kf, 0.0, f64::INFINITY),
        sigma2: LogNormal::new(g.nu, g.rho2.sqrt()).unwrap().sample(rng),
    }
}

/// Latent path and observations on `years` for one country and sex.
pub fn simulate_path<R: Rng + ?Sized>(
    theta: &DlcParams,
    years: std::ops::RangeInclusive<i32>,
    sigma2_h: f64,
    sigma2_c: f64,
    truncate: bool,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let eh = Normal::new(0.0, sigma2_h.sqrt()).unwrap();
    let ec = Normal::new(0.0, sigma2_c.sqrt()).unwrap();
    let mut h = Vec::new();
    let mut y = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for t in years {
        let gt = theta.eval(f64::from(t));
        let mut ht = match prev {
            None => gt + eh.sample(rng),
            Some((hp, gp)) => hp + gt - gp + eh.sample(rng),
        };
        if truncate {
            ht = ht.max(0.0);
        }
        let mut yt = ht + ec.sample(rng);
        if truncate {
            yt = yt.max(0.0);
        }
        prev = Some((ht, gt));
        h.push(ht);
        y.push(yt);
    }
    (h, y)
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticData {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let width = cfg.n_countries.to_string().len().max(2);
    let mut out = SyntheticData {
        series: Vec::new(),
        countries: Vec::new(),
        latent: Vec::new(),
        names: Vec::new(),
        global: cfg.global,
    };
    for i in 0..cfg.n_countries {
        let name = format!("S{:0width$}", i + 1);
        let params = sample_country(&cfg.global, &mut rng);
        let mut latent: [Vec<f64>; 2] = Default::default();
        for sex in Sex::BOTH {
            let (h, y) = simulate_path(
                &params.theta(sex),
                cfg.first_year..=cfg.last_year,
                cfg.global.sigma2_h,
                params.sigma2,
                cfg.truncate,
                &mut rng,
            );
            out.series
                .push(AsafSeries::from_pairs(name.clone(), sex, (cfg.first_year..).zip(y)));
            latent[sex.index()] = h;
        }
        out.countries.push(params);
        out.latent.push(latent);
        out.names.push(name);
    }
    out
}
