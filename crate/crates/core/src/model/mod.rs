//! Four-level hierarchical model for annual ASAF.
//!
//! Level 1: `y ~ N(h, σ²_c)`. Level 2: `h` is a random walk whose drift is the
//! increment of a country- and sex-specific double-logistic curve. Level 3:
//! country curves and measurement variances given the global parameters.
//! Level 4: priors on the global parameters.

pub mod dist;
pub mod latent;
mod params;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AsafSeries, Sex};
use dist::{gamma_lpdf, lognormal_lpdf, normal_lpdf, truncated_normal_lpdf};

pub use params::{CountryParams, Global, HyperParams, COUNTRY_NAMES, GLOBAL_FAMILIES, GLOBAL_NAMES, N_GLOBAL};

/// Upper truncation of the male a2 prior.
pub const A2_MAX: f64 = 65.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Full four-level model.
    Hierarchical,
    /// Global parameters frozen at their prior means; no Level-4 term.
    NonHierarchical,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Hierarchical => "bayes",
            Variant::NonHierarchical => "bayes-s",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bayes" | "hierarchical" => Ok(Variant::Hierarchical),
            "bayes-s" | "bayes(s)" | "nonhierarchical" | "non-hierarchical" => Ok(Variant::NonHierarchical),
            other => Err(Error::InvalidConfig(format!("unknown variant {other:?}"))),
        }
    }
}

/// Observations of one country on its latent year grid `t0..=end`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryData {
    pub name: String,
    pub t0: i32,
    pub end: i32,
    /// Indexed by [`Sex::index`], then by `year - t0`.
    pub obs: [Vec<Option<f64>>; 2],
}

impl CountryData {
    pub fn n_years(&self) -> usize {
        (self.end - self.t0 + 1) as usize
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.t0..=self.end
    }

    pub fn n_obs(&self, sex: Sex) -> usize {
        self.obs[sex.index()].iter().flatten().count()
    }

    /// Curve values on the year grid.
    pub fn curve(&self, theta: &crate::doublelogistic::DlcParams) -> Vec<f64> {
        self.years().map(|t| theta.eval(f64::from(t))).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub countries: Vec<CountryData>,
}

impl ModelData {
    /// Groups series by country. Observations after `end_year` are dropped;
    /// every country's latent grid runs from its first observation (either
    /// sex) to `end_year`, or to the last observed year overall when `None`.
    pub fn new(series: &[AsafSeries], end_year: Option<i32>) -> Result<Self> {
        let end = match end_year {
            Some(e) => e,
            None => series
                .iter()
                .filter_map(|s| s.last_year())
                .max()
                .ok_or_else(|| Error::InsufficientData("no observations".into()))?,
        };
        let mut by_country: BTreeMap<&str, Vec<&AsafSeries>> = BTreeMap::new();
        for s in series {
            by_country.entry(&s.country).or_default().push(s);
        }
        let mut countries = Vec::new();
        for (name, list) in by_country {
            let t0 = list
                .iter()
                .flat_map(|s| s.values.range(..=end).next().map(|(&y, _)| y))
                .min();
            let Some(t0) = t0 else {
                log::warn!("{name}: no observations up to {end}; country skipped");
                continue;
            };
            let n = (end - t0 + 1) as usize;
            let mut obs = [vec![None; n], vec![None; n]];
            for s in list {
                for (&year, &v) in s.values.range(t0..=end) {
                    if !v.is_finite() {
                        return Err(Error::parse("model data", format!("{name} {year}: non-finite value")));
                    }
                    let slot = &mut obs[s.sex.index()][(year - t0) as usize];
                    if slot.is_some() {
                        return Err(Error::parse(
                            "model data",
                            format!("{name} {} {year} duplicated", s.sex),
                        ));
                    }
                    *slot = Some(v);
                }
            }
            countries.push(CountryData {
                name: name.to_string(),
                t0,
                end,
                obs,
            });
        }
        if countries.is_empty() {
            return Err(Error::InsufficientData("no country has observations".into()));
        }
        Ok(ModelData { countries })
    }

    pub fn end_year(&self) -> i32 {
        self.countries.iter().map(|c| c.end).max().unwrap_or(0)
    }
}

/// One point in the posterior: global and country parameters and the latent paths.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub global: Global,
    pub countries: Vec<CountryParams>,
    /// Per country, per sex: latent `h` on the country's year grid.
    pub latent: Vec<[Vec<f64>; 2]>,
}

/// Level 1.
pub fn log_likelihood(state: &ModelState, data: &ModelData) -> f64 {
    let mut total = 0.0;
    for ((c, params), h) in data.countries.iter().zip(&state.countries).zip(&state.latent) {
        for sex in Sex::BOTH {
            for (y, h) in c.obs[sex.index()].iter().zip(&h[sex.index()]) {
                if let Some(y) = y {
                    total += normal_lpdf(*y, *h, params.sigma2);
                }
            }
        }
    }
    total
}

/// Level 2 for one path: start around `g[0]`, then increments around the
/// curve increments, all with variance `sigma2_h`.
pub fn log_latent_path(h: &[f64], g: &[f64], sigma2_h: f64) -> f64 {
    let mut total = normal_lpdf(h[0], g[0], sigma2_h);
    for t in 1..h.len() {
        total += normal_lpdf(h[t] - h[t - 1], g[t] - g[t - 1], sigma2_h);
    }
    total
}

/// Level 2.
pub fn log_latent(state: &ModelState, data: &ModelData) -> f64 {
    log_latent_with(state, data, &state.global)
}

fn log_latent_with(state: &ModelState, data: &ModelData, global: &Global) -> f64 {
    let mut total = 0.0;
    for ((c, params), h) in data.countries.iter().zip(&state.countries).zip(&state.latent) {
        for sex in Sex::BOTH {
            let g = c.curve(&params.theta(sex));
            total += log_latent_path(&h[sex.index()], &g, global.sigma2_h);
        }
    }
    total
}

/// Level 3 for one country.
pub fn log_prior_country(c: &CountryParams, g: &Global) -> f64 {
    let m = &c.male;
    let lp = gamma_lpdf(m.a1, 2.0, 2.0 / g.a1m)
        + truncated_normal_lpdf(m.a2, g.a2m, g.sigma2_a2m, None, Some(A2_MAX))
        + gamma_lpdf(m.a3, 2.0, 2.0 / g.a3m)
        + truncated_normal_lpdf(m.a4, g.a4, g.sigma2_a4, Some(0.0), Some(100.0))
        + truncated_normal_lpdf(m.k, g.km, g.sigma2_km, Some(0.0), None)
        + gamma_lpdf(c.a1f, 2.0, 2.0 / g.a1f)
        + normal_lpdf(c.delta_a2, g.delta_a2, g.sigma2_delta_a2)
        + gamma_lpdf(c.a3f, 2.0, 2.0 / g.a3f)
        + truncated_normal_lpdf(c.a4f, g.a4, g.sigma2_a4, Some(0.0), Some(100.0))
        + truncated_normal_lpdf(c.kf, g.kf, g.sigma2_kf, Some(0.0), None)
        + lognormal_lpdf(c.sigma2, g.nu, g.rho2);
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp
    }
}

/// Level 4.
pub fn log_prior_global(g: &Global, hyper: &HyperParams) -> f64 {
    let lp: f64 = g
        .to_array()
        .iter()
        .enumerate()
        .map(|(j, &x)| GLOBAL_FAMILIES[j].lpdf(x, hyper.alpha[j], hyper.beta[j]))
        .sum();
    if lp.is_nan() {
        f64::NEG_INFINITY
    } else {
        lp
    }
}

/// Global parameters actually in force under `variant`.
pub fn effective_global(global: &Global, hyper: &HyperParams, variant: Variant) -> Global {
    match variant {
        Variant::Hierarchical => *global,
        Variant::NonHierarchical => hyper.prior_means(),
    }
}

/// Joint log-density of `state` and the data. `-inf` off the support.
pub fn log_posterior(state: &ModelState, data: &ModelData, hyper: &HyperParams, variant: Variant) -> f64 {
    if !state_on_support(state, data) {
        return f64::NEG_INFINITY;
    }
    let g = effective_global(&state.global, hyper, variant);
    let mut total = log_likelihood(state, data) + log_latent_with(state, data, &g);
    total += state.countries.iter().map(|c| log_prior_country(c, &g)).sum::<f64>();
    if variant == Variant::Hierarchical {
        total += log_prior_global(&g, hyper);
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// Log-density with every latent path integrated out.
pub fn log_posterior_collapsed(
    global: &Global,
    countries: &[CountryParams],
    data: &ModelData,
    hyper: &HyperParams,
    variant: Variant,
) -> f64 {
    let g = effective_global(global, hyper, variant);
    if !g.is_valid() || countries.len() != data.countries.len() {
        return f64::NEG_INFINITY;
    }
    let mut total = if variant == Variant::Hierarchical {
        log_prior_global(&g, hyper)
    } else {
        0.0
    };
    for (c, p) in data.countries.iter().zip(countries) {
        if !p.is_valid() {
            return f64::NEG_INFINITY;
        }
        total += log_prior_country(p, &g);
        for sex in Sex::BOTH {
            let curve = c.curve(&p.theta(sex));
            total += latent::marginal_loglik(&curve, &c.obs[sex.index()], g.sigma2_h, p.sigma2);
        }
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

/// Whether `state` satisfies every support constraint and matches the data shape.
pub fn state_on_support(state: &ModelState, data: &ModelData) -> bool {
    state.global.is_valid()
        && state.countries.len() == data.countries.len()
        && state.latent.len() == data.countries.len()
        && state.countries.iter().all(CountryParams::is_valid)
        && data.countries.iter().zip(&state.latent).all(|(c, h)| {
            h.iter()
                .all(|path| path.len() == c.n_years() && path.iter().all(|v| v.is_finite()))
        })
}
