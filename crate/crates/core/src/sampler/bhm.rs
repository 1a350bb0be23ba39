//! The hierarchical model as a sampler target.
//!
//! The latent paths are integrated out with a Kalman filter, so the state is
//! the global vector (absent under the non-hierarchical variant) followed by
//! eleven parameters per country, each mapped to the real line:
//! log for positive quantities, `log(65 - a2)` for the male a2,
//! `logit(a4 / 100)` for a4, identity for Δ. Latent values are drawn by
//! forward filtering, backward sampling when a draw is recorded.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use super::engine::{run_chains, Block, ChainConfig, Target};
use super::store::DrawStore;
use crate::doublelogistic::{logistic, DlcParams, FitReport, A4_MAX};
use crate::error::{Error, Result};
use crate::model::{
    effective_global, latent, log_prior_country, CountryParams, Global, HyperParams, ModelData, Variant, A2_MAX,
    COUNTRY_NAMES, GLOBAL_FAMILIES, GLOBAL_NAMES, N_GLOBAL,
};
use crate::types::Sex;

const N_COUNTRY: usize = 11;
const SIGMA2_H: usize = N_GLOBAL - 1;

/// Output name of the latent value for `country`, `sex`, `year`.
pub fn latent_name(country: &str, sex: Sex, year: i32) -> String {
    format!("{country}:h_{}:{year}", sex.as_str())
}

/// Inverse of [`latent_name`].
pub fn parse_latent_name(name: &str) -> Option<(&str, Sex, i32)> {
    let (rest, year) = name.rsplit_once(':')?;
    let (country, sex) = rest.rsplit_once(":h_")?;
    Some((country, sex.parse().ok()?, year.parse().ok()?))
}

pub fn country_param_name(country: &str, param: &str) -> String {
    format!("{country}:{param}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Transform {
    Identity,
    Log,
    /// `log(A2_MAX - x)`.
    LogUpper,
    /// `logit(x / A4_MAX)`.
    ScaledLogit,
}

const COUNTRY_TRANSFORMS: [Transform; N_COUNTRY] = [
    Transform::Log,
    Transform::LogUpper,
    Transform::Log,
    Transform::ScaledLogit,
    Transform::Log,
    Transform::Log,
    Transform::Identity,
    Transform::Log,
    Transform::ScaledLogit,
    Transform::Log,
    Transform::Log,
];

impl Transform {
    fn to_constrained(self, u: f64) -> f64 {
        match self {
            Transform::Identity => u,
            Transform::Log => u.exp(),
            Transform::LogUpper => A2_MAX - u.exp(),
            Transform::ScaledLogit => A4_MAX * logistic(u),
        }
    }

    fn to_unconstrained(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::LogUpper => (A2_MAX - x).ln(),
            Transform::ScaledLogit => {
                let p = x / A4_MAX;
                (p / (1.0 - p)).ln()
            }
        }
    }

    /// `ln |dx/du|`.
    fn log_jacobian(self, u: f64) -> f64 {
        match self {
            Transform::Identity => 0.0,
            Transform::Log | Transform::LogUpper => u,
            Transform::ScaledLogit => {
                // ln σ(u) + ln σ(-u), written to stay finite for large |u|.
                let a = u.abs();
                A4_MAX.ln() - a - 2.0 * (-a).exp().ln_1p()
            }
        }
    }
}

fn global_transform(j: usize) -> Transform {
    if GLOBAL_FAMILIES[j].positive() {
        Transform::Log
    } else {
        Transform::Identity
    }
}

/// Sampler target for one variant of the model.
pub struct BhmTarget<'a> {
    pub data: &'a ModelData,
    pub hyper: HyperParams,
    pub variant: Variant,
    /// Record the whole latent path instead of the final year only.
    pub keep_latent: bool,
    frozen: Global,
}

impl<'a> BhmTarget<'a> {
    pub fn new(data: &'a ModelData, hyper: HyperParams, variant: Variant, keep_latent: bool) -> Self {
        BhmTarget {
            data,
            hyper,
            variant,
            keep_latent,
            frozen: hyper.prior_means(),
        }
    }

    fn n_global(&self) -> usize {
        match self.variant {
            Variant::Hierarchical => N_GLOBAL,
            Variant::NonHierarchical => 0,
        }
    }

    fn country_offset(&self, c: usize) -> usize {
        self.n_global() + N_COUNTRY * c
    }

    pub fn global(&self, x: &[f64]) -> Global {
        match self.variant {
            Variant::Hierarchical => {
                let mut v = [0.0; N_GLOBAL];
                for (j, slot) in v.iter_mut().enumerate() {
                    *slot = global_transform(j).to_constrained(x[j]);
                }
                Global::from_array(v)
            }
            Variant::NonHierarchical => self.frozen,
        }
    }

    pub fn country(&self, x: &[f64], c: usize) -> CountryParams {
        let o = self.country_offset(c);
        let mut v = [0.0; N_COUNTRY];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = COUNTRY_TRANSFORMS[k].to_constrained(x[o + k]);
        }
        CountryParams::from_array(v)
    }

    /// Unconstrained vector for the given parameters. Globals are ignored
    /// under the non-hierarchical variant.
    pub fn encode(&self, global: &Global, countries: &[CountryParams]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        if self.variant == Variant::Hierarchical {
            x.extend(
                global
                    .to_array()
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| global_transform(j).to_unconstrained(v)),
            );
        }
        for p in countries {
            x.extend(
                p.to_array()
                    .iter()
                    .zip(COUNTRY_TRANSFORMS)
                    .map(|(&v, t)| t.to_unconstrained(v)),
            );
        }
        x
    }

    fn country_jacobian(&self, x: &[f64], c: usize) -> f64 {
        let o = self.country_offset(c);
        COUNTRY_TRANSFORMS
            .iter()
            .enumerate()
            .map(|(k, t)| t.log_jacobian(x[o + k]))
            .sum()
    }

    fn country_marginal(&self, p: &CountryParams, c: usize, sigma2_h: f64) -> f64 {
        let cd = &self.data.countries[c];
        Sex::BOTH
            .iter()
            .map(|&sex| {
                let g = cd.curve(&p.theta(sex));
                latent::marginal_loglik(&g, &cd.obs[sex.index()], sigma2_h, p.sigma2)
            })
            .sum()
    }

    fn global_term(&self, g: &Global, j: usize, x: &[f64]) -> f64 {
        let v = g.to_array()[j];
        GLOBAL_FAMILIES[j].lpdf(v, self.hyper.alpha[j], self.hyper.beta[j]) + global_transform(j).log_jacobian(x[j])
    }

    fn finite(v: f64) -> f64 {
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    /// Current parameters in constrained form.
    pub fn decode(&self, x: &[f64]) -> (Global, Vec<CountryParams>) {
        let g = self.global(x);
        let cs = (0..self.data.countries.len()).map(|c| self.country(x, c)).collect();
        (g, cs)
    }

    /// Deterministic starting point for `chain`: country curves from the
    /// least-squares fits where available (prior means otherwise), globals at
    /// their prior means, all jittered on the unconstrained scale.
    pub fn initial_state(&self, fits: &BTreeMap<(String, Sex), FitReport>, seed: u64, chain: usize) -> Vec<f64> {
        let means = self.hyper.prior_means();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream((1u64 << 32) + chain as u64);
        let fallback = |g: &Global, sex: Sex| match sex {
            Sex::Male => DlcParams::new(
                g.a1m,
                g.a2m.min(A2_MAX - 5.0),
                g.a3m,
                g.a4.clamp(5.0, 95.0),
                g.km.max(0.05),
            ),
            Sex::Female => DlcParams::new(
                g.a1f,
                (g.a2m + g.delta_a2).min(A2_MAX - 5.0),
                g.a3f,
                g.a4.clamp(5.0, 95.0),
                g.kf.max(0.02),
            ),
        };
        let tidy = |t: DlcParams| DlcParams {
            a1: t.a1.clamp(1e-3, 2.0),
            a2: t.a2.clamp(-60.0, A2_MAX - 1.0),
            a3: t.a3.clamp(1e-3, 2.0),
            a4: t.a4.clamp(1.0, A4_MAX - 1.0),
            k: t.k.clamp(1e-3, 1.0),
        };
        let countries: Vec<CountryParams> = self
            .data
            .countries
            .iter()
            .map(|cd| {
                let fit = |sex: Sex| fits.get(&(cd.name.clone(), sex)).filter(|f| f.theta_hat.is_valid());
                let m = tidy(fit(Sex::Male).map_or(fallback(&means, Sex::Male), |f| f.theta_hat));
                let f = tidy(fit(Sex::Female).map_or(fallback(&means, Sex::Female), |f| f.theta_hat));
                let sigma2 = fit(Sex::Male)
                    .filter(|f| f.n_obs > 0)
                    .map_or(means.nu.exp(), |f| f.sse / f.n_obs as f64)
                    .clamp(1e-8, 1e-2);
                CountryParams {
                    male: m,
                    a1f: f.a1,
                    delta_a2: f.a2 - m.a2,
                    a3f: f.a3,
                    a4f: f.a4,
                    kf: f.k,
                    sigma2,
                }
            })
            .collect();
        let mut x = self.encode(&means, &countries);
        for v in &mut x {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += 0.1 * z;
        }
        x
    }
}

impl Target for BhmTarget<'_> {
    fn dim(&self) -> usize {
        self.n_global() + N_COUNTRY * self.data.countries.len()
    }

    fn blocks(&self) -> Vec<Block> {
        let mut out = Vec::new();
        for (c, cd) in self.data.countries.iter().enumerate() {
            let o = self.country_offset(c);
            out.push(Block {
                name: cd.name.clone(),
                indices: (o..o + N_COUNTRY).collect(),
                joint: true,
            });
        }
        if self.variant == Variant::Hierarchical {
            out.push(Block {
                name: "global".into(),
                indices: (0..SIGMA2_H).collect(),
                joint: true,
            });
            out.push(Block {
                name: GLOBAL_NAMES[SIGMA2_H].into(),
                indices: vec![SIGMA2_H],
                joint: false,
            });
        }
        out
    }

    fn block_log_density(&self, x: &[f64], block: usize) -> f64 {
        let n = self.data.countries.len();
        let g = self.global(x);
        let lp = if block < n {
            let p = self.country(x, block);
            if !p.is_valid() {
                return f64::NEG_INFINITY;
            }
            log_prior_country(&p, &g) + self.country_jacobian(x, block) + self.country_marginal(&p, block, g.sigma2_h)
        } else if block == n {
            if !g.is_valid() {
                return f64::NEG_INFINITY;
            }
            let level4: f64 = (0..SIGMA2_H).map(|j| self.global_term(&g, j, x)).sum();
            level4 + (0..n).map(|c| log_prior_country(&self.country(x, c), &g)).sum::<f64>()
        } else {
            if !g.is_valid() {
                return f64::NEG_INFINITY;
            }
            self.global_term(&g, SIGMA2_H, x)
                + (0..n)
                    .map(|c| self.country_marginal(&self.country(x, c), c, g.sigma2_h))
                    .sum::<f64>()
        };
        Self::finite(lp)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let g = self.global(x);
        if !g.is_valid() {
            return f64::NEG_INFINITY;
        }
        let mut lp = match self.variant {
            Variant::Hierarchical => (0..N_GLOBAL).map(|j| self.global_term(&g, j, x)).sum(),
            Variant::NonHierarchical => 0.0,
        };
        for c in 0..self.data.countries.len() {
            let p = self.country(x, c);
            if !p.is_valid() {
                return f64::NEG_INFINITY;
            }
            lp += log_prior_country(&p, &g) + self.country_jacobian(x, c) + self.country_marginal(&p, c, g.sigma2_h);
        }
        Self::finite(lp)
    }

    fn output_names(&self) -> Vec<String> {
        let mut out: Vec<String> = GLOBAL_NAMES.iter().map(|s| s.to_string()).collect();
        for cd in &self.data.countries {
            out.extend(COUNTRY_NAMES.iter().map(|p| country_param_name(&cd.name, p)));
        }
        for cd in &self.data.countries {
            for sex in Sex::BOTH {
                if self.keep_latent {
                    out.extend(cd.years().map(|y| latent_name(&cd.name, sex, y)));
                } else {
                    out.push(latent_name(&cd.name, sex, cd.end));
                }
            }
        }
        out
    }

    fn emit(&self, x: &[f64], rng: &mut ChaCha20Rng, out: &mut Vec<f64>) {
        let (g, countries) = self.decode(x);
        out.extend_from_slice(&effective_global(&g, &self.hyper, self.variant).to_array());
        for p in &countries {
            out.extend_from_slice(&p.to_array());
        }
        for (cd, p) in self.data.countries.iter().zip(&countries) {
            for sex in Sex::BOTH {
                let curve = cd.curve(&p.theta(sex));
                let f = latent::filter(&curve, &cd.obs[sex.index()], g.sigma2_h, p.sigma2);
                if self.keep_latent {
                    out.extend(latent::sample_path(&f, &curve, g.sigma2_h, rng));
                } else {
                    out.push(latent::sample_last(&f, *curve.last().unwrap(), rng));
                }
            }
        }
    }
}

/// Fits the model and collects the draws.
pub fn fit_model(
    data: &ModelData,
    hyper: &HyperParams,
    variant: Variant,
    config: &ChainConfig,
    fits: &BTreeMap<(String, Sex), FitReport>,
    keep_latent: bool,
) -> Result<DrawStore> {
    hyper.validate()?;
    config.validate()?;
    if let Some(bad) = data.countries.iter().find(|c| c.name.contains(':')) {
        return Err(Error::InvalidConfig(format!(
            "country name {:?} contains ':'",
            bad.name
        )));
    }
    let target = BhmTarget::new(data, *hyper, variant, keep_latent);
    let out = run_chains(&target, config, |c| target.initial_state(fits, config.seed, c))?;
    let (chains, acceptance) = out.into_iter().map(|o| (o.draws, o.acceptance)).unzip();
    Ok(DrawStore {
        names: target.output_names(),
        chains,
        config: *config,
        variant,
        acceptance,
    })
}
