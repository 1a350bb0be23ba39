//! Run configuration: a TOML file plus command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use asaf_core::evaluate::{CrpsPairs, DEFAULT_TRAIN_ENDS, TEST_END};
use asaf_core::model::{HyperParams, Variant};
use asaf_core::sampler::ChainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub deaths: Option<PathBuf>,
    pub population: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    /// Replaces the built-in ICD map.
    pub icd_map: Option<PathBuf>,
    /// An ASAF file used in place of the estimation stage.
    pub asaf: Option<PathBuf>,
    /// `country,oecd` tags for subgroup reports.
    pub tags: Option<PathBuf>,
    /// External forecasts keyed by training end year.
    pub external_forecasts: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Chains {
    pub n_chains: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub thinning: usize,
    /// Record whole latent paths, not only the final year.
    pub keep_latent: bool,
}

impl Default for Chains {
    fn default() -> Self {
        let c = ChainConfig::default();
        Chains {
            n_chains: c.n_chains,
            iterations: c.iterations,
            warmup: c.warmup,
            thinning: c.thinning,
            keep_latent: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Projection {
    /// Defaults to the year after the last latent year.
    pub start: Option<i32>,
    pub end: i32,
    pub max_trajectories: Option<usize>,
}

impl Default for Projection {
    fn default() -> Self {
        Projection {
            start: None,
            end: 2050,
            max_trajectories: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Validation {
    pub train_ends: Vec<i32>,
    pub test_end: i32,
    pub variants: Vec<String>,
    pub crps_pairs: CrpsPairs,
    /// Trajectories kept per forecast; these are also the persisted draws.
    pub max_trajectories: Option<usize>,
}

impl Default for Validation {
    fn default() -> Self {
        Validation {
            train_ends: DEFAULT_TRAIN_ENDS.to_vec(),
            test_end: TEST_END,
            variants: vec!["bayes".into(), "bayes-s".into()],
            crps_pairs: CrpsPairs::Squared,
            max_trajectories: Some(2000),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub variant: String,
    pub out: PathBuf,
    /// Fit on data up to this year only.
    pub train_end: Option<i32>,
    pub inputs: Inputs,
    pub chains: Chains,
    pub projection: Projection,
    pub validation: Validation,
    /// `alpha_<global>` / `beta_<global>` overrides.
    pub hyper: BTreeMap<String, f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            variant: "bayes".into(),
            out: PathBuf::from("out"),
            train_end: None,
            inputs: Inputs::default(),
            chains: Chains::default(),
            projection: Projection::default(),
            validation: Validation::default(),
            hyper: BTreeMap::new(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub iters: Option<usize>,
    pub warmup: Option<usize>,
    pub variant: Option<String>,
    pub train_end: Option<i32>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Reads `path` (if any), applies overrides and resolves relative input
    /// paths against the config file's directory.
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|_| CliError::MissingInput(p.to_path_buf()))?;
                let mut cfg: RunConfig =
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                cfg.resolve(base);
                cfg
            }
            None => RunConfig::default(),
        };
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = o.chains {
            cfg.chains.n_chains = v;
        }
        if let Some(v) = o.iters {
            cfg.chains.iterations = v;
        }
        if let Some(v) = o.warmup {
            cfg.chains.warmup = v;
        }
        if let Some(v) = &o.variant {
            cfg.variant = v.clone();
            cfg.validation.variants = vec![v.clone()];
        }
        if let Some(v) = o.train_end {
            cfg.train_end = Some(v);
            cfg.validation.train_ends = vec![v];
        }
        if let Some(v) = &o.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut self.inputs;
        for p in [
            &mut i.deaths,
            &mut i.population,
            &mut i.reference,
            &mut i.icd_map,
            &mut i.asaf,
            &mut i.tags,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        i.external_forecasts.values_mut().for_each(fix);
        fix(&mut self.out);
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.variant()?;
        self.chain_config()?.validate()?;
        self.hyper()?;
        for v in &self.validation.variants {
            v.parse::<Variant>()?;
        }
        for &t in &self.validation.train_ends {
            asaf_core::evaluate::Scenario::new(t, self.validation.test_end)?;
        }
        if let Some(s) = self.projection.start {
            if s > self.projection.end {
                return Err(CliError::Config(format!(
                    "projection start {s} after end {}",
                    self.projection.end
                )));
            }
        }
        Ok(())
    }

    pub fn variant(&self) -> Result<Variant, CliError> {
        Ok(self.variant.parse()?)
    }

    pub fn chain_config(&self) -> Result<ChainConfig, CliError> {
        Ok(ChainConfig {
            n_chains: self.chains.n_chains,
            iterations: self.chains.iterations,
            warmup: self.chains.warmup,
            seed: self.seed,
            thinning: self.chains.thinning,
        })
    }

    pub fn hyper(&self) -> Result<HyperParams, CliError> {
        let mut h = HyperParams::default();
        let table: toml::Table = self
            .hyper
            .iter()
            .map(|(k, v)| (k.clone(), toml::Value::Float(*v)))
            .collect();
        h.apply(&table)?;
        Ok(h)
    }

    /// Canonical text of the effective configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
