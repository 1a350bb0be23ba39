use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dist::Family;
use crate::doublelogistic::DlcParams;
use crate::error::{Error, Result};
use crate::types::Sex;

pub const N_GLOBAL: usize = 17;

/// Global parameter names, in the order used throughout (and in reports).
pub const GLOBAL_NAMES: [&str; N_GLOBAL] = [
    "a1m",
    "a2m",
    "a3m",
    "a4",
    "km",
    "sigma2_a2m",
    "sigma2_a4",
    "sigma2_km",
    "a1f",
    "delta_a2",
    "a3f",
    "kf",
    "sigma2_delta_a2",
    "sigma2_kf",
    "nu",
    "rho2",
    "sigma2_h",
];

/// Level-4 prior family of each global parameter.
pub const GLOBAL_FAMILIES: [Family; N_GLOBAL] = [
    Family::Gamma,
    Family::Normal,
    Family::Gamma,
    Family::Normal,
    Family::Normal,
    Family::InvGamma,
    Family::InvGamma,
    Family::InvGamma,
    Family::Gamma,
    Family::Normal,
    Family::Gamma,
    Family::Normal,
    Family::InvGamma,
    Family::InvGamma,
    Family::Normal,
    Family::InvGamma,
    Family::InvGamma,
];

/// Global parameters ψ together with ν, ρ² and σ²_h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Global {
    pub a1m: f64,
    pub a2m: f64,
    pub a3m: f64,
    pub a4: f64,
    pub km: f64,
    pub sigma2_a2m: f64,
    pub sigma2_a4: f64,
    pub sigma2_km: f64,
    pub a1f: f64,
    pub delta_a2: f64,
    pub a3f: f64,
    pub kf: f64,
    pub sigma2_delta_a2: f64,
    pub sigma2_kf: f64,
    pub nu: f64,
    pub rho2: f64,
    pub sigma2_h: f64,
}

impl Global {
    pub fn to_array(&self) -> [f64; N_GLOBAL] {
        [
            self.a1m,
            self.a2m,
            self.a3m,
            self.a4,
            self.km,
            self.sigma2_a2m,
            self.sigma2_a4,
            self.sigma2_km,
            self.a1f,
            self.delta_a2,
            self.a3f,
            self.kf,
            self.sigma2_delta_a2,
            self.sigma2_kf,
            self.nu,
            self.rho2,
            self.sigma2_h,
        ]
    }

    pub fn from_array(v: [f64; N_GLOBAL]) -> Self {
        Global {
            a1m: v[0],
            a2m: v[1],
            a3m: v[2],
            a4: v[3],
            km: v[4],
            sigma2_a2m: v[5],
            sigma2_a4: v[6],
            sigma2_km: v[7],
            a1f: v[8],
            delta_a2: v[9],
            a3f: v[10],
            kf: v[11],
            sigma2_delta_a2: v[12],
            sigma2_kf: v[13],
            nu: v[14],
            rho2: v[15],
            sigma2_h: v[16],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.to_array()
            .iter()
            .zip(GLOBAL_FAMILIES)
            .all(|(&x, f)| x.is_finite() && (!f.positive() || x > 0.0))
    }
}

/// Level-4 hyperparameters: one (α, β) pair per global parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub alpha: [f64; N_GLOBAL],
    pub beta: [f64; N_GLOBAL],
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            alpha: [
                1.477, 24.362, 1.031, 38.362, 0.362, 2.0, 2.0, 2.0, 2.093, 12.080, 1.031, 0.362, 2.0, 2.0, -10.414,
                2.0, 2.0,
            ],
            beta: [
                9.423,
                12.488,
                7.378,
                19.058,
                0.255,
                12.488 * 12.488,
                19.058 * 19.058,
                0.255 * 0.255,
                16.302,
                11.140,
                7.378,
                0.255,
                11.0 * 11.0,
                0.255 * 0.255,
                1.186 * 1.186,
                1.186 * 1.186,
                0.01 * 0.01,
            ],
        }
    }
}

impl HyperParams {
    /// Keys `alpha_<global>` / `beta_<global>`, alphas first.
    pub fn names() -> Vec<String> {
        let mut out: Vec<String> = GLOBAL_NAMES.iter().map(|n| format!("alpha_{n}")).collect();
        out.extend(GLOBAL_NAMES.iter().map(|n| format!("beta_{n}")));
        out
    }

    /// Hyperparameter `index` in [`HyperParams::names`] order.
    pub fn get(&self, index: usize) -> f64 {
        if index < N_GLOBAL {
            self.alpha[index]
        } else {
            self.beta[index - N_GLOBAL]
        }
    }

    pub fn set(&mut self, index: usize, value: f64) {
        if index < N_GLOBAL {
            self.alpha[index] = value;
        } else {
            self.beta[index - N_GLOBAL] = value;
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (j, fam) in GLOBAL_FAMILIES.iter().enumerate() {
            let (a, b) = (self.alpha[j], self.beta[j]);
            let name = GLOBAL_NAMES[j];
            let ok = a.is_finite()
                && b.is_finite()
                && match fam {
                    Family::Gamma => a > 0.0 && b > 0.0,
                    Family::Normal => b > 0.0,
                    Family::InvGamma => a > 1.0 && b > 0.0,
                };
            if !ok {
                return Err(Error::InvalidConfig(format!(
                    "hyperparameters for {name} ({fam:?}) invalid: alpha {a}, beta {b}"
                )));
            }
        }
        Ok(())
    }

    /// Level-4 prior means: the freeze point of the non-hierarchical variant.
    pub fn prior_means(&self) -> Global {
        let mut v = [0.0; N_GLOBAL];
        for j in 0..N_GLOBAL {
            v[j] = GLOBAL_FAMILIES[j].mean(self.alpha[j], self.beta[j]);
        }
        Global::from_array(v)
    }

    /// Applies a flat `key = value` TOML document over the defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("hyperparameters: {e}")))?;
        let mut out = HyperParams::default();
        out.apply(&table)?;
        Ok(out)
    }

    pub fn apply(&mut self, table: &toml::Table) -> Result<()> {
        let names = Self::names();
        for (key, value) in table {
            let idx = names
                .iter()
                .position(|n| n == key)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown hyperparameter {key:?}")))?;
            let v = match value {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(i) => *i as f64,
                other => return Err(Error::InvalidConfig(format!("{key} must be a number, got {other}"))),
            };
            self.set(idx, v);
        }
        self.validate()
    }

    /// Name -> value, for manifests.
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        Self::names()
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n, self.get(i)))
            .collect()
    }
}

/// Country-level parameters: male curve, female curve (its a2 offset from the
/// male one by Δ), and the measurement variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountryParams {
    pub male: DlcParams,
    pub a1f: f64,
    pub delta_a2: f64,
    pub a3f: f64,
    pub a4f: f64,
    pub kf: f64,
    pub sigma2: f64,
}

pub const COUNTRY_NAMES: [&str; 11] = [
    "a1_m", "a2_m", "a3_m", "a4_m", "k_m", "a1_f", "delta_a2", "a3_f", "a4_f", "k_f", "sigma2",
];

impl CountryParams {
    pub fn theta(&self, sex: Sex) -> DlcParams {
        match sex {
            Sex::Male => self.male,
            Sex::Female => DlcParams::new(self.a1f, self.male.a2 + self.delta_a2, self.a3f, self.a4f, self.kf),
        }
    }

    pub fn to_array(&self) -> [f64; 11] {
        let m = self.male;
        [
            m.a1,
            m.a2,
            m.a3,
            m.a4,
            m.k,
            self.a1f,
            self.delta_a2,
            self.a3f,
            self.a4f,
            self.kf,
            self.sigma2,
        ]
    }

    pub fn from_array(v: [f64; 11]) -> Self {
        CountryParams {
            male: DlcParams::new(v[0], v[1], v[2], v[3], v[4]),
            a1f: v[5],
            delta_a2: v[6],
            a3f: v[7],
            a4f: v[8],
            kf: v[9],
            sigma2: v[10],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.male.is_valid()
            && self.male.a2 <= super::A2_MAX
            && self.theta(Sex::Female).is_valid()
            && self.sigma2 > 0.0
            && self.sigma2.is_finite()
            && self.delta_a2.is_finite()
    }
}
