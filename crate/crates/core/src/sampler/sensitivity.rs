//! Local sensitivity of posterior means to the Level-4 hyperparameters.
//!
//! For a hyperparameter ζ of the prior `p(ψ_j | ζ)`, the derivative of the
//! posterior mean of a target with respect to ζ equals the posterior
//! covariance between the target and `∂ ln p(ψ_j | ζ) / ∂ζ`. Dividing by the
//! posterior sd of the target gives the normalized value.

use serde::{Deserialize, Serialize};

use super::store::DrawStore;
use crate::error::{Error, Result};
use crate::model::{HyperParams, GLOBAL_FAMILIES, GLOBAL_NAMES, N_GLOBAL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    /// Posterior covariance of target and score.
    pub raw: f64,
    /// `raw / sd(target)`, signed.
    pub normalized: f64,
}

impl Sensitivity {
    pub fn exceeds_one(&self) -> bool {
        self.normalized.abs() > 1.0
    }
}

/// Sensitivity from paired draws of the target and the score.
pub fn local_sensitivity(target: &[f64], score: &[f64]) -> Result<Sensitivity> {
    let n = target.len();
    if n < 2 || score.len() != n {
        return Err(Error::InsufficientDraws(format!(
            "{n} target draws, {} score draws",
            score.len()
        )));
    }
    let nf = n as f64;
    let mt = target.iter().sum::<f64>() / nf;
    let ms = score.iter().sum::<f64>() / nf;
    let cov = target.iter().zip(score).map(|(t, s)| (t - mt) * (s - ms)).sum::<f64>() / (nf - 1.0);
    let sd = (target.iter().map(|t| (t - mt).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateTarget("target draws have zero spread".into()));
    }
    Ok(Sensitivity {
        raw: cov,
        normalized: cov / sd,
    })
}

/// Score of the hyperparameter `index` (in [`HyperParams::names`] order)
/// evaluated at each draw of its global parameter.
pub fn hyper_scores(store: &DrawStore, hyper: &HyperParams, index: usize) -> Result<Vec<f64>> {
    let j = index % N_GLOBAL;
    let x = store.pooled_by_name(GLOBAL_NAMES[j])?;
    let (a, b) = (hyper.alpha[j], hyper.beta[j]);
    Ok(x.iter()
        .map(|&v| {
            let (da, db) = GLOBAL_FAMILIES[j].score(v, a, b);
            if index < N_GLOBAL {
                da
            } else {
                db
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub hyperparameter: String,
    pub target: String,
    pub raw: f64,
    pub normalized: f64,
    pub exceeds_one: bool,
}

/// Every hyperparameter against every global parameter.
pub fn sensitivity_table(store: &DrawStore, hyper: &HyperParams) -> Result<Vec<SensitivityRow>> {
    let names = HyperParams::names();
    let targets: Vec<Vec<f64>> = GLOBAL_NAMES
        .iter()
        .map(|n| store.pooled_by_name(n))
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(names.len() * N_GLOBAL);
    for (i, hname) in names.iter().enumerate() {
        let score = hyper_scores(store, hyper, i)?;
        for (tname, t) in GLOBAL_NAMES.iter().zip(&targets) {
            let s = local_sensitivity(t, &score)?;
            out.push(SensitivityRow {
                hyperparameter: hname.clone(),
                target: tname.to_string(),
                raw: s.raw,
                normalized: s.normalized,
                exceeds_one: s.exceeds_one(),
            });
        }
    }
    Ok(out)
}

pub fn write_sensitivity<W: std::io::Write>(writer: W, rows: &[SensitivityRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("sensitivity.csv", e))?;
    Ok(())
}
