//! Convergence diagnostics: Gelman-Rubin PSRF, Raftery-Lewis run length and
//! effective sample size.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor, Normal};

use super::store::DrawStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Psrf {
    pub point: f64,
    pub upper95: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with an `n - 1` denominator.
fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

fn cov(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64
}

fn check_chains(chains: &[&[f64]], min_len: usize) -> Result<usize> {
    if chains.len() < 2 {
        return Err(Error::InsufficientDraws(format!(
            "{} chain(s); PSRF needs 2",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InsufficientDraws("chains differ in length".into()));
    }
    if n < min_len {
        return Err(Error::InsufficientDraws(format!("{n} draws per chain; need {min_len}")));
    }
    Ok(n)
}

/// Gelman-Rubin potential scale reduction without chain splitting.
///
/// The point estimate is `sqrt(((n-1)/n W + B/n) / W)`. The upper bound uses
/// the F approximation with the degrees-of-freedom correction of
/// Brooks and Gelman, as computed by `coda::gelman.diag`.
pub fn psrf(chains: &[&[f64]]) -> Result<Psrf> {
    let n = check_chains(chains, 4)?;
    let m = chains.len() as f64;
    let nf = n as f64;
    let s2: Vec<f64> = chains.iter().map(|c| var(c)).collect();
    let xbar: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&s2);
    let b = nf * var(&xbar);
    if w == 0.0 {
        return Err(Error::ConstantChain(if b == 0.0 {
            "all chains constant and equal".into()
        } else {
            "every chain is constant".into()
        }));
    }
    let point = (((nf - 1.0) / nf * w + b / nf) / w).sqrt();

    let var_w = var(&s2) / m;
    let var_b = 2.0 * b * b / (m - 1.0);
    let xbar2: Vec<f64> = xbar.iter().map(|v| v * v).collect();
    let grand = mean(&xbar);
    let cov_wb = nf / m * (cov(&s2, &xbar2) - 2.0 * grand * cov(&s2, &xbar));
    let v = (nf - 1.0) / nf * w + (1.0 + 1.0 / m) * b / nf;
    let var_v =
        ((nf - 1.0).powi(2) * var_w + (1.0 + 1.0 / m).powi(2) * var_b + 2.0 * (nf - 1.0) * (1.0 + 1.0 / m) * cov_wb)
            / (nf * nf);
    let df_adj = if var_v > 0.0 {
        let df_v = 2.0 * v * v / var_v;
        (df_v + 3.0) / (df_v + 1.0)
    } else {
        1.0
    };
    let b_df = m - 1.0;
    let w_df = if var_w > 0.0 {
        2.0 * w * w / var_w
    } else {
        f64::INFINITY
    };
    let r2_fixed = (nf - 1.0) / nf;
    let r2_random = (1.0 + 1.0 / m) / nf * (b / w);
    let f_quantile = if w_df.is_finite() && w_df < 1e7 {
        FisherSnedecor::new(b_df, w_df)
            .map_err(|e| Error::InsufficientDraws(e.to_string()))?
            .inverse_cdf(0.975)
    } else {
        ChiSquared::new(b_df)
            .map_err(|e| Error::InsufficientDraws(e.to_string()))?
            .inverse_cdf(0.975)
            / b_df
    };
    let upper95 = (df_adj * (r2_fixed + f_quantile * r2_random)).sqrt();
    Ok(Psrf { point, upper95 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RafteryLewis {
    pub burn: usize,
    pub size: usize,
    /// Pilot size for independent draws.
    pub nmin: usize,
    pub dependence_factor: f64,
}

/// Type-7 sample quantile.
fn quantile7(x: &[f64], q: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Raftery-Lewis run-length diagnostic for quantile `q` to accuracy `r` with
/// probability `s` (convergence tolerance 0.001), following `coda::raftery.diag`.
pub fn raftery_lewis(chain: &[f64], q: f64, r: f64, s: f64) -> Result<RafteryLewis> {
    let phi = Normal::standard().inverse_cdf(0.5 * (1.0 + s));
    let nmin = (q * (1.0 - q) * phi * phi / (r * r)).ceil() as usize;
    if chain.len() < nmin {
        return Err(Error::InsufficientDraws(format!(
            "{} draws; Raftery-Lewis needs at least {nmin}",
            chain.len()
        )));
    }
    if chain.iter().all(|&v| v == chain[0]) {
        return Err(Error::ConstantChain("Raftery-Lewis on a constant chain".into()));
    }
    let cut = quantile7(chain, q);
    let z: Vec<usize> = chain.iter().map(|&v| usize::from(v <= cut)).collect();

    let mut kthin = 0;
    let thinned = loop {
        kthin += 1;
        let t: Vec<usize> = z.iter().step_by(kthin).copied().collect();
        if t.len() < 3 {
            return Err(Error::InsufficientDraws(
                "chain too short to find a Markov thinning".into(),
            ));
        }
        let mut tab = [[[0.0f64; 2]; 2]; 2];
        for w in t.windows(3) {
            tab[w[0]][w[1]][w[2]] += 1.0;
        }
        let mut g2 = 0.0;
        for i1 in 0..2 {
            for i2 in 0..2 {
                for i3 in 0..2 {
                    let o = tab[i1][i2][i3];
                    if o > 0.0 {
                        let fitted = (tab[i1][i2][0] + tab[i1][i2][1]) * (tab[0][i2][i3] + tab[1][i2][i3])
                            / (tab[0][i2][0] + tab[0][i2][1] + tab[1][i2][0] + tab[1][i2][1]);
                        g2 += 2.0 * o * (o / fitted).ln();
                    }
                }
            }
        }
        let bic = g2 - 2.0 * ((t.len() - 2) as f64).ln();
        if bic < 0.0 {
            break t;
        }
    };
    let mut tr = [[0.0f64; 2]; 2];
    for w in thinned.windows(2) {
        tr[w[0]][w[1]] += 1.0;
    }
    let alpha = tr[0][1] / (tr[0][0] + tr[0][1]);
    let beta = tr[1][0] / (tr[1][0] + tr[1][1]);
    if !(alpha + beta > 0.0) {
        return Err(Error::InsufficientDraws(
            "dichotomized chain never switches state".into(),
        ));
    }
    let eps = 0.001;
    let tempburn = (eps * (alpha + beta) / alpha.max(beta)).ln() / (1.0 - alpha - beta).abs().ln();
    let burn = (tempburn.ceil().max(0.0) as usize) * kthin;
    let tempprec = (2.0 - alpha - beta) * alpha * beta * phi * phi / ((alpha + beta).powi(3) * r * r);
    let keep = (tempprec * kthin as f64).ceil() as usize;
    let size = burn + keep;
    Ok(RafteryLewis {
        burn,
        size,
        nmin,
        dependence_factor: size as f64 / nmin as f64,
    })
}

/// Multi-chain effective sample size with Geyer's initial monotone positive
/// sequence. Capped at the total number of draws.
pub fn ess(chains: &[&[f64]]) -> Result<f64> {
    if chains.is_empty() {
        return Err(Error::InsufficientDraws("no chains".into()));
    }
    let n = chains[0].len();
    if n < 4 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::InsufficientDraws(format!(
            "need equal chains of 4+ draws, got {n}"
        )));
    }
    let m = chains.len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains.iter().map(|c| var(c)).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 { var(&means) } else { 0.0 };
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    if !(var_plus > 0.0) {
        return Err(Error::ConstantChain("ESS of a constant parameter".into()));
    }
    let centered: Vec<Vec<f64>> = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| v - mu).collect())
        .collect();
    let rho = |t: usize| -> f64 {
        let acov: f64 = centered
            .iter()
            .map(|c| c[..n - t].iter().zip(&c[t..]).map(|(a, b)| a * b).sum::<f64>() / nf)
            .sum::<f64>()
            / m as f64;
        1.0 - (w - acov) / var_plus
    };
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let p = rho(t) + rho(t + 1);
        if p <= 0.0 {
            break;
        }
        let p = p.min(prev);
        tau += 2.0 * p;
        prev = p;
        t += 2;
    }
    let total = (m * n) as f64;
    Ok((total / tau.max(1.0 / total.log10())).min(total))
}

/// Quantiles and tolerances of the reported Raftery-Lewis runs.
pub const RL_QUANTILES: [f64; 2] = [0.025, 0.975];
pub const RL_ACCURACY: f64 = 0.0125;
pub const RL_PROBABILITY: f64 = 0.95;

/// One row of `diagnostics.csv`. Empty cells mean the statistic is undefined
/// (a parameter that never moves, for instance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub parameter: String,
    pub psrf: Option<f64>,
    pub upper95: Option<f64>,
    pub burn1: Option<usize>,
    pub size1: Option<usize>,
    pub df1: Option<f64>,
    pub burn2: Option<usize>,
    pub size2: Option<usize>,
    pub df2: Option<f64>,
    pub ess: Option<f64>,
}

/// Diagnostics for the named parameters. Raftery-Lewis runs on the first chain.
pub fn diagnose(store: &DrawStore, params: &[String]) -> Result<Vec<DiagnosticRow>> {
    use rayon::prelude::*;
    params
        .par_iter()
        .map(|name| {
            let j = store
                .index_of(name)
                .ok_or_else(|| Error::parse("diagnostics", format!("no parameter {name:?}")))?;
            let chains = store.param_chains(j);
            let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
            let p = psrf(&refs).ok();
            let rl: Vec<Option<RafteryLewis>> = RL_QUANTILES
                .iter()
                .map(|&q| raftery_lewis(&chains[0], q, RL_ACCURACY, RL_PROBABILITY).ok())
                .collect();
            Ok(DiagnosticRow {
                parameter: name.clone(),
                psrf: p.map(|p| p.point),
                upper95: p.map(|p| p.upper95),
                burn1: rl[0].map(|r| r.burn),
                size1: rl[0].map(|r| r.size),
                df1: rl[0].map(|r| r.dependence_factor),
                burn2: rl[1].map(|r| r.burn),
                size2: rl[1].map(|r| r.size),
                df2: rl[1].map(|r| r.dependence_factor),
                ess: ess(&refs).ok(),
            })
        })
        .collect()
}

pub fn write_diagnostics<W: std::io::Write>(writer: W, rows: &[DiagnosticRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("diagnostics.csv", e))?;
    Ok(())
}
