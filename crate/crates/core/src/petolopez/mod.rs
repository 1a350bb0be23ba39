//! Peto-Lopez indirect estimation of smoking-attributable fractions.
//!
//! Lung-cancer mortality, set against smoker and nonsmoker reference rates,
//! stands in for smoking prevalence. The proxy is combined with cause-specific
//! excess risks into age- and cause-specific fractions, which are then
//! averaged with death-share weights into one all-age fraction per
//! country, sex and year.

mod reference;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ingest::{mortality_rates, AgeGroup, CanonicalDeaths, CauseCategory, DeathTable, IcdMap, PopulationTable};
use crate::types::AsafSeries;

pub use reference::ReferenceRates;

/// Proportion of the population exposed to smoking, from the observed
/// lung-cancer rate placed between the nonsmoker and smoker reference rates.
///
/// Values outside `[0, 1]` are clamped; exceeding the smoker rate is logged.
pub fn prevalence_proxy(d_obs: f64, d_s: f64, d_ns: f64) -> Result<f64> {
    if !(d_s > d_ns && d_ns >= 0.0) {
        return Err(Error::InvalidReference(format!(
            "smoker rate {d_s} must exceed nonsmoker rate {d_ns} >= 0"
        )));
    }
    let p = (d_obs - d_ns) / (d_s - d_ns);
    if p > 1.0 {
        log::warn!("observed lung-cancer rate {d_obs} exceeds smoker reference {d_s}; proxy capped at 1");
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Excess relative risk for cause `k`: full for lung cancer, halved for the
/// other smoking-related causes, and zero for liver cirrhosis and
/// non-medical causes.
pub fn excess_risk(k: CauseCategory, r: f64) -> f64 {
    let er = match k {
        CauseCategory::LungCancer => r - 1.0,
        CauseCategory::LiverCirrhosis | CauseCategory::OtherNonMedical | CauseCategory::AllCauses => 0.0,
        _ => 0.5 * (r - 1.0),
    };
    er.max(0.0)
}

pub fn cause_age_saf(p: f64, er: f64) -> f64 {
    let x = (p * er).max(0.0);
    x / (x + 1.0)
}

/// Zeroes ages 0-34 and copies 75-79 onto 80+.
pub fn apply_age_rules(saf_by_age: &BTreeMap<AgeGroup, f64>) -> Result<BTreeMap<AgeGroup, f64>> {
    let Some(&old) = saf_by_age.get(&AgeGroup::Age75To79) else {
        return Err(Error::MissingAgeGroup(AgeGroup::Age75To79.label()));
    };
    let mut out = saf_by_age.clone();
    out.insert(AgeGroup::Age0To34, 0.0);
    out.insert(AgeGroup::Age80Plus, old);
    Ok(out)
}

/// Death-share weighted mean of cell fractions over the nine categories.
pub fn asaf(saf: &BTreeMap<(CauseCategory, AgeGroup), f64>, deaths: &CanonicalDeaths) -> Result<f64> {
    let mut total = 0.0;
    let mut attributed = 0.0;
    for (&(k, a), &n) in deaths {
        if k == CauseCategory::AllCauses || n == 0.0 {
            continue;
        }
        if !(n >= 0.0) {
            return Err(Error::parse("asaf", format!("negative death count {n} for {k} {a}")));
        }
        let y = *saf
            .get(&(k, a))
            .ok_or_else(|| Error::MissingAgeGroup(format!("no fraction for {k} ages {a}")))?;
        total += n;
        attributed += y * n;
    }
    if total <= 0.0 {
        return Err(Error::MissingDenominator("zero total deaths".into()));
    }
    Ok(attributed / total)
}

/// Ages for which the fraction is actually estimated; the rest follow the age rules.
const ESTIMATED_AGES: [AgeGroup; 5] = [
    AgeGroup::Age35To59,
    AgeGroup::Age60To64,
    AgeGroup::Age65To69,
    AgeGroup::Age70To74,
    AgeGroup::Age75To79,
];

/// Cell fractions for one death table after the age rules.
pub fn cell_fractions(
    deaths: &CanonicalDeaths,
    population: &BTreeMap<AgeGroup, f64>,
    refs: &ReferenceRates,
    sex: crate::types::Sex,
) -> Result<BTreeMap<(CauseCategory, AgeGroup), f64>> {
    let lung: CanonicalDeaths = ESTIMATED_AGES
        .iter()
        .map(|&a| {
            let n = deaths.get(&(CauseCategory::LungCancer, a)).copied().unwrap_or(0.0);
            ((CauseCategory::LungCancer, a), n)
        })
        .collect();
    let rates = mortality_rates(&lung, population)?;
    let mut out = BTreeMap::new();
    for k in CauseCategory::NINE {
        let mut by_age = BTreeMap::new();
        for a in ESTIMATED_AGES {
            let (d_s, d_ns) = refs.lung_rates(a, sex)?;
            let p = prevalence_proxy(rates[&(CauseCategory::LungCancer, a)], d_s, d_ns)?;
            by_age.insert(a, cause_age_saf(p, excess_risk(k, refs.relative_risk(k, a, sex)?)));
        }
        for (a, y) in apply_age_rules(&by_age)? {
            out.insert((k, a), y);
        }
    }
    Ok(out)
}

/// Runs the estimation over every death table, producing one series per
/// (country, sex). Country-years missing any of the nine categories are
/// dropped.
pub fn estimate(
    tables: &[DeathTable],
    population: &PopulationTable,
    refs: &ReferenceRates,
    map: &IcdMap,
) -> Result<Vec<AsafSeries>> {
    let mut out: BTreeMap<(String, crate::types::Sex), AsafSeries> = BTreeMap::new();
    for t in tables {
        let deaths = t.canonicalize_ages(map)?;
        if let Some(k) = CauseCategory::NINE
            .iter()
            .find(|k| !deaths.contains_key(&(**k, AgeGroup::Age35To59)))
        {
            log::warn!(
                "{} {} {}: no deaths coded to {k}; year dropped",
                t.country,
                t.year,
                t.sex
            );
            continue;
        }
        let pop = population.get(&(t.country.clone(), t.sex, t.year)).ok_or_else(|| {
            Error::MissingDenominator(format!("no population for {} {} {}", t.country, t.sex, t.year))
        })?;
        let saf = cell_fractions(&deaths, pop, refs, t.sex)?;
        let y = asaf(&saf, &deaths)?;
        out.entry((t.country.clone(), t.sex))
            .or_insert_with(|| AsafSeries::new(t.country.clone(), t.sex))
            .values
            .insert(t.year, y);
    }
    Ok(out.into_values().collect())
}
