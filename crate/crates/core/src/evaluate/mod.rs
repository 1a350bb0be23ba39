//! Out-of-sample validation: scenario splits, eligibility, point and interval
//! accuracy, CRPS, the persistence baseline and imported external forecasts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::doublelogistic::Classification;
use crate::error::{Error, Result};
use crate::forecast::{quantiles, Series, TrajectorySet, FAN_LEVELS};
use crate::types::{AsafSeries, Sex};

pub const TEST_END: i32 = 2015;
pub const DEFAULT_TRAIN_ENDS: [i32; 3] = [2000, 2005, 2010];
/// Central interval levels reported, in percent.
pub const INTERVAL_LEVELS: [u32; 3] = [80, 90, 95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub train_end: i32,
    pub test_end: i32,
}

impl Scenario {
    pub fn new(train_end: i32, test_end: i32) -> Result<Self> {
        if train_end >= test_end {
            return Err(Error::InvalidConfig(format!(
                "train end {train_end} must precede test end {test_end}"
            )));
        }
        Ok(Scenario { train_end, test_end })
    }

    pub fn defaults() -> Vec<Scenario> {
        DEFAULT_TRAIN_ENDS
            .iter()
            .map(|&t| Scenario {
                train_end: t,
                test_end: TEST_END,
            })
            .collect()
    }

    pub fn train(&self, s: &AsafSeries) -> AsafSeries {
        s.through(self.train_end)
    }

    /// Observations in `(train_end, test_end]`.
    pub fn test(&self, s: &AsafSeries) -> AsafSeries {
        s.after(self.train_end, self.test_end)
    }
}

/// Countries whose male series is clear-pattern, with more than 10 training
/// observations and at least one test observation.
pub fn select_validation_countries(
    series: &[AsafSeries],
    classification: &[Classification],
    scenario: &Scenario,
) -> Vec<String> {
    let clear: BTreeSet<&str> = classification
        .iter()
        .filter(|c| c.sex == Sex::Male && c.clear_pattern)
        .map(|c| c.country.as_str())
        .collect();
    let mut out: Vec<String> = series
        .iter()
        .filter(|s| s.sex == Sex::Male && clear.contains(s.country.as_str()))
        .filter(|s| scenario.train(s).len() > 10 && !scenario.test(s).is_empty())
        .map(|s| s.country.clone())
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Predictive distribution for one (country, sex, year).
#[derive(Debug, Clone, PartialEq)]
pub struct Predictive {
    pub median: f64,
    /// Quantiles keyed by probability in permille (25 = 2.5%).
    pub quantiles: BTreeMap<u32, f64>,
    pub samples: Option<Vec<f64>>,
}

impl Predictive {
    pub fn point(value: f64) -> Self {
        Predictive {
            median: value,
            quantiles: BTreeMap::new(),
            samples: None,
        }
    }

    /// Median and the quantiles needed for every reported interval, by type 8.
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let mut levels = interval_permille();
        levels.insert(500);
        let probs: Vec<f64> = levels.iter().map(|&l| f64::from(l) / 1000.0).collect();
        let quantiles: BTreeMap<u32, f64> = levels.into_iter().zip(quantiles(&samples, &probs)).collect();
        Predictive {
            median: quantiles[&500],
            quantiles,
            samples: Some(samples),
        }
    }

    /// Central interval at `level` percent.
    pub fn interval(&self, level: u32) -> Result<(f64, f64)> {
        let tail = (1000 - 10 * level) / 2;
        match (self.quantiles.get(&tail), self.quantiles.get(&(1000 - tail))) {
            (Some(&lo), Some(&hi)) => Ok((lo, hi)),
            _ => Err(Error::MissingQuantile(format!("{level}%"))),
        }
    }
}

fn interval_permille() -> BTreeSet<u32> {
    INTERVAL_LEVELS
        .iter()
        .flat_map(|&l| {
            let tail = (1000 - 10 * l) / 2;
            [tail, 1000 - tail]
        })
        .collect()
}

pub type ForecastKey = (String, Sex, i32);

/// One method's forecasts.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastSet {
    pub method: String,
    pub entries: BTreeMap<ForecastKey, Predictive>,
}

impl ForecastSet {
    /// Predictive of the observed series at every simulated year.
    pub fn from_trajectories(method: &str, set: &TrajectorySet) -> Self {
        let mut entries = BTreeMap::new();
        for u in &set.units {
            for &year in &u.years {
                let samples = u.at_year(Series::Observed, year).expect("year on axis");
                entries.insert((u.country.clone(), u.sex, year), Predictive::from_samples(samples));
            }
        }
        ForecastSet {
            method: method.to_string(),
            entries,
        }
    }
}

/// Carries the last training value forward over `years`.
pub fn persistence_forecast(train: &AsafSeries, years: impl IntoIterator<Item = i32>) -> Result<Vec<(i32, f64)>> {
    let (_, &last) = train
        .values
        .iter()
        .next_back()
        .ok_or_else(|| Error::EmptyTraining(format!("{} {}", train.country, train.sex)))?;
    Ok(years.into_iter().map(|y| (y, last)).collect())
}

/// Persistence forecasts for every country and sex in `series` over the test years.
pub fn persistence_set(series: &[AsafSeries], countries: &[String], scenario: &Scenario) -> Result<ForecastSet> {
    let keep: BTreeSet<&str> = countries.iter().map(String::as_str).collect();
    let mut entries = BTreeMap::new();
    for s in series.iter().filter(|s| keep.contains(s.country.as_str())) {
        let train = scenario.train(s);
        if train.is_empty() {
            log::warn!("{} {}: no training data; no persistence forecast", s.country, s.sex);
            continue;
        }
        for (year, v) in persistence_forecast(&train, scenario.train_end + 1..=scenario.test_end)? {
            entries.insert((s.country.clone(), s.sex, year), Predictive::point(v));
        }
    }
    Ok(ForecastSet {
        method: "persistence".into(),
        entries,
    })
}

/// Mean absolute error over all pairs `(forecast, observed)`.
pub fn mae(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyValidation);
    }
    Ok(pairs.iter().map(|(f, y)| (f - y).abs()).sum::<f64>() / pairs.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub coverage: f64,
    pub half_width: f64,
}

/// Fraction of observations inside their interval, and the mean half-width.
pub fn interval_coverage(points: &[((f64, f64), f64)]) -> Result<Coverage> {
    if points.is_empty() {
        return Err(Error::EmptyValidation);
    }
    let n = points.len() as f64;
    let inside = points.iter().filter(|((lo, hi), y)| (lo..=hi).contains(&y)).count();
    let hw = points.iter().map(|((lo, hi), _)| 0.5 * (hi - lo)).sum::<f64>() / n;
    Ok(Coverage {
        coverage: inside as f64 / n,
        half_width: hw,
    })
}

/// Normalization of the pair term in the CRPS estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrpsPairs {
    /// Divide by m²: the CRPS of the empirical distribution.
    #[default]
    Squared,
    /// Divide by m(m-1).
    Unbiased,
}

impl CrpsPairs {
    pub fn as_str(self) -> &'static str {
        match self {
            CrpsPairs::Squared => "m^2",
            CrpsPairs::Unbiased => "m(m-1)",
        }
    }
}

/// `mean|X - y| - ½ mean|X - X'|` over the samples.
pub fn crps(samples: &[f64], y: f64, pairs: CrpsPairs) -> Result<f64> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::InsufficientDraws(format!("{m} sample(s); CRPS needs 2")));
    }
    let mf = m as f64;
    let first = samples.iter().map(|x| (x - y).abs()).sum::<f64>() / mf;
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    // Σ_i Σ_j |x_i - x_j| = 2 Σ_k (2k - m + 1) x_(k), k 0-based.
    let pair_sum: f64 = 2.0
        * s.iter()
            .enumerate()
            .map(|(k, x)| (2.0 * k as f64 - mf + 1.0) * x)
            .sum::<f64>();
    let denom = match pairs {
        CrpsPairs::Squared => mf * mf,
        CrpsPairs::Unbiased => mf * (mf - 1.0),
    };
    Ok((first - 0.5 * pair_sum / denom).max(0.0))
}

/// One row of the validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub train_end: i32,
    pub test_end: i32,
    pub sex: Sex,
    pub method: String,
    pub subgroup: String,
    pub n_countries: usize,
    pub n_points: usize,
    pub mae: f64,
    /// Per level in [`INTERVAL_LEVELS`]; `None` when the method has no such interval.
    pub intervals: [Option<Coverage>; 3],
    pub crps: Option<f64>,
}

/// Observation and matching forecast.
struct Point<'a> {
    country: &'a str,
    y: f64,
    p: &'a Predictive,
}

fn score(points: &[Point<'_>], pairs: CrpsPairs) -> Result<(f64, [Option<Coverage>; 3], Option<f64>)> {
    let pairs_fy: Vec<(f64, f64)> = points.iter().map(|pt| (pt.p.median, pt.y)).collect();
    let m = mae(&pairs_fy)?;
    let mut intervals = [None; 3];
    for (slot, &level) in intervals.iter_mut().zip(&INTERVAL_LEVELS) {
        let iv: Result<Vec<_>> = points.iter().map(|pt| Ok((pt.p.interval(level)?, pt.y))).collect();
        *slot = match iv {
            Ok(iv) => Some(interval_coverage(&iv)?),
            Err(Error::MissingQuantile(_)) => None,
            Err(e) => return Err(e),
        };
    }
    // Average within country, then across countries.
    let crps = if points
        .iter()
        .all(|pt| pt.p.samples.as_ref().is_some_and(|s| s.len() >= 2))
    {
        let mut by_country: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for pt in points {
            let c = crps(pt.p.samples.as_deref().unwrap(), pt.y, pairs)?;
            let e = by_country.entry(pt.country).or_default();
            e.0 += c;
            e.1 += 1;
        }
        Some(by_country.values().map(|(s, n)| s / *n as f64).sum::<f64>() / by_country.len() as f64)
    } else {
        None
    };
    Ok((m, intervals, crps))
}

pub struct ReportInput<'a> {
    pub scenario: Scenario,
    pub observations: &'a [AsafSeries],
    pub countries: &'a [String],
    pub forecasts: &'a [ForecastSet],
    /// Country → OECD member. When present, subgroup rows are added.
    pub tags: Option<&'a BTreeMap<String, bool>>,
    pub crps_pairs: CrpsPairs,
}

/// Scores every method on the test observations of `countries`, per sex and subgroup.
pub fn subgroup_report(input: &ReportInput<'_>) -> Result<Vec<ReportRow>> {
    let keep: BTreeSet<&str> = input.countries.iter().map(String::as_str).collect();
    if let Some(tags) = input.tags {
        if let Some(c) = keep.iter().find(|c| !tags.contains_key(**c)) {
            return Err(Error::MissingTag(c.to_string()));
        }
    }
    let mut groups: Vec<(String, Option<bool>)> = vec![("all".into(), None)];
    if input.tags.is_some() {
        groups.push(("OECD".into(), Some(true)));
        groups.push(("non-OECD".into(), Some(false)));
    }
    let mut rows = Vec::new();
    for sex in Sex::BOTH {
        for fs in input.forecasts {
            for (group, member) in &groups {
                let mut points = Vec::new();
                for s in input
                    .observations
                    .iter()
                    .filter(|s| s.sex == sex && keep.contains(s.country.as_str()))
                {
                    if let (Some(tags), Some(m)) = (input.tags, member) {
                        if tags[&s.country] != *m {
                            continue;
                        }
                    }
                    for (&year, &y) in input.scenario.test(s).values.iter() {
                        let p = fs.entries.get(&(s.country.clone(), sex, year)).ok_or_else(|| {
                            Error::parse(
                                format!("{} forecasts", fs.method),
                                format!("no forecast for {} {sex} {year}", s.country),
                            )
                        })?;
                        points.push(Point {
                            country: s.country.as_str(),
                            y,
                            p,
                        });
                    }
                }
                if points.is_empty() {
                    if group == "all" {
                        log::warn!("{} {sex}: no validation points", fs.method);
                    }
                    continue;
                }
                let (m, intervals, crps) = score(&points, input.crps_pairs)?;
                let n_countries = points.iter().map(|p| p.country).collect::<BTreeSet<_>>().len();
                rows.push(ReportRow {
                    train_end: input.scenario.train_end,
                    test_end: input.scenario.test_end,
                    sex,
                    method: fs.method.clone(),
                    subgroup: group.clone(),
                    n_countries,
                    n_points: points.len(),
                    mae: m,
                    intervals,
                    crps,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyValidation);
    }
    Ok(rows)
}

/// Writes the report; undefined cells are written as `-`.
pub fn write_report<W: Write>(writer: W, rows: &[ReportRow], pairs: CrpsPairs) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = [
        "train_end",
        "test_end",
        "sex",
        "method",
        "subgroup",
        "n_countries",
        "n_points",
        "mae",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for l in INTERVAL_LEVELS {
        header.push(format!("coverage{l}"));
        header.push(format!("halfwidth{l}"));
    }
    header.push("crps".into());
    header.push("crps_pairs".into());
    w.write_record(&header)?;
    let dash = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v}"));
    for r in rows {
        let mut rec = vec![
            r.train_end.to_string(),
            r.test_end.to_string(),
            r.sex.to_string(),
            r.method.clone(),
            r.subgroup.clone(),
            r.n_countries.to_string(),
            r.n_points.to_string(),
            format!("{}", r.mae),
        ];
        for c in &r.intervals {
            rec.push(dash(c.map(|c| c.coverage)));
            rec.push(dash(c.map(|c| c.half_width)));
        }
        rec.push(dash(r.crps));
        rec.push(pairs.as_str().to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("report", e))?;
    Ok(())
}

/// `country_tags.csv`: `country,oecd` with `Y`/`N`.
pub fn read_tags<R: Read>(reader: R) -> Result<BTreeMap<String, bool>> {
    #[derive(Deserialize)]
    struct Row {
        country: String,
        oecd: String,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = BTreeMap::new();
    for row in rdr.deserialize::<Row>() {
        let row = row?;
        let v = match row.oecd.to_ascii_uppercase().as_str() {
            "Y" | "YES" | "TRUE" | "1" => true,
            "N" | "NO" | "FALSE" | "0" => false,
            other => {
                return Err(Error::parse(
                    "country_tags.csv",
                    format!("{}: oecd {other:?}", row.country),
                ))
            }
        };
        out.insert(row.country, v);
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct ExternalRow {
    method: String,
    country: String,
    sex: Sex,
    year: i32,
    q025: f64,
    q10: f64,
    q50: f64,
    q90: f64,
    q975: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    draw_file: Option<String>,
}

const EXTERNAL_HEADER: [&str; 10] = [
    "method",
    "country",
    "sex",
    "year",
    "q025",
    "q10",
    "q50",
    "q90",
    "q975",
    "draw_file",
];

fn fan_permille() -> [u32; 5] {
    FAN_LEVELS.map(|l| (l * 10.0).round() as u32)
}

/// Reads `external_forecasts.csv`. Draw files, one value per line under a
/// `value` header, are resolved against `base`.
pub fn import_external_forecasts<R: Read>(reader: R, base: &Path) -> Result<Vec<ForecastSet>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for h in &EXTERNAL_HEADER[..9] {
        if !headers.iter().any(|x| x == *h) {
            return Err(Error::parse("external forecasts", format!("missing column {h:?}")));
        }
    }
    let mut sets: BTreeMap<String, ForecastSet> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<ExternalRow>().enumerate() {
        let row = row.map_err(|e| Error::parse("external forecasts", format!("row {}: {e}", i + 2)))?;
        let q = [row.q025, row.q10, row.q50, row.q90, row.q975];
        if q.iter().any(|v| !v.is_finite()) || q.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::parse(
                "external forecasts",
                format!("row {}: quantiles must be finite and nondecreasing", i + 2),
            ));
        }
        let samples = match row.draw_file.as_deref().filter(|s| !s.is_empty()) {
            Some(f) => Some(read_draw_file(&base.join(f))?),
            None => None,
        };
        let mut quantiles: BTreeMap<u32, f64> = fan_permille().into_iter().zip(q).collect();
        if let Some(s) = &samples {
            // Levels the file does not carry come from the draws.
            for (l, v) in Predictive::from_samples(s.clone()).quantiles {
                quantiles.entry(l).or_insert(v);
            }
        }
        let p = Predictive {
            median: row.q50,
            quantiles,
            samples,
        };
        let set = sets.entry(row.method.clone()).or_insert_with(|| ForecastSet {
            method: row.method.clone(),
            entries: BTreeMap::new(),
        });
        if set
            .entries
            .insert((row.country.clone(), row.sex, row.year), p)
            .is_some()
        {
            return Err(Error::parse(
                "external forecasts",
                format!("{} {} {} {} repeated", row.method, row.country, row.sex, row.year),
            ));
        }
    }
    Ok(sets.into_values().collect())
}

fn read_draw_file(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v: f64 = rec
            .get(0)
            .unwrap_or_default()
            .trim()
            .parse()
            .map_err(|e| Error::parse(path.display().to_string(), e))?;
        out.push(v);
    }
    Ok(out)
}

/// Writes forecasts in the import format. With `draw_dir`, samples are
/// written to one file per row there, referenced relative to `base`.
pub fn export_forecasts<W: Write>(writer: W, set: &ForecastSet, draw_dir: Option<(&Path, &Path)>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(EXTERNAL_HEADER)?;
    for ((country, sex, year), p) in &set.entries {
        let mut q = [0.0; 5];
        for (slot, l) in q.iter_mut().zip(fan_permille()) {
            *slot = match p.quantiles.get(&l) {
                Some(&v) => v,
                None => match &p.samples {
                    Some(s) => quantiles(s, &[f64::from(l) / 1000.0])[0],
                    None if p.quantiles.is_empty() => p.median,
                    None => return Err(Error::MissingQuantile(format!("{}‰", l))),
                },
            };
        }
        q[2] = p.median;
        let draw_file = match (draw_dir, &p.samples) {
            (Some((dir, base)), Some(s)) => {
                let name = format!("{}_{}_{}_{}.csv", set.method, country, sex, year);
                let path = dir.join(&name);
                let mut text = String::from("value\n");
                for v in s {
                    writeln!(text, "{v}").expect("write to string");
                }
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                Some(path.strip_prefix(base).unwrap_or(&path).to_string_lossy().into_owned())
            }
            _ => None,
        };
        w.write_record([
            set.method.clone(),
            country.clone(),
            sex.to_string(),
            year.to_string(),
            q[0].to_string(),
            q[1].to_string(),
            q[2].to_string(),
            q[3].to_string(),
            q[4].to_string(),
            draw_file.unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("forecasts", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// ∫ (F(x) - 1{y ≤ x})² dx for the empirical CDF of `atoms`, integrated
    /// piecewise between breakpoints (the integrand is constant on each piece).
    fn crps_integral(atoms: &[f64], y: f64) -> f64 {
        let mut pts: Vec<f64> = atoms.to_vec();
        pts.push(y);
        pts.sort_by(f64::total_cmp);
        let m = atoms.len() as f64;
        let mut total = 0.0;
        for w in pts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let f = atoms.iter().filter(|&&a| a <= mid).count() as f64 / m;
            let ind = if y <= mid { 1.0 } else { 0.0 };
            total += (f - ind).powi(2) * (w[1] - w[0]);
        }
        total
    }

    #[test]
    fn crps_examples() {
        assert_eq!(crps(&[0.3, 0.3, 0.3], 0.3, CrpsPairs::Squared).unwrap(), 0.0);
        assert!((crps(&[0.0, 1.0], 0.0, CrpsPairs::Squared).unwrap() - 0.25).abs() < 1e-15);
        assert!((crps_integral(&[0.0, 1.0], 0.0) - 0.25).abs() < 1e-15);
        assert!(matches!(
            crps(&[1.0], 0.0, CrpsPairs::Squared),
            Err(Error::InsufficientDraws(_))
        ));
        // Unbiased variant on {0,1}, y = 0: 0.5 - 0.5 * 2/2 = 0.
        assert_eq!(crps(&[0.0, 1.0], 0.0, CrpsPairs::Unbiased).unwrap(), 0.0);
    }

    #[test]
    fn crps_gaussian_closed_form() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        // σ (2 φ(0) - 1/√π) with σ = 1.
        let oracle = 2.0 / (2.0 * std::f64::consts::PI).sqrt() - 1.0 / std::f64::consts::PI.sqrt();
        assert!((oracle - 0.2337).abs() < 1e-4);
        let c = crps(&x, 0.0, CrpsPairs::Squared).unwrap();
        assert!((c - oracle).abs() < 0.002, "{c}");
    }

    proptest! {
        #[test]
        fn crps_matches_integral(atoms in prop::collection::vec(-3.0f64..3.0, 1..=10), y in -4.0f64..4.0) {
            prop_assume!(atoms.len() >= 2);
            let c = crps(&atoms, y, CrpsPairs::Squared).unwrap();
            prop_assert!((c - crps_integral(&atoms, y)).abs() < 1e-6);
            prop_assert!(c >= 0.0);
        }

        #[test]
        fn mae_subgroup_recombination(a in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20),
                                      b in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..20)) {
            let all: Vec<_> = a.iter().chain(&b).copied().collect();
            let w = (a.len() as f64 * mae(&a).unwrap() + b.len() as f64 * mae(&b).unwrap()) / all.len() as f64;
            prop_assert!((w - mae(&all).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn mae_and_coverage_examples() {
        assert_eq!(mae(&[(0.2, 0.2), (0.5, 0.5)]).unwrap(), 0.0);
        assert!((mae(&[(0.01, 0.0), (0.0, 0.03)]).unwrap() - 0.02).abs() < 1e-15);
        assert!(matches!(mae(&[]), Err(Error::EmptyValidation)));
        let c = interval_coverage(&[((0.1, 0.3), 0.2), ((0.1, 0.3), 0.25)]).unwrap();
        assert_eq!(c.coverage, 1.0);
        assert!((c.half_width - 0.1).abs() < 1e-15);
        let p = Predictive::point(0.2);
        assert!(matches!(p.interval(80), Err(Error::MissingQuantile(_))));
    }

    #[test]
    fn persistence() {
        let s = AsafSeries::from_pairs("A", Sex::Male, [(1998, 0.3), (2000, 0.21)]);
        let f = persistence_forecast(&s, 2001..=2003).unwrap();
        assert_eq!(f, vec![(2001, 0.21), (2002, 0.21), (2003, 0.21)]);
        let one = AsafSeries::from_pairs("A", Sex::Male, [(1990, 0.4)]);
        assert_eq!(persistence_forecast(&one, [2001]).unwrap(), vec![(2001, 0.4)]);
        assert!(matches!(
            persistence_forecast(&AsafSeries::new("A", Sex::Male), [2001]),
            Err(Error::EmptyTraining(_))
        ));
    }

    fn series(c: &str, n_train: i32, n_test: i32) -> AsafSeries {
        AsafSeries::from_pairs(
            c,
            Sex::Male,
            (2000 - n_train + 1..=2000 + n_test).map(|y| (y, 0.3 - 0.001 * f64::from(y - 1950))),
        )
    }

    fn clear(c: &str) -> Classification {
        Classification {
            country: c.into(),
            sex: Sex::Male,
            n_obs: 0,
            max_obs: 0.3,
            r_squared: Some(0.9),
            clear_pattern: true,
            fit: None,
        }
    }

    #[test]
    fn eligibility() {
        let sc = Scenario::new(2000, 2015).unwrap();
        let data = vec![
            series("A", 11, 3),
            series("B", 10, 3),
            series("C", 20, 0),
            series("D", 30, 1),
        ];
        let cls = vec![clear("A"), clear("B"), clear("C")];
        assert_eq!(select_validation_countries(&data, &cls, &sc), vec!["A".to_string()]);
        assert!(Scenario::new(2015, 2015).is_err());
        assert_eq!(Scenario::defaults().len(), 3);
    }

    #[test]
    fn report_with_persistence_and_subgroups() {
        let sc = Scenario::new(2000, 2015).unwrap();
        let data = vec![series("A", 15, 5), series("B", 15, 5)];
        let countries = vec!["A".to_string(), "B".to_string()];
        let pers = persistence_set(&data, &countries, &sc).unwrap();
        let all_y = BTreeMap::from([("A".to_string(), true), ("B".to_string(), true)]);
        let rows = subgroup_report(&ReportInput {
            scenario: sc,
            observations: &data,
            countries: &countries,
            forecasts: std::slice::from_ref(&pers),
            tags: Some(&all_y),
            crps_pairs: CrpsPairs::Squared,
        })
        .unwrap();
        // Declining series: persistence is off by 0.001·k in year 2000 + k.
        let all = rows.iter().find(|r| r.subgroup == "all").unwrap();
        assert!((all.mae - 0.003).abs() < 1e-12);
        let oecd = rows.iter().find(|r| r.subgroup == "OECD").unwrap();
        assert_eq!(oecd.mae, all.mae);
        assert!(all.intervals.iter().all(Option::is_none) && all.crps.is_none());
        let mut buf = Vec::new();
        write_report(&mut buf, &rows, CrpsPairs::Squared).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",-,-,-,-,-,-,-,"));
        let partial = BTreeMap::from([("A".to_string(), true)]);
        let err = subgroup_report(&ReportInput {
            scenario: sc,
            observations: &data,
            countries: &countries,
            forecasts: &[pers],
            tags: Some(&partial),
            crps_pairs: CrpsPairs::Squared,
        });
        assert!(matches!(err, Err(Error::MissingTag(_))));
    }

    #[test]
    fn external_round_trip_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let mut entries = BTreeMap::new();
        for year in 2001..=2003 {
            let s: Vec<f64> = (0..200)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    0.2 + 0.01 * z
                })
                .collect();
            entries.insert(("A".to_string(), Sex::Male, year), Predictive::from_samples(s));
        }
        let set = ForecastSet {
            method: "bayes".into(),
            entries,
        };
        let draws = dir.path().join("draws");
        std::fs::create_dir_all(&draws).unwrap();
        let mut buf = Vec::new();
        export_forecasts(&mut buf, &set, Some((&draws, dir.path()))).unwrap();
        let back = import_external_forecasts(buf.as_slice(), dir.path()).unwrap();
        assert_eq!(back.len(), 1);
        let sc = Scenario::new(2000, 2003).unwrap();
        let obs = vec![AsafSeries::from_pairs("A", Sex::Male, (1990..=2003).map(|y| (y, 0.21)))];
        let countries = vec!["A".to_string()];
        let run = |f: &ForecastSet| {
            let r = subgroup_report(&ReportInput {
                scenario: sc,
                observations: &obs,
                countries: &countries,
                forecasts: std::slice::from_ref(f),
                tags: None,
                crps_pairs: CrpsPairs::Squared,
            })
            .unwrap();
            (r[0].mae, r[0].crps, r[0].intervals)
        };
        assert_eq!(run(&set), run(&back[0]));

        let missing = "method,country,sex,year,q025,q10,q50,q90\nx,A,male,2001,0,0,0,0\n";
        assert!(matches!(
            import_external_forecasts(missing.as_bytes(), dir.path()),
            Err(Error::Parse { .. })
        ));

        // Persistence written as a degenerate external file scores the same.
        let data = vec![AsafSeries::from_pairs(
            "A",
            Sex::Male,
            (1990..=2003).map(|y| (y, 0.3 - 0.01 * f64::from(y - 1990))),
        )];
        let pers = persistence_set(&data, &countries, &sc).unwrap();
        let mut buf = Vec::new();
        export_forecasts(&mut buf, &pers, None).unwrap();
        let ext = import_external_forecasts(buf.as_slice(), dir.path()).unwrap();
        let score = |f: &ForecastSet| {
            subgroup_report(&ReportInput {
                scenario: sc,
                observations: &data,
                countries: &countries,
                forecasts: std::slice::from_ref(f),
                tags: None,
                crps_pairs: CrpsPairs::Squared,
            })
            .unwrap()[0]
                .mae
        };
        assert_eq!(score(&pers), score(&ext[0]));
    }
}
