//! Posterior-predictive trajectories of true and observed ASAF, and their
//! quantile fans.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doublelogistic::DlcParams;
use crate::error::{Error, Result};
use crate::model::CountryParams;
use crate::sampler::{parse_latent_name, DrawStore};
use crate::types::Sex;

/// Probability levels of a fan, in percent.
pub const FAN_LEVELS: [f64; 5] = [2.5, 10.0, 50.0, 90.0, 97.5];
pub const MIN_TRAJECTORIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Series {
    True,
    Observed,
}

impl Series {
    pub fn as_str(self) -> &'static str {
        match self {
            Series::True => "true",
            Series::Observed => "observed",
        }
    }
}

/// Simulated paths for one country and sex. `h` and `y` are row-major,
/// one row of `years.len()` values per trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    pub country: String,
    pub sex: Sex,
    pub years: Vec<i32>,
    pub h: Vec<f64>,
    pub y: Vec<f64>,
}

impl Trajectories {
    pub fn n_paths(&self) -> usize {
        if self.years.is_empty() {
            0
        } else {
            self.h.len() / self.years.len()
        }
    }

    fn data(&self, series: Series) -> &[f64] {
        match series {
            Series::True => &self.h,
            Series::Observed => &self.y,
        }
    }

    /// All simulated values for `year`.
    pub fn at_year(&self, series: Series, year: i32) -> Option<Vec<f64>> {
        let k = self.years.iter().position(|&y| y == year)?;
        let w = self.years.len();
        Some(self.data(series).chunks(w).map(|r| r[k]).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub units: Vec<Trajectories>,
}

impl TrajectorySet {
    pub fn get(&self, country: &str, sex: Sex) -> Option<&Trajectories> {
        self.units.iter().find(|u| u.country == country && u.sex == sex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    pub start: i32,
    pub end: i32,
    pub seed: u64,
    /// Use at most this many posterior draws (a seeded subsample).
    pub max_trajectories: Option<usize>,
}

struct Unit {
    country: String,
    sex: Sex,
    last_year: i32,
    h_col: usize,
    params: [usize; 11],
}

fn units(store: &DrawStore) -> Result<Vec<Unit>> {
    let mut out = Vec::new();
    let mut seen: BTreeMap<(String, Sex), i32> = BTreeMap::new();
    for name in &store.names {
        if let Some((c, sex, year)) = parse_latent_name(name) {
            let e = seen.entry((c.to_string(), sex)).or_insert(year);
            *e = (*e).max(year);
        }
    }
    for ((country, sex), last_year) in seen {
        let h_col = store
            .index_of(&crate::sampler::latent_name(&country, sex, last_year))
            .expect("name came from the store");
        let mut params = [0; 11];
        for (slot, p) in params.iter_mut().zip(crate::model::COUNTRY_NAMES) {
            *slot = store
                .index_of(&crate::sampler::bhm::country_param_name(&country, p))
                .ok_or_else(|| Error::parse("draws", format!("{country}: missing {p}")))?;
        }
        out.push(Unit {
            country,
            sex,
            last_year,
            h_col,
            params,
        });
    }
    if out.is_empty() {
        return Err(Error::parse("draws", "no latent values recorded"));
    }
    Ok(out)
}

/// One forward simulation from `h_last` at `last_year` through `end`.
/// Negative `h` is set to zero before it is carried forward or observed;
/// negative `y` is set to zero.
pub fn simulate<R: Rng + ?Sized>(
    theta: &DlcParams,
    h_last: f64,
    last_year: i32,
    end: i32,
    sigma2_h: f64,
    sigma2_c: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let (sh, sc) = (sigma2_h.sqrt(), sigma2_c.sqrt());
    let mut h = h_last.max(0.0);
    let mut g_prev = theta.eval(f64::from(last_year));
    let n = (end - last_year).max(0) as usize;
    let (mut hs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for t in last_year + 1..=end {
        let g = theta.eval(f64::from(t));
        let e: f64 = rng.sample(StandardNormal);
        h = (h + g - g_prev + sh * e).max(0.0);
        let e: f64 = rng.sample(StandardNormal);
        hs.push(h);
        ys.push((h + sc * e).max(0.0));
        g_prev = g;
    }
    (hs, ys)
}

/// Projects every country and sex in `store` over `opts.start..=opts.end`.
pub fn project(store: &DrawStore, opts: &ProjectionOptions) -> Result<TrajectorySet> {
    if opts.end < opts.start {
        return Err(Error::InvalidHorizon(format!("{}-{} is empty", opts.start, opts.end)));
    }
    let units = units(store)?;
    if let Some(u) = units.iter().find(|u| opts.start <= u.last_year) {
        return Err(Error::InvalidHorizon(format!(
            "horizon starts {} but {} {} has latent values through {}",
            opts.start, u.country, u.sex, u.last_year
        )));
    }
    let s2h = store
        .index_of("sigma2_h")
        .ok_or_else(|| Error::parse("draws", "missing sigma2_h"))?;
    let rows: Vec<&[f64]> = store.chains.iter().flat_map(|c| c.chunks(store.n_params())).collect();
    let selected: Vec<usize> = match opts.max_trajectories {
        Some(cap) if cap < rows.len() => {
            let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
            rng.set_stream(u64::MAX);
            let mut idx = sample(&mut rng, rows.len(), cap).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..rows.len()).collect(),
    };
    let years: Vec<i32> = (opts.start..=opts.end).collect();
    let out = units
        .par_iter()
        .enumerate()
        .map(|(k, u)| {
            let mut rng = ChaCha20Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64);
            let skip = (opts.start - u.last_year - 1) as usize;
            let mut h = Vec::with_capacity(selected.len() * years.len());
            let mut y = Vec::with_capacity(selected.len() * years.len());
            for &d in &selected {
                let row = rows[d];
                let mut v = [0.0; 11];
                for (slot, &j) in v.iter_mut().zip(&u.params) {
                    *slot = row[j];
                }
                let cp = CountryParams::from_array(v);
                let (hs, ys) = simulate(
                    &cp.theta(u.sex),
                    row[u.h_col],
                    u.last_year,
                    opts.end,
                    row[s2h],
                    cp.sigma2,
                    &mut rng,
                );
                h.extend_from_slice(&hs[skip..]);
                y.extend_from_slice(&ys[skip..]);
            }
            Trajectories {
                country: u.country.clone(),
                sex: u.sex,
                years: years.clone(),
                h,
                y,
            }
        })
        .collect();
    Ok(TrajectorySet { units: out })
}

/// Hyndman-Fan type 8 (approximately median-unbiased) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let m = (p + 1.0) / 3.0;
    let h = n as f64 * p + m;
    if h <= 1.0 {
        return sorted[0];
    }
    if h >= n as f64 {
        return sorted[n - 1];
    }
    let j = h.floor() as usize;
    let g = h - j as f64;
    sorted[j - 1] + g * (sorted[j] - sorted[j - 1])
}

/// Type-8 quantiles at `levels` (probabilities in (0,1)).
pub fn quantiles(values: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = levels.iter().map(|&p| quantile_sorted(&s, p)).collect();
    // Interpolation can break ties by a rounding error; keep the fan monotone.
    for i in 1..out.len() {
        if out[i] < out[i - 1] {
            out[i] = out[i - 1];
        }
    }
    out
}

/// One row of `projections.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanRow {
    pub country: String,
    pub sex: Sex,
    pub series: Series,
    pub year: i32,
    pub q025: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub q975: f64,
}

impl FanRow {
    pub fn values(&self) -> [f64; 5] {
        [self.q025, self.q10, self.q50, self.q90, self.q975]
    }
}

pub fn quantile_fan(set: &TrajectorySet) -> Result<Vec<FanRow>> {
    let levels: Vec<f64> = FAN_LEVELS.iter().map(|l| l / 100.0).collect();
    let mut out = Vec::new();
    for u in &set.units {
        if u.n_paths() < MIN_TRAJECTORIES {
            return Err(Error::InsufficientDraws(format!(
                "{} {}: {} trajectories; fans need {MIN_TRAJECTORIES}",
                u.country,
                u.sex,
                u.n_paths()
            )));
        }
        for series in [Series::True, Series::Observed] {
            for &year in &u.years {
                let q = quantiles(&u.at_year(series, year).expect("year on axis"), &levels);
                out.push(FanRow {
                    country: u.country.clone(),
                    sex: u.sex,
                    series,
                    year,
                    q025: q[0],
                    q10: q[1],
                    q50: q[2],
                    q90: q[3],
                    q975: q[4],
                });
            }
        }
    }
    Ok(out)
}

pub fn write_fans<W: Write>(writer: W, rows: &[FanRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["country", "sex", "series", "year", "q025", "q10", "q50", "q90", "q975"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("projections.csv", e))?;
    Ok(())
}

/// Reads `projections.csv`, rejecting negative or non-monotone rows.
pub fn read_fans<R: Read>(reader: R) -> Result<Vec<FanRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<FanRow>() {
        let row = row?;
        let v = row.values();
        if v[0] < 0.0 || v.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::parse(
                "projections.csv",
                format!(
                    "{} {} {}: quantiles {v:?} not monotone and nonnegative",
                    row.country, row.sex, row.year
                ),
            ));
        }
        out.push(row);
    }
    Ok(out)
}
