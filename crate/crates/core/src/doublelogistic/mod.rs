//! Five-parameter double-logistic curve: evaluation, least-squares fitting and
//! the clear-pattern screen.

mod nls;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::types::{AsafSeries, Sex};

pub use nls::{nls_fit, nls_fit_points, FitReport, NlsOptions};

/// Curve time origin.
pub const ORIGIN_YEAR: f64 = 1950.0;

/// Lower bound used for the strictly positive components.
pub const POSITIVE_FLOOR: f64 = 1e-6;
pub const A4_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DlcParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub k: f64,
}

/// `1 / (1 + exp(-z))` without overflow.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl DlcParams {
    pub const NAMES: [&'static str; 5] = ["a1", "a2", "a3", "a4", "k"];

    pub fn new(a1: f64, a2: f64, a3: f64, a4: f64, k: f64) -> Self {
        DlcParams { a1, a2, a3, a4, k }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.a1, self.a2, self.a3, self.a4, self.k]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        DlcParams::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn is_valid(&self) -> bool {
        self.a1 > 0.0
            && self.a3 > 0.0
            && self.k > 0.0
            && (0.0..=A4_MAX).contains(&self.a4)
            && self.a2.is_finite()
            && self.a1.is_finite()
            && self.a3.is_finite()
            && self.k.is_finite()
    }

    /// Box projection onto the parameter domain.
    pub fn project(self) -> Self {
        DlcParams {
            a1: self.a1.max(POSITIVE_FLOOR),
            a2: self.a2,
            a3: self.a3.max(POSITIVE_FLOOR),
            a4: self.a4.clamp(0.0, A4_MAX),
            k: self.k.max(POSITIVE_FLOOR),
        }
    }

    fn terms(&self, t: f64) -> (f64, f64, f64) {
        let x = t - ORIGIN_YEAR;
        let l1 = logistic(self.a1 * (x - self.a2));
        let l2 = logistic(self.a3 * (x - self.a2 - self.a4));
        (x, l1, l2)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (_, l1, l2) = self.terms(t);
        self.k * (l1 - l2)
    }

    /// Partial derivatives of the curve at `t` in (a1, a2, a3, a4, k) order.
    pub fn gradient(&self, t: f64) -> [f64; 5] {
        let (x, l1, l2) = self.terms(t);
        let d1 = l1 * (1.0 - l1);
        let d2 = l2 * (1.0 - l2);
        let k = self.k;
        [
            k * d1 * (x - self.a2),
            k * (-self.a1 * d1 + self.a3 * d2),
            -k * d2 * (x - self.a2 - self.a4),
            k * self.a3 * d2,
            l1 - l2,
        ]
    }
}

impl fmt::Display for DlcParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(a1={}, a2={}, a3={}, a4={}, k={})",
            self.a1, self.a2, self.a3, self.a4, self.k
        )
    }
}

pub fn dlc_eval(t: f64, theta: &DlcParams) -> f64 {
    theta.eval(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    ClearPattern,
    NonClearPattern,
}

impl Pattern {
    pub fn is_clear(self) -> bool {
        self == Pattern::ClearPattern
    }
}

pub fn classify(report: &FitReport, sex: Sex) -> Pattern {
    let (min_max, min_r2) = match sex {
        Sex::Male => (0.05, 0.5),
        Sex::Female => (0.01, 0.6),
    };
    if report.n_obs > 10 && report.max_obs > min_max && report.r_squared > min_r2 {
        Pattern::ClearPattern
    } else {
        Pattern::NonClearPattern
    }
}

/// One row of `classification.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub country: String,
    pub sex: Sex,
    pub n_obs: usize,
    pub max_obs: f64,
    /// Empty when the series was too short to fit.
    pub r_squared: Option<f64>,
    pub clear_pattern: bool,
    #[serde(skip)]
    pub fit: Option<FitReport>,
}

/// Fits and classifies every series; output order follows the input.
pub fn classify_all(series: &[AsafSeries]) -> Vec<Classification> {
    use rayon::prelude::*;
    series
        .par_iter()
        .map(|s| {
            let n_obs = s.len();
            let max_obs = if s.is_empty() { 0.0 } else { s.max_value() };
            match nls_fit(s) {
                Ok(fit) => Classification {
                    country: s.country.clone(),
                    sex: s.sex,
                    n_obs,
                    max_obs,
                    r_squared: Some(fit.r_squared),
                    clear_pattern: classify(&fit, s.sex).is_clear(),
                    fit: Some(fit),
                },
                Err(_) => Classification {
                    country: s.country.clone(),
                    sex: s.sex,
                    n_obs,
                    max_obs,
                    r_squared: None,
                    clear_pattern: false,
                    fit: None,
                },
            }
        })
        .collect()
}

pub fn write_classification<W: std::io::Write>(writer: W, rows: &[Classification]) -> crate::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["country", "sex", "n_obs", "max_obs", "r_squared", "clear_pattern"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| crate::Error::io("classification.csv", e))?;
    Ok(())
}

pub fn read_classification<R: std::io::Read>(reader: R) -> crate::Result<Vec<Classification>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<Vec<_>, _>>()?)
}
