use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub const BOTH: [Sex; 2] = [Sex::Male, Sex::Female];

    pub fn index(self) -> usize {
        match self {
            Sex::Male => 0,
            Sex::Female => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" | "1" => Ok(Sex::Male),
            "female" | "f" | "2" => Ok(Sex::Female),
            other => Err(Error::parse("sex", format!("unknown sex {other:?}"))),
        }
    }
}

/// Annual ASAF observations for one country and sex.
#[derive(Debug, Clone, PartialEq)]
pub struct AsafSeries {
    pub country: String,
    pub sex: Sex,
    pub values: std::collections::BTreeMap<i32, f64>,
}

impl AsafSeries {
    pub fn new(country: impl Into<String>, sex: Sex) -> Self {
        AsafSeries {
            country: country.into(),
            sex,
            values: Default::default(),
        }
    }

    pub fn from_pairs(country: impl Into<String>, sex: Sex, pairs: impl IntoIterator<Item = (i32, f64)>) -> Self {
        AsafSeries {
            values: pairs.into_iter().collect(),
            ..AsafSeries::new(country, sex)
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_year(&self) -> Option<i32> {
        self.values.keys().next().copied()
    }

    pub fn last_year(&self) -> Option<i32> {
        self.values.keys().next_back().copied()
    }

    pub fn max_value(&self) -> f64 {
        self.values.values().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Observations with year <= `last`.
    pub fn through(&self, last: i32) -> AsafSeries {
        AsafSeries {
            values: self.values.range(..=last).map(|(&y, &v)| (y, v)).collect(),
            ..self.clone()
        }
    }

    /// Observations with `first < year <= last`.
    pub fn after(&self, first: i32, last: i32) -> AsafSeries {
        AsafSeries {
            values: self.values.range(first + 1..=last).map(|(&y, &v)| (y, v)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AsafRow {
    country: String,
    sex: Sex,
    year: i32,
    asaf: f64,
}

/// Reads `asaf.csv` (country,sex,year,asaf), ordered by country then sex.
pub fn read_asaf(path: impl AsRef<std::path::Path>) -> crate::Result<Vec<AsafSeries>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_asaf_from(file)
}

pub fn read_asaf_from<R: std::io::Read>(reader: R) -> crate::Result<Vec<AsafSeries>> {
    let mut out: std::collections::BTreeMap<(String, Sex), AsafSeries> = Default::default();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for (i, rec) in rdr.deserialize::<AsafRow>().enumerate() {
        let row = rec?;
        if !row.asaf.is_finite() {
            return Err(Error::parse(format!("asaf line {}", i + 2), "non-finite value"));
        }
        let s = out
            .entry((row.country.clone(), row.sex))
            .or_insert_with(|| AsafSeries::new(row.country.clone(), row.sex));
        if s.values.insert(row.year, row.asaf).is_some() {
            return Err(Error::parse(
                format!("asaf line {}", i + 2),
                format!("duplicate year {} for {} {}", row.year, row.country, row.sex),
            ));
        }
    }
    Ok(out.into_values().collect())
}

pub fn write_asaf<W: std::io::Write>(writer: W, series: &[AsafSeries]) -> crate::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["country", "sex", "year", "asaf"])?;
    for s in series {
        for (&year, &v) in &s.values {
            w.serialize(AsafRow {
                country: s.country.clone(),
                sex: s.sex,
                year,
                asaf: v,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("asaf.csv", e))?;
    Ok(())
}
