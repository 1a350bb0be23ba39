use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{AgeSpan, DeathTable, IcdVersion, PopulationSeries};
use crate::error::{Error, Result};
use crate::types::Sex;

#[derive(Deserialize)]
struct DeathRow {
    country: String,
    year: i32,
    sex: String,
    icd_version: String,
    sublist: String,
    age_format: String,
    cause_code: String,
    age_low: Option<u32>,
    age_high: Option<u32>,
    count: f64,
}

#[derive(Deserialize)]
struct PopulationRow {
    country: String,
    year: i32,
    sex: String,
    age_low: Option<u32>,
    age_high: Option<u32>,
    count: f64,
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader<R: std::io::Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

/// Reads `deaths.csv`, one [`DeathTable`] per (country, year, sex).
///
/// Rows with an empty `age_low` (unknown age) are skipped; an empty
/// `age_high` marks the open-ended group.
pub fn read_deaths(path: impl AsRef<Path>) -> Result<Vec<DeathTable>> {
    let path = path.as_ref();
    read_deaths_from(open(path)?, &path.display().to_string())
}

pub fn read_deaths_from<R: std::io::Read>(reader: R, name: &str) -> Result<Vec<DeathTable>> {
    let mut tables: BTreeMap<(String, i32, Sex), DeathTable> = BTreeMap::new();
    for (i, rec) in csv_reader(reader).deserialize::<DeathRow>().enumerate() {
        let row = rec?;
        let ctx = || format!("{name} line {}", i + 2);
        let Some(low) = row.age_low else { continue };
        let span = AgeSpan::new(low, row.age_high).map_err(|e| Error::parse(ctx(), e))?;
        let sex: Sex = row.sex.parse().map_err(|e| Error::parse(ctx(), e))?;
        let version: IcdVersion = row.icd_version.parse()?;
        let key = (row.country.clone(), row.year, sex);
        let table = tables.entry(key).or_insert_with(|| DeathTable {
            country: row.country.clone(),
            year: row.year,
            sex,
            icd_version: version,
            sublist: row.sublist.clone(),
            age_format: row.age_format.clone(),
            counts: BTreeMap::new(),
        });
        if table.icd_version != version || table.sublist != row.sublist || table.age_format != row.age_format {
            return Err(Error::parse(
                ctx(),
                format!(
                    "{} {} {sex} mixes ICD version/sublist/age format",
                    row.country, row.year
                ),
            ));
        }
        if table.counts.insert((row.cause_code.clone(), span), row.count).is_some() {
            return Err(Error::parse(
                ctx(),
                format!("duplicate row for code {} ages {span}", row.cause_code),
            ));
        }
    }
    Ok(tables.into_values().collect())
}

/// Reads `population.csv`, one [`PopulationSeries`] per (country, sex, source age group).
pub fn read_population(path: impl AsRef<Path>) -> Result<Vec<PopulationSeries>> {
    let path = path.as_ref();
    read_population_from(open(path)?, &path.display().to_string())
}

pub fn read_population_from<R: std::io::Read>(reader: R, name: &str) -> Result<Vec<PopulationSeries>> {
    let mut series: BTreeMap<(String, Sex, AgeSpan), BTreeMap<i32, f64>> = BTreeMap::new();
    for (i, rec) in csv_reader(reader).deserialize::<PopulationRow>().enumerate() {
        let row = rec?;
        let ctx = || format!("{name} line {}", i + 2);
        let Some(low) = row.age_low else { continue };
        let span = AgeSpan::new(low, row.age_high).map_err(|e| Error::parse(ctx(), e))?;
        let sex: Sex = row.sex.parse().map_err(|e| Error::parse(ctx(), e))?;
        if !(row.count > 0.0 && row.count.is_finite()) {
            return Err(Error::parse(
                ctx(),
                format!("population count {} not positive", row.count),
            ));
        }
        let values = series.entry((row.country, sex, span)).or_default();
        if values.insert(row.year, row.count).is_some() {
            return Err(Error::parse(
                ctx(),
                format!("duplicate population row for {}", row.year),
            ));
        }
    }
    Ok(series
        .into_iter()
        .map(|((country, sex, ages), values)| PopulationSeries {
            country,
            sex,
            ages,
            values,
        })
        .collect())
}
