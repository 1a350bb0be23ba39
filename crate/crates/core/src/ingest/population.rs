use std::collections::BTreeMap;

use super::{check_partition, AgeGroup, AgeSpan};
use crate::error::{Error, Result};
use crate::types::Sex;

/// Population counts for one country, sex and source age group.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSeries {
    pub country: String,
    pub sex: Sex,
    pub ages: AgeSpan,
    /// year -> persons
    pub values: BTreeMap<i32, f64>,
}

/// Linear interpolation to every year between the first and last source year.
pub fn interpolate_population(series: &PopulationSeries) -> Result<PopulationSeries> {
    if series.values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "population for {} {} ages {} has {} point(s)",
            series.country,
            series.sex,
            series.ages,
            series.values.len()
        )));
    }
    let points: Vec<(i32, f64)> = series.values.iter().map(|(&y, &v)| (y, v)).collect();
    let mut values = BTreeMap::new();
    for w in points.windows(2) {
        let ((y0, v0), (y1, v1)) = (w[0], w[1]);
        for y in y0..y1 {
            let frac = f64::from(y - y0) / f64::from(y1 - y0);
            values.insert(y, v0 + frac * (v1 - v0));
        }
    }
    let (last_year, last) = points[points.len() - 1];
    values.insert(last_year, last);
    Ok(PopulationSeries {
        values,
        ..series.clone()
    })
}

/// Annual population per canonical age group, keyed by (country, sex, year).
pub type PopulationTable = BTreeMap<(String, Sex, i32), BTreeMap<AgeGroup, f64>>;

/// Interpolates every source series and sums source age groups into the
/// canonical ones. A year is kept for a (country, sex) only when every source
/// group covers it.
pub fn canonical_population(series: &[PopulationSeries]) -> Result<PopulationTable> {
    let mut by_unit: BTreeMap<(String, Sex), Vec<PopulationSeries>> = BTreeMap::new();
    for s in series {
        by_unit
            .entry((s.country.clone(), s.sex))
            .or_default()
            .push(interpolate_population(s)?);
    }
    let mut out = PopulationTable::new();
    for ((country, sex), parts) in by_unit {
        check_partition(parts.iter().map(|p| &p.ages))?;
        let mut years: Vec<i32> = parts[0].values.keys().copied().collect();
        years.retain(|y| parts.iter().all(|p| p.values.contains_key(y)));
        for year in years {
            let mut groups = BTreeMap::new();
            for p in &parts {
                let group = AgeGroup::containing(p.ages).ok_or_else(|| {
                    Error::RejectedAgeFormat(format!("population group {} straddles a boundary", p.ages))
                })?;
                *groups.entry(group).or_insert(0.0) += p.values[&year];
            }
            out.insert((country.clone(), sex, year), groups);
        }
    }
    Ok(out)
}
