use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{AgeGroup, CauseCategory};
use crate::types::Sex;

/// Smoker and nonsmoker lung-cancer rates plus relative risks by cause, age and sex.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceRates {
    pub d_s: BTreeMap<(AgeGroup, Sex), f64>,
    pub d_ns: BTreeMap<(AgeGroup, Sex), f64>,
    pub rr: BTreeMap<(CauseCategory, AgeGroup, Sex), f64>,
}

#[derive(Deserialize)]
struct Row {
    kind: String,
    #[serde(default)]
    category: String,
    age_low: u32,
    age_high: Option<u32>,
    sex: String,
    value: f64,
}

impl ReferenceRates {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Reads `kind{dS,dNS,rr},category,age_low,age_high,sex,value` rows.
    /// Age bounds must name a canonical age group.
    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut out = ReferenceRates::default();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let row = rec?;
            let ctx = || format!("reference rates line {}", i + 2);
            let age = AgeGroup::from_bounds(row.age_low, row.age_high).ok_or_else(|| {
                Error::parse(
                    ctx(),
                    format!("{}-{:?} is not a canonical age group", row.age_low, row.age_high),
                )
            })?;
            let sex: Sex = row.sex.parse()?;
            let dup = match row.kind.as_str() {
                "dS" => out.d_s.insert((age, sex), row.value).is_some(),
                "dNS" => out.d_ns.insert((age, sex), row.value).is_some(),
                "rr" => {
                    let k: CauseCategory = row.category.parse()?;
                    out.rr.insert((k, age, sex), row.value).is_some()
                }
                other => return Err(Error::parse(ctx(), format!("unknown kind {other:?}"))),
            };
            if dup {
                return Err(Error::parse(ctx(), "duplicate entry"));
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        for (key, &s) in &self.d_s {
            let ns = self.d_ns.get(key).copied();
            match ns {
                Some(ns) if s > ns && ns >= 0.0 && s.is_finite() => {}
                _ => {
                    return Err(Error::InvalidReference(format!(
                        "dS {s} vs dNS {ns:?} at {} {}",
                        key.0, key.1
                    )))
                }
            }
        }
        if let Some(((k, a, s), r)) = self.rr.iter().find(|(_, r)| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::InvalidReference(format!("relative risk {r} for {k} {a} {s}")));
        }
        Ok(())
    }

    pub fn lung_rates(&self, age: AgeGroup, sex: Sex) -> Result<(f64, f64)> {
        match (self.d_s.get(&(age, sex)), self.d_ns.get(&(age, sex))) {
            (Some(&s), Some(&ns)) => Ok((s, ns)),
            _ => Err(Error::InvalidReference(format!(
                "no lung-cancer reference rates for {sex} {age}"
            ))),
        }
    }

    /// Relative risk for a cause. Causes whose excess risk is fixed at zero
    /// default to 1 when absent.
    pub fn relative_risk(&self, k: CauseCategory, age: AgeGroup, sex: Sex) -> Result<f64> {
        match self.rr.get(&(k, age, sex)) {
            Some(&r) => Ok(r),
            None if matches!(k, CauseCategory::LiverCirrhosis | CauseCategory::OtherNonMedical) => Ok(1.0),
            None => Err(Error::InvalidReference(format!("no relative risk for {k} {sex} {age}"))),
        }
    }
}
