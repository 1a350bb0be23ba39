//! Cause-of-death and population ingestion.
//!
//! Death counts arrive as a normalized CSV (one row per country, year, sex,
//! cause code and source age group). Codes are mapped onto the nine cause
//! categories through a versioned ICD map, source age groups are summed into
//! the seven canonical groups, and mortality rates are formed against
//! annually interpolated population counts.

mod icd;
mod io;
mod population;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Sex;

pub use icd::{map_icd_code, IcdMap, MapTarget};
pub use io::{read_deaths, read_deaths_from, read_population, read_population_from};
pub use population::{canonical_population, interpolate_population, PopulationSeries, PopulationTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IcdVersion {
    Icd7,
    Icd8,
    Icd9,
    Icd10,
}

impl IcdVersion {
    pub fn accepts_sublist(self, sublist: &str) -> bool {
        let allowed: &[&str] = match self {
            IcdVersion::Icd7 | IcdVersion::Icd8 => &["A"],
            IcdVersion::Icd9 => &["09A", "09B", "09N"],
            IcdVersion::Icd10 => &["101", "103", "104", "10M"],
        };
        allowed.contains(&sublist)
    }

    pub fn check_sublist(self, sublist: &str) -> Result<()> {
        if self.accepts_sublist(sublist) {
            Ok(())
        } else {
            Err(Error::RejectedSublist {
                version: self.to_string(),
                sublist: sublist.to_string(),
            })
        }
    }
}

impl fmt::Display for IcdVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IcdVersion::Icd7 => "ICD7",
            IcdVersion::Icd8 => "ICD8",
            IcdVersion::Icd9 => "ICD9",
            IcdVersion::Icd10 => "ICD10",
        };
        f.write_str(s)
    }
}

impl FromStr for IcdVersion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        let digits = t.strip_prefix("ICD").unwrap_or(&t).trim_start_matches('-');
        match digits {
            "7" => Ok(IcdVersion::Icd7),
            "8" => Ok(IcdVersion::Icd8),
            "9" => Ok(IcdVersion::Icd9),
            "10" => Ok(IcdVersion::Icd10),
            _ => Err(Error::parse("icd_version", format!("unknown ICD version {s:?}"))),
        }
    }
}

/// The nine cause-of-death categories used by the attribution method, plus
/// the all-cause total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CauseCategory {
    LungCancer,
    UpperAerodigestive,
    OtherCancer,
    Copd,
    OtherRespiratory,
    Vascular,
    LiverCirrhosis,
    OtherNonMedical,
    OtherMedical,
    AllCauses,
}

impl CauseCategory {
    /// The nine attribution categories in k = 1..9 order.
    pub const NINE: [CauseCategory; 9] = [
        CauseCategory::LungCancer,
        CauseCategory::UpperAerodigestive,
        CauseCategory::OtherCancer,
        CauseCategory::Copd,
        CauseCategory::OtherRespiratory,
        CauseCategory::Vascular,
        CauseCategory::LiverCirrhosis,
        CauseCategory::OtherNonMedical,
        CauseCategory::OtherMedical,
    ];

    /// 1-based category number; the all-cause total is 0.
    pub fn number(self) -> usize {
        match self {
            CauseCategory::AllCauses => 0,
            c => CauseCategory::NINE.iter().position(|&x| x == c).unwrap() + 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CauseCategory::LungCancer => "lung_cancer",
            CauseCategory::UpperAerodigestive => "upper_aerodigestive",
            CauseCategory::OtherCancer => "other_cancer",
            CauseCategory::Copd => "copd",
            CauseCategory::OtherRespiratory => "other_respiratory",
            CauseCategory::Vascular => "vascular",
            CauseCategory::LiverCirrhosis => "liver_cirrhosis",
            CauseCategory::OtherNonMedical => "other_nonmedical",
            CauseCategory::OtherMedical => "other_medical",
            CauseCategory::AllCauses => "all_causes",
        }
    }
}

impl fmt::Display for CauseCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CauseCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if let Ok(k) = t.parse::<usize>() {
            return match k {
                0 => Ok(CauseCategory::AllCauses),
                1..=9 => Ok(CauseCategory::NINE[k - 1]),
                _ => Err(Error::parse("category", format!("category number {k} out of range"))),
            };
        }
        [CauseCategory::AllCauses]
            .into_iter()
            .chain(CauseCategory::NINE)
            .find(|c| c.as_str() == t)
            .ok_or_else(|| Error::parse("category", format!("unknown category {s:?}")))
    }
}

/// Canonical age groups used for attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroup {
    Age0To34,
    Age35To59,
    Age60To64,
    Age65To69,
    Age70To74,
    Age75To79,
    Age80Plus,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 7] = [
        AgeGroup::Age0To34,
        AgeGroup::Age35To59,
        AgeGroup::Age60To64,
        AgeGroup::Age65To69,
        AgeGroup::Age70To74,
        AgeGroup::Age75To79,
        AgeGroup::Age80Plus,
    ];

    pub fn span(self) -> AgeSpan {
        let (low, high) = match self {
            AgeGroup::Age0To34 => (0, Some(34)),
            AgeGroup::Age35To59 => (35, Some(59)),
            AgeGroup::Age60To64 => (60, Some(64)),
            AgeGroup::Age65To69 => (65, Some(69)),
            AgeGroup::Age70To74 => (70, Some(74)),
            AgeGroup::Age75To79 => (75, Some(79)),
            AgeGroup::Age80Plus => (80, None),
        };
        AgeSpan { low, high }
    }

    /// The canonical group that wholly contains `span`, if any.
    pub fn containing(span: AgeSpan) -> Option<AgeGroup> {
        AgeGroup::ALL.into_iter().find(|g| g.span().contains(span))
    }

    pub fn from_bounds(low: u32, high: Option<u32>) -> Option<AgeGroup> {
        AgeGroup::ALL.into_iter().find(|g| g.span() == AgeSpan { low, high })
    }

    pub fn label(self) -> String {
        self.span().to_string()
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.span().fmt(f)
    }
}

/// A closed age interval in whole years; `high == None` is open-ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgeSpan {
    pub low: u32,
    pub high: Option<u32>,
}

impl AgeSpan {
    pub fn new(low: u32, high: Option<u32>) -> Result<Self> {
        if let Some(h) = high {
            if h < low {
                return Err(Error::parse("age", format!("age_high {h} below age_low {low}")));
            }
        }
        Ok(AgeSpan { low, high })
    }

    pub fn contains(self, other: AgeSpan) -> bool {
        if other.low < self.low {
            return false;
        }
        match (self.high, other.high) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(a), Some(b)) => b <= a,
        }
    }
}

impl fmt::Display for AgeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.high {
            Some(h) => write!(f, "{}-{}", self.low, h),
            None => write!(f, "{}+", self.low),
        }
    }
}

/// Checks that `spans` tile `[0, inf)` with no gaps or overlaps and that every
/// canonical group boundary coincides with a span boundary.
pub fn check_partition<'a>(spans: impl IntoIterator<Item = &'a AgeSpan>) -> Result<()> {
    let spans: BTreeSet<AgeSpan> = spans.into_iter().copied().collect();
    let mut next = 0u32;
    let mut open_ended = false;
    let mut starts = BTreeSet::new();
    for span in &spans {
        if open_ended {
            return Err(Error::RejectedAgeFormat(format!(
                "age group {span} follows an open-ended group"
            )));
        }
        if span.low != next {
            return Err(Error::RejectedAgeFormat(if span.low > next {
                format!("ages {next}-{} missing", span.low - 1)
            } else {
                format!("age group {span} overlaps its predecessor")
            }));
        }
        starts.insert(span.low);
        match span.high {
            Some(h) => next = h + 1,
            None => open_ended = true,
        }
    }
    if !open_ended {
        return Err(Error::RejectedAgeFormat(format!(
            "no open-ended group after age {next}"
        )));
    }
    for group in &AgeGroup::ALL[1..] {
        let low = group.span().low;
        if !starts.contains(&low) {
            return Err(Error::RejectedAgeFormat(format!(
                "no source group starts at age {low} (needed for {group})"
            )));
        }
    }
    Ok(())
}

/// Raw death counts for one country, year and sex under one ICD coding.
#[derive(Debug, Clone, PartialEq)]
pub struct DeathTable {
    pub country: String,
    pub year: i32,
    pub sex: Sex,
    pub icd_version: IcdVersion,
    pub sublist: String,
    pub age_format: String,
    /// (cause code, source age group) -> deaths
    pub counts: BTreeMap<(String, AgeSpan), f64>,
}

pub const ACCEPTED_AGE_FORMATS: [&str; 5] = ["00", "01", "02", "03", "04"];

/// Death counts summed per cause category and canonical age group.
pub type CanonicalDeaths = BTreeMap<(CauseCategory, AgeGroup), f64>;

impl DeathTable {
    pub fn validate(&self) -> Result<()> {
        self.icd_version.check_sublist(&self.sublist)?;
        if !ACCEPTED_AGE_FORMATS.contains(&self.age_format.as_str()) {
            return Err(Error::RejectedAgeFormat(format!(
                "age format {:?} not accepted",
                self.age_format
            )));
        }
        if let Some(((code, span), v)) = self.counts.iter().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::parse(
                "deaths",
                format!("negative or non-finite count {v} for {code} ages {span}"),
            ));
        }
        Ok(())
    }

    /// Sums source age groups into the canonical groups, per cause category.
    ///
    /// Every category that has at least one code in the table gets an entry
    /// for each canonical age group (zero-filled). Codes the map marks as
    /// aggregates are skipped.
    pub fn canonicalize_ages(&self, map: &IcdMap) -> Result<CanonicalDeaths> {
        self.validate()?;
        check_partition(self.counts.keys().map(|(_, span)| span))?;
        let mut out = CanonicalDeaths::new();
        let mut codes: BTreeMap<&str, MapTarget> = BTreeMap::new();
        for ((code, span), &count) in &self.counts {
            let target = match codes.get(code.as_str()) {
                Some(t) => *t,
                None => {
                    let t = map.map_code(self.icd_version, &self.sublist, code)?;
                    codes.insert(code, t);
                    t
                }
            };
            let MapTarget::Category(category) = target else {
                continue;
            };
            // The partition check guarantees each source span nests in one group.
            let group = AgeGroup::containing(*span).ok_or_else(|| {
                Error::RejectedAgeFormat(format!("source group {span} straddles a canonical boundary"))
            })?;
            for g in AgeGroup::ALL {
                out.entry((category, g)).or_insert(0.0);
            }
            *out.get_mut(&(category, group)).unwrap() += count;
        }
        Ok(out)
    }
}

/// Death rates per person-year: count / population for each category and age group.
pub fn mortality_rates(deaths: &CanonicalDeaths, population: &BTreeMap<AgeGroup, f64>) -> Result<CanonicalDeaths> {
    deaths
        .iter()
        .map(|(&(category, group), &count)| match population.get(&group) {
            Some(&pop) if pop > 0.0 && pop.is_finite() => Ok(((category, group), count / pop)),
            Some(&pop) => Err(Error::MissingDenominator(format!(
                "population {pop} for age group {group}"
            ))),
            None => Err(Error::MissingDenominator(format!(
                "no population for age group {group}"
            ))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(low: u32, high: Option<u32>) -> AgeSpan {
        AgeSpan { low, high }
    }

    fn five_year_spans() -> Vec<AgeSpan> {
        let mut v = vec![span(0, Some(34))];
        for low in (35..85).step_by(5) {
            v.push(span(low, Some(low + 4)));
        }
        v.push(span(85, None));
        v
    }

    fn table(counts: &[(&str, AgeSpan, f64)]) -> DeathTable {
        DeathTable {
            country: "XX".into(),
            year: 2000,
            sex: Sex::Male,
            icd_version: IcdVersion::Icd10,
            sublist: "103".into(),
            age_format: "01".into(),
            counts: counts.iter().map(|(c, s, n)| ((c.to_string(), *s), *n)).collect(),
        }
    }

    fn full_table(code: &str, per_group: f64) -> Vec<(String, AgeSpan, f64)> {
        five_year_spans()
            .into_iter()
            .map(|s| (code.to_string(), s, per_group))
            .collect()
    }

    #[test]
    fn five_year_groups_sum_into_35_59() {
        let rows = full_table("C34", 10.0);
        let rows: Vec<_> = rows.iter().map(|(c, s, n)| (c.as_str(), *s, *n)).collect();
        let out = table(&rows).canonicalize_ages(&IcdMap::seed()).unwrap();
        assert_eq!(out[&(CauseCategory::LungCancer, AgeGroup::Age35To59)], 50.0);
        assert_eq!(out[&(CauseCategory::LungCancer, AgeGroup::Age60To64)], 10.0);
        // 80-84 and 85+
        assert_eq!(out[&(CauseCategory::LungCancer, AgeGroup::Age80Plus)], 20.0);
    }

    #[test]
    fn missing_bucket_is_rejected() {
        let rows: Vec<_> = full_table("C34", 1.0)
            .into_iter()
            .filter(|(_, s, _)| s.low != 40)
            .collect();
        let rows: Vec<_> = rows.iter().map(|(c, s, n)| (c.as_str(), *s, *n)).collect();
        let err = table(&rows).canonicalize_ages(&IcdMap::seed()).unwrap_err();
        assert!(matches!(err, Error::RejectedAgeFormat(_)), "{err}");
    }

    #[test]
    fn coarse_old_age_group_is_rejected() {
        let mut rows: Vec<_> = full_table("C34", 1.0)
            .into_iter()
            .filter(|(_, s, _)| s.low < 75)
            .collect();
        rows.push(("C34".into(), span(75, None), 4.0));
        let rows: Vec<_> = rows.iter().map(|(c, s, n)| (c.as_str(), *s, *n)).collect();
        assert!(matches!(
            table(&rows).canonicalize_ages(&IcdMap::seed()),
            Err(Error::RejectedAgeFormat(_))
        ));
    }

    #[test]
    fn bad_age_format_and_sublist() {
        let rows = [("C34", span(0, None), 1.0)];
        let mut t = table(&rows);
        t.age_format = "07".into();
        assert!(matches!(t.validate(), Err(Error::RejectedAgeFormat(_))));
        let mut t = table(&rows);
        t.sublist = "09A".into();
        assert!(matches!(t.validate(), Err(Error::RejectedSublist { .. })));
    }

    #[test]
    fn rates_divide_by_population() {
        let deaths: CanonicalDeaths = [
            ((CauseCategory::LungCancer, AgeGroup::Age60To64), 50.0),
            ((CauseCategory::Copd, AgeGroup::Age60To64), 20.0),
            ((CauseCategory::Vascular, AgeGroup::Age60To64), 0.0),
        ]
        .into();
        let pop = [(AgeGroup::Age60To64, 200_000.0)].into();
        let r = mortality_rates(&deaths, &pop).unwrap();
        assert!((r[&(CauseCategory::LungCancer, AgeGroup::Age60To64)] - 2.5e-4).abs() < 1e-18);
        assert!((r[&(CauseCategory::Copd, AgeGroup::Age60To64)] - 1.0e-4).abs() < 1e-18);
        assert_eq!(r[&(CauseCategory::Vascular, AgeGroup::Age60To64)], 0.0);

        let one: CanonicalDeaths = [((CauseCategory::LungCancer, AgeGroup::Age35To59), 30.0)].into();
        let r = mortality_rates(&one, &[(AgeGroup::Age35To59, 100_000.0)].into()).unwrap();
        assert!((r[&(CauseCategory::LungCancer, AgeGroup::Age35To59)] - 3.0e-4).abs() < 1e-18);
    }

    #[test]
    fn zero_or_missing_population_fails() {
        let deaths: CanonicalDeaths = [((CauseCategory::LungCancer, AgeGroup::Age60To64), 5.0)].into();
        assert!(matches!(
            mortality_rates(&deaths, &[(AgeGroup::Age60To64, 0.0)].into()),
            Err(Error::MissingDenominator(_))
        ));
        assert!(matches!(
            mortality_rates(&deaths, &BTreeMap::new()),
            Err(Error::MissingDenominator(_))
        ));
    }

    #[test]
    fn parse_enums() {
        assert_eq!("icd10".parse::<IcdVersion>().unwrap(), IcdVersion::Icd10);
        assert_eq!("7".parse::<IcdVersion>().unwrap(), IcdVersion::Icd7);
        assert_eq!("copd".parse::<CauseCategory>().unwrap(), CauseCategory::Copd);
        assert_eq!("9".parse::<CauseCategory>().unwrap(), CauseCategory::OtherMedical);
        assert_eq!(CauseCategory::LiverCirrhosis.number(), 7);
        assert_eq!(AgeGroup::from_bounds(80, None), Some(AgeGroup::Age80Plus));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn canonical_total_equals_source_total(
                counts in proptest::collection::vec(0u32..500, 12),
                cause in 0usize..4,
            ) {
                let code = ["C34", "I21", "J44", "R99"][cause];
                let rows: Vec<_> = five_year_spans()
                    .into_iter()
                    .zip(counts.iter())
                    .map(|(s, &n)| (code, s, n as f64))
                    .collect();
                let out = table(&rows).canonicalize_ages(&IcdMap::seed()).unwrap();
                let total: f64 = out.values().sum();
                let source: f64 = counts.iter().map(|&n| n as f64).sum();
                prop_assert_eq!(total, source);
            }
        }
    }
}
