use std::path::Path;

use serde::Deserialize;

use super::{CauseCategory, IcdVersion};
use crate::error::{Error, Result};

const SEED_MAP: &str = include_str!("../../data/icd_map.csv");

/// Outcome of looking up a cause code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapTarget {
    Category(CauseCategory),
    /// Aggregate or sub-item rows that would double count; ignored.
    Unmapped,
}

#[derive(Debug, Clone)]
struct MapRow {
    version: IcdVersion,
    sublist: String,
    low: String,
    high: String,
    target: MapTarget,
}

impl MapRow {
    fn matches(&self, code: &str) -> bool {
        let n = self.low.len();
        code.len() >= n && code.is_char_boundary(n) && (self.low.as_str()..=self.high.as_str()).contains(&&code[..n])
    }
}

/// ICD code -> cause category table.
///
/// Rows hold either a single code or an inclusive `LOW-HIGH` range of
/// equal-length codes. A row matches any code whose leading characters (as
/// many as the row's bound) fall in the range; among matching rows the one
/// with the longest bound wins. Codes no row matches fall into
/// [`CauseCategory::OtherMedical`].
#[derive(Debug, Clone)]
pub struct IcdMap {
    rows: Vec<MapRow>,
}

#[derive(Deserialize)]
struct RawRow {
    icd_version: String,
    sublist: String,
    code: String,
    category: String,
}

impl IcdMap {
    /// The bundled map.
    pub fn seed() -> Self {
        Self::from_reader(SEED_MAP.as_bytes()).expect("bundled ICD map is valid")
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows = Vec::new();
        for (line, rec) in rdr.deserialize::<RawRow>().enumerate() {
            let raw = rec?;
            let ctx = || format!("icd map row {}", line + 2);
            let version: IcdVersion = raw.icd_version.parse()?;
            version.check_sublist(&raw.sublist)?;
            let (low, high) = match raw.code.split_once('-') {
                Some((l, h)) => (l.trim().to_string(), h.trim().to_string()),
                None => (raw.code.clone(), raw.code.clone()),
            };
            if low.is_empty() || low.len() != high.len() || low > high {
                return Err(Error::parse(ctx(), format!("bad code range {:?}", raw.code)));
            }
            let target = if raw.category.trim().eq_ignore_ascii_case("unmapped") {
                MapTarget::Unmapped
            } else {
                MapTarget::Category(raw.category.parse()?)
            };
            rows.push(MapRow {
                version,
                sublist: raw.sublist,
                low,
                high,
                target,
            });
        }
        Ok(IcdMap { rows })
    }

    pub fn map_code(&self, version: IcdVersion, sublist: &str, code: &str) -> Result<MapTarget> {
        version.check_sublist(sublist)?;
        let code = code.trim();
        let candidates = self
            .rows
            .iter()
            .filter(|r| r.version == version && r.sublist == sublist && r.matches(code));
        let mut best: Option<&MapRow> = None;
        let mut ties = 0;
        for row in candidates {
            match best {
                Some(b) if b.low.len() > row.low.len() => {}
                Some(b) if b.low.len() == row.low.len() => ties += 1,
                _ => {
                    best = Some(row);
                    ties = 1;
                }
            }
        }
        if ties > 1 {
            return Err(Error::AmbiguousCode {
                code: code.to_string(),
                count: ties,
            });
        }
        Ok(best.map_or(MapTarget::Category(CauseCategory::OtherMedical), |r| r.target))
    }
}

/// Looks up `code` in the bundled map.
pub fn map_icd_code(version: IcdVersion, sublist: &str, code: &str) -> Result<MapTarget> {
    IcdMap::seed().map_code(version, sublist, code)
}

#[cfg(test)]
mod tests {
    use super::*;
    use CauseCategory::*;

    fn cat(version: IcdVersion, sublist: &str, code: &str) -> MapTarget {
        map_icd_code(version, sublist, code).unwrap()
    }

    #[test]
    fn table_examples() {
        assert_eq!(cat(IcdVersion::Icd10, "103", "C34"), MapTarget::Category(LungCancer));
        assert_eq!(cat(IcdVersion::Icd7, "A", "A050"), MapTarget::Category(LungCancer));
        assert_eq!(
            cat(IcdVersion::Icd9, "09A", "B090"),
            MapTarget::Category(UpperAerodigestive)
        );
    }

    #[test]
    fn rest_rows_and_fallback() {
        let m = IcdMap::seed();
        let v10 = IcdVersion::Icd10;
        assert_eq!(m.map_code(v10, "104", "C341").unwrap(), MapTarget::Category(LungCancer));
        assert_eq!(m.map_code(v10, "10M", "C50").unwrap(), MapTarget::Category(OtherCancer));
        assert_eq!(m.map_code(v10, "103", "J44").unwrap(), MapTarget::Category(Copd));
        assert_eq!(
            m.map_code(v10, "103", "J18").unwrap(),
            MapTarget::Category(OtherRespiratory)
        );
        assert_eq!(
            m.map_code(v10, "103", "K703").unwrap(),
            MapTarget::Category(LiverCirrhosis)
        );
        assert_eq!(
            m.map_code(v10, "103", "E11").unwrap(),
            MapTarget::Category(OtherMedical)
        );
        assert_eq!(m.map_code(v10, "103", "AAA").unwrap(), MapTarget::Category(AllCauses));
        assert_eq!(m.map_code(v10, "101", "1072").unwrap(), MapTarget::Unmapped);
        assert_eq!(
            m.map_code(v10, "101", "1074").unwrap(),
            MapTarget::Category(OtherRespiratory)
        );
        assert_eq!(
            m.map_code(IcdVersion::Icd8, "A", "A048").unwrap(),
            MapTarget::Category(OtherCancer)
        );
        assert_eq!(m.map_code(IcdVersion::Icd9, "09B", "B09").unwrap(), MapTarget::Unmapped);
        assert_eq!(
            m.map_code(IcdVersion::Icd9, "09B", "B093").unwrap(),
            MapTarget::Category(OtherCancer)
        );
    }

    #[test]
    fn rejected_sublist() {
        assert!(matches!(
            map_icd_code(IcdVersion::Icd7, "09A", "A050"),
            Err(Error::RejectedSublist { .. })
        ));
        assert!(matches!(
            map_icd_code(IcdVersion::Icd10, "102", "C34"),
            Err(Error::RejectedSublist { .. })
        ));
    }

    #[test]
    fn overlapping_rows_are_ambiguous() {
        let csv = "icd_version,sublist,code,category\nICD10,103,C3,lung_cancer\nICD10,103,C34,copd\nICD10,103,C33,copd\nICD10,103,C32-C33,other_cancer\n";
        let m = IcdMap::from_reader(csv.as_bytes()).unwrap();
        assert_eq!(
            m.map_code(IcdVersion::Icd10, "103", "C34").unwrap(),
            MapTarget::Category(Copd)
        );
        assert!(matches!(
            m.map_code(IcdVersion::Icd10, "103", "C33"),
            Err(Error::AmbiguousCode { .. })
        ));
    }

    /// Every code in a generated universe resolves to exactly one outcome
    /// under the bundled map, for every accepted sublist.
    #[test]
    fn seed_map_is_unambiguous() {
        let m = IcdMap::seed();
        let mut universe = Vec::new();
        for letter in ['A', 'B', 'C', 'I', 'J', 'K', 'S', 'V', 'X', 'Y'] {
            for n in 0..1000 {
                universe.push(format!("{letter}{n:03}"));
            }
            for n in 0..100 {
                universe.push(format!("{letter}{n:02}"));
            }
        }
        for n in 1000..1110 {
            universe.push(n.to_string());
        }
        for ch in 1..18 {
            universe.push(format!("CH{ch:02}"));
        }
        universe.push("AAA".into());
        let lists = [
            (IcdVersion::Icd7, "A"),
            (IcdVersion::Icd8, "A"),
            (IcdVersion::Icd9, "09A"),
            (IcdVersion::Icd9, "09B"),
            (IcdVersion::Icd9, "09N"),
            (IcdVersion::Icd10, "101"),
            (IcdVersion::Icd10, "103"),
            (IcdVersion::Icd10, "104"),
            (IcdVersion::Icd10, "10M"),
        ];
        for (v, s) in lists {
            for code in &universe {
                m.map_code(v, s, code).unwrap_or_else(|e| panic!("{v} {s} {code}: {e}"));
            }
        }
    }
}
