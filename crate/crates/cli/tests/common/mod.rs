#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Output;

use asaf_core::model::HyperParams;
use asaf_core::synthetic::{generate, SyntheticConfig};
use asaf_core::types::write_asaf;

pub const COUNTRIES: [&str; 2] = ["AA", "BB"];
pub const YEARS: [i32; 3] = [2000, 2001, 2002];
pub const SEXES: [&str; 2] = ["male", "female"];

/// Source age spans; 35-49 and 50-59 sum into 35-59, 80-84 and 85+ into 80+.
pub const SPANS: [(u32, Option<u32>); 9] = [
    (0, Some(34)),
    (35, Some(49)),
    (50, Some(59)),
    (60, Some(64)),
    (65, Some(69)),
    (70, Some(74)),
    (75, Some(79)),
    (80, Some(84)),
    (85, None),
];

/// Canonical group index of each source span.
const GROUP_OF_SPAN: [usize; 9] = [0, 1, 1, 2, 3, 4, 5, 6, 6];

/// (code, category number 1..=9); 0 marks the all-cause row.
const CODES: [(&str, usize); 11] = [
    ("C34", 1),
    ("C33", 1),
    ("C15", 2),
    ("C50", 3),
    ("J44", 4),
    ("J18", 5),
    ("I21", 6),
    ("K70", 7),
    ("V89", 8),
    ("E11", 9),
    ("AAA", 0),
];

/// Base counts per code at the youngest span.
const BASE: [f64; 11] = [3.0, 1.0, 4.0, 9.0, 2.0, 3.0, 20.0, 2.0, 6.0, 15.0, 0.0];

fn d_ns(group: usize, female: bool) -> f64 {
    let base = if female { 0.00008 } else { 0.0001 };
    base * (1.0 + group as f64)
}

fn d_s(group: usize, female: bool) -> f64 {
    let base = if female { 0.0012 } else { 0.002 };
    base * (1.0 + group as f64)
}

/// Female other-medical risk falls below 1 at 75-79.
fn rr(category: usize, group: usize, female: bool) -> f64 {
    let base = [0.0, 20.0, 6.0, 2.0, 11.0, 2.2, 1.8, 0.0, 0.0, 1.4][category];
    base * (1.0 - 0.03 * group as f64) * if female { 0.8 } else { 1.0 }
}

fn pop(c: usize, s: usize, span: usize, year_index: usize) -> f64 {
    let base = [
        400_000.0, 150_000.0, 90_000.0, 40_000.0, 35_000.0, 30_000.0, 25_000.0, 15_000.0, 10_000.0,
    ][span];
    let trend = if year_index == 0 { 1.0 } else { 1.04 };
    (base * (1.0 + 0.3 * c as f64) * (1.0 + 0.05 * s as f64) * trend).round()
}

/// Population is given for 2000 and 2002 only; 2001 is the midpoint.
fn pop_in_year(c: usize, s: usize, span: usize, y: usize) -> f64 {
    match y {
        0 => pop(c, s, span, 0),
        2 => pop(c, s, span, 2),
        _ => 0.5 * (pop(c, s, span, 0) + pop(c, s, span, 2)),
    }
}

fn count(c: usize, y: usize, s: usize, code: usize, span: usize) -> f64 {
    let (_, k) = CODES[code];
    if k == 0 {
        return (0..10).map(|j| count(c, y, s, j, span)).sum::<f64>() + 50.0;
    }
    let age = 1.0 + 0.7 * span as f64;
    let mut v = BASE[code] * age * (1.0 + 0.1 * y as f64) * (1.0 + 0.25 * c as f64);
    if k == 1 {
        // Lung deaths scale with population so the proxy spans the reference range,
        // including clamped cells for BB.
        let strength = [[0.35, 0.2], [1.3, 0.02]][c][s];
        let g = GROUP_OF_SPAN[span];
        let rate = d_ns(g, s == 1) + strength * (d_s(g, s == 1) - d_ns(g, s == 1));
        let share = if code == 0 { 0.8 } else { 0.2 };
        v = rate * pop_in_year(c, s, span, y) * share * (1.0 + 0.05 * y as f64);
    }
    if s == 1 {
        v *= 0.7;
    }
    v.round()
}

pub struct Fixture {
    pub deaths: PathBuf,
    pub population: PathBuf,
    pub reference: PathBuf,
}

/// Writes the hand-built Peto-Lopez fixture into `dir`.
pub fn write_fixture(dir: &Path) -> Fixture {
    let mut deaths =
        String::from("country,year,sex,icd_version,sublist,age_format,cause_code,age_low,age_high,count\n");
    for (c, country) in COUNTRIES.iter().enumerate() {
        for (y, year) in YEARS.iter().enumerate() {
            for (s, sex) in SEXES.iter().enumerate() {
                for (code, (name, _)) in CODES.iter().enumerate() {
                    for (span, (lo, hi)) in SPANS.iter().enumerate() {
                        let hi = hi.map(|h| h.to_string()).unwrap_or_default();
                        let n = count(c, y, s, code, span);
                        writeln!(deaths, "{country},{year},{sex},ICD10,103,01,{name},{lo},{hi},{n}").unwrap();
                    }
                }
                // Unknown age is ignored.
                writeln!(deaths, "{country},{year},{sex},ICD10,103,01,C34,,,5").unwrap();
            }
        }
    }
    let mut population = String::from("country,year,sex,age_low,age_high,count\n");
    for (c, country) in COUNTRIES.iter().enumerate() {
        for y in [0, 2] {
            for (s, sex) in SEXES.iter().enumerate() {
                for (span, (lo, hi)) in SPANS.iter().enumerate() {
                    let hi = hi.map(|h| h.to_string()).unwrap_or_default();
                    writeln!(
                        population,
                        "{country},{},{sex},{lo},{hi},{}",
                        YEARS[y],
                        pop(c, s, span, y)
                    )
                    .unwrap();
                }
            }
        }
    }
    let groups = [(35, 59), (60, 64), (65, 69), (70, 74), (75, 79)];
    let cats = [
        "",
        "lung_cancer",
        "upper_aerodigestive",
        "other_cancer",
        "copd",
        "other_respiratory",
        "vascular",
        "",
        "",
        "other_medical",
    ];
    let mut reference = String::from("kind,category,age_low,age_high,sex,value\n");
    for (i, (lo, hi)) in groups.iter().enumerate() {
        let g = i + 1;
        for (s, sex) in SEXES.iter().enumerate() {
            writeln!(reference, "dS,lung_cancer,{lo},{hi},{sex},{}", d_s(g, s == 1)).unwrap();
            writeln!(reference, "dNS,lung_cancer,{lo},{hi},{sex},{}", d_ns(g, s == 1)).unwrap();
            for k in [1, 2, 3, 4, 5, 6, 9] {
                writeln!(reference, "rr,{},{lo},{hi},{sex},{}", cats[k], rr(k, g, s == 1)).unwrap();
            }
        }
    }
    let f = Fixture {
        deaths: dir.join("deaths.csv"),
        population: dir.join("population.csv"),
        reference: dir.join("reference.csv"),
    };
    std::fs::write(&f.deaths, deaths).unwrap();
    std::fs::write(&f.population, population).unwrap();
    std::fs::write(&f.reference, reference).unwrap();
    f
}

/// The ASAF of every fixture cell by plain arithmetic on the tables above.
pub fn oracle() -> BTreeMap<(String, String, i32), f64> {
    let mut out = BTreeMap::new();
    for (c, country) in COUNTRIES.iter().enumerate() {
        for (y, year) in YEARS.iter().enumerate() {
            for (s, sex) in SEXES.iter().enumerate() {
                let female = s == 1;
                let mut pop_g = [0.0; 7];
                let mut deaths = [[0.0; 7]; 10];
                for span in 0..9 {
                    let g = GROUP_OF_SPAN[span];
                    pop_g[g] += pop_in_year(c, s, span, y);
                    for (code, (_, k)) in CODES.iter().enumerate() {
                        if *k > 0 {
                            deaths[*k][g] += count(c, y, s, code, span);
                        }
                    }
                }
                let mut frac = [[0.0; 7]; 10];
                for g in 1..=5 {
                    let rate = deaths[1][g] / pop_g[g];
                    let p = ((rate - d_ns(g, female)) / (d_s(g, female) - d_ns(g, female))).clamp(0.0, 1.0);
                    for k in 1..=9 {
                        let r = rr(k, g, female);
                        let er = match k {
                            1 => r - 1.0,
                            7 | 8 => 0.0,
                            _ => 0.5 * (r - 1.0),
                        };
                        // A relative risk below 1 attributes nothing.
                        let x = (p * er).max(0.0);
                        frac[k][g] = x / (x + 1.0);
                    }
                }
                for row in frac.iter_mut() {
                    row[0] = 0.0;
                    row[6] = row[5];
                }
                let mut num = 0.0;
                let mut den = 0.0;
                for k in 1..=9 {
                    for g in 0..7 {
                        num += frac[k][g] * deaths[k][g];
                        den += deaths[k][g];
                    }
                }
                out.insert((country.to_string(), sex.to_string(), *year), num / den);
            }
        }
    }
    out
}

/// Synthetic ASAF for `n` countries, 1950-2015, written to `path`.
pub fn write_synthetic_asaf(path: &Path, n: usize, seed: u64) {
    let syn = generate(&SyntheticConfig {
        n_countries: n,
        first_year: 1950,
        last_year: 2015,
        global: HyperParams::default().prior_means(),
        truncate: true,
        seed,
    });
    let mut buf = Vec::new();
    write_asaf(&mut buf, &syn.series).unwrap();
    std::fs::write(path, buf).unwrap();
}

pub fn asaf(args: &[&str], cwd: &Path) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_asaf"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

/// Runs the binary, asserts success and returns the run directory it printed.
pub fn asaf_ok(args: &[&str], cwd: &Path) -> PathBuf {
    let out = asaf(args, cwd);
    assert!(
        out.status.success(),
        "asaf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = String::from_utf8(out.stdout).unwrap();
    cwd.join(dir.trim())
}

/// Every file under `dir` except timing manifests, by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
                continue;
            }
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            if rel.starts_with("manifest-") {
                continue;
            }
            out.insert(rel, std::fs::read(&p).unwrap());
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
