//! The seven subcommands. Each one recomputes what it needs from the
//! configured inputs, reusing artifacts already present in the run
//! directory where they are expensive (draws, validation forecasts).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use asaf_core::doublelogistic::{classify_all, write_classification, Classification, FitReport};
use asaf_core::evaluate::{
    export_forecasts, import_external_forecasts, persistence_set, read_tags, select_validation_countries,
    subgroup_report, write_report, ForecastSet, ReportInput, Scenario,
};
use asaf_core::forecast::{project, quantile_fan, read_fans, write_fans, ProjectionOptions};
use asaf_core::ingest::{canonical_population, read_deaths, read_population, IcdMap};
use asaf_core::model::{ModelData, Variant};
use asaf_core::petolopez::{estimate, ReferenceRates};
use asaf_core::sampler::diagnostics::write_diagnostics;
use asaf_core::sampler::sensitivity::write_sensitivity;
use asaf_core::sampler::{diagnose, fit_model, parse_latent_name, sensitivity_table, DrawStore};
use asaf_core::types::{read_asaf, write_asaf};
use asaf_core::{AsafSeries, Sex};
use serde::Serialize;

use crate::config::RunConfig;
use crate::rundir::{Manifest, RunDir};
use crate::{CliError, StageExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Estimate,
    Classify,
    Fit,
    Project,
    Validate,
    Diagnose,
    Sensitivity,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Classify => "classify",
            Command::Fit => "fit",
            Command::Project => "project",
            Command::Validate => "validate",
            Command::Diagnose => "diagnose",
            Command::Sensitivity => "sensitivity",
        }
    }
}

#[derive(Serialize)]
struct Timings {
    command: &'static str,
    stages: Vec<(String, f64)>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    dir: RunDir,
    timings: Vec<(String, f64)>,
}

impl Ctx<'_> {
    fn timed<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T, CliError>) -> Result<T, CliError> {
        let t = Instant::now();
        let out = f(self)?;
        self.timings.push((name.to_string(), t.elapsed().as_secs_f64()));
        Ok(out)
    }

    fn write_csv(&self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> asaf_core::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf).stage("output")?;
        self.dir.write(rel, &buf)
    }
}

/// Runs `cmd` and returns the run directory.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let manifest = Manifest::new(cfg)?;
    let dir = RunDir::open(&cfg.out, &manifest)?;
    let mut ctx = Ctx {
        cfg,
        dir,
        timings: Vec::new(),
    };
    match cmd {
        Command::Estimate => {
            let series = ctx.timed("estimate", |c| estimate_series(c.cfg))?;
            ctx.write_csv("asaf.csv", |w| write_asaf(w, &series))?;
        }
        Command::Classify => {
            let series = ctx.timed("load", |c| load_series(c.cfg))?;
            let rows = ctx.timed("classify", |_| Ok(classify_all(&series)))?;
            ctx.write_csv("classification.csv", |w| write_classification(w, &rows))?;
        }
        Command::Fit | Command::Diagnose => {
            let store = draws(&mut ctx)?;
            let params: Vec<String> = store
                .names
                .iter()
                .filter(|n| parse_latent_name(n).is_none())
                .cloned()
                .collect();
            let rows = ctx.timed("diagnose", |_| diagnose(&store, &params).stage("diagnose"))?;
            ctx.write_csv("diagnostics.csv", |w| write_diagnostics(w, &rows))?;
        }
        Command::Project => {
            let store = draws(&mut ctx)?;
            let last = latent_end(&store);
            let start = cfg.projection.start.unwrap_or(last + 1);
            let opts = ProjectionOptions {
                start,
                end: cfg.projection.end,
                seed: cfg.seed,
                max_trajectories: cfg.projection.max_trajectories,
            };
            let set = ctx.timed("project", |_| project(&store, &opts).stage("project"))?;
            let fan = quantile_fan(&set).stage("project")?;
            let mut buf = Vec::new();
            write_fans(&mut buf, &fan).stage("output")?;
            read_fans(buf.as_slice()).stage("project")?;
            ctx.dir.write("projections.csv", &buf)?;
        }
        Command::Sensitivity => {
            if cfg.variant()? != Variant::Hierarchical {
                return Err(CliError::Config("sensitivity needs the hierarchical variant".into()));
            }
            let store = draws(&mut ctx)?;
            let hyper = cfg.hyper()?;
            let rows = ctx.timed("sensitivity", |_| {
                sensitivity_table(&store, &hyper).stage("sensitivity")
            })?;
            ctx.write_csv("sensitivity.csv", |w| write_sensitivity(w, &rows))?;
        }
        Command::Validate => validate(&mut ctx)?,
    }
    let timings = Timings {
        command: cmd.as_str(),
        stages: ctx.timings,
    };
    let json = serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n";
    ctx.dir
        .replace(format!("manifest-{}.json", cmd.as_str()), json.as_bytes())?;
    Ok(ctx.dir.path)
}

fn require(p: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    p.clone()
        .ok_or_else(|| CliError::Config(format!("inputs.{what} is not set")))
}

fn estimate_series(cfg: &RunConfig) -> Result<Vec<AsafSeries>, CliError> {
    let i = &cfg.inputs;
    let deaths = require(&i.deaths, "deaths")?;
    let population = require(&i.population, "population")?;
    let reference = require(&i.reference, "reference")?;
    let tables = read_deaths(&deaths).stage("ingest")?;
    let pop = read_population(&population).stage("ingest")?;
    let pop = canonical_population(&pop).stage("ingest")?;
    let refs = ReferenceRates::from_path(&reference).stage("reference")?;
    let map = match &i.icd_map {
        Some(p) => IcdMap::from_path(p).stage("ingest")?,
        None => IcdMap::seed(),
    };
    estimate(&tables, &pop, &refs, &map).stage("petolopez")
}

/// Estimated from deaths when configured, otherwise read from `inputs.asaf`.
fn load_series(cfg: &RunConfig) -> Result<Vec<AsafSeries>, CliError> {
    if cfg.inputs.deaths.is_some() {
        return estimate_series(cfg);
    }
    match &cfg.inputs.asaf {
        Some(p) => read_asaf(p).stage("ingest"),
        None => Err(CliError::Config(
            "set inputs.deaths (with population and reference) or inputs.asaf".into(),
        )),
    }
}

fn fits_of(rows: &[Classification]) -> BTreeMap<(String, Sex), FitReport> {
    rows.iter()
        .filter_map(|r| r.fit.map(|f| ((r.country.clone(), r.sex), f)))
        .collect()
}

/// Both sexes of every country whose male series is clear-pattern, up to `train_end`.
fn modeling_set(series: &[AsafSeries], rows: &[Classification], train_end: Option<i32>) -> Vec<AsafSeries> {
    let keep: Vec<&str> = rows
        .iter()
        .filter(|r| r.sex == Sex::Male && r.clear_pattern)
        .map(|r| r.country.as_str())
        .collect();
    series
        .iter()
        .filter(|s| keep.contains(&s.country.as_str()))
        .map(|s| match train_end {
            Some(t) => s.through(t),
            None => s.clone(),
        })
        .collect()
}

fn fit_series(
    cfg: &RunConfig,
    series: &[AsafSeries],
    variant: Variant,
    end: Option<i32>,
) -> Result<DrawStore, CliError> {
    let rows = classify_all(series);
    let set = modeling_set(series, &rows, end);
    if set.is_empty() {
        return Err(CliError::Stage {
            stage: "fit",
            source: asaf_core::Error::InsufficientData("no clear-pattern male series to model".into()),
        });
    }
    let data = ModelData::new(&set, end).stage("fit")?;
    let train_rows = classify_all(&set);
    fit_model(
        &data,
        &cfg.hyper()?,
        variant,
        &cfg.chain_config()?,
        &fits_of(&train_rows),
        cfg.chains.keep_latent,
    )
    .stage("fit")
}

/// Draws from `draws/` when present, otherwise a fresh fit stored there.
fn draws(ctx: &mut Ctx<'_>) -> Result<DrawStore, CliError> {
    let path = ctx.dir.join("draws");
    if path.join("store.toml").exists() {
        return ctx.timed("load draws", |_| DrawStore::read_dir(&path).stage("draws"));
    }
    let series = ctx.timed("load", |c| load_series(c.cfg))?;
    let (classes, store) = ctx.timed("fit", |c| {
        let classes = classify_all(&series);
        let store = fit_series(c.cfg, &series, c.cfg.variant()?, c.cfg.train_end)?;
        Ok((classes, store))
    })?;
    ctx.write_csv("asaf.csv", |w| write_asaf(w, &series))?;
    ctx.write_csv("classification.csv", |w| write_classification(w, &classes))?;
    ctx.dir.write_dir("draws", |tmp| store.write_dir(tmp).stage("output"))?;
    Ok(store)
}

fn latent_end(store: &DrawStore) -> i32 {
    store
        .names
        .iter()
        .filter_map(|n| parse_latent_name(n).map(|(_, _, y)| y))
        .max()
        .unwrap_or(i32::MIN)
}

fn read_set(path: &Path, method: &str) -> Result<ForecastSet, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let sets = import_external_forecasts(file, base).stage("validate")?;
    sets.into_iter()
        .find(|s| s.method == method)
        .ok_or_else(|| CliError::Config(format!("{}: no rows for method {method}", path.display())))
}

fn validate(ctx: &mut Ctx<'_>) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let series = ctx.timed("load", |c| load_series(c.cfg))?;
    let classes = ctx.timed("classify", |_| Ok(classify_all(&series)))?;
    let tags = match &cfg.inputs.tags {
        Some(p) => {
            let f = std::fs::File::open(p).map_err(|_| CliError::MissingInput(p.clone()))?;
            Some(read_tags(f).stage("validate")?)
        }
        None => None,
    };
    let mut report = Vec::new();
    for &train_end in &cfg.validation.train_ends {
        let scenario = Scenario::new(train_end, cfg.validation.test_end).stage("validate")?;
        let countries = select_validation_countries(&series, &classes, &scenario);
        if countries.is_empty() {
            log::warn!("train end {train_end}: no eligible countries");
            continue;
        }
        let sub = format!("validation/{train_end}");
        let mut forecasts = Vec::new();
        for v in &cfg.validation.variants {
            let variant: Variant = v.parse()?;
            let method = variant.as_str();
            let rel = format!("{sub}/{method}");
            let path = ctx.dir.join(&rel).join("forecasts.csv");
            if !path.exists() {
                let set = ctx.timed(&format!("fit {method} {train_end}"), |c| {
                    let chosen: Vec<AsafSeries> = series
                        .iter()
                        .filter(|s| countries.contains(&s.country))
                        .cloned()
                        .collect();
                    let store = fit_series(c.cfg, &chosen, variant, Some(train_end))?;
                    let opts = ProjectionOptions {
                        start: train_end + 1,
                        end: scenario.test_end,
                        seed: c.cfg.seed,
                        max_trajectories: c.cfg.validation.max_trajectories,
                    };
                    let traj = project(&store, &opts).stage("project")?;
                    Ok(ForecastSet::from_trajectories(method, &traj))
                })?;
                ctx.dir.write_dir(&rel, |tmp| {
                    let draws = tmp.join("draws");
                    std::fs::create_dir(&draws).map_err(|e| CliError::io(&draws, e))?;
                    let out = tmp.join("forecasts.csv");
                    let file = std::fs::File::create(&out).map_err(|e| CliError::io(&out, e))?;
                    export_forecasts(file, &set, Some((&draws, tmp))).stage("output")
                })?;
            }
            forecasts.push(read_set(&path, method)?);
        }
        forecasts.push(persistence_set(&series, &countries, &scenario).stage("validate")?);
        if let Some(p) = cfg.inputs.external_forecasts.get(&train_end.to_string()) {
            let f = std::fs::File::open(p).map_err(|_| CliError::MissingInput(p.clone()))?;
            let base = p.parent().unwrap_or(Path::new(""));
            forecasts.extend(import_external_forecasts(f, base).stage("validate")?);
        }
        let rows = subgroup_report(&ReportInput {
            scenario,
            observations: &series,
            countries: &countries,
            forecasts: &forecasts,
            tags: tags.as_ref(),
            crps_pairs: cfg.validation.crps_pairs,
        })
        .stage("validate")?;
        report.extend(rows);
    }
    let pairs = cfg.validation.crps_pairs;
    ctx.write_csv("validation/report.csv", |w| write_report(w, &report, pairs))
}
