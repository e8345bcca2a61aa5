//! Subcommand implementations. Each returns a [`CliError`] carrying the
//! process exit code on failure.

use std::fs;
use std::path::{Path, PathBuf};

use fermi_income::analysis::{
    extract_series, parse_proxy, symmetry_check, synth_table, temperature_report, AnalysisError, SeriesOptions,
    SymmetryOptions,
};
use fermi_income::fit::{lm_fit, select_model, FitConfig, FitResult};
use fermi_income::ingest::{parse_tables, to_cumulative, write_tables, Period, TableMeta};
use fermi_income::models::eval;
use fermi_income::{
    CumulativePoints, DecileTable, MeanOffset, ModelFamily, ModelParams, ParamSeries, SymmetryReport, Termination,
    TrendReport,
};
use serde::Serialize;

use crate::output::{fmt_f64, to_json, Tsv};
use crate::{Common, FamilyArg, SynthArgs};

const CURVE_POINTS: usize = 200;
/// Fraction of the data's x-span the dense curve extends past each end.
const CURVE_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Io = 1,
    Parse = 2,
    Fit = 3,
    Mixed = 4,
    Insufficient = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub code: Exit,
    pub message: String,
}

fn fail(code: Exit, message: impl Into<String>) -> CliError {
    CliError {
        code,
        message: message.into(),
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        let code = match &e {
            AnalysisError::MixedSeries { .. } | AnalysisError::DuplicatePeriod(_) => Exit::Mixed,
            AnalysisError::EmptySeries | AnalysisError::InsufficientOverlap { .. } => Exit::Insufficient,
            AnalysisError::Fit { .. } | AnalysisError::Unrepresentable { .. } | AnalysisError::Noise { .. } => {
                Exit::Fit
            }
            AnalysisError::Params(_) | AnalysisError::Proxy { .. } | AnalysisError::Ingest(_) => Exit::Parse,
        };
        fail(code, e.to_string())
    }
}

/// Provenance block embedded in every JSON report.
#[derive(Serialize)]
struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    inputs: Vec<String>,
    seed: u64,
    config: FitConfig,
    mean_offset: f64,
    reject_below: f64,
    scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    proxy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lag: Option<i32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    include_rejected: Option<bool>,
}

struct Setup<'a> {
    common: &'a Common,
    config: FitConfig,
    offset: MeanOffset,
}

impl<'a> Setup<'a> {
    fn new(common: &'a Common) -> Result<Self, CliError> {
        let offset = MeanOffset::new(common.mean_offset).map_err(|e| fail(Exit::Parse, format!("--mean-offset: {e}")))?;
        let config = FitConfig {
            max_iterations: common.max_iter,
            multistart: common.multistart,
            seed: common.seed,
            ..FitConfig::default()
        };
        config.validate().map_err(|e| fail(Exit::Parse, e.to_string()))?;
        if !common.reject_below.is_finite() {
            return Err(fail(Exit::Parse, "--reject-below must be finite"));
        }
        if !(common.scale > 0.0 && common.scale.is_finite()) {
            return Err(fail(Exit::Parse, format!("--scale must be positive, got {}", common.scale)));
        }
        Ok(Self { common, config, offset })
    }

    fn manifest(&self, command: &'static str, files: &[PathBuf]) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs: files.iter().map(|p| p.display().to_string()).collect(),
            seed: self.common.seed,
            config: self.config,
            mean_offset: self.offset.percent(),
            reject_below: self.common.reject_below,
            scale: self.common.scale,
            family: None,
            proxy: None,
            lag: None,
            include_rejected: None,
        }
    }
}

struct Loaded {
    file: String,
    table: DecileTable,
}

/// Reads every table from every file, in file order then table order.
fn load(files: &[PathBuf], scale: f64) -> Result<Vec<Loaded>, CliError> {
    let mut out = Vec::new();
    for path in files {
        let name = path.display().to_string();
        let reader = fs::File::open(path).map_err(|e| fail(Exit::Parse, format!("{name}: {e}")))?;
        let tables = parse_tables(reader).map_err(|e| fail(Exit::Parse, format!("{name}: {e}")))?;
        if tables.is_empty() {
            return Err(fail(Exit::Parse, format!("{name}: no tables")));
        }
        for table in tables {
            let table = if scale == 1.0 {
                table
            } else {
                table.rescaled(scale).map_err(|e| fail(Exit::Parse, format!("{name}: {e}")))?
            };
            out.push(Loaded {
                file: name.clone(),
                table,
            });
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct FitSummary {
    params: ModelParams,
    /// Boltzmann-Gibbs only: the amplitude reported in place of c.
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    r_squared: f64,
    r_squared_display: String,
    rejected: bool,
    ss_res: f64,
    residuals: Vec<f64>,
    iterations: usize,
    converged: bool,
    termination: Termination,
    start: usize,
}

impl FitSummary {
    fn new(fit: &FitResult, reject_below: f64) -> Self {
        Self {
            params: fit.params,
            amplitude: fit.amplitude,
            r_squared: fit.r_squared,
            r_squared_display: fit.r_squared_display(),
            rejected: fit.is_rejected(reject_below),
            ss_res: fit.ss_res,
            residuals: fit.residuals.clone(),
            iterations: fit.iterations,
            converged: fit.converged,
            termination: fit.termination,
            start: fit.start,
        }
    }
}

#[derive(Serialize)]
struct FitRecord {
    file: String,
    table: TableMeta,
    family: ModelFamily,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve_file: Option<String>,
}

#[derive(Serialize)]
struct FitReport {
    manifest: RunManifest,
    fits: Vec<FitRecord>,
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

fn file_stem(index: usize, meta: &TableMeta) -> String {
    format!(
        "{:03}_{}_{}_{}_{}",
        index + 1,
        slug(&meta.country),
        meta.period,
        meta.kind.tag(),
        meta.basis.tag()
    )
}

fn model_value(family: ModelFamily, params: &ModelParams, x: f64) -> String {
    eval(family, params, x).map_or_else(|_| "NaN".to_owned(), fmt_f64)
}

fn dense_xs(points: &CumulativePoints) -> Vec<f64> {
    let (lo, hi) = (points.points()[0].x, points.points()[points.len() - 1].x);
    let margin = CURVE_MARGIN * (hi - lo);
    let (a, b) = (lo - margin, hi + margin);
    (0..CURVE_POINTS)
        .map(|i| a + (b - a) * i as f64 / (CURVE_POINTS - 1) as f64)
        .collect()
}

/// Data block `(x, y_data, y_model...)` and a dense block `(x, y_model...)`
/// for one or more fitted curves.
fn curve_tsv(label: &str, points: &CumulativePoints, curves: &[(ModelFamily, ModelParams)]) -> String {
    let mut tsv = Tsv::default();
    tsv.comment(label).comment("x = ln(income), y = ln(cumulative percent)");
    for (family, p) in curves {
        tsv.comment(&format!(
            "{}: T = {}, mu = {}, c = {}",
            family.short(),
            fmt_f64(p.t),
            fmt_f64(p.mu),
            fmt_f64(p.c)
        ));
    }
    let names: Vec<String> = curves.iter().map(|(f, _)| format!("y_{}", f.short())).collect();
    let mut header = vec!["x", "y_data"];
    header.extend(names.iter().map(String::as_str));
    tsv.block(
        &header,
        points.points().iter().map(|pt| {
            let mut row = vec![fmt_f64(pt.x), fmt_f64(pt.y)];
            row.extend(curves.iter().map(|(f, p)| model_value(*f, p, pt.x)));
            row
        }),
    );
    let mut header = vec!["x"];
    header.extend(names.iter().map(String::as_str));
    tsv.block(
        &header,
        dense_xs(points).into_iter().map(|x| {
            let mut row = vec![fmt_f64(x)];
            row.extend(curves.iter().map(|(f, p)| model_value(*f, p, x)));
            row
        }),
    );
    tsv.finish().to_owned()
}

/// Writes the report and side files under `--out`, or prints the report.
fn emit(out: Option<&Path>, report_name: &str, json: &str, files: &[(String, String)]) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            let io = |e: std::io::Error, p: &Path| fail(Exit::Io, format!("{}: {e}", p.display()));
            fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
            let path = dir.join(report_name);
            fs::write(&path, json).map_err(|e| io(e, &path))?;
            for (name, body) in files {
                let path = dir.join(name);
                fs::write(&path, body).map_err(|e| io(e, &path))?;
            }
            Ok(())
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn serialize<T: Serialize>(value: &T) -> Result<String, CliError> {
    to_json(value).map_err(|e| fail(Exit::Io, format!("serializing report: {e}")))
}

pub fn fit(common: &Common, family: FamilyArg, files: &[PathBuf]) -> Result<(), CliError> {
    let setup = Setup::new(common)?;
    let loaded = load(files, common.scale)?;
    let mut records = Vec::new();
    let mut side = Vec::new();
    let mut failures = Vec::new();
    for (i, l) in loaded.iter().enumerate() {
        let points = to_cumulative(&l.table, setup.offset);
        for fam in family.families() {
            let mut record = FitRecord {
                file: l.file.clone(),
                table: l.table.meta.clone(),
                family: fam,
                fit: None,
                error: None,
                curve_file: None,
            };
            match lm_fit(&points, fam, &setup.config) {
                Ok(fit) => {
                    let name = format!("{}_{}.tsv", file_stem(i, &l.table.meta), fam.short());
                    let label = format!("{} ({}), {} fit", l.table.meta.label(), l.file, fam);
                    side.push((name.clone(), curve_tsv(&label, &points, &[(fam, fit.params)])));
                    record.curve_file = common.out.is_some().then_some(name);
                    record.fit = Some(FitSummary::new(&fit, common.reject_below));
                }
                Err(e) => {
                    failures.push(format!("{}: {}: {}: {e}", l.file, l.table.meta.label(), fam.short()));
                    record.error = Some(e.to_string());
                }
            }
            records.push(record);
        }
    }
    let mut manifest = setup.manifest("fit", files);
    manifest.family = Some(family.tag());
    let json = serialize(&FitReport { manifest, fits: records })?;
    emit(common.out.as_deref(), "fit.json", &json, &side)?;
    match failures.first() {
        None => Ok(()),
        Some(first) => Err(fail(Exit::Fit, format!("{} fit(s) failed; first: {first}", failures.len()))),
    }
}

#[derive(Serialize)]
struct RankEntry {
    rank: usize,
    family: ModelFamily,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Comparison {
    file: String,
    table: TableMeta,
    best: Option<ModelFamily>,
    ranking: Vec<RankEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curve_file: Option<String>,
}

#[derive(Serialize)]
struct CompareReport {
    manifest: RunManifest,
    comparisons: Vec<Comparison>,
}

pub fn compare(common: &Common, files: &[PathBuf]) -> Result<(), CliError> {
    let setup = Setup::new(common)?;
    let loaded = load(files, common.scale)?;
    let mut comparisons = Vec::new();
    let mut side = Vec::new();
    let mut failures = Vec::new();
    for (i, l) in loaded.iter().enumerate() {
        let points = to_cumulative(&l.table, setup.offset);
        let ranked = select_model(&points, &setup.config);
        let best = ranked.first().and_then(|o| o.fit.is_ok().then_some(o.family));
        if best.is_none() {
            failures.push(format!("{}: {}: every family failed", l.file, l.table.meta.label()));
        }
        let curves: Vec<(ModelFamily, ModelParams)> = ModelFamily::ALL
            .iter()
            .filter_map(|f| ranked.iter().find(|o| o.family == *f))
            .filter_map(|o| o.fit.as_ref().ok().map(|fit| (o.family, fit.params)))
            .collect();
        let mut curve_file = None;
        if !curves.is_empty() {
            let name = format!("{}_compare.tsv", file_stem(i, &l.table.meta));
            let label = format!("{} ({}), all families", l.table.meta.label(), l.file);
            side.push((name.clone(), curve_tsv(&label, &points, &curves)));
            curve_file = common.out.is_some().then_some(name);
        }
        comparisons.push(Comparison {
            file: l.file.clone(),
            table: l.table.meta.clone(),
            best,
            ranking: ranked
                .iter()
                .enumerate()
                .map(|(rank, o)| RankEntry {
                    rank: rank + 1,
                    family: o.family,
                    fit: o.fit.as_ref().ok().map(|f| FitSummary::new(f, common.reject_below)),
                    error: o.fit.as_ref().err().map(ToString::to_string),
                })
                .collect(),
            curve_file,
        });
    }
    let json = serialize(&CompareReport {
        manifest: setup.manifest("compare", files),
        comparisons,
    })?;
    emit(common.out.as_deref(), "compare.json", &json, &side)?;
    match failures.first() {
        None => Ok(()),
        Some(first) => Err(fail(Exit::Fit, first.clone())),
    }
}

#[derive(Serialize)]
struct SeriesReport {
    manifest: RunManifest,
    series: ParamSeries,
    temperature: TrendReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetry: Option<SymmetryReport>,
}

/// Year with the month folded in as a fraction, for plotting.
fn decimal_year(p: Period) -> f64 {
    p.year as f64 + p.month.map_or(0.0, |m| (m as f64 - 1.0) / 12.0)
}

fn year_column(p: Period) -> String {
    match p.month {
        None => p.year.to_string(),
        Some(_) => fmt_f64(decimal_year(p)),
    }
}

fn series_tsvs(series: &ParamSeries, trend: &TrendReport) -> Vec<(String, String)> {
    let title = format!(
        "{} {}/{} {} fits",
        series.country,
        series.kind.tag(),
        series.basis.tag(),
        series.family.short()
    );
    let delta = |p: Period| {
        trend
            .entries
            .iter()
            .find(|e| e.period == p)
            .and_then(|e| e.delta_t)
            .map_or_else(|| "NaN".to_owned(), fmt_f64)
    };
    let mut t = Tsv::default();
    t.comment(&title).block(
        &["year", "T", "delta_T", "r_squared", "rejected"],
        series.entries.iter().map(|e| {
            vec![
                year_column(e.period),
                fmt_f64(e.params.t),
                delta(e.period),
                fmt_f64(e.r_squared),
                u8::from(e.rejected).to_string(),
            ]
        }),
    );
    let mut mu = Tsv::default();
    mu.comment(&title).block(
        &["year", "mu", "c", "r_squared", "rejected"],
        series.entries.iter().map(|e| {
            vec![
                year_column(e.period),
                fmt_f64(e.params.mu),
                fmt_f64(e.params.c),
                fmt_f64(e.r_squared),
                u8::from(e.rejected).to_string(),
            ]
        }),
    );
    vec![
        ("temperature.tsv".to_owned(), t.finish().to_owned()),
        ("chemical_potential.tsv".to_owned(), mu.finish().to_owned()),
    ]
}

pub fn series(
    common: &Common,
    family: FamilyArg,
    proxy: Option<&Path>,
    lag: i32,
    include_rejected: bool,
    files: &[PathBuf],
) -> Result<(), CliError> {
    let setup = Setup::new(common)?;
    let fam = match family.families()[..] {
        [f] => f,
        _ => return Err(fail(Exit::Parse, "series needs a single --family")),
    };
    // read the proxy first so a bad file fails before any fitting
    let proxy_series = proxy
        .map(|path| {
            let name = path.display().to_string();
            let reader = fs::File::open(path).map_err(|e| fail(Exit::Parse, format!("{name}: {e}")))?;
            parse_proxy(reader).map_err(|e| {
                let mut err = CliError::from(e);
                err.message = format!("{name}: {}", err.message);
                err
            })
        })
        .transpose()?;
    let loaded = load(files, common.scale)?;
    let tables: Vec<DecileTable> = loaded.into_iter().map(|l| l.table).collect();
    let options = SeriesOptions {
        offset: setup.offset,
        reject_below: common.reject_below,
    };
    let series = extract_series(&tables, fam, &setup.config, &options)?;
    let temperature = temperature_report(&series, include_rejected);
    let symmetry = proxy_series
        .map(|p| symmetry_check(&series, &p, &SymmetryOptions { lag, include_rejected }))
        .transpose()?;

    let mut manifest = setup.manifest("series", files);
    manifest.family = Some(family.tag());
    manifest.proxy = proxy.map(|p| p.display().to_string());
    manifest.lag = Some(lag);
    manifest.include_rejected = Some(include_rejected);
    let side = series_tsvs(&series, &temperature);
    let json = serialize(&SeriesReport {
        manifest,
        series,
        temperature,
        symmetry,
    })?;
    emit(common.out.as_deref(), "series.json", &json, &side)
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let fam = match args.family.families()[..] {
        [f] => f,
        _ => return Err(fail(Exit::Parse, "synth needs a single --family")),
    };
    let offset = MeanOffset::new(args.mean_offset).map_err(|e| fail(Exit::Parse, format!("--mean-offset: {e}")))?;
    if !(args.sigma >= 0.0 && args.sigma.is_finite()) {
        return Err(fail(Exit::Parse, format!("--sigma must be non-negative, got {}", args.sigma)));
    }
    let (t, mu, c) = args.params;
    let meta = TableMeta {
        country: args.country.clone(),
        period: Period {
            year: args.year,
            month: args.month,
        },
        kind: args.kind,
        basis: args.basis,
        holder: args.holder,
        currency: args.currency.clone(),
        scale_factor: 1.0,
    };
    let table = synth_table(&ModelParams::new(t, mu, c), fam, meta, offset, args.sigma, args.seed)?;
    let mut buf = Vec::new();
    write_tables(&mut buf, std::slice::from_ref(&table)).map_err(|e| fail(Exit::Io, e.to_string()))?;
    let csv = String::from_utf8(buf).expect("csv writer emits UTF-8");
    match &args.out {
        Some(dir) => emit(Some(dir), "synth.csv", &csv, &[]),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analysis_errors_map_to_exit_codes() {
        let code = |e| CliError::from(e).code;
        assert_eq!(code(AnalysisError::EmptySeries), Exit::Insufficient);
        assert_eq!(code(AnalysisError::InsufficientOverlap { found: 2, needed: 3 }), Exit::Insufficient);
        assert_eq!(
            code(AnalysisError::MixedSeries {
                first: "a".into(),
                other: "b".into()
            }),
            Exit::Mixed
        );
        assert_eq!(code(AnalysisError::Proxy { row: 3, message: "x".into() }), Exit::Parse);
    }

    #[test]
    fn monthly_periods_plot_inside_their_year() {
        assert_eq!(decimal_year(Period::year(2009)), 2009.0);
        let p = Period {
            year: 2009,
            month: Some(7),
        };
        assert_eq!(decimal_year(p), 2009.5);
    }

    #[test]
    fn slugs_are_filesystem_safe() {
        assert_eq!(slug("Hong Kong"), "hong-kong");
    }
}
