//! Multi-year parameter series, synthetic tables, and the temperature and
//! chemical-potential diagnostics.

use std::io::Read;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{lm_fit, FitConfig, FitError, DEFAULT_REJECT_BELOW};
use crate::ingest::{
    cumulative_percents, to_cumulative, DecileTable, IncomeBasis, IngestError, MeanOffset, Period,
    TableKind, TableMeta,
};
use crate::models::{ModelFamily, ModelParams};

/// Minimum number of (Δmu, proxy) pairs for a symmetry check.
pub const MIN_OVERLAP: usize = 3;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("tables disagree on (country, kind, basis): {first} vs {other}")]
    MixedSeries { first: String, other: String },
    #[error("duplicate period {0} in series")]
    DuplicatePeriod(Period),
    #[error("no tables given")]
    EmptySeries,
    #[error("fit failed for {table}: {source}")]
    Fit {
        table: String,
        #[source]
        source: FitError,
    },
    #[error("model ceiling c = {c} cannot reach cumulative level ln({percent}%) = {level}")]
    Unrepresentable { c: f64, percent: f64, level: f64 },
    #[error("noise moved decile {decile} outside the invertible range (target y = {y})")]
    Noise { decile: usize, y: f64 },
    #[error("invalid parameters {0:?}")]
    Params(ModelParams),
    #[error("only {found} overlapping years, need at least {needed}")]
    InsufficientOverlap { found: usize, needed: usize },
    #[error("proxy row {row}: {message}")]
    Proxy { row: usize, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// Options shared by series extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub offset: MeanOffset,
    /// Entries with R² below this are marked rejected.
    pub reject_below: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            offset: MeanOffset::default(),
            reject_below: DEFAULT_REJECT_BELOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEntry {
    pub period: Period,
    pub params: ModelParams,
    pub r_squared: f64,
    pub rejected: bool,
    pub converged: bool,
}

/// Fitted parameters of one (country, kind, basis) across periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSeries {
    pub country: String,
    pub kind: TableKind,
    pub basis: IncomeBasis,
    pub family: ModelFamily,
    pub entries: Vec<SeriesEntry>,
}

impl ParamSeries {
    fn accepted(&self, include_rejected: bool) -> impl Iterator<Item = &SeriesEntry> {
        self.entries.iter().filter(move |e| include_rejected || !e.rejected)
    }
}

fn series_key(meta: &TableMeta) -> (&str, TableKind, IncomeBasis) {
    (meta.country.as_str(), meta.kind, meta.basis)
}

/// Fits every table and assembles the entries in period order.
pub fn extract_series(
    tables: &[DecileTable],
    family: ModelFamily,
    config: &FitConfig,
    options: &SeriesOptions,
) -> Result<ParamSeries, AnalysisError> {
    let first = tables.first().ok_or(AnalysisError::EmptySeries)?;
    if let Some(other) = tables
        .iter()
        .find(|t| series_key(&t.meta) != series_key(&first.meta))
    {
        return Err(AnalysisError::MixedSeries {
            first: first.meta.label(),
            other: other.meta.label(),
        });
    }

    let fitted: Vec<Result<SeriesEntry, AnalysisError>> = tables
        .par_iter()
        .map(|table| {
            let points = to_cumulative(table, options.offset);
            let fit = lm_fit(&points, family, config).map_err(|source| AnalysisError::Fit {
                table: table.meta.label(),
                source,
            })?;
            Ok(SeriesEntry {
                period: table.meta.period,
                params: fit.params,
                r_squared: fit.r_squared,
                rejected: fit.is_rejected(options.reject_below),
                converged: fit.converged,
            })
        })
        .collect();
    let mut entries = fitted.into_iter().collect::<Result<Vec<_>, _>>()?;
    entries.sort_by_key(|e| e.period);
    if let Some(w) = entries.windows(2).find(|w| w[0].period == w[1].period) {
        return Err(AnalysisError::DuplicatePeriod(w[0].period));
    }

    Ok(ParamSeries {
        country: first.meta.country.clone(),
        kind: first.meta.kind,
        basis: first.meta.basis,
        family,
        entries,
    })
}

/// Builds a decile table whose cumulative points lie on the model curve.
///
/// Each decile's cumulative level `y` (plus optional Gaussian noise) is
/// inverted through the model to an income. `meta.kind` selects the
/// decile grid; `offset` applies to mean and median tables.
pub fn synth_table(
    params: &ModelParams,
    family: ModelFamily,
    meta: TableMeta,
    offset: MeanOffset,
    noise_sigma: f64,
    seed: u64,
) -> Result<DecileTable, AnalysisError> {
    if !params.is_valid() {
        return Err(AnalysisError::Params(*params));
    }
    let percents = cumulative_percents(meta.kind, offset);
    if family == ModelFamily::FermiDirac {
        if let Some(&top) = percents.first() {
            if params.c <= top.ln() {
                return Err(AnalysisError::Unrepresentable {
                    c: params.c,
                    percent: top,
                    level: top.ln(),
                });
            }
        }
    }

    let noise = (noise_sigma > 0.0)
        .then(|| Normal::new(0.0, noise_sigma).map_err(|_| AnalysisError::Params(*params)))
        .transpose()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut values = Vec::with_capacity(percents.len());
    for (k, pct) in percents.iter().enumerate() {
        let mut y = pct.ln();
        if let Some(n) = &noise {
            y += n.sample(&mut rng);
        }
        let ratio = params.c / y;
        let u = match family {
            ModelFamily::FermiDirac if y > 0.0 && y < params.c => (ratio - 1.0).ln(),
            ModelFamily::BoseEinstein if y > 0.0 => ratio.ln_1p(),
            ModelFamily::BoltzmannGibbs if y > 0.0 => ratio.ln(),
            _ => return Err(AnalysisError::Noise { decile: k + 1, y }),
        };
        values.push((params.mu + params.t * u).exp());
    }

    DecileTable::new(meta, values).map_err(|e| match e {
        IngestError::Order { decile, .. } | IngestError::Unit { decile, .. } => AnalysisError::Noise {
            decile,
            y: percents[decile - 1].ln(),
        },
        other => AnalysisError::Ingest(other),
    })
}

/// Annual growth rates used as an external comparison series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxySeries {
    entries: Vec<(i32, f64)>,
}

impl ProxySeries {
    pub fn new(entries: Vec<(i32, f64)>) -> Result<Self, AnalysisError> {
        for (i, w) in entries.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(AnalysisError::Proxy {
                    row: i + 3,
                    message: format!("years must be strictly increasing ({} after {})", w[1].0, w[0].0),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(i32, f64)] {
        &self.entries
    }

    pub fn get(&self, year: i32) -> Option<f64> {
        self.entries
            .binary_search_by_key(&year, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Every value multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            entries: self.entries.iter().map(|&(y, v)| (y, v * k)).collect(),
        }
    }
}

/// Reads a `year,growth_percent` CSV.
pub fn parse_proxy<R: Read>(input: R) -> Result<ProxySeries, AnalysisError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers().map_err(IngestError::from)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| AnalysisError::Proxy {
            row: 1,
            message: format!("missing column `{name}`"),
        })
    };
    let (year_col, value_col) = (col("year")?, col("growth_percent")?);
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(IngestError::from)?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let year = field(year_col).parse().map_err(|_| AnalysisError::Proxy {
            row,
            message: format!("bad year `{}`", field(year_col)),
        })?;
        let value: f64 = field(value_col).parse().map_err(|_| AnalysisError::Proxy {
            row,
            message: format!("bad growth value `{}`", field(value_col)),
        })?;
        entries.push((year, value));
    }
    ProxySeries::new(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymmetryOptions {
    /// Δmu of year `t` is paired with the proxy of year `t + lag`.
    pub lag: i32,
    pub include_rejected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryPair {
    pub year: i32,
    pub delta_mu: f64,
    pub proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    /// Pearson correlation of (Δmu, proxy); `None` if either side is constant.
    pub pearson_r: Option<f64>,
    /// Fraction of pairs where Δmu and the proxy have opposite signs.
    pub sign_agreement: f64,
    pub n_overlap: usize,
    pub pairs: Vec<SymmetryPair>,
}

/// Compares chemical-potential changes with an external growth series.
///
/// Δmu is taken between consecutive retained entries and attributed to
/// the later entry's year; gaps in the series are never interpolated.
pub fn symmetry_check(
    series: &ParamSeries,
    proxy: &ProxySeries,
    options: &SymmetryOptions,
) -> Result<SymmetryReport, AnalysisError> {
    let kept: Vec<&SeriesEntry> = series.accepted(options.include_rejected).collect();
    let pairs: Vec<SymmetryPair> = kept
        .windows(2)
        .filter_map(|w| {
            let year = w[1].period.year;
            proxy.get(year + options.lag).map(|p| SymmetryPair {
                year,
                delta_mu: w[1].params.mu - w[0].params.mu,
                proxy: p,
            })
        })
        .collect();
    if pairs.len() < MIN_OVERLAP {
        return Err(AnalysisError::InsufficientOverlap {
            found: pairs.len(),
            needed: MIN_OVERLAP,
        });
    }
    let dm: Vec<f64> = pairs.iter().map(|p| p.delta_mu).collect();
    let px: Vec<f64> = pairs.iter().map(|p| p.proxy).collect();
    let opposite = pairs.iter().filter(|p| p.delta_mu * p.proxy < 0.0).count();
    Ok(SymmetryReport {
        pearson_r: pearson(&dm, &px),
        sign_agreement: opposite as f64 / pairs.len() as f64,
        n_overlap: pairs.len(),
        pairs,
    })
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    (saa > 0.0 && sbb > 0.0).then(|| (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendEntry {
    pub period: Period,
    pub t: f64,
    /// Change from the previous retained entry.
    pub delta_t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub entries: Vec<TrendEntry>,
    /// Periods where temperature fell relative to the previous entry.
    pub flagged_drops: Vec<Period>,
}

/// Temperature trajectory with year-over-year decreases flagged.
pub fn temperature_report(series: &ParamSeries, include_rejected: bool) -> TrendReport {
    let kept: Vec<&SeriesEntry> = series.accepted(include_rejected).collect();
    let entries: Vec<TrendEntry> = kept
        .iter()
        .enumerate()
        .map(|(i, e)| TrendEntry {
            period: e.period,
            t: e.params.t,
            delta_t: (i > 0).then(|| e.params.t - kept[i - 1].params.t),
        })
        .collect();
    let flagged_drops = entries
        .iter()
        .filter(|e| e.delta_t.is_some_and(|d| d < 0.0))
        .map(|e| e.period)
        .collect();
    TrendReport { entries, flagged_drops }
}
