//! Decile table parsing, validation and the cumulative log-log transform.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Currency redenominations recognised when a scale factor is applied:
/// `(currency, scale factor, relabelled currency)`.
const REDENOMINATIONS: &[(&str, f64, &str)] = &[("leu", 1e-4, "heavy-leu")];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("row {row}: {message}")]
    Schema { row: usize, message: String },
    #[error("{table}: incomes must be strictly increasing (decile {decile}: {prev} then {value})")]
    Order {
        table: String,
        decile: usize,
        prev: f64,
        value: f64,
    },
    #[error("{table}: non-positive income {value} at decile {decile}")]
    Unit { table: String, decile: usize, value: f64 },
    #[error("scale factor must be positive and finite, got {0}")]
    Scale(f64),
    #[error("invalid point set: {0}")]
    Points(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl IngestError {
    fn schema(row: usize, message: impl Into<String>) -> Self {
        IngestError::Schema {
            row,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableKind {
    MeanIncome,
    UpperLimit,
    MedianMonthly,
}

impl TableKind {
    /// Number of decile values a table of this kind carries.
    pub fn expected_len(self) -> usize {
        match self {
            TableKind::UpperLimit => 9,
            TableKind::MeanIncome | TableKind::MedianMonthly => 10,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            TableKind::MeanIncome => "mean",
            TableKind::UpperLimit => "upper",
            TableKind::MedianMonthly => "median_monthly",
        }
    }
}

impl FromStr for TableKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mean" => Ok(TableKind::MeanIncome),
            "upper" => Ok(TableKind::UpperLimit),
            "median_monthly" => Ok(TableKind::MedianMonthly),
            other => Err(format!("unknown kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IncomeBasis {
    Net,
    Gross,
    InactivePersons,
    Unspecified,
}

impl IncomeBasis {
    pub fn tag(self) -> &'static str {
        match self {
            IncomeBasis::Net => "net",
            IncomeBasis::Gross => "gross",
            IncomeBasis::InactivePersons => "inactive",
            IncomeBasis::Unspecified => "unspecified",
        }
    }
}

impl FromStr for IncomeBasis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "net" => Ok(IncomeBasis::Net),
            "gross" => Ok(IncomeBasis::Gross),
            "inactive" => Ok(IncomeBasis::InactivePersons),
            "unspecified" | "" => Ok(IncomeBasis::Unspecified),
            other => Err(format!("unknown basis `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnitHolder {
    Individual,
    Household,
}

impl UnitHolder {
    pub fn tag(self) -> &'static str {
        match self {
            UnitHolder::Individual => "individual",
            UnitHolder::Household => "household",
        }
    }
}

impl FromStr for UnitHolder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "individual" => Ok(UnitHolder::Individual),
            "household" => Ok(UnitHolder::Household),
            other => Err(format!("unknown holder `{other}`")),
        }
    }
}

/// Calendar year, optionally refined to a month for monthly statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Period {
    pub year: i32,
    pub month: Option<u8>,
}

impl Period {
    pub fn year(year: i32) -> Self {
        Self { year, month: None }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.month {
            Some(m) => write!(f, "{}-{:02}", self.year, m),
            None => write!(f, "{}", self.year),
        }
    }
}

/// Everything about a table except its incomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub country: String,
    pub period: Period,
    pub kind: TableKind,
    pub basis: IncomeBasis,
    pub holder: UnitHolder,
    pub currency: String,
    /// Multiplier already applied to the stored incomes.
    pub scale_factor: f64,
}

impl TableMeta {
    pub fn label(&self) -> String {
        format!(
            "{} {} {}/{}",
            self.country,
            self.period,
            self.kind.tag(),
            self.basis.tag()
        )
    }
}

/// One country-period's decile incomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileTable {
    pub meta: TableMeta,
    values: Vec<f64>,
}

impl DecileTable {
    /// Validates length, positivity and strict ordering of already scaled values.
    pub fn new(meta: TableMeta, values: Vec<f64>) -> Result<Self, IngestError> {
        let expected = meta.kind.expected_len();
        if values.len() != expected {
            return Err(IngestError::schema(
                0,
                format!(
                    "{}: expected {expected} deciles for kind `{}`, got {}",
                    meta.label(),
                    meta.kind.tag(),
                    values.len()
                ),
            ));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(IngestError::Unit {
                    table: meta.label(),
                    decile: i + 1,
                    value: v,
                });
            }
            if i > 0 && v <= values[i - 1] {
                return Err(IngestError::Order {
                    table: meta.label(),
                    decile: i + 1,
                    prev: values[i - 1],
                    value: v,
                });
            }
        }
        Ok(Self { meta, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Multiplies every income by `s`, tracking the factor in the metadata.
    pub fn rescaled(&self, s: f64) -> Result<Self, IngestError> {
        check_scale(s)?;
        let mut meta = self.meta.clone();
        meta.scale_factor *= s;
        DecileTable::new(meta, self.values.iter().map(|v| v * s).collect())
    }
}

/// Cumulative-percent offset (in percent) assigned to the mean of a decile.
///
/// Decile `k` (1-based) maps to `100 - 10 (k - 1) - offset` percent. Offsets
/// of 9 or more put the top decile below 1%, i.e. at a negative ln-percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanOffset(f64);

impl MeanOffset {
    pub fn new(percent: f64) -> Result<Self, String> {
        if (0.0..10.0).contains(&percent) {
            Ok(Self(percent))
        } else {
            Err(format!("mean offset must lie in [0, 10), got {percent}"))
        }
    }

    pub fn percent(self) -> f64 {
        self.0
    }
}

impl Default for MeanOffset {
    fn default() -> Self {
        Self(5.0)
    }
}

/// Cumulative population percentages paired with each decile value of `kind`.
pub fn cumulative_percents(kind: TableKind, offset: MeanOffset) -> Vec<f64> {
    match kind {
        TableKind::UpperLimit => (1..=9).map(|k| 100.0 - 10.0 * k as f64).collect(),
        TableKind::MeanIncome | TableKind::MedianMonthly => (1..=10)
            .map(|k| 100.0 - 10.0 * (k - 1) as f64 - offset.0)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    /// ln(income)
    pub x: f64,
    /// ln(cumulative percent)
    pub y: f64,
}

/// Point set handed to the fitter.
///
/// Construction only enforces finite coordinates and strictly increasing x;
/// point sets produced by [`to_cumulative`] additionally have strictly
/// decreasing y in `(0, ln 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativePoints {
    points: Vec<Point>,
    pub source: Option<TableMeta>,
}

impl CumulativePoints {
    pub fn new(points: Vec<Point>) -> Result<Self, IngestError> {
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(IngestError::Points(format!("non-finite point at index {i}")));
            }
            if i > 0 && p.x <= points[i - 1].x {
                return Err(IngestError::Points(format!(
                    "x must be strictly increasing (index {i})"
                )));
            }
        }
        Ok(Self { points, source: None })
    }

    pub fn from_xy(xs: &[f64], ys: &[f64]) -> Result<Self, IngestError> {
        if xs.len() != ys.len() {
            return Err(IngestError::Points("x and y lengths differ".into()));
        }
        Self::new(xs.iter().zip(ys).map(|(&x, &y)| Point { x, y }).collect())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.x)
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.y)
    }
}

/// Maps decile incomes onto (ln income, ln cumulative percent) pairs.
pub fn to_cumulative(table: &DecileTable, offset: MeanOffset) -> CumulativePoints {
    let percents = cumulative_percents(table.meta.kind, offset);
    let points = table
        .values
        .iter()
        .zip(percents)
        .map(|(&v, pct)| Point {
            x: v.ln(),
            y: pct.ln(),
        })
        .collect();
    CumulativePoints {
        points,
        source: Some(table.meta.clone()),
    }
}

/// Inverse of [`to_cumulative`]: exponentiates x back to incomes.
pub fn from_cumulative(points: &CumulativePoints, meta: TableMeta) -> Result<DecileTable, IngestError> {
    DecileTable::new(meta, points.xs().map(f64::exp).collect())
}

/// Shifts every x by `ln s`, i.e. expresses incomes in a unit `s` times smaller.
pub fn rescale(points: &CumulativePoints, s: f64) -> Result<CumulativePoints, IngestError> {
    check_scale(s)?;
    let shift = s.ln();
    Ok(CumulativePoints {
        points: points
            .points
            .iter()
            .map(|p| Point { x: p.x + shift, y: p.y })
            .collect(),
        source: points.source.clone(),
    })
}

fn check_scale(s: f64) -> Result<(), IngestError> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(IngestError::Scale(s))
    }
}

/// Parses a decimal or a `p/q` fraction.
pub fn parse_factor(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let den: f64 = den.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            num / den
        }
        None => s.parse().map_err(|_| format!("bad number `{s}`"))?,
    };
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(format!("factor must be positive, got `{s}`"))
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    country: String,
    year: String,
    #[serde(default)]
    month: Option<String>,
    kind: String,
    basis: String,
    holder: String,
    currency: String,
    #[serde(default)]
    scale_factor: Option<String>,
    decile: String,
    income: String,
}

type GroupKey = (String, Period, TableKind, IncomeBasis, UnitHolder);

struct Group {
    first_row: usize,
    currency: String,
    scale: f64,
    deciles: Vec<(usize, usize, f64)>,
}

/// Parses every table in a CSV document, in order of first appearance.
///
/// Row numbers in errors count the header as row 1.
pub fn parse_tables<R: Read>(input: R) -> Result<Vec<DecileTable>, IngestError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    for required in ["country", "year", "kind", "basis", "holder", "currency", "decile", "income"] {
        if !headers.iter().any(|h| h == required) {
            return Err(IngestError::schema(1, format!("missing column `{required}`")));
        }
    }

    let mut order: Vec<GroupKey> = Vec::new();
    let mut groups: HashMap<GroupKey, Group> = HashMap::new();
    for (i, record) in reader.deserialize::<Row>().enumerate() {
        let row_no = i + 2;
        let row = record.map_err(|e| IngestError::schema(row_no, e.to_string()))?;
        let bad = |m: String| IngestError::schema(row_no, m);

        let year: i32 = row.year.parse().map_err(|_| bad(format!("bad year `{}`", row.year)))?;
        let month = match row.month.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(m) => {
                let m: u8 = m.parse().map_err(|_| bad(format!("bad month `{m}`")))?;
                if !(1..=12).contains(&m) {
                    return Err(bad(format!("month {m} out of range")));
                }
                Some(m)
            }
        };
        let kind: TableKind = row.kind.parse().map_err(bad)?;
        let basis: IncomeBasis = row.basis.parse().map_err(bad)?;
        let holder: UnitHolder = row.holder.parse().map_err(bad)?;
        let scale = match row.scale_factor.as_deref().map(str::trim) {
            None | Some("") => 1.0,
            Some(s) => parse_factor(s).map_err(bad)?,
        };
        let decile: usize = row
            .decile
            .parse()
            .map_err(|_| bad(format!("bad decile `{}`", row.decile)))?;
        if !(1..=10).contains(&decile) {
            return Err(bad(format!("decile {decile} out of range 1-10")));
        }
        let income: f64 = row
            .income
            .parse()
            .map_err(|_| bad(format!("bad income `{}`", row.income)))?;
        if !(income > 0.0 && income.is_finite()) {
            return Err(IngestError::Unit {
                table: format!("{} {} (row {row_no})", row.country, year),
                decile,
                value: income,
            });
        }

        let key = (row.country.clone(), Period { year, month }, kind, basis, holder);
        let group = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Group {
                first_row: row_no,
                currency: row.currency.clone(),
                scale,
                deciles: Vec::new(),
            }
        });
        if group.currency != row.currency || group.scale != scale {
            return Err(bad("currency or scale_factor differs within one table".into()));
        }
        group.deciles.push((row_no, decile, income));
    }

    if order.is_empty() {
        return Err(IngestError::schema(1, "no data rows"));
    }

    let mut tables = Vec::with_capacity(order.len());
    for key in order {
        let group = groups.remove(&key).expect("grouped key");
        let (country, period, kind, basis, holder) = key;
        let expected = kind.expected_len();
        if group.deciles.len() != expected {
            return Err(IngestError::schema(
                group.first_row,
                format!(
                    "{country} {period} `{}`: expected {expected} rows, found {}",
                    kind.tag(),
                    group.deciles.len()
                ),
            ));
        }
        for (k, &(row_no, decile, _)) in group.deciles.iter().enumerate() {
            if decile != k + 1 {
                return Err(IngestError::schema(
                    row_no,
                    format!("deciles must run 1..{expected} in ascending order, found {decile} at position {}", k + 1),
                ));
            }
        }
        let currency = relabel_currency(&group.currency, group.scale);
        let meta = TableMeta {
            country,
            period,
            kind,
            basis,
            holder,
            currency,
            scale_factor: group.scale,
        };
        let values = group.deciles.iter().map(|&(_, _, v)| v * group.scale).collect();
        tables.push(DecileTable::new(meta, values)?);
    }
    Ok(tables)
}

/// Parses a document that must contain exactly one table.
pub fn parse_table<R: Read>(input: R) -> Result<DecileTable, IngestError> {
    let mut tables = parse_tables(input)?;
    if tables.len() != 1 {
        return Err(IngestError::schema(
            1,
            format!("expected one table, found {}", tables.len()),
        ));
    }
    Ok(tables.remove(0))
}

fn relabel_currency(currency: &str, scale: f64) -> String {
    REDENOMINATIONS
        .iter()
        .find(|(from, factor, _)| {
            from.eq_ignore_ascii_case(currency) && ((scale - factor) / factor).abs() < 1e-12
        })
        .map(|(_, _, to)| (*to).to_owned())
        .unwrap_or_else(|| currency.to_owned())
}

/// Writes tables in the ingestion CSV schema with `scale_factor = 1`.
pub fn write_tables<W: Write>(out: W, tables: &[DecileTable]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "country",
        "year",
        "month",
        "kind",
        "basis",
        "holder",
        "currency",
        "scale_factor",
        "decile",
        "income",
    ])?;
    for table in tables {
        let m = &table.meta;
        let month = m.period.month.map(|v| v.to_string()).unwrap_or_default();
        for (k, v) in table.values.iter().enumerate() {
            w.write_record([
                m.country.as_str(),
                &m.period.year.to_string(),
                &month,
                m.kind.tag(),
                m.basis.tag(),
                m.holder.tag(),
                m.currency.as_str(),
                "1",
                &(k + 1).to_string(),
                &v.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
