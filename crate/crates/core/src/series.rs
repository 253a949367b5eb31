//! Daily time-series container, CSV ingestion, population-rate conversion,
//! and synthetic periodic-series generation.
//!
//! A [`TimeSeries`] is a gap-free daily grid: index `i` maps to
//! `start_date + i` days, and dates absent from the input become missing
//! entries rather than holes in the index arithmetic.

use std::collections::BTreeMap;

use chrono::{Datelike, Days, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit annotation carried by a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueUnit {
    Count,
    RatePerThousand,
    Dimensionless,
}

/// Uniformly sampled daily series with an explicit missing-value mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start_date: NaiveDate,
    values: Vec<f64>,
    missing: Vec<bool>,
    unit: ValueUnit,
}

impl TimeSeries {
    /// Build a series, enforcing the length invariants (`n >= 1`, equal masks).
    pub fn new(
        start_date: NaiveDate,
        values: Vec<f64>,
        missing: Vec<bool>,
        unit: ValueUnit,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "a series must contain at least one entry".into(),
            ));
        }
        if values.len() != missing.len() {
            return Err(Error::InvalidParameter(format!(
                "values ({}) and missing mask ({}) differ in length",
                values.len(),
                missing.len()
            )));
        }
        Ok(Self {
            start_date,
            values,
            missing,
            unit,
        })
    }

    /// Build a fully observed series (no missing entries).
    pub fn from_values(start_date: NaiveDate, values: Vec<f64>, unit: ValueUnit) -> Result<Self> {
        let missing = vec![false; values.len()];
        Self::new(start_date, values, missing, unit)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn end_date(&self) -> NaiveDate {
        self.date_at(self.len() - 1)
    }

    pub fn date_at(&self, index: usize) -> NaiveDate {
        self.start_date + Days::new(index as u64)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn missing(&self) -> &[bool] {
        &self.missing
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.missing[index]
    }

    /// Value at `index`, or `None` when flagged missing.
    pub fn value_at(&self, index: usize) -> Option<f64> {
        if self.missing[index] {
            None
        } else {
            Some(self.values[index])
        }
    }

    pub fn unit(&self) -> ValueUnit {
        self.unit
    }

    pub fn with_unit(mut self, unit: ValueUnit) -> Self {
        self.unit = unit;
        self
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    /// Mean of the non-missing values; `None` when everything is missing.
    pub fn mean(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..self.len() {
            if !self.missing[i] {
                sum += self.values[i];
                count += 1;
            }
        }
        if count == 0 {
            None
        } else {
            Some(sum / count as f64)
        }
    }

    /// Same dates and mask, new values and unit.
    pub fn with_values(&self, values: Vec<f64>, unit: ValueUnit) -> Result<Self> {
        Self::new(self.start_date, values, self.missing.clone(), unit)
    }

    /// Elementwise `value + offset` on non-missing entries.
    pub fn shifted(&self, offset: f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&self.missing)
            .map(|(&v, &m)| if m { v } else { v + offset })
            .collect();
        Self {
            start_date: self.start_date,
            values,
            missing: self.missing.clone(),
            unit: ValueUnit::Dimensionless,
        }
    }

    /// Elementwise `value * factor` on non-missing entries.
    pub fn scaled(&self, factor: f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&self.missing)
            .map(|(&v, &m)| if m { v } else { v * factor })
            .collect();
        Self {
            start_date: self.start_date,
            values,
            missing: self.missing.clone(),
            unit: self.unit,
        }
    }

    /// Restrict to the inclusive date window `[start, end]`.
    pub fn slice(&self, start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::InvalidParameter(format!(
                "slice end {end} precedes start {start}"
            )));
        }
        let first = self.start_date.max(start);
        let last = self.end_date().min(end);
        if last < first {
            return Err(Error::InvalidParameter(format!(
                "slice [{start}, {end}] does not overlap the series \
                 [{}, {}]",
                self.start_date,
                self.end_date()
            )));
        }
        let a = (first - self.start_date).num_days() as usize;
        let b = (last - self.start_date).num_days() as usize;
        Self::new(
            first,
            self.values[a..=b].to_vec(),
            self.missing[a..=b].to_vec(),
            self.unit,
        )
    }

    /// Canonical export: CSV with columns `date,value,missing` (missing in {0,1}).
    pub fn to_canonical_csv(&self) -> String {
        let mut out = String::from("date,value,missing\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.date_at(i),
                self.values[i],
                u8::from(self.missing[i])
            ));
        }
        out
    }

    /// Parse the canonical `date,value,missing` format produced by
    /// [`TimeSeries::to_canonical_csv`].
    pub fn from_canonical_csv(text: &str, unit: ValueUnit) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.into()))
        };
        let (di, vi, mi) = (col("date")?, col("value")?, col("missing")?);

        let mut start: Option<NaiveDate> = None;
        let mut values = Vec::new();
        let mut missing = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record.position().map(|p| p.line()).unwrap_or(0);
            let date = NaiveDate::parse_from_str(record[di].trim(), "%Y-%m-%d").map_err(|e| {
                Error::ParseRow {
                    row,
                    message: format!("unparseable date {:?}: {e}", &record[di]),
                }
            })?;
            match start {
                None => start = Some(date),
                Some(s) => {
                    let expect = s + Days::new(values.len() as u64);
                    if date != expect {
                        return Err(Error::ParseRow {
                            row,
                            message: format!("expected date {expect}, found {date}"),
                        });
                    }
                }
            }
            let value: f64 = record[vi].trim().parse().map_err(|e| Error::ParseRow {
                row,
                message: format!("unparseable value {:?}: {e}", &record[vi]),
            })?;
            let flag = match record[mi].trim() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::ParseRow {
                        row,
                        message: format!("missing flag must be 0 or 1, found {other:?}"),
                    })
                }
            };
            values.push(value);
            missing.push(flag);
        }
        let start = start.ok_or(Error::EmptyTable)?;
        Self::new(start, values, missing, unit)
    }
}

/// Parse a header-bearing delimited table into a daily series.
///
/// Rows may appear in any order; the result spans the minimum to maximum
/// date, with absent dates flagged missing. Duplicate dates are accepted
/// only when their values agree.
pub fn parse_csv_series(
    text: &str,
    date_col: &str,
    value_col: &str,
    date_format: &str,
) -> Result<TimeSeries> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == date_col)
        .ok_or_else(|| Error::MissingColumn(date_col.into()))?;
    let value_idx = headers
        .iter()
        .position(|h| h == value_col)
        .ok_or_else(|| Error::MissingColumn(value_col.into()))?;

    let mut rows: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let raw_date = record
            .get(date_idx)
            .map(str::trim)
            .unwrap_or_default()
            .to_string();
        let date =
            NaiveDate::parse_from_str(&raw_date, date_format).map_err(|e| Error::ParseRow {
                row,
                message: format!("unparseable date {raw_date:?}: {e}"),
            })?;
        let raw_value = record.get(value_idx).map(str::trim).unwrap_or_default();
        let value: f64 = raw_value.parse().map_err(|e| Error::ParseRow {
            row,
            message: format!("unparseable value {raw_value:?}: {e}"),
        })?;
        if !value.is_finite() {
            return Err(Error::ParseRow {
                row,
                message: format!("non-finite value {raw_value:?}"),
            });
        }
        if let Some(&previous) = rows.get(&date) {
            if previous != value {
                return Err(Error::DuplicateDate {
                    date,
                    first: previous,
                    second: value,
                });
            }
        } else {
            rows.insert(date, value);
        }
    }

    let (&first, _) = rows.first_key_value().ok_or(Error::EmptyTable)?;
    let (&last, _) = rows.last_key_value().expect("nonempty map");
    let n = (last - first).num_days() as usize + 1;
    let mut values = vec![0.0; n];
    let mut missing = vec![true; n];
    for (date, value) in rows {
        let i = (date - first).num_days() as usize;
        values[i] = value;
        missing[i] = false;
    }
    TimeSeries::new(first, values, missing, ValueUnit::Count)
}

/// Per-year population with a fallback used when no year matches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PopulationTable {
    entries: BTreeMap<i32, u64>,
    fallback: u64,
}

impl PopulationTable {
    pub fn new(entries: BTreeMap<i32, u64>, fallback: u64) -> Result<Self> {
        if fallback == 0 || entries.values().any(|&p| p == 0) {
            return Err(Error::InvalidParameter(
                "population counts must be positive".into(),
            ));
        }
        Ok(Self { entries, fallback })
    }

    /// Single figure applied to every year.
    pub fn scalar(population: u64) -> Result<Self> {
        Self::new(BTreeMap::new(), population)
    }

    pub fn population_for(&self, year: i32) -> u64 {
        self.entries.get(&year).copied().unwrap_or(self.fallback)
    }

    /// Parse a `year,population` CSV. A row with year `*` sets the fallback;
    /// otherwise the latest listed year becomes the fallback.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let year_idx = headers
            .iter()
            .position(|h| h == "year")
            .ok_or_else(|| Error::MissingColumn("year".into()))?;
        let pop_idx = headers
            .iter()
            .position(|h| h == "population")
            .ok_or_else(|| Error::MissingColumn("population".into()))?;

        let mut entries = BTreeMap::new();
        let mut fallback = None;
        for record in reader.records() {
            let record = record?;
            let row = record.position().map(|p| p.line()).unwrap_or(0);
            let pop: u64 =
                record[pop_idx]
                    .trim()
                    .parse()
                    .map_err(|e| Error::ParseRow {
                        row,
                        message: format!("unparseable population {:?}: {e}", &record[pop_idx]),
                    })?;
            let raw_year = record[year_idx].trim();
            if raw_year == "*" {
                fallback = Some(pop);
            } else {
                let year: i32 = raw_year.parse().map_err(|e| Error::ParseRow {
                    row,
                    message: format!("unparseable year {raw_year:?}: {e}"),
                })?;
                entries.insert(year, pop);
            }
        }
        let fallback = fallback
            .or_else(|| entries.last_key_value().map(|(_, &p)| p))
            .ok_or(Error::EmptyTable)?;
        Self::new(entries, fallback)
    }
}

/// Convert a count series to a rate per 1000 by calendar year of each entry.
pub fn to_rate(series: &TimeSeries, population: &PopulationTable) -> Result<TimeSeries> {
    if series.unit() != ValueUnit::Count {
        return Err(Error::InvalidParameter(
            "to_rate requires a count series".into(),
        ));
    }
    let values = (0..series.len())
        .map(|i| {
            if series.is_missing(i) {
                series.values()[i]
            } else {
                let year = series.date_at(i).year();
                series.values()[i] / population.population_for(year) as f64 * 1000.0
            }
        })
        .collect();
    series.with_values(values, ValueUnit::RatePerThousand)
}

/// One cosine term of a synthetic periodically correlated series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthComponent {
    /// Period in days (>= 2, need not be integer).
    pub period: f64,
    pub amplitude: f64,
    /// Phase offset in radians.
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    White,
    /// AR(1) noise with the given coefficient; `noise_sd` is the stationary
    /// marginal standard deviation.
    Ar1 { coefficient: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    pub n: usize,
    pub components: Vec<SynthComponent>,
    pub noise_sd: f64,
    pub noise_kind: NoiseKind,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter("synthetic n must be >= 2".into()));
        }
        if self.components.iter().any(|c| c.period < 2.0) {
            return Err(Error::InvalidParameter(
                "component periods must be >= 2 days".into(),
            ));
        }
        if self.noise_sd.is_nan() || self.noise_sd < 0.0 {
            return Err(Error::InvalidParameter(
                "noise standard deviation must be >= 0".into(),
            ));
        }
        if let NoiseKind::Ar1 { coefficient } = self.noise_kind {
            if !coefficient.is_finite() || coefficient.abs() >= 1.0 {
                return Err(Error::InvalidParameter(
                    "AR(1) coefficient must lie in (-1, 1)".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Exact noiseless per-phase mean of one component, the oracle truth for
/// coverage tests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentTruth {
    pub period: f64,
    /// Rounded period used as the bootstrap phase count.
    pub bootstrap_period: usize,
    pub phase_means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedSeries {
    pub series: TimeSeries,
    pub truth: Vec<ComponentTruth>,
}

/// Anchor date used for synthetic series; any fixed date works since phases
/// are anchored to the series start.
pub const SYNTH_ANCHOR: &str = "2020-01-01";

/// Generate `X(t) = sum_j A_j cos(2 pi t / p_j + phi_j) + eps(t)`, together
/// with the exact noiseless periodic mean of each component. Deterministic
/// in `seed`.
pub fn synth_series(spec: &SynthSpec, seed: u64) -> Result<SynthesizedSeries> {
    spec.validate()?;
    let n = spec.n;
    let start = SYNTH_ANCHOR.parse::<NaiveDate>().expect("fixed date");

    let mut values = vec![0.0; n];
    for component in &spec.components {
        let omega = std::f64::consts::TAU / component.period;
        for (t, v) in values.iter_mut().enumerate() {
            *v += component.amplitude * (omega * t as f64 + component.phase).cos();
        }
    }

    if spec.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match spec.noise_kind {
            NoiseKind::White => {
                let normal = Normal::new(0.0, spec.noise_sd).expect("validated sd");
                for v in values.iter_mut() {
                    *v += normal.sample(&mut rng);
                }
            }
            NoiseKind::Ar1 { coefficient } => {
                let innovation_sd = spec.noise_sd * (1.0 - coefficient * coefficient).sqrt();
                let marginal = Normal::new(0.0, spec.noise_sd).expect("validated sd");
                let innovation = Normal::new(0.0, innovation_sd).expect("validated sd");
                let mut e = marginal.sample(&mut rng);
                values[0] += e;
                for v in values.iter_mut().skip(1) {
                    e = coefficient * e + innovation.sample(&mut rng);
                    *v += e;
                }
            }
        }
    }

    let truth = spec
        .components
        .iter()
        .map(|component| {
            let d = component.period.round() as usize;
            let omega = std::f64::consts::TAU / component.period;
            let mut sums = vec![0.0; d];
            let mut counts = vec![0usize; d];
            for t in 0..n {
                let phase = t % d;
                sums[phase] += component.amplitude * (omega * t as f64 + component.phase).cos();
                counts[phase] += 1;
            }
            let phase_means = sums
                .iter()
                .zip(&counts)
                .map(|(&s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
                .collect();
            ComponentTruth {
                period: component.period,
                bootstrap_period: d,
                phase_means,
            }
        })
        .collect();

    Ok(SynthesizedSeries {
        series: TimeSeries::from_values(start, values, ValueUnit::Dimensionless)?,
        truth,
    })
}
