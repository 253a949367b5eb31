//! Block-bootstrap engines for periodically correlated series: GSBB over the
//! raw series and the phase-aligned period-block bootstrap (PBB) used on
//! filtered components, plus periodic-mean extraction, percentile band
//! construction, and zero-exclusion significance.
//!
//! Determinism contract: one master seed; replicate `j` draws from an
//! independent ChaCha stream selected by `j`, so the result is identical
//! regardless of how the replicate loop is scheduled.

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Which resampling engine a band came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapMethod {
    Gsbb,
    Pbb,
}

/// Resampling parameters. For PBB the block length always equals the period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub method: BootstrapMethod,
    /// Period d in days.
    pub period: usize,
    /// Block length b in days.
    pub block_length: usize,
    /// Replicate count B.
    pub replicates: usize,
    pub master_seed: u64,
}

impl BootstrapConfig {
    pub fn gsbb(period: usize, block_length: usize, replicates: usize, master_seed: u64) -> Self {
        Self {
            method: BootstrapMethod::Gsbb,
            period,
            block_length,
            replicates,
            master_seed,
        }
    }

    pub fn pbb(period: usize, replicates: usize, master_seed: u64) -> Self {
        Self {
            method: BootstrapMethod::Pbb,
            period,
            block_length: period,
            replicates,
            master_seed,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.period == 0 {
            return Err(Error::InvalidParameter("period must be >= 1".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter(
                "replicate count must be >= 1".into(),
            ));
        }
        match self.method {
            BootstrapMethod::Gsbb => {
                if self.block_length == 0 || self.block_length > n {
                    return Err(Error::InvalidParameter(format!(
                        "block length must lie in [1, {n}], got {}",
                        self.block_length
                    )));
                }
                validate_gsbb_candidates(n, self.period, self.block_length)
            }
            BootstrapMethod::Pbb => {
                if self.period > n {
                    return Err(Error::InvalidParameter(format!(
                        "period {} exceeds series length {n}",
                        self.period
                    )));
                }
                Ok(())
            }
        }
    }
}

/// RNG for replicate `j`: a fixed-seed ChaCha cipher on its own stream, the
/// counter-based split that keeps parallel scheduling out of the results.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// Number of admissible source starts for a GSBB block at target `t`:
/// positions `u <= n - b` with `u = t (mod d)`.
fn gsbb_candidate_count(n: usize, d: usize, b: usize, t: usize) -> usize {
    let t0 = t % d;
    if t0 > n - b {
        0
    } else {
        (n - b - t0) / d + 1
    }
}

fn validate_gsbb_candidates(n: usize, d: usize, b: usize) -> Result<()> {
    for t in (0..n).step_by(b) {
        if gsbb_candidate_count(n, d, b, t) == 0 {
            return Err(Error::NoCandidateBlocks {
                target: t % d,
                period: d,
                max_start: n - b,
            });
        }
    }
    Ok(())
}

/// One GSBB resample: each target block `[t, t+b)` copies from a source
/// start drawn uniformly from the positions congruent to `t` mod `d`,
/// truncating the final block at the series end.
pub fn gsbb_resample(
    series: &TimeSeries,
    period: usize,
    block_length: usize,
    rng: &mut impl Rng,
) -> Result<TimeSeries> {
    let n = series.len();
    let (d, b) = (period, block_length);
    if d == 0 || b == 0 || b > n {
        return Err(Error::InvalidParameter(format!(
            "GSBB requires 1 <= b <= n and d >= 1, got d={d}, b={b}, n={n}"
        )));
    }
    let mut values = Vec::with_capacity(n);
    let mut missing = Vec::with_capacity(n);
    for t in (0..n).step_by(b) {
        let count = gsbb_candidate_count(n, d, b, t);
        if count == 0 {
            return Err(Error::NoCandidateBlocks {
                target: t % d,
                period: d,
                max_start: n - b,
            });
        }
        let s = t % d + d * rng.random_range(0..count);
        let len = b.min(n - t);
        values.extend_from_slice(&series.values()[s..s + len]);
        missing.extend_from_slice(&series.missing()[s..s + len]);
    }
    TimeSeries::new(series.start_date(), values, missing, series.unit())
}

/// One period-block (PBB) resample: whole phase-aligned cycles drawn with
/// replacement from the full cycles of the input, the last draw truncated
/// to the remainder length.
pub fn pbb_resample(
    series: &TimeSeries,
    period: usize,
    rng: &mut impl Rng,
) -> Result<TimeSeries> {
    let n = series.len();
    let d = period;
    if d == 0 || d > n {
        return Err(Error::InvalidParameter(format!(
            "PBB requires 1 <= d <= n, got d={d}, n={n}"
        )));
    }
    let full_cycles = n / d;
    let remainder = n % d;
    let draws = full_cycles + usize::from(remainder > 0);
    let mut values = Vec::with_capacity(n);
    let mut missing = Vec::with_capacity(n);
    for i in 0..draws {
        let cycle = rng.random_range(0..full_cycles);
        let src = cycle * d;
        let len = if i < full_cycles { d } else { remainder };
        values.extend_from_slice(&series.values()[src..src + len]);
        missing.extend_from_slice(&series.missing()[src..src + len]);
    }
    TimeSeries::new(series.start_date(), values, missing, series.unit())
}

/// Per-phase means with an explicit mask for phases that had no data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseVector {
    pub period: usize,
    /// Mean per phase; `NaN` where `missing` is set.
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

/// Mean of the non-missing values at each residue class mod `period`.
pub fn periodic_mean(series: &TimeSeries, period: usize) -> Result<PhaseVector> {
    if period == 0 {
        return Err(Error::InvalidParameter("period must be >= 1".into()));
    }
    let mut sums = vec![0.0; period];
    let mut counts = vec![0usize; period];
    for t in 0..series.len() {
        if let Some(v) = series.value_at(t) {
            sums[t % period] += v;
            counts[t % period] += 1;
        }
    }
    let mut values = Vec::with_capacity(period);
    let mut missing = Vec::with_capacity(period);
    for (s, c) in sums.iter().zip(&counts) {
        if *c == 0 {
            values.push(f64::NAN);
            missing.push(true);
        } else {
            values.push(s / *c as f64);
            missing.push(false);
        }
    }
    Ok(PhaseVector {
        period,
        values,
        missing,
    })
}

/// Linear interpolation between order statistics (the R type-7 rule).
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let i = h.floor() as usize;
    if i + 1 >= sorted.len() {
        sorted[sorted.len() - 1]
    } else {
        sorted[i] + (h - i as f64) * (sorted[i + 1] - sorted[i])
    }
}

/// Per-phase point estimate with its 2.5%/97.5% bootstrap quantile band.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandEstimate {
    pub method: BootstrapMethod,
    pub period: usize,
    /// Calendar date of phase 0.
    pub anchor_date: NaiveDate,
    pub replicates: usize,
    /// Periodic mean of the input series.
    pub point: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Phases with no usable data in the input or in any replicate.
    pub missing: Vec<bool>,
}

impl BandEstimate {
    /// First calendar date at the given phase.
    pub fn date_of_phase(&self, phase: usize) -> NaiveDate {
        self.anchor_date + Days::new(phase as u64)
    }

    /// Mean of `upper - lower` over non-missing phases.
    pub fn mean_width(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for phase in 0..self.period {
            if !self.missing[phase] {
                sum += self.upper[phase] - self.lower[phase];
                count += 1;
            }
        }
        (count > 0).then(|| sum / count as f64)
    }

    pub fn is_complete(&self) -> bool {
        self.missing.iter().all(|&m| !m)
    }

    /// CSV export with columns `phase,date_of_first_occurrence,point,lower,upper`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,date_of_first_occurrence,point,lower,upper\n");
        for phase in 0..self.period {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                phase,
                self.date_of_phase(phase),
                self.point[phase],
                self.lower[phase],
                self.upper[phase]
            ));
        }
        out
    }
}

/// A band plus the per-replicate periodic means it was built from, kept so
/// significant components can later be combined replicate-by-replicate.
#[derive(Debug, Clone)]
pub struct BootstrapRun {
    pub band: BandEstimate,
    pub replicate_means: Vec<PhaseVector>,
}

/// Run the configured bootstrap and keep the replicate periodic means.
pub fn bootstrap_band_detailed(
    series: &TimeSeries,
    config: &BootstrapConfig,
) -> Result<BootstrapRun> {
    let n = series.len();
    config.validate(n)?;
    let d = config.period;
    let point = periodic_mean(series, d)?;

    let replicate_means: Vec<PhaseVector> = (0..config.replicates)
        .into_par_iter()
        .map(|j| {
            let mut rng = replicate_rng(config.master_seed, j as u64);
            let resample = match config.method {
                BootstrapMethod::Gsbb => {
                    gsbb_resample(series, d, config.block_length, &mut rng)?
                }
                BootstrapMethod::Pbb => pbb_resample(series, d, &mut rng)?,
            };
            periodic_mean(&resample, d)
        })
        .collect::<Result<_>>()?;

    let mut lower = Vec::with_capacity(d);
    let mut upper = Vec::with_capacity(d);
    let mut missing = Vec::with_capacity(d);
    let mut column = Vec::with_capacity(config.replicates);
    for phase in 0..d {
        column.clear();
        for replicate in &replicate_means {
            if !replicate.missing[phase] {
                column.push(replicate.values[phase]);
            }
        }
        if column.is_empty() || point.missing[phase] {
            lower.push(f64::NAN);
            upper.push(f64::NAN);
            missing.push(true);
        } else {
            column.sort_by(f64::total_cmp);
            lower.push(quantile_sorted(&column, 0.025));
            upper.push(quantile_sorted(&column, 0.975));
            missing.push(false);
        }
    }

    Ok(BootstrapRun {
        band: BandEstimate {
            method: config.method,
            period: d,
            anchor_date: series.start_date(),
            replicates: config.replicates,
            point: point.values,
            lower,
            upper,
            missing,
        },
        replicate_means,
    })
}

/// Run the configured bootstrap, keeping only the band.
pub fn bootstrap_band(series: &TimeSeries, config: &BootstrapConfig) -> Result<BandEstimate> {
    Ok(bootstrap_band_detailed(series, config)?.band)
}

/// Zero-exclusion classification of a band.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Significance {
    /// True when at least one phase interval excludes zero.
    pub significant: bool,
    pub excluding_phases: Vec<usize>,
}

/// A phase excludes zero iff `lower > 0` or `upper < 0`; the band is
/// significant iff at least one phase excludes zero.
pub fn significance_classify(band: &BandEstimate) -> Significance {
    let excluding_phases: Vec<usize> = (0..band.period)
        .filter(|&phase| {
            !band.missing[phase] && (band.lower[phase] > 0.0 || band.upper[phase] < 0.0)
        })
        .collect();
    Significance {
        significant: !excluding_phases.is_empty(),
        excluding_phases,
    }
}
