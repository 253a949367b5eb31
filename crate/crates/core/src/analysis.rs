//! End-to-end pipelines: bandpass-isolate each periodic component and
//! bootstrap it (VBPBB), the unfiltered GSBB baseline, component
//! combination, variance attribution, and band-width comparison.

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::resample::{
    bootstrap_band, bootstrap_band_detailed, quantile_sorted, significance_classify,
    BandEstimate, BootstrapConfig, BootstrapMethod, PhaseVector, Significance,
};
use crate::series::{TimeSeries, ValueUnit};
use crate::spectral::{bandpass_component, kzft_apply, EdgePolicy, KzftConfig};

/// One periodic component to isolate and bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSpec {
    pub label: String,
    /// Center frequency in cycles/day.
    pub frequency: f64,
    /// Bootstrap period d in days, `round(1/frequency)` unless overridden.
    pub period: usize,
    pub filter: KzftConfig,
}

/// Specs for harmonics h = 1..=harmonics of a base period: frequency
/// h/base, period round(base/h), filter window `2*base + 1`, k = 1.
pub fn default_component_set(base_period: usize, harmonics: usize) -> Result<Vec<ComponentSpec>> {
    component_set(
        base_period,
        harmonics,
        2 * base_period + 1,
        EdgePolicy::Renormalize,
    )
}

/// Same construction with an explicit filter window and edge policy.
pub fn component_set(
    base_period: usize,
    harmonics: usize,
    window: usize,
    edge_policy: EdgePolicy,
) -> Result<Vec<ComponentSpec>> {
    if base_period < 2 {
        return Err(Error::InvalidParameter("base period must be >= 2".into()));
    }
    if harmonics == 0 {
        return Err(Error::InvalidParameter(
            "harmonic count must be >= 1".into(),
        ));
    }
    (1..=harmonics)
        .map(|h| {
            let frequency = h as f64 / base_period as f64;
            // Round half away from zero: 365/2 -> 183.
            let period = (base_period as f64 / h as f64).round() as usize;
            let filter = KzftConfig::new(window, 1, frequency)?.with_edge_policy(edge_policy);
            Ok(ComponentSpec {
                label: format!("h{h}_p{period}"),
                frequency,
                period,
                filter,
            })
        })
        .collect()
}

/// GSBB baseline attached to a component for width comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineComparison {
    pub band: BandEstimate,
    pub significance: Significance,
    /// Mean GSBB width over mean treatment width; `None` when the treatment
    /// band has zero width (infinite ratio).
    pub width_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentResult {
    pub spec: ComponentSpec,
    pub band: BandEstimate,
    pub significance: Significance,
    /// Squared correlation with the original series over the filter core.
    pub r_squared: f64,
    pub baseline: Option<BaselineComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub base_period: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub missing_values: usize,
    pub components: Vec<ComponentResult>,
    /// Present only when at least one component is significant.
    pub combined: Option<BandEstimate>,
    /// R-squared of the summed significant components against the original.
    pub aggregate_r_squared: Option<f64>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV of every band in the report:
    /// `method,component,period,phase,date_of_first_occurrence,point,lower,upper`.
    pub fn bands_csv(&self) -> String {
        let mut out =
            String::from("method,component,period,phase,date_of_first_occurrence,point,lower,upper\n");
        let mut push_band = |method: &str, component: &str, band: &BandEstimate| {
            for phase in 0..band.period {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    method,
                    component,
                    band.period,
                    phase,
                    band.date_of_phase(phase),
                    band.point[phase],
                    band.lower[phase],
                    band.upper[phase]
                ));
            }
        };
        for component in &self.components {
            push_band("vbpbb", &component.spec.label, &component.band);
            if let Some(baseline) = &component.baseline {
                push_band("gsbb", &component.spec.label, &baseline.band);
            }
        }
        if let Some(combined) = &self.combined {
            push_band("vbpbb", "combined", combined);
        }
        out
    }
}

/// How the combined band over the significant set is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CombineMode {
    /// Sum per-replicate component periodic means (independent component
    /// streams). The default.
    ReplicateSum,
    /// Single PBB over the pointwise-summed component series; offered for
    /// sensitivity analysis.
    SummedSeries,
}

/// Per-replicate periodic means of one component, the input to
/// [`combine_components`].
#[derive(Debug, Clone)]
pub struct ComponentResamples {
    pub label: String,
    pub period: usize,
    pub point: PhaseVector,
    pub replicate_means: Vec<PhaseVector>,
}

/// Sum component periodic means replicate-by-replicate over a base period:
/// day `tau` of replicate `j` adds each component at phase `tau mod d_c`;
/// quantiles over `j` give the combined band.
pub fn combine_components(
    parts: &[ComponentResamples],
    base_period: usize,
    anchor_date: NaiveDate,
) -> Result<BandEstimate> {
    if parts.is_empty() {
        return Err(Error::InvalidParameter(
            "combine_components requires at least one component".into(),
        ));
    }
    if base_period == 0 {
        return Err(Error::InvalidParameter("base period must be >= 1".into()));
    }
    let replicates = parts[0].replicate_means.len();
    for part in parts {
        if part.replicate_means.len() != replicates {
            return Err(Error::ReplicateMismatch(
                replicates,
                part.replicate_means.len(),
            ));
        }
    }

    let map_sum = |vectors: &[&PhaseVector], tau: usize| -> Option<f64> {
        let mut sum = 0.0;
        for v in vectors {
            let phase = tau % v.period;
            if v.missing[phase] {
                return None;
            }
            sum += v.values[phase];
        }
        Some(sum)
    };

    let points: Vec<&PhaseVector> = parts.iter().map(|p| &p.point).collect();
    let mut point = Vec::with_capacity(base_period);
    let mut lower = Vec::with_capacity(base_period);
    let mut upper = Vec::with_capacity(base_period);
    let mut missing = Vec::with_capacity(base_period);
    let mut column = Vec::with_capacity(replicates);
    for tau in 0..base_period {
        let point_value = map_sum(&points, tau);
        column.clear();
        for j in 0..replicates {
            let vectors: Vec<&PhaseVector> =
                parts.iter().map(|p| &p.replicate_means[j]).collect();
            if let Some(sum) = map_sum(&vectors, tau) {
                column.push(sum);
            }
        }
        match (point_value, column.is_empty()) {
            (Some(p), false) => {
                column.sort_by(f64::total_cmp);
                point.push(p);
                lower.push(quantile_sorted(&column, 0.025));
                upper.push(quantile_sorted(&column, 0.975));
                missing.push(false);
            }
            _ => {
                point.push(f64::NAN);
                lower.push(f64::NAN);
                upper.push(f64::NAN);
                missing.push(true);
            }
        }
    }

    Ok(BandEstimate {
        method: BootstrapMethod::Pbb,
        period: base_period,
        anchor_date,
        replicates,
        point,
        lower,
        upper,
        missing,
    })
}

/// Squared sample correlation between two series over their joint
/// non-missing indices.
pub fn r_squared(component: &TimeSeries, original: &TimeSeries) -> Result<f64> {
    if component.len() != original.len() {
        return Err(Error::InvalidParameter(format!(
            "series lengths differ: {} vs {}",
            component.len(),
            original.len()
        )));
    }
    r_squared_over(component, original, 0..component.len())
}

fn r_squared_over(
    component: &TimeSeries,
    original: &TimeSeries,
    range: std::ops::Range<usize>,
) -> Result<f64> {
    let pairs: Vec<(f64, f64)> = range
        .filter_map(|i| match (component.value_at(i), original.value_at(i)) {
            (Some(x), Some(y)) => Some((x, y)),
            _ => None,
        })
        .collect();
    if pairs.len() < 2 {
        return Err(Error::InvalidParameter(
            "r_squared requires at least 2 joint non-missing points".into(),
        ));
    }
    let n = pairs.len() as f64;
    let mean_x = pairs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = pairs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in &pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 {
        return Err(Error::ZeroVariance("component"));
    }
    if var_y == 0.0 {
        return Err(Error::ZeroVariance("original"));
    }
    Ok((cov * cov) / (var_x * var_y))
}

/// Mean baseline band width divided by mean treatment band width.
pub fn width_ratio(baseline: &BandEstimate, treatment: &BandEstimate) -> Result<f64> {
    if baseline.period != treatment.period {
        return Err(Error::InvalidParameter(format!(
            "band periods differ: {} vs {}",
            baseline.period, treatment.period
        )));
    }
    if !baseline.is_complete() || !treatment.is_complete() {
        return Err(Error::InvalidParameter(
            "width ratio requires complete bands".into(),
        ));
    }
    let baseline_width = baseline.mean_width().expect("complete band");
    let treatment_width = treatment.mean_width().expect("complete band");
    if treatment_width == 0.0 {
        return Err(Error::ZeroWidthBand);
    }
    Ok(baseline_width / treatment_width)
}

// Seed-derivation domains, so VBPBB components, GSBB baselines, and the
// summed-series combination draw from unrelated streams.
const DOMAIN_VBPBB: u64 = 1;
const DOMAIN_GSBB: u64 = 2;
const DOMAIN_COMBINE: u64 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic seed for a tagged sub-stream of the master seed.
pub fn derive_seed(master_seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed ^ splitmix64(domain)) ^ splitmix64(index))
}

/// Seed used for the GSBB baseline of component `index`, shared by
/// [`compare_pipelines`] and standalone baseline runs so the two agree.
pub fn baseline_seed(master_seed: u64, index: u64) -> u64 {
    derive_seed(master_seed, DOMAIN_GSBB, index)
}

struct ComponentRun {
    result: ComponentResult,
    component: TimeSeries,
    core: std::ops::Range<usize>,
    resamples: ComponentResamples,
}

fn run_component(
    series: &TimeSeries,
    spec: &ComponentSpec,
    replicates: usize,
    seed: u64,
) -> Result<ComponentRun> {
    let filtered = kzft_apply(series, &spec.filter)?;
    if filtered.valid_core.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "filter span {} exceeds the series length {}; no fully supported samples",
            spec.filter.span(),
            series.len()
        )));
    }
    let component = bandpass_component(&filtered);
    let run = bootstrap_band_detailed(
        &component,
        &BootstrapConfig::pbb(spec.period, replicates, seed),
    )?;
    let significance = significance_classify(&run.band);
    // R-squared on the fully supported core, where the reconstruction is
    // free of renormalized-edge attenuation.
    let r_squared = r_squared_over(&component, series, filtered.valid_core.clone())?;
    let point = crate::resample::periodic_mean(&component, spec.period)?;
    Ok(ComponentRun {
        result: ComponentResult {
            spec: spec.clone(),
            band: run.band,
            significance,
            r_squared,
            baseline: None,
        },
        component,
        core: filtered.valid_core,
        resamples: ComponentResamples {
            label: spec.label.clone(),
            period: spec.period,
            point,
            replicate_means: run.replicate_means,
        },
    })
}

/// Pointwise sum of component series; an index is missing when any input is.
fn sum_series(parts: &[&TimeSeries]) -> Result<TimeSeries> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidParameter("no series to sum".into()))?;
    let n = first.len();
    let mut values = vec![0.0; n];
    let mut missing = vec![false; n];
    for part in parts {
        if part.len() != n {
            return Err(Error::InvalidParameter(
                "component series lengths differ".into(),
            ));
        }
        for i in 0..n {
            missing[i] |= part.is_missing(i);
            values[i] += part.values()[i];
        }
    }
    TimeSeries::new(first.start_date(), values, missing, ValueUnit::Dimensionless)
}

/// Filter each component, bootstrap it with PBB, classify significance, and
/// combine the significant set. Deterministic in `master_seed`.
pub fn vbpbb_pipeline(
    series: &TimeSeries,
    specs: &[ComponentSpec],
    replicates: usize,
    master_seed: u64,
) -> Result<AnalysisReport> {
    vbpbb_pipeline_with(series, specs, replicates, master_seed, CombineMode::ReplicateSum)
}

/// [`vbpbb_pipeline`] with an explicit combination mode.
pub fn vbpbb_pipeline_with(
    series: &TimeSeries,
    specs: &[ComponentSpec],
    replicates: usize,
    master_seed: u64,
    combine_mode: CombineMode,
) -> Result<AnalysisReport> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one component spec is required".into(),
        ));
    }
    let runs: Vec<ComponentRun> = specs
        .iter()
        .enumerate()
        .map(|(c, spec)| {
            run_component(
                series,
                spec,
                replicates,
                derive_seed(master_seed, DOMAIN_VBPBB, c as u64),
            )
        })
        .collect::<Result<_>>()?;

    let significant: Vec<&ComponentRun> = runs
        .iter()
        .filter(|run| run.result.significance.significant)
        .collect();

    let (combined, aggregate_r_squared) = if significant.is_empty() {
        (None, None)
    } else {
        let base_period = significant
            .iter()
            .map(|run| run.resamples.period)
            .max()
            .expect("nonempty");
        let combined = match combine_mode {
            CombineMode::ReplicateSum => {
                let parts: Vec<ComponentResamples> = significant
                    .iter()
                    .map(|run| run.resamples.clone())
                    .collect();
                combine_components(&parts, base_period, series.start_date())?
            }
            CombineMode::SummedSeries => {
                let parts: Vec<&TimeSeries> =
                    significant.iter().map(|run| &run.component).collect();
                let summed = sum_series(&parts)?;
                bootstrap_band(
                    &summed,
                    &BootstrapConfig::pbb(
                        base_period,
                        replicates,
                        derive_seed(master_seed, DOMAIN_COMBINE, 0),
                    ),
                )?
            }
        };
        // Aggregate R-squared of the summed significant components over the
        // intersection of their cores.
        let parts: Vec<&TimeSeries> = significant.iter().map(|run| &run.component).collect();
        let summed = sum_series(&parts)?;
        let core_start = significant.iter().map(|r| r.core.start).max().expect("nonempty");
        let core_end = significant.iter().map(|r| r.core.end).min().expect("nonempty");
        let aggregate = r_squared_over(&summed, series, core_start..core_end)?;
        (Some(combined), Some(aggregate))
    };

    Ok(AnalysisReport {
        base_period: specs.iter().map(|s| s.period).max().expect("nonempty"),
        replicates,
        master_seed,
        missing_values: series.missing_count(),
        components: runs.into_iter().map(|run| run.result).collect(),
        combined,
        aggregate_r_squared,
    })
}

/// GSBB band and significance for the series centered at its grand mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GsbbOutcome {
    pub band: BandEstimate,
    pub significance: Significance,
    /// Offset removed before resampling; bands are deviations from it.
    pub grand_mean: f64,
}

/// Bootstrap the unfiltered series with GSBB at the given period. The series
/// is centered at its grand mean first so the zero-exclusion rule tests
/// deviation from the average level.
pub fn gsbb_pipeline(
    series: &TimeSeries,
    period: usize,
    block_length: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<GsbbOutcome> {
    let grand_mean = series.mean().ok_or(Error::AllMissing)?;
    let centered = series.shifted(-grand_mean);
    let band = bootstrap_band(
        &centered,
        &BootstrapConfig::gsbb(period, block_length, replicates, master_seed),
    )?;
    let significance = significance_classify(&band);
    Ok(GsbbOutcome {
        band,
        significance,
        grand_mean,
    })
}

/// Run the VBPBB pipeline and a GSBB baseline per component, filling the
/// width-ratio table. `block_length` of `None` uses each component's period.
pub fn compare_pipelines(
    series: &TimeSeries,
    specs: &[ComponentSpec],
    replicates: usize,
    master_seed: u64,
    block_length: Option<usize>,
    combine_mode: CombineMode,
) -> Result<AnalysisReport> {
    let mut report = vbpbb_pipeline_with(series, specs, replicates, master_seed, combine_mode)?;
    for (c, component) in report.components.iter_mut().enumerate() {
        let b = block_length.unwrap_or(component.spec.period);
        let outcome = gsbb_pipeline(
            series,
            component.spec.period,
            b,
            replicates,
            baseline_seed(master_seed, c as u64),
        )?;
        let ratio = match width_ratio(&outcome.band, &component.band) {
            Ok(value) => Some(value),
            Err(Error::ZeroWidthBand) => None,
            Err(other) => return Err(other),
        };
        component.baseline = Some(BaselineComparison {
            band: outcome.band,
            significance: outcome.significance,
            width_ratio: ratio,
        });
    }
    Ok(report)
}
