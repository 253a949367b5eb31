//! Iterated moving-average bandpass filtering (KZFT) and periodogram
//! computation for locating periodically correlated components.
//!
//! The filter demodulates by absolute time — `e^{-i 2 pi nu (t+s)}` inside
//! the windowed sum — so the real reconstruction is
//! `2 Re(z_t e^{i 2 pi nu t})` for `nu` in (0, 0.5); this is the single
//! convention used everywhere in the crate, because mixing demodulation
//! conventions silently shifts phase.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{TimeSeries, ValueUnit};

/// How to treat windows that extend beyond the series or cover missing values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgePolicy {
    /// Rescale the weights over the present values so they sum to 1.
    Renormalize,
    /// Flag any index whose window is incomplete as missing.
    Strict,
}

/// KZFT filter parameters: window length `m` (odd), iteration count `k`,
/// and center frequency `nu` in cycles/day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KzftConfig {
    m: usize,
    k: usize,
    nu: f64,
    edge_policy: EdgePolicy,
    /// Total filter span `k(m-1)+1`, derived.
    span: usize,
}

impl KzftConfig {
    pub fn new(m: usize, k: usize, nu: f64) -> Result<Self> {
        if m == 0 || m.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "window length m must be a positive odd integer, got {m}"
            )));
        }
        if k == 0 {
            return Err(Error::InvalidParameter(
                "iteration count k must be >= 1".into(),
            ));
        }
        if !(0.0..=0.5).contains(&nu) {
            return Err(Error::InvalidParameter(format!(
                "center frequency nu must lie in [0, 0.5] cycles/day, got {nu}"
            )));
        }
        let span = checked_span(m, k)?;
        Ok(Self {
            m,
            k,
            nu,
            edge_policy: EdgePolicy::Renormalize,
            span,
        })
    }

    pub fn with_edge_policy(mut self, edge_policy: EdgePolicy) -> Self {
        self.edge_policy = edge_policy;
        self
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn edge_policy(&self) -> EdgePolicy {
        self.edge_policy
    }

    /// `k(m-1) + 1`, the number of taps.
    pub fn span(&self) -> usize {
        self.span
    }

    pub fn half_span(&self) -> usize {
        self.span / 2
    }
}

fn checked_span(m: usize, k: usize) -> Result<usize> {
    k.checked_mul(m - 1)
        .and_then(|s| s.checked_add(1))
        .ok_or_else(|| {
            Error::InvalidParameter(format!("filter span k(m-1)+1 overflows for m={m}, k={k}"))
        })
}

/// Coefficients of the k-fold self-convolution of the uniform kernel of
/// length m: symmetric, strictly positive, summing to 1.
pub fn kzft_coefficients(m: usize, k: usize) -> Result<Vec<f64>> {
    checked_span(m, k)?;
    if m.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "window length m must be odd, got {m}"
        )));
    }
    let uniform = vec![1.0 / m as f64; m];
    let mut weights = uniform.clone();
    for _ in 1..k {
        let mut next = vec![0.0; weights.len() + m - 1];
        for (i, &w) in weights.iter().enumerate() {
            for (j, &u) in uniform.iter().enumerate() {
                next[i + j] += w * u;
            }
        }
        weights = next;
    }
    Ok(weights)
}

/// Complex demodulated output of one KZFT pass plus its real bandpass
/// reconstruction.
#[derive(Debug, Clone)]
pub struct FilterResult {
    pub complex: Vec<Complex64>,
    pub bandpass: Vec<f64>,
    pub missing: Vec<bool>,
    /// Index range fully covered by the filter span; empty when the span
    /// exceeds the series length.
    pub valid_core: std::ops::Range<usize>,
    pub config: KzftConfig,
    pub start_date: chrono::NaiveDate,
}

impl FilterResult {
    /// CSV export with columns `date,re,im,bandpass,missing`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,re,im,bandpass,missing\n");
        for (i, z) in self.complex.iter().enumerate() {
            let date = self.start_date + chrono::Days::new(i as u64);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                date,
                z.re,
                z.im,
                self.bandpass[i],
                u8::from(self.missing[i])
            ));
        }
        out
    }
}

/// Real reconstruction factor: the Nyquist and zero bins have no conjugate
/// image, so only interior frequencies double.
fn reconstruction_factor(nu: f64) -> f64 {
    if nu > 0.0 && nu < 0.5 {
        2.0
    } else {
        1.0
    }
}

/// Apply the KZFT to a series.
///
/// `complex[t] = sum_s w_s X(t+s) e^{-i 2 pi nu (t+s)}` over the centered
/// span, excluding out-of-range and missing indices. Under
/// [`EdgePolicy::Renormalize`] the remaining weights are rescaled to sum
/// to 1; under [`EdgePolicy::Strict`] incomplete windows are flagged
/// missing.
pub fn kzft_apply(series: &TimeSeries, config: &KzftConfig) -> Result<FilterResult> {
    let n = series.len();
    let weights = kzft_coefficients(config.m, config.k)?;
    let span = config.span();
    let half = config.half_span();

    // Demodulated inputs y[u] = X(u) e^{-i 2 pi nu u}, precomputed once.
    let tau_nu = std::f64::consts::TAU * config.nu;
    let demod: Vec<Complex64> = (0..n)
        .map(|u| Complex64::from_polar(1.0, -tau_nu * u as f64))
        .collect();
    let values = series.values();
    let in_missing = series.missing();
    let y: Vec<Complex64> = (0..n).map(|u| values[u] * demod[u]).collect();

    let rows: Vec<(Complex64, bool)> = (0..n)
        .into_par_iter()
        .map(|t| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut weight_sum = 0.0;
            let mut included = 0usize;
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(n - 1);
            for u in lo..=hi {
                if in_missing[u] {
                    continue;
                }
                let w = weights[u + half - t];
                acc += w * y[u];
                weight_sum += w;
                included += 1;
            }
            match config.edge_policy {
                EdgePolicy::Renormalize => {
                    if weight_sum == 0.0 {
                        (Complex64::new(0.0, 0.0), true)
                    } else {
                        (acc / weight_sum, false)
                    }
                }
                EdgePolicy::Strict => {
                    if included < span {
                        (Complex64::new(0.0, 0.0), true)
                    } else {
                        (acc / weight_sum, false)
                    }
                }
            }
        })
        .collect();

    let factor = reconstruction_factor(config.nu);
    let mut complex = Vec::with_capacity(n);
    let mut missing = Vec::with_capacity(n);
    let mut bandpass = Vec::with_capacity(n);
    for (t, (z, miss)) in rows.into_iter().enumerate() {
        bandpass.push(if miss {
            0.0
        } else {
            factor * (z * demod[t].conj()).re
        });
        complex.push(z);
        missing.push(miss);
    }

    let valid_core = if span > n { n..n } else { half..(n - half) };
    Ok(FilterResult {
        complex,
        bandpass,
        missing,
        valid_core,
        config: *config,
        start_date: series.start_date(),
    })
}

/// Wrap the real bandpass reconstruction as a zero-centered component series.
pub fn bandpass_component(result: &FilterResult) -> TimeSeries {
    TimeSeries::new(
        result.start_date,
        result.bandpass.clone(),
        result.missing.clone(),
        ValueUnit::Dimensionless,
    )
    .expect("filter output has matching lengths")
}

/// Periodogram over the Fourier grid j/n for j = 0..floor(n/2).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Periodogram {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
    /// Number of missing entries that were mean-imputed before the transform.
    pub imputed: usize,
}

impl Periodogram {
    /// CSV export with columns `frequency,period_days,power`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency,period_days,power\n");
        for (f, p) in self.frequencies.iter().zip(&self.power) {
            out.push_str(&format!("{},{},{}\n", f, 1.0 / f, p));
        }
        out
    }
}

/// `power(j) = |sum_t (X(t) - mean) e^{-i 2 pi j t / n}|^2 / n`, with missing
/// values mean-imputed first (so they contribute zero after centering).
pub fn periodogram(series: &TimeSeries) -> Result<Periodogram> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "periodogram requires n >= 2".into(),
        ));
    }
    let mean = series.mean().ok_or(Error::AllMissing)?;
    let imputed = series.missing_count();
    let centered: Vec<f64> = (0..n)
        .map(|t| match series.value_at(t) {
            Some(v) => v - mean,
            None => 0.0,
        })
        .collect();

    let bins = n / 2 + 1;
    let mut frequencies = Vec::with_capacity(bins);
    let mut power = Vec::with_capacity(bins);
    for j in 0..bins {
        frequencies.push(j as f64 / n as f64);
        if j == 0 {
            // Zero by centering; skip the rounding residue.
            power.push(0.0);
            continue;
        }
        // Incremental rotation: one complex multiply per sample.
        let step = Complex64::from_polar(1.0, -std::f64::consts::TAU * j as f64 / n as f64);
        let mut rot = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in &centered {
            acc += c * rot;
            rot *= step;
        }
        power.push(acc.norm_sqr() / n as f64);
    }
    Ok(Periodogram {
        frequencies,
        power,
        imputed,
    })
}

/// A periodogram peak and its implied period.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakCandidate {
    pub frequency: f64,
    pub power: f64,
    pub period: f64,
}

/// Greedy selection of local maxima by descending power, suppressing
/// neighbors within `min_separation`. The zero-frequency bin is excluded.
pub fn peak_candidates(
    pg: &Periodogram,
    top_n: usize,
    min_separation: f64,
) -> Vec<PeakCandidate> {
    let len = pg.power.len();
    let mut maxima: Vec<usize> = Vec::new();
    for j in 1..len {
        let left = pg.power[j - 1];
        let right = if j + 1 < len { pg.power[j + 1] } else { f64::MIN };
        if pg.power[j] > left && pg.power[j] >= right {
            maxima.push(j);
        }
    }
    maxima.sort_by(|&a, &b| {
        pg.power[b]
            .partial_cmp(&pg.power[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(pg.frequencies[a].total_cmp(&pg.frequencies[b]))
    });

    let mut selected: Vec<PeakCandidate> = Vec::new();
    for j in maxima {
        if selected.len() >= top_n {
            break;
        }
        let f = pg.frequencies[j];
        if selected
            .iter()
            .any(|s| (s.frequency - f).abs() < min_separation)
        {
            continue;
        }
        selected.push(PeakCandidate {
            frequency: f,
            power: pg.power[j],
            period: 1.0 / f,
        });
    }
    selected
}

/// Transfer-function magnitude of the filter at offset `delta` from the
/// center frequency: `|sin(pi m delta) / (m sin(pi delta))|^k`.
pub fn transfer_gain(m: usize, k: usize, delta: f64) -> f64 {
    if delta == 0.0 {
        return 1.0;
    }
    let m_f = m as f64;
    let ratio = (std::f64::consts::PI * m_f * delta).sin()
        / (m_f * (std::f64::consts::PI * delta).sin());
    ratio.abs().powi(k as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use chrono::NaiveDate;
    use std::f64::consts::TAU;

    fn start() -> NaiveDate {
        "2020-01-01".parse().unwrap()
    }

    fn series_from(values: Vec<f64>) -> TimeSeries {
        TimeSeries::from_values(start(), values, ValueUnit::Dimensionless).unwrap()
    }

    #[test]
    fn coefficients_uniform_and_self_convolved() {
        let w = kzft_coefficients(3, 1).unwrap();
        for v in &w {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let w = kzft_coefficients(3, 2).unwrap();
        let expected = [1.0, 2.0, 3.0, 2.0, 1.0].map(|c| c / 9.0);
        assert_eq!(w.len(), 5);
        for (a, e) in w.iter().zip(expected) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    /// Independent oracle: integer composition counts (number of ways to
    /// write an offset as a sum of k terms in 0..m), divided by m^k.
    fn composition_counts(m: usize, k: usize) -> Vec<f64> {
        let mut counts = vec![1u64; m];
        for _ in 1..k {
            let mut next = vec![0u64; counts.len() + m - 1];
            for (i, &c) in counts.iter().enumerate() {
                for j in 0..m {
                    next[i + j] += c;
                }
            }
            counts = next;
        }
        let total = (m as f64).powi(k as i32);
        counts.iter().map(|&c| c as f64 / total).collect()
    }

    #[test]
    fn coefficients_match_composition_oracle() {
        for m in (3..=31).step_by(2) {
            for k in 1..=3 {
                let w = kzft_coefficients(m, k).unwrap();
                let oracle = composition_counts(m, k);
                assert_eq!(w.len(), k * (m - 1) + 1);
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for (a, e) in w.iter().zip(&oracle) {
                    assert!((a - e).abs() < 1e-12, "m={m} k={k}");
                    assert!(*a > 0.0);
                }
                // Symmetry.
                for i in 0..w.len() {
                    assert!((w[i] - w[w.len() - 1 - i]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn coefficients_m5_k3_thirteen_entries() {
        let w = kzft_coefficients(5, 3).unwrap();
        let oracle = composition_counts(5, 3);
        assert_eq!(w.len(), 13);
        for (a, e) in w.iter().zip(&oracle) {
            assert!((a - e).abs() < 1e-14);
        }
    }

    #[test]
    fn coefficients_reject_even_m_and_overflow() {
        assert!(kzft_coefficients(4, 1).is_err());
        assert!(kzft_coefficients(usize::MAX - 2, 4).is_err());
        assert!(KzftConfig::new(3, usize::MAX, 0.1).is_err());
    }

    #[test]
    fn constant_series_passes_lowpass_everywhere() {
        let c = 3.75;
        let series = series_from(vec![c; 40]);
        for (m, k) in [(5, 1), (7, 2), (11, 3)] {
            let config = KzftConfig::new(m, k, 0.0).unwrap();
            let result = kzft_apply(&series, &config).unwrap();
            for t in 0..40 {
                assert!(!result.missing[t]);
                assert!((result.complex[t].re - c).abs() < 1e-12, "m={m} k={k} t={t}");
                assert!(result.complex[t].im.abs() < 1e-12);
                assert!((result.bandpass[t] - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn on_grid_cosine_demodulates_to_half() {
        // X(t) = cos(2 pi nu t): |z| should sit at 1/2 on the core, with the
        // deviation bounded by the attenuation of the -nu image at offset 2nu.
        let n = 2000;
        let nu = 0.05;
        let (m, k) = (41, 2);
        let series = series_from((0..n).map(|t| (TAU * nu * t as f64).cos()).collect());
        let config = KzftConfig::new(m, k, nu).unwrap();
        let result = kzft_apply(&series, &config).unwrap();
        let bound = transfer_gain(m, k, 2.0 * nu) / 2.0 + 1e-12;
        for t in result.valid_core.clone() {
            assert!(
                (result.complex[t].norm() - 0.5).abs() <= bound,
                "t={t}: |z|={} bound={bound}",
                result.complex[t].norm()
            );
        }
    }

    #[test]
    fn transfer_gain_law_on_complex_exponential() {
        // X(t) = e^{i 2 pi (nu+delta) t} filtered via its real and imaginary
        // parts: |z| must equal |sin(pi m delta)/(m sin(pi delta))|^k.
        let n = 4000;
        let nu = 0.1;
        for (m, k, delta) in [
            (31, 1, 0.004),
            (31, 2, 0.004),
            (51, 1, 0.02),
            (25, 3, -0.013),
        ] {
            let re = series_from((0..n).map(|t| (TAU * (nu + delta) * t as f64).cos()).collect());
            let im = series_from((0..n).map(|t| (TAU * (nu + delta) * t as f64).sin()).collect());
            let config = KzftConfig::new(m, k, nu).unwrap();
            let z_re = kzft_apply(&re, &config).unwrap();
            let z_im = kzft_apply(&im, &config).unwrap();
            let expected = transfer_gain(m, k, delta);
            for t in z_re.valid_core.clone().step_by(97) {
                let z = z_re.complex[t] + Complex64::i() * z_im.complex[t];
                assert!(
                    (z.norm() - expected).abs() <= 1e-6 * expected.max(1e-9),
                    "m={m} k={k} delta={delta} t={t}: |z|={} expected={expected}",
                    z.norm()
                );
            }
        }
    }

    #[test]
    fn annual_window_adjacent_harmonic_attenuation() {
        // m=731, k=1, delta=1/365: the closed form collapses to 1/731.
        let gain = transfer_gain(731, 1, 1.0 / 365.0);
        assert!((gain - 1.0 / 731.0).abs() < 1e-9);

        // And the filter itself reproduces it on a complex exponential.
        let n = 3000;
        let nu = 1.0 / 365.0;
        let delta = 1.0 / 365.0;
        let re = series_from((0..n).map(|t| (TAU * (nu + delta) * t as f64).cos()).collect());
        let im = series_from((0..n).map(|t| (TAU * (nu + delta) * t as f64).sin()).collect());
        let config = KzftConfig::new(731, 1, nu).unwrap();
        let z_re = kzft_apply(&re, &config).unwrap();
        let z_im = kzft_apply(&im, &config).unwrap();
        let mid = n / 2;
        let z = z_re.complex[mid] + Complex64::i() * z_im.complex[mid];
        assert!((z.norm() - 1.0 / 731.0).abs() < 1e-9);
    }

    #[test]
    fn filter_is_linear() {
        let n = 300;
        let mut missing = vec![false; n];
        missing[17] = true;
        missing[150] = true;
        let xs: Vec<f64> = (0..n).map(|t| (0.31 * t as f64).sin() + 0.2).collect();
        let ys: Vec<f64> = (0..n).map(|t| (0.11 * t as f64).cos() * 1.7).collect();
        let (a, b) = (2.5, -1.25);
        let combo: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| a * x + b * y).collect();
        let mk = |v: Vec<f64>| {
            TimeSeries::new(start(), v, missing.clone(), ValueUnit::Dimensionless).unwrap()
        };
        let config = KzftConfig::new(21, 2, 0.07).unwrap();
        let zx = kzft_apply(&mk(xs), &config).unwrap();
        let zy = kzft_apply(&mk(ys), &config).unwrap();
        let zc = kzft_apply(&mk(combo), &config).unwrap();
        for t in 0..n {
            if zc.missing[t] {
                continue;
            }
            let expect = a * zx.complex[t] + b * zy.complex[t];
            assert!((zc.complex[t] - expect).norm() < 1e-10, "t={t}");
            let expect_bp = a * zx.bandpass[t] + b * zy.bandpass[t];
            assert!((zc.bandpass[t] - expect_bp).abs() < 1e-10);
        }
    }

    #[test]
    fn strict_policy_flags_edges_missing() {
        let series = series_from((0..30).map(|t| t as f64).collect());
        let config = KzftConfig::new(7, 1, 0.1)
            .unwrap()
            .with_edge_policy(EdgePolicy::Strict);
        let result = kzft_apply(&series, &config).unwrap();
        for t in 0..3 {
            assert!(result.missing[t]);
            assert!(result.missing[29 - t]);
        }
        for t in 3..27 {
            assert!(!result.missing[t]);
        }
        assert_eq!(result.valid_core, 3..27);
    }

    #[test]
    fn all_missing_window_flags_missing_under_renormalize() {
        let n = 20;
        let values: Vec<f64> = (0..n).map(|t| t as f64).collect();
        let mut missing = vec![false; n];
        for flag in missing.iter_mut().take(12).skip(8) {
            *flag = true;
        }
        let series = TimeSeries::new(start(), values, missing, ValueUnit::Dimensionless).unwrap();
        let config = KzftConfig::new(3, 1, 0.0).unwrap();
        let result = kzft_apply(&series, &config).unwrap();
        // Index 9 and 10 have windows fully inside the missing run.
        assert!(result.missing[9]);
        assert!(result.missing[10]);
        assert!(!result.missing[8]); // window reaches index 7
    }

    #[test]
    fn bandpass_zero_in_zero_out_and_lowpass_identity() {
        let zero = series_from(vec![0.0; 50]);
        let config = KzftConfig::new(11, 1, 0.2).unwrap();
        let result = kzft_apply(&zero, &config).unwrap();
        let component = bandpass_component(&result);
        assert!(component.values().iter().all(|v| v.abs() < 1e-15));

        let constant = series_from(vec![4.2; 50]);
        let lowpass = KzftConfig::new(11, 2, 0.0).unwrap();
        let component = bandpass_component(&kzft_apply(&constant, &lowpass).unwrap());
        for v in component.values() {
            assert!((v - 4.2).abs() < 1e-12);
        }
    }

    #[test]
    fn annual_weekly_separation() {
        // cos(2 pi t/365) + cos(2 pi t/7), annual filter: the weekly term is
        // attenuated below 0.01 amplitude on the core.
        let n = 2920;
        let series = series_from(
            (0..n)
                .map(|t| {
                    let t = t as f64;
                    (TAU * t / 365.0).cos() + (TAU * t / 7.0).cos()
                })
                .collect(),
        );
        let config = KzftConfig::new(731, 1, 1.0 / 365.0).unwrap();
        let result = kzft_apply(&series, &config).unwrap();
        // Weekly leakage bound from the transfer law at both images, plus the
        // annual self-image at 2/365.
        let weekly = transfer_gain(731, 1, 1.0 / 7.0 - 1.0 / 365.0)
            + transfer_gain(731, 1, 1.0 / 7.0 + 1.0 / 365.0);
        assert!(weekly < 0.01, "weekly leakage {weekly}");
        let annual_image = transfer_gain(731, 1, 2.0 / 365.0);
        for t in result.valid_core.clone() {
            let expect = (TAU * t as f64 / 365.0).cos();
            let tolerance = weekly + annual_image + 1e-9;
            assert!(
                (result.bandpass[t] - expect).abs() <= tolerance,
                "t={t}: {} vs {expect}",
                result.bandpass[t]
            );
        }
    }

    /// Brute-force DFT oracle with per-term trigonometry.
    fn dft_power_oracle(values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        (0..=n / 2)
            .map(|j| {
                let mut re = 0.0;
                let mut im = 0.0;
                for (t, &v) in values.iter().enumerate() {
                    let angle = -TAU * j as f64 * t as f64 / n as f64;
                    re += (v - mean) * angle.cos();
                    im += (v - mean) * angle.sin();
                }
                (re * re + im * im) / n as f64
            })
            .collect()
    }

    #[test]
    fn periodogram_single_peak() {
        let n = 100;
        let values: Vec<f64> = (0..n).map(|t| (TAU * 10.0 * t as f64 / 100.0).cos()).collect();
        let series = series_from(values.clone());
        let pg = periodogram(&series).unwrap();
        let oracle = dft_power_oracle(&values);
        let peak = pg.power[10];
        assert!(peak > 0.0);
        for (j, (p, o)) in pg.power.iter().zip(&oracle).enumerate() {
            assert!((p - o).abs() <= 1e-9 * peak, "bin {j}");
            if !(9..=11).contains(&j) {
                assert!(*p < 1e-9 * peak, "bin {j} leaks {p}");
            }
        }
        assert!((pg.frequencies[10] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn periodogram_constant_is_zero() {
        let pg = periodogram(&series_from(vec![5.5; 64])).unwrap();
        for p in &pg.power {
            assert!(*p < 1e-12);
        }
    }

    #[test]
    fn periodogram_two_equal_peaks() {
        let n = 200;
        let values: Vec<f64> = (0..n)
            .map(|t| {
                let t = t as f64;
                (TAU * 5.0 * t / 200.0).cos() + (TAU * 20.0 * t / 200.0).cos()
            })
            .collect();
        let pg = periodogram(&series_from(values)).unwrap();
        assert!((pg.power[5] - pg.power[20]).abs() <= 1e-9 * pg.power[5]);
    }

    #[test]
    fn periodogram_parseval() {
        // Full-spectrum sum (conjugate bins counted by symmetry) equals
        // n * variance of the centered, imputed series.
        for n in [64usize, 65] {
            let values: Vec<f64> = (0..n)
                .map(|t| (0.7 * t as f64).sin() + 0.01 * t as f64)
                .collect();
            let series = series_from(values.clone());
            let pg = periodogram(&series).unwrap();
            let mut total = pg.power[0];
            for j in 1..pg.power.len() {
                let conjugate_counted = n % 2 == 0 && j == n / 2;
                total += if conjugate_counted { pg.power[j] } else { 2.0 * pg.power[j] };
            }
            let mean = values.iter().sum::<f64>() / n as f64;
            let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let expect = n as f64 * variance;
            assert!(
                (total - expect).abs() <= 1e-8 * expect,
                "n={n}: {total} vs {expect}"
            );
        }
    }

    #[test]
    fn periodogram_mean_imputation_and_all_missing() {
        let n = 80;
        let values: Vec<f64> = (0..n).map(|t| (TAU * t as f64 / 8.0).cos()).collect();
        let mut missing = vec![false; n];
        missing[3] = true;
        missing[40] = true;
        let series = TimeSeries::new(start(), values, missing, ValueUnit::Dimensionless).unwrap();
        let pg = periodogram(&series).unwrap();
        assert_eq!(pg.imputed, 2);

        let all_missing =
            TimeSeries::new(start(), vec![1.0; 4], vec![true; 4], ValueUnit::Dimensionless)
                .unwrap();
        assert!(matches!(periodogram(&all_missing), Err(Error::AllMissing)));
    }

    #[test]
    fn peaks_single_and_suppression() {
        let pg = Periodogram {
            frequencies: (0..8).map(|j| j as f64 / 16.0).collect(),
            power: vec![0.0, 1.0, 0.2, 0.1, 3.0, 0.1, 2.0, 0.05],
            imputed: 0,
        };
        let peaks = peak_candidates(&pg, 5, 0.0);
        assert!((peaks[0].frequency - 4.0 / 16.0).abs() < 1e-15);
        assert!((peaks[0].period - 4.0).abs() < 1e-12);

        // Peaks at bins 4 and 6 are 2/16 apart; a separation of 3/16
        // suppresses the smaller one.
        let peaks = peak_candidates(&pg, 5, 3.0 / 16.0);
        assert_eq!(peaks.len(), 2);
        assert!((peaks[0].frequency - 4.0 / 16.0).abs() < 1e-15);
        assert!((peaks[1].frequency - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn peaks_annual_and_third_harmonic() {
        let spec = crate::series::SynthSpec {
            n: 1460,
            components: vec![
                crate::series::SynthComponent {
                    period: 365.0,
                    amplitude: 1.0,
                    phase: 0.0,
                },
                crate::series::SynthComponent {
                    period: 365.0 / 3.0,
                    amplitude: 0.6,
                    phase: 0.4,
                },
            ],
            noise_sd: 0.0,
            noise_kind: crate::series::NoiseKind::White,
        };
        let out = crate::series::synth_series(&spec, 3).unwrap();
        let pg = periodogram(&out.series).unwrap();
        let peaks = peak_candidates(&pg, 2, 1.0 / 1460.0);
        assert!((peaks[0].frequency - 1.0 / 365.0).abs() < 1e-12);
        assert!((peaks[1].frequency - 3.0 / 365.0).abs() < 1e-12);
    }

    #[test]
    fn nyquist_reconstruction_has_no_conjugate_double() {
        // X(t) = cos(pi t) = (-1)^t demodulates to a constant 1 at nu = 0.5;
        // the factor-1 reconstruction recovers the alternating series.
        let n = 32;
        let series = series_from((0..n).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect());
        let config = KzftConfig::new(5, 1, 0.5).unwrap();
        let result = kzft_apply(&series, &config).unwrap();
        for t in 0..n {
            let expect = if t % 2 == 0 { 1.0 } else { -1.0 };
            assert!((result.complex[t].re - 1.0).abs() < 1e-12);
            assert!((result.bandpass[t] - expect).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn span_longer_than_series_gives_empty_core() {
        let series = series_from(vec![1.0, 2.0, 3.0, 4.0]);
        let config = KzftConfig::new(9, 1, 0.1).unwrap();
        let result = kzft_apply(&series, &config).unwrap();
        assert!(result.valid_core.is_empty());
        // Renormalize still produces values everywhere.
        assert!(result.missing.iter().all(|&m| !m));
    }

    #[test]
    fn filter_csv_export_shape() {
        let series = series_from(vec![1.0, 2.0, 3.0]);
        let config = KzftConfig::new(3, 1, 0.25).unwrap();
        let result = kzft_apply(&series, &config).unwrap();
        let csv = result.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("date,re,im,bandpass,missing"));
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().nth(1).unwrap().starts_with("2020-01-01,"));
    }
}
