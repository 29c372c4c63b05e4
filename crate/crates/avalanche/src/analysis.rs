//! Coherence-resonance signal analysis: per-trajectory autocorrelation,
//! trajectory-averaged normalized noise spectrum, peak statistics, and the
//! coherence parameter.

use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FockConfig, PumpPreset, SystemParams};
use crate::rng::SimRng;
use crate::stochastic::{run_ensemble, EnsembleSpec, SimOptions, Trajectory};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("constant signal: C(0) = 0")]
    DegenerateSeries,
    #[error("every trajectory in the ensemble is degenerate")]
    AllDegenerate,
    #[error("spectrum maximum sits at the DC floor or the grid edge")]
    NoInteriorPeak,
    #[error(transparent)]
    Stochastic(#[from] crate::stochastic::StochasticError),
}

/// Estimator knobs for the noise spectrum. The Tukey flat fraction and the
/// DC-exclusion floor are recorded in output metadata alongside results.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpectrumConfig {
    /// Flat fraction of the Tukey taper applied to the lag window.
    pub tukey_flat: f64,
    /// Lowest frequency admitted for the peak search; `None` means the
    /// default `2 pi / (T / 4)`.
    pub omega_floor: Option<f64>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            tukey_flat: 0.8,
            omega_floor: None,
        }
    }
}

/// Normalized noise spectrum on a one-sided frequency grid (it is even by
/// construction, so only `omega >= 0` is stored).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub s: Vec<f64>,
    /// DC-exclusion floor used by the peak search.
    pub omega_floor: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PeakStats {
    pub omega_max: f64,
    pub s_max: f64,
    /// Half-width at half-maximum.
    pub delta_omega: f64,
    /// The peak was truncated on one side and the width uses the other side only.
    pub one_sided: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub spectrum: Spectrum,
    pub peak: PeakStats,
    pub beta: f64,
}

/// Autocovariance of a uniform-grid series with linear (overlap-count)
/// normalization, for lags `0 ..= len/2`:
/// `C(k) = (1/(n-k)) sum_i (x_i - mean)(x_{i+k} - mean)`.
///
/// `C(0)` is exactly the sample variance. Errors with `DegenerateSeries`
/// when the signal is constant.
pub fn autocorrelation(series: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    assert!(series.len() >= 2, "series must have at least 2 samples");
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let max_lag = n / 2;

    // Linear correlation via FFT with zero padding.
    let fft_len = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = series
        .iter()
        .map(|&x| Complex64::new(x - mean, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(fft_len).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(fft_len).process(&mut buf);

    let scale = 1.0 / fft_len as f64;
    let c: Vec<f64> = (0..=max_lag)
        .map(|k| buf[k].re * scale / (n - k) as f64)
        .collect();
    if c[0] <= 0.0 {
        return Err(AnalysisError::DegenerateSeries);
    }
    Ok(c)
}

fn tukey_taper(len: usize, flat: f64) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let x = k as f64 / (len - 1) as f64;
            if x <= flat {
                1.0
            } else {
                let y = (x - flat) / (1.0 - flat);
                0.5 * (1.0 + (std::f64::consts::PI * y).cos())
            }
        })
        .collect()
}

/// Spectrum of an averaged normalized autocorrelation: even extension of
/// `c_bar` (already `C(s)/C(0)`, lags `0..=L` with spacing `dt`), Tukey
/// taper, discrete Fourier transform, scaled by `kappa_c * dt`.
fn spectrum_from_mean_autocorr(
    c_bar: &[f64],
    dt: f64,
    kappa_c: f64,
    config: &SpectrumConfig,
) -> Spectrum {
    let l = c_bar.len() - 1;
    let taper = tukey_taper(c_bar.len(), config.tukey_flat);
    let m = 2 * l;
    let mut ext = vec![Complex64::new(0.0, 0.0); m];
    ext[0] = Complex64::new(c_bar[0] * taper[0], 0.0);
    for k in 1..=l {
        let v = Complex64::new(c_bar[k] * taper[k], 0.0);
        ext[k] = v;
        if k < m {
            ext[m - k] = v; // even extension
        }
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut ext);

    let omega_step = 2.0 * std::f64::consts::PI / (m as f64 * dt);
    let omega: Vec<f64> = (0..=l).map(|j| j as f64 * omega_step).collect();
    let s: Vec<f64> = (0..=l).map(|j| kappa_c * dt * ext[j].re).collect();
    debug_assert!(
        ext[..=l]
            .iter()
            .map(|v| v.im.abs())
            .fold(0.0_f64, f64::max)
            < 1e-9 * s.iter().fold(1.0_f64, |a, &b| a.max(b.abs()))
    );
    let t_total = 2.0 * l as f64 * dt; // series length T (lags reach T/2)
    let omega_floor = config
        .omega_floor
        .unwrap_or(2.0 * std::f64::consts::PI / (t_total / 4.0));
    Spectrum {
        omega,
        s,
        omega_floor,
    }
}

/// Per-trajectory normalized autocorrelations; degenerate trajectories are
/// dropped.
fn normalized_autocorrs(traces: &[&[f64]]) -> Result<Vec<Vec<f64>>, AnalysisError> {
    let acs: Vec<Vec<f64>> = traces
        .par_iter()
        .filter_map(|series| {
            autocorrelation(series).ok().map(|mut c| {
                let c0 = c[0];
                for v in c.iter_mut() {
                    *v /= c0;
                }
                c
            })
        })
        .collect();
    if acs.is_empty() {
        return Err(AnalysisError::AllDegenerate);
    }
    Ok(acs)
}

fn mean_of(acs: &[Vec<f64>]) -> Vec<f64> {
    let len = acs[0].len();
    let mut mean = vec![0.0; len];
    for c in acs {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= acs.len() as f64;
    }
    mean
}

/// Trajectory-averaged normalized noise spectrum
/// `S(omega) = kappa_c \int ds <C(s)/C(0)> e^{i omega s}`.
///
/// Each trace is normalized by its own `C(0)` before averaging.
pub fn noise_spectrum(
    traces: &[&[f64]],
    dt: f64,
    kappa_c: f64,
    config: &SpectrumConfig,
) -> Result<Spectrum, AnalysisError> {
    let acs = normalized_autocorrs(traces)?;
    Ok(spectrum_from_mean_autocorr(
        &mean_of(&acs),
        dt,
        kappa_c,
        config,
    ))
}

/// Peak location, height, and half-width at half-maximum of the spectrum,
/// searching only above the DC-exclusion floor.
pub fn peak_stats(spectrum: &Spectrum) -> Result<PeakStats, AnalysisError> {
    let floor_idx = spectrum
        .omega
        .iter()
        .position(|&w| w >= spectrum.omega_floor)
        .ok_or(AnalysisError::NoInteriorPeak)?
        .max(1);
    let last = spectrum.s.len() - 1;
    let (peak_idx, &s_max) = spectrum.s[floor_idx..]
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, v)| (i + floor_idx, v))
        .ok_or(AnalysisError::NoInteriorPeak)?;
    if peak_idx == floor_idx || peak_idx == last {
        return Err(AnalysisError::NoInteriorPeak);
    }
    let half = s_max / 2.0;
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = peak_idx;
        for i in range {
            if spectrum.s[i] <= half {
                // linear interpolation between samples prev and i
                let (w0, s0) = (spectrum.omega[prev], spectrum.s[prev]);
                let (w1, s1) = (spectrum.omega[i], spectrum.s[i]);
                return Some(w0 + (w1 - w0) * (s0 - half) / (s0 - s1));
            }
            prev = i;
        }
        None
    };
    let left = cross(&mut (0..peak_idx).rev());
    let right = cross(&mut (peak_idx + 1..=last));
    let omega_max = spectrum.omega[peak_idx];
    let (delta_omega, one_sided) = match (left, right) {
        (Some(l), Some(r)) => ((r - l) / 2.0, false),
        (Some(l), None) => (omega_max - l, true),
        (None, Some(r)) => (r - omega_max, true),
        (None, None) => return Err(AnalysisError::NoInteriorPeak),
    };
    Ok(PeakStats {
        omega_max,
        s_max,
        delta_omega,
        one_sided,
    })
}

/// Coherence parameter `beta = (omega_max / delta_omega) * S_max`.
pub fn coherence_beta(peak: &PeakStats) -> f64 {
    peak.omega_max / peak.delta_omega * peak.s_max
}

/// Full pipeline from sampled trajectories to `beta`.
pub fn spectrum_result(
    traces: &[&[f64]],
    dt: f64,
    kappa_c: f64,
    config: &SpectrumConfig,
) -> Result<SpectrumResult, AnalysisError> {
    let spectrum = noise_spectrum(traces, dt, kappa_c, config)?;
    let peak = peak_stats(&spectrum)?;
    let beta = coherence_beta(&peak);
    Ok(SpectrumResult {
        spectrum,
        peak,
        beta,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaPoint {
    pub gamma_g: f64,
    pub gamma_over_kappa_c: f64,
    pub beta: Option<f64>,
    pub beta_err: Option<f64>,
    pub omega_max: Option<f64>,
}

/// Sweep the pump rate at fixed `kappa_c`, running a fresh ensemble per
/// point and bootstrapping the trajectory average for the `beta` error bar.
/// Points where the spectrum has no interior peak are recorded with
/// `beta = None` rather than failing the sweep.
#[allow(clippy::too_many_arguments)]
pub fn beta_sweep(
    base: &SystemParams,
    preset: PumpPreset,
    gamma_values: &[f64],
    n_traj: u64,
    t_end: f64,
    dt_sample: f64,
    master_seed: u64,
    config: &SpectrumConfig,
) -> Result<Vec<BetaPoint>, AnalysisError> {
    let n_bootstrap = 100;
    gamma_values
        .iter()
        .enumerate()
        .map(|(i, &gamma_g)| {
            let mut params = *base;
            params.pump = preset.spec(gamma_g);
            let spec = EnsembleSpec {
                params,
                initial: FockConfig::empty(params.n_modes),
                t_end,
                n_traj,
                master_seed: crate::rng::derive_seed(master_seed, i as u64),
                options: SimOptions::sampled(dt_sample),
            };
            let trajectories = run_ensemble(&spec)?;
            Ok(beta_point_from_ensemble(
                &trajectories,
                gamma_g,
                &params,
                dt_sample,
                n_bootstrap,
                spec.master_seed,
                config,
            ))
        })
        .collect()
}

pub(crate) fn beta_point_from_ensemble(
    trajectories: &[Trajectory],
    gamma_g: f64,
    params: &SystemParams,
    dt: f64,
    n_bootstrap: usize,
    seed: u64,
    config: &SpectrumConfig,
) -> BetaPoint {
    let series: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| t.samples.as_ref().expect("sampled ensemble").n_cavity())
        .collect();
    let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
    let acs = match normalized_autocorrs(&refs) {
        Ok(acs) => acs,
        Err(_) => {
            return BetaPoint {
                gamma_g,
                gamma_over_kappa_c: gamma_g / params.kappa_c,
                beta: None,
                beta_err: None,
                omega_max: None,
            }
        }
    };
    let beta_of = |acs_subset: &[Vec<f64>]| -> Option<(f64, f64)> {
        let spectrum =
            spectrum_from_mean_autocorr(&mean_of(acs_subset), dt, params.kappa_c, config);
        let peak = peak_stats(&spectrum).ok()?;
        Some((coherence_beta(&peak), peak.omega_max))
    };
    let Some((beta, omega_max)) = beta_of(&acs) else {
        return BetaPoint {
            gamma_g,
            gamma_over_kappa_c: gamma_g / params.kappa_c,
            beta: None,
            beta_err: None,
            omega_max: None,
        };
    };
    // bootstrap over trajectories
    let mut rng = SimRng::from_seed(seed ^ 0x1234_5678_9ABC_DEF0);
    let mut betas = Vec::with_capacity(n_bootstrap);
    for _ in 0..n_bootstrap {
        let resample: Vec<Vec<f64>> = (0..acs.len())
            .map(|_| acs[(rng.uniform() * acs.len() as f64) as usize].clone())
            .collect();
        if let Some((b, _)) = beta_of(&resample) {
            betas.push(b);
        }
    }
    let beta_err = if betas.len() >= 2 {
        let m = betas.iter().sum::<f64>() / betas.len() as f64;
        Some(
            (betas.iter().map(|b| (b - m).powi(2)).sum::<f64>() / (betas.len() - 1) as f64)
                .sqrt(),
        )
    } else {
        None
    };
    BetaPoint {
        gamma_g,
        gamma_over_kappa_c: gamma_g / params.kappa_c,
        beta: Some(beta),
        beta_err,
        omega_max: Some(omega_max),
    }
}
