//! Mean-field engine: integrates the coupled cavity/ladder equations,
//! classifies the dynamical phase, extracts the self-pulsing period, and
//! computes inclusion-process steady-state profiles and wave speeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    cumulative_current, meanfield_drift, staggered_population, MeanFieldState, SystemParams,
};
use crate::ode::{integrate_adaptive, OdeError};

#[derive(Debug, Error, PartialEq)]
pub enum MeanFieldError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("trace too short to classify; increase t_end")]
    Inconclusive,
    #[error("fewer than 4 pulse peaks found")]
    TooFewPeaks,
}

/// Time series of mean-field states on a strictly increasing grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanFieldTrace {
    pub times: Vec<f64>,
    pub states: Vec<MeanFieldState>,
}

impl MeanFieldTrace {
    /// Cavity photon number `n_c(t) = a_c(t)^2`.
    pub fn n_cavity(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.n_cavity()).collect()
    }

    pub fn n_staggered(&self) -> Vec<f64> {
        self.states.iter().map(|s| staggered_population(&s.n)).collect()
    }

    pub fn last(&self) -> &MeanFieldState {
        self.states.last().expect("trace is never empty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseLabel {
    NonLasing,
    Lasing,
    SelfPulsing,
}

/// Classification verdict plus the diagnostics it was based on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseReport {
    pub label: PhaseLabel,
    /// Terminal-window mean of `n_c`.
    pub n_c: f64,
    /// Terminal staggered population.
    pub n_stag: f64,
    /// max - min of `n_c` over the terminal window.
    pub osc_amplitude: f64,
    /// Pulsing period, present only for `SelfPulsing`.
    pub period: Option<f64>,
}

/// Classification thresholds. Defaults reproduce the reference phase points.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhaseThresholds {
    /// Occupation below which the cavity counts as dark.
    pub eps_c: f64,
    /// Convergence: terminal drift norm must be below `eps_d * max_rate`.
    pub eps_d: f64,
    /// Pulsing persistence: terminal oscillation amplitude relative to peak `n_c`.
    pub eps_osc: f64,
}

impl Default for PhaseThresholds {
    fn default() -> Self {
        Self {
            eps_c: 1e-3,
            eps_d: 1e-6,
            eps_osc: 1e-2,
        }
    }
}

pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Default seed amplitude `sqrt(10)` for phase-diagram runs.
pub fn default_seed_state(n_modes: usize) -> MeanFieldState {
    MeanFieldState::seeded(n_modes, 10.0_f64.sqrt())
}

/// Default horizon `50 / min(kappa_c, gamma_up, Gamma)` over the positive rates.
pub fn default_t_end(params: &SystemParams) -> f64 {
    let mut min_rate = params.gamma_hop;
    for r in [params.kappa_c, params.pump.gamma_up] {
        if r > 0.0 {
            min_rate = min_rate.min(r);
        }
    }
    50.0 / min_rate
}

/// Integrate the mean-field equations on a uniform grid of `n_samples`
/// points spanning `[0, t_end]`.
pub fn integrate(
    params: &SystemParams,
    initial: &MeanFieldState,
    t_end: f64,
    rel_tol: f64,
    n_samples: usize,
) -> Result<MeanFieldTrace, MeanFieldError> {
    let times: Vec<f64> = (0..n_samples)
        .map(|i| t_end * i as f64 / (n_samples - 1) as f64)
        .collect();
    integrate_on_grid(params, initial, &times, rel_tol)
}

/// Integrate with dense output on an arbitrary strictly increasing grid.
pub fn integrate_on_grid(
    params: &SystemParams,
    initial: &MeanFieldState,
    times: &[f64],
    rel_tol: f64,
) -> Result<MeanFieldTrace, MeanFieldError> {
    let t_end = *times.last().expect("non-empty grid");
    let y0 = initial.to_flat();
    let p = *params;
    let flat = integrate_adaptive(
        move |_t, y, dy| {
            let state = MeanFieldState::from_flat(y);
            let drift = meanfield_drift(&state, &p);
            dy[0] = drift.a_c;
            dy[1..].copy_from_slice(&drift.n);
        },
        &y0,
        0.0,
        t_end,
        rel_tol,
        rel_tol * 1e-2,
        times,
        |y| {
            for v in y.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        },
    )?;
    Ok(MeanFieldTrace {
        times: times.to_vec(),
        states: flat.iter().map(|y| MeanFieldState::from_flat(y)).collect(),
    })
}

/// Classify the dynamical phase of a trace.
///
/// Converged traces split into `NonLasing` (dark cavity) and `Lasing`;
/// persistent terminal oscillations give `SelfPulsing`. Anything else is
/// `Inconclusive` and the caller should extend the horizon.
pub fn classify_phase(
    trace: &MeanFieldTrace,
    params: &SystemParams,
    thresholds: &PhaseThresholds,
) -> Result<PhaseReport, MeanFieldError> {
    let n_c = trace.n_cavity();
    let len = n_c.len();
    if len < 8 {
        return Err(MeanFieldError::Inconclusive);
    }
    let window = &n_c[len - len / 4..];
    let w_max = window.iter().cloned().fold(f64::MIN, f64::max);
    let w_min = window.iter().cloned().fold(f64::MAX, f64::min);
    let w_mean = window.iter().sum::<f64>() / window.len() as f64;
    let osc_amplitude = w_max - w_min;
    let peak = n_c.iter().cloned().fold(0.0, f64::max);

    let last = trace.last();
    let drift = meanfield_drift(last, params);
    let drift_norm = drift
        .n
        .iter()
        .chain(std::iter::once(&drift.a_c))
        .fold(0.0_f64, |m, &d| m.max(d.abs()));
    let rate_scale = params
        .gamma_hop
        .max(params.kappa_c)
        .max(params.kappa_l)
        .max(params.pump.gamma_up)
        .max(params.kappa_0);
    let converged =
        osc_amplitude <= thresholds.eps_osc * peak.max(thresholds.eps_c)
            && drift_norm < thresholds.eps_d * rate_scale * (1.0 + last.n.iter().sum::<f64>());

    let n_stag = staggered_population(&last.n);
    if converged {
        let label = if w_mean < thresholds.eps_c {
            PhaseLabel::NonLasing
        } else {
            PhaseLabel::Lasing
        };
        return Ok(PhaseReport {
            label,
            n_c: w_mean,
            n_stag,
            osc_amplitude,
            period: None,
        });
    }
    if osc_amplitude > thresholds.eps_osc * peak {
        let period = extract_period(trace).ok();
        if period.is_none() {
            // oscillating but too few cycles resolved
            return Err(MeanFieldError::Inconclusive);
        }
        return Ok(PhaseReport {
            label: PhaseLabel::SelfPulsing,
            n_c: w_mean,
            n_stag,
            osc_amplitude,
            period,
        });
    }
    Err(MeanFieldError::Inconclusive)
}

/// Run `integrate` + `classify_phase` with the default horizon, doubling the
/// horizon up to 3 times on an inconclusive verdict.
pub fn classify_point(
    params: &SystemParams,
    initial: &MeanFieldState,
    thresholds: &PhaseThresholds,
    rel_tol: f64,
) -> Result<PhaseReport, MeanFieldError> {
    let mut t_end = default_t_end(params);
    let mut last_err = MeanFieldError::Inconclusive;
    // The sample grid must resolve a pulse period (roughly
    // 3 / sqrt(gamma_up * Gamma)) even when the horizon is set by a much
    // slower rate, otherwise peak extraction aliases onto multiples.
    let tau_est = 3.0 / (params.pump.gamma_up * params.gamma_hop).sqrt();
    for _ in 0..4 {
        let n_samples = if tau_est.is_finite() && tau_est > 0.0 {
            ((t_end / tau_est * 25.0).ceil() as usize).clamp(4_000, 400_000) + 1
        } else {
            4_001
        };
        let trace = integrate(params, initial, t_end, rel_tol, n_samples)?;
        match classify_phase(&trace, params, thresholds) {
            Ok(report) => return Ok(report),
            Err(MeanFieldError::Inconclusive) => {
                last_err = MeanFieldError::Inconclusive;
                t_end *= 2.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err)
}

/// Median inter-peak interval of `n_c(t)` after discarding the first 20% of
/// the trace as transient. Peaks must rise above `mean + 0.5 * std` of the
/// post-transient window; at least 4 peaks are required.
pub fn extract_period(trace: &MeanFieldTrace) -> Result<f64, MeanFieldError> {
    let n_c = trace.n_cavity();
    let start = trace.times.len() / 5;
    let window = &n_c[start..];
    let times = &trace.times[start..];
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let var = window.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / window.len() as f64;
    let threshold = mean + 0.5 * var.sqrt();

    let mut peak_times = Vec::new();
    for i in 1..window.len() - 1 {
        if window[i] > threshold && window[i] >= window[i - 1] && window[i] > window[i + 1] {
            // refine by parabolic interpolation through the three samples
            let (y0, y1, y2) = (window[i - 1], window[i], window[i + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            let dt = times[i] - times[i - 1];
            let offset = if denom.abs() > 0.0 {
                0.5 * (y0 - y2) / denom
            } else {
                0.0
            };
            peak_times.push(times[i] + offset.clamp(-0.5, 0.5) * dt);
        }
    }
    if peak_times.len() < 4 {
        return Err(MeanFieldError::TooFewPeaks);
    }
    let mut intervals: Vec<f64> = peak_times.windows(2).map(|w| w[1] - w[0]).collect();
    intervals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = intervals.len() / 2;
    Ok(if intervals.len() % 2 == 1 {
        intervals[mid]
    } else {
        0.5 * (intervals[mid - 1] + intervals[mid])
    })
}

/// One row of a period scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodScanRow {
    pub params: SystemParams,
    /// Pulsing period `tau`; absent when the point is not self-pulsing.
    pub period: Option<f64>,
    /// `sqrt(gamma_g * Gamma) * tau`.
    pub rescaled_period: Option<f64>,
    /// `kappa_c / gamma_g`.
    pub rescaled_loss: f64,
}

/// Extract the pulsing period at each grid point. Points outside the
/// self-pulsing regime get `period = None`.
pub fn period_scan(points: &[SystemParams], thresholds: &PhaseThresholds) -> Vec<PeriodScanRow> {
    points
        .par_iter()
        .map(|params| {
            let initial = default_seed_state(params.n_modes);
            let period = classify_point(params, &initial, thresholds, DEFAULT_REL_TOL)
                .ok()
                .filter(|r| r.label == PhaseLabel::SelfPulsing)
                .and_then(|r| r.period);
            let gamma_g = params.pump.gamma_up;
            PeriodScanRow {
                params: *params,
                period,
                rescaled_period: period.map(|tau| (gamma_g * params.gamma_hop).sqrt() * tau),
                rescaled_loss: params.kappa_c / gamma_g,
            }
        })
        .collect()
}

/// Collapse quality of a period scan: curves are grouped by
/// `(Gamma, kappa_c, kappa_l, N)`, interpolated (linearly in log x) onto
/// common `kappa_c / gamma_g` values, and the metric is the maximum over
/// query points of `(max - min) / mean` across curves.
pub fn collapse_spread(rows: &[PeriodScanRow]) -> Option<f64> {
    let mut curves: Vec<(u64, Vec<(f64, f64)>)> = Vec::new();
    for row in rows {
        let (Some(_), Some(resc)) = (row.period, row.rescaled_period) else {
            continue;
        };
        let p = &row.params;
        let key = {
            use std::hash::{Hash, Hasher};
            let mut h = std::collections::hash_map::DefaultHasher::new();
            p.gamma_hop.to_bits().hash(&mut h);
            p.kappa_c.to_bits().hash(&mut h);
            p.kappa_l.to_bits().hash(&mut h);
            p.n_modes.hash(&mut h);
            h.finish()
        };
        match curves.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((row.rescaled_loss, resc)),
            None => curves.push((key, vec![(row.rescaled_loss, resc)])),
        }
    }
    let mut curves: Vec<Vec<(f64, f64)>> = curves
        .into_iter()
        .map(|(_, mut pts)| {
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            pts
        })
        .filter(|pts| pts.len() >= 2)
        .collect();
    if curves.len() < 2 {
        return None;
    }
    // Overlapping x range across all curves.
    let lo = curves
        .iter()
        .map(|c| c[0].0)
        .fold(f64::MIN, f64::max);
    let hi = curves
        .iter()
        .map(|c| c[c.len() - 1].0)
        .fold(f64::MAX, f64::min);
    if hi <= lo {
        return None;
    }
    curves.iter_mut().for_each(|c| {
        for p in c.iter_mut() {
            p.0 = p.0.ln();
        }
    });
    let (lo, hi) = (lo.ln(), hi.ln());
    let n_query = 20;
    let mut worst: f64 = 0.0;
    for q in 0..n_query {
        let x = lo + (hi - lo) * q as f64 / (n_query - 1) as f64;
        let values: Vec<f64> = curves.iter().map(|c| interp_linear(c, x)).collect();
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let min = values.iter().cloned().fold(f64::MAX, f64::min);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        worst = worst.max((max - min) / mean);
    }
    Some(worst)
}

fn interp_linear(points: &[(f64, f64)], x: f64) -> f64 {
    let i = points
        .windows(2)
        .position(|w| x <= w[1].0)
        .unwrap_or(points.len() - 2);
    let (x0, y0) = points[i];
    let (x1, y1) = points[i + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Steady-state occupation profile of the bare inclusion process at current
/// `J`: backward recurrence `n_N = J / kappa_l`, `n_p = (J/Gamma) / (1 + n_{p+1})`.
pub fn asip_steady_profile(j: f64, gamma_hop: f64, kappa_l: f64, n_modes: usize) -> Vec<f64> {
    let mut n = vec![0.0; n_modes];
    if j == 0.0 {
        return n;
    }
    n[n_modes - 1] = j / kappa_l;
    for p in (0..n_modes - 1).rev() {
        n[p] = (j / gamma_hop) / (1.0 + n[p + 1]);
    }
    n
}

/// Quasi-stationary occupation of the first mode: positive root of
/// `Gamma n (1 + n) = gamma_g`.
pub fn boundary_occupation_n1(gamma_g: f64, gamma_hop: f64) -> f64 {
    0.5 * (-1.0 + (1.0 + 4.0 * gamma_g / gamma_hop).sqrt())
}

/// Effective propagation speed of density perturbations, `Gamma (1 + 2 n_1)`.
pub fn wave_speed(n1: f64, gamma_hop: f64) -> f64 {
    gamma_hop * (1.0 + 2.0 * n1)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhasePoint {
    pub params: SystemParams,
    pub report: Option<PhaseReport>,
}

/// Classify each grid point; deterministic and order-independent (grid order
/// is preserved in the output regardless of worker scheduling).
pub fn phase_diagram_sweep(
    grid: &[SystemParams],
    initial: &MeanFieldState,
    thresholds: &PhaseThresholds,
) -> Vec<PhasePoint> {
    grid.par_iter()
        .map(|params| PhasePoint {
            params: *params,
            report: classify_point(params, initial, thresholds, DEFAULT_REL_TOL).ok(),
        })
        .collect()
}

/// Cumulative current of the terminal state, for threshold diagnostics.
pub fn terminal_current(trace: &MeanFieldTrace, params: &SystemParams) -> f64 {
    cumulative_current(trace.last(), params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PumpSpec;

    #[test]
    fn asip_profile_hand_recurrence() {
        // J=2, Gamma=1, kappa_l=2, N=3: n3 = 1, n2 = 2/(1+1) = 1, n1 = 2/(1+1) = 1
        let n = asip_steady_profile(2.0, 1.0, 2.0, 3);
        for (a, b) in n.iter().zip([1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        // J=2, Gamma=1, kappa_l=4, N=3
        let n = asip_steady_profile(2.0, 1.0, 4.0, 3);
        let expect = [2.0 / (1.0 + 4.0 / 3.0), 2.0 / 1.5, 0.5];
        for (a, b) in n.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert_eq!(asip_steady_profile(0.0, 1.0, 2.0, 5), vec![0.0; 5]);
    }

    #[test]
    fn asip_profile_bond_current_homogeneity() {
        let j = 3.7;
        let n = asip_steady_profile(j, 1.3, 2.9, 12);
        for w in n.windows(2) {
            let current = 1.3 * w[0] * (1.0 + w[1]);
            assert!((current - j).abs() / j < 1e-12);
        }
    }

    #[test]
    fn asip_staggered_sign_matches_boundary_difference() {
        for kappa_l in [0.5, 2.0, 10.0] {
            let n = asip_steady_profile(2.0, 1.0, kappa_l, 10);
            let stag = staggered_population(&n);
            let diff = n[9] - n[0];
            if diff.abs() > 1e-9 {
                assert_eq!(stag.signum(), diff.signum(), "kappa_l={kappa_l}");
            }
        }
    }

    #[test]
    fn boundary_occupation_roots() {
        assert!((boundary_occupation_n1(2.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((boundary_occupation_n1(6.0, 1.0) - 2.0).abs() < 1e-12);
        assert_eq!(boundary_occupation_n1(0.0, 1.0), 0.0);
    }

    #[test]
    fn wave_speed_values() {
        assert_eq!(wave_speed(0.0, 3.0), 3.0);
        assert_eq!(wave_speed(1.0, 2.0), 6.0);
        // asymptotic c ~ 2 sqrt(Gamma gamma_g) for gamma_g >> Gamma
        let gamma_g = 1e6;
        let c = wave_speed(boundary_occupation_n1(gamma_g, 1.0), 1.0);
        assert!((c / (2.0 * gamma_g.sqrt()) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn integrate_decoupled_linear_dynamics() {
        // Gamma -> 0 limit is excluded by validation, so take Gamma tiny.
        // The infinite-temperature pump injects at a constant net rate,
        // so n1(t) ~ n1(0) + gamma_g t while the cavity decays freely.
        let params =
            SystemParams::new(3, 1e-12, PumpSpec::infinite_temperature(2.0), 3.0, 0.0, 0.0)
                .unwrap();
        let initial = MeanFieldState {
            a_c: 1.0,
            n: vec![0.5, 0.0, 0.0],
        };
        let trace = integrate(&params, &initial, 2.0, 1e-10, 201).unwrap();
        let last = trace.last();
        assert!((last.n[0] - (0.5 + 2.0 * 2.0)).abs() < 1e-6);
        assert!((last.a_c - (-3.0 * 2.0 / 2.0_f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn closed_system_conserves_ladder_total() {
        let params = SystemParams::new(4, 1.0, PumpSpec::off(), 0.0, 0.0, 0.0).unwrap();
        let initial = MeanFieldState {
            a_c: 0.0,
            n: vec![2.0, 1.0, 0.5, 0.0],
        };
        let trace = integrate(&params, &initial, 5.0, 1e-10, 101).unwrap();
        let total0: f64 = initial.n.iter().sum();
        for s in &trace.states {
            let total: f64 = s.n.iter().sum();
            assert!((total - total0).abs() < 1e-6);
        }
    }

    #[test]
    fn cavity_zero_is_fixed_point() {
        let params =
            SystemParams::new(5, 1.0, PumpSpec::infinite_temperature(8.0), 2.0, 1.0, 0.0)
                .unwrap();
        let trace = integrate(&params, &MeanFieldState::empty(5), 10.0, 1e-9, 101).unwrap();
        for s in &trace.states {
            assert_eq!(s.a_c, 0.0);
        }
    }

    #[test]
    fn extract_period_synthetic_cosine() {
        let times: Vec<f64> = (0..2000).map(|i| i as f64 * 0.05).collect();
        let states: Vec<MeanFieldState> = times
            .iter()
            .map(|&t| MeanFieldState {
                a_c: (1.0 + (2.0 * std::f64::consts::PI * t / 5.0).cos()).sqrt(),
                n: vec![0.0, 0.0],
            })
            .collect();
        let trace = MeanFieldTrace { times, states };
        let tau = extract_period(&trace).unwrap();
        assert!((tau - 5.0).abs() < 0.05, "tau = {tau}");
    }

    #[test]
    fn extract_period_too_few_peaks() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.01).collect();
        let states: Vec<MeanFieldState> = times
            .iter()
            .map(|&t| MeanFieldState {
                a_c: t,
                n: vec![0.0, 0.0],
            })
            .collect();
        let trace = MeanFieldTrace { times, states };
        assert_eq!(extract_period(&trace), Err(MeanFieldError::TooFewPeaks));
    }

    #[test]
    fn classification_time_rescaling_invariant() {
        // t -> s t with all rates / s must preserve the label
        let thresholds = PhaseThresholds::default();
        let initial = default_seed_state(10);
        let base =
            SystemParams::new(10, 1.0, PumpSpec::infinite_temperature(12.0), 20.0, 10.0, 0.0)
                .unwrap();
        let report = classify_point(&base, &initial, &thresholds, 1e-8).unwrap();
        let s = 7.0;
        let scaled = SystemParams::new(
            10,
            base.gamma_hop / s,
            PumpSpec::infinite_temperature(12.0 / s),
            base.kappa_c / s,
            base.kappa_l / s,
            0.0,
        )
        .unwrap();
        let report_scaled = classify_point(&scaled, &initial, &thresholds, 1e-8).unwrap();
        assert_eq!(report.label, report_scaled.label);
    }
}
