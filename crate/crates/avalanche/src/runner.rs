//! Experiment orchestration: maps a validated `RunConfig` to simulation
//! runs and writes the CSV / JSON / SVG artifact set.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{beta_sweep, spectrum_result};
use crate::circuit::design_report;
use crate::config::{ExperimentKind, RunConfig};
use crate::meanfield::{
    collapse_spread, default_t_end, extract_period, integrate, period_scan, PhaseLabel,
};
use crate::model::{staggered_population, FockConfig, MeanFieldState, SystemParams};
use crate::output::{fmt_f64, heatmap_svg, line_svg, write_bytes, write_json, CsvFile, OutputError};
use crate::stochastic::{
    default_detector_duration, detector_histogram, detector_run, run_ensemble, EnsembleSpec,
    SimOptions, SimScheme,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    MeanField(#[from] crate::meanfield::MeanFieldError),
    #[error(transparent)]
    Stochastic(#[from] crate::stochastic::StochasticError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error("invalid run: {0}")]
    Invalid(String),
}

#[derive(Debug, Serialize)]
struct Metadata {
    experiment: &'static str,
    tool_version: &'static str,
    config_hash: String,
    config: String,
    master_seed: u64,
    rng: &'static str,
    wall_time_s: f64,
    /// Estimator choices and defaults that the underlying figures leave open.
    assumptions: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extra: Option<serde_json::Value>,
}

pub struct RunOutcome {
    pub files: Vec<PathBuf>,
}

fn phase_label_name(label: PhaseLabel) -> &'static str {
    match label {
        PhaseLabel::NonLasing => "non-lasing",
        PhaseLabel::Lasing => "lasing",
        PhaseLabel::SelfPulsing => "self-pulsing",
    }
}

pub fn run_experiment(
    config: &RunConfig,
    out_dir: &Path,
    plot: bool,
) -> Result<RunOutcome, RunError> {
    let start = Instant::now();
    let hash = config.hash();
    let mut files = Vec::new();
    let mut assumptions = vec![
        "lag window: Tukey taper, flat fraction from [analysis].tukey_flat".to_string(),
        "spectrum peak search floor: 2*pi/(T/4) unless [analysis].omega_floor set".to_string(),
    ];
    let mut extra = None;

    match config.experiment {
        ExperimentKind::Meanfield => {
            let params = system(config)?;
            let initial = MeanFieldState::seeded(params.n_modes, config.meanfield.seed_amplitude());
            let t_end = config.meanfield.t_end.unwrap_or_else(|| default_t_end(&params));
            let trace = integrate(
                &params,
                &initial,
                t_end,
                config.meanfield.rel_tol,
                config.meanfield.n_samples,
            )?;
            let mut header = vec!["t".to_string(), "n_c".to_string(), "n_stag".to_string()];
            header.extend((1..=params.n_modes).map(|p| format!("n_{p}")));
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let mut csv = CsvFile::new(
                out_dir.join("meanfield_trace.csv"),
                "meanfield-trace-v1",
                &hash,
                &header_refs,
            );
            for (t, state) in trace.times.iter().zip(&trace.states) {
                let mut row = vec![
                    fmt_f64(*t),
                    fmt_f64(state.n_cavity()),
                    fmt_f64(staggered_population(&state.n)),
                ];
                row.extend(state.n.iter().map(|&v| fmt_f64(v)));
                csv.row(&row);
            }
            files.push(csv.finish()?);
            if let Ok(tau) = extract_period(&trace) {
                extra = Some(serde_json::json!({ "period": tau }));
            }
            if plot {
                let svg = line_svg(
                    &trace.times,
                    &[("n_c", &trace.n_cavity()[..])],
                    "t",
                    "n_c",
                );
                let path = out_dir.join("meanfield_trace.svg");
                write_bytes(&path, svg.as_bytes())?;
                files.push(path);
            }
        }

        ExperimentKind::PhaseDiagram => {
            let base = system(config)?;
            let gammas = non_empty(&config.grid.gamma_g, base.pump.gamma_up);
            let kappas = non_empty(&config.grid.kappa_c, base.kappa_c);
            let initial = MeanFieldState::seeded(base.n_modes, config.meanfield.seed_amplitude());
            let thresholds = config.meanfield.thresholds();
            let mut grid = Vec::new();
            for &kc in &kappas {
                for &gg in &gammas {
                    let mut p = base;
                    p.pump = preset_of(config).spec(gg);
                    p.kappa_c = kc;
                    grid.push(p);
                }
            }
            let points = crate::meanfield::phase_diagram_sweep(&grid, &initial, &thresholds);
            let mut csv = CsvFile::new(
                out_dir.join("phase_diagram.csv"),
                "phase-diagram-v1",
                &hash,
                &["gamma_g_over_gamma", "kappa_c_over_gamma", "label", "n_c", "n_stag"],
            );
            let mut svg_x = Vec::new();
            let mut svg_y = Vec::new();
            let mut svg_cat = Vec::new();
            for point in &points {
                let p = &point.params;
                let (label, n_c, n_stag) = match &point.report {
                    Some(r) => (phase_label_name(r.label), r.n_c, r.n_stag),
                    None => ("inconclusive", f64::NAN, f64::NAN),
                };
                csv.row(&[
                    fmt_f64(p.pump.gamma_up / p.gamma_hop),
                    fmt_f64(p.kappa_c / p.gamma_hop),
                    label.to_string(),
                    fmt_f64(n_c),
                    fmt_f64(n_stag),
                ]);
                svg_x.push(p.pump.gamma_up / p.gamma_hop);
                svg_y.push(p.kappa_c / p.gamma_hop);
                svg_cat.push(match &point.report {
                    Some(r) => match r.label {
                        PhaseLabel::NonLasing => 0,
                        PhaseLabel::SelfPulsing => 1,
                        PhaseLabel::Lasing => 2,
                    },
                    None => 3,
                });
            }
            files.push(csv.finish()?);
            if plot {
                let svg = heatmap_svg(
                    &svg_x,
                    &svg_y,
                    &svg_cat,
                    &["#4575b4", "#fdae61", "#d73027", "#cccccc"],
                    "gamma_g / Gamma",
                    "kappa_c / Gamma",
                );
                let path = out_dir.join("phase_diagram.svg");
                write_bytes(&path, svg.as_bytes())?;
                files.push(path);
            }
        }

        ExperimentKind::PeriodScan => {
            let base = system(config)?;
            let gammas = non_empty(&config.grid.gamma_g, base.pump.gamma_up);
            let kappas = non_empty(&config.grid.kappa_c, base.kappa_c);
            let hops = non_empty(&config.grid.gamma_hop, base.gamma_hop);
            let sizes = if config.grid.n_modes.is_empty() {
                vec![base.n_modes]
            } else {
                config.grid.n_modes.clone()
            };
            let mut grid = Vec::new();
            for &n in &sizes {
                for &hop in &hops {
                    for &kc in &kappas {
                        for &gg in &gammas {
                            let mut p = base;
                            p.n_modes = n;
                            p.gamma_hop = hop;
                            p.kappa_c = kc;
                            p.pump = preset_of(config).spec(gg);
                            grid.push(p);
                        }
                    }
                }
            }
            let rows = period_scan(&grid, &config.meanfield.thresholds());
            let mut csv = CsvFile::new(
                out_dir.join("period_scan.csv"),
                "period-scan-v1",
                &hash,
                &[
                    "n_modes",
                    "gamma_hop",
                    "kappa_c",
                    "gamma_g",
                    "tau",
                    "rescaled_period",
                    "kappa_c_over_gamma_g",
                ],
            );
            for row in &rows {
                csv.row(&[
                    row.params.n_modes.to_string(),
                    fmt_f64(row.params.gamma_hop),
                    fmt_f64(row.params.kappa_c),
                    fmt_f64(row.params.pump.gamma_up),
                    row.period.map(fmt_f64).unwrap_or_else(|| "".into()),
                    row.rescaled_period.map(fmt_f64).unwrap_or_else(|| "".into()),
                    fmt_f64(row.rescaled_loss),
                ]);
            }
            files.push(csv.finish()?);
            extra = Some(serde_json::json!({
                "collapse_spread": collapse_spread(&rows),
                "pulsing_points": rows.iter().filter(|r| r.period.is_some()).count(),
                "total_points": rows.len(),
            }));
        }

        ExperimentKind::Trajectories => {
            let params = system(config)?;
            let spec = ensemble_spec(config, &params)?;
            let trajectories = run_ensemble(&spec)?;
            let sampled = trajectories[0].samples.as_ref().ok_or_else(|| {
                RunError::Invalid("trajectories experiment needs ensemble.dt_sample".into())
            })?;
            let times = sampled.times();
            let mut header = vec!["t".to_string()];
            header.extend((0..trajectories.len()).map(|k| format!("n_c_{k}")));
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let mut csv = CsvFile::new(
                out_dir.join("trajectories.csv"),
                "trajectories-v1",
                &hash,
                &header_refs,
            );
            for (i, t) in times.iter().enumerate() {
                let mut row = vec![fmt_f64(*t)];
                for traj in &trajectories {
                    row.push(fmt_f64(
                        traj.samples.as_ref().unwrap().occupation(i, 0) as f64
                    ));
                }
                csv.row(&row);
            }
            files.push(csv.finish()?);
            if config.ensemble.record_events {
                for (k, traj) in trajectories.iter().enumerate() {
                    let path = out_dir.join(format!("events_{k}.bin"));
                    write_bytes(&path, &crate::eventlog::encode(&traj.events))?;
                    files.push(path);
                }
            }
            if plot {
                let series: Vec<(String, Vec<f64>)> = trajectories
                    .iter()
                    .take(4)
                    .enumerate()
                    .map(|(k, t)| (format!("traj {k}"), t.samples.as_ref().unwrap().n_cavity()))
                    .collect();
                let refs: Vec<(&str, &[f64])> = series
                    .iter()
                    .map(|(n, v)| (n.as_str(), v.as_slice()))
                    .collect();
                let path = out_dir.join("trajectories.svg");
                write_bytes(&path, line_svg(&times, &refs, "t", "n_c").as_bytes())?;
                files.push(path);
            }
        }

        ExperimentKind::Spectrum => {
            let params = system(config)?;
            let spec = ensemble_spec(config, &params)?;
            let dt = spec
                .options
                .dt_sample
                .expect("ensemble_spec always sets dt_sample");
            let trajectories = run_ensemble(&spec)?;
            let series: Vec<Vec<f64>> = trajectories
                .iter()
                .map(|t| t.samples.as_ref().unwrap().n_cavity())
                .collect();
            let refs: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
            let result = spectrum_result(
                &refs,
                dt,
                params.kappa_c,
                &config.analysis.spectrum_config(),
            )?;
            let mut csv = CsvFile::new(
                out_dir.join("spectrum.csv"),
                "spectrum-v1",
                &hash,
                &["omega", "s"],
            );
            for (w, s) in result.spectrum.omega.iter().zip(&result.spectrum.s) {
                csv.row(&[fmt_f64(*w), fmt_f64(*s)]);
            }
            files.push(csv.finish()?);
            let sidecar = out_dir.join("spectrum_peaks.json");
            write_json(
                &sidecar,
                &serde_json::json!({
                    "omega_max": result.peak.omega_max,
                    "s_max": result.peak.s_max,
                    "delta_omega": result.peak.delta_omega,
                    "one_sided": result.peak.one_sided,
                    "beta": result.beta,
                }),
            )?;
            files.push(sidecar);
            if plot {
                let path = out_dir.join("spectrum.svg");
                write_bytes(
                    &path,
                    line_svg(
                        &result.spectrum.omega,
                        &[("S", &result.spectrum.s[..])],
                        "omega",
                        "S",
                    )
                    .as_bytes(),
                )?;
                files.push(path);
            }
        }

        ExperimentKind::BetaScan => {
            let params = system(config)?;
            if config.grid.gamma_g.is_empty() {
                return Err(RunError::Invalid(
                    "beta-scan needs [grid].gamma_g values".into(),
                ));
            }
            let t_end = config
                .ensemble
                .t_end
                .unwrap_or_else(|| 200.0 / params.kappa_c);
            let dt = config
                .ensemble
                .dt_sample
                .unwrap_or_else(|| default_dt_sample(&params, &config.grid.gamma_g));
            let points = beta_sweep(
                &params,
                preset_of(config),
                &config.grid.gamma_g,
                config.ensemble.n_traj,
                t_end,
                dt,
                config.master_seed,
                &config.analysis.spectrum_config(),
            )?;
            let mut csv = CsvFile::new(
                out_dir.join("beta_scan.csv"),
                "beta-scan-v1",
                &hash,
                &["gamma_g", "gamma_g_over_kappa_c", "beta", "beta_err", "omega_max"],
            );
            for p in &points {
                csv.row(&[
                    fmt_f64(p.gamma_g),
                    fmt_f64(p.gamma_over_kappa_c),
                    p.beta.map(fmt_f64).unwrap_or_else(|| "".into()),
                    p.beta_err.map(fmt_f64).unwrap_or_else(|| "".into()),
                    p.omega_max.map(fmt_f64).unwrap_or_else(|| "".into()),
                ]);
            }
            files.push(csv.finish()?);
        }

        ExperimentKind::Detector => {
            let params = system(config)?;
            if params.pump.gamma_up != 0.0 || params.pump.gamma_down != 0.0 {
                return Err(RunError::Invalid(
                    "detector experiment requires gamma_g = 0 (pump off)".into(),
                ));
            }
            let t_end = config
                .detector
                .t_end
                .unwrap_or_else(|| default_detector_duration(&params));
            assumptions.push(format!(
                "detector duration T = {t_end} (default 10/kappa_0) and pump fully off"
            ));
            let options = SimOptions {
                dt_sample: None,
                record_events: false,
                event_cap: config.ensemble.event_cap,
                scheme: SimScheme::Direct,
            };
            let mut hist_csv = CsvFile::new(
                out_dir.join("detector_histograms.csv"),
                "detector-histograms-v1",
                &hash,
                &["n1_init", "bin_lo", "bin_hi", "count"],
            );
            let mut means_csv = CsvFile::new(
                out_dir.join("detector_means.csv"),
                "detector-means-v1",
                &hash,
                &["n1_init", "mean_n_out", "std_n_out", "runs"],
            );
            for (block, &n1) in config.detector.n1_values.iter().enumerate() {
                use rayon::prelude::*;
                let runs: Result<Vec<u64>, _> = (0..config.detector.runs)
                    .into_par_iter()
                    .map(|i| {
                        let seed = crate::rng::derive_seed(
                            config.master_seed ^ (block as u64) << 32,
                            i,
                        );
                        detector_run(&params, n1, t_end, seed, &options)
                    })
                    .collect();
                let runs = runs?;
                let hist = detector_histogram(&runs, config.detector.bin_width);
                for (b, &count) in hist.counts.iter().enumerate() {
                    if count > 0 {
                        hist_csv.row(&[
                            n1.to_string(),
                            (b as u64 * hist.bin_width).to_string(),
                            ((b as u64 + 1) * hist.bin_width).to_string(),
                            count.to_string(),
                        ]);
                    }
                }
                let mean = runs.iter().sum::<u64>() as f64 / runs.len() as f64;
                let std = (runs
                    .iter()
                    .map(|&v| (v as f64 - mean).powi(2))
                    .sum::<f64>()
                    / runs.len() as f64)
                    .sqrt();
                means_csv.row(&[
                    n1.to_string(),
                    fmt_f64(mean),
                    fmt_f64(std),
                    runs.len().to_string(),
                ]);
            }
            files.push(hist_csv.finish()?);
            files.push(means_csv.finish()?);
        }

        ExperimentKind::Circuit => {
            let section = config
                .circuit
                .as_ref()
                .expect("validated config has circuit section");
            let params = section.to_params()?;
            let report = design_report(&params, section.n_bar, section.n_c_bar, section.delta_min);
            let path = out_dir.join("circuit_report.json");
            write_json(&path, &report)?;
            files.push(path);
        }
    }

    let metadata = Metadata {
        experiment: config.experiment.name(),
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: hash,
        config: config.canonical_toml(),
        master_seed: config.master_seed,
        rng: crate::rng::GENERATOR_ID,
        wall_time_s: start.elapsed().as_secs_f64(),
        assumptions,
        extra,
    };
    let meta_path = out_dir.join("metadata.json");
    write_json(&meta_path, &metadata)?;
    files.push(meta_path);
    Ok(RunOutcome { files })
}

fn system(config: &RunConfig) -> Result<SystemParams, RunError> {
    Ok(config
        .system
        .as_ref()
        .expect("validated config has system section")
        .to_params()?)
}

fn preset_of(config: &RunConfig) -> crate::model::PumpPreset {
    config
        .system
        .as_ref()
        .map(|s| s.preset)
        .unwrap_or(crate::model::PumpPreset::InfiniteTemperature)
}

fn non_empty(values: &[f64], fallback: f64) -> Vec<f64> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

fn default_dt_sample(params: &SystemParams, gammas: &[f64]) -> f64 {
    let gamma_max = gammas.iter().cloned().fold(0.0_f64, f64::max);
    let scale = params
        .gamma_hop
        .max(params.kappa_c)
        .max(params.kappa_l)
        .max(gamma_max);
    0.05 / scale
}

fn ensemble_spec(config: &RunConfig, params: &SystemParams) -> Result<EnsembleSpec, RunError> {
    let t_end = config
        .ensemble
        .t_end
        .unwrap_or_else(|| 200.0 / params.kappa_c.max(params.gamma_hop));
    let dt_sample = config
        .ensemble
        .dt_sample
        .unwrap_or_else(|| default_dt_sample(params, &[params.pump.gamma_up]));
    Ok(EnsembleSpec {
        params: *params,
        initial: FockConfig::empty(params.n_modes),
        t_end,
        n_traj: config.ensemble.n_traj,
        master_seed: config.master_seed,
        options: SimOptions {
            dt_sample: Some(dt_sample),
            record_events: config.ensemble.record_events,
            event_cap: config.ensemble.event_cap,
            scheme: match config.ensemble.fixed_dt {
                Some(dt) => SimScheme::FixedStep { dt },
                None => SimScheme::Direct,
            },
        },
    })
}
