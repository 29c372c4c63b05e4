//! Exact event-driven simulation of the diagonal master equation
//! (direct-method Gillespie), ensemble management, a brute-force
//! truncated-master-equation oracle, and the photon-detector experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{fill_jump_rates, FockConfig, JumpEvent, PumpSpec, SystemParams};
use crate::ode::integrate_adaptive;
use crate::rng::{derive_seed, SimRng};

#[derive(Debug, Error, PartialEq)]
pub enum StochasticError {
    #[error("event budget of {cap} exceeded (runaway lasing parameters?)")]
    EventBudgetExceeded { cap: u64 },
    #[error("truncation too small: boundary leakage {leakage} exceeds {limit}")]
    TruncationTooSmall { leakage: f64, limit: f64 },
    #[error("truncated state space has {size} configurations, above the 1e7 desk-scale cap")]
    StateSpaceTooLarge { size: u64 },
    #[error("initial configuration lies outside the truncation n_max = {n_max}")]
    InitialOutsideTruncation { n_max: u64 },
    #[error("detector runs require the pump to be disabled")]
    PumpActive,
    #[error(transparent)]
    Ode(#[from] crate::ode::OdeError),
}

/// Simulation scheme. `Direct` is the exact method; `FixedStep` is the
/// binary-variable scheme with discretization step `dt`, kept for
/// cross-validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SimScheme {
    Direct,
    FixedStep { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Uniform sampling step for the occupation series; `None` disables sampling.
    pub dt_sample: Option<f64>,
    /// Keep the full event log (time, event) in memory.
    pub record_events: bool,
    /// Hard cap on events per trajectory.
    pub event_cap: u64,
    pub scheme: SimScheme,
}

impl SimOptions {
    pub fn sampled(dt_sample: f64) -> Self {
        Self {
            dt_sample: Some(dt_sample),
            record_events: false,
            event_cap: 100_000_000,
            scheme: SimScheme::Direct,
        }
    }

    pub fn events_only() -> Self {
        Self {
            dt_sample: None,
            record_events: true,
            event_cap: 100_000_000,
            scheme: SimScheme::Direct,
        }
    }
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt_sample: None,
            record_events: true,
            event_cap: 100_000_000,
            scheme: SimScheme::Direct,
        }
    }
}

/// Occupation samples on a uniform grid, row layout `(n_c, n_1 .. n_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSeries {
    pub dt: f64,
    pub n_modes: usize,
    data: Vec<u32>,
}

impl SampleSeries {
    fn with_capacity(dt: f64, n_modes: usize, rows: usize) -> Self {
        Self {
            dt,
            n_modes,
            data: Vec::with_capacity(rows * (n_modes + 1)),
        }
    }

    fn push(&mut self, cfg: &FockConfig) {
        self.data.push(cfg.n_c as u32);
        for &v in &cfg.n {
            self.data.push(v as u32);
        }
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.n_modes + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| i as f64 * self.dt).collect()
    }

    /// Occupation of the cavity (`mode = 0`) or ladder site `mode - 1` at row `i`.
    pub fn occupation(&self, i: usize, mode: usize) -> u32 {
        self.data[i * (self.n_modes + 1) + mode]
    }

    pub fn n_cavity(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.occupation(i, 0) as f64).collect()
    }
}

/// One stochastic run: the seed that produced it, the (optional) event log,
/// the (optional) uniform-grid samples, and the emitted-photon count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub events: Vec<(f64, JumpEvent)>,
    pub samples: Option<SampleSeries>,
    /// Number of `LossCavity` events: the integrated photon output.
    pub emitted_count: u64,
    pub final_config: FockConfig,
    pub final_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub params: SystemParams,
    pub initial: FockConfig,
    pub t_end: f64,
    pub n_traj: u64,
    pub master_seed: u64,
    pub options: SimOptions,
}

/// Outcome of a single exact jump step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Jump { dt: f64, event: JumpEvent },
    /// Total rate is zero: the state is frozen forever.
    Absorbed,
}

/// Draw the next waiting time and event for the current configuration.
pub fn gillespie_step(
    cfg: &FockConfig,
    params: &SystemParams,
    rng: &mut SimRng,
    table: &mut Vec<(JumpEvent, f64)>,
) -> StepOutcome {
    fill_jump_rates(cfg, params, table);
    let total: f64 = table.iter().map(|(_, r)| r).sum();
    if total <= 0.0 {
        return StepOutcome::Absorbed;
    }
    let dt = rng.exponential(total);
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    for &(event, rate) in table.iter() {
        acc += rate;
        if target < acc {
            return StepOutcome::Jump { dt, event };
        }
    }
    // roundoff in the cumulative sum: fall back to the last channel
    let (event, _) = *table.last().expect("total > 0 implies non-empty table");
    StepOutcome::Jump { dt, event }
}

/// Simulate one trajectory from `initial` to `t_end`.
pub fn simulate_trajectory(
    params: &SystemParams,
    initial: &FockConfig,
    t_end: f64,
    seed: u64,
    options: &SimOptions,
) -> Result<Trajectory, StochasticError> {
    match options.scheme {
        SimScheme::Direct => simulate_direct(params, initial, t_end, seed, options),
        SimScheme::FixedStep { dt } => simulate_fixed_step(params, initial, t_end, seed, dt, options),
    }
}

fn simulate_direct(
    params: &SystemParams,
    initial: &FockConfig,
    t_end: f64,
    seed: u64,
    options: &SimOptions,
) -> Result<Trajectory, StochasticError> {
    let mut rng = SimRng::from_seed(seed);
    let mut cfg = initial.clone();
    let mut t = 0.0_f64;
    let mut table = Vec::with_capacity(2 * cfg.n.len() + 4);
    let mut events = Vec::new();
    let mut emitted_count = 0u64;
    let mut n_events = 0u64;

    let mut samples = options.dt_sample.map(|dt| {
        let rows = (t_end / dt).floor() as usize + 1;
        let mut s = SampleSeries::with_capacity(dt, cfg.n.len(), rows);
        s.push(&cfg); // t = 0
        s
    });
    let mut next_row = 1usize;

    loop {
        match gillespie_step(&cfg, params, &mut rng, &mut table) {
            StepOutcome::Absorbed => {
                t = t_end;
                break;
            }
            StepOutcome::Jump { dt, event } => {
                let t_next = t + dt;
                if let Some(s) = samples.as_mut() {
                    // zero-order hold: the state is `cfg` on [t, t_next)
                    while (next_row as f64) * s.dt <= t_next.min(t_end) {
                        s.push(&cfg);
                        next_row += 1;
                    }
                }
                if t_next >= t_end {
                    t = t_end;
                    break;
                }
                event.apply(&mut cfg);
                t = t_next;
                if event == JumpEvent::LossCavity {
                    emitted_count += 1;
                }
                if options.record_events {
                    events.push((t, event));
                }
                n_events += 1;
                if n_events > options.event_cap {
                    return Err(StochasticError::EventBudgetExceeded {
                        cap: options.event_cap,
                    });
                }
            }
        }
    }
    if let Some(s) = samples.as_mut() {
        while (next_row as f64) * s.dt <= t_end {
            s.push(&cfg);
            next_row += 1;
        }
    }
    Ok(Trajectory {
        seed,
        events,
        samples,
        emitted_count,
        final_config: cfg,
        final_time: t,
    })
}

/// Fixed-step binary-variable scheme: in each interval `dt`, every channel
/// fires independently with probability `rate * dt`. Carries first-order
/// discretization error in `dt`; used only to cross-check the direct method.
fn simulate_fixed_step(
    params: &SystemParams,
    initial: &FockConfig,
    t_end: f64,
    seed: u64,
    dt: f64,
    options: &SimOptions,
) -> Result<Trajectory, StochasticError> {
    let mut rng = SimRng::from_seed(seed);
    let mut cfg = initial.clone();
    let mut table = Vec::with_capacity(2 * cfg.n.len() + 4);
    let mut events = Vec::new();
    let mut emitted_count = 0u64;
    let mut n_events = 0u64;
    let steps = (t_end / dt).ceil() as u64;

    let mut samples = options.dt_sample.map(|ds| {
        let rows = (t_end / ds).floor() as usize + 1;
        let mut s = SampleSeries::with_capacity(ds, cfg.n.len(), rows);
        s.push(&cfg);
        s
    });
    let mut next_row = 1usize;

    for step in 0..steps {
        let t = (step + 1) as f64 * dt;
        fill_jump_rates(&cfg, params, &mut table);
        // rates frozen at the interval start; re-check applicability at apply
        // time since several channels can fire in one interval
        let frozen = table.clone();
        for (event, rate) in frozen {
            if rng.uniform() < rate * dt && event_applicable(&cfg, event) {
                event.apply(&mut cfg);
                if event == JumpEvent::LossCavity {
                    emitted_count += 1;
                }
                if options.record_events {
                    events.push((t, event));
                }
                n_events += 1;
                if n_events > options.event_cap {
                    return Err(StochasticError::EventBudgetExceeded {
                        cap: options.event_cap,
                    });
                }
            }
        }
        if let Some(s) = samples.as_mut() {
            while (next_row as f64) * s.dt <= t.min(t_end) {
                s.push(&cfg);
                next_row += 1;
            }
        }
    }
    Ok(Trajectory {
        seed,
        events,
        samples,
        emitted_count,
        final_config: cfg,
        final_time: t_end,
    })
}

fn event_applicable(cfg: &FockConfig, event: JumpEvent) -> bool {
    match event {
        JumpEvent::Hop(p) => cfg.n[p] > 0,
        JumpEvent::Gain1 => true,
        JumpEvent::Loss1 => cfg.n[0] > 0,
        JumpEvent::LossN => *cfg.n.last().unwrap() > 0,
        JumpEvent::LossCavity => cfg.n_c > 0,
        JumpEvent::Loss0(p) => cfg.n[p] > 0,
    }
}

/// Run `n_traj` independent trajectories. Output is a deterministic function
/// of the spec alone: trajectory `i` uses seed `derive_seed(master_seed, i)`,
/// so worker count and scheduling order never change the result.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<Vec<Trajectory>, StochasticError> {
    (0..spec.n_traj)
        .into_par_iter()
        .map(|i| {
            simulate_trajectory(
                &spec.params,
                &spec.initial,
                spec.t_end,
                derive_seed(spec.master_seed, i),
                &spec.options,
            )
        })
        .collect()
}

/// Ensemble mean and standard error of the occupation of `mode`
/// (0 = cavity, `p` = ladder site `p-1`) on the common sample grid.
pub fn ensemble_mean_occupation(trajectories: &[Trajectory], mode: usize) -> (Vec<f64>, Vec<f64>) {
    let first = trajectories[0]
        .samples
        .as_ref()
        .expect("ensemble must be sampled");
    let rows = first.len();
    let k = trajectories.len() as f64;
    let mut mean = vec![0.0; rows];
    let mut m2 = vec![0.0; rows];
    for traj in trajectories {
        let s = traj.samples.as_ref().expect("ensemble must be sampled");
        for i in 0..rows {
            let v = s.occupation(i, mode) as f64;
            mean[i] += v;
            m2[i] += v * v;
        }
    }
    for i in 0..rows {
        mean[i] /= k;
        let var = (m2[i] / k - mean[i] * mean[i]).max(0.0);
        m2[i] = (var / k).sqrt(); // standard error of the mean
    }
    (mean, m2)
}

/// Solution of the truncated diagonal master equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MasterSolution {
    pub times: Vec<f64>,
    pub mean_n_c: Vec<f64>,
    /// `mean_n[p][i]` is the mean occupation of ladder site `p` at time `i`.
    pub mean_n: Vec<Vec<f64>>,
    /// Integrated probability flux that was blocked at the truncation boundary.
    pub boundary_leakage: f64,
    /// `sum_s P(s)` at the final time, for conservation checks.
    pub final_norm: f64,
}

const LEAKAGE_LIMIT: f64 = 1e-6;

/// Brute-force oracle: direct integration of the linear rate equation for
/// the configuration probabilities `P(n_c; n_1..n_N)` with every occupation
/// truncated at `n_max`. Transitions that would leave the truncated space
/// are blocked (their flux is accumulated as `boundary_leakage`), so the
/// generator conserves total probability exactly.
pub fn truncated_master_integrate(
    params: &SystemParams,
    initial: &FockConfig,
    t_end: f64,
    n_max: u64,
    checkpoints: &[f64],
) -> Result<MasterSolution, StochasticError> {
    let n_modes = params.n_modes;
    let base = n_max + 1;
    let size = base.checked_pow((n_modes + 1) as u32).unwrap_or(u64::MAX);
    if size > 10_000_000 {
        return Err(StochasticError::StateSpaceTooLarge { size });
    }
    if initial.n_c > n_max || initial.n.iter().any(|&v| v > n_max) {
        return Err(StochasticError::InitialOutsideTruncation { n_max });
    }
    let dim = size as usize;

    // Mixed-radix encoding: index = n_c + base * (n_1 + base * (n_2 + ...)).
    let encode = |cfg: &FockConfig| -> usize {
        let mut idx = 0u64;
        for &v in cfg.n.iter().rev() {
            idx = idx * base + v;
        }
        (idx * base + cfg.n_c) as usize
    };
    let mut configs: Vec<FockConfig> = Vec::with_capacity(dim);
    {
        let mut cfg = FockConfig::empty(n_modes);
        loop {
            configs.push(cfg.clone());
            // increment mixed-radix counter (n_c fastest)
            let mut carry = true;
            if cfg.n_c < n_max {
                cfg.n_c += 1;
                carry = false;
            } else {
                cfg.n_c = 0;
            }
            if carry {
                for v in cfg.n.iter_mut() {
                    if *v < n_max {
                        *v += 1;
                        carry = false;
                        break;
                    }
                    *v = 0;
                }
            }
            if carry {
                break;
            }
        }
    }
    debug_assert_eq!(configs.len(), dim);

    // Precompute transitions: (source, target-or-blocked, rate).
    struct Channel {
        source: usize,
        target: Option<usize>,
        rate: f64,
    }
    let mut channels: Vec<Channel> = Vec::new();
    let mut scratch = Vec::new();
    for (s, cfg) in configs.iter().enumerate() {
        fill_jump_rates(cfg, params, &mut scratch);
        for &(event, rate) in &scratch {
            let mut next = cfg.clone();
            event.apply(&mut next);
            let inside = next.n_c <= n_max && next.n.iter().all(|&v| v <= n_max);
            channels.push(Channel {
                source: s,
                target: inside.then(|| encode(&next)),
                rate,
            });
        }
    }

    let mut p0 = vec![0.0; dim + 1]; // last slot integrates the leakage flux
    p0[encode(initial)] = 1.0;

    let solutions = integrate_adaptive(
        |_t, p, dp| {
            dp.fill(0.0);
            for ch in &channels {
                let flux = ch.rate * p[ch.source];
                match ch.target {
                    Some(t) => {
                        dp[ch.source] -= flux;
                        dp[t] += flux;
                    }
                    None => dp[dim] += flux, // blocked at the boundary
                }
            }
        },
        &p0,
        0.0,
        t_end,
        1e-9,
        1e-13,
        checkpoints,
        |_| {},
    )?;

    let occupations = |p: &[f64], mode: usize| -> f64 {
        configs
            .iter()
            .zip(p)
            .map(|(cfg, &prob)| {
                let occ = if mode == 0 { cfg.n_c } else { cfg.n[mode - 1] };
                occ as f64 * prob
            })
            .sum()
    };

    let final_p = solutions.last().expect("at least one checkpoint");
    let boundary_leakage = final_p[dim];
    let final_norm: f64 = final_p[..dim].iter().sum();
    let mean_n_c: Vec<f64> = solutions.iter().map(|p| occupations(p, 0)).collect();
    let mean_n: Vec<Vec<f64>> = (1..=n_modes)
        .map(|mode| solutions.iter().map(|p| occupations(p, mode)).collect())
        .collect();

    if boundary_leakage > LEAKAGE_LIMIT {
        return Err(StochasticError::TruncationTooSmall {
            leakage: boundary_leakage,
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(MasterSolution {
        times: checkpoints.to_vec(),
        mean_n_c,
        mean_n,
        boundary_leakage,
        final_norm,
    })
}

/// One detector run: the first ladder mode starts with `n1_init` bosons, the
/// pump stays off, and the result is the number of photons emitted by the
/// cavity during `[0, t_end]`.
pub fn detector_run(
    params: &SystemParams,
    n1_init: u64,
    t_end: f64,
    seed: u64,
    options: &SimOptions,
) -> Result<u64, StochasticError> {
    if params.pump != PumpSpec::off() {
        return Err(StochasticError::PumpActive);
    }
    let mut initial = FockConfig::empty(params.n_modes);
    initial.n[0] = n1_init;
    let traj = simulate_trajectory(params, &initial, t_end, seed, options)?;
    Ok(traj.emitted_count)
}

/// Default detector duration: long enough that every surviving excitation
/// either converts or is lost.
pub fn default_detector_duration(params: &SystemParams) -> f64 {
    if params.kappa_0 > 0.0 {
        10.0 / params.kappa_0
    } else {
        10.0 / params.kappa_l.max(params.kappa_c).max(params.gamma_hop)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u64,
    /// `counts[i]` covers `[i * bin_width, (i+1) * bin_width)`.
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of probability mass shared with `other`
    /// (`sum_i min(p_i, q_i)` over matched bins).
    pub fn overlap(&self, other: &Histogram) -> f64 {
        assert_eq!(self.bin_width, other.bin_width, "bin widths must match");
        let (na, nb) = (self.total() as f64, other.total() as f64);
        let bins = self.counts.len().max(other.counts.len());
        (0..bins)
            .map(|i| {
                let pa = *self.counts.get(i).unwrap_or(&0) as f64 / na;
                let pb = *other.counts.get(i).unwrap_or(&0) as f64 / nb;
                pa.min(pb)
            })
            .sum()
    }
}

/// Histogram of integrated output counts.
pub fn detector_histogram(runs: &[u64], bin_width: u64) -> Histogram {
    assert!(!runs.is_empty(), "histogram needs at least one run");
    assert!(bin_width >= 1);
    let max_bin = runs.iter().map(|&v| v / bin_width).max().unwrap() as usize;
    let mut counts = vec![0u64; max_bin + 1];
    for &v in runs {
        counts[(v / bin_width) as usize] += 1;
    }
    Histogram { bin_width, counts }
}
