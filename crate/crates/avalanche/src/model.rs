//! Domain types and elementary rate/drift formulas shared by the
//! deterministic and stochastic engines.
//!
//! The physical system is a ladder of `N` bosonic modes feeding a lasing
//! cavity. Bosons hop down the ladder (mode `p` to `p+1`), emitting one
//! cavity photon per hop; the hop is stimulated both by the cavity
//! occupation and by the occupation of the target site.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("ladder length must be >= 2, got {0}")]
    LadderTooShort(usize),
    #[error("rate {name} must be finite and non-negative, got {value}")]
    BadRate { name: &'static str, value: f64 },
    #[error("hop rate must be > 0, got {0}")]
    NonPositiveHopRate(f64),
}

/// Pump acting on the first ladder mode, parameterized by independent
/// stimulated-gain and loss coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    /// Stimulated-gain rate coefficient on mode 1: gain rate is `gamma_up * (1 + n1)`.
    pub gamma_up: f64,
    /// Loss rate coefficient on mode 1: loss rate is `gamma_down * n1`.
    pub gamma_down: f64,
}

impl PumpSpec {
    /// Infinite-temperature reservoir: equal gain and loss coefficients.
    /// Net injection into an arbitrary state is exactly `gamma_g`.
    pub fn infinite_temperature(gamma_g: f64) -> Self {
        Self {
            gamma_up: gamma_g,
            gamma_down: gamma_g,
        }
    }

    /// Pure gain on the first mode, no pump-induced loss.
    pub fn pure_gain(gamma_g: f64) -> Self {
        Self {
            gamma_up: gamma_g,
            gamma_down: 0.0,
        }
    }

    /// Literal two-dissipator mapping with gain weight `zeta` in `[0, 1]`:
    /// `(gamma_up, gamma_down) = (gamma_g * zeta, gamma_g * (1 - zeta))`.
    pub fn lindblad(gamma_g: f64, zeta: f64) -> Self {
        Self {
            gamma_up: gamma_g * zeta,
            gamma_down: gamma_g * (1.0 - zeta),
        }
    }

    /// Net mean injection rate into mode 1 when `n1 = 0` grows linearly;
    /// for the infinite-temperature preset this is `gamma_up` independent of `n1`.
    pub fn net_injection(&self, n1: f64) -> f64 {
        self.gamma_up * (1.0 + n1) - self.gamma_down * n1
    }

    pub fn off() -> Self {
        Self {
            gamma_up: 0.0,
            gamma_down: 0.0,
        }
    }
}

/// Named pump presets, used by sweeps that vary only `gamma_g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PumpPreset {
    InfiniteTemperature,
    PureGain,
}

impl PumpPreset {
    pub fn spec(&self, gamma_g: f64) -> PumpSpec {
        match self {
            PumpPreset::InfiniteTemperature => PumpSpec::infinite_temperature(gamma_g),
            PumpPreset::PureGain => PumpSpec::pure_gain(gamma_g),
        }
    }
}

/// All model rates and sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Ladder length (number of gain modes), `>= 2`.
    pub n_modes: usize,
    /// Hop rate down the ladder, `> 0`.
    pub gamma_hop: f64,
    /// Pump on the first ladder mode.
    pub pump: PumpSpec,
    /// Cavity photon loss rate.
    pub kappa_c: f64,
    /// Loss rate on the last ladder mode.
    pub kappa_l: f64,
    /// Intrinsic loss rate applied to every ladder mode.
    pub kappa_0: f64,
}

impl SystemParams {
    pub fn new(
        n_modes: usize,
        gamma_hop: f64,
        pump: PumpSpec,
        kappa_c: f64,
        kappa_l: f64,
        kappa_0: f64,
    ) -> Result<Self, ModelError> {
        let params = Self {
            n_modes,
            gamma_hop,
            pump,
            kappa_c,
            kappa_l,
            kappa_0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_modes < 2 {
            return Err(ModelError::LadderTooShort(self.n_modes));
        }
        if !(self.gamma_hop.is_finite() && self.gamma_hop > 0.0) {
            return Err(ModelError::NonPositiveHopRate(self.gamma_hop));
        }
        for (name, value) in [
            ("gamma_up", self.pump.gamma_up),
            ("gamma_down", self.pump.gamma_down),
            ("kappa_c", self.kappa_c),
            ("kappa_l", self.kappa_l),
            ("kappa_0", self.kappa_0),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ModelError::BadRate { name, value });
            }
        }
        Ok(())
    }
}

/// Integer occupation configuration `(n_c; n_1 .. n_N)` for the stochastic
/// process. Ladder sites are 0-indexed internally; site `p` in formulas is
/// `n[p-1]` here.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockConfig {
    pub n_c: u64,
    pub n: Vec<u64>,
}

impl FockConfig {
    pub fn empty(n_modes: usize) -> Self {
        Self {
            n_c: 0,
            n: vec![0; n_modes],
        }
    }

    /// Total ladder occupation (excludes the cavity).
    pub fn ladder_total(&self) -> u64 {
        self.n.iter().sum()
    }
}

/// Real-valued mean-field state: cavity amplitude (non-negative; the
/// dynamics preserves the amplitude phase, so only the modulus is tracked)
/// plus the real occupation profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub a_c: f64,
    pub n: Vec<f64>,
}

impl MeanFieldState {
    pub fn empty(n_modes: usize) -> Self {
        Self {
            a_c: 0.0,
            n: vec![0.0; n_modes],
        }
    }

    /// Empty ladder with a seed cavity amplitude.
    pub fn seeded(n_modes: usize, a_c: f64) -> Self {
        Self {
            a_c,
            n: vec![0.0; n_modes],
        }
    }

    /// Cavity photon number `a_c^2`.
    pub fn n_cavity(&self) -> f64 {
        self.a_c * self.a_c
    }

    /// Flat layout `[a_c, n_1, .., n_N]` for the ODE integrator.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n.len() + 1);
        v.push(self.a_c);
        v.extend_from_slice(&self.n);
        v
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        Self {
            a_c: flat[0],
            n: flat[1..].to_vec(),
        }
    }
}

/// One elementary jump of the stochastic process. Site indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JumpEvent {
    /// Boson hops from ladder site `p` to `p+1`, emitting one cavity photon.
    Hop(usize),
    /// Pump injects one boson into the first ladder mode.
    Gain1,
    /// Pump removes one boson from the first ladder mode.
    Loss1,
    /// Boson leaves through the last ladder mode.
    LossN,
    /// Cavity photon emitted to the output.
    LossCavity,
    /// Intrinsic loss on ladder site `p`.
    Loss0(usize),
}

impl JumpEvent {
    /// Apply the occupation delta in place. Panics if the event would drive
    /// an occupation negative; the rate construction guarantees such events
    /// are never drawn.
    pub fn apply(&self, cfg: &mut FockConfig) {
        match *self {
            JumpEvent::Hop(p) => {
                assert!(cfg.n[p] > 0, "hop from empty site {p}");
                cfg.n[p] -= 1;
                cfg.n[p + 1] += 1;
                cfg.n_c += 1;
            }
            JumpEvent::Gain1 => cfg.n[0] += 1,
            JumpEvent::Loss1 => {
                assert!(cfg.n[0] > 0, "pump loss from empty mode 1");
                cfg.n[0] -= 1;
            }
            JumpEvent::LossN => {
                let last = cfg.n.len() - 1;
                assert!(cfg.n[last] > 0, "loss from empty last mode");
                cfg.n[last] -= 1;
            }
            JumpEvent::LossCavity => {
                assert!(cfg.n_c > 0, "loss from empty cavity");
                cfg.n_c -= 1;
            }
            JumpEvent::Loss0(p) => {
                assert!(cfg.n[p] > 0, "intrinsic loss from empty site {p}");
                cfg.n[p] -= 1;
            }
        }
    }
}

/// Bosonic bond current `Gamma * n_p * (1 + n_next)`.
pub fn bond_current(n_p: f64, n_next: f64, gamma_hop: f64) -> f64 {
    gamma_hop * n_p * (1.0 + n_next)
}

/// Total cumulative current `sum_{p=1}^{N-1} J_{p,p+1}` over the ladder
/// (un-enhanced by the cavity).
pub fn cumulative_current(state: &MeanFieldState, params: &SystemParams) -> f64 {
    state
        .n
        .windows(2)
        .map(|w| bond_current(w[0], w[1], params.gamma_hop))
        .sum()
}

/// Staggered population `sum_p (-1)^p (n_p - n_1)`, the zig-zag condensation
/// order parameter.
pub fn staggered_population(n: &[f64]) -> f64 {
    let n1 = n[0];
    n.iter()
        .enumerate()
        .map(|(i, &np)| {
            // formula index p = i + 1
            let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
            sign * (np - n1)
        })
        .sum()
}

/// Mean-field drift: time derivative of `(a_c, n_1 .. n_N)`.
///
/// Ladder currents are enhanced by the cavity factor `(1 + a_c^2)`, while
/// the cavity gain uses the bare cumulative current:
///
/// ```text
/// dn_p/dt = (1 + a_c^2)(J_{p-1,p} - J_{p,p+1})
///           + delta_{p,1} (gamma_up (1 + n_1) - gamma_down n_1)
///           - delta_{p,N} kappa_l n_p - kappa_0 n_p
/// da_c/dt = (J_cum - kappa_c) a_c / 2
/// ```
pub fn meanfield_drift(state: &MeanFieldState, params: &SystemParams) -> MeanFieldState {
    let n = &state.n;
    let n_modes = n.len();
    let stim = 1.0 + state.a_c * state.a_c;
    let mut dn = vec![0.0; n_modes];
    let mut j_cum = 0.0;
    let mut j_prev = 0.0; // J_{0,1} = 0
    for p in 0..n_modes {
        let j_next = if p + 1 < n_modes {
            bond_current(n[p], n[p + 1], params.gamma_hop)
        } else {
            0.0 // J_{N,N+1} = 0
        };
        dn[p] = stim * (j_prev - j_next) - params.kappa_0 * n[p];
        j_cum += j_next;
        j_prev = j_next;
    }
    dn[0] += params.pump.net_injection(n[0]);
    dn[n_modes - 1] -= params.kappa_l * n[n_modes - 1];
    let da_c = 0.5 * (j_cum - params.kappa_c) * state.a_c;
    MeanFieldState { a_c: da_c, n: dn }
}

/// All jump channels with nonzero rate for the given configuration.
///
/// Hop(p): `Gamma (1+n_c) n_p (1+n_{p+1})`; Gain1: `gamma_up (1+n_1)`;
/// Loss1: `gamma_down n_1`; LossN: `kappa_l n_N`; LossCavity: `kappa_c n_c`;
/// Loss0(p): `kappa_0 n_p`.
pub fn jump_rate_table(cfg: &FockConfig, params: &SystemParams) -> Vec<(JumpEvent, f64)> {
    let mut table = Vec::with_capacity(2 * cfg.n.len() + 4);
    fill_jump_rates(cfg, params, &mut table);
    table
}

/// Allocation-free variant for the hot simulation loop.
pub fn fill_jump_rates(
    cfg: &FockConfig,
    params: &SystemParams,
    table: &mut Vec<(JumpEvent, f64)>,
) {
    table.clear();
    let n = &cfg.n;
    let n_modes = n.len();
    let cavity_stim = params.gamma_hop * (1.0 + cfg.n_c as f64);
    for p in 0..n_modes - 1 {
        if n[p] > 0 {
            let rate = cavity_stim * n[p] as f64 * (1.0 + n[p + 1] as f64);
            table.push((JumpEvent::Hop(p), rate));
        }
    }
    if params.pump.gamma_up > 0.0 {
        table.push((JumpEvent::Gain1, params.pump.gamma_up * (1.0 + n[0] as f64)));
    }
    if params.pump.gamma_down > 0.0 && n[0] > 0 {
        table.push((JumpEvent::Loss1, params.pump.gamma_down * n[0] as f64));
    }
    if params.kappa_l > 0.0 && n[n_modes - 1] > 0 {
        table.push((JumpEvent::LossN, params.kappa_l * n[n_modes - 1] as f64));
    }
    if params.kappa_c > 0.0 && cfg.n_c > 0 {
        table.push((JumpEvent::LossCavity, params.kappa_c * cfg.n_c as f64));
    }
    if params.kappa_0 > 0.0 {
        for p in 0..n_modes {
            if n[p] > 0 {
                table.push((JumpEvent::Loss0(p), params.kappa_0 * n[p] as f64));
            }
        }
    }
}
