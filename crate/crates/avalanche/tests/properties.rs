//! Randomized structural checks on the public API.

use proptest::prelude::*;

use avalanche::analysis::{autocorrelation, spectrum_result, SpectrumConfig};
use avalanche::circuit::{b_coefficient, cancellation_residuals, AnglePair, CircuitParams};
use avalanche::eventlog::{decode, encode};
use avalanche::meanfield::integrate;
use avalanche::model::{
    jump_rate_table, FockConfig, JumpEvent, MeanFieldState, PumpSpec, SystemParams,
};

fn arb_event() -> impl Strategy<Value = (f64, JumpEvent)> {
    let kind = prop_oneof![
        (0usize..100).prop_map(JumpEvent::Hop),
        Just(JumpEvent::Gain1),
        Just(JumpEvent::Loss1),
        Just(JumpEvent::LossN),
        Just(JumpEvent::LossCavity),
        (0usize..100).prop_map(JumpEvent::Loss0),
    ];
    (0.0..1e12f64, kind)
}

fn arb_config() -> impl Strategy<Value = FockConfig> {
    (0u64..6, prop::collection::vec(0u64..6, 2..8))
        .prop_map(|(n_c, n)| FockConfig { n_c, n })
}

fn arb_params(n_modes: usize) -> impl Strategy<Value = SystemParams> {
    (
        1e-3..10.0f64,
        0.0..10.0f64,
        0.0..10.0f64,
        0.0..10.0f64,
        0.0..10.0f64,
        0.0..1.0f64,
    )
        .prop_map(move |(hop, up, down, kc, kl, k0)| SystemParams {
            n_modes,
            gamma_hop: hop,
            pump: PumpSpec {
                gamma_up: up,
                gamma_down: down,
            },
            kappa_c: kc,
            kappa_l: kl,
            kappa_0: k0,
        })
}

proptest! {
    #[test]
    fn eventlog_round_trip(events in prop::collection::vec(arb_event(), 0..64)) {
        let decoded = decode(&encode(&events)).unwrap();
        prop_assert_eq!(decoded, events);
    }

    #[test]
    fn hop_conserves_ladder_total(mut cfg in arb_config(), p in 0usize..8) {
        prop_assume!(p + 1 < cfg.n.len() && cfg.n[p] > 0);
        let before_total = cfg.ladder_total();
        let before_cavity = cfg.n_c;
        JumpEvent::Hop(p).apply(&mut cfg);
        prop_assert_eq!(cfg.ladder_total(), before_total);
        prop_assert_eq!(cfg.n_c, before_cavity + 1);
    }

    #[test]
    fn listed_rates_are_applicable(cfg in arb_config()) {
        let params = SystemParams::new(
            cfg.n.len(), 1.0, PumpSpec::infinite_temperature(0.5), 2.0, 1.0, 0.1,
        ).unwrap();
        for (event, rate) in jump_rate_table(&cfg, &params) {
            prop_assert!(rate > 0.0);
            // apply() asserts internally that no occupation goes negative
            let mut copy = cfg.clone();
            event.apply(&mut copy);
        }
    }

    #[test]
    fn total_rate_monotone_in_occupations(cfg in arb_config(), params in arb_params(5)) {
        prop_assume!(cfg.n.len() >= 2);
        let mut params = params;
        params.n_modes = cfg.n.len();
        let total = |c: &FockConfig| -> f64 {
            jump_rate_table(c, &params).iter().map(|(_, r)| r).sum()
        };
        let base = total(&cfg);
        for i in 0..cfg.n.len() {
            let mut bumped = cfg.clone();
            bumped.n[i] += 1;
            prop_assert!(total(&bumped) >= base - 1e-12);
        }
        let mut bumped = cfg.clone();
        bumped.n_c += 1;
        prop_assert!(total(&bumped) >= base - 1e-12);
    }

    #[test]
    fn autocorrelation_zero_lag_is_variance(
        series in prop::collection::vec(-10.0..10.0f64, 16..200),
    ) {
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        prop_assume!(var > 1e-9);
        let c = autocorrelation(&series).unwrap();
        prop_assert!((c[0] - var).abs() <= 1e-10 * var.max(1.0));
    }

    #[test]
    fn beta_invariant_under_positive_scaling(
        series in prop::collection::vec(0.0..20.0f64, 64..256),
        exponent in -8i32..8,
    ) {
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        prop_assume!(var > 1e-6);
        let scale = 2f64.powi(exponent);
        let scaled: Vec<f64> = series.iter().map(|v| v * scale).collect();
        let config = SpectrumConfig::default();
        let a = spectrum_result(&[&series], 0.1, 1.0, &config);
        let b = spectrum_result(&[&scaled], 0.1, 1.0, &config);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.beta, b.beta),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "scaling changed the error outcome"),
        }
    }

    #[test]
    fn zero_amplitude_is_exact_fixed_point(params in arb_params(4)) {
        let initial = MeanFieldState {
            a_c: 0.0,
            n: vec![0.3, 1.0, 0.2, 0.0],
        };
        let trace = integrate(&params, &initial, 3.0, 1e-8, 31).unwrap();
        for state in &trace.states {
            prop_assert_eq!(state.a_c, 0.0);
        }
    }

    // fuzz-style robustness: both decoders must reject arbitrary input
    // gracefully, never panic
    #[test]
    fn eventlog_decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode(&bytes);
    }

    #[test]
    fn config_parse_never_panics(text in "\\PC*") {
        let _ = avalanche::config::RunConfig::from_str(&text);
    }

    #[test]
    fn residuals_superpose(
        s1 in prop::collection::vec(-1.0..1.0f64, 6),
        s2 in prop::collection::vec(-1.0..1.0f64, 6),
    ) {
        let build = |v: &[f64]| {
            let mut c = CircuitParams::reference();
            c.psi_third = AnglePair { sin: v[0], cos: v[1] };
            c.chi_half = AnglePair { sin: v[2], cos: v[3] };
            c.theta = AnglePair { sin: v[4], cos: v[5] };
            c
        };
        let sum: Vec<f64> = s1.iter().zip(&s2).map(|(a, b)| a + b).collect();
        let ra = cancellation_residuals(&build(&s1));
        let rb = cancellation_residuals(&build(&s2));
        let rs = cancellation_residuals(&build(&sum));
        for i in 0..3 {
            prop_assert!((rs[i] - (ra[i] + rb[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn b_coefficient_alternation_low_orders() {
    let c = CircuitParams::reference();
    for n in 1..=9u32 {
        let p = (n - 1) / 2;
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let expected = if n % 2 == 1 {
            sign * (c.alpha3 * 3f64.powi(-2 * p as i32) * c.psi_third.sin
                + c.alpha2 * 2f64.powi(-2 * p as i32) * c.chi_half.sin
                + c.theta.sin)
        } else {
            sign * (c.alpha3 * 3f64.powi(-2 * p as i32) * c.psi_third.cos
                + c.alpha2 * 2f64.powi(-2 * p as i32) * c.chi_half.cos
                + c.theta.cos)
        };
        assert_eq!(b_coefficient(n, &c), expected);
        // four orders up: same trig triple, branch weights damped by 3^4 / 2^4
        if n + 4 <= 9 {
            let hi = b_coefficient(n + 4, &c);
            let damped = if n % 2 == 1 {
                c.alpha3 * 3f64.powi(-2 * (p as i32 + 2)) * c.psi_third.sin
                    + c.alpha2 * 2f64.powi(-2 * (p as i32 + 2)) * c.chi_half.sin
                    + c.theta.sin
            } else {
                c.alpha3 * 3f64.powi(-2 * (p as i32 + 2)) * c.psi_third.cos
                    + c.alpha2 * 2f64.powi(-2 * (p as i32 + 2)) * c.chi_half.cos
                    + c.theta.cos
            };
            assert!((hi - sign * damped).abs() < 1e-15);
        }
    }
}
