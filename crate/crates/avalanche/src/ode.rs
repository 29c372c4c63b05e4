//! Adaptive embedded Runge-Kutta integrator (Dormand-Prince 5(4)) with
//! dense output onto a caller-supplied sample grid.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (step {h}); parameters too stiff or degenerate")]
    StepSizeUnderflow { t: f64, h: f64 },
}

// Dormand-Prince coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [
    1.0 / 5.0,
    3.0 / 10.0,
    4.0 / 5.0,
    8.0 / 9.0,
    1.0,
    1.0,
];
// 5th order solution weights (same as last A row) and 4th order embedded weights.
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate `dy/dt = f(t, y)` from `t0` to `t_end`, writing the solution at
/// each point of the strictly increasing `sample_times` grid into `out`.
///
/// `clamp` is applied after every accepted step (occupations that dip
/// slightly negative get pinned back to zero). Sampled states come from
/// cubic Hermite interpolation over the accepted step.
pub fn integrate_adaptive<F, G>(
    f: F,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
    sample_times: &[f64],
    mut clamp: G,
) -> Result<Vec<Vec<f64>>, OdeError>
where
    F: Fn(f64, &[f64], &mut [f64]),
    G: FnMut(&mut [f64]),
{
    let dim = y0.len();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; dim]; 7];
    f(t, &y, &mut k[0]);

    let mut out: Vec<Vec<f64>> = Vec::with_capacity(sample_times.len());
    let mut next_sample = 0;
    while next_sample < sample_times.len() && sample_times[next_sample] <= t0 {
        out.push(y.clone());
        next_sample += 1;
    }

    let mut h = initial_step(t0, t_end, &y, &k[0], rel_tol, abs_tol);
    let h_min = (t_end - t0).abs() * 1e-14 + f64::MIN_POSITIVE;
    let mut y_trial = vec![0.0; dim];
    let mut y_stage = vec![0.0; dim];

    while t < t_end {
        if h < h_min {
            return Err(OdeError::StepSizeUnderflow { t, h });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        for stage in 0..6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage + 1) {
                    acc += A[stage][j] * kj[i];
                }
                y_stage[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(stage + 1);
            let _ = head;
            f(t + C[stage] * h, &y_stage, &mut tail[0]);
        }

        let mut err_norm: f64 = 0.0;
        for i in 0..dim {
            let mut y5 = 0.0;
            let mut y4 = 0.0;
            for (j, kj) in k.iter().enumerate() {
                y5 += B5[j] * kj[i];
                y4 += B4[j] * kj[i];
            }
            y_trial[i] = y[i] + h * y5;
            let err = h * (y5 - y4);
            let scale = abs_tol + rel_tol * y[i].abs().max(y_trial[i].abs());
            err_norm = err_norm.max((err / scale).abs());
        }

        if err_norm <= 1.0 {
            // accepted; FSAL: k[6] is f at the new point
            let t_new = t + h;
            clamp(&mut y_trial);
            while next_sample < sample_times.len() && sample_times[next_sample] <= t_new {
                let ts = sample_times[next_sample];
                let theta = (ts - t) / h;
                let mut ys = hermite(&y, &k[0], &y_trial, &k[6], h, theta);
                clamp(&mut ys);
                out.push(ys);
                next_sample += 1;
            }
            std::mem::swap(&mut y, &mut y_trial);
            t = t_new;
            k.swap(0, 6);
            f(t, &y, &mut k[0]); // recompute after clamping
        }

        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }

    // Grid points at exactly t_end (within roundoff) that were not emitted.
    while next_sample < sample_times.len() && sample_times[next_sample] <= t_end * (1.0 + 1e-12) {
        out.push(y.clone());
        next_sample += 1;
    }
    Ok(out)
}

fn hermite(y0: &[f64], f0: &[f64], y1: &[f64], f1: &[f64], h: f64, theta: f64) -> Vec<f64> {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    y0.iter()
        .zip(f0)
        .zip(y1.iter().zip(f1))
        .map(|((&y0i, &f0i), (&y1i, &f1i))| h00 * y0i + h * h10 * f0i + h01 * y1i + h * h11 * f1i)
        .collect()
}

fn initial_step(t0: f64, t_end: f64, y: &[f64], dy: &[f64], rel_tol: f64, abs_tol: f64) -> f64 {
    let d0: f64 = y
        .iter()
        .map(|&v| {
            let s = abs_tol + rel_tol * v.abs();
            (v / s).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    let d1: f64 = y
        .iter()
        .zip(dy)
        .map(|(&v, &d)| {
            let s = abs_tol + rel_tol * v.abs();
            (d / s).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * (t_end - t0)
    } else {
        0.01 * d0 / d1
    };
    h0.min((t_end - t0) * 0.1).max(f64::MIN_POSITIVE)
}
