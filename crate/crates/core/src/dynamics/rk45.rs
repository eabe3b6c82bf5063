//! Dormand–Prince 5(4) with PI step control and positivity rejection.

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
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
/// Difference between the fifth- and fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Values in `(−CLAMP, 0)` are set to zero; anything lower rejects the step.
pub const CLAMP: f64 = 1e-14;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFailure {
    Underflow { t: f64 },
    TooManySteps { t: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

/// Integrates `y' = f(y)` through the increasing `outputs`, calling `sample`
/// at `t = 0` and at every output time. The first `controlled` components
/// drive the error estimate and must stay nonnegative; the rest are
/// carried along.
pub fn solve<F, S>(
    mut f: F,
    y0: &[f64],
    controlled: usize,
    outputs: &[f64],
    tol: Tolerances,
    mut sample: S,
) -> Result<StepStats, (StepFailure, StepStats)>
where
    F: FnMut(&[f64], &mut [f64]),
    S: FnMut(f64, &[f64]),
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut stats = StepStats::default();
    let mut t = 0.0;
    sample(t, &y);
    let Some(&t_end) = outputs.last() else {
        return Ok(stats);
    };

    f(&y, &mut k[0]);
    let mut h = (1e-6 * t_end.max(1.0)).min(tol.max_step).min(t_end);
    let mut err_prev: f64 = 1.0;
    let mut next = 0;

    while next < outputs.len() {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err((StepFailure::TooManySteps { t }, stats));
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err((StepFailure::Underflow { t }, stats));
        }
        let target = outputs[next];
        let truncated = t + h >= target;
        let h_step = if truncated { target - t } else { h };

        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + h_step * acc;
            }
            f(&stage, &mut k[s]);
        }
        // Stage 7 was evaluated at the fifth-order solution.
        y_new.copy_from_slice(&stage);

        let mut err: f64 = 0.0;
        for i in 0..controlled {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            let sc = tol.abs_tol + tol.rel_tol * y[i].abs().max(y_new[i].abs());
            err = err.max((h_step * e).abs() / sc);
        }
        let negative = y_new[..controlled]
            .iter()
            .any(|&v| v < -CLAMP || !v.is_finite());

        if negative || !err.is_finite() || err > 1.0 {
            stats.rejected += 1;
            let factor = if negative || !err.is_finite() {
                0.5
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 0.5)
            };
            h = h_step * factor;
            continue;
        }

        stats.accepted += 1;
        for v in y_new[..controlled].iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        t = if truncated { target } else { t + h_step };
        std::mem::swap(&mut y, &mut y_new);
        if y[..controlled]
            .iter()
            .zip(&stage[..controlled])
            .any(|(a, b)| a != b)
        {
            f(&y, &mut k[0]);
        } else {
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
        }

        let err_c = err.max(1e-10);
        let factor = (0.9 * err_c.powf(-0.14) * err_prev.powf(0.08)).clamp(0.2, 5.0);
        err_prev = err_c;
        if !truncated || h_step >= h {
            h = (h_step * factor).min(tol.max_step);
        }

        if truncated {
            sample(t, &y);
            next += 1;
        }
    }
    Ok(stats)
}
