//! Dormand–Prince 5(4) with PI step-size control and continuous extension.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("tolerances must be positive (rtol={rtol}, atol={atol})")]
    BadTolerance { rtol: f64, atol: f64 },
    #[error("integration interval [{t0}, {t_end}] is empty or non-finite")]
    BadInterval { t0: f64, t_end: f64 },
    #[error("step size underflow at t={t:e} (h={h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t={t:e}")]
    NonFinite { t: f64 },
    #[error("step budget of {budget} exhausted at t={t:e}")]
    MaxSteps { t: f64, budget: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when zero.
    pub h_init: f64,
    /// Largest step; the full interval when zero.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-8,
            h_init: 0.0,
            h_max: 0.0,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FACC1: f64 = 5.0;
const FACC2: f64 = 0.1;

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: &Tolerances) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.atol + tol.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(f: &mut F, t0: f64, y0: &[f64], f0: &[f64], h_max: f64, tol: &Tolerances) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len().max(1) as f64;
    let sc = |y: f64| tol.atol + tol.rtol * y.abs();
    let dnf = (f0.iter().zip(y0).map(|(d, y)| (d / sc(*y)).powi(2)).sum::<f64>() / n).sqrt();
    let dny = (y0.iter().map(|y| (y / sc(*y)).powi(2)).sum::<f64>() / n).sqrt();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(h_max);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h * d).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(t0 + h, &y1, &mut f1);
    let der2 = (f1
        .iter()
        .zip(f0)
        .zip(y0)
        .map(|((a, b), y)| ((a - b) / sc(*y)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h;
    let der12 = der2.max(dnf);
    let h1 = if der12 <= 1e-15 {
        1e-6f64.max(h * 1e-3)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(h_max)
}

/// Integrates `y' = f(t, y)` on `[t0, t_end]` and calls `observe(t, y)` at
/// each requested output time (sorted, within the interval) using the
/// fifth-order dense output. Returns the state at `t_end`.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    output_times: &[f64],
    tol: &Tolerances,
    mut observe: O,
) -> Result<(Vec<f64>, IntegratorStats), IntegrateError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    O: FnMut(f64, &[f64]),
{
    if !(tol.rtol > 0.0 && tol.atol > 0.0) {
        return Err(IntegrateError::BadTolerance {
            rtol: tol.rtol,
            atol: tol.atol,
        });
    }
    if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
        return Err(IntegrateError::BadInterval { t0, t_end });
    }
    let dim = y0.len();
    let horizon = t_end - t0;
    let h_max = if tol.h_max > 0.0 { tol.h_max } else { horizon };
    let h_min = 1e-14 * horizon;
    let mut stats = IntegratorStats::default();

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut y_stage = vec![0.0; dim];
    let mut y_new = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut cont = vec![[0.0; 5]; dim];
    let mut interp = vec![0.0; dim];

    f(t0, &y, &mut k1);
    stats.evaluations += 1;
    if k1.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFinite { t: t0 });
    }

    let mut next_out = 0;
    while next_out < output_times.len() && output_times[next_out] <= t0 {
        observe(output_times[next_out], &y);
        next_out += 1;
    }

    let mut h = if tol.h_init > 0.0 {
        tol.h_init.min(h_max)
    } else {
        stats.evaluations += 1;
        initial_step(&mut f, t0, &y, &k1, h_max, tol)
    };
    let mut t = t0;
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let mut steps = 0usize;

    while t < t_end {
        if steps >= tol.max_steps {
            return Err(IntegrateError::MaxSteps {
                t,
                budget: tol.max_steps,
            });
        }
        if h < h_min {
            return Err(IntegrateError::StepUnderflow { t, h });
        }
        let last = t + 1.01 * h >= t_end;
        if last {
            h = t_end - t;
        }
        steps += 1;

        for i in 0..dim {
            y_stage[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &y_stage, &mut k2);
        for i in 0..dim {
            y_stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &y_stage, &mut k3);
        for i in 0..dim {
            y_stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &y_stage, &mut k4);
        for i in 0..dim {
            y_stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &y_stage, &mut k5);
        for i in 0..dim {
            y_stage[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t_end } else { t + h };
        f(t_new, &y_stage, &mut k6);
        for i in 0..dim {
            y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t_new, &y_new, &mut k7);
        stats.evaluations += 6;
        for i in 0..dim {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&err, &y, &y_new, tol);
        if !e.is_finite() {
            if y_new.iter().chain(&k7).any(|v| !v.is_finite()) && h <= h_min * 1e3 {
                return Err(IntegrateError::NonFinite { t });
            }
            h *= 0.1;
            stats.rejected += 1;
            last_rejected = true;
            continue;
        }

        let fac11 = e.powf(EXPO1);
        if e <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FACC2, FACC1);
            let mut h_new = (h / fac).min(h_max);
            if last_rejected {
                h_new = h_new.min(h);
            }
            facold = e.max(1e-4);
            stats.accepted += 1;

            for i in 0..dim {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                cont[i] = [
                    y[i],
                    ydiff,
                    bspl,
                    ydiff - h * k7[i] - bspl,
                    h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]),
                ];
            }
            while next_out < output_times.len() && output_times[next_out] <= t_new {
                let to = output_times[next_out];
                if to >= t_new {
                    observe(to, &y_new);
                } else {
                    let s = (to - t) / h;
                    let s1 = 1.0 - s;
                    for i in 0..dim {
                        let c = &cont[i];
                        interp[i] = c[0] + s * (c[1] + s1 * (c[2] + s * (c[3] + s1 * c[4])));
                    }
                    observe(to, &interp);
                }
                next_out += 1;
            }

            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            if y.iter().any(|v| !v.is_finite()) {
                return Err(IntegrateError::NonFinite { t });
            }
            last_rejected = false;
            h = h_new;
        } else {
            h /= FACC1.min(fac11 / SAFE);
            stats.rejected += 1;
            last_rejected = true;
        }
    }
    Ok((y, stats))
}

/// `count` uniformly spaced points covering `[t0, t_end]` inclusive.
pub fn uniform_times(t0: f64, t_end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![t_end],
        _ => (0..count)
            .map(|k| {
                if k == count - 1 {
                    t_end
                } else {
                    t0 + (t_end - t0) * k as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}
