//! Dormand–Prince 5(4) with FSAL and PI-free standard step control.

pub(crate) const DIM: usize = 5;
pub(crate) type State = [f64; DIM];

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerance {
    pub rtol: f64,
    pub atol: State,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum StepError {
    Underflow { t: f64 },
    NonFinite { t: f64 },
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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for i in 0..DIM {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        out[i] += h * s;
    }
    out
}

/// Advance `y` from `t0` to `t1` adaptively. `h` is the suggested first step
/// and is updated with the last accepted step size for the next call.
/// `max_step` caps every step.
pub(crate) fn integrate<F>(
    f: &F,
    t0: f64,
    t1: f64,
    y: &mut State,
    h: &mut f64,
    max_step: f64,
    tol: &Tolerance,
) -> Result<usize, StepError>
where
    F: Fn(f64, &State) -> State,
{
    let span = t1 - t0;
    let min_step = span.abs() * 1e-12;
    let mut t = t0;
    let mut k1 = f(t, y);
    let mut steps = 0usize;
    while t < t1 {
        let mut step = h.min(max_step).min(t1 - t);
        // Avoid a sliver of a final step.
        if t + 1.01 * step >= t1 {
            step = t1 - t;
        }
        if step < min_step && t + step < t1 {
            return Err(StepError::Underflow { t });
        }
        let k2 = f(t + C2 * step, &axpy(y, step, &[(A21, &k1)]));
        let k3 = f(t + C3 * step, &axpy(y, step, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * step,
            &axpy(y, step, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * step,
            &axpy(y, step, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + step,
            &axpy(
                y,
                step,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            y,
            step,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let k7 = f(t + step, &y_new);

        let mut err = 0.0;
        for i in 0..DIM {
            let e = step
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol[i] + tol.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / DIM as f64).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            if step <= min_step {
                return Err(StepError::NonFinite { t });
            }
            *h = 0.1 * step;
            continue;
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if err <= 1.0 {
            t = if step == t1 - t { t1 } else { t + step };
            *y = y_new;
            k1 = k7;
            steps += 1;
            *h = step * factor;
        } else {
            *h = step * factor.min(1.0);
            if *h < min_step {
                return Err(StepError::Underflow { t });
            }
        }
    }
    Ok(steps)
}
