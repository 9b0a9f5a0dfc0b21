//! Dormand–Prince 5(4) integrator for small autonomous-in-shape systems.

use crate::error::{Error, Result};

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
// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub type State = [f64; 2];

fn axpy(y: &State, h: f64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// Adaptive stepper. The step size is carried between calls so that
/// consecutive `advance` calls over short intervals stay cheap.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    h: f64,
}

impl Stepper {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            max_steps: 1_000_000,
            h: 0.0,
        }
    }

    /// Integrates `y' = f(t, y)` from `t0` to `t1`. `stop` is checked after
    /// every accepted step; when it fires the integration returns early with
    /// the time reached, and `y` holds the state there. Returns `None` when
    /// `t1` was reached.
    pub fn advance<F, S>(
        &mut self,
        f: &F,
        t0: f64,
        t1: f64,
        y: &mut State,
        mut stop: S,
    ) -> Result<Option<f64>>
    where
        F: Fn(f64, &State) -> State,
        S: FnMut(&State) -> bool,
    {
        let span = t1 - t0;
        if span <= 0.0 {
            return Ok(None);
        }
        if self.h <= 0.0 || self.h > span {
            self.h = span;
        }
        let mut t = t0;
        let mut k1 = f(t, y);
        let mut steps = 0;
        while t < t1 {
            steps += 1;
            if steps > self.max_steps {
                return Err(Error::convergence(
                    format!("ode step budget exhausted at t={t}"),
                    None,
                ));
            }
            let last = t + self.h >= t1;
            let h = if last { t1 - t } else { self.h };
            let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(
                t + C4 * h,
                &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                t + C5 * h,
                &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &axpy(
                    y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = axpy(
                y,
                h,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let t_new = if last { t1 } else { t + h };
            let k7 = f(t_new, &y_new);
            let mut err = 0.0_f64;
            for i in 0..2 {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                err = err.max((e / scale).abs());
            }
            if !err.is_finite() {
                if h < 1e-14 * t1.abs().max(1.0) {
                    return Err(Error::Numeric(format!(
                        "ode state became non-finite at t={t}"
                    )));
                }
                self.h = 0.25 * h;
                continue;
            }
            if err <= 1.0 {
                t = t_new;
                *y = y_new;
                k1 = k7;
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).min(5.0)
                };
                if !last {
                    self.h = h * grow.max(1.0);
                } else {
                    self.h = self.h.max(h);
                }
                if stop(y) {
                    return Ok(Some(t));
                }
            } else {
                self.h = h * (0.9 * err.powf(-0.25)).max(0.1);
                if self.h < 1e-14 * t1.abs().max(1.0) {
                    return Err(Error::Numeric(format!("ode step underflow at t={t}")));
                }
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let f = |_t: f64, y: &State| [y[1], -y[0]];
        let mut s = Stepper::new(1e-12, 1e-14);
        let mut y = [1.0, 0.0];
        let mut t = 0.0;
        let dt = 2.0 * std::f64::consts::PI / 100.0;
        for _ in 0..100 {
            s.advance(&f, t, t + dt, &mut y, |_| false).unwrap();
            t += dt;
        }
        assert!((y[0] - 1.0).abs() < 1e-10 && y[1].abs() < 1e-10, "{y:?}");
    }

    #[test]
    fn stop_condition_fires() {
        let f = |_t: f64, _y: &State| [-1.0, 0.0];
        let mut s = Stepper::new(1e-10, 1e-12);
        let mut y = [1.0, 0.0];
        let stopped = s.advance(&f, 0.0, 5.0, &mut y, |y| y[0] < 0.0).unwrap();
        assert!(stopped.is_some());
        assert!(y[0] < 0.0);
    }
}
