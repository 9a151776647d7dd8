//! Adaptive Dormand–Prince 5(4) integration for small autonomous systems.

use crate::error::{Error, Result};

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
// error coefficients: 5th-order minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 10_000_000;

/// Stateful adaptive integrator for `y' = f(y)`, `y` in `R^N`.
pub struct Dopri5<F, const N: usize> {
    rhs: F,
    pub t: f64,
    pub y: [f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
    pub steps: usize,
}

impl<F, const N: usize> Dopri5<F, N>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    pub fn new(rhs: F, t0: f64, y0: [f64; N], rtol: f64, atol: f64) -> Self {
        Self {
            rhs,
            t: t0,
            y: y0,
            h: 1e-3,
            rtol,
            atol,
            steps: 0,
        }
    }

    /// Advance to exactly `t_target` (which may lie before or after `t`).
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        let dir = if t_target >= self.t { 1.0 } else { -1.0 };
        self.h = self.h.abs() * dir;
        let mut guard = 0usize;
        while (t_target - self.t) * dir > 0.0 {
            guard += 1;
            if guard > MAX_STEPS {
                return Err(Error::Integration("step budget exhausted".into()));
            }
            let remaining = t_target - self.t;
            let last = self.h.abs() >= remaining.abs();
            let h = if last { remaining } else { self.h };
            let (y_new, err) = self.trial(h);
            if !err.is_finite() {
                self.h *= 0.1;
                if self.h.abs() < 1e-300 {
                    return Err(Error::Integration("non-finite state".into()));
                }
                continue;
            }
            if err <= 1.0 {
                self.y = y_new;
                self.t = if last { t_target } else { self.t + h };
                self.steps += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // do not let a short final step shrink the working step size
            if !(last && err <= 1.0) {
                self.h = h * factor;
            }
            if self.h.abs() < 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::Integration(format!(
                    "step size underflow at t={}",
                    self.t
                )));
            }
        }
        Ok(())
    }

    fn trial(&self, h: f64) -> ([f64; N], f64) {
        let f = &self.rhs;
        let y = &self.y;
        let comb = |coef: &[(f64, &[f64; N])]| -> [f64; N] {
            let mut out = *y;
            for (c, k) in coef {
                for i in 0..N {
                    out[i] += h * c * k[i];
                }
            }
            out
        };
        let k1 = f(y);
        let k2 = f(&comb(&[(A21, &k1)]));
        let k3 = f(&comb(&[(A31, &k1), (A32, &k2)]));
        let k4 = f(&comb(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(&comb(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(&comb(&[
            (A61, &k1),
            (A62, &k2),
            (A63, &k3),
            (A64, &k4),
            (A65, &k5),
        ]));
        let y_new = comb(&[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(&y_new);
        let mut err = 0.0f64;
        for i in 0..N {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max((e / scale).abs());
        }
        (y_new, err)
    }
}

/// Integrate the scalar autonomous ODE `u' = rate(u)` from `u0` over `[0, t]`.
pub fn integrate_scalar(rate: impl Fn(f64) -> f64, u0: f64, t: f64, rtol: f64) -> Result<f64> {
    let mut solver = Dopri5::new(|y: &[f64; 1]| [rate(y[0])], 0.0, [u0], rtol, 1e-300);
    solver.advance_to(t)?;
    Ok(solver.y[0])
}

/// One classical fourth-order Runge–Kutta step for a scalar autonomous ODE.
#[inline]
pub fn rk4_step(rate: impl Fn(f64) -> f64, u: f64, h: f64) -> f64 {
    let k1 = rate(u);
    let k2 = rate(u + 0.5 * h * k1);
    let k3 = rate(u + 0.5 * h * k2);
    let k4 = rate(u + h * k3);
    u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let u = integrate_scalar(|u| u, 1.0, 2.0, 1e-12).unwrap();
        assert!((u - 2f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_period() {
        let mut s = Dopri5::new(|y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], 1e-11, 1e-13);
        s.advance_to(2.0 * std::f64::consts::PI).unwrap();
        assert!((s.y[0] - 1.0).abs() < 1e-9);
        assert!(s.y[1].abs() < 1e-9);
        // and back again
        s.advance_to(0.0).unwrap();
        assert!((s.y[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let run = |n: usize| {
            let h = 1.0 / n as f64;
            let mut u = 0.1;
            for _ in 0..n {
                u = rk4_step(|s| s * (1.0 - s), u, h);
            }
            u
        };
        let exact = 0.1 * 1f64.exp() / (1.0 + 0.1 * (1f64.exp() - 1.0));
        let e1 = (run(10) - exact).abs();
        let e2 = (run(20) - exact).abs();
        let order = (e1 / e2).log2();
        assert!(order > 3.7 && order < 4.3, "order {order}");
    }
}
