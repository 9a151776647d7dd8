//! Traveling fronts `phi'' + c phi' + f(phi) = 0`, `phi(-inf) = 1`, `phi(+inf) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{Nonlinearity, Reaction};
use crate::ode::Dopri5;

/// Displacement from `(1, 0)` along the unstable direction.
pub const SHOOTING_OFFSET: f64 = 1e-6;
/// Integration stops once `phi` drops below this value.
pub const TAIL_FLOOR: f64 = 1e-8;
pub const SAMPLE_SPACING: f64 = 0.01;
const Z_BUDGET: f64 = 1e5;

/// `c* = 2 sqrt(f'(0))`
pub fn minimal_speed(nl: &Nonlinearity) -> f64 {
    2.0 * nl.fprime0().sqrt()
}

/// Smaller root of `a^2 - c a + f'(0) = 0`.
pub fn decay_rate(c: f64, nl: &Nonlinearity) -> Result<f64> {
    let r = nl.fprime0();
    let disc = c * c - 4.0 * r;
    if !(c > 0.0) || disc < -1e-12 * c * c {
        return Err(Error::OutOfRange {
            value: c,
            range: "[c*, inf)",
        });
    }
    Ok((c - disc.max(0.0).sqrt()) / 2.0)
}

/// Asymptotic speed of solutions with tail `e^{-alpha x}`.
pub fn expected_speed_from_tail(alpha: f64, nl: &Nonlinearity) -> f64 {
    let r = nl.fprime0();
    if alpha < r.sqrt() {
        alpha + r / alpha
    } else {
        minimal_speed(nl)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelingFront {
    pub c: f64,
    /// Uniform sample positions, shifted so that `phi(0) = 1/2`.
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    /// Exponential tail rate fitted on `phi` in `[1e-8, 1e-6]`.
    pub alpha_c: f64,
    /// Max-norm residual of the profile equation on interior samples.
    pub residual: f64,
    pub monotone: bool,
}

impl TravelingFront {
    /// `phi` at `z` by linear interpolation (clamped to the sampled range).
    pub fn value(&self, z: f64) -> f64 {
        crate::grid::interpolate(&self.z, &self.phi, z)
    }

    /// Samples as CSV with columns `z,phi,dphi`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["z", "phi", "dphi"])?;
        for k in 0..self.z.len() {
            w.write_record([self.z[k], self.phi[k], self.dphi[k]].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shoot the heteroclinic connection from `(1, 0)` to `(0, 0)`.
pub fn solve_profile(c: f64, nl: &Nonlinearity) -> Result<TravelingFront> {
    let c_star = minimal_speed(nl);
    if c < c_star * (1.0 - 1e-12) {
        return Err(Error::OutOfRange {
            value: c,
            range: "[c*, inf)",
        });
    }
    // linearisation at phi = 1: a^2 + c a + f'(1) = 0, positive root
    let fp1 = nl.derivative(1.0);
    let lam = (-c + (c * c - 4.0 * fp1).sqrt()) / 2.0;
    let y0 = [1.0 - SHOOTING_OFFSET, -SHOOTING_OFFSET * lam];
    let rhs = |y: &[f64; 2]| [y[1], -c * y[1] - nl.rate(y[0])];

    // first pass locates phi = 1/2, the second samples on a grid through it
    let (z, phi, dphi) = shoot(&rhs, y0, 0.0)?;
    let j = phi
        .iter()
        .position(|&p| p < 0.5)
        .ok_or_else(|| Error::Integration("phi never crossed 1/2".into()))?;
    if j == 0 {
        return Err(Error::Integration("phi starts below 1/2".into()));
    }
    let z_half = hermite_root(
        z[j - 1],
        z[j],
        phi[j - 1] - 0.5,
        phi[j] - 0.5,
        dphi[j - 1],
        dphi[j],
    );
    let phase = z_half - (z_half / SAMPLE_SPACING).floor() * SAMPLE_SPACING;
    let (mut z, phi, dphi) = shoot(&rhs, y0, phase)?;
    for zk in &mut z {
        *zk -= z_half;
    }

    let monotone = phi.windows(2).all(|w| w[1] < w[0]);
    let residual = profile_residual(c, nl, &phi, &dphi, SAMPLE_SPACING);
    let alpha_c = tail_rate(&z, &phi)?;
    Ok(TravelingFront {
        c,
        z,
        phi,
        dphi,
        alpha_c,
        residual,
        monotone,
    })
}

type Samples = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Integrate from `y0` at `z = 0`, sampling at `phase + k h` until `phi < TAIL_FLOOR`.
fn shoot(rhs: &impl Fn(&[f64; 2]) -> [f64; 2], y0: [f64; 2], phase: f64) -> Result<Samples> {
    let mut ode = Dopri5::new(rhs, 0.0, y0, 1e-12, 1e-16);
    let (mut z, mut phi, mut dphi) = (Vec::new(), Vec::new(), Vec::new());
    let mut k = 0usize;
    while ode.y[0] >= TAIL_FLOOR {
        let zk = phase + k as f64 * SAMPLE_SPACING;
        k += 1;
        if zk > Z_BUDGET {
            return Err(Error::Integration(format!(
                "phi did not fall below {TAIL_FLOOR} within z = {Z_BUDGET}"
            )));
        }
        ode.advance_to(zk)?;
        if !(ode.y[0] > -1e-3 && ode.y[0] < 1.0 + 1e-9) {
            return Err(Error::Integration(format!(
                "trajectory left (0, 1) at z = {zk}: phi = {}",
                ode.y[0]
            )));
        }
        z.push(zk);
        phi.push(ode.y[0]);
        dphi.push(ode.y[1]);
    }
    Ok((z, phi, dphi))
}

/// Root in `[a, b]` of the cubic Hermite interpolant of `(fa, da)`, `(fb, db)`.
fn hermite_root(a: f64, b: f64, fa: f64, fb: f64, da: f64, db: f64) -> f64 {
    let h = b - a;
    let eval = |s: f64| {
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * fa
            + (s3 - 2.0 * s2 + s) * h * da
            + (-2.0 * s3 + 3.0 * s2) * fb
            + (s3 - s2) * h * db
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if (eval(mid) > 0.0) == (fa > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    a + 0.5 * (lo + hi) * h
}

/// Max over interior samples of `|D psi + c psi + f(phi)|` and `|D phi - psi|`,
/// with `D` the fourth-order central difference.
fn profile_residual(c: f64, nl: &Nonlinearity, phi: &[f64], psi: &[f64], h: f64) -> f64 {
    let d =
        |v: &[f64], i: usize| (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * h);
    (2..phi.len().saturating_sub(2))
        .map(|i| {
            let eq = (d(psi, i) + c * psi[i] + nl.rate(phi[i])).abs();
            let consistency = (d(phi, i) - psi[i]).abs();
            eq.max(consistency)
        })
        .fold(0.0, f64::max)
}

/// Minus the least-squares slope of `ln phi` over samples with `phi` in `[1e-8, 1e-6]`.
fn tail_rate(z: &[f64], phi: &[f64]) -> Result<f64> {
    let (zs, ls): (Vec<f64>, Vec<f64>) = z
        .iter()
        .zip(phi)
        .filter(|(_, &p)| (TAIL_FLOOR..=1e-6).contains(&p))
        .map(|(&z, &p)| (z, p.ln()))
        .unzip();
    if zs.len() < 10 {
        return Err(Error::InsufficientData("too few tail samples".into()));
    }
    let (slope, _, _) = crate::levelsets::least_squares(&zs, &ls);
    Ok(-slope)
}
