//! Embedded Dormand–Prince 5(4) integrator with per-step manifold projection.

use crate::error::{Error, Result};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
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
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

pub type Rhs<'a> = dyn Fn(&[f64], &mut [f64]) + Sync + 'a;
pub type Projector<'a> = dyn Fn(&mut [f64]) + Sync + 'a;

/// Stateful adaptive integrator of an autonomous system.
pub struct Integrator<'a> {
    rhs: &'a Rhs<'a>,
    project: &'a Projector<'a>,
    tol: f64,
    pub t: f64,
    pub y: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    direction: f64,
}

impl<'a> Integrator<'a> {
    pub fn new(
        rhs: &'a Rhs<'a>,
        project: &'a Projector<'a>,
        y0: &[f64],
        tol: f64,
        backward: bool,
    ) -> Self {
        let n = y0.len();
        let mut k: [Vec<f64>; 7] = Default::default();
        for v in k.iter_mut() {
            *v = vec![0.0; n];
        }
        rhs(y0, &mut k[0]);
        let scale: f64 = k[0].iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
        let h = (0.01 / scale).min(0.1) * tol.powf(0.2).max(1e-3) * 10.0;
        Self {
            rhs,
            project,
            tol,
            t: 0.0,
            y: y0.to_vec(),
            h: h.min(0.1),
            k,
            ytmp: vec![0.0; n],
            direction: if backward { -1.0 } else { 1.0 },
        }
    }

    /// Takes one accepted step, never advancing `|t|` past `t_max` (>= 0).
    pub fn step(&mut self, t_max: f64) -> Result<()> {
        let n = self.y.len();
        loop {
            let remaining = t_max - self.t.abs();
            if remaining <= 0.0 {
                return Ok(());
            }
            let h = self.h.min(remaining);
            if h < 1e-14 * (1.0 + self.t.abs()) && h < remaining {
                return Err(Error::StepFailure { t: self.t, h });
            }
            let hs = h * self.direction;
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = self.y[i];
                    for (j, a) in A[s].iter().enumerate().take(s) {
                        acc += hs * a * self.k[j][i];
                    }
                    self.ytmp[i] = acc;
                }
                let rhs = self.rhs;
                rhs(&self.ytmp, &mut self.k[s]);
            }
            // The last stage is evaluated at the 5th-order solution (FSAL).
            let mut err_sq = 0.0;
            for i in 0..n {
                let mut e = 0.0;
                for s in 0..7 {
                    e += E[s] * self.k[s][i];
                }
                let sc = self.tol + self.tol * self.y[i].abs().max(self.ytmp[i].abs());
                err_sq += (hs * e / sc).powi(2);
            }
            let err = (err_sq / n as f64).sqrt();
            if err <= 1.0 {
                self.t += hs;
                std::mem::swap(&mut self.y, &mut self.ytmp);
                (self.project)(&mut self.y);
                (self.rhs)(&self.y, &mut self.k[0]);
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if h >= self.h * 0.999 || fac < 1.0 {
                    self.h = h * fac;
                } else {
                    // A clipped final step keeps the previous proposal.
                    self.h = self.h.max(h * fac);
                }
                return Ok(());
            }
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            self.h = h * fac;
        }
    }

    /// Integrates until `|t| = duration`.
    pub fn advance(&mut self, duration: f64) -> Result<()> {
        while self.t.abs() < duration {
            self.step(duration)?;
        }
        Ok(())
    }
}

/// Flows `y0` for signed time `time`.
pub fn integrate(
    rhs: &Rhs<'_>,
    project: &Projector<'_>,
    y0: &[f64],
    time: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    if time == 0.0 {
        return Ok(y0.to_vec());
    }
    let mut it = Integrator::new(rhs, project, y0, tol, time < 0.0);
    it.advance(time.abs())?;
    Ok(it.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_closes_after_full_period() {
        let rhs = |y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0];
        };
        let proj = |_: &mut [f64]| {};
        let y = integrate(&rhs, &proj, &[1.0, 0.0], 2.0 * std::f64::consts::PI, 1e-12).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9, "{y:?}");
    }

    #[test]
    fn backward_flow_inverts_forward_flow() {
        let rhs = |y: &[f64], d: &mut [f64]| {
            d[0] = y[1];
            d[1] = -y[0].sin();
        };
        let proj = |_: &mut [f64]| {};
        let y1 = integrate(&rhs, &proj, &[0.3, 0.2], 5.0, 1e-12).unwrap();
        let y0 = integrate(&rhs, &proj, &y1, -5.0, 1e-12).unwrap();
        assert!((y0[0] - 0.3).abs() < 1e-9 && (y0[1] - 0.2).abs() < 1e-9);
    }

    #[test]
    fn exponential_growth_has_fifth_order_accuracy() {
        let rhs = |y: &[f64], d: &mut [f64]| d[0] = y[0];
        let proj = |_: &mut [f64]| {};
        let y = integrate(&rhs, &proj, &[1.0], 3.0, 1e-11).unwrap();
        assert!((y[0] - 3f64.exp()).abs() / 3f64.exp() < 1e-9);
    }
}
