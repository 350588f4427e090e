//! Dormand–Prince 5(4) integrator with adaptive step size.
//!
//! The state is a flat `f64` slice; right-hand sides write the derivative
//! into a caller-provided buffer.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step allowed; `f64::INFINITY` for no limit.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-12, h_max: f64::INFINITY, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
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

// fifth minus embedded fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive integrator that carries its step size and FSAL stage between
/// calls, so a trajectory can be advanced output point by output point.
pub struct Dopri5<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    rhs: F,
    opts: OdeOptions,
    t: f64,
    y: Vec<f64>,
    h: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y_new: Vec<f64>,
    stats: OdeStats,
}

impl<F> Dopri5<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(mut rhs: F, t0: f64, y0: &[f64], opts: OdeOptions) -> Result<Self> {
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("initial state must be finite".into()));
        }
        let n = y0.len();
        let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
        rhs(t0, y0, &mut k[0]);
        let mut solver = Self {
            rhs,
            opts,
            t: t0,
            y: y0.to_vec(),
            h: 0.0,
            k,
            tmp: vec![0.0; n],
            y_new: vec![0.0; n],
            stats: OdeStats { evaluations: 1, ..Default::default() },
        };
        solver.h = solver.initial_step();
        Ok(solver)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[f64] {
        &self.y
    }

    pub fn stats(&self) -> OdeStats {
        self.stats
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.opts.abs_tol + self.opts.rel_tol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.y.len().max(1) as f64;
        let (mut d0, mut d1) = (0.0, 0.0);
        for i in 0..self.y.len() {
            let sc = self.scale(self.y[i], self.y[i]);
            d0 += (self.y[i] / sc).powi(2);
            d1 += (self.k[0][i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(self.opts.h_max)
    }

    fn attempt(&mut self, h: f64) -> f64 {
        let n = self.y.len();
        let t = self.t;
        let (y, tmp) = (&self.y, &mut self.tmp);
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;

        for i in 0..n {
            tmp[i] = y[i] + h * A21 * k1[i];
        }
        (self.rhs)(t + C2 * h, tmp, k2);
        for i in 0..n {
            tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        (self.rhs)(t + C3 * h, tmp, k3);
        for i in 0..n {
            tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        (self.rhs)(t + C4 * h, tmp, k4);
        for i in 0..n {
            tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        (self.rhs)(t + C5 * h, tmp, k5);
        for i in 0..n {
            tmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        (self.rhs)(t + h, tmp, k6);
        for i in 0..n {
            self.y_new[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        (self.rhs)(t + h, &self.y_new, k7);
        self.stats.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.opts.abs_tol + self.opts.rel_tol * y[i].abs().max(self.y_new[i].abs());
            err += (e / sc).powi(2);
        }
        (err / n.max(1) as f64).sqrt()
    }

    /// Advances exactly to `t_target`.
    pub fn advance_to(&mut self, t_target: f64) -> Result<()> {
        while self.t < t_target {
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(Error::NumericalFailure(format!(
                    "step budget of {} exhausted at t = {}",
                    self.opts.max_steps, self.t
                )));
            }
            let remaining = t_target - self.t;
            let clipped = self.h >= remaining;
            let h = if clipped { remaining } else { self.h };
            let h_min = 1e-14 * self.t.abs().max(1.0);
            if h < h_min && !clipped {
                return Err(Error::Stiffness { t: self.t, h });
            }

            let err = self.attempt(h);
            if !err.is_finite() {
                self.stats.rejected += 1;
                self.h = h * 0.1;
                if self.h < h_min {
                    return Err(Error::Stiffness { t: self.t, h: self.h });
                }
                continue;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                self.t = if clipped { t_target } else { self.t + h };
                std::mem::swap(&mut self.y, &mut self.y_new);
                let [k1, .., k7] = &mut self.k;
                std::mem::swap(k1, k7);
                self.stats.accepted += 1;
                let proposal = (h * factor).min(self.opts.h_max);
                // a clipped step says nothing about the natural step size
                if !clipped || proposal > self.h {
                    self.h = proposal;
                }
            } else {
                self.stats.rejected += 1;
                self.h = h * factor.min(1.0);
            }
        }
        Ok(())
    }
}

/// Integrates from `t0` and records the state at each of `times`
/// (non-decreasing, all `>= t0`).
pub fn solve<F>(rhs: F, t0: f64, y0: &[f64], times: &[f64], opts: OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut solver = Dopri5::new(rhs, t0, y0, opts)?;
    let mut out = Vec::with_capacity(times.len());
    let mut last = t0;
    for &t in times {
        if t < last {
            return Err(Error::Domain("output times must be non-decreasing and >= t0".into()));
        }
        solver.advance_to(t)?;
        out.push(solver.state().to_vec());
        last = t;
    }
    Ok(out)
}
