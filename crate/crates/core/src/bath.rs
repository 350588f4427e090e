//! Thermal reservoir with a Gaussian-cutoff spectral density and the
//! second-order time-dependent coefficients of the damped-mode master
//! equation.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

/// Frequency integrals are truncated at this multiple of the cutoff.
pub const OMEGA_MAX_CUTOFFS: f64 = 6.0;

/// `J(w) = c (2 gamma0 w M / pi) (w / cutoff)^(n-1) exp(-w^2 / cutoff^2)`,
/// where `c` is the coupling factor (1 by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub gamma0: f64,
    pub cutoff: f64,
    pub exponent: u32,
    pub mass: f64,
    pub coupling_factor: f64,
}

impl SpectralDensity {
    pub fn new(gamma0: f64, cutoff: f64, exponent: u32) -> Result<Self> {
        let sd = Self { gamma0, cutoff, exponent, mass: 1.0, coupling_factor: 1.0 };
        sd.validate()?;
        Ok(sd)
    }

    pub fn ohmic(gamma0: f64, cutoff: f64) -> Result<Self> {
        Self::new(gamma0, cutoff, 1)
    }

    pub fn with_mass(mut self, mass: f64) -> Result<Self> {
        self.mass = mass;
        self.validate()?;
        Ok(self)
    }

    pub fn with_coupling_factor(mut self, factor: f64) -> Result<Self> {
        self.coupling_factor = factor;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("gamma0", self.gamma0)?;
        positive("cutoff", self.cutoff)?;
        positive("mass", self.mass)?;
        positive("coupling_factor", self.coupling_factor)?;
        if self.exponent == 0 {
            return Err(Error::Domain("reservoir exponent n must be >= 1".into()));
        }
        Ok(())
    }

    /// `J(w)` without the domain check.
    #[inline]
    pub fn eval(&self, omega: f64) -> f64 {
        let x = omega / self.cutoff;
        self.coupling_factor * 2.0 * self.gamma0 * omega * self.mass / PI
            * x.powi(self.exponent as i32 - 1)
            * (-x * x).exp()
    }

    pub fn omega_max(&self) -> f64 {
        OMEGA_MAX_CUTOFFS * self.cutoff
    }
}

pub fn spectral_density(sd: &SpectralDensity, omega: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!("frequency must be >= 0, got {omega}")));
    }
    Ok(sd.eval(omega))
}

/// Reservoir temperature in units of the oscillator quantum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalSpec {
    pub temperature: f64,
}

impl ThermalSpec {
    pub fn new(temperature: f64) -> Result<Self> {
        if !(temperature >= 0.0) || !temperature.is_finite() {
            return Err(Error::Domain(format!("temperature must be finite and >= 0, got {temperature}")));
        }
        Ok(Self { temperature })
    }

    /// `coth(w / 2T)`, with the zero-temperature branch pinned to 1.
    #[inline]
    pub fn coth_half(&self, omega: f64) -> f64 {
        if self.temperature == 0.0 {
            return 1.0;
        }
        let x = omega / (2.0 * self.temperature);
        if x > 20.0 {
            1.0
        } else {
            1.0 / x.tanh()
        }
    }
}

pub fn mean_occupation(th: &ThermalSpec, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("frequency must be > 0, got {omega}")));
    }
    if th.temperature == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (omega / th.temperature).exp_m1())
}

fn kernel_opts() -> QuadOptions {
    QuadOptions { rel_tol: 1e-8, abs_tol: 1e-12, max_intervals: 20_000 }
}

/// Noise kernel `nu(s) = ∫ J(w) coth(w/2T) cos(w s) dw`.
pub fn noise_kernel(sd: &SpectralDensity, th: &ThermalSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("kernel time must be >= 0, got {s}")));
    }
    let f = |w: f64| sd.eval(w) * th.coth_half(w) * (w * s).cos();
    Ok(quad::integrate(f, 0.0, sd.omega_max(), &kernel_opts())?.value)
}

/// Dissipation kernel `eta(s) = ∫ J(w) sin(w s) dw`.
pub fn dissipation_kernel(sd: &SpectralDensity, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("kernel time must be >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let f = |w: f64| sd.eval(w) * (w * s).sin();
    Ok(quad::integrate(f, 0.0, sd.omega_max(), &kernel_opts())?.value)
}

/// Damped-mode master-equation coefficients at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BathCoefficients {
    pub t: f64,
    /// Frequency shift, added to the squared frequency.
    pub freq_shift: f64,
    pub gamma2: f64,
    pub d2: f64,
    pub f2: f64,
}

impl BathCoefficients {
    pub fn zero(t: f64) -> Self {
        Self { t, ..Default::default() }
    }

    pub fn is_finite(&self) -> bool {
        [self.freq_shift, self.gamma2, self.d2, self.f2].iter().all(|x| x.is_finite())
    }
}

// Columns of the cumulative table: ∫eta cos, ∫eta sin, ∫nu cos, ∫nu sin.
type Row = [f64; 4];

const DECAY_REL: f64 = 1e-13;
const MAX_GRID: usize = 1_000_000;

/// Kernels tabulated on a uniform memory-time grid, and the running time
/// integrals that define the coefficients.
///
/// Built once; read-only afterwards. Beyond the tabulated range the kernels
/// are treated as zero and the coefficients keep their last value.
#[derive(Debug, Clone)]
pub struct BathModel {
    sd: SpectralDensity,
    th: ThermalSpec,
    omega2: f64,
    step: f64,
    eta: Vec<f64>,
    nu: Vec<f64>,
    table: Vec<Row>,
    markov: Row,
    counterterm: f64,
}

impl BathModel {
    /// Tabulates up to `horizon`, or until both kernels have decayed below
    /// `1e-13` of their peak, whichever is first.
    pub fn new(sd: SpectralDensity, th: ThermalSpec, omega2: f64, horizon: f64) -> Result<Self> {
        sd.validate()?;
        if !(omega2 > 0.0) || !omega2.is_finite() {
            return Err(Error::Domain(format!("damped-mode frequency must be > 0, got {omega2}")));
        }
        if !(horizon >= 0.0) {
            return Err(Error::Domain(format!("horizon must be >= 0, got {horizon}")));
        }
        let step = (1.0 / (20.0 * sd.cutoff)).min(1.0 / (20.0 * omega2));
        let min_span = 50.0 / sd.cutoff;
        let block = ((10.0 / sd.cutoff) / step).ceil().max(8.0) as usize;

        let mut eta = vec![0.0];
        let mut nu = vec![noise_kernel(&sd, &th, 0.0)?];
        let (mut eta_peak, nu_peak) = (0.0f64, nu[0].abs());
        loop {
            let k = eta.len();
            let s = k as f64 * step;
            let e = dissipation_kernel(&sd, s)?;
            let n = noise_kernel(&sd, &th, s)?;
            eta_peak = eta_peak.max(e.abs());
            eta.push(e);
            nu.push(n);

            // two extra nodes past the horizon keep the cubic stencil centred
            if s > horizon + 2.0 * step || eta.len() >= MAX_GRID {
                break;
            }
            if s >= min_span && k % block == 0 {
                let from = eta.len() - block;
                let tail_eta = eta[from..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let tail_nu = nu[from..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if tail_eta <= DECAY_REL * eta_peak && tail_nu <= DECAY_REL * nu_peak {
                    break;
                }
            }
        }

        let counterterm = {
            let f = |w: f64| if w > 0.0 { sd.eval(w) / w } else { 0.0 };
            2.0 / sd.mass * quad::integrate(f, 0.0, sd.omega_max(), &kernel_opts())?.value
        };

        let markov = markov_row(&sd, &th, omega2)?;
        let mut model = Self { sd, th, omega2, step, eta, nu, table: Vec::new(), markov, counterterm };
        model.table = model.accumulate()?;
        Ok(model)
    }

    fn accumulate(&self) -> Result<Vec<Row>> {
        let w = self.omega2;
        let opts = QuadOptions { rel_tol: 1e-12, abs_tol: 1e-15, max_intervals: 64 };
        let mut table = Vec::with_capacity(self.eta.len());
        let mut acc: Row = [0.0; 4];
        table.push(acc);
        for k in 0..self.eta.len() - 1 {
            let (a, b) = (k as f64 * self.step, (k + 1) as f64 * self.step);
            acc[0] += quad::integrate(|s| self.eta_at(s) * (w * s).cos(), a, b, &opts)?.value;
            acc[1] += quad::integrate(|s| self.eta_at(s) * (w * s).sin(), a, b, &opts)?.value;
            acc[2] += quad::integrate(|s| self.nu_at(s) * (w * s).cos(), a, b, &opts)?.value;
            acc[3] += quad::integrate(|s| self.nu_at(s) * (w * s).sin(), a, b, &opts)?.value;
            table.push(acc);
        }
        Ok(table)
    }

    fn interp(&self, samples: &[f64], s: f64) -> f64 {
        let n = samples.len();
        let x = s / self.step;
        if x < 0.0 || x > (n - 1) as f64 {
            return 0.0;
        }
        if n < 4 {
            let k = (x.floor() as usize).min(n - 2);
            let u = x - k as f64;
            return samples[k] * (1.0 - u) + samples[k + 1] * u;
        }
        // four-point Lagrange stencil, shifted inward at the ends
        let k = (x.floor() as usize).min(n - 2);
        let start = k.saturating_sub(1).min(n - 4);
        let u = x - start as f64;
        let y = &samples[start..start + 4];
        let (u0, u1, u2, u3) = (u, u - 1.0, u - 2.0, u - 3.0);
        -y[0] * u1 * u2 * u3 / 6.0 + y[1] * u0 * u2 * u3 / 2.0 - y[2] * u0 * u1 * u3 / 2.0 + y[3] * u0 * u1 * u2 / 6.0
    }

    /// Interpolated dissipation kernel.
    pub fn eta_at(&self, s: f64) -> f64 {
        self.interp(&self.eta, s)
    }

    /// Interpolated noise kernel.
    pub fn nu_at(&self, s: f64) -> f64 {
        self.interp(&self.nu, s)
    }

    pub fn spectral_density(&self) -> &SpectralDensity {
        &self.sd
    }

    pub fn thermal(&self) -> &ThermalSpec {
        &self.th
    }

    pub fn omega2(&self) -> f64 {
        self.omega2
    }

    pub fn grid_step(&self) -> f64 {
        self.step
    }

    /// End of the tabulated memory-time range.
    pub fn kernel_span(&self) -> f64 {
        (self.eta.len() - 1) as f64 * self.step
    }

    /// Static shift `(2/M) ∫ J(w)/w dw` that cancels the asymptotic
    /// frequency renormalization of the damped mode.
    pub fn counterterm(&self) -> f64 {
        self.counterterm
    }

    fn row_to_coeffs(&self, t: f64, row: &Row) -> BathCoefficients {
        let m = self.sd.mass;
        BathCoefficients {
            t,
            freq_shift: -2.0 / m * row[0],
            gamma2: row[1] / (m * self.omega2),
            d2: row[2],
            f2: -row[3] / (m * self.omega2),
        }
    }

    fn integrand_row(&self, k: usize) -> Row {
        let s = k as f64 * self.step;
        let (c, sn) = ((self.omega2 * s).cos(), (self.omega2 * s).sin());
        [self.eta[k] * c, self.eta[k] * sn, self.nu[k] * c, self.nu[k] * sn]
    }

    pub fn coefficients_at(&self, t: f64) -> BathCoefficients {
        if t <= 0.0 {
            return BathCoefficients::zero(t.max(0.0));
        }
        let last = self.table.len() - 1;
        let x = t / self.step;
        if x >= last as f64 {
            return self.row_to_coeffs(t, &self.table[last]);
        }
        // cubic Hermite with the exact integrand as nodal derivative
        let k = x.floor() as usize;
        let u = x - k as f64;
        let (y0, y1) = (&self.table[k], &self.table[k + 1]);
        let (d0, d1) = (self.integrand_row(k), self.integrand_row(k + 1));
        let h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
        let h10 = u * (1.0 - u) * (1.0 - u);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        let mut row = [0.0; 4];
        for i in 0..4 {
            row[i] = h00 * y0[i] + h10 * self.step * d0[i] + h01 * y1[i] + h11 * self.step * d1[i];
        }
        self.row_to_coeffs(t, &row)
    }

    /// Asymptotic (`t -> infinity`) coefficients.
    pub fn markov(&self) -> BathCoefficients {
        self.row_to_coeffs(f64::INFINITY, &self.markov)
    }
}

/// `PV ∫_0^W g(w) / (w^2 - W0^2) dw` with the pole subtracted analytically.
fn principal_value(g: impl Fn(f64) -> f64, pole: f64, upper: f64) -> Result<f64> {
    if !(upper > pole) {
        return Err(Error::Domain("principal value needs the pole inside the range".into()));
    }
    let opts = kernel_opts();
    let g0 = g(pole);
    // 1/(w^2 - p^2) = (1/(w - p) - 1/(w + p)) / 2p
    let near = |w: f64| (g(w) - g0) / (w - pole);
    let minus = quad::integrate(near, 0.0, pole, &opts)?.value
        + quad::integrate(near, pole, upper, &opts)?.value
        + g0 * ((upper - pole) / pole).ln();
    let plus = quad::integrate(|w| g(w) / (w + pole), 0.0, upper, &opts)?.value;
    Ok((minus - plus) / (2.0 * pole))
}

/// Asymptotic memory integrals, evaluated in the frequency domain.
fn markov_row(sd: &SpectralDensity, th: &ThermalSpec, omega2: f64) -> Result<Row> {
    let upper = sd.omega_max().max(2.0 * omega2);
    let j = sd.eval(omega2);
    let eta_cos = principal_value(|w| sd.eval(w) * w, omega2, upper)?;
    let nu_sin = -principal_value(|w| sd.eval(w) * th.coth_half(w) * omega2, omega2, upper)?;
    Ok([eta_cos, PI / 2.0 * j, PI / 2.0 * j * th.coth_half(omega2), nu_sin])
}

/// One-off coefficient evaluation; builds a model covering `[0, t]`.
pub fn coefficients_at(sd: &SpectralDensity, th: &ThermalSpec, omega2: f64, t: f64) -> Result<BathCoefficients> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    Ok(BathModel::new(*sd, *th, omega2, t)?.coefficients_at(t))
}

/// Asymptotic coefficients. Warns through the returned flag when the cutoff
/// is not well above the damped-mode frequency.
pub fn markov_coefficients(
    sd: &SpectralDensity,
    th: &ThermalSpec,
    omega2: f64,
) -> Result<(BathCoefficients, Option<String>)> {
    let warning = (sd.cutoff <= 10.0 * omega2)
        .then(|| format!("cutoff {} is not >> damped-mode frequency {omega2}; Markov limit is approximate", sd.cutoff));
    let model = BathModel::new(*sd, *th, omega2, 0.0)?;
    Ok((model.markov(), warning))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn reference_bath() -> (SpectralDensity, ThermalSpec) {
        (SpectralDensity::ohmic(0.1, 100.0).unwrap(), ThermalSpec::new(10.0).unwrap())
    }

    #[test]
    fn spectral_density_values() {
        let (sd, _) = reference_bath();
        assert_eq!(spectral_density(&sd, 0.0).unwrap(), 0.0);
        // (2 * 0.1 * 100 / pi) e^-1
        assert_relative_eq!(spectral_density(&sd, 100.0).unwrap(), 2.341_993_260_972_767, max_relative = 1e-12);
        assert!(spectral_density(&sd, -1.0).is_err());
        let slope = spectral_density(&sd, 1e-6).unwrap() / 1e-6;
        assert_relative_eq!(slope, 2.0 * 0.1 / PI, max_relative = 1e-9);
    }

    #[test]
    fn invalid_spectral_density() {
        assert!(SpectralDensity::new(0.0, 1.0, 1).is_err());
        assert!(SpectralDensity::new(0.1, -1.0, 1).is_err());
        assert!(SpectralDensity::new(0.1, 1.0, 0).is_err());
    }

    #[test]
    fn occupation_values() {
        let th = ThermalSpec::new(10.0).unwrap();
        assert_relative_eq!(mean_occupation(&th, 1.0).unwrap(), 9.508_331_944_775_22, max_relative = 1e-12);
        let r = 0.5 * (2.0 * mean_occupation(&th, 1.0).unwrap() + 1.0).ln();
        assert_abs_diff_eq!(r, 1.498_282_560_558_830_8, epsilon = 1e-12);
        assert_eq!(mean_occupation(&ThermalSpec::new(0.0).unwrap(), 1.0).unwrap(), 0.0);
        assert!(mean_occupation(&ThermalSpec::new(1e-3).unwrap(), 1.0).unwrap() < 1e-300);
        assert!(mean_occupation(&th, 0.0).is_err());
    }

    #[test]
    fn kernel_edges() {
        let (sd, th) = reference_bath();
        assert_eq!(dissipation_kernel(&sd, 0.0).unwrap(), 0.0);
        let cold = ThermalSpec::new(0.0).unwrap();
        let total = quad::integrate(|w| sd.eval(w), 0.0, sd.omega_max(), &QuadOptions::default()).unwrap().value;
        assert_relative_eq!(noise_kernel(&sd, &cold, 0.0).unwrap(), total, max_relative = 1e-9);
        assert!(noise_kernel(&sd, &th, -0.1).is_err());
        assert!(dissipation_kernel(&sd, -0.1).is_err());
    }

    #[test]
    fn coefficients_vanish_at_zero() {
        let (sd, th) = reference_bath();
        let c = coefficients_at(&sd, &th, 1.0, 0.0).unwrap();
        assert_eq!(c, BathCoefficients::zero(0.0));
    }

    #[test]
    fn markov_limits() {
        let (sd, th) = reference_bath();
        let (m, warn) = markov_coefficients(&sd, &th, 1.0).unwrap();
        assert!(warn.is_none());
        assert_relative_eq!(m.gamma2, 0.1, max_relative = 0.05);
        let nbar = mean_occupation(&th, 1.0).unwrap();
        assert_relative_eq!(m.d2, 0.1 * (2.0 * nbar + 1.0), max_relative = 0.05);
        // frequency-domain route: (pi/2) J(W) / (M W) and (pi/2) J(W) coth(W/2T)
        assert_relative_eq!(m.gamma2, PI / 2.0 * sd.eval(1.0), max_relative = 1e-6);
        assert_relative_eq!(m.d2, PI / 2.0 * sd.eval(1.0) * th.coth_half(1.0), max_relative = 1e-6);
        assert!(m.f2.is_finite());
        let (_, warn) = markov_coefficients(&SpectralDensity::ohmic(0.1, 5.0).unwrap(), &th, 1.0).unwrap();
        assert!(warn.is_some());
    }

    #[test]
    fn counterterm_cancels_static_shift() {
        let (sd, th) = reference_bath();
        let model = BathModel::new(sd, th, 1.0, 5.0).unwrap();
        // Gaussian cutoff, n = 1: 2 gamma0 cutoff / sqrt(pi)
        assert_relative_eq!(model.counterterm(), 2.0 * 0.1 * 100.0 / PI.sqrt(), max_relative = 1e-9);
        let residual = model.markov().freq_shift + model.counterterm();
        assert!(residual.abs() < 1e-2, "residual shift {residual}");
    }

    #[test]
    fn interpolated_kernel_matches_direct() {
        let (sd, th) = reference_bath();
        let model = BathModel::new(sd, th, 1.0, 1.0).unwrap();
        for &s in &[0.0013, 0.0071, 0.02345, 0.1] {
            let direct = dissipation_kernel(&sd, s).unwrap();
            let peak = 220.0;
            assert!((model.eta_at(s) - direct).abs() < 1e-6 * peak, "eta at {s}");
            let direct = noise_kernel(&sd, &th, s).unwrap();
            assert!((model.nu_at(s) - direct).abs() < 1e-6 * model.nu_at(0.0), "nu at {s}");
        }
    }
}
