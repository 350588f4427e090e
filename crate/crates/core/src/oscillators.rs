//! Two coupled oscillators in the antisymmetric/symmetric basis.
//!
//! In that basis the antisymmetric mode (frequency `Omega_F`) evolves freely
//! and only the symmetric mode (frequency `Omega_2`) feels the reservoir, so
//! the ten independent covariances split into blocks of 3, 4 and 3.

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::bath::{mean_occupation, BathCoefficients, BathModel, ThermalSpec};
use crate::error::{Error, Result};
use crate::gaussian::{plus_minus_transform, ppt_negativity, CovarianceMatrix, Direction, ENTANGLEMENT_TOL};
use crate::ode::{self, OdeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorPair {
    pub mass: f64,
    pub omega: f64,
    /// Position-position coupling `lambda q1 q2`.
    pub coupling: f64,
}

impl OscillatorPair {
    pub fn new(mass: f64, omega: f64, coupling: f64) -> Result<Self> {
        let p = Self { mass, omega, coupling };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || !self.mass.is_finite() {
            return Err(Error::Domain(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::Domain(format!("frequency must be positive, got {}", self.omega)));
        }
        if !self.coupling.is_finite() {
            return Err(Error::Domain("coupling must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedFrequencies {
    /// Free (antisymmetric) mode.
    pub omega_f: f64,
    /// Damped (symmetric) mode.
    pub omega_2: f64,
}

pub fn transformed_frequencies(p: &OscillatorPair) -> Result<TransformedFrequencies> {
    p.validate()?;
    let w2 = p.omega * p.omega;
    let shift = p.coupling / p.mass;
    if shift >= w2 || -shift >= w2 {
        return Err(Error::Instability(format!(
            "|lambda| = {} must stay below M Omega^2 = {}",
            p.coupling.abs(),
            p.mass * w2
        )));
    }
    Ok(TransformedFrequencies { omega_f: (w2 - shift).sqrt(), omega_2: (w2 + shift).sqrt() })
}

/// Slot of each element in [`CovarianceVector10`].
pub mod slot {
    pub const V11: usize = 0;
    pub const V12: usize = 1;
    pub const V22: usize = 2;
    pub const V13: usize = 3;
    pub const V14: usize = 4;
    pub const V23: usize = 5;
    pub const V24: usize = 6;
    pub const V33: usize = 7;
    pub const V34: usize = 8;
    pub const V44: usize = 9;
}

const PAIRS: [(usize, usize); 10] = [(0, 0), (0, 1), (1, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

/// Packed covariances `(V11, V12, V22, V13, V14, V23, V24, V33, V34, V44)` in
/// the `(q~1, p~1, q~2, p~2)` ordering (1-based indices as in the names).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceVector10(pub [f64; 10]);

impl CovarianceVector10 {
    pub fn from_matrix(v: &CovarianceMatrix) -> Result<Self> {
        if v.dim() != 4 {
            return Err(Error::DimensionMismatch { expected: 4, got: v.dim() });
        }
        Ok(Self(PAIRS.map(|(i, j)| v.get(i, j))))
    }

    pub fn to_matrix(&self) -> CovarianceMatrix {
        let mut m = DMatrix::zeros(4, 4);
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            m[(i, j)] = self.0[k];
            m[(j, i)] = self.0[k];
        }
        CovarianceMatrix::symmetrized(m)
    }

    /// Transformed-basis image of a two-mode squeezed vacuum of the bare
    /// oscillators, whose ladder operators are defined with mass `M` and bare
    /// frequency `Omega`.
    pub fn squeezed_vacuum(r: f64, pair: &OscillatorPair) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::Domain(format!("squeezing must be finite, got {r}")));
        }
        pair.validate()?;
        let z = pair.mass * pair.omega;
        let (sq, anti) = ((-2.0 * r).exp() / 2.0, (2.0 * r).exp() / 2.0);
        let mut v = [0.0; 10];
        v[slot::V11] = sq / z;
        v[slot::V22] = anti * z;
        v[slot::V33] = anti / z;
        v[slot::V44] = sq * z;
        Ok(Self(v))
    }

    pub fn from_bare(v: &CovarianceMatrix) -> Result<Self> {
        Self::from_matrix(&plus_minus_transform(v, Direction::Forward)?)
    }

    pub fn to_bare(&self) -> Result<CovarianceMatrix> {
        plus_minus_transform(&self.to_matrix(), Direction::Inverse)
    }

    pub fn free_block(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }

    pub fn cross_block(&self) -> [f64; 4] {
        [self.0[3], self.0[4], self.0[5], self.0[6]]
    }

    pub fn damped_block(&self) -> [f64; 3] {
        [self.0[7], self.0[8], self.0[9]]
    }

    /// `M Omega_F^2 V11 + V22 / M`, conserved by the free mode.
    pub fn v_plus_11(&self, mass: f64, omega_f: f64) -> f64 {
        mass * omega_f * omega_f * self.0[slot::V11] + self.0[slot::V22] / mass
    }

    pub fn v_minus_11(&self, mass: f64, omega_f: f64) -> f64 {
        mass * omega_f * omega_f * self.0[slot::V11] - self.0[slot::V22] / mass
    }
}

/// Block-diagonal drift of the ten covariances plus the inhomogeneous term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDrift {
    pub a1: Matrix3<f64>,
    pub a2: Matrix4<f64>,
    pub a3: Matrix3<f64>,
    pub f: [f64; 10],
}

impl BlockDrift {
    /// Assembled `10 x 10` drift.
    pub fn full(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(10, 10);
        a.view_mut((0, 0), (3, 3)).copy_from(&self.a1);
        a.view_mut((3, 3), (4, 4)).copy_from(&self.a2);
        a.view_mut((7, 7), (3, 3)).copy_from(&self.a3);
        a
    }

    pub fn derivative(&self, v: &CovarianceVector10) -> CovarianceVector10 {
        let x = &v.0;
        let d1 = self.a1 * Vector3::new(x[0], x[1], x[2]);
        let d2 = self.a2 * Vector4::new(x[3], x[4], x[5], x[6]);
        let d3 = self.a3 * Vector3::new(x[7], x[8], x[9]);
        let mut out = [0.0; 10];
        out[..3].copy_from_slice(d1.as_slice());
        out[3..7].copy_from_slice(d2.as_slice());
        out[7..].copy_from_slice(d3.as_slice());
        for (o, f) in out.iter_mut().zip(self.f) {
            *o += f;
        }
        CovarianceVector10(out)
    }
}

fn free_matrix(mass: f64, w2: f64) -> Matrix3<f64> {
    Matrix3::new(0.0, 2.0 / mass, 0.0, -mass * w2, 0.0, 1.0 / mass, 0.0, -2.0 * mass * w2, 0.0)
}

fn damped_matrix(mass: f64, w2: f64, gamma: f64) -> Matrix3<f64> {
    Matrix3::new(0.0, 2.0 / mass, 0.0, -mass * w2, -2.0 * gamma, 1.0 / mass, 0.0, -2.0 * mass * w2, -4.0 * gamma)
}

fn cross_matrix(mass: f64, w1: f64, w2: f64, gamma: f64) -> Matrix4<f64> {
    Matrix4::new(
        0.0,
        1.0 / mass,
        1.0 / mass,
        0.0,
        -mass * w2,
        -2.0 * gamma,
        0.0,
        1.0 / mass,
        -mass * w1,
        0.0,
        0.0,
        1.0 / mass,
        0.0,
        -mass * w1,
        -mass * w2,
        -2.0 * gamma,
    )
}

/// Drift for the given instantaneous coefficients. `counterterm` is added to
/// the damped mode's squared frequency together with `freq_shift`.
pub fn assemble_drift(mass: f64, freqs: &TransformedFrequencies, c: &BathCoefficients, counterterm: f64) -> BlockDrift {
    let w1 = freqs.omega_f * freqs.omega_f;
    let w2 = freqs.omega_2 * freqs.omega_2 + c.freq_shift + counterterm;
    let mut f = [0.0; 10];
    f[slot::V34] = -c.f2;
    f[slot::V44] = 2.0 * c.d2;
    BlockDrift {
        a1: free_matrix(mass, w1),
        a2: cross_matrix(mass, w1, w2, c.gamma2),
        a3: damped_matrix(mass, w2, c.gamma2),
        f,
    }
}

/// How the damped mode couples to the reservoir during integration.
#[derive(Debug, Clone, Copy)]
pub enum Reservoir<'a> {
    /// No reservoir: both modes evolve freely.
    Off,
    /// Time-dependent second-order coefficients.
    TimeDependent(&'a BathModel),
    /// Asymptotic coefficients applied from `t = 0`.
    Markov(&'a BathModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    pub ode: OdeOptions,
    /// Add the static counterterm so the damped mode keeps its bare frequency
    /// at long times.
    pub renormalize: bool,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self { ode: OdeOptions::default(), renormalize: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mass: f64,
    pub freqs: TransformedFrequencies,
    pub times: Vec<f64>,
    pub states: Vec<CovarianceVector10>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn series(&self, slot: usize) -> Vec<f64> {
        self.states.iter().map(|v| v.0[slot]).collect()
    }
}

/// Output grid `0, dt, 2 dt, ..., t_end`; the last point is `t_end` exactly.
pub fn output_grid(t_end: f64, dt_out: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Domain(format!("t_end must be positive, got {t_end}")));
    }
    if !(dt_out > 0.0) || dt_out > t_end {
        return Err(Error::Domain(format!("dt_out must be in (0, t_end], got {dt_out}")));
    }
    let n = (t_end / dt_out - 1e-9).ceil() as usize;
    let mut times: Vec<f64> = (0..n).map(|k| k as f64 * dt_out).collect();
    times.push(t_end);
    Ok(times)
}

/// Integrates the three covariance blocks independently and samples them on
/// [`output_grid`].
pub fn integrate(
    pair: &OscillatorPair,
    reservoir: Reservoir<'_>,
    v0: &CovarianceVector10,
    t_end: f64,
    dt_out: f64,
    opts: &DynamicsOptions,
) -> Result<Trajectory> {
    let freqs = transformed_frequencies(pair)?;
    let times = output_grid(t_end, dt_out)?;
    if let Reservoir::TimeDependent(model) | Reservoir::Markov(model) = reservoir {
        if (model.omega2() - freqs.omega_2).abs() > 1e-12 * freqs.omega_2 {
            return Err(Error::Domain(format!(
                "bath model built for Omega_2 = {}, oscillators have {}",
                model.omega2(),
                freqs.omega_2
            )));
        }
    }
    let m = pair.mass;
    let counterterm = match reservoir {
        Reservoir::TimeDependent(b) | Reservoir::Markov(b) if opts.renormalize => b.counterterm(),
        _ => 0.0,
    };
    let markov = match reservoir {
        Reservoir::Markov(b) => Some(b.markov()),
        _ => None,
    };
    let coeffs = |t: f64| -> BathCoefficients {
        match (reservoir, markov) {
            (Reservoir::Off, _) => BathCoefficients::zero(t),
            (_, Some(c)) => c,
            (Reservoir::TimeDependent(b), None) => b.coefficients_at(t),
            (Reservoir::Markov(_), None) => unreachable!(),
        }
    };

    let free = free_matrix(m, freqs.omega_f * freqs.omega_f);
    let out1 = ode::solve(
        |_, y, dy| {
            let d = free * Vector3::new(y[0], y[1], y[2]);
            dy.copy_from_slice(d.as_slice());
        },
        0.0,
        &v0.free_block(),
        &times,
        opts.ode,
    )?;
    let out2 = ode::solve(
        |t, y, dy| {
            let d = assemble_drift(m, &freqs, &coeffs(t), counterterm);
            dy.copy_from_slice((d.a2 * Vector4::new(y[0], y[1], y[2], y[3])).as_slice());
        },
        0.0,
        &v0.cross_block(),
        &times,
        opts.ode,
    )?;
    let out3 = ode::solve(
        |t, y, dy| {
            let d = assemble_drift(m, &freqs, &coeffs(t), counterterm);
            let v = d.a3 * Vector3::new(y[0], y[1], y[2]);
            dy[0] = v[0];
            dy[1] = v[1] + d.f[slot::V34];
            dy[2] = v[2] + d.f[slot::V44];
        },
        0.0,
        &v0.damped_block(),
        &times,
        opts.ode,
    )?;

    let states: Vec<CovarianceVector10> = out1
        .iter()
        .zip(&out2)
        .zip(&out3)
        .map(|((a, b), c)| {
            let mut v = [0.0; 10];
            v[..3].copy_from_slice(a);
            v[3..7].copy_from_slice(b);
            v[7..].copy_from_slice(c);
            CovarianceVector10(v)
        })
        .collect();

    if matches!(reservoir, Reservoir::Off) {
        for (t, v) in times.iter().zip(&states) {
            let nu = v.to_matrix().symplectic_eigenvalues()?;
            if nu[0] < 0.5 - 1e-6 {
                return Err(Error::Consistency(format!(
                    "closed evolution produced symplectic eigenvalue {:.6e} at t = {t}",
                    nu[0]
                )));
            }
        }
    }
    Ok(Trajectory { mass: m, freqs, times, states })
}

/// Exact solution of the free block: `V+` is conserved while
/// `(V-, V12)` rotate at angular frequency `2 Omega_F`.
pub fn closed_form_free(v11: f64, v12: f64, v22: f64, omega_f: f64, mass: f64, t: f64) -> Result<(f64, f64, f64)> {
    if !(omega_f > 0.0) {
        return Err(Error::Domain(format!("Omega_F must be positive, got {omega_f}")));
    }
    if !(mass > 0.0) {
        return Err(Error::Domain(format!("mass must be positive, got {mass}")));
    }
    let k = mass * omega_f * omega_f;
    let plus = k * v11 + v22 / mass;
    let minus0 = k * v11 - v22 / mass;
    let (s, c) = (2.0 * omega_f * t).sin_cos();
    let minus = minus0 * c + 2.0 * omega_f * v12 * s;
    let v12_t = v12 * c - minus0 / (2.0 * omega_f) * s;
    Ok(((plus + minus) / (2.0 * k), v12_t, mass * (plus - minus) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementPoint {
    pub t: f64,
    pub nu_tilde_minus: f64,
    pub log_negativity: f64,
}

impl EntanglementPoint {
    pub fn entangled(&self) -> bool {
        self.nu_tilde_minus < 0.5 - ENTANGLEMENT_TOL
    }
}

/// Negativity between the two bare oscillators at every snapshot.
pub fn entanglement_series(traj: &Trajectory) -> Result<Vec<EntanglementPoint>> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, v)| {
            let n = ppt_negativity(&v.to_bare()?)?;
            Ok(EntanglementPoint { t, nu_tilde_minus: n.nu_tilde_minus, log_negativity: n.log_negativity })
        })
        .collect()
}

/// Squeezing above which entanglement survives at long times under Markov
/// damping: `r_th = ln(2 N(Omega_2, T) + 1) / 2`.
pub fn threshold_r(temperature: f64, omega_2: f64) -> Result<f64> {
    let th = ThermalSpec::new(temperature)?;
    let nbar = mean_occupation(&th, omega_2)?;
    Ok(0.5 * (2.0 * nbar + 1.0).ln())
}

/// Interval with no entanglement; `revival` is `None` when it never returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeathInterval {
    pub death: f64,
    pub revival: Option<f64>,
}

/// Separable stretches of a negativity series, with crossing times linearly
/// interpolated in `1/2 - nu~_-`.
pub fn sudden_death_report(series: &[EntanglementPoint]) -> Result<Vec<DeathInterval>> {
    if series.windows(2).any(|w| w[1].t < w[0].t) {
        return Err(Error::Domain("time grid must be monotone".into()));
    }
    let margin = |p: &EntanglementPoint| 0.5 - ENTANGLEMENT_TOL - p.nu_tilde_minus;
    let crossing = |a: &EntanglementPoint, b: &EntanglementPoint| {
        let (ga, gb) = (margin(a), margin(b));
        if ga == gb {
            b.t
        } else {
            a.t + (b.t - a.t) * ga / (ga - gb)
        }
    };
    let mut out = Vec::new();
    let Some(first) = series.first() else { return Ok(out) };
    let mut open: Option<f64> = (!first.entangled()).then_some(first.t);
    for w in series.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        match (a.entangled(), b.entangled()) {
            (true, false) => open = Some(crossing(a, b)),
            (false, true) => {
                let death = open.take().unwrap_or(a.t);
                out.push(DeathInterval { death, revival: Some(crossing(a, b)) });
            }
            _ => {}
        }
    }
    if let Some(death) = open {
        out.push(DeathInterval { death, revival: None });
    }
    Ok(out)
}

/// Setup for locating the long-time entanglement threshold numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSearch {
    pub window: (f64, f64),
    pub dt: f64,
    pub bracket: (f64, f64),
    pub r_tol: f64,
}

impl Default for ThresholdSearch {
    fn default() -> Self {
        Self { window: (40.0, 50.0), dt: 0.005, bracket: (0.0, 3.0), r_tol: 1e-3 }
    }
}

/// Smallest `nu~_-` over the late-time window for initial squeezing `r`.
pub fn late_time_min_nu(
    pair: &OscillatorPair,
    bath: &BathModel,
    r: f64,
    search: &ThresholdSearch,
    opts: &DynamicsOptions,
) -> Result<f64> {
    let v0 = CovarianceVector10::squeezed_vacuum(r, pair)?;
    let traj = integrate(pair, Reservoir::Markov(bath), &v0, search.window.1, search.dt, opts)?;
    let mut min = f64::INFINITY;
    for (t, v) in traj.times.iter().zip(&traj.states) {
        if *t >= search.window.0 {
            min = min.min(ppt_negativity(&v.to_bare()?)?.nu_tilde_minus);
        }
    }
    Ok(min)
}

/// Bisection over `r` for the squeezing at which the late-time minimum of
/// `nu~_-` reaches 1/2, using Markov coefficients.
pub fn threshold_bisection(
    pair: &OscillatorPair,
    bath: &BathModel,
    search: &ThresholdSearch,
    opts: &DynamicsOptions,
) -> Result<f64> {
    let g = |r: f64| late_time_min_nu(pair, bath, r, search, opts).map(|nu| nu - 0.5);
    let (mut lo, mut hi) = search.bracket;
    let (g_lo, g_hi) = (g(lo)?, g(hi)?);
    if g_lo < 0.0 || g_hi >= 0.0 {
        return Err(Error::NumericalFailure(format!(
            "threshold not bracketed by r in [{lo}, {hi}] (margins {g_lo:.3e}, {g_hi:.3e})"
        )));
    }
    while hi - lo > search.r_tol {
        let mid = 0.5 * (lo + hi);
        if g(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
