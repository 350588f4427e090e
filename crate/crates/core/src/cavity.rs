//! Ring cavity with two counter-propagating modes coupled to collective
//! atomic modes, and the two-step protocol that drives the atoms into a
//! multi-mode squeezed vacuum.
//!
//! Modes are ordered `(a+, a-, C0, C2, C-2)`; quadratures interleave as
//! `(q0, p0, q1, p1, ...)`.

use std::fmt;

use nalgebra::{DMatrix, DVector, SMatrix};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{symplectic_inverse, vacuum_covariance, CovarianceMatrix};
use crate::ode::{self, OdeOptions};

pub const N_MODES: usize = 5;
pub const DIM: usize = 2 * N_MODES;

pub const A_PLUS: usize = 0;
pub const A_MINUS: usize = 1;
pub const C0: usize = 2;
pub const C2: usize = 3;
pub const C_MINUS2: usize = 4;

pub const MODE_NAMES: [&str; N_MODES] = ["a+", "a-", "C0", "C2", "C-2"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleParams {
    pub n_atoms: u64,
    pub g_u: f64,
    pub g_s: f64,
    pub delta_u: f64,
    pub delta_s: f64,
    pub omega_u: f64,
    pub omega_s: f64,
    pub phi_u: f64,
    pub phi_s: f64,
    pub kappa: f64,
    pub gamma_u: f64,
    pub gamma_s: f64,
    pub delta_c: f64,
}

impl Default for EnsembleParams {
    /// Resonant, Stark-balanced ensemble with `beta_eff = kappa = 1` and
    /// `|beta_u| = 2 |beta_s|`.
    fn default() -> Self {
        let (n, g, delta) = (10_000u64, 1.0, 50.0);
        let scale = 2.0 * delta / ((n as f64).sqrt() * g);
        Self {
            n_atoms: n,
            g_u: g,
            g_s: g,
            delta_u: delta,
            delta_s: delta,
            omega_u: scale * 2.0 / 3f64.sqrt(),
            omega_s: scale / 3f64.sqrt(),
            phi_u: 0.0,
            phi_s: 0.0,
            kappa: 1.0,
            gamma_u: 0.0,
            gamma_s: 0.0,
            delta_c: -(n as f64) * g * g / delta,
        }
    }
}

impl EnsembleParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::Domain("n_atoms must be at least 1".into()));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be positive, got {}", self.kappa)));
        }
        if self.delta_u == 0.0 || self.delta_s == 0.0 {
            return Err(Error::Domain("detunings must be nonzero".into()));
        }
        let all = [
            self.g_u,
            self.g_s,
            self.delta_u,
            self.delta_s,
            self.omega_u,
            self.omega_s,
            self.phi_u,
            self.phi_s,
            self.gamma_u,
            self.gamma_s,
            self.delta_c,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("ensemble parameters must be finite".into()));
        }
        if self.gamma_u < 0.0 || self.gamma_s < 0.0 {
            return Err(Error::Domain("spontaneous emission rates must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCouplings {
    pub beta_u: Complex64,
    pub beta_s: Complex64,
}

impl EffectiveCouplings {
    pub fn real(beta_u: f64, beta_s: f64) -> Self {
        Self { beta_u: Complex64::new(beta_u, 0.0), beta_s: Complex64::new(beta_s, 0.0) }
    }

    /// `sqrt(|beta_u|^2 - |beta_s|^2)`, the mixer strength in the squeezed frame.
    pub fn beta_eff(&self) -> Result<f64> {
        squeeze_parameters(self)?;
        Ok((self.beta_u.norm_sqr() - self.beta_s.norm_sqr()).sqrt())
    }
}

/// `beta = sqrt(N) Omega g e^{-i phi} / (2 Delta)` for each branch.
pub fn effective_couplings(p: &EnsembleParams) -> Result<EffectiveCouplings> {
    p.validate()?;
    let sqrt_n = (p.n_atoms as f64).sqrt();
    let beta =
        |omega: f64, g: f64, phi: f64, delta: f64| Complex64::from_polar(sqrt_n * omega * g / (2.0 * delta), -phi);
    Ok(EffectiveCouplings {
        beta_u: beta(p.omega_u, p.g_u, p.phi_u, p.delta_u),
        beta_s: beta(p.omega_s, p.g_s, p.phi_s, p.delta_s),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ValidityWarning {
    /// Detuning not large compared with the other rates of a branch.
    Adiabaticity {
        branch: char,
        ratio: f64,
    },
    StarkBalance {
        u: f64,
        s: f64,
    },
    CavityResonance {
        residual: f64,
    },
}

impl fmt::Display for ValidityWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Adiabaticity { branch, ratio } => write!(
                f,
                "branch {branch}: |Delta| is only {ratio:.3} times the largest of g, Omega, gamma (want >= 10)"
            ),
            Self::StarkBalance { u, s } => {
                write!(f, "Stark shifts unbalanced: g_u^2/Delta_u = {u:.6e}, g_s^2/Delta_s = {s:.6e}")
            }
            Self::CavityResonance { residual } => {
                write!(f, "cavity detuning does not cancel the collective Stark shift (residual {residual:.3e})")
            }
        }
    }
}

/// Conditions under which the bosonic model is a faithful reduction of the
/// atomic level scheme. Returns warnings only.
pub fn validity_check(p: &EnsembleParams) -> Vec<ValidityWarning> {
    let mut out = Vec::new();
    for (branch, delta, g, omega, gamma) in
        [('u', p.delta_u, p.g_u, p.omega_u, p.gamma_u), ('s', p.delta_s, p.g_s, p.omega_s, p.gamma_s)]
    {
        let rate = g.abs().max(omega.abs()).max(gamma.abs());
        if rate > 0.0 && delta.abs() < 10.0 * rate {
            out.push(ValidityWarning::Adiabaticity { branch, ratio: delta.abs() / rate });
        }
    }
    let u = p.g_u * p.g_u / p.delta_u;
    let s = p.g_s * p.g_s / p.delta_s;
    if (u - s).abs() > 1e-6 * u.abs().max(s.abs()) {
        out.push(ValidityWarning::StarkBalance { u, s });
    }
    let residual = p.delta_c + 0.5 * p.n_atoms as f64 * (u + s);
    if residual.abs() > 1e-6 * p.kappa {
        out.push(ValidityWarning::CavityResonance { residual });
    }
    out
}

/// Squeezing `xi0 = xi1 = ln[(|bu| + |bs|) / (|bu| - |bs|)] / 2`.
pub fn squeeze_parameters(ec: &EffectiveCouplings) -> Result<(f64, f64)> {
    let (bu, bs) = (ec.beta_u.norm(), ec.beta_s.norm());
    if !bu.is_finite() || !bs.is_finite() {
        return Err(Error::Domain("couplings must be finite".into()));
    }
    if bu == 0.0 || bs / bu > 1.0 - 1e-9 {
        return Err(Error::Instability(format!("need |beta_u| > |beta_s| (got {bu:.6e} and {bs:.6e})")));
    }
    let xi = 0.5 * ((bu + bs) / (bu - bs)).ln();
    Ok((xi, xi))
}

/// Driving direction of the pump lasers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Propagation {
    Clockwise,
    Anticlockwise,
}

impl Propagation {
    pub fn reversed(self) -> Self {
        match self {
            Self::Clockwise => Self::Anticlockwise,
            Self::Anticlockwise => Self::Clockwise,
        }
    }
}

/// Linear open system on the five modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSystem {
    pub drift: DMatrix<f64>,
    pub diffusion: DMatrix<f64>,
    pub first_moments: DVector<f64>,
}

impl ModeSystem {
    /// Same system in the coordinates `y = T x`.
    pub fn in_frame(&self, t: &DMatrix<f64>) -> Self {
        let t_inv = symplectic_inverse(t);
        Self {
            drift: t * &self.drift * &t_inv,
            diffusion: t * &self.diffusion * t.transpose(),
            first_moments: t * &self.first_moments,
        }
    }

    /// `A sigma + sigma A^T + D`.
    pub fn lyapunov_rhs(&self, sigma: &DMatrix<f64>) -> DMatrix<f64> {
        &self.drift * sigma + sigma * self.drift.transpose() + &self.diffusion
    }
}

type Row = [Complex64; DIM];

fn annihilation(mode: usize) -> Row {
    let mut r = [Complex64::new(0.0, 0.0); DIM];
    r[2 * mode] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    r[2 * mode + 1] = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    r
}

fn creation(mode: usize) -> Row {
    annihilation(mode).map(|z| z.conj())
}

fn combine(a: Complex64, x: &Row, b: Complex64, y: &Row) -> Row {
    std::array::from_fn(|i| a * x[i] + b * y[i])
}

/// Adds `X Y + h.c.` to the Hamiltonian matrix `M` of `H = x^T M x / 2`.
fn add_bilinear(m: &mut DMatrix<f64>, x: &Row, y: &Row) {
    for i in 0..DIM {
        for j in 0..DIM {
            m[(i, j)] += 2.0 * (x[i] * y[j] + y[i] * x[j]).re;
        }
    }
}

/// Mode combinations `(beta_u C_m + beta_s C_m'^dag)` feeding each cavity mode.
fn driven_pairs(dir: Propagation) -> [(usize, usize, usize); 2] {
    match dir {
        Propagation::Clockwise => [(A_PLUS, C0, C0), (A_MINUS, C2, C_MINUS2)],
        Propagation::Anticlockwise => [(A_MINUS, C0, C0), (A_PLUS, C_MINUS2, C2)],
    }
}

fn symplectic_form10() -> DMatrix<f64> {
    crate::gaussian::symplectic_form(N_MODES)
}

/// Quadrature drift and diffusion for one driving direction. Cavity modes
/// decay into vacuum at amplitude rate `kappa / 2`.
pub fn build_system(ec: &EffectiveCouplings, kappa: f64, dir: Propagation) -> Result<ModeSystem> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::Domain(format!("kappa must be non-negative, got {kappa}")));
    }
    if !(ec.beta_u.norm().is_finite() && ec.beta_s.norm().is_finite()) {
        return Err(Error::Domain("couplings must be finite".into()));
    }
    let mut h = DMatrix::zeros(DIM, DIM);
    for (cavity, m, m_conj) in driven_pairs(dir) {
        let x = combine(ec.beta_u, &annihilation(m), ec.beta_s, &creation(m_conj));
        add_bilinear(&mut h, &x, &creation(cavity));
    }
    let mut drift = symplectic_form10() * h;
    let mut diffusion = DMatrix::zeros(DIM, DIM);
    for cavity in [A_PLUS, A_MINUS] {
        for k in [2 * cavity, 2 * cavity + 1] {
            drift[(k, k)] -= 0.5 * kappa;
            diffusion[(k, k)] = 0.5 * kappa;
        }
    }
    Ok(ModeSystem { drift, diffusion, first_moments: DVector::zeros(DIM) })
}

/// Map `x -> T x` to the squeezed-frame quadratures, in which both driving
/// directions reduce to beam-splitter couplings
/// `beta_eff (d a^dag + d^dag a)`.
pub fn squeeze_frame(ec: &EffectiveCouplings) -> Result<DMatrix<f64>> {
    let beta_eff = ec.beta_eff()?;
    let (u, w) = (ec.beta_u / beta_eff, ec.beta_s / beta_eff);
    let rows: [Row; N_MODES] = [
        annihilation(A_PLUS),
        annihilation(A_MINUS),
        combine(u, &annihilation(C0), w, &creation(C0)),
        combine(u, &annihilation(C2), w, &creation(C_MINUS2)),
        combine(u, &annihilation(C_MINUS2), w, &creation(C2)),
    ];
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut t = DMatrix::zeros(DIM, DIM);
    for (mode, row) in rows.iter().enumerate() {
        for j in 0..DIM {
            t[(2 * mode, j)] = sqrt2 * row[j].re;
            t[(2 * mode + 1, j)] = sqrt2 * row[j].im;
        }
    }
    Ok(t)
}

/// Final state of the protocol: single-mode squeezing on `C0` and two-mode
/// squeezing on `(C2, C-2)`, cavity modes in vacuum.
pub fn squeezed_target(ec: &EffectiveCouplings) -> Result<CovarianceMatrix> {
    let t_inv = symplectic_inverse(&squeeze_frame(ec)?);
    vacuum_covariance(N_MODES)?.transformed(&t_inv)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueReport {
    /// Sorted by real part, most negative first.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Eigenvalues with modulus below this are treated as the decoupled mode.
    pub zero_tol: f64,
    /// `2 / |Re lambda|` of the slowest decaying eigenvalue, if any decays.
    pub convergence_time: Option<f64>,
}

impl EigenvalueReport {
    pub fn nonzero(&self) -> impl Iterator<Item = &(f64, f64)> {
        self.eigenvalues.iter().filter(|(re, im)| re.hypot(*im) > self.zero_tol)
    }

    pub fn max_nonzero_real(&self) -> Option<f64> {
        self.nonzero().map(|(re, _)| *re).reduce(f64::max)
    }
}

pub fn eigenvalue_report(ms: &ModeSystem) -> Result<EigenvalueReport> {
    let scale = ms.drift.amax().max(1.0);
    // repeated eigenvalues can stall the QR sweep at machine precision; retry
    // with a looser deflation threshold before giving up
    let schur = [f64::EPSILON, 1e-14, 1e-12]
        .into_iter()
        .find_map(|eps| ms.drift.clone().try_schur(eps, 10_000))
        .ok_or_else(|| Error::NumericalFailure("drift eigen-solve did not converge".into()))?;
    let mut eigenvalues: Vec<(f64, f64)> = schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
    eigenvalues.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let zero_tol = 1e-7 * scale;
    let slowest = eigenvalues
        .iter()
        .filter(|(re, im)| re.hypot(*im) > zero_tol && *re < -zero_tol)
        .map(|(re, _)| *re)
        .reduce(f64::max);
    Ok(EigenvalueReport { eigenvalues, zero_tol, convergence_time: slowest.map(|re| 2.0 / re.abs()) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub tau1: f64,
    pub tau2: f64,
    pub dt_out: f64,
    pub first: Propagation,
}

impl ProtocolSpec {
    /// Both steps last `20 / kappa`.
    pub fn default_for(kappa: f64) -> Self {
        Self { tau1: 20.0 / kappa, tau2: 20.0 / kappa, dt_out: 0.05 / kappa, first: Propagation::Clockwise }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityTrajectory {
    pub times: Vec<f64>,
    pub sigma: Vec<CovarianceMatrix>,
    pub means: Vec<DVector<f64>>,
    /// Index of the sample at the switch between the two steps.
    pub switch_index: usize,
}

impl CavityTrajectory {
    pub fn final_sigma(&self) -> &CovarianceMatrix {
        self.sigma.last().expect("trajectory is never empty")
    }
}

fn step_grid(tau: f64, dt: f64) -> Result<Vec<f64>> {
    crate::oscillators::output_grid(tau, dt)
}

type M10 = SMatrix<f64, DIM, DIM>;

fn evolve(
    ms: &ModeSystem,
    sigma0: &DMatrix<f64>,
    m0: &DVector<f64>,
    times: &[f64],
    opts: OdeOptions,
) -> Result<Vec<(DMatrix<f64>, DVector<f64>)>> {
    let a = M10::from_iterator(ms.drift.iter().copied());
    let d = M10::from_iterator(ms.diffusion.iter().copied());
    let mut y0 = sigma0.as_slice().to_vec();
    y0.extend_from_slice(m0.as_slice());
    let out = ode::solve(
        |_, y, dy| {
            let s = M10::from_column_slice(&y[..DIM * DIM]);
            let ds = a * s + s * a.transpose() + d;
            dy[..DIM * DIM].copy_from_slice(ds.as_slice());
            for i in 0..DIM {
                dy[DIM * DIM + i] = (0..DIM).map(|j| a[(i, j)] * y[DIM * DIM + j]).sum();
            }
        },
        0.0,
        &y0,
        times,
        opts,
    )?;
    Ok(out
        .into_iter()
        .map(|y| (DMatrix::from_column_slice(DIM, DIM, &y[..DIM * DIM]), DVector::from_column_slice(&y[DIM * DIM..])))
        .collect())
}

/// Evolves the vacuum through the two driving steps.
///
/// The Lyapunov equation is integrated in the squeezed frame, where each
/// step is a pair of beam splitters and the idle collective mode has an
/// exactly vanishing drift; samples are mapped back to the lab frame.
pub fn run_protocol(
    ec: &EffectiveCouplings,
    kappa: f64,
    spec: &ProtocolSpec,
    opts: OdeOptions,
) -> Result<CavityTrajectory> {
    if !(spec.tau1 > 0.0 && spec.tau2 > 0.0) {
        return Err(Error::Domain("step durations must be positive".into()));
    }
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
    }
    let frame = squeeze_frame(ec)?;
    let back = symplectic_inverse(&frame);
    let steps = [
        (build_system(ec, kappa, spec.first)?.in_frame(&frame), spec.tau1),
        (build_system(ec, kappa, spec.first.reversed())?.in_frame(&frame), spec.tau2),
    ];
    let mut sigma = vacuum_covariance(N_MODES)?.transformed(&frame)?.into_matrix();
    let mut mean = DVector::zeros(DIM);
    let mut traj = CavityTrajectory { times: vec![], sigma: vec![], means: vec![], switch_index: 0 };
    let mut t_offset = 0.0;
    for (k, (ms, tau)) in steps.iter().enumerate() {
        let grid = step_grid(*tau, spec.dt_out)?;
        let states = evolve(ms, &sigma, &mean, &grid, opts)?;
        // the step boundary appears once, as the last sample of step 1
        let skip = usize::from(k > 0);
        for (t, (s, m)) in grid.iter().zip(&states).skip(skip) {
            traj.times.push(t_offset + t);
            traj.sigma.push(CovarianceMatrix::from_matrix(&back * s * back.transpose())?);
            traj.means.push(&back * m);
        }
        let (s, m) = states.last().expect("grid is never empty");
        sigma = s.clone();
        mean = m.clone();
        if k == 0 {
            traj.switch_index = traj.times.len() - 1;
        }
        t_offset += tau;
    }
    Ok(traj)
}

/// Upper triangle of a matrix, row by row.
pub fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

/// Column labels matching [`upper_triangle`] on the five-mode quadratures.
pub fn upper_triangle_labels() -> Vec<String> {
    let quad = |k: usize| format!("{}{}", if k.is_multiple_of(2) { "q" } else { "p" }, MODE_NAMES[k / 2]);
    (0..DIM).flat_map(|i| (i..DIM).map(move |j| (i, j))).map(|(i, j)| format!("s_{}_{}", quad(i), quad(j))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomPositions {
    pub x: Vec<f64>,
    pub k: f64,
}

impl AtomPositions {
    pub fn new(x: Vec<f64>, k: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Domain("need at least one atom".into()));
        }
        if !k.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("positions and wave number must be finite".into()));
        }
        Ok(Self { x, k })
    }

    /// `n` atoms uniformly distributed over `[0, length)`.
    pub fn uniform_random(n: usize, length: f64, k: f64, seed: u64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::Domain(format!("length must be positive, got {length}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new((0..n).map(|_| rng.random_range(0.0..length)).collect(), k)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// `(1/N) sum_j exp(i (m - m') k x_j)`, the deviation of `[C_m, C_m'^dag]`
/// from the ideal bosonic value for `m != m'`.
pub fn collective_overlap(pos: &AtomPositions, m: i32, m_prime: i32) -> Result<Complex64> {
    for v in [m, m_prime] {
        if ![0, 2, -2].contains(&v) {
            return Err(Error::Domain(format!("collective index must be 0 or +-2, got {v}")));
        }
    }
    if pos.is_empty() {
        return Err(Error::Domain("need at least one atom".into()));
    }
    if m == m_prime {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let q = f64::from(m - m_prime) * pos.k;
    let sum: Complex64 = pos.x.iter().map(|&x| Complex64::from_polar(1.0, q * x)).sum();
    Ok(sum / pos.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{ppt_negativity_between, squeeze_symplectic, SqueezeSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn coupling_formula() {
        let p = EnsembleParams {
            n_atoms: 10_000,
            g_u: 1.0,
            omega_u: 1.0,
            delta_u: 50.0,
            omega_s: 0.0,
            ..EnsembleParams::default()
        };
        let ec = effective_couplings(&p).unwrap();
        assert_abs_diff_eq!(ec.beta_u.re, 1.0, epsilon = 1e-15);
        assert_eq!(ec.beta_u.im, 0.0);
        assert_eq!(ec.beta_s.norm(), 0.0);
        let bad = EnsembleParams { delta_s: 0.0, ..p };
        assert!(effective_couplings(&bad).is_err());
    }

    #[test]
    fn default_ensemble_is_consistent() {
        let p = EnsembleParams::default();
        assert!(validity_check(&p).is_empty(), "{:?}", validity_check(&p));
        let ec = effective_couplings(&p).unwrap();
        assert_abs_diff_eq!(ec.beta_eff().unwrap(), p.kappa, epsilon = 1e-12);
        assert_abs_diff_eq!(ec.beta_u.norm(), 2.0 * ec.beta_s.norm(), epsilon = 1e-12);
    }

    #[test]
    fn validity_warnings() {
        let base = EnsembleParams {
            n_atoms: 100,
            g_u: 1.0,
            g_s: 1.0,
            delta_u: 100.0,
            delta_s: 100.0,
            omega_u: 1.0,
            omega_s: 1.0,
            gamma_u: 1.0,
            gamma_s: 1.0,
            kappa: 1.0,
            delta_c: -1.0,
            ..EnsembleParams::default()
        };
        assert!(validity_check(&base).is_empty());
        let w = validity_check(&EnsembleParams { delta_u: 2.0, omega_u: 1.0, ..base });
        assert!(w.iter().any(|w| matches!(w, ValidityWarning::Adiabaticity { branch: 'u', .. })));
        assert!(w.iter().any(|w| matches!(w, ValidityWarning::StarkBalance { .. })));
        let w = validity_check(&EnsembleParams { g_s: 1.1, ..base });
        assert!(w.iter().any(|w| matches!(w, ValidityWarning::StarkBalance { .. })));
        assert!(w.iter().any(|w| w.to_string().contains("Stark")));
    }

    #[test]
    fn squeeze_parameter_examples() {
        assert_eq!(squeeze_parameters(&EffectiveCouplings::real(1.0, 0.0)).unwrap(), (0.0, 0.0));
        let (x0, x1) = squeeze_parameters(&EffectiveCouplings::real(2.0, 1.0)).unwrap();
        assert_abs_diff_eq!(x0, 0.549_306_144_334_054_9, epsilon = 1e-12);
        assert_eq!(x0, x1);
        let phased =
            EffectiveCouplings { beta_u: Complex64::from_polar(2.0, 0.3), beta_s: Complex64::from_polar(1.0, -1.1) };
        assert_abs_diff_eq!(squeeze_parameters(&phased).unwrap().0, x0, epsilon = 1e-12);
        assert!(squeeze_parameters(&EffectiveCouplings::real(1.0, 1.0)).is_err());
        assert!(squeeze_parameters(&EffectiveCouplings::real(1.0, 1.0 - 1e-10)).is_err());
        assert!(squeeze_parameters(&EffectiveCouplings::real(1.0, 2.0)).is_err());
        assert!(squeeze_parameters(&EffectiveCouplings::real(0.0, 0.0)).is_err());
    }

    #[test]
    fn undriven_system_relaxes_to_vacuum() {
        let ms = build_system(&EffectiveCouplings::real(0.0, 0.0), 2.0, Propagation::Clockwise).unwrap();
        let mut expect = DMatrix::zeros(DIM, DIM);
        for k in 0..4 {
            expect[(k, k)] = -1.0;
        }
        assert_eq!(ms.drift, expect);
        let vac = vacuum_covariance(N_MODES).unwrap().into_matrix();
        assert!(ms.lyapunov_rhs(&vac).amax() < 1e-15);
        let r =
            eigenvalue_report(&build_system(&EffectiveCouplings::real(0.0, 0.0), 0.0, Propagation::Clockwise).unwrap())
                .unwrap();
        assert!(r.eigenvalues.iter().all(|&(re, im)| re == 0.0 && im == 0.0));
        assert!(r.convergence_time.is_none());
    }

    #[test]
    fn beam_splitter_heisenberg_equation() {
        // H = b (C0 a+^dag + h.c.) gives d a+/dt = -i b C0, so
        // dq_a/dt = b p_C and dp_a/dt = -b q_C.
        let ms = build_system(&EffectiveCouplings::real(0.7, 0.0), 0.0, Propagation::Clockwise).unwrap();
        let a = &ms.drift;
        assert_abs_diff_eq!(a[(0, 5)], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(1, 4)], -0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(4, 1)], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(a[(5, 0)], -0.7, epsilon = 1e-15);
    }

    #[test]
    fn frame_is_symplectic_and_matches_squeeze_operators() {
        let ec = EffectiveCouplings::real(2.0, 1.0);
        let t = squeeze_frame(&ec).unwrap();
        let om = symplectic_form10();
        assert!((&t * &om * t.transpose() - &om).amax() < 1e-12);
        let (xi0, xi1) = squeeze_parameters(&ec).unwrap();
        let s = squeeze_symplectic(&SqueezeSpec::default().single(C0, xi0).pair(C2, C_MINUS2, xi1), N_MODES).unwrap();
        assert!((symplectic_inverse(&t) - s).amax() < 1e-12);
    }

    #[test]
    fn clockwise_decouples_c_minus2_in_frame() {
        let ec = EffectiveCouplings::real(2.0, 1.0);
        let ms = build_system(&ec, 1.0, Propagation::Clockwise).unwrap().in_frame(&squeeze_frame(&ec).unwrap());
        for i in 0..DIM {
            for j in [8, 9] {
                assert!(ms.drift[(i, j)].abs() < 1e-12);
                assert!(ms.drift[(j, i)].abs() < 1e-12);
            }
        }
        let ms = build_system(&ec, 1.0, Propagation::Anticlockwise).unwrap().in_frame(&squeeze_frame(&ec).unwrap());
        for i in 0..DIM {
            for j in [6, 7] {
                assert!(ms.drift[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixer_eigenvalues() {
        let kappa = 1.0;
        let ec = EffectiveCouplings::real(2.0 / 3f64.sqrt(), 1.0 / 3f64.sqrt());
        let r = eigenvalue_report(&build_system(&ec, kappa, Propagation::Clockwise).unwrap()).unwrap();
        assert_eq!(r.nonzero().count(), 8);
        assert_eq!(r.eigenvalues.len() - r.nonzero().count(), 2);
        let im = 15f64.sqrt() / 4.0;
        for &(re, i) in r.nonzero() {
            assert_abs_diff_eq!(re, -kappa / 4.0, epsilon = 1e-9);
            assert_abs_diff_eq!(i.abs(), im, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(r.convergence_time.unwrap(), 8.0, epsilon = 1e-8);
    }

    #[test]
    fn overdamped_mixer() {
        // b < kappa / 4: real roots -kappa/4 +- sqrt(kappa^2/16 - b^2)
        let r =
            eigenvalue_report(&build_system(&EffectiveCouplings::real(0.1, 0.0), 1.0, Propagation::Clockwise).unwrap())
                .unwrap();
        let disc = (1.0f64 / 16.0 - 0.01).sqrt();
        let slow = r.max_nonzero_real().unwrap();
        assert_abs_diff_eq!(slow, -0.25 + disc, epsilon = 1e-9);
    }

    #[test]
    fn target_properties() {
        let vac = vacuum_covariance(N_MODES).unwrap();
        let t = squeezed_target(&EffectiveCouplings::real(1.0, 0.0)).unwrap();
        assert!(t.max_abs_diff(&vac) < 1e-15);
        let ec = EffectiveCouplings::real(2.0, 1.0);
        let t = squeezed_target(&ec).unwrap();
        for nu in t.symplectic_eigenvalues().unwrap() {
            assert_abs_diff_eq!(nu, 0.5, epsilon = 1e-10);
        }
        let xi1 = squeeze_parameters(&ec).unwrap().1;
        let n = ppt_negativity_between(&t, C2, C_MINUS2).unwrap();
        assert_abs_diff_eq!(n.log_negativity, 2.0 * xi1, epsilon = 1e-10);
    }

    #[test]
    fn overlap_cases() {
        let pos = AtomPositions::uniform_random(100, 50.0, 2.0 * std::f64::consts::PI, 1).unwrap();
        assert_eq!(collective_overlap(&pos, 2, 2).unwrap(), Complex64::new(1.0, 0.0));
        let k = 1.3;
        let lattice = AtomPositions::new((0..40).map(|j| j as f64 * std::f64::consts::PI / k).collect(), k).unwrap();
        let o = collective_overlap(&lattice, 0, 2).unwrap();
        assert_abs_diff_eq!(o.re, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(o.im, 0.0, epsilon = 1e-10);
        assert!(collective_overlap(&lattice, 1, 2).is_err());
        assert!(AtomPositions::new(vec![], 1.0).is_err());
    }

    #[test]
    fn labels_match_triangle() {
        let labels = upper_triangle_labels();
        assert_eq!(labels.len(), 55);
        assert_eq!(labels[0], "s_qa+_qa+");
        assert_eq!(labels[54], "s_pC-2_pC-2");
        assert_eq!(upper_triangle(&DMatrix::identity(DIM, DIM)).len(), 55);
    }
}
