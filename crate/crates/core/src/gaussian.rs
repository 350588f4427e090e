//! Covariance-matrix algebra for Gaussian bosonic states.
//!
//! Quadratures are interleaved as `(q1, p1, q2, p2, ...)` and the vacuum has
//! variance 1/2 in every quadrature (ħ = 1).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when asserting physicality of a covariance matrix.
pub const PHYSICAL_TOL: f64 = 1e-9;
/// Margin below 1/2 that the smallest partially transposed symplectic
/// eigenvalue must reach before a state is reported as entangled.
pub const ENTANGLEMENT_TOL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-12;
const PAIR_TOL: f64 = 1e-8;

/// Symmetric `2N x 2N` matrix of symmetrized quadrature second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Wraps a matrix, checking shape and symmetry. The stored matrix is the
    /// exact symmetric part of the input.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols {
            return Err(Error::DimensionMismatch { expected: rows, got: cols });
        }
        if rows == 0 || rows % 2 != 0 {
            return Err(Error::Domain(format!("covariance dimension must be a positive even number, got {rows}")));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalFailure("non-finite covariance entry".into()));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidState(format!("covariance matrix is not symmetric (max deviation {asym:.3e})")));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let entries = (&m + m.transpose()) * 0.5;
        Self { entries }
    }

    pub fn n_modes(&self) -> usize {
        self.entries.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `S V S^T` for a (symplectic or orthogonal) quadrature map `S`.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Result<Self> {
        if s.nrows() != self.dim() || s.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: s.nrows() });
        }
        Ok(Self::symmetrized(s * &self.entries * s.transpose()))
    }

    /// Reduced state of the listed modes, in the listed order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let n = self.n_modes();
        if let Some(&bad) = modes.iter().find(|&&m| m >= n) {
            return Err(Error::Domain(format!("mode {bad} out of range for {n} modes")));
        }
        let idx: Vec<usize> = modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
        let k = idx.len();
        Ok(Self { entries: DMatrix::from_fn(k, k, |a, b| self.entries[(idx[a], idx[b])]) })
    }

    /// Direct sum of two covariance matrices (tensor product of the states).
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (a, b) = (self.dim(), other.dim());
        let mut m = DMatrix::zeros(a + b, a + b);
        m.view_mut((0, 0), (a, a)).copy_from(&self.entries);
        m.view_mut((a, a), (b, b)).copy_from(&other.entries);
        Self { entries: m }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.entries - &other.entries).amax()
    }

    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        symplectic_eigenvalues(self)
    }

    /// Purity `1 / (2^N sqrt(det V))`; equals 1 for pure states.
    pub fn purity(&self) -> f64 {
        let det = self.entries.clone().determinant();
        1.0 / (2f64.powi(self.n_modes() as i32) * det.max(0.0).sqrt())
    }

    /// Checks that every symplectic eigenvalue is at least `1/2 - tol`.
    pub fn check_physical(&self, tol: f64) -> Result<()> {
        let nu = self.symplectic_eigenvalues()?;
        match nu.first() {
            Some(&min) if min < 0.5 - tol => Err(Error::InvalidState(format!(
                "smallest symplectic eigenvalue {min:.6e} violates the uncertainty bound"
            ))),
            _ => Ok(()),
        }
    }
}

/// Block-diagonal symplectic form with `[[0, 1], [-1, 0]]` per mode.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

pub fn vacuum_covariance(n_modes: usize) -> Result<CovarianceMatrix> {
    if n_modes == 0 {
        return Err(Error::Domain("need at least one mode".into()));
    }
    Ok(CovarianceMatrix { entries: DMatrix::from_diagonal_element(2 * n_modes, 2 * n_modes, 0.5) })
}

/// Single-mode thermal state with mean occupation `nbar`.
pub fn thermal_covariance(nbar: f64) -> Result<CovarianceMatrix> {
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(Error::Domain(format!("occupation must be finite and >= 0, got {nbar}")));
    }
    Ok(CovarianceMatrix { entries: DMatrix::from_diagonal_element(2, 2, nbar + 0.5) })
}

/// Two-mode squeezed vacuum in the bare basis `(q1, p1, q2, p2)`.
///
/// The cross-correlation signs are such that the `(q1 - q2)/sqrt(2)`
/// quadrature is squeezed to `e^{-2r}/2`.
pub fn two_mode_squeezed_covariance(r: f64) -> Result<CovarianceMatrix> {
    if !r.is_finite() {
        return Err(Error::Domain(format!("squeezing must be finite, got {r}")));
    }
    let c = 0.5 * (2.0 * r).cosh();
    let s = 0.5 * (2.0 * r).sinh();
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        c,   0.0, s,   0.0,
        0.0, c,   0.0, -s,
        s,   0.0, c,   0.0,
        0.0, -s,  0.0, c,
    ]);
    Ok(CovarianceMatrix { entries: m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Bare `(q1, p1, q2, p2)` to antisymmetric/symmetric combinations.
    Forward,
    Inverse,
}

/// Orthogonal map `q~1 = (q1 - q2)/sqrt(2)`, `q~2 = (q1 + q2)/sqrt(2)`, and
/// identically for the momenta.
pub fn plus_minus_matrix() -> DMatrix<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    #[rustfmt::skip]
    let o = DMatrix::from_row_slice(4, 4, &[
        h,   0.0, -h,  0.0,
        0.0, h,   0.0, -h,
        h,   0.0, h,   0.0,
        0.0, h,   0.0, h,
    ]);
    o
}

pub fn plus_minus_transform(v: &CovarianceMatrix, direction: Direction) -> Result<CovarianceMatrix> {
    if v.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: v.dim() });
    }
    let o = plus_minus_matrix();
    match direction {
        Direction::Forward => v.transformed(&o),
        Direction::Inverse => v.transformed(&o.transpose()),
    }
}

/// Symplectic eigenvalues in ascending order.
///
/// Computed as the moduli of the eigenvalues of `Omega V`, which come in
/// pairs `+-i nu`; each pair is collapsed to its mean.
pub fn symplectic_eigenvalues(v: &CovarianceMatrix) -> Result<Vec<f64>> {
    let n = v.n_modes();
    let m = symplectic_form(n) * v.matrix();
    let schur = m
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("eigen-solve for symplectic spectrum did not converge".into()))?;
    let mut moduli: Vec<f64> = schur.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(f64::total_cmp);

    let scale = moduli.last().copied().unwrap_or(1.0).max(1.0);
    let mut out = Vec::with_capacity(n);
    for pair in moduli.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        if (a - b).abs() > PAIR_TOL * scale.max(a.abs()) {
            return Err(Error::NumericalFailure(format!("symplectic spectrum does not pair up ({a:.6e} vs {b:.6e})")));
        }
        out.push(0.5 * (a + b));
    }
    Ok(out)
}

/// Output of the partial-transpose test on a two-mode state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Negativity {
    pub nu_tilde_minus: f64,
    pub log_negativity: f64,
    pub entangled: bool,
}

/// Partial transpose of mode 2 (sign flip of `p2`) followed by the smallest
/// symplectic eigenvalue.
pub fn ppt_negativity(v: &CovarianceMatrix) -> Result<Negativity> {
    if v.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, got: v.dim() });
    }
    v.check_physical(PHYSICAL_TOL)?;
    let mut pt = v.matrix().clone();
    for k in 0..4 {
        if k != 3 {
            pt[(3, k)] = -pt[(3, k)];
            pt[(k, 3)] = -pt[(k, 3)];
        }
    }
    let nu = symplectic_eigenvalues(&CovarianceMatrix { entries: pt })?;
    let nu_min = nu[0];
    Ok(Negativity {
        nu_tilde_minus: nu_min,
        log_negativity: (-(2.0 * nu_min).ln()).max(0.0),
        entangled: nu_min < 0.5 - ENTANGLEMENT_TOL,
    })
}

/// Negativity between two modes of a larger state.
pub fn ppt_negativity_between(v: &CovarianceMatrix, a: usize, b: usize) -> Result<Negativity> {
    if a == b {
        return Err(Error::Domain("negativity needs two distinct modes".into()));
    }
    ppt_negativity(&v.reduced(&[a, b])?)
}

/// Single- and two-mode squeezing assignments.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SqueezeSpec {
    pub single_mode: Vec<(usize, f64)>,
    pub two_mode: Vec<((usize, usize), f64)>,
}

impl SqueezeSpec {
    pub fn single(mut self, mode: usize, xi: f64) -> Self {
        self.single_mode.push((mode, xi));
        self
    }

    pub fn pair(mut self, a: usize, b: usize, xi: f64) -> Self {
        self.two_mode.push(((a, b), xi));
        self
    }
}

/// Quadrature map of the squeeze operators in `spec`.
///
/// A single-mode squeeze acts as `diag(e^-xi, e^xi)` on `(q, p)`; a two-mode
/// squeeze on `(i, j)` sends `q_i -> q_i cosh xi - q_j sinh xi` and
/// `p_i -> p_i cosh xi + p_j sinh xi`, symmetrically in `i` and `j`.
pub fn squeeze_symplectic(spec: &SqueezeSpec, n_modes: usize) -> Result<DMatrix<f64>> {
    let mut used = vec![false; n_modes];
    let mut claim = |m: usize| -> Result<()> {
        if m >= n_modes {
            return Err(Error::Domain(format!("mode {m} out of range for {n_modes} modes")));
        }
        if std::mem::replace(&mut used[m], true) {
            return Err(Error::SpecConflict(format!("mode {m} is assigned more than once")));
        }
        Ok(())
    };
    for &(m, _) in &spec.single_mode {
        claim(m)?;
    }
    for &((a, b), _) in &spec.two_mode {
        if a == b {
            return Err(Error::SpecConflict(format!("two-mode squeeze pairs mode {a} with itself")));
        }
        claim(a)?;
        claim(b)?;
    }

    let mut s = DMatrix::identity(2 * n_modes, 2 * n_modes);
    for &(m, xi) in &spec.single_mode {
        s[(2 * m, 2 * m)] = (-xi).exp();
        s[(2 * m + 1, 2 * m + 1)] = xi.exp();
    }
    for &((a, b), xi) in &spec.two_mode {
        let (ch, sh) = (xi.cosh(), xi.sinh());
        for (i, j) in [(a, b), (b, a)] {
            s[(2 * i, 2 * i)] = ch;
            s[(2 * i, 2 * j)] = -sh;
            s[(2 * i + 1, 2 * i + 1)] = ch;
            s[(2 * i + 1, 2 * j + 1)] = sh;
        }
    }
    Ok(s)
}

/// Inverse of a symplectic matrix, `-Omega S^T Omega`.
pub fn symplectic_inverse(s: &DMatrix<f64>) -> DMatrix<f64> {
    let omega = symplectic_form(s.nrows() / 2);
    -(&omega * s.transpose() * &omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_mode_nu_oracle(v: &DMatrix<f64>) -> (f64, f64) {
        // Closed-form two-mode spectrum from the local invariants.
        let a = v.view((0, 0), (2, 2)).determinant();
        let b = v.view((2, 2), (2, 2)).determinant();
        let c = v.view((0, 2), (2, 2)).determinant();
        let delta = a + b + 2.0 * c;
        let det = v.determinant();
        let disc = (delta * delta - 4.0 * det).max(0.0).sqrt();
        (((delta - disc) / 2.0).sqrt(), ((delta + disc) / 2.0).sqrt())
    }

    #[test]
    fn vacuum_is_half_diagonal() {
        let v = vacuum_covariance(1).unwrap();
        assert_eq!(v.matrix(), &DMatrix::from_diagonal_element(2, 2, 0.5));
        let v5 = vacuum_covariance(5).unwrap();
        assert_eq!(v5.dim(), 10);
        for nu in v5.symplectic_eigenvalues().unwrap() {
            assert_abs_diff_eq!(nu, 0.5, epsilon = 1e-12);
        }
        assert!(vacuum_covariance(0).is_err());
    }

    #[test]
    fn thermal_spectrum() {
        let nu = thermal_covariance(1.0).unwrap().symplectic_eigenvalues().unwrap();
        assert_eq!(nu.len(), 1);
        assert_abs_diff_eq!(nu[0], 1.5, epsilon = 1e-12);
    }

    #[test]
    fn tmsv_zero_is_vacuum() {
        assert_eq!(two_mode_squeezed_covariance(0.0).unwrap(), vacuum_covariance(2).unwrap());
    }

    #[test]
    fn tmsv_plus_minus_is_diagonal() {
        let r: f64 = 1.0;
        let t = plus_minus_transform(&two_mode_squeezed_covariance(r).unwrap(), Direction::Forward).unwrap();
        let m = (-2.0 * r).exp() / 2.0;
        let p = (2.0 * r).exp() / 2.0;
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![m, p, p, m]));
        assert!((t.matrix() - expected).amax() < 1e-14);
        assert_abs_diff_eq!(t.get(0, 0), 0.067_667_641_618_306_35, epsilon = 1e-15);
    }

    #[test]
    fn plus_minus_round_trip() {
        let v = two_mode_squeezed_covariance(0.7).unwrap();
        let f = plus_minus_transform(&v, Direction::Forward).unwrap();
        let back = plus_minus_transform(&f, Direction::Inverse).unwrap();
        assert!(back.max_abs_diff(&v) < 1e-14);
        let twice = plus_minus_transform(&f, Direction::Forward).unwrap();
        assert!(twice.max_abs_diff(&v) > 0.1);
        let vac = vacuum_covariance(2).unwrap();
        assert!(plus_minus_transform(&vac, Direction::Forward).unwrap().max_abs_diff(&vac) < 1e-15);
        assert!(matches!(
            plus_minus_transform(&vacuum_covariance(3).unwrap(), Direction::Forward),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn pure_tmsv_spectrum() {
        let nu = two_mode_squeezed_covariance(1.0).unwrap().symplectic_eigenvalues().unwrap();
        assert_abs_diff_eq!(nu[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(nu[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn pt_spectrum_matches_closed_form() {
        let v = two_mode_squeezed_covariance(0.5).unwrap();
        let neg = ppt_negativity(&v).unwrap();
        let mut pt = v.matrix().clone();
        pt[(3, 1)] = -pt[(3, 1)];
        pt[(1, 3)] = -pt[(1, 3)];
        let (lo, _) = two_mode_nu_oracle(&pt);
        assert_abs_diff_eq!(neg.nu_tilde_minus, lo, epsilon = 1e-12);
        assert_abs_diff_eq!(neg.nu_tilde_minus, 0.183_939_720_585_721_16, epsilon = 1e-12);
    }

    #[test]
    fn tmsv_negativity() {
        let neg = ppt_negativity(&two_mode_squeezed_covariance(1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(neg.nu_tilde_minus, (-2.0f64).exp() / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(neg.log_negativity, 2.0, epsilon = 1e-10);
        assert!(neg.entangled);
    }

    #[test]
    fn vacuum_and_thermal_products_are_separable() {
        let neg = ppt_negativity(&vacuum_covariance(2).unwrap()).unwrap();
        assert_abs_diff_eq!(neg.nu_tilde_minus, 0.5, epsilon = 1e-12);
        assert_eq!(neg.log_negativity, 0.0);
        assert!(!neg.entangled);
        let th = thermal_covariance(0.3).unwrap().direct_sum(&thermal_covariance(2.0).unwrap());
        assert!(!ppt_negativity(&th).unwrap().entangled);
    }

    #[test]
    fn unphysical_state_rejected() {
        let v = CovarianceMatrix::from_matrix(DMatrix::from_diagonal_element(4, 4, 0.3)).unwrap();
        assert!(matches!(ppt_negativity(&v), Err(Error::InvalidState(_))));
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        let mut m = DMatrix::from_diagonal_element(2, 2, 0.5);
        m[(0, 1)] = 0.1;
        assert!(CovarianceMatrix::from_matrix(m).is_err());
        assert!(CovarianceMatrix::from_matrix(DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn squeeze_examples() {
        assert_eq!(squeeze_symplectic(&SqueezeSpec::default(), 3).unwrap(), DMatrix::identity(6, 6));
        let s = squeeze_symplectic(&SqueezeSpec::default().single(0, 0.5), 1).unwrap();
        assert_abs_diff_eq!(s[(0, 0)], (-0.5f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(s[(1, 1)], 0.5f64.exp(), epsilon = 1e-15);
        assert_eq!(s[(0, 1)], 0.0);
    }

    #[test]
    fn two_mode_squeeze_matches_tmsv_up_to_local_rotation() {
        let r = 0.8;
        let s = squeeze_symplectic(&SqueezeSpec::default().pair(0, 1, r), 2).unwrap();
        let v = vacuum_covariance(2).unwrap().transformed(&s).unwrap();
        // a pi rotation of mode 2 flips both cross-correlation signs
        let flip = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]));
        let rotated = v.transformed(&flip).unwrap();
        assert!(rotated.max_abs_diff(&two_mode_squeezed_covariance(r).unwrap()) < 1e-14);
    }

    #[test]
    fn squeeze_conflicts() {
        let spec = SqueezeSpec::default().single(1, 0.1).pair(1, 2, 0.2);
        assert!(matches!(squeeze_symplectic(&spec, 3), Err(Error::SpecConflict(_))));
        let spec = SqueezeSpec::default().pair(0, 0, 0.2);
        assert!(matches!(squeeze_symplectic(&spec, 3), Err(Error::SpecConflict(_))));
        let spec = SqueezeSpec::default().single(4, 0.1);
        assert!(matches!(squeeze_symplectic(&spec, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn symplectic_inverse_inverts() {
        let spec = SqueezeSpec::default().single(0, 0.3).pair(1, 2, -0.4);
        let s = squeeze_symplectic(&spec, 3).unwrap();
        let prod = &s * symplectic_inverse(&s);
        assert!((prod - DMatrix::<f64>::identity(6, 6)).amax() < 1e-14);
    }

    #[test]
    fn purity_of_vacuum_and_thermal() {
        assert_abs_diff_eq!(vacuum_covariance(5).unwrap().purity(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(thermal_covariance(1.0).unwrap().purity(), 1.0 / 3.0, epsilon = 1e-12);
    }
}
