use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `cov + (i/2) Omega >= 0`.
pub const UNCERTAINTY_TOL: f64 = 1e-9;
/// Tolerance on the symmetry of the covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Standard symplectic form for `modes` modes, ordering `(x1, p1, x2, p2, ...)`.
pub fn omega(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for i in 0..modes {
        w[(2 * i, 2 * i + 1)] = 1.0;
        w[(2 * i + 1, 2 * i)] = -1.0;
    }
    w
}

/// First and second moments of a Gaussian state of `M` bosonic modes, with
/// quadratures `x = (a + a^dagger)/sqrt2`, `p = (a - a^dagger)/(i sqrt2)`, so
/// the vacuum covariance is `I/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Normally ordered complex moments: `alpha_i = <a_i>`,
/// `n_ij = <da_i^dagger da_j>` and `m_ij = <da_i da_j>` about the mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMoments {
    pub alpha: Vec<Complex64>,
    pub n: DMatrix<Complex64>,
    pub m: DMatrix<Complex64>,
}

impl GaussianState {
    /// Validating constructor.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidState(format!(
                "mean has odd or zero length {dim}"
            )));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::ShapeMismatch {
                expected: dim,
                actual: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidState("non-finite moment".into()));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::InvalidState(format!(
                "covariance is not symmetric (residual {asym:e})"
            )));
        }
        let state = Self { mean, cov };
        let lowest = state.uncertainty_min_eig();
        if lowest < -UNCERTAINTY_TOL {
            return Err(Error::UncertaintyViolation(lowest));
        }
        Ok(state)
    }

    pub(crate) fn from_parts_unchecked(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self { mean, cov }
    }

    pub fn vacuum(modes: usize) -> Self {
        Self {
            mean: DVector::zeros(2 * modes),
            cov: DMatrix::identity(2 * modes, 2 * modes) * 0.5,
        }
    }

    /// Product of coherent states with the given amplitudes.
    pub fn coherent(alphas: &[Complex64]) -> Self {
        let mut s = Self::vacuum(alphas.len());
        for (i, a) in alphas.iter().enumerate() {
            s.mean[2 * i] = std::f64::consts::SQRT_2 * a.re;
            s.mean[2 * i + 1] = std::f64::consts::SQRT_2 * a.im;
        }
        s
    }

    /// Product of thermal states with mean photon numbers `nbar`.
    pub fn thermal(nbar: &[f64]) -> Result<Self> {
        if nbar.iter().any(|n| !(*n >= 0.0) || !n.is_finite()) {
            return Err(Error::InvalidState(
                "thermal occupation must be >= 0".into(),
            ));
        }
        let mut s = Self::vacuum(nbar.len());
        for (i, n) in nbar.iter().enumerate() {
            s.cov[(2 * i, 2 * i)] = n + 0.5;
            s.cov[(2 * i + 1, 2 * i + 1)] = n + 0.5;
        }
        Ok(s)
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `<a_i>`.
    pub fn amplitude(&self, i: usize) -> Complex64 {
        Complex64::new(self.mean[2 * i], self.mean[2 * i + 1]) / std::f64::consts::SQRT_2
    }

    /// Lowest eigenvalue of the Hermitian matrix `cov + (i/2) Omega`.
    pub fn uncertainty_min_eig(&self) -> f64 {
        let w = omega(self.modes());
        let h = DMatrix::from_fn(self.cov.nrows(), self.cov.ncols(), |r, c| {
            Complex64::new(self.cov[(r, c)], 0.5 * w[(r, c)])
        });
        SymmetricEigen::new(h).eigenvalues.min()
    }

    /// Lowest eigenvalue of the covariance matrix; below 1/2 means some
    /// quadrature is squeezed below vacuum.
    pub fn min_quadrature_variance(&self) -> f64 {
        SymmetricEigen::new(self.cov.clone()).eigenvalues.min()
    }

    pub fn complex_moments(&self) -> ComplexMoments {
        let m = self.modes();
        let v = &self.cov;
        let (x, p) = (|i: usize| 2 * i, |i: usize| 2 * i + 1);
        let n = DMatrix::from_fn(m, m, |i, j| {
            let d = if i == j { 0.5 } else { 0.0 };
            Complex64::new(
                0.5 * (v[(x(i), x(j))] + v[(p(i), p(j))]) - d,
                0.5 * (v[(x(i), p(j))] - v[(p(i), x(j))]),
            )
        });
        let mm = DMatrix::from_fn(m, m, |i, j| {
            Complex64::new(
                0.5 * (v[(x(i), x(j))] - v[(p(i), p(j))]),
                0.5 * (v[(x(i), p(j))] + v[(p(i), x(j))]),
            )
        });
        ComplexMoments {
            alpha: (0..m).map(|i| self.amplitude(i)).collect(),
            n,
            m: mm,
        }
    }

    /// Inverse of [`complex_moments`](Self::complex_moments). The result is
    /// symmetrized and validated.
    pub fn from_complex_moments(mom: &ComplexMoments) -> Result<Self> {
        let m = mom.alpha.len();
        let mut mean = DVector::zeros(2 * m);
        let mut cov = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            mean[2 * i] = std::f64::consts::SQRT_2 * mom.alpha[i].re;
            mean[2 * i + 1] = std::f64::consts::SQRT_2 * mom.alpha[i].im;
            for j in 0..m {
                let (n, mm) = (mom.n[(i, j)], mom.m[(i, j)]);
                let d = if i == j { 0.5 } else { 0.0 };
                cov[(2 * i, 2 * j)] = (n + mm).re + d;
                cov[(2 * i + 1, 2 * j + 1)] = (n - mm).re + d;
                cov[(2 * i, 2 * j + 1)] = mm.im + n.im;
                cov[(2 * i + 1, 2 * j)] = mm.im - n.im;
            }
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        Self::new(mean, cov)
    }

    /// Reduced state of the listed modes, in the listed order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let m = self.modes();
        if let Some(&bad) = modes.iter().find(|&&i| i >= m) {
            return Err(Error::SiteOutOfRange {
                site: bad,
                sites: m,
            });
        }
        let idx: Vec<usize> = modes.iter().flat_map(|&i| [2 * i, 2 * i + 1]).collect();
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&r| self.mean[r]));
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.cov[(idx[r], idx[c])]);
        Ok(Self { mean, cov })
    }
}
