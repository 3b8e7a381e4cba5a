use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::state::{omega, GaussianState, UNCERTAINTY_TOL};

/// Tolerance on `S Omega S^T = Omega`.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

/// Affine symplectic map `r -> S r + d` on the quadrature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticOp {
    s: DMatrix<f64>,
    d: Option<DVector<f64>>,
}

impl SymplecticOp {
    pub fn new(s: DMatrix<f64>, d: Option<DVector<f64>>) -> Result<Self> {
        let n = s.nrows();
        if n == 0 || !n.is_multiple_of(2) || s.ncols() != n {
            return Err(Error::InvalidNetwork(format!(
                "symplectic matrix must be square of even size, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        if let Some(d) = &d {
            if d.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    actual: d.len(),
                });
            }
        }
        let op = Self { s, d };
        let r = op.residual();
        if !(r <= SYMPLECTIC_TOL) {
            return Err(Error::InvalidNetwork(format!(
                "matrix is not symplectic (residual {r:e})"
            )));
        }
        Ok(op)
    }

    fn linear(s: DMatrix<f64>) -> Self {
        Self { s, d: None }
    }

    pub fn identity(modes: usize) -> Self {
        Self::linear(DMatrix::identity(2 * modes, 2 * modes))
    }

    pub fn modes(&self) -> usize {
        self.s.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn displacement(&self) -> Option<&DVector<f64>> {
        self.d.as_ref()
    }

    /// `max |S Omega S^T - Omega|`.
    pub fn residual(&self) -> f64 {
        let w = omega(self.modes());
        (&self.s * &w * self.s.transpose() - w).amax()
    }

    /// The map that applies `first` and then `self`.
    pub fn compose(&self, first: &SymplecticOp) -> SymplecticOp {
        let s = &self.s * &first.s;
        let d = match (&self.d, &first.d) {
            (None, None) => None,
            (a, b) => {
                let mut d = b
                    .as_ref()
                    .map_or_else(|| DVector::zeros(s.nrows()), |b| &self.s * b);
                if let Some(a) = a {
                    d += a;
                }
                Some(d)
            }
        };
        SymplecticOp { s, d }
    }

    /// Quadrature map of the mode transformation `a -> A a + B a^dagger`.
    /// `A` and `B` must satisfy the Bogoliubov conditions; this is checked
    /// through the symplectic residual.
    pub fn from_bogoliubov(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<Self> {
        let m = a.nrows();
        if a.ncols() != m || b.nrows() != m || b.ncols() != m {
            return Err(Error::ShapeMismatch {
                expected: m,
                actual: b.nrows(),
            });
        }
        let mut s = DMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                let plus = a[(i, j)] + b[(i, j)];
                let minus = a[(i, j)] - b[(i, j)];
                s[(2 * i, 2 * j)] = plus.re;
                s[(2 * i, 2 * j + 1)] = -minus.im;
                s[(2 * i + 1, 2 * j)] = plus.im;
                s[(2 * i + 1, 2 * j + 1)] = minus.re;
            }
        }
        Self::new(s, None)
    }

    /// Lift an op on `targets.len()` modes into a `total`-mode register,
    /// acting as the identity elsewhere.
    pub fn embed(&self, targets: &[usize], total: usize) -> Result<Self> {
        if targets.len() != self.modes() {
            return Err(Error::ShapeMismatch {
                expected: self.modes(),
                actual: targets.len(),
            });
        }
        let mut seen = vec![false; total];
        for &t in targets {
            if t >= total || std::mem::replace(&mut seen[t], true) {
                return Err(Error::InvalidNetwork(format!(
                    "target modes {targets:?} are out of range or repeated"
                )));
            }
        }
        let idx: Vec<usize> = targets.iter().flat_map(|&t| [2 * t, 2 * t + 1]).collect();
        let mut s = DMatrix::identity(2 * total, 2 * total);
        for (r, &gr) in idx.iter().enumerate() {
            for (c, &gc) in idx.iter().enumerate() {
                s[(gr, gc)] = self.s[(r, c)];
            }
        }
        let d = self.d.as_ref().map(|d| {
            let mut full = DVector::zeros(2 * total);
            for (r, &gr) in idx.iter().enumerate() {
                full[gr] = d[r];
            }
            full
        });
        Ok(Self { s, d })
    }

    /// Mode relabelling that sends mode `i` to mode `dest[i]`.
    pub fn permutation(dest: &[usize]) -> Result<Self> {
        let m = dest.len();
        let mut seen = vec![false; m];
        for &t in dest {
            if t >= m || std::mem::replace(&mut seen[t], true) {
                return Err(Error::InvalidNetwork(format!(
                    "{dest:?} is not a permutation"
                )));
            }
        }
        let mut s = DMatrix::zeros(2 * m, 2 * m);
        for (i, &t) in dest.iter().enumerate() {
            s[(2 * t, 2 * i)] = 1.0;
            s[(2 * t + 1, 2 * i + 1)] = 1.0;
        }
        Ok(Self::linear(s))
    }

    /// `a_mode -> exp(i phi) a_mode`.
    pub fn phase_shift(modes: usize, mode: usize, phi: f64) -> Self {
        let mut s = DMatrix::identity(2 * modes, 2 * modes);
        let (sn, cs) = phi.sin_cos();
        s[(2 * mode, 2 * mode)] = cs;
        s[(2 * mode, 2 * mode + 1)] = -sn;
        s[(2 * mode + 1, 2 * mode)] = sn;
        s[(2 * mode + 1, 2 * mode + 1)] = cs;
        Self::linear(s)
    }

    /// `a -> cosh(r) a - sinh(r) a^dagger`: `x` shrinks by `exp(-r)`.
    pub fn single_mode_squeeze(modes: usize, mode: usize, r: f64) -> Self {
        let mut s = DMatrix::identity(2 * modes, 2 * modes);
        s[(2 * mode, 2 * mode)] = (-r).exp();
        s[(2 * mode + 1, 2 * mode + 1)] = r.exp();
        Self::linear(s)
    }

    /// `a_i -> a_i + alpha_i`.
    pub fn displace(alphas: &[Complex64]) -> Self {
        let m = alphas.len();
        let d = DVector::from_iterator(
            2 * m,
            alphas
                .iter()
                .flat_map(|a| [a.re, a.im].map(|v| v * std::f64::consts::SQRT_2)),
        );
        Self {
            s: DMatrix::identity(2 * m, 2 * m),
            d: Some(d),
        }
    }

    /// `mean -> S mean + d`, `cov -> S cov S^T`. A result violating the
    /// uncertainty relation means the op was not symplectic and is an error.
    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        if state.modes() != self.modes() {
            return Err(Error::ShapeMismatch {
                expected: self.modes(),
                actual: state.modes(),
            });
        }
        let out = self.apply_unchecked(state);
        let lowest = out.uncertainty_min_eig();
        if lowest < -UNCERTAINTY_TOL {
            return Err(Error::UncertaintyViolation(lowest));
        }
        Ok(out)
    }

    pub(crate) fn apply_unchecked(&self, state: &GaussianState) -> GaussianState {
        let mut mean = &self.s * state.mean();
        if let Some(d) = &self.d {
            mean += d;
        }
        let cov = &self.s * state.cov() * self.s.transpose();
        let cov = (&cov + cov.transpose()) * 0.5;
        GaussianState::from_parts_unchecked(mean, cov)
    }
}
