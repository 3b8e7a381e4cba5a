//! Two-mode couplers.
//!
//! The single complex parameter `chi` spans both coupler families: real `chi`
//! is an active (SU(1,1)) two-mode squeezer and imaginary `chi = i phi` is a
//! passive (SU(2)) mixer. Here the two families are separate variants with
//! real parameters:
//!
//! ```text
//! Active { chi }:  a1 -> cosh(chi) a1 + i sinh(chi) a2^dagger
//!                  a2 -> cosh(chi) a2 + i sinh(chi) a1^dagger
//! Passive { phi }: a1 -> cos(phi) a1 - sin(phi) a2
//!                  a2 -> sin(phi) a1 + cos(phi) a2
//! ```
//!
//! A passive coupler with `phi = theta / 2` acts on `(a1, a2)` exactly as the
//! coin rotation `R(theta)` acts on `(up, down)`; `phi = pi/4` is a 50:50
//! splitter.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::symplectic::SymplecticOp;

const REAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CouplerKind {
    Active { chi: f64 },
    Passive { phi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplerType {
    Active,
    Passive,
}

impl CouplerKind {
    /// Map the complex parametrization onto a coupler of the requested type.
    /// Active couplers need real `chi`; passive ones need imaginary `chi`,
    /// whose imaginary part becomes the mixing angle.
    pub fn from_chi(chi: Complex64, ty: CouplerType) -> Result<Self> {
        match ty {
            CouplerType::Active if chi.im.abs() > REAL_TOL => Err(Error::NonRealGain {
                re: chi.re,
                im: chi.im,
            }),
            CouplerType::Active => Ok(Self::Active { chi: chi.re }),
            CouplerType::Passive if chi.re.abs() > REAL_TOL => Err(Error::NonImaginaryMixing {
                re: chi.re,
                im: chi.im,
            }),
            CouplerType::Passive => Ok(Self::Passive { phi: chi.im }),
        }
    }

    pub fn is_active(&self) -> bool {
        matches!(self, Self::Active { chi } if *chi != 0.0)
    }
}

/// Four-by-four quadrature map of a coupler on modes `(1, 2)`.
pub fn coupler_symplectic(kind: CouplerKind) -> SymplecticOp {
    let z = Complex64::new(0.0, 0.0);
    let (a, b) = match kind {
        CouplerKind::Active { chi } => {
            let (c, s) = (
                Complex64::new(chi.cosh(), 0.0),
                Complex64::new(0.0, chi.sinh()),
            );
            (
                DMatrix::from_row_slice(2, 2, &[c, z, z, c]),
                DMatrix::from_row_slice(2, 2, &[z, s, s, z]),
            )
        }
        CouplerKind::Passive { phi } => {
            let (s, c) = phi.sin_cos();
            let (s, c) = (Complex64::new(s, 0.0), Complex64::new(c, 0.0));
            (
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
                DMatrix::from_element(2, 2, z),
            )
        }
    };
    // the Bogoliubov conditions hold by construction
    SymplecticOp::from_bogoliubov(&a, &b).expect("coupler is symplectic")
}

/// Coupler acting on modes `(a, b)` of a `total`-mode register.
pub fn coupler_on(total: usize, a: usize, b: usize, kind: CouplerKind) -> SymplecticOp {
    coupler_symplectic(kind)
        .embed(&[a, b], total)
        .expect("distinct in-range modes")
}
