use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{reduce_angle, Boundary};
use crate::walk::{Protocol, WalkSpec};

/// Bloch vectors are left undefined where the half-gap at `k` is at or below
/// this value.
pub const GAP_EPS: f64 = 1e-8;

/// Momentum-space data of a homogeneous one-dimensional walk.
///
/// At every `k` the step matrix is written as
/// `U_k = exp(-i phi) exp(-i E n . sigma)` with `E` in `[0, pi]`, giving the
/// two quasienergy bands `phi + E` and `phi - E`, both reduced to (-pi, pi].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochData {
    pub k: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
    /// Overall quasienergy offset `phi`; zero for every walk of real rotations.
    pub offset: Vec<f64>,
    /// `E(k)` in `[0, pi]`.
    pub half_angle: Vec<f64>,
    pub bloch_vector: Vec<Option<[f64; 3]>>,
}

impl BlochData {
    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// Distance of the bands from quasienergy 0 at each `k`.
    pub fn gap0_at(&self, i: usize) -> f64 {
        self.e_plus[i].abs().min(self.e_minus[i].abs())
    }

    /// Distance of the bands from quasienergy pi at each `k`.
    pub fn gap_pi_at(&self, i: usize) -> f64 {
        (PI - self.e_plus[i].abs()).min(PI - self.e_minus[i].abs())
    }

    /// `min_k gap0`, with the `k` where it is attained.
    pub fn gap0(&self) -> (f64, f64) {
        self.min_over_k(|i| self.gap0_at(i))
    }

    pub fn gap_pi(&self) -> (f64, f64) {
        self.min_over_k(|i| self.gap_pi_at(i))
    }

    /// Smallest distance of either band from {0, pi}.
    pub fn gap(&self) -> (f64, f64) {
        self.min_over_k(|i| self.gap0_at(i).min(self.gap_pi_at(i)))
    }

    fn min_over_k(&self, f: impl Fn(usize) -> f64) -> (f64, f64) {
        (0..self.len())
            .map(|i| (f(i), self.k[i]))
            .fold(
                (f64::INFINITY, f64::NAN),
                |a, b| if b.0 < a.0 { b } else { a },
            )
    }
}

/// Uniform grid of `points` momenta starting at `-pi`.
pub fn k_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|j| -PI + 2.0 * PI * j as f64 / points as f64)
        .collect()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rotation(theta: f64) -> Matrix2<Complex64> {
    let (s, co) = (theta / 2.0).sin_cos();
    Matrix2::new(c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0))
}

/// Momentum-space step matrix at `k` of a homogeneous chain walk.
pub fn momentum_step(spec: &WalkSpec, k: f64) -> Result<Matrix2<Complex64>> {
    let lattice = spec.lattice();
    if lattice.dimension() != 1 {
        return Err(Error::NotOneDimensional);
    }
    if lattice.boundary() != Boundary::Periodic {
        return Err(Error::NotPeriodic);
    }
    if !spec.coins().is_homogeneous() {
        return Err(Error::NotHomogeneous);
    }
    let fwd = Complex64::from_polar(1.0, -k);
    let back = Complex64::from_polar(1.0, k);
    let one = c(1.0, 0.0);
    let zero = c(0.0, 0.0);
    let r1 = rotation(spec.coins().theta1()[0]);
    Ok(match spec.protocol() {
        Protocol::Simple => Matrix2::new(fwd, zero, zero, back) * r1,
        Protocol::SplitStep => {
            let r2 = rotation(spec.coins().theta2().map_or(0.0, |t| t[0]));
            let up = Matrix2::new(fwd, zero, zero, one);
            let down = Matrix2::new(one, zero, zero, back);
            down * r2 * up * r1
        }
        Protocol::SplitStep2d => return Err(Error::NotOneDimensional),
    })
}

/// Decompose a homogeneous periodic chain walk on a `points`-momentum grid.
pub fn bloch_decompose(spec: &WalkSpec, points: usize) -> Result<BlochData> {
    if points == 0 {
        return Err(Error::InvalidSpec("momentum grid is empty".into()));
    }
    let ks = k_grid(points);
    let mats = ks
        .iter()
        .map(|&k| momentum_step(spec, k).map(|u| (k, u)))
        .collect::<Result<Vec<_>>>()?;
    Ok(bloch_from_matrices(&mats))
}

/// Decompose arbitrary 2x2 unitaries, one per momentum.
pub fn bloch_from_matrices(mats: &[(f64, Matrix2<Complex64>)]) -> BlochData {
    let pauli = [
        Matrix2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        Matrix2::new(c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        Matrix2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
    ];
    let mut out = BlochData {
        k: Vec::with_capacity(mats.len()),
        e_plus: Vec::with_capacity(mats.len()),
        e_minus: Vec::with_capacity(mats.len()),
        offset: Vec::with_capacity(mats.len()),
        half_angle: Vec::with_capacity(mats.len()),
        bloch_vector: Vec::with_capacity(mats.len()),
    };
    for (k, u) in mats {
        let phi = -u.determinant().arg() / 2.0;
        let su = u * Complex64::from_polar(1.0, phi);
        let cos_e = su.trace().re / 2.0;
        let v: [f64; 3] = std::array::from_fn(|a| (c(0.0, 1.0) * (su * pauli[a]).trace()).re / 2.0);
        let sin_e = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let e = sin_e.atan2(cos_e);
        let n = (e.min(PI - e) > GAP_EPS).then(|| v.map(|x| x / sin_e));
        out.k.push(*k);
        out.e_plus.push(reduce_angle(phi + e));
        out.e_minus.push(reduce_angle(phi - e));
        out.offset.push(phi);
        out.half_angle.push(e);
        out.bloch_vector.push(n);
    }
    out
}
