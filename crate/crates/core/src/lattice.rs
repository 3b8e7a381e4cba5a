//! Lattices, coin-angle profiles and two-component spinor fields.
//!
//! Sites are indexed from 0. Square lattices are stored row-major: the site at
//! column `x`, row `y` has index `y * lx + x`. The coin index is the fastest
//! running index of a [`SpinorField`], so the amplitude of `(site, coin)` lives
//! at `2 * site + coin`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|norm^2 - 1|` for a field to count as unit-normalized.
pub const UNIT_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coin {
    Up = 0,
    Down = 1,
}

impl Coin {
    pub const BOTH: [Coin; 2] = [Coin::Up, Coin::Down];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Geometry of the walker's lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSpec {
    dimension: u8,
    extent: [usize; 2],
    boundary: Boundary,
}

impl LatticeSpec {
    /// A one-dimensional chain of `sites` sites.
    pub fn line(sites: usize, boundary: Boundary) -> Result<Self> {
        if sites < 2 {
            return Err(Error::InvalidLattice(format!(
                "extent must be at least 2, got {sites}"
            )));
        }
        Ok(Self {
            dimension: 1,
            extent: [sites, 1],
            boundary,
        })
    }

    /// An `lx` by `ly` square lattice.
    pub fn square(lx: usize, ly: usize, boundary: Boundary) -> Result<Self> {
        if lx < 2 || ly < 2 {
            return Err(Error::InvalidLattice(format!(
                "extent must be at least 2 on every axis, got {lx}x{ly}"
            )));
        }
        Ok(Self {
            dimension: 2,
            extent: [lx, ly],
            boundary,
        })
    }

    pub fn dimension(&self) -> u8 {
        self.dimension
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Sites along `axis`; 1 for the unused axis of a chain.
    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.extent[0],
            Axis::Y => self.extent[1],
        }
    }

    pub fn sites(&self) -> usize {
        self.extent[0] * self.extent[1]
    }

    /// Dimension of the site-times-coin Hilbert space.
    pub fn hilbert_dim(&self) -> usize {
        2 * self.sites()
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.extent[0], site / self.extent[0])
    }

    pub fn site_at(&self, x: usize, y: usize) -> usize {
        y * self.extent[0] + x
    }

    /// The site reached from `site` by a unit hop along `axis`, or `None` when
    /// the hop leaves an open lattice.
    pub fn neighbor(&self, site: usize, axis: Axis, forward: bool) -> Option<usize> {
        let (x, y) = self.coords(site);
        let (pos, len) = match axis {
            Axis::X => (x, self.extent[0]),
            Axis::Y => (y, self.extent[1]),
        };
        let next = match (forward, self.boundary) {
            (true, Boundary::Periodic) => (pos + 1) % len,
            (false, Boundary::Periodic) => (pos + len - 1) % len,
            (true, Boundary::Open) if pos + 1 < len => pos + 1,
            (false, Boundary::Open) if pos > 0 => pos - 1,
            _ => return None,
        };
        Some(match axis {
            Axis::X => self.site_at(next, y),
            Axis::Y => self.site_at(x, next),
        })
    }
}

/// Reduce an angle to the canonical branch (-pi, pi].
pub fn reduce_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Per-site rotation angles of the first and (optional) second coin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinProfile {
    theta1: Vec<f64>,
    theta2: Option<Vec<f64>>,
}

impl CoinProfile {
    pub fn new(lattice: &LatticeSpec, theta1: Vec<f64>, theta2: Option<Vec<f64>>) -> Result<Self> {
        let sites = lattice.sites();
        let check = |name: &str, v: &[f64]| -> Result<Vec<f64>> {
            if v.len() != sites {
                return Err(Error::InvalidProfile(format!(
                    "{name} has {} entries for {sites} sites",
                    v.len()
                )));
            }
            if let Some(bad) = v.iter().find(|t| !t.is_finite()) {
                return Err(Error::InvalidProfile(format!("{name} contains {bad}")));
            }
            Ok(v.iter().copied().map(reduce_angle).collect())
        };
        let theta1 = check("theta1", &theta1)?;
        let theta2 = theta2.map(|t| check("theta2", &t)).transpose()?;
        Ok(Self { theta1, theta2 })
    }

    pub fn uniform(lattice: &LatticeSpec, theta1: f64, theta2: Option<f64>) -> Result<Self> {
        let n = lattice.sites();
        Self::new(lattice, vec![theta1; n], theta2.map(|t| vec![t; n]))
    }

    /// Constant `theta1` with `theta2` switching from `left` to `right` at
    /// site `split` (sites `[0, split)` carry `left`). On a periodic chain this
    /// produces two domain walls, at `split` and at `0`.
    pub fn two_domain(
        lattice: &LatticeSpec,
        theta1: f64,
        left: f64,
        right: f64,
        split: usize,
    ) -> Result<Self> {
        let n = lattice.sites();
        if split == 0 || split >= n {
            return Err(Error::InvalidProfile(format!(
                "domain split {split} must lie strictly inside 0..{n}"
            )));
        }
        let theta2 = (0..n)
            .map(|x| if x < split { left } else { right })
            .collect();
        Self::new(lattice, vec![theta1; n], Some(theta2))
    }

    pub fn theta1(&self) -> &[f64] {
        &self.theta1
    }

    pub fn theta2(&self) -> Option<&[f64]> {
        self.theta2.as_deref()
    }

    pub fn is_homogeneous(&self) -> bool {
        let flat = |v: &[f64]| v.iter().all(|&t| t == v[0]);
        flat(&self.theta1) && self.theta2.as_deref().is_none_or(flat)
    }
}

/// Complex walker amplitudes over `(site, coin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    lattice: LatticeSpec,
    amps: Vec<Complex64>,
    norm_sqr: f64,
}

impl SpinorField {
    pub fn from_amplitudes(lattice: LatticeSpec, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != lattice.hilbert_dim() {
            return Err(Error::ShapeMismatch {
                expected: lattice.hilbert_dim(),
                actual: amps.len(),
            });
        }
        let norm_sqr = amps.iter().map(|a| a.norm_sqr()).sum();
        Ok(Self {
            lattice,
            amps,
            norm_sqr,
        })
    }

    pub fn zeros(lattice: LatticeSpec) -> Self {
        Self {
            lattice,
            amps: vec![Complex64::new(0.0, 0.0); lattice.hilbert_dim()],
            norm_sqr: 0.0,
        }
    }

    /// Unit vector `|site> (x) |coin>`.
    pub fn basis(lattice: LatticeSpec, site: usize, coin: Coin) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        match coin {
            Coin::Up => make_localized_state(lattice, site, [one, zero]),
            Coin::Down => make_localized_state(lattice, site, [zero, one]),
        }
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn amplitude(&self, site: usize, coin: Coin) -> Complex64 {
        self.amps[2 * site + coin.index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.norm_sqr
    }

    pub fn is_unit(&self) -> bool {
        (self.norm_sqr - 1.0).abs() <= UNIT_NORM_TOL
    }

    /// Rescale to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        if self.norm_sqr == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        let s = 1.0 / self.norm_sqr.sqrt();
        Self::from_amplitudes(self.lattice, self.amps.iter().map(|a| a * s).collect())
    }

    /// Per-site probability with the coin traced out, without a norm check.
    pub fn site_weights(&self) -> Vec<f64> {
        self.amps
            .chunks_exact(2)
            .map(|c| c[0].norm_sqr() + c[1].norm_sqr())
            .collect()
    }
}

/// A unit-norm field supported on a single site, with coin components
/// proportional to `coin`.
pub fn make_localized_state(
    lattice: LatticeSpec,
    site: usize,
    coin: [Complex64; 2],
) -> Result<SpinorField> {
    if site >= lattice.sites() {
        return Err(Error::SiteOutOfRange {
            site,
            sites: lattice.sites(),
        });
    }
    let n = (coin[0].norm_sqr() + coin[1].norm_sqr()).sqrt();
    if n == 0.0 {
        return Err(Error::ZeroCoin);
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); lattice.hilbert_dim()];
    amps[2 * site] = coin[0] / n;
    amps[2 * site + 1] = coin[1] / n;
    SpinorField::from_amplitudes(lattice, amps)
}

/// `<a|b>`, conjugate-linear in `a`.
pub fn inner_product(a: &SpinorField, b: &SpinorField) -> Result<Complex64> {
    if a.lattice != b.lattice {
        return Err(Error::ShapeMismatch {
            expected: a.lattice.hilbert_dim(),
            actual: b.lattice.hilbert_dim(),
        });
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// Probability of finding the walker on each site, coin traced out.
pub fn position_distribution(psi: &SpinorField) -> Result<Vec<f64>> {
    if !psi.is_unit() {
        return Err(Error::NotNormalized(psi.norm_sqr));
    }
    Ok(psi.site_weights())
}
