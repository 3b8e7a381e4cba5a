use std::io::Write;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::state::GaussianState;

/// Modes with mean photon number at or below this have no Mandel Q.
pub const Q_FLOOR: f64 = 1e-12;
/// Modes with mean photon number at or below this have no normalized
/// correlations.
pub const CORRELATION_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonStatistics {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// `Var(n)/<n> - 1`, or `None` for (near-)vacuum modes.
    pub mandel_q: Vec<Option<f64>>,
}

/// Normally ordered moments about zero: `A_ij = <a_i^dagger a_j>` and
/// `B_ij = <a_i a_j>`, with `alpha_i = <a_i>`.
struct FullMoments {
    alpha: Vec<Complex64>,
    a: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
}

impl FullMoments {
    fn of(state: &GaussianState) -> Self {
        let mom = state.complex_moments();
        let m = mom.alpha.len();
        let al = &mom.alpha;
        Self {
            a: DMatrix::from_fn(m, m, |i, j| mom.n[(i, j)] + al[i].conj() * al[j]),
            b: DMatrix::from_fn(m, m, |i, j| mom.m[(i, j)] + al[i] * al[j]),
            alpha: mom.alpha,
        }
    }

    fn n(&self, i: usize) -> f64 {
        self.a[(i, i)].re
    }

    /// `<a_i^dagger a_j^dagger a_j a_i>` by Wick's theorem for Gaussian states.
    fn g2_numerator(&self, i: usize, j: usize) -> f64 {
        let (i, j) = (i.min(j), i.max(j));
        let ai = self.alpha[i].norm_sqr();
        let aj = self.alpha[j].norm_sqr();
        self.n(i) * self.n(j) + self.a[(i, j)].norm_sqr() + self.b[(i, j)].norm_sqr()
            - 2.0 * ai * aj
    }

    fn variance(&self, i: usize) -> f64 {
        self.g2_numerator(i, i) + self.n(i) - self.n(i) * self.n(i)
    }
}

pub fn photon_statistics(state: &GaussianState) -> PhotonStatistics {
    let fm = FullMoments::of(state);
    let m = state.modes();
    let mean: Vec<f64> = (0..m).map(|i| fm.n(i)).collect();
    let variance: Vec<f64> = (0..m).map(|i| fm.variance(i)).collect();
    let mandel_q = mean
        .iter()
        .zip(&variance)
        .map(|(&n, &v)| (n > Q_FLOOR).then(|| v / n - 1.0))
        .collect();
    PhotonStatistics {
        mean,
        variance,
        mandel_q,
    }
}

/// Logarithmic negativity (base 2) of the bipartition `i | j` of the reduced
/// two-mode state.
pub fn log_negativity(state: &GaussianState, i: usize, j: usize) -> Result<f64> {
    if i == j {
        return Err(Error::InvalidState(
            "a bipartition needs two distinct modes".into(),
        ));
    }
    let r = state.reduced(&[i, j])?;
    let v = r.cov();
    let block = |r0: usize, c0: usize| {
        Matrix2::new(
            v[(r0, c0)],
            v[(r0, c0 + 1)],
            v[(r0 + 1, c0)],
            v[(r0 + 1, c0 + 1)],
        )
    };
    let delta =
        block(0, 0).determinant() + block(2, 2).determinant() - 2.0 * block(0, 2).determinant();
    let det = v.determinant();
    let disc = (delta * delta - 4.0 * det).max(0.0);
    let nu_sq = ((delta - disc.sqrt()) / 2.0).max(0.0);
    Ok((-(2.0 * nu_sq.sqrt()).log2()).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelation {
    pub i: usize,
    pub j: usize,
    pub g1: Option<Complex64>,
    pub g2: Option<f64>,
    pub n_i: f64,
    pub n_j: f64,
    pub log_negativity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub statistics: PhotonStatistics,
    pub pairs: Vec<PairCorrelation>,
}

pub const CORRELATION_COLUMNS: [&str; 7] = ["i", "j", "g1_re", "g1_im", "g2", "n_i", "n_j"];

impl CorrelationReport {
    /// Undefined correlations are written as empty fields.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", CORRELATION_COLUMNS.join(","))?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for p in &self.pairs {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.i,
                p.j,
                opt(p.g1.map(|z| z.re)),
                opt(p.g1.map(|z| z.im)),
                opt(p.g2),
                p.n_i,
                p.n_j
            )?;
        }
        Ok(())
    }
}

/// Every ordered pair `(i, j)` with `i <= j`.
pub fn all_pairs(modes: usize) -> Vec<(usize, usize)> {
    (0..modes)
        .flat_map(|i| (i..modes).map(move |j| (i, j)))
        .collect()
}

/// Normalized first- and second-order correlations for the requested pairs,
/// with the log-negativity of every off-diagonal pair.
pub fn correlations(state: &GaussianState, pairs: &[(usize, usize)]) -> Result<CorrelationReport> {
    let m = state.modes();
    if let Some(&(i, j)) = pairs.iter().find(|(i, j)| *i >= m || *j >= m) {
        return Err(Error::SiteOutOfRange {
            site: i.max(j),
            sites: m,
        });
    }
    let fm = FullMoments::of(state);
    let statistics = photon_statistics(state);
    let out = pairs
        .iter()
        .map(|&(i, j)| {
            let (ni, nj) = (fm.n(i), fm.n(j));
            let defined = ni > CORRELATION_FLOOR && nj > CORRELATION_FLOOR;
            let g1 = defined.then(|| {
                if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    fm.a[(i, j)] / (ni * nj).sqrt()
                }
            });
            let g2 = defined.then(|| fm.g2_numerator(i, j) / (ni * nj));
            let log_negativity = if i == j {
                None
            } else {
                Some(log_negativity(state, i, j)?)
            };
            Ok(PairCorrelation {
                i,
                j,
                g1,
                g2,
                n_i: ni,
                n_j: nj,
                log_negativity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CorrelationReport {
        statistics,
        pairs: out,
    })
}

/// Real matrix with explicit shape, for JSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub data: Vec<Vec<f64>>,
}

impl From<&DMatrix<f64>> for MatrixJson {
    fn from(m: &DMatrix<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }
}
