use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::network::{network_evolve, total_photons, Decoherence, ModeNetwork};
use super::state::GaussianState;
use super::stats::{correlations, log_negativity, photon_statistics};

/// Margins at or below this count as classical.
pub const MARGIN_TOL: f64 = 1e-12;

/// Nonclassicality measure tracked by a gain scan. Each has a margin that is
/// positive exactly when the state is nonclassical by that measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// `1/2 - min eig(cov)`: some quadrature below vacuum noise.
    #[default]
    QuadratureSqueezing,
    /// `-min_i Q_i`: some mode is sub-Poissonian.
    MandelQ,
    /// `max_{i<j} E_N(i|j)`.
    LogNegativity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nonclassicality {
    pub min_q: Option<f64>,
    pub max_log_negativity: f64,
    pub min_variance: f64,
}

impl Nonclassicality {
    pub fn of(state: &GaussianState) -> Result<Self> {
        let stats = photon_statistics(state);
        let min_q = stats.mandel_q.iter().flatten().copied().reduce(f64::min);
        let m = state.modes();
        let mut en = 0.0f64;
        for i in 0..m {
            for j in i + 1..m {
                en = en.max(log_negativity(state, i, j)?);
            }
        }
        Ok(Self {
            min_q,
            max_log_negativity: en,
            min_variance: state.min_quadrature_variance(),
        })
    }

    pub fn margin(&self, f: Functional) -> f64 {
        match f {
            Functional::QuadratureSqueezing => 0.5 - self.min_variance,
            Functional::MandelQ => self.min_q.map_or(0.0, |q| -q),
            Functional::LogNegativity => self.max_log_negativity,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub chi: f64,
    pub chi_total: f64,
    pub gain: f64,
    pub measures: Nonclassicality,
    pub margin: f64,
}

impl ScanPoint {
    pub fn nonclassical(&self) -> bool {
        self.margin > MARGIN_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Crossing {
    /// Nonclassicality persists over the whole grid.
    NoneFound,
    /// Already classical at the first grid point.
    BelowGrid,
    Found {
        chi: f64,
        chi_total: f64,
        gain: f64,
        /// Grid points around the crossing. Widened to span every sign
        /// change when the margin is not monotone on the grid.
        bracket: [f64; 2],
        widened: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainScan {
    pub functional: Functional,
    pub decoherence: Decoherence,
    pub points: Vec<ScanPoint>,
    pub crossing: Crossing,
}

pub const SCAN_COLUMNS: [&str; 6] = [
    "chi_total",
    "gain",
    "minQ",
    "logneg",
    "crossed_flag",
    "min_var",
];

impl GainScan {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", SCAN_COLUMNS.join(","))?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.chi_total,
                p.gain,
                p.measures.min_q.map(|q| q.to_string()).unwrap_or_default(),
                p.measures.max_log_negativity,
                u8::from(!p.nonclassical()),
                p.measures.min_variance
            )?;
        }
        Ok(())
    }
}

fn evaluate(
    template: &ModeNetwork,
    chi: f64,
    input: &GaussianState,
    decoherence: &Decoherence,
    functional: Functional,
) -> Result<ScanPoint> {
    let net = template.with_active_chi(chi);
    let out = network_evolve(&net, input, decoherence)?.state;
    let measures = Nonclassicality::of(&out)?;
    Ok(ScanPoint {
        chi,
        chi_total: net.chi_total(),
        gain: net.total_gain(),
        margin: measures.margin(functional),
        measures,
    })
}

/// Scan the gain of every active coupler in `template` over `chi_grid` and
/// locate where the chosen nonclassicality first vanishes. The crossing is
/// bracketed on the grid and refined by bisection.
pub fn gain_scan(
    template: &ModeNetwork,
    chi_grid: &[f64],
    input: &GaussianState,
    decoherence: &Decoherence,
    functional: Functional,
) -> Result<GainScan> {
    if chi_grid.len() < 2 {
        return Err(Error::InvalidScan(
            "the gain grid needs at least two points".into(),
        ));
    }
    if chi_grid.iter().any(|c| !c.is_finite()) || chi_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidScan(
            "the gain grid must be strictly increasing".into(),
        ));
    }
    if template.active_coupler_count() == 0 {
        return Err(Error::InvalidScan(
            "the network has no active couplers".into(),
        ));
    }
    decoherence.validate()?;
    let points = chi_grid
        .par_iter()
        .map(|&chi| evaluate(template, chi, input, decoherence, functional))
        .collect::<Result<Vec<_>>>()?;

    let crossing = if !points[0].nonclassical() {
        Crossing::BelowGrid
    } else {
        let drops: Vec<usize> = (1..points.len())
            .filter(|&i| points[i - 1].nonclassical() && !points[i].nonclassical())
            .collect();
        match drops.first() {
            None => Crossing::NoneFound,
            Some(&first) => {
                let recovers = (first..points.len()).any(|i| points[i].nonclassical());
                let widened = drops.len() > 1 || recovers;
                let upper = if widened {
                    (first..points.len())
                        .rev()
                        .find(|&i| !points[i].nonclassical())
                        .unwrap_or(first)
                } else {
                    first
                };
                let (mut lo, mut hi) = (chi_grid[first - 1], chi_grid[first]);
                for _ in 0..200 {
                    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if evaluate(template, mid, input, decoherence, functional)?.nonclassical() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let at = template.with_active_chi(hi);
                Crossing::Found {
                    chi: hi,
                    chi_total: at.chi_total(),
                    gain: at.total_gain(),
                    bracket: [chi_grid[first - 1], chi_grid[upper]],
                    widened,
                }
            }
        }
    };
    Ok(GainScan {
        functional,
        decoherence: *decoherence,
        points,
        crossing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub phi: f64,
    pub total_photons: f64,
    pub g2_cross: Option<f64>,
}

/// Feed coherent beams `alpha` into mode `a` and `alpha e^{i phi}` into mode
/// `b` (all other modes in vacuum) and record the output photon number and
/// the output `g2(a, b)` for each `phi`.
pub fn phase_sensitivity(
    net: &ModeNetwork,
    alpha: Complex64,
    a: usize,
    b: usize,
    phis: &[f64],
) -> Result<Vec<PhasePoint>> {
    let m = net.modes();
    if a >= m || b >= m || a == b {
        return Err(Error::InvalidState(format!(
            "input modes ({a}, {b}) are not two distinct modes of {m}"
        )));
    }
    phis.par_iter()
        .map(|&phi| {
            let mut alphas = vec![Complex64::new(0.0, 0.0); m];
            alphas[a] = alpha;
            alphas[b] = alpha * Complex64::from_polar(1.0, phi);
            let out = network_evolve(
                net,
                &GaussianState::coherent(&alphas),
                &Decoherence::default(),
            )?
            .state;
            let g2 = correlations(&out, &[(a, b)])?.pairs[0].g2;
            Ok(PhasePoint {
                phi,
                total_photons: total_photons(&out),
                g2_cross: g2,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRanking {
    pub name: String,
    pub clean_margin: f64,
    pub noisy_margin: f64,
    /// `noisy_margin / clean_margin`; `None` when the clean output is classical.
    pub retention: Option<f64>,
}

/// Exploratory search for inputs whose nonclassicality best survives
/// decoherence: evolve every candidate with and without `decoherence` and
/// rank by retained margin, best first.
pub fn rank_inputs(
    net: &ModeNetwork,
    candidates: &[(String, GaussianState)],
    decoherence: &Decoherence,
    functional: Functional,
) -> Result<Vec<InputRanking>> {
    let mut out = candidates
        .par_iter()
        .map(|(name, input)| {
            let margin = |d: &Decoherence| -> Result<f64> {
                let s = network_evolve(net, input, d)?.state;
                Ok(Nonclassicality::of(&s)?.margin(functional))
            };
            let clean = margin(&Decoherence::default())?;
            let noisy = margin(decoherence)?;
            Ok(InputRanking {
                name: name.clone(),
                clean_margin: clean,
                noisy_margin: noisy,
                retention: (clean > MARGIN_TOL).then(|| noisy / clean),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|x, y| {
        let key = |r: &InputRanking| r.retention.unwrap_or(f64::NEG_INFINITY);
        key(y).total_cmp(&key(x))
    });
    Ok(out)
}
