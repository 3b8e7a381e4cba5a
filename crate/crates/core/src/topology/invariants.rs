use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::reduce_angle;
use crate::walk::WalkSpec;

use super::bloch::{bloch_decompose, BlochData};

/// Spectral gap below which winding numbers are refused.
pub const MIN_GAP: f64 = 1e-6;
/// Allowed out-of-plane component of the Bloch vector.
pub const CHIRAL_TOL: f64 = 1e-6;
/// Allowed distance of the winding integral from an integer.
pub const WINDING_TOL: f64 = 0.01;
/// Residual below which a symmetry is reported as present.
pub const SYMMETRY_TOL: f64 = 1e-8;

const DEFAULT_POINTS: usize = 256;
const MAX_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryFlags {
    pub phs: bool,
    pub phs_residual: f64,
    pub cs: bool,
    pub cs_residual: f64,
    /// Present whenever both PHS and CS are.
    pub trs: bool,
}

/// Unit normal of the plane best containing every defined Bloch vector, with
/// the out-of-plane residual `max_k |n(k) . axis|`.
///
/// The sign is fixed so that the first component with magnitude above 1e-6,
/// in the order x, z, y, is positive.
pub fn fit_chiral_axis(bloch: &BlochData) -> Option<([f64; 3], f64)> {
    let ns: Vec<Vector3<f64>> = bloch
        .bloch_vector
        .iter()
        .flatten()
        .map(|n| Vector3::from(*n))
        .collect();
    if ns.len() < 2 {
        return None;
    }
    let scatter: Matrix3<f64> = ns.iter().map(|n| n * n.transpose()).sum();
    let eig = SymmetricEigen::new(scatter);
    let imin = eig.eigenvalues.imin();
    let mut axis: Vector3<f64> = eig.eigenvectors.column(imin).normalize();
    let lead = [axis.x, axis.z, axis.y]
        .into_iter()
        .find(|v| v.abs() > 1e-6)
        .unwrap_or(1.0);
    if lead < 0.0 {
        axis = -axis;
    }
    let residual = ns.iter().map(|n| n.dot(&axis).abs()).fold(0.0, f64::max);
    Some(([axis.x, axis.y, axis.z], residual))
}

pub fn symmetry_flags(bloch: &BlochData) -> SymmetryFlags {
    let phs_residual = bloch
        .e_plus
        .iter()
        .zip(&bloch.e_minus)
        .map(|(a, b)| reduce_angle(a + b).abs())
        .fold(0.0, f64::max);
    let cs_residual = fit_chiral_axis(bloch).map_or(f64::INFINITY, |(_, r)| r);
    let phs = phs_residual <= SYMMETRY_TOL;
    let cs = cs_residual <= SYMMETRY_TOL;
    SymmetryFlags {
        phs,
        phs_residual,
        cs,
        cs_residual,
        trs: phs && cs,
    }
}

pub fn symmetry_check(spec: &WalkSpec) -> Result<SymmetryFlags> {
    Ok(symmetry_flags(&bloch_decompose(spec, DEFAULT_POINTS)?))
}

/// Real-valued winding of `n(k)` about `axis`, before rounding.
fn winding_integral(bloch: &BlochData, axis: [f64; 3]) -> Result<f64> {
    let (gap, k) = bloch.gap();
    if !(gap > MIN_GAP) {
        return Err(Error::GapClosed { gap, k });
    }
    let a = Vector3::from(axis).normalize();
    let mut e1 = a.cross(&Vector3::y());
    if e1.norm() < 1e-3 {
        e1 = a.cross(&Vector3::x());
    }
    let e1 = e1.normalize();
    let e2 = a.cross(&e1);
    let mut angles = Vec::with_capacity(bloch.len());
    let mut off_plane = 0.0f64;
    for n in &bloch.bloch_vector {
        // a gapped spectrum defines n everywhere
        let n = Vector3::from(n.expect("gapped spectrum"));
        off_plane = off_plane.max(n.dot(&a).abs());
        angles.push(n.dot(&e2).atan2(n.dot(&e1)));
    }
    if off_plane > CHIRAL_TOL {
        return Err(Error::ChiralViolation(off_plane));
    }
    let total: f64 = (0..angles.len())
        .map(|i| reduce_angle(angles[(i + 1) % angles.len()] - angles[i]))
        .sum();
    Ok(total / (2.0 * PI))
}

/// Signed number of turns of `n(k)` about `axis` across the Brillouin zone.
pub fn winding_number(bloch: &BlochData, axis: [f64; 3]) -> Result<i64> {
    let w = winding_integral(bloch, axis)?;
    if (w - w.round()).abs() > WINDING_TOL {
        return Err(Error::WindingResidual { value: w });
    }
    Ok(w.round() as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub winding: i64,
    /// `min_k` distance of the bands from {0, pi}.
    pub gap: f64,
    pub gap0: f64,
    pub gap_pi: f64,
    pub chiral_axis: [f64; 3],
    pub k_points: usize,
    pub symmetry: SymmetryFlags,
}

/// Winding number and gaps of a homogeneous chain walk, with the chiral axis
/// fitted from the Bloch vectors. The momentum grid starts at 256 points and
/// is doubled (up to 4096) while the winding integral is not near an integer.
pub fn topology_report(spec: &WalkSpec) -> Result<TopologyReport> {
    let mut points = DEFAULT_POINTS;
    loop {
        let bloch = bloch_decompose(spec, points)?;
        let (gap, k) = bloch.gap();
        if !(gap > MIN_GAP) {
            return Err(Error::GapClosed { gap, k });
        }
        let symmetry = symmetry_flags(&bloch);
        let (axis, _) = fit_chiral_axis(&bloch).ok_or(Error::GapClosed { gap, k })?;
        match winding_number(&bloch, axis) {
            Ok(winding) => {
                return Ok(TopologyReport {
                    winding,
                    gap,
                    gap0: bloch.gap0().0,
                    gap_pi: bloch.gap_pi().0,
                    chiral_axis: axis,
                    k_points: points,
                    symmetry,
                })
            }
            Err(Error::WindingResidual { .. }) if points < MAX_POINTS => points *= 2,
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub theta1: f64,
    pub theta2: f64,
    /// `None` for cells whose gap closes or whose invariant is ill-defined.
    pub winding: Option<i64>,
    pub gap0: f64,
    pub gap_pi: f64,
}

impl PhaseCell {
    pub fn gapless(&self) -> bool {
        self.winding.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub resolution: usize,
    /// Row-major in `theta1` (outer) then `theta2`.
    pub cells: Vec<PhaseCell>,
}

pub const PHASE_DIAGRAM_COLUMNS: [&str; 6] = [
    "theta1",
    "theta2",
    "winding",
    "gap0",
    "gapPi",
    "gapless_flag",
];

impl PhaseDiagram {
    pub fn cell(&self, i: usize, j: usize) -> &PhaseCell {
        &self.cells[i * self.resolution + j]
    }

    /// Gapless cells leave the winding column empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", PHASE_DIAGRAM_COLUMNS.join(","))?;
        for c in &self.cells {
            let winding = c.winding.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{}",
                c.theta1,
                c.theta2,
                winding,
                c.gap0,
                c.gap_pi,
                u8::from(c.gapless())
            )?;
        }
        Ok(())
    }
}

/// Centre of cell `i` when (-pi, pi] is cut into `resolution` cells.
pub fn cell_centre(i: usize, resolution: usize) -> f64 {
    -PI + (i as f64 + 0.5) * 2.0 * PI / resolution as f64
}

/// Split-step phase diagram over cell centres of (-pi, pi]^2, evaluated on a
/// periodic chain of `sites` sites.
pub fn phase_diagram(resolution: usize, sites: usize) -> Result<PhaseDiagram> {
    if resolution < 8 {
        return Err(Error::InvalidSpec(format!(
            "phase diagram resolution {resolution} is below 8"
        )));
    }
    let cells = (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let theta1 = cell_centre(idx / resolution, resolution);
            let theta2 = cell_centre(idx % resolution, resolution);
            let spec = WalkSpec::split_step(sites, theta1, theta2, 1)?;
            let bloch = bloch_decompose(&spec, DEFAULT_POINTS)?;
            let winding = topology_report(&spec).ok().map(|r| r.winding);
            Ok(PhaseCell {
                theta1,
                theta2,
                winding,
                gap0: bloch.gap0().0,
                gap_pi: bloch.gap_pi().0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseDiagram { resolution, cells })
}
