use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{position_distribution, reduce_angle, Boundary, SpinorField};
use crate::walk::{evolve, materialize_unitary, WalkSpec, DENSE_CAP};

/// Thresholds used to certify boundary-localized eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeOptions {
    /// The window around a wall at site `w` is `[w - half_width, w + half_width)`.
    pub half_width: usize,
    pub mass_threshold: f64,
    /// Certified states have participation ratio below `pr_fraction * sites`.
    pub pr_fraction: f64,
    /// Eigenvalues closer than this are treated as one degenerate cluster.
    pub cluster_tol: f64,
    /// Distance from 0 or pi below which a quasienergy counts as pinned.
    pub pin_tol: f64,
    pub cap: usize,
}

impl Default for EdgeOptions {
    fn default() -> Self {
        Self {
            half_width: 5,
            mass_threshold: 0.9,
            pr_fraction: 0.25,
            cluster_tol: 1e-6,
            pin_tol: 1e-8,
            cap: DENSE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeState {
    /// Index into `EdgeCertificate::walls`; `None` for ambiguous states.
    pub wall: Option<usize>,
    pub quasienergy: f64,
    pub pinned: bool,
    pub participation_ratio: f64,
    /// Decay length of the probability profile away from the wall, in sites.
    pub decay_length: Option<f64>,
    /// Probability in each wall's window, in `walls` order.
    pub window_mass: Vec<f64>,
    #[serde(skip)]
    pub amplitudes: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeCertificate {
    pub sites: usize,
    pub walls: Vec<usize>,
    pub options: EdgeOptions,
    pub states: Vec<EdgeState>,
    pub count_per_wall: Vec<usize>,
    pub count: usize,
    /// Localized states whose mass is split between walls.
    pub ambiguous: Vec<EdgeState>,
}

impl EdgeCertificate {
    pub fn states_at(&self, wall: usize) -> impl Iterator<Item = &EdgeState> {
        self.states.iter().filter(move |s| s.wall == Some(wall))
    }
}

/// Sites where `theta2` changes value, on a periodic chain. Walls sit
/// between site `w - 1` and site `w`.
pub fn domain_walls(spec: &WalkSpec) -> Result<Vec<usize>> {
    let l = spec.lattice();
    if l.dimension() != 1 {
        return Err(Error::NotOneDimensional);
    }
    if l.boundary() != Boundary::Periodic {
        return Err(Error::NotPeriodic);
    }
    let t2 = spec
        .coins()
        .theta2()
        .ok_or_else(|| Error::InvalidSpec("edge search needs a theta2 profile".into()))?;
    let n = t2.len();
    let walls: Vec<usize> = (0..n).filter(|&x| t2[x] != t2[(x + n - 1) % n]).collect();
    if walls.len() != 2 {
        return Err(Error::DomainWalls(walls.len()));
    }
    Ok(walls)
}

/// Sites of the window around a wall.
pub fn window_sites(wall: usize, half_width: usize, sites: usize) -> Vec<usize> {
    (0..2 * half_width)
        .map(|d| (wall + sites + d - half_width) % sites)
        .collect()
}

fn site_weights(v: &[Complex64]) -> Vec<f64> {
    v.chunks_exact(2)
        .map(|p| p[0].norm_sqr() + p[1].norm_sqr())
        .collect()
}

/// Groups of eigenvalue indices within `tol` of each other (single linkage).
fn clusters(values: &[Complex64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() < tol {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Least-squares decay length of `p` away from `wall`, using sites up to
/// `reach` away and ignoring values at the round-off floor.
fn decay_length(p: &[f64], wall: usize, reach: usize) -> Option<f64> {
    let n = p.len();
    let peak = p.iter().cloned().fold(0.0, f64::max);
    let mut pts = Vec::new();
    for d in 0..reach {
        for x in [(wall + d) % n, (wall + n - 1 - d) % n] {
            if p[x] > 1e-13 * peak {
                pts.push((d as f64 + 0.5, p[x].ln()));
            }
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, q| (a.0 + q.0, a.1 + q.1));
    let (mx, my) = (sx / m, sy / m);
    let sxx: f64 = pts.iter().map(|q| sq(q.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let slope = sxy / sxx;
    (slope < 0.0).then(|| -1.0 / slope)
}

/// Diagonalize the one-step unitary of a two-domain chain and certify the
/// eigenstates localized at its domain walls.
///
/// Degenerate eigenvalues are grouped and each group is rotated to
/// diagonalize the difference of the two wall-window projectors, so states
/// at different walls sharing a quasienergy come out separated.
pub fn find_edge_states(spec: &WalkSpec, opts: &EdgeOptions) -> Result<EdgeCertificate> {
    let walls = domain_walls(spec)?;
    let sites = spec.lattice().sites();
    let u = materialize_unitary(spec, opts.cap)?;
    let dim = u.nrows();
    let (q, t) = Schur::try_new(u, 1e-14, 100_000)
        .ok_or_else(|| Error::InvalidSpec("Schur decomposition did not converge".into()))?
        .unpack();
    let eigenvalues: Vec<Complex64> = (0..dim).map(|i| t[(i, i)]).collect();

    let windows: Vec<Vec<usize>> = walls
        .iter()
        .map(|&w| window_sites(w, opts.half_width, sites))
        .collect();
    let mut projector_diff = vec![0.0; dim];
    for s in &windows[0] {
        projector_diff[2 * s] += 1.0;
        projector_diff[2 * s + 1] += 1.0;
    }
    for s in &windows[1] {
        projector_diff[2 * s] -= 1.0;
        projector_diff[2 * s + 1] -= 1.0;
    }

    let pr_limit = opts.pr_fraction * sites as f64;
    let gap = {
        let (a, b) = (walls[0], walls[1]);
        (b - a).min(sites - (b - a))
    };
    let mut states = Vec::new();
    let mut ambiguous = Vec::new();
    for group in clusters(&eigenvalues, opts.cluster_tol) {
        let basis = DMatrix::from_fn(dim, group.len(), |r, c| q[(r, group[c])]);
        let local = if group.len() == 1 {
            DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0))
        } else {
            let scaled =
                DMatrix::from_fn(dim, group.len(), |r, c| basis[(r, c)] * projector_diff[r]);
            SymmetricEigen::new(basis.adjoint() * scaled).eigenvectors
        };
        let t_block = DMatrix::from_fn(group.len(), group.len(), |r, c| t[(group[r], group[c])]);
        for col in 0..group.len() {
            let coeffs: DVector<Complex64> = local.column(col).into_owned();
            let v = &basis * &coeffs;
            let p = site_weights(v.as_slice());
            let total: f64 = p.iter().sum();
            let p: Vec<f64> = p.iter().map(|x| x / total).collect();
            let pr = 1.0 / p.iter().map(|x| x * x).sum::<f64>();
            if pr >= pr_limit {
                continue;
            }
            let mass: Vec<f64> = windows
                .iter()
                .map(|w| w.iter().map(|&s| p[s]).sum())
                .collect();
            let rayleigh = (coeffs.adjoint() * &t_block * &coeffs)[(0, 0)];
            let quasienergy = reduce_angle(-rayleigh.arg());
            let pinned = quasienergy.abs().min(PI - quasienergy.abs()) < opts.pin_tol;
            let best = if mass[0] >= mass[1] { 0 } else { 1 };
            let mut state = EdgeState {
                wall: None,
                quasienergy,
                pinned,
                participation_ratio: pr,
                decay_length: None,
                window_mass: mass.clone(),
                amplitudes: v.as_slice().to_vec(),
            };
            if mass[best] >= opts.mass_threshold {
                state.wall = Some(best);
                state.decay_length = decay_length(&p, walls[best], gap / 2);
                states.push(state);
            } else if mass[0] + mass[1] >= opts.mass_threshold {
                ambiguous.push(state);
            }
        }
    }
    states.sort_by(|a, b| {
        (a.wall, a.quasienergy)
            .partial_cmp(&(b.wall, b.quasienergy))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let count_per_wall: Vec<usize> = (0..walls.len())
        .map(|w| states.iter().filter(|s| s.wall == Some(w)).count())
        .collect();
    Ok(EdgeCertificate {
        sites,
        count: states.len(),
        walls,
        options: *opts,
        states,
        count_per_wall,
        ambiguous,
    })
}

/// `sum_i |<edge_i|psi>|^2` over the certified states at one wall.
pub fn edge_overlap(cert: &EdgeCertificate, wall: usize, psi: &SpinorField) -> f64 {
    cert.states_at(wall)
        .map(|s| {
            s.amplitudes
                .iter()
                .zip(psi.amplitudes())
                .map(|(e, a)| e.conj() * a)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryWalk {
    pub wall: usize,
    pub half_width: usize,
    pub steps: usize,
    pub distribution: Vec<f64>,
    /// Probability in the wall window after the final step.
    pub retained: f64,
    /// Retained probability after each step `1..=steps`.
    pub retained_series: Vec<f64>,
}

/// Evolve `psi0` for `steps` steps and record the probability kept in the
/// window around `wall`.
pub fn boundary_walk_experiment(
    spec: &WalkSpec,
    psi0: &SpinorField,
    steps: usize,
    wall: usize,
    half_width: usize,
) -> Result<BoundaryWalk> {
    if steps == 0 {
        return Err(Error::InvalidSpec(
            "boundary walk needs at least one step".into(),
        ));
    }
    domain_walls(spec)?;
    let sites = spec.lattice().sites();
    if wall >= sites {
        return Err(Error::SiteOutOfRange { site: wall, sites });
    }
    let window = window_sites(wall, half_width, sites);
    let in_window = |psi: &SpinorField| -> f64 {
        let w = psi.site_weights();
        window.iter().map(|&s| w[s]).sum()
    };
    let mut series = Vec::with_capacity(steps);
    let last = evolve(psi0, spec, steps, |_, f| series.push(in_window(f)))?;
    Ok(BoundaryWalk {
        wall,
        half_width,
        steps,
        distribution: position_distribution(&last)?,
        retained: *series.last().unwrap_or(&0.0),
        retained_series: series,
    })
}

/// `x * x`; `powi` does not promise identical rounding across builds.
fn sq(x: f64) -> f64 {
    x * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_localized_state, CoinProfile, LatticeSpec};
    use crate::walk::Protocol;

    fn two_domain(sites: usize, t1: f64, left: f64, right: f64) -> WalkSpec {
        let l = LatticeSpec::line(sites, Boundary::Periodic).unwrap();
        let coins = CoinProfile::two_domain(&l, t1, left, right, sites / 2).unwrap();
        WalkSpec::new(l, coins, Protocol::SplitStep, 1).unwrap()
    }

    #[test]
    fn walls_of_two_domain_profile() {
        assert_eq!(
            domain_walls(&two_domain(16, 0.5, 0.1, 0.2)).unwrap(),
            vec![0, 8]
        );
        let uniform = WalkSpec::split_step(16, 0.5, 0.1, 1).unwrap();
        assert_eq!(domain_walls(&uniform), Err(Error::DomainWalls(0)));
    }

    #[test]
    fn window_wraps() {
        assert_eq!(window_sites(0, 2, 10), vec![8, 9, 0, 1]);
        assert_eq!(window_sites(5, 1, 10), vec![4, 5]);
    }

    #[test]
    fn clustering_is_transitive() {
        let v = [
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 5e-7),
            Complex64::new(1.0, 1e-6),
            Complex64::new(-1.0, 0.0),
        ];
        let g = clusters(&v, 6e-7);
        assert_eq!(g, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn decay_length_of_exponential() {
        let n = 40;
        let p: Vec<f64> = (0..n)
            .map(|x| {
                let d = ((x as f64 + 0.5) - 20.0).abs();
                (-d / 3.0).exp()
            })
            .collect();
        let xi = decay_length(&p, 20, 15).unwrap();
        assert!((xi - 3.0).abs() < 1e-9);
    }

    #[test]
    fn same_phase_domains_have_no_edge_states() {
        let cert = find_edge_states(
            &two_domain(32, PI / 2.0, 0.1, 0.3 * PI),
            &EdgeOptions::default(),
        )
        .unwrap();
        assert_eq!(cert.count, 0);
    }

    #[test]
    fn topological_wall_hosts_one_pinned_state() {
        let spec = two_domain(32, PI / 2.0, -0.3 * PI, 0.85 * PI);
        let cert = find_edge_states(&spec, &EdgeOptions::default()).unwrap();
        assert_eq!(cert.count_per_wall, vec![1, 1]);
        for s in &cert.states {
            assert!(s.pinned, "{}", s.quasienergy);
            assert!(s.decay_length.unwrap() > 0.0);
        }
        let psi = make_localized_state(
            *spec.lattice(),
            15,
            [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        )
        .unwrap();
        let ov = edge_overlap(&cert, 1, &psi);
        assert!(ov > 0.0 && ov <= 1.0);
    }
}
