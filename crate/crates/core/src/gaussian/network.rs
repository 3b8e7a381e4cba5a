use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Axis, Boundary, LatticeSpec};
use crate::walk::{Protocol, WalkSpec};

use super::coupler::{coupler_on, CouplerKind};
use super::state::{GaussianState, UNCERTAINTY_TOL};
use super::symplectic::SymplecticOp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupler {
    pub a: usize,
    pub b: usize,
    pub kind: CouplerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Couplers on disjoint mode pairs.
    Couplers(Vec<Coupler>),
    /// Mode `i` is relabelled as mode `dest[i]`.
    Permute(Vec<usize>),
}

/// A layered bosonic network: one step applies every stage in order, and
/// the step is repeated `steps` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeNetwork {
    modes: usize,
    stages: Vec<Stage>,
    steps: usize,
}

fn check_permutation(dest: &[usize], modes: usize) -> Result<()> {
    if dest.len() != modes {
        return Err(Error::InvalidNetwork(format!(
            "permutation has {} entries for {modes} modes",
            dest.len()
        )));
    }
    let mut seen = vec![false; modes];
    for &d in dest {
        if d >= modes || std::mem::replace(&mut seen[d], true) {
            return Err(Error::InvalidNetwork(
                "relabelling is not a permutation".into(),
            ));
        }
    }
    Ok(())
}

fn shift_table(lattice: &LatticeSpec, axis: Axis, forward: bool) -> Result<Vec<usize>> {
    (0..lattice.sites())
        .map(|s| lattice.neighbor(s, axis, forward).ok_or(Error::NotPeriodic))
        .collect()
}

impl ModeNetwork {
    pub fn new(modes: usize, stages: Vec<Stage>, steps: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::InvalidNetwork("network has no modes".into()));
        }
        for stage in &stages {
            match stage {
                Stage::Couplers(cs) => {
                    let mut used = vec![false; modes];
                    for c in cs {
                        if c.a == c.b || c.a >= modes || c.b >= modes {
                            return Err(Error::InvalidNetwork(format!(
                                "coupler ({}, {}) is invalid for {modes} modes",
                                c.a, c.b
                            )));
                        }
                        for m in [c.a, c.b] {
                            if std::mem::replace(&mut used[m], true) {
                                return Err(Error::InvalidNetwork(format!(
                                    "mode {m} appears twice in one layer"
                                )));
                            }
                        }
                        let x = match c.kind {
                            CouplerKind::Active { chi } => chi,
                            CouplerKind::Passive { phi } => phi,
                        };
                        if !x.is_finite() {
                            return Err(Error::InvalidNetwork("non-finite coupling".into()));
                        }
                    }
                }
                Stage::Permute(dest) => check_permutation(dest, modes)?,
            }
        }
        Ok(Self {
            modes,
            stages,
            steps,
        })
    }

    /// Two-rail passive network whose mean field follows `spec`: mode
    /// `2 * site + coin` carries the amplitude of `(site, coin)`, coin
    /// rotations become passive couplers with `phi = theta / 2` and
    /// translations become relabellings. Only periodic lattices map onto a
    /// permutation.
    pub fn from_walk(spec: &WalkSpec) -> Result<Self> {
        let l = spec.lattice();
        if l.boundary() != Boundary::Periodic {
            return Err(Error::NotPeriodic);
        }
        let modes = l.hilbert_dim();
        let rotation = |theta: &[f64]| {
            Stage::Couplers(
                theta
                    .iter()
                    .enumerate()
                    .map(|(x, t)| Coupler {
                        a: 2 * x,
                        b: 2 * x + 1,
                        kind: CouplerKind::Passive { phi: t / 2.0 },
                    })
                    .collect(),
            )
        };
        let shift = |axis: Axis, up: bool, down: bool| -> Result<Stage> {
            let fwd = shift_table(l, axis, true)?;
            let back = shift_table(l, axis, false)?;
            let mut dest: Vec<usize> = (0..modes).collect();
            for s in 0..l.sites() {
                if up {
                    dest[2 * s] = 2 * fwd[s];
                }
                if down {
                    dest[2 * s + 1] = 2 * back[s] + 1;
                }
            }
            Ok(Stage::Permute(dest))
        };
        let t1 = spec.coins().theta1();
        let t2 = spec.coins().theta2();
        let stages = match spec.protocol() {
            Protocol::Simple => vec![rotation(t1), shift(Axis::X, true, true)?],
            Protocol::SplitStep => vec![
                rotation(t1),
                shift(Axis::X, true, false)?,
                rotation(t2.expect("validated split-step spec")),
                shift(Axis::X, false, true)?,
            ],
            Protocol::SplitStep2d => vec![
                rotation(t1),
                shift(Axis::X, true, true)?,
                rotation(t2.expect("validated split-step spec")),
                shift(Axis::Y, true, true)?,
            ],
        };
        Self::new(modes, stages, spec.steps())
    }

    /// Amplifying walk on a periodic chain of `sites` sites: each step is a
    /// passive coin layer `R(theta)`, an active layer with gain `chi` on the
    /// same `(up, down)` pairs, then the spin-dependent shift.
    pub fn amplifier(sites: usize, theta: f64, chi: f64, steps: usize) -> Result<Self> {
        let walk = WalkSpec::simple(sites, theta, steps)?;
        let mut net = Self::from_walk(&walk)?;
        let active = Stage::Couplers(
            (0..sites)
                .map(|x| Coupler {
                    a: 2 * x,
                    b: 2 * x + 1,
                    kind: CouplerKind::Active { chi },
                })
                .collect(),
        );
        net.stages.insert(1, active);
        Ok(net)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn with_steps(&self, steps: usize) -> Self {
        Self {
            steps,
            ..self.clone()
        }
    }

    pub fn is_passive(&self) -> bool {
        self.couplers().all(|c| !c.kind.is_active())
    }

    pub fn active_coupler_count(&self) -> usize {
        self.couplers()
            .filter(|c| matches!(c.kind, CouplerKind::Active { .. }))
            .count()
    }

    fn couplers(&self) -> impl Iterator<Item = &Coupler> {
        self.stages.iter().flat_map(|s| match s {
            Stage::Couplers(cs) => cs.as_slice(),
            Stage::Permute(_) => &[],
        })
    }

    /// Copy with every active coupler's gain set to `chi`.
    pub fn with_active_chi(&self, chi: f64) -> Self {
        let mut out = self.clone();
        for stage in &mut out.stages {
            if let Stage::Couplers(cs) = stage {
                for c in cs {
                    if let CouplerKind::Active { .. } = c.kind {
                        c.kind = CouplerKind::Active { chi };
                    }
                }
            }
        }
        out
    }

    /// Sum over steps and active layers of the largest `|chi|` in the layer.
    pub fn chi_total(&self) -> f64 {
        self.steps as f64 * self.layer_chis().iter().sum::<f64>()
    }

    /// Overall gain `prod cosh(chi)` over the same layers as
    /// [`chi_total`](Self::chi_total).
    pub fn total_gain(&self) -> f64 {
        self.layer_chis()
            .iter()
            .map(|c| c.cosh().powf(self.steps as f64))
            .product()
    }

    fn layer_chis(&self) -> Vec<f64> {
        self.stages
            .iter()
            .filter_map(|s| match s {
                Stage::Couplers(cs) => cs
                    .iter()
                    .filter_map(|c| match c.kind {
                        CouplerKind::Active { chi } => Some(chi.abs()),
                        CouplerKind::Passive { .. } => None,
                    })
                    .reduce(f64::max),
                Stage::Permute(_) => None,
            })
            .collect()
    }

    /// Quadrature map of one step.
    pub fn step_op(&self) -> SymplecticOp {
        let mut op = SymplecticOp::identity(self.modes);
        for stage in &self.stages {
            let layer = match stage {
                Stage::Couplers(cs) => cs
                    .iter()
                    .fold(SymplecticOp::identity(self.modes), |acc, c| {
                        coupler_on(self.modes, c.a, c.b, c.kind).compose(&acc)
                    }),
                Stage::Permute(dest) => SymplecticOp::permutation(dest).expect("validated"),
            };
            op = layer.compose(&op);
        }
        op
    }
}

/// Per-step decoherence applied after each network step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Decoherence {
    /// Fraction of photons lost per step (pure-loss channel to vacuum).
    pub loss: f64,
    /// Variance (rad^2) of an independent random phase on every mode per
    /// step. The averaged state is replaced by the Gaussian state with the
    /// same first and second moments.
    pub dephasing: f64,
}

impl Decoherence {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.loss) {
            return Err(Error::InvalidNoise(format!(
                "loss {} outside [0, 1]",
                self.loss
            )));
        }
        if !(self.dephasing >= 0.0 && self.dephasing.is_finite()) {
            return Err(Error::InvalidNoise(format!(
                "dephasing variance {} must be finite and >= 0",
                self.dephasing
            )));
        }
        Ok(())
    }

    pub fn is_none(&self) -> bool {
        self.loss == 0.0 && self.dephasing == 0.0
    }

    /// One application of the channel.
    pub fn apply(&self, state: &GaussianState) -> Result<GaussianState> {
        self.validate()?;
        let mut out = state.clone();
        if self.loss > 0.0 {
            let eta = 1.0 - self.loss;
            let dim = out.cov().nrows();
            let mean = out.mean() * eta.sqrt();
            let cov = out.cov() * eta + DMatrix::identity(dim, dim) * (0.5 * (1.0 - eta));
            out = GaussianState::from_parts_unchecked(mean, cov);
        }
        if self.dephasing > 0.0 {
            let s2 = self.dephasing;
            let mut mom = out.complex_moments();
            let m = mom.alpha.len();
            // full (non-central) moments pick up the average phase factors
            let full_n = |mom: &super::state::ComplexMoments, i: usize, j: usize| {
                mom.n[(i, j)] + mom.alpha[i].conj() * mom.alpha[j]
            };
            let full_m = |mom: &super::state::ComplexMoments, i: usize, j: usize| {
                mom.m[(i, j)] + mom.alpha[i] * mom.alpha[j]
            };
            let mut fn_ = DMatrix::from_fn(m, m, |i, j| full_n(&mom, i, j));
            let mut fm = DMatrix::from_fn(m, m, |i, j| full_m(&mom, i, j));
            let off = (-s2).exp();
            for i in 0..m {
                for j in 0..m {
                    if i != j {
                        fn_[(i, j)] *= off;
                        fm[(i, j)] *= off;
                    } else {
                        fm[(i, i)] *= (-2.0 * s2).exp();
                    }
                }
            }
            let scale = (-s2 / 2.0).exp();
            for a in &mut mom.alpha {
                *a *= scale;
            }
            for i in 0..m {
                for j in 0..m {
                    mom.n[(i, j)] = fn_[(i, j)] - mom.alpha[i].conj() * mom.alpha[j];
                    mom.m[(i, j)] = fm[(i, j)] - mom.alpha[i] * mom.alpha[j];
                }
            }
            out = GaussianState::from_complex_moments(&mom)?;
        }
        Ok(out)
    }
}

/// Mean total photon number.
pub fn total_photons(state: &GaussianState) -> f64 {
    let (v, mu) = (state.cov(), state.mean());
    (0..state.modes())
        .map(|i| {
            let (x, p) = (2 * i, 2 * i + 1);
            0.5 * (v[(x, x)] + v[(p, p)] - 1.0) + 0.5 * (mu[x] * mu[x] + mu[p] * mu[p])
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRun {
    pub state: GaussianState,
    /// Total photon number before the first step and after every step.
    pub photon_trace: Vec<f64>,
}

/// Apply the network's step `steps` times, with `decoherence` after each.
pub fn network_evolve(
    net: &ModeNetwork,
    input: &GaussianState,
    decoherence: &Decoherence,
) -> Result<NetworkRun> {
    if input.modes() != net.modes {
        return Err(Error::ShapeMismatch {
            expected: net.modes,
            actual: input.modes(),
        });
    }
    decoherence.validate()?;
    let op = net.step_op();
    let mut state = input.clone();
    let mut trace = Vec::with_capacity(net.steps + 1);
    trace.push(total_photons(&state));
    for _ in 0..net.steps {
        state = op.apply_unchecked(&state);
        if !decoherence.is_none() {
            state = decoherence.apply(&state)?;
        }
        trace.push(total_photons(&state));
    }
    let lowest = state.uncertainty_min_eig();
    if lowest < -UNCERTAINTY_TOL {
        return Err(Error::UncertaintyViolation(lowest));
    }
    Ok(NetworkRun {
        state,
        photon_trace: trace,
    })
}
