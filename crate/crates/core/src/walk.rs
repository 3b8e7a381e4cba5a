//! Unitary walk steps: coin rotations, spin-dependent translations and the
//! simple, split-step and two-dimensional split-step protocols.
//!
//! The coin rotation at a site with angle `theta` is the real matrix
//!
//! ```text
//! R(theta) = [[cos(theta/2), -sin(theta/2)],
//!             [sin(theta/2),  cos(theta/2)]]
//! ```
//!
//! acting on `(up, down)`. The translation moves the up component one site
//! forward and the down component one site back. Operator products are read
//! right to left, so the split step `T_down R(theta2) T_up R(theta1)` applies
//! `R(theta1)` first.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Axis, Boundary, CoinProfile, LatticeSpec, SpinorField};

/// Default cap on the Hilbert dimension of dense one-step unitaries.
pub const DENSE_CAP: usize = 8192;

/// Time step of one walk step. Quasienergies are in radians per step.
pub const DT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// `U = T R(theta1)` on a chain.
    Simple,
    /// `U = T_down R(theta2) T_up R(theta1)` on a chain.
    SplitStep,
    /// `U = T_y R(theta2) T_x R(theta1)` on a square lattice.
    SplitStep2d,
}

/// Which coin components a translation moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    Both,
    UpOnly,
    DownOnly,
}

/// A complete walk protocol: lattice, coin angles, step rule and step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSpec {
    lattice: LatticeSpec,
    coins: CoinProfile,
    protocol: Protocol,
    steps: usize,
}

impl WalkSpec {
    pub fn new(
        lattice: LatticeSpec,
        coins: CoinProfile,
        protocol: Protocol,
        steps: usize,
    ) -> Result<Self> {
        if coins.theta1().len() != lattice.sites() {
            return Err(Error::InvalidSpec(
                "coin profile does not match the lattice".into(),
            ));
        }
        match protocol {
            Protocol::Simple | Protocol::SplitStep if lattice.dimension() != 1 => {
                return Err(Error::InvalidSpec(format!(
                    "{protocol:?} needs a one-dimensional lattice"
                )));
            }
            Protocol::SplitStep2d if lattice.dimension() != 2 => {
                return Err(Error::InvalidSpec(
                    "split_step_2d needs a two-dimensional lattice".into(),
                ));
            }
            Protocol::SplitStep | Protocol::SplitStep2d if coins.theta2().is_none() => {
                return Err(Error::InvalidSpec(format!(
                    "{protocol:?} needs a theta2 profile"
                )));
            }
            _ => {}
        }
        Ok(Self {
            lattice,
            coins,
            protocol,
            steps,
        })
    }

    /// Homogeneous simple walk on a periodic chain.
    pub fn simple(sites: usize, theta: f64, steps: usize) -> Result<Self> {
        let lattice = LatticeSpec::line(sites, Boundary::Periodic)?;
        let coins = CoinProfile::uniform(&lattice, theta, None)?;
        Self::new(lattice, coins, Protocol::Simple, steps)
    }

    /// Homogeneous split-step walk on a periodic chain.
    pub fn split_step(sites: usize, theta1: f64, theta2: f64, steps: usize) -> Result<Self> {
        let lattice = LatticeSpec::line(sites, Boundary::Periodic)?;
        let coins = CoinProfile::uniform(&lattice, theta1, Some(theta2))?;
        Self::new(lattice, coins, Protocol::SplitStep, steps)
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn coins(&self) -> &CoinProfile {
        &self.coins
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
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

    fn theta2(&self) -> &[f64] {
        // present for every protocol that reads it (checked in `new`)
        self.coins.theta2().unwrap_or(&[])
    }
}

/// Half-angle cosines and sines of a rotation profile.
#[derive(Debug, Clone)]
struct Rotation {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Rotation {
    fn new(theta: &[f64]) -> Self {
        Self {
            cos: theta.iter().map(|t| (t / 2.0).cos()).collect(),
            sin: theta.iter().map(|t| (t / 2.0).sin()).collect(),
        }
    }

    fn apply(&self, amps: &mut [Complex64]) {
        for ((pair, &c), &s) in amps.chunks_exact_mut(2).zip(&self.cos).zip(&self.sin) {
            let (u, d) = (pair[0], pair[1]);
            pair[0] = u * c - d * s;
            pair[1] = u * s + d * c;
        }
    }

    fn apply_at(&self, amps: &mut [Complex64], site: usize) {
        let (c, s) = (self.cos[site], self.sin[site]);
        let (u, d) = (amps[2 * site], amps[2 * site + 1]);
        amps[2 * site] = u * c - d * s;
        amps[2 * site + 1] = u * s + d * c;
    }
}

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
struct Translation {
    forward: Vec<usize>,
    backward: Vec<usize>,
    shift: Shift,
}

impl Translation {
    fn new(lattice: &LatticeSpec, axis: Axis, shift: Shift) -> Self {
        let table = |fwd| {
            (0..lattice.sites())
                .map(|s| lattice.neighbor(s, axis, fwd).unwrap_or(NONE))
                .collect()
        };
        Self {
            forward: table(true),
            backward: table(false),
            shift,
        }
    }

    fn apply(&self, src: &[Complex64], dst: &mut [Complex64]) -> Result<()> {
        self.move_sites(src, dst, 0..self.forward.len())
    }

    fn move_sites(
        &self,
        src: &[Complex64],
        dst: &mut [Complex64],
        sites: impl Iterator<Item = usize>,
    ) -> Result<()> {
        let move_up = self.shift != Shift::DownOnly;
        let move_down = self.shift != Shift::UpOnly;
        for site in sites {
            let (u, d) = (src[2 * site], src[2 * site + 1]);
            let up_to = if move_up { self.forward[site] } else { site };
            let down_to = if move_down { self.backward[site] } else { site };
            if up_to == NONE {
                if u.norm_sqr() > 0.0 {
                    return Err(Error::BoundaryOverflow { site });
                }
            } else {
                dst[2 * up_to] = u;
            }
            if down_to == NONE {
                if d.norm_sqr() > 0.0 {
                    return Err(Error::BoundaryOverflow { site });
                }
            } else {
                dst[2 * down_to + 1] = d;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Stage {
    Rotate(Rotation),
    Translate(Translation),
}

/// Precomputed, allocation-free realization of one walk step.
///
/// Stepping is sequential and deterministic; independent walkers may share a
/// stepper across threads since `apply` takes `&self`.
#[derive(Debug, Clone)]
pub struct WalkStepper {
    lattice: LatticeSpec,
    stages: Vec<Stage>,
}

impl WalkStepper {
    pub fn new(spec: &WalkSpec) -> Self {
        let l = &spec.lattice;
        let r1 = Stage::Rotate(Rotation::new(spec.coins.theta1()));
        let stages = match spec.protocol {
            Protocol::Simple => vec![
                r1,
                Stage::Translate(Translation::new(l, Axis::X, Shift::Both)),
            ],
            Protocol::SplitStep => vec![
                r1,
                Stage::Translate(Translation::new(l, Axis::X, Shift::UpOnly)),
                Stage::Rotate(Rotation::new(spec.theta2())),
                Stage::Translate(Translation::new(l, Axis::X, Shift::DownOnly)),
            ],
            Protocol::SplitStep2d => vec![
                r1,
                Stage::Translate(Translation::new(l, Axis::X, Shift::Both)),
                Stage::Rotate(Rotation::new(spec.theta2())),
                Stage::Translate(Translation::new(l, Axis::Y, Shift::Both)),
            ],
        };
        Self {
            lattice: *l,
            stages,
        }
    }

    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    /// Apply one step in place. `scratch` must have the same length as `amps`.
    /// On error `amps` is left in an unspecified intermediate state.
    pub fn apply(&self, amps: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>) -> Result<()> {
        let dim = self.lattice.hilbert_dim();
        if amps.len() != dim {
            return Err(Error::ShapeMismatch {
                expected: dim,
                actual: amps.len(),
            });
        }
        scratch.resize(dim, Complex64::new(0.0, 0.0));
        for stage in &self.stages {
            match stage {
                Stage::Rotate(r) => r.apply(amps),
                Stage::Translate(t) => {
                    t.apply(amps, scratch)?;
                    std::mem::swap(amps, scratch);
                }
            }
        }
        Ok(())
    }

    /// Like [`apply`](Self::apply), but touching only the sites in `support`,
    /// which is grown to cover every site that may carry amplitude afterwards.
    ///
    /// `amps` must vanish outside `support`, and `scratch` must be all zeros
    /// on entry; it is left all zeros. The arithmetic per site is the same as
    /// in `apply`, so both give bitwise-identical amplitudes.
    pub fn apply_within(
        &self,
        amps: &mut Vec<Complex64>,
        scratch: &mut Vec<Complex64>,
        support: &mut Support,
    ) -> Result<()> {
        let dim = self.lattice.hilbert_dim();
        if amps.len() != dim || support.sites != self.lattice.sites() {
            return Err(Error::ShapeMismatch {
                expected: dim,
                actual: amps.len(),
            });
        }
        scratch.resize(dim, Complex64::new(0.0, 0.0));
        for stage in &self.stages {
            match stage {
                Stage::Rotate(r) => support.iter().for_each(|s| r.apply_at(amps, s)),
                Stage::Translate(t) => {
                    let from = *support;
                    support.grow(t.shift);
                    let zero = Complex64::new(0.0, 0.0);
                    for s in support.iter() {
                        scratch[2 * s] = zero;
                        scratch[2 * s + 1] = zero;
                    }
                    t.move_sites(amps, scratch, from.iter())?;
                    std::mem::swap(amps, scratch);
                    for s in from.iter() {
                        scratch[2 * s] = zero;
                        scratch[2 * s + 1] = zero;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn step(&self, psi: &SpinorField) -> Result<SpinorField> {
        check_lattice(psi, &self.lattice)?;
        let mut amps = psi.amplitudes().to_vec();
        let mut scratch = vec![Complex64::new(0.0, 0.0); amps.len()];
        self.apply(&mut amps, &mut scratch)?;
        SpinorField::from_amplitudes(self.lattice, amps)
    }
}

/// Run of sites that may carry amplitude.
///
/// On a chain this is a circular interval `start, start + 1, ...` of `len`
/// sites (indices taken mod the chain length); on a square lattice it is
/// always the whole lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Support {
    start: usize,
    len: usize,
    sites: usize,
    chain: bool,
}

impl Support {
    pub fn full(lattice: &LatticeSpec) -> Self {
        Self {
            start: 0,
            len: lattice.sites(),
            sites: lattice.sites(),
            chain: lattice.dimension() == 1,
        }
    }

    /// Smallest support of `amps` on `lattice`.
    pub fn of(lattice: &LatticeSpec, amps: &[Complex64]) -> Self {
        let mut out = Self::full(lattice);
        if out.chain {
            out.shrink_to(amps);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.sites
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        let (start, sites) = (self.start, self.sites);
        (0..self.len).map(move |i| (start + i) % sites)
    }

    fn grow(&mut self, shift: Shift) {
        if !self.chain || self.is_full() {
            return;
        }
        let (left, right) = match shift {
            Shift::Both => (1, 1),
            Shift::UpOnly => (0, 1),
            Shift::DownOnly => (1, 0),
        };
        if self.len + left + right >= self.sites {
            self.start = 0;
            self.len = self.sites;
        } else {
            self.start = (self.start + self.sites - left) % self.sites;
            self.len += left + right;
        }
    }

    /// Drop empty sites from both ends. A no-op on square lattices.
    pub fn trim(&mut self, amps: &[Complex64]) {
        if !self.chain {
            return;
        }
        let empty = |s: usize| {
            amps[2 * s] == Complex64::new(0.0, 0.0) && amps[2 * s + 1] == Complex64::new(0.0, 0.0)
        };
        if self.is_full() {
            self.shrink_to(amps);
            return;
        }
        while self.len > 0 && empty(self.start) {
            self.start = (self.start + 1) % self.sites;
            self.len -= 1;
        }
        while self.len > 0 && empty((self.start + self.len - 1) % self.sites) {
            self.len -= 1;
        }
    }

    /// Complement of the longest circular run of empty sites.
    fn shrink_to(&mut self, amps: &[Complex64]) {
        let n = self.sites;
        let occupied: Vec<usize> = (0..n)
            .filter(|&s| {
                amps[2 * s] != Complex64::new(0.0, 0.0)
                    || amps[2 * s + 1] != Complex64::new(0.0, 0.0)
            })
            .collect();
        let (Some(&first), Some(&last)) = (occupied.first(), occupied.last()) else {
            self.start = 0;
            self.len = 0;
            return;
        };
        // gap after each occupied site, the last one wrapping around
        let mut best = (n - 1 - last + first, first);
        for w in occupied.windows(2) {
            let gap = w[1] - w[0] - 1;
            if gap > best.0 {
                best = (gap, w[1]);
            }
        }
        self.start = best.1;
        self.len = n - best.0;
    }
}

fn check_lattice(psi: &SpinorField, lattice: &LatticeSpec) -> Result<()> {
    if psi.lattice() != lattice {
        return Err(Error::ShapeMismatch {
            expected: lattice.hilbert_dim(),
            actual: psi.lattice().hilbert_dim(),
        });
    }
    Ok(())
}

/// Apply `R(theta(x))` to the coin at every site.
pub fn coin_rotate(psi: &SpinorField, theta: &[f64]) -> Result<SpinorField> {
    let sites = psi.lattice().sites();
    if theta.len() != sites {
        return Err(Error::ShapeMismatch {
            expected: sites,
            actual: theta.len(),
        });
    }
    let mut amps = psi.amplitudes().to_vec();
    Rotation::new(theta).apply(&mut amps);
    SpinorField::from_amplitudes(*psi.lattice(), amps)
}

/// Spin-dependent translation along `axis`: up moves forward, down moves back.
pub fn spin_translate(psi: &SpinorField, axis: Axis, shift: Shift) -> Result<SpinorField> {
    let lattice = *psi.lattice();
    if axis == Axis::Y && lattice.dimension() != 2 {
        return Err(Error::InvalidSpec("a chain has no y axis".into()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); lattice.hilbert_dim()];
    Translation::new(&lattice, axis, shift).apply(psi.amplitudes(), &mut out)?;
    SpinorField::from_amplitudes(lattice, out)
}

fn require(spec: &WalkSpec, protocol: Protocol) -> Result<()> {
    if spec.protocol != protocol {
        return Err(Error::InvalidSpec(format!(
            "expected a {protocol:?} spec, got {:?}",
            spec.protocol
        )));
    }
    Ok(())
}

/// `T R(theta1)`.
pub fn step_simple(psi: &SpinorField, spec: &WalkSpec) -> Result<SpinorField> {
    require(spec, Protocol::Simple)?;
    let rotated = coin_rotate(psi, spec.coins.theta1())?;
    spin_translate(&rotated, Axis::X, Shift::Both)
}

/// `T_down R(theta2) T_up R(theta1)`.
pub fn step_split(psi: &SpinorField, spec: &WalkSpec) -> Result<SpinorField> {
    require(spec, Protocol::SplitStep)?;
    let psi = coin_rotate(psi, spec.coins.theta1())?;
    let psi = spin_translate(&psi, Axis::X, Shift::UpOnly)?;
    let psi = coin_rotate(&psi, spec.theta2())?;
    spin_translate(&psi, Axis::X, Shift::DownOnly)
}

/// `T_y R(theta2) T_x R(theta1)` on a square lattice.
pub fn step_split_2d(psi: &SpinorField, spec: &WalkSpec) -> Result<SpinorField> {
    require(spec, Protocol::SplitStep2d)?;
    let psi = coin_rotate(psi, spec.coins.theta1())?;
    let psi = spin_translate(&psi, Axis::X, Shift::Both)?;
    let psi = coin_rotate(&psi, spec.theta2())?;
    spin_translate(&psi, Axis::Y, Shift::Both)
}

/// One step of whichever protocol `spec` names.
pub fn step(psi: &SpinorField, spec: &WalkSpec) -> Result<SpinorField> {
    match spec.protocol {
        Protocol::Simple => step_simple(psi, spec),
        Protocol::SplitStep => step_split(psi, spec),
        Protocol::SplitStep2d => step_split_2d(psi, spec),
    }
}

/// Apply `n` steps, handing every intermediate field (after steps 1..=n) to
/// `observer`. `n = 0` returns the input unchanged.
pub fn evolve<F>(
    psi: &SpinorField,
    spec: &WalkSpec,
    n: usize,
    mut observer: F,
) -> Result<SpinorField>
where
    F: FnMut(usize, &SpinorField),
{
    check_lattice(psi, &spec.lattice)?;
    let stepper = WalkStepper::new(spec);
    let mut amps = psi.amplitudes().to_vec();
    let mut scratch = vec![Complex64::new(0.0, 0.0); amps.len()];
    let mut field = psi.clone();
    for k in 1..=n {
        stepper.apply(&mut amps, &mut scratch)?;
        field = SpinorField::from_amplitudes(spec.lattice, amps.clone())?;
        observer(k, &field);
    }
    Ok(field)
}

/// Column-sparse complex matrix used to assemble dense unitaries from their
/// elementary factors.
struct SparseFactor {
    columns: Vec<Vec<(usize, Complex64)>>,
}

impl SparseFactor {
    fn rotation(lattice: &LatticeSpec, theta: &[f64]) -> Self {
        let mut columns = vec![Vec::new(); lattice.hilbert_dim()];
        for (x, t) in theta.iter().enumerate() {
            let (s, c) = (t / 2.0).sin_cos();
            let m = [[c, -s], [s, c]];
            for a in 0..2 {
                for (b, row) in m.iter().enumerate() {
                    columns[2 * x + a].push((2 * x + b, Complex64::new(row[a], 0.0)));
                }
            }
        }
        Self { columns }
    }

    fn translation(lattice: &LatticeSpec, axis: Axis, shift: Shift) -> Self {
        let (lx, ly) = (lattice.extent(Axis::X), lattice.extent(Axis::Y));
        let mut columns = vec![Vec::new(); lattice.hilbert_dim()];
        let one = Complex64::new(1.0, 0.0);
        for site in 0..lattice.sites() {
            let (x, y) = (site % lx, site / lx);
            for coin in 0..2 {
                let moves = match shift {
                    Shift::Both => true,
                    Shift::UpOnly => coin == 0,
                    Shift::DownOnly => coin == 1,
                };
                let delta: isize = if !moves {
                    0
                } else if coin == 0 {
                    1
                } else {
                    -1
                };
                let (nx, ny) = match axis {
                    Axis::X => ((x as isize + delta).rem_euclid(lx as isize) as usize, y),
                    Axis::Y => (x, (y as isize + delta).rem_euclid(ly as isize) as usize),
                };
                columns[2 * site + coin].push((2 * (ny * lx + nx) + coin, one));
            }
        }
        Self { columns }
    }

    fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for (col, &a) in v.iter().enumerate() {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &(row, m) in &self.columns[col] {
                out[row] += m * a;
            }
        }
    }
}

/// Dense one-step unitary of `spec`, assembled from its rotation and
/// translation factors. Only periodic lattices have a unitary step.
pub fn materialize_unitary(spec: &WalkSpec, cap: usize) -> Result<DMatrix<Complex64>> {
    let l = &spec.lattice;
    let dim = l.hilbert_dim();
    if dim > cap {
        return Err(Error::DimensionCap {
            dimension: dim,
            cap,
        });
    }
    if l.boundary() != Boundary::Periodic {
        return Err(Error::NotPeriodic);
    }
    let factors = match spec.protocol {
        Protocol::Simple => vec![
            SparseFactor::rotation(l, spec.coins.theta1()),
            SparseFactor::translation(l, Axis::X, Shift::Both),
        ],
        Protocol::SplitStep => vec![
            SparseFactor::rotation(l, spec.coins.theta1()),
            SparseFactor::translation(l, Axis::X, Shift::UpOnly),
            SparseFactor::rotation(l, spec.theta2()),
            SparseFactor::translation(l, Axis::X, Shift::DownOnly),
        ],
        Protocol::SplitStep2d => vec![
            SparseFactor::rotation(l, spec.coins.theta1()),
            SparseFactor::translation(l, Axis::X, Shift::Both),
            SparseFactor::rotation(l, spec.theta2()),
            SparseFactor::translation(l, Axis::Y, Shift::Both),
        ],
    };
    let mut u = DMatrix::<Complex64>::zeros(dim, dim);
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    for j in 0..dim {
        v.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        v[j] = Complex64::new(1.0, 0.0);
        for f in &factors {
            f.apply(&v, &mut w);
            std::mem::swap(&mut v, &mut w);
        }
        for (i, x) in v.iter().enumerate() {
            u[(i, j)] = *x;
        }
    }
    Ok(u)
}

/// Largest entry of `|U^dagger U - I|`.
pub fn unitarity_residual(u: &DMatrix<Complex64>) -> f64 {
    let p = u.adjoint() * u;
    let mut worst = 0.0f64;
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((p[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// A walk's one-step operator, optionally with its dense realization.
#[derive(Debug, Clone)]
pub struct StepOperator {
    spec: WalkSpec,
    stepper: WalkStepper,
    dense: Option<DMatrix<Complex64>>,
}

impl StepOperator {
    pub fn new(spec: WalkSpec) -> Self {
        let stepper = WalkStepper::new(&spec);
        Self {
            spec,
            stepper,
            dense: None,
        }
    }

    /// Build and keep the dense matrix (subject to `cap`).
    pub fn materialized(mut self, cap: usize) -> Result<Self> {
        self.dense = Some(materialize_unitary(&self.spec, cap)?);
        Ok(self)
    }

    pub fn spec(&self) -> &WalkSpec {
        &self.spec
    }

    pub fn dense(&self) -> Option<&DMatrix<Complex64>> {
        self.dense.as_ref()
    }

    pub fn apply(&self, psi: &SpinorField) -> Result<SpinorField> {
        self.stepper.step(psi)
    }
}
