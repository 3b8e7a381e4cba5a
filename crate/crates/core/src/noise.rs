//! Noisy walks by stochastic unraveling: every realization draws its own
//! input intensity, per-step site phases and coin projections, and ensemble
//! averages stand in for the trace over the environment.
//!
//! Realization `r` draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! stream `r`, so its draws depend only on `(seed, r)`. Within a
//! realization the draws happen in a fixed order: the input intensity scale
//! (when amplitude noise is on), then per step one phase per occupied site
//! in support order (when phase noise is on) followed by the dephasing coin
//! flip and, if it fires, the measurement outcome.
//!
//! Ensembles are reduced in realization order, so reports do not depend on
//! the number of worker threads.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Axis, Boundary, LatticeSpec, SpinorField};
use crate::topology::{domain_walls, topology_report, window_sites};
use crate::walk::{Support, WalkSpec, WalkStepper};

/// Ensembles smaller than this get histograms but no moment statistics.
pub const MIN_FIT_REALIZATIONS: usize = 100;

/// Standard deviations at or below this count as a single-site distribution.
pub const DEGENERATE_SIGMA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Relative standard deviation of the input intensity per realization.
    pub amplitude_noise: f64,
    /// Standard deviation (radians) of the random phase per site per step.
    pub phase_noise: f64,
    /// Probability per step of projecting the coin onto up/down.
    pub coin_dephasing: f64,
    pub seed: u64,
    pub realizations: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            amplitude_noise: 0.0,
            phase_noise: 0.0,
            coin_dephasing: 0.0,
            seed: 0,
            realizations: 1,
        }
    }
}

impl NoiseSpec {
    pub fn noiseless(realizations: usize) -> Self {
        Self {
            realizations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidNoise(msg));
        if !(self.amplitude_noise >= 0.0 && self.amplitude_noise.is_finite()) {
            return bad(format!(
                "amplitude_noise must be >= 0, got {}",
                self.amplitude_noise
            ));
        }
        if !(self.phase_noise >= 0.0 && self.phase_noise.is_finite()) {
            return bad(format!(
                "phase_noise must be >= 0, got {}",
                self.phase_noise
            ));
        }
        if !(0.0..=1.0).contains(&self.coin_dephasing) {
            return bad(format!(
                "coin_dephasing must lie in [0, 1], got {}",
                self.coin_dephasing
            ));
        }
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.amplitude_noise == 0.0 && self.phase_noise == 0.0 && self.coin_dephasing == 0.0
    }

    fn rng(&self, realization: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(realization as u64);
        rng
    }
}

/// One realization in flight.
struct Trajectory<'a> {
    stepper: &'a WalkStepper,
    noise: &'a NoiseSpec,
    phase: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    amps: Vec<Complex64>,
    scratch: Vec<Complex64>,
    support: Support,
    scale: f64,
}

impl<'a> Trajectory<'a> {
    fn new(stepper: &'a WalkStepper, noise: &'a NoiseSpec, psi0: &SpinorField, r: usize) -> Self {
        let mut rng = noise.rng(r);
        let scale = if noise.amplitude_noise > 0.0 {
            let xi: f64 = StandardNormal.sample(&mut rng);
            (1.0 + noise.amplitude_noise * xi).max(0.0)
        } else {
            1.0
        };
        let amps = psi0.amplitudes().to_vec();
        Self {
            stepper,
            noise,
            phase: (noise.phase_noise > 0.0)
                .then(|| Normal::new(0.0, noise.phase_noise).expect("validated std")),
            rng,
            support: Support::of(psi0.lattice(), &amps),
            scratch: vec![Complex64::new(0.0, 0.0); amps.len()],
            amps,
            scale,
        }
    }

    fn advance(&mut self) -> Result<()> {
        self.stepper
            .apply_within(&mut self.amps, &mut self.scratch, &mut self.support)?;
        let support = self.support;
        if let Some(normal) = &self.phase {
            for s in support.iter() {
                let z = Complex64::from_polar(1.0, normal.sample(&mut self.rng));
                self.amps[2 * s] *= z;
                self.amps[2 * s + 1] *= z;
            }
        }
        let p = self.noise.coin_dephasing;
        if p > 0.0 && self.rng.random::<f64>() < p {
            self.measure_coin();
        }
        self.support.trim(&self.amps);
        Ok(())
    }

    fn measure_coin(&mut self) {
        let (mut up, mut down) = (0.0, 0.0);
        for s in self.support.iter() {
            up += self.amps[2 * s].norm_sqr();
            down += self.amps[2 * s + 1].norm_sqr();
        }
        let total = up + down;
        let keep_up = self.rng.random::<f64>() * total < up;
        let (kept, drop) = if keep_up { (up, 1) } else { (down, 0) };
        let rescale = (total / kept).sqrt();
        for s in self.support.iter() {
            self.amps[2 * s + drop] = Complex64::new(0.0, 0.0);
            self.amps[2 * s + 1 - drop] *= rescale;
        }
    }

    fn run(&mut self, steps: usize) -> Result<()> {
        (0..steps).try_for_each(|_| self.advance())
    }

    /// Adds `factor * |psi(x)|^2` to `acc`.
    fn accumulate(&self, acc: &mut [f64], factor: f64) {
        for s in self.support.iter() {
            acc[s] += factor * (self.amps[2 * s].norm_sqr() + self.amps[2 * s + 1].norm_sqr());
        }
    }

    fn distribution(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.stepper.lattice().sites()];
        self.accumulate(&mut out, 1.0);
        out
    }
}

fn prepare(spec: &WalkSpec, noise: &NoiseSpec, psi0: &SpinorField) -> Result<WalkStepper> {
    noise.validate()?;
    if psi0.lattice() != spec.lattice() {
        return Err(Error::ShapeMismatch {
            expected: spec.lattice().hilbert_dim(),
            actual: psi0.lattice().hilbert_dim(),
        });
    }
    if !psi0.is_unit() {
        return Err(Error::NotNormalized(psi0.norm_sqr()));
    }
    Ok(WalkStepper::new(spec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    /// Input intensity relative to the nominal input.
    pub scale: f64,
    /// Normalized position distribution after the last step.
    pub distribution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub steps: usize,
    pub noise: NoiseSpec,
    pub realizations: Vec<Realization>,
    /// Realization mean of the normalized distributions.
    pub mean: Vec<f64>,
}

/// Evolve `noise.realizations` independent noisy copies of `psi0` for
/// `steps` steps.
pub fn noisy_evolve(
    spec: &WalkSpec,
    noise: &NoiseSpec,
    psi0: &SpinorField,
    steps: usize,
) -> Result<Ensemble> {
    let stepper = prepare(spec, noise, psi0)?;
    let realizations = (0..noise.realizations)
        .into_par_iter()
        .map(|r| {
            let mut t = Trajectory::new(&stepper, noise, psi0, r);
            t.run(steps)?;
            Ok(Realization {
                scale: t.scale,
                distribution: t.distribution(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mean = vec![0.0; spec.lattice().sites()];
    for r in &realizations {
        for (m, p) in mean.iter_mut().zip(&r.distribution) {
            *m += p;
        }
    }
    let inv = 1.0 / realizations.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    Ok(Ensemble {
        steps,
        noise: *noise,
        realizations,
        mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    /// Number of realization batches used for the error bars.
    pub batches: usize,
    /// Fraction of the smallest step counts left out of the fit.
    pub exclude_fraction: f64,
    /// Inclusive step-count window of the fit; `None` keeps every step count
    /// after the excluded transient.
    pub window: Option<(usize, usize)>,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            batches: 20,
            exclude_fraction: 0.1,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub n: Vec<usize>,
    /// Position standard deviation (sites) of the averaged distribution.
    pub sigma: Vec<f64>,
    /// Standard error of `sigma` from the spread between batches.
    pub sigma_err: Vec<f64>,
    /// Fitted exponent of `sigma ~ N^beta`.
    pub beta: f64,
    pub beta_stderr: Option<f64>,
    pub r_squared: f64,
    /// Smallest and largest step count used by the fit.
    pub fit_window: (usize, usize),
    pub fit_points: usize,
    pub warnings: Vec<String>,
}

pub const SCALING_COLUMNS: [&str; 3] = ["N", "sigma", "sigma_err"];

impl ScalingReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", SCALING_COLUMNS.join(","))?;
        for ((n, s), e) in self.n.iter().zip(&self.sigma).zip(&self.sigma_err) {
            writeln!(w, "{n},{s},{e}")?;
        }
        Ok(())
    }
}

/// Signed offset of `site` from `origin` along one axis, wrapped to the
/// shorter way round on periodic lattices.
fn offset(from: usize, to: usize, extent: usize, periodic: bool) -> f64 {
    if periodic {
        let d = (to + extent - from) % extent;
        if 2 * d > extent {
            d as f64 - extent as f64
        } else {
            d as f64
        }
    } else {
        to as f64 - from as f64
    }
}

/// Position standard deviation of `dist` about the site holding the most
/// weight in `reference`. On a square lattice the two axis variances add.
pub fn position_sigma(lattice: &LatticeSpec, dist: &[f64], origin: usize) -> f64 {
    let periodic = lattice.boundary() == Boundary::Periodic;
    let (ox, oy) = lattice.coords(origin);
    let axes: &[Axis] = if lattice.dimension() == 1 {
        &[Axis::X]
    } else {
        &[Axis::X, Axis::Y]
    };
    let mut var = 0.0;
    for &axis in axes {
        let extent = lattice.extent(axis);
        let (mut m1, mut m2) = (0.0, 0.0);
        for (s, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (x, y) = lattice.coords(s);
            let d = match axis {
                Axis::X => offset(ox, x, extent, periodic),
                Axis::Y => offset(oy, y, extent, periodic),
            };
            m1 += p * d;
            m2 += p * d * d;
        }
        let total: f64 = dist.iter().sum();
        var += m2 / total - sq(m1 / total);
    }
    var.max(0.0).sqrt()
}

fn heaviest_site(psi: &SpinorField) -> usize {
    psi.site_weights()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (s, &w)| {
            if w > best.1 {
                (s, w)
            } else {
                best
            }
        })
        .0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: Option<f64>,
    pub r_squared: f64,
}

/// Unweighted least squares `y = slope x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| sq(v - mx)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| sq(v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| sq(b - intercept - slope * a))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_stderr = (n > 2).then(|| (sse / (nf - 2.0) / sxx).sqrt());
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
    })
}

/// Position spread of the realization-averaged distribution after each step
/// count in `n_list`, and the exponent `beta` of `sigma ~ N^beta` from a
/// log-log fit.
pub fn sigma_scaling(
    spec: &WalkSpec,
    noise: &NoiseSpec,
    psi0: &SpinorField,
    n_list: &[usize],
    opts: &ScalingOptions,
) -> Result<ScalingReport> {
    let stepper = prepare(spec, noise, psi0)?;
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 5 || ns[0] == 0 || ns[ns.len() - 1] < 4 * ns[0] {
        return Err(Error::InvalidNoise(format!(
            "scaling needs at least 5 distinct positive step counts spanning a factor 4, got {n_list:?}"
        )));
    }
    if opts.batches == 0 || !(0.0..1.0).contains(&opts.exclude_fraction) {
        return Err(Error::InvalidNoise(
            "scaling needs at least one batch and an excluded fraction in [0, 1)".into(),
        ));
    }
    let lattice = *spec.lattice();
    let sites = lattice.sites();
    let mut warnings = Vec::new();
    if lattice.dimension() == 1 && lattice.boundary() == Boundary::Periodic {
        let reach = ns[ns.len() - 1];
        if 2 * reach + 1 > sites {
            warnings.push(format!(
                "walker can reach {reach} sites from its start on a ring of {sites}; wrapped spread underestimates sigma"
            ));
        }
    }

    let r_total = noise.realizations;
    let batches = opts.batches.min(r_total);
    // contiguous batches, sizes differing by at most one
    let bounds: Vec<(usize, usize)> = (0..batches)
        .map(|b| (b * r_total / batches, (b + 1) * r_total / batches))
        .collect();
    let sums = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc = vec![vec![0.0; sites]; ns.len()];
            for r in lo..hi {
                let mut t = Trajectory::new(&stepper, noise, psi0, r);
                let mut done = 0;
                for (i, &n) in ns.iter().enumerate() {
                    t.run(n - done)?;
                    done = n;
                    t.accumulate(&mut acc[i], 1.0);
                }
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;

    let origin = heaviest_site(psi0);
    let mut sigma = Vec::with_capacity(ns.len());
    let mut sigma_err = Vec::with_capacity(ns.len());
    for i in 0..ns.len() {
        let mut total = vec![0.0; sites];
        for batch in &sums {
            for (t, v) in total.iter_mut().zip(&batch[i]) {
                *t += v;
            }
        }
        sigma.push(position_sigma(&lattice, &total, origin));
        let per_batch: Vec<f64> = sums
            .iter()
            .map(|b| position_sigma(&lattice, &b[i], origin))
            .collect();
        sigma_err.push(if batches > 1 {
            let m = per_batch.iter().sum::<f64>() / batches as f64;
            let var = per_batch.iter().map(|s| sq(s - m)).sum::<f64>() / (batches - 1) as f64;
            (var / batches as f64).sqrt()
        } else {
            0.0
        });
    }

    let skip = (opts.exclude_fraction * ns.len() as f64).floor() as usize;
    let (lo, hi) = opts
        .window
        .unwrap_or((ns[skip.min(ns.len() - 1)], ns[ns.len() - 1]));
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut used = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        if i < skip || n < lo || n > hi {
            continue;
        }
        if sigma[i] <= DEGENERATE_SIGMA {
            warnings.push(format!(
                "N = {n}: distribution sits on a single site, left out of the fit"
            ));
            continue;
        }
        x.push((n as f64).ln());
        y.push(sigma[i].ln());
        used.push(n);
    }
    let fit = fit_line(&x, &y).ok_or_else(|| {
        Error::InvalidNoise(format!(
            "fewer than two usable step counts in the fit window [{lo}, {hi}]"
        ))
    })?;
    Ok(ScalingReport {
        n: ns,
        sigma,
        sigma_err,
        beta: fit.slope,
        beta_stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        fit_window: (used[0], used[used.len() - 1]),
        fit_points: used.len(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Amplitude,
    Phase,
    Dephasing,
}

impl NoiseKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Amplitude => "amplitude",
            Self::Phase => "phase",
            Self::Dephasing => "dephasing",
        }
    }

    /// `base` with this channel set to `level`.
    pub fn with_level(self, base: &NoiseSpec, level: f64) -> NoiseSpec {
        let mut out = *base;
        match self {
            Self::Amplitude => out.amplitude_noise = level,
            Self::Phase => out.phase_noise = level,
            Self::Dephasing => out.coin_dephasing = level,
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub noise_kind: NoiseKind,
    pub level: f64,
    /// Window intensity relative to the nominal input, realization mean.
    pub retained_mean: f64,
    /// Sample standard deviation over realizations.
    pub retained_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSummary {
    pub noise_kind: NoiseKind,
    /// Retained intensity never rises with the level by more than the
    /// combined standard errors of neighbouring levels.
    pub non_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub wall: usize,
    pub half_width: usize,
    pub steps: usize,
    pub realizations: usize,
    /// Winding numbers of the domains left and right of the wall.
    pub windings: (i64, i64),
    pub rows: Vec<RobustnessRow>,
    pub monotone: Vec<MonotoneSummary>,
}

pub const ROBUSTNESS_COLUMNS: [&str; 4] = ["noise_kind", "level", "retained_mean", "retained_std"];

impl RobustnessReport {
    pub fn delta_winding(&self) -> i64 {
        self.windings.1 - self.windings.0
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", ROBUSTNESS_COLUMNS.join(","))?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                r.noise_kind.label(),
                r.level,
                r.retained_mean,
                r.retained_std
            )?;
        }
        Ok(())
    }
}

/// Winding numbers of the homogeneous walks on either side of `wall`.
fn wall_windings(spec: &WalkSpec, wall: usize) -> Result<(i64, i64)> {
    let sites = spec.lattice().sites();
    let t1 = spec.coins().theta1();
    let t2 = spec.coins().theta2().expect("domain walls imply theta2");
    let winding = |s: usize| -> Result<i64> {
        let bulk = WalkSpec::split_step(sites, t1[s], t2[s], 1)?;
        Ok(topology_report(&bulk)?.winding)
    };
    Ok((winding((wall + sites - 1) % sites)?, winding(wall)?))
}

/// Window intensity retained at `wall` after `steps` noisy steps, for each
/// `(kind, level)` in `grid`. The channel named in each grid entry is set on
/// top of `base`, which also supplies the seed and ensemble size.
pub fn edge_robustness(
    spec: &WalkSpec,
    psi0: &SpinorField,
    wall: usize,
    half_width: usize,
    steps: usize,
    grid: &[(NoiseKind, f64)],
    base: &NoiseSpec,
) -> Result<RobustnessReport> {
    let walls = domain_walls(spec)?;
    if !walls.contains(&wall) {
        return Err(Error::InvalidSpec(format!(
            "site {wall} is not a domain wall (walls at {walls:?})"
        )));
    }
    let windings = wall_windings(spec, wall)?;
    let sites = spec.lattice().sites();
    let window = window_sites(wall, half_width, sites);
    let mut rows = Vec::with_capacity(grid.len());
    for &(kind, level) in grid {
        let noise = kind.with_level(base, level);
        let stepper = prepare(spec, &noise, psi0)?;
        let retained = (0..noise.realizations)
            .into_par_iter()
            .map(|r| {
                let mut t = Trajectory::new(&stepper, &noise, psi0, r);
                t.run(steps)?;
                let w: f64 = window
                    .iter()
                    .map(|&s| t.amps[2 * s].norm_sqr() + t.amps[2 * s + 1].norm_sqr())
                    .sum();
                Ok(t.scale * w)
            })
            .collect::<Result<Vec<f64>>>()?;
        let (mean, std) = mean_std(&retained);
        rows.push(RobustnessRow {
            noise_kind: kind,
            level,
            retained_mean: mean,
            retained_std: std,
        });
    }
    let mut kinds: Vec<NoiseKind> = Vec::new();
    for r in &rows {
        if !kinds.contains(&r.noise_kind) {
            kinds.push(r.noise_kind);
        }
    }
    let root_r = (base.realizations as f64).sqrt();
    let monotone = kinds
        .into_iter()
        .map(|kind| {
            let mut pts: Vec<&RobustnessRow> =
                rows.iter().filter(|r| r.noise_kind == kind).collect();
            pts.sort_by(|a, b| a.level.total_cmp(&b.level));
            let non_increasing = pts.windows(2).all(|w| {
                let slack = (w[0].retained_std + w[1].retained_std) / root_r;
                w[1].retained_mean <= w[0].retained_mean + slack
            });
            MonotoneSummary {
                noise_kind: kind,
                non_increasing,
            }
        })
        .collect();
    Ok(RobustnessReport {
        wall,
        half_width,
        steps,
        realizations: base.realizations,
        windings,
        rows,
        monotone,
    })
}

/// Mean and sample standard deviation (zero for a single value). Sums run
/// over offsets from the first value, so identical values give exactly zero.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let v0 = v[0];
    let shift = v.iter().map(|x| x - v0).sum::<f64>() / n;
    let std = if v.len() > 1 {
        (v.iter().map(|x| sq(x - v0 - shift)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (v0 + shift, std)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramOptions {
    pub bins: usize,
    /// Mean photon number of the nominal input; intensities are in photons.
    pub photons: f64,
    /// Sites to histogram; `None` takes every site reached by any realization.
    pub sites: Option<Vec<usize>>,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        Self {
            bins: 20,
            photons: 1.0,
            sites: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteHistogram {
    pub site: usize,
    /// `bins + 1` edges, or two equal edges when every realization agrees.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub fano: Option<f64>,
    /// Standard deviation over mean.
    pub relative_std: Option<f64>,
}

impl SiteHistogram {
    pub fn is_degenerate(&self) -> bool {
        self.counts.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityHistogram {
    pub realizations: usize,
    pub photons: f64,
    /// Whether the ensemble was large enough for moment statistics.
    pub fitted: bool,
    pub sites: Vec<SiteHistogram>,
}

/// Per-site histograms of the realization intensities
/// `photons * scale * p(x)` of an ensemble.
pub fn intensity_histogram(
    ensemble: &Ensemble,
    opts: &HistogramOptions,
) -> Result<IntensityHistogram> {
    if opts.bins == 0 || !(opts.photons > 0.0 && opts.photons.is_finite()) {
        return Err(Error::InvalidNoise(
            "histograms need at least one bin and a positive photon number".into(),
        ));
    }
    let n_sites = ensemble.mean.len();
    let sites = match &opts.sites {
        Some(s) => {
            if let Some(&bad) = s.iter().find(|&&x| x >= n_sites) {
                return Err(Error::SiteOutOfRange {
                    site: bad,
                    sites: n_sites,
                });
            }
            s.clone()
        }
        None => (0..n_sites)
            .filter(|&x| {
                ensemble
                    .realizations
                    .iter()
                    .any(|r| r.distribution[x] > 0.0)
            })
            .collect(),
    };
    let fitted = ensemble.realizations.len() >= MIN_FIT_REALIZATIONS;
    let out = sites
        .into_iter()
        .map(|site| {
            let values: Vec<f64> = ensemble
                .realizations
                .iter()
                .map(|r| opts.photons * r.scale * r.distribution[site])
                .collect();
            site_histogram(site, &values, opts.bins, fitted)
        })
        .collect();
    Ok(IntensityHistogram {
        realizations: ensemble.realizations.len(),
        photons: opts.photons,
        fitted,
        sites: out,
    })
}

fn site_histogram(site: usize, values: &[f64], bins: usize, fitted: bool) -> SiteHistogram {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (bin_edges, counts) = if hi > lo {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0; bins];
        for v in values {
            let b = (((v - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        (edges, counts)
    } else {
        (vec![lo, hi], vec![values.len()])
    };
    let (mean, variance, fano, relative_std) = if fitted {
        let (m, s) = mean_std(values);
        let v = s * s;
        (
            Some(m),
            Some(v),
            (m > 0.0).then(|| v / m),
            (m > 0.0).then(|| s / m),
        )
    } else {
        (None, None, None, None)
    };
    SiteHistogram {
        site,
        bin_edges,
        counts,
        mean,
        variance,
        fano,
        relative_std,
    }
}

/// `x * x`; `powi` does not promise identical rounding across builds.
fn sq(x: f64) -> f64 {
    x * x
}
