use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use qwalk_core::gaussian::{
    all_pairs, correlations, gain_scan, network_evolve, Crossing, Decoherence, MatrixJson,
};
use qwalk_core::noise::{
    edge_robustness, intensity_histogram, noisy_evolve, position_sigma, sigma_scaling,
    HistogramOptions, ScalingOptions,
};
use qwalk_core::topology::{
    boundary_walk_experiment, edge_overlap, find_edge_states, phase_diagram, topology_report,
    EdgeState,
};
use qwalk_core::{evolve, position_distribution, Axis, WalkSpec};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentKind, Format, RunConfig};
use crate::manifest::{
    write_output, Manifest, OutputFile, StageTiming, Status, CONFIG_FILE, MANIFEST_FILE,
};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_DIMENSION_CAP: i32 = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error [{category}]: {source}", category = .0.category(), source = .0)]
    Config(#[from] ConfigError),
    #[error("{experiment} experiment failed during {stage}: {source}")]
    Core {
        experiment: ExperimentKind,
        stage: &'static str,
        source: qwalk_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(ConfigError::DimensionCap(_)) => EXIT_DIMENSION_CAP,
            Self::Config(_) => EXIT_CONFIG,
            Self::Core {
                source: qwalk_core::Error::DimensionCap { .. },
                ..
            } => EXIT_DIMENSION_CAP,
            _ => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Human-readable digest of the results.
    pub summary: String,
}

/// Everything an experiment produced, held in memory until written.
struct Outputs {
    kind: ExperimentKind,
    format: Format,
    files: Vec<(String, Vec<u8>)>,
    units: BTreeMap<String, String>,
    timing: Vec<StageTiming>,
    summary: String,
}

impl Outputs {
    fn new(config: &RunConfig) -> Self {
        Self {
            kind: config.experiment,
            format: config.format,
            files: Vec::new(),
            units: BTreeMap::new(),
            timing: Vec::new(),
            summary: String::new(),
        }
    }

    /// Run one stage, timing it and attaching context to its errors.
    fn stage<T>(
        &mut self,
        stage: &'static str,
        f: impl FnOnce() -> qwalk_core::Result<T>,
    ) -> Result<T, RunError> {
        let t0 = Instant::now();
        let out = f().map_err(|source| RunError::Core {
            experiment: self.kind,
            stage,
            source,
        });
        self.timing.push(StageTiming {
            stage: stage.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    fn units(&mut self, file: &str, units: &[(&str, &str)]) {
        for (col, unit) in units {
            self.units.insert(format!("{file}:{col}"), unit.to_string());
        }
    }

    fn csv(
        &mut self,
        name: &str,
        units: &[(&str, &str)],
        write: impl FnOnce(&mut Vec<u8>) -> io::Result<()>,
    ) -> Result<(), RunError> {
        if !self.format.csv() {
            return Ok(());
        }
        let mut buf = Vec::new();
        write(&mut buf).map_err(|e| RunError::Runtime(format!("formatting {name}: {e}")))?;
        self.units(name, units);
        self.files.push((name.into(), buf));
        Ok(())
    }

    fn json(
        &mut self,
        name: &str,
        units: &[(&str, &str)],
        value: &impl Serialize,
    ) -> Result<(), RunError> {
        if !self.format.json() {
            return Ok(());
        }
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| RunError::Runtime(format!("serializing {name}: {e}")))?;
        text.push('\n');
        self.units(name, units);
        self.files.push((name.into(), text.into_bytes()));
        Ok(())
    }

    fn say(&mut self, line: impl AsRef<str>) {
        self.summary.push_str(line.as_ref());
        self.summary.push('\n');
    }
}

/// Run the experiment of a resolved config and write its outputs to `dir`.
pub fn run(config: &RunConfig, dir: &Path) -> Result<RunResult, RunError> {
    let started = Instant::now();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = Manifest::new(config);
    manifest
        .write(dir)
        .map_err(io_err(&dir.join(MANIFEST_FILE)))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| RunError::Runtime(e.to_string()))?;
    let outcome = pool.install(|| execute(config));
    let finish = |manifest: &mut Manifest, status: Status| {
        manifest.status = status;
        manifest.wall_seconds = started.elapsed().as_secs_f64();
        manifest
            .write(dir)
            .map_err(io_err(&dir.join(MANIFEST_FILE)))
    };
    let out = match outcome {
        Ok(out) => out,
        Err(e) => {
            manifest.error = Some(e.to_string());
            finish(&mut manifest, Status::Failed)?;
            return Err(e);
        }
    };

    let written = (|| -> Result<Vec<OutputFile>, RunError> {
        let mut files = vec![write_output(dir, CONFIG_FILE, config.to_toml().as_bytes())
            .map_err(io_err(&dir.join(CONFIG_FILE)))?];
        for (name, bytes) in &out.files {
            files.push(write_output(dir, name, bytes).map_err(io_err(&dir.join(name)))?);
        }
        Ok(files)
    })();
    match written {
        Ok(files) => manifest.outputs = files,
        Err(e) => {
            manifest.error = Some(e.to_string());
            // best effort: the manifest still says incomplete if this fails
            let _ = finish(&mut manifest, Status::Failed);
            return Err(e);
        }
    }
    manifest.units = out.units;
    manifest.timing = out.timing;
    finish(&mut manifest, Status::Complete)?;
    Ok(RunResult {
        dir: dir.to_path_buf(),
        manifest,
        summary: out.summary,
    })
}

fn execute(config: &RunConfig) -> Result<Outputs, RunError> {
    let mut out = Outputs::new(config);
    match config.experiment {
        ExperimentKind::Walk => walk(config, &mut out)?,
        ExperimentKind::PhaseDiagram => phase(config, &mut out)?,
        ExperimentKind::Edge => edge(config, &mut out)?,
        ExperimentKind::Gaussian => gaussian(config, &mut out)?,
        ExperimentKind::NoiseSweep => noise_sweep(config, &mut out)?,
        ExperimentKind::GainScan => scan(config, &mut out)?,
    }
    Ok(out)
}

fn heaviest(psi: &qwalk_core::SpinorField) -> usize {
    let w = psi.site_weights();
    (0..w.len())
        .reduce(|a, b| if w[b] > w[a] { b } else { a })
        .unwrap_or(0)
}

fn walk(config: &RunConfig, out: &mut Outputs) -> Result<(), RunError> {
    let spec = config.walk_spec()?;
    let psi0 = config.initial_state()?;
    let lattice = *spec.lattice();
    let steps = spec.steps();
    let mut drift = 0.0f64;
    let last = out.stage("evolve", || {
        evolve(&psi0, &spec, steps, |_, f| {
            drift = drift.max((f.norm_sqr() - 1.0).abs());
        })
    })?;
    let dist = out.stage("distribution", || position_distribution(&last))?;
    let origin = heaviest(&psi0);
    let sigma = position_sigma(&lattice, &dist, origin);

    let two_d = lattice.dimension() == 2;
    out.csv(
        "distribution.csv",
        &[
            ("site", "sites"),
            ("x", "sites"),
            ("y", "sites"),
            ("probability", "dimensionless"),
        ],
        |w| {
            if two_d {
                writeln!(w, "site,x,y,probability")?;
                for (s, p) in dist.iter().enumerate() {
                    let (x, y) = lattice.coords(s);
                    writeln!(w, "{s},{x},{y},{p}")?;
                }
            } else {
                writeln!(w, "site,probability")?;
                for (s, p) in dist.iter().enumerate() {
                    writeln!(w, "{s},{p}")?;
                }
            }
            Ok(())
        },
    )?;
    if !two_d {
        out.units.remove("distribution.csv:x");
        out.units.remove("distribution.csv:y");
    }
    out.json(
        "walk.json",
        &[
            ("sigma", "sites"),
            ("max_norm_deviation", "dimensionless"),
            ("distribution", "probability per site"),
        ],
        &json!({
            "protocol": spec.protocol(),
            "dimension": lattice.dimension(),
            "extent": [lattice.extent(Axis::X), lattice.extent(Axis::Y)],
            "steps": steps,
            "origin": origin,
            "sigma": sigma,
            "max_norm_deviation": drift,
            "distribution": dist,
        }),
    )?;
    out.say(format!(
        "walk: {steps} steps on {} sites, sigma = {sigma:.6} sites, max |norm - 1| = {drift:.3e}",
        lattice.sites()
    ));
    Ok(())
}

fn phase(config: &RunConfig, out: &mut Outputs) -> Result<(), RunError> {
    let pd = config.phase_diagram.clone().unwrap_or_default();
    let diagram = out.stage("phase diagram", || phase_diagram(pd.resolution, pd.sites))?;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for c in &diagram.cells {
        if let Some(w) = c.winding {
            *counts.entry(w).or_default() += 1;
        }
    }
    let gapless = diagram.cells.iter().filter(|c| c.gapless()).count();
    out.csv(
        "phase_diagram.csv",
        &[
            ("theta1", "radians"),
            ("theta2", "radians"),
            ("winding", "integer"),
            ("gap0", "radians"),
            ("gapPi", "radians"),
            ("gapless_flag", "0/1"),
        ],
        |w| diagram.write_csv(w),
    )?;
    out.json(
        "phase_diagram.json",
        &[
            ("cells.theta1", "radians"),
            ("cells.theta2", "radians"),
            ("cells.gap0", "radians"),
            ("cells.gap_pi", "radians"),
        ],
        &json!({
            "resolution": pd.resolution,
            "sites": pd.sites,
            "winding_counts": counts,
            "gapless_cells": gapless,
            "cells": diagram.cells,
        }),
    )?;
    out.say(format!(
        "phase-diagram: {} cells, {gapless} gapless, windings {counts:?}",
        diagram.cells.len()
    ));
    Ok(())
}

fn bulk_winding(spec: &WalkSpec, site: usize) -> Option<i64> {
    let t1 = spec.coins().theta1()[site];
    let t2 = spec.coins().theta2()?[site];
    let bulk = WalkSpec::split_step(spec.lattice().sites(), t1, t2, 1).ok()?;
    topology_report(&bulk).ok().map(|r| r.winding)
}

fn edge(config: &RunConfig, out: &mut Outputs) -> Result<(), RunError> {
    let spec = config.walk_spec()?;
    let psi0 = config.initial_state()?;
    let e = config.edge.clone().unwrap_or_default();
    let wall = e.wall.expect("resolved config names the wall");
    let sites = spec.lattice().sites();
    let cert = out.stage("diagonalization", || find_edge_states(&spec, &e.options()))?;
    let wall_index = cert.walls.iter().position(|&w| w == wall);
    let left = bulk_winding(&spec, (wall + sites - 1) % sites);
    let right = bulk_winding(&spec, wall);
    let delta = left.zip(right).map(|(l, r)| r - l);
    let overlap = wall_index.map_or(0.0, |i| edge_overlap(&cert, i, &psi0));
    let mut walks = Vec::new();
    for &n in &e.walk_steps {
        walks.push(out.stage("boundary walk", || {
            boundary_walk_experiment(&spec, &psi0, n, wall, e.half_width)
        })?);
    }

    let row = |w: &mut Vec<u8>, s: &EdgeState| -> io::Result<()> {
        let own = s.wall.map(|i| s.window_mass[i]);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.wall
                .map(|i| cert.walls[i].to_string())
                .unwrap_or_default(),
            s.quasienergy,
            u8::from(s.pinned),
            s.participation_ratio,
            opt(s.decay_length),
            opt(own)
        )
    };
    out.csv(
        "edge_states.csv",
        &[
            ("wall_site", "sites"),
            ("quasienergy_rad", "radians"),
            ("pinned", "0/1"),
            ("participation_ratio_sites", "sites"),
            ("decay_length_sites", "sites"),
            ("window_mass", "probability"),
        ],
        |w| {
            writeln!(
                w,
                "wall_site,quasienergy_rad,pinned,participation_ratio_sites,decay_length_sites,window_mass"
            )?;
            for s in cert.states.iter().chain(&cert.ambiguous) {
                row(w, s)?;
            }
            Ok(())
        },
    )?;
    out.csv(
        "boundary_walk.csv",
        &[
            ("steps", "steps"),
            ("step", "steps"),
            ("retained", "probability"),
        ],
        |w| {
            writeln!(w, "steps,step,retained")?;
            for bw in &walks {
                for (i, r) in bw.retained_series.iter().enumerate() {
                    writeln!(w, "{},{},{r}", bw.steps, i + 1)?;
                }
            }
            Ok(())
        },
    )?;
    let runs: Vec<_> = walks
        .iter()
        .map(|bw| json!({"steps": bw.steps, "retained": bw.retained}))
        .collect();
    out.json(
        "edge.json",
        &[
            ("certificate.states.quasienergy", "radians"),
            ("certificate.states.participation_ratio", "sites"),
            ("certificate.states.decay_length", "sites"),
            ("overlap", "probability"),
            ("walks.retained", "probability"),
        ],
        &json!({
            "wall": wall,
            "launch_site": heaviest(&psi0),
            "windings": {"left": left, "right": right, "delta": delta},
            "overlap": overlap,
            "walks": runs,
            "certificate": cert,
        }),
    )?;
    let count = wall_index.map_or(0, |i| cert.count_per_wall[i]);
    let mut line = format!(
        "edge: wall {wall}, delta W = {}, certified states at wall = {count}, overlap = {overlap:.4}",
        delta.map_or("undefined".into(), |d| d.to_string())
    );
    for bw in &walks {
        let _ = write!(line, ", retained(N={}) = {:.4}", bw.steps, bw.retained);
    }
    out.say(line);
    Ok(())
}

fn gaussian(config: &RunConfig, out: &mut Outputs) -> Result<(), RunError> {
    let g = config.gaussian.clone().unwrap_or_default();
    let net = config.mode_network()?;
    let input = config.gaussian_input(&net)?;
    let decoherence = Decoherence::from(g.decoherence);
    let result = out.stage("network evolution", || {
        network_evolve(&net, &input, &decoherence)
    })?;
    let state = &result.state;
    let pairs = all_pairs(state.modes());
    let report = out.stage("correlations", || correlations(state, &pairs))?;
    let stats = &report.statistics;

    out.csv(
        "photons.csv",
        &[
            ("mode", "index"),
            ("mean_photons", "photons"),
            ("variance_photons2", "photons^2"),
            ("mandel_q", "dimensionless"),
        ],
        |w| {
            writeln!(w, "mode,mean_photons,variance_photons2,mandel_q")?;
            for i in 0..stats.mean.len() {
                let q = stats.mandel_q[i].map(|q| q.to_string()).unwrap_or_default();
                writeln!(w, "{i},{},{},{q}", stats.mean[i], stats.variance[i])?;
            }
            Ok(())
        },
    )?;
    out.csv(
        "correlations.csv",
        &[
            ("i", "index"),
            ("j", "index"),
            ("g1_re", "dimensionless"),
            ("g1_im", "dimensionless"),
            ("g2", "dimensionless"),
            ("n_i", "photons"),
            ("n_j", "photons"),
        ],
        |w| report.write_csv(w),
    )?;
    out.csv(
        "photon_trace.csv",
        &[("step", "steps"), ("total_photons", "photons")],
        |w| {
            writeln!(w, "step,total_photons")?;
            for (k, n) in result.photon_trace.iter().enumerate() {
                writeln!(w, "{k},{n}")?;
            }
            Ok(())
        },
    )?;
    let total = result.photon_trace.last().copied().unwrap_or(0.0);
    out.json(
        "gaussian.json",
        &[
            ("photon_trace", "photons"),
            ("statistics.mean", "photons"),
            ("statistics.variance", "photons^2"),
            ("pairs.log_negativity", "ebits"),
            ("covariance", "vacuum variance 1/2"),
            ("min_quadrature_variance", "vacuum variance 1/2"),
        ],
        &json!({
            "modes": net.modes(),
            "steps": net.steps(),
            "passive": net.is_passive(),
            "total_gain": net.total_gain(),
            "decoherence": decoherence,
            "photon_trace": result.photon_trace,
            "statistics": stats,
            "pairs": report.pairs,
            "uncertainty_min_eig": state.uncertainty_min_eig(),
            "min_quadrature_variance": state.min_quadrature_variance(),
            "mean": state.mean().iter().collect::<Vec<_>>(),
            "covariance": MatrixJson::from(state.cov()),
        }),
    )?;
    out.say(format!(
        "gaussian: {} modes, {} steps, total photons {:.6}, min quadrature variance {:.6}",
        net.modes(),
        net.steps(),
        total,
        state.min_quadrature_variance()
    ));
    Ok(())
}

fn noise_sweep(config: &RunConfig, out: &mut Outputs) -> Result<(), RunError> {
    let spec = config.walk_spec()?;
    let psi0 = config.initial_state()?;
    let noise = config.noise_spec();
    let n = config.noise.clone().unwrap_or_default();
    let opts = ScalingOptions {
        batches: n.batches,
        exclude_fraction: n.exclude_fraction,
        window: n.fit_window.map(|[a, b]| (a, b)),
    };
    let scaling = out.stage("sigma scaling", || {
        sigma_scaling(&spec, &noise, &psi0, &n.n_values, &opts)
    })?;
    out.csv(
        "scaling.csv",
        &[("N", "steps"), ("sigma", "sites"), ("sigma_err", "sites")],
        |w| scaling.write_csv(w),
    )?;
    let beta = match scaling.beta_stderr {
        Some(se) => format!("{:.4} +/- {se:.4}", scaling.beta),
        None => format!("{:.4}", scaling.beta),
    };
    out.say(format!(
        "noise-sweep: beta = {beta} over N in [{}, {}] ({} points, R^2 = {:.5})",
        scaling.fit_window.0, scaling.fit_window.1, scaling.fit_points, scaling.r_squared
    ));
    for w in &scaling.warnings {
        out.say(format!("warning: {w}"));
    }

    let robustness = match &config.robustness {
        Some(r) => {
            let grid: Vec<_> = r
                .series
                .iter()
                .flat_map(|s| s.levels.iter().map(move |&l| (s.kind, l)))
                .collect();
            let wall = r.wall.expect("resolved config names the wall");
            let report = out.stage("edge robustness", || {
                edge_robustness(&spec, &psi0, wall, r.half_width, r.steps, &grid, &noise)
            })?;
            out.csv(
                "robustness.csv",
                &[
                    ("noise_kind", "label"),
                    (
                        "level",
                        "radians (phase), relative (amplitude), probability (dephasing)",
                    ),
                    ("retained_mean", "probability"),
                    ("retained_std", "probability"),
                ],
                |w| report.write_csv(w),
            )?;
            for m in &report.monotone {
                out.say(format!(
                    "robustness: {} retention non-increasing = {} (delta W = {})",
                    m.noise_kind.label(),
                    m.non_increasing,
                    report.delta_winding()
                ));
            }
            Some(report)
        }
        None => None,
    };

    if let Some(h) = &n.histogram {
        let steps = h.steps.expect("resolved config fills histogram steps");
        let ensemble = out.stage("histogram ensemble", || {
            noisy_evolve(&spec, &noise, &psi0, steps)
        })?;
        let hopts = HistogramOptions {
            bins: h.bins,
            photons: h.photons,
            sites: h.sites.clone(),
        };
        let hist = out.stage("histogram", || intensity_histogram(&ensemble, &hopts))?;
        out.json(
            "histogram.json",
            &[
                ("sites.bin_edges", "photons"),
                ("sites.mean", "photons"),
                ("sites.variance", "photons^2"),
            ],
            &hist,
        )?;
    }

    out.json(
        "noise_sweep.json",
        &[
            ("noise.phase_noise", "radians"),
            ("scaling.sigma", "sites"),
            ("scaling.sigma_err", "sites"),
        ],
        &json!({
            "noise": noise,
            "scaling": scaling,
            "robustness": robustness,
        }),
    )?;
    Ok(())
}

fn scan(config: &RunConfig, out: &mut Outputs) -> Result<(), RunError> {
    let g = config.gain_scan.clone().unwrap_or_default();
    let template = config.mode_network()?;
    let input = config.gaussian_input(&template)?;
    let grid = g.chi.values();
    let decoherence = Decoherence::from(g.decoherence);
    let result = out.stage("gain scan", || {
        gain_scan(&template, &grid, &input, &decoherence, g.functional)
    })?;
    out.csv(
        "gain_scan.csv",
        &[
            ("chi_total", "dimensionless"),
            ("gain", "dimensionless"),
            ("minQ", "dimensionless"),
            ("logneg", "ebits"),
            ("crossed_flag", "0/1"),
            ("min_var", "vacuum variance 1/2"),
        ],
        |w| result.write_csv(w),
    )?;
    out.json(
        "gain_scan.json",
        &[
            ("points.measures.max_log_negativity", "ebits"),
            ("points.measures.min_variance", "vacuum variance 1/2"),
        ],
        &json!({
            "modes": template.modes(),
            "steps": template.steps(),
            "chi_grid": grid,
            "scan": result,
        }),
    )?;
    let verdict = match &result.crossing {
        Crossing::NoneFound => "nonclassicality persists over the whole grid".to_string(),
        Crossing::BelowGrid => "classical already at the first grid point".to_string(),
        Crossing::Found {
            chi, gain, bracket, ..
        } => format!(
            "crossing at chi = {chi:.6} (gain {gain:.6}), bracket [{}, {}]",
            bracket[0], bracket[1]
        ),
    };
    out.say(format!("gain-scan ({:?}): {verdict}", g.functional));
    Ok(())
}
