use crate::config::{ConfigError, ExperimentKind};

const TOP: &str = "\
top level
  experiment   walk | phase-diagram | edge | gaussian | noise-sweep | gain-scan
  seed         u64, default 0 (at most 2^63 - 1)
  threads      worker threads, default 1; outputs are reproducible at fixed threads
  format       csv | json | both, default both
";

const WALK: &str = "\
[walk]
  sites        L, number of sites (x extent on a square lattice), required
  sites_y      y extent; makes the lattice square, default none (chain)
  boundary     periodic | open, default periodic
  protocol     simple | split_step | split_step_2d, default inferred from the angles
  theta1       first coin angle in radians, a number or one per site, required
  theta2       second coin angle in radians (split-step walks)
  steps        N, number of steps
[walk.domain]  two theta2 domains instead of theta2 (chains only)
  left         theta2 on sites [0, split), radians
  right        theta2 on sites [split, L), radians
  split        wall site, default L/2
";

const INPUT: &str = "\
[input]        localized initial walker
  site         site index, default the centre
  coin_up      [re, im], default [0.7071, 0]
  coin_down    [re, im], default [0, 0.7071]; the coin is normalized
";

const PHASE: &str = "\
[phase_diagram]
  resolution   cells per angle over (-pi, pi], default 16, at least 8
  sites        chain length of the bulk walk, default 64
outputs: phase_diagram.csv (theta1, theta2, gap0, gapPi in radians), phase_diagram.json
";

const EDGE: &str = "\
needs [walk] with a [walk.domain]; walk.steps is not used
[input]        default: site just left of the wall, coin down
[edge]
  wall           wall site, default walk.domain.split
  half_width     window [wall - w, wall + w) in sites, default 5
  mass_threshold probability in the window, default 0.9
  pr_fraction    participation ratio below pr_fraction * L, default 0.25
  cluster_tol    quasienergy degeneracy tolerance in radians, default 1e-6
  pin_tol        distance from 0 or pi in radians, default 1e-8
  cap            dense dimension cap, default 8192 (exceeding it exits with 4)
  walk_steps     boundary-walk step counts, default [80, 160]
outputs: edge_states.csv, boundary_walk.csv, edge.json
";

const GAUSSIAN: &str = "\
[gaussian]
  network      walk (passive two-rail network of [walk], needs walk.steps) | amplifier
[gaussian.amplifier]
  sites        chain length, default 4 (2 modes per site)
  theta        coin angle in radians, default pi/2
  chi          gain per active coupler, dimensionless, default 0.3
  steps        layers, default 4
[gaussian.input]
  kind         vacuum | walker | coherent | squeezed | thermal
               walker:   photons (total, shaped like [input]), default for network = walk
               coherent: mode, photons, phase (radians)
               squeezed: mode, r; default for network = amplifier (mode 0, r 0.3)
               thermal:  nbar photons per mode
[gaussian.decoherence]
  loss         photon fraction lost per step, default 0
  dephasing    phase variance per mode per step in rad^2, default 0
outputs: photons.csv (photons), correlations.csv, photon_trace.csv, gaussian.json
";

const NOISE: &str = "\
needs [walk]; walk.steps is not used
[noise]
  amplitude_noise  relative std of the input intensity, default 0
  phase_noise      std of the random phase per site per step in radians, default 0
  coin_dephasing   coin projection probability per step, default 0
  realizations     R, default 1000; realization r uses stream r of the seed
  n_values         step counts, at least 5 spanning a factor 4, default [10, 20, 40, 60, 80, 100]
  batches          batches for sigma error bars, default 20
  exclude_fraction smallest step counts left out of the fit, default 0.1
  fit_window       [low, high] step counts, default none
[noise.histogram]  per-site intensity histograms, optional
  steps        default max(n_values)
  bins         default 20
  photons      nominal input photons, default 1
  sites        default every reached site
[robustness]       edge retention under noise, optional; needs [walk.domain]
  wall         default walk.domain.split
  half_width   sites, default 5
  steps        default 80
  [[robustness.series]]  kind = amplitude | phase | dephasing, levels = [...]
outputs: scaling.csv (N steps, sigma sites), robustness.csv, histogram.json, noise_sweep.json
";

const GAIN: &str = "\
[gain_scan]
  sites        amplifier chain length, default 4
  theta        coin angle in radians, default pi/2
  steps        layers, default 4
  functional   quadrature_squeezing | mandel_q | log_negativity, default quadrature_squeezing
[gain_scan.chi]  chi grid, gain per active coupler (dimensionless)
  start        default 0
  stop         default 1
  points       default 11
[gain_scan.input]  same kinds as [gaussian.input] except walker, default squeezed mode 0, r 0.3
[gain_scan.decoherence]  decoherence level per step
  loss         default 0.05
  dephasing    rad^2, default 0.05
outputs: gain_scan.csv, gain_scan.json
";

pub fn valid_kinds() -> String {
    ExperimentKind::ALL
        .iter()
        .map(|k| k.name())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Config schema of one experiment, with defaults and units.
pub fn describe(kind: &str) -> Result<String, ConfigError> {
    let k = ExperimentKind::from_name(kind).ok_or_else(|| {
        ConfigError::Schema(format!(
            "unknown experiment `{kind}`; valid kinds: {}",
            valid_kinds()
        ))
    })?;
    let body = match k {
        ExperimentKind::Walk => format!(
            "{WALK}{INPUT}outputs: distribution.csv (site, probability), walk.json (sigma in sites)\n"
        ),
        ExperimentKind::PhaseDiagram => PHASE.to_string(),
        ExperimentKind::Edge => format!("{WALK}{EDGE}"),
        ExperimentKind::Gaussian => format!("{GAUSSIAN}{WALK}{INPUT}"),
        ExperimentKind::NoiseSweep => format!("{WALK}{INPUT}{NOISE}"),
        ExperimentKind::GainScan => GAIN.to_string(),
    };
    Ok(format!("{k}\n\n{TOP}{body}"))
}
