//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any
//! failure.

#[path = "../../core/tests/support/fock.rs"]
mod fock;

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use fock::{run_network, Fock, Generator};
use qwalk_cli::manifest::MANIFEST_FILE;
use qwalk_cli::{load, run, Manifest, Overrides, Status};
use qwalk_core::gaussian::{
    all_pairs, correlations, coupler_on, gain_scan, network_evolve, photon_statistics, Coupler,
    CouplerKind, Crossing, Decoherence, Functional, GaussianState, ModeNetwork, Stage,
    SymplecticOp,
};
use qwalk_core::noise::{sigma_scaling, NoiseSpec, ScalingOptions};
use qwalk_core::topology::{
    bloch_decompose, boundary_walk_experiment, edge_overlap, find_edge_states, topology_report,
    EdgeOptions,
};
use qwalk_core::{
    evolve, make_localized_state, materialize_unitary, unitarity_residual, Boundary, CoinProfile,
    Complex64, LatticeSpec, Protocol, SpinorField, WalkSpec, WalkStepper, DENSE_CAP,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn random_state(rng: &mut ChaCha8Rng, l: LatticeSpec) -> SpinorField {
    let amps = (0..l.hilbert_dim())
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    SpinorField::from_amplitudes(l, amps)
        .unwrap()
        .normalized()
        .unwrap()
}

/// Homogeneous or site-dependent angles, at random.
fn angles(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    if rng.random::<bool>() {
        vec![rng.random_range(-PI..PI); n]
    } else {
        (0..n).map(|_| rng.random_range(-PI..PI)).collect()
    }
}

fn random_spec(rng: &mut ChaCha8Rng) -> WalkSpec {
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(2..=64);
            let l = LatticeSpec::line(n, Boundary::Periodic).unwrap();
            let coins = CoinProfile::new(&l, angles(rng, n), None).unwrap();
            WalkSpec::new(l, coins, Protocol::Simple, 1).unwrap()
        }
        1 => {
            let n = rng.random_range(2..=64);
            let l = LatticeSpec::line(n, Boundary::Periodic).unwrap();
            let coins = CoinProfile::new(&l, angles(rng, n), Some(angles(rng, n))).unwrap();
            WalkSpec::new(l, coins, Protocol::SplitStep, 1).unwrap()
        }
        _ => {
            let lx = rng.random_range(2..=8);
            let ly = rng.random_range(2..=64 / lx);
            let l = LatticeSpec::square(lx, ly, Boundary::Periodic).unwrap();
            let n = l.sites();
            let coins = CoinProfile::new(&l, angles(rng, n), Some(angles(rng, n))).unwrap();
            WalkSpec::new(l, coins, Protocol::SplitStep2d, 1).unwrap()
        }
    }
}

fn unitarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut drift, mut col_diff, mut residual) = (0.0f64, 0.0f64, 0.0f64);
    let specs = 1000;
    for _ in 0..specs {
        let spec = random_spec(&mut rng);
        let l = *spec.lattice();
        let stepper = WalkStepper::new(&spec);
        let mut psi = random_state(&mut rng, l);
        for _ in 0..20 {
            psi = stepper.step(&psi).map_err(err)?;
            drift = drift.max((psi.norm_sqr() - 1.0).abs());
        }
        let u = materialize_unitary(&spec, DENSE_CAP).map_err(err)?;
        residual = residual.max(unitarity_residual(&u));
        for col in 0..l.hilbert_dim() {
            let mut amps = vec![c(0.0, 0.0); l.hilbert_dim()];
            amps[col] = c(1.0, 0.0);
            let out = stepper
                .step(&SpinorField::from_amplitudes(l, amps).map_err(err)?)
                .map_err(err)?;
            for (row, a) in out.amplitudes().iter().enumerate() {
                col_diff = col_diff.max((a - u[(row, col)]).norm());
            }
        }
    }
    ensure(
        drift <= 1e-12 && col_diff <= 1e-12 && residual <= 1e-12,
        || format!("norm drift {drift:.1e}, column diff {col_diff:.1e}, residual {residual:.1e}"),
    )?;
    Ok(format!(
        "{specs} specs: norm drift {drift:.1e}, column diff {col_diff:.1e}, U^dag U residual {residual:.1e}"
    ))
}

fn dispersion() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..20 {
        let theta = -PI + (i as f64 + 0.5) * 2.0 * PI / 20.0;
        let spec = WalkSpec::simple(16, theta, 1).map_err(err)?;
        let b = bloch_decompose(&spec, 256).map_err(err)?;
        ensure(b.k.len() == 256, || format!("{} k points", b.k.len()))?;
        for (j, &k) in b.k.iter().enumerate() {
            let want = (theta / 2.0).cos() * k.cos();
            worst = worst.max((b.half_angle[j].cos() - want).abs());
            // both bands, not just the folded one
            worst = worst.max((b.e_plus[j].cos() - want).abs());
            worst = worst.max((b.e_minus[j].cos() - want).abs());
        }
    }
    ensure(worst <= 1e-10, || {
        format!("max |cos E - cos(t/2) cos k| = {worst:.1e}")
    })?;
    Ok(format!(
        "20 angles x 256 momenta: max deviation {worst:.1e}"
    ))
}

/// Winding and gap of the homogeneous split-step bulk.
fn bulk(t1: f64, t2: f64) -> Result<(i64, f64), String> {
    let r = topology_report(&WalkSpec::split_step(32, t1, t2, 1).map_err(err)?).map_err(err)?;
    Ok((r.winding, r.gap))
}

fn bulk_boundary() -> Outcome {
    let sites = 64;
    let l = LatticeSpec::line(sites, Boundary::Periodic).map_err(err)?;
    let pairs: [(f64, f64, f64); 14] = [
        (0.5, -0.85, 0.0),
        (0.5, -0.3, 0.85),
        (0.5, 0.0, 0.85),
        (0.5, -0.1, 0.85),
        (0.5, -0.85, 0.1),
        (0.6, -0.85, 0.1),
        (0.6, -0.3, 0.85),
        (0.5, -0.3, 0.0),
        (0.5, 0.0, 0.3),
        (0.5, 0.7, 0.85),
        (0.5, -0.85, -0.7),
        (0.6, -0.3, 0.3),
        (0.6, -0.1, 0.0),
        (0.5, 0.1, 0.3),
    ];
    let (mut topological, mut trivial, mut min_gap, mut max_pin) = (0, 0, f64::INFINITY, 0.0f64);
    for (t1, left, right) in pairs {
        let (t1, left, right) = (t1 * PI, left * PI, right * PI);
        let (wl, gl) = bulk(t1, left)?;
        let (wr, gr) = bulk(t1, right)?;
        min_gap = min_gap.min(gl).min(gr);
        let want = (wl - wr).unsigned_abs() as usize;
        let coins = CoinProfile::two_domain(&l, t1, left, right, sites / 2).map_err(err)?;
        let spec = WalkSpec::new(l, coins, Protocol::SplitStep, 1).map_err(err)?;
        let cert = find_edge_states(&spec, &EdgeOptions::default()).map_err(err)?;
        ensure(cert.count_per_wall == vec![want, want], || {
            format!(
                "theta1 {t1:.3}, theta2 {left:.3} | {right:.3}: {:?} edge states, |dW| = {want}",
                cert.count_per_wall
            )
        })?;
        for s in &cert.states {
            max_pin = max_pin.max(s.quasienergy.abs().min(PI - s.quasienergy.abs()));
        }
        if want > 0 {
            topological += 1;
        } else {
            trivial += 1;
        }
    }
    ensure(
        min_gap > 0.1 && max_pin <= 1e-8 && topological >= 5 && trivial >= 5,
        || format!("min gap {min_gap:.3}, max pin distance {max_pin:.1e}"),
    )?;
    Ok(format!(
        "{} pairs ({topological} with |dW| = 1, {trivial} with dW = 0): count = |dW| at both walls, min gap {min_gap:.3}, max distance from 0/pi {max_pin:.1e}",
        pairs.len()
    ))
}

fn boundary_peak() -> Outcome {
    let (sites, wall, hw) = (256, 128, 5);
    let t1 = PI / 2.0;
    let l = LatticeSpec::line(sites, Boundary::Periodic).map_err(err)?;
    let psi0 = make_localized_state(l, wall - 1, [c(0.0, 0.0), c(1.0, 0.0)]).map_err(err)?;
    let retained = |right: f64, n: usize| -> Result<f64, String> {
        let coins = CoinProfile::two_domain(&l, t1, -0.3, right, wall).map_err(err)?;
        let spec = WalkSpec::new(l, coins, Protocol::SplitStep, n).map_err(err)?;
        Ok(boundary_walk_experiment(&spec, &psi0, n, wall, hw)
            .map_err(err)?
            .retained)
    };
    let right = 0.75 * PI;
    let dw = bulk(t1, -0.3)?.0 - bulk(t1, right)?.0;
    ensure(dw.abs() == 1, || format!("|dW| = {}", dw.abs()))?;
    let coins = CoinProfile::two_domain(&l, t1, -0.3, right, wall).map_err(err)?;
    let spec = WalkSpec::new(l, coins, Protocol::SplitStep, 1).map_err(err)?;
    let cert = find_edge_states(&spec, &EdgeOptions::default()).map_err(err)?;
    let idx = cert
        .walls
        .iter()
        .position(|&w| w == wall)
        .ok_or_else(|| format!("no wall at {wall}: {:?}", cert.walls))?;
    let overlap = edge_overlap(&cert, idx, &psi0);
    let (r80, r160) = (retained(right, 80)?, retained(right, 160)?);
    let control_dw = bulk(t1, -0.3)?.0 - bulk(t1, 0.3)?.0;
    let control = retained(0.3, 160)?;
    ensure(
        (r80 - r160).abs() < 0.02
            && r160 >= 0.05
            && (r80 - overlap).abs() <= 0.02
            && (r160 - overlap).abs() <= 0.02
            && control_dw == 0
            && control < 0.02,
        || {
            format!(
                "retained {r80:.4} / {r160:.4}, overlap {overlap:.4}, control {control:.4} (dW {control_dw})"
            )
        },
    )?;
    Ok(format!(
        "retained {r80:.4} at N=80, {r160:.4} at N=160, edge overlap {overlap:.4}; trivial wall retains {control:.4}"
    ))
}

fn scaling() -> Outcome {
    let spec = WalkSpec::simple(809, PI / 2.0, 1).map_err(err)?;
    let psi = make_localized_state(
        *spec.lattice(),
        404,
        [c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2)],
    )
    .map_err(err)?;
    let steps = [25, 50, 75, 100, 150, 200, 250, 300, 350, 400];
    let opts = ScalingOptions {
        window: Some((50, 400)),
        ..ScalingOptions::default()
    };
    let unitary =
        sigma_scaling(&spec, &NoiseSpec::noiseless(7), &psi, &steps, &opts).map_err(err)?;
    let noisy = NoiseSpec {
        coin_dephasing: 1.0,
        seed: 7,
        realizations: 10_000,
        ..NoiseSpec::default()
    };
    let dephased = sigma_scaling(&spec, &noisy, &psi, &steps, &opts).map_err(err)?;
    ensure(
        (dephased.beta - 0.5).abs() <= 0.05 && (unitary.beta - 1.0).abs() <= 0.05,
        || {
            format!(
                "beta {:.4} (p = 1), {:.4} (unitary)",
                dephased.beta, unitary.beta
            )
        },
    )?;
    Ok(format!(
        "beta {:.4} at p = 1 (R = 10^4), {:.4} unitary, fit over N in [50, 400]",
        dephased.beta, unitary.beta
    ))
}

/// Squeezing `r[i]` then displacement `alpha[i]` on every mode, on both sides.
fn prepare(modes: usize, r: &[f64], alpha: &[Complex64], cutoff: usize) -> (GaussianState, Fock) {
    let mut op = SymplecticOp::identity(modes);
    let mut f = Fock::vacuum(modes, cutoff);
    for (i, &ri) in r.iter().enumerate() {
        if ri != 0.0 {
            op = SymplecticOp::single_mode_squeeze(modes, i, ri).compose(&op);
            f.apply(&Generator::squeeze(i, ri));
        }
    }
    op = SymplecticOp::displace(alpha).compose(&op);
    for (i, a) in alpha.iter().enumerate() {
        if *a != c(0.0, 0.0) {
            f.apply(&Generator::displace(i, *a));
        }
    }
    (op.apply(&GaussianState::vacuum(modes)).unwrap(), f)
}

fn random_network(rng: &mut ChaCha8Rng, modes: usize, steps: usize, chi_max: f64) -> ModeNetwork {
    let mut stages = Vec::new();
    for _ in 0..2 {
        let mut order: Vec<usize> = (0..modes).collect();
        for i in (1..modes).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let couplers = order
            .chunks_exact(2)
            .map(|p| Coupler {
                a: p[0],
                b: p[1],
                kind: if rng.random::<bool>() {
                    CouplerKind::Active {
                        chi: rng.random_range(-chi_max..chi_max),
                    }
                } else {
                    CouplerKind::Passive {
                        phi: rng.random_range(-PI..PI),
                    }
                },
            })
            .collect();
        stages.push(Stage::Couplers(couplers));
    }
    let mut dest: Vec<usize> = (1..modes).collect();
    dest.push(0);
    stages.push(Stage::Permute(dest));
    ModeNetwork::new(modes, stages, steps).unwrap()
}

/// Largest disagreement in `<n>`, `Var(n)` and `g2`, and the truncation tail.
fn fock_gap(g: &GaussianState, f: &Fock) -> Result<(f64, f64), String> {
    let st = photon_statistics(g);
    let corr = correlations(g, &all_pairs(g.modes())).map_err(err)?;
    let mut worst = 0.0f64;
    for i in 0..g.modes() {
        worst = worst.max((st.mean[i] - f.mean(i)).abs());
        worst = worst.max((st.variance[i] - f.variance(i)).abs());
    }
    for p in &corr.pairs {
        if let Some(g2) = p.g2 {
            worst = worst.max((g2 - f.g2(p.i, p.j)).abs());
        }
    }
    Ok((worst, f.tail()))
}

fn single_coupler(kind: CouplerKind) -> ModeNetwork {
    ModeNetwork::new(
        2,
        vec![Stage::Couplers(vec![Coupler { a: 0, b: 1, kind }])],
        1,
    )
    .unwrap()
}

fn fock_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut tail) = (0.0f64, 0.0f64);
    let mut cases = 0;
    for case in 0..9 {
        let modes = 2 + case % 3;
        let steps = 1 + case % 6;
        // total gain along any path stays at chi <= 0.6
        let chi_max = 0.6 / steps as f64;
        let net = random_network(&mut rng, modes, steps, chi_max);
        let r: Vec<f64> = (0..modes).map(|_| rng.random_range(-0.2..0.2)).collect();
        let alpha: Vec<Complex64> = (0..modes)
            .map(|_| c(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)))
            .collect();
        let cutoff = if modes == 4 { 30 } else { 40 };
        let (g, mut f) = prepare(modes, &r, &alpha, cutoff);
        let out = network_evolve(&net, &g, &Decoherence::default()).map_err(err)?;
        run_network(&mut f, &net);
        let (w, t) = fock_gap(&out.state, &f)?;
        worst = worst.max(w);
        tail = tail.max(t);
        cases += 1;
    }
    // the strongest gain on its own
    let net = single_coupler(CouplerKind::Active { chi: 1.0 });
    let (g, mut f) = prepare(2, &[0.0, 0.0], &[c(0.0, 0.0); 2], 90);
    let out = network_evolve(&net, &g, &Decoherence::default()).map_err(err)?;
    run_network(&mut f, &net);
    let (w, t) = fock_gap(&out.state, &f)?;
    worst = worst.max(w);
    tail = tail.max(t);
    cases += 1;

    let mut closed = 0.0f64;
    for chi in [0.2, 0.5, 1.0] {
        let net = single_coupler(CouplerKind::Active { chi });
        let out = network_evolve(&net, &GaussianState::vacuum(2), &Decoherence::default())
            .map_err(err)?;
        let corr = correlations(&out.state, &[(0, 1)]).map_err(err)?;
        let s2 = chi.sinh() * chi.sinh();
        for n in &corr.statistics.mean {
            closed = closed.max((n - s2).abs());
        }
        let g2 = corr.pairs[0].g2.ok_or("no cross g2")?;
        closed = closed.max((g2 - (2.0 + 1.0 / s2)).abs());
    }
    ensure(worst <= 1e-5 && tail < 1e-8 && closed <= 1e-6, || {
        format!("Fock gap {worst:.1e}, tail {tail:.1e}, two-mode closed forms {closed:.1e}")
    })?;
    Ok(format!(
        "{cases} networks (M <= 4, N <= 6, chi <= 1): max gap {worst:.1e}, tail {tail:.1e}; two-mode squeezed vacuum off by {closed:.1e}"
    ))
}

fn symplectic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut residual, mut min_eig) = (0.0f64, f64::INFINITY);
    let trials = 1000;
    for _ in 0..trials {
        let modes = rng.random_range(2..=4);
        let mut op = SymplecticOp::identity(modes);
        for _ in 0..rng.random_range(1..=24) {
            let m = rng.random_range(0..modes);
            let other = (m + rng.random_range(1..modes)) % modes;
            let x = rng.random_range(-0.5..0.5);
            let g = match rng.random_range(0..5) {
                0 => coupler_on(modes, m, other, CouplerKind::Active { chi: x }),
                1 => coupler_on(modes, m, other, CouplerKind::Passive { phi: 6.0 * x }),
                2 => SymplecticOp::single_mode_squeeze(modes, m, x),
                3 => SymplecticOp::phase_shift(modes, m, 6.0 * x),
                _ => {
                    let mut alpha = vec![c(0.0, 0.0); modes];
                    alpha[m] = c(x, -x);
                    SymplecticOp::displace(&alpha)
                }
            };
            op = g.compose(&op);
        }
        residual = residual.max(op.residual());
        let nbar: Vec<f64> = (0..modes).map(|_| rng.random_range(0.0..2.0)).collect();
        let input = GaussianState::thermal(&nbar).map_err(err)?;
        let out = op.apply(&input).map_err(err)?;
        min_eig = min_eig.min(out.uncertainty_min_eig());
    }
    ensure(residual <= 1e-10 && min_eig >= -1e-9, || {
        format!("residual {residual:.1e}, min eigenvalue {min_eig:.1e}")
    })?;
    Ok(format!(
        "{trials} compositions: max |S Omega S^T - Omega| {residual:.1e}, min eig(V + i Omega/2) {min_eig:.1e}"
    ))
}

fn mean_field() -> Outcome {
    let (sites, steps) = (16, 8);
    let l = LatticeSpec::line(sites, Boundary::Periodic).map_err(err)?;
    let specs = [
        WalkSpec::simple(sites, PI / 2.0, steps).map_err(err)?,
        WalkSpec::split_step(sites, 0.9, -2.3, steps).map_err(err)?,
        WalkSpec::new(
            l,
            CoinProfile::two_domain(&l, 0.9, -0.4, 2.2, 8).map_err(err)?,
            Protocol::SplitStep,
            steps,
        )
        .map_err(err)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for spec in &specs {
        let psi = random_state(&mut rng, l);
        let nbar = rng.random_range(1.0..20.0);
        let alphas: Vec<Complex64> = psi
            .amplitudes()
            .iter()
            .map(|a| a * f64::sqrt(nbar))
            .collect();
        let net = ModeNetwork::from_walk(spec).map_err(err)?;
        ensure(net.is_passive(), || "walk network is not passive".into())?;
        let out = network_evolve(
            &net,
            &GaussianState::coherent(&alphas),
            &Decoherence::default(),
        )
        .map_err(err)?;
        let walked = evolve(&psi, spec, steps, |_, _| {}).map_err(err)?;
        let st = photon_statistics(&out.state);
        for (m, a) in walked.amplitudes().iter().enumerate() {
            worst = worst.max((st.mean[m] - nbar * a.norm_sqr()).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("max intensity gap {worst:.1e}"))?;
    Ok(format!(
        "{} walks at L = {sites}, N = {steps}: max |<n_m> - nbar |psi_m|^2| {worst:.1e}",
        specs.len()
    ))
}

fn gain_threshold() -> Outcome {
    let template = ModeNetwork::amplifier(4, PI / 2.0, 0.0, 4).map_err(err)?;
    let m = template.modes();
    let input = SymplecticOp::single_mode_squeeze(m, 0, 0.3)
        .apply(&GaussianState::vacuum(m))
        .map_err(err)?;
    let grid = |points: usize| -> Vec<f64> {
        (0..points)
            .map(|i| i as f64 / (points - 1) as f64)
            .collect()
    };
    let scan = |points: usize, d: Decoherence| {
        gain_scan(
            &template,
            &grid(points),
            &input,
            &d,
            Functional::QuadratureSqueezing,
        )
        .map_err(err)
    };
    for points in [11, 41] {
        let s = scan(points, Decoherence::default())?;
        ensure(s.crossing == Crossing::NoneFound, || {
            format!("zero decoherence, {points} points: {:?}", s.crossing)
        })?;
    }
    let noisy = Decoherence {
        loss: 0.05,
        dephasing: 0.05,
    };
    let mut found = Vec::new();
    for points in [11, 21, 41, 81] {
        match scan(points, noisy)?.crossing {
            Crossing::Found { chi, bracket, .. } => found.push((points, chi, bracket)),
            other => return Err(format!("{points} points: {other:?}")),
        }
    }
    let (_, coarse, outer) = found[0];
    let cell = 0.1;
    for &(points, chi, bracket) in &found[1..] {
        ensure((chi - coarse).abs() <= cell, || {
            format!("{points} points: crossing {chi:.4} vs {coarse:.4} on 11 points")
        })?;
        ensure(
            bracket[0] >= outer[0] - 1e-12 && bracket[1] <= outer[1] + 1e-12,
            || format!("{points} points: bracket {bracket:?} outside {outer:?}"),
        )?;
    }
    let last = found[found.len() - 1];
    Ok(format!(
        "no crossing without decoherence; at loss = dephasing = 0.05 chi* = {coarse:.4} on 11 points, {:.4} on 81 (bracket [{:.4}, {:.4}])",
        last.1, last.2[0], last.2[1]
    ))
}

fn data_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(err)? {
        let path = entry.map_err(err)?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name != MANIFEST_FILE {
            out.push((name, std::fs::read(&path).map_err(err)?));
        }
    }
    out.sort();
    Ok(out)
}

fn determinism() -> Outcome {
    let configs = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut names: Vec<PathBuf> = std::fs::read_dir(&configs)
        .map_err(err)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    names.retain(|p| p.extension().is_some_and(|e| e == "toml"));
    names.sort();
    let mut kinds = std::collections::BTreeSet::new();
    let mut files = 0;
    for cfg in &names {
        let stem = cfg.file_stem().unwrap().to_string_lossy().into_owned();
        let first = tmp.path().join(format!("{stem}-a"));
        let second = tmp.path().join(format!("{stem}-b"));
        let config = load(Some(cfg), &Overrides::default()).map_err(err)?;
        kinds.insert(config.experiment.name());
        run(&config, &first).map_err(|e| format!("{stem}: {e}"))?;
        let again = load(Some(&first.join(MANIFEST_FILE)), &Overrides::default()).map_err(err)?;
        run(&again, &second).map_err(|e| format!("{stem} rerun: {e}"))?;
        let manifest = Manifest::read(&first.join(MANIFEST_FILE)).map_err(err)?;
        ensure(manifest.status == Status::Complete, || {
            format!("{stem}: incomplete")
        })?;
        let (a, b) = (data_files(&first)?, data_files(&second)?);
        ensure(a == b, || format!("{stem}: rerun differs"))?;
        for (name, bytes) in &a {
            let listed = manifest.outputs.iter().find(|o| &o.path == name);
            ensure(
                listed.is_some_and(|o| o.sha256 == qwalk_cli::manifest::sha256_hex(bytes)),
                || format!("{stem}: {name} hash not in manifest"),
            )?;
        }
        files += a.len();
    }
    ensure(kinds.len() == 6, || {
        format!("only {} experiment kinds", kinds.len())
    })?;
    Ok(format!(
        "{} configs over all 6 experiments: {files} files identical after rerun from manifest",
        names.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("unitarity", unitarity),
        ("dispersion", dispersion),
        ("bulk-boundary", bulk_boundary),
        ("boundary peak", boundary_peak),
        ("spreading exponent", scaling),
        ("Fock oracle", fock_oracle),
        ("symplectic", symplectic),
        ("mean field", mean_field),
        ("gain threshold", gain_threshold),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check)
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1} s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.1} s)", i + 1);
            }
        }
    }
    println!(
        "{}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
