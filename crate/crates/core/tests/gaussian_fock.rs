mod support;

use std::f64::consts::PI;

use num_complex::Complex64;
use qwalk_core::gaussian::{
    all_pairs, correlations, network_evolve, photon_statistics, Coupler, CouplerKind, Decoherence,
    GaussianState, ModeNetwork, Stage, SymplecticOp,
};
use qwalk_core::{
    evolve, make_localized_state, Boundary, CoinProfile, LatticeSpec, Protocol, WalkSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::fock::{run_network, Fock, Generator};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Squeezing `r[i]` then displacement `alpha[i]` on every mode, on both sides.
fn prepare(modes: usize, r: &[f64], alpha: &[Complex64], cutoff: usize) -> (GaussianState, Fock) {
    let mut op = SymplecticOp::identity(modes);
    let mut fock = Fock::vacuum(modes, cutoff);
    for (i, &ri) in r.iter().enumerate() {
        if ri != 0.0 {
            op = SymplecticOp::single_mode_squeeze(modes, i, ri).compose(&op);
            fock.apply(&Generator::squeeze(i, ri));
        }
    }
    op = SymplecticOp::displace(alpha).compose(&op);
    for (i, a) in alpha.iter().enumerate() {
        if *a != c(0.0, 0.0) {
            fock.apply(&Generator::displace(i, *a));
        }
    }
    (op.apply(&GaussianState::vacuum(modes)).unwrap(), fock)
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

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn compare(gauss: &GaussianState, fock: &Fock, tol: f64) {
    assert!(fock.tail() < 1e-8, "truncation tail {}", fock.tail());
    let st = photon_statistics(gauss);
    let corr = correlations(gauss, &all_pairs(gauss.modes())).unwrap();
    for i in 0..gauss.modes() {
        assert!(
            close(st.mean[i], fock.mean(i), tol),
            "n_{i}: {} vs {}",
            st.mean[i],
            fock.mean(i)
        );
        assert!(
            close(st.variance[i], fock.variance(i), tol),
            "var_{i}: {} vs {}",
            st.variance[i],
            fock.variance(i)
        );
    }
    for p in &corr.pairs {
        if let Some(g2) = p.g2 {
            let want = fock.g2(p.i, p.j);
            assert!(close(g2, want, tol), "g2({}, {}): {g2} vs {want}", p.i, p.j);
        }
    }
}

#[test]
fn random_networks_match_fock_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..6 {
        let modes = 2 + case % 3;
        let steps = 1 + case;
        // keep the photon number, and so the truncation, small
        let chi_max = 0.6 / steps as f64;
        let net = random_network(&mut rng, modes, steps, chi_max);
        let r: Vec<f64> = (0..modes).map(|_| rng.random_range(-0.2..0.2)).collect();
        let alpha: Vec<Complex64> = (0..modes)
            .map(|_| c(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4)))
            .collect();
        let cutoff = if modes == 4 { 30 } else { 40 };
        let (g, mut f) = prepare(modes, &r, &alpha, cutoff);
        let out = network_evolve(&net, &g, &Decoherence::default()).unwrap();
        run_network(&mut f, &net);
        compare(&out.state, &f, 1e-5);
    }
}

#[test]
fn strong_single_coupler_matches_fock() {
    let net = ModeNetwork::new(
        2,
        vec![Stage::Couplers(vec![Coupler {
            a: 0,
            b: 1,
            kind: CouplerKind::Active { chi: 1.0 },
        }])],
        1,
    )
    .unwrap();
    let (g, mut f) = prepare(2, &[0.0, 0.0], &[c(0.0, 0.0); 2], 90);
    let out = network_evolve(&net, &g, &Decoherence::default()).unwrap();
    run_network(&mut f, &net);
    compare(&out.state, &f, 1e-5);
}

#[test]
fn two_mode_squeezed_vacuum_closed_forms() {
    for chi in [0.2, 0.5, 1.0, 1.4] {
        let net = ModeNetwork::new(
            2,
            vec![Stage::Couplers(vec![Coupler {
                a: 0,
                b: 1,
                kind: CouplerKind::Active { chi },
            }])],
            1,
        )
        .unwrap();
        let out = network_evolve(&net, &GaussianState::vacuum(2), &Decoherence::default()).unwrap();
        let corr = correlations(&out.state, &[(0, 1)]).unwrap();
        let s2 = f64::sinh(chi).powi(2);
        for n in &corr.statistics.mean {
            assert!((n - s2).abs() < 1e-6);
        }
        assert!((corr.pairs[0].g2.unwrap() - (2.0 + 1.0 / s2)).abs() < 1e-6);
    }
}

#[test]
fn passive_network_mean_field_is_the_amplitude_walk() {
    let l = LatticeSpec::line(16, Boundary::Periodic).unwrap();
    let coins = CoinProfile::two_domain(&l, 0.9, -0.4, 2.2, 8).unwrap();
    let spec = WalkSpec::new(l, coins, Protocol::SplitStep, 8).unwrap();
    let psi = make_localized_state(l, 5, [c(0.6, 0.2), c(0.1, -0.77)]).unwrap();
    let nbar: f64 = 7.5;
    let alphas: Vec<Complex64> = psi.amplitudes().iter().map(|a| a * nbar.sqrt()).collect();
    let net = ModeNetwork::from_walk(&spec).unwrap();
    assert!(net.is_passive());
    let out = network_evolve(
        &net,
        &GaussianState::coherent(&alphas),
        &Decoherence::default(),
    )
    .unwrap();
    let walked = evolve(&psi, &spec, 8, |_, _| {}).unwrap();
    let st = photon_statistics(&out.state);
    for (m, a) in walked.amplitudes().iter().enumerate() {
        assert!((st.mean[m] - nbar * a.norm_sqr()).abs() < 1e-9);
    }
}

/// Moments of a two-mode state averaged over independent Gaussian phases,
/// by direct quadrature over the phases.
fn phase_averaged(
    state: &GaussianState,
    var: f64,
) -> (nalgebra::DVector<f64>, nalgebra::DMatrix<f64>) {
    let sd = var.sqrt();
    let pts = 161;
    let nodes: Vec<(f64, f64)> = (0..pts)
        .map(|k| {
            let x = -8.0 + 16.0 * k as f64 / (pts - 1) as f64;
            (x * sd, (-x * x / 2.0).exp())
        })
        .collect();
    let norm: f64 = nodes.iter().map(|n| n.1).sum::<f64>().powi(2);
    let mut m1 = nalgebra::DVector::zeros(4);
    let mut m2 = nalgebra::DMatrix::zeros(4, 4);
    for &(p0, w0) in &nodes {
        for &(p1, w1) in &nodes {
            let w = w0 * w1 / norm;
            let op =
                SymplecticOp::phase_shift(2, 0, p0).compose(&SymplecticOp::phase_shift(2, 1, p1));
            let s = op.matrix();
            let mu = s * state.mean();
            m1 += &mu * w;
            m2 += (s * state.cov() * s.transpose() + &mu * mu.transpose()) * w;
        }
    }
    let cov = &m2 - &m1 * m1.transpose();
    (m1, cov)
}

#[test]
fn dephasing_matches_phase_averaged_moments() {
    let prep = SymplecticOp::displace(&[c(0.8, -0.3), c(0.2, 0.5)])
        .compose(&qwalk_core::gaussian::coupler_symplectic(
            CouplerKind::Active { chi: 0.4 },
        ))
        .compose(&SymplecticOp::single_mode_squeeze(2, 1, 0.3));
    let state = prep.apply(&GaussianState::vacuum(2)).unwrap();
    for var in [0.01, 0.2, 0.9] {
        let out = Decoherence {
            loss: 0.0,
            dephasing: var,
        }
        .apply(&state)
        .unwrap();
        let (mean, cov) = phase_averaged(&state, var);
        assert!((out.mean() - mean).amax() < 1e-9);
        assert!((out.cov() - cov).amax() < 1e-9);
    }
}

#[test]
fn loss_scales_coherent_and_thermal_light() {
    let eta: f64 = 0.7;
    let s = GaussianState::coherent(&[c(1.5, 0.5)]);
    let out = Decoherence {
        loss: 1.0 - eta,
        dephasing: 0.0,
    }
    .apply(&s)
    .unwrap();
    assert!((out.amplitude(0) - c(1.5, 0.5) * eta.sqrt()).norm() < 1e-12);
    assert!((out.cov() - GaussianState::vacuum(1).cov()).amax() < 1e-12);
    let th = GaussianState::thermal(&[2.0]).unwrap();
    let out = Decoherence {
        loss: 1.0 - eta,
        dephasing: 0.0,
    }
    .apply(&th)
    .unwrap();
    assert!((photon_statistics(&out).mean[0] - 2.0 * eta).abs() < 1e-12);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
    #[test]
    fn random_compositions_stay_symplectic(
        gates in proptest::collection::vec((0usize..4, 0usize..3, -0.5f64..0.5), 1..16),
    ) {
        let modes = 3;
        let mut op = SymplecticOp::identity(modes);
        for (kind, m, x) in gates {
            let next = (m + 1) % modes;
            let g = match kind {
                0 => qwalk_core::gaussian::coupler_on(modes, m, next, CouplerKind::Active { chi: x }),
                1 => qwalk_core::gaussian::coupler_on(modes, m, next, CouplerKind::Passive { phi: 3.0 * x }),
                2 => SymplecticOp::single_mode_squeeze(modes, m, x),
                _ => SymplecticOp::phase_shift(modes, m, 3.0 * x),
            };
            op = g.compose(&op);
        }
        proptest::prop_assert!(op.residual() <= 1e-10);
        let out = op.apply(&GaussianState::thermal(&[0.1, 0.0, 1.3]).unwrap()).unwrap();
        proptest::prop_assert!(out.uncertainty_min_eig() >= -1e-9);
    }
}
