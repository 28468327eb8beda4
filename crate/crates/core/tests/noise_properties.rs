use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rydchain::evolve::EvolveConfig;
use rydchain::hamiltonian::{build_rydberg, ChainGeometry, RydbergParams};
use rydchain::noise::{
    apply_detection, invert_detection, mitigate_otoc, monte_carlo, noisy_hamiltonian, sample_noise,
    NoiseParams, NoisyOtocSetup,
};
use rydchain::protocols::{
    central_site, run_otoc, Drive, OtocProtocolConfig, PreparedEnsemble, StateLabel,
};
use rydchain::{build_basis, BoundaryCondition, Grid};

const TWO_PI: f64 = 2.0 * PI;

fn nominal() -> RydbergParams<f64> {
    RydbergParams::from_v_nn(TWO_PI * 1.21, TWO_PI * 0.22, TWO_PI * 7.3, 7.0)
}

fn setup(n: usize) -> NoisyOtocSetup<f64> {
    let bc = BoundaryCondition::Periodic;
    let basis = Arc::new(build_basis(n, bc, true).unwrap());
    let times: Vec<f64> = (0..7).map(|k| 0.3 * k as f64).collect();
    NoisyOtocSetup {
        ensemble: PreparedEnsemble::from_label(StateLabel::Z2, &basis).unwrap(),
        basis,
        geometry: ChainGeometry::uniform(n, bc, 7.0),
        rydberg: nominal(),
        protocol: OtocProtocolConfig::zz(central_site(n), (0..n).collect(), times),
        evolve: EvolveConfig::default(),
    }
}

proptest! {
    #[test]
    fn detection_round_trip(
        p in proptest::collection::vec(0.0f64..=1.0, 12),
        eps in 0.0f64..0.2,
        eta in 0.0f64..0.2,
        wait in 0.0f64..20.0,
    ) {
        let grid = Grid::new(vec![0.0, 1.0, 2.0], (0..4).collect(), p).unwrap();
        let params = NoiseParams { epsilon_raw: eps, eta, t_rydberg_lifetime: Some(140.0), ..Default::default() };
        let gaps = [0.0, wait, 2.0 * wait];
        let measured = apply_detection(&grid, &params, &gaps).unwrap();
        let back = invert_detection(&measured, &params, &gaps).unwrap();
        prop_assert!(back.max_abs_diff(&grid).unwrap() < 1e-12);
    }
}

#[test]
fn phase_draws_have_the_requested_spread() {
    let params = NoiseParams::<f64> {
        delta_phi: 0.08 * PI,
        ..Default::default()
    };
    let draws: Vec<f64> = (0..10_000)
        .map(|s| sample_noise(&params, &nominal(), 4, s).phase_offset)
        .collect();
    let rms = (draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64).sqrt();
    assert!((rms / (0.08 * PI) - 1.0).abs() < 0.03, "rms {rms}");
}

#[test]
fn samples_are_reproducible_and_distinct() {
    let params = NoiseParams::<f64>::experimental();
    let a = sample_noise(&params, &nominal(), 9, 17);
    assert_eq!(a, sample_noise(&params, &nominal(), 9, 17));
    assert_ne!(a, sample_noise(&params, &nominal(), 9, 18));
    let other_seed = NoiseParams {
        seed: 1,
        ..params.clone()
    };
    assert_ne!(a, sample_noise(&other_seed, &nominal(), 9, 17));
}

#[test]
fn zero_noise_reproduces_the_ideal_run() {
    let s = setup(8);
    let sample = sample_noise(&NoiseParams::default(), &s.rydberg, 8, 0);
    let h = noisy_hamiltonian(&sample, &s.geometry, &s.rydberg, &s.basis).unwrap();
    let clean = build_rydberg(&s.basis, &s.geometry, &s.rydberg).unwrap();
    assert_eq!(h.max_abs_diff(&clean), 0.0);
    let reference = run_otoc(&s.ensemble, &Drive::ideal(&clean), &s.protocol, &s.evolve).unwrap();
    let noisy = s.run(&NoiseParams::default()).unwrap();
    assert!(noisy.zz.max_abs_diff(&reference).unwrap() < 1e-12);
    let unchanged = mitigate_otoc(
        &noisy.zz,
        &Grid::new(
            noisy.zz.times.clone(),
            noisy.zz.sites.clone(),
            vec![1.0; noisy.zz.values.len()],
        )
        .unwrap(),
        0.05,
    )
    .unwrap();
    assert_eq!(unchanged.grid.values, noisy.zz.values);
}

#[test]
fn monte_carlo_is_deterministic_across_thread_counts() {
    let s = setup(8);
    let params = NoiseParams {
        n_shots: 16,
        seed: 5,
        ..NoiseParams::experimental()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| s.run(&params).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(one, run(1));
    assert!(one.zz.stderr.as_ref().unwrap().iter().any(|&e| e > 0.0));
}

#[test]
fn standard_error_shrinks_with_shots() {
    let params = |n_shots| NoiseParams::<f64> {
        delta_phi: 0.3,
        n_shots,
        seed: 11,
        ..Default::default()
    };
    let phase_grid = |p: &NoiseParams<f64>| {
        monte_carlo(p, &nominal(), 2, |s| {
            Grid::new(vec![0.0], vec![0], vec![s.phase_offset])
        })
        .unwrap()
    };
    let small = phase_grid(&params(100));
    let large = phase_grid(&params(1600));
    let ratio = small.stderr.unwrap()[0] / large.stderr.unwrap()[0];
    assert!((ratio / 4.0 - 1.0).abs() < 0.15, "ratio {ratio}");
}
