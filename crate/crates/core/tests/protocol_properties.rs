use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rydchain::evolve::EvolveConfig;
use rydchain::hamiltonian::{build_pxp, build_rydberg, ChainGeometry, RydbergParams};
use rydchain::protocols::{
    central_site, prepare_error_mixture, run_density_trajectories, run_otoc, Drive, ErrorModel,
    OtocProtocolConfig, PreparedEnsemble, Reversal, StateLabel,
};
use rydchain::{build_basis, BoundaryCondition, Grid};

fn pxp_otoc(
    n: usize,
    bc: BoundaryCondition,
    ens: &PreparedEnsemble<f64>,
    cfg: &OtocProtocolConfig<f64>,
) -> Grid {
    let h = build_pxp(ens.basis(), 1.0).unwrap();
    assert_eq!(ens.basis().n_sites(), n);
    assert_eq!(ens.basis().boundary(), bc);
    run_otoc(ens, &Drive::ideal(&h), cfg, &EvolveConfig::default()).unwrap()
}

fn times(max: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| max * k as f64 / (count - 1) as f64)
        .collect()
}

#[test]
fn zz_starts_at_one_and_iz_stays_at_one() {
    for (n, bc) in [
        (8, BoundaryCondition::Open),
        (10, BoundaryCondition::Periodic),
    ] {
        let basis = Arc::new(build_basis(n, bc, true).unwrap());
        for label in [StateLabel::Z2, StateLabel::Zero] {
            let ens = PreparedEnsemble::from_label(label, &basis).unwrap();
            let sites: Vec<usize> = (0..n).collect();
            let zz = pxp_otoc(
                n,
                bc,
                &ens,
                &OtocProtocolConfig::zz(central_site(n), sites.clone(), times(4.0 * PI, 17)),
            );
            assert!(zz.row(0).iter().all(|&v| v == 1.0));
            assert!(zz.values.iter().all(|v| (-1.0..=1.0).contains(v)));
            let iz = pxp_otoc(
                n,
                bc,
                &ens,
                &OtocProtocolConfig::iz(sites, times(4.0 * PI, 17)),
            );
            assert!(iz.values.iter().all(|v| (v - 1.0).abs() < 1e-8));
        }
    }
}

#[test]
fn information_respects_a_light_cone() {
    let n = 15;
    let basis = Arc::new(build_basis(n, BoundaryCondition::Open, true).unwrap());
    let c = 7;
    for label in [StateLabel::Z2, StateLabel::Zero] {
        let ens = PreparedEnsemble::from_label(label, &basis).unwrap();
        let mut cfg = OtocProtocolConfig::zz(c, (0..n).collect(), times(3.0, 25));
        cfg.reversal = Reversal::ExactNegation;
        let g = pxp_otoc(n, BoundaryCondition::Open, &ens, &cfg);
        for (k, &t) in g.times.iter().enumerate() {
            for j in 0..n {
                if j.abs_diff(c) as f64 > 1.0 + 4.0 * t {
                    assert!((g.get(k, j) - 1.0).abs() < 1e-6, "Ωt = {t}, site {j}");
                }
            }
        }
    }
}

#[test]
fn reflection_symmetric_chains_give_symmetric_otocs() {
    for (n, bc) in [
        (9, BoundaryCondition::Open),
        (10, BoundaryCondition::Periodic),
    ] {
        let basis = Arc::new(build_basis(n, bc, true).unwrap());
        let ens = PreparedEnsemble::from_label(StateLabel::Z2, &basis).unwrap();
        let c = 4;
        let g = pxp_otoc(
            n,
            bc,
            &ens,
            &OtocProtocolConfig::zz(c, (0..n).collect(), times(6.0 * PI, 25)),
        );
        for k in 0..g.n_times() {
            for d in 1..=4 {
                let right = g.get(k, c + d);
                let left = g.get(k, (c + n - d) % n);
                assert!(
                    (right - left).abs() < 1e-9,
                    "N = {n}, t index {k}, offset {d}"
                );
            }
        }
    }
}

#[test]
fn diagonal_pure_sites_ignore_the_butterfly() {
    let n = 10;
    let basis = Arc::new(build_basis(n, BoundaryCondition::Periodic, true).unwrap());
    let h = build_pxp(&basis, 1.0).unwrap();
    let c = central_site(n);
    let ts = times(10.0 * PI, 401);
    let ens = PreparedEnsemble::from_label(StateLabel::Z2, &basis).unwrap();
    let rho = run_density_trajectories(&ens, &h, &ts, &[c], &EvolveConfig::default()).unwrap();
    let g = run_otoc(
        &ens,
        &Drive::ideal(&h),
        &OtocProtocolConfig::zz(c, vec![c], ts.clone()),
        &EvolveConfig::default(),
    )
    .unwrap();
    let mut checked = 0;
    for (k, r) in rho[0].iter().enumerate() {
        let p = r.p_up();
        if r.elements()[0][1].norm() < 1e-3 && p.min(1.0 - p) < 1e-3 {
            assert!((g.get(k, 0) - 1.0).abs() < 2e-3, "Ωt = {}", ts[k]);
            checked += 1;
        }
    }
    assert!(checked >= 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn otoc_is_linear_in_the_ensemble(fidelity in 0.3f64..1.0, rydberg in any::<bool>()) {
        let n = 8;
        let bc = BoundaryCondition::Periodic;
        let basis = Arc::new(build_basis(n, bc, true).unwrap());
        let mix = prepare_error_mixture(&basis, fidelity, &ErrorModel::UniformUpFlip).unwrap();
        let h = if rydberg {
            let p = RydbergParams::from_v_nn(2.0 * PI * 1.21, 2.0 * PI * 0.22, 2.0 * PI * 7.3, 7.0);
            build_rydberg(&basis, &ChainGeometry::uniform(n, bc, 7.0), &p).unwrap()
        } else {
            build_pxp(&basis, 2.0 * PI * 1.21).unwrap()
        };
        let cfg = OtocProtocolConfig::zz(4, (0..n).collect(), times(2.0, 9));
        let ecfg = EvolveConfig::default();
        let whole = run_otoc(&mix, &Drive::ideal(&h), &cfg, &ecfg).unwrap();
        let mut sum = vec![0.0; whole.values.len()];
        for (w, member) in &mix.members {
            let single = run_otoc(&PreparedEnsemble { members: vec![(1.0, member.clone())], label: mix.label }, &Drive::ideal(&h), &cfg, &ecfg).unwrap();
            for (s, v) in sum.iter_mut().zip(&single.values) {
                *s += w * v;
            }
        }
        for (a, b) in whole.values.iter().zip(&sum) {
            prop_assert!((a - b).abs() < 1e-10);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(a));
        }
    }
}
