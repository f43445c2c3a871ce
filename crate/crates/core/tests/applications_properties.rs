use growthnet::applications::{
    bottleneck_marginal, fleet_min_customers, fleet_service_level, service_quadratic_residual,
    BottleneckSystem, FleetProblem,
};
use growthnet::exact::{marginal_filament, ExactConfig};
use proptest::prelude::*;

fn customers(load: f64, f: u64, alpha: f64) -> u64 {
    fleet_min_customers(&FleetProblem::new(load, f, alpha).unwrap())
        .unwrap()
        .customers
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fleet_size_is_monotone(
        load in 0.0f64..500.0,
        dload in 0.0f64..100.0,
        f in 1u64..50,
        df in 0u64..10,
        alpha in 0.01f64..0.98,
        dalpha in 0.0f64..0.019,
    ) {
        let base = customers(load, f, alpha);
        prop_assert!(customers(load + dload, f, alpha) >= base);
        prop_assert!(customers(load, f + df, alpha) >= base);
        prop_assert!(customers(load, f, alpha + dalpha) >= base);
    }

    #[test]
    fn service_level_root_is_valid(m in 1u64..100_000, load in 0.01f64..10_000.0, f in 1u64..1000) {
        let s = fleet_service_level(m, load, f).unwrap();
        let psi = s.psi.unwrap();
        prop_assert!(psi > 0.0 && psi < (load / m as f64).min(1.0));
        let scale = (m as f64 + f as f64 + load) * psi;
        prop_assert!(service_quadratic_residual(m, load, f, psi).abs() < 1e-10 * scale.max(1.0));
        prop_assert!((0.0..=1.0).contains(&s.alpha));
    }

    #[test]
    fn bottleneck_matches_translated_model(
        m in 1u64..=200,
        loads in prop::collection::vec(0.1f64..20.0, 1..=2),
        utils in prop::collection::vec(0.05f64..0.95, 1..=2),
    ) {
        let sys = BottleneckSystem::new(m, loads, utils.clone()).unwrap();
        let cfg = ExactConfig::default();
        for j in 0..utils.len() {
            let direct = bottleneck_marginal(&sys, j, &cfg).unwrap();
            let (model, class) = sys.translated_model(j).unwrap();
            let via = marginal_filament(&model, class, &cfg).unwrap();
            for l in 0..=m as usize {
                prop_assert!((direct.prob(l) - via.prob(l)).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn quadratic_residual_at_spec_sizes() {
    let m = customers(100.0, 10, 0.9);
    assert_eq!(m, 180);
    let s = fleet_service_level(m, 100.0, 10).unwrap();
    assert!(service_quadratic_residual(m, 100.0, 10, s.psi.unwrap()).abs() < 1e-10);
}

#[test]
fn exact_service_level_at_the_recommended_size() {
    let m = customers(100.0, 10, 0.9);
    let model = growthnet::NetworkModel::new(m, &[(100.0, 10)]).unwrap();
    let fil = marginal_filament(&model, 0, &ExactConfig::default()).unwrap();
    let alpha = fleet_service_level(m, 100.0, 10).unwrap().alpha;
    assert!((1.0 - fil.prob(0) - alpha).abs() < 0.03);
}

#[test]
fn ample_fleet_gives_open_network_law() {
    let utils = vec![0.3, 0.75];
    let probe = BottleneckSystem::new(1, vec![4.0], utils.clone()).unwrap();
    let m = (10.0 * probe.representation_mean()).ceil() as u64;
    let sys = BottleneckSystem::new(m, vec![4.0], utils.clone()).unwrap();
    for (j, rho) in utils.iter().enumerate() {
        let pmf = bottleneck_marginal(&sys, j, &ExactConfig::default()).unwrap();
        for l in 0..10 {
            let geo = (1.0 - rho) * rho.powi(l);
            assert!((pmf.prob(l as usize) - geo).abs() < 1e-4);
        }
    }
}
