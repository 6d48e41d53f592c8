use rwre::env::{DeltaLaw, EnvironmentSpec, IncrementLaw};
use rwre::experiment::{run_annealed, run_quenched, ExperimentConfig};
use rwre::Error;

fn config(n: u64, environments: usize) -> ExperimentConfig {
    serde_json::from_value(serde_json::json!({
        "environment": EnvironmentSpec {
            d: 2,
            increment_law: IncrementLaw::Rademacher,
            delta_law: DeltaLaw::Bernoulli { p: 0.5 },
            seed: 3,
        },
        "n": n,
        "environments": environments,
        "window": 4,
        "delta": 0.5,
        "epsilon": 0.2,
        "limit_samples": 60,
    }))
    .unwrap()
}

#[test]
fn quenched_fractions_are_consistent() {
    let mut cfg = config(200_000, 2);
    cfg.walks_per_environment = 2;
    let r = run_quenched(&cfg).unwrap();
    assert!(r.hard_checks_pass);
    assert_eq!(r.passed, 2);
    assert_eq!(r.replicas.len(), 4);
    assert_eq!(r.scanned, r.no_valley + r.scan_exceeded + r.an_failed + r.passed);
    for rep in &r.replicas {
        assert!((0.0..=1.0).contains(&rep.window_fraction));
    }
    let again = run_quenched(&cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&r).unwrap(),
        serde_json::to_string(&again).unwrap()
    );
}

#[test]
fn quenched_scan_budget_is_respected() {
    let mut cfg = config(200_000, 50);
    cfg.max_environment_scan = 3;
    let r = run_quenched(&cfg).unwrap();
    assert!(r.scanned <= 3);
    assert!(r.passed <= 3);
}

#[test]
fn annealed_reports_one_result_per_horizon() {
    let mut cfg = config(20_000, 20);
    cfg.horizons = vec![5_000, 20_000];
    let r = run_annealed(&cfg).unwrap();
    assert!(r.hard_checks_pass);
    assert!(r.cdfs_proper);
    assert_eq!(r.horizons.len(), 2);
    for h in &r.horizons {
        assert!((0.0..=1.0).contains(&h.ks));
        assert!(h.summary.max <= 1.0 && h.summary.min >= 0.0);
        assert_eq!(h.replicas.len(), 20);
    }
    // The closed form for Bernoulli offsets must match the general pipeline.
    assert!(r.closed_form.as_ref().unwrap().pass);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = config(10, 1);
    assert!(matches!(run_quenched(&cfg), Err(Error::InvalidConfig(_))));
    cfg.n = 100_000;
    cfg.delta = 1.5;
    assert!(matches!(run_annealed(&cfg), Err(Error::InvalidConfig(_))));
}
