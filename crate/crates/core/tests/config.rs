use eigenmatrix::harness::{Difficulty, ExperimentConfig, Scenario};

#[test]
fn every_scenario_config_round_trips() {
    for sc in Scenario::ALL {
        for d in [Difficulty::Easy, Difficulty::Hard] {
            let cfg = ExperimentConfig::scenario(sc, d);
            cfg.validate().unwrap();
            let text = serde_json::to_string_pretty(&cfg).unwrap();
            let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
            assert_eq!(back, cfg, "{sc} {d:?}");
            assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
        }
    }
}

#[test]
fn omitted_keys_take_defaults() {
    let full = serde_json::to_value(ExperimentConfig::scenario(Scenario::Deconv, Difficulty::Easy)).unwrap();
    let mut minimal = full.clone();
    let obj = minimal.as_object_mut().unwrap();
    for key in ["seed", "n_a", "auto_n_a", "norm_bound", "estimator", "refine", "trials"] {
        obj.remove(key);
    }
    let cfg: ExperimentConfig = serde_json::from_value(minimal).unwrap();
    assert_eq!(serde_json::to_value(&cfg).unwrap(), full);
}

#[test]
fn malformed_configs_are_rejected() {
    assert!(serde_json::from_str::<ExperimentConfig>("{\"name\": 3}").is_err());
    let mut cfg = ExperimentConfig::scenario(Scenario::Fourier, Difficulty::Easy);
    cfg.trials = 0;
    assert!(cfg.validate().is_err());
}
