use std::path::Path;

use hamflow::config::{schema_json, BatchConfig, ExperimentKind, HamiltonianSpec, WeightSpec};
use hamflow::Error;

const MINIMAL: &str = r#"{"experiments": [{
    "name": "flat",
    "hamiltonian": {"name": "euclidean", "dim": 2},
    "experiment": {"kind": "curvature", "states": [{"x": [0, 0], "alpha": [1, 0]}]}
}]}"#;

#[test]
fn published_schema_is_current() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/config.schema.json");
    let on_disk = std::fs::read_to_string(&path).unwrap();
    assert!(on_disk == schema_json(), "regenerate with `hamflow --print-schema > {}`", path.display());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            BatchConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn defaults_fill_in() {
    let cfg = BatchConfig::from_json(MINIMAL).unwrap();
    let e = &cfg.experiments[0];
    assert_eq!(e.weight, WeightSpec::Constant(0.0));
    assert_eq!(e.seed, 0);
    assert_eq!(e.tolerances.residual, 1e-4);
    assert_eq!(e.hamiltonian, HamiltonianSpec::Euclidean { dim: 2 });
    match &e.experiment {
        ExperimentKind::Curvature { ns, .. } => assert!(ns.is_empty()),
        k => panic!("{k:?}"),
    }
}

#[test]
fn round_trips_through_json() {
    let cfg = BatchConfig::from_json(MINIMAL).unwrap();
    let again = BatchConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(again.experiments[0].experiment, cfg.experiments[0].experiment);
}

fn rejects(text: &str) -> Error {
    let e = BatchConfig::from_json(text).unwrap_err();
    assert_eq!(e.exit_code(), 2, "{e}");
    e
}

#[test]
fn invalid_configs_are_config_errors() {
    rejects(&MINIMAL.replace("\"name\": \"flat\"", "\"name\": \"flat\", \"colour\": 1"));
    rejects(&MINIMAL.replace("\"dim\": 2", "\"dim\": 2, \"extra\": true"));
    rejects(&MINIMAL.replace("curvature", "curvatures"));
    rejects(&MINIMAL.replace("flat", "no spaces"));
    rejects(r#"{"experiments": []}"#);
    rejects("{");
    let mut twice: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
    let first = twice["experiments"][0].clone();
    twice["experiments"].as_array_mut().unwrap().push(first);
    assert!(rejects(&twice.to_string()).to_string().contains("duplicate"));
    let tol = MINIMAL.replace("\"experiment\":", "\"tolerances\": {\"residual\": 0}, \"experiment\":");
    assert!(rejects(&tol).to_string().contains("tolerances"));
}
