use std::fs;

use spaghetto_core::output::{strip_timestamp, Metadata};
use spaghetto_core::scaling::{run_experiment, write_outputs, ExperimentKind, ExperimentResult, ExperimentSpec};
use spaghetto_core::Caps;

const SPEC: &str = r#"
kind = "ee_scaling"
q = ["3/2", "1", "2/3"]
l = [4, 6, 8, 10]
colors = [2]
samples = 4000
seed = 11
"#;

#[test]
fn experiment_file_to_artifacts_and_back() {
    let caps = Caps::default();
    let spec = ExperimentSpec::from_toml(SPEC).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let result = run_experiment(&spec, &caps).unwrap();
    let meta = Metadata::new("scaling", &spec).unwrap().with_seed(11);
    let (csv, js) = write_outputs(&result, ExperimentKind::EeScaling, dir.path(), &meta).unwrap();

    let ExperimentResult::EeScaling(ee) = &result else { panic!("wrong result kind") };
    assert_eq!(ee.rows.len(), 3 * 4);
    assert_eq!(ee.fits.len(), 3);
    // E[k] grows with L in every phase
    for q in &spec.q {
        let ys: Vec<f64> = ee.rows.iter().filter(|r| &r.q == q).map(|r| r.mean_k).collect();
        assert!(ys.windows(2).all(|w| w[1] > w[0]), "{q}: {ys:?}");
    }

    // replay from the embedded header only
    let text = fs::read_to_string(&csv).unwrap();
    let header = Metadata::from_csv_text(&text).unwrap();
    assert_eq!(header.seed, Some(11));
    let replay: ExperimentSpec = header.params_as().unwrap();
    assert_eq!(replay, spec);
    let again = run_experiment(&replay, &caps).unwrap();
    let other = tempfile::tempdir().unwrap();
    let (csv2, js2) = write_outputs(&again, ExperimentKind::EeScaling, other.path(), &meta).unwrap();
    for (a, b) in [(csv, csv2), (js, js2)] {
        assert_eq!(
            strip_timestamp(&fs::read_to_string(a).unwrap()),
            strip_timestamp(&fs::read_to_string(b).unwrap())
        );
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let err = ExperimentSpec::from_toml("kind = \"gap_scan\"\nsamplez = 3\n").unwrap_err();
    assert!(err.to_string().contains("samplez"), "{err}");
}
