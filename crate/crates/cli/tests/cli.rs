use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spaghetto(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spaghetto"))
        .args(args)
        .env("SPAGHETTO_OUT", out)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn strip_timestamps(text: &str) -> String {
    text.lines().filter(|l| !l.contains("timestamp")).collect::<Vec<_>>().join("\n")
}

#[test]
fn count_of_bicolor_length_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = spaghetto(dir.path(), &["count", "--n", "4", "--colors", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    // FFFF; one arc among two flats has 6 placements, 2 colors each; two arcs: UUDD, UDUD, 4 colorings each
    assert_eq!(stdout(&o).trim(), (1 + 6 * 2 + 2 * 4).to_string());
}

#[test]
fn count_matches_listing() {
    let dir = tempfile::tempdir().unwrap();
    let o = spaghetto(dir.path(), &["enumerate", "--n", "6", "--output", "paths.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    let c = spaghetto(dir.path(), &["count", "--n", "6"]);
    assert_eq!(stdout(&c).trim(), rows.to_string());
}

#[test]
fn ee_on_smallest_lattice_writes_von_neumann() {
    let dir = tempfile::tempdir().unwrap();
    let o = spaghetto(dir.path(), &["ee", "--L", "2", "--a", "0", "--q", "1", "--colors", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read_json(&dir.path().join("ee.json"));
    let s = report["S_vN"].as_f64().expect("S_vN field");
    assert_eq!(report["n"], 8);
    assert_eq!(report["mask"], "AAAABBBB");

    // Shannon entropy of the written spectrum
    let text = fs::read_to_string(dir.path().join("ee_spectrum.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let p: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    assert!((s - h).abs() < 1e-9, "{s} vs {h}");
    // at least the color entropy of the crossing arcs
    let ek = report["mean_crossings"].as_f64().unwrap();
    assert!(s >= 2f64.ln() * ek - 1e-12);
}

#[test]
fn artifacts_embed_parameters_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let o = spaghetto(dir.path(), &["--seed", "77", "sample", "--n", "10", "--q", "3/2", "--samples", "50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let js = read_json(&dir.path().join("sample.json"));
    assert_eq!(js["meta"]["seed"], 77);
    assert_eq!(js["meta"]["params"]["args"]["samples"], 50);
    assert!(js["meta"]["version"].is_string());
    assert!(js["meta"]["timestamp"].is_string());
    let csv = fs::read_to_string(dir.path().join("sample.csv")).unwrap();
    assert!(csv.contains("# seed: 77"));
}

#[test]
fn rerun_reproduces_content() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "5", "sample", "--n", "12", "--q", "1", "--colors", "2", "--samples", "200"];
    assert!(spaghetto(a.path(), &args).status.success());
    assert!(spaghetto(b.path(), &args).status.success());
    for f in ["sample.csv", "sample.json"] {
        let x = fs::read_to_string(a.path().join(f)).unwrap();
        let y = fs::read_to_string(b.path().join(f)).unwrap();
        assert_eq!(strip_timestamps(&x), strip_timestamps(&y), "{f}");
    }
}

#[test]
fn scaling_from_experiment_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("exp.toml");
    fs::write(&spec, "kind = \"gap_scan\"\nq = [\"1\"]\nn = [4, 5, 6, 7]\ncolors = [1]\noutput = \"gaps\"\n").unwrap();
    let o = spaghetto(dir.path(), &["scaling", "--experiment", spec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let js = read_json(&dir.path().join("gaps/gap_scan.json"));
    assert_eq!(js["meta"]["params"]["kind"], "gap_scan");
    assert!(dir.path().join("gaps/gap_scan.csv").exists());
}

#[test]
fn geometry_svg_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = spaghetto(dir.path(), &["geometry", "--L", "6", "--a", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let svg = fs::read_to_string(dir.path().join("geometry_L6.svg")).unwrap();
    assert_eq!(svg.matches("class=\"edge\"").count(), 6 * 8);
    let o = spaghetto(dir.path(), &["geometry", "--L", "6", "--format", "csv", "--output", "g.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 48);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["count", "--n", "4", "--bogus"],
        &["count", "--n", "4", "--colors", "3"],
        &["ee", "--n", "6", "--q", "not-a-number"],
        &["geometry", "--L", "4", "--output", "../escape.svg"],
        &["geometry", "--L", "5"],
    ] {
        let o = spaghetto(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
    assert!(!dir.path().parent().unwrap().join("escape.svg").exists());
}

#[test]
fn cap_violation_exits_3_and_names_cap() {
    let dir = tempfile::tempdir().unwrap();
    let o = spaghetto(dir.path(), &["enumerate", "--n", "30"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("enumerate_colorless"), "{}", stderr(&o));
    let o = spaghetto(dir.path(), &["--max-ed-dimension", "100", "ed", "--n", "6", "--q", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("ed_dimension"), "{}", stderr(&o));
}

#[test]
fn solver_failure_exits_4_with_residual() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "[solver]\nmax_restarts = 1\ntol = 1e-300\ndense_limit = 10\nrefine_limit = 10\n").unwrap();
    let o = spaghetto(dir.path(), &["--config", cfg.to_str().unwrap(), "ed", "--n", "8", "--q", "1"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("residual"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "seed = 9\n[caps]\nenumerate_colorless = 4\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = spaghetto(dir.path(), &["--config", c, "enumerate", "--n", "6"]);
    assert_eq!(o.status.code(), Some(3));
    let o = spaghetto(dir.path(), &["--config", c, "--max-enumerate", "8", "enumerate", "--n", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = spaghetto(dir.path(), &["--config", c, "--seed", "10", "count", "--n", "3", "--output", "c.json"]);
    assert!(o.status.success());
    assert_eq!(read_json(&dir.path().join("c.json"))["meta"]["seed"], 10);
}

#[test]
fn selftest_quick_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = spaghetto(dir.path(), &["selftest", "--criteria", "2,9"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    let lines: Vec<_> = stdout(&o).lines().filter(|l| l.contains("criterion")).map(str::to_owned).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.starts_with("PASS")));
}

#[test]
fn groundstate_exact_and_log_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut p = Vec::new();
    for mode in ["log_domain", "exact_rational"] {
        let name = format!("gs_{mode}");
        let o = spaghetto(
            dir.path(),
            &["--numeric-mode", mode, "groundstate", "--n", "6", "--q", "2", "--path", "UUFDDF", "--name", &name],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        p.push(read_json(&dir.path().join(format!("{name}.json")))["path_probability"].as_f64().unwrap());
    }
    assert!((p[0] - p[1]).abs() < 1e-12 * p[1]);
    // Born weight q^{2A} = q^{doubled area}; UUFDDF has doubled area 1+3+4+3+1
    let z: f64 = doubled_areas(6).iter().map(|&a| 2f64.powi(a)).sum();
    assert!((p[0] - 2f64.powi(12) / z).abs() < 1e-12);
}

/// Doubled trapezoid areas of every colorless path of length `n`.
fn doubled_areas(n: usize) -> Vec<i32> {
    fn walk(left: usize, h: i32, area: i32, out: &mut Vec<i32>) {
        if left == 0 {
            if h == 0 {
                out.push(area);
            }
            return;
        }
        for d in [-1, 0, 1] {
            let next = h + d;
            if next >= 0 && (next as usize) < left {
                walk(left - 1, next, area + h + next, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(n, 0, 0, &mut out);
    out
}

#[test]
fn reference_page_is_current() {
    let page = spaghetto_cli::reference::render();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/cli.md");
    if std::env::var_os("UPDATE_REFERENCE").is_some() {
        fs::write(&path, &page).unwrap();
    }
    let on_disk = fs::read_to_string(&path).expect("docs/cli.md exists; regenerate with UPDATE_REFERENCE=1");
    assert_eq!(on_disk, page, "docs/cli.md is stale; regenerate with UPDATE_REFERENCE=1");
}

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let o = spaghetto(dir.path(), &["--help"]);
    assert!(o.status.success());
    let help = stdout(&o);
    for sub in ["count", "enumerate", "groundstate", "ed", "ee", "sample", "scaling", "geometry", "selftest"] {
        assert!(help.contains(sub), "{sub}");
    }
}
