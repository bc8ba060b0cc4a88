use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use plane_diffusion::io::{read_depth_png, read_float_map};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plane-diffusion"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn invoke(args: &[&str], config: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

/// (variant, rmse) of every data row.
fn rows(out: &Path) -> Vec<(String, f64)> {
    let text = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scene,variant,kernel,iterations,seeds,noise,rmse,mae,irmse,imae,rel,d1,d2,d3,pixels"
    );
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 15, "{l}");
            (f[1].to_string(), f[6].parse().unwrap())
        })
        .collect()
}

#[test]
fn zero_iterations_reproduce_coarse_depth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scenes": ["single-plane"], "diffusion": {"iterations": 0}, "write_images": false}"#,
    );
    let out = dir.path().join("out");
    let o = invoke(&["ablate", "--quiet"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out);
    let full = r.iter().find(|(v, _)| v == "full").unwrap().1;
    let coarse = r.iter().find(|(v, _)| v == "w/o-refinement").unwrap().1;
    assert!((full - coarse).abs() <= 1e-6, "{full} vs {coarse}");
}

#[test]
fn iteration_sweep_gives_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scenes": ["single-plane"], "write_images": false,
            "sweeps": [{"parameter": "diffusion.iterations", "values": [1, 2, 4, 8, 16]}]}"#,
    );
    let out = dir.path().join("out");
    let o = invoke(&["sweep"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&out);
    assert_eq!(r.len(), 5);
    assert_eq!(r[0].0, "full@diffusion.iterations=1");
    assert!(r.windows(2).all(|w| w[1].1 <= w[0].1), "{r:?}");
}

#[test]
fn seed_ratio_sweep_degrades_monotonically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scenes": ["wedge"], "write_images": false,
            "sweeps": [{"parameter": "sampling.ratio", "values": [0.05, 0.025, 0.01, 0.005]}]}"#,
    );
    let out = dir.path().join("out");
    let o = invoke(&["sweep", "--quiet"], &cfg, &out);
    assert!(o.status.success());
    let r = rows(&out);
    assert_eq!(r.len(), 4);
    assert!(r.windows(2).all(|w| w[1].1 >= w[0].1), "{r:?}");
}

#[test]
fn run_writes_maps_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"scenes": ["box-on-ground"]}"#);
    let out = dir.path().join("out");
    let o = invoke(&["run"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("box-on-ground"), "{stdout}");

    let maps = out.join("maps").join("p000_box-on-ground");
    let truth = read_float_map(maps.join("truth.pdfm")).unwrap();
    let png = read_depth_png(maps.join("truth.png")).unwrap();
    assert_eq!((png.width(), png.height()), (128, 96));
    for i in 0..truth.len() {
        assert!((png[i] - truth[i]).abs() <= 0.5 / 256.0 + 1e-6);
    }
    for f in [
        "coarse.png",
        "seeds.png",
        "confidence.png",
        "refined_full.png",
        "refined_full.pdfm",
    ] {
        assert!(maps.join(f).is_file(), "{f}");
    }
}

#[test]
fn same_seed_is_byte_identical_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scenes": ["staircase"], "noise": {"outlier_frac": 0.1}, "write_images": false, "seed": 3}"#,
    );
    let csv = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["ablate", "--quiet"];
        args.extend_from_slice(extra);
        assert!(invoke(&args, &cfg, &out).status.success());
        fs::read(out.join("metrics.csv")).unwrap()
    };
    let a = csv("a", &[]);
    let b = csv("b", &[]);
    let c = csv("c", &["--seed", "4"]);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn quiet_suppresses_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scenes": ["wedge"], "write_images": false}"#,
    );
    let o = invoke(&["run", "--quiet"], &cfg, &dir.path().join("out"));
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert!(o.stderr.is_empty());
}

#[test]
fn malformed_config_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        "{\n  \"seed\": 1,\n  \"diffusion\": {\"kernel\": 4,}\n}\n",
    );
    let o = invoke(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
}

#[test]
fn invalid_values_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"diffusion": {"kernel": 4}}"#);
    let o = invoke(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("kernel"));
}

#[test]
fn unknown_keys_only_warn() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scenes": ["single-plane"], "write_images": false, "diffusion": {"iteratons": 2}}"#,
    );
    let o = invoke(&["run"], &cfg, &dir.path().join("out"));
    assert!(o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("diffusion.iteratons"), "{err}");
}

#[test]
fn sweep_without_declared_sweeps_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"scenes": ["wedge"]}"#);
    let o = invoke(&["sweep"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no sweeps"));
}

#[test]
fn pipeline_failure_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"scenes": ["wedge"], "sampling": {"count": 1000000}, "write_images": false}"#,
    );
    let o = invoke(&["run"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sample failed"), "{err}");
}

#[test]
fn missing_config_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke(
        &["run"],
        &dir.path().join("nope.json"),
        &dir.path().join("out"),
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let loaded = plane_diffusion::load_config(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!(
                loaded.warnings.is_empty(),
                "{}: {:?}",
                path.display(),
                loaded.warnings
            );
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
