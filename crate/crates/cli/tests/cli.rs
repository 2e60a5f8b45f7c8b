use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn gcs(args: &[&str], bundle: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gcs"));
    cmd.args(args)
        .env("RUST_LOG", "error")
        .env_remove("GCS_BUNDLE_DIR");
    if let Some(b) = bundle {
        cmd.env("GCS_BUNDLE_DIR", b);
    }
    cmd.output().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_design(dir: &Path, name: &str, design: Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, design.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

fn cylinder() -> Value {
    json!({
        "c4_base": 0.0, "c4_top": 0.0, "c8_base": 0.0, "c8_top": 0.0,
        "linear_twist": 0.0, "osc_twist_amplitude": 0.0, "osc_twist_cycles": 0.0,
        "perimeter_ratio": 1.0, "mass": 2.0, "height": 20.0, "thickness": 0.6,
        "material": "PLA"
    })
}

#[test]
fn help_lists_every_subcommand() {
    let out = gcs(&["--help"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in [
        "synth",
        "ingest",
        "filter",
        "pca-fit",
        "train-forward",
        "train-inverse",
        "eval",
        "sweep-alpha",
        "predict",
        "invert",
        "mesh",
        "printability",
        "optimize-impact",
        "emulate",
        "serve",
    ] {
        assert!(text.contains(sub), "missing {sub}");
    }
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(gcs(&["predict", "--bogus"], None).status.code(), Some(1));
    assert_eq!(gcs(&["invert"], None).status.code(), Some(1));
}

#[test]
fn printability_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_design(dir.path(), "good.json", cylinder());
    let v = ok_json(&gcs(&["--json", "printability", "--design", &good], None));
    assert_eq!(v["printable"], json!(true));

    let mut bad = cylinder();
    bad["mass"] = json!(9.0);
    let bad = write_design(dir.path(), "bad.json", bad);
    let out = gcs(&["printability", "--design", &bad], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mass"));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{").unwrap();
    assert_eq!(
        gcs(
            &["printability", "--design", broken.to_str().unwrap()],
            None
        )
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn mesh_triangle_count_and_shared_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let design = write_design(dir.path(), "cyl.json", cylinder());
    let stl = dir.path().join("c.stl");
    let out = gcs(
        &[
            "--json",
            "mesh",
            "--design",
            &design,
            "--stl",
            stl.to_str().unwrap(),
            "--z-slices",
            "5",
            "--phi-samples",
            "32",
        ],
        None,
    );
    let v = ok_json(&out);
    assert_eq!(v["triangles"], json!(2 * (5 - 1) * 32));
    assert_eq!(std::fs::metadata(&stl).unwrap().len(), 84 + 50 * 256);

    let out = gcs(
        &["mesh", "--design", &design, "--stl", stl.to_str().unwrap()],
        None,
    );
    assert!(out.status.success());
    let d: gcs_core::design::GcsDesign = serde_json::from_value(cylinder()).unwrap();
    let shared =
        gcs_core::geometry::design_stl(&d, &gcs_core::design::DensityTable::default()).unwrap();
    assert_eq!(std::fs::read(&stl).unwrap(), shared);
}

#[test]
fn missing_bundle_is_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let design = write_design(dir.path(), "cyl.json", cylinder());
    let out = gcs(
        &["predict", "--design", &design],
        Some(&dir.path().join("none")),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("GCS_BUNDLE_DIR"));
}

fn train_bundle(data: &str, bundle: &Path) -> (Value, Value) {
    let b = bundle.to_str().unwrap();
    let f = ok_json(&gcs(
        &[
            "--json",
            "--seed",
            "7",
            "--bundle",
            b,
            "train-forward",
            "--data",
            data,
            "--epochs",
            "3",
        ],
        None,
    ));
    let i = ok_json(&gcs(
        &[
            "--json",
            "--bundle",
            b,
            "train-inverse",
            "--data",
            data,
            "--alpha",
            "0,1",
            "--epochs",
            "3",
        ],
        None,
    ));
    (f, i)
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let data_s = data.to_str().unwrap();
    let v = ok_json(&gcs(
        &[
            "--json",
            "--seed",
            "3",
            "synth",
            "--out",
            data_s,
            "--samples",
            "80",
            "--raw-points",
            "50",
        ],
        None,
    ));
    assert_eq!(v["records"], json!(80));

    let filtered = dir.path().join("filtered");
    let v = ok_json(&gcs(
        &[
            "--json",
            "filter",
            "--data",
            data_s,
            "--out",
            filtered.to_str().unwrap(),
            "--min-count",
            "1",
        ],
        None,
    ));
    assert_eq!(v["after"], json!(80));

    let ingested = dir.path().join("ingested");
    let v = ok_json(&gcs(
        &[
            "--json",
            "ingest",
            "--manifest",
            data.join("manifest.json").to_str().unwrap(),
            "--out",
            ingested.to_str().unwrap(),
        ],
        None,
    ));
    assert_eq!(v["accepted"], json!(80));
    assert_eq!(v["after_filter"]["records"], json!(0));

    let pca = dir.path().join("pca.json");
    let v = ok_json(&gcs(
        &[
            "--json",
            "pca-fit",
            "--data",
            data_s,
            "--out",
            pca.to_str().unwrap(),
        ],
        None,
    ));
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 10);

    let bundle = dir.path().join("bundle");
    let (f1, i1) = train_bundle(data_s, &bundle);
    let (f2, i2) = train_bundle(data_s, &dir.path().join("bundle2"));
    assert_eq!(
        (f1["history"].clone(), i1["trained"].clone()),
        (f2["history"].clone(), i2["trained"].clone())
    );
    assert_eq!(i1["alphas"], json!([0.0, 1.0]));

    let design = write_design(dir.path(), "cyl.json", cylinder());
    let out = gcs(&["--json", "predict", "--design", &design], Some(&bundle));
    let v = ok_json(&out);
    assert_eq!(v["performance"].as_array().unwrap().len(), 11);
    assert_eq!(v["curve"]["forces"].as_array().unwrap().len(), 100);
    assert!(v["metrics"].get("work").is_some());
    assert_eq!(
        gcs(&["--json", "predict", "--design", &design], Some(&bundle)).stdout,
        out.stdout
    );

    let curve = dir.path().join("curve.csv");
    std::fs::write(&curve, "displacement_mm,force_n\n0,0\n2,30\n4,45\n8,50\n").unwrap();
    let curve = curve.to_str().unwrap();
    let v = ok_json(&gcs(
        &["--json", "invert", "--curve", curve, "--alpha", "1"],
        Some(&bundle),
    ));
    let d: gcs_core::design::GcsDesign = serde_json::from_value(v["design"].clone()).unwrap();
    d.validate().unwrap();
    assert!(v["printability"].get("printable").is_some());
    assert_eq!(
        gcs(
            &["invert", "--curve", curve, "--alpha", "0.5"],
            Some(&bundle)
        )
        .status
        .code(),
        Some(1)
    );

    let v = ok_json(&gcs(
        &["--json", "emulate", "--curve", curve],
        Some(&bundle),
    ));
    assert!(v.get("warnings").is_some());

    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        json!({"force_threshold": 10.0, "target_energy": 0.0735, "ramp_stiffness": [5.0],
               "plateau_fraction": [0.8, 1.0], "max_displacement": [8.0], "safety_margin": 0.9})
        .to_string(),
    )
    .unwrap();
    let v = ok_json(&gcs(
        &[
            "--json",
            "optimize-impact",
            "--spec",
            spec.to_str().unwrap(),
            "--candidates",
        ],
        Some(&bundle),
    ));
    assert_eq!(v["candidate_log"].as_array().unwrap().len(), 2);

    let a = gcs(
        &[
            "--json", "--seed", "1", "eval", "--data", data_s, "--runs", "2", "--epochs", "2",
        ],
        None,
    );
    let b = gcs(
        &[
            "--json",
            "--seed",
            "1",
            "--sequential",
            "eval",
            "--data",
            data_s,
            "--runs",
            "2",
            "--epochs",
            "2",
        ],
        None,
    );
    let v = ok_json(&a);
    assert_eq!(v["runs"], json!(2));
    assert_eq!(a.stdout, b.stdout);

    let v = ok_json(&gcs(
        &[
            "--json",
            "sweep-alpha",
            "--data",
            data_s,
            "--runs",
            "2",
            "--epochs",
            "2",
            "--alphas",
            "0,1",
        ],
        None,
    ));
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
}
