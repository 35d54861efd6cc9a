//! End-to-end tests of the `moatline` binary: exit codes, manifest
//! output, determinism of artifacts.

use std::path::Path;
use std::process::{Command, Output};

fn moatline(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moatline"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn value_of<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

#[test]
fn measure_reports_site_length() {
    let out = moatline(&[
        "measure",
        "--a",
        "100,100",
        "--b",
        "437,100",
        "--zoom",
        "16",
        "--lat",
        "41.766927",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let d: f64 = value_of(&text, "distance_m").expect("distance line").parse().unwrap();
    assert!((d - 600.0).abs() <= 6.0, "337 px at z16 should be ~600 m, got {d}");
}

#[test]
fn enhance_first_order_ramp_is_constant_interior() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ramp.pgm");
    let output = dir.path().join("enhanced.png");
    // 32x8 horizontal ramp, 8 gray levels per column step.
    let mut pgm = b"P5\n32 8\n255\n".to_vec();
    for _y in 0..8 {
        for x in 0..32u32 {
            pgm.push((x * 8) as u8);
        }
    }
    std::fs::write(&input, pgm).unwrap();

    let out = moatline(&[
        "enhance",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
        "--nu",
        "1",
        "--window",
        "1",
        "--boundary",
        "replicate",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let enhanced = moatline::read_image(&output).unwrap().into_gray();
    let reference = enhanced.get(5, 4);
    assert!(reference > 0.0);
    for y in 0..8 {
        for x in 2..31 {
            assert_eq!(enhanced.get(x, y), reference, "({x},{y})");
        }
    }
}

#[test]
fn synth_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.png");
    let b = dir.path().join("b.png");
    for path in [&a, &b] {
        let out = moatline(&[
            "synth",
            "--seed",
            "7",
            "--output",
            path.to_str().unwrap(),
            // A small scene keeps this test quick.
            "synth.extent_m=1200",
            "synth.satellite_ring_m=420",
            "synth.satellite.0.shape=triangle",
            "synth.satellite.0.size_m=90",
            "synth.hill.major_m=300",
            "synth.hill.minor_m=250",
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn two_input_sources_fail_validation_naming_both() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.conf");
    std::fs::write(&config, "input.file=image.png\ninput.synth=true\n").unwrap();
    let out = moatline(&["run", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("input.file"), "{err}");
    assert!(err.contains("input.synth"), "{err}");
}

#[test]
fn missing_input_file_exits_with_io_code() {
    let out = moatline(&[
        "enhance",
        "--input",
        "/nonexistent/nothing.png",
        "--output",
        "/tmp/unused-moatline.png",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn unreachable_endpoint_exits_with_network_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = moatline(&[
        "stitch",
        "--endpoint",
        "http://127.0.0.1:1/{z}/{x}/{y}.png",
        "--bbox",
        "41.76,100.72,41.78,100.75",
        "--zoom",
        "10",
        "--output",
        dir.path().join("mosaic.png").to_str().unwrap(),
        "--cache",
        dir.path().join("cache").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn full_run_manifest_and_artifact_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let run_once = |tag: &str| -> (String, Vec<u8>, Vec<u8>) {
        let base = dir.path().join(tag);
        std::fs::create_dir_all(&base).unwrap();
        let config = base.join("run.conf");
        std::fs::write(
            &config,
            format!(
                "input.synth=true\nsynth.seed=5\noutput.merged={}\noutput.geojson={}\n",
                base.join("merged.png").display(),
                base.join("sites.geojson").display()
            ),
        )
        .unwrap();
        let out = moatline(&["run", "--config", config.to_str().unwrap()]);
        assert!(out.status.success(), "{}", stderr(&out));
        (
            stdout(&out),
            std::fs::read(base.join("merged.png")).unwrap(),
            std::fs::read(base.join("sites.geojson")).unwrap(),
        )
    };
    let (manifest_a, merged_a, geojson_a) = run_once("a");
    let (manifest_b, merged_b, geojson_b) = run_once("b");

    assert_eq!(value_of(&manifest_a, "sites"), Some("6"), "{manifest_a}");
    assert_eq!(value_of(&manifest_a, "stage.1"), Some("acquire"));
    assert!(manifest_a.contains("stage.5=merge"), "{manifest_a}");
    // Stage logs and measurements are identical; artifacts byte-identical.
    let strip_paths = |text: &str| -> String {
        text.lines()
            .filter(|l| !l.starts_with("output."))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip_paths(&manifest_a), strip_paths(&manifest_b));
    assert_eq!(merged_a, merged_b);
    assert_eq!(geojson_a, geojson_b);
}

#[test]
fn flag_overrides_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "input.synth=true\nsynth.seed=5\nfrac.nu=0.5\n").unwrap();
    // An out-of-range override must be rejected, proving the flag wins.
    let out = moatline(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--frac-nu",
        "7.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("frac.nu"), "{}", stderr(&out));
}

#[test]
fn vectorize_traces_a_mask_into_geojson() {
    let dir = tempfile::tempdir().unwrap();
    let mask_path = dir.path().join("mask.pgm");
    let geojson_path = dir.path().join("sites.geojson");
    // A 30x30 solid square inside a 64x64 mask.
    let mut pgm = b"P5\n64 64\n255\n".to_vec();
    for y in 0..64u32 {
        for x in 0..64u32 {
            pgm.push(if (16..46).contains(&x) && (16..46).contains(&y) {
                255
            } else {
                0
            });
        }
    }
    std::fs::write(&mask_path, pgm).unwrap();

    let out = moatline(&[
        "vectorize",
        "--input",
        mask_path.to_str().unwrap(),
        "--output",
        geojson_path.to_str().unwrap(),
        "--min-area",
        "10",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(value_of(&text, "sites"), Some("1"), "{text}");
    // Default georef reads one pixel as one meter: 30 x 30 px = 900 m^2.
    let area: f64 = value_of(&text, "site.1.area_m2").unwrap().parse().unwrap();
    assert!((area - 900.0).abs() < 5.0, "{area}");
    let geojson = std::fs::read_to_string(&geojson_path).unwrap();
    assert!(geojson.contains("FeatureCollection"));
}

#[test]
fn edges_and_merge_compose() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("step.pgm");
    let mut pgm = b"P5\n16 8\n255\n".to_vec();
    for _y in 0..8 {
        for x in 0..16u32 {
            pgm.push(if x >= 8 { 255 } else { 0 });
        }
    }
    std::fs::write(&input, pgm).unwrap();

    let edges_out = dir.path().join("edges.png");
    let out = moatline(&[
        "edges",
        "--input",
        input.to_str().unwrap(),
        "--output",
        edges_out.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let merged_out = dir.path().join("merged.png");
    let out = moatline(&[
        "merge",
        "--base",
        edges_out.to_str().unwrap(),
        "--overlay",
        input.to_str().unwrap(),
        "--output",
        merged_out.to_str().unwrap(),
        "--mode",
        "max",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let merged = moatline::read_image(&merged_out).unwrap().into_gray();
    let edges = moatline::read_image(&edges_out).unwrap().into_gray();
    let base = moatline::read_image(&input).unwrap().into_gray();
    for y in 0..8 {
        for x in 0..16 {
            assert_eq!(merged.get(x, y), edges.get(x, y).max(base.get(x, y)));
        }
    }
}

#[test]
fn synth_write_spec_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("scene.conf");
    let out = moatline(&[
        "synth",
        "--seed",
        "3",
        "--write-spec",
        spec_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&spec_path).unwrap();
    assert!(text.contains("input.synth=true"));
    assert!(text.contains("synth.hill.major_m=600"));
    assert!(text.contains("synth.satellite.4.shape=quad"));

    // The written spec is a valid run config.
    let out = moatline(&["run", "--config", spec_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(value_of(&stdout(&out), "sites"), Some("6"));
    let _ = Path::new("unused");
}
