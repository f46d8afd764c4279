use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use vsloc::io::{encode_maps, save_maps};
use vsloc::landmark::LandmarkMaps;

fn vsloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsloc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for entry in walk(dir) {
        out.insert(entry.strip_prefix(dir).unwrap().display().to_string());
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        }
        out.push(p);
    }
    out
}

/// gen-scene → gen-landmarks → render-maps → detect, in `dir`.
fn prepare(dir: &Path, camera: &str) {
    let steps: [&[&str]; 4] = [
        &["gen-scene", "--out", "scene", "--seed", "1"],
        &[
            "gen-landmarks",
            "--cloud",
            "scene/cloud.ply",
            "--patches",
            "patches.txt",
            "--landmarks",
            "landmarks.txt",
        ],
        &[
            "render-maps",
            "--cloud",
            "scene/cloud.ply",
            "--patches",
            "patches.txt",
            "--landmarks",
            "landmarks.txt",
            "--camera",
            camera,
            "--out",
            "maps.vsm",
        ],
        &["detect", "--maps", "maps.vsm", "--out", "detections.txt"],
    ];
    for args in steps {
        let o = vsloc(dir, args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn bench_loss_prints_the_reference_costs() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsloc(
        dir.path(),
        &[
            "bench-loss",
            "--height",
            "640",
            "--width",
            "480",
            "--classes",
            "5000",
            "--dim",
            "12",
            "--active",
            "100",
        ],
    );
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in [
        "36.9 GFLOPS",
        "5.7 GiB",
        "12.0 MFLOPS",
        "14.7 MFLOPS",
        "1.91 MiB",
        "1.17 MiB",
    ] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
}

#[test]
fn all_background_maps_are_a_pipeline_failure() {
    let dir = tempfile::tempdir().unwrap();
    save_maps(&dir.path().join("empty.vsm"), &LandmarkMaps::background(40, 50, 3)).unwrap();
    let o = vsloc(dir.path(), &["detect", "--maps", "empty.vsm", "--out", "d.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no landmarks detected"), "{}", stderr(&o));
    assert!(!dir.path().join("d.txt").exists());
}

#[test]
fn localize_recovers_the_true_pose() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path(), "scene/camera_04.txt");
    let o = vsloc(
        dir.path(),
        &[
            "localize",
            "--detections",
            "detections.txt",
            "--landmarks",
            "landmarks.txt",
            "--camera",
            "scene/camera_04.txt",
            "--truth",
            "scene/camera_04.txt",
            "--out",
            "pose.txt",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(key))
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or_else(|| panic!("no {key} in {text}"))
    };
    assert!(value("pos_err_m") < 1e-3);
    assert!(value("ang_err_deg") < 0.01);
    let pose = std::fs::read_to_string(dir.path().join("pose.txt")).unwrap();
    assert!(text.starts_with(&pose));
}

#[test]
fn nothing_is_written_outside_named_paths() {
    let dir = tempfile::tempdir().unwrap();
    prepare(dir.path(), "scene/camera_00.txt");
    let mut expected: BTreeSet<String> = ["scene", "patches.txt", "landmarks.txt", "maps.vsm", "detections.txt"]
        .into_iter()
        .map(String::from)
        .collect();
    expected.insert("scene/cloud.ply".into());
    for i in 0..10 {
        expected.insert(format!("scene/camera_{i:02}.txt"));
    }
    assert_eq!(files(dir.path()), expected);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["detect", "--frobnicate"],
        &["detect", "--maps", "missing.vsm", "--out", "d.txt"],
        &["detect", "--maps", "missing.vsm", "--out", "no/such/dir/d.txt"],
        &["bench-loss", "--classes", "ten"],
        &["nonsense"],
        &[],
    ];
    for args in cases {
        let o = vsloc(dir.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn config_files_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    save_maps(&dir.path().join("m.vsm"), &LandmarkMaps::background(8, 8, 1)).unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "em_radius = 10\nnot_a_key = 3\n").unwrap();
    let o = vsloc(
        dir.path(),
        &["detect", "--maps", "m.vsm", "--out", "d.txt", "--config", "bad.cfg"],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key 'not_a_key'"), "{}", stderr(&o));

    std::fs::write(dir.path().join("range.cfg"), "inlier_cos_thresh = 1.5\n").unwrap();
    let o = vsloc(
        dir.path(),
        &["detect", "--maps", "m.vsm", "--out", "d.txt", "--config", "range.cfg"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn printed_defaults_are_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsloc(dir.path(), &["--print-defaults"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in [
        "min_patch_px = 50",
        "min_support = 20",
        "em_radius = 30",
        "inlier_cos_thresh = 0.99",
        "reproj_thresh = 3",
        "margin = 0.2",
        "lambda = 1",
        "knn_k = 8",
        "dim = 12",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
    std::fs::write(dir.path().join("defaults.cfg"), &text).unwrap();
    save_maps(&dir.path().join("m.vsm"), &LandmarkMaps::background(8, 8, 1)).unwrap();
    let o = vsloc(
        dir.path(),
        &[
            "detect",
            "--maps",
            "m.vsm",
            "--out",
            "d.txt",
            "--config",
            "defaults.cfg",
        ],
    );
    // Accepted config; the all-background map then fails in the pipeline.
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_map_files_report_offsets() {
    let dir = tempfile::tempdir().unwrap();
    let mut bytes = encode_maps(&LandmarkMaps::background(4, 4, 2));
    bytes[0] = b'Z';
    std::fs::write(dir.path().join("bad.vsm"), &bytes).unwrap();
    let o = vsloc(dir.path(), &["detect", "--maps", "bad.vsm", "--out", "d.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("offset 0"), "{}", stderr(&o));

    let good = encode_maps(&LandmarkMaps::background(4, 4, 2));
    std::fs::write(dir.path().join("short.vsm"), &good[..good.len() - 5]).unwrap();
    let o = vsloc(dir.path(), &["detect", "--maps", "short.vsm", "--out", "d.txt"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains(&format!("expected {} bytes", good.len())), "{err}");
    assert!(err.contains(&format!("found {}", good.len() - 5)), "{err}");
}

#[test]
fn help_documents_units() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsloc(dir.path(), &["simulate", "--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in [
        "(pixels)",
        "(degrees)",
        "(meters)",
        "--vote-angle-sigma",
        "--min-inlier-frac",
        "--seed",
        "--threads",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
}

#[test]
fn losscheck_and_fit_toy_run_small_instances() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsloc(
        dir.path(),
        &[
            "losscheck",
            "--instances",
            "3",
            "--max-side",
            "6",
            "--labels",
            "5",
            "--dim",
            "4",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("instances 3"));

    let o = vsloc(
        dir.path(),
        &[
            "fit-toy", "--side", "24", "--steps", "40", "--knn-k", "4", "--out", "p.vsp", "--trace", "t.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let protos = vsloc::io::load_prototypes(&dir.path().join("p.vsp")).unwrap();
    assert_eq!(protos.dim, 12);
    let trace = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(trace.lines().count(), 41);
}

#[test]
fn simulate_writes_one_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let o = vsloc(
        dir.path(),
        &[
            "simulate",
            "--extent",
            "3",
            "--point-density",
            "200",
            "--camera-count",
            "2",
            "--patch-size",
            "0.3",
            "--trials",
            "3",
            "--dense",
            "--dense-noise-scale",
            "0.02",
            "--vote-angle-sigma",
            "1",
            "--out",
            "r.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], vsloc::sim::CSV_HEADER);
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[1].starts_with("lm@0,0,"));
    assert!(lines[4].starts_with("dense@0,0,"));
}
