//! End-to-end tests of the binary: figure scenarios, diagnostics checks,
//! exit codes and deterministic output.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lrkit")
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

#[test]
fn figure_scenarios_pass_their_expectations() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["fig2", "fig5", "fig6", "fig8"] {
        let scn = scenarios().join(format!("{name}.scn"));
        let out_file = dir.path().join(format!("{name}.lrsp"));
        let out = run(&[
            "refine",
            scn.to_str().unwrap(),
            "-o",
            out_file.to_str().unwrap(),
        ]);
        assert_eq!(
            code(&out),
            0,
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out_file.exists());
    }
}

#[test]
fn check_reports_pass_on_tensor_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("fig8.lrsp");
    run(&[
        "refine",
        scenarios().join("fig8.scn").to_str().unwrap(),
        "-o",
        out_file.to_str().unwrap(),
    ]);
    let out = run(&["check", out_file.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert!(stdout.contains("independence: Independent"));
    assert!(stdout.contains("verdict: pass"));
    // the env override thins the sampling grid but keeps the verdict
    let out = Command::new(bin())
        .args(["check", out_file.to_str().unwrap()])
        .env("LRKIT_SAMPLES", "5")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}

#[test]
fn check_fails_on_a_corrupted_document() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("fig8.lrsp");
    run(&[
        "refine",
        scenarios().join("fig8.scn").to_str().unwrap(),
        "-o",
        out_file.to_str().unwrap(),
    ]);
    // drop one record so the collection loses a member
    let text = std::fs::read_to_string(&out_file).unwrap();
    let dropped = text.replacen("records 54", "records 53", 1);
    let first = dropped.find("record\n").unwrap();
    let end = dropped[first..].find("end\n").unwrap() + first + 4;
    let broken = format!("{}{}", &dropped[..first], &dropped[end..]);
    let broken_file = dir.path().join("broken.lrsp");
    std::fs::write(&broken_file, broken).unwrap();
    let out = run(&["check", broken_file.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn parse_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.lrsp");
    std::fs::write(&junk, "not a document").unwrap();
    let out = run(&["check", junk.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    // unknown flags are usage errors
    let out = run(&["check", "--definitely-not-a-flag"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn structured_scenarios_verify_independence() {
    let dir = tempfile::tempdir().unwrap();
    let scn = dir.path().join("structured.scn");
    std::fs::write(
        &scn,
        r#"
[space]
degrees = [3, 3]
domain = [[0.0, 4.0], [0.0, 4.0]]
cells = [4, 4]

[[step]]
method = "structured"
select = [24]

[expect]
independent = true
pou_max = 1e-10
"#,
    )
    .unwrap();
    let out_file = dir.path().join("structured.lrsp");
    let out = run(&["refine", scn.to_str().unwrap(), "-o", out_file.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let check = run(&["check", out_file.to_str().unwrap()]);
    assert_eq!(code(&check), 0);
}

#[test]
fn compare_prints_the_growth_table() {
    let out = run(&["compare", scenarios().join("compare5.scn").to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("LR"));
    assert!(stdout.contains("HB"));
    // the hierarchical count dominates in the last row
    let last = stdout.lines().last().unwrap();
    let nums: Vec<usize> = last
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    assert!(nums.len() >= 4);
    assert!(nums[3] > nums[1] && nums[3] > nums[2], "{last}");
}

#[test]
fn identical_runs_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.lrsp");
    let b = dir.path().join("b.lrsp");
    for out_file in [&a, &b] {
        let out = run(&[
            "refine",
            scenarios().join("fig8.scn").to_str().unwrap(),
            "-o",
            out_file.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn eval_dumps_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("fig8.lrsp");
    run(&[
        "refine",
        scenarios().join("fig8.scn").to_str().unwrap(),
        "-o",
        out_file.to_str().unwrap(),
    ]);
    let out = run(&["eval", out_file.to_str().unwrap(), "--grid", "5x4"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 20);
}

/// Scenario producing a simple surface, tessellated and sliced end to end.
#[test]
fn tessellate_and_slice_pipeline() {
    let dir = tempfile::tempdir().unwrap();

    // unit cube soup written through the library, sliced through the CLI
    let cube = unit_cube();
    let stl = dir.path().join("cube.stl");
    std::fs::write(&stl, lrkit::formats::write_stl(&cube, lrkit::formats::StlMode::Binary)).unwrap();
    let layers = dir.path().join("layers.txt");
    let out = run(&[
        "slice",
        stl.to_str().unwrap(),
        "--z-step",
        "0.25",
        "-o",
        layers.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&layers).unwrap();
    let layer_lines: Vec<&str> = text.lines().filter(|l| l.starts_with("layer ")).collect();
    assert_eq!(layer_lines.len(), 3, "{text}");
    for l in &layer_lines {
        assert!(l.ends_with(" 1"), "each interior layer is one loop: {l}");
    }
    assert_eq!(text.lines().filter(|l| l.starts_with("polyline closed")).count(), 3);

    // convert the soup to ascii and back, then tessellate a spline surface
    let ascii = dir.path().join("cube_ascii.stl");
    let out = run(&["convert", stl.to_str().unwrap(), "-o", ascii.to_str().unwrap(), "--to", "ascii"]);
    assert_eq!(code(&out), 0);
    assert!(std::fs::read_to_string(&ascii).unwrap().starts_with("solid"));
    let back = dir.path().join("cube_back.stl");
    let out = run(&["convert", ascii.to_str().unwrap(), "-o", back.to_str().unwrap(), "--to", "binary"]);
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(&stl).unwrap(), std::fs::read(&back).unwrap());

    // a bilinear spline surface goes through tessellate
    let surface = dir.path().join("surface.lrsp");
    let kv = lrkit::KnotVector::new(1, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
    let controls = vec![
        lrkit::ControlPoint::new(vec![0.0, 0.0, 0.0]),
        lrkit::ControlPoint::new(vec![0.0, 1.0, 0.0]),
        lrkit::ControlPoint::new(vec![1.0, 0.0, 0.0]),
        lrkit::ControlPoint::new(vec![1.0, 1.0, 0.5]),
    ];
    let c = lrkit::SplineCollection::from_tensor(&[kv.clone(), kv], controls).unwrap();
    let doc = lrkit::formats::LRSplineDocument::from_collection(&c, lrkit::formats::SplineType::LRBSpline);
    std::fs::write(
        &surface,
        lrkit::formats::write_lr(&doc, lrkit::formats::NumberFormat::Hex).unwrap(),
    )
    .unwrap();
    let tess = dir.path().join("surface.stl");
    let out = run(&[
        "tessellate",
        surface.to_str().unwrap(),
        "--tol",
        "0.05",
        "-o",
        tess.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let soup = lrkit::formats::read_stl(&std::fs::read(&tess).unwrap()).unwrap();
    assert!(!soup.triangles.is_empty());
}

fn unit_cube() -> lrkit::geometry::TriangleSoup {
    use lrkit::geometry::{Triangle, TriangleSoup};
    let v = |x: f64, y: f64, z: f64| [x, y, z];
    let quad = |a: [f64; 3], b: [f64; 3], c: [f64; 3], d: [f64; 3]| {
        vec![
            Triangle { vertices: [a, b, c], normal: [0.0; 3] },
            Triangle { vertices: [a, c, d], normal: [0.0; 3] },
        ]
    };
    let mut triangles = Vec::new();
    triangles.extend(quad(v(0., 0., 0.), v(1., 0., 0.), v(1., 1., 0.), v(0., 1., 0.)));
    triangles.extend(quad(v(0., 0., 1.), v(0., 1., 1.), v(1., 1., 1.), v(1., 0., 1.)));
    triangles.extend(quad(v(0., 0., 0.), v(0., 0., 1.), v(1., 0., 1.), v(1., 0., 0.)));
    triangles.extend(quad(v(0., 1., 0.), v(1., 1., 0.), v(1., 1., 1.), v(0., 1., 1.)));
    triangles.extend(quad(v(0., 0., 0.), v(0., 1., 0.), v(0., 1., 1.), v(0., 0., 1.)));
    triangles.extend(quad(v(1., 0., 0.), v(1., 0., 1.), v(1., 1., 1.), v(1., 1., 0.)));
    TriangleSoup { triangles }
}
