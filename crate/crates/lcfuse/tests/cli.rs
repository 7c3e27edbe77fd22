use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lcfuse::io;
use lcfuse_core::raster::{GridGeometry, ProbabilityRaster, Sample, SampleSet, Split};

fn lcfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcfuse")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_priors(dir: &Path) -> std::path::PathBuf {
    let g = GridGeometry::new(2, 1, 0.0, 60.0, 30.0, -30.0).unwrap();
    let r = ProbabilityRaster::new(g, 3, vec![0.2, 0.3, 0.5, 0.6, 0.3, 0.1]).unwrap();
    let p = dir.join("a.prob");
    io::write_probability(&p, &r).unwrap();
    p
}

#[test]
fn help_succeeds() {
    let o = lcfuse(&["--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["fuse", "assess", "synth", "unmix", "features", "smooth", "classify"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_priors(dir.path());
    let out = dir.path().join("out");
    assert_eq!(code(&lcfuse(&["fuse", "--out_dir", s(&out)])), 2);
    assert_eq!(code(&lcfuse(&["fuse", "--bogus", "1"])), 2);
    // two_stage without a mask
    let o = lcfuse(&["fuse", "--priors_a", s(&a), "--priors_b", s(&a), "--out_dir", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mask_b"));
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "not_a_key = 1\n").unwrap();
    assert_eq!(code(&lcfuse(&["fuse", "--config", s(&cfg)])), 2);
    assert_eq!(code(&lcfuse(&["fuse", "--mode", "three_stage", "--priors_a", s(&a)])), 2);
}

#[test]
fn unreadable_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = lcfuse(&[
        "fuse",
        "--mode",
        "a_only",
        "--priors_a",
        s(&dir.path().join("missing.prob")),
        "--out_dir",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn a_only_returns_primary_priors() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_priors(dir.path());
    let out = dir.path().join("out");
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("mode = a_only\npriors_a = {}\nout_dir = /nonexistent\n", s(&a))).unwrap();
    let o = lcfuse(&["fuse", "--config", s(&cfg), "--out_dir", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let post = io::read_probability(&out.join("posterior.prob")).unwrap();
    let prior = io::read_probability(&a).unwrap();
    for (x, y) in post.data().iter().zip(prior.data()) {
        assert!((x - y).abs() < 1e-6);
    }
    let labels = io::read_labels(&out.join("labels.lbl")).unwrap();
    assert_eq!(labels.labels(), &[2, 0]);
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("setting.mode: a_only"));
    assert!(!manifest.contains(s(dir.path())), "manifest must not embed paths");
}

#[test]
fn assess_reports_zero_samples() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_priors(dir.path());
    let out = dir.path().join("out");
    assert_eq!(code(&lcfuse(&["fuse", "--mode", "a_only", "--priors_a", s(&a), "--out_dir", s(&out)])), 0);
    let samples = dir.path().join("s.csv");
    let set = SampleSet::new(vec![Sample { x: 15.0, y: 45.0, class_label: 2, split: Split::Train }]).unwrap();
    io::write_samples(&samples, &set).unwrap();
    let o = lcfuse(&["assess", "--map", s(&out.join("labels.lbl")), "--samples", s(&samples)]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 samples scored"));
}

#[test]
fn synthetic_scene_through_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = d.join("scene");
    let run = |args: &[&str]| {
        let o = lcfuse(args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    run(&["synth", "--out_dir", s(&scene), "--width", "48", "--height", "48", "--validation", "300"]);
    let f = |n: &str| scene.join(n).to_str().unwrap().to_string();
    run(&["unmix", "--bands", &f("bands_b.bnd"), "--mask", &f("mask_b.msk"), "--out_dir", s(&d.join("u"))]);
    assert!(d.join("u/f_map.bnd").exists());
    run(&["features", "--bands", &f("bands_a.bnd"), "--out", s(&d.join("feat.bnd"))]);
    assert_eq!(io::read_bands(&d.join("feat.bnd")).unwrap().num_bands(), 6 + 1 + 3);
    run(&["classify", "--features", s(&d.join("feat.bnd")), "--samples", &f("samples.csv"), "--num_classes", "5", "--model_out", s(&d.join("a.model")), "--out", s(&d.join("pa.prob"))]);
    run(&["classify", "--features", s(&d.join("feat.bnd")), "--model", s(&d.join("a.model")), "--out", s(&d.join("pa2.prob"))]);
    assert_eq!(fs::read(d.join("pa.prob")).unwrap(), fs::read(d.join("pa2.prob")).unwrap());
    run(&["classify", "--features", &f("bands_b.bnd"), "--mask", &f("mask_b.msk"), "--samples", &f("samples.csv"), "--num_classes", "5", "--out", s(&d.join("pb.prob"))]);
    run(&["smooth", "--series", &f("coarse_series.ts"), "--out_dir", s(&d.join("w"))]);
    run(&["classify", "--features", s(&d.join("w/series_features.bnd")), "--samples", &f("samples.csv"), "--num_classes", "5", "--out", s(&d.join("pm.prob"))]);
    run(&[
        "fuse", "--priors_a", s(&d.join("pa.prob")), "--priors_b", s(&d.join("pb.prob")),
        "--priors_m", s(&d.join("pm.prob")), "--mask_b", &f("mask_b.msk"),
        "--f_map", s(&d.join("u/f_map.bnd")), "--coarse_series", &f("coarse_series.ts"),
        "--out_dir", s(&d.join("fused")),
    ]);
    let csv = d.join("acc.csv");
    let report = run(&[
        "assess", "--map", s(&d.join("fused/labels.lbl")), "--samples", &f("samples.csv"),
        "--class_names", "CR,FR,GR,SHR,WB", "--csv", s(&csv),
    ]);
    assert!(report.contains("overall accuracy"));
    assert!(fs::read_to_string(csv).unwrap().starts_with("class,CR,FR,GR,SHR,WB,total"));
}
