use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hiseq::dataset::{load_dataset, LoadOptions};
use hiseq::mask::{Mask, PixelLabel, RegionMask};
use hiseq::pnm;
use hiseq::sampler::validate_sequence;
use serde_json::Value;

fn hiseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hiseq"))
        .arg("--quiet")
        .args(args)
        .output()
        .expect("running hiseq")
}

fn ok(args: &[&str]) -> Output {
    let out = hiseq(args);
    assert!(
        out.status.success(),
        "hiseq {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Fixture { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// synth + sample into `<name>-synth` and `<name>-gt`.
    fn pipeline(&self, name: &str, seed: &str, extra: &[&str]) -> PathBuf {
        let synth = self.path(&format!("{name}-synth"));
        let gt = self.path(&format!("{name}-gt"));
        let mut args = vec![
            "--seed",
            seed,
            "synth",
            "--count",
            "6",
            "--width",
            "32",
            "--height",
            "32",
            "--out",
            p(&synth),
        ];
        args.extend_from_slice(extra);
        ok(&args);
        ok(&[
            "--seed",
            seed,
            "sample",
            "--manifest",
            p(&synth),
            "--paths",
            "2",
            "--out",
            p(&gt),
        ]);
        gt
    }
}

fn tree_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}

fn score_json(pred: &Path, gt: &Path, extra: &[&str]) -> Value {
    let mut args = vec!["--json", "score", "--pred", p(pred), "--gt", p(gt)];
    args.extend_from_slice(extra);
    serde_json::from_slice(&ok(&args).stdout).unwrap()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(hiseq(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(hiseq(&["synth"]).status.code(), Some(2));
    assert_eq!(
        hiseq(&[
            "perturb",
            "--pred-in",
            "x",
            "--mode",
            "shuffle",
            "--out",
            "y"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(hiseq(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_one() {
    let fx = Fixture::new();
    let out = hiseq(&["validate", "--manifest", p(&fx.path("absent"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = hiseq(&[
        "synth",
        "--count",
        "1",
        "--area-min",
        "0.9",
        "--area-max",
        "0.1",
        "--out",
        p(&fx.path("x")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ground_truth_scores_perfectly_and_validates() {
    let fx = Fixture::new();
    let gt = fx.pipeline("a", "3", &[]);
    ok(&["validate", "--manifest", p(&gt)]);
    let report = score_json(&gt, &gt, &[]);
    assert_eq!(report["samples"], 6);
    assert_eq!(report["mean_score"].as_f64(), Some(1.0));
    for r in report["reports"].as_array().unwrap() {
        assert_eq!(r["score"].as_f64(), Some(1.0));
        assert_eq!(r["lambda"].as_f64(), Some(1.0));
    }
}

#[test]
fn runs_are_deterministic_and_thread_count_invariant() {
    let fx = Fixture::new();
    let a = fx.pipeline("a", "11", &[]);
    let b = fx.pipeline("b", "11", &["--threads", "4"]);
    assert_eq!(tree_bytes(&a), tree_bytes(&b));
    let c = fx.pipeline("c", "12", &[]);
    assert_ne!(tree_bytes(&a), tree_bytes(&c));

    let r1 = fx.path("r1.json");
    let r2 = fx.path("r2.json");
    ok(&["score", "--pred", p(&a), "--gt", p(&c), "--report", p(&r1)]);
    ok(&[
        "score",
        "--pred",
        p(&a),
        "--gt",
        p(&c),
        "--report",
        p(&r2),
        "--threads",
        "3",
    ]);
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
}

#[test]
fn dropping_the_last_step_costs_only_the_length_penalty() {
    let fx = Fixture::new();
    let gt = fx.pipeline("a", "5", &[]);
    let pred = fx.path("dropped");
    ok(&[
        "perturb",
        "--pred-in",
        p(&gt),
        "--mode",
        "drop-last-step",
        "--magnitude",
        "1",
        "--out",
        p(&pred),
    ]);
    let report = score_json(&pred, &gt, &[]);
    for r in report["reports"].as_array().unwrap() {
        // the full reveal repeats the last accumulated mask, so F1 stays perfect
        let t_g = r["t_g"].as_f64().unwrap();
        assert_eq!(r["f1_match"].as_f64(), Some(1.0));
        assert_eq!(r["t_p"].as_f64(), Some(t_g - 1.0));
        let expected = (-0.1 / t_g).exp();
        assert!((r["lambda"].as_f64().unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn zero_magnitude_perturbation_is_byte_identical() {
    let fx = Fixture::new();
    let gt = fx.pipeline("a", "8", &[]);
    for mode in [
        "drop-last-step",
        "duplicate-step",
        "dilate-masks",
        "erode-masks",
        "relabel-fraction",
    ] {
        let out = fx.path(mode);
        ok(&[
            "perturb",
            "--pred-in",
            p(&gt),
            "--mode",
            mode,
            "--magnitude",
            "0",
            "--out",
            p(&out),
        ]);
        assert_eq!(tree_bytes(&gt), tree_bytes(&out), "{mode}");
    }
}

#[test]
fn duplicated_steps_stay_valid_but_lower_the_score() {
    let fx = Fixture::new();
    let gt = fx.pipeline("a", "9", &[]);
    let pred = fx.path("dup");
    ok(&[
        "perturb",
        "--pred-in",
        p(&gt),
        "--mode",
        "duplicate-step",
        "--magnitude",
        "2",
        "--out",
        p(&pred),
    ]);
    ok(&["validate", "--manifest", p(&pred)]);
    let report = score_json(&pred, &gt, &[]);
    assert!(report["mean_score"].as_f64().unwrap() < 1.0);
    assert_eq!(report["mean_f1_match"].as_f64(), Some(1.0));
}

#[test]
fn validate_reports_broken_containment() {
    let fx = Fixture::new();
    let gt = fx.pipeline("a", "4", &[]);
    let pred = fx.path("eroded");
    ok(&[
        "perturb",
        "--pred-in",
        p(&gt),
        "--mode",
        "relabel-fraction",
        "--magnitude",
        "0.3",
        "--out",
        p(&pred),
    ]);
    let out = hiseq(&["--json", "validate", "--manifest", p(&pred)]);
    assert_eq!(out.status.code(), Some(1));
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["valid"], false);
    assert!(!summary["issues"].as_array().unwrap().is_empty());
}

#[test]
fn missing_predictions_score_zero() {
    let fx = Fixture::new();
    let gt = fx.pipeline("a", "6", &[]);
    let other = fx.path("single");
    let mask = pnm::encode_mask(&Mask::filled(32, 32, PixelLabel::Authentic).unwrap());
    let mask_path = fx.path("stray.pgm");
    fs::write(&mask_path, mask).unwrap();
    ok(&["decompose", "--mask", p(&mask_path), "--out", p(&other)]);
    let report = score_json(&other, &gt, &[]);
    assert_eq!(report["missing_predictions"].as_array().unwrap().len(), 6);
    assert_eq!(report["mean_score"].as_f64(), Some(0.0));
}

#[test]
fn decompose_writes_a_two_step_sequence() {
    let fx = Fixture::new();
    let region = RegionMask::from_fn(20, 12, |x, y| {
        (3..9).contains(&x) && (2..7).contains(&y) || x == 15
    })
    .unwrap();
    let mask_path = fx.path("one-shot.pgm");
    pnm::write_mask(
        &mask_path,
        &Mask::from_region(&region, PixelLabel::Manipulated, PixelLabel::Authentic),
    )
    .unwrap();
    let out = fx.path("dec");
    ok(&["decompose", "--mask", p(&mask_path), "--out", p(&out)]);
    ok(&["validate", "--manifest", p(&out)]);

    let ds = load_dataset(&out, LoadOptions::default()).unwrap();
    assert_eq!(ds.samples.len(), 1);
    assert_eq!(ds.samples[0].sample_id, "one-shot");
    let seq = ds.samples[0].sequences().next().unwrap();
    assert!(validate_sequence(seq).is_valid());
    let masks: Vec<&Mask> = seq.masks().collect();
    assert_eq!(masks.len(), 2);
    assert_eq!(masks[0].manipulated_set(), region);
    assert_eq!(masks[0].count(PixelLabel::Authentic), 0);
    assert_eq!(masks[1].manipulated_set(), region);
    assert_eq!(masks[1].count(PixelLabel::Padding), 0);

    let report = score_json(&out, &out, &[]);
    assert_eq!(report["mean_score"].as_f64(), Some(1.0));
}

#[test]
fn oracle_check_passes_and_reports_json() {
    let out = ok(&["--json", "--seed", "2", "oracle-check", "--trials", "200"]);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["trials"], 200);
    assert!(summary["mismatches"].as_array().unwrap().is_empty());
    assert!(summary["max_abs_error"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn base_images_replace_textures() {
    let fx = Fixture::new();
    let bases = fx.path("bases");
    fs::create_dir(&bases).unwrap();
    let img = hiseq::ImageBuffer::filled(32, 32, [10, 200, 30]).unwrap();
    pnm::write_image(&bases.join("a.ppm"), &img).unwrap();
    let out = fx.path("synth");
    ok(&[
        "synth",
        "--count",
        "2",
        "--width",
        "32",
        "--height",
        "32",
        "--base-images",
        p(&bases),
        "--out",
        p(&out),
    ]);
    let ds = load_dataset(&out, LoadOptions::default()).unwrap();
    // copy-move of a flat image leaves it flat
    for s in &ds.samples {
        assert_eq!(s.image.as_ref().unwrap(), &img);
    }
    let wrong = fx.path("wrong");
    let out = hiseq(&[
        "synth",
        "--count",
        "1",
        "--width",
        "40",
        "--height",
        "32",
        "--base-images",
        p(&bases),
        "--out",
        p(&wrong),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
