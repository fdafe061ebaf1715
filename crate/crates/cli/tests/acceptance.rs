//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any failed.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hiseq::hss::{f1_matrix, hss_score, length_penalty, monotonic_match, F1Matrix, HssConfig};
use hiseq::mask::{Mask, PixelLabel, RegionMask};
use hiseq::rng::{derive_seed, stream};
use hiseq::sampler::{
    check_linear_extension, decompose_one_shot, reverse_sample_path, sample_path_set,
    validate_sequence, MaskSequence,
};
use hiseq::synth::{generate_texture, synthesize, SynthConfig, SynthSample};
use hiseq::tree::{ManipulationTree, NodeId};
use rand::Rng;
use serde_json::Value;

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hiseq"));
    cmd.arg("--quiet");
    cmd
}

fn run(args: &[&str]) -> Result<(Vec<u8>, Duration), String> {
    let started = Instant::now();
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(
        out.status.success(),
        "hiseq {args:?} exited with {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok((out.stdout, elapsed))
}

fn synth_sample(seed: u64, size: usize) -> SynthSample {
    let base = generate_texture(size, size, derive_seed(seed, 0)).unwrap();
    let cfg = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    synthesize(&base, &cfg).unwrap()
}

fn dp_matches_oracle() -> Result<String, String> {
    let (stdout, elapsed) = run(&[
        "--json",
        "--seed",
        "1",
        "oracle-check",
        "--trials",
        "1000",
        "--max-steps",
        "6",
    ])?;
    let summary: Value = serde_json::from_slice(&stdout).map_err(|e| e.to_string())?;
    let trials = summary["trials"].as_u64().unwrap_or(0);
    let err = summary["max_abs_error"].as_f64().unwrap_or(f64::INFINITY);
    let mismatches = summary["mismatches"]
        .as_array()
        .map_or(usize::MAX, Vec::len);
    ensure!(trials >= 1000, "only {trials} trials ran");
    ensure!(
        summary["max_steps"] == 6,
        "max_steps was {}",
        summary["max_steps"]
    );
    ensure!(
        mismatches == 0 && err <= 1e-12,
        "{mismatches} mismatches, max error {err:e}"
    );
    ensure!(
        summary["alignment_failures"] == 0,
        "alignment failures: {}",
        summary["alignment_failures"]
    );
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:.2?}");
    Ok(format!(
        "{trials} trials, max |dp - oracle| = {err:e}, {elapsed:.2?}"
    ))
}

fn alignment_base_cases() -> Result<String, String> {
    let cfg = HssConfig::default();
    let sample = synth_sample(41, 32);
    let set = sample_path_set(&sample.tree, 2, &mut stream(41, 1)).unwrap();

    let empty = MaskSequence::from_masks(Vec::new(), Vec::new());
    let r = hss_score(&empty, &set, &cfg).unwrap();
    ensure!(
        r.f1_match == 0.0 && r.score == 0.0,
        "empty prediction scored {}",
        r.score
    );
    ensure!(
        monotonic_match(&F1Matrix::new(0, 3, Vec::new())).score == 0.0,
        "T_p = 0 matrix did not give 0"
    );

    for t in 1..=8 {
        let identity: Vec<f64> = (0..t * t)
            .map(|k| if k / t == k % t { 1.0 } else { 0.0 })
            .collect();
        let a = monotonic_match(&F1Matrix::new(t, t, identity));
        ensure!(a.score == 1.0, "identity {t}x{t} scored {}", a.score);
        ensure!(
            a.steps == (0..t).collect::<Vec<_>>(),
            "identity {t}x{t} aligned {:?}",
            a.steps
        );
    }
    for seq in &set.sequences {
        let r = hss_score(seq, &set, &cfg).unwrap();
        ensure!(r.f1_match == 1.0, "own sequence F1_match {}", r.f1_match);
    }

    let mut rng = stream(42, 0);
    for _ in 0..2000 {
        let (tp, tg) = (rng.gen_range(1..=10), rng.gen_range(1..=10));
        let f = F1Matrix::new(tp, tg, (0..tp * tg).map(|_| rng.gen::<f64>()).collect());
        let a = monotonic_match(&f);
        ensure!(
            a.steps.windows(2).all(|w| w[0] <= w[1]),
            "alignment {:?} decreases",
            a.steps
        );
        ensure!(
            f.alignment_score(&a.steps) == a.score,
            "re-evaluated {} != {}",
            f.alignment_score(&a.steps),
            a.score
        );
    }
    let other = synth_sample(43, 32);
    let pred = &sample_path_set(&other.tree, 1, &mut stream(43, 1))
        .unwrap()
        .sequences[0];
    let r = hss_score(pred, &set, &cfg).unwrap();
    let f = f1_matrix(pred, &set.sequences[r.best_path_index]).unwrap();
    ensure!(
        f.alignment_score(&r.alignment) == r.f1_match,
        "report alignment does not reproduce F1_match"
    );
    Ok("T_p = 0 gives 0, identity gives 1, 2000 alignments re-evaluate exactly".into())
}

fn length_penalty_closed_form() -> Result<String, String> {
    let cfg = HssConfig::default();
    for t in 0..=64 {
        ensure!(length_penalty(t, t, &cfg) == 1.0, "lambda({t},{t}) != 1");
    }
    let expected = (-1.0f64 / 30.0).exp();
    let got = length_penalty(4, 3, &cfg);
    ensure!(
        (got - expected).abs() <= 1e-12,
        "lambda(4,3) = {got}, want {expected}"
    );
    ensure!(
        (got - 0.967_216_100_482_005_9).abs() <= 1e-12,
        "lambda(4,3) = {got}"
    );
    let guarded = length_penalty(2, 0, &cfg);
    ensure!(
        (guarded - (-0.4f64).exp()).abs() <= 1e-12,
        "lambda(2,0) = {guarded}"
    );
    ensure!(
        (length_penalty(3, 0, &cfg) - (-0.9f64).exp()).abs() <= 1e-12,
        "lambda(3,0) = {}",
        length_penalty(3, 0, &cfg)
    );
    Ok(format!(
        "lambda(4,3) = {got:.16}, lambda(2,0) = {guarded:.16}"
    ))
}

fn perfect_prediction_identity() -> Result<String, String> {
    let cfg = HssConfig::default();
    let mut scored = 0;
    for i in 0..100 {
        let seed = derive_seed(4, i);
        let sample = synth_sample(seed, 64);
        let set = sample_path_set(&sample.tree, 3, &mut stream(seed, 1)).unwrap();
        for (k, seq) in set.sequences.iter().enumerate() {
            let r = hss_score(seq, &set, &cfg).unwrap();
            ensure!(r.score == 1.0, "sample {i} path {k} scored {}", r.score);
            scored += 1;
        }
    }
    Ok(format!(
        "{scored} sequences from 100 samples all scored exactly 1.0"
    ))
}

fn ancestors_precede(tree: &ManipulationTree, path: &[NodeId]) -> bool {
    path.iter().enumerate().all(|(pos, id)| {
        let mut cur = tree.node(*id).and_then(|n| n.parent);
        while let Some(p) = cur.filter(|p| !p.is_root()) {
            if !path[..pos].contains(&p) {
                return false;
            }
            cur = tree.node(p).and_then(|n| n.parent);
        }
        true
    })
}

fn containment_invariant() -> Result<String, String> {
    let mut sequences = 0;
    for i in 0..1000 {
        let seed = derive_seed(5, i);
        let sample = synth_sample(seed, 32);
        let set = sample_path_set(&sample.tree, 3, &mut stream(seed, 1)).unwrap();
        for seq in &set.sequences {
            let report = validate_sequence(seq);
            ensure!(report.is_valid(), "tree {i}: {:?}", report.violations);
            ensure!(
                check_linear_extension(&sample.tree, &seq.path).is_ok(),
                "tree {i}: not a linear extension"
            );
            ensure!(
                ancestors_precede(&sample.tree, &seq.path),
                "tree {i}: descendant before ancestor"
            );
            ensure!(
                seq.path.len() == sample.tree.len() - 1,
                "tree {i}: path misses nodes"
            );
            sequences += 1;
        }
    }
    Ok(format!("{sequences} sequences, zero violations"))
}

fn mask_count_scaling() -> Result<String, String> {
    let samples: Vec<SynthSample> = (0..100)
        .map(|i| synth_sample(derive_seed(6, i), 64))
        .collect();
    let count = |n: usize| -> usize {
        samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let set =
                    sample_path_set(&s.tree, n, &mut stream(derive_seed(6, i as u64), n as u64))
                        .unwrap();
                set.sequences
                    .iter()
                    .map(MaskSequence::content_len)
                    .sum::<usize>()
            })
            .sum()
    };
    let single = count(1);
    ensure!(single > 0, "no masks");
    let mut counts = vec![single];
    for n in 2..=4 {
        let c = count(n);
        ensure!(c == n * single, "{n} paths gave {c}, want {}", n * single);
        counts.push(c);
    }
    let shown: Vec<String> = counts.iter().map(usize::to_string).collect();
    Ok(format!("masks for N = 1..4: {}", shown.join(" -> ")))
}

fn one_shot_round_trip() -> Result<String, String> {
    let mut rng = stream(7, 0);
    for i in 0..100 {
        let (w, h) = (rng.gen_range(1..=48), rng.gen_range(1..=48));
        let p = rng.gen::<f64>();
        let region = RegionMask::from_fn(w, h, |_, _| rng.gen_bool(p)).unwrap();
        let seq = decompose_one_shot(&region);
        let masks: Vec<&Mask> = seq.masks().collect();
        ensure!(
            masks.len() == 2 && seq.steps.last().is_some_and(|s| s.is_eos()),
            "mask {i}: wrong shape"
        );
        ensure!(
            masks[1].manipulated_set() == region,
            "mask {i}: step 2 differs from input"
        );
        ensure!(
            masks[1].count(PixelLabel::Authentic) == w * h - region.area(),
            "mask {i}: step 2 complement is not AUTHENTIC"
        );
        let first = masks[0];
        let stray = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| first.get(x, y) != PixelLabel::Manipulated)
            .any(|(x, y)| first.get(x, y) != PixelLabel::Padding);
        ensure!(!stray, "mask {i}: step 1 has non-PADDING background");
        ensure!(
            first.manipulated_set() == region,
            "mask {i}: step 1 differs from input"
        );
    }
    Ok("100 random masks reproduced exactly".into())
}

fn rect(w: usize, x: std::ops::Range<usize>, y: std::ops::Range<usize>) -> RegionMask {
    RegionMask::from_fn(w, w, |px, py| x.contains(&px) && y.contains(&py)).unwrap()
}

fn parent_rule_fixtures() -> Result<String, String> {
    let mut tree = ManipulationTree::new(16, 16).unwrap();
    let outer = tree.insert_region(rect(16, 0..12, 0..12)).unwrap();
    let inner = tree.insert_region(rect(16, 2..10, 2..10)).unwrap();
    let leaf = tree.insert_region(rect(16, 4..6, 4..6)).unwrap();
    ensure!(
        tree.node(inner).unwrap().parent == Some(outer),
        "inner not under outer"
    );
    ensure!(
        tree.node(leaf).unwrap().parent == Some(inner),
        "deeper candidate not chosen"
    );
    ensure!(
        (outer, inner, leaf) == (NodeId(1), NodeId(2), NodeId(3)),
        "ids not sequential"
    );

    for big_first in [true, false] {
        let mut tree = ManipulationTree::new(16, 16).unwrap();
        let big_region = rect(16, 0..10, 0..10);
        let small_region = rect(16, 6..14, 6..14);
        let (big, small) = if big_first {
            let b = tree.insert_region(big_region).unwrap();
            (b, tree.insert_region(small_region).unwrap())
        } else {
            let s = tree.insert_region(small_region).unwrap();
            (tree.insert_region(big_region).unwrap(), s)
        };
        ensure!(
            tree.node(big).unwrap().area == 100 && tree.node(small).unwrap().area == 64,
            "fixture areas"
        );
        ensure!(
            tree.node(big).unwrap().depth == tree.node(small).unwrap().depth,
            "fixture depths differ"
        );
        let child = tree.insert_region(rect(16, 7..9, 7..9)).unwrap();
        ensure!(
            tree.node(child).unwrap().parent == Some(big),
            "area 100 candidate not chosen (big inserted first: {big_first})"
        );
    }
    Ok("deeper node and area 100 over 64 selected".into())
}

fn star_tree_uniformity() -> Result<String, String> {
    let mut tree = ManipulationTree::new(8, 8).unwrap();
    let a = tree.insert_region(rect(8, 0..3, 0..3)).unwrap();
    let b = tree.insert_region(rect(8, 5..8, 5..8)).unwrap();
    ensure!(
        tree.leaves().len() == 2 && !tree.leaves().contains(&NodeId::ROOT),
        "not a two-leaf star"
    );
    let draws = 10_000;
    let mut a_first = 0;
    for i in 0..draws {
        let path = reverse_sample_path(&tree, &mut stream(9, i)).unwrap();
        ensure!(
            path == vec![a, b] || path == vec![b, a],
            "unexpected path {path:?}"
        );
        if path[0] == a {
            a_first += 1;
        }
    }
    let sigma = (draws as f64 * 0.25).sqrt();
    let dev = (a_first as f64 - draws as f64 / 2.0).abs();
    ensure!(
        dev <= 3.0 * sigma,
        "{a_first} of {draws} start with a (|dev| {dev} > 3 sigma {:.1})",
        3.0 * sigma
    );
    Ok(format!(
        "{a_first} / {} split over {draws} draws, |dev| = {dev} <= {:.0}",
        draws - a_first,
        3.0 * sigma
    ))
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
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

fn pipeline(root: &Path) -> Result<Duration, String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (synth, gt, report) = (
        root.join("synth"),
        root.join("gt"),
        root.join("report.json"),
    );
    let started = Instant::now();
    run(&[
        "--seed",
        "10",
        "synth",
        "--count",
        "100",
        "--width",
        "64",
        "--height",
        "64",
        "--out",
        &s(&synth),
    ])?;
    run(&[
        "--seed",
        "10",
        "sample",
        "--manifest",
        &s(&synth),
        "--paths",
        "3",
        "--out",
        &s(&gt),
    ])?;
    run(&[
        "score",
        "--pred",
        &s(&gt),
        "--gt",
        &s(&gt),
        "--report",
        &s(&report),
    ])?;
    Ok(started.elapsed())
}

fn pipeline_determinism() -> Result<String, String> {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ta = pipeline(a.path())?;
    let tb = pipeline(b.path())?;
    let (fa, fb) = (files(a.path()), files(b.path()));
    ensure!(fa.len() > 100, "only {} files written", fa.len());
    ensure!(fa == fb, "outputs differ between runs");
    let report: Value =
        serde_json::from_slice(&fs::read(a.path().join("report.json")).unwrap()).unwrap();
    ensure!(
        report["mean_score"].as_f64() == Some(1.0),
        "self-score {}",
        report["mean_score"]
    );
    let slowest = ta.max(tb);
    ensure!(
        slowest < Duration::from_secs(30),
        "pipeline took {slowest:.2?}"
    );
    Ok(format!(
        "{} identical files, slowest run {slowest:.2?}",
        fa.len()
    ))
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("DP matches exhaustive oracle", dp_matches_oracle),
        ("alignment base cases", alignment_base_cases),
        ("length penalty closed form", length_penalty_closed_form),
        ("perfect prediction scores 1", perfect_prediction_identity),
        ("containment and linear extensions", containment_invariant),
        ("mask count scales with paths", mask_count_scaling),
        ("one-shot round trip", one_shot_round_trip),
        ("parent selection rule", parent_rule_fixtures),
        ("star tree ordering uniformity", star_tree_uniformity),
        ("pipeline determinism and runtime", pipeline_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check)) in checks.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", n + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
