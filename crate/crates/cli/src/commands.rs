use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use hiseq::dataset::{
    load_dataset, save_dataset, validate_dataset, Dataset, DatasetSample, LoadOptions,
    StoredPathSet,
};
use hiseq::hss::{hss_score, HssConfig, HssReport};
use hiseq::oracle::run_oracle_check;
use hiseq::perturb::perturb;
use hiseq::rng::{derive_seed, stream};
use hiseq::sampler::{decompose_one_shot, sample_path_set, MaskSequence, PathSet};
use hiseq::synth::{generate_texture, synthesize, ImageBuffer, SynthConfig};
use hiseq::{pnm, Error};
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{
    Cli, DecomposeArgs, OracleArgs, PerturbArgs, SampleArgs, ScoreArgs, SynthArgs, ValidateArgs,
};

/// Whether the command's check passed. Errors are reported separately.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    Failed,
}

pub struct Ctx {
    pub seed: u64,
    pub quiet: bool,
    pub json: bool,
}

impl Ctx {
    pub fn from_cli(cli: &Cli) -> Self {
        Ctx {
            seed: cli.seed,
            quiet: cli.quiet,
            json: cli.json,
        }
    }

    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn emit<T: Serialize>(&self, value: &T) -> Result<()> {
        if self.json {
            println!("{}", serde_json::to_string_pretty(value)?);
        }
        Ok(())
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .context("building thread pool")
}

fn sample_id(index: usize) -> String {
    format!("{index:06}")
}

#[derive(Serialize)]
struct WriteSummary<'a> {
    out: &'a Path,
    samples: usize,
    masks: usize,
}

fn load_base_images(dir: &Path, dims: (usize, usize)) -> Result<Vec<ImageBuffer>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e == "ppm"));
    files.sort();
    if files.is_empty() {
        bail!("no .ppm images in {}", dir.display());
    }
    files
        .iter()
        .map(|p| {
            let img = pnm::read_image(p)?;
            if img.dims() != dims {
                bail!(
                    "{} is {}x{}, expected {}x{}",
                    p.display(),
                    img.width(),
                    img.height(),
                    dims.0,
                    dims.1
                );
            }
            Ok(img)
        })
        .collect()
}

pub fn synth(ctx: &Ctx, args: &SynthArgs) -> Result<Outcome> {
    let template = SynthConfig {
        seed: 0,
        nodes_min: args.nodes_min,
        nodes_max: args.nodes_max,
        nest_prob: args.nest_prob,
        area_frac_min: args.area_min,
        area_frac_max: args.area_max,
        max_depth: args.max_depth,
        ..SynthConfig::default()
    };
    template.validate()?;
    let dims = (args.width, args.height);
    let bases = args
        .base_images
        .as_deref()
        .map(|d| load_base_images(d, dims))
        .transpose()?;

    let started = Instant::now();
    let samples = pool(args.threads)?.install(|| {
        (0..args.count)
            .into_par_iter()
            .map(|i| {
                let sample_seed = derive_seed(ctx.seed, i as u64);
                let base = match &bases {
                    Some(images) => images[i % images.len()].clone(),
                    None => generate_texture(args.width, args.height, derive_seed(sample_seed, 0))?,
                };
                let cfg = SynthConfig {
                    seed: sample_seed,
                    ..template.clone()
                };
                let sample = synthesize(&base, &cfg)?;
                Ok(DatasetSample::from_synth(sample_id(i), sample))
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;

    let mut ds = Dataset::new(args.width, args.height);
    ds.samples = samples;
    save_dataset(&ds, &args.out)?;
    ctx.info(format!(
        "synthesized {} samples into {} in {:.2?}",
        ds.samples.len(),
        args.out.display(),
        started.elapsed()
    ));
    ctx.emit(&WriteSummary {
        out: &args.out,
        samples: ds.samples.len(),
        masks: 0,
    })?;
    Ok(Outcome::Passed)
}

pub fn sample(ctx: &Ctx, args: &SampleArgs) -> Result<Outcome> {
    if args.paths == 0 {
        bail!("--paths must be at least 1");
    }
    let mut ds = load_dataset(&args.manifest, LoadOptions::default())?;
    ds.boundary_radius = (args.boundary_radius > 0).then_some(args.boundary_radius);
    let mut skipped = 0;
    for (i, sample) in ds.samples.iter_mut().enumerate() {
        let Some(tree) = sample.tree.as_ref().filter(|t| !t.is_empty()) else {
            skipped += 1;
            continue;
        };
        let seed = derive_seed(ctx.seed, i as u64);
        let set = sample_path_set(tree, args.paths, &mut stream(seed, 0))?;
        sample.path_sets.push(StoredPathSet {
            seed,
            paths: PathSet::new(set.sequences, sample.sample_id.clone()),
        });
    }
    if skipped > 0 {
        ctx.info(format!(
            "skipped {skipped} samples without manipulated nodes"
        ));
    }
    save_dataset(&ds, &args.out)?;
    let masks = ds.mask_count();
    ctx.info(format!(
        "sampled {} paths per tree, {masks} masks in total",
        args.paths
    ));
    ctx.emit(&WriteSummary {
        out: &args.out,
        samples: ds.samples.len(),
        masks,
    })?;
    Ok(Outcome::Passed)
}

pub fn decompose(ctx: &Ctx, args: &DecomposeArgs) -> Result<Outcome> {
    let mask = pnm::read_mask(&args.mask)?;
    let id = match &args.id {
        Some(id) => id.clone(),
        None => args
            .mask
            .file_stem()
            .and_then(|s| s.to_str())
            .context("mask path has no usable file stem; pass --id")?
            .to_string(),
    };
    let seq = decompose_one_shot(&mask.manipulated_set());
    let mut ds = Dataset::new(mask.width(), mask.height());
    ds.boundary_radius = (args.boundary_radius > 0).then_some(args.boundary_radius);
    ds.samples.push(DatasetSample {
        sample_id: id.clone(),
        image: None,
        tree: None,
        provenance: Vec::new(),
        path_sets: vec![StoredPathSet {
            seed: 0,
            paths: PathSet::new(vec![seq], id),
        }],
    });
    save_dataset(&ds, &args.out)?;
    ctx.info(format!("wrote two-step sequence to {}", args.out.display()));
    ctx.emit(&WriteSummary {
        out: &args.out,
        samples: 1,
        masks: ds.mask_count(),
    })?;
    Ok(Outcome::Passed)
}

#[derive(Serialize)]
struct ValidateSummary {
    valid: bool,
    sequences: usize,
    issues: Vec<hiseq::dataset::SequenceIssue>,
}

pub fn validate(ctx: &Ctx, args: &ValidateArgs) -> Result<Outcome> {
    let ds = load_dataset(&args.manifest, LoadOptions { lenient: true })?;
    let issues = validate_dataset(&ds);
    let sequences = ds.samples.iter().map(|s| s.sequences().count()).sum();
    for issue in &issues {
        ctx.info(issue.to_string());
    }
    ctx.info(format!(
        "{sequences} sequences checked, {} violation(s)",
        issues.len()
    ));
    let valid = issues.is_empty();
    ctx.emit(&ValidateSummary {
        valid,
        sequences,
        issues,
    })?;
    Ok(if valid {
        Outcome::Passed
    } else {
        Outcome::Failed
    })
}

#[derive(Debug, Serialize)]
pub struct SampleScore {
    pub sample_id: String,
    #[serde(flatten)]
    pub report: HssReport,
}

#[derive(Debug, Serialize)]
pub struct ScoreReport {
    pub alpha: f64,
    pub path_set: usize,
    pub samples: usize,
    pub mean_score: f64,
    pub mean_f1_match: f64,
    pub missing_predictions: Vec<String>,
    pub reports: Vec<SampleScore>,
}

pub fn score(ctx: &Ctx, args: &ScoreArgs) -> Result<Outcome> {
    if args.alpha.is_nan() || args.alpha < 0.0 {
        bail!("--alpha must be non-negative");
    }
    let cfg = HssConfig { alpha: args.alpha };
    let gt = load_dataset(&args.gt, LoadOptions::default())
        .with_context(|| format!("loading ground truth {}", args.gt.display()))?;
    let pred = load_dataset(&args.pred, LoadOptions { lenient: true })
        .with_context(|| format!("loading predictions {}", args.pred.display()))?;
    let pred_issues = validate_dataset(&pred).len();
    if pred_issues > 0 {
        ctx.info(format!(
            "predictions carry {pred_issues} validation issue(s); scoring anyway"
        ));
    }

    let empty = MaskSequence::from_masks(Vec::new(), Vec::new());
    let mut missing = Vec::new();
    let mut jobs = Vec::with_capacity(gt.samples.len());
    for sample in &gt.samples {
        let paths = &sample
            .path_sets
            .get(args.path_set)
            .with_context(|| {
                format!(
                    "ground-truth sample {} has no path set {}",
                    sample.sample_id, args.path_set
                )
            })?
            .paths;
        let prediction = pred
            .sample(&sample.sample_id)
            .and_then(|s| s.sequences().next());
        if prediction.is_none() {
            missing.push(sample.sample_id.clone());
        }
        jobs.push((
            sample.sample_id.as_str(),
            prediction.unwrap_or(&empty),
            paths,
        ));
    }

    let reports = pool(args.threads)?.install(|| {
        jobs.par_iter()
            .map(|(id, pred, paths)| {
                Ok(SampleScore {
                    sample_id: id.to_string(),
                    report: hss_score(pred, paths, &cfg)?,
                })
            })
            .collect::<Result<Vec<_>, Error>>()
    })?;

    let n = reports.len();
    let mean = |f: fn(&HssReport) -> f64| {
        if n == 0 {
            0.0
        } else {
            reports.iter().map(|r| f(&r.report)).sum::<f64>() / n as f64
        }
    };
    let report = ScoreReport {
        alpha: args.alpha,
        path_set: args.path_set,
        samples: n,
        mean_score: mean(|r| r.score),
        mean_f1_match: mean(|r| r.f1_match),
        missing_predictions: missing,
        reports,
    };
    if !report.missing_predictions.is_empty() {
        ctx.info(format!(
            "{} ground-truth samples had no prediction and scored 0",
            report.missing_predictions.len()
        ));
    }
    ctx.info(format!(
        "HSS {:.6} (F1_match {:.6}) over {n} samples",
        report.mean_score, report.mean_f1_match
    ));
    if let Some(path) = &args.report {
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    ctx.emit(&report)?;
    Ok(Outcome::Passed)
}

pub fn oracle_check(ctx: &Ctx, args: &OracleArgs) -> Result<Outcome> {
    let started = Instant::now();
    let summary = run_oracle_check(args.trials, args.max_steps, ctx.seed)?;
    for m in &summary.mismatches {
        ctx.info(format!(
            "trial {}: {}x{} dp {} != oracle {}",
            m.trial, m.rows, m.cols, m.dp, m.oracle
        ));
    }
    ctx.info(format!(
        "{} trials, {} mismatches, {} alignment failures, max |dp - oracle| = {:e}, {:.2?}",
        summary.trials,
        summary.mismatches.len(),
        summary.alignment_failures,
        summary.max_abs_error,
        started.elapsed()
    ));
    ctx.emit(&summary)?;
    Ok(if summary.passed() {
        Outcome::Passed
    } else {
        Outcome::Failed
    })
}

pub fn perturb_cmd(ctx: &Ctx, args: &PerturbArgs) -> Result<Outcome> {
    let mut ds = load_dataset(&args.pred_in, LoadOptions { lenient: true })?;
    for (i, sample) in ds.samples.iter_mut().enumerate() {
        let sample_seed = derive_seed(ctx.seed, i as u64);
        for (p, set) in sample.path_sets.iter_mut().enumerate() {
            for (q, seq) in set.paths.sequences.iter_mut().enumerate() {
                let mut rng = stream(derive_seed(sample_seed, p as u64), q as u64);
                *seq = perturb(seq, args.mode, args.magnitude, &mut rng)?;
            }
        }
    }
    save_dataset(&ds, &args.out)?;
    let issues = validate_dataset(&ds).len();
    ctx.info(format!(
        "applied {} (magnitude {}) to {} samples; {issues} containment/EOS issue(s) in the output",
        args.mode,
        args.magnitude,
        ds.samples.len()
    ));
    ctx.emit(&WriteSummary {
        out: &args.out,
        samples: ds.samples.len(),
        masks: ds.mask_count(),
    })?;
    Ok(Outcome::Passed)
}
