//! On-disk dataset layout.
//!
//! ```text
//! manifest.json
//! images/<sample>.ppm                          P6 composites
//! trees/<sample>/<node>.pgm                    node regions
//! masks/<sample>/<pathset>/<seq>/<step>.pgm    sequence steps (1-based)
//! boundaries/<sample>/<pathset>/<seq>/<step>.pgm
//! ```
//!
//! The manifest is pretty-printed JSON with keys in declaration order and a
//! trailing newline, so loading and re-saving a dataset reproduces it byte
//! for byte. EOS steps have no file; each sequence entry ends with
//! `"eos": true`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::mask::{boundary, delta, Mask, PixelLabel, RegionMask};
use crate::pnm;
use crate::sampler::{
    check_linear_extension, start_mask, validate_sequence, MaskSequence, PathSet, SequenceStep,
    Violation,
};
use crate::synth::{ImageBuffer, Provenance, Rect, SynthSample};
use crate::tree::{ManipulationTree, NodeId};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_radius: Option<usize>,
    pub samples: Vec<SampleEntry>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleEntry {
    pub sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub provenance: Vec<ProvenanceEntry>,
    pub path_sets: Vec<PathSetEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeEntry {
    pub nodes: Vec<NodeEntry>,
    pub insertion_order: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: NodeId,
    pub parent_id: Option<NodeId>,
    /// `None` for the root, whose region is the full grid.
    pub mask_file: Option<String>,
    pub depth: usize,
    pub area: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvenanceEntry {
    pub node: NodeId,
    pub source_rect: Rect,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSetEntry {
    pub seed: u64,
    pub sequences: Vec<SequenceEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub path: Vec<NodeId>,
    pub steps: Vec<String>,
    pub eos: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_files: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredPathSet {
    pub seed: u64,
    pub paths: PathSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSample {
    pub sample_id: String,
    pub image: Option<ImageBuffer>,
    pub tree: Option<ManipulationTree>,
    pub provenance: Vec<Provenance>,
    pub path_sets: Vec<StoredPathSet>,
}

impl DatasetSample {
    pub fn from_synth(sample_id: impl Into<String>, sample: SynthSample) -> Self {
        DatasetSample {
            sample_id: sample_id.into(),
            image: Some(sample.image),
            tree: Some(sample.tree),
            provenance: sample.provenance,
            path_sets: Vec::new(),
        }
    }

    /// All stored sequences, path set by path set.
    pub fn sequences(&self) -> impl Iterator<Item = &MaskSequence> + '_ {
        self.path_sets.iter().flat_map(|p| p.paths.sequences.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub width: usize,
    pub height: usize,
    /// Radius of the boundary targets written next to each valid sequence.
    pub boundary_radius: Option<usize>,
    pub samples: Vec<DatasetSample>,
}

impl Dataset {
    pub fn new(width: usize, height: usize) -> Self {
        Dataset {
            width,
            height,
            boundary_radius: None,
            samples: Vec::new(),
        }
    }

    pub fn sample(&self, sample_id: &str) -> Option<&DatasetSample> {
        self.samples.iter().find(|s| s.sample_id == sample_id)
    }

    /// Non-EOS steps over every stored sequence.
    pub fn mask_count(&self) -> usize {
        self.samples
            .iter()
            .flat_map(DatasetSample::sequences)
            .map(MaskSequence::content_len)
            .sum()
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Keep sequences that violate containment instead of failing.
    pub lenient: bool,
}

/// A sequence-level problem found in a dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SequenceIssue {
    pub sample_id: String,
    pub path_set: usize,
    pub sequence: usize,
    pub problem: Issue,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Issue {
    Sequence(Violation),
    Path { message: String },
}

impl std::fmt::Display for SequenceIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "sample {} path set {} sequence {}: ",
            self.sample_id, self.path_set, self.sequence
        )?;
        match &self.problem {
            Issue::Sequence(v) => write!(f, "{v}"),
            Issue::Path { message } => f.write_str(message),
        }
    }
}

/// Boundary of each step's newly manipulated pixels, the first step
/// measured against the all-PADDING start mask.
pub fn emit_boundary_targets(sequence: &MaskSequence, k: usize) -> Result<Vec<RegionMask>> {
    let Some((w, h)) = sequence.dims() else {
        return Ok(Vec::new());
    };
    let mut prev = start_mask(w, h)?;
    let mut out = Vec::new();
    for mask in sequence.masks() {
        out.push(boundary(&delta(mask, &prev)?, k));
        prev = mask.clone();
    }
    Ok(out)
}

/// Every containment, EOS and path problem in the dataset.
pub fn validate_dataset(ds: &Dataset) -> Vec<SequenceIssue> {
    let mut issues = Vec::new();
    for sample in &ds.samples {
        for (p, set) in sample.path_sets.iter().enumerate() {
            for (q, seq) in set.paths.sequences.iter().enumerate() {
                let issue = |problem| SequenceIssue {
                    sample_id: sample.sample_id.clone(),
                    path_set: p,
                    sequence: q,
                    problem,
                };
                for v in validate_sequence(seq).violations {
                    issues.push(issue(Issue::Sequence(v)));
                }
                if let (Some(tree), false) = (&sample.tree, seq.path.is_empty()) {
                    if let Err(e) = check_linear_extension(tree, &seq.path) {
                        issues.push(issue(Issue::Path {
                            message: e.to_string(),
                        }));
                    }
                }
            }
        }
    }
    issues
}

fn check_sample_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("unsafe sample id `{id}`")))
    }
}

fn region_mask(region: &RegionMask) -> Mask {
    Mask::from_region(region, PixelLabel::Manipulated, PixelLabel::Authentic)
}

fn write_file(root: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
    let path = root.join(rel);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::write(path, bytes)?)
}

/// Canonical manifest bytes.
pub fn manifest_bytes(manifest: &Manifest) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(manifest)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn save_dataset(ds: &Dataset, out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir)?;
    let grid = (ds.width, ds.height);
    let mut seen = std::collections::BTreeSet::new();
    let mut samples = Vec::with_capacity(ds.samples.len());
    for sample in &ds.samples {
        let id = sample.sample_id.as_str();
        check_sample_id(id)?;
        if !seen.insert(id) {
            return Err(Error::InvalidConfig(format!("duplicate sample id `{id}`")));
        }

        let image_file = match &sample.image {
            Some(img) => {
                if img.dims() != grid {
                    return Err(Error::dims(grid, img.dims()));
                }
                let rel = format!("images/{id}.ppm");
                write_file(out_dir, &rel, &pnm::encode_image(img))?;
                Some(rel)
            }
            None => None,
        };

        let tree = match &sample.tree {
            Some(tree) => {
                if tree.dims() != grid {
                    return Err(Error::dims(grid, tree.dims()));
                }
                let mut nodes = Vec::with_capacity(tree.len());
                for node in tree.nodes() {
                    let mask_file = if node.id.is_root() {
                        None
                    } else {
                        let rel = format!("trees/{id}/{}.pgm", node.id);
                        write_file(out_dir, &rel, &pnm::encode_mask(&region_mask(&node.region)))?;
                        Some(rel)
                    };
                    nodes.push(NodeEntry {
                        id: node.id,
                        parent_id: node.parent,
                        mask_file,
                        depth: node.depth,
                        area: node.area,
                    });
                }
                Some(TreeEntry {
                    nodes,
                    insertion_order: tree.insertion_order().to_vec(),
                })
            }
            None => None,
        };

        let mut path_sets = Vec::with_capacity(sample.path_sets.len());
        for (p, set) in sample.path_sets.iter().enumerate() {
            let mut sequences = Vec::with_capacity(set.paths.len());
            for (q, seq) in set.paths.sequences.iter().enumerate() {
                let mut steps = Vec::new();
                for (t, mask) in seq.masks().enumerate() {
                    if mask.dims() != grid {
                        return Err(Error::dims(grid, mask.dims()));
                    }
                    let rel = format!("masks/{id}/{p}/{q}/{}.pgm", t + 1);
                    write_file(out_dir, &rel, &pnm::encode_mask(mask))?;
                    steps.push(rel);
                }
                let boundary_files = match ds.boundary_radius {
                    Some(k) if validate_sequence(seq).is_valid() => {
                        let targets = emit_boundary_targets(seq, k)?;
                        let mut files = Vec::with_capacity(targets.len());
                        for (t, region) in targets.iter().enumerate() {
                            let rel = format!("boundaries/{id}/{p}/{q}/{}.pgm", t + 1);
                            write_file(out_dir, &rel, &pnm::encode_mask(&region_mask(region)))?;
                            files.push(rel);
                        }
                        Some(files)
                    }
                    _ => None,
                };
                sequences.push(SequenceEntry {
                    path: seq.path.clone(),
                    steps,
                    eos: seq.steps.last().is_some_and(SequenceStep::is_eos),
                    boundary_files,
                });
            }
            path_sets.push(PathSetEntry {
                seed: set.seed,
                sequences,
            });
        }

        samples.push(SampleEntry {
            sample_id: id.to_string(),
            image_file,
            tree,
            provenance: sample
                .provenance
                .iter()
                .map(|p| ProvenanceEntry {
                    node: p.node,
                    source_rect: p.source_rect,
                })
                .collect(),
            path_sets,
        });
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        grid: Grid {
            width: ds.width,
            height: ds.height,
        },
        boundary_radius: ds.boundary_radius,
        samples,
    };
    fs::write(out_dir.join(MANIFEST_FILE), manifest_bytes(&manifest)?)?;
    Ok(manifest)
}

/// Accepts either a dataset directory or the manifest file itself.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

struct Loader<'a> {
    root: &'a Path,
    grid: (usize, usize),
}

impl Loader<'_> {
    fn resolve(&self, rel: &str) -> Result<PathBuf> {
        let rel_path = Path::new(rel);
        if rel_path.is_absolute()
            || rel_path
                .components()
                .any(|c| matches!(c, std::path::Component::ParentDir))
        {
            return Err(Error::Parse(format!(
                "file reference `{rel}` escapes the dataset"
            )));
        }
        Ok(self.root.join(rel_path))
    }

    fn mask(&self, rel: &str) -> Result<Mask> {
        let mask = pnm::read_mask(&self.resolve(rel)?)?;
        if mask.dims() != self.grid {
            return Err(Error::dims(self.grid, mask.dims()));
        }
        Ok(mask)
    }

    fn image(&self, rel: &str) -> Result<ImageBuffer> {
        let img = pnm::read_image(&self.resolve(rel)?)?;
        if img.dims() != self.grid {
            return Err(Error::dims(self.grid, img.dims()));
        }
        Ok(img)
    }

    fn tree(&self, entry: &TreeEntry) -> Result<ManipulationTree> {
        let (w, h) = self.grid;
        let mut records = Vec::with_capacity(entry.nodes.len());
        for node in &entry.nodes {
            let region = match (&node.mask_file, node.id.is_root()) {
                (None, true) => RegionMask::full(w, h)?,
                (Some(rel), false) => self.mask(rel)?.manipulated_set(),
                _ => {
                    return Err(Error::InvalidTree(format!(
                        "node {} must have a mask file iff it is not the root",
                        node.id
                    )))
                }
            };
            records.push((node.id, node.parent_id, region));
        }
        let tree = ManipulationTree::from_parts(w, h, records, entry.insertion_order.clone())?;
        for node in &entry.nodes {
            let built = tree.node(node.id).expect("rebuilt from these records");
            if built.depth != node.depth || built.area != node.area {
                return Err(Error::InvalidTree(format!(
                    "node {} declares depth {} / area {} but its data gives {} / {}",
                    node.id, node.depth, node.area, built.depth, built.area
                )));
            }
        }
        Ok(tree)
    }
}

pub fn load_dataset(path: &Path, opts: LoadOptions) -> Result<Dataset> {
    let manifest_file = manifest_path(path);
    let text = fs::read(&manifest_file).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(manifest_file.clone()),
        _ => Error::Io(e),
    })?;
    let manifest: Manifest = serde_json::from_slice(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", manifest_file.display())))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Parse(format!(
            "unsupported format_version {}",
            manifest.format_version
        )));
    }
    let grid = (manifest.grid.width, manifest.grid.height);
    if grid.0 == 0 || grid.1 == 0 {
        return Err(Error::InvalidDimensions {
            width: grid.0,
            height: grid.1,
            reason: "grid dimensions must be at least 1",
        });
    }
    let root = manifest_file.parent().unwrap_or(Path::new("."));
    let loader = Loader { root, grid };

    let mut ds = Dataset::new(grid.0, grid.1);
    ds.boundary_radius = manifest.boundary_radius;
    let mut boundary_problems = Vec::new();
    for entry in &manifest.samples {
        check_sample_id(&entry.sample_id).map_err(|e| Error::Parse(e.to_string()))?;
        let image = entry
            .image_file
            .as_deref()
            .map(|f| loader.image(f))
            .transpose()?;
        let tree = entry.tree.as_ref().map(|t| loader.tree(t)).transpose()?;
        let mut provenance = Vec::with_capacity(entry.provenance.len());
        for p in &entry.provenance {
            let region = tree
                .as_ref()
                .and_then(|t| t.node(p.node))
                .filter(|n| !n.id.is_root())
                .ok_or_else(|| Error::Parse(format!("provenance for unknown node {}", p.node)))?
                .region
                .clone();
            provenance.push(Provenance {
                node: p.node,
                source_rect: p.source_rect,
                target_region: region,
            });
        }

        let mut path_sets = Vec::with_capacity(entry.path_sets.len());
        for (p, set) in entry.path_sets.iter().enumerate() {
            let mut sequences = Vec::with_capacity(set.sequences.len());
            for (q, seq_entry) in set.sequences.iter().enumerate() {
                let mut steps = seq_entry
                    .steps
                    .iter()
                    .map(|f| loader.mask(f).map(SequenceStep::Mask))
                    .collect::<Result<Vec<_>>>()?;
                if seq_entry.eos {
                    steps.push(SequenceStep::Eos);
                }
                let seq = MaskSequence {
                    steps,
                    path: seq_entry.path.clone(),
                };
                if let Some(files) = &seq_entry.boundary_files {
                    let stored = files
                        .iter()
                        .map(|f| loader.mask(f).map(|m| m.manipulated_set()))
                        .collect::<Result<Vec<_>>>()?;
                    let expected = manifest
                        .boundary_radius
                        .map(|k| emit_boundary_targets(&seq, k));
                    if !matches!(expected, Some(Ok(ref e)) if *e == stored) {
                        boundary_problems.push(format!(
                            "sample {} path set {p} sequence {q}: boundary files do not match the sequence",
                            entry.sample_id
                        ));
                    }
                }
                sequences.push(seq);
            }
            path_sets.push(StoredPathSet {
                seed: set.seed,
                paths: PathSet::new(sequences, entry.sample_id.clone()),
            });
        }
        ds.samples.push(DatasetSample {
            sample_id: entry.sample_id.clone(),
            image,
            tree,
            provenance,
            path_sets,
        });
    }

    if !opts.lenient {
        let issues = validate_dataset(&ds);
        let mut messages: Vec<String> = issues.iter().map(ToString::to_string).collect();
        messages.extend(boundary_problems);
        if !messages.is_empty() {
            let shown = messages
                .iter()
                .take(5)
                .cloned()
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::ValidationFailed(format!(
                "{} problem(s): {shown}",
                messages.len()
            )));
        }
    }
    Ok(ds)
}
