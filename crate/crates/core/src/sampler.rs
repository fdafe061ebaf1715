//! Ground-truth mask sequences.
//!
//! A manipulation tree fixes which regions nest inside which, but not the
//! order the edits happened in. Reverse sampling repeatedly removes a
//! uniformly chosen leaf; reversing the removal order yields a forward path
//! in which every node follows its ancestors. A path becomes a sequence of
//! accumulated masks (revealed pixels MANIPULATED, the rest PADDING), one
//! full-reveal step (rest AUTHENTIC) and a terminal EOS marker.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::Serialize;

use crate::mask::{Mask, PixelLabel, RegionMask};
use crate::tree::{ManipulationTree, NodeId};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SequenceStep {
    Mask(Mask),
    Eos,
}

impl SequenceStep {
    pub fn is_eos(&self) -> bool {
        matches!(self, SequenceStep::Eos)
    }

    pub fn mask(&self) -> Option<&Mask> {
        match self {
            SequenceStep::Mask(m) => Some(m),
            SequenceStep::Eos => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct MaskSequence {
    pub steps: Vec<SequenceStep>,
    /// Tree nodes that produced the accumulation steps, in order. Empty for
    /// sequences that did not come from a tree.
    pub path: Vec<NodeId>,
}

impl MaskSequence {
    /// Content steps followed by EOS.
    pub fn from_masks(masks: Vec<Mask>, path: Vec<NodeId>) -> Self {
        let mut steps: Vec<_> = masks.into_iter().map(SequenceStep::Mask).collect();
        steps.push(SequenceStep::Eos);
        MaskSequence { steps, path }
    }

    /// Non-EOS masks in order.
    pub fn masks(&self) -> impl Iterator<Item = &Mask> + '_ {
        self.steps.iter().filter_map(SequenceStep::mask)
    }

    /// Number of non-EOS steps.
    pub fn content_len(&self) -> usize {
        self.masks().count()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.masks().next().map(Mask::dims)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PathSet {
    pub sequences: Vec<MaskSequence>,
    pub tree_ref: String,
}

impl PathSet {
    pub fn new(sequences: Vec<MaskSequence>, tree_ref: impl Into<String>) -> Self {
        PathSet {
            sequences,
            tree_ref: tree_ref.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// All-PADDING initial mask.
pub fn start_mask(width: usize, height: usize) -> Result<Mask> {
    Mask::filled(width, height, PixelLabel::Padding)
}

/// Draws one forward manipulation order by reverse leaf sampling.
pub fn reverse_sample_path<R: Rng + ?Sized>(
    tree: &ManipulationTree,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    if tree.is_empty() {
        return Err(Error::EmptyTree);
    }
    let mut remaining = tree.clone();
    let mut removed = Vec::with_capacity(tree.len() - 1);
    while !remaining.is_empty() {
        let leaves = remaining.leaves();
        let pick = leaves[rng.gen_range(0..leaves.len())];
        remaining.remove_leaf(pick)?;
        removed.push(pick);
    }
    removed.reverse();
    Ok(removed)
}

/// Checks that `path` lists every non-root node once with ancestors first.
pub fn check_linear_extension(tree: &ManipulationTree, path: &[NodeId]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &id in path {
        let node = tree
            .node(id)
            .filter(|_| !id.is_root())
            .ok_or_else(|| Error::InvalidPath(format!("unknown node {id}")))?;
        if !seen.insert(id) {
            return Err(Error::InvalidPath(format!("node {id} repeated")));
        }
        if let Some(p) = node.parent.filter(|p| !p.is_root()) {
            if !seen.contains(&p) {
                return Err(Error::InvalidPath(format!(
                    "node {id} appears before its parent {p}"
                )));
            }
        }
    }
    if seen.len() != tree.len() - 1 {
        return Err(Error::InvalidPath(format!(
            "path covers {} of {} nodes",
            seen.len(),
            tree.len() - 1
        )));
    }
    Ok(())
}

pub fn path_to_sequence(tree: &ManipulationTree, path: &[NodeId]) -> Result<MaskSequence> {
    check_linear_extension(tree, path)?;
    let (w, h) = tree.dims();
    let mut revealed = RegionMask::empty(w, h)?;
    let mut masks = Vec::with_capacity(path.len() + 1);
    for &id in path {
        revealed.union_in_place(&tree.node(id).unwrap().region)?;
        masks.push(Mask::from_region(
            &revealed,
            PixelLabel::Manipulated,
            PixelLabel::Padding,
        ));
    }
    masks.push(Mask::from_region(
        &revealed,
        PixelLabel::Manipulated,
        PixelLabel::Authentic,
    ));
    Ok(MaskSequence::from_masks(masks, path.to_vec()))
}

/// `n` independent reverse-sampled sequences. Duplicates are kept.
pub fn sample_path_set<R: Rng + ?Sized>(
    tree: &ManipulationTree,
    n: usize,
    rng: &mut R,
) -> Result<PathSet> {
    let sequences = (0..n)
        .map(|_| {
            let path = reverse_sample_path(tree, rng)?;
            path_to_sequence(tree, &path)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathSet::new(sequences, String::new()))
}

/// Two-step reading of a single binary forgery mask: the manipulated region
/// over PADDING, then the full reveal over AUTHENTIC, then EOS.
pub fn decompose_one_shot(binary: &RegionMask) -> MaskSequence {
    MaskSequence::from_masks(
        vec![
            Mask::from_region(binary, PixelLabel::Manipulated, PixelLabel::Padding),
            Mask::from_region(binary, PixelLabel::Manipulated, PixelLabel::Authentic),
        ],
        Vec::new(),
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingEos,
    /// EOS at a 1-based step index other than the last.
    MisplacedEos {
        step: usize,
    },
    /// Step dimensions differ from those of step 1.
    DimensionMismatch {
        step: usize,
    },
    /// The manipulated set of `from_step` is not contained in that of `to_step`.
    Containment {
        from_step: usize,
        to_step: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingEos => write!(f, "sequence does not end with EOS"),
            Violation::MisplacedEos { step } => write!(f, "EOS at step {step} is not last"),
            Violation::DimensionMismatch { step } => {
                write!(f, "step {step} has different dimensions")
            }
            Violation::Containment { from_step, to_step } => {
                write!(
                    f,
                    "containment broken between steps {from_step} and {to_step}"
                )
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_sequence(s: &MaskSequence) -> ValidationReport {
    let mut violations = Vec::new();
    match s.steps.last() {
        Some(SequenceStep::Eos) => {}
        _ => violations.push(Violation::MissingEos),
    }
    let last = s.steps.len().saturating_sub(1);
    for (i, step) in s.steps.iter().enumerate() {
        if step.is_eos() && i != last {
            violations.push(Violation::MisplacedEos { step: i + 1 });
        }
    }
    let dims = s.dims();
    let mut prev: Option<(usize, RegionMask)> = None;
    for (i, step) in s.steps.iter().enumerate() {
        let Some(mask) = step.mask() else { continue };
        if Some(mask.dims()) != dims {
            violations.push(Violation::DimensionMismatch { step: i + 1 });
            continue;
        }
        let current = mask.manipulated_set();
        if let Some((j, before)) = &prev {
            if !before.is_subset(&current).unwrap_or(false) {
                violations.push(Violation::Containment {
                    from_step: j + 1,
                    to_step: i + 1,
                });
            }
        }
        prev = Some((i, current));
    }
    ValidationReport { violations }
}
