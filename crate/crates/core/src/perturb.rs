//! Deterministic corruptions of mask sequences.
//!
//! Each mode stresses one part of the score: dropping or duplicating steps
//! moves the length penalty, morphology and relabeling move the stepwise F1.
//! Outputs may break containment on purpose; a magnitude of zero is always
//! the identity.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::mask::{dilate, erode, Mask, PixelLabel, RegionMask};
use crate::sampler::{MaskSequence, SequenceStep};
use crate::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum PerturbMode {
    /// Remove the last `magnitude` content steps.
    DropLastStep,
    /// Duplicate `magnitude` randomly chosen content steps in place.
    DuplicateStep,
    /// Dilate every manipulated set by radius `magnitude`.
    DilateMasks,
    /// Erode every manipulated set by radius `magnitude`.
    ErodeMasks,
    /// Flip each pixel in or out of the manipulated set with probability `magnitude`.
    RelabelFraction,
}

impl PerturbMode {
    pub const ALL: [PerturbMode; 5] = [
        PerturbMode::DropLastStep,
        PerturbMode::DuplicateStep,
        PerturbMode::DilateMasks,
        PerturbMode::ErodeMasks,
        PerturbMode::RelabelFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbMode::DropLastStep => "drop-last-step",
            PerturbMode::DuplicateStep => "duplicate-step",
            PerturbMode::DilateMasks => "dilate-masks",
            PerturbMode::ErodeMasks => "erode-masks",
            PerturbMode::RelabelFraction => "relabel-fraction",
        }
    }
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

fn count(magnitude: f64) -> Result<usize> {
    if magnitude < 0.0 || magnitude.fract() != 0.0 || !magnitude.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "magnitude {magnitude} must be a non-negative integer for this mode"
        )));
    }
    Ok(magnitude as usize)
}

// Label for pixels that leave the manipulated set.
fn background(mask: &Mask) -> PixelLabel {
    if mask.count(PixelLabel::Padding) > 0 {
        PixelLabel::Padding
    } else {
        PixelLabel::Authentic
    }
}

fn remap(mask: &Mask, region: &RegionMask) -> Mask {
    let bg = background(mask);
    let mut out = mask.clone();
    for (label, &member) in out.labels_mut().iter_mut().zip(region.bits()) {
        if member {
            *label = PixelLabel::Manipulated;
        } else if *label == PixelLabel::Manipulated {
            *label = bg;
        }
    }
    out
}

fn map_masks(seq: &MaskSequence, mut f: impl FnMut(&Mask) -> Mask) -> MaskSequence {
    MaskSequence {
        steps: seq
            .steps
            .iter()
            .map(|s| match s {
                SequenceStep::Mask(m) => SequenceStep::Mask(f(m)),
                SequenceStep::Eos => SequenceStep::Eos,
            })
            .collect(),
        path: seq.path.clone(),
    }
}

pub fn perturb<R: Rng + ?Sized>(
    seq: &MaskSequence,
    mode: PerturbMode,
    magnitude: f64,
    rng: &mut R,
) -> Result<MaskSequence> {
    match mode {
        PerturbMode::DropLastStep => {
            let mut remaining = count(magnitude)?;
            let mut out = seq.clone();
            while remaining > 0 {
                match out.steps.iter().rposition(|s| !s.is_eos()) {
                    Some(i) => {
                        out.steps.remove(i);
                    }
                    None => break,
                }
                remaining -= 1;
            }
            Ok(out)
        }
        PerturbMode::DuplicateStep => {
            let n = count(magnitude)?;
            let mut out = seq.clone();
            for _ in 0..n {
                let content: Vec<usize> = out
                    .steps
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| !s.is_eos())
                    .map(|(i, _)| i)
                    .collect();
                if content.is_empty() {
                    break;
                }
                let i = content[rng.gen_range(0..content.len())];
                let copy = out.steps[i].clone();
                out.steps.insert(i + 1, copy);
            }
            Ok(out)
        }
        PerturbMode::DilateMasks => {
            let k = count(magnitude)?;
            if k == 0 {
                return Ok(seq.clone());
            }
            Ok(map_masks(seq, |m| {
                remap(m, &dilate(&m.manipulated_set(), k))
            }))
        }
        PerturbMode::ErodeMasks => {
            let k = count(magnitude)?;
            if k == 0 {
                return Ok(seq.clone());
            }
            Ok(map_masks(seq, |m| {
                remap(m, &erode(&m.manipulated_set(), k))
            }))
        }
        PerturbMode::RelabelFraction => {
            if !(0.0..=1.0).contains(&magnitude) {
                return Err(Error::InvalidConfig(format!(
                    "relabel fraction {magnitude} must lie in [0, 1]"
                )));
            }
            if magnitude == 0.0 {
                return Ok(seq.clone());
            }
            Ok(map_masks(seq, |m| {
                let bg = background(m);
                let mut out = m.clone();
                for label in out.labels_mut() {
                    if rng.gen_bool(magnitude) {
                        *label = if *label == PixelLabel::Manipulated {
                            bg
                        } else {
                            PixelLabel::Manipulated
                        };
                    }
                }
                out
            }))
        }
    }
}
