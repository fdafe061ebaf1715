//! Pixel-label masks and binary region algebra.
//!
//! A [`Mask`] is the unit of every sequence step. Each pixel carries one of
//! three labels; the binary view used by every metric treats
//! [`PixelLabel::Manipulated`] as the positive class and both other labels as
//! negative. A [`RegionMask`] is a plain boolean grid used for tree regions,
//! deltas and boundaries.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Label of a single mask pixel.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PixelLabel {
    Authentic,
    Manipulated,
    /// Not yet revealed at this step.
    Padding,
}

impl PixelLabel {
    /// Byte code used in P5 mask files.
    pub const fn code(self) -> u8 {
        match self {
            PixelLabel::Authentic => 0,
            PixelLabel::Padding => 128,
            PixelLabel::Manipulated => 255,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PixelLabel::Authentic),
            128 => Some(PixelLabel::Padding),
            255 => Some(PixelLabel::Manipulated),
            _ => None,
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "width and height must be at least 1",
        });
    }
    Ok(())
}

/// A labeled pixel grid in row-major order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    labels: Vec<PixelLabel>,
}

impl Mask {
    pub fn filled(width: usize, height: usize, label: PixelLabel) -> Result<Self> {
        check_dims(width, height)?;
        Ok(Mask {
            width,
            height,
            labels: vec![label; width * height],
        })
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<PixelLabel>) -> Result<Self> {
        check_dims(width, height)?;
        if labels.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "label count does not match width * height",
            });
        }
        Ok(Mask {
            width,
            height,
            labels,
        })
    }

    /// Paints `region` with `inside` and every other pixel with `outside`.
    pub fn from_region(region: &RegionMask, inside: PixelLabel, outside: PixelLabel) -> Self {
        Mask {
            width: region.width,
            height: region.height,
            labels: region
                .bits
                .iter()
                .map(|&b| if b { inside } else { outside })
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[PixelLabel] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [PixelLabel] {
        &mut self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> PixelLabel {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: PixelLabel) {
        self.labels[y * self.width + x] = label;
    }

    pub fn count(&self, label: PixelLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Binary view: members are the MANIPULATED pixels.
    pub fn manipulated_set(&self) -> RegionMask {
        RegionMask {
            width: self.width,
            height: self.height,
            bits: self
                .labels
                .iter()
                .map(|&l| l == PixelLabel::Manipulated)
                .collect(),
        }
    }
}

/// A pure region on a pixel grid.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegionMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn empty(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(RegionMask {
            width,
            height,
            bits: vec![false; width * height],
        })
    }

    pub fn full(width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        Ok(RegionMask {
            width,
            height,
            bits: vec![true; width * height],
        })
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "bit count does not match width * height",
            });
        }
        Ok(RegionMask {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut member: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        check_dims(width, height)?;
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(member(x, y));
            }
        }
        Ok(RegionMask {
            width,
            height,
            bits,
        })
    }

    /// Region containing exactly the listed `(x, y)` pixels.
    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut region = Self::empty(width, height)?;
        for (x, y) in pixels {
            region.set(x, y, true);
        }
        Ok(region)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, member: bool) {
        self.bits[y * self.width + x] = member;
    }

    /// Number of member pixels.
    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Member pixel coordinates in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)`, `None` for an empty region.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for (x, y) in self.pixels() {
            bbox = Some(match bbox {
                None => (x, y, x, y),
                Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
            });
        }
        bbox
    }

    fn check_same(&self, other: &RegionMask) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }

    /// `true` iff every member of `self` is a member of `other`.
    pub fn is_subset(&self, other: &RegionMask) -> Result<bool> {
        self.check_same(other)?;
        Ok(self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b))
    }

    pub fn union(&self, other: &RegionMask) -> Result<RegionMask> {
        self.check_same(other)?;
        Ok(RegionMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a || b)
                .collect(),
        })
    }

    pub fn union_in_place(&mut self, other: &RegionMask) -> Result<()> {
        self.check_same(other)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub fn intersection(&self, other: &RegionMask) -> Result<RegionMask> {
        self.check_same(other)?;
        Ok(RegionMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && b)
                .collect(),
        })
    }

    /// Members of `self` that are not members of `other`.
    pub fn difference(&self, other: &RegionMask) -> Result<RegionMask> {
        self.check_same(other)?;
        Ok(RegionMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a && !b)
                .collect(),
        })
    }

    pub fn complement(&self) -> RegionMask {
        RegionMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }
}

/// Binary view of a mask. See [`Mask::manipulated_set`].
pub fn manipulated_set(m: &Mask) -> RegionMask {
    m.manipulated_set()
}

/// Binary F1 with MANIPULATED as positive, computed over the full grid.
///
/// Returns 1.0 when neither mask has a MANIPULATED pixel.
pub fn f1_score(pred: &Mask, gt: &Mask) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims(pred.dims(), gt.dims()));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        match (p == PixelLabel::Manipulated, g == PixelLabel::Manipulated) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fn_ == 0 {
        return Ok(1.0);
    }
    Ok((2 * tp) as f64 / (2 * tp + fp + fn_) as f64)
}

/// Pixels newly manipulated between two consecutive steps.
pub fn delta(m_next: &Mask, m_prev: &Mask) -> Result<RegionMask> {
    let next = m_next.manipulated_set();
    let prev = m_prev.manipulated_set();
    if !prev.is_subset(&next)? {
        return Err(Error::ContainmentViolation);
    }
    next.difference(&prev)
}

// Square structuring element of radius k, borders replicated. Because edge
// replication only ever repeats pixels already inside the window, the clamped
// window is exactly the window intersected with the grid.
fn morph(r: &RegionMask, k: usize, dilate: bool) -> RegionMask {
    let (w, h) = r.dims();
    let reduce = |acc: bool, b: bool| if dilate { acc || b } else { acc && b };
    let init = !dilate;

    let mut rows = vec![init; w * h];
    for y in 0..h {
        for x in 0..w {
            let lo = x.saturating_sub(k);
            let hi = (x + k).min(w - 1);
            rows[y * w + x] = (lo..=hi).fold(init, |acc, xx| reduce(acc, r.bits[y * w + xx]));
        }
    }
    let mut out = vec![init; w * h];
    for y in 0..h {
        let lo = y.saturating_sub(k);
        let hi = (y + k).min(h - 1);
        for x in 0..w {
            out[y * w + x] = (lo..=hi).fold(init, |acc, yy| reduce(acc, rows[yy * w + x]));
        }
    }
    RegionMask {
        width: w,
        height: h,
        bits: out,
    }
}

pub fn dilate(r: &RegionMask, k: usize) -> RegionMask {
    morph(r, k, true)
}

pub fn erode(r: &RegionMask, k: usize) -> RegionMask {
    morph(r, k, false)
}

/// Morphological gradient: `dilate(r, k) \ erode(r, k)`.
///
/// `k = 0` yields an empty boundary.
pub fn boundary(r: &RegionMask, k: usize) -> RegionMask {
    let dilated = dilate(r, k);
    let eroded = erode(r, k);
    dilated
        .difference(&eroded)
        .expect("morphology preserves dimensions")
}
