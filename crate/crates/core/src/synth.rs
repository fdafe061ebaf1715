//! Synthetic multi-step copy-move composites.
//!
//! A sample starts from a base image (a real photo or a procedural texture),
//! draws a handful of rectangular or elliptical target regions, pastes into
//! each one a shifted copy of the current image content, and records every
//! region in a [`ManipulationTree`].

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mask::RegionMask;
use crate::rng::{self, PipelineRng};
use crate::tree::{ManipulationTree, NodeId};
use crate::{Error, Result};

/// Region placement attempts before [`Error::PlacementFailed`].
pub const PLACEMENT_ATTEMPTS: usize = 64;
/// Whole-sample attempts, each on its own derived stream.
pub const SAMPLE_ATTEMPTS: usize = 8;
const DEPTH_ATTEMPTS: usize = 8;

/// Row-major 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn from_raw(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(Error::InvalidDimensions {
                width,
                height,
                reason: "RGB data length must be width * height * 3",
            });
        }
        Ok(ImageBuffer {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::from_raw(width, height, data)
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rectangle,
    Ellipse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub nodes_min: usize,
    pub nodes_max: usize,
    /// Probability that a new region is placed inside an existing node.
    pub nest_prob: f64,
    /// Region area as a fraction of its container's area.
    pub area_frac_min: f64,
    pub area_frac_max: f64,
    pub shapes: Vec<Shape>,
    pub max_depth: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            nodes_min: 2,
            nodes_max: 6,
            nest_prob: 0.5,
            area_frac_min: 0.05,
            area_frac_max: 0.40,
            shapes: vec![Shape::Rectangle, Shape::Ellipse],
            max_depth: 4,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(0.0..=1.0).contains(&self.nest_prob) {
            return bad("nest_prob must lie in [0, 1]");
        }
        if !(self.area_frac_min > 0.0
            && self.area_frac_min <= self.area_frac_max
            && self.area_frac_max < 1.0)
        {
            return bad("area fractions must satisfy 0 < min <= max < 1");
        }
        if self.nodes_min < 1 || self.nodes_min > self.nodes_max {
            return bad("node bounds must satisfy 1 <= nodes_min <= nodes_max");
        }
        if self.shapes.is_empty() {
            return bad("at least one region shape is required");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub node: NodeId,
    /// Bounding box the pasted content was copied from.
    pub source_rect: Rect,
    pub target_region: RegionMask,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthSample {
    pub image: ImageBuffer,
    pub tree: ManipulationTree,
    pub provenance: Vec<Provenance>,
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Deterministic multi-octave value-noise texture.
pub fn generate_texture(width: usize, height: usize, seed: u64) -> Result<ImageBuffer> {
    if width < 16 || height < 16 {
        return Err(Error::InvalidDimensions {
            width,
            height,
            reason: "textures need at least 16x16 pixels",
        });
    }
    let mut rng = rng::stream(seed, 0);
    // (cell size in pixels, weight)
    let octaves = [(16.0, 0.55), (8.0, 0.30), (4.0, 0.15)];
    let mut acc = vec![0.0f64; width * height * 3];
    for (cell, weight) in octaves {
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh * 3).map(|_| rng.gen::<f64>()).collect();
        let at = |gx: usize, gy: usize, c: usize| lattice[(gy * gw + gx) * 3 + c];
        for y in 0..height {
            let fy = y as f64 / cell;
            let (gy, ty) = (fy.floor() as usize, smoothstep(fy.fract()));
            for x in 0..width {
                let fx = x as f64 / cell;
                let (gx, tx) = (fx.floor() as usize, smoothstep(fx.fract()));
                for c in 0..3 {
                    let top = at(gx, gy, c) * (1.0 - tx) + at(gx + 1, gy, c) * tx;
                    let bottom = at(gx, gy + 1, c) * (1.0 - tx) + at(gx + 1, gy + 1, c) * tx;
                    acc[(y * width + x) * 3 + c] += weight * (top * (1.0 - ty) + bottom * ty);
                }
            }
        }
    }
    let data = acc
        .into_iter()
        .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    ImageBuffer::from_raw(width, height, data)
}

fn rasterize(dims: (usize, usize), shape: Shape, rect: Rect) -> RegionMask {
    let (w, h) = dims;
    let cx = rect.x as f64 + rect.width as f64 / 2.0;
    let cy = rect.y as f64 + rect.height as f64 / 2.0;
    let (rx, ry) = (rect.width as f64 / 2.0, rect.height as f64 / 2.0);
    RegionMask::from_fn(w, h, |x, y| {
        let inside_box = (rect.x..rect.x + rect.width).contains(&x)
            && (rect.y..rect.y + rect.height).contains(&y);
        match shape {
            Shape::Rectangle => inside_box,
            Shape::Ellipse => {
                let dx = (x as f64 + 0.5 - cx) / rx;
                let dy = (y as f64 + 0.5 - cy) / ry;
                inside_box && dx * dx + dy * dy <= 1.0
            }
        }
    })
    .expect("dimensions come from an existing region")
}

/// Draws a rectangle or ellipse fully inside `container` whose area is a
/// fraction in `[area_frac_min, area_frac_max]` of the container's area.
pub fn sample_region(
    container: &RegionMask,
    cfg: &SynthConfig,
    rng: &mut PipelineRng,
) -> Result<RegionMask> {
    if container.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let area = container.area() as f64;
    let min_area = ((cfg.area_frac_min * area).ceil() as usize).max(1);
    let max_area = (cfg.area_frac_max * area).floor() as usize;
    if min_area > max_area {
        return Err(Error::PlacementFailed { attempts: 0 });
    }
    let (x0, y0, x1, y1) = container.bounding_box().expect("nonempty");
    let (bw, bh) = (x1 - x0 + 1, y1 - y0 + 1);
    let members: Vec<(usize, usize)> = container.pixels().collect();

    for _ in 0..PLACEMENT_ATTEMPTS {
        let shape = *cfg.shapes.choose(rng).expect("validated nonempty");
        let target = rng.gen_range(min_area..=max_area) as f64;
        let aspect = rng.gen_range(0.5f64.ln()..=2.0f64.ln()).exp();
        let box_area = match shape {
            Shape::Rectangle => target,
            Shape::Ellipse => target * 4.0 / std::f64::consts::PI,
        };
        let height = ((box_area / aspect).sqrt().round() as usize).clamp(1, bh);
        let width = ((box_area / height as f64).round() as usize).clamp(1, bw);
        // centre on a random container pixel, then slide inside the bbox
        let (cx, cy) = *members.choose(rng).expect("nonempty");
        let x = cx.saturating_sub(width / 2).clamp(x0, x1 + 1 - width);
        let y = cy.saturating_sub(height / 2).clamp(y0, y1 + 1 - height);
        let region = rasterize(
            container.dims(),
            shape,
            Rect {
                x,
                y,
                width,
                height,
            },
        );
        let got = region.area();
        if got >= min_area && got <= max_area && region.is_subset(container)? {
            return Ok(region);
        }
    }
    Err(Error::PlacementFailed {
        attempts: PLACEMENT_ATTEMPTS,
    })
}

/// Replaces the pixels of `target` with content copied from the same shape
/// shifted by a random non-zero offset that keeps the source on the image.
///
/// Returns the composite and the bounding box of the copied source.
pub fn apply_copy_move(
    img: &ImageBuffer,
    target: &RegionMask,
    rng: &mut PipelineRng,
) -> Result<(ImageBuffer, Rect)> {
    if target.dims() != img.dims() {
        return Err(Error::dims(img.dims(), target.dims()));
    }
    let (x0, y0, x1, y1) = target.bounding_box().ok_or(Error::EmptyRegion)?;
    let (w, h) = img.dims();
    let dx_range = (-(x0 as isize), (w - 1 - x1) as isize);
    let dy_range = (-(y0 as isize), (h - 1 - y1) as isize);
    let nx = (dx_range.1 - dx_range.0 + 1) as usize;
    let ny = (dy_range.1 - dy_range.0 + 1) as usize;
    let candidates = nx * ny - 1;
    if candidates == 0 {
        return Err(Error::NoValidSourceOffset);
    }
    // enumerate offsets row-major, skipping (0, 0)
    let zero = (-dy_range.0) as usize * nx + (-dx_range.0) as usize;
    let mut pick = rng.gen_range(0..candidates);
    if pick >= zero {
        pick += 1;
    }
    let dx = dx_range.0 + (pick % nx) as isize;
    let dy = dy_range.0 + (pick / nx) as isize;

    let mut out = img.clone();
    for (x, y) in target.pixels() {
        let sx = (x as isize + dx) as usize;
        let sy = (y as isize + dy) as usize;
        out.set_pixel(x, y, img.pixel(sx, sy));
    }
    let source = Rect {
        x: (x0 as isize + dx) as usize,
        y: (y0 as isize + dy) as usize,
        width: x1 - x0 + 1,
        height: y1 - y0 + 1,
    };
    Ok((out, source))
}

fn is_retryable(e: &Error) -> bool {
    matches!(
        e,
        Error::PlacementFailed { .. } | Error::NoValidSourceOffset
    )
}

fn pick_container(tree: &ManipulationTree, cfg: &SynthConfig, rng: &mut PipelineRng) -> NodeId {
    if !rng.gen_bool(cfg.nest_prob) {
        return NodeId::ROOT;
    }
    let eligible = |id: &NodeId| !id.is_root() && tree.node(*id).unwrap().depth < cfg.max_depth;
    let leaves: Vec<NodeId> = tree.leaves().into_iter().filter(eligible).collect();
    if let Some(&id) = leaves.choose(rng) {
        return id;
    }
    let inner: Vec<NodeId> = tree.nodes().map(|n| n.id).filter(eligible).collect();
    inner.choose(rng).copied().unwrap_or(NodeId::ROOT)
}

fn synthesize_once(
    base: &ImageBuffer,
    cfg: &SynthConfig,
    rng: &mut PipelineRng,
) -> Result<SynthSample> {
    let (w, h) = base.dims();
    let mut tree = ManipulationTree::new(w, h)?;
    let mut image = base.clone();
    let mut provenance = Vec::new();
    let count = rng.gen_range(cfg.nodes_min..=cfg.nodes_max);
    for _ in 0..count {
        let container = pick_container(&tree, cfg, rng);
        let container_region = tree.node(container).unwrap().region.clone();
        let mut placed = None;
        for _ in 0..DEPTH_ATTEMPTS {
            let region = sample_region(&container_region, cfg, rng)?;
            let parent = tree.parent_for(&region)?;
            if tree.node(parent).unwrap().depth < cfg.max_depth {
                placed = Some(region);
                break;
            }
        }
        let region = placed.ok_or(Error::PlacementFailed {
            attempts: DEPTH_ATTEMPTS,
        })?;
        let (composite, source_rect) = apply_copy_move(&image, &region, rng)?;
        image = composite;
        let node = tree.insert_region(region.clone())?;
        provenance.push(Provenance {
            node,
            source_rect,
            target_region: region,
        });
    }
    Ok(SynthSample {
        image,
        tree,
        provenance,
    })
}

/// Builds one composite and its manipulation tree. Fully determined by
/// `base` and `cfg`; placement failures restart on a fresh stream up to
/// [`SAMPLE_ATTEMPTS`] times.
pub fn synthesize(base: &ImageBuffer, cfg: &SynthConfig) -> Result<SynthSample> {
    cfg.validate()?;
    let mut last = None;
    for attempt in 0..SAMPLE_ATTEMPTS as u64 {
        let mut rng = rng::stream(cfg.seed, attempt);
        match synthesize_once(base, cfg, &mut rng) {
            Ok(sample) => return Ok(sample),
            Err(e) if is_retryable(&e) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt ran"))
}
