//! Anisotropic diffusion in plane-origin distance space.
//!
//! Each iteration first blends the confident sparse seeds into the current
//! estimate, then replaces every pixel by a softmax-weighted average of the
//! valid pixels in its `kernel × kernel` window. Weights come from the
//! similarity of guidance embeddings and are renormalized over valid
//! neighbors, so the invalid marker never enters an average.

mod config;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{AffinityTransforms, ConductanceVariant, DiffusionConfig, Projection};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::frontend::GuidanceFeatures;
use crate::grid::{is_valid, ConfidenceMap, DepthMap, NormalMap, PlaneOriginMap};
use crate::plane_origin::{depth_to_plane_origin, plane_origin_to_depth};

/// Cosine similarity; zero when either vector has zero norm.
#[inline]
fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

#[inline]
fn raw_affinity(center: &[f64], neighbor: &[f64], cfg: &DiffusionConfig) -> f64 {
    match cfg.variant {
        ConductanceVariant::AsymmetricCosine | ConductanceVariant::SymmetricCosine => {
            cosine(center, neighbor) / cfg.temperature
        }
        ConductanceVariant::Euclidean => {
            let d2: f64 = center
                .iter()
                .zip(neighbor)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            -d2 / (2.0 * cfg.sigma * cfg.sigma)
        }
        ConductanceVariant::DotProduct => center.iter().zip(neighbor).map(|(a, b)| a * b).sum(),
    }
}

/// In-place softmax; the maximum is subtracted first so large affinities cannot overflow.
fn softmax(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// Center- and neighbor-side embeddings of every pixel.
struct Embeddings {
    dim: usize,
    center: Vec<f64>,
    neighbor: Vec<f64>,
}

impl Embeddings {
    fn new(
        guidance: &GuidanceFeatures,
        cfg: &DiffusionConfig,
        transforms: &AffinityTransforms,
    ) -> Result<Self> {
        let f_in = guidance.channels();
        transforms.validate(Some(f_in))?;
        let g = transforms.neighbor_side(cfg.variant);
        let dim = transforms.f.out_dim(f_in);
        let n = guidance.width() * guidance.height();
        let mut center = vec![0.0; n * dim];
        let mut neighbor = vec![0.0; n * dim];
        for i in 0..n {
            transforms
                .f
                .apply(guidance.at(i), &mut center[i * dim..(i + 1) * dim]);
            g.apply(guidance.at(i), &mut neighbor[i * dim..(i + 1) * dim]);
        }
        Ok(Self {
            dim,
            center,
            neighbor,
        })
    }

    #[inline]
    fn center(&self, i: usize) -> &[f64] {
        &self.center[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    fn neighbor(&self, i: usize) -> &[f64] {
        &self.neighbor[i * self.dim..(i + 1) * self.dim]
    }
}

fn check_pixel(g: &GuidanceFeatures, (u, v): (usize, usize)) -> Result<usize> {
    if u >= g.width() || v >= g.height() {
        return Err(Error::invalid(format!(
            "pixel ({u}, {v}) outside {}x{} grid",
            g.width(),
            g.height()
        )));
    }
    Ok(v * g.width() + u)
}

/// Normalized conductance from `center` to each pixel of `neighbors`.
///
/// The result is non-negative and sums to one.
pub fn conductance_weights(
    guidance: &GuidanceFeatures,
    center: (usize, usize),
    neighbors: &[(usize, usize)],
    cfg: &DiffusionConfig,
    transforms: &AffinityTransforms,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if neighbors.is_empty() {
        return Err(Error::invalid("conductance needs at least one neighbor"));
    }
    transforms.validate(Some(guidance.channels()))?;
    let dim = transforms.f.out_dim(guidance.channels());
    let g = transforms.neighbor_side(cfg.variant);

    let ci = check_pixel(guidance, center)?;
    let mut fc = vec![0.0; dim];
    transforms.f.apply(guidance.at(ci), &mut fc);
    let mut gj = vec![0.0; dim];
    let mut weights = Vec::with_capacity(neighbors.len());
    for &px in neighbors {
        let j = check_pixel(guidance, px)?;
        g.apply(guidance.at(j), &mut gj);
        weights.push(raw_affinity(&fc, &gj, cfg));
    }
    softmax(&mut weights);
    Ok(weights)
}

/// Precomputed raw affinities of every pixel to each offset of its window.
///
/// Guidance does not change across iterations, so the affinities are shared by
/// all diffusion steps of one refinement; only the set of valid neighbors
/// (and hence the normalization) can change.
struct Stencil {
    width: usize,
    height: usize,
    radius: usize,
    kernel: usize,
    /// `kernel²` entries per pixel; NaN for offsets outside the grid.
    affinity: Vec<f64>,
}

impl Stencil {
    fn new(
        guidance: &GuidanceFeatures,
        cfg: &DiffusionConfig,
        transforms: &AffinityTransforms,
    ) -> Result<Self> {
        cfg.validate()?;
        let emb = Embeddings::new(guidance, cfg, transforms)?;
        let (w, h) = (guidance.width(), guidance.height());
        let radius = cfg.radius() as isize;
        let kernel = cfg.kernel;
        let mut affinity = vec![f64::NAN; w * h * kernel * kernel];
        affinity
            .par_chunks_mut(kernel * kernel)
            .enumerate()
            .for_each(|(i, slots)| {
                let (u, v) = ((i % w) as isize, (i / w) as isize);
                let center = emb.center(i);
                for dy in -radius..=radius {
                    for dx in -radius..=radius {
                        let (x, y) = (u + dx, v + dy);
                        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                            continue;
                        }
                        let j = y as usize * w + x as usize;
                        let slot = ((dy + radius) * kernel as isize + (dx + radius)) as usize;
                        slots[slot] = raw_affinity(center, emb.neighbor(j), cfg);
                    }
                }
            });
        Ok(Self {
            width: w,
            height: h,
            radius: radius as usize,
            kernel,
            affinity,
        })
    }

    fn step(&self, input: &PlaneOriginMap) -> PlaneOriginMap {
        let (w, kernel) = (self.width, self.kernel);
        let r = self.radius as isize;
        let src = input.as_slice();
        let mut out = vec![0.0; src.len()];
        out.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
            let mut vals = Vec::with_capacity(kernel * kernel);
            let mut affs = Vec::with_capacity(kernel * kernel);
            for (u, px) in row.iter_mut().enumerate() {
                let i = v * w + u;
                let slots = &self.affinity[i * kernel * kernel..(i + 1) * kernel * kernel];
                vals.clear();
                affs.clear();
                for dy in -r..=r {
                    let y = v as isize + dy;
                    if y < 0 || y >= self.height as isize {
                        continue;
                    }
                    for dx in -r..=r {
                        let x = u as isize + dx;
                        if x < 0 || x >= w as isize {
                            continue;
                        }
                        let p = src[y as usize * w + x as usize];
                        if is_valid(p) {
                            vals.push(p);
                            affs.push(slots[((dy + r) * kernel as isize + dx + r) as usize]);
                        }
                    }
                }
                if vals.is_empty() {
                    continue;
                }
                softmax(&mut affs);
                *px = affs.iter().zip(&vals).map(|(a, p)| a * p).sum();
            }
        });
        PlaneOriginMap::from_vec(self.width, self.height, out).expect("shape preserved")
    }
}

/// One diffusion step. All reads come from `plane`; pixels without a valid
/// neighbor stay invalid.
pub fn diffuse_step(
    plane: &PlaneOriginMap,
    guidance: &GuidanceFeatures,
    cfg: &DiffusionConfig,
    transforms: &AffinityTransforms,
) -> Result<PlaneOriginMap> {
    check_guidance(plane, guidance)?;
    Ok(Stencil::new(guidance, cfg, transforms)?.step(plane))
}

fn check_guidance(plane: &PlaneOriginMap, guidance: &GuidanceFeatures) -> Result<()> {
    if plane.width() != guidance.width() || plane.height() != guidance.height() {
        return Err(Error::DimensionMismatch {
            what: "guidance features",
            expected_w: plane.width(),
            expected_h: plane.height(),
            got_w: guidance.width(),
            got_h: guidance.height(),
        });
    }
    Ok(())
}

/// Blends confident seeds into the estimate: `P ← M·P̄ + (1 − M)·P` where `P̄ > 0`.
pub fn replace_seeds(
    plane: &PlaneOriginMap,
    seeds: &PlaneOriginMap,
    confidence: &ConfidenceMap,
) -> Result<PlaneOriginMap> {
    plane.check_shape(seeds, "seed plane-origin map")?;
    plane.check_shape(confidence, "confidence map")?;
    let data = plane
        .as_slice()
        .iter()
        .zip(seeds.as_slice())
        .zip(confidence.as_slice())
        .map(|((&p, &s), &m)| {
            if !is_valid(s) {
                p
            } else if !is_valid(p) {
                // No estimate to blend with: any confidence at all admits the seed.
                if m > 0.0 {
                    s
                } else {
                    p
                }
            } else {
                m * s + (1.0 - m) * p
            }
        })
        .collect();
    PlaneOriginMap::from_vec(plane.width(), plane.height(), data)
}

/// Runs the replace/diffuse loop directly on plane-origin maps.
pub fn refine_plane_origin(
    plane: &PlaneOriginMap,
    seeds: &PlaneOriginMap,
    confidence: &ConfidenceMap,
    guidance: &GuidanceFeatures,
    cfg: &DiffusionConfig,
    transforms: &AffinityTransforms,
) -> Result<PlaneOriginMap> {
    cfg.validate()?;
    check_guidance(plane, guidance)?;
    plane.check_shape(seeds, "seed plane-origin map")?;
    plane.check_shape(confidence, "confidence map")?;
    let ones;
    let confidence = if cfg.use_confidence {
        confidence
    } else {
        ones = ConfidenceMap::from_vec(plane.width(), plane.height(), vec![1.0; plane.len()])?;
        &ones
    };
    let stencil = Stencil::new(guidance, cfg, transforms)?;
    let mut current = plane.clone();
    for _ in 0..cfg.iterations {
        if cfg.use_replacement {
            current = replace_seeds(&current, seeds, confidence)?;
        }
        current = stencil.step(&current);
    }
    Ok(current)
}

/// Everything the refinement consumes besides its configuration.
#[derive(Debug, Clone, Copy)]
pub struct RefineInputs<'a> {
    /// Dense coarse depth.
    pub coarse: &'a DepthMap,
    /// Sparse seed depth; zero where no measurement exists.
    pub sparse: &'a DepthMap,
    pub normals: &'a NormalMap,
    pub confidence: &'a ConfidenceMap,
    pub intrinsics: &'a Intrinsics,
    pub guidance: &'a GuidanceFeatures,
}

/// Full refinement: transform to plane-origin space, iterate replace/diffuse,
/// transform back to depth.
pub fn refine(
    inputs: &RefineInputs<'_>,
    cfg: &DiffusionConfig,
    transforms: &AffinityTransforms,
) -> Result<DepthMap> {
    cfg.validate()?;
    let k = inputs.intrinsics;
    let plane = depth_to_plane_origin(inputs.coarse, inputs.normals, k, cfg.eps_ray)?;
    let seeds = depth_to_plane_origin(inputs.sparse, inputs.normals, k, cfg.eps_ray)?;
    let refined = refine_plane_origin(
        &plane,
        &seeds,
        inputs.confidence,
        inputs.guidance,
        cfg,
        transforms,
    )?;
    plane_origin_to_depth(&refined, inputs.normals, k, cfg.eps_ray)
}

/// One row of the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Full,
    /// Return the coarse depth untouched.
    WithoutRefinement,
    /// Diffuse without ever re-imposing seeds.
    WithoutReplacement,
    /// Re-impose every seed with full confidence.
    WithoutConfidence,
    /// Full pipeline with a different conductance function.
    Variant(ConductanceVariant),
}

impl Ablation {
    /// The standard study: full model, three component removals, three conductance swaps.
    pub const SUITE: [Ablation; 7] = [
        Ablation::Full,
        Ablation::WithoutRefinement,
        Ablation::WithoutReplacement,
        Ablation::WithoutConfidence,
        Ablation::Variant(ConductanceVariant::SymmetricCosine),
        Ablation::Variant(ConductanceVariant::Euclidean),
        Ablation::Variant(ConductanceVariant::DotProduct),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::WithoutRefinement => "w/o-refinement",
            Ablation::WithoutReplacement => "w/o-replacement",
            Ablation::WithoutConfidence => "w/o-confidence",
            Ablation::Variant(v) => v.name(),
        }
    }

    /// The configuration this ablation runs with, or `None` when refinement is skipped.
    pub fn apply(self, base: &DiffusionConfig) -> Option<DiffusionConfig> {
        let mut cfg = *base;
        match self {
            Ablation::Full => {}
            Ablation::WithoutRefinement => return None,
            Ablation::WithoutReplacement => cfg.use_replacement = false,
            Ablation::WithoutConfidence => cfg.use_confidence = false,
            Ablation::Variant(v) => cfg.variant = v,
        }
        Some(cfg)
    }
}

/// Runs [`refine`] with one component disabled or swapped.
pub fn ablate(
    inputs: &RefineInputs<'_>,
    cfg: &DiffusionConfig,
    transforms: &AffinityTransforms,
    ablation: Ablation,
) -> Result<DepthMap> {
    match ablation.apply(cfg) {
        None => Ok(inputs.coarse.clone()),
        Some(cfg) => refine(inputs, &cfg, transforms),
    }
}

#[cfg(test)]
mod tests;
