//! Ground-truth generation: piecewise-planar scenes, LiDAR-like sparse
//! sampling, boundary-biased outliers and perturbed coarse depth.

mod presets;
mod scene;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{is_valid, DepthMap};

pub use presets::{preset, preset_names, PRESET_NAMES};
pub use scene::{render_scene, Plane, Region, RenderedScene, SceneSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleMode {
    UniformRandom,
    Scanline,
}

/// How sparse seeds are drawn from a dense depth map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplePattern {
    pub mode: SampleMode,
    /// Exact number of seeds (uniform-random). Takes precedence over `ratio`.
    pub count: Option<usize>,
    /// Fraction of valid pixels to keep (uniform-random).
    pub ratio: f64,
    /// Keep every `row_step`-th row (scanline).
    pub row_step: usize,
}

impl Default for SamplePattern {
    fn default() -> Self {
        Self {
            mode: SampleMode::UniformRandom,
            count: None,
            ratio: 0.05,
            row_step: 4,
        }
    }
}

impl SamplePattern {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::invalid(format!(
                "sampling ratio must lie in [0, 1], got {}",
                self.ratio
            )));
        }
        if self.row_step == 0 {
            return Err(Error::invalid("scanline row_step must be at least 1"));
        }
        Ok(())
    }

    /// Seeds requested from a map with `valid` usable pixels.
    pub fn requested(&self, valid: usize) -> usize {
        self.count
            .unwrap_or_else(|| (self.ratio * valid as f64).round() as usize)
    }
}

/// Keeps the selected pixels of `dense` verbatim and zeroes the rest.
pub fn sample_sparse(dense: &DepthMap, pattern: &SamplePattern, seed: u64) -> Result<DepthMap> {
    pattern.validate()?;
    let valid: Vec<usize> = (0..dense.len()).filter(|&i| dense.is_valid_at(i)).collect();
    let mut out = DepthMap::empty(dense.width(), dense.height());
    match pattern.mode {
        SampleMode::UniformRandom => {
            let count = pattern.requested(valid.len());
            if count > valid.len() {
                return Err(Error::invalid(format!(
                    "requested {count} seeds but only {} pixels are valid",
                    valid.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for pick in index::sample(&mut rng, valid.len(), count) {
                let i = valid[pick];
                out[i] = dense[i];
            }
        }
        SampleMode::Scanline => {
            for &i in &valid {
                let (_, v) = dense.coords_of(i);
                if v % pattern.row_step == 0 {
                    out[i] = dense[i];
                }
            }
        }
    }
    Ok(out)
}

/// Pixels within `radius` (Chebyshev) of a depth jump larger than
/// `relative_jump` times the nearer depth, between 4-connected neighbors.
pub fn discontinuity_mask(depth: &DepthMap, relative_jump: f64, radius: usize) -> Vec<bool> {
    let (w, h) = (depth.width(), depth.height());
    let mut edge = vec![false; w * h];
    let jump =
        |a: f64, b: f64| is_valid(a) && is_valid(b) && (a - b).abs() > relative_jump * a.min(b);
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            if u + 1 < w && jump(depth[i], depth[i + 1]) {
                edge[i] = true;
                edge[i + 1] = true;
            }
            if v + 1 < h && jump(depth[i], depth[i + w]) {
                edge[i] = true;
                edge[i + w] = true;
            }
        }
    }
    let mut near = vec![false; w * h];
    for i in (0..w * h).filter(|&i| edge[i]) {
        let (u, v) = (i % w, i / w);
        for y in v.saturating_sub(radius)..=(v + radius).min(h - 1) {
            for x in u.saturating_sub(radius)..=(u + radius).min(w - 1) {
                near[y * w + x] = true;
            }
        }
    }
    near
}

/// Outlier model for sparse seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseParams {
    /// Fraction of seeds corrupted.
    pub outlier_frac: f64,
    /// Relative depth error of a corrupted seed.
    pub magnitude: f64,
    /// Sampling weight of seeds near a discontinuity, relative to others.
    pub boundary_bias: f64,
    /// Distance in pixels that counts as near a discontinuity.
    pub boundary_radius: usize,
    /// Relative depth jump between neighbors that marks a discontinuity.
    pub boundary_jump: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            outlier_frac: 0.0,
            magnitude: 0.3,
            boundary_bias: 4.0,
            boundary_radius: 2,
            boundary_jump: 0.05,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.outlier_frac) {
            return Err(Error::invalid(format!(
                "outlier_frac must lie in [0, 1], got {}",
                self.outlier_frac
            )));
        }
        if !(0.0..1.0).contains(&self.magnitude) {
            return Err(Error::invalid(format!(
                "outlier magnitude must lie in [0, 1), got {}",
                self.magnitude
            )));
        }
        if !(self.boundary_bias > 0.0) || !self.boundary_bias.is_finite() {
            return Err(Error::invalid("boundary_bias must be positive"));
        }
        Ok(())
    }
}

/// Corrupts `round(outlier_frac · seeds)` seeds to `D̄·(1 ± magnitude)`.
///
/// Seeds flagged in `near_boundary` are `boundary_bias` times as likely to be
/// picked. Returns the corrupted map and the indices of corrupted seeds.
pub fn inject_noise(
    sparse: &DepthMap,
    near_boundary: &[bool],
    params: &NoiseParams,
    seed: u64,
) -> Result<(DepthMap, Vec<usize>)> {
    params.validate()?;
    if near_boundary.len() != sparse.len() {
        return Err(Error::invalid(
            "boundary mask size differs from the seed map",
        ));
    }
    let seeds: Vec<usize> = (0..sparse.len())
        .filter(|&i| sparse.is_valid_at(i))
        .collect();
    let count = (params.outlier_frac * seeds.len() as f64).round() as usize;
    let mut out = sparse.clone();
    if count == 0 {
        return Ok((out, Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Weighted sampling without replacement: keep the largest ln(U)/weight.
    let mut keyed: Vec<(f64, usize)> = seeds
        .iter()
        .map(|&i| {
            let weight = if near_boundary[i] {
                params.boundary_bias
            } else {
                1.0
            };
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / weight, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut picked: Vec<usize> = keyed[..count].iter().map(|&(_, i)| i).collect();
    picked.sort_unstable();
    for &i in &picked {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        out[i] = sparse[i] * (1.0 + sign * params.magnitude);
    }
    Ok((out, picked))
}

/// A stand-in for a learned coarse prediction: ground truth multiplied by
/// `1 + amplitude·ξ(x)`, where `ξ ∈ [−1, 1]` mixes per-pixel white noise with a
/// smooth low-frequency wave in equal parts.
pub fn perturb_depth(truth: &DepthMap, amplitude: f64, seed: u64) -> Result<DepthMap> {
    if !(0.0..1.0).contains(&amplitude) {
        return Err(Error::invalid(format!(
            "perturbation amplitude must lie in [0, 1), got {amplitude}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    let (lu, lv) = (rng.random_range(24.0..48.0), rng.random_range(24.0..48.0));
    let (pu, pv) = (rng.random_range(0.0..tau), rng.random_range(0.0..tau));
    let data = (0..truth.len())
        .map(|i| {
            let d = truth[i];
            let white: f64 = rng.random_range(-1.0..=1.0);
            if !is_valid(d) {
                return 0.0;
            }
            let (u, v) = truth.coords_of(i);
            let smooth = (tau * u as f64 / lu + pu).sin() * (tau * v as f64 / lv + pv).sin();
            d * (1.0 + amplitude * 0.5 * (white + smooth))
        })
        .collect();
    DepthMap::from_vec(truth.width(), truth.height(), data)
}
