//! Deterministic stand-ins for the learned prediction stage: coarse depth,
//! surface normals, seed confidence and guidance features.

mod knn;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::grid::{is_valid, ConfidenceMap, DepthMap, Grid, NormalMap};

use knn::MaskIndex;

pub use self::guidance::{build_guidance, GuidanceFeatures, GUIDANCE_CHANNELS};

mod guidance;

/// Tunables of the classical frontend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrontendParams {
    /// Neighbor count for inverse-distance weighting.
    pub k: usize,
    /// Inverse-distance power.
    pub p: f64,
    /// Normal-fit window radius; the window is `(2w+1)²`.
    pub w: usize,
    /// Confidence tolerance in meters.
    pub b: f64,
    /// Depth normalizer for the guidance depth channel, meters.
    pub depth_max: f64,
}

impl Default for FrontendParams {
    fn default() -> Self {
        Self {
            k: 8,
            p: 2.0,
            w: 2,
            b: 1.0,
            depth_max: 20.0,
        }
    }
}

/// Densifies sparse seeds by inverse-distance weighting of the `k` nearest seeds.
///
/// Seed pixels keep their value exactly.
pub fn coarse_from_sparse(sparse: &DepthMap, k: usize, power: f64) -> Result<DepthMap> {
    if k == 0 {
        return Err(Error::invalid("neighbor count k must be at least 1"));
    }
    if !power.is_finite() || power < 0.0 {
        return Err(Error::invalid(format!(
            "IDW power must be non-negative, got {power}"
        )));
    }
    let mask = sparse.valid_mask();
    if !mask.iter().any(|&m| m) {
        return Err(Error::invalid("sparse depth has no valid seeds"));
    }
    let (w, h) = (sparse.width(), sparse.height());
    let index = MaskIndex::new(w, h, &mask);
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        let mut near = Vec::with_capacity(k * 2);
        for (u, px) in row.iter_mut().enumerate() {
            index.nearest(u, v, k, &mut near);
            if near[0].0 == 0 {
                *px = sparse[near[0].1];
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for &(d2, idx) in &near {
                let wgt = (d2 as f64).sqrt().powf(-power);
                num += wgt * sparse[idx];
                den += wgt;
            }
            *px = num / den;
        }
    });
    DepthMap::from_vec(w, h, out)
}

/// Per-pixel normals from a least-squares plane fit to the back-projected points
/// of a `(2w+1)²` window, oriented so that `N·r > 0`.
///
/// Pixels whose window has fewer than three usable points, or whose points are
/// collinear, take the normal of the nearest pixel that has a fit.
pub fn estimate_normals(depth: &DepthMap, k: &Intrinsics, radius: usize) -> Result<NormalMap> {
    if radius == 0 {
        return Err(Error::invalid("normal window radius must be at least 1"));
    }
    k.validate()?;
    Grid::filled(k.width, k.height, ()).check_shape(depth, "depth map")?;
    let (w, h) = (depth.width(), depth.height());

    let points: Vec<Option<Vector3<f64>>> = (0..w * h)
        .map(|i| {
            let d = depth[i];
            if is_valid(d) {
                let (u, v) = depth.coords_of(i);
                Some(k.ray(u as f64, v as f64) * d)
            } else {
                None
            }
        })
        .collect();

    let mut fitted = vec![Vector3::zeros(); w * h];
    fitted.par_chunks_mut(w).enumerate().for_each(|(v, row)| {
        for (u, out) in row.iter_mut().enumerate() {
            if points[v * w + u].is_none() {
                continue;
            }
            let u0 = u.saturating_sub(radius);
            let v0 = v.saturating_sub(radius);
            let u1 = (u + radius).min(w - 1);
            let v1 = (v + radius).min(h - 1);
            let window = (v0..=v1)
                .flat_map(|y| (u0..=u1).map(move |x| y * w + x))
                .filter_map(|i| points[i]);
            if let Some(n) = fit_plane_normal(window) {
                let ray = k.ray(u as f64, v as f64);
                *out = if n.dot(&ray) < 0.0 { -n } else { n };
            }
        }
    });

    let has_fit: Vec<bool> = fitted.iter().map(|n| *n != Vector3::zeros()).collect();
    if !has_fit.iter().any(|&b| b) {
        return Err(Error::invalid(
            "no pixel has enough valid neighbors for a normal fit",
        ));
    }
    let index = MaskIndex::new(w, h, &has_fit);
    let mut near = Vec::with_capacity(1);
    let filled: Vec<Vector3<f64>> = (0..w * h)
        .map(|i| {
            if has_fit[i] {
                return fitted[i];
            }
            let (u, v) = (i % w, i / w);
            index.nearest(u, v, 1, &mut near);
            let n = fitted[near[0].1];
            // The donor's orientation may not hold along this pixel's ray.
            if n.dot(&k.ray(u as f64, v as f64)) < 0.0 {
                -n
            } else {
                n
            }
        })
        .collect();
    Ok(NormalMap(Grid::from_vec(w, h, filled)?))
}

/// Unit normal of the total-least-squares plane through `points`.
fn fit_plane_normal(points: impl Iterator<Item = Vector3<f64>> + Clone) -> Option<Vector3<f64>> {
    let (count, sum) = points
        .clone()
        .fold((0usize, Vector3::zeros()), |(c, s), p| (c + 1, s + p));
    if count < 3 {
        return None;
    }
    let centroid = sum / count as f64;
    let cov = points.fold(Matrix3::zeros(), |acc, p| {
        let d = p - centroid;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    // Collinear or coincident points leave the plane undetermined.
    if !(largest > 0.0) || eig.eigenvalues[order[1]] <= 1e-12 * largest {
        return None;
    }
    let n = eig.eigenvectors.column(order[0]).into_owned();
    let norm = n.norm();
    (norm > 0.0).then(|| n / norm)
}

/// Seed confidence `exp(−(D̄ − D)² / 2b²)` at seed pixels, zero elsewhere.
pub fn confidence_from_residual(
    sparse: &DepthMap,
    coarse: &DepthMap,
    b: f64,
) -> Result<ConfidenceMap> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::invalid(format!(
            "confidence tolerance b must be positive, got {b}"
        )));
    }
    sparse.check_shape(coarse, "coarse depth")?;
    let two_b2 = 2.0 * b * b;
    let data = sparse
        .as_slice()
        .iter()
        .zip(coarse.as_slice())
        .map(|(&s, &c)| {
            if is_valid(s) && is_valid(c) {
                let r = s - c;
                (-(r * r) / two_b2).exp()
            } else {
                0.0
            }
        })
        .collect();
    ConfidenceMap::from_vec(sparse.width(), sparse.height(), data)
}
