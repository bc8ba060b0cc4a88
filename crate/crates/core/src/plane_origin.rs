//! Conversion between depth and plane-origin distance.
//!
//! For a pixel with viewing ray `r`, depth `D` and unit normal `N`, the
//! plane-origin distance is `P = D · Nᵀr`: the distance from the camera center
//! to the tangent plane through the back-projected point. It is constant over
//! any planar surface, which is what makes it a good space to diffuse in.

use crate::camera::Intrinsics;
use crate::error::Result;
use crate::grid::{is_valid, DepthMap, NormalMap, PlaneOriginMap};

/// Below this ray/normal dot product a pixel is treated as a grazing view and marked invalid.
pub const DEFAULT_EPS_RAY: f64 = 1e-3;

fn check_inputs(
    what: &'static str,
    map: &crate::grid::Grid<f64>,
    normals: &NormalMap,
    k: &Intrinsics,
) -> Result<()> {
    k.validate()?;
    let reference = crate::grid::Grid::filled(k.width, k.height, ());
    reference.check_shape(map, what)?;
    reference.check_shape(&normals.0, "normal map")
}

/// `P(x) = D(x) · N(x)ᵀ r(x)`; pixels with invalid depth or `N·r < eps_ray` come out invalid.
pub fn depth_to_plane_origin(
    depth: &DepthMap,
    normals: &NormalMap,
    k: &Intrinsics,
    eps_ray: f64,
) -> Result<PlaneOriginMap> {
    check_inputs("depth map", depth, normals, k)?;
    Ok(PlaneOriginMap::from_fn(k.width, k.height, |u, v| {
        let d = *depth.get(u, v);
        if !is_valid(d) {
            return 0.0;
        }
        let n_dot_r = normals.get(u, v).dot(&k.ray(u as f64, v as f64));
        if n_dot_r < eps_ray {
            return 0.0;
        }
        let p = d * n_dot_r;
        if is_valid(p) {
            p
        } else {
            0.0
        }
    }))
}

/// `D(x) = P(x) / N(x)ᵀ r(x)`, the inverse of [`depth_to_plane_origin`].
pub fn plane_origin_to_depth(
    plane: &PlaneOriginMap,
    normals: &NormalMap,
    k: &Intrinsics,
    eps_ray: f64,
) -> Result<DepthMap> {
    check_inputs("plane-origin map", plane, normals, k)?;
    Ok(DepthMap::from_fn(k.width, k.height, |u, v| {
        let p = *plane.get(u, v);
        if !is_valid(p) {
            return 0.0;
        }
        let n_dot_r = normals.get(u, v).dot(&k.ray(u as f64, v as f64));
        if n_dot_r < eps_ray {
            return 0.0;
        }
        let d = p / n_dot_r;
        if is_valid(d) {
            d
        } else {
            0.0
        }
    }))
}
