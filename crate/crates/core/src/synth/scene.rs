use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::grid::{DepthMap, Grid, NormalMap};

/// Half-open pixel rectangle `[u0, u1) × [v0, v1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub u: [usize; 2],
    pub v: [usize; 2],
}

impl Region {
    #[inline]
    pub fn contains(&self, u: usize, v: usize) -> bool {
        (self.u[0]..self.u[1]).contains(&u) && (self.v[0]..self.v[1]).contains(&v)
    }
}

/// The plane `n·X = offset` in camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    /// Unit normal.
    pub normal: [f64; 3],
    /// Signed distance from the camera center, meters.
    pub offset: f64,
    /// Pixels this plane may own; the whole image when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

/// A piecewise-planar scene. Each pixel belongs to the last plane in `planes`
/// whose region contains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    #[serde(default = "Intrinsics::desk")]
    pub intrinsics: Intrinsics,
    /// `[z_min, z_max]` in meters; every rendered depth must fall inside.
    pub depth_range: [f64; 2],
    pub planes: Vec<Plane>,
}

/// Exact ground truth for a scene.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub depth: DepthMap,
    pub normals: NormalMap,
    /// Index into `SceneSpec::planes` of each pixel's owner.
    pub owner: Grid<usize>,
}

/// Rays meeting their plane at a shallower angle than this are rejected.
const MIN_RAY_DOT: f64 = 1e-3;

impl SceneSpec {
    fn oriented_planes(&self) -> Result<Vec<(Vector3<f64>, f64)>> {
        if self.planes.is_empty() {
            return Err(Error::InvalidScene(format!(
                "scene '{}' has no planes",
                self.name
            )));
        }
        let [z_min, z_max] = self.depth_range;
        if !(z_min > 0.0 && z_min < z_max && z_max.is_finite()) {
            return Err(Error::InvalidScene(format!(
                "scene '{}': depth range [{z_min}, {z_max}] is not a positive interval",
                self.name
            )));
        }
        self.planes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let n = Vector3::from(p.normal);
                if (n.norm() - 1.0).abs() > 1e-6 || !p.offset.is_finite() || p.offset == 0.0 {
                    return Err(Error::InvalidScene(format!(
                        "scene '{}' plane {i}: normal must be unit length and offset non-zero",
                        self.name
                    )));
                }
                let n = n.normalize();
                // Canonical form has a positive offset, so n·r > 0 wherever depth is positive.
                Ok(if p.offset < 0.0 {
                    (-n, -p.offset)
                } else {
                    (n, p.offset)
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        render_scene(self).map(|_| ())
    }
}

pub fn render_scene(spec: &SceneSpec) -> Result<RenderedScene> {
    let k = &spec.intrinsics;
    k.validate()?;
    let planes = spec.oriented_planes()?;
    let [z_min, z_max] = spec.depth_range;
    let (w, h) = (k.width, k.height);
    let mut depth = Vec::with_capacity(w * h);
    let mut normals = Vec::with_capacity(w * h);
    let mut owner = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let idx = spec
                .planes
                .iter()
                .rposition(|p| p.region.is_none_or(|r| r.contains(u, v)))
                .ok_or_else(|| {
                    Error::InvalidScene(format!(
                        "scene '{}': pixel ({u}, {v}) is not covered by any plane",
                        spec.name
                    ))
                })?;
            let (n, d0) = planes[idx];
            let ray = k.ray(u as f64, v as f64);
            let n_dot_r = n.dot(&ray);
            if n_dot_r < MIN_RAY_DOT {
                return Err(Error::InvalidScene(format!(
                    "scene '{}': plane {idx} is parallel to or behind the ray of pixel ({u}, {v})",
                    spec.name
                )));
            }
            let d = d0 / n_dot_r;
            if !(z_min..=z_max).contains(&d) {
                return Err(Error::InvalidScene(format!(
                    "scene '{}': depth {d:.3} at pixel ({u}, {v}) outside [{z_min}, {z_max}]",
                    spec.name
                )));
            }
            depth.push(d);
            normals.push(n);
            owner.push(idx);
        }
    }
    Ok(RenderedScene {
        depth: DepthMap::from_vec(w, h, depth)?,
        normals: NormalMap(Grid::from_vec(w, h, normals)?),
        owner: Grid::from_vec(w, h, owner)?,
    })
}
