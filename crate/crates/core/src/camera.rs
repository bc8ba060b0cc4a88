//! Pinhole camera model.
//!
//! Pixel centers sit at integer coordinates: `u` is the column, `v` the row.
//! No skew and no lens distortion.

use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// The 128×96 desk-scale camera used by the preset scenes.
    pub fn desk() -> Self {
        Self {
            fx: 100.0,
            fy: 100.0,
            cx: 64.0,
            cy: 48.0,
            width: 128,
            height: 96,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("intrinsics must be finite"));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::invalid(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be non-zero"));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::invalid(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Viewing ray `C⁻¹ (u, v, 1)ᵀ` of a pixel; its `z` component is always 1.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Projects a camera-frame point to continuous pixel coordinates.
    #[inline]
    pub fn project(&self, p: &Point3<f64>) -> Point2<f64> {
        Point2::new(self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// Viewing rays of every pixel of an image, computed once from the intrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct RayGrid(Grid<Vector3<f64>>);

impl RayGrid {
    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> Vector3<f64> {
        *self.0.get(u, v)
    }

    #[inline]
    pub fn at_index(&self, i: usize) -> Vector3<f64> {
        self.0[i]
    }

    pub fn as_grid(&self) -> &Grid<Vector3<f64>> {
        &self.0
    }
}

pub fn ray_grid(k: &Intrinsics) -> RayGrid {
    RayGrid(Grid::from_fn(k.width, k.height, |u, v| {
        k.ray(u as f64, v as f64)
    }))
}

/// Lifts a pixel with depth `depth` (meters along the optical axis) to a 3D point.
pub fn backproject(k: &Intrinsics, u: usize, v: usize, depth: f64) -> Result<Point3<f64>> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::invalid(format!(
            "back-projection needs a positive finite depth, got {depth}"
        )));
    }
    Ok(Point3::from(k.ray(u as f64, v as f64) * depth))
}
