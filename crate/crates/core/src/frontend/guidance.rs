use crate::error::{Error, Result};
use crate::grid::{is_valid, DepthMap, NormalMap};

/// Channels produced by [`build_guidance`]: `u/W, v/H, D/depth_max, nx, ny, nz`.
pub const GUIDANCE_CHANNELS: usize = 6;

/// Per-pixel feature vectors from which diffusion conductance is computed.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceFeatures {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl GuidanceFeatures {
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::invalid("guidance needs at least one channel"));
        }
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "guidance of {width}x{height}x{channels} needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Feature vector of pixel index `i` (row-major).
    #[inline]
    pub fn at(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn build_guidance(
    depth: &DepthMap,
    normals: &NormalMap,
    depth_max: f64,
) -> Result<GuidanceFeatures> {
    if !(depth_max > 0.0) || !depth_max.is_finite() {
        return Err(Error::invalid(format!(
            "depth_max must be positive, got {depth_max}"
        )));
    }
    depth.check_shape(&normals.0, "normal map")?;
    let (w, h) = (depth.width(), depth.height());
    let mut data = Vec::with_capacity(w * h * GUIDANCE_CHANNELS);
    for i in 0..w * h {
        let (u, v) = depth.coords_of(i);
        let d = if is_valid(depth[i]) { depth[i] } else { 0.0 };
        let n = normals[i];
        data.extend(
            [
                u as f64 / w as f64,
                v as f64 / h as f64,
                d / depth_max,
                n.x,
                n.y,
                n.z,
            ]
            .map(|x| x.clamp(-1.0, 1.0)),
        );
    }
    GuidanceFeatures::from_vec(w, h, GUIDANCE_CHANNELS, data)
}
