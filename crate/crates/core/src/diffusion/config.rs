use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plane_origin::DEFAULT_EPS_RAY;

/// How raw affinities between guidance embeddings are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConductanceVariant {
    /// `cos(f(Gᵢ), g(Gⱼ)) / τ` with separate `f` and `g`.
    AsymmetricCosine,
    /// Same as the asymmetric form with `g` replaced by `f`.
    SymmetricCosine,
    /// `−‖f(Gᵢ) − g(Gⱼ)‖² / 2σ²`.
    Euclidean,
    /// `f(Gᵢ)ᵀ g(Gⱼ)`.
    DotProduct,
}

impl ConductanceVariant {
    pub const ALL: [ConductanceVariant; 4] = [
        ConductanceVariant::AsymmetricCosine,
        ConductanceVariant::SymmetricCosine,
        ConductanceVariant::Euclidean,
        ConductanceVariant::DotProduct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConductanceVariant::AsymmetricCosine => "asymmetric-cosine",
            ConductanceVariant::SymmetricCosine => "symmetric-cosine",
            ConductanceVariant::Euclidean => "euclidean",
            ConductanceVariant::DotProduct => "dot-product",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionConfig {
    /// Odd window side length in pixels.
    pub kernel: usize,
    pub iterations: usize,
    pub variant: ConductanceVariant,
    /// Spread of the Euclidean variant, in feature units.
    pub sigma: f64,
    /// Temperature dividing the cosine similarity.
    pub temperature: f64,
    pub use_replacement: bool,
    pub use_confidence: bool,
    pub eps_ray: f64,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            kernel: 5,
            iterations: 8,
            variant: ConductanceVariant::AsymmetricCosine,
            sigma: 1.0,
            temperature: 1e-4,
            use_replacement: true,
            use_confidence: true,
            eps_ray: DEFAULT_EPS_RAY,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kernel < 3 || self.kernel.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel must be odd and at least 3, got {}",
                self.kernel
            )));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if !(self.eps_ray >= 0.0) || !self.eps_ray.is_finite() {
            return Err(Error::invalid(format!(
                "eps_ray must be non-negative, got {}",
                self.eps_ray
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.kernel / 2
    }
}

/// A linear map applied to guidance features before affinities are taken.
///
/// In JSON this is `"identity"` (or `null`) or a row-major matrix.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "ProjectionRepr", into = "ProjectionRepr")]
pub enum Projection {
    #[default]
    Identity,
    /// Row-major `E × F` coefficient matrix.
    Matrix(Vec<Vec<f64>>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProjectionRepr {
    Null,
    Name(String),
    Matrix(Vec<Vec<f64>>),
}

impl TryFrom<ProjectionRepr> for Projection {
    type Error = String;

    fn try_from(r: ProjectionRepr) -> std::result::Result<Self, String> {
        match r {
            ProjectionRepr::Null => Ok(Projection::Identity),
            ProjectionRepr::Name(n) if n == "identity" => Ok(Projection::Identity),
            ProjectionRepr::Name(n) => Err(format!(
                "unknown projection '{n}', expected \"identity\" or a matrix"
            )),
            ProjectionRepr::Matrix(m) => Ok(Projection::Matrix(m)),
        }
    }
}

impl From<Projection> for ProjectionRepr {
    fn from(p: Projection) -> Self {
        match p {
            Projection::Identity => ProjectionRepr::Name("identity".into()),
            Projection::Matrix(m) => ProjectionRepr::Matrix(m),
        }
    }
}

impl Projection {
    pub fn validate(&self, in_dim: Option<usize>) -> Result<()> {
        if let Projection::Matrix(rows) = self {
            let cols = rows.first().map(Vec::len).unwrap_or(0);
            if rows.is_empty() || cols == 0 {
                return Err(Error::invalid("projection matrix must be non-empty"));
            }
            if rows.iter().any(|r| r.len() != cols) {
                return Err(Error::invalid("projection matrix rows differ in length"));
            }
            if rows.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::invalid("projection matrix has non-finite entries"));
            }
            if let Some(f) = in_dim {
                if cols != f {
                    return Err(Error::invalid(format!(
                        "projection expects {cols} input channels, guidance has {f}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn out_dim(&self, in_dim: usize) -> usize {
        match self {
            Projection::Identity => in_dim,
            Projection::Matrix(rows) => rows.len(),
        }
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Projection::Identity => out.copy_from_slice(x),
            Projection::Matrix(rows) => {
                for (o, row) in out.iter_mut().zip(rows) {
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
        }
    }
}

/// The pair of feature transforms `f` (applied at the center pixel) and `g`
/// (applied at each neighbor).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct AffinityTransforms {
    pub f: Projection,
    pub g: Projection,
}

impl AffinityTransforms {
    pub fn new(f: Projection, g: Projection) -> Self {
        Self { f, g }
    }

    pub fn validate(&self, in_dim: Option<usize>) -> Result<()> {
        self.f.validate(in_dim)?;
        self.g.validate(in_dim)?;
        if let Some(f) = in_dim {
            if self.f.out_dim(f) != self.g.out_dim(f) {
                return Err(Error::invalid(format!(
                    "f and g embed to different sizes ({} vs {})",
                    self.f.out_dim(f),
                    self.g.out_dim(f)
                )));
            }
        }
        Ok(())
    }

    /// The neighbor-side transform in effect for `variant`.
    pub fn neighbor_side(&self, variant: ConductanceVariant) -> &Projection {
        match variant {
            ConductanceVariant::SymmetricCosine => &self.f,
            _ => &self.g,
        }
    }
}
