//! Depth completion by anisotropic diffusion of plane-origin distances.
//!
//! A coarse dense depth map and surface normals are mapped to plane-origin
//! distance (constant across every planar surface), refined by a
//! confidence-gated, guidance-weighted diffusion seeded with sparse
//! measurements, and mapped back to depth.
//!
//! The crate also carries deterministic frontend estimators, a synthetic
//! piecewise-planar scene generator, the usual completion metrics and an
//! experiment runner driven by JSON configs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camera;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod frontend;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod plane_origin;
pub mod synth;

pub use camera::{backproject, ray_grid, Intrinsics, RayGrid};
pub use diffusion::{
    ablate, conductance_weights, diffuse_step, refine, refine_plane_origin, replace_seeds,
    Ablation, AffinityTransforms, ConductanceVariant, DiffusionConfig, Projection, RefineInputs,
};
pub use error::{Error, Result};
pub use experiment::{
    load_config, parse_config, run_ablation_suite, run_experiment, ExperimentConfig, Record,
};
pub use frontend::{
    build_guidance, coarse_from_sparse, confidence_from_residual, estimate_normals, FrontendParams,
    GuidanceFeatures,
};
pub use grid::{ConfidenceMap, DepthMap, Grid, NormalMap, PlaneOriginMap};
pub use metrics::{evaluate, MetricReport};
pub use plane_origin::{depth_to_plane_origin, plane_origin_to_depth, DEFAULT_EPS_RAY};
pub use synth::{
    inject_noise, render_scene, sample_sparse, NoiseParams, SampleMode, SamplePattern, SceneSpec,
};
