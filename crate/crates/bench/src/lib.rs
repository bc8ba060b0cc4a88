//! Fixtures shared by the criterion benches.

use plane_diffusion::experiment::{prepare, PreparedScene};
use plane_diffusion::synth::preset;
use plane_diffusion::{depth_to_plane_origin, DiffusionConfig, ExperimentConfig, PlaneOriginMap};

/// A preset scene run through the default frontend.
pub fn prepared(name: &str) -> PreparedScene {
    let spec = preset(name).expect("known preset");
    prepare(&ExperimentConfig::default(), &spec).expect("preset scenes prepare cleanly")
}

/// The coarse plane-origin map of `scene` under `cfg`.
pub fn coarse_plane(scene: &PreparedScene, cfg: &DiffusionConfig) -> PlaneOriginMap {
    depth_to_plane_origin(
        &scene.coarse,
        &scene.normals,
        &scene.intrinsics,
        cfg.eps_ray,
    )
    .expect("shapes agree")
}
