use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::camera::Intrinsics;
use crate::diffusion::{ablate, Ablation, RefineInputs};
use crate::error::{Error, Result};
use crate::frontend::{
    build_guidance, coarse_from_sparse, confidence_from_residual, estimate_normals,
    GuidanceFeatures,
};
use crate::grid::{ConfidenceMap, DepthMap, NormalMap};
use crate::io::{write_confidence_png, write_depth_png, write_float_map};
use crate::metrics::{evaluate, MetricReport};
use crate::synth::{
    discontinuity_mask, inject_noise, perturb_depth, render_scene, sample_sparse, RenderedScene,
    SceneSpec,
};

use super::config::{CoarseSource, ExperimentConfig, NormalSource, SweepPoint};

/// Everything the refinement needs for one scene, plus its ground truth.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub name: String,
    pub intrinsics: Intrinsics,
    pub truth: RenderedScene,
    /// Seeds before outlier injection.
    pub clean_seeds: DepthMap,
    /// Seeds fed to the pipeline.
    pub seeds: DepthMap,
    /// Indices of corrupted seeds.
    pub corrupted: Vec<usize>,
    pub coarse: DepthMap,
    pub normals: NormalMap,
    pub confidence: ConfidenceMap,
    pub guidance: GuidanceFeatures,
}

impl PreparedScene {
    pub fn inputs(&self) -> RefineInputs<'_> {
        RefineInputs {
            coarse: &self.coarse,
            sparse: &self.seeds,
            normals: &self.normals,
            confidence: &self.confidence,
            intrinsics: &self.intrinsics,
            guidance: &self.guidance,
        }
    }
}

/// Per-stage RNG seed, a function of the run seed, scene name and stage only.
fn stage_seed(seed: u64, scene: &str, stage: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in scene.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h ^ stage.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Renders a scene and runs the frontend on it.
pub fn prepare(cfg: &ExperimentConfig, spec: &SceneSpec) -> Result<PreparedScene> {
    let name = spec.name.as_str();
    let truth = render_scene(spec).map_err(|e| e.in_stage("render"))?;
    let k = spec.intrinsics;
    let clean_seeds = sample_sparse(&truth.depth, &cfg.sampling, stage_seed(cfg.seed, name, 1))
        .map_err(|e| e.in_stage("sample"))?;
    let near = discontinuity_mask(
        &truth.depth,
        cfg.noise.boundary_jump,
        cfg.noise.boundary_radius,
    );
    let (seeds, corrupted) = inject_noise(
        &clean_seeds,
        &near,
        &cfg.noise,
        stage_seed(cfg.seed, name, 2),
    )
    .map_err(|e| e.in_stage("noise"))?;
    let coarse = match cfg.coarse.source {
        CoarseSource::Idw => coarse_from_sparse(&seeds, cfg.frontend.k, cfg.frontend.p),
        CoarseSource::PerturbedTruth => perturb_depth(
            &truth.depth,
            cfg.coarse.amplitude,
            stage_seed(cfg.seed, name, 3),
        ),
    }
    .map_err(|e| e.in_stage("coarse"))?;
    let normals = match cfg.normals {
        NormalSource::GroundTruth => truth.normals.clone(),
        NormalSource::Estimated => {
            estimate_normals(&coarse, &k, cfg.frontend.w).map_err(|e| e.in_stage("normals"))?
        }
    };
    let confidence = confidence_from_residual(&seeds, &coarse, cfg.frontend.b)
        .map_err(|e| e.in_stage("confidence"))?;
    let guidance = build_guidance(&coarse, &normals, cfg.frontend.depth_max)
        .map_err(|e| e.in_stage("guidance"))?;
    Ok(PreparedScene {
        name: spec.name.clone(),
        intrinsics: k,
        truth,
        clean_seeds,
        seeds,
        corrupted,
        coarse,
        normals,
        confidence,
        guidance,
    })
}

/// One CSV row: a scene, a variant and the refined depth's metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub scene: String,
    /// Ablation name, suffixed with `@` and the sweep overrides when swept.
    pub variant: String,
    pub kernel: usize,
    pub iterations: usize,
    pub seeds: usize,
    pub noise: f64,
    pub report: MetricReport,
    pub coarse: MetricReport,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scene: &'a str,
    variant: &'a str,
    kernel: usize,
    iterations: usize,
    seeds: usize,
    noise: f64,
    rmse: f64,
    mae: f64,
    irmse: f64,
    imae: f64,
    rel: f64,
    d1: f64,
    d2: f64,
    d3: f64,
    pixels: usize,
}

/// Writes records as CSV with the fixed column order
/// `scene, variant, kernel, iterations, seeds, noise, rmse, mae, irmse, imae, rel, d1, d2, d3, pixels`.
pub fn write_csv<W: Write>(out: W, records: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        let m = &r.report;
        w.serialize(CsvRow {
            scene: &r.scene,
            variant: &r.variant,
            kernel: r.kernel,
            iterations: r.iterations,
            seeds: r.seeds,
            noise: r.noise,
            rmse: m.rmse,
            mae: m.mae,
            irmse: m.irmse,
            imae: m.imae,
            rel: m.rel,
            d1: m.delta[0],
            d2: m.delta[1],
            d3: m.delta[2],
            pixels: m.pixel_count,
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn csv_string(records: &[Record]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// Where maps go, if anywhere.
#[derive(Debug, Clone, Copy)]
pub enum Artifacts<'a> {
    None,
    Under(&'a Path),
}

/// Runs `ablations` on every scene of every sweep point of `cfg`.
///
/// Rows come out point-major, then scene, then ablation, regardless of the
/// order in which the work finishes.
pub fn run_points(
    cfg: &ExperimentConfig,
    ablations: &[Ablation],
    artifacts: Artifacts<'_>,
) -> Result<Vec<Record>> {
    let points = cfg.sweep_points()?;
    let scenes: Vec<SceneSpec> = cfg
        .scenes
        .iter()
        .map(|s| s.resolve())
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, &SweepPoint, &SceneSpec)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, p)| scenes.iter().map(move |s| (i, p, s)))
        .collect();
    let rows: Vec<Vec<Record>> = jobs
        .par_iter()
        .map(|&(i, point, spec)| run_scene(i, point, spec, ablations, artifacts))
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn run_scene(
    index: usize,
    point: &SweepPoint,
    spec: &SceneSpec,
    ablations: &[Ablation],
    artifacts: Artifacts<'_>,
) -> Result<Vec<Record>> {
    let cfg = &point.config;
    let scene = prepare(cfg, spec)?;
    let coarse_report =
        evaluate(&scene.coarse, &scene.truth.depth).map_err(|e| e.in_stage("evaluate"))?;
    let label = point.label();
    let dir = match artifacts {
        Artifacts::Under(root) if cfg.write_images => {
            let dir = root
                .join("maps")
                .join(format!("p{index:03}_{}", scene.name));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            write_inputs(&dir, &scene).map_err(|e| e.in_stage("write maps"))?;
            Some(dir)
        }
        _ => None,
    };
    let mut out = Vec::with_capacity(ablations.len());
    for &ablation in ablations {
        let refined = ablate(&scene.inputs(), &cfg.diffusion, &cfg.affinity, ablation)
            .map_err(|e| e.in_stage("refine"))?;
        let report = evaluate(&refined, &scene.truth.depth).map_err(|e| e.in_stage("evaluate"))?;
        if report.missing_count > 0 {
            log::warn!(
                "{} / {}: {} pixels without a refined depth",
                scene.name,
                ablation.name(),
                report.missing_count
            );
        }
        if let Some(dir) = &dir {
            let stem = format!("refined_{}", file_stem(ablation.name()));
            write_map(dir, &stem, &refined).map_err(|e| e.in_stage("write maps"))?;
        }
        let iterations = match ablation {
            Ablation::WithoutRefinement => 0,
            _ => cfg.diffusion.iterations,
        };
        out.push(Record {
            scene: scene.name.clone(),
            variant: if label.is_empty() {
                ablation.name().to_string()
            } else {
                format!("{}@{label}", ablation.name())
            },
            kernel: cfg.diffusion.kernel,
            iterations,
            seeds: scene.seeds.valid_count(),
            noise: cfg.noise.outlier_frac,
            report,
            coarse: coarse_report,
        });
    }
    Ok(out)
}

fn file_stem(name: &str) -> String {
    name.replace("w/o-", "without-")
}

fn write_map(dir: &Path, stem: &str, depth: &DepthMap) -> Result<()> {
    write_depth_png(dir.join(format!("{stem}.png")), depth)?;
    write_float_map(dir.join(format!("{stem}.pdfm")), depth)
}

fn write_inputs(dir: &Path, scene: &PreparedScene) -> Result<()> {
    write_map(dir, "truth", &scene.truth.depth)?;
    write_map(dir, "coarse", &scene.coarse)?;
    write_map(dir, "seeds", &scene.seeds)?;
    write_confidence_png(dir.join("confidence.png"), &scene.confidence)?;
    write_float_map(dir.join("confidence.pdfm"), &scene.confidence)
}

fn write_results(dir: &Path, records: &[Record]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("metrics.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_csv(std::io::BufWriter::new(file), records)
}

/// The full model on every scene and sweep point; writes `metrics.csv` and maps
/// under the config's output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let records = run_points(cfg, &[Ablation::Full], Artifacts::Under(&cfg.output_dir))?;
    write_results(&cfg.output_dir, &records)?;
    Ok(records)
}

/// Every variant of [`Ablation::SUITE`] on every scene and sweep point.
pub fn run_ablation_suite(cfg: &ExperimentConfig) -> Result<Vec<Record>> {
    let records = run_points(cfg, &Ablation::SUITE, Artifacts::Under(&cfg.output_dir))?;
    write_results(&cfg.output_dir, &records)?;
    Ok(records)
}
