use super::*;
use crate::grid::Grid;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn features(width: usize, height: usize, channels: usize, data: Vec<f64>) -> GuidanceFeatures {
    GuidanceFeatures::from_vec(width, height, channels, data).unwrap()
}

fn cfg(variant: ConductanceVariant, kernel: usize) -> DiffusionConfig {
    DiffusionConfig {
        variant,
        kernel,
        ..Default::default()
    }
}

/// Dense matrix-vector product, written out independently of `Projection::apply`.
fn project(m: &Option<Vec<Vec<f64>>>, x: &[f64]) -> Vec<f64> {
    match m {
        None => x.to_vec(),
        Some(rows) => rows
            .iter()
            .map(|row| {
                let mut s = 0.0;
                for c in 0..row.len() {
                    s += row[c] * x[c];
                }
                s
            })
            .collect(),
    }
}

/// Reference diffusion step: for every pixel, scan every other pixel of the grid,
/// keep those inside the window, and take the softmax-weighted mean of P with no
/// max-subtraction and no precomputation.
fn brute_force_step(
    p: &[f64],
    g: &GuidanceFeatures,
    cfg: &DiffusionConfig,
    f_mat: &Option<Vec<Vec<f64>>>,
    g_mat: &Option<Vec<Vec<f64>>>,
) -> Vec<f64> {
    let (w, h) = (g.width(), g.height());
    let r = (cfg.kernel / 2) as i64;
    let g_side = if cfg.variant == ConductanceVariant::SymmetricCosine {
        f_mat
    } else {
        g_mat
    };
    let mut out = vec![0.0; w * h];
    for vi in 0..h {
        for ui in 0..w {
            let fi = project(f_mat, g.at(vi * w + ui));
            let mut terms: Vec<(f64, f64)> = Vec::new();
            for vj in 0..h {
                for uj in 0..w {
                    if (uj as i64 - ui as i64).abs() > r || (vj as i64 - vi as i64).abs() > r {
                        continue;
                    }
                    let pj = p[vj * w + uj];
                    if !(pj > 0.0) {
                        continue;
                    }
                    let gj = project(g_side, g.at(vj * w + uj));
                    let a = match cfg.variant {
                        ConductanceVariant::AsymmetricCosine
                        | ConductanceVariant::SymmetricCosine => {
                            let dot: f64 = fi.iter().zip(&gj).map(|(a, b)| a * b).sum();
                            let na = fi.iter().map(|a| a * a).sum::<f64>().sqrt();
                            let nb = gj.iter().map(|a| a * a).sum::<f64>().sqrt();
                            let c = if na == 0.0 || nb == 0.0 {
                                0.0
                            } else {
                                dot / (na * nb)
                            };
                            c / cfg.temperature
                        }
                        ConductanceVariant::Euclidean => {
                            let d2: f64 = fi.iter().zip(&gj).map(|(a, b)| (a - b).powi(2)).sum();
                            -d2 / (2.0 * cfg.sigma.powi(2))
                        }
                        ConductanceVariant::DotProduct => {
                            fi.iter().zip(&gj).map(|(a, b)| a * b).sum()
                        }
                    };
                    terms.push((a, pj));
                }
            }
            // w_j = 1 / Σ_k exp(a_k − a_j), which cannot overflow at its largest term.
            out[vi * w + ui] = terms
                .iter()
                .map(|&(aj, pj)| pj / terms.iter().map(|&(ak, _)| (ak - aj).exp()).sum::<f64>())
                .sum();
        }
    }
    out
}

fn to_projection(m: &Option<Vec<Vec<f64>>>) -> Projection {
    match m {
        None => Projection::Identity,
        Some(rows) => Projection::Matrix(rows.clone()),
    }
}

#[test]
fn identical_features_give_uniform_weights() {
    let g = features(3, 3, 2, [0.3, -0.4].repeat(9));
    let neighbors: Vec<_> = (0..3).flat_map(|v| (0..3).map(move |u| (u, v))).collect();
    for variant in ConductanceVariant::ALL {
        let w = conductance_weights(
            &g,
            (1, 1),
            &neighbors,
            &cfg(variant, 3),
            &AffinityTransforms::default(),
        )
        .unwrap();
        for x in w {
            assert!((x - 1.0 / 9.0).abs() < 1e-15, "{variant:?}");
        }
    }
}

#[test]
fn dot_product_hand_example() {
    let g = features(3, 1, 2, vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    let w = conductance_weights(
        &g,
        (0, 0),
        &[(0, 0), (1, 0), (2, 0)],
        &cfg(ConductanceVariant::DotProduct, 3),
        &AffinityTransforms::default(),
    )
    .unwrap();
    let e = std::f64::consts::E;
    let expected = [
        e / (2.0 * e + 1.0),
        e / (2.0 * e + 1.0),
        1.0 / (2.0 * e + 1.0),
    ];
    for (a, b) in w.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!((w[0] - 0.42232).abs() < 1e-5);
    assert!((w[2] - 0.15536).abs() < 1e-5);
}

#[test]
fn zero_norm_embedding_has_neutral_cosine() {
    let g = features(2, 1, 2, vec![0.0, 0.0, 1.0, 0.0]);
    let w = conductance_weights(
        &g,
        (0, 0),
        &[(0, 0), (1, 0)],
        &cfg(ConductanceVariant::AsymmetricCosine, 3),
        &AffinityTransforms::default(),
    )
    .unwrap();
    assert_eq!(w, vec![0.5, 0.5]);
}

#[test]
fn conductance_errors() {
    let g = features(2, 1, 1, vec![1.0, 1.0]);
    let c = cfg(ConductanceVariant::DotProduct, 3);
    let t = AffinityTransforms::default();
    assert!(conductance_weights(&g, (0, 0), &[], &c, &t).is_err());
    assert!(conductance_weights(&g, (0, 0), &[(2, 0)], &c, &t).is_err());
}

proptest! {
    #[test]
    fn weights_lie_on_the_simplex(
        feats in proptest::collection::vec(-1.0..1.0f64, 25 * 6),
        variant in proptest::sample::select(ConductanceVariant::ALL.to_vec()),
        temperature in 0.01..1.0f64,
        sigma in 0.05..2.0f64,
    ) {
        let g = features(5, 5, 6, feats);
        let neighbors: Vec<_> = (0..5).flat_map(|v| (0..5).map(move |u| (u, v))).collect();
        let c = DiffusionConfig { variant, temperature, sigma, ..Default::default() };
        let w = conductance_weights(&g, (2, 2), &neighbors, &c, &AffinityTransforms::default()).unwrap();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn constant_field_is_preserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = features(
        9,
        7,
        6,
        (0..9 * 7 * 6)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    );
    let c = 7.25;
    let p = PlaneOriginMap::from_fn(9, 7, |_, _| c);
    for variant in ConductanceVariant::ALL {
        let out = diffuse_step(&p, &g, &cfg(variant, 5), &AffinityTransforms::default()).unwrap();
        for &x in out.as_slice() {
            assert!((x - c).abs() <= 1e-12 * c);
        }
    }
}

#[test]
fn uniform_three_tap_average() {
    let g = features(3, 1, 1, vec![1.0; 3]);
    let t = AffinityTransforms::default();
    let c = cfg(ConductanceVariant::AsymmetricCosine, 3);
    let p = PlaneOriginMap::from_vec(3, 1, vec![1.0, 4.0, 1.0]).unwrap();
    let out = diffuse_step(&p, &g, &c, &t).unwrap();
    assert!((out[1] - 2.0).abs() < 1e-15);
    // Zero is the invalid marker, so (0, 3, 0) averages over the single valid tap.
    let p = PlaneOriginMap::from_vec(3, 1, vec![0.0, 3.0, 0.0]).unwrap();
    let out = diffuse_step(&p, &g, &c, &t).unwrap();
    assert_eq!(out.as_slice(), &[3.0, 3.0, 3.0]);
}

#[test]
fn isolated_invalid_region_stays_invalid() {
    let g = features(7, 1, 1, vec![1.0; 7]);
    let p = PlaneOriginMap::from_vec(7, 1, vec![2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let out = diffuse_step(
        &p,
        &g,
        &cfg(ConductanceVariant::Euclidean, 3),
        &AffinityTransforms::default(),
    )
    .unwrap();
    assert_eq!(out.as_slice(), &[2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn matches_brute_force_on_random_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = features(
        7,
        7,
        6,
        (0..7 * 7 * 6)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    );
    let p: Vec<f64> = (0..49).map(|_| rng.random_range(1.0..20.0)).collect();
    let f_mat: Option<Vec<Vec<f64>>> = Some(
        (0..6)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    );
    let g_mat: Option<Vec<Vec<f64>>> = Some(
        (0..6)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    );
    let c = cfg(ConductanceVariant::AsymmetricCosine, 5);
    let t = AffinityTransforms::new(to_projection(&f_mat), to_projection(&g_mat));
    let out = diffuse_step(
        &PlaneOriginMap::from_vec(7, 7, p.clone()).unwrap(),
        &g,
        &c,
        &t,
    )
    .unwrap();
    let expected = brute_force_step(&p, &g, &c, &f_mat, &g_mat);
    for (a, b) in out.as_slice().iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn oracle_equivalence_and_convex_bound(
        w in 1usize..=12, h in 1usize..=12, seed in any::<u64>(),
        variant in proptest::sample::select(ConductanceVariant::ALL.to_vec()),
        kernel in proptest::sample::select(vec![3usize, 5, 7]),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = features(w, h, 4, (0..w * h * 4).map(|_| rng.random_range(-1.0..1.0)).collect());
        let p: Vec<f64> = (0..w * h)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.5..30.0) })
            .collect();
        let c = cfg(variant, kernel);
        let out = diffuse_step(&PlaneOriginMap::from_vec(w, h, p.clone()).unwrap(), &g, &c,
            &AffinityTransforms::default()).unwrap();
        let expected = brute_force_step(&p, &g, &c, &None, &None);
        let r = (kernel / 2) as i64;
        for i in 0..w * h {
            prop_assert!((out[i] - expected[i]).abs() <= 1e-10);
            let (ui, vi) = ((i % w) as i64, (i / w) as i64);
            let window: Vec<f64> = (0..w * h)
                .filter(|&j| ((j % w) as i64 - ui).abs() <= r && ((j / w) as i64 - vi).abs() <= r)
                .map(|j| p[j])
                .filter(|&x| x > 0.0)
                .collect();
            if window.is_empty() {
                prop_assert_eq!(out[i], 0.0);
            } else {
                let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out[i] >= lo * (1.0 - 1e-12) && out[i] <= hi * (1.0 + 1e-12));
            }
        }
    }
}

#[test]
fn diffusion_is_deterministic_across_thread_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (w, h) = (40, 30);
    let g = features(
        w,
        h,
        6,
        (0..w * h * 6)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    );
    let p = PlaneOriginMap::from_vec(
        w,
        h,
        (0..w * h).map(|_| rng.random_range(1.0..9.0)).collect(),
    )
    .unwrap();
    let c = DiffusionConfig::default();
    let t = AffinityTransforms::default();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| diffuse_step(&p, &g, &c, &t).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert!(one
        .as_slice()
        .iter()
        .zip(many.as_slice())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn replace_seeds_examples() {
    let p = PlaneOriginMap::from_vec(3, 1, vec![4.0, 4.0, 4.0]).unwrap();
    let seeds = PlaneOriginMap::from_vec(3, 1, vec![8.0, 0.0, 8.0]).unwrap();
    let m = ConfidenceMap::from_vec(3, 1, vec![1.0, 0.9, 0.25]).unwrap();
    let out = replace_seeds(&p, &seeds, &m).unwrap();
    assert_eq!(out.as_slice(), &[8.0, 4.0, 5.0]);
}

#[test]
fn replace_seeds_fills_invalid_estimate() {
    let p = PlaneOriginMap::from_vec(2, 1, vec![0.0, 0.0]).unwrap();
    let seeds = PlaneOriginMap::from_vec(2, 1, vec![3.0, 3.0]).unwrap();
    let m = ConfidenceMap::from_vec(2, 1, vec![0.5, 0.0]).unwrap();
    let out = replace_seeds(&p, &seeds, &m).unwrap();
    assert_eq!(out.as_slice(), &[3.0, 0.0]);
}

proptest! {
    #[test]
    fn replace_seeds_stays_between_estimate_and_seed(
        p in 0.1..50.0f64, s in prop_oneof![Just(0.0), 0.1..50.0f64], m in 0.0..=1.0f64,
    ) {
        let out = replace_seeds(
            &PlaneOriginMap::from_vec(1, 1, vec![p]).unwrap(),
            &PlaneOriginMap::from_vec(1, 1, vec![s]).unwrap(),
            &ConfidenceMap::from_vec(1, 1, vec![m]).unwrap(),
        ).unwrap()[0];
        if s > 0.0 {
            prop_assert!(out >= p.min(s) * (1.0 - 1e-15) && out <= p.max(s) * (1.0 + 1e-15));
        } else {
            prop_assert_eq!(out, p);
        }
    }
}

fn tilted_plane(k: &Intrinsics, n: Vector3<f64>, d0: f64) -> (DepthMap, NormalMap) {
    let d = DepthMap::from_fn(k.width, k.height, |u, v| {
        d0 / n.dot(&k.ray(u as f64, v as f64))
    });
    (d, NormalMap::constant(k.width, k.height, n))
}

#[test]
fn zero_iterations_is_a_round_trip() {
    let k = Intrinsics::desk();
    let (d, n) = tilted_plane(&k, Vector3::new(0.2, -0.3, 0.9).normalize(), 6.0);
    let g = crate::frontend::build_guidance(&d, &n, 20.0).unwrap();
    let m = ConfidenceMap::empty(k.width, k.height);
    let sparse = DepthMap::empty(k.width, k.height);
    let inputs = RefineInputs {
        coarse: &d,
        sparse: &sparse,
        normals: &n,
        confidence: &m,
        intrinsics: &k,
        guidance: &g,
    };
    let c = DiffusionConfig {
        iterations: 0,
        ..Default::default()
    };
    let out = refine(&inputs, &c, &AffinityTransforms::default()).unwrap();
    for (a, b) in out.as_slice().iter().zip(d.as_slice()) {
        assert!(((a - b) / b).abs() <= 1e-9);
    }
}

#[test]
fn constant_plane_origin_is_a_fixed_point() {
    let k = Intrinsics::desk();
    let (d, n) = tilted_plane(&k, Vector3::new(-0.25, 0.1, 0.95).normalize(), 8.0);
    let g = crate::frontend::build_guidance(&d, &n, 20.0).unwrap();
    let p = depth_to_plane_origin(&d, &n, &k, 1e-3).unwrap();
    let seeds = p.clone();
    let m = ConfidenceMap::from_vec(k.width, k.height, vec![1.0; k.width * k.height]).unwrap();
    let t = AffinityTransforms::default();
    let mut current = p.clone();
    for iterations in 1..=4 {
        let c = DiffusionConfig {
            iterations: 1,
            ..Default::default()
        };
        let next = refine_plane_origin(&current, &seeds, &m, &g, &c, &t).unwrap();
        for (a, b) in next.as_slice().iter().zip(current.as_slice()) {
            assert!(((a - b) / b).abs() <= 1e-12, "iteration {iterations}");
        }
        current = next;
    }
}

#[test]
fn without_refinement_is_bit_identical() {
    let k = Intrinsics::new(10.0, 10.0, 4.0, 3.0, 8, 6).unwrap();
    let d = DepthMap::from_fn(8, 6, |u, v| 1.0 + 0.1 * (u + v) as f64);
    let n = NormalMap::constant(8, 6, Vector3::z());
    let g = crate::frontend::build_guidance(&d, &n, 20.0).unwrap();
    let m = ConfidenceMap::empty(8, 6);
    let inputs = RefineInputs {
        coarse: &d,
        sparse: &d,
        normals: &n,
        confidence: &m,
        intrinsics: &k,
        guidance: &g,
    };
    let out = ablate(
        &inputs,
        &DiffusionConfig::default(),
        &AffinityTransforms::default(),
        Ablation::WithoutRefinement,
    )
    .unwrap();
    assert_eq!(out, d);
}

#[test]
fn symmetric_variant_has_symmetric_pairwise_weights() {
    // Two pixels; each one's window holds both. With f = g the self-affinities
    // match, so the weight i→j equals j→i.
    let g = features(2, 1, 3, vec![0.9, 0.1, -0.3, 0.2, 0.8, 0.4]);
    let f = Projection::Matrix(vec![
        vec![1.0, 0.5, 0.0],
        vec![0.0, 1.0, -0.5],
        vec![0.3, 0.0, 1.0],
    ]);
    let h = Projection::Matrix(vec![
        vec![0.2, 0.0, 1.0],
        vec![1.0, -1.0, 0.0],
        vec![0.0, 0.7, 0.7],
    ]);
    let pair = [(0, 0), (1, 0)];
    let weight = |variant, t: &AffinityTransforms, from: usize| {
        let c = DiffusionConfig {
            temperature: 1.0,
            ..cfg(variant, 3)
        };
        conductance_weights(&g, pair[from], &pair, &c, t).unwrap()[1 - from]
    };

    let shared = AffinityTransforms::new(f.clone(), f.clone());
    let sym = ConductanceVariant::SymmetricCosine;
    assert!((weight(sym, &shared, 0) - weight(sym, &shared, 1)).abs() < 1e-15);

    // Symmetric mode ignores g, so the distinct g below changes nothing.
    let with_other_g = AffinityTransforms::new(f.clone(), h.clone());
    for from in 0..2 {
        assert_eq!(weight(sym, &shared, from), weight(sym, &with_other_g, from));
    }

    let asym = ConductanceVariant::AsymmetricCosine;
    let distinct = AffinityTransforms::new(f, h);
    assert!((weight(asym, &distinct, 0) - weight(asym, &distinct, 1)).abs() > 1e-3);
}

#[test]
fn dimension_mismatch_between_plane_and_guidance() {
    let g = features(2, 2, 1, vec![1.0; 4]);
    let p = PlaneOriginMap(Grid::filled(3, 2, 1.0));
    assert!(matches!(
        diffuse_step(
            &p,
            &g,
            &DiffusionConfig::default(),
            &AffinityTransforms::default()
        ),
        Err(Error::DimensionMismatch { .. })
    ));
}
