mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viewset::diffusion::{SetDenoiser, ViewState};
use viewset::geometry::Camera;
use viewset::setdenoiser::*;

fn config(key_mode: KeyMode) -> ToyDenoiserConfig {
    ToyDenoiserConfig { feature_dim: 8, num_blocks: 2, steps: 100, value_dim: 3, num_frequencies: 3, key_mode, seed: 4, ..Default::default() }
}

fn random_set(rng: &mut ChaCha8Rng, n: usize, steps: usize) -> (Vec<ViewState>, Vec<Camera>) {
    let views = (0..n)
        .map(|i| {
            let time = if i == 0 { 0 } else { rng.random_range(1..=steps) };
            ViewState::new(i, (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(), time)
        })
        .collect();
    let cams = (0..n).map(|_| random_camera(rng)).collect();
    (views, cams)
}

fn all_outputs(p: &ToyDenoiserParams, views: &[ViewState], cams: &[Camera]) -> Vec<Vec<f64>> {
    forward_all(p, views, &token_ray_maps(&p.config, views, cams).unwrap()).unwrap()
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn permuting_inputs_permutes_outputs(seed in any::<u64>(), n in 2usize..=6, features in any::<bool>()) {
        let mode = if features { KeyMode::RaysAndFeatures } else { KeyMode::RaysOnly };
        let p = init_toy_denoiser(config(mode)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (views, cams) = random_set(&mut rng, n, 100);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.rotate_left(rng.random_range(0..n));
        perm.swap(0, n - 1);
        let pv: Vec<_> = perm.iter().map(|&i| views[i].clone()).collect();
        let pc: Vec<_> = perm.iter().map(|&i| cams[i].clone()).collect();
        let base = all_outputs(&p, &views, &cams);
        let permuted = all_outputs(&p, &pv, &pc);
        let expect: Vec<_> = perm.iter().map(|&i| base[i].clone()).collect();
        prop_assert!(max_diff(&permuted, &expect) <= 1e-6);
    }

    #[test]
    fn global_rigid_motion_leaves_outputs_unchanged(seed in any::<u64>(), n in 1usize..=5, features in any::<bool>()) {
        let mode = if features { KeyMode::RaysAndFeatures } else { KeyMode::RaysOnly };
        let p = init_toy_denoiser(config(mode)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (views, cams) = random_set(&mut rng, n, 100);
        let g = random_rigid(&mut rng);
        let moved: Vec<_> = cams.iter().map(|c| c.transformed(&g)).collect();
        let err = max_diff(&all_outputs(&p, &views, &cams), &all_outputs(&p, &views, &moved));
        prop_assert!(err <= 1e-4, "deviation {err}");
    }
}

#[test]
fn conditioning_view_influences_generated_estimates() {
    let p = init_toy_denoiser(config(KeyMode::RaysOnly)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut views, mut cams) = random_set(&mut rng, 3, 100);
    let base = p.estimate(&views, &cams).unwrap();
    assert_eq!(base.len(), 2);
    views[0].value[1] += 1.0;
    let changed_value = p.estimate(&views, &cams).unwrap();
    assert!(max_diff(&base, &changed_value) > 1e-6);
    cams[0] = random_camera(&mut rng);
    let changed_pose = p.estimate(&views, &cams).unwrap();
    assert!(max_diff(&changed_value, &changed_pose) > 1e-6);
}

#[test]
fn masked_output_drops_only_conditioning_streams() {
    let p = init_toy_denoiser(config(KeyMode::RaysAndFeatures)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut views, cams) = random_set(&mut rng, 4, 100);
    views[2].time = 0;
    let all = all_outputs(&p, &views, &cams);
    let masked = p.estimate(&views, &cams).unwrap();
    assert_eq!(masked, vec![all[1].clone(), all[3].clone()]);
}

#[test]
fn equal_times_and_poses_give_equal_treatment() {
    // Two streams with identical value, time and camera are indistinguishable,
    // whichever one carries the conditioning label elsewhere in the set.
    let p = init_toy_denoiser(config(KeyMode::RaysOnly)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cam = random_camera(&mut rng);
    let other = random_camera(&mut rng);
    let views = vec![
        ViewState::new("a", vec![0.1, 0.2, 0.3], 40),
        ViewState::new("b", vec![0.1, 0.2, 0.3], 40),
        ViewState::new("c", vec![-1.0, 0.0, 1.0], 0),
    ];
    let out = all_outputs(&p, &views, &[cam.clone(), cam, other]);
    assert!(max_diff(&out[..1], &out[1..2]) <= 1e-12);
}

#[test]
fn feature_keys_change_the_function() {
    let a = init_toy_denoiser(config(KeyMode::RaysOnly)).unwrap();
    let b = init_toy_denoiser(config(KeyMode::RaysAndFeatures)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (views, cams) = random_set(&mut rng, 3, 100);
    assert!(max_diff(&all_outputs(&a, &views, &cams), &all_outputs(&b, &views, &cams)) > 1e-9);
}

#[test]
fn dump_round_trip_preserves_outputs() {
    let p = init_toy_denoiser(config(KeyMode::RaysAndFeatures)).unwrap();
    let q = ToyDenoiserParams::load_dump(&p.dump()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (views, cams) = random_set(&mut rng, 3, 100);
    assert_eq!(all_outputs(&p, &views, &cams), all_outputs(&q, &views, &cams));
}
