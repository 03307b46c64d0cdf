mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viewset::consistency::sed;
use viewset::geometry::*;
use viewset::ViewId;

fn encode_set(cameras: &[Camera], reference: usize, k: usize) -> Vec<f64> {
    let maps: Vec<RayMap> = cameras.iter().enumerate().map(|(i, c)| build_ray_map(ViewId::from(i), c)).collect();
    canonicalize_set(&maps, reference)
        .unwrap()
        .iter()
        .flat_map(|m| fourier_encode(m, &RayEncoding::with_frequencies(k)).unwrap().values)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_self_rays_depend_only_on_intrinsics(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cam = random_camera(&mut rng);
        let map = build_ray_map("a".into(), &cam);
        let canon = &canonicalize_set(std::slice::from_ref(&map), 0).unwrap()[0];
        let k = cam.intrinsics();
        for v in 0..map.height() {
            for u in 0..map.width() {
                let r = canon.get(u, v);
                prop_assert!(r.origin.norm() <= 1e-9);
                let d = k.unproject(u as f64 + 0.5, v as f64 + 0.5).normalize();
                prop_assert!((r.direction - d).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn canonical_encodings_ignore_global_motion(seed in any::<u64>(), n in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cams: Vec<Camera> = (0..n).map(|_| random_camera(&mut rng)).collect();
        let g = random_rigid(&mut rng);
        let moved: Vec<Camera> = cams.iter().map(|c| c.transformed(&g)).collect();
        for reference in 0..n {
            let a = encode_set(&cams, reference, 6);
            let b = encode_set(&moved, reference, 6);
            let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-9, "max deviation {err}");
        }
    }

    #[test]
    fn transformed_camera_projects_moved_points_identically(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cam = random_camera(&mut rng);
        let g = random_rigid(&mut rng);
        let p = cam.center() + cam.rotation().transpose() * Vec3::new(0.1, -0.2, 3.0);
        let (u, v) = cam.project(&p).unwrap();
        let (u2, v2) = cam.transformed(&g).project(&g.apply_point(&p)).unwrap();
        prop_assert!((u - u2).abs() < 1e-9 && (v - v2).abs() < 1e-9);
    }

    #[test]
    fn ground_truth_correspondences_have_zero_epipolar_error(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_camera(&mut rng);
        let offset = random_vec(&mut rng, 0.5) + Vec3::new(0.3, 0.0, 0.0);
        let b = Camera::looking(
            intrinsics(),
            a.rotation().transpose() * rotation(random_vec(&mut rng, 0.1)),
            a.center() + a.rotation().transpose() * offset,
        )
        .unwrap();
        let f = fundamental_matrix(&a, &b).unwrap();
        let mut checked = 0;
        for _ in 0..30 {
            let local = Vec3::new(
                rand::Rng::random_range(&mut rng, -1.0..1.0),
                rand::Rng::random_range(&mut rng, -1.0..1.0),
                rand::Rng::random_range(&mut rng, 3.0..8.0),
            );
            let p = a.center() + a.rotation().transpose() * local;
            if let (Some(xa), Some(xb)) = (a.project(&p), b.project(&p)) {
                let e = sed(&f, xa, xb);
                prop_assert!(e <= 1e-6, "epipolar error {e}");
                checked += 1;
            }
        }
        prop_assert!(checked > 0);
    }
}

#[test]
fn trajectory_file_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cams: Vec<NamedCamera> =
        (0..3).map(|i| NamedCamera { id: format!("v{i}").into(), camera: random_camera(&mut rng) }).collect();
    let text = write_trajectory(&cams);
    assert_eq!(parse_trajectory(&text).unwrap(), cams);
}

#[test]
fn malformed_trajectory_names_the_field() {
    let err = parse_trajectory(r#"[{"id":"a","fy":1,"cx":0,"cy":0,"width":1,"height":1,"R":[1,0,0,0,1,0,0,0,1],"t":[0,0,0]}]"#)
        .unwrap_err();
    assert!(err.to_string().contains("fx"), "{err}");
    let dup = r#"[{"id":"a","fx":1,"fy":1,"cx":0,"cy":0,"width":1,"height":1,"R":[1,0,0,0,1,0,0,0,1],"t":[0,0,0]},
                  {"id":"a","fx":1,"fy":1,"cx":0,"cy":0,"width":1,"height":1,"R":[1,0,0,0,1,0,0,0,1],"t":[1,0,0]}]"#;
    assert!(matches!(parse_trajectory(dup), Err(GeometryError::DuplicateId(_))));
    let bad_rotation = r#"[{"id":"a","fx":1,"fy":1,"cx":0,"cy":0,"width":1,"height":1,"R":[2,0,0,0,1,0,0,0,1],"t":[0,0,0]}]"#;
    assert!(parse_trajectory(bad_rotation).is_err());
}
