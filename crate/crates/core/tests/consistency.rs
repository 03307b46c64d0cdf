mod common;

use std::collections::HashMap;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viewset::consistency::*;
use viewset::geometry::{fundamental_matrix, Camera, Mat3, Vec3};
use viewset::ViewId;

/// Exact correspondences: points in front of camera `a` projected into both.
fn exact_matches(rng: &mut ChaCha8Rng, a: &Camera, b: &Camera, n: usize) -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    while out.len() < n {
        let local = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(2.0..6.0));
        let p = a.center() + a.rotation().transpose() * local;
        if let (Some(pa), Some(pb)) = (a.project(&p), b.project(&p)) {
            out.push([pa.0, pa.1, pb.0, pb.1]);
        }
    }
    out
}

fn pair_cameras(rng: &mut ChaCha8Rng) -> (Camera, Camera) {
    let a = random_camera(rng);
    let b = Camera::looking(intrinsics(), a.rotation().transpose() * rotation(random_vec(rng, 0.2)), a.center() + random_vec(rng, 1.0)).unwrap();
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sed_is_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let xa = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let xb = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        prop_assert_eq!(sed(&f, xa, xb), sed(&f.transpose(), xb, xa));
    }

    #[test]
    fn sed_ignores_scale_of_f(seed in any::<u64>(), s in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let xa = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let xb = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let (a, b) = (sed(&f, xa, xb), sed(&(f * s), xa, xb));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn exact_correspondences_have_near_zero_sed(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = pair_cameras(&mut rng);
        let f = fundamental_matrix(&a, &b).unwrap();
        for m in exact_matches(&mut rng, &a, &b, 20) {
            prop_assert!(sed(&f, (m[0], m[1]), (m[2], m[3])) <= 1e-6);
        }
    }

    #[test]
    fn percentage_is_monotone_and_recounts(seed in any::<u64>(), pairs in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cams = HashMap::new();
        let mut sets = Vec::new();
        for k in 0..pairs {
            let (a, b) = pair_cameras(&mut rng);
            let n = rng.random_range(5..20);
            let noise = rng.random_range(0.0..5.0);
            let matches = exact_matches(&mut rng, &a, &b, n)
                .into_iter()
                .map(|m| [m[0], m[1], m[2] + rng.random_range(-noise..=noise), m[3] + rng.random_range(-noise..=noise)])
                .collect();
            let (ia, ib) = (ViewId::from(format!("a{k}")), ViewId::from(format!("b{k}")));
            cams.insert(ia.clone(), a);
            cams.insert(ib.clone(), b);
            sets.push(MatchSet::new(ia, ib, matches));
        }
        let config = TsedConfig::default();
        let sweep = default_sweep();
        let report = tsed_evaluate(&sets, &cams, &config, &sweep).unwrap();
        for w in report.percent.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for (k, &t) in sweep.iter().enumerate() {
            let cfg = TsedConfig { t_error: t, ..config };
            let consistent = sets
                .iter()
                .filter(|m| {
                    let f = fundamental_matrix(&cams[&m.pair.0], &cams[&m.pair.1]).unwrap();
                    tsed_pair(m, &f, &cfg).consistent
                })
                .count();
            prop_assert_eq!(report.percent[k], 100.0 * consistent as f64 / sets.len() as f64);
        }
    }
}

#[test]
fn perpendicular_offset_breaks_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (a, b) = pair_cameras(&mut rng);
    let f = fundamental_matrix(&a, &b).unwrap();
    let exact = exact_matches(&mut rng, &a, &b, 30);
    let shifted: Vec<[f64; 4]> = exact
        .iter()
        .map(|m| {
            let l = f * Vec3::new(m[0], m[1], 1.0);
            let n = (l.x * l.x + l.y * l.y).sqrt();
            [m[0], m[1], m[2] + 10.0 * l.x / n, m[3] + 10.0 * l.y / n]
        })
        .collect();
    let cams = HashMap::from([(ViewId::from("a"), a), (ViewId::from("b"), b)]);
    let good = tsed_evaluate(&[MatchSet::new("a", "b", exact)], &cams, &TsedConfig::default(), &default_sweep()).unwrap();
    let bad = tsed_evaluate(&[MatchSet::new("a", "b", shifted)], &cams, &TsedConfig::default(), &default_sweep()).unwrap();
    assert!(good.percent.iter().all(|p| *p == 100.0));
    assert!(bad.percent.iter().all(|p| *p == 0.0));
    assert!(bad.pairs[0].median.unwrap() >= 5.0);
}

#[test]
fn too_few_matches_are_inconsistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (a, b) = pair_cameras(&mut rng);
    let f = fundamental_matrix(&a, &b).unwrap();
    let m = MatchSet::new("a", "b", exact_matches(&mut rng, &a, &b, 9));
    assert!(!tsed_pair(&m, &f, &TsedConfig::default()).consistent);
    assert!(tsed_pair(&m, &f, &TsedConfig { t_matches: 9, t_error: 2.0 }).consistent);
    let empty = tsed_pair(&MatchSet::new("a", "b", vec![]), &f, &TsedConfig { t_matches: 1, t_error: 2.0 });
    assert_eq!((empty.consistent, empty.median), (false, None));
}

#[test]
fn no_pairs_means_zero_percent() {
    let report = tsed_evaluate(&[], &HashMap::new(), &TsedConfig::default(), &default_sweep()).unwrap();
    assert_eq!(report.percent, vec![0.0; 7]);
}

#[test]
fn pair_counts_per_mode() {
    let seq = PairStructure::Sequence((0..10).map(ViewId::from).collect());
    assert_eq!(make_pairs(&seq, PairMode::Adjacent).unwrap().len(), 9);
    assert_eq!(make_pairs(&seq, PairMode::FirstLast).unwrap(), vec![(ViewId::from(0), ViewId::from(9))]);
    let stereo = PairStructure::Stereo((0..5).map(|i| (ViewId::from(format!("l{i}")), ViewId::from(format!("r{i}")))).collect());
    assert_eq!(make_pairs(&stereo, PairMode::SameSided).unwrap().len(), 8);
    assert_eq!(make_pairs(&stereo, PairMode::CrossSided).unwrap().len(), 8);
    assert!(make_pairs(&seq, PairMode::CrossSided).is_err());
}
