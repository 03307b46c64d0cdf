mod common;

use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viewset::geometry::{camera_distance, Camera};
use viewset::plan::*;

/// Greedy max-min selection recomputing every nearest distance from scratch.
fn brute_force(poses: &[Camera], given: usize, count: usize, w: f64) -> Vec<usize> {
    let mut selected = vec![given];
    while selected.len() < count {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..poses.len() {
            if selected.contains(&i) {
                continue;
            }
            let d = selected.iter().map(|&s| camera_distance(&poses[i], &poses[s], w)).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        selected.push(best.unwrap().0);
    }
    selected
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn keyframes_match_brute_force(seed in any::<u64>(), n in 1usize..=8, weighted in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let poses: Vec<Camera> = (0..n).map(|_| random_camera(&mut rng)).collect();
        let w = if weighted { 0.7 } else { 0.0 };
        let given = seed as usize % n;
        for count in 1..=n {
            prop_assert_eq!(select_keyframes(&poses, given, count, w).unwrap(), brute_force(&poses, given, count, w));
        }
    }

    #[test]
    fn keyframed_depth_is_bounded(n in 1usize..40, spacing in 0usize..5, chunk in 1usize..6, cond in 1usize..4) {
        let views = line_views(n);
        let plan = plan_keyframed(&views, KeyframedParams { spacing, keyframe_chunk: chunk, cond_count: cond }).unwrap();
        prop_assert!(validate(&plan).is_empty());
        let keyframes = (1..=n).filter(|j| j % (spacing + 1) == 0 || *j == n).count();
        let bound = keyframes.div_ceil(chunk) + 1;
        prop_assert!(depth(&plan).unwrap().max_depth <= bound);
    }

    #[test]
    fn plans_round_trip_through_json(n in 1usize..25, spacing in 0usize..4, chunk in 1usize..5) {
        let views = line_views(n);
        for plan in [
            plan_chain(&views).unwrap(),
            plan_keyframed(&views, KeyframedParams { spacing, keyframe_chunk: chunk, cond_count: 2 }).unwrap(),
        ] {
            let back = GenerationPlan::from_json(&plan.to_json()).unwrap();
            prop_assert_eq!(&back, &plan);
            prop_assert!(validate(&back).is_empty());
            prop_assert_eq!(depth(&back).unwrap(), depth(&plan).unwrap());
        }
    }

    #[test]
    fn unordered_plans_are_valid(seed in any::<u64>(), n in 2usize..12, k in 1usize..5, cond in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let views: Vec<ViewSpec> = (0..n)
            .map(|i| if i == 0 { ViewSpec::observed(i, random_camera(&mut rng)) } else { ViewSpec::generated(i, random_camera(&mut rng)) })
            .collect();
        let plan = plan_unordered(&views, UnorderedParams { keyframe_count: k, cond_size: cond, rotation_weight: 0.5 }).unwrap();
        prop_assert!(validate(&plan).is_empty());
    }
}

#[test]
fn depth_accounting_examples() {
    let chain = plan_chain(&line_views(20)).unwrap();
    assert_eq!(depth(&chain).unwrap().max_depth, 20);
    let single_chunk = KeyframedParams { spacing: 2, keyframe_chunk: 100, cond_count: 2 };
    let key = plan_keyframed(&line_views(20), single_chunk).unwrap();
    assert_eq!(depth(&key).unwrap().max_depth, 2);
}

#[test]
fn validation_reports_every_violation() {
    let views = line_views(3);
    let plan = GenerationPlan {
        views: views.clone(),
        stages: vec![
            Stage { generate: vec!["2".into()], condition: vec!["1".into()] },
            Stage { generate: vec!["O".into(), "x".into()], condition: vec![] },
            Stage { generate: vec![], condition: vec!["O".into()] },
        ],
    };
    let v = validate(&plan);
    assert!(v.contains(&Violation::ConditionNotAvailable { stage: 0, id: "1".into() }));
    assert!(v.contains(&Violation::GeneratesObserved { stage: 1, id: "O".into() }));
    assert!(v.contains(&Violation::UnknownView { stage: 1, id: "x".into() }));
    assert!(v.contains(&Violation::EmptyGenerateSet { stage: 2 }));
    assert!(v.contains(&Violation::NeverGenerated { id: "1".into() }));
    assert!(v.contains(&Violation::NeverGenerated { id: "3".into() }));
    assert!(matches!(depth(&plan), Err(PlanError::Invalid(_))));
}

#[test]
fn plan_file_round_trip() {
    let dir = std::env::temp_dir().join(format!("viewset-plan-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("plan.json");
    let plan = plan_keyframed(&line_views(9), KeyframedParams::default()).unwrap();
    plan.save(&path).unwrap();
    let back = GenerationPlan::load(&path).unwrap();
    assert_eq!(back, plan);
    assert_eq!(depth(&back).unwrap(), depth(&plan).unwrap());
    std::fs::remove_dir_all(&dir).unwrap();
}
