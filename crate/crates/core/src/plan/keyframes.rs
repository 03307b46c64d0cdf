use super::PlanError;
use crate::geometry::{camera_distance, Camera};

/// Farthest-first keyframe selection.
///
/// Starts from `given_index`; every next pick is the not-yet-selected pose
/// whose distance to its nearest selected pose is largest. Ties go to the
/// lowest index.
pub fn select_keyframes(
    poses: &[Camera],
    given_index: usize,
    count: usize,
    rotation_weight: f64,
) -> Result<Vec<usize>, PlanError> {
    if given_index >= poses.len() {
        return Err(PlanError::InvalidParameter(format!(
            "given index {given_index} out of range for {} poses",
            poses.len()
        )));
    }
    if count == 0 || count > poses.len() {
        return Err(PlanError::InvalidParameter(format!(
            "keyframe count {count} must be in 1..={}",
            poses.len()
        )));
    }
    if !(rotation_weight >= 0.0) {
        return Err(PlanError::InvalidParameter("rotation weight must be non-negative".into()));
    }
    let mut selected = vec![given_index];
    let mut taken = vec![false; poses.len()];
    taken[given_index] = true;
    let mut nearest: Vec<f64> =
        poses.iter().map(|p| camera_distance(p, &poses[given_index], rotation_weight)).collect();
    while selected.len() < count {
        let mut best: Option<(usize, f64)> = None;
        for (i, &d) in nearest.iter().enumerate() {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        let (pick, _) = best.expect("count <= poses.len()");
        taken[pick] = true;
        selected.push(pick);
        for (i, p) in poses.iter().enumerate() {
            if !taken[i] {
                nearest[i] = nearest[i].min(camera_distance(p, &poses[pick], rotation_weight));
            }
        }
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::test_support::cam_at;

    #[test]
    fn colinear_examples() {
        let poses: Vec<_> = (0..4).map(|x| cam_at(x as f64)).collect();
        assert_eq!(select_keyframes(&poses, 0, 1, 0.0).unwrap(), vec![0]);
        assert_eq!(select_keyframes(&poses, 0, 2, 0.0).unwrap(), vec![0, 3]);
        assert_eq!(select_keyframes(&poses, 0, 3, 0.0).unwrap(), vec![0, 3, 1]);
        assert_eq!(select_keyframes(&poses, 0, 4, 0.0).unwrap(), vec![0, 3, 1, 2]);
    }

    #[test]
    fn invalid_arguments() {
        let poses: Vec<_> = (0..3).map(|x| cam_at(x as f64)).collect();
        assert!(select_keyframes(&poses, 3, 1, 0.0).is_err());
        assert!(select_keyframes(&poses, 0, 0, 0.0).is_err());
        assert!(select_keyframes(&poses, 0, 4, 0.0).is_err());
        assert!(select_keyframes(&poses, 0, 2, -1.0).is_err());
    }
}
