use std::collections::HashSet;

use super::{select_keyframes, GenerationPlan, PlanError, Role, Stage, ViewSpec};
use crate::geometry::camera_distance;
use crate::ViewId;

fn plan_of(views: &[ViewSpec], stages: Vec<Stage>) -> GenerationPlan {
    GenerationPlan { views: views.to_vec(), stages }
}

/// Splits `ordered_views` into a non-empty observed prefix and a generated
/// remainder.
fn split_prefix(ordered_views: &[ViewSpec]) -> Result<(&[ViewSpec], &[ViewSpec]), PlanError> {
    if ordered_views.is_empty() {
        return Err(PlanError::EmptyInput);
    }
    let n_obs = ordered_views.iter().take_while(|v| v.role == Role::Observed).count();
    if n_obs == 0 {
        return Err(PlanError::InvalidParameter("the first view must be observed".into()));
    }
    let (obs, gen) = ordered_views.split_at(n_obs);
    if let Some(v) = gen.iter().find(|v| v.role == Role::Observed) {
        return Err(PlanError::InvalidParameter(format!(
            "observed view `{}` follows a generated view",
            v.id
        )));
    }
    Ok((obs, gen))
}

fn ids_of(views: &[ViewSpec]) -> Vec<ViewId> {
    views.iter().map(|v| v.id.clone()).collect()
}

/// First-order autoregression: each generated view conditions on the one
/// before it, the first on the observation.
pub fn plan_chain(ordered_views: &[ViewSpec]) -> Result<GenerationPlan, PlanError> {
    let (obs, gen) = split_prefix(ordered_views)?;
    if obs.len() != 1 {
        return Err(PlanError::InvalidParameter(format!(
            "a chain starts from one observed view, got {}",
            obs.len()
        )));
    }
    let stages = ordered_views
        .windows(2)
        .map(|w| Stage { generate: vec![w[1].id.clone()], condition: vec![w[0].id.clone()] })
        .collect();
    debug_assert_eq!(gen.len() + 1, ordered_views.len());
    Ok(plan_of(ordered_views, stages))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyframedParams {
    /// In-between views separating consecutive keyframes.
    pub spacing: usize,
    /// Keyframes generated jointly per stage.
    pub keyframe_chunk: usize,
    /// Conditioning views for each in-between stage.
    pub cond_count: usize,
}

impl Default for KeyframedParams {
    fn default() -> Self {
        Self { spacing: 2, keyframe_chunk: 4, cond_count: 2 }
    }
}

/// Keyframed sampling along an ordered trajectory.
///
/// Every `(spacing + 1)`-th generated view is a keyframe, and the last
/// generated view is always one. Keyframes are generated in chunks of
/// `keyframe_chunk`, each conditioned on the observed views plus the
/// previous chunk. The in-between views of each gap between keyframes form
/// one stage conditioned on the `cond_count` candidates (observed views and
/// keyframes) nearest to the gap in trajectory position, ties to the earlier
/// position.
pub fn plan_keyframed(ordered_views: &[ViewSpec], params: KeyframedParams) -> Result<GenerationPlan, PlanError> {
    if params.keyframe_chunk == 0 || params.cond_count == 0 {
        return Err(PlanError::InvalidParameter("keyframe_chunk and cond_count must be at least 1".into()));
    }
    let (obs, gen) = split_prefix(ordered_views)?;
    let n_obs = obs.len();
    let observed = ids_of(obs);
    let is_key: Vec<bool> =
        (1..=gen.len()).map(|j| j % (params.spacing + 1) == 0 || j == gen.len()).collect();

    let keyframes: Vec<usize> = (0..gen.len()).filter(|&j| is_key[j]).collect();
    let mut stages = Vec::new();
    let mut previous: Vec<ViewId> = Vec::new();
    for chunk in keyframes.chunks(params.keyframe_chunk) {
        let generate: Vec<ViewId> = chunk.iter().map(|&j| gen[j].id.clone()).collect();
        let condition = observed.iter().chain(&previous).cloned().collect();
        stages.push(Stage { generate: generate.clone(), condition });
        previous = generate;
    }

    // Candidates as (trajectory position, id).
    let candidates: Vec<(usize, &ViewId)> = (0..n_obs)
        .map(|i| (i, &obs[i].id))
        .chain(keyframes.iter().map(|&j| (n_obs + j, &gen[j].id)))
        .collect();
    let mut j = 0;
    while j < gen.len() {
        if is_key[j] {
            j += 1;
            continue;
        }
        let start = j;
        while j < gen.len() && !is_key[j] {
            j += 1;
        }
        let (lo, hi) = (n_obs + start, n_obs + j - 1);
        let mut ranked: Vec<(usize, usize, &ViewId)> = candidates
            .iter()
            .map(|&(p, id)| (if p < lo { lo - p } else { p - hi }, p, id))
            .collect();
        ranked.sort_by_key(|&(d, p, _)| (d, p));
        let condition = ranked.iter().take(params.cond_count).map(|&(_, _, id)| id.clone()).collect();
        let generate = gen[start..j].iter().map(|v| v.id.clone()).collect();
        stages.push(Stage { generate, condition });
    }
    Ok(plan_of(ordered_views, stages))
}

fn check_cover(views: &[ViewSpec], stages: &[Stage]) -> Result<(), PlanError> {
    let covered: HashSet<&ViewId> = stages.iter().flat_map(|s| &s.generate).collect();
    match views.iter().find(|v| v.role == Role::Generated && !covered.contains(&v.id)) {
        Some(v) => Err(PlanError::InvalidParameter(format!("generated view `{}` is not scheduled", v.id))),
        None => Ok(()),
    }
}

/// Checks that every id names a generated view of `views` and appears once.
fn check_disjoint<'a>(views: &[ViewSpec], ids: impl IntoIterator<Item = &'a ViewId>) -> Result<(), PlanError> {
    let mut seen = HashSet::new();
    for id in ids {
        match views.iter().find(|v| &v.id == id) {
            None => return Err(PlanError::UnknownView(id.clone())),
            Some(v) if v.role == Role::Observed => {
                return Err(PlanError::InvalidParameter(format!("observed view `{id}` cannot be generated")))
            }
            _ => {}
        }
        if !seen.insert(id) {
            return Err(PlanError::OverlappingGroups(id.clone()));
        }
    }
    Ok(())
}

fn observed_of(views: &[ViewSpec]) -> Vec<ViewId> {
    views.iter().filter(|v| v.role == Role::Observed).map(|v| v.id.clone()).collect()
}

/// Grouped set-autoregression: each group is generated jointly,
/// conditioned on the previous group (the first on the observed views).
pub fn plan_grouped(views: &[ViewSpec], groups: &[Vec<ViewId>]) -> Result<GenerationPlan, PlanError> {
    if groups.iter().any(|g| g.is_empty()) {
        return Err(PlanError::InvalidParameter("groups must be non-empty".into()));
    }
    check_disjoint(views, groups.iter().flatten())?;
    let mut previous = observed_of(views);
    let mut stages = Vec::with_capacity(groups.len());
    for g in groups {
        stages.push(Stage { generate: g.clone(), condition: previous });
        previous = g.clone();
    }
    check_cover(views, &stages)?;
    Ok(plan_of(views, stages))
}

/// Single-view autoregression over stereo pairs in the order
/// `R1, L1, R2, L2, ...`; `R1` conditions on the observed views.
pub fn plan_zigzag(views: &[ViewSpec], pairs: &[(ViewId, ViewId)]) -> Result<GenerationPlan, PlanError> {
    let order: Vec<&ViewId> = pairs.iter().flat_map(|(r, l)| [r, l]).collect();
    check_disjoint(views, order.iter().copied())?;
    let mut previous = observed_of(views);
    let mut stages = Vec::with_capacity(order.len());
    for id in order {
        stages.push(Stage { generate: vec![id.clone()], condition: previous });
        previous = vec![id.clone()];
    }
    check_cover(views, &stages)?;
    Ok(plan_of(views, stages))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnorderedParams {
    /// Generated keyframes (the observed view is not counted).
    pub keyframe_count: usize,
    /// Conditioning views for each in-between view.
    pub cond_size: usize,
    pub rotation_weight: f64,
}

impl Default for UnorderedParams {
    fn default() -> Self {
        Self { keyframe_count: 4, cond_size: 2, rotation_weight: 0.0 }
    }
}

/// Plan for an unordered cloud of views with exactly one observed view.
///
/// Views are ranked farthest-first from the observed view. The first
/// `keyframe_count` of them form one stage conditioned on the observation;
/// the rest follow one view per stage, in the same ranking, each conditioned
/// on its `cond_size` nearest already-available views (the observation
/// included).
pub fn plan_unordered(views: &[ViewSpec], params: UnorderedParams) -> Result<GenerationPlan, PlanError> {
    if params.keyframe_count == 0 || params.cond_size == 0 {
        return Err(PlanError::InvalidParameter("keyframe_count and cond_size must be at least 1".into()));
    }
    if views.is_empty() {
        return Err(PlanError::EmptyInput);
    }
    let observed: Vec<usize> = (0..views.len()).filter(|&i| views[i].role == Role::Observed).collect();
    let [given] = observed[..] else {
        return Err(PlanError::InvalidParameter(format!(
            "exactly one observed view is required, got {}",
            observed.len()
        )));
    };
    let poses: Vec<_> = views.iter().map(|v| v.camera.clone()).collect();
    let order = select_keyframes(&poses, given, views.len(), params.rotation_weight)?;
    let split = (1 + params.keyframe_count).min(order.len());
    let mut stages = Vec::new();
    if split > 1 {
        stages.push(Stage {
            generate: order[1..split].iter().map(|&i| views[i].id.clone()).collect(),
            condition: vec![views[given].id.clone()],
        });
    }
    let mut available: Vec<usize> = order[..split].to_vec();
    for &i in &order[split..] {
        let mut ranked: Vec<(f64, usize, usize)> = available
            .iter()
            .enumerate()
            .map(|(rank, &a)| (camera_distance(&poses[i], &poses[a], params.rotation_weight), rank, a))
            .collect();
        ranked.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let condition = ranked.iter().take(params.cond_size).map(|&(_, _, a)| views[a].id.clone()).collect();
        stages.push(Stage { generate: vec![views[i].id.clone()], condition });
        available.push(i);
    }
    Ok(plan_of(views, stages))
}
