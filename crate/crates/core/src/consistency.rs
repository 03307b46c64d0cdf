//! Thresholded symmetric epipolar distance (TSED): how many view pairs have
//! enough feature matches whose median symmetric epipolar distance, under
//! the pose-implied fundamental matrix, is below a pixel threshold.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{fundamental_matrix, Camera, GeometryError, Mat3};
use crate::ViewId;

#[derive(Debug, Error)]
pub enum ConsistencyError {
    #[error("pair mode `{mode}` needs a {expected} structure")]
    ModeMismatch { mode: PairMode, expected: &'static str },
    #[error("no camera for view `{0}`")]
    MissingCamera(ViewId),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("match set ({0}, {1}) has a non-finite coordinate")]
    NonFinite(ViewId, ViewId),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("match file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Feature matches between two views: `[u_a, v_a, u_b, v_b]` per match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub pair: (ViewId, ViewId),
    pub matches: Vec<[f64; 4]>,
}

impl MatchSet {
    pub fn new(a: impl Into<ViewId>, b: impl Into<ViewId>, matches: Vec<[f64; 4]>) -> Self {
        Self { pair: (a.into(), b.into()), matches }
    }

    pub fn from_json(json: &str) -> Result<Self, ConsistencyError> {
        let m: MatchSet = serde_json::from_str(json)?;
        if m.matches.iter().flatten().any(|x| !x.is_finite()) {
            return Err(ConsistencyError::NonFinite(m.pair.0, m.pair.1));
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConsistencyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("match set serializes")
    }
}

/// Distance from pixel `(u, v)` to the line `l`, or `+inf` for a zero line.
fn line_distance(l: [f64; 3], u: f64, v: f64) -> f64 {
    let norm = (l[0] * l[0] + l[1] * l[1]).sqrt();
    if norm == 0.0 {
        return f64::INFINITY;
    }
    (l[0] * u + l[1] * v + l[2]).abs() / norm
}

/// Symmetric epipolar distance in pixels: the mean of the distance from
/// `x_b` to the epipolar line `F x_a` and from `x_a` to `F^T x_b`.
///
/// `sed(F, a, b) == sed(F^T, b, a)` holds bit for bit. Points whose
/// epipolar line vanishes (at an epipole) give `+inf`.
pub fn sed(f: &Mat3, xa: (f64, f64), xb: (f64, f64)) -> f64 {
    let fa = |k: usize| f[(k, 0)] * xa.0 + f[(k, 1)] * xa.1 + f[(k, 2)];
    let fb = |k: usize| f[(0, k)] * xb.0 + f[(1, k)] * xb.1 + f[(2, k)];
    let to_b = line_distance([fa(0), fa(1), fa(2)], xb.0, xb.1);
    let to_a = line_distance([fb(0), fb(1), fb(2)], xa.0, xa.1);
    0.5 * (to_b + to_a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsedConfig {
    /// Minimum number of matches for a pair to count as consistent.
    pub t_matches: usize,
    /// Median error threshold in pixels.
    pub t_error: f64,
}

impl Default for TsedConfig {
    fn default() -> Self {
        Self { t_matches: 10, t_error: 2.0 }
    }
}

impl TsedConfig {
    fn check(&self) -> Result<(), ConsistencyError> {
        if self.t_matches == 0 || !(self.t_error > 0.0) {
            return Err(ConsistencyError::InvalidConfig("need t_matches >= 1 and t_error > 0".into()));
        }
        Ok(())
    }
}

/// Thresholds 1.0, 1.5, ..., 4.0 pixels.
pub fn default_sweep() -> Vec<f64> {
    (0..7).map(|i| 1.0 + 0.5 * i as f64).collect()
}

fn median(sorted: &[f64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2]),
        _ => Some(0.5 * (sorted[n / 2 - 1] + sorted[n / 2])),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub consistent: bool,
    /// Median SED, absent without matches.
    pub median: Option<f64>,
    pub count: usize,
    /// Matches at an epipole (infinite SED); they stay in the median.
    pub degenerate: usize,
}

/// Median SED of the pair's matches and its consistency verdict.
pub fn tsed_pair(matches: &MatchSet, f: &Mat3, config: &TsedConfig) -> PairResult {
    let (median, degenerate) = pair_median(matches, f);
    let count = matches.matches.len();
    PairResult { consistent: is_consistent(count, median, config), median, count, degenerate }
}

fn pair_median(matches: &MatchSet, f: &Mat3) -> (Option<f64>, usize) {
    let mut errs: Vec<f64> = matches.matches.iter().map(|m| sed(f, (m[0], m[1]), (m[2], m[3]))).collect();
    errs.sort_by(f64::total_cmp);
    let degenerate = errs.iter().filter(|e| e.is_infinite()).count();
    (median(&errs), degenerate)
}

fn is_consistent(count: usize, median: Option<f64>, config: &TsedConfig) -> bool {
    count >= config.t_matches && median.is_some_and(|m| m < config.t_error)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMode {
    Adjacent,
    FirstLast,
    SameSided,
    CrossSided,
}

impl std::fmt::Display for PairMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairMode::Adjacent => "adjacent",
            PairMode::FirstLast => "first_last",
            PairMode::SameSided => "same_sided",
            PairMode::CrossSided => "cross_sided",
        })
    }
}

impl std::str::FromStr for PairMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adjacent" => Ok(PairMode::Adjacent),
            "first_last" => Ok(PairMode::FirstLast),
            "same_sided" => Ok(PairMode::SameSided),
            "cross_sided" => Ok(PairMode::CrossSided),
            _ => Err(format!("unknown pair mode `{s}`")),
        }
    }
}

/// View layout used to derive evaluation pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum PairStructure {
    /// Generated views in trajectory order.
    Sequence(Vec<ViewId>),
    /// Stereo pairs `(left, right)` in sequence order.
    Stereo(Vec<(ViewId, ViewId)>),
}

pub fn make_pairs(structure: &PairStructure, mode: PairMode) -> Result<Vec<(ViewId, ViewId)>, ConsistencyError> {
    use PairMode::*;
    match (structure, mode) {
        (PairStructure::Sequence(ids), Adjacent) => Ok(ids.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()),
        (PairStructure::Sequence(ids), FirstLast) => Ok(match ids.as_slice() {
            [first, .., last] => vec![(first.clone(), last.clone())],
            _ => Vec::new(),
        }),
        (PairStructure::Stereo(pairs), SameSided) => Ok(pairs
            .windows(2)
            .flat_map(|w| [(w[0].0.clone(), w[1].0.clone()), (w[0].1.clone(), w[1].1.clone())])
            .collect()),
        (PairStructure::Stereo(pairs), CrossSided) => Ok(pairs
            .windows(2)
            .flat_map(|w| [(w[0].0.clone(), w[1].1.clone()), (w[0].1.clone(), w[1].0.clone())])
            .collect()),
        (PairStructure::Sequence(_), _) => Err(ConsistencyError::ModeMismatch { mode, expected: "stereo" }),
        (PairStructure::Stereo(_), _) => Err(ConsistencyError::ModeMismatch { mode, expected: "sequence" }),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairReport {
    pub pair: (ViewId, ViewId),
    pub count: usize,
    pub median: Option<f64>,
    pub degenerate: usize,
    /// Verdict per threshold of the sweep.
    pub consistent: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsedReport {
    pub thresholds: Vec<f64>,
    pub pairs: Vec<PairReport>,
    /// Percentage of consistent pairs per threshold; 0 without pairs.
    pub percent: Vec<f64>,
}

/// Evaluates every match set at every threshold of `sweep`. The threshold
/// in `config` is ignored in favour of the sweep.
pub fn tsed_evaluate(
    match_sets: &[MatchSet],
    cameras: &HashMap<ViewId, Camera>,
    config: &TsedConfig,
    sweep: &[f64],
) -> Result<TsedReport, ConsistencyError> {
    config.check()?;
    if let Some(t) = sweep.iter().find(|t| !(**t > 0.0)) {
        return Err(ConsistencyError::InvalidConfig(format!("threshold {t} must be positive")));
    }
    let camera = |id: &ViewId| cameras.get(id).ok_or_else(|| ConsistencyError::MissingCamera(id.clone()));
    let mut pairs = Vec::with_capacity(match_sets.len());
    for m in match_sets {
        let f = fundamental_matrix(camera(&m.pair.0)?, camera(&m.pair.1)?)?;
        let (median, degenerate) = pair_median(m, &f);
        let count = m.matches.len();
        let consistent =
            sweep.iter().map(|&t| is_consistent(count, median, &TsedConfig { t_error: t, ..*config })).collect();
        pairs.push(PairReport { pair: m.pair.clone(), count, median, degenerate, consistent });
    }
    let percent = (0..sweep.len())
        .map(|k| {
            if pairs.is_empty() {
                0.0
            } else {
                100.0 * pairs.iter().filter(|p| p.consistent[k]).count() as f64 / pairs.len() as f64
            }
        })
        .collect();
    Ok(TsedReport { thresholds: sweep.to_vec(), pairs, percent })
}
