//! Camera geometry: pinhole cameras, per-pixel rays, Fourier ray encoding,
//! canonicalization and two-view epipolar geometry.
//!
//! Conventions: 3x3 matrices are row-major on disk, extrinsics map world to
//! camera (`x_cam = R x_world + t`), and pixel `(u, v)` is column `u`, row `v`.

mod camera;
mod epipolar;
mod rays;
mod trajectory;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub use camera::{check_rotation, Camera, CameraRecord, Intrinsics, RigidTransform};
pub use epipolar::{fundamental_matrix, skew};
pub use rays::{
    build_ray_map, canonicalize_set, canonicalizing_transform, fourier_encode, pixel_ray, EncodedRays, Ray,
    RayEncoding, RayMap,
};
pub use trajectory::{load_trajectory, parse_trajectory, write_trajectory, NamedCamera};

pub type Mat3 = Matrix3<f64>;
pub type Vec3 = Vector3<f64>;

/// Tolerance on `det(R) - 1` and on entries of `R^T R - I`.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("translation must be finite")]
    InvalidTranslation,
    #[error("degenerate ray direction")]
    DegenerateRay,
    #[error("invalid ray encoding: {0}")]
    InvalidEncoding(String),
    #[error("reference index {index} out of range for {len} ray maps")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("camera centers coincide; epipolar geometry is undefined")]
    CoincidentCenters,
    #[error("duplicate camera id `{0}`")]
    DuplicateId(String),
    #[error("trajectory: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Camera distance between two poses: center distance plus
/// `rotation_weight` times the geodesic rotation angle in radians.
pub fn camera_distance(a: &Camera, b: &Camera, rotation_weight: f64) -> f64 {
    let translation = (a.center() - b.center()).norm();
    if rotation_weight == 0.0 {
        return translation;
    }
    translation + rotation_weight * rotation_angle(a.rotation(), b.rotation())
}

/// Geodesic angle of `R_a R_b^T`, computed so that swapping the arguments
/// gives a bit-identical result.
pub fn rotation_angle(ra: &Mat3, rb: &Mat3) -> f64 {
    // M = Ra Rb^T; swapping arguments gives exactly M^T.
    let m = ra * rb.transpose();
    let cos = 0.5 * (m.trace() - 1.0);
    let axis = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = 0.5 * axis.norm();
    sin.atan2(cos)
}
