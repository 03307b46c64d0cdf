#![allow(dead_code)]

use nalgebra::Rotation3;
use rand::Rng;
use viewset::geometry::{Camera, Intrinsics, Mat3, RigidTransform, Vec3};
use viewset::plan::ViewSpec;

pub fn intrinsics() -> Intrinsics {
    Intrinsics { fx: 50.0, fy: 48.0, cx: 16.0, cy: 12.0, width: 32, height: 24 }
}

pub fn rotation(axis_angle: Vec3) -> Mat3 {
    Rotation3::from_scaled_axis(axis_angle).into_inner()
}

pub fn random_vec<R: Rng>(rng: &mut R, scale: f64) -> Vec3 {
    Vec3::new(rng.random_range(-scale..scale), rng.random_range(-scale..scale), rng.random_range(-scale..scale))
}

pub fn random_rigid<R: Rng>(rng: &mut R) -> RigidTransform {
    RigidTransform::new(rotation(random_vec(rng, 3.0)), random_vec(rng, 10.0)).unwrap()
}

pub fn random_camera<R: Rng>(rng: &mut R) -> Camera {
    Camera::looking(intrinsics(), rotation(random_vec(rng, 3.0)), random_vec(rng, 2.0)).unwrap()
}

pub fn cam_at(x: f64) -> Camera {
    Camera::looking(intrinsics(), Mat3::identity(), Vec3::new(x, 0.0, 0.0)).unwrap()
}

/// Observed `O` at x = 0 and generated views `1..=n` at x = i.
pub fn line_views(n: usize) -> Vec<ViewSpec> {
    std::iter::once(ViewSpec::observed("O", cam_at(0.0)))
        .chain((1..=n).map(|i| ViewSpec::generated(i, cam_at(i as f64))))
        .collect()
}
