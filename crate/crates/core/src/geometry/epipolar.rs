use super::{Camera, GeometryError, Mat3, Vec3};

/// Cross-product matrix: `[v]_x w = v x w`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Fundamental matrix mapping pixels of `cam_a` to epipolar lines in `cam_b`
/// (`x_b^T F x_a = 0`), scaled to unit Frobenius norm.
pub fn fundamental_matrix(cam_a: &Camera, cam_b: &Camera) -> Result<Mat3, GeometryError> {
    if (cam_a.center() - cam_b.center()).norm() <= 1e-9 {
        return Err(GeometryError::CoincidentCenters);
    }
    let r_rel = cam_b.rotation() * cam_a.rotation().transpose();
    let t_rel = cam_b.translation() - r_rel * cam_a.translation();
    let ka_inv = inverse_intrinsics(cam_a);
    let kb_inv = inverse_intrinsics(cam_b);
    let f = kb_inv.transpose() * skew(&t_rel) * r_rel * ka_inv;
    Ok(f / f.norm())
}

fn inverse_intrinsics(cam: &Camera) -> Mat3 {
    let k = cam.intrinsics();
    Mat3::new(1.0 / k.fx, 0.0, -k.cx / k.fx, 0.0, 1.0 / k.fy, -k.cy / k.fy, 0.0, 0.0, 1.0)
}
