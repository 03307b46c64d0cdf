use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Mat3, Vec3, ORTHONORMAL_TOL};

/// Pinhole intrinsics in pixel units (zero skew).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    /// The 3x3 calibration matrix `K`.
    pub fn matrix(&self) -> Mat3 {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// `K^-1 [u v 1]^T`, evaluated without forming the inverse.
    pub fn unproject(&self, u: f64, v: f64) -> Vec3 {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }

    fn check(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidIntrinsics(msg));
        if self.width == 0 || self.height == 0 {
            return bad(format!("image size {}x{} must be positive", self.width, self.height));
        }
        if !(self.fx.is_finite() && self.fx > 0.0 && self.fy.is_finite() && self.fy > 0.0) {
            return bad(format!("focal lengths fx={} fy={} must be positive", self.fx, self.fy));
        }
        // Closed interval: the canonical K = I camera puts the principal
        // point on the image corner.
        if !(0.0..=self.width as f64).contains(&self.cx) || !(0.0..=self.height as f64).contains(&self.cy) {
            return bad(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            ));
        }
        Ok(())
    }
}

/// Checks `det(R) = 1` and `R^T R = I` to [`ORTHONORMAL_TOL`].
pub fn check_rotation(r: &Mat3) -> Result<(), GeometryError> {
    if r.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::InvalidRotation("non-finite entry".into()));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ORTHONORMAL_TOL {
        return Err(GeometryError::InvalidRotation(format!("determinant {det} is not 1")));
    }
    let err = (r.transpose() * r - Mat3::identity()).amax();
    if err > ORTHONORMAL_TOL {
        return Err(GeometryError::InvalidRotation(format!(
            "R^T R deviates from identity by {err:e}"
        )));
    }
    Ok(())
}

/// A proper rigid motion `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
    translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        check_rotation(&rotation)?;
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_direction(&self, d: &Vec3) -> Vec3 {
        self.rotation * d
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }
}

/// Pinhole camera with a world-to-camera extrinsic `x_cam = R x_world + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRecord", into = "CameraRecord")]
pub struct Camera {
    intrinsics: Intrinsics,
    rotation: Mat3,
    translation: Vec3,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        intrinsics.check()?;
        check_rotation(&rotation)?;
        if translation.iter().any(|x| !x.is_finite()) {
            return Err(GeometryError::InvalidTranslation);
        }
        Ok(Self { intrinsics, rotation, translation })
    }

    /// Camera with the given intrinsics whose center sits at `center` and whose
    /// camera-to-world rotation is `orientation` (columns are the camera axes
    /// expressed in world coordinates).
    pub fn looking(intrinsics: Intrinsics, orientation: Mat3, center: Vec3) -> Result<Self, GeometryError> {
        let rotation = orientation.transpose();
        let translation = -(rotation * center);
        Self::new(intrinsics, rotation, translation)
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    /// World-to-camera transform as a [`RigidTransform`].
    pub fn extrinsic(&self) -> RigidTransform {
        RigidTransform { rotation: self.rotation, translation: self.translation }
    }

    /// Camera center `τ = -R^T t`.
    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    /// Projects a world point to pixel coordinates. Returns `None` behind the camera.
    pub fn project(&self, world: &Vec3) -> Option<(f64, f64)> {
        let p = self.rotation * world + self.translation;
        (p.z > 0.0).then(|| self.intrinsics.project(&p))
    }

    /// The same physical camera, expressed after the world has been moved by
    /// `g` (every world point `X` becomes `g(X)`).
    pub fn transformed(&self, g: &RigidTransform) -> Camera {
        let rotation = self.rotation * g.rotation.transpose();
        let translation = self.translation - rotation * g.translation;
        Camera { intrinsics: self.intrinsics, rotation, translation }
    }

    /// Same pose with intrinsics rescaled to a `width x height` image.
    pub fn resized(&self, width: u32, height: u32) -> Result<Camera, GeometryError> {
        let sx = width as f64 / self.intrinsics.width as f64;
        let sy = height as f64 / self.intrinsics.height as f64;
        let k = Intrinsics {
            fx: self.intrinsics.fx * sx,
            fy: self.intrinsics.fy * sy,
            cx: self.intrinsics.cx * sx,
            cy: self.intrinsics.cy * sy,
            width,
            height,
        };
        k.check()?;
        Ok(Camera { intrinsics: k, ..self.clone() })
    }
}

/// On-disk camera layout. Field names are part of the file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Row-major world-to-camera rotation.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    #[serde(rename = "t")]
    pub t: [f64; 3],
}

impl TryFrom<CameraRecord> for Camera {
    type Error = GeometryError;

    fn try_from(rec: CameraRecord) -> Result<Self, Self::Error> {
        let k = Intrinsics {
            fx: rec.fx,
            fy: rec.fy,
            cx: rec.cx,
            cy: rec.cy,
            width: rec.width,
            height: rec.height,
        };
        Camera::new(k, Matrix3::from_row_slice(&rec.r), Vector3::from_column_slice(&rec.t))
    }
}

impl From<Camera> for CameraRecord {
    fn from(c: Camera) -> Self {
        let mut r = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                r[3 * i + j] = c.rotation[(i, j)];
            }
        }
        CameraRecord {
            fx: c.intrinsics.fx,
            fy: c.intrinsics.fy,
            cx: c.intrinsics.cx,
            cy: c.intrinsics.cy,
            width: c.intrinsics.width,
            height: c.intrinsics.height,
            r,
            t: [c.translation.x, c.translation.y, c.translation.z],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use std::f64::consts::FRAC_PI_2;

    fn unit_k() -> Intrinsics {
        Intrinsics { fx: 1.0, fy: 1.0, cx: 0.0, cy: 0.0, width: 1, height: 1 }
    }

    #[test]
    fn center_identity_and_translation() {
        let cam = Camera::new(unit_k(), Mat3::identity(), Vec3::zeros()).unwrap();
        assert_eq!(cam.center(), Vec3::zeros());
        let cam = Camera::new(unit_k(), Mat3::identity(), Vec3::new(1.0, 2.0, 3.0)).unwrap();
        assert_eq!(cam.center(), Vec3::new(-1.0, -2.0, -3.0));
    }

    #[test]
    fn center_of_rotated_camera() {
        let r = *Rotation3::from_axis_angle(&Vec3::z_axis(), FRAC_PI_2).matrix();
        let cam = Camera::new(unit_k(), r, Vec3::new(1.0, 0.0, 0.0)).unwrap();
        let c = cam.center();
        assert!((c - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!((cam.rotation() * c + cam.translation()).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_rotation_and_intrinsics() {
        let scaled = Mat3::identity() * 2.0;
        assert!(matches!(
            Camera::new(unit_k(), scaled, Vec3::zeros()),
            Err(GeometryError::InvalidRotation(_))
        ));
        let reflection = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(Camera::new(unit_k(), reflection, Vec3::zeros()).is_err());
        let k = Intrinsics { fx: -1.0, ..unit_k() };
        assert!(matches!(
            Camera::new(k, Mat3::identity(), Vec3::zeros()),
            Err(GeometryError::InvalidIntrinsics(_))
        ));
        let k = Intrinsics { cx: 5.0, ..unit_k() };
        assert!(Camera::new(k, Mat3::identity(), Vec3::zeros()).is_err());
    }

    #[test]
    fn transformed_camera_sees_moved_points_identically() {
        let k = Intrinsics { fx: 50.0, fy: 60.0, cx: 32.0, cy: 24.0, width: 64, height: 48 };
        let r = *Rotation3::from_euler_angles(0.1, -0.2, 0.3).matrix();
        let cam = Camera::new(k, r, Vec3::new(0.3, -0.1, 2.0)).unwrap();
        let g = RigidTransform::new(
            *Rotation3::from_euler_angles(1.0, 0.5, -0.7).matrix(),
            Vec3::new(4.0, -2.0, 1.0),
        )
        .unwrap();
        let moved = cam.transformed(&g);
        let x = Vec3::new(0.2, 0.1, 1.0);
        let a = cam.project(&x).unwrap();
        let b = moved.project(&g.apply_point(&x)).unwrap();
        assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
        assert!((moved.center() - g.apply_point(&cam.center())).norm() < 1e-12);
    }

    #[test]
    fn rigid_inverse_and_compose() {
        let g = RigidTransform::new(
            *Rotation3::from_euler_angles(0.4, 0.2, -1.1).matrix(),
            Vec3::new(1.0, 2.0, 3.0),
        )
        .unwrap();
        let id = g.compose(&g.inverse());
        assert!((id.rotation() - Mat3::identity()).amax() < 1e-12);
        assert!(id.translation().norm() < 1e-12);
    }

    #[test]
    fn json_names_fields() {
        let err = serde_json::from_str::<Camera>(r#"{"fy":1,"cx":0,"cy":0,"width":1,"height":1,"R":[1,0,0,0,1,0,0,0,1],"t":[0,0,0]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("fx"), "{err}");
    }
}
