use std::f64::consts::PI;

use super::{Camera, GeometryError, RigidTransform, Vec3};
use crate::ViewId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    pub fn transformed(&self, g: &RigidTransform) -> Ray {
        Ray { origin: g.apply_point(&self.origin), direction: g.apply_direction(&self.direction) }
    }

    /// The six encoded components: origin xyz followed by direction xyz.
    pub fn components(&self) -> [f64; 6] {
        [
            self.origin.x,
            self.origin.y,
            self.origin.z,
            self.direction.x,
            self.direction.y,
            self.direction.z,
        ]
    }
}

/// Ray through pixel coordinates `(u, v)`: origin at the camera center,
/// direction `normalize(R^T K^-1 [u v 1]^T)`.
pub fn pixel_ray(camera: &Camera, u: f64, v: f64) -> Result<Ray, GeometryError> {
    let unnormalized = camera.rotation().transpose() * camera.intrinsics().unproject(u, v);
    let norm = unnormalized.norm();
    if !(norm >= 1e-12) {
        return Err(GeometryError::DegenerateRay);
    }
    Ok(Ray { origin: camera.center(), direction: unnormalized / norm })
}

/// Per-pixel rays of one camera, row-major (`rays[v * width + u]`).
#[derive(Debug, Clone, PartialEq)]
pub struct RayMap {
    pub camera_id: ViewId,
    camera: Camera,
    rays: Vec<Ray>,
}

impl RayMap {
    /// Camera the rays are expressed for. After canonicalization this is the
    /// camera re-expressed in the reference frame.
    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn width(&self) -> usize {
        self.camera.width() as usize
    }

    pub fn height(&self) -> usize {
        self.camera.height() as usize
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    /// Ray at column `u`, row `v`.
    pub fn get(&self, u: usize, v: usize) -> &Ray {
        &self.rays[v * self.width() + u]
    }

    pub fn transformed(&self, g: &RigidTransform) -> RayMap {
        RayMap {
            camera_id: self.camera_id.clone(),
            camera: self.camera.transformed(g),
            rays: self.rays.iter().map(|r| r.transformed(g)).collect(),
        }
    }
}

/// Builds the ray map using pixel centers: entry `(v, u)` is the ray through
/// `(u + 0.5, v + 0.5)`.
pub fn build_ray_map(camera_id: ViewId, camera: &Camera) -> RayMap {
    let (w, h) = (camera.width() as usize, camera.height() as usize);
    let rays = (0..h)
        .flat_map(|v| (0..w).map(move |u| (u, v)))
        .map(|(u, v)| {
            // Valid intrinsics always give a finite, non-zero direction.
            pixel_ray(camera, u as f64 + 0.5, v as f64 + 0.5).expect("valid camera yields a ray")
        })
        .collect();
    RayMap { camera_id, camera: camera.clone(), rays }
}

/// Fourier encoding parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayEncoding {
    /// Number of frequencies `K`; frequencies are `base, 2 base, ..., 2^(K-1) base`.
    pub num_frequencies: usize,
    pub base_frequency: f64,
    /// Multiplies ray origins before encoding; directions are already unit.
    pub origin_scale: f64,
}

impl Default for RayEncoding {
    fn default() -> Self {
        Self { num_frequencies: 8, base_frequency: 1.0, origin_scale: 1.0 }
    }
}

impl RayEncoding {
    pub fn with_frequencies(num_frequencies: usize) -> Self {
        Self { num_frequencies, ..Self::default() }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.num_frequencies).map(|k| self.base_frequency * (1u64 << k) as f64).collect()
    }

    /// Channels per pixel: 6 components x 2 (sin, cos) x K.
    pub fn channels(&self) -> usize {
        12 * self.num_frequencies
    }

    /// Encodes one ray into `out` (length [`Self::channels`]).
    ///
    /// Layout is component-major, then frequency, then `sin` before `cos`:
    /// `[sin(f1 π o_x), cos(f1 π o_x), sin(f2 π o_x), ..., cos(fK π d_z)]`.
    pub fn encode_ray_into(&self, ray: &Ray, out: &mut [f64]) {
        let freqs = self.frequencies();
        let mut comps = ray.components();
        for c in &mut comps[..3] {
            *c *= self.origin_scale;
        }
        let mut i = 0;
        for c in comps {
            for f in &freqs {
                let (s, co) = (f * PI * c).sin_cos();
                out[i] = s;
                out[i + 1] = co;
                i += 2;
            }
        }
    }
}

/// Fourier-encoded ray map, `height x width x channels`, row-major by pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedRays {
    pub width: usize,
    pub height: usize,
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
}

impl EncodedRays {
    pub fn channels(&self) -> usize {
        12 * self.frequencies.len()
    }

    pub fn pixel(&self, u: usize, v: usize) -> &[f64] {
        let c = self.channels();
        let start = (v * self.width + u) * c;
        &self.values[start..start + c]
    }

    /// Iterates pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.channels())
    }
}

pub fn fourier_encode(map: &RayMap, encoding: &RayEncoding) -> Result<EncodedRays, GeometryError> {
    if encoding.num_frequencies == 0 {
        return Err(GeometryError::InvalidEncoding("at least one frequency is required".into()));
    }
    let c = encoding.channels();
    let mut values = vec![0.0; map.rays().len() * c];
    for (ray, out) in map.rays().iter().zip(values.chunks_exact_mut(c)) {
        encoding.encode_ray_into(ray, out);
    }
    Ok(EncodedRays {
        width: map.width(),
        height: map.height(),
        frequencies: encoding.frequencies(),
        values,
    })
}

/// Transform that moves `reference` to the origin with identity orientation:
/// its own world-to-camera extrinsic.
pub fn canonicalizing_transform(reference: &Camera) -> RigidTransform {
    reference.extrinsic()
}

/// Expresses every map in the frame of `maps[reference_index]`'s camera.
pub fn canonicalize_set(maps: &[RayMap], reference_index: usize) -> Result<Vec<RayMap>, GeometryError> {
    let reference = maps
        .get(reference_index)
        .ok_or(GeometryError::IndexOutOfRange { index: reference_index, len: maps.len() })?;
    let g = canonicalizing_transform(reference.camera());
    Ok(maps.iter().map(|m| m.transformed(&g)).collect())
}
