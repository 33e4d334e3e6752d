//! Pinhole cameras, fronto-parallel plane homographies, inverse-depth
//! sampling and reference-camera averaging.
//!
//! Conventions: right-handed frames, cameras look down `+z`, and a camera
//! maps world points by `x_cam = R * x_world + t`. Pixel centres sit on
//! integer coordinates.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix4, Rotation3, SymmetricEigen, UnitQuaternion, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::image::Image;

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Intrinsics and pose of one pinhole view.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    intrinsics: Matrix3<f64>,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    width: usize,
    height: usize,
}

impl Camera {
    /// Validates and builds a camera. `rotation` is world-to-camera.
    pub fn new(
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera("width and height must be at least 1"));
        }
        if intrinsics
            .iter()
            .chain(rotation.iter())
            .chain(translation.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidCamera("non-finite parameter"));
        }
        if intrinsics[(1, 0)] != 0.0 || intrinsics[(2, 0)] != 0.0 || intrinsics[(2, 1)] != 0.0 {
            return Err(Error::InvalidCamera("intrinsics must be upper-triangular"));
        }
        if intrinsics[(0, 0)] <= 0.0 || intrinsics[(1, 1)] <= 0.0 {
            return Err(Error::InvalidCamera("focal lengths must be positive"));
        }
        if (intrinsics[(2, 2)] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCamera("intrinsics must have a unit bottom-right entry"));
        }
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if gram.amax() > ORTHONORMAL_TOL {
            return Err(Error::InvalidCamera("rotation is not orthonormal"));
        }
        if rotation.determinant() < 0.0 {
            return Err(Error::InvalidCamera("rotation must be proper (det = +1)"));
        }
        Ok(Camera {
            intrinsics,
            rotation,
            translation,
            width,
            height,
        })
    }

    /// Like [`Camera::new`], but first projects `rotation` onto the nearest
    /// rotation when it is orthonormal only to `tolerance` (e.g. values
    /// parsed from text or stored as `f32`).
    pub fn new_orthonormalized(
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
        tolerance: f64,
    ) -> Result<Self> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if !(gram.amax() <= tolerance) || rotation.determinant() <= 0.0 {
            return Err(Error::InvalidCamera("rotation is not close to a proper rotation"));
        }
        let projected = Rotation3::from_matrix_eps(&rotation, 1e-15, 100, Rotation3::identity());
        Camera::new(intrinsics, *projected.matrix(), translation, width, height)
    }

    /// Camera with focal `focal`, principal point at the image centre and
    /// the given world-to-camera pose.
    pub fn pinhole(
        focal: f64,
        width: usize,
        height: usize,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let k = Matrix3::new(
            focal,
            0.0,
            (width as f64 - 1.0) / 2.0,
            0.0,
            focal,
            (height as f64 - 1.0) / 2.0,
            0.0,
            0.0,
            1.0,
        );
        Camera::new(k, rotation, translation, width, height)
    }

    /// Camera placed at world position `center` with world-to-camera rotation.
    pub fn with_center(
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        center: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let translation = -(rotation * center);
        Camera::new(intrinsics, rotation, translation, width, height)
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Camera centre in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Upper-triangular inverse of the intrinsics.
    pub fn intrinsics_inverse(&self) -> Matrix3<f64> {
        let k = &self.intrinsics;
        let (fx, s, cx, fy, cy) = (k[(0, 0)], k[(0, 1)], k[(0, 2)], k[(1, 1)], k[(1, 2)]);
        Matrix3::new(
            1.0 / fx,
            -s / (fx * fy),
            (s * cy - cx * fy) / (fx * fy),
            0.0,
            1.0 / fy,
            -cy / fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Projects a world point; `None` when it lies on or behind the camera plane.
    pub fn project(&self, world: &Vector3<f64>) -> Option<(f64, f64)> {
        let cam = self.rotation * world + self.translation;
        if cam.z <= 0.0 {
            return None;
        }
        let p = self.intrinsics * cam;
        Some((p.x / p.z, p.y / p.z))
    }

    /// World point at camera-frame depth `depth` along the ray through pixel `(x, y)`.
    pub fn unproject(&self, x: f64, y: f64, depth: f64) -> Vector3<f64> {
        let ray = self.intrinsics_inverse() * Vector3::new(x, y, 1.0);
        let cam = ray * (depth / ray.z);
        self.rotation.transpose() * (cam - self.translation)
    }
}

/// Plane depths ordered back to front (index 0 is the farthest plane).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthList(Vec<f64>);

impl DepthList {
    pub fn new(depths: Vec<f64>) -> Result<Self> {
        if depths.len() < 2 {
            return Err(Error::InvalidRange("a depth list needs at least 2 planes"));
        }
        if depths.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::InvalidRange("depths must be finite and positive"));
        }
        if depths.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidRange("depths must be strictly decreasing"));
        }
        Ok(DepthList(depths))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl core::ops::Index<usize> for DepthList {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// `count` depths with reciprocals evenly spaced between `1/far` and
/// `1/near`, farthest first.
pub fn inverse_depth_samples(near: f64, far: f64, count: usize) -> Result<DepthList> {
    if !(near > 0.0) || !(far > near) || !far.is_finite() {
        return Err(Error::InvalidRange("need 0 < near < far < inf"));
    }
    if count < 2 {
        return Err(Error::InvalidRange("need at least 2 samples"));
    }
    let (inv_far, inv_near) = (1.0 / far, 1.0 / near);
    let steps = (count - 1) as f64;
    let mut depths: Vec<f64> = (0..count)
        .map(|i| 1.0 / (inv_far + (inv_near - inv_far) * (i as f64 / steps)))
        .collect();
    depths[0] = far;
    depths[count - 1] = near;
    DepthList::new(depths)
}

/// Nonsingular 3×3 projective map between pixel grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("homography entries"));
        }
        let scale = matrix.norm();
        let det = matrix.determinant();
        if scale == 0.0 || det.abs() <= 1e-12 * scale * scale * scale {
            return Err(Error::SingularHomography);
        }
        Ok(Homography(matrix))
    }

    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self.0.try_inverse().ok_or(Error::SingularHomography)?;
        Homography::new(inv)
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        let u = m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)];
        let v = m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)];
        let w = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
        (u / w, v / w)
    }

    /// Homography from `source` to `target` pixels induced by the plane
    /// `normal · X = distance`, expressed in `source` camera coordinates.
    pub fn from_plane(source: &Camera, target: &Camera, normal: &Vector3<f64>, distance: f64) -> Result<Homography> {
        if !(distance.abs() > 0.0) || !distance.is_finite() {
            return Err(Error::SingularHomography);
        }
        let relative_rotation = target.rotation * source.rotation.transpose();
        let relative_translation = target.translation - relative_rotation * source.translation;
        let euclidean = relative_rotation + relative_translation * normal.transpose() / distance;
        // det(R + t nᵀ/d) = 1 + nᵀRᵀt/d vanishes when the plane contains the
        // target centre.
        if euclidean.determinant().abs() <= 1e-12 {
            return Err(Error::SingularHomography);
        }
        Homography::new(target.intrinsics * euclidean * source.intrinsics_inverse())
    }
}

/// Homography mapping `reference` pixels to `target` pixels through the
/// fronto-parallel plane `z = depth` of the reference frame.
pub fn plane_homography(reference: &Camera, target: &Camera, depth: f64) -> Result<Homography> {
    if !(depth > 0.0) {
        return Err(Error::OutOfRange("plane depth must be positive"));
    }
    Homography::from_plane(reference, target, &Vector3::z(), depth)
}

/// Inverse-warps `source` through `h` (source → output pixels) into a
/// `width × height` grid with bilinear sampling and edge clamping.
pub fn warp_image(source: &Image, h: &Homography, width: usize, height: usize) -> Result<Image> {
    let inverse = h.inverse()?;
    Ok(warp_with_inverse(source, &inverse, width, height))
}

/// Samples `source` at `inverse(x)` for every output pixel `x`.
pub fn warp_with_inverse(source: &Image, inverse: &Homography, width: usize, height: usize) -> Image {
    let channels = source.channels();
    let mut out = Image::new(width, height, channels);
    for y in 0..height {
        for x in 0..width {
            let (sx, sy) = inverse.apply(x as f64, y as f64);
            source.sample_bilinear(sx, sy, out.pixel_mut(x, y));
        }
    }
    out
}

/// Reference camera whose centre is the mean of the input centres and
/// whose orientation is the quaternion eigen-average of the inputs.
/// Intrinsics are averaged element-wise.
pub fn average_reference_camera(cameras: &[Camera]) -> Result<Camera> {
    let first = cameras.first().ok_or(Error::EmptyInput("camera list"))?;
    if cameras
        .iter()
        .any(|c| c.width != first.width || c.height != first.height)
    {
        return Err(Error::Shape("cameras must share image dimensions"));
    }
    let n = cameras.len() as f64;
    let center = cameras.iter().map(Camera::center).sum::<Vector3<f64>>() / n;
    let intrinsics = cameras.iter().map(|c| c.intrinsics).sum::<Matrix3<f64>>() / n;

    let anchor = rotation_quaternion(&first.rotation);
    let mut accumulated = Matrix4::<f64>::zeros();
    for cam in cameras {
        let q = rotation_quaternion(&cam.rotation);
        accumulated += q * q.transpose();
    }
    let eigen = SymmetricEigen::new(accumulated);
    let best = eigen.eigenvalues.imax();
    let mut q: Vector4<f64> = eigen.eigenvectors.column(best).into_owned();
    if q.dot(&anchor) < 0.0 {
        q = -q;
    }
    let unit = UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(q));
    let rotation = *unit.to_rotation_matrix().matrix();
    Camera::with_center(intrinsics, rotation, center, first.width, first.height)
}

// Quaternion as (i, j, k, w), matching nalgebra's coordinate order.
fn rotation_quaternion(rotation: &Matrix3<f64>) -> Vector4<f64> {
    let r = Rotation3::from_matrix_unchecked(*rotation);
    UnitQuaternion::from_rotation_matrix(&r).into_inner().coords
}
