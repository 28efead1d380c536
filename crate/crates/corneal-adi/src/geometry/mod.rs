//! Core 3D/2D geometric types and exact primitive operations.
//!
//! Conventions used throughout the crate:
//!
//! * All 3D quantities are millimeters in the camera frame: origin at the
//!   pinhole, +Z into the scene, +X right, +Y down (matching image
//!   coordinates).
//! * Image coordinates are continuous: pixel `(i, j)` spans
//!   `[i, i+1) x [j, j+1)` and its center is `(i + 0.5, j + 0.5)`.
//! * Everything here is a pure function over immutable values and safe to
//!   call concurrently.

mod conic;

pub use conic::{conic_to_ellipse, ellipse_from_points, ConicCoeffs};

use nalgebra::Vector3;

/// 3D vector/point in millimeters, camera frame.
pub type Vec3 = Vector3<f64>;

/// Half-line with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing the direction.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn point_at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    /// Radius in mm, > 0.
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Vec3, radius: f64) -> Self {
        debug_assert!(radius > 0.0);
        Sphere { center, radius }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane3D {
    pub point: Vec3,
    /// Unit normal.
    pub normal: Vec3,
}

impl Plane3D {
    pub fn new(point: Vec3, normal: Vec3) -> Self {
        Plane3D {
            point,
            normal: normal.normalize(),
        }
    }

    /// Signed distance of `p` from the plane along the normal.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(&(p - self.point))
    }
}

/// Image-space ellipse: center in pixels, semi-axes `a >= b > 0` in pixels,
/// rotation of the major axis in radians normalized to `[0, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse2D {
    pub center: (f64, f64),
    pub semi_major: f64,
    pub semi_minor: f64,
    pub rotation: f64,
}

impl Ellipse2D {
    /// Builds an ellipse, swapping axes and rotating by pi/2 if needed so
    /// that `semi_major >= semi_minor`, and wrapping the rotation into
    /// `[0, pi)`.
    pub fn new(center: (f64, f64), semi_major: f64, semi_minor: f64, rotation: f64) -> Self {
        let (mut a, mut b, mut phi) = (semi_major, semi_minor, rotation);
        if b > a {
            std::mem::swap(&mut a, &mut b);
            phi += std::f64::consts::FRAC_PI_2;
        }
        phi = phi.rem_euclid(std::f64::consts::PI);
        Ellipse2D {
            center,
            semi_major: a,
            semi_minor: b,
            rotation: phi,
        }
    }

    /// Point on the ellipse at parametric angle `alpha`.
    pub fn point_at(&self, alpha: f64) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let x = self.semi_major * alpha.cos();
        let y = self.semi_minor * alpha.sin();
        (
            self.center.0 + x * c - y * s,
            self.center.1 + x * s + y * c,
        )
    }

    /// Approximate distance from `p` to the ellipse boundary: the point is
    /// mapped into the axis-aligned ellipse frame and projected radially
    /// onto the boundary. Exact for circles.
    pub fn approx_distance(&self, p: (f64, f64)) -> f64 {
        let (s, c) = self.rotation.sin_cos();
        let dx = p.0 - self.center.0;
        let dy = p.1 - self.center.1;
        let x = dx * c + dy * s;
        let y = -dx * s + dy * c;
        let rho = ((x / self.semi_major).powi(2) + (y / self.semi_minor).powi(2)).sqrt();
        if rho < 1e-9 {
            return self.semi_minor;
        }
        let r = (dx * dx + dy * dy).sqrt();
        (r - r / rho).abs()
    }

    /// Scales center and axes by `s` (rotation unchanged). Matches the
    /// image-coordinate mapping of an area-averaged downscale.
    pub fn scaled(&self, s: f64) -> Self {
        Ellipse2D {
            center: (self.center.0 * s, self.center.1 * s),
            semi_major: self.semi_major * s,
            semi_minor: self.semi_minor * s,
            rotation: self.rotation,
        }
    }
}

/// Nearest intersection of `ray` with `sphere`: smallest `t >= 0` with
/// `|origin + t*dir - center| = radius`, or `None` when the ray misses.
pub fn intersect_ray_sphere(ray: &Ray, sphere: &Sphere) -> Option<(f64, Vec3)> {
    let oc = ray.origin - sphere.center;
    let b = ray.direction.dot(&oc);
    let c = oc.dot(&oc) - sphere.radius * sphere.radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t_near = -b - sq;
    let t_far = -b + sq;
    let t = if t_near >= 0.0 {
        t_near
    } else if t_far >= 0.0 {
        t_far
    } else {
        return None;
    };
    Some((t, ray.point_at(t)))
}

/// Intersection of `ray` with `plane`: `t = n.(p0 - o) / (n.d)` when the
/// ray is not parallel and `t >= 0`.
pub fn intersect_ray_plane(ray: &Ray, plane: &Plane3D) -> Option<(f64, Vec3)> {
    let denom = plane.normal.dot(&ray.direction);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = plane.normal.dot(&(plane.point - ray.origin)) / denom;
    if t < 0.0 {
        return None;
    }
    Some((t, ray.point_at(t)))
}

/// Mirror reflection `r = i - 2 (n.i) n` of a unit incident direction about
/// a unit normal.
pub fn reflect(incident: Vec3, normal: Vec3) -> Vec3 {
    incident - normal * (2.0 * normal.dot(&incident))
}

/// Rodrigues rotation of `v` by `angle` radians about the unit `axis`.
pub fn rotate_about_axis(v: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(&v) * s + axis * (axis.dot(&v) * (1.0 - c))
}

/// Orthonormal basis `(x, y)` spanning the plane orthogonal to unit `n`,
/// right-handed with `x cross y = n`. The x axis is aligned with the
/// camera +X direction whenever `n` is not parallel to it.
pub fn basis_for_normal(n: Vec3) -> (Vec3, Vec3) {
    let seed = if n.x.abs() < 0.9 {
        Vec3::new(1.0, 0.0, 0.0)
    } else {
        Vec3::new(0.0, 1.0, 0.0)
    };
    let y = n.cross(&seed).normalize();
    let x = y.cross(&n);
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ray_sphere_axis_aligned() {
        let ray = Ray::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0));
        let sphere = Sphere::new(Vec3::new(0.0, 0.0, 50.0), 7.8);
        let (t, p) = intersect_ray_sphere(&ray, &sphere).unwrap();
        assert_relative_eq!(t, 42.2, epsilon = 1e-9);
        assert_relative_eq!(p.z, 42.2, epsilon = 1e-9);
    }

    #[test]
    fn ray_sphere_miss() {
        let ray = Ray::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0));
        let sphere = Sphere::new(Vec3::new(0.0, 100.0, 50.0), 7.8);
        assert!(intersect_ray_sphere(&ray, &sphere).is_none());
    }

    #[test]
    fn ray_sphere_tangent() {
        let ray = Ray::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0));
        let sphere = Sphere::new(Vec3::new(0.0, 7.8, 50.0), 7.8);
        let (t, p) = intersect_ray_sphere(&ray, &sphere).unwrap();
        assert_relative_eq!(t, 50.0, epsilon = 1e-6);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-6);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-6);
        assert_relative_eq!(p.z, 50.0, epsilon = 1e-6);
    }

    #[test]
    fn ray_sphere_hit_lies_on_sphere() {
        // |P - center| = radius for a spread of directions.
        let sphere = Sphere::new(Vec3::new(3.0, -2.0, 40.0), 7.8);
        for i in 0..50 {
            let a = i as f64 * 0.02;
            let dir = Vec3::new(a.sin() * 0.2, a.cos() * 0.1, 1.0);
            let ray = Ray::new(Vec3::zeros(), dir);
            if let Some((_, p)) = intersect_ray_sphere(&ray, &sphere) {
                assert_relative_eq!((p - sphere.center).norm(), 7.8, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn ray_plane_frontal() {
        let ray = Ray::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0));
        let plane = Plane3D::new(Vec3::new(0.0, 0.0, 450.0), Vec3::new(0.0, 0.0, -1.0));
        let (t, p) = intersect_ray_plane(&ray, &plane).unwrap();
        assert_relative_eq!(t, 450.0, epsilon = 1e-9);
        assert_relative_eq!(plane.signed_distance(p).abs(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn ray_plane_parallel_and_behind() {
        let plane = Plane3D::new(Vec3::new(0.0, 0.0, 450.0), Vec3::new(0.0, 0.0, -1.0));
        let parallel = Ray::new(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0));
        assert!(intersect_ray_plane(&parallel, &plane).is_none());
        let behind = Ray::new(Vec3::zeros(), Vec3::new(0.0, 0.0, -1.0));
        assert!(intersect_ray_plane(&behind, &plane).is_none());
    }

    #[test]
    fn reflect_retro() {
        let r = reflect(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0));
        assert_relative_eq!(r.z, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn reflect_fold_90() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = reflect(Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, -s, -s));
        assert_relative_eq!(r.x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.y, -1.0, epsilon = 1e-12);
        assert_relative_eq!(r.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn reflect_grazing() {
        let r = reflect(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(r.x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reflection_preserves_angle() {
        let i = Vec3::new(0.3, -0.2, 0.9).normalize();
        let n = Vec3::new(0.1, 0.2, -1.0).normalize();
        let r = reflect(i, n);
        assert_relative_eq!(r.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(i.dot(&n), r.dot(&-n), epsilon = 1e-9);
    }

    #[test]
    fn ellipse_normalizes_axis_order() {
        let e = Ellipse2D::new((0.0, 0.0), 2.0, 5.0, 0.1);
        assert!(e.semi_major >= e.semi_minor);
        assert!((0.0..std::f64::consts::PI).contains(&e.rotation));
    }

    #[test]
    fn approx_distance_is_zero_on_boundary() {
        let e = Ellipse2D::new((500.0, 300.0), 120.0, 80.0, 0.7);
        for i in 0..32 {
            let p = e.point_at(i as f64 * 0.2);
            assert!(e.approx_distance(p) < 1e-9);
        }
        assert_relative_eq!(e.approx_distance((500.0, 300.0)), 80.0, epsilon = 1e-12);
    }
}
