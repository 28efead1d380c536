//! Two-sphere eye model and eye pose recovery from the limbus ellipse.
//!
//! The eye is modeled as two intersecting spheres; the smaller one carries
//! the cornea and acts as the convex mirror of the catadioptric system.
//! Pose recovery is the standard weak-perspective construction: depth from
//! the ratio of physical to imaged limbus radius, tilt from the ratio of
//! the ellipse axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    intersect_ray_sphere, reflect, rotate_about_axis, Ellipse2D, Ray, Sphere, Vec3,
};

/// Pinhole camera intrinsics in pixels. Pixel `(i, j)` has its center at
/// continuous coordinates `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub focal_px: f64,
    pub principal_point: (f64, f64),
    pub image_size: (u32, u32),
}

impl CameraIntrinsics {
    pub fn new(focal_px: f64, principal_point: (f64, f64), image_size: (u32, u32)) -> Result<Self> {
        let (cx, cy) = principal_point;
        let (w, h) = image_size;
        if focal_px <= 0.0 || cx < 0.0 || cx >= w as f64 || cy < 0.0 || cy >= h as f64 {
            return Err(Error::ConfigInvalid(format!(
                "bad intrinsics: f={focal_px} c=({cx},{cy}) size={w}x{h}"
            )));
        }
        Ok(CameraIntrinsics {
            focal_px,
            principal_point,
            image_size,
        })
    }

    /// Projects a camera-frame point (z > 0) to continuous pixel coordinates.
    pub fn project(&self, p: Vec3) -> (f64, f64) {
        (
            self.focal_px * p.x / p.z + self.principal_point.0,
            self.focal_px * p.y / p.z + self.principal_point.1,
        )
    }

    /// Perspective ray from the pinhole through continuous pixel `(u, v)`.
    pub fn ray_through(&self, u: f64, v: f64) -> Ray {
        Ray::new(
            Vec3::zeros(),
            Vec3::new(
                (u - self.principal_point.0) / self.focal_px,
                (v - self.principal_point.1) / self.focal_px,
                1.0,
            ),
        )
    }

    /// Intrinsics of the same camera after scaling the image by `s`.
    pub fn scaled(&self, s: f64) -> CameraIntrinsics {
        CameraIntrinsics {
            focal_px: self.focal_px * s,
            principal_point: (self.principal_point.0 * s, self.principal_point.1 * s),
            image_size: (
                (self.image_size.0 as f64 * s).round() as u32,
                (self.image_size.1 as f64 * s).round() as u32,
            ),
        }
    }
}

/// Anatomical constants of the two-sphere model, millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeModel {
    pub cornea_radius: f64,
    pub limbus_radius: f64,
}

impl Default for EyeModel {
    fn default() -> Self {
        // Standard anatomical values; configurable per run.
        EyeModel {
            cornea_radius: 7.8,
            limbus_radius: 5.5,
        }
    }
}

impl EyeModel {
    pub fn new(cornea_radius: f64, limbus_radius: f64) -> Result<Self> {
        if !(cornea_radius > limbus_radius && limbus_radius > 0.0) {
            return Err(Error::ConfigInvalid(format!(
                "eye model requires rC > rL > 0, got rC={cornea_radius} rL={limbus_radius}"
            )));
        }
        Ok(EyeModel {
            cornea_radius,
            limbus_radius,
        })
    }

    /// Distance from the limbus plane to the corneal sphere center,
    /// `sqrt(rC^2 - rL^2)`.
    pub fn limbus_offset(&self) -> f64 {
        (self.cornea_radius * self.cornea_radius - self.limbus_radius * self.limbus_radius).sqrt()
    }
}

/// Eye pose in the camera frame: limbus center plus gaze direction
/// (unit, out of the eye toward the scene, i.e. toward the camera side).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyePose {
    pub limbus_center: Vec3,
    pub gaze: Vec3,
}

impl EyePose {
    pub fn new(limbus_center: Vec3, gaze: Vec3) -> Self {
        EyePose {
            limbus_center,
            gaze: gaze.normalize(),
        }
    }

    /// Corneal mirror sphere: center displaced from the limbus center by
    /// the limbus offset against the gaze.
    pub fn cornea_sphere(&self, model: &EyeModel) -> Sphere {
        Sphere::new(
            self.limbus_center - self.gaze * model.limbus_offset(),
            model.cornea_radius,
        )
    }

    /// Corneal apex (the pole at the pupil center).
    pub fn apex(&self, model: &EyeModel) -> Vec3 {
        self.cornea_sphere(model).center + self.gaze * model.cornea_radius
    }
}

/// Knobs of the pose recovery; defaults match the study configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseConfig {
    /// Above this axis ratio the ellipse is treated as a circle: tilt is
    /// set to zero and the gaze points at the camera. Suppresses
    /// noise-driven gaze jitter where the rotation angle is meaningless.
    pub near_circular_ratio: f64,
}

impl Default for PoseConfig {
    fn default() -> Self {
        PoseConfig {
            near_circular_ratio: 0.995,
        }
    }
}

/// Recovers the eye pose from the detected limbus ellipse.
///
/// Depth comes from the weak-perspective relation `d = f * rL / a`; the
/// direction to the limbus center uses the exact perspective ray through
/// the ellipse center. Tilt is `acos(b/a)`, applied by rotating the
/// camera-facing direction about the in-image major axis; of the two tilt
/// signs the one whose gaze is most aligned with the optical axis wins.
pub fn pose_from_limbus(
    ellipse: &Ellipse2D,
    intrinsics: &CameraIntrinsics,
    model: &EyeModel,
    cfg: &PoseConfig,
) -> Result<EyePose> {
    let a = ellipse.semi_major;
    let b = ellipse.semi_minor;
    if a <= 0.0 {
        return Err(Error::BadEllipse("non-positive major axis".into()));
    }
    if b > a {
        return Err(Error::BadEllipse("axis ratio above one".into()));
    }

    let depth = intrinsics.focal_px * model.limbus_radius / a;
    let dir = intrinsics
        .ray_through(ellipse.center.0, ellipse.center.1)
        .direction;
    let limbus_center = dir * depth;

    let to_camera = -dir;
    let ratio = (b / a).clamp(0.0, 1.0);
    let gaze = if ratio > cfg.near_circular_ratio {
        to_camera
    } else {
        let tilt = ratio.acos();
        let (s, c) = ellipse.rotation.sin_cos();
        let axis = Vec3::new(c, s, 0.0);
        let plus = rotate_about_axis(to_camera, axis, tilt);
        let minus = rotate_about_axis(to_camera, axis, -tilt);
        // g.( -z ) maximal: lean the gaze toward the optical axis.
        if plus.z <= minus.z {
            plus
        } else {
            minus
        }
    };

    Ok(EyePose::new(limbus_center, gaze))
}

/// Casts the perspective ray through pixel `(u, v)`, intersects it with
/// the corneal mirror and returns the surface point plus the mirror-law
/// reflected ray. `None` when the ray misses the sphere or the hit lies
/// outside the corneal cap bounded by the limbus plane.
pub fn backproject_pixel(
    px: (f64, f64),
    intrinsics: &CameraIntrinsics,
    pose: &EyePose,
    model: &EyeModel,
) -> Option<(Vec3, Ray)> {
    let ray = intrinsics.ray_through(px.0, px.1);
    let sphere = pose.cornea_sphere(model);
    let (_, surface) = intersect_ray_sphere(&ray, &sphere)?;
    if !on_corneal_cap(surface, pose, model) {
        return None;
    }
    let normal = (surface - sphere.center) / sphere.radius;
    let reflected = reflect(ray.direction, normal);
    Some((surface, Ray::new(surface, reflected)))
}

/// Cap membership: the surface point sits on the camera-facing cap,
/// i.e. in front of the limbus plane along the gaze.
pub fn on_corneal_cap(surface: Vec3, pose: &EyePose, model: &EyeModel) -> bool {
    let center = pose.cornea_sphere(model).center;
    (surface - center).dot(&pose.gaze) >= model.limbus_offset() - 1e-9
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(3600.0, (960.0, 540.0), (1920, 1080)).unwrap()
    }

    #[test]
    fn frontal_circle_pose() {
        let e = Ellipse2D::new((960.0, 540.0), 360.0, 360.0, 0.0);
        let model = EyeModel::new(7.8, 5.55).unwrap();
        let pose = pose_from_limbus(&e, &intr(), &model, &PoseConfig::default()).unwrap();
        assert_relative_eq!(pose.limbus_center.z, 55.5, epsilon = 1e-9);
        assert_relative_eq!(pose.limbus_center.x, 0.0, epsilon = 1e-9);
        assert_relative_eq!(pose.gaze.z, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn half_ratio_gives_sixty_degree_tilt() {
        let e = Ellipse2D::new((960.0, 540.0), 360.0, 180.0, 0.0);
        let model = EyeModel::default();
        let pose = pose_from_limbus(&e, &intr(), &model, &PoseConfig::default()).unwrap();
        let tilt = pose.gaze.dot(&Vec3::new(0.0, 0.0, -1.0)).acos();
        assert_relative_eq!(tilt.to_degrees(), 60.0, epsilon = 1e-9);
    }

    #[test]
    fn limbus_offset_from_model_constants() {
        let model = EyeModel::new(7.8, 5.5).unwrap();
        assert_relative_eq!(model.limbus_offset(), 5.531, epsilon = 5e-4);
        // dLC^2 + rL^2 = rC^2
        assert_relative_eq!(
            model.limbus_offset().powi(2) + 5.5 * 5.5,
            7.8 * 7.8,
            epsilon = 1e-9
        );
    }

    #[test]
    fn cornea_center_frontal() {
        let model = EyeModel::new(7.8, 5.5).unwrap();
        let pose = EyePose::new(Vec3::new(0.0, 0.0, 55.5), Vec3::new(0.0, 0.0, -1.0));
        let sphere = pose.cornea_sphere(&model);
        assert_relative_eq!(sphere.center.z, 61.031, epsilon = 5e-4);
        assert_relative_eq!(sphere.center.x, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn cornea_center_tilted_preserves_offset() {
        let model = EyeModel::new(7.8, 5.5).unwrap();
        let gaze = rotate_about_axis(
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, 0.0),
            60f64.to_radians(),
        );
        let pose = EyePose::new(Vec3::new(0.0, 0.0, 55.5), gaze);
        let sphere = pose.cornea_sphere(&model);
        assert_relative_eq!(
            (sphere.center - pose.limbus_center).norm(),
            model.limbus_offset(),
            epsilon = 1e-9
        );
    }

    #[test]
    fn backproject_apex_reflects_straight_back() {
        let model = EyeModel::new(7.8, 5.5).unwrap();
        let pose = EyePose::new(Vec3::new(0.0, 0.0, 55.5), Vec3::new(0.0, 0.0, -1.0));
        let (surface, ray) =
            backproject_pixel((960.0, 540.0), &intr(), &pose, &model).unwrap();
        assert_relative_eq!(surface.z, 53.231, epsilon = 5e-4);
        assert_relative_eq!(ray.direction.z, -1.0, epsilon = 1e-9);
    }

    #[test]
    fn backproject_outside_limbus_is_none() {
        let model = EyeModel::new(7.8, 5.5).unwrap();
        let pose = EyePose::new(Vec3::new(0.0, 0.0, 55.5), Vec3::new(0.0, 0.0, -1.0));
        // Limbus projects at roughly f*rL/d = 360 px; aim well outside the
        // cap but still on the sphere silhouette.
        assert!(backproject_pixel((960.0 + 500.0, 540.0), &intr(), &pose, &model).is_none());
    }

    #[test]
    fn pose_invariant_under_half_turn_of_rotation() {
        let model = EyeModel::default();
        let e1 = Ellipse2D::new((900.0, 500.0), 360.0, 300.0, 0.4);
        let e2 = Ellipse2D::new((900.0, 500.0), 360.0, 300.0, 0.4 + std::f64::consts::PI);
        let p1 = pose_from_limbus(&e1, &intr(), &model, &PoseConfig::default()).unwrap();
        let p2 = pose_from_limbus(&e2, &intr(), &model, &PoseConfig::default()).unwrap();
        assert_relative_eq!(p1.gaze.x, p2.gaze.x, epsilon = 1e-9);
        assert_relative_eq!(p1.gaze.y, p2.gaze.y, epsilon = 1e-9);
        assert_relative_eq!(p1.gaze.z, p2.gaze.z, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_axis_ratio() {
        let model = EyeModel::default();
        let e = Ellipse2D {
            center: (960.0, 540.0),
            semi_major: 100.0,
            semi_minor: 120.0,
            rotation: 0.0,
        };
        assert!(matches!(
            pose_from_limbus(&e, &intr(), &model, &PoseConfig::default()),
            Err(Error::BadEllipse(_))
        ));
    }
}
