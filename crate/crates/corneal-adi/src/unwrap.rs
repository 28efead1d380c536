//! Equirectangular unwrapping of the corneal reflection.
//!
//! Output pixels are longitude/latitude samples of the corneal sphere.
//! The eye model is pre-rotated 90 degrees about the x-axis before the
//! projection so that the corneal cap straddles the equator instead of a
//! pole, where equirectangular distortion is worst; equivalently, the
//! polar axis of the projection is the eye's vertical axis rather than
//! the gaze. The apex lands at the texture center. Each valid output
//! pixel stores the mirror-law reflected ray at its corneal surface
//! point, which is what the reconstruction stage consumes.

use image::RgbImage;
use rayon::prelude::*;

use crate::eye::{CameraIntrinsics, EyeModel, EyePose};
use crate::geometry::{reflect, Ray, Vec3};

/// Note attached to every unwrap describing the fixed model pre-rotation.
pub const ROTATION_NOTE: &str = "eye model pre-rotated 90 deg about +x: gaze maps to the equator";

/// Equirectangular texture of the corneal reflection plus the per-pixel
/// reflected-ray map. `texture`, `ray_map` and `valid_mask` share
/// dimensions, and `valid_mask[i]` is true exactly when `ray_map[i]` is
/// present.
pub struct UnwrappedCornea {
    pub texture: RgbImage,
    pub ray_map: Vec<Option<Ray>>,
    pub valid_mask: Vec<bool>,
    /// Angular density in pixels per degree.
    pub px_per_degree: f64,
    pub rotation_note: &'static str,
}

impl UnwrappedCornea {
    pub fn width(&self) -> u32 {
        self.texture.width()
    }

    pub fn height(&self) -> u32 {
        self.texture.height()
    }

    pub fn is_valid(&self, u: u32, v: u32) -> bool {
        u < self.width() && v < self.height() && self.valid_mask[(v * self.width() + u) as usize]
    }

    /// Longitude/latitude (radians) of the center of texture pixel `(u, v)`.
    pub fn angles_of_pixel(&self, u: f64, v: f64) -> (f64, f64) {
        let w = self.width() as f64;
        let h = self.height() as f64;
        let theta = ((u + 0.5) / w - 0.5) * std::f64::consts::TAU;
        let phi = (0.5 - (v + 0.5) / h) * std::f64::consts::PI;
        (theta, phi)
    }

    /// Texture pixel containing the given longitude/latitude.
    pub fn pixel_of_angles(&self, theta: f64, phi: f64) -> (u32, u32) {
        let w = self.width() as f64;
        let h = self.height() as f64;
        let u = ((theta / std::f64::consts::TAU + 0.5) * w - 0.5).round();
        let v = ((0.5 - phi / std::f64::consts::PI) * h - 0.5).round();
        (u.clamp(0.0, w - 1.0) as u32, v.clamp(0.0, h - 1.0) as u32)
    }
}

/// Orthonormal eye basis `(x_e, y_e)` completing the gaze to a
/// right-handed frame. In the frontal pose, +x_e is image-right and +y_e
/// is image-up, so the unwrapped texture reads like the scene.
pub fn eye_basis(gaze: Vec3) -> (Vec3, Vec3) {
    let up_seed = Vec3::new(0.0, 1.0, 0.0);
    let x_e = if gaze.cross(&up_seed).norm() > 1e-6 {
        gaze.cross(&up_seed).normalize()
    } else {
        gaze.cross(&Vec3::new(0.0, 0.0, 1.0)).normalize()
    };
    let y_e = gaze.cross(&x_e);
    (x_e, y_e)
}

/// Surface direction (from the corneal sphere center) for longitude
/// `theta` and latitude `phi` in the rotated parameterization.
pub fn surface_direction(theta: f64, phi: f64, gaze: Vec3) -> Vec3 {
    let (x_e, y_e) = eye_basis(gaze);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    x_e * (st * cp) + y_e * sp + gaze * (ct * cp)
}

fn sample_bilinear(img: &RgbImage, u: f64, v: f64) -> [u8; 3] {
    let w = img.width();
    let h = img.height();
    let x = (u - 0.5).clamp(0.0, (w - 1) as f64);
    let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p = |xx: u32, yy: u32| img.get_pixel(xx, yy).0;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let v00 = p(x0, y0)[c] as f64;
        let v10 = p(x1, y0)[c] as f64;
        let v01 = p(x0, y1)[c] as f64;
        let v11 = p(x1, y1)[c] as f64;
        let val = v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy;
        out[c] = val.round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// Unwraps the corneal reflection into an equirectangular texture with a
/// per-pixel reflected-ray map. Output pixels whose surface point falls
/// off the corneal cap, faces away from the camera, or projects outside
/// the source image are masked invalid. Rows are evaluated in parallel;
/// the result is identical to sequential evaluation.
pub fn unwrap(
    image: &RgbImage,
    intrinsics: &CameraIntrinsics,
    pose: &EyePose,
    model: &EyeModel,
    px_per_degree: f64,
) -> UnwrappedCornea {
    let k = px_per_degree.max(0.5);
    let w = (360.0 * k).round().max(4.0) as u32;
    let h = (180.0 * k).round().max(2.0) as u32;

    let sphere = pose.cornea_sphere(model);
    let (x_e, y_e) = eye_basis(pose.gaze);
    let gaze = pose.gaze;
    let cap_cos = model.limbus_offset() / model.cornea_radius;
    let (img_w, img_h) = (image.width() as f64, image.height() as f64);

    let mut tex = vec![0u8; (w * h * 3) as usize];
    let mut rays: Vec<Option<Ray>> = vec![None; (w * h) as usize];
    let mut mask = vec![false; (w * h) as usize];

    tex.par_chunks_mut((w * 3) as usize)
        .zip(rays.par_chunks_mut(w as usize))
        .zip(mask.par_chunks_mut(w as usize))
        .enumerate()
        .for_each(|(j, ((tex_row, ray_row), mask_row))| {
            let phi = (0.5 - (j as f64 + 0.5) / h as f64) * std::f64::consts::PI;
            let (sp, cp) = phi.sin_cos();
            for i in 0..w as usize {
                let theta = ((i as f64 + 0.5) / w as f64 - 0.5) * std::f64::consts::TAU;
                let (st, ct) = theta.sin_cos();
                let dir = x_e * (st * cp) + y_e * sp + gaze * (ct * cp);
                // Cap membership (bounded by the limbus plane).
                if dir.dot(&gaze) < cap_cos {
                    continue;
                }
                let surface = sphere.center + dir * sphere.radius;
                if surface.z <= 0.0 {
                    continue;
                }
                let view = surface.normalize();
                // The surface must face the camera.
                if dir.dot(&view) >= -1e-6 {
                    continue;
                }
                let (u_img, v_img) = intrinsics.project(surface);
                if u_img < 0.0 || v_img < 0.0 || u_img >= img_w || v_img >= img_h {
                    continue;
                }
                let rgb = sample_bilinear(image, u_img, v_img);
                tex_row[i * 3] = rgb[0];
                tex_row[i * 3 + 1] = rgb[1];
                tex_row[i * 3 + 2] = rgb[2];
                ray_row[i] = Some(Ray::new(surface, reflect(view, dir)));
                mask_row[i] = true;
            }
        });

    UnwrappedCornea {
        texture: RgbImage::from_raw(w, h, tex).expect("texture buffer sized to dimensions"),
        ray_map: rays,
        valid_mask: mask,
        px_per_degree: k,
        rotation_note: ROTATION_NOTE,
    }
}

/// Reflected ray stored at texture pixel `(u, v)`; `None` outside bounds
/// or where the pixel is masked invalid.
pub fn unwrapped_to_ray(unwrapped: &UnwrappedCornea, px: (u32, u32)) -> Option<Ray> {
    let (u, v) = px;
    if u >= unwrapped.width() || v >= unwrapped.height() {
        return None;
    }
    unwrapped.ray_map[(v * unwrapped.width() + u) as usize]
}
