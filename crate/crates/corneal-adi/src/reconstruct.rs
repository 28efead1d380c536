//! Metric interaction-plane recovery and plane coordinates of the pointer.
//!
//! The device's left/center/right key pixels yield three reflected rays.
//! A candidate plane slides along the central ray with its normal opposed
//! to it; the left and right rays intersect it at points whose separation
//! is affine in the slide parameter, so requiring that separation to equal
//! the known device width gives a quadratic with a closed-form smallest
//! non-negative root. The device center anchors the plane origin, and the
//! pointer ray is intersected with the recovered plane and expressed in
//! device-centered coordinates (x right, y up).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{intersect_ray_plane, Plane3D, Ray, Vec3};
use crate::scene::DetectedObject;
use crate::unwrap::{unwrapped_to_ray, UnwrappedCornea};

/// Reconstructed interaction plane with device-centered axes: `x_axis`
/// along the device narrow edge (left-to-right), `y_axis` up, both
/// orthogonal to the plane normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevicePlane {
    pub plane: Plane3D,
    /// Reconstructed device center.
    pub origin: Vec3,
    pub x_axis: Vec3,
    pub y_axis: Vec3,
    /// Physical device width and height in mm.
    pub device_dims: (f64, f64),
}

/// 2D metric coordinates in the interaction plane: x positive right of
/// the device center, y positive above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneCoords {
    pub x: f64,
    pub y: f64,
}

/// Rays and auxiliary construction points retained for debugging and
/// regression. Projected/mirrored points follow the classical plane
/// construction that the closed-form solve is algebraically equivalent to
/// under the parallel-ray assumption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionFrame {
    pub ray_left: Ray,
    pub ray_center: Ray,
    pub ray_right: Ray,
    /// Device edge/center points on the recovered plane.
    pub left_on_plane: Vec3,
    pub center_on_plane: Vec3,
    pub right_on_plane: Vec3,
    /// Left/right surface points projected onto the plane along the
    /// central direction.
    pub left_projected: Vec3,
    pub right_projected: Vec3,
    /// Left surface point and left plane point mirrored across the
    /// central ray.
    pub left_mirrored: Vec3,
    pub left_plane_mirrored: Vec3,
}

/// Result of the plane solve, including a confidence that folds in the
/// aspect-ratio agreement between the detection and the physical device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneSolution {
    pub plane: DevicePlane,
    pub frame: ReconstructionFrame,
    pub confidence: f64,
}

fn mirror_across_line(p: Vec3, line_origin: Vec3, line_dir: Vec3) -> Vec3 {
    let foot = line_origin + line_dir * (p - line_origin).dot(&line_dir);
    foot * 2.0 - p
}

/// Solves for the interaction plane: the plane through `o_C + t*d_C` with
/// normal `-d_C` where the left/right reflected rays hit it exactly the
/// device width apart, taking the smallest non-negative `t`.
pub fn solve_device_plane(
    device: &DetectedObject,
    unwrapped: &UnwrappedCornea,
    device_dims: (f64, f64),
) -> Result<PlaneSolution> {
    let (width, height) = device_dims;
    if !(width > 0.0 && height > 0.0) {
        return Err(Error::ConfigInvalid("device dims must be positive".into()));
    }
    let ray_l = unwrapped_to_ray(unwrapped, device.key_left).ok_or(Error::NoSolution)?;
    let ray_c = unwrapped_to_ray(unwrapped, device.key_center).ok_or(Error::NoSolution)?;
    let ray_r = unwrapped_to_ray(unwrapped, device.key_right).ok_or(Error::NoSolution)?;

    let normal = -ray_c.direction;

    // Intersection of an edge ray with the sliding plane is affine in t:
    // X(t) = A + t * B.
    let affine = |ray: &Ray| -> Result<(Vec3, Vec3)> {
        let denom = normal.dot(&ray.direction);
        if denom.abs() < 1e-9 {
            return Err(Error::DivergentRays);
        }
        let a = ray.origin
            + ray.direction * (normal.dot(&(ray_c.origin - ray.origin)) / denom);
        let b = ray.direction * (-1.0 / denom);
        Ok((a, b))
    };
    let (a_l, b_l) = affine(&ray_l)?;
    let (a_r, b_r) = affine(&ray_r)?;

    // |L_E(t) - R_E(t)|^2 = width^2, quadratic in t.
    let p = a_l - a_r;
    let q = b_l - b_r;
    let qq = q.dot(&q);
    let pq = p.dot(&q);
    let pp = p.dot(&p);

    let t = if qq < 1e-14 {
        // Separation does not change with t; identical rays included.
        return Err(Error::NoSolution);
    } else {
        let disc = pq * pq - qq * (pp - width * width);
        if disc < 0.0 {
            // Separation never reaches the device width.
            return Err(Error::DivergentRays);
        }
        let sq = disc.sqrt();
        let t1 = (-pq - sq) / qq;
        let t2 = (-pq + sq) / qq;
        if t1 >= 0.0 {
            t1
        } else if t2 >= 0.0 {
            t2
        } else {
            return Err(Error::NoSolution);
        }
    };

    let left_on_plane = a_l + b_l * t;
    let right_on_plane = a_r + b_r * t;
    let center_on_plane = ray_c.point_at(t);

    let x_axis = (right_on_plane - left_on_plane).normalize();
    // y chosen so positive plane-y is "up" (toward -v in camera frame)
    // when the normal faces the eye.
    let y_axis = x_axis.cross(&normal);

    let plane = DevicePlane {
        plane: Plane3D::new(center_on_plane, normal),
        origin: center_on_plane,
        x_axis,
        y_axis,
        device_dims,
    };

    let frame = ReconstructionFrame {
        ray_left: ray_l,
        ray_center: ray_c,
        ray_right: ray_r,
        left_on_plane,
        center_on_plane,
        right_on_plane,
        left_projected: ray_l.origin
            + ray_c.direction
                * (normal.dot(&(center_on_plane - ray_l.origin)) / normal.dot(&ray_c.direction)),
        right_projected: ray_r.origin
            + ray_c.direction
                * (normal.dot(&(center_on_plane - ray_r.origin)) / normal.dot(&ray_c.direction)),
        left_mirrored: mirror_across_line(ray_l.origin, ray_c.origin, ray_c.direction),
        left_plane_mirrored: mirror_across_line(left_on_plane, ray_c.origin, ray_c.direction),
    };

    // Aspect-ratio agreement between detection and physical dims lowers
    // confidence on mismatch instead of failing.
    let (_, _, bw, bh) = device.bbox;
    let mut confidence = device.confidence;
    if bw > 0 && bh > 0 {
        let observed = bh as f64 / bw as f64;
        let expected = height / width;
        if (observed / expected - 1.0).abs() > 0.25 {
            confidence *= 0.5;
        }
    }

    Ok(PlaneSolution {
        plane,
        frame,
        confidence,
    })
}

/// Intersects the pointer's reflected ray with the interaction plane and
/// expresses the hit in device-centered plane coordinates.
pub fn locate_pointer_on_plane(plane: &DevicePlane, pointer_ray: &Ray) -> Result<PlaneCoords> {
    let (_, p) = intersect_ray_plane(pointer_ray, &plane.plane).ok_or(Error::NoIntersection)?;
    let d = p - plane.origin;
    Ok(PlaneCoords {
        x: d.dot(&plane.x_axis),
        y: d.dot(&plane.y_axis),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{ObjectKind, PixelSpace};
    use crate::unwrap::UnwrappedCornea;
    use approx::assert_relative_eq;
    use image::RgbImage;

    /// Tiny synthetic unwrap whose ray map is written directly.
    fn unwrap_with_rays(rays: [Ray; 3]) -> (UnwrappedCornea, DetectedObject) {
        let w = 8u32;
        let h = 1u32;
        let mut map: Vec<Option<Ray>> = vec![None; (w * h) as usize];
        map[1] = Some(rays[0]);
        map[2] = Some(rays[1]);
        map[3] = Some(rays[2]);
        let un = UnwrappedCornea {
            texture: RgbImage::new(w, h),
            valid_mask: map.iter().map(|r| r.is_some()).collect(),
            ray_map: map,
            px_per_degree: 3.0,
            rotation_note: crate::unwrap::ROTATION_NOTE,
        };
        let det = DetectedObject {
            kind: ObjectKind::DeviceRect,
            key_left: (1, 0),
            key_center: (2, 0),
            key_right: (3, 0),
            bbox: (1, 0, 3, 1),
            confidence: 1.0,
            space: PixelSpace::UnwrappedTexture,
        };
        (un, det)
    }

    /// Ray fan from a small mirror region toward a frontal plane: center
    /// ray straight down -z, edge rays spreading so that their separation
    /// grows with distance.
    fn spreading_fan(origin_z: f64, spread: f64) -> [Ray; 3] {
        let o = Vec3::new(0.0, 0.0, origin_z);
        [
            Ray::new(
                o + Vec3::new(-0.5, 0.0, 0.0),
                Vec3::new(-spread, 0.0, -1.0),
            ),
            Ray::new(o, Vec3::new(0.0, 0.0, -1.0)),
            Ray::new(o + Vec3::new(0.5, 0.0, 0.0), Vec3::new(spread, 0.0, -1.0)),
        ]
    }

    #[test]
    fn recovers_plane_at_known_distance() {
        // Edge separation on the sliding plane is 1 + 2*spread*t, so the
        // width constraint pins t = (70 - 1) / (2 * spread) exactly.
        let spread = 0.0767;
        let (un, det) = unwrap_with_rays(spreading_fan(450.0, spread));
        let sol = solve_device_plane(&det, &un, (70.0, 140.0)).unwrap();
        let t_expected = (70.0 - 1.0) / (2.0 * spread);
        let t_actual = (sol.plane.origin - Vec3::new(0.0, 0.0, 450.0)).norm();
        assert_relative_eq!(
            (sol.frame.left_on_plane - sol.frame.right_on_plane).norm(),
            70.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(t_actual, t_expected, max_relative = 1e-9);
    }

    #[test]
    fn identical_rays_are_unsolvable() {
        let r = Ray::new(Vec3::new(0.0, 0.0, 450.0), Vec3::new(0.0, 0.0, -1.0));
        let (un, det) = unwrap_with_rays([r, r, r]);
        assert!(matches!(
            solve_device_plane(&det, &un, (70.0, 140.0)),
            Err(Error::NoSolution)
        ));
    }

    #[test]
    fn width_scales_recovered_distance_monotonically() {
        let (un, det) = unwrap_with_rays(spreading_fan(450.0, 0.05));
        let mut last = 0.0;
        for w in [35.0, 70.0, 140.0, 280.0] {
            let sol = solve_device_plane(&det, &un, (w, 2.0 * w)).unwrap();
            let dist = (sol.plane.origin - Vec3::new(0.0, 0.0, 450.0)).norm();
            assert!(dist > last, "distance must grow with width");
            last = dist;
        }
    }

    #[test]
    fn central_ray_maps_to_plane_origin() {
        let (un, det) = unwrap_with_rays(spreading_fan(450.0, 0.0767));
        let sol = solve_device_plane(&det, &un, (70.0, 140.0)).unwrap();
        let coords = locate_pointer_on_plane(&sol.plane, &sol.frame.ray_center).unwrap();
        assert_relative_eq!(coords.x, 0.0, epsilon = 1e-9);
        assert_relative_eq!(coords.y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn plane_axes_are_orthonormal_and_y_up() {
        let (un, det) = unwrap_with_rays(spreading_fan(450.0, 0.0767));
        let sol = solve_device_plane(&det, &un, (70.0, 140.0)).unwrap();
        let p = sol.plane;
        assert_relative_eq!(p.x_axis.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.y_axis.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.x_axis.dot(&p.y_axis), 0.0, epsilon = 1e-12);
        assert_relative_eq!(p.x_axis.dot(&p.plane.normal), 0.0, epsilon = 1e-12);
        // Fan spreads along +x, plane in front at lower z: y must be "up"
        // which is -y in camera coordinates.
        assert!(p.y_axis.y < -0.9);
    }

    #[test]
    fn pointer_above_center_has_positive_y() {
        let (un, det) = unwrap_with_rays(spreading_fan(450.0, 0.0767));
        let sol = solve_device_plane(&det, &un, (70.0, 140.0)).unwrap();
        // A ray parallel to the central one but displaced up (-y).
        let ray = Ray::new(Vec3::new(0.0, -20.0, 450.0), Vec3::new(0.0, 0.0, -1.0));
        let coords = locate_pointer_on_plane(&sol.plane, &ray).unwrap();
        assert!(coords.y > 19.0, "displaced-up ray must land above center");
        assert_relative_eq!(coords.x, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn parallel_pointer_ray_is_no_intersection() {
        let (un, det) = unwrap_with_rays(spreading_fan(450.0, 0.0767));
        let sol = solve_device_plane(&det, &un, (70.0, 140.0)).unwrap();
        let ray = Ray::new(Vec3::new(0.0, 0.0, 450.0), Vec3::new(1.0, 0.0, 0.0));
        assert!(matches!(
            locate_pointer_on_plane(&sol.plane, &ray),
            Err(Error::NoIntersection)
        ));
    }

    #[test]
    fn skew_rays_that_never_reach_width_are_divergent() {
        // Skew edge rays whose closest separation (100 mm) stays above the
        // device width: the quadratic has no real root.
        let o = Vec3::new(0.0, 0.0, 450.0);
        let rays = [
            Ray::new(o + Vec3::new(-50.0, 0.0, 0.0), Vec3::new(0.0, 0.3, -1.0)),
            Ray::new(o, Vec3::new(0.0, 0.0, -1.0)),
            Ray::new(o + Vec3::new(50.0, 0.0, 0.0), Vec3::new(0.0, -0.3, -1.0)),
        ];
        let (un, det) = unwrap_with_rays(rays);
        assert!(matches!(
            solve_device_plane(&det, &un, (70.0, 140.0)),
            Err(Error::DivergentRays)
        ));
    }

    #[test]
    fn parallel_equal_width_rays_have_no_unique_distance() {
        let o = Vec3::new(0.0, 0.0, 450.0);
        let d = Vec3::new(0.0, 0.0, -1.0);
        let rays = [
            Ray::new(o + Vec3::new(-35.0, 0.0, 0.0), d),
            Ray::new(o, d),
            Ray::new(o + Vec3::new(35.0, 0.0, 0.0), d),
        ];
        let (un, det) = unwrap_with_rays(rays);
        assert!(matches!(
            solve_device_plane(&det, &un, (70.0, 140.0)),
            Err(Error::NoSolution)
        ));
    }

    #[test]
    fn geometry_is_homogeneous_of_degree_one() {
        // Scaling the whole scene by s scales distances and coordinates by s.
        let s = 2.5;
        let fan = spreading_fan(450.0, 0.0767);
        let scaled: [Ray; 3] =
            std::array::from_fn(|i| Ray::new(fan[i].origin * s, fan[i].direction));
        let (un_a, det) = unwrap_with_rays(fan);
        let (un_b, _) = unwrap_with_rays(scaled);
        let sol_a = solve_device_plane(&det, &un_a, (70.0, 140.0)).unwrap();
        let sol_b = solve_device_plane(&det, &un_b, (70.0 * s, 140.0 * s)).unwrap();

        let pointer_a = Ray::new(Vec3::new(10.0, -5.0, 450.0), Vec3::new(0.05, 0.02, -1.0));
        let pointer_b = Ray::new(pointer_a.origin * s, pointer_a.direction);
        let ca = locate_pointer_on_plane(&sol_a.plane, &pointer_a).unwrap();
        let cb = locate_pointer_on_plane(&sol_b.plane, &pointer_b).unwrap();
        assert_relative_eq!(cb.x, ca.x * s, max_relative = 1e-6);
        assert_relative_eq!(cb.y, ca.y * s, max_relative = 1e-6);

        let da = (sol_a.plane.origin - fan[1].origin).norm();
        let db = (sol_b.plane.origin - scaled[1].origin).norm();
        assert_relative_eq!(db, da * s, max_relative = 1e-6);
    }
}
