//! Deterministic procedural textures for the synthetic eye.
//!
//! Everything is a pure function of integer lattice coordinates and a
//! seed, so renders are reproducible byte-for-byte.

/// SplitMix64 finalizer; the workhorse behind all texture noise.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Uniform value in `[0, 1)` for a seeded 2D lattice point.
pub fn noise2(seed: u64, a: i64, b: i64) -> f64 {
    let h = mix64(seed ^ mix64(a as u64).wrapping_add(mix64((b as u64).rotate_left(17))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn scale_rgb(base: [f64; 3], k: f64) -> [f64; 3] {
    [base[0] * k, base[1] * k, base[2] * k]
}

/// Iris/pupil shading under the corneal reflection. `rho_mm` is the
/// distance of the surface point from the gaze axis, `azimuth` its angle
/// around it.
pub fn iris_color(
    rho_mm: f64,
    azimuth: f64,
    seed: u64,
    pupil_radius: f64,
    limbus_radius: f64,
) -> [f64; 3] {
    let pupil = [10.0, 8.0, 8.0];
    if rho_mm < pupil_radius - 0.15 {
        let n = 0.9 + 0.2 * noise2(seed, (rho_mm * 20.0) as i64, (azimuth * 40.0) as i64);
        return scale_rgb(pupil, n);
    }

    // Radial streaks and concentric rings over a brown base.
    let az_bucket = (azimuth.rem_euclid(std::f64::consts::TAU) * 48.0 / std::f64::consts::TAU)
        .floor() as i64;
    let ring_bucket = (rho_mm * 4.0).floor() as i64;
    let streak = 0.55 + 0.8 * noise2(seed, az_bucket, ring_bucket);
    let phase = noise2(seed, 3, 7) * std::f64::consts::TAU;
    let rings = 1.0 + 0.12 * (rho_mm * 9.0 + phase).sin();
    let mut k = streak * rings;

    // Dark collarette right at the pupil margin, dark ring at the limbus.
    if rho_mm < pupil_radius + 0.35 {
        let t = ((rho_mm - (pupil_radius - 0.15)) / 0.5).clamp(0.0, 1.0);
        k *= 0.3 + 0.7 * t;
        if t < 0.35 {
            let p = scale_rgb(pupil, 1.0);
            let base = scale_rgb([96.0, 66.0, 44.0], k);
            let t2 = t / 0.35;
            return [
                p[0] * (1.0 - t2) + base[0] * t2,
                p[1] * (1.0 - t2) + base[1] * t2,
                p[2] * (1.0 - t2) + base[2] * t2,
            ];
        }
    }
    if rho_mm > limbus_radius - 0.45 {
        k *= 0.45;
    }
    scale_rgb([96.0, 66.0, 44.0], k)
}

/// Sclera shading for an eyeball surface point, keyed on its direction.
pub fn sclera_color(dir_x: f64, dir_y: f64, seed: u64) -> [f64; 3] {
    let n = noise2(
        seed ^ 0x5C1E_AA11,
        (dir_x * 300.0) as i64,
        (dir_y * 300.0) as i64,
    );
    let k = 0.94 + 0.08 * n;
    scale_rgb([233.0, 226.0, 216.0], k)
}

/// Skin shading for the face plane around the eye.
pub fn skin_color(x_mm: f64, y_mm: f64, seed: u64) -> [f64; 3] {
    let coarse = noise2(seed ^ 0xFACE, (x_mm / 4.0).floor() as i64, (y_mm / 4.0).floor() as i64);
    let fine = noise2(seed ^ 0xFACE2, (x_mm * 2.0) as i64, (y_mm * 2.0) as i64);
    let k = 0.92 + 0.1 * coarse + 0.04 * fine;
    scale_rgb([212.0, 158.0, 122.0], k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_is_deterministic_and_bounded() {
        for i in -50..50 {
            for j in -50..50 {
                let a = noise2(42, i, j);
                let b = noise2(42, i, j);
                assert_eq!(a.to_bits(), b.to_bits());
                assert!((0.0..1.0).contains(&a));
            }
        }
        assert_ne!(noise2(1, 5, 5), noise2(2, 5, 5));
    }

    #[test]
    fn pupil_is_much_darker_than_iris() {
        let p = iris_color(0.5, 1.0, 9, 2.0, 5.5);
        let i = iris_color(3.5, 1.0, 9, 2.0, 5.5);
        let luma = |c: [f64; 3]| 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
        assert!(luma(p) < 15.0);
        assert!(luma(i) > 30.0);
    }
}
