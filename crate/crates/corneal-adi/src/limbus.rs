//! Eye-region localization and RANSAC limbus detection.
//!
//! The eye region is found by locating the pupil: the frame is scaled to a
//! fixed working width, dark pixels are thresholded, and the darkest
//! compact connected component wins. Limbus detection then casts rays
//! radially from the pupil center, keeps the strongest dark-to-bright
//! gradient per ray as an edge candidate, and fits an ellipse to the
//! candidates with RANSAC over 5-point subsets.

use image::{GrayImage, RgbImage};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ellipse_from_points, Ellipse2D};

/// Square crop around the eye, in full-image pixel coordinates.
#[derive(Debug, Clone)]
pub struct EyeRegion {
    /// Bounding box `(u0, v0, w, h)` within the full image.
    pub bbox: (u32, u32, u32, u32),
    /// Grayscale crop at native resolution.
    pub gray: GrayImage,
    /// Pupil center in full-image coordinates.
    pub pupil_center: (f64, f64),
    /// Major axis (full length, pixels) of the pupil blob.
    pub pupil_major: f64,
}

/// RANSAC parameters for the limbus fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub iterations: u32,
    /// Inlier distance in pixels at a 1000 px eye region; scaled by the
    /// actual region size.
    pub inlier_threshold: f64,
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            iterations: 400,
            inlier_threshold: 1.5,
            min_inlier_fraction: 0.5,
            seed: 7,
        }
    }
}

/// Gates for the pupil blob search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeSearchConfig {
    /// Frames wider than this are downscaled for the blob search.
    pub working_width: u32,
    /// Dark threshold on 8-bit luma.
    pub dark_threshold: u8,
    /// Minimum blob fill ratio (area / bounding box area).
    pub min_fill: f64,
    /// Allowed bounding-box aspect band around square.
    pub max_aspect: f64,
    /// Eye region side as a multiple of the pupil major axis.
    pub region_multiple: f64,
}

impl Default for EyeSearchConfig {
    fn default() -> Self {
        EyeSearchConfig {
            working_width: 960,
            dark_threshold: 60,
            min_fill: 0.5,
            max_aspect: 1.8,
            region_multiple: 5.6,
        }
    }
}

pub fn to_gray(image: &RgbImage) -> GrayImage {
    let mut g = GrayImage::new(image.width(), image.height());
    for (src, dst) in image.pixels().zip(g.pixels_mut()) {
        let [r, gc, b] = src.0;
        let y = 0.299 * r as f64 + 0.587 * gc as f64 + 0.114 * b as f64;
        dst.0 = [y.round().min(255.0) as u8];
    }
    g
}

struct Blob {
    area: u32,
    min_u: u32,
    max_u: u32,
    min_v: u32,
    max_v: u32,
    sum_u: f64,
    sum_v: f64,
    sum_luma: f64,
}

/// Locates the eye region: the darkest compact blob (the pupil) found by
/// thresholding and connected-component analysis, optionally restricted to
/// a coarse ROI. The returned square region is a configured multiple of
/// the pupil major axis.
pub fn locate_eye_region(
    image: &RgbImage,
    coarse_roi: Option<(u32, u32, u32, u32)>,
    cfg: &EyeSearchConfig,
) -> Result<EyeRegion> {
    let (iw, ih) = image.dimensions();
    if iw == 0 || ih == 0 {
        return Err(Error::EyeNotFound);
    }
    if let Some((u0, v0, w, h)) = coarse_roi {
        if u0 + w > iw || v0 + h > ih || w == 0 || h == 0 {
            return Err(Error::ConfigInvalid("coarse ROI outside image".into()));
        }
    }
    let gray_full = to_gray(image);

    // Blob search runs at a fixed working width; coordinates map back.
    let scale = if iw > cfg.working_width {
        cfg.working_width as f64 / iw as f64
    } else {
        1.0
    };
    let work = if scale < 1.0 {
        image::imageops::resize(
            &gray_full,
            (iw as f64 * scale).round() as u32,
            (ih as f64 * scale).round() as u32,
            image::imageops::FilterType::Triangle,
        )
    } else {
        gray_full.clone()
    };
    let (ww, wh) = work.dimensions();

    let roi = match coarse_roi {
        Some((u0, v0, w, h)) => {
            let su0 = ((u0 as f64 * scale).floor() as u32).min(ww - 1);
            let sv0 = ((v0 as f64 * scale).floor() as u32).min(wh - 1);
            let sw = ((w as f64 * scale).ceil() as u32).clamp(1, ww - su0);
            let sh = ((h as f64 * scale).ceil() as u32).clamp(1, wh - sv0);
            (su0, sv0, sw, sh)
        }
        None => (0, 0, ww, wh),
    };

    let blobs = dark_blobs(&work, roi, cfg.dark_threshold);
    let max_area = (roi.2.min(roi.3) as f64 * 0.5).powi(2);
    let min_area = 12.0;

    let mut best: Option<(f64, Blob)> = None;
    for b in blobs {
        let bw = (b.max_u - b.min_u + 1) as f64;
        let bh = (b.max_v - b.min_v + 1) as f64;
        let area = b.area as f64;
        if area < min_area || area > max_area {
            continue;
        }
        let aspect = bw.max(bh) / bw.min(bh);
        if aspect > cfg.max_aspect {
            continue;
        }
        if area / (bw * bh) < cfg.min_fill {
            continue;
        }
        // Darkest compact blob wins; larger area breaks ties.
        let mean_luma = b.sum_luma / area;
        let score = mean_luma - area.sqrt() * 0.05;
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, b));
        }
    }
    let (_, blob) = best.ok_or(Error::EyeNotFound)?;

    let cx = blob.sum_u / blob.area as f64 / scale;
    let cy = blob.sum_v / blob.area as f64 / scale;
    let major_work = (blob.max_u - blob.min_u + 1).max(blob.max_v - blob.min_v + 1) as f64;
    let pupil_major = major_work / scale;

    let side = (cfg.region_multiple * pupil_major).round().max(16.0) as u32;
    let side = side.min(iw).min(ih);
    let u0 = (cx - side as f64 / 2.0).round().clamp(0.0, (iw - side) as f64) as u32;
    let v0 = (cy - side as f64 / 2.0).round().clamp(0.0, (ih - side) as f64) as u32;
    let gray = image::imageops::crop_imm(&gray_full, u0, v0, side, side).to_image();

    Ok(EyeRegion {
        bbox: (u0, v0, side, side),
        gray,
        pupil_center: (cx, cy),
        pupil_major,
    })
}

/// 8-connected components of sub-threshold pixels inside `roi`.
fn dark_blobs(gray: &GrayImage, roi: (u32, u32, u32, u32), threshold: u8) -> Vec<Blob> {
    let (ru, rv, rw, rh) = roi;
    let w = gray.width() as usize;
    let mut visited = vec![false; w * gray.height() as usize];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();

    for v in rv..rv + rh {
        for u in ru..ru + rw {
            let idx = v as usize * w + u as usize;
            if visited[idx] || gray.get_pixel(u, v).0[0] >= threshold {
                continue;
            }
            visited[idx] = true;
            stack.push((u, v));
            let mut b = Blob {
                area: 0,
                min_u: u,
                max_u: u,
                min_v: v,
                max_v: v,
                sum_u: 0.0,
                sum_v: 0.0,
                sum_luma: 0.0,
            };
            while let Some((pu, pv)) = stack.pop() {
                b.area += 1;
                b.min_u = b.min_u.min(pu);
                b.max_u = b.max_u.max(pu);
                b.min_v = b.min_v.min(pv);
                b.max_v = b.max_v.max(pv);
                b.sum_u += pu as f64 + 0.5;
                b.sum_v += pv as f64 + 0.5;
                b.sum_luma += gray.get_pixel(pu, pv).0[0] as f64;
                for dv in -1i32..=1 {
                    for du in -1i32..=1 {
                        if du == 0 && dv == 0 {
                            continue;
                        }
                        let nu = pu as i32 + du;
                        let nv = pv as i32 + dv;
                        if nu < ru as i32
                            || nv < rv as i32
                            || nu >= (ru + rw) as i32
                            || nv >= (rv + rh) as i32
                        {
                            continue;
                        }
                        let (nu, nv) = (nu as u32, nv as u32);
                        let nidx = nv as usize * w + nu as usize;
                        if !visited[nidx] && gray.get_pixel(nu, nv).0[0] < threshold {
                            visited[nidx] = true;
                            stack.push((nu, nv));
                        }
                    }
                }
            }
            blobs.push(b);
        }
    }
    blobs
}

/// Radial edge extraction: rays from the pupil center, strongest
/// dark-to-bright gradient per ray, sub-pixel refined by a parabola.
/// Points are in region-local coordinates.
pub fn radial_edge_points(region: &EyeRegion, n_rays: usize) -> Vec<(f64, f64)> {
    let (u0, v0, w, h) = region.bbox;
    let pc = (
        region.pupil_center.0 - u0 as f64,
        region.pupil_center.1 - v0 as f64,
    );
    // Start beyond the pupil edge so the bright device reflection inside
    // the pupil never wins.
    let r_min = (region.pupil_major * 0.6).max(2.0);
    let r_max = (w.min(h) as f64 / 2.0) * 0.98;
    if r_max <= r_min + 4.0 {
        return Vec::new();
    }

    let sample = |x: f64, y: f64| -> Option<f64> {
        if x < 0.5 || y < 0.5 || x >= w as f64 - 0.5 || y >= h as f64 - 0.5 {
            return None;
        }
        let xf = x - 0.5;
        let yf = y - 0.5;
        let x0 = xf.floor() as u32;
        let y0 = yf.floor() as u32;
        let fx = xf - x0 as f64;
        let fy = yf - y0 as f64;
        let g = |u: u32, v: u32| region.gray.get_pixel(u.min(w - 1), v.min(h - 1)).0[0] as f64;
        Some(
            g(x0, y0) * (1.0 - fx) * (1.0 - fy)
                + g(x0 + 1, y0) * fx * (1.0 - fy)
                + g(x0, y0 + 1) * (1.0 - fx) * fy
                + g(x0 + 1, y0 + 1) * fx * fy,
        )
    };

    let mut points = Vec::with_capacity(n_rays);
    let steps = (r_max - r_min).floor() as usize;
    let mut profile: Vec<f64> = Vec::with_capacity(steps);
    for i in 0..n_rays {
        let psi = i as f64 / n_rays as f64 * std::f64::consts::TAU;
        let (sy, sx) = psi.sin_cos();
        profile.clear();
        for k in 0..steps {
            let r = r_min + k as f64;
            match sample(pc.0 + r * sx, pc.1 + r * sy) {
                Some(val) => profile.push(val),
                None => break,
            }
        }
        if profile.len() < 5 {
            continue;
        }
        // Central-difference gradient over a lightly smoothed profile.
        let smooth = |k: usize| (profile[k - 1] + profile[k] + profile[k + 1]) / 3.0;
        let mut best_k = 0usize;
        let mut best_g = 0.0f64;
        for k in 2..profile.len() - 2 {
            let grad = smooth(k + 1) - smooth(k - 1);
            if grad > best_g {
                best_g = grad;
                best_k = k;
            }
        }
        if best_g < 16.0 || best_k < 2 || best_k + 2 >= profile.len() {
            continue;
        }
        // Parabolic sub-pixel refinement on the gradient peak.
        let g = |k: usize| smooth(k + 1) - smooth(k - 1);
        let (gm, g0, gp) = (g(best_k - 1), g(best_k), g(best_k + 1));
        let denom = gm - 2.0 * g0 + gp;
        let delta = if denom.abs() > 1e-12 {
            (0.5 * (gm - gp) / denom).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let r = r_min + (best_k as f64 + delta);
        points.push((pc.0 + r * sx, pc.1 + r * sy));
    }
    points
}

/// RANSAC ellipse fit over edge candidates. Deterministic for a fixed
/// seed: a block of sample sets spread uniformly over the candidate list
/// runs before random sampling starts. Returns the model refit on all
/// inliers and its inlier fraction, in the input coordinate frame.
pub fn ransac_fit_ellipse(
    points: &[(f64, f64)],
    threshold: f64,
    cfg: &RansacConfig,
) -> Result<(Ellipse2D, f64)> {
    if points.len() < 5 {
        return Err(Error::LimbusNotFound);
    }
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..n).collect();

    let mut best: Option<(usize, Ellipse2D)> = None;
    let prefix = (cfg.iterations as usize / 5).min(n);
    for it in 0..cfg.iterations as usize {
        let sample: [usize; 5] = if it < prefix {
            // Predefined sample sets: five indices spread uniformly,
            // rotating the starting offset each iteration.
            std::array::from_fn(|m| (it + m * n / 5) % n)
        } else {
            indices.shuffle(&mut rng);
            std::array::from_fn(|m| indices[m])
        };
        let subset: Vec<(f64, f64)> = sample.iter().map(|&i| points[i]).collect();
        let Ok(e) = ellipse_from_points(&subset) else {
            continue;
        };
        if !e.semi_major.is_finite() || e.semi_minor < 1.0 {
            continue;
        }
        let inliers = points
            .iter()
            .filter(|p| e.approx_distance(**p) <= threshold)
            .count();
        if best.as_ref().map_or(true, |(c, _)| inliers > *c) {
            best = Some((inliers, e));
        }
    }

    let (_, model) = best.ok_or(Error::LimbusNotFound)?;
    // Refit on all inliers of the best model.
    let inlier_pts: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|p| model.approx_distance(*p) <= threshold)
        .collect();
    let refit = if inlier_pts.len() >= 5 {
        ellipse_from_points(&inlier_pts).unwrap_or(model)
    } else {
        model
    };
    let final_inliers = points
        .iter()
        .filter(|p| refit.approx_distance(**p) <= threshold)
        .count();
    Ok((refit, final_inliers as f64 / n as f64))
}

/// Detects the limbus ellipse in the eye region. The returned ellipse is
/// in full-image pixel coordinates.
pub fn detect_limbus(region: &EyeRegion, cfg: &RansacConfig) -> Result<(Ellipse2D, f64)> {
    let points = radial_edge_points(region, 180);
    if points.is_empty() {
        return Err(Error::LimbusNotFound);
    }
    let region_size = region.bbox.2.max(region.bbox.3) as f64;
    let threshold = (cfg.inlier_threshold * region_size / 1000.0).max(0.5);
    let (local, fraction) = ransac_fit_ellipse(&points, threshold, cfg)?;
    if fraction < cfg.min_inlier_fraction {
        return Err(Error::LimbusNotFound);
    }
    // Sanity: the limbus must enclose the pupil and fit the region.
    if local.semi_major * 2.0 > region_size * 1.2 || local.semi_major * 2.0 < region.pupil_major {
        return Err(Error::LimbusNotFound);
    }
    let e = Ellipse2D {
        center: (
            local.center.0 + region.bbox.0 as f64,
            local.center.1 + region.bbox.1 as f64,
        ),
        ..local
    };
    Ok((e, fraction))
}
