//! Device and pointer detection in the unwrapped corneal texture.
//!
//! Detection is classic color segmentation: HSV gates select candidate
//! pixels among the valid (on-cap) texture pixels, connected components
//! group them, and the largest component above a minimum area wins. The
//! pointer in finger mode instead grows a flood fill from a skin-tone
//! seed, widening the color tolerance each iteration.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unwrap::UnwrappedCornea;

/// What a detection refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectKind {
    DeviceRect,
    Marker,
    Finger,
}

/// Which pixel space detections live in. The metric path detects in the
/// unwrapped texture; the pixel-space fallback may run on the raw image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PixelSpace {
    UnwrappedTexture,
    RawImage,
}

/// Device appearance gate: a saturated colored rectangle, or the bright
/// screen of a real device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeviceAppearance {
    ColoredRect,
    BrightScreen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointerMode {
    Marker,
    Finger,
}

/// A detected object with its key pixels in texture coordinates:
/// left-edge midpoint `L`, centroid `C`, right-edge midpoint `R`, with
/// `L.0 <= C.0 <= R.0`. All key pixels are valid under the unwrap mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedObject {
    pub kind: ObjectKind,
    pub key_left: (u32, u32),
    pub key_center: (u32, u32),
    pub key_right: (u32, u32),
    /// `(min_u, min_v, width, height)` in texture pixels.
    pub bbox: (u32, u32, u32, u32),
    /// Component area divided by bounding-box area.
    pub confidence: f64,
    pub space: PixelSpace,
}

/// HSV gates and area thresholds for all detectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionGates {
    pub red_hue_center: f64,
    pub red_hue_tol: f64,
    pub blue_hue_center: f64,
    pub blue_hue_tol: f64,
    pub min_saturation: f64,
    pub min_value: f64,
    /// Bright-screen gate (finger-mode device).
    pub bright_min_value: f64,
    pub bright_max_saturation: f64,
    /// Skin gate for the flood-fill seed.
    pub skin_hue_range: (f64, f64),
    pub skin_sat_range: (f64, f64),
    pub skin_min_value: f64,
    /// Minimum component area in texture pixels.
    pub min_area: u32,
    /// Flood-fill iterations for finger detection.
    pub flood_iterations: u32,
    /// Textures are upscaled by this factor before detection when the
    /// angular density drops below `upscale_below_k` px/degree.
    pub upscale_factor: u32,
    pub upscale_below_k: f64,
}

impl Default for DetectionGates {
    fn default() -> Self {
        DetectionGates {
            red_hue_center: 0.0,
            red_hue_tol: 15.0,
            blue_hue_center: 240.0,
            blue_hue_tol: 20.0,
            min_saturation: 0.4,
            min_value: 0.2,
            bright_min_value: 0.7,
            bright_max_saturation: 0.35,
            skin_hue_range: (5.0, 50.0),
            skin_sat_range: (0.12, 0.8),
            skin_min_value: 0.25,
            min_area: 3,
            flood_iterations: 8,
            upscale_factor: 2,
            upscale_below_k: 0.75,
        }
    }
}

/// RGB (0-255) to HSV with hue in degrees `[0, 360)`, s and v in `[0, 1]`.
pub fn rgb_to_hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta < 1e-12 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max < 1e-12 { 0.0 } else { delta / max };
    (h, s, max)
}

fn hue_within(h: f64, center: f64, tol: f64) -> bool {
    let d = (h - center).rem_euclid(360.0);
    d <= tol || d >= 360.0 - tol
}

struct Component {
    pixels: Vec<(u32, u32)>,
    min_u: u32,
    max_u: u32,
    min_v: u32,
    max_v: u32,
}

impl Component {
    fn area(&self) -> u32 {
        self.pixels.len() as u32
    }

    fn bbox(&self) -> (u32, u32, u32, u32) {
        (
            self.min_u,
            self.min_v,
            self.max_u - self.min_u + 1,
            self.max_v - self.min_v + 1,
        )
    }

    fn centroid(&self) -> (f64, f64) {
        let n = self.pixels.len() as f64;
        let su: f64 = self.pixels.iter().map(|p| p.0 as f64).sum();
        let sv: f64 = self.pixels.iter().map(|p| p.1 as f64).sum();
        (su / n, sv / n)
    }
}

/// 4-connected components of `mask` (row-major, `w` wide). The result is
/// independent of labeling order: components are defined by the mask alone
/// and selection sorts by `(area, min_v, min_u)`.
fn connected_components(mask: &[bool], w: u32, h: u32) -> Vec<Component> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for v in 0..h {
        for u in 0..w {
            let idx = (v * w + u) as usize;
            if seen[idx] || !mask[idx] {
                continue;
            }
            seen[idx] = true;
            stack.push((u, v));
            let mut comp = Component {
                pixels: Vec::new(),
                min_u: u,
                max_u: u,
                min_v: v,
                max_v: v,
            };
            while let Some((pu, pv)) = stack.pop() {
                comp.pixels.push((pu, pv));
                comp.min_u = comp.min_u.min(pu);
                comp.max_u = comp.max_u.max(pu);
                comp.min_v = comp.min_v.min(pv);
                comp.max_v = comp.max_v.max(pv);
                let neighbors = [
                    (pu.wrapping_sub(1), pv),
                    (pu + 1, pv),
                    (pu, pv.wrapping_sub(1)),
                    (pu, pv + 1),
                ];
                for (nu, nv) in neighbors {
                    if nu >= w || nv >= h {
                        continue;
                    }
                    let nidx = (nv * w + nu) as usize;
                    if mask[nidx] && !seen[nidx] {
                        seen[nidx] = true;
                        stack.push((nu, nv));
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

/// Working copy of the texture, optionally upscaled for detection at low
/// angular densities. Coordinates map back by integer division.
struct DetectImage {
    rgb: RgbImage,
    valid: Vec<bool>,
    factor: u32,
}

impl DetectImage {
    fn build(unwrapped: &UnwrappedCornea, gates: &DetectionGates) -> Self {
        let factor = if unwrapped.px_per_degree < gates.upscale_below_k {
            gates.upscale_factor.max(1)
        } else {
            1
        };
        if factor == 1 {
            return DetectImage {
                rgb: unwrapped.texture.clone(),
                valid: unwrapped.valid_mask.clone(),
                factor: 1,
            };
        }
        let (w, h) = (unwrapped.width(), unwrapped.height());
        let rgb = image::imageops::resize(
            &unwrapped.texture,
            w * factor,
            h * factor,
            image::imageops::FilterType::Triangle,
        );
        let mut valid = vec![false; (w * factor * h * factor) as usize];
        for v in 0..h * factor {
            for u in 0..w * factor {
                valid[(v * w * factor + u) as usize] = unwrapped.is_valid(u / factor, v / factor);
            }
        }
        DetectImage { rgb, valid, factor }
    }

    fn to_texture_px(&self, p: (u32, u32)) -> (u32, u32) {
        (p.0 / self.factor, p.1 / self.factor)
    }
}

/// Nearest valid texture pixel to `p`, searched in a small window.
fn snap_to_valid(unwrapped: &UnwrappedCornea, p: (u32, u32), radius: i64) -> Option<(u32, u32)> {
    if unwrapped.is_valid(p.0, p.1) {
        return Some(p);
    }
    let mut best: Option<(i64, (u32, u32))> = None;
    for dv in -radius..=radius {
        for du in -radius..=radius {
            let u = p.0 as i64 + du;
            let v = p.1 as i64 + dv;
            if u < 0 || v < 0 {
                continue;
            }
            let (u, v) = (u as u32, v as u32);
            if unwrapped.is_valid(u, v) {
                let d = du * du + dv * dv;
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, (u, v)));
                }
            }
        }
    }
    best.map(|(_, p)| p)
}

fn object_from_component(
    comp: &Component,
    kind: ObjectKind,
    detect: &DetectImage,
    unwrapped: &UnwrappedCornea,
    center_override: Option<(u32, u32)>,
) -> Result<DetectedObject> {
    // Left/right edge midpoints: mean v over the extreme columns.
    let edge_mid = |target_u: u32| -> (u32, u32) {
        let vs: Vec<u32> = comp
            .pixels
            .iter()
            .filter(|p| p.0 == target_u)
            .map(|p| p.1)
            .collect();
        let mean = vs.iter().map(|&v| v as f64).sum::<f64>() / vs.len() as f64;
        (target_u, mean.round() as u32)
    };
    let left = detect.to_texture_px(edge_mid(comp.min_u));
    let right = detect.to_texture_px(edge_mid(comp.max_u));
    let center = match center_override {
        Some(c) => detect.to_texture_px(c),
        None => {
            let (cu, cv) = comp.centroid();
            detect.to_texture_px((cu.round() as u32, cv.round() as u32))
        }
    };

    let snap = |p: (u32, u32)| {
        snap_to_valid(unwrapped, p, 3).ok_or_else(|| Error::ObjectNotFound("key pixel off cap".into()))
    };
    let key_left = snap(left)?;
    let key_right = snap(right)?;
    let mut key_center = snap(center)?;
    // Key pixels keep their ordering invariant after snapping.
    key_center.0 = key_center.0.clamp(key_left.0, key_right.0);

    let (bu, bv, bw, bh) = comp.bbox();
    let f = detect.factor;
    let area = comp.area() as f64;
    Ok(DetectedObject {
        kind,
        key_left,
        key_center,
        key_right,
        bbox: (bu / f, bv / f, (bw + f - 1) / f, (bh + f - 1) / f),
        confidence: area / (bw as f64 * bh as f64),
        space: PixelSpace::UnwrappedTexture,
    })
}

fn largest_gated_component(
    detect: &DetectImage,
    gate: impl Fn([u8; 3]) -> bool,
    min_area: u32,
) -> Option<Component> {
    let (w, h) = detect.rgb.dimensions();
    let mut mask = vec![false; (w * h) as usize];
    for (i, px) in detect.rgb.pixels().enumerate() {
        mask[i] = detect.valid[i] && gate(px.0);
    }
    let comps = connected_components(&mask, w, h);
    comps
        .into_iter()
        .filter(|c| c.area() >= min_area)
        .max_by_key(|c| (c.area(), std::cmp::Reverse((c.min_v, c.min_u))))
}

/// Detects the device in the unwrapped texture: the largest connected
/// component passing the red-hue gate (colored-rect mode) or the
/// brightness gate (bright-screen mode). Key pixels are the left-edge
/// midpoint, centroid and right-edge midpoint.
pub fn detect_device(
    unwrapped: &UnwrappedCornea,
    appearance: DeviceAppearance,
    gates: &DetectionGates,
) -> Result<DetectedObject> {
    let detect = DetectImage::build(unwrapped, gates);
    let g = *gates;
    let gate = move |rgb: [u8; 3]| -> bool {
        let (h, s, v) = rgb_to_hsv(rgb);
        match appearance {
            DeviceAppearance::ColoredRect => {
                hue_within(h, g.red_hue_center, g.red_hue_tol)
                    && s >= g.min_saturation
                    && v >= g.min_value
            }
            DeviceAppearance::BrightScreen => v >= g.bright_min_value && s <= g.bright_max_saturation,
        }
    };
    let min_area = gates.min_area * detect.factor * detect.factor;
    let comp = largest_gated_component(&detect, gate, min_area)
        .ok_or_else(|| Error::ObjectNotFound("device".into()))?;
    object_from_component(&comp, ObjectKind::DeviceRect, &detect, unwrapped, None)
}

/// Detects the pointer. Marker mode gates on blue hue and takes the
/// largest component; finger mode grows a flood fill from the brightest
/// skin-tone pixel right of the device box, widening the tolerance each
/// iteration, and keys on the topmost pixel (the fingertip).
pub fn detect_pointer(
    unwrapped: &UnwrappedCornea,
    mode: PointerMode,
    gates: &DetectionGates,
    device: Option<&DetectedObject>,
) -> Result<DetectedObject> {
    let detect = DetectImage::build(unwrapped, gates);
    match mode {
        PointerMode::Marker => {
            let g = *gates;
            let gate = move |rgb: [u8; 3]| -> bool {
                let (h, s, v) = rgb_to_hsv(rgb);
                hue_within(h, g.blue_hue_center, g.blue_hue_tol)
                    && s >= g.min_saturation
                    && v >= g.min_value
            };
            let min_area = gates.min_area * detect.factor * detect.factor;
            let comp = largest_gated_component(&detect, gate, min_area)
                .ok_or_else(|| Error::ObjectNotFound("marker".into()))?;
            object_from_component(&comp, ObjectKind::Marker, &detect, unwrapped, None)
        }
        PointerMode::Finger => {
            let comp = flood_fill_finger(&detect, gates, device)
                .ok_or_else(|| Error::ObjectNotFound("finger".into()))?;
            // Fingertip: topmost row of the component, mean u.
            let top_v = comp.min_v;
            let us: Vec<u32> = comp
                .pixels
                .iter()
                .filter(|p| p.1 == top_v)
                .map(|p| p.0)
                .collect();
            let tip_u = (us.iter().map(|&u| u as f64).sum::<f64>() / us.len() as f64).round() as u32;
            object_from_component(
                &comp,
                ObjectKind::Finger,
                &detect,
                unwrapped,
                Some((tip_u, top_v)),
            )
        }
    }
}

/// Iterative flood fill: seed at the brightest skin-hue pixel right of
/// the device, then grow with per-iteration widened HSV tolerance until
/// the component is large enough.
fn flood_fill_finger(
    detect: &DetectImage,
    gates: &DetectionGates,
    device: Option<&DetectedObject>,
) -> Option<Component> {
    let (w, h) = detect.rgb.dimensions();
    let min_u = device.map_or(0, |d| (d.bbox.0 + d.bbox.2) * detect.factor);

    // Seed: brightest skin-gated pixel to the right of the device box.
    let mut seed: Option<((u32, u32), f64)> = None;
    for v in 0..h {
        for u in min_u..w {
            let idx = (v * w + u) as usize;
            if !detect.valid[idx] {
                continue;
            }
            let (hh, ss, vv) = rgb_to_hsv(detect.rgb.get_pixel(u, v).0);
            if hh >= gates.skin_hue_range.0
                && hh <= gates.skin_hue_range.1
                && ss >= gates.skin_sat_range.0
                && ss <= gates.skin_sat_range.1
                && vv >= gates.skin_min_value
                && seed.map_or(true, |(_, best)| vv > best)
            {
                seed = Some(((u, v), vv));
            }
        }
    }
    let ((su, sv), _) = seed?;
    let seed_hsv = rgb_to_hsv(detect.rgb.get_pixel(su, sv).0);

    let min_area = gates.min_area * detect.factor * detect.factor;
    for it in 0..gates.flood_iterations {
        let t = it as f64;
        let hue_tol = 12.0 + 5.0 * t;
        let sat_tol = 0.12 + 0.05 * t;
        let val_tol = 0.15 + 0.06 * t;
        let mut mask = vec![false; (w * h) as usize];
        for v in 0..h {
            for u in 0..w {
                let idx = (v * w + u) as usize;
                if !detect.valid[idx] {
                    continue;
                }
                let (hh, ss, vv) = rgb_to_hsv(detect.rgb.get_pixel(u, v).0);
                mask[idx] = hue_within(hh, seed_hsv.0, hue_tol)
                    && (ss - seed_hsv.1).abs() <= sat_tol
                    && (vv - seed_hsv.2).abs() <= val_tol;
            }
        }
        let comps = connected_components(&mask, w, h);
        let with_seed = comps
            .into_iter()
            .find(|c| c.pixels.iter().any(|&p| p == (su, sv)));
        if let Some(c) = with_seed {
            if c.area() >= min_area {
                return Some(c);
            }
        }
    }
    None
}

/// Relative offset `pointer.C - device.C` in pixels of whichever space the
/// detections live in. This is the cheap fallback when no metric distance
/// is needed and unwrapping/reconstruction can be skipped.
pub fn pixel_space_offset(device: &DetectedObject, pointer: &DetectedObject) -> (f64, f64, PixelSpace) {
    debug_assert_eq!(device.space, pointer.space);
    (
        pointer.key_center.0 as f64 - device.key_center.0 as f64,
        pointer.key_center.1 as f64 - device.key_center.1 as f64,
        device.space,
    )
}
