//! Direct least-squares ellipse fitting.
//!
//! Implements the ellipse-specific constrained conic fit (Fitzgibbon's
//! constraint `4*A*C - B^2 = 1` via the reduced 3x3 eigenproblem of Halir
//! and Flusser), plus the conversion from general conic coefficients to
//! center/axes/rotation form. The fit is exact on noise-free samples and
//! always returns an ellipse or an error, never a hyperbola.

use nalgebra::{Matrix3, Vector3};

use super::Ellipse2D;
use crate::error::{Error, Result};

/// General conic `A x^2 + B xy + C y^2 + D x + E y + F = 0`.
#[derive(Debug, Clone, Copy)]
pub struct ConicCoeffs(pub [f64; 6]);

impl ConicCoeffs {
    /// Extracts coefficients from a symmetric conic matrix
    /// `[[A, B/2, D/2], [B/2, C, E/2], [D/2, E/2, F]]`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        ConicCoeffs([
            m[(0, 0)],
            2.0 * m[(0, 1)],
            m[(1, 1)],
            2.0 * m[(0, 2)],
            2.0 * m[(1, 2)],
            m[(2, 2)],
        ])
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        let [a, b, c, d, e, f] = self.0;
        a * x * x + b * x * y + c * y * y + d * x + e * y + f
    }
}

/// Fits an ellipse to `points` (>= 5, non-degenerate) by direct least
/// squares with the ellipse constraint.
pub fn ellipse_from_points(points: &[(f64, f64)]) -> Result<Ellipse2D> {
    if points.len() < 5 {
        return Err(Error::DegenerateInput(format!(
            "need >= 5 points, got {}",
            points.len()
        )));
    }

    // Isotropic normalization for conditioning: centroid to origin, mean
    // radius to sqrt(2).
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.0 - mx).powi(2) + (p.1 - my).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist < 1e-12 {
        return Err(Error::DegenerateInput("coincident points".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;

    // Scatter matrices of the quadratic (x^2, xy, y^2) and linear (x, y, 1)
    // design blocks.
    let mut s1 = Matrix3::zeros();
    let mut s2 = Matrix3::zeros();
    let mut s3 = Matrix3::zeros();
    for p in points {
        let x = (p.0 - mx) * s;
        let y = (p.1 - my) * s;
        let d1 = Vector3::new(x * x, x * y, y * y);
        let d2 = Vector3::new(x, y, 1.0);
        s1 += d1 * d1.transpose();
        s2 += d1 * d2.transpose();
        s3 += d2 * d2.transpose();
    }

    let s3_inv = s3
        .try_inverse()
        .ok_or_else(|| Error::DegenerateInput("collinear or rank-deficient points".into()))?;
    let t = -s3_inv * s2.transpose();
    let m0 = s1 + s2 * t;
    // Reduced system: premultiply by the inverse of the constraint matrix.
    let m = Matrix3::from_rows(&[
        (m0.row(2) / 2.0).into_owned(),
        (-m0.row(1)).into_owned(),
        (m0.row(0) / 2.0).into_owned(),
    ]);

    // The ellipse solution is the eigenvector of `m` satisfying
    // 4*a*c - b^2 > 0; exactly one real eigenvalue yields it.
    let mut quad: Option<Vector3<f64>> = None;
    let eigs = m.complex_eigenvalues();
    let scale = m.norm().max(1.0);
    for i in 0..3 {
        let lambda = eigs[i];
        if lambda.im.abs() > 1e-7 * scale {
            continue;
        }
        let a = m - Matrix3::identity() * lambda.re;
        let svd = a.svd(false, true);
        let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
        let v = v_t.row(2).transpose();
        let constraint = 4.0 * v[0] * v[2] - v[1] * v[1];
        if constraint > 1e-12 {
            quad = Some(v);
            break;
        }
    }
    let quad =
        quad.ok_or_else(|| Error::DegenerateInput("no elliptical conic fits the points".into()))?;
    let lin = t * quad;

    let conic = ConicCoeffs([quad[0], quad[1], quad[2], lin[0], lin[1], lin[2]]);
    let e = conic_to_ellipse(&conic)?;
    // Undo the normalization: isotropic, so axes and rotation map directly.
    Ok(Ellipse2D::new(
        (mx + e.center.0 / s, my + e.center.1 / s),
        e.semi_major / s,
        e.semi_minor / s,
        e.rotation,
    ))
}

/// Converts general conic coefficients to an `Ellipse2D`, rejecting
/// non-elliptical or degenerate conics.
pub fn conic_to_ellipse(conic: &ConicCoeffs) -> Result<Ellipse2D> {
    let [a, b, c, d, e, _] = conic.0;
    let denom = b * b - 4.0 * a * c;
    if !denom.is_finite() || denom >= 0.0 {
        return Err(Error::DegenerateInput("conic is not an ellipse".into()));
    }
    let xc = (2.0 * c * d - b * e) / denom;
    let yc = (2.0 * a * e - b * d) / denom;
    let mu = conic.evaluate(xc, yc);

    // Eigen-decomposition of the quadratic form [[a, b/2], [b/2, c]].
    let half_tr = (a + c) / 2.0;
    let disc = (((a - c) / 2.0).powi(2) + (b / 2.0).powi(2)).sqrt();
    let l1 = half_tr - disc;
    let l2 = half_tr + disc;

    let ax1_sq = -mu / l1;
    let ax2_sq = -mu / l2;
    if !(ax1_sq > 0.0 && ax2_sq > 0.0) {
        return Err(Error::DegenerateInput("imaginary or degenerate ellipse".into()));
    }

    let axis_dir = |lambda: f64| -> (f64, f64) {
        let vx = b / 2.0;
        let vy = lambda - a;
        if vx.abs() + vy.abs() > 1e-12 * (a.abs() + c.abs() + b.abs()).max(1.0) {
            (vx, vy)
        } else if a <= c {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        }
    };

    // Larger squared-axis wins the major slot; its eigenvector sets phi.
    let (major_sq, minor_sq, dir) = if ax1_sq >= ax2_sq {
        (ax1_sq, ax2_sq, axis_dir(l1))
    } else {
        (ax2_sq, ax1_sq, axis_dir(l2))
    };
    let rotation = dir.1.atan2(dir.0);

    Ok(Ellipse2D::new(
        (xc, yc),
        major_sq.sqrt(),
        minor_sq.sqrt(),
        rotation,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample(e: &Ellipse2D, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| e.point_at(i as f64 / n as f64 * std::f64::consts::TAU))
            .collect()
    }

    #[test]
    fn fits_exact_circle() {
        let truth = Ellipse2D::new((500.0, 500.0), 100.0, 100.0, 0.0);
        let fit = ellipse_from_points(&sample(&truth, 10)).unwrap();
        assert_relative_eq!(fit.center.0, 500.0, epsilon = 1e-6);
        assert_relative_eq!(fit.center.1, 500.0, epsilon = 1e-6);
        assert_relative_eq!(fit.semi_major, 100.0, max_relative = 1e-6);
        assert_relative_eq!(fit.semi_minor, 100.0, max_relative = 1e-6);
    }

    #[test]
    fn fits_exact_rotated_ellipse() {
        let phi = 30f64.to_radians();
        let truth = Ellipse2D::new((220.0, -40.0), 100.0, 80.0, phi);
        let fit = ellipse_from_points(&sample(&truth, 10)).unwrap();
        assert_relative_eq!(fit.center.0, 220.0, max_relative = 1e-6, epsilon = 1e-6);
        assert_relative_eq!(fit.center.1, -40.0, max_relative = 1e-6, epsilon = 1e-6);
        assert_relative_eq!(fit.semi_major, 100.0, max_relative = 1e-6);
        assert_relative_eq!(fit.semi_minor, 80.0, max_relative = 1e-6);
        assert_relative_eq!(fit.rotation, phi, max_relative = 1e-6);
    }

    #[test]
    fn rejects_collinear_points() {
        let pts: Vec<_> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert!(matches!(
            ellipse_from_points(&pts),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn rejects_too_few_points() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        assert!(ellipse_from_points(&pts).is_err());
    }

    #[test]
    fn permutation_invariant() {
        let truth = Ellipse2D::new((10.0, 20.0), 50.0, 30.0, 1.0);
        let pts = sample(&truth, 12);
        let mut shuffled = pts.clone();
        shuffled.reverse();
        shuffled.swap(0, 5);
        let a = ellipse_from_points(&pts).unwrap();
        let b = ellipse_from_points(&shuffled).unwrap();
        assert_relative_eq!(a.semi_major, b.semi_major, max_relative = 1e-9);
        assert_relative_eq!(a.semi_minor, b.semi_minor, max_relative = 1e-9);
        assert_relative_eq!(a.center.0, b.center.0, epsilon = 1e-9);
    }

    #[test]
    fn conic_roundtrip() {
        let e = Ellipse2D::new((3.0, -7.0), 9.0, 4.0, 0.9);
        // Build the conic from sampled points, convert back.
        let fit = ellipse_from_points(&sample(&e, 16)).unwrap();
        assert_relative_eq!(fit.rotation, 0.9, max_relative = 1e-6);
        assert_relative_eq!(fit.semi_major, 9.0, max_relative = 1e-6);
    }
}
