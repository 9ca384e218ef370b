//! Initial-pressure phantoms: compactly supported primitives rasterized onto
//! a grid, plus analytic Gaussian sums for the oracle layer.
//!
//! Disk, annulus and ellipse edges are mollified by a C-infinity step of
//! configurable width so the rasterized field is smooth; Gaussian primitives
//! are evaluated exactly and carry analytic gradient and Hessian, which the
//! spherical-mean oracles differentiate under the integral sign.

use crate::error::{Error, Result};
use crate::field::ScalarField2D;
use crate::grid::Grid2D;
use ndarray::Array2;

/// One phantom building block.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Primitive {
    Disk { center: [f64; 2], radius: f64, amplitude: f64 },
    Annulus { center: [f64; 2], r_inner: f64, r_outer: f64, amplitude: f64 },
    Ellipse { center: [f64; 2], semi_axes: [f64; 2], angle: f64, amplitude: f64 },
    Gaussian { center: [f64; 2], width: f64, amplitude: f64 },
}

impl Primitive {
    /// Radius of the disk about `center` that contains (numerically) all of
    /// the primitive's mass. Gaussians use the 3-sigma criterion.
    fn extent(&self) -> (/*center*/ [f64; 2], /*radius*/ f64) {
        match *self {
            Primitive::Disk { center, radius, .. } => (center, radius),
            Primitive::Annulus { center, r_outer, .. } => (center, r_outer),
            Primitive::Ellipse { center, semi_axes, .. } => {
                (center, semi_axes[0].max(semi_axes[1]))
            }
            Primitive::Gaussian { center, width, .. } => (center, 3.0 * width),
        }
    }
}

/// A list of primitives plus rasterization controls.
///
/// `edge_width` is the mollification width for the hard-edged shapes;
/// `support_margin` is the clearance that every primitive must keep from the
/// detector circle; `clamp_unit` clips rasterized values to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhantomSpec {
    pub primitives: Vec<Primitive>,
    pub edge_width: f64,
    pub support_margin: f64,
    pub clamp_unit: bool,
}

impl PhantomSpec {
    pub fn gaussians(list: Vec<([f64; 2], f64, f64)>) -> PhantomSpec {
        PhantomSpec {
            primitives: list
                .into_iter()
                .map(|(center, width, amplitude)| Primitive::Gaussian { center, width, amplitude })
                .collect(),
            edge_width: 0.0,
            support_margin: 0.05,
            clamp_unit: false,
        }
    }

    pub fn is_gaussian_only(&self) -> bool {
        self.primitives.iter().all(|p| matches!(p, Primitive::Gaussian { .. }))
    }

    /// Check that every primitive (edge mollification included) stays inside
    /// the ball of radius `rho - support_margin` about `z`.
    pub fn validate_support(&self, rho: f64, z: [f64; 2]) -> Result<()> {
        let allowed = rho - self.support_margin;
        for p in &self.primitives {
            let (c, r) = p.extent();
            let slack = match p {
                Primitive::Gaussian { .. } => 0.0,
                _ => self.edge_width,
            };
            let reach = ((c[0] - z[0]).powi(2) + (c[1] - z[1]).powi(2)).sqrt() + r + slack;
            if reach >= allowed {
                return Err(Error::OutOfSupport(format!(
                    "primitive reaches radius {reach:.4}, allowed {allowed:.4}"
                )));
            }
        }
        Ok(())
    }
}

/// C-infinity step: 0 for `t <= 0`, 1 for `t >= 1`, strictly monotone between.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Evaluate one primitive at a point (mollified edges for the hard shapes).
fn eval_primitive(p: &Primitive, w: f64, x: f64, y: f64) -> f64 {
    match *p {
        Primitive::Disk { center, radius, amplitude } => {
            let d = ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt();
            amplitude * smooth_step((radius - d) / w)
        }
        Primitive::Annulus { center, r_inner, r_outer, amplitude } => {
            let d = ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt();
            amplitude * (smooth_step((r_outer - d) / w) - smooth_step((r_inner - d) / w))
        }
        Primitive::Ellipse { center, semi_axes, angle, amplitude } => {
            let (s, c) = angle.sin_cos();
            let xr = c * (x - center[0]) + s * (y - center[1]);
            let yr = -s * (x - center[0]) + c * (y - center[1]);
            let q = ((xr / semi_axes[0]).powi(2) + (yr / semi_axes[1]).powi(2)).sqrt();
            let scale = semi_axes[0].min(semi_axes[1]);
            amplitude * smooth_step((1.0 - q) * scale / w)
        }
        Primitive::Gaussian { center, width, amplitude } => {
            let d2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
            amplitude * (-d2 / (width * width)).exp()
        }
    }
}

/// Rasterize a spec onto a grid.
///
/// The support constraint is validated against the grid's `rho` and center
/// first, so a spec that leaks outside the ball is rejected as a whole.
pub fn rasterize(spec: &PhantomSpec, grid: &Grid2D) -> Result<ScalarField2D> {
    spec.validate_support(grid.rho, grid.center)?;
    let w = spec.edge_width.max(1e-12);
    let mut data = Array2::<f64>::zeros((grid.n, grid.n));
    for (i, j, x, y) in grid.nodes() {
        let mut v = 0.0;
        for p in &spec.primitives {
            v += eval_primitive(p, w, x, y);
        }
        if spec.clamp_unit {
            v = v.clamp(0.0, 1.0);
        }
        data[[i, j]] = v;
    }
    Ok(ScalarField2D { grid: grid.clone(), data })
}

/// Analytic evaluation of a pure-Gaussian spec at a point.
pub fn eval_analytic(spec: &PhantomSpec, point: [f64; 2]) -> Result<f64> {
    if !spec.is_gaussian_only() {
        return Err(Error::UnsupportedSpec(
            "analytic evaluation requires a Gaussian-only spec".into(),
        ));
    }
    let mut v = 0.0;
    for p in &spec.primitives {
        if let Primitive::Gaussian { center, width, amplitude } = p {
            let d2 = (point[0] - center[0]).powi(2) + (point[1] - center[1]).powi(2);
            v += amplitude * (-d2 / (width * width)).exp();
        }
    }
    Ok(v)
}

/// Analytic gradient of a pure-Gaussian spec.
pub fn eval_analytic_gradient(spec: &PhantomSpec, point: [f64; 2]) -> Result<[f64; 2]> {
    if !spec.is_gaussian_only() {
        return Err(Error::UnsupportedSpec(
            "analytic gradient requires a Gaussian-only spec".into(),
        ));
    }
    let mut g = [0.0, 0.0];
    for p in &spec.primitives {
        if let Primitive::Gaussian { center, width, amplitude } = p {
            let dx = point[0] - center[0];
            let dy = point[1] - center[1];
            let s2 = width * width;
            let e = amplitude * (-(dx * dx + dy * dy) / s2).exp();
            g[0] += -2.0 * dx / s2 * e;
            g[1] += -2.0 * dy / s2 * e;
        }
    }
    Ok(g)
}

/// Analytic Hessian (2x2, row-major [xx, xy, yx, yy]) of a pure-Gaussian spec.
pub fn eval_analytic_hessian(spec: &PhantomSpec, point: [f64; 2]) -> Result<[f64; 4]> {
    if !spec.is_gaussian_only() {
        return Err(Error::UnsupportedSpec(
            "analytic Hessian requires a Gaussian-only spec".into(),
        ));
    }
    let mut h = [0.0; 4];
    for p in &spec.primitives {
        if let Primitive::Gaussian { center, width, amplitude } = p {
            let dx = point[0] - center[0];
            let dy = point[1] - center[1];
            let s2 = width * width;
            let e = amplitude * (-(dx * dx + dy * dy) / s2).exp();
            let a = 4.0 / (s2 * s2);
            let b = 2.0 / s2;
            h[0] += e * (a * dx * dx - b);
            h[1] += e * a * dx * dy;
            h[2] += e * a * dy * dx;
            h[3] += e * (a * dy * dy - b);
        }
    }
    Ok(h)
}

/// The default head-like experiment phantom: a skull annulus plus four
/// interior inclusions, values in [0, 1], supported inside radius 0.95.
pub fn head_phantom() -> PhantomSpec {
    PhantomSpec {
        primitives: vec![
            Primitive::Annulus {
                center: [0.0, 0.0],
                r_inner: 0.68,
                r_outer: 0.80,
                amplitude: 1.0,
            },
            Primitive::Disk { center: [-0.22, 0.18], radius: 0.18, amplitude: 0.55 },
            Primitive::Disk { center: [0.20, 0.27], radius: 0.12, amplitude: 0.70 },
            Primitive::Ellipse {
                center: [0.12, -0.25],
                semi_axes: [0.28, 0.15],
                angle: -0.5,
                amplitude: 0.45,
            },
            Primitive::Disk { center: [-0.18, -0.30], radius: 0.08, amplitude: 0.85 },
        ],
        edge_width: 0.02,
        support_margin: 0.05,
        clamp_unit: true,
    }
}

/// Gaussian pair used by the oracle-validated tests: tight enough that the
/// tails at the unit circle are below 1e-11.
pub fn oracle_gaussians() -> PhantomSpec {
    PhantomSpec::gaussians(vec![([0.18, 0.05], 0.16, 1.0), ([-0.22, -0.12], 0.13, 0.8)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn gaussian_peak_at_grid_center() {
        let grid = build_grid(257, 1.0, [0.0, 0.0]).unwrap();
        let spec = PhantomSpec::gaussians(vec![([0.0, 0.0], 0.2, 1.0)]);
        let f = rasterize(&spec, &grid).unwrap();
        assert_eq!(f.data[[128, 128]], 1.0);
        let mx = f.data.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(mx, 1.0);
    }

    #[test]
    fn empty_spec_rasterizes_to_zero() {
        let grid = build_grid(33, 1.0, [0.0, 0.0]).unwrap();
        let spec = PhantomSpec {
            primitives: vec![],
            edge_width: 0.02,
            support_margin: 0.05,
            clamp_unit: true,
        };
        let f = rasterize(&spec, &grid).unwrap();
        assert!(f.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn head_phantom_range_and_support() {
        let grid = build_grid(129, 1.0, [0.0, 0.0]).unwrap();
        let f = rasterize(&head_phantom(), &grid).unwrap();
        let mut outside = 0.0;
        for (i, j, x, y) in grid.nodes() {
            let v = f.data[[i, j]];
            assert!((0.0..=1.0).contains(&v));
            if (x * x + y * y).sqrt() >= 0.95 {
                outside += v.abs();
            }
        }
        assert_eq!(outside, 0.0);
        let mx = f.data.iter().cloned().fold(f64::MIN, f64::max);
        assert!(mx > 0.9);
    }

    #[test]
    fn support_violation_rejected() {
        let grid = build_grid(33, 1.0, [0.0, 0.0]).unwrap();
        let spec = PhantomSpec {
            primitives: vec![Primitive::Disk {
                center: [0.5, 0.5],
                radius: 0.5,
                amplitude: 1.0,
            }],
            edge_width: 0.02,
            support_margin: 0.05,
            clamp_unit: true,
        };
        assert!(matches!(rasterize(&spec, &grid), Err(Error::OutOfSupport(_))));
    }

    #[test]
    fn analytic_values() {
        let spec = PhantomSpec::gaussians(vec![([0.0, 0.0], 1.0, 1.0)]);
        assert_eq!(eval_analytic(&spec, [0.0, 0.0]).unwrap(), 1.0);
        let v = eval_analytic(&spec, [1.0, 0.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn analytic_symmetric_pair() {
        let spec =
            PhantomSpec::gaussians(vec![([0.3, 0.0], 0.25, 1.0), ([-0.3, 0.0], 0.25, 1.0)]);
        let v0 = eval_analytic(&spec, [0.0, 0.0]).unwrap();
        let expect = 2.0 * (-0.09f64 / 0.0625).exp();
        assert!((v0 - expect).abs() < 1e-15);
        let a = eval_analytic(&spec, [0.1, 0.2]).unwrap();
        let b = eval_analytic(&spec, [-0.1, 0.2]).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn analytic_rejects_non_gaussian() {
        let spec = head_phantom();
        assert!(matches!(
            eval_analytic(&spec, [0.0, 0.0]),
            Err(Error::UnsupportedSpec(_))
        ));
    }

    #[test]
    fn raster_matches_analytic_for_gaussians() {
        let grid = build_grid(65, 1.0, [0.0, 0.0]).unwrap();
        let spec = oracle_gaussians();
        let f = rasterize(&spec, &grid).unwrap();
        for (i, j, x, y) in grid.nodes() {
            let a = eval_analytic(&spec, [x, y]).unwrap();
            assert!((f.data[[i, j]] - a).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let spec = oracle_gaussians();
        let p = [0.21, -0.07];
        let h = 1e-6;
        let g = eval_analytic_gradient(&spec, p).unwrap();
        let gx = (eval_analytic(&spec, [p[0] + h, p[1]]).unwrap()
            - eval_analytic(&spec, [p[0] - h, p[1]]).unwrap())
            / (2.0 * h);
        let gy = (eval_analytic(&spec, [p[0], p[1] + h]).unwrap()
            - eval_analytic(&spec, [p[0], p[1] - h]).unwrap())
            / (2.0 * h);
        assert!((g[0] - gx).abs() < 1e-8);
        assert!((g[1] - gy).abs() < 1e-8);
        let hess = eval_analytic_hessian(&spec, p).unwrap();
        let hxy = (eval_analytic_gradient(&spec, [p[0], p[1] + h]).unwrap()[0]
            - eval_analytic_gradient(&spec, [p[0], p[1] - h]).unwrap()[0])
            / (2.0 * h);
        assert!((hess[1] - hxy).abs() < 1e-7);
    }
}
