//! Odd-dimension (n = 3) mixed-data inversion over the sphere.
//!
//! In three dimensions the backprojection formula evaluates the data at the
//! travel time `t = |x - y| <= 2 rho` only, so it is inherently finite-time:
//!
//! `f(x) = 1/(2 pi b) int_{|y-z|=rho} u_{a,b}(y, |x-y|) / |x-y| dsigma(y)`.
//!
//! Forward data comes from the closed-form spherical means of Gaussian sums
//! ([`crate::sphmeans`]); no grid solver is involved. The companion range
//! condition `int u(y, |x-y|)/|x-y| dsigma = 0` is what makes the formula
//! independent of the Dirichlet weight `a`.

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::sphmeans::{semianalytic_dnu_u_3d, semianalytic_u_3d, GaussianSum3};

/// Quadrature nodes and weights on the sphere of radius `rho` about `center`.
///
/// Product rule: Gauss-Legendre in the polar cosine times a uniform
/// azimuthal grid. Exact for spherical harmonics up to the declared order.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub rho: f64,
    pub center: [f64; 3],
    pub nodes: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Largest spherical-harmonic degree integrated exactly.
    pub order: usize,
}

impl SphereQuadrature {
    /// Build the product rule with `n_polar` Gauss-Legendre nodes and
    /// `n_azimuth` uniform azimuth samples.
    pub fn product(rho: f64, center: [f64; 3], n_polar: usize, n_azimuth: usize) -> Result<SphereQuadrature> {
        if !(rho > 0.0) || n_polar < 2 || n_azimuth < 4 {
            return Err(Error::InvalidArgument(format!(
                "sphere rule needs rho > 0, n_polar >= 2, n_azimuth >= 4; got ({rho}, {n_polar}, {n_azimuth})"
            )));
        }
        let (mu, wmu) = gauss_legendre(n_polar);
        let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        let waz = 2.0 * std::f64::consts::PI / n_azimuth as f64;
        for i in 0..n_polar {
            let st = (1.0 - mu[i] * mu[i]).sqrt();
            for j in 0..n_azimuth {
                let phi = (j as f64 + 0.5) * waz;
                nodes.push([
                    center[0] + rho * st * phi.cos(),
                    center[1] + rho * st * phi.sin(),
                    center[2] + rho * mu[i],
                ]);
                weights.push(rho * rho * wmu[i] * waz);
            }
        }
        Ok(SphereQuadrature {
            rho,
            center,
            nodes,
            weights,
            order: (2 * n_polar - 1).min(n_azimuth - 1),
        })
    }

    /// Default rule used by the experiments (>= 974 nodes).
    pub fn default_rule(rho: f64, center: [f64; 3]) -> SphereQuadrature {
        SphereQuadrature::product(rho, center, 22, 45).expect("valid default rule")
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn outward_normal(&self, k: usize) -> [f64; 3] {
        let y = self.nodes[k];
        [
            (y[0] - self.center[0]) / self.rho,
            (y[1] - self.center[1]) / self.rho,
            (y[2] - self.center[2]) / self.rho,
        ]
    }
}

fn check_point_inside(quad: &SphereQuadrature, x: [f64; 3]) -> Result<()> {
    let r = ((x[0] - quad.center[0]).powi(2)
        + (x[1] - quad.center[1]).powi(2)
        + (x[2] - quad.center[2]).powi(2))
    .sqrt();
    if r >= quad.rho {
        return Err(Error::Precondition(format!(
            "evaluation point at radius {r:.4} not strictly inside the sphere of radius {}",
            quad.rho
        )));
    }
    Ok(())
}

fn check_support(spec: &GaussianSum3, quad: &SphereQuadrature) -> Result<()> {
    for g in &spec.terms {
        let d = ((g.center[0] - quad.center[0]).powi(2)
            + (g.center[1] - quad.center[1]).powi(2)
            + (g.center[2] - quad.center[2]).powi(2))
        .sqrt();
        if d + 3.0 * g.width >= quad.rho {
            return Err(Error::OutOfSupport(format!(
                "gaussian reaches radius {:.4}, sphere radius {}",
                d + 3.0 * g.width,
                quad.rho
            )));
        }
    }
    Ok(())
}

/// Mixed-data inversion at one interior point.
pub fn reconstruct_mixed_3d(
    spec: &GaussianSum3,
    quad: &SphereQuadrature,
    a: f64,
    b: f64,
    x: [f64; 3],
) -> Result<f64> {
    if b == 0.0 {
        return Err(Error::InvalidWeights("mixed 3D inversion needs b != 0".into()));
    }
    check_point_inside(quad, x)?;
    check_support(spec, quad)?;
    let mut acc = 0.0;
    for k in 0..quad.len() {
        let y = quad.nodes[k];
        let t = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
        let nu = quad.outward_normal(k);
        let uab = a * semianalytic_u_3d(spec, y, t) + b * semianalytic_dnu_u_3d(spec, y, nu, t);
        acc += quad.weights[k] * uab / t;
    }
    Ok(acc / (2.0 * std::f64::consts::PI * b))
}

/// Range-condition value `int u(y, |x-y|)/|x-y| dsigma(y)`; vanishes for
/// data of the wave equation with initial data `(f, 0)`.
pub fn range_condition_3d(spec: &GaussianSum3, quad: &SphereQuadrature, x: [f64; 3]) -> Result<f64> {
    check_point_inside(quad, x)?;
    check_support(spec, quad)?;
    let mut acc = 0.0;
    for k in 0..quad.len() {
        let y = quad.nodes[k];
        let t = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
        acc += quad.weights[k] * semianalytic_u_3d(spec, y, t) / t;
    }
    Ok(acc)
}
