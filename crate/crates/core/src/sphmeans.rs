//! Semi-analytic oracle layer built on circular and spherical means of
//! Gaussian sums.
//!
//! Everything here is independent of the FFT forward solver and of the
//! discrete filter matrices: means are computed by spectrally convergent
//! trapezoid quadrature of the analytic integrands, wave values by
//! differentiating the Abel-type solution representation under the integral
//! sign, and spherical means are recovered from traces through the Abel
//! relations. The reconstruction modules are validated against this layer.
//!
//! All oracles are restricted to Gaussian-sum phantoms so that every mean,
//! gradient and Hessian has an analytic integrand.

use crate::error::{Error, Result};
use crate::grid::DetectorGeometry;
use crate::phantom::{
    eval_analytic_gradient, eval_analytic_hessian, PhantomSpec, Primitive,
};
use crate::quad::{adaptive_simpson, gauss_legendre, periodic_mean};
use ndarray::Array2;
use std::path::Path;

/// Relative tolerance for the adaptive trapezoid circle means.
const MEAN_TOL: f64 = 1e-12;
/// Gaussians are treated as supported within this many widths of the center.
const SUPPORT_SIGMAS: f64 = 6.5;
/// Gauss-Legendre order for the Abel-type time integrals.
const GL_ORDER: usize = 128;

fn gaussian_list(spec: &PhantomSpec) -> Result<Vec<([f64; 2], f64, f64)>> {
    if !spec.is_gaussian_only() {
        return Err(Error::UnsupportedSpec(
            "spherical-mean oracles require a Gaussian-only spec".into(),
        ));
    }
    Ok(spec
        .primitives
        .iter()
        .map(|p| match *p {
            Primitive::Gaussian { center, width, amplitude } => (center, width, amplitude),
            _ => unreachable!(),
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Circular means (n = 2)
// ---------------------------------------------------------------------------

/// Mean of `f` over the circle of radius `r` about `x`:
/// `(1/2pi) int f(x + r w(theta)) dtheta`, by adaptive trapezoid quadrature.
pub fn circle_mean(spec: &PhantomSpec, x: [f64; 2], r: f64) -> Result<f64> {
    let gs = gaussian_list(spec)?;
    if r < 0.0 {
        return Err(Error::InvalidArgument(format!("negative radius {r}")));
    }
    Ok(gs
        .iter()
        .map(|&(c, s, a)| single_circle_mean(c, s, a, x, r))
        .sum())
}

fn single_circle_mean(c: [f64; 2], s: f64, a: f64, x: [f64; 2], r: f64) -> f64 {
    let s2 = s * s;
    let f = move |th: f64| {
        let (sn, cs) = th.sin_cos();
        let dx = x[0] + r * cs - c[0];
        let dy = x[1] + r * sn - c[1];
        (-(dx * dx + dy * dy) / s2).exp()
    };
    a * periodic_mean(&f, MEAN_TOL)
}

/// Radial derivative of the circle mean, `d/dr M f(x, r)`.
pub fn circle_mean_radial_derivative(spec: &PhantomSpec, x: [f64; 2], r: f64) -> Result<f64> {
    gaussian_list(spec)?;
    let spec = spec.clone();
    Ok(periodic_mean(
        &move |th: f64| {
            let (sn, cs) = th.sin_cos();
            let g = eval_analytic_gradient(&spec, [x[0] + r * cs, x[1] + r * sn]).unwrap();
            g[0] * cs + g[1] * sn
        },
        MEAN_TOL,
    ))
}

/// Weighted spherical mean `M_nu f(y, r)`: the directional derivative of the
/// circle mean in the center variable along `nu`.
pub fn circle_mean_normal_derivative(
    spec: &PhantomSpec,
    y: [f64; 2],
    nu: [f64; 2],
    r: f64,
) -> Result<f64> {
    gaussian_list(spec)?;
    let spec = spec.clone();
    Ok(periodic_mean(
        &move |th: f64| {
            let (sn, cs) = th.sin_cos();
            let g = eval_analytic_gradient(&spec, [y[0] + r * cs, y[1] + r * sn]).unwrap();
            g[0] * nu[0] + g[1] * nu[1]
        },
        MEAN_TOL,
    ))
}

/// `d/dr M_nu f(y, r)`; the integrand is the Hessian form `w^T H f nu`.
pub fn circle_mean_normal_radial(
    spec: &PhantomSpec,
    y: [f64; 2],
    nu: [f64; 2],
    r: f64,
) -> Result<f64> {
    gaussian_list(spec)?;
    let spec = spec.clone();
    Ok(periodic_mean(
        &move |th: f64| {
            let (sn, cs) = th.sin_cos();
            let h = eval_analytic_hessian(&spec, [y[0] + r * cs, y[1] + r * sn]).unwrap();
            cs * (h[0] * nu[0] + h[1] * nu[1]) + sn * (h[2] * nu[0] + h[3] * nu[1])
        },
        MEAN_TOL,
    ))
}

// ---------------------------------------------------------------------------
// Semi-analytic wave values (n = 2)
// ---------------------------------------------------------------------------

/// Integrate `d/dt int_0^t r m(r)/sqrt(t^2-r^2) dr` for one Gaussian bump
/// `m` supported in `[lo, hi]`, with `m` and `dm/dr` supplied as closures.
///
/// If the bump reaches the integration endpoint `r = t`, the substitution
/// `r = t sin(theta)` removes the square-root singularity and the time
/// derivative is taken under the integral; otherwise the integrand vanishes
/// near `r = t` and the derivative hits only the kernel.
fn dalembert_term<M, Mr>(lo: f64, hi: f64, t: f64, m: &M, m_r: &Mr) -> f64
where
    M: Fn(f64) -> f64,
    Mr: Fn(f64) -> f64,
{
    if t <= 0.0 || lo >= t {
        return 0.0;
    }
    let (nodes, weights) = gl_cache();
    if hi >= t {
        // singular-endpoint branch
        let th_lo = (lo / t).min(1.0).asin();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let c = 0.5 * (half_pi - th_lo);
        let mid = 0.5 * (half_pi + th_lo);
        let mut acc = 0.0;
        for i in 0..GL_ORDER {
            let th = mid + c * nodes[i];
            let sn = th.sin();
            let r = t * sn;
            acc += weights[i] * sn * (m(r) + t * sn * m_r(r));
        }
        acc * c
    } else {
        // regular branch: d/dt (t^2-r^2)^{-1/2} = -t (t^2-r^2)^{-3/2}
        let c = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for i in 0..GL_ORDER {
            let r = mid + c * nodes[i];
            let d2 = t * t - r * r;
            acc += weights[i] * (-r * m(r) * t / (d2 * d2.sqrt()));
        }
        acc * c
    }
}

fn gl_cache() -> (&'static [f64], &'static [f64]) {
    use std::sync::OnceLock;
    static CACHE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    let (n, w) = CACHE.get_or_init(|| gauss_legendre(GL_ORDER));
    (n, w)
}

/// Solution of the wave equation with initial data `(f, 0)` at `(x, t)`,
/// evaluated through `u = d/dt int_0^t r M f(x,r)/sqrt(t^2-r^2) dr`.
pub fn semianalytic_u_2d(spec: &PhantomSpec, x: [f64; 2], t: f64) -> Result<f64> {
    let gs = gaussian_list(spec)?;
    if t <= 0.0 {
        return crate::phantom::eval_analytic(spec, x);
    }
    let mut total = 0.0;
    for &(c, s, a) in &gs {
        let d = ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt();
        let lo = (d - SUPPORT_SIGMAS * s).max(0.0);
        let hi = d + SUPPORT_SIGMAS * s;
        let m = |r: f64| single_circle_mean(c, s, a, x, r);
        let spec_one = PhantomSpec::gaussians(vec![(c, s, a)]);
        let m_r = |r: f64| circle_mean_radial_derivative(&spec_one, x, r).unwrap();
        total += dalembert_term(lo, hi, t, &m, &m_r);
    }
    Ok(total)
}

/// Normal derivative of the solution at a boundary point:
/// same representation with `M f` replaced by `D_nu M f`.
pub fn semianalytic_dnu_u_2d(
    spec: &PhantomSpec,
    y: [f64; 2],
    nu: [f64; 2],
    t: f64,
) -> Result<f64> {
    let gs = gaussian_list(spec)?;
    if t <= 0.0 {
        let g = eval_analytic_gradient(spec, y)?;
        return Ok(g[0] * nu[0] + g[1] * nu[1]);
    }
    let mut total = 0.0;
    for &(c, s, a) in &gs {
        let d = ((y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2)).sqrt();
        let lo = (d - SUPPORT_SIGMAS * s).max(0.0);
        let hi = d + SUPPORT_SIGMAS * s;
        let spec_one = PhantomSpec::gaussians(vec![(c, s, a)]);
        let m = |r: f64| circle_mean_normal_derivative(&spec_one, y, nu, r).unwrap();
        let m_r = |r: f64| circle_mean_normal_radial(&spec_one, y, nu, r).unwrap();
        total += dalembert_term(lo, hi, t, &m, &m_r);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Spherical means and wave values (n = 3)
// ---------------------------------------------------------------------------

/// One 3D Gaussian `a * exp(-|p - c|^2 / s^2)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Gaussian3 {
    pub center: [f64; 3],
    pub width: f64,
    pub amplitude: f64,
}

/// Sum of 3D Gaussians; the only phantom family used in three dimensions.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianSum3 {
    pub terms: Vec<Gaussian3>,
}

impl GaussianSum3 {
    pub fn eval(&self, p: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|g| {
                let d2 = (p[0] - g.center[0]).powi(2)
                    + (p[1] - g.center[1]).powi(2)
                    + (p[2] - g.center[2]).powi(2);
                g.amplitude * (-d2 / (g.width * g.width)).exp()
            })
            .sum()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.terms.iter().map(|g| g.amplitude.abs()).fold(0.0, f64::max)
    }

    pub fn translated(&self, shift: [f64; 3]) -> GaussianSum3 {
        GaussianSum3 {
            terms: self
                .terms
                .iter()
                .map(|g| Gaussian3 {
                    center: [
                        g.center[0] + shift[0],
                        g.center[1] + shift[1],
                        g.center[2] + shift[2],
                    ],
                    ..*g
                })
                .collect(),
        }
    }
}

/// Closed-form mean of a unit Gaussian over the sphere of radius `r` whose
/// center is at distance `d` from the Gaussian center:
/// `exp(-(d^2+r^2)/s^2) sinh(2rd/s^2)/(2rd/s^2)`, evaluated in the
/// cancellation-free difference form. Returns `(m, dm/dr, dm/dd, d2m/drdd)`.
fn sphere_mean_parts(d: f64, r: f64, s: f64) -> (f64, f64, f64, f64) {
    let s2 = s * s;
    let beta = 2.0 * r * d / s2;
    if beta < 1e-6 {
        // concentric limit: m = e(1 + beta^2/6 + ...)
        let e = (-(d * d + r * r) / s2).exp();
        let m = e * (1.0 + beta * beta / 6.0);
        let m_r = e * (-2.0 * r / s2 + beta * (2.0 * d / s2) / 3.0);
        let m_d = e * (-2.0 * d / s2 + beta * (2.0 * r / s2) / 3.0);
        let m_rd = e * (4.0 * r * d / (s2 * s2) + 2.0 * beta / (3.0 * s2)
            - 2.0 * d / s2 * beta * 2.0 * r / (3.0 * s2));
        return (m, m_r, m_d, m_rd);
    }
    let e1 = (-((r - d) * (r - d)) / s2).exp();
    let e2 = (-((r + d) * (r + d)) / s2).exp();
    let g = e1 - e2;
    let g_r = -(2.0 / s2) * ((r - d) * e1 - (r + d) * e2);
    let g_d = (2.0 / s2) * ((r - d) * e1 + (r + d) * e2);
    let g_rd = (2.0 / s2)
        * (e1 * (1.0 - 2.0 * (r - d) * (r - d) / s2) + e2 * (1.0 - 2.0 * (r + d) * (r + d) / s2));
    let q = s2 / (4.0 * r * d);
    let m = q * g;
    let m_r = q * g_r - m / r;
    let m_d = q * g_d - m / d;
    let m_rd = q * g_rd - (q * g_d) / r - m_r / d;
    (m, m_r, m_d, m_rd)
}

/// Spherical mean `M f(x, r)` of a 3D Gaussian sum.
pub fn sphere_mean_3d(spec: &GaussianSum3, x: [f64; 3], r: f64) -> f64 {
    spec.terms
        .iter()
        .map(|g| {
            let d = dist3(x, g.center);
            g.amplitude * sphere_mean_parts(d, r, g.width).0
        })
        .sum()
}

/// Directional derivative of the spherical mean in the center variable.
pub fn sphere_mean_3d_dnu(spec: &GaussianSum3, x: [f64; 3], nu: [f64; 3], r: f64) -> f64 {
    spec.terms
        .iter()
        .map(|g| {
            let d = dist3(x, g.center);
            if d < 1e-14 {
                return 0.0; // mean is radially symmetric about its center
            }
            let proj = ((x[0] - g.center[0]) * nu[0]
                + (x[1] - g.center[1]) * nu[1]
                + (x[2] - g.center[2]) * nu[2])
                / d;
            g.amplitude * proj * sphere_mean_parts(d, r, g.width).2
        })
        .sum()
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Odd-dimension solution value `u(y, t) = d/dt [ t M f(y, t) ]` for n = 3,
/// with the time derivative of the closed-form mean taken analytically.
pub fn semianalytic_u_3d(spec: &GaussianSum3, y: [f64; 3], t: f64) -> f64 {
    spec.terms
        .iter()
        .map(|g| {
            let d = dist3(y, g.center);
            let (m, m_r, _, _) = sphere_mean_parts(d, t, g.width);
            g.amplitude * (m + t * m_r)
        })
        .sum()
}

/// Normal derivative of the n = 3 solution at a boundary point.
pub fn semianalytic_dnu_u_3d(spec: &GaussianSum3, y: [f64; 3], nu: [f64; 3], t: f64) -> f64 {
    spec.terms
        .iter()
        .map(|g| {
            let d = dist3(y, g.center);
            if d < 1e-14 {
                return 0.0;
            }
            let proj = ((y[0] - g.center[0]) * nu[0]
                + (y[1] - g.center[1]) * nu[1]
                + (y[2] - g.center[2]) * nu[2])
                / d;
            let (_, _, m_d, m_rd) = sphere_mean_parts(d, t, g.width);
            g.amplitude * proj * (m_d + t * m_rd)
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Abel relations: trace -> spherical mean
// ---------------------------------------------------------------------------

/// Recover `M f(y, r)` from a sampled Dirichlet row via
/// `(2/pi) int_0^r u(y, t)/sqrt(r^2 - t^2) dt`, with `t = r sin(theta)`.
pub fn abel_recover_mean(row: &[f64], dt: f64, r: f64) -> Result<f64> {
    abel_recover(row, dt, r)
}

/// Recover the weighted mean `M_nu f(y, r)` from a sampled Neumann row.
pub fn abel_recover_weighted_mean(row: &[f64], dt: f64, r: f64) -> Result<f64> {
    abel_recover(row, dt, r)
}

fn abel_recover(row: &[f64], dt: f64, r: f64) -> Result<f64> {
    if r < 0.0 {
        return Err(Error::InvalidArgument(format!("negative radius {r}")));
    }
    if r == 0.0 {
        return Ok(row.first().copied().unwrap_or(0.0));
    }
    let t_max = (row.len() - 1) as f64 * dt;
    if r > t_max * (1.0 + 1e-12) {
        return Err(Error::OutOfRange(format!("radius {r} beyond sampled time {t_max}")));
    }
    // midpoint rule in theta; node count tracks the data resolution
    let n = ((4.0 * r / dt).ceil() as usize).clamp(256, 16384);
    let h = std::f64::consts::FRAC_PI_2 / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let th = (i as f64 + 0.5) * h;
        let t = (r * th.sin()).min(t_max);
        acc += crate::grid::interp_time(row, dt, t)?;
    }
    Ok(2.0 / std::f64::consts::PI * acc * h)
}

// ---------------------------------------------------------------------------
// Abel integral equation round trip (alpha = 1/2)
// ---------------------------------------------------------------------------

/// Forward half-order Abel operator `F(x) = int_0^x u(r)/sqrt(x-r) dr`,
/// computed with the `r = x - v^2` substitution.
pub fn abel_forward_half<U: Fn(f64) -> f64>(u: &U, x: f64, tol: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    2.0 * adaptive_simpson(&|v: f64| u(x - v * v), 0.0, x.sqrt(), tol)
}

/// Inverse `u(r) = (1/pi) d/dr int_0^r F(x)/sqrt(r-x) dx`, with the same
/// substitution and a central difference for the outer derivative.
pub fn abel_invert_half<F: Fn(f64) -> f64>(f: &F, r: f64, h: f64, tol: f64) -> f64 {
    let g = |rr: f64| {
        if rr <= 0.0 {
            0.0
        } else {
            2.0 * adaptive_simpson(&|w: f64| f(rr - w * w), 0.0, rr.sqrt(), tol)
        }
    };
    (g(r + h) - g(r - h)) / (2.0 * h * std::f64::consts::PI)
}

/// Maximum round-trip error of the forward/inverse pair over an interior
/// sample of `[0, r_max]` for a smooth test function; used by the validation
/// suites.
pub fn abel_round_trip_error<U: Fn(f64) -> f64>(u: &U, r_max: f64, n_nodes: usize) -> f64 {
    // tabulate the forward transform once, then invert through the table
    let h = r_max / (n_nodes - 1) as f64;
    let table: Vec<f64> = (0..n_nodes).map(|i| abel_forward_half(u, i as f64 * h, 1e-11)).collect();
    let f = |x: f64| {
        let pos = (x / h).clamp(0.0, (n_nodes - 1) as f64);
        let i = (pos.floor() as usize).min(n_nodes - 2);
        let frac = pos - i as f64;
        table[i] * (1.0 - frac) + table[i + 1] * frac
    };
    let mut worst: f64 = 0.0;
    let fd = (h * 4.0).max(1e-5);
    for i in 1..40 {
        let r = r_max * i as f64 / 41.0;
        let rec = abel_invert_half(&f, r, fd, 1e-11);
        worst = worst.max((rec - u(r)).abs());
    }
    worst
}

// ---------------------------------------------------------------------------
// Weighted-mean samples and explicit inversion
// ---------------------------------------------------------------------------

/// Whether a sample set holds plain or weighted (normal-derivative) means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanKind {
    Plain,
    Weighted,
}

/// Spherical-mean samples for every detector on a uniform radius grid.
#[derive(Debug, Clone)]
pub struct MeanSamples {
    pub geometry: DetectorGeometry,
    pub kind: MeanKind,
    pub dr: f64,
    /// n_phi x n_r matrix; row k samples `r -> M f(y_k, r)` (or `M_nu f`).
    pub data: Array2<f64>,
}

impl MeanSamples {
    pub fn r_max(&self) -> f64 {
        (self.data.ncols() - 1) as f64 * self.dr
    }

    fn interp_row(&self, k: usize, r: f64) -> f64 {
        if r <= 0.0 || r >= self.r_max() {
            return 0.0; // means vanish beyond 2*rho; clamp below zero too
        }
        let pos = r / self.dr;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        self.data[[k, i]] * (1.0 - frac) + self.data[[k, i + 1]] * frac
    }
}

/// Sample the weighted spherical mean transform of a Gaussian spec on every
/// detector, `r = 0, dr, ..., r_max`.
pub fn build_weighted_mean_samples(
    spec: &PhantomSpec,
    geom: &DetectorGeometry,
    dr: f64,
    r_max: f64,
) -> Result<MeanSamples> {
    gaussian_list(spec)?;
    let n_r = (r_max / dr).round() as usize + 1;
    let mut data = Array2::<f64>::zeros((geom.n_phi, n_r));
    for k in 0..geom.n_phi {
        let y = geom.points[k];
        let nu = geom.normals[k];
        for m in 0..n_r {
            data[[k, m]] = circle_mean_normal_derivative(spec, y, nu, m as f64 * dr)?;
        }
    }
    Ok(MeanSamples { geometry: geom.clone(), kind: MeanKind::Weighted, dr, data })
}

/// Explicit inversion of the weighted spherical mean transform (n = 2):
///
/// `f(x) = (1/pi) sum_k rho dphi  p.v. int_0^T r M_nu f(y_k, r)/(r^2 - c_k^2) dr`
///
/// with `c_k = |x - y_k|`. The principal value is realized by a midpoint
/// radius grid offset half a step from the singularity so the pole cancels in
/// symmetric pairs.
pub fn invert_weighted_means(samples: &MeanSamples, x: [f64; 2], clearance: f64) -> Result<f64> {
    if samples.kind != MeanKind::Weighted {
        return Err(Error::KindMismatch("inversion needs weighted mean samples".into()));
    }
    let geom = &samples.geometry;
    let dist_center = ((x[0] - geom.center[0]).powi(2) + (x[1] - geom.center[1]).powi(2)).sqrt();
    if dist_center >= geom.rho - clearance {
        return Err(Error::Precondition(format!(
            "evaluation point at radius {dist_center:.4} too close to the detector circle"
        )));
    }
    let dr = samples.dr;
    let r_max = samples.r_max();
    let mut total = 0.0;
    for k in 0..geom.n_phi {
        let y = geom.points[k];
        let c = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        let c2 = c * c;
        let mut acc = 0.0;
        // nodes c + (j + 1/2) dr upward and downward from the singularity
        let mut j = 0usize;
        loop {
            let r = c + (j as f64 + 0.5) * dr;
            if r >= r_max {
                break;
            }
            acc += r * samples.interp_row(k, r) / (r * r - c2);
            j += 1;
        }
        let mut j = 0usize;
        loop {
            let r = c - (j as f64 + 0.5) * dr;
            if r <= 0.0 {
                break;
            }
            acc += r * samples.interp_row(k, r) / (r * r - c2);
            j += 1;
        }
        total += acc * dr;
    }
    Ok(total * geom.rho * geom.dphi / std::f64::consts::PI)
}

/// Experimental log-kernel inversion route (n = 2):
///
/// `f(x) = (1/pi) sum_k rho dphi int_0^T d/dr[ r M_nu f(y_k, r) ]
///         log((r + c)/|r - c|)/(2c) dr`.
///
/// The leading sign follows the principal-value route above (the printed
/// alternating sign is not meaningful for even n). Validation only.
pub fn invert_weighted_means_log(
    samples: &MeanSamples,
    x: [f64; 2],
    clearance: f64,
) -> Result<f64> {
    if samples.kind != MeanKind::Weighted {
        return Err(Error::KindMismatch("inversion needs weighted mean samples".into()));
    }
    let geom = &samples.geometry;
    let dist_center = ((x[0] - geom.center[0]).powi(2) + (x[1] - geom.center[1]).powi(2)).sqrt();
    if dist_center >= geom.rho - clearance {
        return Err(Error::Precondition(format!(
            "evaluation point at radius {dist_center:.4} too close to the detector circle"
        )));
    }
    let dr = samples.dr;
    let r_max = samples.r_max();
    let n_r = samples.data.ncols();
    let mut total = 0.0;
    for k in 0..geom.n_phi {
        let y = geom.points[k];
        let c = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
        // central differences of r -> r * M_nu on the sample grid
        let row = samples.data.row(k);
        let val = |m: usize| m as f64 * dr * row[m];
        let mut acc = 0.0;
        for m in 1..n_r - 1 {
            let r = (m as f64 + 0.5) * dr;
            if r >= r_max {
                break;
            }
            // derivative interpolated at the midpoint grid
            let d_here = (val(m + 1) - val(m)) / dr;
            let log_term = ((r + c) / (r - c).abs().max(1e-300)).ln() / (2.0 * c);
            acc += d_here * log_term;
        }
        total += acc * dr;
    }
    Ok(total * geom.rho * geom.dphi / std::f64::consts::PI)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct MeanSidecar {
    kind: MeanKind,
    dr: f64,
    n_r: usize,
    n_phi: usize,
    rho: f64,
    center: [f64; 2],
    dim: u8,
}

/// Serialize mean samples in the raw-f64 + JSON-sidecar convention.
pub fn write_mean_samples(samples: &MeanSamples, base: &Path) -> Result<()> {
    let side = MeanSidecar {
        kind: samples.kind,
        dr: samples.dr,
        n_r: samples.data.ncols(),
        n_phi: samples.geometry.n_phi,
        rho: samples.geometry.rho,
        center: samples.geometry.center,
        dim: 2,
    };
    let mut raw = Vec::with_capacity(samples.data.len() * 8);
    for v in samples.data.iter() {
        raw.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(base.with_extension("f64"), raw)?;
    std::fs::write(
        base.with_extension("json"),
        serde_json::to_string_pretty(&side).map_err(|e| Error::Format(e.to_string()))?,
    )?;
    Ok(())
}

/// Read mean samples written by [`write_mean_samples`]; the detector ring is
/// rebuilt from the sidecar parameters.
pub fn read_mean_samples(base: &Path) -> Result<MeanSamples> {
    let side: MeanSidecar =
        serde_json::from_str(&std::fs::read_to_string(base.with_extension("json"))?)
            .map_err(|e| Error::Format(format!("mean sidecar: {e}")))?;
    let raw = std::fs::read(base.with_extension("f64"))?;
    if raw.len() != side.n_phi * side.n_r * 8 {
        return Err(Error::Format("mean payload does not match sidecar".into()));
    }
    let mut data = Array2::<f64>::zeros((side.n_phi, side.n_r));
    for (idx, chunk) in raw.chunks_exact(8).enumerate() {
        data[[idx / side.n_r, idx % side.n_r]] = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    let dx_equiv = 2.0 * side.rho * std::f64::consts::PI / side.n_phi as f64;
    let geom = crate::grid::build_detectors(side.rho, side.center, dx_equiv)?;
    if geom.n_phi != side.n_phi {
        return Err(Error::Format("detector count mismatch on reload".into()));
    }
    Ok(MeanSamples { geometry: geom, kind: side.kind, dr: side.dr, data })
}

// ---------------------------------------------------------------------------
// Operator coefficient recursion
// ---------------------------------------------------------------------------

/// Triangular coefficient table `c[k][l]` of the expansion of
/// `(r^{-1} d/dr)^k r^{n-2} M f` into radial derivative orders:
/// `c[0][0] = 1`, `c[k][0] = c[k-1][0] (n - 2k)`, `c[k][k] = 1`,
/// `c[k][l] = c[k-1][l-1] + c[k-1][l] (n - 2k + l)`.
pub fn operator_coefficients(n: i64, k: usize) -> Result<Vec<Vec<i64>>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension n must be >= 2, got {n}")));
    }
    let mut table: Vec<Vec<i64>> = vec![vec![1]];
    for kk in 1..=k {
        let prev = &table[kk - 1];
        let mut row = vec![0i64; kk + 1];
        row[0] = prev[0] * (n - 2 * kk as i64);
        row[kk] = 1;
        for l in 1..kk {
            row[l] = prev[l - 1] + prev[l] * (n - 2 * kk as i64 + l as i64);
        }
        table.push(row);
    }
    Ok(table)
}
