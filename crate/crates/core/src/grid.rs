//! Geometry and sampling primitives: the square image grid, the circular
//! detector ring and the uniform time grid, plus linear time interpolation.
//!
//! Conventions used throughout the crate:
//! - grid node (i, j) sits at `z + (-rho + i*dx, -rho + j*dx)` with `i` the
//!   first (x) axis,
//! - detector angles step by `2*pi / n_phi`; the arc-length element
//!   `rho * dphi` is applied by the reconstruction coefficients,
//! - time samples are `t_l = l * dt`.

use crate::error::{Error, Result};

/// Uniform N x N grid on the square `[z1-rho, z1+rho] x [z2-rho, z2+rho]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub n: usize,
    pub rho: f64,
    pub center: [f64; 2],
    pub dx: f64,
}

impl Grid2D {
    /// Coordinates of node (i, j).
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.center[0] - self.rho + i as f64 * self.dx,
            self.center[1] - self.rho + j as f64 * self.dx,
        ]
    }

    /// Iterator over all (i, j, x, y) grid nodes in row-major order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| {
            (0..n).map(move |j| {
                let p = self.node(i, j);
                (i, j, p[0], p[1])
            })
        })
    }
}

/// Build a grid with N samples per axis. `dx = 2*rho/(N-1)`.
pub fn build_grid(n: usize, rho: f64, center: [f64; 2]) -> Result<Grid2D> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid needs N >= 2, got {n}")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("grid needs rho > 0, got {rho}")));
    }
    Ok(Grid2D { n, rho, center, dx: 2.0 * rho / (n as f64 - 1.0) })
}

/// Circle of detectors of radius `rho` about `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorGeometry {
    pub rho: f64,
    pub center: [f64; 2],
    pub n_phi: usize,
    /// Angular step `2*pi / n_phi`.
    pub dphi: f64,
    pub angles: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// Outward unit normals; for a circle these equal `(y - z)/rho`.
    pub normals: Vec<[f64; 2]>,
}

/// Place `ceil(2*rho*pi/dx)` detectors uniformly on the circle.
pub fn build_detectors(rho: f64, center: [f64; 2], dx: f64) -> Result<DetectorGeometry> {
    if !(rho > 0.0) || !(dx > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "detector ring needs rho > 0 and dx > 0, got rho={rho}, dx={dx}"
        )));
    }
    let n_phi = (2.0 * rho * std::f64::consts::PI / dx).ceil() as usize;
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let mut angles = Vec::with_capacity(n_phi);
    let mut points = Vec::with_capacity(n_phi);
    let mut normals = Vec::with_capacity(n_phi);
    for k in 0..n_phi {
        let phi = k as f64 * dphi;
        let (s, c) = phi.sin_cos();
        angles.push(phi);
        normals.push([c, s]);
        points.push([center[0] + rho * c, center[1] + rho * s]);
    }
    Ok(DetectorGeometry { rho, center, n_phi, dphi, angles, points, normals })
}

/// Uniform time grid `t_l = l*dt`, `l = 0..n_t-1`, with `n_t = floor(T/dt + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub dt: f64,
    pub n_t: usize,
}

impl TimeGrid {
    #[inline]
    pub fn time(&self, l: usize) -> f64 {
        l as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_t).map(move |l| self.time(l))
    }
}

/// Build a time grid for end time `T` and step `dt` with `0 < dt < T`.
pub fn build_timegrid(t_end: f64, dt: f64) -> Result<TimeGrid> {
    if !(dt > 0.0) || !(dt < t_end) {
        return Err(Error::InvalidArgument(format!(
            "time grid needs 0 < dt < T, got dt={dt}, T={t_end}"
        )));
    }
    let n_t = (t_end / dt + 1.0).floor() as usize;
    Ok(TimeGrid { t_end, dt, n_t })
}

/// Piecewise-linear interpolation of samples given at `t_l = l*dt`.
///
/// Exact at the nodes. Queries outside `[0, (len-1)*dt]` are an error: the
/// reconstruction geometry guarantees `|x - y| < 2*rho <= T`, so an
/// out-of-range query signals a caller bug rather than a data problem.
pub fn interp_time(values: &[f64], dt: f64, t: f64) -> Result<f64> {
    if values.is_empty() || !(dt > 0.0) {
        return Err(Error::InvalidArgument("interp_time needs samples and dt > 0".into()));
    }
    let t_max = (values.len() - 1) as f64 * dt;
    if t < 0.0 || t > t_max * (1.0 + 1e-12) {
        return Err(Error::OutOfRange(format!("t={t} outside [0, {t_max}]")));
    }
    let pos = (t / dt).min((values.len() - 1) as f64);
    let i = (pos.floor() as usize).min(values.len() - 2);
    let frac = pos - i as f64;
    Ok(values[i] * (1.0 - frac) + values[i + 1] * frac)
}
