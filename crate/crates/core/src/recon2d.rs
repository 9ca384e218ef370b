//! Filtered backprojection reconstructors for the circular 2D geometry.
//!
//! Four operators are provided, distinguished by trace kind and time horizon:
//! the Neumann-data reconstructors `F_T` (finite-time kernel) and `F_inf`
//! (truncated unlimited-time filter), and the Dirichlet-data reconstructors
//! `G_T` / `G_inf` which add a vector-weighted backprojection and a
//! divergence by central differences. Mixed data reuses the Neumann operator
//! scaled by `1/b`; applying the Neumann operator to Dirichlet data yields
//! the range-condition residual, which should vanish.
//!
//! The pipeline is the one hot loop of the crate: a dense matrix product
//! `trace . filter^T` shared across all output pixels, then per-pixel linear
//! interpolation of the filtered rows at the travel time `|x - y_k|`.
//! Backprojection accumulates in f64 in a fixed detector order, so outputs
//! are bit-reproducible; an optional pairwise-summation mode trades that
//! fixed order for O(log n) rounding growth.

use crate::error::{Error, Result};
use crate::field::ScalarField2D;
use crate::grid::{DetectorGeometry, Grid2D, TimeGrid};
use crate::kernels::{apply_filter_streamed, build_a, build_a_t, FilterKind, FilterMatrix};
use crate::quad::pairwise_sum;
use crate::wavesim::{TraceKind, TraceSet};
use ndarray::Array2;

/// Measurement-time horizon of a reconstruction formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite,
    Infinite,
}

/// Which formula family produced a reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Formula {
    /// Scalar backprojection (Neumann/mixed data, and range residuals).
    F,
    /// Vector-weighted backprojection plus divergence (Dirichlet data).
    G,
}

/// Full description of how a reconstruction was produced.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub formula: Formula,
    pub horizon: Horizon,
    pub trace_kind: TraceKind,
    pub weights: (f64, f64),
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub noise_percent: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Number of interpolation queries clamped to the last filtered sample
    /// (possible only for points near or outside the detector circle).
    pub clamped_queries: u64,
}

/// A reconstructed field with its provenance.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub field: ScalarField2D,
    pub provenance: Provenance,
}

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

/// A trace after the time-filter product, sampled at `t_0 .. t_{n_t-2}`.
pub struct FilteredTrace {
    pub data: Array2<f64>,
    pub dt: f64,
    pub horizon: Horizon,
    pub source_kind: TraceKind,
    pub weights: (f64, f64),
    pub t_end: f64,
}

/// Dense filter product.
///
/// Finite horizon: `trace . A_T^T`. Infinite horizon: the quadrature of the
/// truncated formula pairs the matrix A with a `1/t_m` data weight, so the
/// product is `(trace / t_m) . A^T` (column 0 of A is zero, so the untouched
/// first column never contributes).
pub fn apply_filter(trace: &TraceSet, filter: &FilterMatrix) -> Result<FilteredTrace> {
    if trace.data.ncols() != filter.data.ncols() {
        return Err(Error::GeometryMismatch(format!(
            "trace has {} time samples, filter {}",
            trace.data.ncols(),
            filter.data.ncols()
        )));
    }
    let data = match filter.kind {
        FilterKind::FiniteTime => trace.data.dot(&filter.data.t()),
        FilterKind::Infinite => {
            let mut scaled = trace.data.clone();
            for m in 1..scaled.ncols() {
                let t = m as f64 * filter.dt;
                scaled.column_mut(m).mapv_inplace(|v| v / t);
            }
            scaled.column_mut(0).fill(0.0);
            scaled.dot(&filter.data.t())
        }
    };
    Ok(FilteredTrace {
        data,
        dt: filter.dt,
        horizon: match filter.kind {
            FilterKind::FiniteTime => Horizon::Finite,
            FilterKind::Infinite => Horizon::Infinite,
        },
        source_kind: trace.kind,
        weights: trace.weights,
        t_end: filter.t_end,
    })
}

/// Row-streamed filter product for time grids whose dense matrix would not
/// fit comfortably in memory (the dt = 1e-4 configurations).
pub fn apply_filter_streaming(
    trace: &TraceSet,
    t_end: f64,
    horizon: Horizon,
) -> Result<FilteredTrace> {
    let kind = match horizon {
        Horizon::Finite => FilterKind::FiniteTime,
        Horizon::Infinite => FilterKind::Infinite,
    };
    let data = apply_filter_streamed(&trace.data, &trace.timegrid, t_end, kind)?;
    Ok(FilteredTrace {
        data,
        dt: trace.timegrid.dt,
        horizon,
        source_kind: trace.kind,
        weights: trace.weights,
        t_end,
    })
}

fn build_filter(tg: &TimeGrid, horizon: Horizon) -> Result<FilterMatrix> {
    match horizon {
        Horizon::Finite => build_a_t(tg, tg.t_end),
        Horizon::Infinite => Ok(build_a(tg)),
    }
}

// ---------------------------------------------------------------------------
// Backprojection
// ---------------------------------------------------------------------------

/// Reconstruction coefficient: `2 rho dphi / pi^2` (finite) or
/// `rho dphi / pi` (infinite); `dphi` is the angle step, `rho dphi` the
/// arc-length element.
fn coefficient(geom: &DetectorGeometry, horizon: Horizon) -> f64 {
    let pi = std::f64::consts::PI;
    match horizon {
        Horizon::Finite => 2.0 * geom.rho * geom.dphi / (pi * pi),
        Horizon::Infinite => geom.rho * geom.dphi / pi,
    }
}

/// Interpolate the filtered rows at `|x - y_k|` and sum over detectors.
///
/// `det_weights` optionally weights each detector (the cos/sin components of
/// the Dirichlet formula). Queries at or beyond the last filtered sample are
/// clamped to it; the count of clamped queries is returned alongside.
fn backproject_points(
    filtered: &FilteredTrace,
    geom: &DetectorGeometry,
    points: &[[f64; 2]],
    det_weights: Option<&[f64]>,
    pairwise: bool,
) -> (Vec<f64>, u64) {
    let n_phi = geom.n_phi;
    let m = filtered.data.ncols();
    let dt = filtered.dt;
    let t_last = (m - 1) as f64 * dt;
    let mut clamped = 0u64;
    let mut out = vec![0.0f64; points.len()];
    let mut scratch = if pairwise { vec![0.0f64; n_phi] } else { Vec::new() };
    for (pi, p) in points.iter().enumerate() {
        let mut acc = 0.0;
        for k in 0..n_phi {
            let y = geom.points[k];
            let mut r = ((p[0] - y[0]).powi(2) + (p[1] - y[1]).powi(2)).sqrt();
            if r >= t_last {
                r = t_last;
                clamped += 1;
            }
            let pos = r / dt;
            let i = (pos.floor() as usize).min(m - 2);
            let frac = pos - i as f64;
            let row = filtered.data.row(k);
            let mut v = row[i] * (1.0 - frac) + row[i + 1] * frac;
            if let Some(w) = det_weights {
                v *= w[k];
            }
            if pairwise {
                scratch[k] = v;
            } else {
                acc += v;
            }
        }
        out[pi] = if pairwise { pairwise_sum(&scratch) } else { acc };
    }
    (out, clamped)
}

fn backproject_grid(
    filtered: &FilteredTrace,
    geom: &DetectorGeometry,
    grid: &Grid2D,
    det_weights: Option<&[f64]>,
    pairwise: bool,
) -> (Array2<f64>, u64) {
    let pts: Vec<[f64; 2]> = grid
        .nodes()
        .map(|(_, _, x, y)| [x, y])
        .collect();
    let (vals, clamped) = backproject_points(filtered, geom, &pts, det_weights, pairwise);
    let mut out = Array2::<f64>::zeros((grid.n, grid.n));
    for (idx, v) in vals.into_iter().enumerate() {
        out[[idx / grid.n, idx % grid.n]] = v;
    }
    (out, clamped)
}

/// Second-order central differences along an axis, one-sided at the edges.
fn central_diff(a: &Array2<f64>, dx: f64, axis: usize) -> Array2<f64> {
    let (n0, n1) = a.dim();
    let mut out = Array2::<f64>::zeros((n0, n1));
    let inv2 = 1.0 / (2.0 * dx);
    match axis {
        0 => {
            for j in 0..n1 {
                for i in 1..n0 - 1 {
                    out[[i, j]] = (a[[i + 1, j]] - a[[i - 1, j]]) * inv2;
                }
                out[[0, j]] = (-3.0 * a[[0, j]] + 4.0 * a[[1, j]] - a[[2, j]]) * inv2;
                out[[n0 - 1, j]] =
                    (3.0 * a[[n0 - 1, j]] - 4.0 * a[[n0 - 2, j]] + a[[n0 - 3, j]]) * inv2;
            }
        }
        _ => {
            for i in 0..n0 {
                for j in 1..n1 - 1 {
                    out[[i, j]] = (a[[i, j + 1]] - a[[i, j - 1]]) * inv2;
                }
                out[[i, 0]] = (-3.0 * a[[i, 0]] + 4.0 * a[[i, 1]] - a[[i, 2]]) * inv2;
                out[[i, n1 - 1]] =
                    (3.0 * a[[i, n1 - 1]] - 4.0 * a[[i, n1 - 2]] + a[[i, n1 - 3]]) * inv2;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Reconstruction operators
// ---------------------------------------------------------------------------

fn check_finite_horizon(trace: &TraceSet, horizon: Horizon) -> Result<()> {
    if horizon == Horizon::Finite && trace.timegrid.t_end < 2.0 * trace.geometry.rho - 1e-12 {
        return Err(Error::Precondition(format!(
            "finite-time formula needs T >= 2 rho = {}, got T = {}",
            2.0 * trace.geometry.rho,
            trace.timegrid.t_end
        )));
    }
    Ok(())
}

/// Scalar (Neumann-formula) reconstruction from a pre-filtered trace.
pub fn scalar_backprojection(
    filtered: &FilteredTrace,
    geom: &DetectorGeometry,
    grid: &Grid2D,
    scale: f64,
    pairwise: bool,
) -> Reconstruction {
    let (mut data, clamped) = backproject_grid(filtered, geom, grid, None, pairwise);
    let c = coefficient(geom, filtered.horizon) * scale;
    data.mapv_inplace(|v| v * c);
    Reconstruction {
        field: ScalarField2D { grid: grid.clone(), data },
        provenance: Provenance {
            formula: Formula::F,
            horizon: filtered.horizon,
            trace_kind: filtered.source_kind,
            weights: filtered.weights,
            t_end: filtered.t_end,
            dt: filtered.dt,
            noise_percent: None,
            seed: None,
            clamped_queries: clamped,
        },
    }
}

/// Vector-weighted (Dirichlet-formula) reconstruction from a pre-filtered
/// trace: cos/sin backprojections followed by a central-difference
/// divergence.
pub fn gradient_backprojection(
    filtered: &FilteredTrace,
    geom: &DetectorGeometry,
    grid: &Grid2D,
    pairwise: bool,
) -> Reconstruction {
    let cosw: Vec<f64> = geom.angles.iter().map(|a| a.cos()).collect();
    let sinw: Vec<f64> = geom.angles.iter().map(|a| a.sin()).collect();
    let (mut g1, c1) = backproject_grid(filtered, geom, grid, Some(&cosw), pairwise);
    let (mut g2, c2) = backproject_grid(filtered, geom, grid, Some(&sinw), pairwise);
    let c = coefficient(geom, filtered.horizon);
    g1.mapv_inplace(|v| v * c);
    g2.mapv_inplace(|v| v * c);
    let data = central_diff(&g1, grid.dx, 0) + central_diff(&g2, grid.dx, 1);
    Reconstruction {
        field: ScalarField2D { grid: grid.clone(), data },
        provenance: Provenance {
            formula: Formula::G,
            horizon: filtered.horizon,
            trace_kind: filtered.source_kind,
            weights: filtered.weights,
            t_end: filtered.t_end,
            dt: filtered.dt,
            noise_percent: None,
            seed: None,
            clamped_queries: c1 + c2,
        },
    }
}

/// `F_T` / `F_inf` applied to a Neumann trace.
pub fn reconstruct_neumann(
    trace: &TraceSet,
    grid: &Grid2D,
    horizon: Horizon,
) -> Result<Reconstruction> {
    if trace.kind != TraceKind::Neumann {
        return Err(Error::KindMismatch(format!(
            "reconstruct_neumann needs a Neumann trace, got {:?}",
            trace.kind
        )));
    }
    check_finite_horizon(trace, horizon)?;
    let filter = build_filter(&trace.timegrid, horizon)?;
    let filtered = apply_filter(trace, &filter)?;
    Ok(scalar_backprojection(&filtered, &trace.geometry, grid, 1.0, false))
}

/// `G_T` / `G_inf` applied to a Dirichlet trace.
pub fn reconstruct_dirichlet(
    trace: &TraceSet,
    grid: &Grid2D,
    horizon: Horizon,
) -> Result<Reconstruction> {
    if trace.kind != TraceKind::Dirichlet {
        return Err(Error::KindMismatch(format!(
            "reconstruct_dirichlet needs a Dirichlet trace, got {:?}",
            trace.kind
        )));
    }
    check_finite_horizon(trace, horizon)?;
    let filter = build_filter(&trace.timegrid, horizon)?;
    let filtered = apply_filter(trace, &filter)?;
    Ok(gradient_backprojection(&filtered, &trace.geometry, grid, false))
}

/// Mixed-data reconstruction: the Neumann-formula operator applied verbatim
/// to the mixed trace, scaled by `1/b`.
pub fn reconstruct_mixed(
    trace: &TraceSet,
    grid: &Grid2D,
    horizon: Horizon,
) -> Result<Reconstruction> {
    if trace.kind != TraceKind::Mixed {
        return Err(Error::KindMismatch(format!(
            "reconstruct_mixed needs a mixed trace, got {:?}",
            trace.kind
        )));
    }
    let b = trace.weights.1;
    if b == 0.0 {
        return Err(Error::InvalidWeights("mixed reconstruction needs b != 0".into()));
    }
    check_finite_horizon(trace, horizon)?;
    let filter = build_filter(&trace.timegrid, horizon)?;
    let filtered = apply_filter(trace, &filter)?;
    Ok(scalar_backprojection(&filtered, &trace.geometry, grid, 1.0 / b, false))
}

/// Range-condition residual: the Neumann-formula operator applied to a
/// Dirichlet trace. Should vanish; returned as a field for inspection.
pub fn range_condition_residual(
    trace: &TraceSet,
    grid: &Grid2D,
    horizon: Horizon,
) -> Result<Reconstruction> {
    if trace.kind != TraceKind::Dirichlet {
        return Err(Error::KindMismatch(format!(
            "range condition needs a Dirichlet trace, got {:?}",
            trace.kind
        )));
    }
    check_finite_horizon(trace, horizon)?;
    let filter = build_filter(&trace.timegrid, horizon)?;
    let filtered = apply_filter(trace, &filter)?;
    Ok(scalar_backprojection(&filtered, &trace.geometry, grid, 1.0, false))
}

/// Evaluate the scalar backprojection at arbitrary points (used by the
/// equivariance checks).
pub fn scalar_backprojection_at(
    filtered: &FilteredTrace,
    geom: &DetectorGeometry,
    points: &[[f64; 2]],
    scale: f64,
) -> Vec<f64> {
    let (mut vals, _) = backproject_points(filtered, geom, points, None, false);
    let c = coefficient(geom, filtered.horizon) * scale;
    for v in &mut vals {
        *v *= c;
    }
    vals
}

// ---------------------------------------------------------------------------
// Error metric
// ---------------------------------------------------------------------------

/// Discrete L2 distance over the strict interior of the detector disk:
/// `( sum_{|x_ij - z| < rho} |a - b|^2 dx^2 )^{1/2}`.
pub fn l2_error(recon: &ScalarField2D, reference: &ScalarField2D) -> Result<f64> {
    if recon.grid != reference.grid {
        return Err(Error::GeometryMismatch("L2 error needs matching grids".into()));
    }
    let g = &recon.grid;
    let mut acc = 0.0;
    for (i, j, x, y) in g.nodes() {
        let r = ((x - g.center[0]).powi(2) + (y - g.center[1]).powi(2)).sqrt();
        if r < g.rho {
            let d = recon.data[[i, j]] - reference.data[[i, j]];
            acc += d * d;
        }
    }
    Ok((acc * g.dx * g.dx).sqrt())
}

/// Masked L2 norm of a field (the denominator of relative errors).
pub fn l2_norm(field: &ScalarField2D) -> f64 {
    let g = &field.grid;
    let mut acc = 0.0;
    for (i, j, x, y) in g.nodes() {
        let r = ((x - g.center[0]).powi(2) + (y - g.center[1]).powi(2)).sqrt();
        if r < g.rho {
            acc += field.data[[i, j]] * field.data[[i, j]];
        }
    }
    (acc * g.dx * g.dx).sqrt()
}

/// `l2_error / l2_norm(reference)`.
pub fn rel_l2_error(recon: &ScalarField2D, reference: &ScalarField2D) -> Result<f64> {
    Ok(l2_error(recon, reference)? / l2_norm(reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_detectors, build_grid, build_timegrid};
    use crate::phantom::{oracle_gaussians, rasterize};
    use crate::wavesim::{combine_mixed, extract_traces, PaddedDomain, Propagator};

    fn desk_traces(n: usize, dt: f64) -> (Grid2D, DetectorGeometry, TraceSet, TraceSet) {
        let grid = build_grid(n, 1.0, [0.0, 0.0]).unwrap();
        let f = rasterize(&oracle_gaussians(), &grid).unwrap();
        let pad = PaddedDomain::for_horizon(&grid, 2.0).unwrap();
        let prop = Propagator::new(&f, &pad).unwrap();
        let geom = build_detectors(1.0, [0.0, 0.0], grid.dx).unwrap();
        let tg = build_timegrid(2.0, dt).unwrap();
        let (d, nn) = extract_traces(&prop, &geom, &tg).unwrap();
        (grid, geom, d, nn)
    }

    #[test]
    fn zero_trace_zero_field() {
        let geom = build_detectors(1.0, [0.0, 0.0], 0.2).unwrap();
        let tg = build_timegrid(2.0, 0.05).unwrap();
        let grid = build_grid(17, 1.0, [0.0, 0.0]).unwrap();
        let zero = TraceSet {
            geometry: geom.clone(),
            timegrid: tg,
            kind: TraceKind::Neumann,
            weights: (0.0, 1.0),
            data: Array2::zeros((geom.n_phi, 41)),
        };
        let r = reconstruct_neumann(&zero, &grid, Horizon::Finite).unwrap();
        assert_eq!(r.field.max_abs(), 0.0);
        let zd = TraceSet { kind: TraceKind::Dirichlet, weights: (1.0, 0.0), ..zero.clone() };
        let r = reconstruct_dirichlet(&zd, &grid, Horizon::Infinite).unwrap();
        assert_eq!(r.field.max_abs(), 0.0);
        let r = range_condition_residual(&zd, &grid, Horizon::Finite).unwrap();
        assert_eq!(r.field.max_abs(), 0.0);
    }

    #[test]
    fn kind_and_precondition_errors() {
        let geom = build_detectors(1.0, [0.0, 0.0], 0.2).unwrap();
        let grid = build_grid(17, 1.0, [0.0, 0.0]).unwrap();
        let tg_short = build_timegrid(1.0, 0.05).unwrap();
        let short = TraceSet {
            geometry: geom.clone(),
            timegrid: tg_short,
            kind: TraceKind::Neumann,
            weights: (0.0, 1.0),
            data: Array2::zeros((geom.n_phi, 21)),
        };
        // T < 2 rho rejected for the finite horizon
        assert!(matches!(
            reconstruct_neumann(&short, &grid, Horizon::Finite),
            Err(Error::Precondition(_))
        ));
        // but allowed for the truncated unlimited-time formula
        assert!(reconstruct_neumann(&short, &grid, Horizon::Infinite).is_ok());
        // kind mismatch
        assert!(matches!(
            reconstruct_dirichlet(&short, &grid, Horizon::Infinite),
            Err(Error::KindMismatch(_))
        ));
        // b = 0 rejected
        let mix0 = TraceSet { kind: TraceKind::Mixed, weights: (1.0, 0.0), ..short.clone() };
        assert!(matches!(
            reconstruct_mixed(&mix0, &grid, Horizon::Infinite),
            Err(Error::InvalidWeights(_))
        ));
    }

    #[test]
    fn gaussian_self_consistency_all_formulas() {
        let (grid, _geom, d, n) = desk_traces(65, 2e-3);
        let f = rasterize(&oracle_gaussians(), &grid).unwrap();
        let norm = l2_norm(&f);
        let ft = reconstruct_neumann(&n, &grid, Horizon::Finite).unwrap();
        let e_ft = l2_error(&ft.field, &f).unwrap() / norm;
        assert!(e_ft < 0.03, "F_T rel L2 {e_ft}");
        let gt = reconstruct_dirichlet(&d, &grid, Horizon::Finite).unwrap();
        let e_gt = l2_error(&gt.field, &f).unwrap() / norm;
        assert!(e_gt < 0.06, "G_T rel L2 {e_gt}");
        let mix = combine_mixed(&d, &n, 1.0, 0.1).unwrap();
        let fm = reconstruct_mixed(&mix, &grid, Horizon::Finite).unwrap();
        let e_fm = l2_error(&fm.field, &f).unwrap() / norm;
        assert!(e_fm < 0.04, "F_T(mix) rel L2 {e_fm}");
        // range residual far below the signal
        let rr = range_condition_residual(&d, &grid, Horizon::Finite).unwrap();
        let e_rr = l2_error(&rr.field, &ScalarField2D::zeros(&grid)).unwrap() / norm;
        assert!(e_rr < 0.01, "residual {e_rr}");
    }

    #[test]
    fn mixed_with_pure_weights_equals_neumann() {
        let (grid, _geom, d, n) = desk_traces(33, 5e-3);
        let mix = combine_mixed(&d, &n, 0.0, 1.0).unwrap();
        let via_mix = reconstruct_mixed(&mix, &grid, Horizon::Finite).unwrap();
        let direct = reconstruct_neumann(&n, &grid, Horizon::Finite).unwrap();
        let scale = direct.field.max_abs();
        for (a, b) in via_mix.field.data.iter().zip(direct.field.data.iter()) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn linearity_of_reconstructors() {
        let (grid, geom, d, n) = desk_traces(33, 5e-3);
        let (alpha, beta) = (1.7, -0.6);
        let lin = TraceSet {
            geometry: geom,
            timegrid: n.timegrid.clone(),
            kind: TraceKind::Neumann,
            weights: (0.0, 1.0),
            data: alpha * &n.data + beta * &d.data,
        };
        let r_lin = reconstruct_neumann(&lin, &grid, Horizon::Finite).unwrap();
        let r_n = reconstruct_neumann(&n, &grid, Horizon::Finite).unwrap();
        let d_as_n = TraceSet { kind: TraceKind::Neumann, ..d.clone() };
        let r_d = reconstruct_neumann(&d_as_n, &grid, Horizon::Finite).unwrap();
        let scale = r_lin.field.max_abs();
        for ((l, a), b) in r_lin
            .field
            .data
            .iter()
            .zip(r_n.field.data.iter())
            .zip(r_d.field.data.iter())
        {
            assert!((l - (alpha * a + beta * b)).abs() < 1e-11 * scale.max(1.0));
        }
    }

    #[test]
    fn mixed_a_invariance_identity() {
        // R(mix_{a1,b}) - R(mix_{a2,b}) = ((a1-a2)/b) * residual, as a
        // discrete identity up to rounding
        let (grid, _geom, d, n) = desk_traces(33, 5e-3);
        let b = 0.1;
        let m1 = combine_mixed(&d, &n, 1.0, b).unwrap();
        let m2 = combine_mixed(&d, &n, 2.0, b).unwrap();
        let r1 = reconstruct_mixed(&m1, &grid, Horizon::Finite).unwrap();
        let r2 = reconstruct_mixed(&m2, &grid, Horizon::Finite).unwrap();
        let rr = range_condition_residual(&d, &grid, Horizon::Finite).unwrap();
        let scale = r1.field.max_abs();
        for ((a, b2), r) in r1
            .field
            .data
            .iter()
            .zip(r2.field.data.iter())
            .zip(rr.field.data.iter())
        {
            // r2 - r1 = (1/b)(a2-a1) * residual
            let want = (2.0 - 1.0) / b * r;
            assert!(((b2 - a) - want).abs() < 1e-10 * scale.max(1.0));
        }
    }

    #[test]
    fn streamed_filter_path_matches_dense() {
        let (grid, _geom, _d, n) = desk_traces(33, 5e-3);
        let filter = build_a_t(&n.timegrid, n.timegrid.t_end).unwrap();
        let dense = apply_filter(&n, &filter).unwrap();
        let streamed = apply_filter_streaming(&n, n.timegrid.t_end, Horizon::Finite).unwrap();
        let scale = dense.data.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        for (a, b) in dense.data.iter().zip(streamed.data.iter()) {
            assert!((a - b).abs() < 1e-12 * scale.max(1.0));
        }
        let r1 = scalar_backprojection(&dense, &n.geometry, &grid, 1.0, false);
        let r2 = scalar_backprojection(&streamed, &n.geometry, &grid, 1.0, false);
        for (a, b) in r1.field.data.iter().zip(r2.field.data.iter()) {
            assert!((a - b).abs() < 1e-12 * r1.field.max_abs());
        }
        // infinite-horizon path too
        let filt_inf = build_a(&n.timegrid);
        let dense_inf = apply_filter(&n, &filt_inf).unwrap();
        let str_inf = apply_filter_streaming(&n, n.timegrid.t_end, Horizon::Infinite).unwrap();
        for (a, b) in dense_inf.data.iter().zip(str_inf.data.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_mode_close_to_sequential() {
        let (grid, geom, _d, n) = desk_traces(33, 5e-3);
        let filter = build_a_t(&n.timegrid, 2.0).unwrap();
        let filtered = apply_filter(&n, &filter).unwrap();
        let seq = scalar_backprojection(&filtered, &geom, &grid, 1.0, false);
        let pw = scalar_backprojection(&filtered, &geom, &grid, 1.0, true);
        let scale = seq.field.max_abs();
        for (a, b) in seq.field.data.iter().zip(pw.field.data.iter()) {
            assert!((a - b).abs() < 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn l2_error_basics() {
        let grid = build_grid(257, 1.0, [0.0, 0.0]).unwrap();
        let f = ScalarField2D::zeros(&grid);
        assert_eq!(l2_error(&f, &f).unwrap(), 0.0);
        let mut g = ScalarField2D::zeros(&grid);
        g.data.fill(1.0);
        // sqrt(|mask| dx^2) -> sqrt(pi) as the grid refines
        let v = l2_error(&g, &f).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 6e-3, "{v}");
        // grid mismatch
        let other = ScalarField2D::zeros(&build_grid(65, 1.0, [0.0, 0.0]).unwrap());
        assert!(l2_error(&g, &other).is_err());
    }

    #[test]
    fn rotational_equivariance_one_detector_step() {
        // rotating the phantom by one detector step equals cyclically
        // shifting the trace rows; compare the reconstruction at rotated
        // evaluation points
        let (grid, geom, _d, n) = desk_traces(65, 2e-3);
        let filter = build_a_t(&n.timegrid, 2.0).unwrap();
        let filtered = apply_filter(&n, &filter).unwrap();
        // shift rows by one detector: row k of the shifted trace is row k-1
        let mut shifted = n.data.clone();
        for k in 0..geom.n_phi {
            let src = (k + geom.n_phi - 1) % geom.n_phi;
            shifted.row_mut(k).assign(&n.data.row(src));
        }
        let sh = TraceSet {
            geometry: geom.clone(),
            timegrid: n.timegrid.clone(),
            kind: TraceKind::Neumann,
            weights: (0.0, 1.0),
            data: shifted,
        };
        let filtered_sh = apply_filter(&sh, &filter).unwrap();
        let (s, c) = geom.dphi.sin_cos();
        let pts: Vec<[f64; 2]> = (0..40)
            .map(|i| {
                let ang = i as f64 * 0.157;
                let rad = 0.05 + 0.6 * ((i * 7) % 11) as f64 / 11.0;
                [rad * ang.cos(), rad * ang.sin()]
            })
            .collect();
        let rotated: Vec<[f64; 2]> =
            pts.iter().map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1]]).collect();
        let v_shift = scalar_backprojection_at(&filtered_sh, &geom, &rotated, 1.0);
        let v_orig = scalar_backprojection_at(&filtered, &geom, &pts, 1.0);
        let scale = v_orig.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        for (a, b) in v_shift.iter().zip(v_orig.iter()) {
            assert!((a - b).abs() < 1e-2 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn provenance_records_setup() {
        let (grid, _geom, d, _n) = desk_traces(33, 5e-3);
        let r = reconstruct_dirichlet(&d, &grid, Horizon::Finite).unwrap();
        assert_eq!(r.provenance.formula, Formula::G);
        assert_eq!(r.provenance.horizon, Horizon::Finite);
        assert_eq!(r.provenance.trace_kind, TraceKind::Dirichlet);
        assert_eq!(r.provenance.dt, 5e-3);
    }
}
