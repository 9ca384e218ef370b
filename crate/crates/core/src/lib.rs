//! Photoacoustic tomography reconstruction from boundary wave measurements on
//! finite time intervals.
//!
//! The crate covers the full experiment loop for the 2D circular geometry:
//!
//! - **Forward model** ([`wavesim`]): Fourier pseudo-spectral propagation of
//!   the wave equation with initial data `(f, 0)` on an enlarged periodic
//!   grid, with Dirichlet (pressure), Neumann (normal derivative) and mixed
//!   traces extracted at the detector ring, plus a seeded Gaussian noise
//!   model.
//! - **Inversion** ([`recon2d`]): filtered backprojection with the
//!   finite-time kernel `k_T` (exact for data on `(0, T)` with `T` at least
//!   the domain diameter) and with the truncated unlimited-time filter, for
//!   Neumann, Dirichlet and mixed traces, together with the range-condition
//!   residual and the discrete L2 error metric.
//! - **Oracles** ([`sphmeans`]): semi-analytic solution values built from
//!   circular/spherical means of Gaussian sums, Abel-transform recovery of
//!   the means from traces, and an explicit inversion of the weighted
//!   spherical mean transform. These validate both the forward model and the
//!   reconstructors without touching the FFT path.
//! - **Filters** ([`kernels`]): the kernel closed forms, their quadrature
//!   oracles and the discrete filter matrices.
//! - **3D** ([`recon3d`]): the odd-dimension mixed-data inversion driven
//!   entirely by closed-form spherical means.
//! - **Orchestration** ([`pipeline`], [`config`]): deterministic experiment
//!   commands producing raster, trace and CSV artifacts.

pub mod config;
pub mod error;
pub mod field;
pub mod grid;
pub mod kernels;
pub mod phantom;
pub mod pipeline;
pub mod quad;
pub mod recon2d;
pub mod recon3d;
pub mod sphmeans;
pub mod wavesim;

pub use error::{Error, Result};
