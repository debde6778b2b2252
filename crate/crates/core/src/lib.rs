//! Spectral estimation for weakly stationary processes on graphs.
//!
//! A graph shift operator `S` (adjacency, Laplacian or any normal matrix)
//! defines a graph Fourier transform through its eigenvectors. A process is
//! weakly stationary on `S` when its covariance is diagonalized by that
//! transform; the diagonal is the power spectral density. The crate covers
//! generation of such processes, nonparametric PSD estimators with their
//! bias/variance predictors, parametric MA/AR/ARMA fits, and Wiener
//! denoising.

pub mod cli;
pub mod denoise;
pub mod error;
pub mod experiment;
pub mod graphgen;
pub mod io;
pub mod nonparametric;
pub mod parametric;
pub mod process;
pub mod rng;
pub mod spectral;

mod serde_vec;

pub use error::{Error, Result};
