//! Numerical laboratory for the spectral-flow index of quantized matrix
//! symbols.
//!
//! A family of Hermitian matrix symbols `H(μ, x, ξ)` with a spectral gap is
//! quantized in a truncated Hermite basis; the number of eigenvalues that
//! cross a reference level as `μ` sweeps is compared with the Chern number of
//! the band bundle over the unit sphere in `(μ, x, ξ)`.
//!
//! - [`quantization`]: truncated basis, affine symbols, quantized operators.
//! - [`models`]: the built-in symbols and their closed-form spectra.
//! - [`flow`]: sweeps in `μ` and the signed crossing count.
//! - [`topology`]: Chern numbers by curvature, clutching and section zeros.
//! - [`lab`]: scenarios, presets and the verification report.

pub mod flow;
pub mod lab;
pub mod linalg;
pub mod models;
pub mod quantization;
pub mod topology;

pub use num_complex::Complex64;

pub use flow::{spectral_index, sweep, FlowError, FlowResult, FlowSetup, SpectralWindow, SpectrumSweep};
pub use lab::{LabError, Scenario, VerificationReport};
pub use models::{matsuno_symbol, normal_form_symbol, ts2_symbol};
pub use quantization::{quantize, AffineMatrixSymbol, QuantizationError, TruncatedBasis, TruncatedOperator};
pub use topology::{chern_clutching, chern_curvature, chern_section_zeros, TopologyError};
