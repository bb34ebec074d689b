//! Simulation of a classical QPSK channel and a continuous-variable QKD
//! channel sharing one laser, one fibre and one local oscillator, with the
//! quantum channel's carrier recovered from the classical one.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod calibration;
pub mod channel;
pub mod error;
pub mod filter;
pub mod iqdump;
pub mod qpsk;
pub mod rng;
pub mod runner;
pub mod rx;
pub mod scalar;
pub mod search;
pub mod security;
pub mod tx;
pub mod types;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Complex64 = num_complex::Complex<f64>;
pub type IqStreamF64 = types::IqStream<f64>;
pub type SymbolFrameF64 = types::SymbolFrame<f64>;
pub type TxOutputF64 = tx::TxOutput<f64>;
pub type RxCaptureF64 = channel::RxCapture<f64>;
pub type ReceivedF64 = channel::Received<f64>;
