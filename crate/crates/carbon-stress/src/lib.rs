//! Carbon-price stress testing on firm-level supply chain networks.
//!
//! The pipeline estimates firm CO₂ emissions from fuel purchases, applies a
//! carbon-price shock with optional downstream cost pass-through, identifies
//! firms whose profits the costs exhaust, propagates the resulting failures
//! through the production network under substitutable (linear) or
//! non-substitutable (generalized Leontief) input regimes, and translates
//! surviving and failed balance sheets into bank equity losses.
//!
//! Modules follow the pipeline order:
//!
//! * [`network`] — the transaction graph, firm registry and thresholding
//! * [`production`] — production-function calibration
//! * [`emissions`] — firm-level CO₂ estimation and carbon-to-profit ratios
//! * [`passthrough`] — market shares and downstream cost distribution
//! * [`shock`] — direct defaults and the direct loss curve
//! * [`contagion`] — fixed-point shock propagation, ESRI/FSRI
//! * [`finance`] — balance-sheet projection and bank loan write-offs
//! * [`synthetic`] — reproducible test-scale data generation and fixtures
//! * [`scenario`] — grid runs across prices, regimes and pass-through modes
//!
//! See the `examples/` directory for one runnable walk-through per
//! capability; `cargo run --example toy_pipeline` is the natural start.

pub mod contagion;
pub mod emissions;
pub mod error;
pub mod finance;
pub mod network;
pub mod passthrough;
pub mod production;
pub mod sector;
pub mod shock;
pub mod scenario;
pub mod synthetic;

pub use error::{Error, Result};
