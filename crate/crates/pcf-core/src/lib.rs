//! Simulation and analysis toolkit for a two-relay diamond network running a
//! partial compress-and-forward (PCF) strategy with rateless codes.
//!
//! The network connects a source to a destination through two parallel relays
//! with no direct link. One relay compresses its hard decisions and forwards
//! them as a fountain-coded stream; the other alternates between that
//! compress-and-forward mode and plain amplify-and-forward inside each frame.
//! The destination decodes the two correlated streams jointly and fuses them
//! with the amplified tail before recovering the message.
//!
//! The crate is organized bottom-up:
//!
//! - [`channels`]: binary-input channel models, sampling, and capacities.
//! - [`info`]: the source/relay correlation model and its entropies.
//! - [`rateless`]: LT and Raptor codes with peeling and sum-product decoders.
//! - [`joint`]: the two-decoder exchange through the correlation channel.
//! - [`optimizer`]: time-share and description-rate optimization plus baselines.
//! - [`simulator`]: end-to-end Monte-Carlo trials and batch statistics.
//! - [`experiments`]: config-driven sweeps, CSV output, and SVG plots.
//!
//! Everything is deterministic given explicit seeds; trials and sweep points
//! parallelize with stable output ordering.

pub mod channels;
pub mod experiments;
pub mod info;
pub mod joint;
pub mod optimizer;
pub mod rateless;
pub mod simulator;
