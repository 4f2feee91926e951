//! Simulation and analysis of discrete-time chaotic-map random bit generators
//! built around the zigzag map.
//!
//! The crate covers the whole chain: piecewise-affine maps ([`maps`]), noisy
//! iteration and the pipelined bit generator ([`dynamics`]), slope-variation
//! scenarios ([`variability`]), stationary densities and the two-state Markov
//! description of the output ([`analysis`]), bias/correlation removal
//! ([`postprocess`]) and a statistical test battery ([`stats`]).
//!
//! The noise source is a seeded pseudo-random generator; nothing here is a
//! physical entropy source.

pub mod analysis;
pub mod bitstream;
pub mod dynamics;
pub mod error;
pub mod maps;
pub mod postprocess;
pub mod stats;
pub mod variability;

pub use bitstream::{BitStream, PostprocessRecord, StreamMeta};
pub use dynamics::{iterate_orbit, run_pipeline, warmup_discard, InitialState, SimConfig};
pub use error::{Error, Result};
pub use maps::{GeneralizedZigzagParams, MapKind, NonIdealParams, PiecewiseAffineMap, Segment};
pub use variability::{sample_slope_deltas, DeviceVariation, VariationScenario};
