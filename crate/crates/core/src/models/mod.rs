//! Built-in systems with closed-form reference data.

pub mod oscillator;
pub mod wave;

pub use oscillator::{oscillator_system, resonance_base, resonance_system, ResonanceParams};
pub use wave::{base_point, wave_reference, wave_system, WaveParams, WaveReference};
