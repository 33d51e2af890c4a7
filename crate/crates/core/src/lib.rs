//! Cycle-accurate model of a variable-frequency, soft-starting three-phase
//! PWM motor drive.
//!
//! The digital core (sine table, phase accumulator, modulator) is modeled
//! at clock-count level; the inverter and motor plant are integrated on a
//! fixed step; the analyzer computes harmonic spectra and THD of the
//! resulting traces.

// Negated float comparisons are deliberate: NaN must fail every range check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dds;
pub mod error;
pub mod lut;
pub mod modulator;
pub mod plant;

pub use analysis::{
    compare_schemes, peak_to_peak, soft_start_sweep, spectrum, thd, AnalysisSettings, CompareRow,
    Spectrum, SweepRow, SweepSettings,
};
pub use dds::DdsState;
pub use error::{Error, Result};
pub use lut::{LutTable, Radix};
pub use modulator::{Drive, DriveConfig, GateState, LegState, PhaseTriple, PwmScheme};
pub use plant::{simulate, Load, MotorModel, PlantConfig, RlLoad, Trace};
