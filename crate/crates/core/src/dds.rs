//! Phase-accumulator frequency synthesis.
//!
//! A `width`-bit accumulator is advanced by a tuning word each clock; the
//! scaled accumulator, truncated, indexes the sine table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_WIDTH: u32 = 32;
pub const DEFAULT_CLOCK_HZ: f64 = 100e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DdsState {
    accumulator: u64,
    tuning_word: u64,
    width: u32,
    clock_hz: f64,
    lut_size: usize,
}

/// Phase increment per clock for `f_ref`: `round(f_ref * 2^width / clock_hz)`.
pub fn tuning_word(f_ref: f64, clock_hz: f64, width: u32) -> Result<u64> {
    check_width(width)?;
    if !(clock_hz > 0.0 && clock_hz.is_finite()) {
        return Err(Error::param(
            "clock_hz",
            format!("{clock_hz} must be positive"),
        ));
    }
    if !(f_ref > 0.0) || f_ref > clock_hz / 2.0 {
        return Err(Error::param(
            "f_ref",
            format!("{f_ref} Hz outside (0, {}] Hz", clock_hz / 2.0),
        ));
    }
    let scale = (1u64 << width) as f64;
    Ok((f_ref * scale / clock_hz).round() as u64)
}

fn check_width(width: u32) -> Result<()> {
    if (1..=48).contains(&width) {
        Ok(())
    } else {
        Err(Error::param(
            "width",
            format!("{width} bits outside 1..=48"),
        ))
    }
}

impl DdsState {
    pub fn new(tuning_word: u64, width: u32, clock_hz: f64, lut_size: usize) -> Result<Self> {
        check_width(width)?;
        if tuning_word >> width != 0 {
            return Err(Error::param("tuning_word", "must be below 2^width"));
        }
        if lut_size == 0 {
            return Err(Error::param("lut_size", "must be nonzero"));
        }
        Ok(Self {
            accumulator: 0,
            tuning_word,
            width,
            clock_hz,
            lut_size,
        })
    }

    /// State tuned to `f_ref` with the accumulator at zero phase.
    pub fn for_frequency(f_ref: f64, width: u32, clock_hz: f64, lut_size: usize) -> Result<Self> {
        Self::new(
            tuning_word(f_ref, clock_hz, width)?,
            width,
            clock_hz,
            lut_size,
        )
    }

    pub fn with_accumulator(mut self, accumulator: u64) -> Self {
        self.accumulator = accumulator & self.mask();
        self
    }

    #[inline]
    fn mask(&self) -> u64 {
        (1u64 << self.width) - 1
    }

    pub fn accumulator(&self) -> u64 {
        self.accumulator
    }

    pub fn tuning_word(&self) -> u64 {
        self.tuning_word
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn lut_size(&self) -> usize {
        self.lut_size
    }

    /// Table index for the current accumulator, `floor(acc * size / 2^W)`.
    #[inline]
    pub fn lut_index(&self) -> usize {
        ((u128::from(self.accumulator) * self.lut_size as u128) >> self.width) as usize
    }

    /// One clock: returns the new accumulator and its table index.
    #[inline]
    pub fn step(&mut self) -> (u64, usize) {
        self.advance(1)
    }

    /// `clocks` steps at once; identical to calling [`step`](Self::step)
    /// `clocks` times.
    #[inline]
    pub fn advance(&mut self, clocks: u64) -> (u64, usize) {
        let inc = (u128::from(self.tuning_word) * u128::from(clocks)) as u64;
        self.accumulator = self.accumulator.wrapping_add(inc) & self.mask();
        (self.accumulator, self.lut_index())
    }

    /// Synthesized frequency `tuning_word * clock_hz / 2^W`.
    ///
    /// The product is exact in f64 for any word below 2^53 / clock_hz and
    /// scaling by a power of two is exact, so no rounding occurs at the
    /// default parameters.
    pub fn actual_frequency(&self) -> f64 {
        self.tuning_word as f64 * self.clock_hz / (1u64 << self.width) as f64
    }

    /// Frequency quantum `clock_hz / 2^W`.
    pub fn resolution(&self) -> f64 {
        self.clock_hz / (1u64 << self.width) as f64
    }
}
