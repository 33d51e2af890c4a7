//! Quantized offset-binary sine table.
//!
//! The table is the phase-to-amplitude stage of the DDS: entry `i` holds
//! `midpoint + round(amplitude * sin(2*pi*i/size))`, so the zero crossing sits
//! at `midpoint` and signed samples are recovered as `entry - midpoint`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SIZE: usize = 3600;
pub const DEFAULT_MIDPOINT: u32 = 137_500;
pub const DEFAULT_AMPLITUDE: u32 = 12_500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LutTable {
    entries: Vec<u32>,
    midpoint: u32,
    amplitude: u32,
}

/// Number format for memory-initialization text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Radix {
    #[default]
    Decimal,
    Hex,
}

impl std::str::FromStr for Radix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "decimal" | "dec" => Ok(Radix::Decimal),
            "hex" => Ok(Radix::Hex),
            other => Err(Error::param("radix", format!("unknown radix `{other}`"))),
        }
    }
}

impl LutTable {
    /// Builds a full-wave sine table.
    ///
    /// Values are computed on the first quadrant and mirrored, which makes the
    /// quarter- and half-wave symmetries exact independent of libm rounding.
    pub fn build(size: usize, midpoint: u32, amplitude: u32) -> Result<Self> {
        if size < 4 || !size.is_multiple_of(4) {
            return Err(Error::param(
                "size",
                format!("{size} must be at least 4 and divisible by 4"),
            ));
        }
        if amplitude > midpoint {
            return Err(Error::param(
                "amplitude",
                format!("{amplitude} exceeds midpoint {midpoint}"),
            ));
        }
        if midpoint.checked_add(amplitude).is_none() {
            return Err(Error::param(
                "midpoint",
                "midpoint + amplitude overflows u32",
            ));
        }

        let quarter = size / 4;
        let quadrant: Vec<i64> = (0..=quarter)
            .map(|j| {
                let angle = std::f64::consts::TAU * j as f64 / size as f64;
                // f64::round is half-away-from-zero
                (f64::from(amplitude) * angle.sin()).round() as i64
            })
            .collect();

        let entries = (0..size)
            .map(|i| {
                let half = size / 2;
                let (k, sign) = if i < half { (i, 1) } else { (i - half, -1) };
                let j = if k <= quarter { k } else { half - k };
                (i64::from(midpoint) + sign * quadrant[j]) as u32
            })
            .collect();

        Ok(Self {
            entries,
            midpoint,
            amplitude,
        })
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn midpoint(&self) -> u32 {
        self.midpoint
    }

    pub fn amplitude(&self) -> u32 {
        self.amplitude
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    /// Entry at `index mod size`.
    #[inline]
    pub fn sample(&self, index: usize) -> u32 {
        self.entries[index % self.entries.len()]
    }

    /// Signed sample normalized by the amplitude, nominally in [-1, 1].
    #[inline]
    pub fn normalized(&self, index: usize) -> f64 {
        (f64::from(self.sample(index)) - f64::from(self.midpoint)) / f64::from(self.amplitude)
    }

    /// One entry per LF-terminated line, in index order. Hex is lowercase
    /// without a prefix.
    pub fn to_mem_init(&self, radix: Radix) -> String {
        let mut out = String::with_capacity(self.entries.len() * 7);
        for e in &self.entries {
            match radix {
                Radix::Decimal => writeln!(out, "{e}"),
                Radix::Hex => writeln!(out, "{e:x}"),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

impl Default for LutTable {
    fn default() -> Self {
        Self::build(DEFAULT_SIZE, DEFAULT_MIDPOINT, DEFAULT_AMPLITUDE)
            .expect("default table parameters are valid")
    }
}

/// Parses memory-initialization text back into raw entries.
pub fn parse_mem_init(text: &str, radix: Radix) -> Result<Vec<u32>> {
    let base = match radix {
        Radix::Decimal => 10,
        Radix::Hex => 16,
    };
    text.lines()
        .enumerate()
        .map(|(n, line)| {
            u32::from_str_radix(line.trim(), base)
                .map_err(|e| Error::param("mem_init", format!("line {}: {e}", n + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_table_landmarks() {
        let lut = LutTable::default();
        assert_eq!(lut.size(), 3600);
        assert_eq!(lut.sample(0), 137_500);
        assert_eq!(lut.sample(900), 150_000);
        assert_eq!(lut.sample(1800), 137_500);
        assert_eq!(lut.sample(2700), 125_000);
        // 137500 + round(12500 * sin 45deg) = 137500 + round(8838.8347...)
        assert_eq!(lut.sample(450), 146_339);
        assert_eq!(*lut.entries().iter().min().unwrap(), 125_000);
        assert_eq!(*lut.entries().iter().max().unwrap(), 150_000);
    }

    #[test]
    fn sample_wraps() {
        let lut = LutTable::default();
        assert_eq!(lut.sample(3600), 137_500);
        assert_eq!(lut.sample(4500), 150_000);
    }

    #[test]
    fn tiny_table_cardinal_angles() {
        let lut = LutTable::build(4, 100, 50).unwrap();
        assert_eq!(lut.entries(), &[100, 150, 100, 50]);
        assert_eq!(lut.to_mem_init(Radix::Decimal), "100\n150\n100\n50\n");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LutTable::build(3602, 137_500, 12_500).is_err());
        assert!(LutTable::build(0, 137_500, 12_500).is_err());
        assert!(LutTable::build(3600, 100, 101).is_err());
        assert!(LutTable::build(4, u32::MAX, u32::MAX).is_err());
    }

    #[test]
    fn mem_init_formats() {
        let lut = LutTable::default();
        let dec = lut.to_mem_init(Radix::Decimal);
        assert_eq!(dec.lines().next(), Some("137500"));
        assert_eq!(dec.lines().count(), 3600);
        let hex = lut.to_mem_init(Radix::Hex);
        assert_eq!(hex.lines().nth(900), Some("249f0"));
        assert!(hex.ends_with('\n') && !hex.ends_with("\n\n"));
    }

    proptest! {
        #[test]
        fn invariants_hold(quarter in 1usize..600, midpoint in 0u32..1_000_000, frac in 0.0f64..=1.0) {
            let size = quarter * 4;
            let amplitude = (f64::from(midpoint) * frac) as u32;
            let lut = LutTable::build(size, midpoint, amplitude).unwrap();
            let e = lut.entries();
            prop_assert_eq!(e.len(), size);
            prop_assert_eq!(e[0], midpoint);
            prop_assert_eq!(*e.iter().min().unwrap(), midpoint - amplitude);
            prop_assert_eq!(*e.iter().max().unwrap(), midpoint + amplitude);
            for i in 0..size {
                let opposite = e[(i + size / 2) % size];
                prop_assert_eq!(u64::from(e[i]) + u64::from(opposite), 2 * u64::from(midpoint));
                let exact = f64::from(midpoint)
                    + f64::from(amplitude) * (std::f64::consts::TAU * i as f64 / size as f64).sin();
                prop_assert!((f64::from(e[i]) - exact).abs() <= 0.5 + 1e-9);
            }
            for i in 0..=size / 4 {
                prop_assert_eq!(e[i], e[size / 2 - i]);
            }
        }

        #[test]
        fn mem_init_round_trip(quarter in 1usize..200, hex in any::<bool>()) {
            let lut = LutTable::build(quarter * 4, 137_500, 12_500).unwrap();
            let radix = if hex { Radix::Hex } else { Radix::Decimal };
            let parsed = parse_mem_init(&lut.to_mem_init(radix), radix).unwrap();
            prop_assert_eq!(parsed.as_slice(), lut.entries());
        }
    }
}
