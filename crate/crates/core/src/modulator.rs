//! Carrier-based three-phase PWM generation.
//!
//! The modulating waveform for each scheme is built from sine-table reads,
//! scaled by the (soft-started) modulation index into carrier counts, and
//! compared against a sawtooth produced by an up-counter. Optional dead time
//! is inserted per leg after every commanded transition.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dds::{self, DdsState};
use crate::error::{Error, Result};
use crate::lut::{self, LutTable};

const FRAC_2_SQRT_3: f64 = 1.154_700_538_379_251_5;

/// 2/sqrt(3), the linear-range limit of the zero-sequence-injected schemes.
pub const M_LIMIT_INJECTED: f64 = FRAC_2_SQRT_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PwmScheme {
    #[serde(rename = "spwm", alias = "SPWM")]
    Spwm,
    #[serde(rename = "thi_spwm", alias = "THI_SPWM")]
    ThiSpwm,
    #[serde(rename = "svpwm", alias = "SVPWM")]
    Svpwm,
}

impl PwmScheme {
    pub const ALL: [PwmScheme; 3] = [PwmScheme::Spwm, PwmScheme::ThiSpwm, PwmScheme::Svpwm];

    /// Largest modulation index that keeps the reference inside the carrier.
    pub fn linear_limit(self) -> f64 {
        match self {
            PwmScheme::Spwm => 1.0,
            PwmScheme::ThiSpwm | PwmScheme::Svpwm => M_LIMIT_INJECTED,
        }
    }

    /// Fundamental amplitude of the unscaled [`reference_triple`] output.
    ///
    /// The third-harmonic shape carries a 2/sqrt(3) pre-gain so that its
    /// peak is unity; the drive divides it back out so that `m` always sets
    /// the same fundamental regardless of scheme.
    pub fn shape_gain(self) -> f64 {
        match self {
            PwmScheme::ThiSpwm => FRAC_2_SQRT_3,
            PwmScheme::Spwm | PwmScheme::Svpwm => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PwmScheme::Spwm => "SPWM",
            PwmScheme::ThiSpwm => "THI-SPWM",
            PwmScheme::Svpwm => "SVPWM",
        }
    }
}

impl fmt::Display for PwmScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PwmScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "spwm" => Ok(PwmScheme::Spwm),
            "thi_spwm" | "thi" | "thispwm" => Ok(PwmScheme::ThiSpwm),
            "svpwm" => Ok(PwmScheme::Svpwm),
            other => Err(Error::param("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Normalized modulating values of the three phases.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseTriple {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PhaseTriple {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn max(&self) -> f64 {
        self.a.max(self.b).max(self.c)
    }

    pub fn min(&self) -> f64 {
        self.a.min(self.b).min(self.c)
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(f(self.a), f(self.b), f(self.c))
    }
}

/// `-(max + min) / 2`, the min-max zero-sequence offset.
pub fn common_mode_voltage(t: &PhaseTriple) -> f64 {
    -(t.max() + t.min()) / 2.0
}

/// Scheme-specific modulating triple at table index `theta_index`.
///
/// Phases b and c lag a by one and two thirds of the table. The third
/// harmonic is read from the same table at three times each phase index.
pub fn reference_triple(theta_index: usize, lut: &LutTable, scheme: PwmScheme) -> PhaseTriple {
    let size = lut.size();
    let third = size / 3;
    let idx = [
        theta_index % size,
        (theta_index % size + size - third) % size,
        (theta_index % size + size - 2 * third) % size,
    ];
    let base = PhaseTriple::new(
        lut.normalized(idx[0]),
        lut.normalized(idx[1]),
        lut.normalized(idx[2]),
    );
    match scheme {
        PwmScheme::Spwm => base,
        PwmScheme::ThiSpwm => {
            let third_harmonic = |i: usize| lut.normalized(3 * i);
            PhaseTriple::new(
                FRAC_2_SQRT_3 * (base.a + third_harmonic(idx[0]) / 6.0),
                FRAC_2_SQRT_3 * (base.b + third_harmonic(idx[1]) / 6.0),
                FRAC_2_SQRT_3 * (base.c + third_harmonic(idx[2]) / 6.0),
            )
        }
        PwmScheme::Svpwm => {
            let offset = common_mode_voltage(&base);
            base.map(|v| v + offset)
        }
    }
}

/// Shape of the modulation-index ramp during soft start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftStartProfile {
    #[default]
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveConfig {
    pub vdc: f64,
    pub f_carrier: f64,
    pub f_ref: f64,
    pub scheme: PwmScheme,
    pub m_target: f64,
    pub soft_start_duration: f64,
    pub soft_start_profile: SoftStartProfile,
    pub clock_hz: f64,
    pub decimation: u32,
    pub dead_time: f64,
    pub carrier_lo: u32,
    pub carrier_hi: u32,
    pub lut_size: usize,
    pub lut_midpoint: u32,
    pub lut_amplitude: u32,
    pub dds_width: u32,
}

impl Default for DriveConfig {
    fn default() -> Self {
        Self {
            vdc: 120.0,
            f_carrier: 4000.0,
            f_ref: 60.0,
            scheme: PwmScheme::Spwm,
            m_target: 0.6,
            soft_start_duration: 0.0,
            soft_start_profile: SoftStartProfile::Linear,
            clock_hz: dds::DEFAULT_CLOCK_HZ,
            decimation: 10,
            dead_time: 0.0,
            carrier_lo: 125_000,
            carrier_hi: 150_000,
            lut_size: lut::DEFAULT_SIZE,
            lut_midpoint: lut::DEFAULT_MIDPOINT,
            lut_amplitude: lut::DEFAULT_AMPLITUDE,
            dds_width: dds::DEFAULT_WIDTH,
        }
    }
}

impl DriveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("{v} must be positive and finite"),
                ))
            }
        };
        positive("vdc", self.vdc)?;
        positive("clock_hz", self.clock_hz)?;
        positive("f_carrier", self.f_carrier)?;
        if !(5.0..=100.0).contains(&self.f_ref) {
            return Err(Error::param(
                "f_ref",
                format!("{} Hz outside [5, 100] Hz", self.f_ref),
            ));
        }
        let limit = self.scheme.linear_limit();
        if !(0.0..=limit + 1e-9).contains(&self.m_target) {
            return Err(Error::param(
                "m_target",
                format!(
                    "{} outside the {} linear range [0, {limit:.4}]",
                    self.m_target, self.scheme
                ),
            ));
        }
        for (name, v) in [
            ("soft_start_duration", self.soft_start_duration),
            ("dead_time", self.dead_time),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("{v} must be finite and >= 0")));
            }
        }
        if self.carrier_hi <= self.carrier_lo {
            return Err(Error::param("carrier_hi", "must exceed carrier_lo"));
        }
        let period = self.carrier_period();
        if (f64::from(period) * self.f_carrier - self.clock_hz).abs() > 1e-6 * self.clock_hz {
            return Err(Error::param(
                "f_carrier",
                format!(
                    "{} counts at {} Hz does not match the {} Hz clock",
                    period, self.f_carrier, self.clock_hz
                ),
            ));
        }
        if self.decimation == 0 || !period.is_multiple_of(self.decimation) {
            return Err(Error::param(
                "decimation",
                format!(
                    "{} must be >= 1 and divide the carrier period {period}",
                    self.decimation
                ),
            ));
        }
        if !self.lut_size.is_multiple_of(12) {
            return Err(Error::param(
                "lut_size",
                "must be divisible by 12 so the phases sit on table entries",
            ));
        }
        LutTable::build(self.lut_size, self.lut_midpoint, self.lut_amplitude)?;
        dds::tuning_word(self.f_ref, self.clock_hz, self.dds_width)?;
        Ok(())
    }

    /// Carrier period in clock cycles.
    pub fn carrier_period(&self) -> u32 {
        self.carrier_hi - self.carrier_lo
    }

    /// Gate-tick rate, `clock_hz / decimation`.
    pub fn tick_hz(&self) -> f64 {
        self.clock_hz / f64::from(self.decimation)
    }

    pub fn dead_ticks(&self) -> u32 {
        (self.dead_time * self.tick_hz()).round() as u32
    }

    pub fn carrier_mid(&self) -> f64 {
        (f64::from(self.carrier_lo) + f64::from(self.carrier_hi)) / 2.0
    }

    pub fn carrier_half_range(&self) -> f64 {
        f64::from(self.carrier_period()) / 2.0
    }

    /// Maps a normalized modulating value to carrier counts:
    /// `mid + round(m * half_range * v)`, clamped to the carrier range.
    #[inline]
    pub fn scale_reference(&self, m: f64, v: f64) -> u32 {
        let raw = self.unclamped_reference(m, v);
        raw.clamp(f64::from(self.carrier_lo), f64::from(self.carrier_hi)) as u32
    }

    #[inline]
    fn unclamped_reference(&self, m: f64, v: f64) -> f64 {
        self.carrier_mid() + (m * self.carrier_half_range() * v).round()
    }
}

/// Sawtooth carrier: `carrier_lo + (clock_count mod (carrier_hi - carrier_lo))`.
#[inline]
pub fn carrier_value(clock_count: u64, cfg: &DriveConfig) -> u32 {
    cfg.carrier_lo + (clock_count % u64::from(cfg.carrier_period())) as u32
}

/// Modulation index at time `t` during soft start.
pub fn soft_start_m(t: f64, cfg: &DriveConfig) -> f64 {
    if cfg.soft_start_duration <= 0.0 {
        return cfg.m_target;
    }
    match cfg.soft_start_profile {
        SoftStartProfile::Linear => cfg.m_target * (t.max(0.0) / cfg.soft_start_duration).min(1.0),
    }
}

/// Upper switch on iff the reference is strictly above the carrier.
#[inline]
pub fn gate_compare(ref_scaled: u32, carrier: u32) -> bool {
    ref_scaled > carrier
}

/// Peak line-to-neutral fundamental, `m * vdc / 2`, in the linear range.
pub fn fundamental_amplitude(scheme: PwmScheme, m: f64, vdc: f64) -> Result<f64> {
    if !(m > 0.0) || m > scheme.linear_limit() + 1e-12 {
        return Err(Error::param(
            "m",
            format!(
                "{m} outside the linear range (0, {:.6}] of {scheme}",
                scheme.linear_limit()
            ),
        ));
    }
    Ok(m * vdc / 2.0)
}

/// True if every scaled reference of `scheme` at index `m` stays inside the
/// carrier range over a full table revolution.
pub fn reference_in_range(scheme: PwmScheme, m: f64, lut: &LutTable, cfg: &DriveConfig) -> bool {
    let lo = f64::from(cfg.carrier_lo);
    let hi = f64::from(cfg.carrier_hi);
    let scale = m / scheme.shape_gain();
    (0..lut.size()).all(|i| {
        reference_triple(i, lut, scheme)
            .to_array()
            .iter()
            .all(|&v| (lo..=hi).contains(&cfg.unclamped_reference(scale, v)))
    })
}

/// State of one inverter leg's switch pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegState {
    Upper,
    Lower,
    /// Both switches off (dead time).
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateState {
    pub upper: [bool; 3],
    pub lower: [bool; 3],
}

impl GateState {
    pub fn from_legs(legs: [LegState; 3]) -> Self {
        let mut g = GateState {
            upper: [false; 3],
            lower: [false; 3],
        };
        for (k, leg) in legs.iter().enumerate() {
            g.upper[k] = *leg == LegState::Upper;
            g.lower[k] = *leg == LegState::Lower;
        }
        g
    }

    pub fn leg(&self, k: usize) -> LegState {
        match (self.upper[k], self.lower[k]) {
            (true, false) => LegState::Upper,
            (false, true) => LegState::Lower,
            (false, false) => LegState::Off,
            (true, true) => unreachable!("shoot-through is never generated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct LegTimer {
    commanded: Option<bool>,
    dead_left: u32,
}

impl LegTimer {
    fn update(&mut self, upper: bool, dead_ticks: u32) -> LegState {
        match self.commanded {
            Some(prev) if prev != upper => self.dead_left = dead_ticks,
            _ => {}
        }
        self.commanded = Some(upper);
        if self.dead_left > 0 {
            self.dead_left -= 1;
            LegState::Off
        } else if upper {
            LegState::Upper
        } else {
            LegState::Lower
        }
    }
}

/// Per-tick state of the PWM generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveState {
    pub clock_count: u64,
    pub dds: DdsState,
    pub m: f64,
    pub references: [u32; 3],
    // Set when a leg's compare first fails in the current carrier period;
    // the leg then stays low until the carrier wraps.
    released: [bool; 3],
    legs: [LegTimer; 3],
}

/// A configured PWM generator: config, sine table and tick state.
#[derive(Debug, Clone)]
pub struct Drive {
    cfg: DriveConfig,
    lut: LutTable,
    state: DriveState,
    dead_ticks: u32,
    // Reference triple for `cached_index`, divided by the scheme's shape gain.
    cached_index: usize,
    cached: PhaseTriple,
}

impl Drive {
    /// Validates `cfg` and builds the generator at t = 0, motor de-energized.
    pub fn new(cfg: &DriveConfig) -> Result<Self> {
        cfg.validate()?;
        let lut = LutTable::build(cfg.lut_size, cfg.lut_midpoint, cfg.lut_amplitude)?;
        let dds = DdsState::for_frequency(cfg.f_ref, cfg.dds_width, cfg.clock_hz, cfg.lut_size)?;
        let cached_index = dds.lut_index();
        let cached = Self::shaped(cached_index, &lut, cfg.scheme);
        Ok(Self {
            dead_ticks: cfg.dead_ticks(),
            state: DriveState {
                clock_count: 0,
                dds,
                m: 0.0,
                references: [0; 3],
                released: [false; 3],
                legs: Default::default(),
            },
            cfg: cfg.clone(),
            lut,
            cached_index,
            cached,
        })
    }

    fn shaped(index: usize, lut: &LutTable, scheme: PwmScheme) -> PhaseTriple {
        let gain = scheme.shape_gain();
        reference_triple(index, lut, scheme).map(|v| v / gain)
    }

    pub fn config(&self) -> &DriveConfig {
        &self.cfg
    }

    pub fn lut(&self) -> &LutTable {
        &self.lut
    }

    pub fn state(&self) -> &DriveState {
        &self.state
    }

    /// Seconds represented by the current clock count.
    pub fn time(&self) -> f64 {
        self.state.clock_count as f64 / self.cfg.clock_hz
    }

    /// Evaluates the gates at the current clock count, then advances the
    /// carrier counter and DDS accumulator by `decimation` clocks.
    ///
    /// Each leg is high from the carrier wrap until its compare first fails,
    /// so a reference stepping past the carrier cannot retrigger the leg
    /// within one carrier period.
    #[inline]
    pub fn tick(&mut self) -> GateState {
        let cfg = &self.cfg;
        let st = &mut self.state;

        let m = soft_start_m(st.clock_count as f64 / cfg.clock_hz, cfg);
        let index = st.dds.lut_index();
        if index != self.cached_index {
            self.cached_index = index;
            self.cached = Self::shaped(index, &self.lut, cfg.scheme);
        }
        let carrier = carrier_value(st.clock_count, cfg);
        if carrier == cfg.carrier_lo {
            st.released = [false; 3];
        }
        let mut legs = [LegState::Off; 3];
        for (k, v) in self.cached.to_array().into_iter().enumerate() {
            let r = cfg.scale_reference(m, v);
            st.references[k] = r;
            let on = !st.released[k] && gate_compare(r, carrier);
            st.released[k] |= !on;
            legs[k] = st.legs[k].update(on, self.dead_ticks);
        }
        st.m = m;

        let step = u64::from(cfg.decimation);
        st.clock_count += step;
        st.dds.advance(step);
        GateState::from_legs(legs)
    }
}

/// Pure-function form of [`Drive::tick`].
pub fn drive_tick(drive: &Drive) -> (Drive, GateState) {
    let mut next = drive.clone();
    let g = next.tick();
    (next, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const Q: f64 = 1.0 / 12_500.0;

    fn lut() -> LutTable {
        LutTable::default()
    }

    #[test]
    fn spwm_at_zero() {
        let t = reference_triple(0, &lut(), PwmScheme::Spwm);
        assert_abs_diff_eq!(t.a, 0.0, epsilon = Q);
        assert_abs_diff_eq!(t.b, -0.866_025_403_784, epsilon = Q);
        assert_abs_diff_eq!(t.c, 0.866_025_403_784, epsilon = Q);
    }

    #[test]
    fn thi_known_points() {
        // (2/sqrt3)(sin60 + sin180/6) = 1; (2/sqrt3)(1 - 1/6) = 0.96225...
        let l = lut();
        let at60 = reference_triple(600, &l, PwmScheme::ThiSpwm);
        assert_abs_diff_eq!(at60.a, 1.0, epsilon = 2.0 * Q);
        let at90 = reference_triple(900, &l, PwmScheme::ThiSpwm);
        assert_abs_diff_eq!(at90.a, 0.962_250_448_649, epsilon = 2.0 * Q);
    }

    #[test]
    fn svpwm_equals_spwm_where_extremes_balance() {
        // At 90 deg: va = 1, vb = vc = -0.5 -> offset -0.25; at 0 deg the
        // extremes are +/-0.866 and the offset vanishes.
        let l = lut();
        let sv = reference_triple(0, &l, PwmScheme::Svpwm);
        let sp = reference_triple(0, &l, PwmScheme::Spwm);
        assert_abs_diff_eq!(sv.a, sp.a, epsilon = Q);
        assert_abs_diff_eq!(sv.b, sp.b, epsilon = Q);
        let sv90 = reference_triple(900, &l, PwmScheme::Svpwm);
        assert_abs_diff_eq!(sv90.a, 0.75, epsilon = Q);
    }

    #[test]
    fn common_mode_examples() {
        assert_eq!(
            common_mode_voltage(&PhaseTriple::new(1.0, -0.5, -0.5)),
            -0.25
        );
        assert_eq!(
            common_mode_voltage(&PhaseTriple::new(0.866, -0.866, 0.0)),
            0.0
        );
        assert_eq!(common_mode_voltage(&PhaseTriple::new(0.3, -0.3, 0.1)), 0.0);
    }

    #[test]
    fn carrier_counts() {
        let cfg = DriveConfig::default();
        assert_eq!(carrier_value(0, &cfg), 125_000);
        assert_eq!(carrier_value(24_999, &cfg), 149_999);
        assert_eq!(carrier_value(25_000, &cfg), 125_000);
        assert_eq!(carrier_value(12_500, &cfg), 137_500);
    }

    #[test]
    fn soft_start_ramp() {
        let cfg = DriveConfig {
            m_target: 0.6,
            soft_start_duration: 1.0,
            ..Default::default()
        };
        assert_eq!(soft_start_m(0.0, &cfg), 0.0);
        assert_abs_diff_eq!(soft_start_m(0.5, &cfg), 0.3, epsilon = 1e-15);
        assert_eq!(soft_start_m(1.0, &cfg), 0.6);
        assert_eq!(soft_start_m(7.0, &cfg), 0.6);
        let hard = DriveConfig {
            soft_start_duration: 0.0,
            ..cfg
        };
        assert_eq!(soft_start_m(0.0, &hard), 0.6);
    }

    fn duty(reference: u32, cfg: &DriveConfig) -> f64 {
        let p = u64::from(cfg.carrier_period());
        let on = (0..p)
            .filter(|&c| gate_compare(reference, carrier_value(c, cfg)))
            .count();
        on as f64 / p as f64
    }

    #[test]
    fn compare_duty_by_enumeration() {
        let cfg = DriveConfig::default();
        assert_eq!(duty(137_500, &cfg), 0.5);
        // The carrier never reaches carrier_hi, so a full-scale reference is
        // on for the whole period.
        assert_eq!(duty(150_000, &cfg), 1.0);
        assert_eq!(duty(149_999, &cfg), 1.0 - 1.0 / 25_000.0);
        assert_eq!(duty(125_000, &cfg), 0.0);
    }

    #[test]
    fn fundamental_amplitudes() {
        assert_eq!(
            fundamental_amplitude(PwmScheme::Spwm, 1.0, 120.0).unwrap(),
            60.0
        );
        assert_abs_diff_eq!(
            fundamental_amplitude(PwmScheme::Svpwm, M_LIMIT_INJECTED, 120.0).unwrap(),
            69.282_032_302_755,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            fundamental_amplitude(PwmScheme::Spwm, 0.4, 120.0).unwrap(),
            24.0,
            epsilon = 1e-12
        );
        assert!(fundamental_amplitude(PwmScheme::Spwm, 1.01, 120.0).is_err());
        assert!(fundamental_amplitude(PwmScheme::ThiSpwm, 1.16, 120.0).is_err());
        assert!(fundamental_amplitude(PwmScheme::Svpwm, 0.0, 120.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DriveConfig::default().validate().is_ok());
        let bad = |f: fn(&mut DriveConfig)| {
            let mut c = DriveConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.f_ref = 120.0));
        assert!(bad(|c| c.decimation = 7));
        assert!(bad(|c| c.decimation = 0));
        assert!(bad(|c| c.f_carrier = 5000.0));
        assert!(bad(|c| c.m_target = 1.2));
        assert!(bad(|c| c.m_target = 1.1));
        assert!(!bad(|c| {
            c.scheme = PwmScheme::Svpwm;
            c.m_target = 1.15;
        }));
        assert!(bad(|c| c.dead_time = -1e-6));
        assert!(bad(|c| c.carrier_hi = c.carrier_lo));
    }

    #[test]
    fn linear_range_limits() {
        let l = lut();
        let cfg = DriveConfig::default();
        assert!(reference_in_range(PwmScheme::Spwm, 1.0, &l, &cfg));
        assert!(!reference_in_range(PwmScheme::Spwm, 1.001, &l, &cfg));
        for s in [PwmScheme::ThiSpwm, PwmScheme::Svpwm] {
            assert!(reference_in_range(s, M_LIMIT_INJECTED - 1e-3, &l, &cfg));
            assert!(!reference_in_range(s, M_LIMIT_INJECTED + 1e-3, &l, &cfg));
        }
    }

    fn run_ticks(cfg: &DriveConfig, n: usize) -> Vec<GateState> {
        let mut d = Drive::new(cfg).unwrap();
        (0..n).map(|_| d.tick()).collect()
    }

    #[test]
    fn zero_index_gives_half_duty() {
        let cfg = DriveConfig {
            m_target: 0.0,
            ..Default::default()
        };
        let ticks_per_period = 2500;
        let gates = run_ticks(&cfg, 10 * ticks_per_period);
        for k in 0..3 {
            let on = gates.iter().filter(|g| g.upper[k]).count();
            assert_eq!(on, gates.len() / 2);
        }
    }

    #[test]
    fn one_pulse_per_carrier_period() {
        let cfg = DriveConfig {
            m_target: 0.6,
            ..Default::default()
        };
        let per = 2500;
        // Half a fundamental period of carrier cycles plus margin.
        let gates = run_ticks(&cfg, per * 40);
        for k in 0..3 {
            for chunk in gates.chunks(per) {
                let mut rising = 0;
                let mut falling = 0;
                for w in chunk.windows(2) {
                    match (w[0].upper[k], w[1].upper[k]) {
                        (false, true) => rising += 1,
                        (true, false) => falling += 1,
                        _ => {}
                    }
                }
                // The sawtooth wraps at the chunk boundary, which is where
                // the leg turns back on.
                assert_eq!((rising, falling), (0, 1), "leg {k}");
                assert!(chunk[0].upper[k]);
            }
        }
    }

    #[test]
    fn single_pulse_over_one_second() {
        for scheme in PwmScheme::ALL {
            let cfg = DriveConfig {
                scheme,
                m_target: 0.6,
                ..Default::default()
            };
            let mut drive = Drive::new(&cfg).unwrap();
            let per = cfg.carrier_period() / cfg.decimation;
            let mut prev = drive.tick();
            let mut rising = [0u32; 3];
            for t in 1..cfg.tick_hz() as u32 {
                let g = drive.tick();
                for (k, count) in rising.iter_mut().enumerate() {
                    if g.upper[k] && !prev.upper[k] {
                        assert_eq!(t % per, 0, "{scheme} leg {k} retriggered at tick {t}");
                        *count += 1;
                    }
                }
                prev = g;
            }
            assert_eq!(rising, [3999; 3], "{scheme}");
        }
    }

    #[test]
    fn pattern_repeats_each_fundamental_period() {
        let cfg = DriveConfig {
            m_target: 0.6,
            ..Default::default()
        };
        // 60 Hz at 10 MHz ticks: 166_667 ticks per period (rounded). The
        // carrier is 200/3 times the fundamental, so the local duty repeats
        // every period and the exact gate pattern every third period.
        let per = 166_667;
        let exact = 500_000;
        let gates = run_ticks(&cfg, exact + per);

        let carrier = 2500;
        let duty_at = |k: usize, start: usize| {
            gates[start..start + carrier]
                .iter()
                .filter(|g| g.upper[k])
                .count() as f64
                / carrier as f64
        };
        for k in 0..3 {
            let worst = (0..per - carrier)
                .step_by(97)
                .map(|i| (duty_at(k, i) - duty_at(k, i + per)).abs())
                .fold(0.0, f64::max);
            assert!(worst < 0.03, "leg {k}: duty drift {worst}");
        }

        let mismatches = (0..per)
            .filter(|&i| gates[i].upper != gates[i + exact].upper)
            .count();
        assert!(mismatches < 50, "{mismatches} mismatches");
    }

    #[test]
    fn dead_time_is_exact() {
        let cfg = DriveConfig {
            m_target: 0.6,
            dead_time: 2e-6,
            ..Default::default()
        };
        assert_eq!(cfg.dead_ticks(), 20);
        let gates = run_ticks(&cfg, 2500 * 8);
        for k in 0..3 {
            let mut run = 0;
            let mut runs = vec![];
            for g in &gates {
                assert!(!(g.upper[k] && g.lower[k]));
                if g.leg(k) == LegState::Off {
                    run += 1;
                } else if run > 0 {
                    runs.push(run);
                    run = 0;
                }
            }
            assert!(!runs.is_empty());
            assert!(runs.iter().all(|&r| r == 20), "leg {k}: {runs:?}");
        }
    }

    #[test]
    fn deterministic_streams() {
        let cfg = DriveConfig {
            scheme: PwmScheme::Svpwm,
            soft_start_duration: 0.01,
            dead_time: 1e-6,
            ..Default::default()
        };
        assert_eq!(run_ticks(&cfg, 50_000), run_ticks(&cfg, 50_000));
        let d = Drive::new(&cfg).unwrap();
        let (a, ga) = drive_tick(&d);
        let (b, gb) = drive_tick(&d);
        assert_eq!(ga, gb);
        assert_eq!(a.state(), b.state());
    }

    proptest! {
        #[test]
        fn injected_schemes_differ_by_zero_sequence(index in 0usize..3600) {
            let l = lut();
            let sp = reference_triple(index, &l, PwmScheme::Spwm);
            let sv = reference_triple(index, &l, PwmScheme::Svpwm);
            let th = reference_triple(index, &l, PwmScheme::ThiSpwm);
            let g = PwmScheme::ThiSpwm.shape_gain();
            let d_sv = [sv.a - sp.a, sv.b - sp.b, sv.c - sp.c];
            let d_th = [th.a / g - sp.a, th.b / g - sp.b, th.c / g - sp.c];
            for d in [d_sv, d_th] {
                prop_assert!((d[0] - d[1]).abs() < 1e-12 && (d[1] - d[2]).abs() < 1e-12);
            }
            prop_assert!(((sv.a - sv.b) - (sp.a - sp.b)).abs() < 1e-12);
            prop_assert!(((sv.c - sv.a) - (sp.c - sp.a)).abs() < 1e-12);
        }

        #[test]
        fn references_bounded_in_linear_range(index in 0usize..3600, scheme_ix in 0usize..3) {
            let scheme = PwmScheme::ALL[scheme_ix];
            let t = reference_triple(index, &lut(), scheme);
            let m = scheme.linear_limit() / scheme.shape_gain();
            for v in t.to_array() {
                prop_assert!((m * v).abs() <= 1.0 + 2.0 * Q);
            }
        }
    }
}
