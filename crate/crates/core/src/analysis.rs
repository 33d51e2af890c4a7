//! Harmonic decomposition, THD and peak extraction over integer-cycle
//! windows.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulator::{DriveConfig, PwmScheme};
use crate::plant::{self, Load, PlantConfig, Trace};

/// Largest tolerated mismatch, in samples, between the requested window
/// length and the nearest whole number of samples.
pub const WINDOW_TOLERANCE_SAMPLES: f64 = 0.1;

/// Harmonic magnitudes (peak, channel units) of one analysis window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub fundamental_hz: f64,
    pub fundamental: f64,
    /// Magnitudes of orders 2..=H, in order.
    pub harmonics: Vec<f64>,
    pub start: f64,
    pub cycles: u32,
}

impl Spectrum {
    /// Highest analyzed order.
    pub fn max_order(&self) -> usize {
        self.harmonics.len() + 1
    }

    /// Magnitude of order `h` (1 is the fundamental).
    pub fn magnitude(&self, h: usize) -> Option<f64> {
        match h {
            0 => None,
            1 => Some(self.fundamental),
            _ => self.harmonics.get(h - 2).copied(),
        }
    }
}

/// `min(100, Nyquist / f_fund)`.
pub fn default_harmonics(sample_period: f64, f_fund: f64) -> usize {
    let nyquist = (0.5 / sample_period / f_fund).floor() as usize;
    nyquist.min(100)
}

/// Sample index range of an integer-cycle window.
fn window(
    len: usize,
    sample_period: f64,
    f_fund: f64,
    start: f64,
    cycles: u32,
) -> Result<(usize, usize)> {
    if !(f_fund > 0.0 && f_fund.is_finite()) || cycles == 0 {
        return Err(Error::Window(format!(
            "need f_fund > 0 and cycles >= 1 (got {f_fund} Hz, {cycles})"
        )));
    }
    if !(start >= 0.0) {
        return Err(Error::Window(format!("start {start} s is negative")));
    }
    let exact = f64::from(cycles) / (f_fund * sample_period);
    let n = exact.round();
    if (exact - n).abs() > WINDOW_TOLERANCE_SAMPLES {
        return Err(Error::Window(format!(
            "{cycles} cycles of {f_fund} Hz span {exact:.4} samples, not a whole number"
        )));
    }
    let s0 = (start / sample_period).round() as usize;
    let n = n as usize;
    if s0 + n > len {
        return Err(Error::Window(format!(
            "window [{start}, {}] s exceeds the {:.6} s trace",
            start + f64::from(cycles) / f_fund,
            len as f64 * sample_period
        )));
    }
    Ok((s0, n))
}

/// Harmonic magnitudes `(2/N)|sum x[n] e^{-j 2 pi h c n / N}|` for orders
/// `1..=h_max` over `cycles` periods starting at `start`.
///
/// Each order is a single DFT bin evaluated with an exact twiddle table
/// indexed by `(h * cycles * n) mod N`, so no phase error accumulates over
/// long windows.
pub fn spectrum(
    x: &[f64],
    sample_period: f64,
    f_fund: f64,
    start: f64,
    cycles: u32,
    h_max: usize,
) -> Result<Spectrum> {
    if h_max < 2 {
        return Err(Error::Window(format!(
            "need at least order 2, got H={h_max}"
        )));
    }
    let (s0, n) = window(x.len(), sample_period, f_fund, start, cycles)?;
    let c = cycles as usize;
    if 2 * h_max * c > n {
        return Err(Error::Window(format!(
            "order {h_max} at {f_fund} Hz exceeds Nyquist for {} Hz sampling",
            1.0 / sample_period
        )));
    }
    let xs = &x[s0..s0 + n];
    let twiddle: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            (a.cos(), a.sin())
        })
        .collect();

    let bin = |h: usize| {
        let step = (h * c) % n;
        let (mut re, mut im) = (0.0, 0.0);
        let mut idx = 0;
        for &v in xs {
            let (cs, sn) = twiddle[idx];
            re += v * cs;
            im -= v * sn;
            idx += step;
            if idx >= n {
                idx -= n;
            }
        }
        2.0 / n as f64 * re.hypot(im)
    };

    let mags: Vec<f64> = (1..=h_max).into_par_iter().map(bin).collect();
    Ok(Spectrum {
        fundamental_hz: f_fund,
        fundamental: mags[0],
        harmonics: mags[1..].to_vec(),
        start: s0 as f64 * sample_period,
        cycles,
    })
}

/// `sqrt(sum_{h>=2} mag_h^2) / mag_1`.
pub fn thd(s: &Spectrum) -> Result<f64> {
    if !(s.fundamental > 0.0) {
        return Err(Error::ZeroFundamental);
    }
    let sum: f64 = s.harmonics.iter().map(|m| m * m).sum();
    Ok(sum.sqrt() / s.fundamental)
}

/// `max - min` over samples whose time lies in `[start, end]`.
pub fn peak_to_peak(x: &[f64], sample_period: f64, start: f64, end: f64) -> Result<f64> {
    if !(end >= start && start >= 0.0) {
        return Err(Error::Window(format!("bad window [{start}, {end}]")));
    }
    let s0 = (start / sample_period).ceil() as usize;
    let s1 = ((end / sample_period).floor() as usize + 1).min(x.len());
    if s0 >= s1 {
        return Err(Error::Window(format!(
            "window [{start}, {end}] s holds no samples of the trace"
        )));
    }
    let (lo, hi) = x[s0..s1]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    Ok(hi - lo)
}

/// Start time of the last `cycles` whole fundamental periods of `x`,
/// after checking that the RMS of each of those periods lies within
/// `max_drift` (relative) of their mean.
pub fn steady_state_start(
    x: &[f64],
    sample_period: f64,
    f_fund: f64,
    cycles: u32,
    max_drift: f64,
) -> Result<f64> {
    let per_exact = 1.0 / (f_fund * sample_period);
    let total = (f64::from(cycles) * per_exact).round() as usize;
    if total > x.len() {
        return Err(Error::Window(format!(
            "trace shorter than {cycles} cycles of {f_fund} Hz"
        )));
    }
    let s0 = x.len() - total;
    let rms: Vec<f64> = (0..cycles as usize)
        .map(|k| {
            let a = s0 + (k as f64 * per_exact).round() as usize;
            let b = s0 + ((k + 1) as f64 * per_exact).round() as usize;
            let seg = &x[a..b.min(x.len())];
            let mean = seg.iter().sum::<f64>() / seg.len() as f64;
            (seg.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / seg.len() as f64).sqrt()
        })
        .collect();
    let mean = rms.iter().sum::<f64>() / rms.len() as f64;
    let drift = rms
        .iter()
        .map(|r| (r - mean).abs() / mean)
        .fold(0.0, f64::max);
    if !(drift < max_drift) {
        return Err(Error::NotSteady {
            drift,
            limit: max_drift,
        });
    }
    Ok(s0 as f64 * sample_period)
}

/// Settings shared by every cell of a scheme comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    /// Simulated time per cell, s.
    pub duration: f64,
    pub sample_hz: f64,
    /// Highest harmonic order; 0 selects [`default_harmonics`].
    pub harmonics: usize,
    /// Steady-state window length in fundamental cycles.
    pub cycles: u32,
    /// Allowed cycle-to-cycle RMS drift inside the window.
    pub max_drift: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            duration: 0.5,
            sample_hz: 1e6,
            harmonics: 0,
            cycles: 6,
            max_drift: 0.01,
        }
    }
}

impl AnalysisSettings {
    pub fn harmonics_for(&self, sample_period: f64, f_fund: f64) -> usize {
        if self.harmonics == 0 {
            default_harmonics(sample_period, f_fund)
        } else {
            self.harmonics
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub scheme: PwmScheme,
    pub m: f64,
    /// THD of the winding (phase) current.
    pub current_thd: f64,
    /// THD of the line-line (phase) voltage.
    pub voltage_thd: f64,
}

/// THD of winding current and line-line voltage for one finished trace.
pub fn trace_thd(trace: &Trace, f_fund: f64, settings: &AnalysisSettings) -> Result<(f64, f64)> {
    let ts = trace.sample_period;
    let h = settings.harmonics_for(ts, f_fund);
    let current = trace.require("i_uv")?;
    let start = steady_state_start(current, ts, f_fund, settings.cycles, settings.max_drift)?;
    let i_thd = thd(&spectrum(current, ts, f_fund, start, settings.cycles, h)?)?;
    let voltage = trace.require("v_uv")?;
    let v_thd = thd(&spectrum(voltage, ts, f_fund, start, settings.cycles, h)?)?;
    Ok((i_thd, v_thd))
}

/// Simulates every `(scheme, m)` cell and reports steady-state THD.
///
/// Rows are ordered by scheme as given, then ascending `m`; cells run in
/// parallel.
pub fn compare_schemes(
    base: &DriveConfig,
    load: &Load,
    plant_cfg: &PlantConfig,
    settings: &AnalysisSettings,
    m_list: &[f64],
    schemes: &[PwmScheme],
) -> Result<Vec<CompareRow>> {
    let mut ms = m_list.to_vec();
    ms.sort_by(f64::total_cmp);
    let cells: Vec<(PwmScheme, f64)> = schemes
        .iter()
        .flat_map(|&s| ms.iter().map(move |&m| (s, m)))
        .collect();

    cells
        .par_iter()
        .map(|&(scheme, m)| {
            let cell = || -> Result<CompareRow> {
                if !(m > 0.0) || m > scheme.linear_limit() + 1e-12 {
                    return Err(Error::param(
                        "m",
                        format!("outside the linear range of {scheme}"),
                    ));
                }
                let cfg = DriveConfig {
                    scheme,
                    m_target: m,
                    ..base.clone()
                };
                let trace =
                    plant::simulate(&cfg, load, plant_cfg, settings.duration, settings.sample_hz)?;
                let (current_thd, voltage_thd) = trace_thd(&trace, cfg.f_ref, settings)?;
                Ok(CompareRow {
                    scheme,
                    m,
                    current_thd,
                    voltage_thd,
                })
            };
            cell().map_err(|e| Error::Cell {
                scheme: scheme.to_string(),
                m,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Soft-start sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// Ramp durations to simulate, s.
    pub durations: Vec<f64>,
    /// Simulated time after the ramp ends, s.
    pub settle: f64,
    /// Extra time after the ramp included in the startup window, s.
    pub startup_margin: f64,
    /// Length of the nominal window, fundamental cycles.
    pub nominal_cycles: u32,
    pub sample_hz: f64,
    /// Channel whose peak-to-peak is reported.
    pub channel: String,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            durations: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            settle: 1.5,
            startup_margin: 0.5,
            nominal_cycles: 3,
            sample_hz: 100e3,
            channel: "i_uv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub soft_start_duration: f64,
    pub startup_pk_pk: f64,
    pub nominal_pk_pk: f64,
}

/// One simulation per ramp duration; rows in ascending duration.
///
/// The startup window is `[0, duration + startup_margin]`, the nominal
/// window the last `nominal_cycles` fundamental periods of the run.
pub fn soft_start_sweep(
    base: &DriveConfig,
    load: &Load,
    plant_cfg: &PlantConfig,
    settings: &SweepSettings,
) -> Result<Vec<SweepRow>> {
    let mut durations = settings.durations.clone();
    durations.sort_by(f64::total_cmp);
    durations
        .par_iter()
        .map(|&d| {
            let cfg = DriveConfig {
                soft_start_duration: d,
                ..base.clone()
            };
            let trace = plant::simulate(
                &cfg,
                load,
                plant_cfg,
                d + settings.settle,
                settings.sample_hz,
            )?;
            let x = trace.require(&settings.channel)?;
            let ts = trace.sample_period;
            let end = trace.duration() - ts;
            let nominal_start = end - f64::from(settings.nominal_cycles) / cfg.f_ref;
            Ok(SweepRow {
                soft_start_duration: d,
                startup_pk_pk: peak_to_peak(x, ts, 0.0, d + settings.startup_margin)?,
                nominal_pk_pk: peak_to_peak(x, ts, nominal_start.max(0.0), end)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const FS: f64 = 96_000.0;

    fn synth(n: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|k| f(k as f64 / FS)).collect()
    }

    fn sine(f0: f64, amp: f64) -> impl Fn(f64) -> f64 {
        move |t| amp * (TAU * f0 * t).sin()
    }

    #[test]
    fn pure_sine() {
        let x = synth(9600, sine(60.0, 1.0));
        let s = spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 100).unwrap();
        assert_abs_diff_eq!(s.fundamental, 1.0, epsilon = 1e-9);
        assert!(s.harmonics.iter().all(|&m| m < 1e-9));
        assert!(thd(&s).unwrap() < 1e-9);
    }

    #[test]
    fn square_wave_series() {
        // Sample midway between edges to avoid sampling the discontinuity.
        let n = 96_000;
        let x: Vec<f64> = (0..n)
            .map(|k| if (k % 1600) < 800 { 1.0 } else { -1.0 })
            .collect();
        let s = spectrum(&x, 1.0 / FS, 60.0, 0.0, 60, 399).unwrap();
        // Discrete square wave: the sampled harmonics follow the aliased
        // series, so compare the low orders to 4/(pi h) loosely and the even
        // orders tightly.
        assert_abs_diff_eq!(
            s.magnitude(3).unwrap(),
            4.0 / (3.0 * std::f64::consts::PI),
            epsilon = 1e-3
        );
        assert!(s.magnitude(2).unwrap() < 1e-9);
        assert!(s.magnitude(4).unwrap() < 1e-9);
        let t = thd(&s).unwrap();
        assert!((t - 0.483_425_847_6).abs() / 0.483_425_847_6 < 5e-3, "{t}");
    }

    #[test]
    fn dc_offset_excluded() {
        let x = synth(9600, |t| {
            3.0 + sine(60.0, 2.0)(t) + 0.5 * (TAU * 300.0 * t).cos()
        });
        let s = spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 50).unwrap();
        assert_abs_diff_eq!(s.fundamental, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.magnitude(5).unwrap(), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn ten_percent_third() {
        let x = synth(9600, |t| sine(60.0, 1.0)(t) + 0.1 * (TAU * 180.0 * t).sin());
        let s = spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 100).unwrap();
        assert_abs_diff_eq!(thd(&s).unwrap(), 0.1, epsilon = 1e-6);
    }

    #[test]
    fn window_errors() {
        let x = synth(9600, sine(60.0, 1.0));
        // 6 cycles of 61 Hz = 9442.6 samples
        assert!(matches!(
            spectrum(&x, 1.0 / FS, 61.0, 0.0, 6, 10),
            Err(Error::Window(_))
        ));
        assert!(spectrum(&x, 1.0 / FS, 60.0, 0.01, 6, 10).is_err());
        assert!(spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 801).is_err());
        assert!(spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 800).is_ok());
        assert!(spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 1).is_err());
        let zero = vec![0.0; 9600];
        let s = spectrum(&zero, 1.0 / FS, 60.0, 0.0, 6, 10).unwrap();
        assert_eq!(thd(&s), Err(Error::ZeroFundamental));
    }

    #[test]
    fn default_order_count() {
        assert_eq!(default_harmonics(1e-6, 60.0), 100);
        assert_eq!(default_harmonics(1.0 / 4000.0, 60.0), 33);
    }

    #[test]
    fn peak_to_peak_cases() {
        let c = vec![2.5; 100];
        assert_eq!(peak_to_peak(&c, 1e-3, 0.0, 0.05).unwrap(), 0.0);
        let x = synth(9600, sine(60.0, 1.0));
        assert_abs_diff_eq!(
            peak_to_peak(&x, 1.0 / FS, 0.0, 0.05).unwrap(),
            2.0,
            epsilon = 1e-3
        );
        assert!(peak_to_peak(&x, 1.0 / FS, 5.0, 6.0).is_err());
    }

    #[test]
    fn steady_window_detects_drift() {
        let x = synth(96_000, sine(60.0, 1.0));
        let start = steady_state_start(&x, 1.0 / FS, 60.0, 6, 0.01).unwrap();
        assert_abs_diff_eq!(start, 0.9, epsilon = 1e-9);
        let growing = synth(96_000, |t| (1.0 + 2.0 * t) * (TAU * 60.0 * t).sin());
        assert!(matches!(
            steady_state_start(&growing, 1.0 / FS, 60.0, 6, 0.01),
            Err(Error::NotSteady { .. })
        ));
    }

    #[test]
    fn matches_fft_oracle() {
        use rustfft::{num_complex::Complex, FftPlanner};
        let x = synth(9600, |t| {
            (TAU * 60.0 * t).sin()
                + 0.3 * (TAU * 420.0 * t + 0.4).cos()
                + 0.05 * (TAU * 6000.0 * t).sin()
        });
        let s = spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 120).unwrap();
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new()
            .plan_fft_forward(buf.len())
            .process(&mut buf);
        for h in 1..=120 {
            let fft = 2.0 / 9600.0 * buf[6 * h].norm();
            assert_abs_diff_eq!(s.magnitude(h).unwrap(), fft, epsilon = 1e-9);
        }
    }

    proptest! {
        #[test]
        fn parseval_for_band_limited(amps in proptest::collection::vec(0.0f64..1.0, 10), phases in proptest::collection::vec(0.0f64..TAU, 10)) {
            let x = synth(9600, |t| {
                (1..=10).map(|h| (amps[h - 1] + if h == 1 { 0.5 } else { 0.0 }) * (TAU * 60.0 * h as f64 * t + phases[h - 1]).sin()).sum::<f64>() + 0.7
            });
            let s = spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 10).unwrap();
            let mean = x.iter().sum::<f64>() / x.len() as f64;
            let rms = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
            let from_bins = ((s.fundamental.powi(2) + s.harmonics.iter().map(|m| m * m).sum::<f64>()) / 2.0).sqrt();
            prop_assert!((from_bins - rms).abs() <= 1e-3 * rms);
        }

        #[test]
        fn scale_equivariance(k in 0.01f64..100.0) {
            let x = synth(9600, |t| (TAU * 60.0 * t).sin() + 0.2 * (TAU * 300.0 * t).sin() + 0.05 * (TAU * 660.0 * t).cos());
            let y: Vec<f64> = x.iter().map(|v| k * v).collect();
            let a = spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 20).unwrap();
            let b = spectrum(&y, 1.0 / FS, 60.0, 0.0, 6, 20).unwrap();
            for h in 1..=20 {
                prop_assert!((b.magnitude(h).unwrap() - k * a.magnitude(h).unwrap()).abs() <= 1e-9 * k);
            }
            prop_assert!((thd(&a).unwrap() - thd(&b).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn time_shift_invariance(shift in 0usize..1600) {
            let x = synth(20_000, |t| (TAU * 60.0 * t).sin() + 0.2 * (TAU * 300.0 * t + 1.0).sin());
            let a = spectrum(&x, 1.0 / FS, 60.0, 0.0, 6, 20).unwrap();
            let b = spectrum(&x, 1.0 / FS, 60.0, shift as f64 / FS, 6, 20).unwrap();
            let (ta, tb) = (thd(&a).unwrap(), thd(&b).unwrap());
            prop_assert!((ta - tb).abs() <= 1e-3 * ta);
        }
    }
}
