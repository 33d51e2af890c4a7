//! Two-level inverter feeding a delta-connected load.
//!
//! Windings see the line-line voltages. Winding ("phase") currents are the
//! integrated states; line currents are differences of adjacent winding
//! currents. The induction machine is a linear-magnetics flux-state model in
//! the stationary two-axis frame, integrated with fixed-step RK4.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modulator::{Drive, DriveConfig, GateState, LegState};

const SQRT3_2: f64 = 0.866_025_403_784_438_6;
const FRAC_1_SQRT_3: f64 = 0.577_350_269_189_625_8;

/// Pole voltages referenced to the DC-bus midpoint. A leg in dead time
/// keeps the level given in `held`.
#[inline]
pub fn pole_voltages(g: &GateState, vdc: f64, held: &[f64; 3]) -> [f64; 3] {
    let mut out = *held;
    for (k, v) in out.iter_mut().enumerate() {
        match g.leg(k) {
            LegState::Upper => *v = vdc / 2.0,
            LegState::Lower => *v = -vdc / 2.0,
            LegState::Off => {}
        }
    }
    out
}

/// `(vUV, vVW, vWU)` from pole voltages.
#[inline]
pub fn line_voltages(poles: &[f64; 3]) -> [f64; 3] {
    [
        poles[0] - poles[1],
        poles[1] - poles[2],
        poles[2] - poles[0],
    ]
}

/// Line currents `(iU, iV, iW)` from delta winding currents `(iUV, iVW, iWU)`.
#[inline]
pub fn line_currents(winding: &[f64; 3]) -> [f64; 3] {
    [
        winding[0] - winding[2],
        winding[1] - winding[0],
        winding[2] - winding[1],
    ]
}

/// Delta-connected series R-L, per winding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlLoad {
    pub r: f64,
    pub l: f64,
}

impl RlLoad {
    pub fn new(r: f64, l: f64) -> Result<Self> {
        let load = Self { r, l };
        load.validate()?;
        Ok(load)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.l > 0.0 && self.r.is_finite() && self.l.is_finite()) {
            return Err(Error::param("rl", "r and l must be positive and finite"));
        }
        Ok(())
    }

    /// Largest step accepted by [`rl_step`], `L / (10 R)`.
    pub fn max_dt(&self) -> f64 {
        self.l / (10.0 * self.r)
    }
}

impl Default for RlLoad {
    fn default() -> Self {
        Self { r: 10.0, l: 25e-3 }
    }
}

/// One trapezoidal step of `L di/dt = v - R i` per winding, with `v` held
/// constant over the step.
pub fn rl_step(currents: &[f64; 3], v: &[f64; 3], load: &RlLoad, dt: f64) -> Result<[f64; 3]> {
    if !(dt > 0.0) || dt > load.max_dt() {
        return Err(Error::Guard(format!(
            "RL step dt={dt:e} s outside (0, L/(10R) = {:e}]",
            load.max_dt()
        )));
    }
    let a = load.r * dt / (2.0 * load.l);
    let b = dt / load.l;
    let mut out = [0.0; 3];
    for k in 0..3 {
        out[k] = ((1.0 - a) * currents[k] + b * v[k]) / (1.0 + a);
    }
    Ok(out)
}

/// Squirrel-cage induction machine parameters (per winding, delta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorModel {
    pub rs: f64,
    pub rr: f64,
    pub lls: f64,
    pub llr: f64,
    pub lm: f64,
    pub j: f64,
    pub b: f64,
    pub pole_pairs: u32,
    /// Pin the rotor at standstill.
    pub locked_rotor: bool,
}

impl Default for MotorModel {
    /// Plausible 200 W, 4-pole scale. Not nameplate data.
    fn default() -> Self {
        Self {
            rs: 11.0,
            rr: 8.0,
            lls: 35e-3,
            llr: 35e-3,
            lm: 0.55,
            j: 0.002,
            b: 1e-4,
            pole_pairs: 2,
            locked_rotor: false,
        }
    }
}

impl MotorModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rs", self.rs),
            ("rr", self.rr),
            ("lls", self.lls),
            ("llr", self.llr),
            ("lm", self.lm),
            ("j", self.j),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("{v} must be positive and finite"),
                ));
            }
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(Error::param("b", "must be finite and >= 0"));
        }
        if self.pole_pairs == 0 {
            return Err(Error::param("pole_pairs", "must be >= 1"));
        }
        Ok(())
    }

    pub fn ls(&self) -> f64 {
        self.lls + self.lm
    }

    pub fn lr(&self) -> f64 {
        self.llr + self.lm
    }

    fn inv_det(&self) -> f64 {
        1.0 / (self.ls() * self.lr() - self.lm * self.lm)
    }

    /// Synchronous mechanical speed for supply frequency `f` in Hz.
    pub fn synchronous_speed(&self, f: f64) -> f64 {
        TAU * f / f64::from(self.pole_pairs)
    }
}

/// Electrical and mechanical state of the machine.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    /// Stator flux linkage, (alpha, beta).
    pub psi_s: [f64; 2],
    /// Rotor flux linkage, (alpha, beta).
    pub psi_r: [f64; 2],
    /// Rotor electrical speed, rad/s.
    pub omega_r: f64,
    /// Rotor electrical angle, rad, wrapped to [0, 2pi).
    pub theta_r: f64,
}

impl PlantState {
    /// Stator current (alpha, beta).
    pub fn stator_current(&self, m: &MotorModel) -> [f64; 2] {
        let k = m.inv_det();
        [
            k * (m.lr() * self.psi_s[0] - m.lm * self.psi_r[0]),
            k * (m.lr() * self.psi_s[1] - m.lm * self.psi_r[1]),
        ]
    }

    /// Rotor current (alpha, beta), referred to the stator.
    pub fn rotor_current(&self, m: &MotorModel) -> [f64; 2] {
        let k = m.inv_det();
        [
            k * (m.ls() * self.psi_r[0] - m.lm * self.psi_s[0]),
            k * (m.ls() * self.psi_r[1] - m.lm * self.psi_s[1]),
        ]
    }

    /// Delta winding currents `(iUV, iVW, iWU)`.
    pub fn winding_currents(&self, m: &MotorModel) -> [f64; 3] {
        let [ia, ib] = self.stator_current(m);
        [ia, -0.5 * ia + SQRT3_2 * ib, -0.5 * ia - SQRT3_2 * ib]
    }

    pub fn torque(&self, m: &MotorModel) -> f64 {
        let [ia, ib] = self.stator_current(m);
        1.5 * f64::from(m.pole_pairs) * (self.psi_s[0] * ib - self.psi_s[1] * ia)
    }

    /// Mechanical speed, rad/s.
    pub fn speed(&self, m: &MotorModel) -> f64 {
        self.omega_r / f64::from(m.pole_pairs)
    }

    fn is_finite(&self) -> bool {
        self.psi_s.iter().chain(&self.psi_r).all(|v| v.is_finite())
            && self.omega_r.is_finite()
            && self.theta_r.is_finite()
    }
}

/// Two-axis components of delta winding voltages.
#[inline]
pub fn clarke(v: &[f64; 3]) -> [f64; 2] {
    [
        (2.0 * v[0] - v[1] - v[2]) / 3.0,
        (v[1] - v[2]) * FRAC_1_SQRT_3,
    ]
}

type Deriv = [f64; 6];

fn im_derivative(x: &Deriv, v: &[f64; 2], m: &MotorModel, t_load: f64) -> Deriv {
    let s = PlantState {
        psi_s: [x[0], x[1]],
        psi_r: [x[2], x[3]],
        omega_r: if m.locked_rotor { 0.0 } else { x[4] },
        theta_r: x[5],
    };
    let is = s.stator_current(m);
    let ir = s.rotor_current(m);
    let w = s.omega_r;
    let p = f64::from(m.pole_pairs);
    let dw = if m.locked_rotor {
        0.0
    } else {
        p / m.j * (s.torque(m) - t_load - m.b * w / p)
    };
    [
        v[0] - m.rs * is[0],
        v[1] - m.rs * is[1],
        -m.rr * ir[0] - w * s.psi_r[1],
        -m.rr * ir[1] + w * s.psi_r[0],
        dw,
        w,
    ]
}

/// One RK4 step of the machine with winding (line-line) voltages `v_lines`
/// held over the step.
pub fn im_step(
    state: &PlantState,
    v_lines: &[f64; 3],
    motor: &MotorModel,
    t_load: f64,
    dt: f64,
) -> Result<PlantState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Guard(format!(
            "machine step dt={dt:e} must be positive"
        )));
    }
    if !(v_lines.iter().all(|v| v.is_finite()) && t_load.is_finite() && state.is_finite()) {
        return Err(Error::Guard("non-finite machine input".into()));
    }
    let v = clarke(v_lines);
    let x0: Deriv = [
        state.psi_s[0],
        state.psi_s[1],
        state.psi_r[0],
        state.psi_r[1],
        state.omega_r,
        state.theta_r,
    ];
    let add = |a: &Deriv, k: &Deriv, h: f64| {
        let mut o = *a;
        for i in 0..6 {
            o[i] += h * k[i];
        }
        o
    };
    let k1 = im_derivative(&x0, &v, motor, t_load);
    let k2 = im_derivative(&add(&x0, &k1, dt / 2.0), &v, motor, t_load);
    let k3 = im_derivative(&add(&x0, &k2, dt / 2.0), &v, motor, t_load);
    let k4 = im_derivative(&add(&x0, &k3, dt), &v, motor, t_load);
    let mut x = x0;
    for i in 0..6 {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    let next = PlantState {
        psi_s: [x[0], x[1]],
        psi_r: [x[2], x[3]],
        omega_r: if motor.locked_rotor { 0.0 } else { x[4] },
        theta_r: x[5].rem_euclid(TAU),
    };
    if !next.is_finite() {
        return Err(Error::Guard("machine state diverged".into()));
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Load {
    Rl(RlLoad),
    Motor(MotorModel),
}

impl Load {
    pub fn validate(&self) -> Result<()> {
        match self {
            Load::Rl(l) => l.validate(),
            Load::Motor(m) => m.validate(),
        }
    }
}

/// Plant integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Integration step; must be a whole number of gate ticks.
    pub dt: f64,
    /// Shaft load torque, N*m.
    pub t_load: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            dt: 1e-6,
            t_load: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub unit: String,
    pub data: Vec<f64>,
}

/// Echo of everything that produced a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMetadata {
    pub drive: DriveConfig,
    pub load: Option<Load>,
    pub plant: PlantConfig,
    pub carrier: String,
}

/// Uniformly sampled channels of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub sample_period: f64,
    pub channels: Vec<Channel>,
    pub metadata: Option<TraceMetadata>,
}

impl Trace {
    pub fn new(sample_period: f64, channels: Vec<Channel>) -> Result<Self> {
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::param("sample_period", "must be positive"));
        }
        if let Some(first) = channels.first() {
            if channels.iter().any(|c| c.data.len() != first.data.len()) {
                return Err(Error::param("channels", "lengths differ"));
            }
        }
        Ok(Self {
            sample_period,
            channels,
            metadata: None,
        })
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.data.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.sample_period
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.data.as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.channel(name)
            .ok_or_else(|| Error::param("channel", format!("trace has no channel `{name}`")))
    }
}

const CHANNELS: [(&str, &str); 13] = [
    ("v_uv", "V"),
    ("v_vw", "V"),
    ("v_wu", "V"),
    ("v_u", "V"),
    ("v_v", "V"),
    ("v_w", "V"),
    ("i_u", "A"),
    ("i_v", "A"),
    ("i_w", "A"),
    ("i_uv", "A"),
    ("i_vw", "A"),
    ("i_wu", "A"),
    ("m", "1"),
];

fn ratio(what: &str, num: f64, den: f64) -> Result<u64> {
    let r = num / den;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::param(
            "simulate",
            format!("{what} must be a whole number of gate ticks (got {r})"),
        ));
    }
    Ok(n as u64)
}

/// Runs the drive and plant on the gate tick and samples at `sample_hz`.
///
/// The plant advances every `plant.dt` using the line-line voltages
/// averaged over the gate ticks of that step; sampled voltage channels are
/// instantaneous.
pub fn simulate(
    cfg: &DriveConfig,
    load: &Load,
    plant: &PlantConfig,
    duration: f64,
    sample_hz: f64,
) -> Result<Trace> {
    let mut drive = Drive::new(cfg)?;
    load.validate()?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::param(
            "duration",
            format!("{duration} must be positive"),
        ));
    }
    if !(sample_hz >= 10.0 * cfg.f_carrier) {
        return Err(Error::param(
            "sample_hz",
            format!(
                "{sample_hz} below 10 x carrier ({} Hz)",
                10.0 * cfg.f_carrier
            ),
        ));
    }
    let tick_hz = cfg.tick_hz();
    let sample_ticks = ratio("sample period", tick_hz, sample_hz)?;
    let plant_ticks = ratio("plant dt", plant.dt * tick_hz, 1.0)?;
    let dt = plant_ticks as f64 / tick_hz;
    if let Load::Rl(rl) = load {
        if dt > rl.max_dt() {
            return Err(Error::Guard(format!(
                "plant dt={dt:e} s exceeds L/(10R) = {:e} s",
                rl.max_dt()
            )));
        }
    }

    let n_ticks = (duration * tick_hz).round() as u64;
    let n_samples = n_ticks.div_ceil(sample_ticks) as usize;
    let motor = match load {
        Load::Motor(m) => Some(*m),
        Load::Rl(_) => None,
    };
    let mut data: Vec<Vec<f64>> = (0..CHANNELS.len() + usize::from(motor.is_some()))
        .map(|_| Vec::with_capacity(n_samples))
        .collect();

    let mut held = [0.0; 3];
    let mut winding = [0.0; 3];
    let mut machine = PlantState::default();
    let mut v_sum = [0.0; 3];
    let inv_plant = 1.0 / plant_ticks as f64;

    for n in 0..n_ticks {
        let gates = drive.tick();
        let poles = pole_voltages(&gates, cfg.vdc, &held);
        held = poles;
        let lines = line_voltages(&poles);

        if n % sample_ticks == 0 {
            let line_i = line_currents(&winding);
            let row = lines
                .iter()
                .chain(&poles)
                .chain(&line_i)
                .chain(&winding)
                .chain(std::iter::once(&drive.state().m));
            for (col, v) in data.iter_mut().zip(row) {
                col.push(*v);
            }
            if let Some(m) = &motor {
                data[CHANNELS.len()].push(machine.speed(m));
            }
        }

        for k in 0..3 {
            v_sum[k] += lines[k];
        }
        if (n + 1) % plant_ticks == 0 {
            let v_avg = v_sum.map(|s| s * inv_plant);
            v_sum = [0.0; 3];
            match load {
                Load::Rl(rl) => winding = rl_step(&winding, &v_avg, rl, dt)?,
                Load::Motor(m) => {
                    machine = im_step(&machine, &v_avg, m, plant.t_load, dt)?;
                    winding = machine.winding_currents(m);
                }
            }
        }
    }

    let mut channels: Vec<Channel> = CHANNELS
        .iter()
        .zip(data.iter_mut())
        .map(|((name, unit), d)| Channel {
            name: (*name).into(),
            unit: (*unit).into(),
            data: std::mem::take(d),
        })
        .collect();
    if motor.is_some() {
        channels.push(Channel {
            name: "speed".into(),
            unit: "rad/s".into(),
            data: data.pop().unwrap_or_default(),
        });
    }
    let mut trace = Trace::new(sample_ticks as f64 / tick_hz, channels)?;
    trace.metadata = Some(TraceMetadata {
        drive: cfg.clone(),
        load: Some(*load),
        plant: *plant,
        carrier: "sawtooth".into(),
    });
    Ok(trace)
}
