//! Single-device hybrid thermal model of a cooling TCL.
//!
//! Room temperature follows a first-order linear ODE whose forcing depends on
//! the compressor mode; the mode switches with hysteresis at the band edges.
//! Units: hours, °C, kW, kWh/°C, °C/kW.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which heat-rate term enters the closed-form cycle times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatRateMode {
    /// `R·Q` with `Q = cop·p`, consistent with the ODE.
    #[default]
    CopTimesP,
    /// `R·p`, the electrical input power taken literally.
    PLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    /// Thermal capacity, kWh/°C.
    pub capacitance: f64,
    /// Thermal resistance, °C/kW.
    pub resistance: f64,
    /// Electrical input power, kW.
    pub power: f64,
    pub cop: f64,
    /// Heat extraction rate `cop·power`, kW.
    pub heat_rate: f64,
    #[serde(default)]
    pub heat_rate_mode: HeatRateMode,
}

impl DeviceParams {
    pub fn new(capacitance: f64, resistance: f64, power: f64, cop: f64) -> Result<Self> {
        for (name, v) in [
            ("capacitance", capacitance),
            ("resistance", resistance),
            ("power", power),
            ("cop", cop),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            capacitance,
            resistance,
            power,
            cop,
            heat_rate: cop * power,
            heat_rate_mode: HeatRateMode::CopTimesP,
        })
    }

    pub fn with_heat_rate_mode(mut self, mode: HeatRateMode) -> Self {
        self.heat_rate_mode = mode;
        self
    }

    /// Time constant `C·R` in hours.
    pub fn time_constant(&self) -> f64 {
        self.capacitance * self.resistance
    }

    /// Temperature drop `R·Q` sustained by a running compressor.
    pub fn cooling_drop(&self) -> f64 {
        self.resistance * self.heat_rate
    }

    fn cycle_drop(&self) -> f64 {
        match self.heat_rate_mode {
            HeatRateMode::CopTimesP => self.resistance * self.heat_rate,
            HeatRateMode::PLiteral => self.resistance * self.power,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisBand {
    pub lower: f64,
    pub upper: f64,
    pub setpoint: f64,
    pub deadband: f64,
}

impl HysteresisBand {
    pub fn new(setpoint: f64, deadband: f64) -> Result<Self> {
        if !(deadband > 0.0 && deadband.is_finite()) || !setpoint.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "deadband must be positive (got {deadband}) and setpoint finite (got {setpoint})"
            )));
        }
        Ok(Self {
            lower: setpoint - 0.5 * deadband,
            upper: setpoint + 0.5 * deadband,
            setpoint,
            deadband,
        })
    }

    /// The same band moved up by `beta` °C.
    pub fn shifted(&self, beta: f64) -> Self {
        Self {
            lower: self.lower + beta,
            upper: self.upper + beta,
            setpoint: self.setpoint + beta,
            deadband: self.deadband,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Off,
    On,
}

impl Mode {
    pub fn indicator(self) -> f64 {
        match self {
            Mode::Off => 0.0,
            Mode::On => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceState {
    pub theta: f64,
    pub mode: Mode,
}

/// Advance the room temperature by `dt` hours with the mode held fixed, using
/// the exact exponential solution.
pub fn temperature_step(
    state: DeviceState,
    ambient: f64,
    params: &DeviceParams,
    dt: f64,
) -> Result<DeviceState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let equilibrium = ambient - state.mode.indicator() * params.cooling_drop();
    let decay = (-dt / params.time_constant()).exp();
    Ok(DeviceState {
        theta: equilibrium + (state.theta - equilibrium) * decay,
        mode: state.mode,
    })
}

/// Hysteresis switching rule for cooling.
pub fn mode_update(theta: f64, prev: Mode, band: &HysteresisBand) -> Mode {
    if theta > band.upper {
        Mode::On
    } else if theta < band.lower {
        Mode::Off
    } else {
        prev
    }
}

/// Durations of one ON phase and one OFF phase, in hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleTimes {
    pub on: f64,
    pub off: f64,
}

impl CycleTimes {
    pub fn period(&self) -> f64 {
        self.on + self.off
    }

    pub fn duty(&self) -> f64 {
        let period = self.period();
        if period > 0.0 {
            self.on / period
        } else {
            0.0
        }
    }
}

fn ln_ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if num > 0.0 && den > 0.0 {
        Ok((num / den).ln())
    } else {
        Err(Error::Domain(format!(
            "{what}: log argument {num}/{den} is not positive"
        )))
    }
}

/// Steady ON/OFF durations inside `band` at constant `ambient`.
pub fn steady_cycle_times(
    params: &DeviceParams,
    band: &HysteresisBand,
    ambient: f64,
) -> Result<CycleTimes> {
    if !(ambient > band.upper) {
        return Err(Error::Domain(format!(
            "ambient {ambient} °C is not above the band upper edge {} °C",
            band.upper
        )));
    }
    let cr = params.time_constant();
    let drop = params.cycle_drop();
    let on = cr
        * ln_ratio(
            drop + band.upper - ambient,
            drop + band.lower - ambient,
            "on time",
        )?;
    let off = cr * ln_ratio(ambient - band.lower, ambient - band.upper, "off time")?;
    Ok(CycleTimes { on, off })
}

/// Steady cycle times after the band has been raised by `beta`.
pub fn shifted_cycle_times(
    params: &DeviceParams,
    band: &HysteresisBand,
    ambient: f64,
    beta: f64,
) -> Result<CycleTimes> {
    check_shift(band, ambient, beta)?;
    steady_cycle_times(params, &band.shifted(beta), ambient)
}

/// Time for an OFF device to warm from the old upper edge to the new one.
pub fn migration_delay(
    params: &DeviceParams,
    band: &HysteresisBand,
    ambient: f64,
    beta: f64,
) -> Result<f64> {
    check_shift(band, ambient, beta)?;
    Ok(params.time_constant()
        * ln_ratio(
            ambient - band.upper,
            ambient - band.upper - beta,
            "migration delay",
        )?)
}

fn check_shift(band: &HysteresisBand, ambient: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if !(ambient > band.upper + beta) {
        return Err(Error::Domain(format!(
            "ambient {ambient} °C does not exceed the shifted upper edge {} °C",
            band.upper + beta
        )));
    }
    Ok(())
}
