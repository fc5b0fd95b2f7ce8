//! Multi-scatterer UAV model: body, vibrating body point and rotor blade tips.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::{db_to_linear, SPEED_OF_LIGHT};

/// Radar-equation parameters shared by every scatterer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    /// Transmit power (W).
    pub transmit_power: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub carrier_frequency: f64,
    pub system_loss: f64,
    pub path_loss: f64,
}

impl LinkBudget {
    pub fn from_db(power_dbm: f64, tx_gain_db: f64, rx_gain_db: f64, carrier_frequency: f64) -> Self {
        Self {
            transmit_power: db_to_linear(power_dbm) * 1e-3,
            tx_gain: db_to_linear(tx_gain_db),
            rx_gain: db_to_linear(rx_gain_db),
            carrier_frequency,
            system_loss: 1.0,
            path_loss: 1.0,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("transmit_power", self.transmit_power),
            ("tx_gain", self.tx_gain),
            ("rx_gain", self.rx_gain),
            ("carrier_frequency", self.carrier_frequency),
            ("system_loss", self.system_loss),
            ("path_loss", self.path_loss),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("link budget {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self::from_db(28.0, 18.0, 18.0, 3.5e9)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyScatterer {
    pub initial_range: f64,
    pub radial_velocity: f64,
    pub rcs: f64,
    pub vibration_amplitude: f64,
    pub vibration_frequency: f64,
    /// Azimuth of the vibration direction (rad).
    pub vibration_azimuth: f64,
    /// Elevation of the UAV seen from the base station (rad).
    pub elevation: f64,
    /// Azimuth of the UAV seen from the base station (rad).
    pub azimuth: f64,
}

impl Default for BodyScatterer {
    fn default() -> Self {
        Self {
            initial_range: 50.0,
            radial_velocity: 5.0,
            rcs: 0.1,
            vibration_amplitude: 0.05,
            vibration_frequency: 100.0,
            vibration_azimuth: 10f64.to_radians(),
            elevation: 30f64.to_radians(),
            azimuth: 0.0,
        }
    }
}

/// Coefficients of the dynamic blade RCS `Σ a_i sin(b_i f_r/100 t' + c_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RcsCoefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl RcsCoefficients {
    pub fn carbon_fiber() -> Self {
        Self {
            a: vec![1.133, 0.425, 0.7121, -0.1588, 0.1046, 0.0027],
            b: vec![356.8, 1445.0, 608.0, 1946.0, 2236.0, 3513.0],
            c: vec![-0.1997, -2.464, 1.695, 1.319, -0.1277, -0.2433],
        }
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotorBlade {
    pub length: f64,
    /// Rotations per second.
    pub rotation_rate: f64,
    pub initial_angle: f64,
    pub elevation: f64,
    pub material: RcsCoefficients,
}

impl Default for RotorBlade {
    fn default() -> Self {
        Self {
            length: 0.5,
            rotation_rate: 80.0,
            initial_angle: 0.0,
            elevation: 30f64.to_radians(),
            material: RcsCoefficients::carbon_fiber(),
        }
    }
}

impl RotorBlade {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(Error::param("blade length must be positive"));
        }
        if !(self.rotation_rate > 0.0) {
            return Err(Error::param("rotation rate must be positive"));
        }
        let m = &self.material;
        if m.a.is_empty() || m.a.len() != m.b.len() || m.a.len() != m.c.len() {
            return Err(Error::param(format!(
                "RCS coefficient vectors must share a nonzero length (a={}, b={}, c={})",
                m.a.len(),
                m.b.len(),
                m.c.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavScene {
    pub body: BodyScatterer,
    pub blades: Vec<RotorBlade>,
    pub link: LinkBudget,
    pub translation: bool,
    pub vibration: bool,
    pub rotation: bool,
}

impl Default for UavScene {
    fn default() -> Self {
        Self {
            body: BodyScatterer::default(),
            blades: vec![RotorBlade::default()],
            link: LinkBudget::default(),
            translation: true,
            vibration: true,
            rotation: true,
        }
    }
}

impl UavScene {
    /// `count` identical blades spread evenly in initial angle.
    pub fn with_blades(mut self, count: usize, template: &RotorBlade) -> Self {
        self.blades = (0..count)
            .map(|p| RotorBlade {
                initial_angle: template.initial_angle + 2.0 * PI * p as f64 / count as f64,
                ..template.clone()
            })
            .collect();
        self
    }

    /// Same scene with only the selected contributions switched on.
    pub fn only(&self, translation: bool, vibration: bool, rotation: bool) -> Self {
        Self {
            translation,
            vibration,
            rotation,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        let b = &self.body;
        if !(b.initial_range > 0.0) {
            return Err(Error::param("initial range must be positive"));
        }
        if b.rcs < 0.0 || b.vibration_amplitude < 0.0 || b.vibration_frequency < 0.0 {
            return Err(Error::param("body RCS and vibration parameters must be non-negative"));
        }
        for blade in &self.blades {
            blade.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScattererKind {
    BodyTranslation,
    BladeTip(usize),
    BodyVibration,
}

/// Radial distance from the base station to a scatterer at time `t`.
pub fn scatterer_range(kind: ScattererKind, t: f64, scene: &UavScene) -> Result<f64> {
    let b = &scene.body;
    let bulk = b.initial_range + b.radial_velocity * t;
    match kind {
        ScattererKind::BodyTranslation => Ok(bulk),
        ScattererKind::BladeTip(p) => {
            let blade = scene
                .blades
                .get(p)
                .ok_or_else(|| Error::param(format!("blade index {p} out of range (P = {})", scene.blades.len())))?;
            Ok(bulk
                + 0.5 * blade.length
                    * blade.elevation.cos()
                    * b.azimuth.cos()
                    * (2.0 * PI * blade.rotation_rate * t + blade.initial_angle).cos())
        }
        ScattererKind::BodyVibration => Ok(bulk
            + b.vibration_amplitude
                * (2.0 * PI * b.vibration_frequency * t).sin()
                * b.elevation.cos()
                * b.vibration_azimuth.cos()
                * b.azimuth.cos()),
    }
}

/// Index of the rotation window containing `t`.
pub fn rotation_gate(t: f64, blade: &RotorBlade) -> usize {
    let shifted = t + blade.initial_angle / (2.0 * PI * blade.rotation_rate);
    (shifted * blade.rotation_rate).floor().max(0.0) as usize
}

/// Dynamic blade RCS. May be negative; the sign is a phase inversion.
pub fn rotor_rcs(t: f64, blade: &RotorBlade) -> f64 {
    let shifted = t + blade.initial_angle / (2.0 * PI * blade.rotation_rate);
    let scale = blade.rotation_rate / 100.0;
    let m = &blade.material;
    // one window is active for any t >= 0 and the phase runs on across windows
    m.a.iter()
        .zip(&m.b)
        .zip(&m.c)
        .map(|((a, b), c)| a * (b * scale * shifted + c).sin())
        .sum()
}

/// Radar-equation echo amplitude for a signed RCS at range `r`.
pub fn scattering_amplitude(rcs: f64, r: f64, link: &LinkBudget) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::param(format!("range must be positive, got {r}")));
    }
    let lambda = link.wavelength();
    Ok(link.transmit_power * link.tx_gain * link.rx_gain * lambda * lambda * rcs
        / ((4.0 * PI).powi(3) * r.powi(4) * link.system_loss * link.path_loss))
}

/// Contribution of one scatterer to the slow-time vector.
pub fn scatterer_echo(kind: ScattererKind, scene: &UavScene, timeline: &[f64]) -> Result<Vec<Complex64>> {
    let lambda = scene.link.wavelength();
    timeline
        .iter()
        .map(|&t| {
            let r = scatterer_range(kind, t, scene)?;
            let rcs = match kind {
                ScattererKind::BladeTip(p) => rotor_rcs(t, &scene.blades[p]),
                _ => scene.body.rcs,
            };
            let amp = scattering_amplitude(rcs, r, &scene.link)?;
            Ok(Complex64::from_polar(1.0, -4.0 * PI * r / lambda) * amp)
        })
        .collect()
}

/// Slow-time channel vector split by scatterer class.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowTimeParts {
    pub translation: Vec<Complex64>,
    pub vibration: Vec<Complex64>,
    pub rotation: Vec<Complex64>,
}

impl SlowTimeParts {
    pub fn total(&self) -> Vec<Complex64> {
        self.translation
            .iter()
            .zip(&self.vibration)
            .zip(&self.rotation)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

fn check_timeline(timeline: &[f64]) -> Result<()> {
    if timeline.is_empty() {
        return Err(Error::param("empty timeline"));
    }
    if timeline.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("timeline must be strictly increasing"));
    }
    if timeline[0] < 0.0 {
        return Err(Error::param("timeline must start at t >= 0"));
    }
    Ok(())
}

/// Per-class contributions; disabled classes are all-zero.
pub fn synthesize_parts(scene: &UavScene, timeline: &[f64]) -> Result<SlowTimeParts> {
    check_timeline(timeline)?;
    scene.validate()?;
    let zeros = || vec![Complex64::new(0.0, 0.0); timeline.len()];
    let translation = if scene.translation {
        scatterer_echo(ScattererKind::BodyTranslation, scene, timeline)?
    } else {
        zeros()
    };
    let vibration = if scene.vibration {
        scatterer_echo(ScattererKind::BodyVibration, scene, timeline)?
    } else {
        zeros()
    };
    let mut rotation = zeros();
    if scene.rotation {
        for p in 0..scene.blades.len() {
            let echo = scatterer_echo(ScattererKind::BladeTip(p), scene, timeline)?;
            for (acc, e) in rotation.iter_mut().zip(echo) {
                *acc += e;
            }
        }
    }
    Ok(SlowTimeParts {
        translation,
        vibration,
        rotation,
    })
}

/// Noiseless slow-time vector `k_D`: coherent sum of every enabled scatterer.
pub fn synthesize_slow_time(scene: &UavScene, timeline: &[f64]) -> Result<Vec<Complex64>> {
    Ok(synthesize_parts(scene, timeline)?.total())
}
