//! Line-of-sight optical channel gains and the CSI error caused by location
//! uncertainty.
//!
//! Access points are ceiling mounted and face straight down; photodetectors
//! face straight up. Under that geometry the irradiance and incidence angles
//! coincide and the gain is a function of the vertical gap and the LOS
//! distance only.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: usize,
    /// Ceiling-mounted position in meters.
    pub position: Vec3,
    /// Half-power semi-angle in radians.
    pub half_power_semi_angle: f64,
    /// Optical transmit power in watts.
    pub transmit_power: f64,
    /// Dedicated downlink bandwidth in hertz.
    pub bandwidth: f64,
}

impl AccessPoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_power_semi_angle > 0.0 && self.half_power_semi_angle < FRAC_PI_2) {
            return Err(Error::Scenario(format!(
                "AP {}: half-power semi-angle must lie in (0, pi/2)",
                self.id
            )));
        }
        if !(self.transmit_power > 0.0) {
            return Err(Error::Scenario(format!(
                "AP {}: transmit power must be positive",
                self.id
            )));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::Scenario(format!(
                "AP {}: bandwidth must be positive",
                self.id
            )));
        }
        Ok(())
    }

    pub fn lambertian_order(&self) -> Result<f64> {
        lambertian_order(self.half_power_semi_angle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverProfile {
    /// Photodetector area in m².
    pub pd_area: f64,
    /// Field-of-view half angle in radians.
    pub fov: f64,
    pub filter_gain: f64,
    pub concentrator_gain: f64,
    /// Responsivity in A/W.
    pub responsivity: f64,
}

impl ReceiverProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = self.pd_area > 0.0
            && self.fov > 0.0
            && self.fov <= FRAC_PI_2
            && self.filter_gain > 0.0
            && self.concentrator_gain > 0.0
            && self.responsivity > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario("receiver profile out of range".into()))
        }
    }
}

impl Default for ReceiverProfile {
    fn default() -> Self {
        Self {
            pd_area: 1e-4,
            fov: 40f64.to_radians(),
            filter_gain: 1.0,
            concentrator_gain: 1.0,
            responsivity: 0.53,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub id: usize,
    pub position: Vec3,
    /// Vertical distance from the receiver plane to the ceiling.
    pub height_gap: f64,
    /// LOS distance to the serving AP.
    pub access_distance: f64,
    /// Location-error bound of the position estimate, meters.
    pub location_error: f64,
    pub group_id: usize,
    /// SIC rank inside the group, 1 is the highest location order.
    pub order_index: usize,
}

/// True, estimated and effective channel gain of one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelEstimate {
    pub true_gain: f64,
    pub estimated_gain: f64,
    pub estimate_error: f64,
    pub effective_gain: f64,
}

/// `m = -ln 2 / ln cos(half_angle)`.
pub fn lambertian_order(half_power_semi_angle: f64) -> Result<f64> {
    let c = half_power_semi_angle.cos();
    if !(c > 0.0 && half_power_semi_angle > 0.0 && half_power_semi_angle < FRAC_PI_2) {
        return Err(Error::Domain(format!(
            "half-power semi-angle {half_power_semi_angle} rad outside (0, pi/2)"
        )));
    }
    // ln(1) = 0 would divide by zero; the limit is an infinitely narrow beam.
    if c >= 1.0 {
        return Err(Error::Domain(
            "half-power semi-angle must be positive".into(),
        ));
    }
    Ok(-LN_2 / c.ln())
}

/// The constant `(m+1) A_PD T_f g_c / 2π` shared by the gain and its error.
fn gain_constant(m: f64, rx: &ReceiverProfile) -> f64 {
    (m + 1.0) * rx.pd_area * rx.filter_gain * rx.concentrator_gain / (2.0 * PI)
}

/// LOS DC gain. Zero outside the receiver field of view.
pub fn los_channel_gain(
    ap: &AccessPoint,
    rx: &ReceiverProfile,
    irradiance_angle: f64,
    incidence_angle: f64,
    distance: f64,
) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!(
            "distance must be positive, got {distance}"
        )));
    }
    if incidence_angle.abs() > rx.fov {
        return Ok(0.0);
    }
    let m = ap.lambertian_order()?;
    let gain = gain_constant(m, rx) / (distance * distance)
        * irradiance_angle.cos().powf(m)
        * incidence_angle.cos();
    Ok(gain.max(0.0))
}

/// Distance, irradiance angle and incidence angle between a downward AP and an
/// upward receiver.
pub fn link_geometry(ap_position: &Vec3, rx_position: &Vec3) -> (f64, f64, f64) {
    let dx = rx_position[0] - ap_position[0];
    let dy = rx_position[1] - ap_position[1];
    let dz = ap_position[2] - rx_position[2];
    let d = (dx * dx + dy * dy + dz * dz).sqrt();
    let angle = (dz / d).clamp(-1.0, 1.0).acos();
    (d, angle, angle)
}

/// Gain between an AP and a receiver located at `rx_position`.
pub fn gain_at(ap: &AccessPoint, rx: &ReceiverProfile, rx_position: &Vec3) -> Result<f64> {
    let (d, phi, psi) = link_geometry(&ap.position, rx_position);
    los_channel_gain(ap, rx, phi, psi, d)
}

/// Additive CSI error induced by the location-error bound. Always `<= 0`.
pub fn csi_error(user: &UserState, ap: &AccessPoint, rx: &ReceiverProfile) -> Result<f64> {
    if !(user.access_distance > 0.0) {
        return Err(Error::Domain("access distance must be positive".into()));
    }
    if !(user.location_error >= 0.0) {
        return Err(Error::Domain("location error must be non-negative".into()));
    }
    let m = ap.lambertian_order()?;
    let exponent = (m + 3.0) / 2.0;
    let lambda_sq = user.access_distance * user.access_distance;
    let b_sq = user.location_error * user.location_error;
    let eta_term = user.height_gap.powf(m + 1.0);
    let perturbed = eta_term / (lambda_sq + b_sq).powf(exponent);
    let nominal = eta_term / lambda_sq.powf(exponent);
    // (Λ²+B²)^-p <= (Λ²)^-p, so the difference is never positive.
    Ok((gain_constant(m, rx) * (perturbed - nominal)).min(0.0))
}

/// `h' = max(h* + Δh*, 0)`.
pub fn effective_channel(estimated_gain: f64, error: f64) -> f64 {
    (estimated_gain + error).max(0.0)
}

/// Full channel estimate for a user served by `ap`.
///
/// The estimated gain equals the true gain; the estimation imperfection is
/// carried entirely by the additive error term.
pub fn estimate_channel(
    user: &UserState,
    ap: &AccessPoint,
    rx: &ReceiverProfile,
) -> Result<ChannelEstimate> {
    let true_gain = gain_at(ap, rx, &user.position)?;
    let estimated_gain = true_gain;
    let estimate_error = csi_error(user, ap, rx)?;
    Ok(ChannelEstimate {
        true_gain,
        estimated_gain,
        estimate_error,
        effective_gain: effective_channel(estimated_gain, estimate_error),
    })
}

/// Gain of a receiver directly beneath the AP at vertical gap `height_gap`.
pub fn peak_gain(ap: &AccessPoint, rx: &ReceiverProfile, height_gap: f64) -> Result<f64> {
    los_channel_gain(ap, rx, 0.0, 0.0, height_gap)
}
