//! Conversions from microcavity parameters to the effective 2-D particle picture.
//!
//! The defaults describe a dye-filled cavity: mirror spacing 16 µm, light
//! speed `c / 1.43` in ethylene glycol, and a mirror tilt chosen so the
//! effective gravity is 1.3e17 m/s². The tilt is not a measured value; it is
//! back-solved from that gravity and the spacing.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Refractive index of ethylene glycol near 660 nm.
pub const ETHYLENE_GLYCOL_INDEX: f64 = 1.43;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

const DEFAULT_SPACING: f64 = 16e-6;
const TARGET_GRAVITY: f64 = 1.3e17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Mirror separation `D0` (m).
    pub spacing: f64,
    /// Speed of light in the medium (m/s).
    pub light_speed: f64,
    /// Mirror tilt angle (rad).
    pub tilt: f64,
    /// Local change of the mirror separation (m); positive for an elevation.
    pub depth: f64,
    /// Longitudinal mode number.
    pub q: u32,
}

impl Default for CavityParams {
    fn default() -> Self {
        let light_speed = SPEED_OF_LIGHT / ETHYLENE_GLYCOL_INDEX;
        CavityParams {
            spacing: DEFAULT_SPACING,
            light_speed,
            tilt: TARGET_GRAVITY * DEFAULT_SPACING / (light_speed * light_speed),
            depth: 40e-9,
            q: 69,
        }
    }
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) {
            return Err(invalid("spacing", "mirror separation must be positive"));
        }
        if !(self.light_speed > 0.0) {
            return Err(invalid("light_speed", "must be positive"));
        }
        if self.q < 1 {
            return Err(invalid("q", "longitudinal mode number must be at least 1"));
        }
        if !(self.tilt.is_finite() && self.depth.is_finite()) {
            return Err(invalid("tilt/depth", "must be finite"));
        }
        Ok(())
    }

    /// Effective photon mass `hbar k_z / c~` with `k_z = q pi / D0`.
    pub fn effective_mass(&self) -> f64 {
        HBAR * self.q as f64 * std::f64::consts::PI / (self.spacing * self.light_speed)
    }
}

/// Gravity equivalent of the mirror tilt, `tilt c~² / D0`.
pub fn effective_gravity(cav: &CavityParams) -> f64 {
    cav.tilt * cav.light_speed * cav.light_speed / cav.spacing
}

/// Potential energy from a change `depth` of the mirror separation,
/// `-m c~² depth / D0`.
pub fn wedge_potential_depth(cav: &CavityParams, mass: f64) -> f64 {
    -mass * cav.light_speed * cav.light_speed * cav.depth / cav.spacing
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_reproduces_gravity() {
        let cav = CavityParams::default();
        cav.validate().unwrap();
        assert_relative_eq!(effective_gravity(&cav), 1.3e17, max_relative = 1e-12);
        assert_eq!(effective_gravity(&CavityParams { tilt: 0.0, ..cav }), 0.0);
        assert_relative_eq!(
            effective_gravity(&CavityParams {
                tilt: 2.0 * cav.tilt,
                ..cav
            }),
            2.0 * effective_gravity(&cav),
            max_relative = 1e-15
        );
    }

    #[test]
    fn mass_is_close_to_the_photon_value() {
        let m = CavityParams::default().effective_mass();
        assert!((m / 6.9e-36 - 1.0).abs() < 0.02, "{m:e}");
    }

    #[test]
    fn potential_sign_and_zero() {
        let cav = CavityParams::default();
        assert!(wedge_potential_depth(&cav, 6.9e-36) < 0.0);
        assert_eq!(wedge_potential_depth(&CavityParams { depth: 0.0, ..cav }, 6.9e-36), 0.0);
    }
}
