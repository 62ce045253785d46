//! Synthetic stand-ins for camera images of wedge modes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pattern::{PatternMatrix, PatternMeta};
use crate::billiard::{periodic_orbit, WedgeGeometry};
use crate::error::{invalid, Result};
use crate::stability::PLANCK;

/// Plane waves in a chaotic pattern.
pub const DEFAULT_WAVES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// Random superposition of plane waves.
    Chaotic,
    /// Intensity ridge along the periodic orbit.
    Regular,
}

/// Pixel layout covering the classically allowed triangle at a given energy:
/// `x` in `[-y_e/alpha, y_e/alpha]`, `y` in `[0, y_e]` with row 0 at the top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeFrame {
    pub turning_height: f64,
    pub half_width: f64,
    pub height: usize,
    pub width: usize,
}

impl WedgeFrame {
    pub fn new(wedge: &WedgeGeometry, energy: f64, height: usize, width: usize) -> Result<Self> {
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(invalid("energy", "must be positive"));
        }
        if height < 2 || width < 2 {
            return Err(invalid("grid", "need at least 2x2 pixels"));
        }
        let y_e = energy / (wedge.mass * wedge.gravity);
        Ok(WedgeFrame {
            turning_height: y_e,
            half_width: y_e / wedge.alpha,
            height,
            width,
        })
    }

    pub fn pixel(&self, row: usize, col: usize) -> (f64, f64) {
        let x = -self.half_width + (col as f64 + 0.5) * 2.0 * self.half_width / self.width as f64;
        let y = self.turning_height * (1.0 - (row as f64 + 0.5) / self.height as f64);
        (x, y)
    }

    pub fn mask(&self, wedge: &WedgeGeometry) -> Vec<bool> {
        let mut m = Vec::with_capacity(self.height * self.width);
        for r in 0..self.height {
            for c in 0..self.width {
                let (x, y) = self.pixel(r, c);
                m.push(wedge.contains(x, y));
            }
        }
        m
    }
}

/// Wavenumber of a particle with energy `energy` at two thirds of its
/// turning height (the centroid of the allowed triangle).
pub fn local_wavenumber(wedge: &WedgeGeometry, energy: f64) -> f64 {
    let hbar = PLANCK / (2.0 * PI);
    let kinetic = energy / 3.0;
    (2.0 * wedge.mass * kinetic).sqrt() / hbar
}

/// Synthetic mode pattern on an `height x width` grid over the allowed
/// region at `energy`. Pixels outside the wedge are masked.
pub fn synthetic_pattern(
    kind: PatternKind,
    wedge: &WedgeGeometry,
    energy: f64,
    height: usize,
    width: usize,
    seed: u64,
) -> Result<PatternMatrix> {
    let frame = WedgeFrame::new(wedge, energy, height, width)?;
    let k = local_wavenumber(wedge, energy);
    let wavelength = 2.0 * PI / k;
    if wavelength > frame.turning_height {
        return Err(invalid("energy", "allowed region is smaller than one wavelength"));
    }
    let mask = frame.mask(wedge);
    let mut values = vec![0.0; height * width];
    match kind {
        PatternKind::Chaotic => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let waves: Vec<(f64, f64, f64)> = (0..DEFAULT_WAVES)
                .map(|_| {
                    let theta = 2.0 * PI * rng.random::<f64>();
                    let phase = 2.0 * PI * rng.random::<f64>();
                    (k * theta.cos(), k * theta.sin(), phase)
                })
                .collect();
            let norm = (2.0 / DEFAULT_WAVES as f64).sqrt();
            for r in 0..height {
                for c in 0..width {
                    let i = r * width + c;
                    if !mask[i] {
                        continue;
                    }
                    let (x, y) = frame.pixel(r, c);
                    let psi: f64 = waves.iter().map(|&(kx, ky, p)| (kx * x + ky * y + p).cos()).sum();
                    values[i] = (norm * psi).powi(2);
                }
            }
        }
        PatternKind::Regular => {
            // Orbit with the pattern's energy: E = m g y0 (3a²+1)/(2a²+1).
            let a2 = wedge.alpha * wedge.alpha;
            let y0 = frame.turning_height * (2.0 * a2 + 1.0) / (3.0 * a2 + 1.0);
            let orbit = periodic_orbit(0.0, y0, wedge)?;
            let curv = wedge.gravity / (orbit.vx * orbit.vx);
            let end_y = wedge.alpha * orbit.x_max;
            let pitch = 2.0 * frame.half_width / width as f64;
            let w = (0.25 * wavelength).max(pitch);
            for r in 0..height {
                for c in 0..width {
                    let i = r * width + c;
                    if !mask[i] {
                        continue;
                    }
                    let (x, y) = frame.pixel(r, c);
                    let d = if x.abs() <= orbit.x_max {
                        let yp = y0 - 0.5 * curv * x * x;
                        (y - yp).abs() / (1.0 + (curv * x).powi(2)).sqrt()
                    } else {
                        (x.abs() - orbit.x_max).hypot(y - end_y)
                    };
                    values[i] = (-0.5 * (d / w).powi(2)).exp();
                }
            }
        }
    }
    let label = match kind {
        PatternKind::Chaotic => format!("chaotic seed={seed}"),
        PatternKind::Regular => "regular".to_string(),
    };
    Ok(
        PatternMatrix::with_mask(height, width, values, mask)?.with_meta(PatternMeta {
            pixel_pitch: Some(2.0 * frame.half_width / width as f64),
            label,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wedge() -> WedgeGeometry {
        WedgeGeometry::from_degrees(35.0).unwrap()
    }

    fn energy(y: f64) -> f64 {
        let w = wedge();
        w.mass * w.gravity * y
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synthetic_pattern(PatternKind::Chaotic, &wedge(), energy(2e-3), 40, 40, 3).unwrap();
        let b = synthetic_pattern(PatternKind::Chaotic, &wedge(), energy(2e-3), 40, 40, 3).unwrap();
        let c = synthetic_pattern(PatternKind::Chaotic, &wedge(), energy(2e-3), 40, 40, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn masked_outside_wedge() {
        let p = synthetic_pattern(PatternKind::Regular, &wedge(), energy(1e-3), 30, 30, 0).unwrap();
        // Bottom corners lie outside the wedge.
        assert!(!p.mask()[29 * 30]);
        assert!(!p.mask()[29 * 30 + 29]);
        assert!(p.mask()[15]);
        assert!(p.max() > 0.9);
    }

    #[test]
    fn rejects_tiny_energy() {
        assert!(synthetic_pattern(PatternKind::Chaotic, &wedge(), energy(1e-9), 10, 10, 0).is_err());
        assert!(synthetic_pattern(PatternKind::Chaotic, &wedge(), 0.0, 10, 10, 0).is_err());
    }
}
