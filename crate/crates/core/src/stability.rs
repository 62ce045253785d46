//! Which mode type wins at a given pump position.
//!
//! A pump spot excites the periodic-orbit mode with weight `f_p`, the
//! fraction of its period the orbit spends inside the spot. The competing
//! chaotic modes have Porter–Thomas intensities; among `N` of them, with
//! probability `p` at least one puts a fraction `f_c` of its weight on the
//! spot. The periodic mode is expected to win where `f_p > f_c`.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::billiard::{periodic_orbit, pump_fraction_periodic, WedgeGeometry};
use crate::error::{invalid, Error, Result};
use crate::special::{erf, erfc, erfc_inv};

/// Planck constant (J s), exact SI value.
pub const PLANCK: f64 = 6.626_070_15e-34;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub wedge: WedgeGeometry,
    /// Pump spot diameter (m).
    pub d_pump: f64,
    /// Confidence that at least one chaotic mode reaches `f_c`.
    pub p: f64,
    pub h: f64,
}

impl StabilityParams {
    pub fn new(wedge: WedgeGeometry, d_pump: f64, p: f64, h: f64) -> Result<Self> {
        if !(d_pump > 0.0 && d_pump.is_finite()) {
            return Err(invalid("d_pump", "must be positive"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(invalid("p", format!("{p} is not in (0, 1)")));
        }
        if !(h > 0.0) {
            return Err(invalid("h", "must be positive"));
        }
        Ok(StabilityParams { wedge, d_pump, p, h })
    }

    /// 35 degree half-angle, g = 1.1e17 m/s², m = 6.9e-36 kg, 25 µm spot, p = 0.5.
    pub fn reference() -> Self {
        let wedge = WedgeGeometry::from_degrees(35.0).expect("valid angle");
        StabilityParams {
            wedge,
            d_pump: 25e-6,
            p: 0.5,
            h: PLANCK,
        }
    }
}

/// Porter–Thomas density of the normalised intensity `x = I/<I>`.
pub fn porter_thomas_pdf(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid("x", "Porter-Thomas density needs x > 0"));
    }
    Ok((-0.5 * x).exp() / (2.0 * PI * x).sqrt())
}

/// Porter–Thomas cumulative distribution, `erf(sqrt(x/2))`.
pub fn porter_thomas_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        erf((0.5 * x).sqrt())
    }
}

/// Probability that a Porter–Thomas intensity exceeds `gamma`.
pub fn exceedance_probability(gamma: f64) -> f64 {
    if gamma <= 0.0 {
        1.0
    } else {
        erfc((0.5 * gamma).sqrt())
    }
}

/// Probability that at least one of `n` independent modes exceeds `gamma`.
pub fn any_exceedance_probability(gamma: f64, n: f64) -> f64 {
    -(n * (-exceedance_probability(gamma)).ln_1p()).exp_m1()
}

/// Intensity level `gamma` that at least one of `n` independent modes
/// exceeds with probability `p`.
pub fn intensity_quantile(p: f64, n: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", format!("{p} is not in (0, 1)")));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(invalid("n", format!("{n} must be at least 1")));
    }
    // 1 - (1-p)^(1/n), kept accurate when n is large.
    let q = -((-p).ln_1p() / n).exp_m1();
    let y = erfc_inv(q);
    Ok(2.0 * y * y)
}

/// Semiclassical number of states with energy below `e`.
pub fn cumulative_states(e: f64, params: &StabilityParams) -> f64 {
    let w = &params.wedge;
    2.0 * PI * e.powi(3) / (3.0 * w.alpha * w.mass * w.gravity * w.gravity * params.h * params.h)
}

/// Semiclassical density of states at energy `e` (1/J).
pub fn density_of_states(e: f64, params: &StabilityParams) -> f64 {
    let w = &params.wedge;
    2.0 * PI * e * e / (w.alpha * w.mass * w.gravity * w.gravity * params.h * params.h)
}

/// Number of modes within one pump diameter of potential energy around `y_pump`.
pub fn available_mode_count(y_pump: f64, params: &StabilityParams) -> f64 {
    let w = &params.wedge;
    2.0 * PI * w.mass * w.mass * w.gravity * y_pump * y_pump * params.d_pump / (w.alpha * params.h * params.h)
}

/// Weight that the strongest of the available chaotic modes puts on the
/// pump spot (with confidence `p`).
pub fn pump_fraction_chaotic(y_pump: f64, params: &StabilityParams) -> Result<f64> {
    if !(y_pump > 0.0) {
        return Err(invalid("y_pump", "must be positive"));
    }
    let n = available_mode_count(y_pump, params);
    if n < 1.0 {
        return Err(Error::TooFewModes { modes: n });
    }
    let volume = y_pump * y_pump / params.wedge.alpha;
    let area = PI * 0.25 * params.d_pump * params.d_pump;
    Ok(area / volume * intensity_quantile(params.p, n)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLabel {
    Regular,
    Chaotic,
}

impl ModeLabel {
    /// Ties go to the chaotic side.
    pub fn from_fractions(f_p: f64, f_c: f64) -> Self {
        if f_p > f_c {
            ModeLabel::Regular
        } else {
            ModeLabel::Chaotic
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModeLabel::Regular => "regular",
            ModeLabel::Chaotic => "chaotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCell {
    pub x_pump: f64,
    pub y_pump: f64,
    pub f_p: f64,
    pub f_c: f64,
    pub n_modes: f64,
    pub label: ModeLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub x_pump: f64,
    pub y_pump: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityMap {
    pub cells: Vec<StabilityCell>,
    pub failures: Vec<CellFailure>,
}

pub fn evaluate_cell(x_pump: f64, y_pump: f64, params: &StabilityParams) -> Result<StabilityCell> {
    let orbit = periodic_orbit(x_pump, y_pump, &params.wedge)?;
    let f_p = pump_fraction_periodic(&orbit, y_pump, params.d_pump, &params.wedge)?;
    let f_c = pump_fraction_chaotic(y_pump, params)?;
    Ok(StabilityCell {
        x_pump,
        y_pump,
        f_p,
        f_c,
        n_modes: available_mode_count(y_pump, params),
        label: ModeLabel::from_fractions(f_p, f_c),
    })
}

/// Evaluates every grid point. Points that cannot be evaluated are listed
/// in `failures` instead of aborting the map.
pub fn compute_stability_map(grid: &[(f64, f64)], params: &StabilityParams) -> StabilityMap {
    let results: Vec<_> = grid
        .par_iter()
        .map(|&(x, y)| (x, y, evaluate_cell(x, y, params)))
        .collect();
    let mut map = StabilityMap {
        cells: Vec::new(),
        failures: Vec::new(),
    };
    for (x, y, r) in results {
        match r {
            Ok(c) => map.cells.push(c),
            Err(e) => map.failures.push(CellFailure {
                x_pump: x,
                y_pump: y,
                error: e.to_string(),
            }),
        }
    }
    map
}

/// Rectangular grid over the wedge's bounding box up to `y_max`, keeping
/// only points strictly inside the wedge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            y_min: 0.0,
            y_max: 500e-6,
            nx: 101,
            ny: 101,
        }
    }
}

impl GridSpec {
    pub fn points(&self, wedge: &WedgeGeometry) -> Result<Vec<(f64, f64)>> {
        if self.nx < 2 || self.ny < 2 {
            return Err(invalid("grid", "need at least 2x2 points"));
        }
        if !(self.y_max > self.y_min && self.y_min >= 0.0) {
            return Err(invalid("grid", "need 0 <= y_min < y_max"));
        }
        let half = self.y_max / wedge.alpha;
        let mut out = Vec::new();
        for j in 0..self.ny {
            let y = self.y_min + (self.y_max - self.y_min) * j as f64 / (self.ny - 1) as f64;
            for i in 0..self.nx {
                // Exactly antisymmetric in i so the grid is mirror symmetric.
                let x = half * (2.0 * i as f64 - (self.nx - 1) as f64) / (self.nx - 1) as f64;
                if wedge.clearance(x, y) > 0.0 {
                    out.push((x, y));
                }
            }
        }
        Ok(out)
    }
}

impl StabilityMap {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x_pump,y_pump,f_p,f_c,N_modes,label")?;
        for c in &self.cells {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{}",
                c.x_pump,
                c.y_pump,
                c.f_p,
                c.f_c,
                c.n_modes,
                c.label.as_str()
            )?;
        }
        Ok(())
    }

    pub fn summary_json(&self, params: &StabilityParams) -> serde_json::Value {
        let regular = self.cells.iter().filter(|c| c.label == ModeLabel::Regular).count();
        serde_json::json!({
            "params": params,
            "cells": self.cells.len(),
            "regular": regular,
            "chaotic": self.cells.len() - regular,
            "failed": self.failures.len(),
            "warnings": !self.failures.is_empty(),
        })
    }

    /// Cells grouped by height, each row sorted by `x`.
    pub fn rows(&self) -> Vec<Vec<StabilityCell>> {
        let mut cells = self.cells.clone();
        cells.sort_by(|a, b| a.y_pump.total_cmp(&b.y_pump).then(a.x_pump.total_cmp(&b.x_pump)));
        let mut rows: Vec<Vec<StabilityCell>> = Vec::new();
        for c in cells {
            match rows.last_mut() {
                Some(r) if r[0].y_pump == c.y_pump => r.push(c),
                _ => rows.push(vec![c]),
            }
        }
        rows
    }
}
