//! Point mass in a gravitational wedge `y >= alpha |x|`.
//!
//! The dynamics is event driven: between collisions the particle follows an
//! exact parabola, and wall hits are found as roots of a quadratic. There is
//! no time stepping, so energy is conserved up to rounding.
//!
//! The wedge is parameterised by its half opening angle `phi` (measured from
//! the vertical axis to a wall) and `alpha = cot(phi)`. Note that angles such
//! as 35, 45 and 55 degrees are sometimes quoted as the "opening angle"; here
//! they are always half-angles. 45 degrees is the integrable case, larger
//! angles are chaotic and smaller ones mixed.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Photon effective mass in the dye microcavity (kg).
pub const DEFAULT_MASS: f64 = 6.9e-36;
/// Effective gravitational acceleration used for the stability map (m/s²).
pub const DEFAULT_GRAVITY: f64 = 1.1e17;
/// Relative corner tolerance, in units of the orbit's apex height.
pub const CORNER_TOLERANCE: f64 = 1e-9;

/// Relative distance below which a point is considered to sit on a wall.
const ON_WALL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WedgeGeometry {
    pub half_angle: f64,
    pub alpha: f64,
    pub gravity: f64,
    pub mass: f64,
}

impl WedgeGeometry {
    pub fn new(half_angle: f64, gravity: f64, mass: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle < std::f64::consts::FRAC_PI_2) {
            return Err(invalid("half_angle", format!("{half_angle} is not in (0, pi/2)")));
        }
        if !(gravity > 0.0 && gravity.is_finite()) {
            return Err(invalid("gravity", format!("{gravity} must be positive")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("mass", format!("{mass} must be positive")));
        }
        Ok(WedgeGeometry {
            half_angle,
            alpha: 1.0 / half_angle.tan(),
            gravity,
            mass,
        })
    }

    /// Wedge with a half-angle in degrees and the default photon mass and gravity.
    pub fn from_degrees(half_angle_deg: f64) -> Result<Self> {
        Self::new(half_angle_deg.to_radians(), DEFAULT_GRAVITY, DEFAULT_MASS)
    }

    /// Inward unit normal of a wall.
    pub fn inward_normal(&self, wall: Wall) -> (f64, f64) {
        let s = wall.sign();
        let norm = (1.0 + self.alpha * self.alpha).sqrt();
        (-s * self.alpha / norm, 1.0 / norm)
    }

    /// Height above the wall: `y - alpha*|x|`, positive inside.
    pub fn clearance(&self, x: f64, y: f64) -> f64 {
        y - self.alpha * x.abs()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.clearance(x, y) >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wall {
    /// `y = -alpha x`, `x < 0`.
    Left,
    /// `y = alpha x`, `x > 0`.
    Right,
}

impl Wall {
    fn sign(self) -> f64 {
        match self {
            Wall::Left => -1.0,
            Wall::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub t: f64,
}

impl ParticleState {
    pub fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        ParticleState { x, y, vx, vy, t: 0.0 }
    }

    pub fn energy(&self, wedge: &WedgeGeometry) -> f64 {
        wedge.mass * (0.5 * (self.vx * self.vx + self.vy * self.vy) + wedge.gravity * self.y)
    }

    /// Height at which all energy is potential energy.
    pub fn turning_height(&self, wedge: &WedgeGeometry) -> f64 {
        self.y + 0.5 * (self.vx * self.vx + self.vy * self.vy) / wedge.gravity
    }

    /// Mirror image under `x -> -x`.
    pub fn mirrored(&self) -> Self {
        ParticleState {
            x: -self.x,
            vx: -self.vx,
            ..*self
        }
    }
}

/// Exact ballistic flight over `tau`.
pub fn free_flight(state: &ParticleState, tau: f64, g: f64) -> ParticleState {
    ParticleState {
        x: state.x + state.vx * tau,
        y: state.y + state.vy * tau - 0.5 * g * tau * tau,
        vx: state.vx,
        vy: state.vy - g * tau,
        t: state.t + tau,
    }
}

// Positive root of -g/2 tau^2 + b tau + c = 0 for c >= 0, in the form that
// avoids cancellation when b < 0.
fn wall_root(b: f64, c: f64, g: f64, scale: f64) -> Option<f64> {
    if c <= ON_WALL * scale {
        // On the wall: either leaving it (returns after 2b/g) or moving into it.
        return if b > 0.0 { Some(2.0 * b / g) } else { None };
    }
    let disc = (b * b + 2.0 * g * c).sqrt();
    if b >= 0.0 {
        Some((b + disc) / g)
    } else {
        Some(2.0 * c / (disc - b))
    }
}

fn next_hit(state: &ParticleState, wedge: &WedgeGeometry, scale: f64) -> Option<(f64, Wall)> {
    let mut best: Option<(f64, Wall)> = None;
    for wall in [Wall::Left, Wall::Right] {
        let s = wall.sign();
        let b = state.vy - s * wedge.alpha * state.vx;
        let c = state.y - s * wedge.alpha * state.x;
        if let Some(tau) = wall_root(b, c.max(0.0), wedge.gravity, scale) {
            if best.is_none_or(|(t, _)| tau < t) {
                best = Some((tau, wall));
            }
        }
    }
    best
}

/// Time until the particle reaches a wall, and which wall it hits first.
pub fn wall_crossing_time(state: &ParticleState, wedge: &WedgeGeometry) -> Result<(f64, Wall)> {
    if !wedge.contains(state.x, state.y) {
        return Err(Error::OutsideWedge { x: state.x, y: state.y });
    }
    let scale = state.turning_height(wedge).abs().max(f64::MIN_POSITIVE);
    next_hit(state, wedge, scale).ok_or(Error::NoCrossing)
}

/// Specular reflection of `v` at `wall`.
pub fn reflect_velocity(v: (f64, f64), wall: Wall, wedge: &WedgeGeometry) -> (f64, f64) {
    let (nx, ny) = wedge.inward_normal(wall);
    let dot = v.0 * nx + v.1 * ny;
    (v.0 - 2.0 * dot * nx, v.1 - 2.0 * dot * ny)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Flight,
    BounceLeft,
    BounceRight,
    Corner,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Flight => "flight",
            EventKind::BounceLeft => "bounce_left",
            EventKind::BounceRight => "bounce_right",
            EventKind::Corner => "corner",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub state: ParticleState,
    pub event: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    MaxBounces(usize),
    Until(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilliardPath {
    pub points: Vec<PathPoint>,
    pub bounces: usize,
    /// Set when the run ended because the particle ran into the apex.
    pub corner_hit: bool,
}

impl BilliardPath {
    pub fn last_state(&self) -> &ParticleState {
        &self.points.last().expect("path always holds the initial state").state
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,x,y,vx,vy,event")?;
        for p in &self.points {
            let s = &p.state;
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{}",
                s.t,
                s.x,
                s.y,
                s.vx,
                s.vy,
                p.event.as_str()
            )?;
        }
        Ok(())
    }
}

// One collision: flight to the wall, snap onto it and reflect. Returns `None`
// for an apex hit.
fn bounce(state: &ParticleState, tau: f64, wall: Wall, wedge: &WedgeGeometry, corner: f64) -> Option<ParticleState> {
    let mut s = free_flight(state, tau, wedge.gravity);
    if s.x.abs() < corner {
        return None;
    }
    s.y = wedge.alpha * s.x.abs();
    let (vx, vy) = reflect_velocity((s.vx, s.vy), wall, wedge);
    s.vx = vx;
    s.vy = vy;
    Some(s)
}

/// Runs the billiard from `initial` until `stop`.
///
/// With `flight_samples > 0`, that many evenly spaced points are recorded
/// inside each flight in addition to the bounce events.
pub fn simulate_trajectory(
    initial: &ParticleState,
    wedge: &WedgeGeometry,
    stop: StopCondition,
    flight_samples: usize,
) -> Result<BilliardPath> {
    if !wedge.contains(initial.x, initial.y) {
        return Err(Error::OutsideWedge {
            x: initial.x,
            y: initial.y,
        });
    }
    let scale = initial.turning_height(wedge);
    let corner = CORNER_TOLERANCE * scale;
    let mut points = vec![PathPoint {
        state: *initial,
        event: EventKind::Flight,
    }];
    let mut state = *initial;
    let mut bounces = 0;

    loop {
        if let StopCondition::MaxBounces(n) = stop {
            if bounces >= n {
                break;
            }
        }
        let (tau, wall) = next_hit(&state, wedge, scale).ok_or(Error::NoCrossing)?;
        let flight = match stop {
            StopCondition::Until(t_end) if state.t + tau >= t_end => t_end - state.t,
            _ => tau,
        };
        for k in 1..=flight_samples {
            let dt = flight * k as f64 / (flight_samples + 1) as f64;
            points.push(PathPoint {
                state: free_flight(&state, dt, wedge.gravity),
                event: EventKind::Flight,
            });
        }
        if flight < tau {
            points.push(PathPoint {
                state: free_flight(&state, flight, wedge.gravity),
                event: EventKind::Flight,
            });
            break;
        }
        match bounce(&state, tau, wall, wedge, corner) {
            Some(next) => {
                state = next;
                bounces += 1;
                let event = match wall {
                    Wall::Left => EventKind::BounceLeft,
                    Wall::Right => EventKind::BounceRight,
                };
                points.push(PathPoint { state, event });
            }
            None => {
                let s = free_flight(&state, tau, wedge.gravity);
                points.push(PathPoint {
                    state: s,
                    event: EventKind::Corner,
                });
                return Ok(BilliardPath {
                    points,
                    bounces,
                    corner_hit: true,
                });
            }
        }
    }
    Ok(BilliardPath {
        points,
        bounces,
        corner_hit: false,
    })
}

/// State after evolving for `duration`. Errors on an apex hit.
pub fn advance(state: &ParticleState, wedge: &WedgeGeometry, duration: f64) -> Result<ParticleState> {
    if duration < 0.0 {
        return Err(invalid("duration", "must be non-negative"));
    }
    let scale = state.turning_height(wedge);
    let corner = CORNER_TOLERANCE * scale;
    let t_end = state.t + duration;
    let mut s = *state;
    loop {
        let (tau, wall) = next_hit(&s, wedge, scale).ok_or(Error::NoCrossing)?;
        if s.t + tau >= t_end {
            let mut out = free_flight(&s, t_end - s.t, wedge.gravity);
            out.t = t_end;
            return Ok(out);
        }
        s = bounce(&s, tau, wall, wedge, corner).ok_or(Error::CornerEvent { time: s.t + tau })?;
    }
}

/// Fraction of the energetically allowed triangle visited by `points`, on an
/// `n x n` grid over its bounding box. Only cells whose centre lies inside
/// the allowed region are counted.
pub fn cell_occupancy(points: &[PathPoint], wedge: &WedgeGeometry, turning_height: f64, n: usize) -> f64 {
    let half_width = turning_height / wedge.alpha;
    let (dx, dy) = (2.0 * half_width / n as f64, turning_height / n as f64);
    let mut hit = vec![false; n * n];
    for p in points {
        let i = ((p.state.x + half_width) / dx).floor();
        let j = (p.state.y / dy).floor();
        if i >= 0.0 && j >= 0.0 && (i as usize) < n && (j as usize) < n {
            hit[j as usize * n + i as usize] = true;
        }
    }
    let (mut inside, mut visited) = (0usize, 0usize);
    for j in 0..n {
        for i in 0..n {
            let (cx, cy) = (-half_width + (i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy);
            if wedge.contains(cx, cy) && cy <= turning_height {
                inside += 1;
                visited += hit[j * n + i] as usize;
            }
        }
    }
    visited as f64 / inside.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    /// Initial separation in phase space scaled by the turning height `L`
    /// and the velocity `sqrt(g L)`.
    pub d0: f64,
    /// Leading fraction of the horizon discarded as transient.
    pub transient: f64,
    /// Number of blocks for the standard error.
    pub blocks: usize,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions {
            d0: 1e-8,
            transient: 0.5,
            blocks: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Mean stretching rate (1/s).
    pub lambda: f64,
    pub standard_error: f64,
    pub horizon: f64,
    pub renormalizations: usize,
    /// Mean time between bounces.
    pub mean_flight_time: f64,
}

impl LyapunovEstimate {
    /// Consistent with zero: total stretching over the horizon below a decade.
    pub fn is_regular(&self) -> bool {
        self.lambda.abs() * self.horizon < std::f64::consts::LN_10
    }

    /// Positive beyond three standard errors.
    ///
    /// Regular orbits separate linearly, which also gives a small but
    /// steady positive rate; use [`LyapunovEstimate::regime`] to classify.
    pub fn is_positive(&self) -> bool {
        self.lambda - 3.0 * self.standard_error > 0.0
    }

    pub fn regime(&self) -> Regime {
        if self.is_regular() {
            Regime::Regular
        } else if self.is_positive() {
            Regime::Chaotic
        } else {
            Regime::Inconclusive
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Regular,
    Chaotic,
    Inconclusive,
}

fn scaled_distance(a: &ParticleState, b: &ParticleState, length: f64, speed: f64) -> f64 {
    let dx = (a.x - b.x) / length;
    let dy = (a.y - b.y) / length;
    let dvx = (a.vx - b.vx) / speed;
    let dvy = (a.vy - b.vy) / speed;
    (dx * dx + dy * dy + dvx * dvx + dvy * dvy).sqrt()
}

/// Two-trajectory (Benettin) estimate of the largest Lyapunov exponent.
///
/// The twin starts `d0` away and is compared with the reference once per
/// bounce, half-way through each reference flight, where both are far from a
/// wall. After each comparison the twin is pulled back to distance `d0`.
/// Rates from the transient are dropped; the remainder is split into blocks
/// whose spread gives the standard error.
pub fn lyapunov_exponent(
    initial: &ParticleState,
    wedge: &WedgeGeometry,
    horizon: f64,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate> {
    if !(horizon > 0.0) {
        return Err(invalid("horizon", "must be positive"));
    }
    if !(opts.d0 > 0.0 && opts.d0 < 1e-3) {
        return Err(invalid("d0", "must lie in (0, 1e-3)"));
    }
    if !(0.0..1.0).contains(&opts.transient) || opts.blocks < 2 {
        return Err(invalid(
            "transient/blocks",
            "need transient in [0,1) and at least 2 blocks",
        ));
    }
    if !wedge.contains(initial.x, initial.y) {
        return Err(Error::OutsideWedge {
            x: initial.x,
            y: initial.y,
        });
    }
    let length = initial.turning_height(wedge);
    let speed = (wedge.gravity * length).sqrt();
    let corner = CORNER_TOLERANCE * length;

    // Offset along a fixed generic direction.
    let dir = [0.5, -0.3, 0.7, 0.4];
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    let mut reference = *initial;
    let mut twin = ParticleState {
        x: initial.x + opts.d0 * dir[0] / norm * length,
        y: initial.y + opts.d0 * dir[1] / norm * length,
        vx: initial.vx + opts.d0 * dir[2] / norm * speed,
        vy: initial.vy + opts.d0 * dir[3] / norm * speed,
        t: initial.t,
    };
    if !wedge.contains(twin.x, twin.y) {
        twin.y = reference.y + (reference.y - twin.y).abs();
    }

    let t0 = initial.t;
    let t_cut = t0 + opts.transient * horizon;
    let mut records: Vec<(f64, f64)> = Vec::new();
    let mut bounces = 0usize;
    let mut last_time = t0;

    while reference.t < t0 + horizon {
        let (tau, wall) = next_hit(&reference, wedge, length).ok_or(Error::NoCrossing)?;
        let mid = free_flight(&reference, 0.5 * tau, wedge.gravity);
        let twin_mid = advance(&twin, wedge, mid.t - twin.t)?;
        let d = scaled_distance(&mid, &twin_mid, length, speed);
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Degenerate("twin trajectory collapsed onto the reference".into()));
        }
        let stretch = (d / opts.d0).ln();
        let f = opts.d0 / d;
        twin = ParticleState {
            x: mid.x + (twin_mid.x - mid.x) * f,
            y: mid.y + (twin_mid.y - mid.y) * f,
            vx: mid.vx + (twin_mid.vx - mid.vx) * f,
            vy: mid.vy + (twin_mid.vy - mid.vy) * f,
            t: mid.t,
        };
        if !wedge.contains(twin.x, twin.y) {
            return Err(Error::CornerEvent { time: mid.t });
        }
        if mid.t > t_cut {
            records.push((mid.t - last_time, stretch));
        }
        last_time = mid.t;
        reference = bounce(&reference, tau, wall, wedge, corner).ok_or(Error::CornerEvent {
            time: reference.t + tau,
        })?;
        bounces += 1;
    }

    let blocks = opts.blocks.min(records.len());
    if blocks < 2 {
        return Err(Error::TrajectoryTooShort {
            len: records.len(),
            min: 2,
        });
    }
    let per = records.len() / blocks;
    let rates: Vec<f64> = (0..blocks)
        .map(|b| {
            let chunk = if b + 1 == blocks {
                &records[b * per..]
            } else {
                &records[b * per..(b + 1) * per]
            };
            let (dt, dl) = chunk.iter().fold((0.0, 0.0), |(a, c), (t, l)| (a + t, c + l));
            dl / dt
        })
        .collect();
    let mean = rates.iter().sum::<f64>() / blocks as f64;
    let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (blocks - 1) as f64;
    Ok(LyapunovEstimate {
        lambda: mean,
        standard_error: (var / blocks as f64).sqrt(),
        horizon,
        renormalizations: records.len(),
        mean_flight_time: (reference.t - t0) / bounces.max(1) as f64,
    })
}

/// Self-retracing orbit that hits both walls at right angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// Apex height on the symmetry axis.
    pub y0: f64,
    /// Horizontal speed at the apex.
    pub vx: f64,
    pub period: f64,
    pub energy: f64,
    /// Horizontal position of the right-wall impact.
    pub x_max: f64,
}

impl PeriodicOrbit {
    /// Apex state, moving to the right.
    pub fn initial_state(&self) -> ParticleState {
        ParticleState::new(0.0, self.y0, self.vx, 0.0)
    }

    /// Height of the parabola at `x`.
    pub fn height_at(&self, x: f64, wedge: &WedgeGeometry) -> f64 {
        self.y0 - 0.5 * wedge.gravity * x * x / (self.vx * self.vx)
    }

    /// Product of the orbit slope and wall slope at the impact point; -1 for
    /// a perpendicular hit.
    pub fn orthogonality(&self, wedge: &WedgeGeometry) -> f64 {
        let slope = -wedge.gravity * self.x_max / (self.vx * self.vx);
        slope * wedge.alpha
    }
}

/// Periodic orbit through the pump spot `(x_pump, y_pump)`.
pub fn periodic_orbit(x_pump: f64, y_pump: f64, wedge: &WedgeGeometry) -> Result<PeriodicOrbit> {
    if !(y_pump > 0.0) || !wedge.contains(x_pump, y_pump) {
        return Err(Error::OutsideWedge { x: x_pump, y: y_pump });
    }
    let a2 = wedge.alpha * wedge.alpha;
    let g = wedge.gravity;
    let y0 = 0.5 * y_pump + (0.25 * y_pump * y_pump + (0.25 / a2 + 0.5) * x_pump * x_pump).sqrt();
    let vx = wedge.alpha * (2.0 * g * y0 / (2.0 * a2 + 1.0)).sqrt();
    let period = 4.0 * (2.0 * y0 / (g * (2.0 * a2 + 1.0))).sqrt();
    let x_max = vx / g * ((a2 * vx * vx + 2.0 * g * y0).sqrt() - wedge.alpha * vx);
    let energy = wedge.mass * (g * y0 + 0.5 * vx * vx);
    Ok(PeriodicOrbit {
        y0,
        vx,
        period,
        energy,
        x_max,
    })
}

/// Speed of the periodic-orbit particle when it passes height `y_pump`.
pub fn pump_speed(orbit: &PeriodicOrbit, y_pump: f64, wedge: &WedgeGeometry) -> Result<f64> {
    let kinetic = orbit.energy / wedge.mass - wedge.gravity * y_pump;
    if !(kinetic > 0.0) {
        return Err(Error::AboveOrbitEnergy);
    }
    Ok((2.0 * kinetic).sqrt())
}

/// Fraction of the period the periodic orbit spends inside a pump spot of
/// diameter `d_pump` at height `y_pump`.
pub fn pump_fraction_periodic(orbit: &PeriodicOrbit, y_pump: f64, d_pump: f64, wedge: &WedgeGeometry) -> Result<f64> {
    if !(d_pump > 0.0) {
        return Err(invalid("d_pump", "must be positive"));
    }
    let a2 = wedge.alpha * wedge.alpha;
    let disc = (3.0 * a2 + 1.0) * orbit.y0 - (2.0 * a2 + 1.0) * y_pump;
    if !(disc > 0.0) {
        return Err(Error::AboveOrbitEnergy);
    }
    Ok((2.0 * a2 + 1.0) * d_pump / (4.0 * (orbit.y0 * disc).sqrt()))
}
