//! Complex stochastic laser equation for `M` competing modes:
//!
//! ```text
//! da_i/dt = (g_i / (1 + sum_j beta_ij |a_j|^2) - kappa_i) a_i + sqrt(eta_i) zeta_i(t)
//! ```
//!
//! integrated with Euler–Maruyama in the Itô sense, plus the closed-form
//! moments of the linear (unsaturated) regime.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::complex_wiener_increment;

/// Upper bound on `max(gamma_i) * dt` accepted by [`IntegrationConfig`].
pub const MAX_RATE_STEP: f64 = 0.1;

/// Gains, losses, noise strengths and the cross-saturation matrix of `M` modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModeSystemRaw")]
pub struct ModeSystem {
    gains: Vec<f64>,
    losses: Vec<f64>,
    noise: Vec<f64>,
    /// Row-major `M x M`.
    saturation: Vec<f64>,
}

#[derive(Deserialize)]
struct ModeSystemRaw {
    gains: Vec<f64>,
    losses: Vec<f64>,
    noise: Vec<f64>,
    saturation: Vec<f64>,
}

impl TryFrom<ModeSystemRaw> for ModeSystem {
    type Error = Error;

    fn try_from(raw: ModeSystemRaw) -> Result<Self> {
        let m = raw.gains.len();
        if raw.saturation.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                actual: raw.saturation.len(),
            });
        }
        let rows = raw.saturation.chunks(m.max(1)).map(<[f64]>::to_vec).collect();
        ModeSystem::new(raw.gains, raw.losses, raw.noise, rows)
    }
}

fn check_rates(name: &'static str, v: &[f64], m: usize) -> Result<()> {
    if v.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: v.len(),
        });
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(invalid(name, format!("entries must be finite and >= 0, got {x}")));
    }
    Ok(())
}

impl ModeSystem {
    pub fn new(gains: Vec<f64>, losses: Vec<f64>, noise: Vec<f64>, saturation: Vec<Vec<f64>>) -> Result<Self> {
        let m = gains.len();
        if m == 0 {
            return Err(invalid("gains", "at least one mode is required"));
        }
        check_rates("gains", &gains, m)?;
        check_rates("losses", &losses, m)?;
        check_rates("noise", &noise, m)?;
        if saturation.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: saturation.len(),
            });
        }
        let mut flat = Vec::with_capacity(m * m);
        for row in &saturation {
            check_rates("saturation", row, m)?;
            flat.extend_from_slice(row);
        }
        Ok(Self {
            gains,
            losses,
            noise,
            saturation: flat,
        })
    }

    /// Identical modes with self-saturation `beta_diag` and cross-saturation
    /// `beta_off`.
    pub fn uniform(modes: usize, gain: f64, loss: f64, noise: f64, beta_diag: f64, beta_off: f64) -> Result<Self> {
        Self::with_shared_saturation(
            vec![gain; modes],
            vec![loss; modes],
            vec![noise; modes],
            beta_diag,
            beta_off,
        )
    }

    /// Per-mode rates with a saturation matrix of constant diagonal and
    /// constant off-diagonal entries.
    pub fn with_shared_saturation(
        gains: Vec<f64>,
        losses: Vec<f64>,
        noise: Vec<f64>,
        beta_diag: f64,
        beta_off: f64,
    ) -> Result<Self> {
        let m = gains.len();
        let rows = (0..m)
            .map(|i| (0..m).map(|j| if i == j { beta_diag } else { beta_off }).collect())
            .collect();
        Self::new(gains, losses, noise, rows)
    }

    pub fn mode_count(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    pub fn noise_strengths(&self) -> &[f64] {
        &self.noise
    }

    pub fn beta(&self, i: usize, j: usize) -> f64 {
        self.saturation[i * self.mode_count() + j]
    }

    /// Net small-signal rate `gamma_i = g_i - kappa_i`.
    pub fn net_gain(&self, i: usize) -> f64 {
        self.gains[i] - self.losses[i]
    }

    pub fn net_gains(&self) -> Vec<f64> {
        (0..self.mode_count()).map(|i| self.net_gain(i)).collect()
    }

    pub fn max_net_gain(&self) -> f64 {
        self.net_gains().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_linear(&self) -> bool {
        self.saturation.iter().all(|&b| b == 0.0)
    }

    /// Copy with every saturation coefficient multiplied by `factor`.
    pub fn scaled_saturation(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(invalid("factor", "must be finite and >= 0"));
        }
        let mut out = self.clone();
        out.saturation.iter_mut().for_each(|b| *b *= factor);
        Ok(out)
    }

    /// Copy with all saturation removed.
    pub fn linearized(&self) -> Self {
        let mut out = self.clone();
        out.saturation.iter_mut().for_each(|b| *b = 0.0);
        out
    }

    /// `1 + sum_j beta_ij n_j` for every mode `i`.
    pub fn saturation_denominators(&self, populations: &[f64], out: &mut [f64]) {
        let m = self.mode_count();
        for (i, d) in out.iter_mut().enumerate() {
            let row = &self.saturation[i * m..(i + 1) * m];
            *d = 1.0 + row.iter().zip(populations).map(|(b, n)| b * n).sum::<f64>();
        }
    }
}

/// Complex mode amplitudes at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
}

impl AmplitudeState {
    pub fn new(amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        if let Some(a) = amplitudes.iter().find(|a| !a.is_finite()) {
            return Err(invalid("amplitudes", format!("non-finite entry {a}")));
        }
        Ok(Self { amplitudes, time })
    }

    /// Amplitudes `sqrt(n_i) e^{i phi_i}` from populations and phases.
    pub fn from_populations(populations: &[f64], phases: &[f64], time: f64) -> Result<Self> {
        if populations.len() != phases.len() {
            return Err(Error::DimensionMismatch {
                expected: populations.len(),
                actual: phases.len(),
            });
        }
        if populations.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return Err(invalid("populations", "must be finite and >= 0"));
        }
        let amplitudes = populations
            .iter()
            .zip(phases)
            .map(|(&n, &phi)| Complex64::from_polar(n.sqrt(), phi))
            .collect();
        Self::new(amplitudes, time)
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            amplitudes: vec![Complex64::new(0.0, 0.0); modes],
            time: 0.0,
        }
    }

    pub fn mode_count(&self) -> usize {
        self.amplitudes.len()
    }

    /// Populations `n_i = |a_i|^2`.
    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn total_population(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn check_compatible(&self, sys: &ModeSystem) -> Result<()> {
        if self.mode_count() != sys.mode_count() {
            return Err(Error::DimensionMismatch {
                expected: sys.mode_count(),
                actual: self.mode_count(),
            });
        }
        Ok(())
    }
}

/// Time step, horizon and recording stride of one integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_end: f64,
    pub record_stride: usize,
}

impl IntegrationConfig {
    pub fn new(dt: f64, t_end: f64, record_stride: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(t_end.is_finite() && t_end >= dt) {
            return Err(invalid("t_end", format!("must be >= dt ({dt:e}), got {t_end:e}")));
        }
        if record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        Ok(Self {
            dt,
            t_end,
            record_stride,
        })
    }

    /// Step chosen as `rate_step / max(gamma_i)`.
    pub fn for_system(sys: &ModeSystem, rate_step: f64, t_end: f64, record_stride: usize) -> Result<Self> {
        let gmax = sys.max_net_gain();
        if gmax <= 0.0 {
            return Err(invalid("sys", "no mode has positive net gain; choose dt explicitly"));
        }
        let cfg = Self::new(rate_step / gmax, t_end, record_stride)?;
        cfg.check_against(sys)?;
        Ok(cfg)
    }

    /// Rejects steps with `max(gamma_i) dt >= 0.1`.
    pub fn check_against(&self, sys: &ModeSystem) -> Result<()> {
        let r = sys.max_net_gain() * self.dt;
        if r >= MAX_RATE_STEP {
            return Err(invalid(
                "dt",
                format!("max(gamma) * dt = {r:.3} must stay below {MAX_RATE_STEP}"),
            ));
        }
        Ok(())
    }

    /// Number of steps; the effective step is `t_end / steps() <= dt`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize
    }

    pub fn effective_dt(&self) -> f64 {
        self.t_end / self.steps() as f64
    }
}

/// Deterministic drift `d_i = (g_i / (1 + sum_j beta_ij |a_j|^2) - kappa_i) a_i`.
pub fn drift_derivative(state: &AmplitudeState, sys: &ModeSystem) -> Result<Vec<Complex64>> {
    state.check_compatible(sys)?;
    let pops = state.populations();
    let mut den = vec![0.0; sys.mode_count()];
    sys.saturation_denominators(&pops, &mut den);
    Ok(state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| a * (sys.gains[i] / den[i] - sys.losses[i]))
        .collect())
}

/// One Euler–Maruyama step `a_i += drift_i dt + sqrt(eta_i) dW_i`.
///
/// `noise_draw` must hold the complex Wiener increments for this step,
/// already scaled so that `<dW conj(dW)> = dt`.
pub fn em_step(state: &AmplitudeState, sys: &ModeSystem, dt: f64, noise_draw: &[Complex64]) -> Result<AmplitudeState> {
    state.check_compatible(sys)?;
    if noise_draw.len() != sys.mode_count() {
        return Err(Error::DimensionMismatch {
            expected: sys.mode_count(),
            actual: noise_draw.len(),
        });
    }
    let drift = drift_derivative(state, sys)?;
    let time = state.time + dt;
    let amplitudes: Vec<Complex64> = state
        .amplitudes
        .iter()
        .zip(&drift)
        .zip(noise_draw)
        .zip(&sys.noise)
        .map(|(((a, d), w), eta)| a + d * dt + w * eta.sqrt())
        .collect();
    if amplitudes.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite { time });
    }
    Ok(AmplitudeState { amplitudes, time })
}

/// Allocation-free stepping kernel shared by [`integrate`] and the
/// Monte Carlo trial loop.
pub(crate) struct Stepper<'a> {
    sys: &'a ModeSystem,
    dt: f64,
    sqrt_eta: Vec<f64>,
    pops: Vec<f64>,
    den: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub(crate) fn new(sys: &'a ModeSystem, dt: f64) -> Self {
        let m = sys.mode_count();
        Self {
            sys,
            dt,
            sqrt_eta: sys.noise.iter().map(|e| e.sqrt()).collect(),
            pops: vec![0.0; m],
            den: vec![0.0; m],
        }
    }

    /// Advances `amps` by one step drawing noise from `rng`. Returns false
    /// if any amplitude became non-finite.
    #[inline]
    pub(crate) fn step<R: Rng + ?Sized>(&mut self, amps: &mut [Complex64], rng: &mut R) -> bool {
        let sys = self.sys;
        for (p, a) in self.pops.iter_mut().zip(amps.iter()) {
            *p = a.norm_sqr();
        }
        sys.saturation_denominators(&self.pops, &mut self.den);
        let mut finite = true;
        for (i, a) in amps.iter_mut().enumerate() {
            let rate = sys.gains[i] / self.den[i] - sys.losses[i];
            let dw = complex_wiener_increment(rng, self.dt);
            *a += *a * (rate * self.dt) + dw * self.sqrt_eta[i];
            finite &= a.is_finite();
        }
        finite
    }
}

/// Recorded samples of one integration run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<AmplitudeState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&AmplitudeState> {
        self.samples.last()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn total_populations(&self) -> Vec<f64> {
        self.samples.iter().map(AmplitudeState::total_population).collect()
    }

    /// CSV with columns `t, re_a0, im_a0, ..., n0, n1, ...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let m = self.samples.first().map_or(0, AmplitudeState::mode_count);
        let mut header = vec!["t".to_string()];
        for i in 0..m {
            header.push(format!("re_a{i}"));
            header.push(format!("im_a{i}"));
        }
        header.extend((0..m).map(|i| format!("n{i}")));
        writeln!(w, "{}", header.join(","))?;
        for s in &self.samples {
            let mut row = vec![format!("{:e}", s.time)];
            for a in &s.amplitudes {
                row.push(format!("{:e}", a.re));
                row.push(format!("{:e}", a.im));
            }
            row.extend(s.amplitudes.iter().map(|a| format!("{:e}", a.norm_sqr())));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrates from `initial` to `initial.time + cfg.t_end`, recording every
/// `cfg.record_stride` steps plus the final state.
pub fn integrate<R: Rng + ?Sized>(
    initial: &AmplitudeState,
    sys: &ModeSystem,
    cfg: &IntegrationConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    initial.check_compatible(sys)?;
    cfg.check_against(sys)?;
    let steps = cfg.steps();
    let dt = cfg.effective_dt();
    let mut stepper = Stepper::new(sys, dt);
    let mut amps = initial.amplitudes.clone();
    let t0 = initial.time;
    let mut samples = Vec::with_capacity(steps / cfg.record_stride + 2);
    samples.push(initial.clone());
    for k in 1..=steps {
        if !stepper.step(&mut amps, rng) {
            return Err(Error::NonFinite {
                time: t0 + k as f64 * dt,
            });
        }
        if k % cfg.record_stride == 0 || k == steps {
            samples.push(AmplitudeState {
                amplitudes: amps.clone(),
                time: t0 + k as f64 * dt,
            });
        }
    }
    Ok(Trajectory { samples })
}

/// Mean and variance of `|a_t|^2` for the linear equation
/// `da = gamma a dt + sqrt(eta) dW` started from `|a_0|^2 = a0_sq`:
///
/// ```text
/// mean = a0 e^{2 gamma t} + (eta / 2 gamma)(e^{2 gamma t} - 1)
/// var  = (eta / gamma) a0 e^{2 gamma t}(e^{2 gamma t} - 1) + (eta / 2 gamma)^2 (e^{2 gamma t} - 1)^2
/// ```
///
/// At `gamma = 0` the L'Hôpital limits `mean = a0 + eta t` and
/// `var = 2 a0 eta t + eta^2 t^2` are returned.
pub fn linear_moments(a0_sq: f64, gamma: f64, eta: f64, t: f64) -> (f64, f64) {
    if gamma == 0.0 {
        let mean = a0_sq + eta * t;
        let var = 2.0 * a0_sq * eta * t + eta * eta * t * t;
        return (mean, var);
    }
    let growth = (2.0 * gamma * t).exp();
    let em1 = (2.0 * gamma * t).exp_m1();
    let spont = eta / (2.0 * gamma) * em1;
    let mean = a0_sq * growth + spont;
    let var = eta / gamma * a0_sq * growth * em1 + spont * spont;
    (mean, var)
}
