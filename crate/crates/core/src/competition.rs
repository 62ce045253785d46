//! Monte Carlo mode competition and the analytic winner statistics of the
//! linear regime.

use std::f64::consts::PI;
use std::io::Write;

use log::{debug, warn};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{trial_rng, TrialRng};
use crate::sde::{linear_moments, AmplitudeState, IntegrationConfig, ModeSystem, Stepper, Trajectory};
use crate::special::normal_cdf;

/// Exponent prefactor used by the generalized Born rule, `G_i = exp(3 gamma_i t*)`.
pub const BORN_EXPONENT: f64 = 3.0;

/// Initial phase assignment for each trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhasePolicy {
    /// Independent uniform phases on [0, 2 pi) per mode and trial.
    RandomUniform,
    /// The same phases for every trial.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitionConfig {
    pub sys: ModeSystem,
    pub initial_populations: Vec<f64>,
    pub phase_policy: PhasePolicy,
    pub integration: IntegrationConfig,
    pub trials: u64,
    pub master_seed: u64,
    /// Saturation-time detector applied to every trial.
    pub detector: SaturationDetector,
}

impl CompetitionConfig {
    pub fn new(
        sys: ModeSystem,
        initial_populations: Vec<f64>,
        phase_policy: PhasePolicy,
        integration: IntegrationConfig,
        trials: u64,
        master_seed: u64,
    ) -> Result<Self> {
        let m = sys.mode_count();
        if initial_populations.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: initial_populations.len(),
            });
        }
        if initial_populations.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return Err(invalid("initial_populations", "must be finite and >= 0"));
        }
        if initial_populations.iter().sum::<f64>() <= 0.0 {
            return Err(invalid("initial_populations", "total population must be positive"));
        }
        if trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        if let PhasePolicy::Fixed(ph) = &phase_policy {
            if ph.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: ph.len(),
                });
            }
        }
        integration.check_against(&sys)?;
        Ok(Self {
            sys,
            initial_populations,
            phase_policy,
            integration,
            trials,
            master_seed,
            detector: SaturationDetector::default(),
        })
    }

    /// `Z = sum_i n_i(0)`.
    pub fn total_initial_population(&self) -> f64 {
        self.initial_populations.iter().sum()
    }

    fn initial_state(&self, rng: &mut TrialRng) -> AmplitudeState {
        let phases: Vec<f64> = match &self.phase_policy {
            PhasePolicy::RandomUniform => (0..self.sys.mode_count())
                .map(|_| rng.random_range(0.0..2.0 * PI))
                .collect(),
            PhasePolicy::Fixed(ph) => ph.clone(),
        };
        AmplitudeState::from_populations(&self.initial_populations, &phases, 0.0)
            .expect("populations validated at construction")
    }
}

/// Result of a single competition run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub winner: usize,
    pub final_populations: Vec<f64>,
    pub saturation_time: Option<f64>,
}

/// Index of the largest entry; ties resolve to the lowest index.
fn argmax_lowest(values: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut tie = false;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
            tie = false;
        } else if v == values[best] {
            tie = true;
        }
    }
    (best, tie)
}

/// Integrates one trial to `t_end` with the stream `(master_seed, trial_index)`
/// and declares the most populated mode the winner.
pub fn run_trial(cfg: &CompetitionConfig, trial_index: u64) -> Result<TrialOutcome> {
    if trial_index >= cfg.trials {
        return Err(invalid(
            "trial_index",
            format!("{trial_index} out of range for {} trials", cfg.trials),
        ));
    }
    let mut rng = trial_rng(cfg.master_seed, trial_index);
    let init = cfg.initial_state(&mut rng);
    let steps = cfg.integration.steps();
    let dt = cfg.integration.effective_dt();
    let stride = cfg.integration.record_stride;
    let mut stepper = Stepper::new(&cfg.sys, dt);
    let mut amps: Vec<Complex64> = init.amplitudes;

    let mut times = Vec::with_capacity(steps / stride + 2);
    let mut totals = Vec::with_capacity(steps / stride + 2);
    times.push(0.0);
    totals.push(amps.iter().map(|a| a.norm_sqr()).sum::<f64>());
    for k in 1..=steps {
        if !stepper.step(&mut amps, &mut rng) {
            return Err(Error::TrialAborted {
                trial: trial_index,
                reason: format!("non-finite amplitude at t = {:e} s", k as f64 * dt),
            });
        }
        if k % stride == 0 || k == steps {
            times.push(k as f64 * dt);
            totals.push(amps.iter().map(|a| a.norm_sqr()).sum::<f64>());
        }
    }
    let final_populations: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
    let (winner, tie) = argmax_lowest(&final_populations);
    if tie {
        debug!("trial {trial_index}: tie for the largest population, mode {winner} wins");
    }
    let saturation_time = cfg.detector.detect(&times, &totals).ok().flatten();
    Ok(TrialOutcome {
        winner,
        final_populations,
        saturation_time,
    })
}

/// Summary of the per-trial saturation times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SaturationSummary {
    pub detected: u64,
    pub mean: Option<f64>,
    pub std_dev: Option<f64>,
    pub median: Option<f64>,
}

impl SaturationSummary {
    fn from_samples(mut samples: Vec<f64>) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self {
                detected: 0,
                mean: None,
                std_dev: None,
                median: None,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        samples.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            samples[n / 2]
        } else {
            0.5 * (samples[n / 2 - 1] + samples[n / 2])
        };
        Self {
            detected: n as u64,
            mean: Some(mean),
            std_dev: Some(var.sqrt()),
            median: Some(median),
        }
    }
}

/// Aggregated win statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitionOutcome {
    pub wins: Vec<u64>,
    pub win_probabilities: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub trials: u64,
    pub aborted: u64,
    pub t_star: SaturationSummary,
}

impl CompetitionOutcome {
    fn from_trials(modes: usize, results: Vec<Result<TrialOutcome>>) -> Result<Self> {
        let trials = results.len() as u64;
        let mut wins = vec![0u64; modes];
        let mut t_stars = Vec::new();
        let mut aborted = 0u64;
        for r in results {
            match r {
                Ok(o) => {
                    wins[o.winner] += 1;
                    if let Some(t) = o.saturation_time {
                        t_stars.push(t);
                    }
                }
                Err(e) => {
                    warn!("{e}");
                    aborted += 1;
                }
            }
        }
        let completed: u64 = wins.iter().sum();
        if completed == 0 {
            return Err(Error::AllTrialsAborted { trials });
        }
        let win_probabilities: Vec<f64> = wins.iter().map(|&w| w as f64 / completed as f64).collect();
        let standard_errors = win_probabilities
            .iter()
            .map(|p| (p * (1.0 - p) / completed as f64).sqrt())
            .collect();
        Ok(Self {
            wins,
            win_probabilities,
            standard_errors,
            trials,
            aborted,
            t_star: SaturationSummary::from_samples(t_stars),
        })
    }

    /// JSON document with probabilities, counts, errors, the saturation-time
    /// summary and the configuration that produced them.
    pub fn to_json(&self, cfg: &CompetitionConfig) -> serde_json::Value {
        serde_json::json!({
            "P": self.win_probabilities,
            "W": self.wins,
            "stderr": self.standard_errors,
            "trials": self.trials,
            "aborted": self.aborted,
            "t_star_summary": self.t_star,
            "config": cfg,
        })
    }
}

/// Runs every trial of `cfg` on the current rayon pool and aggregates the
/// winners. Counts depend only on the configuration, not on the pool size.
pub fn estimate_win_probabilities(cfg: &CompetitionConfig) -> Result<CompetitionOutcome> {
    let results: Vec<Result<TrialOutcome>> = (0..cfg.trials).into_par_iter().map(|i| run_trial(cfg, i)).collect();
    CompetitionOutcome::from_trials(cfg.sys.mode_count(), results)
}

/// [`estimate_win_probabilities`] on a dedicated pool of `threads` workers.
pub fn estimate_win_probabilities_with_threads(cfg: &CompetitionConfig, threads: usize) -> Result<CompetitionOutcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid("threads", e.to_string()))?;
    pool.install(|| estimate_win_probabilities(cfg))
}

/// Generalized Born rule `P_i = G_i n_i / sum_j G_j n_j` with
/// `G_i = exp(3 gamma_i t*)`.
pub fn born_rule_probabilities(n0: &[f64], gammas: &[f64], t_star: f64) -> Result<Vec<f64>> {
    born_rule_probabilities_with_exponent(n0, gammas, t_star, BORN_EXPONENT)
}

/// Born-rule weights with an arbitrary exponent prefactor, `G_i = exp(c gamma_i t*)`.
pub fn born_rule_probabilities_with_exponent(
    n0: &[f64],
    gammas: &[f64],
    t_star: f64,
    exponent: f64,
) -> Result<Vec<f64>> {
    if n0.len() != gammas.len() {
        return Err(Error::DimensionMismatch {
            expected: n0.len(),
            actual: gammas.len(),
        });
    }
    if !(t_star.is_finite() && t_star >= 0.0) {
        return Err(invalid("t_star", "must be finite and >= 0"));
    }
    if n0.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
        return Err(invalid("n0", "populations must be finite and >= 0"));
    }
    if n0.iter().all(|&n| n == 0.0) {
        return Err(invalid("n0", "all populations are zero"));
    }
    // log-weights, shifted by their maximum to keep exp() in range
    let logw: Vec<f64> = n0
        .iter()
        .zip(gammas)
        .map(|(&n, &g)| {
            if n > 0.0 {
                n.ln() + exponent * g * t_star
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let sum: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / sum).collect())
}

/// Probability that mode 0 ends more populated than mode 1 under the Gaussian
/// approximation of the population difference in the linear regime,
/// `Phi(mu / sigma)` with `mu = mean_0 - mean_1` and `sigma^2 = var_0 + var_1`.
#[allow(clippy::too_many_arguments)]
pub fn analytic_win_probability(gamma0: f64, gamma1: f64, eta0: f64, eta1: f64, n0: f64, n1: f64, t: f64) -> f64 {
    let (m0, v0) = linear_moments(n0, gamma0, eta0, t);
    let (m1, v1) = linear_moments(n1, gamma1, eta1, t);
    let mu = m0 - m1;
    let sigma = (v0 + v1).sqrt();
    if sigma == 0.0 {
        return if mu > 0.0 {
            1.0
        } else if mu < 0.0 {
            0.0
        } else {
            0.5
        };
    }
    normal_cdf(mu / sigma)
}

/// Exponent constant that makes the Born-rule ansatz agree with the
/// Gaussian winner probability to second order, approximately 3.0154.
pub fn alpha_constant() -> f64 {
    let sp = PI.sqrt();
    let d = (PI + 4.0).sqrt() - sp;
    (PI + 2.0) * d / sp + d * d / 2.0
}

/// Coefficient `pi/4 + sqrt(pi) sqrt(pi + 4) / 4` of the seed threshold, about 1.9696.
pub fn seed_threshold_coefficient() -> f64 {
    PI / 4.0 + PI.sqrt() * (PI + 4.0).sqrt() / 4.0
}

/// Total population at which stimulated processes overtake spontaneous noise,
/// `(pi/4 + sqrt(pi) sqrt(pi + 4)/4) eta / gamma`.
pub fn seed_population_threshold(eta: f64, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(invalid("gamma", "net gain must be positive"));
    }
    if !(eta >= 0.0) {
        return Err(invalid("eta", "must be >= 0"));
    }
    Ok(seed_threshold_coefficient() * eta / gamma)
}

/// Locates the end of the exponential growth phase in a total-population
/// time series.
///
/// The reference growth rate is the log-slope between the first times the
/// log-population covers 25% and 50% of its total rise. Saturation is the
/// centre of the first later window whose log-slope falls below
/// `fraction` times that reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationDetector {
    pub fraction: f64,
    /// Slope window in samples; `None` picks half the reference span.
    pub window: Option<usize>,
}

impl Default for SaturationDetector {
    fn default() -> Self {
        Self {
            fraction: 0.5,
            window: None,
        }
    }
}

impl SaturationDetector {
    /// Saturation time measured from `times[0]`, or `None` when growth never
    /// slows (e.g. without saturation).
    pub fn detect(&self, times: &[f64], totals: &[f64]) -> Result<Option<f64>> {
        let len = times.len();
        if len < 3 || totals.len() != len {
            return Err(Error::TrajectoryTooShort {
                len: len.min(totals.len()),
                min: 3,
            });
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(invalid("fraction", "must lie in (0, 1)"));
        }
        if totals.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
            return Ok(None);
        }
        let logs: Vec<f64> = totals.iter().map(|n| n.ln()).collect();
        let lo = logs[0];
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rise = hi - lo;
        if rise <= 0.0 {
            return Ok(None);
        }
        let first_above = |level: f64| logs.iter().position(|&l| l >= level);
        let (Some(a), Some(b)) = (first_above(lo + 0.25 * rise), first_above(lo + 0.5 * rise)) else {
            return Ok(None);
        };
        if b <= a {
            return Ok(None);
        }
        let reference = (logs[b] - logs[a]) / (times[b] - times[a]);
        if reference <= 0.0 {
            return Ok(None);
        }
        let w = self.window.unwrap_or(((b - a) / 2).max(1)).max(1);
        let threshold = self.fraction * reference;
        let mut k = b;
        while k + w < len {
            let slope = (logs[k + w] - logs[k]) / (times[k + w] - times[k]);
            if slope < threshold {
                return Ok(Some(0.5 * (times[k] + times[k + w]) - times[0]));
            }
            k += 1;
        }
        Ok(None)
    }
}

/// Saturation time of a recorded trajectory with the default detector.
pub fn detect_saturation_time(trajectory: &Trajectory) -> Result<Option<f64>> {
    SaturationDetector::default().detect(&trajectory.times(), &trajectory.total_populations())
}

/// Horizon of `factor` times the largest saturation time found in `pilots`
/// pilot trajectories integrated over `pilot_horizon`.
pub fn pilot_horizon(
    sys: &ModeSystem,
    initial_populations: &[f64],
    integration: &IntegrationConfig,
    pilots: u64,
    seed: u64,
    factor: f64,
) -> Result<f64> {
    let cfg = CompetitionConfig::new(
        sys.clone(),
        initial_populations.to_vec(),
        PhasePolicy::RandomUniform,
        *integration,
        pilots.max(1),
        seed,
    )?;
    let mut longest: Option<f64> = None;
    for i in 0..cfg.trials {
        let o = run_trial(&cfg, i)?;
        if let Some(t) = o.saturation_time {
            longest = Some(longest.map_or(t, |l: f64| l.max(t)));
        }
    }
    longest
        .map(|t| factor * t)
        .ok_or_else(|| Error::Degenerate("no saturation detected in the pilot runs".into()))
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param: f64,
    pub outcome: CompetitionOutcome,
}

/// CSV with columns `sweep_param, P_0, stderr_0, P_1, stderr_1, ...`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    let m = rows.first().map_or(0, |r| r.outcome.wins.len());
    let mut header = vec!["sweep_param".to_string()];
    for i in 0..m {
        header.push(format!("P_{i}"));
        header.push(format!("stderr_{i}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut line = vec![format!("{}", r.param)];
        for (p, s) in r.outcome.win_probabilities.iter().zip(&r.outcome.standard_errors) {
            line.push(format!("{p}"));
            line.push(format!("{s}"));
        }
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
