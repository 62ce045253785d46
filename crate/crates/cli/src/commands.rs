//! One function per subcommand. Each merges its file section with the
//! command-line flags and returns a JSON report that echoes the resolved
//! configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use photon_chaos::analysis::io::{load_pattern, write_csv_matrix, write_mask_pgm, write_pgm, PgmFormat};
use photon_chaos::analysis::{
    neighbor_correlations, normalized_entropy, pearson_correlation, porter_thomas_fit, power_law_fit,
    synthetic_pattern, PatternKind, PatternMatrix, DEFAULT_BINS,
};
use photon_chaos::billiard::{
    lyapunov_exponent, periodic_orbit, simulate_trajectory, LyapunovOptions, ParticleState, StopCondition,
    WedgeGeometry, DEFAULT_GRAVITY, DEFAULT_MASS,
};
use photon_chaos::competition::{
    alpha_constant, analytic_win_probability, born_rule_probabilities, born_rule_probabilities_with_exponent,
    detect_saturation_time, estimate_win_probabilities, pilot_horizon, seed_threshold_coefficient, write_sweep_csv,
    CompetitionConfig, CompetitionOutcome, PhasePolicy, SweepRow,
};
use photon_chaos::rng::trial_rng;
use photon_chaos::sde::{integrate, AmplitudeState, IntegrationConfig, ModeSystem};
use photon_chaos::stability::{compute_stability_map, GridSpec, StabilityParams, PLANCK};

use crate::config::{apply_flags, section, FileConfig, SystemConfig};
use crate::{
    AnalysisArgs, BilliardArgs, BornArgs, Cli, Command, CorrelateArgs, StabilityArgs, SynthArgs, SystemArgs,
    TrajectoryArgs,
};

/// Pilot runs integrate for this many e-folds of the fastest mode.
const PILOT_EFOLDS: f64 = 40.0;
/// Competition horizon as a multiple of the longest pilot saturation time.
const HORIZON_FACTOR: f64 = 5.0;

pub fn run(cli: &Cli, file: &FileConfig) -> Result<Value> {
    let seed = cli.seed.or(file.seed).unwrap_or_else(rand::random);
    let csv = cli.csv.as_deref();
    let mut report = match &cli.command {
        Command::Compete(a) => compete(a, file, seed, csv)?,
        Command::Born(a) => born(a, file)?,
        Command::Trajectory(a) => trajectory(a, file, seed, csv)?,
        Command::Billiard(a) => billiard(a, file, csv)?,
        Command::StabilityMap(a) => stability_map(a, file, csv)?,
        Command::Entropy(a) => entropy(a, file)?,
        Command::Correlate(a) => correlate(a, csv)?,
        Command::PtFit(a) => pt_fit(a, file)?,
        Command::Synth(a) => synth(a, file, seed)?,
    };
    if let Value::Object(m) = &mut report {
        m.insert("seed".into(), json!(seed));
        m.insert("schema_version".into(), json!(crate::config::SCHEMA_VERSION));
    }
    Ok(report)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("grid `{s}` should look like 101x101"))?;
    Ok((a.trim().parse().context("grid")?, b.trim().parse().context("grid")?))
}

fn apply_system(cfg: &mut SystemConfig, a: &SystemArgs) {
    apply_flags!(cfg, a; modes, gains, losses, noise, beta_diag, beta_off, z_total, fractions,
        rate_step, t_end, record_stride);
}

fn horizon(cfg: &SystemConfig, sys: &ModeSystem, pops: &[f64], seed: u64) -> Result<f64> {
    if let Some(t) = cfg.t_end {
        return Ok(t);
    }
    let gmax = sys.max_net_gain();
    if gmax <= 0.0 {
        bail!("no mode has net gain; give `t_end` explicitly");
    }
    let pilot = IntegrationConfig::for_system(sys, cfg.rate_step, PILOT_EFOLDS / gmax, cfg.record_stride)?;
    // Pilot streams are kept apart from the production streams.
    Ok(pilot_horizon(
        sys,
        pops,
        &pilot,
        cfg.pilots,
        seed ^ 0x9e37_79b9_7f4a_7c15,
        HORIZON_FACTOR,
    )?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CompeteConfig {
    system: SystemConfig,
    trials: u64,
    /// Values of the mode-0 population fraction.
    sweep: Option<Vec<f64>>,
}

impl Default for CompeteConfig {
    fn default() -> Self {
        CompeteConfig {
            system: SystemConfig::default(),
            trials: 10_000,
            sweep: None,
        }
    }
}

fn compete(a: &SystemArgs, file: &FileConfig, seed: u64, csv: Option<&Path>) -> Result<Value> {
    let mut cfg: CompeteConfig = section(file.compete.as_ref(), "compete")?;
    apply_system(&mut cfg.system, a);
    apply_flags!(cfg, a; trials, sweep);

    let sys = cfg.system.mode_system()?;
    let z = cfg.system.total_population(&sys)?;
    let base = cfg.system.fractions()?;

    let run_one = |fractions: &[f64]| -> Result<(CompetitionOutcome, Value)> {
        let pops: Vec<f64> = fractions.iter().map(|f| f * z).collect();
        let t_end = horizon(&cfg.system, &sys, &pops, seed)?;
        let integ = IntegrationConfig::for_system(&sys, cfg.system.rate_step, t_end, cfg.system.record_stride)?;
        let cc = CompetitionConfig::new(
            sys.clone(),
            pops.clone(),
            PhasePolicy::RandomUniform,
            integ,
            cfg.trials,
            seed,
        )?;
        let outcome = estimate_win_probabilities(&cc)?;
        let born = match outcome.t_star.median {
            Some(t) => json!(born_rule_probabilities(&pops, &sys.net_gains(), t)?),
            None => Value::Null,
        };
        let mut v = outcome.to_json(&cc);
        v["born_prediction"] = born;
        Ok((outcome, v))
    };

    match &cfg.sweep {
        None => {
            if let Some(p) = csv {
                bail!("--csv is only used with --sweep (got {})", p.display());
            }
            let (_, v) = run_one(&base)?;
            Ok(json!({ "command": "compete", "resolved": cfg, "result": v }))
        }
        Some(values) => {
            if base.len() < 2 {
                bail!("a sweep needs at least two modes");
            }
            let rest: f64 = base[1..].iter().sum();
            let mut rows = Vec::new();
            let mut points = Vec::new();
            for &f0 in values {
                if !(0.0..=1.0).contains(&f0) {
                    bail!("sweep value {f0} is not a fraction in [0, 1]");
                }
                let mut fr = vec![f0];
                fr.extend(base[1..].iter().map(|f| (1.0 - f0) * f / rest));
                let (outcome, v) = run_one(&fr)?;
                rows.push(SweepRow { param: f0, outcome });
                points.push(json!({ "sweep_param": f0, "result": v }));
            }
            if let Some(p) = csv {
                let mut w = create(p)?;
                write_sweep_csv(&rows, &mut w)?;
                w.flush()?;
            }
            Ok(json!({ "command": "compete", "resolved": cfg, "sweep": points }))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BornConfig {
    populations: Vec<f64>,
    gammas: Vec<f64>,
    t_star: f64,
    exact_alpha: bool,
    noise: Option<Vec<f64>>,
    time: Option<f64>,
}

impl Default for BornConfig {
    fn default() -> Self {
        BornConfig {
            populations: vec![1.0, 1.0],
            gammas: vec![6.4e10, 6.4e10],
            t_star: 6.5e-11,
            exact_alpha: false,
            noise: None,
            time: None,
        }
    }
}

fn born(a: &BornArgs, file: &FileConfig) -> Result<Value> {
    let mut cfg: BornConfig = section(file.born.as_ref(), "born")?;
    apply_flags!(cfg, a; populations, gammas, t_star, noise, time);
    cfg.exact_alpha |= a.exact_alpha;

    let exponent = if cfg.exact_alpha { alpha_constant() } else { 3.0 };
    let p = born_rule_probabilities_with_exponent(&cfg.populations, &cfg.gammas, cfg.t_star, exponent)?;
    let analytic = match (&cfg.noise, cfg.time) {
        (Some(eta), Some(t)) => {
            if cfg.populations.len() != 2 || cfg.gammas.len() != 2 || eta.len() != 2 {
                bail!("the analytic probability needs exactly two populations, gammas and noise values");
            }
            let p0 = analytic_win_probability(
                cfg.gammas[0],
                cfg.gammas[1],
                eta[0],
                eta[1],
                cfg.populations[0],
                cfg.populations[1],
                t,
            );
            json!([p0, 1.0 - p0])
        }
        (None, None) => Value::Null,
        _ => bail!("the analytic probability needs both --noise and --time"),
    };
    Ok(json!({
        "command": "born",
        "resolved": cfg,
        "exponent": exponent,
        "P": p,
        "analytic_P": analytic,
        "alpha_constant": alpha_constant(),
        "seed_threshold_coefficient": seed_threshold_coefficient(),
    }))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrajectoryConfig {
    system: SystemConfig,
    trial: u64,
}

fn trajectory(a: &TrajectoryArgs, file: &FileConfig, seed: u64, csv: Option<&Path>) -> Result<Value> {
    let mut cfg: TrajectoryConfig = section(file.trajectory.as_ref(), "trajectory")?;
    apply_system(&mut cfg.system, &a.system);
    apply_flags!(cfg, a; trial);

    let sys = cfg.system.mode_system()?;
    let z = cfg.system.total_population(&sys)?;
    let pops: Vec<f64> = cfg.system.fractions()?.iter().map(|f| f * z).collect();
    let t_end = horizon(&cfg.system, &sys, &pops, seed)?;
    let integ = IntegrationConfig::for_system(&sys, cfg.system.rate_step, t_end, cfg.system.record_stride)?;

    let mut rng = trial_rng(seed, cfg.trial);
    let phases: Vec<f64> = (0..pops.len())
        .map(|_| rng.random_range(0.0..2.0 * std::f64::consts::PI))
        .collect();
    let init = AmplitudeState::from_populations(&pops, &phases, 0.0)?;
    let traj = integrate(&init, &sys, &integ, &mut rng)?;
    if let Some(p) = csv {
        let mut w = create(p)?;
        traj.write_csv(&mut w)?;
        w.flush()?;
    }
    let last = traj.last().ok_or_else(|| anyhow!("empty trajectory"))?.populations();
    let winner = last
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i);
    Ok(json!({
        "command": "trajectory",
        "resolved": cfg,
        "integration": integ,
        "samples": traj.len(),
        "t_star": detect_saturation_time(&traj)?,
        "final_populations": last,
        "winner": winner,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BilliardConfig {
    angle_deg: f64,
    gravity: f64,
    mass: f64,
    x0: f64,
    y0: f64,
    vx0: f64,
    vy0: f64,
    periodic: bool,
    bounces: usize,
    t_end: Option<f64>,
    samples: usize,
    lyapunov: bool,
    /// Lyapunov horizon; 4000 mean flight times when absent.
    horizon: Option<f64>,
}

impl Default for BilliardConfig {
    fn default() -> Self {
        BilliardConfig {
            angle_deg: 35.0,
            gravity: DEFAULT_GRAVITY,
            mass: DEFAULT_MASS,
            x0: 2e-5,
            y0: 1e-4,
            vx0: 0.0,
            vy0: 0.0,
            periodic: false,
            bounces: 1000,
            t_end: None,
            samples: 0,
            lyapunov: false,
            horizon: None,
        }
    }
}

fn billiard(a: &BilliardArgs, file: &FileConfig, csv: Option<&Path>) -> Result<Value> {
    let mut cfg: BilliardConfig = section(file.billiard.as_ref(), "billiard")?;
    apply_flags!(cfg, a; angle_deg, gravity, mass, x0, y0, vx0, vy0, bounces, t_end, samples, horizon);
    cfg.periodic |= a.periodic;
    cfg.lyapunov |= a.lyapunov;

    let wedge = WedgeGeometry::new(cfg.angle_deg.to_radians(), cfg.gravity, cfg.mass)?;
    let (initial, orbit) = if cfg.periodic {
        let o = periodic_orbit(cfg.x0, cfg.y0, &wedge)?;
        (o.initial_state(), Some(o))
    } else {
        (ParticleState::new(cfg.x0, cfg.y0, cfg.vx0, cfg.vy0), None)
    };
    let stop = match cfg.t_end {
        Some(t) => StopCondition::Until(t),
        None => StopCondition::MaxBounces(cfg.bounces),
    };
    let path = simulate_trajectory(&initial, &wedge, stop, cfg.samples)?;
    if let Some(p) = csv {
        let mut w = create(p)?;
        path.write_csv(&mut w)?;
        w.flush()?;
    }
    let last = *path.last_state();
    let e0 = initial.energy(&wedge);

    let lyap = if cfg.lyapunov {
        let h = match cfg.horizon {
            Some(h) => h,
            None => {
                let probe = simulate_trajectory(&initial, &wedge, StopCondition::MaxBounces(200), 0)?;
                if probe.corner_hit || probe.bounces == 0 {
                    bail!("cannot estimate a flight time from this start; give --horizon");
                }
                4000.0 * probe.last_state().t / probe.bounces as f64
            }
        };
        let est = lyapunov_exponent(&initial, &wedge, h, &LyapunovOptions::default())?;
        json!({ "estimate": est, "regime": est.regime() })
    } else {
        Value::Null
    };

    Ok(json!({
        "command": "billiard",
        "resolved": cfg,
        "wedge": wedge,
        "initial": initial,
        "periodic_orbit": orbit,
        "bounces": path.bounces,
        "corner_hit": path.corner_hit,
        "final": last,
        "relative_energy_drift": (last.energy(&wedge) - e0) / e0,
        "lyapunov": lyap,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StabilityConfig {
    angle_deg: f64,
    gravity: f64,
    mass: f64,
    pump_diameter: f64,
    confidence: f64,
    grid: String,
    y_min: f64,
    y_max: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        StabilityConfig {
            angle_deg: 35.0,
            gravity: DEFAULT_GRAVITY,
            mass: DEFAULT_MASS,
            pump_diameter: 25e-6,
            confidence: 0.5,
            grid: format!("{}x{}", g.nx, g.ny),
            y_min: g.y_min,
            y_max: g.y_max,
        }
    }
}

fn stability_map(a: &StabilityArgs, file: &FileConfig, csv: Option<&Path>) -> Result<Value> {
    let mut cfg: StabilityConfig = section(file.stability_map.as_ref(), "stability-map")?;
    apply_flags!(cfg, a; angle_deg, gravity, mass, pump_diameter, confidence, grid, y_min, y_max);

    let wedge = WedgeGeometry::new(cfg.angle_deg.to_radians(), cfg.gravity, cfg.mass)?;
    let params = StabilityParams::new(wedge, cfg.pump_diameter, cfg.confidence, PLANCK)?;
    let (nx, ny) = parse_grid(&cfg.grid)?;
    let spec = GridSpec {
        y_min: cfg.y_min,
        y_max: cfg.y_max,
        nx,
        ny,
    };
    let map = compute_stability_map(&spec.points(&wedge)?, &params);
    if let Some(p) = csv {
        let mut w = create(p)?;
        map.write_csv(&mut w)?;
        w.flush()?;
    }
    for f in &map.failures {
        eprintln!("warning: cell ({:e}, {:e}): {}", f.x_pump, f.y_pump, f.error);
    }
    Ok(json!({
        "command": "stability-map",
        "resolved": cfg,
        "summary": map.summary_json(&params),
        "failures": map.failures,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AnalysisConfig {
    bins: usize,
    mask: Option<PathBuf>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            bins: DEFAULT_BINS,
            mask: None,
        }
    }
}

fn load_all(paths: &[PathBuf], mask: Option<&Path>) -> Result<Vec<PatternMatrix>> {
    paths
        .iter()
        .map(|p| load_pattern(p, mask).with_context(|| format!("loading {}", p.display())))
        .collect()
}

fn analysis_config(a: &AnalysisArgs, file: &FileConfig) -> Result<AnalysisConfig> {
    let mut cfg: AnalysisConfig = section(file.analysis.as_ref(), "analysis")?;
    apply_flags!(cfg, a; bins, mask);
    Ok(cfg)
}

fn entropy(a: &AnalysisArgs, file: &FileConfig) -> Result<Value> {
    let cfg = analysis_config(a, file)?;
    let patterns = load_all(&a.inputs, cfg.mask.as_deref())?;
    let results = patterns
        .iter()
        .map(|p| {
            let e = normalized_entropy(p, cfg.bins)?;
            Ok(json!({ "input": p.meta.label, "entropy": e }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "command": "entropy", "resolved": cfg, "inputs": a.inputs, "results": results }))
}

fn pt_fit(a: &AnalysisArgs, file: &FileConfig) -> Result<Value> {
    let cfg = analysis_config(a, file)?;
    let patterns = load_all(&a.inputs, cfg.mask.as_deref())?;
    let results = patterns
        .iter()
        .map(|p| {
            let fit = porter_thomas_fit(p)?;
            let power = match power_law_fit(p, cfg.bins) {
                Ok(f) => json!(f),
                Err(e) => json!({ "error": e.to_string() }),
            };
            Ok(json!({
                "input": p.meta.label,
                "porter_thomas": fit,
                "chi2_per_dof": fit.chi2_per_dof(),
                "passes_ks_1pct": fit.passes_ks_1pct(),
                "power_law": power,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(json!({ "command": "pt-fit", "resolved": cfg, "inputs": a.inputs, "results": results }))
}

fn correlate(a: &CorrelateArgs, csv: Option<&Path>) -> Result<Value> {
    let mut inputs = a.inputs.clone();
    if let Some(list) = &a.list {
        let text = std::fs::read_to_string(list).with_context(|| format!("reading {}", list.display()))?;
        let dir = list.parent().unwrap_or(Path::new(""));
        inputs.extend(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| dir.join(l)),
        );
    }
    if inputs.len() < 2 {
        bail!("need at least two patterns to correlate");
    }
    let patterns = load_all(&inputs, a.mask.as_deref())?;
    if a.scan {
        let r = neighbor_correlations(&patterns)?;
        if let Some(p) = csv {
            let mut w = create(p)?;
            writeln!(w, "index,r_neighbor")?;
            for (i, v) in r.iter().enumerate() {
                writeln!(w, "{i},{v}")?;
            }
            w.flush()?;
        }
        return Ok(json!({ "command": "correlate", "mode": "scan", "inputs": inputs, "r_neighbor": r }));
    }
    let n = patterns.len();
    let mut matrix = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let r = pearson_correlation(&patterns[i], &patterns[j])?;
            matrix[i][j] = r;
            matrix[j][i] = r;
        }
    }
    if let Some(p) = csv {
        let mut w = create(p)?;
        for row in &matrix {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()?;
    }
    Ok(json!({ "command": "correlate", "mode": "pairwise", "inputs": inputs, "matrix": matrix }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthConfig {
    kind: String,
    angle_deg: f64,
    gravity: f64,
    mass: f64,
    energy: Option<f64>,
    turning_height: f64,
    grid: String,
    count: usize,
    out_dir: PathBuf,
    format: String,
    bits: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            kind: "chaotic".into(),
            angle_deg: 35.0,
            gravity: DEFAULT_GRAVITY,
            mass: DEFAULT_MASS,
            energy: None,
            turning_height: 2e-3,
            grid: "128x128".into(),
            count: 1,
            out_dir: PathBuf::from("."),
            format: "pgm".into(),
            bits: 16,
        }
    }
}

fn synth(a: &SynthArgs, file: &FileConfig, seed: u64) -> Result<Value> {
    let mut cfg: SynthConfig = section(file.synth.as_ref(), "synth")?;
    apply_flags!(cfg, a; kind, angle_deg, gravity, mass, energy, turning_height, grid, count, out_dir, format, bits);

    let kind = match cfg.kind.as_str() {
        "chaotic" => PatternKind::Chaotic,
        "regular" => PatternKind::Regular,
        k => bail!("unknown pattern kind `{k}` (chaotic or regular)"),
    };
    let maxval = match cfg.bits {
        8 => 255,
        16 => 65535,
        b => bail!("--bits must be 8 or 16, got {b}"),
    };
    let ext = match cfg.format.as_str() {
        "pgm" | "csv" => cfg.format.clone(),
        f => bail!("unknown format `{f}` (pgm or csv)"),
    };
    let wedge = WedgeGeometry::new(cfg.angle_deg.to_radians(), cfg.gravity, cfg.mass)?;
    let energy = cfg.energy.unwrap_or(wedge.mass * wedge.gravity * cfg.turning_height);
    let (h, w) = parse_grid(&cfg.grid)?;
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;

    let mut files = Vec::new();
    let mut mask_file = None;
    for i in 0..cfg.count {
        let s = seed.wrapping_add(i as u64);
        let pattern = synthetic_pattern(kind, &wedge, energy, h, w, s)?;
        let path = cfg.out_dir.join(format!("{}_{i:04}.{ext}", cfg.kind));
        let mut out = create(&path)?;
        if ext == "pgm" {
            write_pgm(&pattern, PgmFormat::Raw, maxval, &mut out)?;
        } else {
            write_csv_matrix(&pattern, &mut out)?;
        }
        out.flush()?;
        if mask_file.is_none() && ext == "pgm" {
            let mp = cfg.out_dir.join("mask.pgm");
            let mut mw = create(&mp)?;
            write_mask_pgm(&pattern, &mut mw)?;
            mw.flush()?;
            mask_file = Some(mp);
        }
        files.push(json!({ "path": path, "seed": s }));
    }
    Ok(json!({
        "command": "synth",
        "resolved": cfg,
        "energy": energy,
        "files": files,
        "mask": mask_file,
    }))
}
