//! Command runners behind the `vibrokit` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::averaging::{order_study, synthetic_benchmark, OrderStudy};
use crate::certify::{certify, estimate_eps_star, StabilityCertificate};
use crate::config::{ExperimentConfig, InitialCondition};
use crate::design::{amplitude_scan, DesignResult};
use crate::error::{Error, Result};
use crate::network::{build_reduction, laplacian_consistency_check, validate_invariance, InvarianceViolation};
use crate::reduction::compute_r;
use crate::simulate::{admissible_dt, cluster_errors, default_initial, simulate_full, verdict, StepConfig, SyncVerdict, Trajectory};
use crate::vibration::{LinearizedBlocks, VibrationSchedule};

/// Upper bound on rows in `plotdata_*.csv`.
pub const PLOT_ROWS: usize = 5000;
/// Overrides the thread count used for grid fan-out.
pub const THREADS_ENV: &str = "VIBROKIT_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Certify,
    Simulate,
    Design,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Certify => "certify",
            Command::Simulate => "simulate",
            Command::Design => "design",
            Command::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub controlled: bool,
    pub s0: Option<f64>,
    pub eps: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: None,
            seed: None,
            controlled: true,
            s0: None,
            eps: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    /// False for a negative analysis verdict.
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'static str,
    config_name: &'a str,
    config_digest: String,
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

/// Installs a global rayon pool sized by `VIBROKIT_THREADS`, if set.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

struct Writer {
    dir: PathBuf,
    pending: Vec<(PathBuf, Vec<u8>)>,
}

impl Writer {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            pending: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.pending.push((self.dir.join(name), bytes));
    }

    fn json<T: Serialize>(&mut self, name: &str, cfg: &ExperimentConfig, command: Command, body: &T) -> Result<()> {
        let report = Report {
            command: command.name(),
            config_name: &cfg.name,
            config_digest: cfg.digest(),
            seed: cfg.simulation.seed,
            body,
        };
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    fn finish(self) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.dir)?;
        let mut files = Vec::new();
        for (path, bytes) in self.pending {
            std::fs::write(&path, bytes)?;
            files.push(path);
        }
        Ok(files)
    }
}

fn apply_overrides(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    if let Some(seed) = opts.seed {
        c.simulation.seed = seed;
    }
    if let Some(s0) = opts.s0 {
        if !s0.is_finite() {
            return Err(Error::InvalidArgument(format!("--s0 {s0}")));
        }
        c.analysis.s0 = s0;
    }
    if let Some(eps) = opts.eps {
        let base = c.schedule.clone().map_or_else(|| VibrationSchedule::new(eps), |s| s.with_epsilon(eps))?;
        c.schedule = Some(base);
        c.analysis.sweep_eps0 = eps;
    }
    Ok(c)
}

pub fn run(command: Command, cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let cfg = apply_overrides(cfg, opts)?;
    let dir = opts
        .out_dir
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut w = Writer::new(&dir);
    let (passed, summary) = match command {
        Command::Validate => run_validate(&cfg, &mut w)?,
        Command::Certify => run_certify(&cfg, &mut w)?,
        Command::Simulate => run_simulate(&cfg, opts.controlled, &mut w)?,
        Command::Design => run_design(&cfg, &mut w)?,
        Command::Sweep => run_sweep(&cfg, &mut w)?,
    };
    let files = w.finish()?;
    Ok(Outcome { passed, summary, files })
}

#[derive(Serialize)]
struct ValidationBody {
    passes: bool,
    structural_error: Option<String>,
    violations: Vec<InvarianceViolation>,
    tolerance: f64,
    laplacian_consistent: Option<bool>,
}

fn run_validate(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, String)> {
    let structural = |e: &Error| {
        matches!(
            e,
            Error::InvalidPartition(_) | Error::DisconnectedCluster { .. } | Error::DisconnectedQuotient
        )
    };
    let body = match cfg.build() {
        Err(e) if structural(&e) => ValidationBody {
            passes: false,
            structural_error: Some(e.to_string()),
            violations: Vec::new(),
            tolerance: crate::network::TOL_INVARIANCE,
            laplacian_consistent: None,
        },
        Err(e) => return Err(e),
        Ok(exp) => match validate_invariance(&exp.network, &exp.partition) {
            Err(e) if structural(&e) => ValidationBody {
                passes: false,
                structural_error: Some(e.to_string()),
                violations: Vec::new(),
                tolerance: crate::network::TOL_INVARIANCE,
                laplacian_consistent: None,
            },
            Err(e) => return Err(e),
            Ok(report) => {
                let laplacian = build_reduction(&exp.network, &exp.partition)
                    .ok()
                    .map(|red| laplacian_consistency_check(&red, &exp.network));
                ValidationBody {
                    passes: report.passes(),
                    structural_error: None,
                    violations: report.violations,
                    tolerance: report.tolerance,
                    laplacian_consistent: laplacian,
                }
            }
        },
    };
    let mut s = String::new();
    if let Some(e) = &body.structural_error {
        writeln!(s, "structure: FAIL ({e})").ok();
    } else if body.passes {
        writeln!(s, "invariance: PASS (tolerance {:e})", body.tolerance).ok();
    } else {
        writeln!(s, "invariance: FAIL").ok();
        for v in &body.violations {
            match v {
                InvarianceViolation::FrequencyMismatch { cluster, i, j, difference } => {
                    writeln!(s, "  cluster {cluster}: frequencies of nodes {i} and {j} differ by {difference:e}").ok();
                }
                InvarianceViolation::RowSumMismatch { cluster, other, i, j, difference } => {
                    writeln!(s, "  cluster {cluster} -> {other}: row sums of nodes {i} and {j} differ by {difference:e}").ok();
                }
            }
        }
    }
    w.json("validation.json", cfg, Command::Validate, &body)?;
    Ok((body.passes, s))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.6}"))
}

fn certificate_summary(cert: &StabilityCertificate) -> String {
    let mut s = String::new();
    writeln!(s, "s0 = {:.6}, quadrature = {}", cert.s0, cert.quadrature_points).ok();
    for c in &cert.clusters {
        writeln!(
            s,
            "cluster {}: robustness {} -> {} (J Hurwitz: {}, J_bar Hurwitz: {})",
            c.cluster,
            fmt_opt(c.robustness_uncontrolled),
            fmt_opt(c.robustness_controlled),
            c.hurwitz_j,
            c.hurwitz_j_bar
        )
        .ok();
    }
    match &cert.m_matrix {
        Some(v) => writeln!(s, "S is an M-matrix: {} (leading minors {:?})", v.is_m_matrix, v.leading_minors).ok(),
        None => writeln!(s, "S not formed: some averaged block is not Hurwitz").ok(),
    };
    if let Some(e) = &cert.guideline.eps_star_estimate {
        writeln!(s, "empirical eps* = {}", e.eps_star).ok();
    }
    writeln!(s, "theorem conditions satisfied: {}", cert.theorem1_satisfied).ok();
    s
}

fn run_certify(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, String)> {
    let exp = cfg.build()?;
    let mut cert = certify(&exp.network, &exp.partition, &exp.schedule, &cfg.certify_options())?;
    let mut note = String::new();
    if cfg.analysis.estimate_eps_star {
        match estimate_eps_star(&exp.network, &exp.partition, &exp.schedule, &cfg.analysis.eps_grid, &cfg.eps_search()) {
            Ok(e) => cert.guideline.eps_star_estimate = Some(e),
            Err(e) if e.is_negative_verdict() => note = format!("eps* search: {e}\n"),
            Err(e) => return Err(Error::at("eps-star")(e)),
        }
    }
    w.json("certificate.json", cfg, Command::Certify, &cert)?;
    Ok((cert.theorem1_satisfied, certificate_summary(&cert) + &note))
}

/// Evenly strided row indices, always keeping the last one.
fn plot_rows(len: usize) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let stride = len.div_ceil(PLOT_ROWS).max(1);
    let mut rows: Vec<usize> = (0..len).step_by(stride).collect();
    if *rows.last().expect("nonempty") != len - 1 {
        if rows.len() == PLOT_ROWS {
            rows.pop();
        }
        rows.push(len - 1);
    }
    rows
}

fn csv_line(values: impl IntoIterator<Item = f64>) -> String {
    let mut s = values.into_iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct SimulationBody<'a> {
    controlled: bool,
    epsilon: f64,
    dt: f64,
    horizon: f64,
    schedule_digest: &'a str,
    verdict: &'a SyncVerdict,
}

fn initial_state(cfg: &ExperimentConfig, part: &crate::network::ClusterPartition) -> Vec<f64> {
    match &cfg.simulation.initial {
        InitialCondition::Perturbed { magnitude } => default_initial(part, cfg.simulation.seed, *magnitude),
        InitialCondition::Explicit { theta } => theta.clone(),
    }
}

/// Runs the configured simulation; the step is capped to resolve the dither.
pub fn simulate_config(cfg: &ExperimentConfig, controlled: bool) -> Result<(Trajectory, SyncVerdict, VibrationSchedule)> {
    let exp = cfg.build()?;
    let sched = if controlled {
        exp.schedule.clone()
    } else {
        VibrationSchedule::new(exp.schedule.epsilon())?
    };
    let sim = &cfg.simulation;
    let dt = admissible_dt(&sched, sim.dt);
    let every = ((sim.sample_interval / dt).round() as usize).max(1);
    let theta0 = initial_state(cfg, &exp.partition);
    let traj = simulate_full(&exp.network, &exp.partition, &sched, &theta0, &StepConfig::new(sim.horizon, dt).recording_every(every))?;
    let v = verdict(&traj, &exp.partition, sim.tol_sync)?;
    Ok((traj, v, sched))
}

fn run_simulate(cfg: &ExperimentConfig, controlled: bool, w: &mut Writer) -> Result<(bool, String)> {
    let exp = cfg.build()?;
    let (traj, v, sched) = simulate_config(cfg, controlled)?;
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    w.add("trajectory.csv", csv);

    let rows = plot_rows(traj.len());
    let errors = cluster_errors(&traj, &exp.partition);
    let mut plot = String::from("t");
    for k in 0..exp.partition.len() {
        write!(plot, ",e_{}", k + 1).ok();
    }
    plot.push('\n');
    for &i in &rows {
        plot += &csv_line(std::iter::once(traj.times()[i]).chain(errors[i].iter().copied()));
    }
    w.add("plotdata_errors.csv", plot.into_bytes());

    let pairs: Vec<(usize, usize)> = exp
        .partition
        .clusters()
        .iter()
        .flat_map(|c| c[1..].iter().map(move |&i| (c[0], i)))
        .collect();
    let mut plot = String::from("t");
    for (a, b) in &pairs {
        write!(plot, ",d_{}_{}", b + 1, a + 1).ok();
    }
    plot.push('\n');
    for &i in &rows {
        let th = traj.state(i);
        let diffs = pairs.iter().map(|&(a, b)| crate::reduction::wrap_phase(th[b] - th[a]));
        plot += &csv_line(std::iter::once(traj.times()[i]).chain(diffs));
    }
    w.add("plotdata_phases.csv", plot.into_bytes());

    let body = SimulationBody {
        controlled,
        epsilon: sched.epsilon(),
        dt: traj.dt,
        horizon: cfg.simulation.horizon,
        schedule_digest: &traj.schedule_digest,
        verdict: &v,
    };
    w.json("verdict.json", cfg, Command::Simulate, &body)?;
    let mut s = String::new();
    writeln!(
        s,
        "{} run, eps = {}, dt = {}, horizon = {}",
        if controlled { "controlled" } else { "uncontrolled" },
        sched.epsilon(),
        traj.dt,
        cfg.simulation.horizon
    )
    .ok();
    let terminal: Vec<String> = v.terminal_errors.iter().map(|e| format!("{e:.3e}")).collect();
    writeln!(s, "terminal cluster errors: [{}]", terminal.join(", ")).ok();
    writeln!(
        s,
        "converged: {} (tail max {:.3e}, tol {:e})",
        v.converged, v.tail_max_error, v.tol_sync
    )
    .ok();
    Ok((v.converged, s))
}

#[derive(Serialize)]
struct DesignBody<'a> {
    design: &'a DesignResult,
    certificate: &'a StabilityCertificate,
}

/// Target clusters from the config, defaulting to every cluster with three
/// or more nodes.
pub fn design_targets(cfg: &ExperimentConfig) -> Vec<usize> {
    if cfg.analysis.targets.is_empty() {
        (0..cfg.partition.len()).filter(|&k| cfg.partition[k].len() >= 3).collect()
    } else {
        cfg.analysis.targets.clone()
    }
}

fn run_design(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, String)> {
    let exp = cfg.build()?;
    let targets = design_targets(cfg);
    let a = &cfg.analysis;
    let d = amplitude_scan(
        &exp.network,
        &exp.partition,
        &targets,
        &a.u_grid,
        a.s0,
        exp.schedule.epsilon(),
        a.quadrature_points,
    )?;
    let cert = certify(&exp.network, &exp.partition, &d.schedule, &cfg.certify_options())?;
    let mut plot = String::from("u");
    for k in &targets {
        write!(plot, ",robustness_{}", k + 1).ok();
    }
    plot.push('\n');
    for p in d.trace.iter().take(PLOT_ROWS) {
        plot += &csv_line(std::iter::once(p.u).chain(p.robustness.iter().map(|r| r.unwrap_or(f64::NAN))));
    }
    w.add("plotdata_design.csv", plot.into_bytes());
    let mut sched = serde_json::to_vec_pretty(&d.schedule)?;
    sched.push(b'\n');
    w.add("schedule.json", sched);
    w.json("design.json", cfg, Command::Design, &DesignBody { design: &d, certificate: &cert })?;
    let mut s = String::new();
    writeln!(s, "targets: {targets:?}, selected u = {}", d.selected_u).ok();
    for &k in &targets {
        writeln!(
            s,
            "cluster {k}: robustness {} -> {}",
            fmt_opt(d.robustness_before[k]),
            fmt_opt(d.robustness_after[k])
        )
        .ok();
    }
    writeln!(s, "improved: {}", d.improved).ok();
    s += &certificate_summary(&cert);
    Ok((d.improved, s))
}

#[derive(Serialize)]
struct SweepBody<'a> {
    studies: &'a [SweepEntry],
}

#[derive(Serialize)]
struct SweepEntry {
    study: String,
    #[serde(flatten)]
    result: OrderStudy,
}

fn run_sweep(cfg: &ExperimentConfig, w: &mut Writer) -> Result<(bool, String)> {
    let exp = cfg.build()?;
    let a = &cfg.analysis;
    let mut jobs = Vec::new();
    let (j, p, x0) = synthetic_benchmark();
    jobs.push(("synthetic".to_string(), j, p, x0));
    let red = build_reduction(&exp.network, &exp.partition)?;
    let r = compute_r(&red)?;
    let blocks = LinearizedBlocks::assemble(&red, &r, &exp.schedule)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.simulation.seed);
    for (k, (j, p)) in blocks.j_blocks.into_iter().zip(blocks.p_hat_blocks).enumerate() {
        if p.iter().all(|v| *v == 0.0) {
            continue;
        }
        let x0 = DVector::from_fn(j.nrows(), |_, _| rng.gen_range(-0.1..0.1));
        jobs.push((format!("cluster_{}", k + 1), j, p, x0));
    }
    let entries = jobs
        .into_par_iter()
        .map(|(name, j, p, x0)| {
            let study = order_study(&j, &p, &x0, a.sweep_eps0, a.sweep_halvings, a.sweep_horizon, a.s0)?;
            Ok(SweepEntry { study: name, result: study })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut plot = String::from("study,epsilon,deviation\n");
    let mut s = String::new();
    for e in &entries {
        writeln!(s, "{}: order {:.3}", e.study, e.result.observed_order).ok();
        for row in &e.result.rows {
            writeln!(plot, "{},{:.16e},{:.16e}", e.study, row.epsilon, row.deviation).ok();
            writeln!(s, "  eps = {:<10} deviation = {:.6e}", row.epsilon, row.deviation).ok();
        }
        let ratios: Vec<String> = e.result.ratios.iter().map(|r| format!("{r:.3}")).collect();
        writeln!(s, "  ratios: [{}]", ratios.join(", ")).ok();
    }
    w.add("plotdata_sweep.csv", plot.into_bytes());
    w.json("sweep.json", cfg, Command::Sweep, &SweepBody { studies: &entries })?;
    Ok((true, s))
}
