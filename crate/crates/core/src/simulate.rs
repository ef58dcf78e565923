//! Fixed-step RK4 integration of the controlled Kuramoto model and of its
//! compact phase-difference form, plus synchronization diagnostics.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{ClusterPartition, OscillatorNetwork};
use crate::reduction::{lift_error, CompactDynamics};
use crate::vibration::VibrationSchedule;

/// Default synchronization tolerance (rad).
pub const TOL_SYNC: f64 = 1e-2;

/// Fraction of the horizon used as tail window.
pub const TAIL_FRACTION: f64 = 0.2;

/// Minimum number of steps per dither period unit `eps`.
pub const STEPS_PER_EPS: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepConfig {
    pub horizon: f64,
    pub dt: f64,
    /// Keep every `record_every`-th state.
    pub record_every: usize,
}

impl StepConfig {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Self {
            horizon,
            dt,
            record_every: 1,
        }
    }

    pub fn recording_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    fn steps(&self) -> Result<(usize, f64)> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon {} invalid", self.horizon)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt {} invalid", self.dt)));
        }
        let steps = (self.horizon / self.dt - 1e-9).ceil().max(0.0) as usize;
        let h = if steps == 0 { 0.0 } else { self.horizon / steps as f64 };
        Ok((steps, h))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Full,
    Reduced { x_dim: usize, y_dim: usize },
}

/// Recorded states on a uniform time grid, stored row-major.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub kind: ModelKind,
    pub dt: f64,
    pub schedule_digest: String,
    dim: usize,
    times: Vec<f64>,
    data: Vec<f64>,
}

impl Trajectory {
    fn new(kind: ModelKind, dim: usize, dt: f64, schedule_digest: String) -> Self {
        Self {
            kind,
            dt,
            schedule_digest,
            dim,
            times: Vec::new(),
            data: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, state: &[f64]) {
        self.times.push(t);
        self.data.extend_from_slice(state);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.data.chunks(self.dim))
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        match self.kind {
            ModelKind::Full => h.extend((1..=self.dim).map(|i| format!("theta_{i}"))),
            ModelKind::Reduced { x_dim, y_dim } => {
                h.extend((1..=x_dim).map(|i| format!("x_{i}")));
                h.extend((1..=y_dim).map(|i| format!("y_{i}")));
            }
        }
        h
    }

    /// CSV with a header row and 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header().join(","))?;
        for (t, row) in self.rows() {
            write!(w, "{t:.16e}")?;
            for v in row {
                write!(w, ",{v:.16e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn rk4<F>(state: &mut DVector<f64>, t: f64, h: f64, f: &mut F) -> Result<()>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, state)?;
    let k2 = f(t + 0.5 * h, &(&*state + &k1 * (0.5 * h)))?;
    let k3 = f(t + 0.5 * h, &(&*state + &k2 * (0.5 * h)))?;
    let k4 = f(t + h, &(&*state + &k3 * h))?;
    *state += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    Ok(())
}

fn integrate<F>(
    mut traj: Trajectory,
    x0: DVector<f64>,
    cfg: &StepConfig,
    mut f: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let (steps, h) = cfg.steps()?;
    traj.dt = h;
    let mut x = x0;
    traj.push(0.0, x.as_slice());
    for k in 0..steps {
        let t = k as f64 * h;
        rk4(&mut x, t, h, &mut f)?;
        let t_next = (k + 1) as f64 * h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: t_next });
        }
        if (k + 1) % cfg.record_every == 0 || k + 1 == steps {
            traj.push(t_next, x.as_slice());
        }
    }
    Ok(traj)
}

fn check_step(sched: &VibrationSchedule, dt: f64) -> Result<()> {
    if sched.is_zero() {
        return Ok(());
    }
    let cap = sched.epsilon() / STEPS_PER_EPS;
    if dt > cap * (1.0 + 1e-12) {
        return Err(Error::StepTooLarge { dt, cap });
    }
    Ok(())
}

/// Largest admissible step for a schedule, capped at `dt`.
pub fn admissible_dt(sched: &VibrationSchedule, dt: f64) -> f64 {
    if sched.is_zero() {
        dt
    } else {
        dt.min(sched.epsilon() / STEPS_PER_EPS)
    }
}

/// Integrates the controlled model from `theta0`.
pub fn simulate_full(
    net: &OscillatorNetwork,
    part: &ClusterPartition,
    sched: &VibrationSchedule,
    theta0: &[f64],
    cfg: &StepConfig,
) -> Result<Trajectory> {
    let n = net.len();
    if theta0.len() != n {
        return Err(Error::Dimension {
            what: "theta0",
            expected: n,
            got: theta0.len(),
        });
    }
    sched.validate(net, part)?;
    check_step(sched, cfg.dt)?;
    // (i, j, a_ij, u_ij, u_ji)
    let edges: Vec<(usize, usize, f64, f64, f64)> = net
        .edges()
        .iter()
        .map(|e| {
            (
                e.tail,
                e.head,
                e.weight,
                sched.amplitude(e.tail, e.head),
                sched.amplitude(e.head, e.tail),
            )
        })
        .collect();
    let omega = net.frequencies().clone();
    let eps = sched.epsilon();
    let traj = Trajectory::new(ModelKind::Full, n, cfg.dt, sched.digest());
    integrate(traj, DVector::from_column_slice(theta0), cfg, |t, th| {
        let dither = (t / eps).sin() / eps;
        let mut d = omega.clone();
        for &(i, j, a, uij, uji) in &edges {
            let s = (th[j] - th[i]).sin();
            d[i] += (a + uij * dither) * s;
            d[j] -= (a + uji * dither) * s;
        }
        Ok(d)
    })
}

/// Integrates the compact `(x, y)` dynamics. States are stored as `[x, y]`.
pub fn simulate_reduced(
    dynamics: &CompactDynamics,
    sched: &VibrationSchedule,
    dither: (&DVector<f64>, &DVector<f64>),
    x0: &[f64],
    y0: &[f64],
    cfg: &StepConfig,
) -> Result<Trajectory> {
    let (nx, ny) = (dynamics.x_dim(), dynamics.y_dim());
    if x0.len() != nx || y0.len() != ny {
        return Err(Error::Dimension {
            what: "(x0, y0)",
            expected: nx + ny,
            got: x0.len() + y0.len(),
        });
    }
    check_step(sched, cfg.dt)?;
    let mut amp = DVector::zeros(dither.0.len() + dither.1.len());
    amp.rows_mut(0, dither.0.len()).copy_from(dither.0);
    amp.rows_mut(dither.0.len(), dither.1.len()).copy_from(dither.1);
    let eps = sched.epsilon();
    let controlled = amp.iter().any(|v| *v != 0.0);
    let mut z0 = x0.to_vec();
    z0.extend_from_slice(y0);
    let traj = Trajectory::new(ModelKind::Reduced { x_dim: nx, y_dim: ny }, nx + ny, cfg.dt, sched.digest());
    integrate(traj, DVector::from_vec(z0), cfg, |t, z| {
        let x = z.rows(0, nx).into_owned();
        let y = z.rows(nx, ny).into_owned();
        let mut dx = dynamics.f_intra(&x)? + dynamics.f_inter(&x, &y)?;
        let mut dy = dynamics.g(&x, &y)?;
        if controlled {
            let sample = &amp * (t / eps).sin();
            dx += dynamics.f_ctr(&sample, &x)? / eps;
            dy += dynamics.g_ctr(&sample, &x)? / eps;
        }
        let mut out = DVector::zeros(nx + ny);
        out.rows_mut(0, nx).copy_from(&dx);
        out.rows_mut(nx, ny).copy_from(&dy);
        Ok(out)
    })
}

/// On-manifold cluster phases in `[-pi, pi)` plus a uniform intra
/// perturbation in `[-perturbation, perturbation]`, seeded.
pub fn default_initial(part: &ClusterPartition, seed: u64, perturbation: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut theta = vec![0.0; part.node_count()];
    for c in part.clusters() {
        let psi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        for &i in c {
            theta[i] = psi;
        }
    }
    for th in theta.iter_mut() {
        *th += rng.gen_range(-perturbation..=perturbation);
    }
    theta
}

/// Per-cluster synchronization error over time, `[time][cluster]`.
pub fn cluster_errors(traj: &Trajectory, part: &ClusterPartition) -> Vec<Vec<f64>> {
    traj.rows().map(|(_, th)| lift_error(th, part)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyncVerdict {
    pub terminal_errors: Vec<f64>,
    pub converged: bool,
    pub tol_sync: f64,
    pub tail_start: f64,
    pub tail_max_error: f64,
    /// Least-squares slope of the max cluster error over the tail window.
    pub tail_slope: f64,
}

/// Convergence verdict for a full-model trajectory.
pub fn verdict(traj: &Trajectory, part: &ClusterPartition, tol_sync: f64) -> Result<SyncVerdict> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    if traj.kind != ModelKind::Full || traj.dim() != part.node_count() {
        return Err(Error::InvalidArgument("verdict needs a full-model trajectory".into()));
    }
    let t_end = *traj.times().last().expect("nonempty");
    let tail_start = t_end - TAIL_FRACTION * t_end;
    let mut tail = Vec::new();
    for (t, th) in traj.rows() {
        if t >= tail_start - 1e-12 {
            let e = lift_error(th, part).into_iter().fold(0.0_f64, f64::max);
            tail.push((t, e));
        }
    }
    let tail_max_error = tail.iter().map(|p| p.1).fold(0.0_f64, f64::max);
    let m = tail.len() as f64;
    let (st, se) = tail.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, me) = (st / m, se / m);
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, e) in &tail {
        num += (t - mt) * (e - me);
        den += (t - mt) * (t - mt);
    }
    let tail_slope = if den > 0.0 { num / den } else { 0.0 };
    Ok(SyncVerdict {
        terminal_errors: lift_error(traj.last(), part),
        converged: tail_max_error < tol_sync,
        tol_sync,
        tail_start,
        tail_max_error,
        tail_slope,
    })
}
