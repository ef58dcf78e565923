//! Lyapunov robustness, growth bounds on the inter-cluster coupling, the
//! S-matrix test and the assembled stability certificate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::averaging::{averaged_j, spectrum, transition_matrix, TransitionMatrix, TransitionMethod, DEFAULT_QUADRATURE, DEFAULT_S0};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, max_abs, norm2, to_rows};
use crate::network::{build_reduction, validate_invariance, ClusterPartition, IncidenceReduction, OscillatorNetwork};
use crate::reduction::{compute_r, ReductionMatrices};
use crate::simulate::{admissible_dt, default_initial, simulate_full, verdict, StepConfig, TOL_SYNC};
use crate::vibration::{LinearizedBlocks, VibrationSchedule};

/// `J` is Hurwitz when its spectral abscissa is below `-TOL_HURWITZ`.
pub const TOL_HURWITZ: f64 = 1e-9;
/// Relative floor on `min |lambda_i + lambda_j|` for the Lyapunov operator.
pub const TOL_SEPARATION: f64 = 1e-12;
/// Relative inflation of the analytic growth bound over its sampled supremum.
pub const GAMMA_INFLATION: f64 = 1e-6;
pub const DEFAULT_GAMMA_SAMPLES: usize = 10_000;

pub fn is_hurwitz(a: &DMatrix<f64>) -> bool {
    eigenvalues(a).iter().all(|z| z.re < -TOL_HURWITZ)
}

/// Smallest `|lambda_i + lambda_j|` over the spectrum of `a`.
pub fn lyapunov_separation(a: &DMatrix<f64>) -> f64 {
    let ev = eigenvalues(a);
    let mut sep = f64::INFINITY;
    for x in &ev {
        for y in &ev {
            sep = sep.min((x + y).norm());
        }
    }
    sep
}

/// Solves `A^T X + X A = -I` through the vectorized system
/// `(I (x) A^T + A^T (x) I) vec(X) = -vec(I)` with one refinement step.
pub fn solve_lyapunov(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension {
            what: "Lyapunov matrix",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let n = a.nrows();
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    let separation = lyapunov_separation(a);
    if !(separation > TOL_SEPARATION * scale) {
        return Err(Error::LyapunovSingular { separation });
    }
    let at = a.transpose();
    let id = DMatrix::<f64>::identity(n, n);
    let k = id.kronecker(&at) + at.kronecker(&id);
    let rhs = -DVector::from_column_slice(id.as_slice());
    let lu = k.clone().lu();
    let mut v = lu.solve(&rhs).ok_or(Error::LyapunovSingular { separation })?;
    let r = &rhs - &k * &v;
    if let Some(dv) = lu.solve(&r) {
        v += dv;
    }
    let x = DMatrix::from_column_slice(n, n, v.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

pub fn lyapunov_residual(a: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    max_abs(&(a.transpose() * x + x * a + DMatrix::identity(n, n)))
}

/// `lambda_max(X)^-1` for symmetric positive definite `X`.
pub fn robustness(x: &DMatrix<f64>) -> Result<f64> {
    let ev = x.clone().symmetric_eigenvalues();
    let min = ev.min();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    Ok(1.0 / ev.max())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    Analytic,
    Sampled,
}

/// Row block `M_k` of `B_hat_intra^T B_inter W_inter` and the column blocks
/// `R2_l` needed by the growth bounds.
struct GammaFactors {
    m: DMatrix<f64>,
    r2: DMatrix<f64>,
    r3: DMatrix<f64>,
    rows: Vec<(usize, usize)>,
}

impl GammaFactors {
    fn new(red: &IncidenceReduction, r: &ReductionMatrices) -> Self {
        let w = DMatrix::from_diagonal(&red.w_inter());
        let rows = (0..red.cluster_count())
            .map(|k| (red.tree_offset(k), red.clusters()[k].len() - 1))
            .collect();
        Self {
            m: red.bh_intra().transpose() * red.b_inter() * w,
            r2: r.r2.clone(),
            r3: r.r3.clone(),
            rows,
        }
    }

    fn m_block(&self, k: usize) -> DMatrix<f64> {
        let (o, d) = self.rows[k];
        self.m.rows(o, d).into_owned()
    }

    fn r2_block(&self, l: usize) -> DMatrix<f64> {
        let (o, d) = self.rows[l];
        self.r2.columns(o, d).into_owned()
    }

    /// `f_inter^(k)(x, y)` for every `k`, stacked.
    fn f_inter(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        -(&self.m * (&self.r2 * x + &self.r3 * y).map(f64::sin))
    }
}

fn phi_samples(phi: &TransitionMatrix, points: usize) -> Result<Vec<Vec<(DMatrix<f64>, DMatrix<f64>)>>> {
    (0..phi.cluster_count()).map(|k| phi.samples(k, points)).collect()
}

/// Analytic bound
/// `gamma_kl = sup_s ||Phi_k(s)^-1|| ||M_k|| ||R2_l Phi_l(s)||`, inflated by
/// `GAMMA_INFLATION`, valid because `f_inter(0, y) = 0` and sine is
/// 1-Lipschitz.
pub fn gamma_analytic(red: &IncidenceReduction, r: &ReductionMatrices, phi: &TransitionMatrix, points: usize) -> Result<DMatrix<f64>> {
    let rc = red.cluster_count();
    let f = GammaFactors::new(red, r);
    let samples = phi_samples(phi, points)?;
    let m_norm: Vec<f64> = (0..rc).map(|k| norm2(&f.m_block(k))).collect();
    let r2: Vec<DMatrix<f64>> = (0..rc).map(|l| f.r2_block(l)).collect();
    let mut g = DMatrix::zeros(rc, rc);
    for i in 0..points {
        let inv_norm: Vec<f64> = (0..rc).map(|k| norm2(&samples[k][i].1)).collect();
        let out_norm: Vec<f64> = (0..rc).map(|l| norm2(&(&r2[l] * &samples[l][i].0))).collect();
        for k in 0..rc {
            for l in 0..rc {
                let v = inv_norm[k] * m_norm[k] * out_norm[l];
                if v > g[(k, l)] {
                    g[(k, l)] = v;
                }
            }
        }
    }
    Ok(g * (1.0 + GAMMA_INFLATION))
}

/// Monte-Carlo estimate of the tight constants: the largest observed
/// `||Phi_k^-1 f_inter^(k)(Phi z, y)|| / ||z_l||` with `z` supported on
/// block `l`. Clamped to the analytic bound.
pub fn gamma_sampled(
    red: &IncidenceReduction,
    r: &ReductionMatrices,
    phi: &TransitionMatrix,
    analytic: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let rc = red.cluster_count();
    let f = GammaFactors::new(red, r);
    let nx = red.intra_dim();
    let ny = red.inter_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DMatrix::zeros(rc, rc);
    for _ in 0..samples {
        let l = rng.gen_range(0..rc);
        let s = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let scale = 10f64.powf(rng.gen_range(-3.0..0.5));
        let (o, d) = f.rows[l];
        let mut z = DVector::zeros(nx);
        for i in 0..d {
            z[o + i] = rng.gen_range(-1.0..1.0) * scale;
        }
        let zn = z.norm();
        if zn == 0.0 {
            continue;
        }
        let y = DVector::from_fn(ny, |_, _| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let mut x = DVector::zeros(nx);
        for k in 0..rc {
            let (ok, dk) = f.rows[k];
            let blk = phi.eval(k, s) * z.rows(ok, dk);
            x.rows_mut(ok, dk).copy_from(&blk);
        }
        let fx = f.f_inter(&x, &y);
        for k in 0..rc {
            let (ok, dk) = f.rows[k];
            let v = (phi.eval_inverse(k, s)? * fx.rows(ok, dk)).norm() / zn;
            if v > g[(k, l)] {
                g[(k, l)] = v;
            }
        }
    }
    Ok(g.zip_map(analytic, f64::min))
}

/// `s_kk = rob_k - gamma_kk`, `s_kl = -gamma_kl`.
pub fn build_s(robustness_controlled: &[f64], gamma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = robustness_controlled.len();
    if gamma.shape() != (r, r) {
        return Err(Error::Dimension {
            what: "gamma_bar",
            expected: r,
            got: gamma.nrows(),
        });
    }
    Ok(DMatrix::from_fn(r, r, |k, l| {
        if k == l {
            robustness_controlled[k] - gamma[(k, k)]
        } else {
            -gamma[(k, l)]
        }
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MMatrixVerdict {
    pub is_m_matrix: bool,
    pub z_matrix: bool,
    pub leading_minors: Vec<f64>,
    /// 1-based order of the first non-positive leading minor.
    pub failing_minor: Option<usize>,
    pub spectrum: Vec<[f64; 2]>,
}

/// Leading-principal-minor test for nonsingular M-matrices.
pub fn is_m_matrix(s: &DMatrix<f64>) -> MMatrixVerdict {
    let n = s.nrows();
    let z_matrix = s.is_square() && (0..n).all(|i| (0..n).all(|j| i == j || s[(i, j)] <= 0.0));
    let spectrum = if s.is_square() { spectrum(s) } else { Vec::new() };
    let mut leading_minors = Vec::new();
    let mut failing_minor = None;
    if z_matrix {
        for k in 1..=n {
            let d = s.view((0, 0), (k, k)).into_owned().determinant();
            leading_minors.push(d);
            if failing_minor.is_none() && !(d > 0.0) {
                failing_minor = Some(k);
            }
        }
    }
    MMatrixVerdict {
        is_m_matrix: z_matrix && failing_minor.is_none(),
        z_matrix,
        leading_minors,
        failing_minor,
        spectrum,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifyOptions {
    pub s0: f64,
    pub quadrature_points: usize,
    pub transition: TransitionMethod,
    /// Which growth bound feeds `S`.
    pub gamma_method: GammaMethod,
    pub gamma_samples: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            s0: DEFAULT_S0,
            quadrature_points: DEFAULT_QUADRATURE,
            transition: TransitionMethod::ClosedForm,
            gamma_method: GammaMethod::Analytic,
            gamma_samples: DEFAULT_GAMMA_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterCertificate {
    pub cluster: usize,
    pub j: Vec<Vec<f64>>,
    pub p_hat: Vec<Vec<f64>>,
    pub j_bar: Vec<Vec<f64>>,
    pub spectrum_j: Vec<[f64; 2]>,
    pub spectrum_j_bar: Vec<[f64; 2]>,
    pub hurwitz_j: bool,
    pub hurwitz_j_bar: bool,
    pub x: Option<Vec<Vec<f64>>>,
    pub x_bar: Option<Vec<Vec<f64>>>,
    pub robustness_uncontrolled: Option<f64>,
    pub robustness_controlled: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsStarEstimate {
    pub eps_star: f64,
    /// Smallest grid value above `eps_star` that failed, if any.
    pub next_unstable: Option<f64>,
    pub method: &'static str,
    pub evaluated: Vec<(f64, bool)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct DesignGuideline {
    pub j_bar_hurwitz: bool,
    pub s_is_m_matrix: bool,
    /// The frequency condition is checked empirically by `estimate_eps_star`.
    pub eps_star_estimate: Option<EpsStarEstimate>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityCertificate {
    pub s0: f64,
    pub quadrature_points: usize,
    pub transition_method: TransitionMethod,
    pub schedule_digest: String,
    pub clusters: Vec<ClusterCertificate>,
    pub hurwitz_j_bar: bool,
    pub gamma_analytic: Vec<Vec<f64>>,
    pub gamma_sampled: Vec<Vec<f64>>,
    pub gamma_used: GammaMethod,
    pub s: Option<Vec<Vec<f64>>>,
    pub m_matrix: Option<MMatrixVerdict>,
    pub theorem1_satisfied: bool,
    pub guideline: DesignGuideline,
}

impl StabilityCertificate {
    pub fn robustness_uncontrolled(&self) -> Vec<Option<f64>> {
        self.clusters.iter().map(|c| c.robustness_uncontrolled).collect()
    }

    pub fn robustness_controlled(&self) -> Vec<Option<f64>> {
        self.clusters.iter().map(|c| c.robustness_controlled).collect()
    }
}

fn lyapunov_pair(a: &DMatrix<f64>) -> Result<(Option<DMatrix<f64>>, Option<f64>)> {
    if !is_hurwitz(a) {
        return Ok((None, None));
    }
    let x = solve_lyapunov(a)?;
    let rob = robustness(&x)?;
    Ok((Some(x), Some(rob)))
}

/// Averaged blocks for a schedule on a prepared reduction.
pub fn averaged_blocks(
    red: &IncidenceReduction,
    r: &ReductionMatrices,
    sched: &VibrationSchedule,
    opts: &CertifyOptions,
) -> Result<(LinearizedBlocks, TransitionMatrix, Vec<DMatrix<f64>>)> {
    let blocks = LinearizedBlocks::assemble(red, r, sched).map_err(Error::at("linearize"))?;
    let phi = transition_matrix(&blocks.p_hat_blocks, opts.s0, opts.transition).map_err(Error::at("transition"))?;
    let jbar = averaged_j(&blocks.j_blocks, &phi, opts.quadrature_points).map_err(Error::at("averaging"))?;
    Ok((blocks, phi, jbar))
}

/// Runs the full pipeline from the linearization to the M-matrix test.
pub fn certify(
    net: &OscillatorNetwork,
    part: &ClusterPartition,
    sched: &VibrationSchedule,
    opts: &CertifyOptions,
) -> Result<StabilityCertificate> {
    let report = validate_invariance(net, part).map_err(Error::at("validate"))?;
    if !report.passes() {
        return Err(Error::at("validate")(Error::InvalidNetwork(format!(
            "invariance conditions fail ({} violations)",
            report.violations.len()
        ))));
    }
    sched.validate(net, part).map_err(Error::at("schedule"))?;
    let red = build_reduction(net, part).map_err(Error::at("reduction"))?;
    let r = compute_r(&red).map_err(Error::at("reduction"))?;
    let (blocks, phi, jbar) = averaged_blocks(&red, &r, sched, opts)?;

    let mut clusters = Vec::new();
    for k in 0..red.cluster_count() {
        let j = &blocks.j_blocks[k];
        let (x, rob_u) = lyapunov_pair(j).map_err(Error::at("lyapunov"))?;
        let (xb, rob_c) = lyapunov_pair(&jbar[k]).map_err(Error::at("lyapunov"))?;
        clusters.push(ClusterCertificate {
            cluster: k,
            j: to_rows(j),
            p_hat: to_rows(&blocks.p_hat_blocks[k]),
            j_bar: to_rows(&jbar[k]),
            spectrum_j: spectrum(j),
            spectrum_j_bar: spectrum(&jbar[k]),
            hurwitz_j: is_hurwitz(j),
            hurwitz_j_bar: is_hurwitz(&jbar[k]),
            x: x.as_ref().map(to_rows),
            x_bar: xb.as_ref().map(to_rows),
            robustness_uncontrolled: rob_u,
            robustness_controlled: rob_c,
        });
    }
    let hurwitz_j_bar = clusters.iter().all(|c| c.hurwitz_j_bar);

    let g_a = gamma_analytic(&red, &r, &phi, opts.quadrature_points).map_err(Error::at("gamma"))?;
    let g_s = gamma_sampled(&red, &r, &phi, &g_a, opts.gamma_samples, opts.seed).map_err(Error::at("gamma"))?;
    let gamma = match opts.gamma_method {
        GammaMethod::Analytic => &g_a,
        GammaMethod::Sampled => &g_s,
    };
    let (s, m_matrix) = if hurwitz_j_bar {
        let rob: Vec<f64> = clusters.iter().map(|c| c.robustness_controlled.expect("hurwitz")).collect();
        let s = build_s(&rob, gamma).map_err(Error::at("m-matrix"))?;
        let v = is_m_matrix(&s);
        (Some(to_rows(&s)), Some(v))
    } else {
        (None, None)
    };
    let s_is_m = m_matrix.as_ref().is_some_and(|v| v.is_m_matrix);
    Ok(StabilityCertificate {
        s0: opts.s0,
        quadrature_points: opts.quadrature_points,
        transition_method: opts.transition,
        schedule_digest: sched.digest(),
        clusters,
        hurwitz_j_bar,
        gamma_analytic: to_rows(&g_a),
        gamma_sampled: to_rows(&g_s),
        gamma_used: opts.gamma_method,
        s,
        m_matrix,
        theorem1_satisfied: hurwitz_j_bar && s_is_m,
        guideline: DesignGuideline {
            j_bar_hurwitz: hurwitz_j_bar,
            s_is_m_matrix: s_is_m,
            eps_star_estimate: None,
        },
    })
}

/// Simulation settings for the empirical `eps*` search.
#[derive(Clone, Debug)]
pub struct EpsSearch {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub perturbation: f64,
    pub tol_sync: f64,
    pub record_every: usize,
}

impl Default for EpsSearch {
    fn default() -> Self {
        Self {
            horizon: 200.0,
            dt: 1e-3,
            seed: 0,
            perturbation: 0.1,
            tol_sync: TOL_SYNC,
            record_every: 10,
        }
    }
}

fn converges_at(net: &OscillatorNetwork, part: &ClusterPartition, sched: &VibrationSchedule, eps: f64, search: &EpsSearch) -> Result<bool> {
    let s = sched.with_epsilon(eps)?;
    let theta0 = default_initial(part, search.seed, search.perturbation);
    let cfg = StepConfig::new(search.horizon, admissible_dt(&s, search.dt)).recording_every(search.record_every);
    match simulate_full(net, part, &s, &theta0, &cfg) {
        Ok(traj) => Ok(verdict(&traj, part, search.tol_sync)?.converged),
        Err(Error::NonFinite { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Largest grid value whose simulation converges, by bisection on the
/// sorted grid assuming a single stable-to-unstable transition.
pub fn estimate_eps_star(
    net: &OscillatorNetwork,
    part: &ClusterPartition,
    sched: &VibrationSchedule,
    eps_grid: &[f64],
    search: &EpsSearch,
) -> Result<EpsStarEstimate> {
    let mut grid: Vec<f64> = eps_grid.iter().copied().filter(|e| *e > 0.0 && e.is_finite()).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty epsilon grid".into()));
    }
    let mut evaluated = Vec::new();
    let check = |i: usize, evaluated: &mut Vec<(f64, bool)>| -> Result<bool> {
        let ok = converges_at(net, part, sched, grid[i], search)?;
        evaluated.push((grid[i], ok));
        Ok(ok)
    };
    if !check(0, &mut evaluated)? {
        return Err(Error::NoStableEpsilon);
    }
    let last = grid.len() - 1;
    if last == 0 || check(last, &mut evaluated)? {
        return Ok(EpsStarEstimate {
            eps_star: grid[last],
            next_unstable: None,
            method: "simulation-bisection",
            evaluated,
        });
    }
    let (mut lo, mut hi) = (0, last);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if check(mid, &mut evaluated)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(EpsStarEstimate {
        eps_star: grid[lo],
        next_unstable: Some(grid[hi]),
        method: "simulation-bisection",
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, v.len() / rows, v)
    }

    #[test]
    fn half_identity() {
        let x = solve_lyapunov(&(DMatrix::identity(2, 2) * -0.5)).unwrap();
        assert!(max_abs(&(&x - DMatrix::identity(2, 2))) < 1e-14);
        assert!((robustness(&x).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn example1_pair() {
        let a = m(2, &[-1.0, 4.0, 0.0, -2.0]);
        let x = solve_lyapunov(&a).unwrap();
        let expected = m(2, &[0.5, 2.0 / 3.0, 2.0 / 3.0, 19.0 / 12.0]);
        assert!(max_abs(&(&x - expected)) < 1e-12);
        assert!(lyapunov_residual(&a, &x) < 1e-12);
        let ab = m(2, &[-1.0, 4.0, -2.0, -2.0]);
        let xb = solve_lyapunov(&ab).unwrap();
        assert!(max_abs(&(&xb - m(2, &[0.3, 0.1, 0.1, 0.45]))) < 1e-12);
        assert!((robustness(&xb).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_operator_reported() {
        let a = m(2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(solve_lyapunov(&a), Err(Error::LyapunovSingular { .. })));
    }

    #[test]
    fn robustness_rejects_indefinite() {
        assert!(matches!(robustness(&m(2, &[1.0, 0.0, 0.0, -1.0])), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn s_matrix_examples() {
        let s = build_s(&[1.0, 1.0], &m(2, &[0.0, 2.0, 2.0, 0.0])).unwrap();
        assert_eq!(s, m(2, &[1.0, -2.0, -2.0, 1.0]));
        let v = is_m_matrix(&s);
        assert!(!v.is_m_matrix);
        assert_eq!(v.failing_minor, Some(2));
        assert!((v.leading_minors[1] + 3.0).abs() < 1e-12);

        let g = DMatrix::from_element(3, 3, 1.0);
        let s = build_s(&[5.0, 5.0, 5.0], &g).unwrap();
        let v = is_m_matrix(&s);
        assert!(v.is_m_matrix);
        for (got, want) in v.leading_minors.iter().zip([4.0, 15.0, 50.0]) {
            assert!((got - want).abs() < 1e-9);
        }
        assert!(is_m_matrix(&DMatrix::identity(4, 4)).is_m_matrix);
        assert!(!is_m_matrix(&m(2, &[1.0, 0.5, 0.0, 1.0])).z_matrix);
    }
}
