//! Transition matrices of the auxiliary system `dPhi/ds = P_hat sin(s) Phi`
//! and the partially averaged blocks `J_bar = mean_s Phi^-1 J Phi`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, is_strictly_lower_triangular, max_abs, nilpotent_exp};
use crate::vibration::TOL_TRIANGULAR;

pub const DEFAULT_S0: f64 = FRAC_PI_2;
pub const DEFAULT_QUADRATURE: usize = 4096;
/// RK4 steps per period for the numerical transition matrix.
pub const NUMERICAL_STEPS_PER_PERIOD: usize = 2048;
/// Spectra of `J_bar` at different `s0` must agree this closely.
pub const TOL_SPECTRUM: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMethod {
    ClosedForm,
    Numerical,
}

/// Per-cluster `Phi^(k)(s, s0)`.
#[derive(Clone, Debug)]
pub struct TransitionMatrix {
    generators: Vec<DMatrix<f64>>,
    nilpotent: Vec<bool>,
    s0: f64,
    method: TransitionMethod,
}

pub fn transition_matrix(p_hat_blocks: &[DMatrix<f64>], s0: f64, method: TransitionMethod) -> Result<TransitionMatrix> {
    for p in p_hat_blocks {
        if !p.is_square() {
            return Err(Error::Dimension {
                what: "P_hat block",
                expected: p.nrows(),
                got: p.ncols(),
            });
        }
    }
    if !s0.is_finite() {
        return Err(Error::InvalidArgument(format!("s0 = {s0}")));
    }
    Ok(TransitionMatrix {
        nilpotent: p_hat_blocks
            .iter()
            .map(|p| is_strictly_lower_triangular(p, TOL_TRIANGULAR))
            .collect(),
        generators: p_hat_blocks.to_vec(),
        s0,
        method,
    })
}

fn rk4_transition(p: &DMatrix<f64>, from: f64, to: f64, start: DMatrix<f64>) -> DMatrix<f64> {
    let span = to - from;
    let steps = ((span.abs() / (2.0 * PI)) * NUMERICAL_STEPS_PER_PERIOD as f64).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut phi = start;
    for i in 0..steps {
        let s = from + i as f64 * h;
        let k1 = p * &phi * s.sin();
        let k2 = p * (&phi + &k1 * (0.5 * h)) * (s + 0.5 * h).sin();
        let k3 = p * (&phi + &k2 * (0.5 * h)) * (s + 0.5 * h).sin();
        let k4 = p * (&phi + &k3 * h) * (s + h).sin();
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    phi
}

impl TransitionMatrix {
    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn method(&self) -> TransitionMethod {
        self.method
    }

    pub fn cluster_count(&self) -> usize {
        self.generators.len()
    }

    pub fn generator(&self, k: usize) -> &DMatrix<f64> {
        &self.generators[k]
    }

    /// Whether block `k` has a strictly lower-triangular generator.
    pub fn is_nilpotent(&self, k: usize) -> bool {
        self.nilpotent[k]
    }

    fn closed_form(&self, k: usize, c: f64) -> DMatrix<f64> {
        let p = &self.generators[k];
        if self.nilpotent[k] {
            nilpotent_exp(p, c)
        } else {
            (p * c).exp()
        }
    }

    /// `Phi^(k)(s, s1)`.
    pub fn between(&self, k: usize, s: f64, s1: f64) -> DMatrix<f64> {
        match self.method {
            TransitionMethod::ClosedForm => self.closed_form(k, -(s.cos() - s1.cos())),
            TransitionMethod::Numerical => {
                let d = self.generators[k].nrows();
                rk4_transition(&self.generators[k], s1, s, DMatrix::identity(d, d))
            }
        }
    }

    /// `Phi^(k)(s, s0)`.
    pub fn eval(&self, k: usize, s: f64) -> DMatrix<f64> {
        self.between(k, s, self.s0)
    }

    pub fn eval_inverse(&self, k: usize, s: f64) -> Result<DMatrix<f64>> {
        match self.method {
            TransitionMethod::ClosedForm => Ok(self.closed_form(k, s.cos() - self.s0.cos())),
            TransitionMethod::Numerical => self.eval(k, s).try_inverse().ok_or(Error::SingularTransition { s }),
        }
    }

    /// `Phi^(k)(s0 + 2 pi, s0)`.
    pub fn monodromy(&self, k: usize) -> DMatrix<f64> {
        self.eval(k, self.s0 + 2.0 * PI)
    }

    /// `(Phi, Phi^-1)` at `s_i = s0 + 2 pi i / points`, `i = 0..points`.
    pub fn samples(&self, k: usize, points: usize) -> Result<Vec<(DMatrix<f64>, DMatrix<f64>)>> {
        let h = 2.0 * PI / points as f64;
        let d = self.generators[k].nrows();
        let mut out = Vec::with_capacity(points);
        let mut phi = DMatrix::identity(d, d);
        for i in 0..points {
            let s = self.s0 + i as f64 * h;
            match self.method {
                TransitionMethod::ClosedForm => out.push((self.eval(k, s), self.eval_inverse(k, s)?)),
                TransitionMethod::Numerical => {
                    if i > 0 {
                        phi = rk4_transition(&self.generators[k], s - h, s, phi);
                    }
                    let inv = phi.clone().try_inverse().ok_or(Error::SingularTransition { s })?;
                    out.push((phi.clone(), inv));
                }
            }
        }
        Ok(out)
    }
}

/// Composite trapezoid average of `Phi^-1 J Phi` over one period, per block.
pub fn averaged_j(j_blocks: &[DMatrix<f64>], phi: &TransitionMatrix, quadrature_points: usize) -> Result<Vec<DMatrix<f64>>> {
    if j_blocks.len() != phi.cluster_count() {
        return Err(Error::Dimension {
            what: "J blocks",
            expected: phi.cluster_count(),
            got: j_blocks.len(),
        });
    }
    if quadrature_points == 0 {
        return Err(Error::InvalidArgument("quadrature_points must be positive".into()));
    }
    j_blocks
        .iter()
        .enumerate()
        .map(|(k, j)| {
            if j.shape() != phi.generator(k).shape() {
                return Err(Error::Dimension {
                    what: "J block",
                    expected: phi.generator(k).nrows(),
                    got: j.nrows(),
                });
            }
            if max_abs(phi.generator(k)) == 0.0 {
                return Ok(j.clone());
            }
            let mut acc = DMatrix::zeros(j.nrows(), j.ncols());
            for (f, finv) in phi.samples(k, quadrature_points)? {
                acc += finv * j * f;
            }
            Ok(acc / quadrature_points as f64)
        })
        .collect()
}

/// `[re, im]` pairs for serialization.
pub fn spectrum(m: &DMatrix<f64>) -> Vec<[f64; 2]> {
    eigenvalues(m).iter().map(|z| [z.re, z.im]).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumAtS0 {
    pub s0: f64,
    /// Per cluster, sorted by real then imaginary part.
    pub spectra: Vec<Vec<[f64; 2]>>,
    /// `lambda_max^-1(X_bar_k)` under this `s0`; `None` when not Hurwitz.
    pub robustness: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumInvarianceReport {
    pub samples: Vec<SpectrumAtS0>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passes: bool,
}

fn spectral_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    // greedy nearest matching; blocks are small
    let mut used = vec![false; b.len()];
    let mut worst = 0.0_f64;
    for za in a {
        let (idx, d) = b
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, zb)| (i, (za - zb).norm()))
            .fold((usize::MAX, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        if idx != usize::MAX {
            used[idx] = true;
        }
        worst = worst.max(d);
    }
    worst
}

/// Recomputes `J_bar` at each `s0` and compares spectra against the first.
pub fn eigenvalue_invariance_check(
    j_blocks: &[DMatrix<f64>],
    p_hat_blocks: &[DMatrix<f64>],
    s0_samples: &[f64],
    quadrature_points: usize,
) -> Result<SpectrumInvarianceReport> {
    let mut samples = Vec::new();
    let mut reference: Option<Vec<Vec<Complex<f64>>>> = None;
    let mut max_deviation = 0.0_f64;
    for &s0 in s0_samples {
        let phi = transition_matrix(p_hat_blocks, s0, TransitionMethod::ClosedForm)?;
        let jbar = averaged_j(j_blocks, &phi, quadrature_points)?;
        let eig: Vec<Vec<Complex<f64>>> = jbar.iter().map(eigenvalues).collect();
        if let Some(r) = &reference {
            for (a, b) in r.iter().zip(&eig) {
                max_deviation = max_deviation.max(spectral_distance(a, b));
            }
        } else {
            reference = Some(eig.clone());
        }
        let robustness = jbar
            .iter()
            .map(|m| {
                crate::certify::is_hurwitz(m)
                    .then(|| crate::certify::solve_lyapunov(m).and_then(|x| crate::certify::robustness(&x)).ok())
                    .flatten()
            })
            .collect();
        samples.push(SpectrumAtS0 {
            s0,
            spectra: jbar.iter().map(spectrum).collect(),
            robustness,
        });
    }
    Ok(SpectrumInvarianceReport {
        samples,
        max_deviation,
        tolerance: TOL_SPECTRUM,
        passes: max_deviation <= TOL_SPECTRUM,
    })
}

/// One row of an averaging-order study.
#[derive(Clone, Debug, Serialize)]
pub struct OrderRow {
    pub epsilon: f64,
    /// Sup-norm gap between the periodic system and the averaged prediction.
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderStudy {
    pub s0: f64,
    pub horizon: f64,
    pub rows: Vec<OrderRow>,
    /// `deviation(eps) / deviation(eps / 2)` for consecutive rows.
    pub ratios: Vec<f64>,
    /// `log2` of the mean ratio.
    pub observed_order: f64,
}

/// Compares `x' = (J + P_hat sin(t/eps) / eps) x` against the averaged
/// prediction `Phi(t/eps, s0) exp(J_bar t) Phi(0, s0)^-1 x0` for
/// `eps0, eps0/2, ..., eps0/2^halvings`.
pub fn order_study(
    j: &DMatrix<f64>,
    p_hat: &DMatrix<f64>,
    x0: &DVector<f64>,
    eps0: f64,
    halvings: usize,
    horizon: f64,
    s0: f64,
) -> Result<OrderStudy> {
    if !(eps0 > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidArgument("eps0 and horizon must be positive".into()));
    }
    if j.shape() != p_hat.shape() || j.nrows() != x0.len() {
        return Err(Error::Dimension {
            what: "order study",
            expected: j.nrows(),
            got: x0.len(),
        });
    }
    let phi = transition_matrix(std::slice::from_ref(p_hat), s0, TransitionMethod::ClosedForm)?;
    let jbar = averaged_j(std::slice::from_ref(j), &phi, DEFAULT_QUADRATURE)?.remove(0);
    let z0 = phi.eval_inverse(0, 0.0)? * x0;
    let eps_list: Vec<f64> = (0..=halvings).map(|i| eps0 / 2f64.powi(i as i32)).collect();
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let per_period = 400.0;
            let steps = (horizon / (2.0 * PI * eps) * per_period).ceil() as usize;
            let h = horizon / steps as f64;
            let rhs = |t: f64, x: &DVector<f64>| (j + p_hat * ((t / eps).sin() / eps)) * x;
            let mut x = x0.clone();
            let mut dev = 0.0_f64;
            for i in 0..steps {
                let t = i as f64 * h;
                let k1 = rhs(t, &x);
                let k2 = rhs(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
                let k3 = rhs(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
                let k4 = rhs(t + h, &(&x + &k3 * h));
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                let tn = (i + 1) as f64 * h;
                let pred = phi.eval(0, tn / eps) * (&jbar * tn).exp() * &z0;
                dev = dev.max((&x - pred).amax());
            }
            if !dev.is_finite() {
                return Err(Error::NonFinite { time: horizon });
            }
            Ok(OrderRow { epsilon: eps, deviation: dev })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.windows(2).map(|w| w[0].deviation / w[1].deviation).collect();
    let observed_order = if ratios.is_empty() {
        f64::NAN
    } else {
        (ratios.iter().sum::<f64>() / ratios.len() as f64).log2()
    };
    Ok(OrderStudy {
        s0,
        horizon,
        rows,
        ratios,
        observed_order,
    })
}

/// The 2-D benchmark used for the order study: `J = [[-1, 4], [0, -2]]`,
/// `P_hat = [[0, 0], [1, 0]]`, `x0 = (0.1, -0.1)`.
pub fn synthetic_benchmark() -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    (
        DMatrix::from_row_slice(2, 2, &[-1.0, 4.0, 0.0, -2.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
        DVector::from_column_slice(&[0.1, -0.1]),
    )
}
