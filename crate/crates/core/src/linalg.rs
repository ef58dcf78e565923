//! Small dense helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

/// Relative singular-value cutoff for pseudoinverses.
pub const PINV_RCOND: f64 = 1e-12;

fn pinv_svd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let s_max = svd.singular_values.max();
    let cutoff = PINV_RCOND * s_max;
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            out += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// `R^-1 Q^T` for a tall matrix with full column rank.
fn pinv_qr(t: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let qr = t.clone().qr();
    let r = qr.r();
    let diag = r.diagonal().map(f64::abs);
    if !(diag.min() > PINV_RCOND * diag.max()) {
        return None;
    }
    r.solve_upper_triangular(&qr.q().transpose())
}

/// Moore-Penrose pseudoinverse. Full-rank inputs go through a Householder
/// QR; otherwise the SVD, zeroing singular values below
/// `PINV_RCOND * sigma_max`. Each candidate is checked against
/// `A A^+ A = A` and the most accurate one is returned.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let penrose = |p: &DMatrix<f64>| max_abs(&(m * p * m - m));
    let tol = 1e-13 * max_abs(m).max(1.0);
    let tall = rows >= cols;
    let orient = |p: DMatrix<f64>| if tall { p } else { p.transpose() };
    let t = if tall { m.clone() } else { m.transpose() };
    let candidates: [&dyn Fn() -> Option<DMatrix<f64>>; 3] = [
        &|| pinv_qr(&t).map(orient),
        &|| Some(orient(pinv_svd(&t))),
        &|| Some(orient(pinv_svd(&t.transpose()).transpose())),
    ];
    let mut best: Option<(f64, DMatrix<f64>)> = None;
    for c in candidates {
        let Some(p) = c() else { continue };
        let e = penrose(&p);
        if e <= tol {
            return p;
        }
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, p));
        }
    }
    best.expect("svd candidate").1
}

/// Entrywise positive part `[M]^+`.
pub fn positive_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Spectral norm (largest singular value).
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = if m.nrows() >= m.ncols() { m.tr_mul(m) } else { m * m.transpose() };
    gram.symmetric_eigenvalues().max().max(0.0).sqrt()
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues sorted by (real, imaginary) part.
///
/// Bounded Schur iteration on `m - sigma I`, `sigma` the mean diagonal
/// entry, then on `m` and the transpose. All NaN if none converges.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if m.is_empty() {
        return Vec::new();
    }
    let n = m.nrows();
    let sigma = m.trace() / n as f64;
    let shifted = m - DMatrix::identity(n, n) * sigma;
    let attempts = [(shifted.clone(), sigma), (m.clone(), 0.0), (shifted.transpose(), sigma)];
    let mut ev: Vec<Complex<f64>> = attempts
        .into_iter()
        .find_map(|(a, shift)| {
            a.try_schur(f64::EPSILON, SCHUR_MAX_ITER)
                .map(|s| s.complex_eigenvalues().iter().map(|z| z + shift).collect())
        })
        .unwrap_or_else(|| vec![Complex::new(f64::NAN, f64::NAN); n]);
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m)
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn is_strictly_lower_triangular(m: &DMatrix<f64>, tol: f64) -> bool {
    let (rows, cols) = m.shape();
    (0..rows).all(|i| (i..cols).all(|j| m[(i, j)].abs() <= tol))
}

/// `exp(t * N)` for nilpotent `N`, by its terminating power series.
pub fn nilpotent_exp(n: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let dim = n.nrows();
    let mut out = DMatrix::identity(dim, dim);
    let mut term = DMatrix::identity(dim, dim);
    for k in 1..dim.max(1) {
        term = &term * n * (t / k as f64);
        if term.iter().all(|v| *v == 0.0) {
            break;
        }
        out += &term;
    }
    out
}

/// Row-major nested vectors, for serialization.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    DMatrix::from_fn(r, c, |i, j| rows[i][j])
}

pub fn dvec(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}
