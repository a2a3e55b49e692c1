use std::cmp::Ordering;

use nalgebra::linalg::Schur;
use nalgebra::SVD;

use super::{spectral_scale, to_complex, CMat, Mat, Spectrum, C64};
use crate::error::{Error, Result};

/// Column vectors spanning an eigenspace.
type Basis = Vec<Vec<C64>>;

/// Dominance order: descending real part, then ascending `|Im|`, with the
/// positive-imaginary member of a conjugate pair first.
pub fn dominance_cmp(a: &C64, b: &C64) -> Ordering {
    b.re.total_cmp(&a.re)
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(b.im.total_cmp(&a.im))
}

pub fn sort_dominant(values: &mut [C64]) {
    values.sort_by(dominance_cmp);
}

/// Eigenvalues of a real square matrix in dominance order.
///
/// Conjugate pairs are exact conjugates since they come from the 2x2 blocks of
/// the real Schur form.
pub fn eigenvalues(m: &Mat) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues of {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    super::check_finite(m, "matrix")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 2000 * n.max(10))
        .ok_or(Error::ConvergenceFailure)?;
    let mut v: Vec<C64> = schur.complex_eigenvalues().iter().cloned().collect();
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    sort_dominant(&mut v);
    Ok(v)
}

/// Eigenvalues with right eigenvectors (columns) and left eigenvectors (rows),
/// so that `m * right.column(i) = values[i] * right.column(i)` and
/// `left.row(i) * m = values[i] * left.row(i)`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<C64>,
    pub right: CMat,
    pub left: CMat,
}

impl EigenDecomposition {
    /// Groups numerically coincident eigenvalues.
    pub fn spectrum(&self) -> Spectrum {
        let tol = 1e-8 * spectral_scale(&self.values);
        let clusters = cluster(&self.values, tol);
        Spectrum {
            values: clusters.iter().map(|c| c.center).collect(),
            multiplicities: clusters.iter().map(|c| c.members.len()).collect(),
        }
    }
}

struct Cluster {
    center: C64,
    members: Vec<usize>,
}

fn cluster(values: &[C64], tol: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        match out.iter_mut().find(|c| (c.center - v).norm() <= tol) {
            Some(c) => {
                c.members.push(i);
                let k = c.members.len() as f64;
                c.center = c.center + (v - c.center) / k;
            }
            None => out.push(Cluster {
                center: *v,
                members: vec![i],
            }),
        }
    }
    out
}

fn shifted(m: &Mat, lambda: C64) -> CMat {
    let mut z = to_complex(m);
    for i in 0..m.nrows() {
        z[(i, i)] -= lambda;
    }
    z
}

/// Rotate a vector so that its largest entry is real and positive.
fn normalize_phase(v: &mut [C64]) {
    let (mut best, mut mag) = (0, -1.0);
    for (i, z) in v.iter().enumerate() {
        if z.norm() > mag {
            mag = z.norm();
            best = i;
        }
    }
    if mag > 0.0 {
        let rot = v[best].conj() / mag;
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

/// The `k` smallest right and left singular directions of `m - lambda I`,
/// i.e. approximate right eigenvectors (columns) and left eigenvectors (rows).
///
/// Left vectors come from the right singular vectors of the adjoint: the left
/// factor of the complex SVD can miss the null direction by far more than
/// round-off even when the singular values are accurate.
fn null_vectors(m: &Mat, lambda: C64, k: usize) -> (Vec<Vec<C64>>, Vec<Vec<C64>>, Vec<f64>) {
    let n = m.nrows();
    let z = shifted(m, lambda);
    let svd = SVD::new(z.adjoint(), false, true);
    let vt_adj = svd.v_t.expect("right singular vectors requested");
    let sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    let vt = SVD::new(z, false, true)
        .v_t
        .expect("right singular vectors requested");
    let mut right = Vec::with_capacity(k);
    let mut left = Vec::with_capacity(k);
    for j in (n - k)..n {
        right.push(vt.row(j).iter().map(|z| z.conj()).collect());
        left.push(vt_adj.row(j).iter().cloned().collect());
    }
    (right, left, sv)
}

/// Eigen-decomposition of a real square matrix.
///
/// Eigenvalues come from the real Schur form. Eigenvectors are the singular
/// vectors of `m - lambda I` for the smallest singular values, which makes them
/// exact eigenvectors of a backward-stable perturbation of `m` even when the
/// eigenvalue problem is badly conditioned.
pub fn eigen_decompose(m: &Mat) -> Result<EigenDecomposition> {
    let values = eigenvalues(m)?;
    let n = values.len();
    let mut right = CMat::zeros(n, n);
    let mut left = CMat::zeros(n, n);
    let tol = 1e-8 * spectral_scale(&values);
    let clusters = cluster(&values, tol);
    // Each finished cluster: its value with right and left eigenvector bases.
    let mut done: Vec<(C64, Basis, Basis)> = Vec::new();

    for c in &clusters {
        let k = c.members.len();
        let conj_of = done.iter().find(|(z, r, _)| {
            c.center.im < 0.0 && (z.conj() - c.center).norm() <= tol && r.len() == k
        });
        let (mut rv, mut lv) = match conj_of {
            Some((_, r, l)) => (
                r.iter()
                    .map(|v| v.iter().map(|z| z.conj()).collect())
                    .collect(),
                l.iter()
                    .map(|v| v.iter().map(|z| z.conj()).collect())
                    .collect(),
            ),
            None => {
                let (r, l, _) = null_vectors(m, c.center, k);
                (r, l)
            }
        };
        if k == 1 {
            normalize_phase(&mut rv[0]);
            normalize_phase(&mut lv[0]);
            if c.center.im == 0.0 {
                for v in rv.iter_mut().chain(lv.iter_mut()) {
                    let nrm = v.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
                    for z in v.iter_mut() {
                        *z = C64::new(z.re / nrm, 0.0);
                    }
                }
            }
        }
        for (slot, &idx) in c.members.iter().enumerate() {
            for i in 0..n {
                right[(i, idx)] = rv[slot][i];
                left[(idx, i)] = lv[slot][i];
            }
        }
        done.push((c.center, rv, lv));
    }
    Ok(EigenDecomposition {
        values,
        right,
        left,
    })
}

/// Whether every eigenvalue of `s` has geometric multiplicity one.
pub fn is_non_derogatory(s: &Mat) -> Result<bool> {
    let values = eigenvalues(s)?;
    let n = values.len();
    let scale = spectral_scale(&values);
    let rtol = 1e-8 * s.norm().max(1.0);
    for c in cluster(&values, 1e-6 * scale) {
        if c.members.len() < 2 {
            continue;
        }
        let sv = shifted(s, c.center).svd(false, false).singular_values;
        let rank = sv.iter().filter(|&&x| x > rtol).count();
        if n - rank > 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Real basis of the left eigenspace of the `r` most dominant eigenvalues of `m`.
///
/// Returns `(P, F)` with `P m = F P`. A real eigenvalue contributes one row and
/// a `1x1` block; a pair `a ± ib` contributes two rows and the block
/// `[[a, b], [-b, a]]`.
pub fn real_left_eigenbasis(m: &Mat, r: usize) -> Result<(Mat, Mat)> {
    let values = eigenvalues(m)?;
    let n = values.len();
    if r > n {
        return Err(Error::Dimension(format!("r = {r} exceeds dimension {n}")));
    }
    if r > 0 && r < n && values[r - 1].im > 0.0 {
        return Err(Error::PairSplit { r });
    }
    let tol = 1e-8 * spectral_scale(&values);
    for (i, v) in values[..r].iter().enumerate() {
        if values
            .iter()
            .enumerate()
            .any(|(j, w)| j != i && (v - w).norm() <= tol)
        {
            return Err(Error::DegenerateEigenvalue(*v));
        }
    }
    real_left_eigenbasis_at(m, &values[..r])
}

/// As [`real_left_eigenbasis`], but at caller-supplied eigenvalues of `m`
/// (conjugate pairs adjacent, positive imaginary part first).
///
/// Supplying exactly known eigenvalues, for instance the targets of a pole
/// placement, keeps `sigma(F)` exact even when the eigenvalues of `m` are too
/// ill-conditioned to be recomputed accurately.
pub fn real_left_eigenbasis_at(m: &Mat, values: &[C64]) -> Result<(Mat, Mat)> {
    let n = m.nrows();
    let r = values.len();
    let mut p = Mat::zeros(r, n);
    let mut f = Mat::zeros(r, r);
    let scale = spectral_scale(values).max(m.norm());
    let mut i = 0;
    while i < r {
        let lambda = values[i];
        let (_, mut lv, sv) = null_vectors(m, lambda, 1);
        if n > 1 && sv[n - 2] <= 1e-12 * scale * n as f64 {
            return Err(Error::DegenerateEigenvalue(lambda));
        }
        let w = &mut lv[0];
        if lambda.im.abs() <= 1e-14 * scale {
            normalize_phase(w);
            let nrm = w.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
            for j in 0..n {
                p[(i, j)] = w[j].re / nrm;
            }
            f[(i, i)] = lambda.re;
            i += 1;
            continue;
        }
        if lambda.im < 0.0 || i + 1 >= r || (values[i + 1] - lambda.conj()).norm() > 1e-12 * scale {
            return Err(Error::PairSplit { r: i + 1 });
        }
        // Rotate the phase so that the real and imaginary parts are orthogonal.
        let xx: f64 = w.iter().map(|z| z.re * z.re).sum();
        let yy: f64 = w.iter().map(|z| z.im * z.im).sum();
        let xy: f64 = w.iter().map(|z| z.re * z.im).sum();
        let theta = 0.5 * (-2.0 * xy).atan2(xx - yy);
        let rot = C64::from_polar(std::f64::consts::SQRT_2 / (xx + yy).sqrt(), theta);
        for j in 0..n {
            let z = w[j] * rot;
            p[(i, j)] = z.re;
            p[(i + 1, j)] = -z.im;
        }
        let (a, b) = (lambda.re, lambda.im);
        f[(i, i)] = a;
        f[(i, i + 1)] = b;
        f[(i + 1, i)] = -b;
        f[(i + 1, i + 1)] = a;
        i += 2;
    }
    let resid = (&p * m - &f * &p).norm();
    if resid > 1e-6 * m.norm().max(1.0) * p.norm().max(1.0) {
        return Err(Error::Invalid(format!(
            "supplied values are not eigenvalues (residual {resid:.3e})"
        )));
    }
    Ok((p, f))
}
