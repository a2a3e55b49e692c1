use super::{
    eigen_decompose, eigenvalues, is_conjugate_closed, poly_from_roots, spectral_scale, to_complex,
    CMat, CVector, Mat, Row, Vector, C64,
};
use crate::error::{Error, Result};

/// Rows `L, L S, ..., L S^(nu-1)`.
pub fn observability_matrix(s: &Mat, l: &Row) -> Mat {
    let nu = s.nrows();
    let mut o = Mat::zeros(nu, nu);
    let mut row = l.clone();
    for k in 0..nu {
        o.set_row(k, &row);
        row = &row * s;
    }
    o
}

/// Smallest singular value of `[M - lambda I; extra]` relative to the scale of `M`.
fn pbh_margin(m: &Mat, extra: &Mat, lambda: C64, stacked_below: bool) -> f64 {
    let n = m.nrows();
    let mut shifted = to_complex(m);
    for i in 0..n {
        shifted[(i, i)] -= lambda;
    }
    let ex = to_complex(extra);
    let stacked = if stacked_below {
        let mut z = CMat::zeros(n + ex.nrows(), n);
        z.view_mut((0, 0), (n, n)).copy_from(&shifted);
        z.view_mut((n, 0), (ex.nrows(), n)).copy_from(&ex);
        z
    } else {
        let mut z = CMat::zeros(n, n + ex.ncols());
        z.view_mut((0, 0), (n, n)).copy_from(&shifted);
        z.view_mut((0, n), (n, ex.ncols())).copy_from(&ex);
        z
    };
    let sv = stacked.svd(false, false).singular_values;
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Popov–Belevitch–Hautus observability test of `(S, L)`.
///
/// The Krylov observability matrix is far too ill-conditioned for generators
/// whose frequencies span several decades, so rank is tested per eigenvalue.
pub fn is_observable(s: &Mat, l: &Row) -> Result<bool> {
    let values = eigenvalues(s)?;
    let scale = s.norm().max(l.norm()).max(1.0);
    let extra = Mat::from_row_slice(1, l.len(), l.as_slice());
    Ok(values
        .iter()
        .all(|&v| pbh_margin(s, &extra, v, true) > 1e-10 * scale))
}

/// Popov–Belevitch–Hautus controllability test of `(F, G)`.
pub fn is_controllable(f: &Mat, g: &Vector) -> Result<bool> {
    let values = eigenvalues(f)?;
    let scale = f.norm().max(g.norm()).max(1.0);
    let extra = Mat::from_column_slice(g.len(), 1, g.as_slice());
    Ok(values
        .iter()
        .all(|&v| pbh_margin(f, &extra, v, false) > 1e-10 * scale))
}

/// Algorithm used by [`pole_place_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMethod {
    /// Choose `Modal` when `S` has well-separated eigenvalues, else `Ackermann`.
    Auto,
    /// Closed-form gain in the eigenbasis of `S`.
    Modal,
    /// Ackermann's formula `Delta = p(S) O^{-1} e_nu`.
    Ackermann,
}

/// Output-injection gain `Delta` with `sigma(S - Delta L) = targets`.
pub fn pole_place_siso(s: &Mat, l: &Row, targets: &[C64]) -> Result<Vector> {
    pole_place_with(s, l, targets, PlacementMethod::Auto)
}

pub fn pole_place_with(
    s: &Mat,
    l: &Row,
    targets: &[C64],
    method: PlacementMethod,
) -> Result<Vector> {
    let nu = s.nrows();
    if targets.len() != nu || l.len() != nu || !s.is_square() {
        return Err(Error::Dimension(format!(
            "S {}x{}, L {}, {} targets",
            s.nrows(),
            s.ncols(),
            l.len(),
            targets.len()
        )));
    }
    if !is_conjugate_closed(targets, 1e-10 * spectral_scale(targets)) {
        return Err(Error::TargetsNotConjugateClosed);
    }
    if !is_observable(s, l)? {
        return Err(Error::NotObservable);
    }
    match method {
        PlacementMethod::Modal => modal(s, l, targets)?.ok_or_else(|| {
            Error::Invalid("modal placement needs distinct, well-conditioned eigenvalues".into())
        }),
        PlacementMethod::Ackermann => ackermann(s, l, targets),
        PlacementMethod::Auto => match modal(s, l, targets)? {
            Some(d) => Ok(d),
            None => ackermann(s, l, targets),
        },
    }
}

/// In the eigenbasis `S = V D V^{-1}`, with `Lt = L V`, the gain
/// `Dt_i = prod_j (d_i - mu_j) / (Lt_i prod_{k != i} (d_i - d_k))` gives
/// `det(zI - D + Dt Lt) = prod_j (z - mu_j)`.
fn modal(s: &Mat, l: &Row, targets: &[C64]) -> Result<Option<Vector>> {
    let nu = s.nrows();
    let e = eigen_decompose(s)?;
    let d = &e.values;
    let sep = 1e-6 * spectral_scale(d);
    for i in 0..nu {
        for k in (i + 1)..nu {
            if (d[i] - d[k]).norm() <= sep {
                return Ok(None);
            }
        }
    }
    let v = e.right.clone();
    let Some(vinv) = v.clone().try_inverse() else {
        return Ok(None);
    };
    if v.norm() * vinv.norm() > 1e12 {
        return Ok(None);
    }
    let lt = to_complex(&Mat::from_row_slice(1, nu, l.as_slice())) * &v;
    let mut dt = CMat::zeros(nu, 1);
    for i in 0..nu {
        let mut num = lt[(0, i)].inv();
        for j in 0..nu {
            num *= d[i] - targets[j];
            if j != i {
                num /= d[i] - d[j];
            }
        }
        dt[(i, 0)] = num;
    }
    let delta = v * dt;
    Ok(Some(Vector::from_iterator(nu, delta.iter().map(|z| z.re))))
}

fn ackermann(s: &Mat, l: &Row, targets: &[C64]) -> Result<Vector> {
    let nu = s.nrows();
    let coeffs: Vec<f64> = poly_from_roots(targets).iter().map(|z| z.re).collect();
    // Horner evaluation of p(S).
    let mut p = Mat::identity(nu, nu) * coeffs[0];
    for &c in &coeffs[1..] {
        p = &p * s + Mat::identity(nu, nu) * c;
    }
    let o = observability_matrix(s, l);
    let mut e = Vector::zeros(nu);
    e[nu - 1] = 1.0;
    let x = o.lu().solve(&e).ok_or(Error::NotObservable)?;
    Ok(p * x)
}

/// Orthonormal real basis of the left eigenvectors of `S - Delta L` at
/// `values`, for any `Delta` placing those values.
///
/// Such eigenvectors are `L (S - mu I)^{-1}`. Clustered values make them
/// nearly collinear, so the span is built by rational Arnoldi instead: each
/// new direction is the last basis row times `(S - mu_k I)^{-1}`,
/// orthogonalized against the earlier rows. By the resolvent identity this
/// stays inside the span of the eigenvectors. The complex basis is then
/// realified by a pivoted QR of its real and imaginary parts.
pub fn left_eigen_span(s: &Mat, l: &Row, values: &[C64]) -> Result<Mat> {
    let nu = s.nrows();
    let r = values.len();
    if r == 0 || r > nu || l.len() != nu {
        return Err(Error::Dimension(format!("{r} values for nu = {nu}")));
    }
    let scale = spectral_scale(values).max(s.norm());
    if !is_conjugate_closed(values, 1e-10 * scale) {
        return Err(Error::TargetsNotConjugateClosed);
    }
    let st = to_complex(&s.transpose());
    let mut basis: Vec<CVector> = Vec::with_capacity(r);
    let mut z = CVector::from_iterator(nu, l.iter().map(|&x| C64::new(x, 0.0)));
    z /= C64::new(z.norm(), 0.0);
    for &mu in values {
        let mut m = st.clone();
        for i in 0..nu {
            m[(i, i)] -= mu;
        }
        let mut v = m.lu().solve(&z).ok_or(Error::PointInSpectrum(mu))?;
        let before = v.norm();
        if !before.is_finite() || before == 0.0 {
            return Err(Error::PointInSpectrum(mu));
        }
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        let after = v.norm();
        if after <= 1e-12 * before {
            return Err(Error::RankDeficient {
                expected: r,
                found: basis.len(),
            });
        }
        v /= C64::new(after, 0.0);
        basis.push(v.clone());
        z = v;
    }
    let mut rows = Mat::zeros(2 * r, nu);
    for (k, q) in basis.iter().enumerate() {
        for j in 0..nu {
            rows[(2 * k, j)] = q[j].re;
            rows[(2 * k + 1, j)] = q[j].im;
        }
    }
    let (q, diag) = super::row_space_qr(&rows);
    if diag[r - 1] <= 1e-10 * diag[0] {
        return Err(Error::RankDeficient {
            expected: r,
            found: diag.iter().filter(|&&x| x > 1e-10 * diag[0]).count(),
        });
    }
    if diag.len() > r && diag[r] > 1e-8 * diag[0] {
        return Err(Error::PairSplit { r });
    }
    let p = q.columns(0, r).transpose();
    Ok(p)
}
