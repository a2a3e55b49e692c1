//! Dense linear algebra kernels used throughout the crate.
//!
//! All matrices are `nalgebra` dynamic matrices. Complex arithmetic is used
//! internally wherever eigen-structure is involved; results that are real by
//! construction are returned as real matrices.

mod eigen;
mod place;
mod sylvester;

pub use eigen::{
    dominance_cmp, eigen_decompose, eigenvalues, is_non_derogatory, real_left_eigenbasis,
    real_left_eigenbasis_at, sort_dominant, EigenDecomposition,
};
pub use place::{
    is_controllable, is_observable, left_eigen_span, observability_matrix, pole_place_siso,
    pole_place_with, PlacementMethod,
};
pub use sylvester::{
    solve_sylvester, solve_sylvester_general, sylvester_kronecker, sylvester_schur,
    sylvester_schur_left,
};

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type Vector = DVector<f64>;
pub type Row = RowDVector<f64>;

/// Multiset of eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<C64>,
    pub multiplicities: Vec<usize>,
}

impl Spectrum {
    /// Every value with multiplicity one.
    pub fn simple(values: Vec<C64>) -> Self {
        let multiplicities = vec![1; values.len()];
        Spectrum {
            values,
            multiplicities,
        }
    }

    /// Values repeated according to multiplicity.
    pub fn expanded(&self) -> Vec<C64> {
        self.values
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(v, &m)| std::iter::repeat(*v).take(m))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        is_conjugate_closed(&self.expanded(), tol)
    }
}

/// Scale used by spectral tolerances: `1 + max |lambda|`.
pub fn spectral_scale(values: &[C64]) -> f64 {
    1.0 + values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Tolerance for spectral disjointness tests.
pub fn disjointness_tolerance(a: &[C64], b: &[C64]) -> f64 {
    1e-8 * spectral_scale(a).max(spectral_scale(b))
}

/// Smallest pairwise distance between two eigenvalue lists.
pub fn min_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut d = f64::INFINITY;
    for x in a {
        for y in b {
            d = d.min((x - y).norm());
        }
    }
    d
}

/// Whether the multiset is closed under complex conjugation, matching values
/// greedily within `tol`.
pub fn is_conjugate_closed(values: &[C64], tol: f64) -> bool {
    let mut used = vec![false; values.len()];
    for i in 0..values.len() {
        if used[i] {
            continue;
        }
        if values[i].im.abs() <= tol {
            used[i] = true;
            continue;
        }
        let c = values[i].conj();
        let best = (0..values.len())
            .filter(|&j| j != i && !used[j])
            .map(|j| (j, (values[j] - c).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((j, d)) if d <= tol => {
                used[i] = true;
                used[j] = true;
            }
            _ => return false,
        }
    }
    true
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> Mat {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMat) -> Mat {
    m.map(|z| z.im)
}

pub fn check_finite(m: &Mat, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Dual of the Euclidean norm on row vectors, which is again Euclidean.
pub fn dual_norm_row(v: &Row) -> f64 {
    v.norm()
}

/// Default relative tolerance for numerical rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

/// Numerical rank, treating singular values below `rtol * sigma_max` as zero.
pub fn rank(m: &Mat, rtol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * smax).count()
}

/// Full orthogonal factor and decreasing `|R_ii|` of a column-pivoted QR of
/// `m^T`, padded to square. The leading columns span the row space of `m`.
///
/// Preferred over the SVD here: the singular vectors returned for clustered
/// singular values can be inaccurate, while Householder QR is backward stable.
pub fn row_space_qr(m: &Mat) -> (Mat, Vec<f64>) {
    let (rows, cols) = m.shape();
    let mut padded = Mat::zeros(cols, rows.max(cols));
    padded
        .view_mut((0, 0), (cols, rows))
        .copy_from(&m.transpose());
    let qr = padded.col_piv_qr();
    let r = qr.r();
    let diag = (0..cols).map(|i| r[(i, i)].abs()).collect();
    (qr.q(), diag)
}

/// Least-squares solution of `m x = b` for each column of `b`, by
/// column-pivoted QR. Columns of `m` that are numerically dependent
/// (`|R_ii| <= rtol |R_11|`) get zero coefficients.
pub fn lstsq(m: &Mat, b: &Mat, rtol: f64) -> Mat {
    let n = m.ncols();
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let k = (0..r.nrows().min(n))
        .take_while(|&i| r[(i, i)].abs() > rtol * r[(0, 0)].abs())
        .count();
    let qtb = qr.q().transpose() * b;
    let mut x = Mat::zeros(n, b.ncols());
    if k > 0 {
        let head = r
            .view((0, 0), (k, k))
            .solve_upper_triangular(&qtb.rows(0, k))
            .expect("nonzero pivots");
        x.rows_mut(0, k).copy_from(&head);
    }
    qr.p().inv_permute_rows(&mut x);
    x
}

/// Orthonormal basis (as columns) of the right null space of `m`.
pub fn null_space(m: &Mat, rtol: f64) -> Mat {
    let (rows, cols) = m.shape();
    if rows == 0 || m.iter().all(|&x| x == 0.0) {
        return Mat::identity(cols, cols);
    }
    let (q, diag) = row_space_qr(m);
    let r = diag.iter().filter(|&&d| d > rtol * diag[0]).count();
    q.columns(r, cols - r).into_owned()
}

/// Spectral norm.
pub fn norm2(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Whether `m` is skew-symmetric up to a relative tolerance.
pub fn is_skew_symmetric(m: &Mat, rtol: f64) -> bool {
    m.is_square() && (m + m.transpose()).norm() <= rtol * m.norm().max(1.0)
}

/// Monic polynomial coefficients, highest degree first, from its roots.
pub fn poly_from_roots(roots: &[C64]) -> Vec<C64> {
    let mut c = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c
}
