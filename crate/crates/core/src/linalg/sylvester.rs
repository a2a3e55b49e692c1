use nalgebra::linalg::Schur;

use super::{
    check_finite, disjointness_tolerance, eigenvalues, min_distance, to_complex, CMat, Mat, Row,
    Vector, C64,
};
use crate::error::{Error, Result};

/// Above this many unknowns the Kronecker system is replaced by a Schur solve.
pub const KRONECKER_MAX_UNKNOWNS: usize = 900;

/// Solve `A Pi + B L = Pi S` for `Pi`.
///
/// Fails with `SpectraOverlap` when `sigma(A)` and `sigma(S)` come closer than
/// `1e-8 (1 + max |lambda|)`.
pub fn solve_sylvester(a: &Mat, b: &Vector, l: &Row, s: &Mat) -> Result<Mat> {
    let (n, nu) = (a.nrows(), s.nrows());
    if !a.is_square() || !s.is_square() || b.len() != n || l.len() != nu {
        return Err(Error::Dimension(format!(
            "A {}x{}, B {}, L {}, S {}x{}",
            a.nrows(),
            a.ncols(),
            b.len(),
            l.len(),
            s.nrows(),
            s.ncols()
        )));
    }
    check_finite(a, "A")?;
    check_finite(s, "S")?;
    if !b.iter().chain(l.iter()).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("B or L"));
    }
    let (ea, es) = (eigenvalues(a)?, eigenvalues(s)?);
    let tolerance = disjointness_tolerance(&ea, &es);
    let distance = min_distance(&ea, &es);
    if distance <= tolerance {
        return Err(Error::SpectraOverlap {
            distance,
            tolerance,
        });
    }
    let rhs = -(b * l);
    solve_sylvester_general(a, s, &rhs)
}

/// Solve `A X - X S = R` for `X`, choosing the Kronecker route for small
/// systems and a complex Schur (Bartels–Stewart) route otherwise, with the
/// Schur form taken of the smaller coefficient. One step of iterative
/// refinement is applied if the residual is not at round-off level.
pub fn solve_sylvester_general(a: &Mat, s: &Mat, rhs: &Mat) -> Result<Mat> {
    let solve = |r: &Mat| {
        if a.nrows() * s.nrows() <= KRONECKER_MAX_UNKNOWNS {
            sylvester_kronecker(a, s, r)
        } else if s.nrows() <= a.nrows() {
            sylvester_schur(a, s, r).or_else(|_| sylvester_schur_left(a, s, r))
        } else {
            sylvester_schur_left(a, s, r).or_else(|_| sylvester_schur(a, s, r))
        }
    };
    let mut x = solve(rhs)?;
    let scale = (a.norm() + s.norm()) * x.norm() + rhs.norm();
    let resid = rhs - (a * &x - &x * s);
    if resid.norm() > 1e-13 * scale {
        x += solve(&resid)?;
    }
    check_finite(&x, "Sylvester solution")?;
    Ok(x)
}

/// Kronecker-product solve of `A X - X S = R`.
pub fn sylvester_kronecker(a: &Mat, s: &Mat, rhs: &Mat) -> Result<Mat> {
    let (n, nu) = (a.nrows(), s.nrows());
    let dim = n * nu;
    let mut k = Mat::zeros(dim, dim);
    for j in 0..nu {
        for c in 0..nu {
            let mut block = k.view_mut((j * n, c * n), (n, n));
            if j == c {
                block += a;
            }
            let sij = s[(c, j)];
            if sij != 0.0 {
                for i in 0..n {
                    block[(i, i)] -= sij;
                }
            }
        }
    }
    let v = Vector::from_column_slice(rhs.as_slice());
    let sol = k.lu().solve(&v).ok_or(Error::SpectraOverlap {
        distance: 0.0,
        tolerance: 0.0,
    })?;
    Ok(Mat::from_column_slice(n, nu, sol.as_slice()))
}

/// Bartels–Stewart solve of `A X - X S = R` using the complex Schur form of `S`.
pub fn sylvester_schur(a: &Mat, s: &Mat, rhs: &Mat) -> Result<Mat> {
    let (n, nu) = (a.nrows(), s.nrows());
    let schur = Schur::try_new(to_complex(s), f64::EPSILON, 2000 * nu.max(10))
        .ok_or(Error::ConvergenceFailure)?;
    let (u, t) = schur.unpack();
    let c = to_complex(rhs) * &u;
    let ac = to_complex(a);
    let mut y = CMat::zeros(n, nu);
    for k in 0..nu {
        let mut col = c.column(k).into_owned();
        for j in 0..k {
            let tjk = t[(j, k)];
            if tjk != C64::new(0.0, 0.0) {
                col += y.column(j) * tjk;
            }
        }
        let mut m = ac.clone();
        for i in 0..n {
            m[(i, i)] -= t[(k, k)];
        }
        let yk = m.lu().solve(&col).ok_or(Error::SpectraOverlap {
            distance: 0.0,
            tolerance: 0.0,
        })?;
        y.set_column(k, &yk);
    }
    Ok((y * u.adjoint()).map(|z| z.re))
}

/// Bartels–Stewart solve of `A X - X S = R` using the complex Schur form of `A`.
pub fn sylvester_schur_left(a: &Mat, s: &Mat, rhs: &Mat) -> Result<Mat> {
    let (n, nu) = (a.nrows(), s.nrows());
    let schur = Schur::try_new(to_complex(a), f64::EPSILON, 2000 * n.max(10))
        .ok_or(Error::ConvergenceFailure)?;
    let (u, t) = schur.unpack();
    // T Y - Y S = U^* R with Y = U^* X, solved row by row from the bottom.
    let c = u.adjoint() * to_complex(rhs);
    let st = to_complex(&s.transpose());
    let mut y = CMat::zeros(n, nu);
    for i in (0..n).rev() {
        let mut row = c.row(i).transpose();
        for j in (i + 1)..n {
            let tij = t[(i, j)];
            if tij != C64::new(0.0, 0.0) {
                row -= y.row(j).transpose() * tij;
            }
        }
        // y_i (T_ii I - S) = row  <=>  (T_ii I - S^T) y_i^T = row^T
        let mut m = -st.clone();
        for k in 0..nu {
            m[(k, k)] += t[(i, i)];
        }
        let yi = m.lu().solve(&row).ok_or(Error::SpectraOverlap {
            distance: 0.0,
            tolerance: 0.0,
        })?;
        y.set_row(i, &yi.transpose());
    }
    Ok((u * y).map(|z| z.re))
}
