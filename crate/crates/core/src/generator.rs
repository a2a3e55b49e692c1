//! Signal generators `omega' = S omega, u = L omega` encoding interpolation points.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};
use crate::linalg::{
    self, disjointness_tolerance, eigen_decompose, spectral_scale, to_complex, CMat, Mat, Row,
    Vector, C64, RANK_RTOL,
};

/// Interpolation points with the number of derivatives matched at each.
///
/// Point `s` with order `k` contributes `k + 1` moments. The point set must be
/// closed under conjugation with equal orders on each conjugate pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSpec {
    pub points: Vec<C64>,
    pub orders: Vec<usize>,
}

impl InterpolationSpec {
    pub fn new(points: Vec<C64>, orders: Vec<usize>) -> Result<Self> {
        if points.len() != orders.len() {
            return Err(Error::Dimension(format!(
                "{} points but {} orders",
                points.len(),
                orders.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::Invalid("no interpolation points".into()));
        }
        let spec = InterpolationSpec { points, orders };
        spec.blocks()?;
        Ok(spec)
    }

    /// Order-zero matching at `±i omega_j` for each frequency.
    pub fn imaginary_axis(frequencies: &[f64]) -> Result<Self> {
        let mut points = Vec::with_capacity(2 * frequencies.len());
        for &w in frequencies {
            points.push(C64::new(0.0, w));
            points.push(C64::new(0.0, -w));
        }
        let orders = vec![0; points.len()];
        Self::new(points, orders)
    }

    /// Number of moments, i.e. the generator dimension.
    pub fn nu(&self) -> usize {
        self.orders.iter().map(|k| k + 1).sum()
    }

    /// Real points and upper-half-plane representatives of conjugate pairs,
    /// in input order.
    fn blocks(&self) -> Result<Vec<(C64, usize)>> {
        let scale = spectral_scale(&self.points);
        let tol = 1e-12 * scale;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                if (self.points[i] - self.points[j]).norm() <= tol {
                    return Err(Error::DuplicatePoint(self.points[i]));
                }
            }
        }
        let mut out = Vec::new();
        for (i, &p) in self.points.iter().enumerate() {
            if p.im.abs() <= tol {
                out.push((C64::new(p.re, 0.0), self.orders[i]));
                continue;
            }
            let partner = self
                .points
                .iter()
                .position(|q| (q - p.conj()).norm() <= tol)
                .ok_or(Error::NotConjugateClosed)?;
            if self.orders[partner] != self.orders[i] {
                return Err(Error::NotConjugateClosed);
            }
            if p.im > 0.0 {
                out.push((p, self.orders[i]));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalGenerator {
    pub s: Mat,
    pub l: Row,
    pub omega0: Vector,
    /// Point structure when the generator was built from an interpolation spec.
    pub spec: Option<InterpolationSpec>,
}

impl SignalGenerator {
    /// Wrap raw matrices, checking dimensions and observability.
    pub fn new(s: Mat, l: Row, omega0: Vector) -> Result<Self> {
        let nu = s.nrows();
        if nu == 0 || !s.is_square() || l.len() != nu || omega0.len() != nu {
            return Err(Error::Dimension(format!(
                "S {}x{}, L {}, omega0 {}",
                s.nrows(),
                s.ncols(),
                l.len(),
                omega0.len()
            )));
        }
        linalg::check_finite(&s, "S")?;
        if !linalg::is_observable(&s, &l)? {
            return Err(Error::NotObservable);
        }
        Ok(SignalGenerator {
            s,
            l,
            omega0,
            spec: None,
        })
    }

    pub fn nu(&self) -> usize {
        self.s.nrows()
    }
}

/// Default output map `L = (1/sqrt nu) [1 ... 1]`.
pub fn default_l(nu: usize) -> Row {
    Row::from_element(nu, 1.0 / (nu as f64).sqrt())
}

/// Real block form of the interpolation spec.
///
/// A real point `s` of order `k` gives `s I + N` of size `k + 1`; a pair
/// `a ± ib` gives `[[a, b], [-b, a]]` blocks on the diagonal with `I_2` on the
/// block superdiagonal. `L` defaults to [`default_l`] and `omega0` to `L^T`.
pub fn build_generator(
    spec: &InterpolationSpec,
    l: Option<Row>,
    omega0: Option<Vector>,
) -> Result<SignalGenerator> {
    let blocks = spec.blocks()?;
    let nu = spec.nu();
    let mut s = Mat::zeros(nu, nu);
    let mut at = 0;
    for &(p, k) in &blocks {
        if p.im == 0.0 {
            for i in 0..=k {
                s[(at + i, at + i)] = p.re;
                if i < k {
                    s[(at + i, at + i + 1)] = 1.0;
                }
            }
            at += k + 1;
        } else {
            for i in 0..=k {
                let o = at + 2 * i;
                s[(o, o)] = p.re;
                s[(o, o + 1)] = p.im;
                s[(o + 1, o)] = -p.im;
                s[(o + 1, o + 1)] = p.re;
                if i < k {
                    s[(o, o + 2)] = 1.0;
                    s[(o + 1, o + 3)] = 1.0;
                }
            }
            at += 2 * (k + 1);
        }
    }
    let l = l.unwrap_or_else(|| default_l(nu));
    let omega0 = omega0.unwrap_or_else(|| l.transpose());
    let mut generator = SignalGenerator::new(s, l, omega0)?;
    generator.spec = Some(spec.clone());
    Ok(generator)
}

/// Change of coordinates `T` with `S T = T J` and `L T = Lambda`, where `J` is
/// a complex Jordan matrix with one block per interpolation point and
/// `Lambda` has a one at the head of each chain.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    pub t: CMat,
    pub j: CMat,
    pub lambda: DMatrix<C64>,
    /// Point and order of each Jordan block, in column order.
    pub chains: Vec<(C64, usize)>,
}

impl CanonicalForm {
    /// Hermitian Gram matrix `Re(T T^*)`, the weight of the matching index.
    pub fn gram(&self) -> Mat {
        linalg::real_part(&(&self.t * self.t.adjoint()))
    }
}

fn chains_of(generator: &SignalGenerator) -> Result<Vec<(C64, usize)>> {
    if let Some(spec) = &generator.spec {
        let mut out = Vec::new();
        for (p, k) in spec.blocks()? {
            out.push((p, k));
            if p.im != 0.0 {
                out.push((p.conj(), k));
            }
        }
        return Ok(out);
    }
    let e = eigen_decompose(&generator.s)?;
    let sp = e.spectrum();
    Ok(sp
        .values
        .iter()
        .zip(&sp.multiplicities)
        .map(|(&v, &m)| (v, m - 1))
        .collect())
}

/// Solve the consistent stacked system `[M; L] t = [rhs; c]` by least squares
/// through a Householder QR factorisation.
fn stacked_solve(m: &CMat, l: &CMat, rhs: &CMat, c: C64) -> Result<CMat> {
    let nu = m.nrows();
    let mut k = CMat::zeros(nu + 1, nu);
    k.view_mut((0, 0), (nu, nu)).copy_from(m);
    k.view_mut((nu, 0), (1, nu)).copy_from(l);
    let mut b = CMat::zeros(nu + 1, 1);
    b.view_mut((0, 0), (nu, 1)).copy_from(rhs);
    b[(nu, 0)] = c;
    let scale = k.norm();
    let qr = k.qr();
    let r = qr.r();
    let diag_min = (0..nu)
        .map(|i| r[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    if diag_min <= 1e-13 * scale {
        return Err(Error::NotObservable);
    }
    let qtb = qr.q().adjoint() * b;
    r.solve_upper_triangular(&qtb).ok_or(Error::NotObservable)
}

/// Canonical coordinates of the generator, built chain by chain:
/// `[S - s I; L] t_1 = [0; 1]` and `[S - s I; L] t_k = [t_{k-1}; 0]`.
#[allow(non_snake_case)]
pub fn build_canonical_T(generator: &SignalGenerator) -> Result<CanonicalForm> {
    let nu = generator.nu();
    let chains = chains_of(generator)?;
    let total: usize = chains.iter().map(|c| c.1 + 1).sum();
    if total != nu {
        return Err(Error::Invalid(format!(
            "point orders account for {total} of {nu} generator states"
        )));
    }
    let sc = to_complex(&generator.s);
    let lc = to_complex(&Mat::from_row_slice(1, nu, generator.l.as_slice()));
    let mut t = CMat::zeros(nu, nu);
    let mut j = CMat::zeros(nu, nu);
    let mut lambda = CMat::zeros(1, nu);
    let mut col = 0;
    for (ci, &(p, k)) in chains.iter().enumerate() {
        let conj_prev = ci > 0 && p.im < 0.0 && chains[ci - 1] == (p.conj(), k);
        let mut shifted = sc.clone();
        for i in 0..nu {
            shifted[(i, i)] -= p;
        }
        let mut prev = CMat::zeros(nu, 1);
        for q in 0..=k {
            let tq = if conj_prev {
                t.column(col - (k + 1)).map(|z| z.conj())
            } else {
                let c = if q == 0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                stacked_solve(&shifted, &lc, &prev, c)?
                    .column(0)
                    .into_owned()
            };
            t.set_column(col, &tq);
            j[(col, col)] = p;
            if q > 0 {
                j[(col - 1, col)] = C64::new(1.0, 0.0);
            } else {
                lambda[(0, col)] = C64::new(1.0, 0.0);
            }
            prev = CMat::from_column_slice(nu, 1, tq.as_slice());
            col += 1;
        }
    }
    let form = CanonicalForm {
        t,
        j,
        lambda,
        chains,
    };
    let scale = generator.s.norm().max(1.0) * form.t.norm().max(1.0);
    let r1 = (&sc * &form.t - &form.t * &form.j).norm();
    let r2 = (&lc * &form.t - &form.lambda).norm();
    if r1 > 1e-9 * scale || r2 > 1e-9 * form.t.norm().max(1.0) * generator.l.norm().max(1.0) {
        return Err(Error::Invalid(format!(
            "canonical coordinates inaccurate (residuals {r1:.3e}, {r2:.3e})"
        )));
    }
    Ok(form)
}

/// All sums of `k` eigenvalues of `S` chosen with repetition.
pub fn spectrum_k(sigma_s: &[C64], k: usize) -> Vec<C64> {
    fn rec(s: &[C64], start: usize, left: usize, acc: C64, out: &mut Vec<C64>) {
        if left == 0 {
            out.push(acc);
            return;
        }
        for i in start..s.len() {
            rec(s, i, left - 1, acc + s[i], out);
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(sigma_s, 0, k, C64::new(0.0, 0.0), &mut out);
    }
    out
}

/// First degree `k <= d` at which `sigma(A)` meets `sigma^k(S)`.
pub fn first_resonance(sigma_a: &[C64], sigma_s: &[C64], d: usize) -> Option<usize> {
    (1..=d).find(|&k| {
        let sk = spectrum_k(sigma_s, k);
        let tol = disjointness_tolerance(sigma_a, &sk);
        linalg::min_distance(sigma_a, &sk) <= tol
    })
}

/// Whether `sigma(A)` avoids `sigma^k(S)` for every `k = 1..=d`.
pub fn check_nonresonance(sigma_a: &[C64], sigma_s: &[C64], d: usize) -> bool {
    first_resonance(sigma_a, sigma_s, d).is_none()
}

fn invariance_tolerance(p: &Mat, m: &Mat) -> f64 {
    1e-9 * (p.norm() * m.norm()).max(1.0)
}

/// Whether `S (ker P ∩ ker L) ⊆ ker P`.
pub fn check_conditioned_invariant(p: &Mat, s: &Mat, l: &Row) -> Result<bool> {
    let r = p.nrows();
    let found = linalg::rank(p, RANK_RTOL);
    if found < r {
        return Err(Error::RankDeficient { expected: r, found });
    }
    let mut k = Mat::zeros(r + 1, p.ncols());
    k.view_mut((0, 0), (r, p.ncols())).copy_from(p);
    k.set_row(r, l);
    let n = linalg::null_space(&k, RANK_RTOL);
    if n.ncols() == 0 {
        return Ok(true);
    }
    Ok((p * s * n).norm() <= invariance_tolerance(p, s))
}

/// Whether `M ker P ⊆ ker P`.
pub fn check_invariant_under(p: &Mat, m: &Mat) -> Result<bool> {
    let r = p.nrows();
    let found = linalg::rank(p, RANK_RTOL);
    if found < r {
        return Err(Error::RankDeficient { expected: r, found });
    }
    let n = linalg::null_space(p, RANK_RTOL);
    if n.ncols() == 0 {
        return Ok(true);
    }
    Ok((p * m * n).norm() <= invariance_tolerance(p, m))
}

/// Row vector helper for callers that work with slices.
pub fn row(values: &[f64]) -> Row {
    RowDVector::from_row_slice(values)
}
