//! Least-squares moment matching for linear SISO systems.
//!
//! A reduced model `(F, G, H)` driven by the generator `(S, L)` has moments
//! `H P`, where `F P + G L = P S`; the full system has moments `C Pi`, where
//! `A Pi + B L = Pi S`. Reduction minimises the weighted mismatch
//! `J = |(C Pi - H P) T|^2` in the canonical coordinates `T` of the generator.

use log::warn;

use crate::error::{Condition, Error, Result};
use crate::generator::{
    build_canonical_T, check_conditioned_invariant, check_invariant_under, CanonicalForm,
    SignalGenerator,
};
use crate::linalg::{
    self, disjointness_tolerance, eigenvalues, left_eigen_span, min_distance, pole_place_siso,
    solve_sylvester, to_complex, CMat, Mat, Row, Vector, C64, RANK_RTOL,
};

/// Single-input single-output state-space system `x' = A x + B u, y = C x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: Mat,
    pub b: Vector,
    pub c: Row,
}

impl StateSpace {
    pub fn new(a: Mat, b: Vector, c: Row) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.len() != n || c.len() != n {
            return Err(Error::Dimension(format!(
                "A {}x{}, B {}, C {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        linalg::check_finite(&a, "A")?;
        if !b.iter().chain(c.iter()).all(|x| x.is_finite()) {
            return Err(Error::NonFinite("B or C"));
        }
        Ok(StateSpace { a, b, c })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Transfer function `C (sI - A)^{-1} B`.
    pub fn transfer(&self, s: C64) -> Result<C64> {
        let x = self.resolvent_solve(
            s,
            &to_complex(&Mat::from_column_slice(self.n(), 1, self.b.as_slice())),
        )?;
        Ok(self.c.iter().zip(x.iter()).map(|(c, z)| z * *c).sum())
    }

    fn resolvent_solve(&self, s: C64, rhs: &CMat) -> Result<CMat> {
        let n = self.n();
        let mut m = to_complex(&self.a) * C64::new(-1.0, 0.0);
        for i in 0..n {
            m[(i, i)] += s;
        }
        let lu = m.lu();
        lu.solve(rhs).ok_or(Error::PointInSpectrum(s))
    }
}

/// Moments `eta_k(s) = C (sI - A)^{-(k+1)} B`, listed chain by chain in the
/// column order of the canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub chains: Vec<(C64, usize)>,
    pub values: Vec<C64>,
}

/// Moments from repeated resolvent solves.
pub fn moments_closed_form(sys: &StateSpace, chains: &[(C64, usize)]) -> Result<MomentSet> {
    let sigma = eigenvalues(&sys.a)?;
    let points: Vec<C64> = chains.iter().map(|c| c.0).collect();
    let tol = disjointness_tolerance(&sigma, &points);
    let mut values = Vec::new();
    for &(p, k) in chains {
        if min_distance(&sigma, &[p]) <= tol {
            return Err(Error::PointInSpectrum(p));
        }
        let mut x = to_complex(&Mat::from_column_slice(sys.n(), 1, sys.b.as_slice()));
        for _ in 0..=k {
            x = sys.resolvent_solve(p, &x)?;
            values.push(sys.c.iter().zip(x.iter()).map(|(c, z)| z * *c).sum());
        }
    }
    Ok(MomentSet {
        chains: chains.to_vec(),
        values,
    })
}

/// Moments read off `C Pi T`: column `q` of a chain holds `(-1)^q eta_q`.
pub fn moments_from_pi(c_pi: &Row, form: &CanonicalForm) -> MomentSet {
    let v = to_complex(&Mat::from_row_slice(1, c_pi.len(), c_pi.as_slice())) * &form.t;
    let mut values = Vec::with_capacity(v.len());
    let mut col = 0;
    for &(_, k) in &form.chains {
        for q in 0..=k {
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            values.push(v[(0, col)] * sign);
            col += 1;
        }
    }
    MomentSet {
        chains: form.chains.clone(),
        values,
    }
}

/// `Pi` with `A Pi + B L = Pi S`.
pub fn solve_pi(sys: &StateSpace, generator: &SignalGenerator) -> Result<Mat> {
    solve_sylvester(&sys.a, &sys.b, &generator.l, &generator.s)
}

/// Moment mismatch `|(C Pi - H P) T|^2`.
pub fn index_from_parts(c_pi: &Row, h: &Row, p: &Mat, form: &CanonicalForm) -> f64 {
    let v = c_pi - h * p;
    let x = to_complex(&Mat::from_row_slice(1, v.len(), v.as_slice())) * &form.t;
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Matching index `J` of a reduced model against the full system.
#[allow(non_snake_case)]
pub fn index_J(sys: &StateSpace, generator: &SignalGenerator, model: &ReducedModel) -> Result<f64> {
    let form = build_canonical_T(generator)?;
    let c_pi = &sys.c * solve_pi(sys, generator)?;
    let p = model_moment_map(model, generator)?;
    Ok(index_from_parts(&c_pi, &model.h, &p, &form))
}

/// `P` with `F P + G L = P S` for the model's own dynamics.
pub fn model_moment_map(model: &ReducedModel, generator: &SignalGenerator) -> Result<Mat> {
    solve_sylvester(&model.f, &model.g, &generator.l, &generator.s)
}

/// Free parameters of the reduced-model family.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionParams {
    pub p: Mat,
    pub delta: Vector,
    pub q: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub f: Mat,
    pub g: Vector,
    pub h: Row,
    pub p: Mat,
    pub delta: Option<Vector>,
    pub q: Option<Mat>,
    /// Set when `sigma(F)` meets `sigma(S)`; the model is still returned.
    pub spectrum_clash: bool,
}

impl ReducedModel {
    pub fn r(&self) -> usize {
        self.f.nrows()
    }

    pub fn as_state_space(&self) -> StateSpace {
        StateSpace {
            a: self.f.clone(),
            b: self.g.clone(),
            c: self.h.clone(),
        }
    }
}

/// Weighted right inverse `Q = W P^T (P W P^T)^{-1}` with `W = Re(T T^*)`.
#[allow(non_snake_case)]
pub fn derive_Q(p: &Mat, form: &CanonicalForm) -> Result<Mat> {
    let r = p.nrows();
    let found = linalg::rank(p, RANK_RTOL);
    if found < r {
        return Err(Error::RankDeficient { expected: r, found });
    }
    let w = form.gram();
    let wpt = &w * p.transpose();
    let inv = (p * &wpt).try_inverse().ok_or(Error::RankDeficient {
        expected: r,
        found: r - 1,
    })?;
    Ok(wpt * inv)
}

/// Pass/fail state of each admissibility condition.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub checks: Vec<(Condition, bool)>,
}

impl AdmissibilityReport {
    pub fn violations(&self) -> Vec<Condition> {
        self.checks.iter().filter(|c| !c.1).map(|c| c.0).collect()
    }

    pub fn admissible(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

/// Evaluate every admissibility condition of a parameter set.
pub fn check_admissibility(
    generator: &SignalGenerator,
    params: &ReductionParams,
) -> Result<AdmissibilityReport> {
    let (s, l) = (&generator.s, &generator.l);
    let (p, q, delta) = (&params.p, &params.q, &params.delta);
    let r = p.nrows();
    if p.ncols() != s.nrows() || q.shape() != (s.nrows(), r) || delta.len() != s.nrows() {
        return Err(Error::Dimension(format!(
            "P {}x{}, Q {}x{}, Delta {}",
            p.nrows(),
            p.ncols(),
            q.nrows(),
            q.ncols(),
            delta.len()
        )));
    }
    let full_rank = linalg::rank(p, RANK_RTOL) == r;
    let mut checks = vec![(Condition::FullRank, full_rank)];
    if !full_rank {
        checks.push((Condition::ConditionedInvariant, false));
        checks.push((Condition::RightInverse, false));
        checks.push((Condition::DeltaInvariant, false));
    } else {
        checks.push((
            Condition::ConditionedInvariant,
            check_conditioned_invariant(p, s, l)?,
        ));
        let form = build_canonical_T(generator)?;
        let q_ref = derive_Q(p, &form)?;
        let q_ok = (q - &q_ref).norm() <= 1e-8 * q_ref.norm().max(1.0)
            && (p * q - Mat::identity(r, r)).norm() <= 1e-9 * (r as f64).max(1.0);
        checks.push((Condition::RightInverse, q_ok));
        let m = s - delta * l;
        checks.push((Condition::DeltaInvariant, check_invariant_under(p, &m)?));
    }
    let f = p * (s - delta * l) * q;
    let (ef, es) = (eigenvalues(&f)?, eigenvalues(s)?);
    let disjoint = min_distance(&ef, &es) > disjointness_tolerance(&ef, &es);
    checks.push((Condition::SpectraDisjoint, disjoint));
    Ok(AdmissibilityReport { checks })
}

/// Member of the reduced-model family
/// `F = P (S - Delta L) Q`, `G = P Delta`, `H = C Pi Q`.
pub fn assemble_family(
    sys: &StateSpace,
    generator: &SignalGenerator,
    params: &ReductionParams,
) -> Result<ReducedModel> {
    let report = check_admissibility(generator, params)?;
    if !report.admissible() {
        return Err(Error::NotAdmissible(report.violations()));
    }
    let (p, q, delta) = (&params.p, &params.q, &params.delta);
    let pi = solve_pi(sys, generator)?;
    let f = p * (&generator.s - delta * &generator.l) * q;
    let g = p * delta;
    let h = &sys.c * pi * q;
    Ok(ReducedModel {
        f,
        g,
        h,
        p: p.clone(),
        delta: Some(delta.clone()),
        q: Some(q.clone()),
        spectrum_clash: false,
    })
}

/// Least-squares optimal model for a fixed `P`: `(F, G)` solve
/// `F P + G L = P S` and `H = C Pi W P^T (P W P^T)^{-1}`.
pub fn solve_relaxed(
    sys: &StateSpace,
    generator: &SignalGenerator,
    p: &Mat,
) -> Result<ReducedModel> {
    let (s, l) = (&generator.s, &generator.l);
    let (r, nu) = p.shape();
    if nu != s.nrows() {
        return Err(Error::Dimension(format!(
            "P has {nu} columns, S is {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let found = linalg::rank(p, RANK_RTOL);
    if found < r {
        return Err(Error::RankDeficient { expected: r, found });
    }
    let mut k = Mat::zeros(r + 1, nu);
    k.view_mut((0, 0), (r, nu)).copy_from(p);
    k.set_row(r, l);
    let ps = p * s;
    // [F G] K = P S, solved in the least-squares sense through K^T.
    let x = linalg::lstsq(&k.transpose(), &ps.transpose(), 1e-13).transpose();
    let residual = (&x * &k - &ps).norm();
    if residual > 1e-9 * (p.norm() * s.norm()).max(1.0) {
        return Err(Error::NotConditionedInvariant { residual });
    }
    let f = x.columns(0, r).into_owned();
    let g = x.column(r).into_owned();
    let form = build_canonical_T(generator)?;
    let q = derive_Q(p, &form)?;
    let h = &sys.c * solve_pi(sys, generator)? * &q;
    let (ef, es) = (eigenvalues(&f)?, eigenvalues(s)?);
    let spectrum_clash = min_distance(&ef, &es) <= disjointness_tolerance(&ef, &es);
    if spectrum_clash {
        warn!("sigma(F) meets sigma(S); the moment map of the model is not unique");
    }
    Ok(ReducedModel {
        f,
        g,
        h,
        p: p.clone(),
        delta: None,
        q: Some(q),
        spectrum_clash,
    })
}

/// A priori bound `|C Pi - H P|_2` on the steady-state rms gain of the error.
pub fn error_bound(
    sys: &StateSpace,
    generator: &SignalGenerator,
    model: &ReducedModel,
) -> Result<f64> {
    let c_pi = &sys.c * solve_pi(sys, generator)?;
    let p = model_moment_map(model, generator)?;
    Ok(linalg::dual_norm_row(&(c_pi - &model.h * p)))
}

/// Reduce by placing `sigma(S - Delta L)` on the `nu` most dominant
/// eigenvalues of `A` and projecting onto the left eigenvectors of the `r`
/// most dominant of them.
pub fn dominant_reduction_pipeline(
    sys: &StateSpace,
    generator: &SignalGenerator,
    r: usize,
) -> Result<ReducedModel> {
    let params = dominant_params(sys, generator, r)?;
    assemble_family(sys, generator, &params)
}

/// Parameters produced by [`dominant_reduction_pipeline`].
pub fn dominant_params(
    sys: &StateSpace,
    generator: &SignalGenerator,
    r: usize,
) -> Result<ReductionParams> {
    let nu = generator.nu();
    let n = sys.n();
    if nu > n || r > nu || r == 0 {
        return Err(Error::Dimension(format!(
            "need 0 < r <= nu <= n, got r={r}, nu={nu}, n={n}"
        )));
    }
    let sigma = eigenvalues(&sys.a)?;
    if nu < n && sigma[nu - 1].im > 0.0 {
        return Err(Error::PairSplit { r: nu });
    }
    let targets = &sigma[..nu];
    let delta = pole_place_siso(&generator.s, &generator.l, targets)?;
    if targets[r - 1].im > 0.0 {
        return Err(Error::PairSplit { r });
    }
    let p = left_eigen_span(&generator.s, &generator.l, &targets[..r])?;
    let form = build_canonical_T(generator)?;
    let q = derive_Q(&p, &form)?;
    Ok(ReductionParams { p, delta, q })
}

/// System `(S - Delta L, Delta, C Pi)` sharing the moments of the full system.
pub fn surrogate_model(
    sys: &StateSpace,
    generator: &SignalGenerator,
    delta: &Vector,
) -> Result<StateSpace> {
    let f = &generator.s - delta * &generator.l;
    let (ef, es) = (eigenvalues(&f)?, eigenvalues(&generator.s)?);
    let tolerance = disjointness_tolerance(&ef, &es);
    let distance = min_distance(&ef, &es);
    if distance <= tolerance {
        return Err(Error::SpectraOverlap {
            distance,
            tolerance,
        });
    }
    let c_pi = &sys.c * solve_pi(sys, generator)?;
    StateSpace::new(f, delta.clone(), c_pi)
}

/// Projected generator `(P S Q, L Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateGenerator {
    pub s: Mat,
    pub l: Row,
}

/// Fails with `RankDeficient` unless `P Q = I`.
pub fn surrogate_generator(
    generator: &SignalGenerator,
    p: &Mat,
    q: &Mat,
) -> Result<SurrogateGenerator> {
    let r = p.nrows();
    let pq = p * q;
    if !pq.is_square() || (&pq - Mat::identity(r, r)).norm() > 1e-9 * (r as f64).max(1.0) {
        return Err(Error::RankDeficient {
            expected: r,
            found: linalg::rank(&pq, RANK_RTOL),
        });
    }
    Ok(SurrogateGenerator {
        s: p * &generator.s * q,
        l: &generator.l * q,
    })
}
