//! Power-series solution of the invariance equation
//! `f(pi(omega), L omega) = d pi/d omega * S omega` and nonlinear reduced models.

use crate::error::{Error, Result};
use crate::generator::{first_resonance, SignalGenerator};
use crate::linalg::{eigenvalues, solve_sylvester_general, Mat, Row, Vector};
use crate::linear::{check_admissibility, ReductionParams};
use crate::poly::{MonomialBasis, PolyMap};

/// Polynomial vector field `x' = f(x, u)` with `f(0, 0) = 0`, stored as a map
/// of the `n + 1` variables `(x_1, ..., x_n, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyVectorField {
    pub map: PolyMap,
}

impl PolyVectorField {
    pub fn new(map: PolyMap) -> Result<Self> {
        let n = map.nout();
        if map.nvars() != n + 1 {
            return Err(Error::Dimension(format!(
                "vector field with {n} states must take {} variables, got {}",
                n + 1,
                map.nvars()
            )));
        }
        if map.coeffs.column(0).iter().any(|&c| c != 0.0) {
            return Err(Error::Invalid(
                "vector field must vanish at the origin".into(),
            ));
        }
        Ok(PolyVectorField { map })
    }

    pub fn n(&self) -> usize {
        self.map.nout()
    }

    /// Linearisation `(A, B)` at the origin.
    pub fn linearization(&self) -> (Mat, Vector) {
        let lin = self.map.linear_part();
        let n = self.n();
        (lin.columns(0, n).into_owned(), lin.column(n).into_owned())
    }

    pub fn eval(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let mut z = Vec::with_capacity(x.len() + 1);
        z.extend_from_slice(x);
        z.push(u);
        let v = self.map.eval(&z);
        dx.copy_from_slice(v.as_slice());
    }
}

/// Truncated invariant-manifold map `pi` and output `mu = h o pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub pi: PolyMap,
    pub mu: PolyMap,
}

/// `(pi(omega), L omega)` as a map of `omega`.
fn state_and_input(pi: &PolyMap, l: &Row) -> PolyMap {
    let n = pi.nout();
    let mut z = PolyMap::zeros_on(pi.basis().clone(), n + 1);
    z.coeffs.rows_mut(0, n).copy_from(&pi.coeffs);
    for j in 0..l.len() {
        z.coeffs[(n, 1 + j)] = l[j];
    }
    z
}

/// Solve the invariance equation degree by degree up to `degree`.
///
/// At degree `k` the coefficients solve `A Pi_k - Pi_k M_k = -R_k`, where
/// `M_k` is the Lie derivative along `S omega` on degree-`k` monomials and
/// `R_k` collects the degree-`k` terms of `f(pi_{<k}, L omega)`.
pub fn solve_pde_series(
    field: &PolyVectorField,
    h: &PolyMap,
    generator: &SignalGenerator,
    degree: usize,
) -> Result<PdeSolution> {
    let n = field.n();
    if h.nvars() != n || h.nout() != 1 {
        return Err(Error::Dimension(format!("output map must be R^{n} -> R")));
    }
    let (a, _) = field.linearization();
    let sigma_a = eigenvalues(&a)?;
    let sigma_s = eigenvalues(&generator.s)?;
    if let Some(k) = first_resonance(&sigma_a, &sigma_s, degree) {
        return Err(Error::Resonance { degree: k });
    }
    let basis = MonomialBasis::new(generator.nu(), degree)?;
    let field = field.map.extend(degree)?;
    let mut pi = PolyMap::zeros_on(basis.clone(), n);
    for k in 1..=degree {
        let inner = state_and_input(&pi, &generator.l);
        let rk = field.compose(&inner)?.homogeneous(k);
        let mk = basis.lie_matrix(k, &generator.s);
        let pik = solve_sylvester_general(&a, &mk, &(-rk))?;
        pi.set_homogeneous(k, &pik);
    }
    let mu = h.extend(degree)?.compose(&pi)?;
    Ok(PdeSolution { pi, mu })
}

/// Coefficients of `f(pi, L omega) - d pi/d omega * S omega` through the degree of `pi`.
pub fn pde_residual(
    field: &PolyVectorField,
    generator: &SignalGenerator,
    pi: &PolyMap,
) -> Result<PolyMap> {
    let degree = pi.degree();
    let inner = state_and_input(pi, &generator.l);
    let mut res = field.map.extend(degree)?.compose(&inner)?;
    for k in 1..=degree {
        let lie = pi.homogeneous(k) * pi.basis().lie_matrix(k, &generator.s);
        let r = pi.basis().range(k);
        let mut cols = res.coeffs.columns_mut(r.start, r.len());
        cols -= lie;
    }
    Ok(res)
}

/// Reduced model `xi' = F xi + G u`, `psi = kappa(xi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearReducedModel {
    pub f: Mat,
    pub g: Vector,
    pub kappa: PolyMap,
    pub params: ReductionParams,
}

impl NonlinearReducedModel {
    pub fn r(&self) -> usize {
        self.f.nrows()
    }
}

/// Reduced model `F = P (S - Delta L) Q`, `G = P Delta`, `kappa(xi) = mu(Q xi)`.
pub fn assemble_nonlinear_family(
    generator: &SignalGenerator,
    mu: &PolyMap,
    params: &ReductionParams,
) -> Result<NonlinearReducedModel> {
    let report = check_admissibility(generator, params)?;
    if !report.admissible() {
        return Err(Error::NotAdmissible(report.violations()));
    }
    let (p, q, delta) = (&params.p, &params.q, &params.delta);
    let f = p * (&generator.s - delta * &generator.l) * q;
    let g = p * delta;
    let kappa = mu.compose(&PolyMap::linear(q, mu.degree())?)?;
    Ok(NonlinearReducedModel {
        f,
        g,
        kappa,
        params: params.clone(),
    })
}

/// Output map keeping the terms of `kappa` up to degree `order`.
pub fn truncate_output(model: &NonlinearReducedModel, order: usize) -> Result<PolyMap> {
    model.kappa.truncate(order)
}

/// `sup |d mu/d omega - d mu_hat/d omega|` over the samples, with
/// `mu_hat(omega) = kappa(P omega)`.
pub fn nonlinear_error_bound(
    mu: &PolyMap,
    model: &NonlinearReducedModel,
    samples: &[Vector],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let degree = mu.degree().max(model.kappa.degree());
    let mu_hat = model
        .kappa
        .extend(degree)?
        .compose(&PolyMap::linear(&model.params.p, degree)?)?;
    let mut sup: f64 = 0.0;
    for w in samples {
        let d = mu.jacobian(w.as_slice()) - mu_hat.jacobian(w.as_slice());
        sup = sup.max(d.norm());
    }
    Ok(sup)
}

/// Whether `kappa(xi) = mu(Q xi)` at every sample, to `1e-9` relative to the
/// largest output magnitude (and absolutely when that is below one).
pub fn moment_matching_on_manifold_check(
    model: &NonlinearReducedModel,
    mu: &PolyMap,
    samples: &[Vector],
) -> Result<bool> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    let q = &model.params.q;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for xi in samples {
        let w = q * xi;
        let target = mu.eval(w.as_slice())[0];
        let got = model.kappa.eval(xi.as_slice())[0];
        worst = worst.max((got - target).abs());
        scale = scale.max(target.abs());
    }
    Ok(worst <= 1e-9 * scale)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Low-discrepancy points in the ball of radius `radius` in `R^dim`.
///
/// Halton coordinates are mapped to Gaussian directions by Box–Muller and to
/// radii by `u^(1/dim)`, which preserves uniformity in volume.
pub fn halton_ball(dim: usize, radius: f64, count: usize) -> Vec<Vector> {
    let pairs = dim.div_ceil(2);
    let bases = primes(2 * pairs + 1);
    (1..=count as u64)
        .map(|i| {
            let mut g = Vec::with_capacity(2 * pairs);
            for p in 0..pairs {
                let u1 = radical_inverse(i, bases[2 * p]);
                let u2 = radical_inverse(i, bases[2 * p + 1]);
                let rad = (-2.0 * u1.max(f64::MIN_POSITIVE).ln()).sqrt();
                let ang = 2.0 * std::f64::consts::PI * u2;
                g.push(rad * ang.cos());
                g.push(rad * ang.sin());
            }
            g.truncate(dim);
            let v = Vector::from_vec(g);
            let nrm = v.norm().max(f64::MIN_POSITIVE);
            let u = radical_inverse(i, bases[2 * pairs]);
            v * (radius * u.powf(1.0 / dim as f64) / nrm)
        })
        .collect()
}

/// Default sample set for [`nonlinear_error_bound`]: 256 points in the ball
/// of radius `|omega(0)|`.
pub fn default_samples(generator: &SignalGenerator) -> Vec<Vector> {
    halton_ball(generator.nu(), generator.omega0.norm(), 256)
}
