//! Random instances and independent oracles shared by the integration tests.
#![allow(dead_code)]

use lsmm::generator::{build_generator, InterpolationSpec};
use lsmm::linalg::CMat;
use lsmm::{Mat, Row, SignalGenerator, StateSpace, Vector, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub type TestRng = Xoshiro256PlusPlus;

pub fn rng(seed: u64) -> TestRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn normal(rng: &mut TestRng) -> f64 {
    // Box–Muller; avoids a dependency on rand_distr for a handful of draws.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_mat(rng: &mut TestRng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn random_vec(rng: &mut TestRng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| normal(rng))
}

pub fn random_row(rng: &mut TestRng, n: usize) -> Row {
    Row::from_fn(n, |_, _| normal(rng))
}

/// Random conjugate-closed spectrum of size `n` with real parts in
/// `[-hi, -lo]`, distinct members, pairs adjacent.
pub fn random_stable_spectrum(rng: &mut TestRng, n: usize, lo: f64, hi: f64) -> Vec<C64> {
    random_separated_spectrum(rng, n, lo, hi, 0.05)
}

/// As [`random_stable_spectrum`] with members at least `sep` apart.
pub fn random_separated_spectrum(
    rng: &mut TestRng,
    n: usize,
    lo: f64,
    hi: f64,
    sep: f64,
) -> Vec<C64> {
    let mut out: Vec<C64> = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n {
        // Greedy packing can corner itself; start over now and then.
        tries += 1;
        if tries % 1000 == 0 {
            out.clear();
        }
        let re = -(lo + (hi - lo) * rng.random::<f64>());
        let pair = n - out.len() >= 2 && rng.random::<bool>();
        let cand = if pair {
            vec![
                C64::new(re, 0.3 + 3.0 * rng.random::<f64>()),
                C64::new(re, 0.0),
            ]
        } else {
            vec![C64::new(re, 0.0)]
        };
        if out
            .iter()
            .any(|z| (z - cand[0]).norm() < sep || (z - cand[0].conj()).norm() < sep)
            || (pair && cand[0].im < 0.5 * sep)
        {
            continue;
        }
        if pair {
            out.push(cand[0]);
            out.push(cand[0].conj());
        } else {
            out.push(cand[0]);
        }
    }
    out
}

/// Real matrix `V D V^{-1}` with the given conjugate-closed spectrum (pairs adjacent)
/// and a well-conditioned random similarity.
pub fn matrix_with_spectrum(rng: &mut TestRng, spectrum: &[C64]) -> Mat {
    let n = spectrum.len();
    let mut d = Mat::zeros(n, n);
    let mut i = 0;
    while i < n {
        let z = spectrum[i];
        if z.im == 0.0 {
            d[(i, i)] = z.re;
            i += 1;
        } else {
            d[(i, i)] = z.re;
            d[(i, i + 1)] = z.im;
            d[(i + 1, i)] = -z.im;
            d[(i + 1, i + 1)] = z.re;
            i += 2;
        }
    }
    let v = Mat::identity(n, n) + random_mat(rng, n, n) * (0.3 / (n as f64).sqrt());
    let vinv = v.clone().try_inverse().expect("near-identity similarity");
    v * d * vinv
}

pub fn random_stable_matrix(rng: &mut TestRng, n: usize) -> Mat {
    let spectrum = random_stable_spectrum(rng, n, 0.3, 2.0);
    matrix_with_spectrum(rng, &spectrum)
}

pub fn random_stable_system(rng: &mut TestRng, n: usize) -> StateSpace {
    let spectrum = random_stable_spectrum(rng, n, 0.3, 2.0);
    let a = matrix_with_spectrum(rng, &spectrum);
    StateSpace::new(a, random_vec(rng, n), random_row(rng, n)).unwrap()
}

/// Distinct frequencies in `[0.2, 5]`, at least `0.1` apart.
pub fn random_frequencies(rng: &mut TestRng, count: usize) -> Vec<f64> {
    random_separated_frequencies(rng, count, 0.1)
}

pub fn random_separated_frequencies(rng: &mut TestRng, count: usize, sep: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count {
        tries += 1;
        if tries % 1000 == 0 {
            out.clear();
        }
        let w = 0.2 + 4.8 * rng.random::<f64>();
        if out.iter().all(|x| (x - w).abs() > sep) {
            out.push(w);
        }
    }
    out
}

/// Skew-symmetric generator of even dimension `nu` with default `L`.
pub fn random_skew_generator(rng: &mut TestRng, nu: usize) -> SignalGenerator {
    assert!(nu % 2 == 0 && nu > 0);
    let spec = InterpolationSpec::imaginary_axis(&random_frequencies(rng, nu / 2)).unwrap();
    build_generator(&spec, None, None).unwrap()
}

pub fn skew_generator(frequencies: &[f64]) -> SignalGenerator {
    let spec = InterpolationSpec::imaginary_axis(frequencies).unwrap();
    build_generator(&spec, None, None).unwrap()
}

/// Generator with a mix of real points, complex pairs and higher orders.
pub fn random_general_generator(rng: &mut TestRng, max_nu: usize) -> SignalGenerator {
    loop {
        let mut points = Vec::new();
        let mut orders = Vec::new();
        let mut nu = 0;
        while nu < 2 || (nu < max_nu && rng.random::<f64>() < 0.6) {
            let k = if rng.random::<f64>() < 0.3 { 1 } else { 0 };
            let far = |p: C64, pts: &[C64]| pts.iter().all(|q| (p - q).norm() >= 0.5);
            if rng.random::<bool>() && nu + 2 * (k + 1) <= max_nu {
                let p = C64::new(0.5 * normal(rng), 0.5 + 4.0 * rng.random::<f64>());
                if !far(p, &points) {
                    continue;
                }
                points.push(p);
                points.push(p.conj());
                orders.push(k);
                orders.push(k);
                nu += 2 * (k + 1);
            } else if nu + k < max_nu {
                let p = C64::new(normal(rng), 0.0);
                if !far(p, &points) {
                    continue;
                }
                points.push(p);
                orders.push(k);
                nu += k + 1;
            } else if nu > 0 {
                break;
            }
        }
        let Ok(spec) = InterpolationSpec::new(points, orders) else {
            continue;
        };
        let l = random_row(rng, spec.nu());
        if let Ok(g) = build_generator(&spec, Some(l), None) {
            return g;
        }
    }
}

/// `C (sI - A)^{-(k+1)} B` for `k = 0..=order`, computed with a fresh complex
/// LU per point, independent of the library's moment routines.
pub fn resolvent_moments(a: &Mat, b: &Vector, c: &Row, s: C64, order: usize) -> Vec<C64> {
    let n = a.nrows();
    let mut m: CMat = DMatrix::from_fn(n, n, |i, j| C64::new(-a[(i, j)], 0.0));
    for i in 0..n {
        m[(i, i)] += s;
    }
    let lu = m.lu();
    let mut x: CMat = DMatrix::from_fn(n, 1, |i, _| C64::new(b[i], 0.0));
    let mut out = Vec::with_capacity(order + 1);
    for _ in 0..=order {
        x = lu.solve(&x).expect("point off the spectrum");
        out.push((0..n).map(|i| x[(i, 0)] * c[i]).sum());
    }
    out
}

/// Sum of squared moment errors over the chains of a generator.
pub fn moment_error_sum(full: &StateSpace, model: &StateSpace, chains: &[(C64, usize)]) -> f64 {
    chains
        .iter()
        .map(|&(s, k)| {
            let e = resolvent_moments(&full.a, &full.b, &full.c, s, k);
            let m = resolvent_moments(&model.a, &model.b, &model.c, s, k);
            e.iter()
                .zip(&m)
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
        })
        .sum()
}

/// Real polynomial with the given conjugate-closed roots, highest degree first.
pub fn real_poly(roots: &[C64]) -> Vec<f64> {
    let mut c = vec![C64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c.iter().map(|z| z.re).collect()
}

/// Characteristic polynomial by Faddeev–LeVerrier, highest degree first.
pub fn char_poly(a: &Mat) -> Vec<f64> {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let mut coeffs = vec![1.0];
    let mut m = Mat::zeros(n, n);
    let mut c = 1.0;
    for k in 1..=n {
        m = a * &m + &id * c;
        c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Multiset distance: the largest distance from a member of `a` to its
/// greedily matched partner in `b`.
pub fn spectrum_mismatch(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Admissible parameters: `Delta` places random stable targets, `P` spans the
/// left eigenvectors of the first `r` of them (bumped to keep pairs whole).
pub fn random_admissible_params(
    rng: &mut TestRng,
    g: &SignalGenerator,
    r: usize,
) -> lsmm::ReductionParams {
    let nu = g.nu();
    let targets = random_separated_spectrum(rng, nu, 0.3, 2.0, 0.2);
    let mut r = r.clamp(1, nu);
    if r < nu && targets[r - 1].im > 0.0 {
        r += 1;
    }
    let delta = lsmm::linalg::pole_place_siso(&g.s, &g.l, &targets).unwrap();
    let p = lsmm::linalg::left_eigen_span(&g.s, &g.l, &targets[..r]).unwrap();
    let form = lsmm::generator::build_canonical_T(g).unwrap();
    let q = lsmm::linear::derive_Q(&p, &form).unwrap();
    lsmm::ReductionParams { p, delta, q }
}

/// `cases` per property, unless `PROPTEST_CASES` asks for a different count.
pub fn proptest_config(cases: u32) -> proptest::test_runner::Config {
    if std::env::var_os("PROPTEST_CASES").is_some() {
        proptest::test_runner::Config::default()
    } else {
        proptest::test_runner::Config::with_cases(cases)
    }
}

fn inverse_iteration(m: &CMat, shift: C64) -> CMat {
    let n = m.nrows();
    let mut a = m.clone();
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let lu = a.lu();
    let mut x = CMat::from_element(n, 1, C64::new(1.0, 0.3));
    for _ in 0..3 {
        if let Some(y) = lu.solve(&x) {
            x = y;
        }
        let nx = x.norm();
        x /= C64::new(nx, 0.0);
    }
    x
}

/// Largest eigenvalue condition number `1 / |y^* x|` over `values`, with unit
/// eigenvectors from inverse iteration at each value.
pub fn eigenvalue_condition(m: &Mat, values: &[C64]) -> f64 {
    let mc = lsmm::linalg::to_complex(m);
    let mh = mc.adjoint();
    values
        .iter()
        .map(|&v| {
            let x = inverse_iteration(&mc, v);
            let y = inverse_iteration(&mh, v.conj());
            1.0 / (y.adjoint() * &x)[(0, 0)].norm()
        })
        .fold(0.0, f64::max)
}

/// Largest `sigma_min(M - v I) / |M|` over `values`: the relative distance to
/// the nearest matrix having every `v` as an eigenvalue, up to a factor.
pub fn spectral_backward_error(m: &Mat, values: &[C64]) -> f64 {
    let mc = lsmm::linalg::to_complex(m);
    values
        .iter()
        .map(|&v| {
            let mut a = mc.clone();
            for i in 0..m.nrows() {
                a[(i, i)] -= v;
            }
            a.singular_values()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        / m.norm()
}

/// Whether double precision can resolve the spectrum of `m` to `tol`: the
/// first-order forward error `kappa |M| eps` is at most `tol / 10`.
pub fn spectrum_resolvable(m: &Mat, values: &[C64], tol: f64) -> bool {
    eigenvalue_condition(m, values) * m.norm() * f64::EPSILON <= 0.1 * tol
}
