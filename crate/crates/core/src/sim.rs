//! Time-domain simulation of generator-driven interconnections and
//! steady-state error analysis.

use log::{debug, warn};
use nalgebra::{DVectorView, DVectorViewMut};

use crate::error::{Error, Result, Which};
use crate::generator::SignalGenerator;
use crate::linalg::{self, eigen_decompose, eigenvalues, to_complex, CMat, Mat, Row, Vector, C64};
use crate::linear::{model_moment_map, solve_pi, ReducedModel, StateSpace};
use crate::poly::PolyMap;
use crate::series::{NonlinearReducedModel, PolyVectorField};

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_final: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Trailing fraction of the horizon treated as steady state.
    pub steady_state_fraction: f64,
    /// Spacing of the uniform output grid.
    pub sample_dt: f64,
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_final: 100.0,
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            steady_state_fraction: 0.5,
            sample_dt: 0.01,
            max_steps: 50_000_000,
        }
    }
}

impl SimConfig {
    pub fn window_start(&self) -> f64 {
        self.t_final * (1.0 - self.steady_state_fraction)
    }

    /// Uniform grid `0, dt, 2 dt, ...` ending exactly at `t_final`.
    pub fn grid(&self) -> Vec<f64> {
        let steps = (self.t_final / self.sample_dt).ceil() as usize;
        (0..=steps)
            .map(|k| (k as f64 * self.sample_dt).min(self.t_final))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Samples of a vector-valued signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn channel(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }
}

/// Adaptive Bogacki–Shampine 3(2) integration of `x' = f(t, x)` from
/// `t_eval[0]`, reporting the state at every time in `t_eval` by cubic
/// Hermite interpolation.
pub fn integrate_rk23<F>(
    mut f: F,
    x0: &[f64],
    t_eval: &[f64],
    config: &SimConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = x0.len();
    let mut stats = IntegratorStats::default();
    let mut values = Vec::with_capacity(t_eval.len());
    if t_eval.is_empty() {
        return Ok(Trajectory {
            times: Vec::new(),
            values,
            stats,
        });
    }
    if t_eval.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("output times must be non-decreasing".into()));
    }
    let (t0, t1) = (t_eval[0], *t_eval.last().unwrap());
    let mut t = t0;
    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    f(t, &y, &mut k1);
    stats.evaluations += 1;

    let scale = |y: &[f64], i: usize| config.abs_tol + config.rel_tol * y[i].abs();
    let d0 = (0..n)
        .map(|i| (y[i] / scale(&y, i)).abs())
        .fold(0.0, f64::max);
    let d1 = (0..n)
        .map(|i| (k1[i] / scale(&y, i)).abs())
        .fold(0.0, f64::max);
    // Initial step selection after Hairer, Norsett and Wanner. The `100 h0`
    // cap is dropped: a state starting at zero with a nonzero derivative
    // makes `h0` vanish under a tiny absolute tolerance.
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    for i in 0..n {
        ytmp[i] = y[i] + h0 * k1[i];
    }
    f(t + h0, &ytmp, &mut k2);
    stats.evaluations += 1;
    let d2 = (0..n)
        .map(|i| ((k2[i] - k1[i]) / scale(&y, i)).abs())
        .fold(0.0, f64::max)
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 3.0)
    };
    let mut h = h1;
    h = h.min((t1 - t0).max(f64::MIN_POSITIVE));

    let mut next = 0;
    while next < t_eval.len() && t_eval[next] <= t {
        values.push(y.clone());
        next += 1;
    }
    while next < t_eval.len() {
        if stats.accepted + stats.rejected >= config.max_steps {
            return Err(Error::StepSizeUnderflow { t });
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }
        h = h.min(t1 - t);
        for i in 0..n {
            ytmp[i] = y[i] + 0.5 * h * k1[i];
        }
        f(t + 0.5 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + 0.75 * h * k2[i];
        }
        f(t + 0.75 * h, &ytmp, &mut k3);
        for i in 0..n {
            ynew[i] = y[i] + h * (2.0 / 9.0 * k1[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i]);
        }
        f(t + h, &ynew, &mut k4);
        stats.evaluations += 3;
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e =
                h * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] - 0.125 * k4[i]);
            let sc = config.abs_tol + config.rel_tol * y[i].abs().max(ynew[i].abs());
            err = err.max((e / sc).abs());
        }
        if !err.is_finite() {
            if ynew.iter().any(|v| !v.is_finite()) && h < 1e-300 {
                return Err(Error::NonFiniteState { t });
            }
            stats.rejected += 1;
            h *= 0.2;
            continue;
        }
        if err > 1.0 {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-1.0 / 3.0)).max(0.2);
            continue;
        }
        if ynew.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { t: t + h });
        }
        let t_new = if t1 - (t + h) <= 1e-12 * t1.abs().max(1.0) {
            t1
        } else {
            t + h
        };
        while next < t_eval.len() && t_eval[next] <= t_new {
            let s = if h > 0.0 { (t_eval[next] - t) / h } else { 1.0 };
            let (s2, s3) = (s * s, s * s * s);
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            // Written around y so that a state at rest is reproduced exactly.
            values.push(
                (0..n)
                    .map(|i| y[i] + h01 * (ynew[i] - y[i]) + h * (h10 * k1[i] + h11 * k4[i]))
                    .collect(),
            );
            next += 1;
        }
        t = t_new;
        std::mem::swap(&mut y, &mut ynew);
        std::mem::swap(&mut k1, &mut k4);
        stats.accepted += 1;
        let growth = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 5.0)
        };
        h *= growth;
    }
    debug!(
        "rk23: {} accepted, {} rejected, {} evaluations",
        stats.accepted, stats.rejected, stats.evaluations
    );
    Ok(Trajectory {
        times: t_eval.to_vec(),
        values,
        stats,
    })
}

/// A single-input system driven by the generator output.
pub trait DrivenSystem {
    fn state_dim(&self) -> usize;
    fn output_dim(&self) -> usize {
        1
    }
    fn rhs(&self, x: &[f64], u: f64, dx: &mut [f64]);
    fn outputs(&self, x: &[f64], out: &mut [f64]);
}

impl DrivenSystem for StateSpace {
    fn state_dim(&self) -> usize {
        self.n()
    }

    fn rhs(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let n = self.n();
        let xv = DVectorView::from_slice(x, n);
        let mut dv = DVectorViewMut::from_slice(dx, n);
        dv.gemv(1.0, &self.a, &xv, 0.0);
        dv.axpy(u, &self.b, 1.0);
    }

    fn outputs(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.c.iter().zip(x).map(|(c, x)| c * x).sum();
    }
}

impl DrivenSystem for ReducedModel {
    fn state_dim(&self) -> usize {
        self.r()
    }

    fn rhs(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let r = self.r();
        let xv = DVectorView::from_slice(x, r);
        let mut dv = DVectorViewMut::from_slice(dx, r);
        dv.gemv(1.0, &self.f, &xv, 0.0);
        dv.axpy(u, &self.g, 1.0);
    }

    fn outputs(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.h.iter().zip(x).map(|(c, x)| c * x).sum();
    }
}

/// Polynomial plant `x' = f(x, u)`, `y = h(x)`.
#[derive(Debug, Clone)]
pub struct PolyPlant {
    pub field: PolyVectorField,
    pub h: PolyMap,
}

impl DrivenSystem for PolyPlant {
    fn state_dim(&self) -> usize {
        self.field.n()
    }

    fn rhs(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        self.field.eval(x, u, dx);
    }

    fn outputs(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.h.eval(x)[0];
    }
}

/// Nonlinear reduced model reporting one output per truncation order.
#[derive(Debug, Clone)]
pub struct TruncatedOutputs {
    pub f: Mat,
    pub g: Vector,
    pub outputs: Vec<PolyMap>,
}

impl TruncatedOutputs {
    pub fn new(model: &NonlinearReducedModel, orders: &[usize]) -> Result<Self> {
        let outputs = orders
            .iter()
            .map(|&k| crate::series::truncate_output(model, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(TruncatedOutputs {
            f: model.f.clone(),
            g: model.g.clone(),
            outputs,
        })
    }
}

impl DrivenSystem for TruncatedOutputs {
    fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    fn rhs(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let r = self.f.nrows();
        let xv = DVectorView::from_slice(x, r);
        let mut dv = DVectorViewMut::from_slice(dx, r);
        dv.gemv(1.0, &self.f, &xv, 0.0);
        dv.axpy(u, &self.g, 1.0);
    }

    fn outputs(&self, x: &[f64], out: &mut [f64]) {
        for (o, k) in out.iter_mut().zip(&self.outputs) {
            *o = k.eval(x)[0];
        }
    }
}

/// Simulate systems driven in parallel by the generator from `omega(0)` with
/// zero initial states.
///
/// Channels of the result: `u`, `|omega|`, then the outputs of each system in order.
pub fn simulate_interconnection(
    generator: &SignalGenerator,
    systems: &[&dyn DrivenSystem],
    config: &SimConfig,
) -> Result<Trajectory> {
    let nu = generator.nu();
    let dims: Vec<usize> = systems.iter().map(|s| s.state_dim()).collect();
    let total = nu + dims.iter().sum::<usize>();
    let mut z0 = vec![0.0; total];
    z0[..nu].copy_from_slice(generator.omega0.as_slice());
    let s = &generator.s;
    let l = &generator.l;
    let rhs = |_t: f64, z: &[f64], dz: &mut [f64]| {
        let w = DVectorView::from_slice(&z[..nu], nu);
        let u = l.dot(&w.transpose());
        {
            let mut dw = DVectorViewMut::from_slice(&mut dz[..nu], nu);
            dw.gemv(1.0, s, &w, 0.0);
        }
        let mut at = nu;
        for (sys, &d) in systems.iter().zip(&dims) {
            sys.rhs(&z[at..at + d], u, &mut dz[at..at + d]);
            at += d;
        }
    };
    let grid = config.grid();
    let states = integrate_rk23(rhs, &z0, &grid, config)?;
    let nout: usize = systems.iter().map(|s| s.output_dim()).sum();
    let values = states
        .values
        .iter()
        .map(|z| {
            let w = DVectorView::from_slice(&z[..nu], nu);
            let mut row = vec![0.0; 2 + nout];
            row[0] = l.dot(&w.transpose());
            row[1] = w.norm();
            let (mut at, mut o) = (nu, 2);
            for (sys, &d) in systems.iter().zip(&dims) {
                let k = sys.output_dim();
                sys.outputs(&z[at..at + d], &mut row[o..o + k]);
                at += d;
                o += k;
            }
            row
        })
        .collect();
    Ok(Trajectory {
        times: states.times,
        values,
        stats: states.stats,
    })
}

/// Root-mean-square of `values` over `times >= window_start`, by the trapezoidal rule.
pub fn rms_value(times: &[f64], values: &[f64], window_start: f64) -> Result<f64> {
    let idx: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= window_start)
        .collect();
    if idx.len() < 2 {
        return Err(Error::EmptyWindow);
    }
    let mut integral = 0.0;
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        integral += 0.5 * (times[b] - times[a]) * (values[a] * values[a] + values[b] * values[b]);
    }
    let span = times[*idx.last().unwrap()] - times[idx[0]];
    if span <= 0.0 {
        return Err(Error::EmptyWindow);
    }
    Ok((integral / span).sqrt())
}

fn slowest_rate(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|v| -v.re)
        .fold(f64::INFINITY, f64::min))
}

/// Result of a simulated gain estimate.
#[derive(Debug, Clone)]
pub struct GammaEstimate {
    pub gamma: f64,
    pub horizon: f64,
    pub window_start: f64,
    /// Channels: `u`, `|omega|`, `y`, `psi`.
    pub trajectory: Trajectory,
}

/// Steady-state rms gain from `omega` to `y - psi`, estimated by simulation.
///
/// The horizon is at least `40 / min |Re lambda|` over `sigma(A)` and
/// `sigma(F)`, so that the averaging window (the trailing half by default)
/// begins after twenty time constants of the slowest mode.
pub fn estimate_gamma_rms(
    sys: &StateSpace,
    model: &ReducedModel,
    generator: &SignalGenerator,
    config: &SimConfig,
) -> Result<GammaEstimate> {
    let ra = slowest_rate(&sys.a)?;
    if ra <= 0.0 {
        return Err(Error::Unstable {
            which: Which::System,
        });
    }
    let rf = slowest_rate(&model.f)?;
    if rf <= 0.0 {
        return Err(Error::Unstable {
            which: Which::Model,
        });
    }
    if !linalg::is_skew_symmetric(&generator.s, 1e-12) {
        return Err(Error::NotSkewSymmetric);
    }
    let mut cfg = config.clone();
    let needed = 40.0 / ra.min(rf);
    if cfg.t_final < needed {
        warn!("extending horizon from {} to {needed}", cfg.t_final);
        cfg.t_final = needed;
    }
    let traj = simulate_interconnection(generator, &[sys, model], &cfg)?;
    let e: Vec<f64> = traj.values.iter().map(|v| v[2] - v[3]).collect();
    let w = traj.channel(1);
    let start = cfg.window_start();
    let gamma = rms_value(&traj.times, &e, start)? / rms_value(&traj.times, &w, start)?;
    Ok(GammaEstimate {
        gamma,
        horizon: cfg.t_final,
        window_start: start,
        trajectory: traj,
    })
}

/// Free response `omega(t) = e^{S t} omega(0)` of the generator.
pub struct GeneratorFlow {
    modal: Option<(CMat, Vec<C64>, CMat)>,
    s: Mat,
}

impl GeneratorFlow {
    pub fn new(s: &Mat) -> Result<Self> {
        let e = eigen_decompose(s)?;
        let modal = e.right.clone().try_inverse().and_then(|vinv| {
            let cond = e.right.norm() * vinv.norm();
            (cond < 1e8).then_some((e.right, e.values, vinv))
        });
        Ok(GeneratorFlow {
            modal,
            s: s.clone(),
        })
    }

    /// `c e^{S t} omega0` for a row `c`.
    pub fn project(&self, c: &Row, omega0: &Vector, t: f64) -> f64 {
        match &self.modal {
            Some((v, d, vinv)) => {
                let a = to_complex(&Mat::from_row_slice(1, c.len(), c.as_slice())) * v;
                let b =
                    vinv * to_complex(&Mat::from_column_slice(omega0.len(), 1, omega0.as_slice()));
                (0..d.len())
                    .map(|k| (a[(0, k)] * b[(k, 0)] * (d[k] * t).exp()).re)
                    .sum()
            }
            None => (c * (&self.s * t).exp() * omega0)[0],
        }
    }
}

/// Row `C Pi - H P` mapping the generator state to the steady-state error.
pub fn steady_state_error_map(
    sys: &StateSpace,
    model: &ReducedModel,
    generator: &SignalGenerator,
) -> Result<Row> {
    let c_pi = &sys.c * solve_pi(sys, generator)?;
    let p = model_moment_map(model, generator)?;
    Ok(c_pi - &model.h * p)
}

/// Steady-state error `(C Pi - H P) omega(t)` on the given times.
pub fn steady_state_error_prediction(
    sys: &StateSpace,
    model: &ReducedModel,
    generator: &SignalGenerator,
    times: &[f64],
) -> Result<Vec<f64>> {
    let c = steady_state_error_map(sys, model, generator)?;
    let flow = GeneratorFlow::new(&generator.s)?;
    Ok(times
        .iter()
        .map(|&t| flow.project(&c, &generator.omega0, t))
        .collect())
}

/// Infinite-horizon rms gain of `omega -> c omega` for a skew-symmetric generator.
///
/// The signal `c e^{S t} omega0` is a finite sum of harmonics `a_k e^{i w_k t}`;
/// its mean square is `sum |sum_{w_k = w} a_k|^2` over distinct frequencies,
/// while `|omega(t)| = |omega0|` is constant.
pub fn steady_state_rms_limit(c: &Row, generator: &SignalGenerator) -> Result<f64> {
    if !linalg::is_skew_symmetric(&generator.s, 1e-12) {
        return Err(Error::NotSkewSymmetric);
    }
    let e = eigen_decompose(&generator.s)?;
    let vinv = e
        .right
        .clone()
        .try_inverse()
        .ok_or(Error::ConvergenceFailure)?;
    let w0 = &generator.omega0;
    let a = to_complex(&Mat::from_row_slice(1, c.len(), c.as_slice())) * &e.right;
    let b = vinv * to_complex(&Mat::from_column_slice(w0.len(), 1, w0.as_slice()));
    let tol = 1e-9 * linalg::spectral_scale(&e.values);
    let mut groups: Vec<(f64, C64)> = Vec::new();
    for k in 0..e.values.len() {
        let w = e.values[k].im;
        let amp = a[(0, k)] * b[(k, 0)];
        match groups.iter_mut().find(|g| (g.0 - w).abs() <= tol) {
            Some(g) => g.1 += amp,
            None => groups.push((w, amp)),
        }
    }
    let ms: f64 = groups.iter().map(|g| g.1.norm_sqr()).sum();
    let norm = w0.norm();
    if norm == 0.0 {
        return Err(Error::Invalid("omega(0) is zero".into()));
    }
    Ok(ms.sqrt() / norm)
}

/// One point of a frequency response; `value` is `None` at poles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqPoint {
    pub omega: f64,
    pub value: Option<C64>,
}

/// `C (i omega I - A)^{-1} B` on a grid; grid points on the spectrum are flagged.
pub fn frequency_response(sys: &StateSpace, omegas: &[f64]) -> Result<Vec<FreqPoint>> {
    let sigma = eigenvalues(&sys.a)?;
    let tol = 1e-8 * linalg::spectral_scale(&sigma);
    Ok(omegas
        .iter()
        .map(|&w| {
            let s = C64::new(0.0, w);
            let on_pole = linalg::min_distance(&sigma, &[s]) <= tol;
            let value = if on_pole { None } else { sys.transfer(s).ok() };
            if value.is_none() {
                warn!("frequency {w} lies on the spectrum");
            }
            FreqPoint { omega: w, value }
        })
        .collect())
}

/// `count` logarithmically spaced points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / (count - 1) as f64))
        .collect()
}
