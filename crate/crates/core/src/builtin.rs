//! Benchmark systems: a flexible space structure and a CMOS inverter chain.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::generator::{build_generator, InterpolationSpec, SignalGenerator};
use crate::linalg::{Mat, Row, Vector};
use crate::linear::StateSpace;
use crate::poly::PolyMap;
use crate::series::PolyVectorField;
use crate::sim::DrivenSystem;

/// Generator frequencies used with the flexible space structure.
pub const FSS_FREQUENCIES: [f64; 12] = [
    0.01, 0.1, 1.0, 5.5, 10.0, 16.0, 20.0, 30.0, 50.0, 100.0, 1000.0, 10000.0,
];

/// Flexible space structure: `K` lightly damped modes with random parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FssParams {
    pub modes: usize,
    pub seed: u64,
    pub damping: (f64, f64),
    pub frequency: (f64, f64),
    pub input_gain: (f64, f64),
    pub output_gain: (f64, f64),
}

impl Default for FssParams {
    fn default() -> Self {
        FssParams {
            modes: 30,
            seed: 1009,
            damping: (0.0, 0.001),
            frequency: (0.0, 100.0),
            input_gain: (0.0, 1.0),
            output_gain: (0.0, 10.0),
        }
    }
}

/// Uniform draw from the open interval `(lo, hi)`.
fn open_uniform(rng: &mut Xoshiro256PlusPlus, (lo, hi): (f64, f64)) -> f64 {
    loop {
        let x = rng.random_range(lo..hi);
        if x > lo {
            return x;
        }
    }
}

/// Block-diagonal modal model with blocks
/// `A_k = [[-2 chi phi, -phi], [phi, 0]]`, `B_k = [b; 0]`, `C_k = [c_r, c_d / phi]`.
///
/// Per mode the draws are taken in the order `chi, phi, b, c_r, c_d`.
pub fn build_fss(params: &FssParams) -> Result<StateSpace> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(params.seed);
    let n = 2 * params.modes;
    let mut a = Mat::zeros(n, n);
    let mut b = Vector::zeros(n);
    let mut c = Row::zeros(n);
    for k in 0..params.modes {
        let chi = open_uniform(&mut rng, params.damping);
        let phi = open_uniform(&mut rng, params.frequency);
        let bk = open_uniform(&mut rng, params.input_gain);
        let cr = open_uniform(&mut rng, params.output_gain);
        let cd = open_uniform(&mut rng, params.output_gain);
        let i = 2 * k;
        a[(i, i)] = -2.0 * chi * phi;
        a[(i, i + 1)] = -phi;
        a[(i + 1, i)] = phi;
        b[i] = bk;
        c[i] = cr;
        c[i + 1] = cd / phi;
    }
    StateSpace::new(a, b, c)
}

/// Generator interpolating at `±i omega` for every entry of [`FSS_FREQUENCIES`].
pub fn fss_generator() -> Result<SignalGenerator> {
    let spec = InterpolationSpec::imaginary_axis(&FSS_FREQUENCIES)?;
    build_generator(&spec, None, None)
}

/// CMOS inverter chain `x_1' = (-x_1 + alpha u) / tau_1`,
/// `x_i' = (-x_i - V_dd,(i-1) tanh(x_(i-1) / V_T)) / tau_i`, with output `x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverterChainParams {
    pub v_t: f64,
    pub alpha: f64,
    /// Supply voltage of each inverter; inverter `i` drives stage `i + 1`.
    pub vdd: Vec<f64>,
    /// Time constant of each stage.
    pub tau: Vec<f64>,
}

impl InverterChainParams {
    /// `n` stages with `V_dd,i = 1/(4(i+1))` and `tau_i = 4(i+1)`.
    pub fn standard(n: usize) -> Self {
        InverterChainParams {
            v_t: 0.25,
            alpha: 4.0,
            vdd: (1..n).map(|i| 1.0 / (4.0 * (i as f64 + 1.0))).collect(),
            tau: (1..=n).map(|i| 4.0 * (i as f64 + 1.0)).collect(),
        }
    }

    pub fn stages(&self) -> usize {
        self.tau.len()
    }
}

impl Default for InverterChainParams {
    fn default() -> Self {
        Self::standard(12)
    }
}

/// Odd Taylor coefficients of `tanh` through degree 11.
const TANH_SERIES: [(usize, f64); 6] = [
    (1, 1.0),
    (3, -1.0 / 3.0),
    (5, 2.0 / 15.0),
    (7, -17.0 / 315.0),
    (9, 62.0 / 2835.0),
    (11, -1382.0 / 155925.0),
];

/// Polynomial field and output map of the inverter chain, with `tanh`
/// replaced by its Taylor polynomial of degree `expand_degree`.
pub fn build_inverter_chain(
    params: &InverterChainParams,
    expand_degree: usize,
) -> Result<(PolyVectorField, PolyMap)> {
    let n = params.stages();
    if n == 0 || params.vdd.len() + 1 != n {
        return Err(Error::Dimension(format!(
            "{} stages need {} supply voltages, got {}",
            n,
            n.saturating_sub(1),
            params.vdd.len()
        )));
    }
    let max = TANH_SERIES.last().unwrap().0;
    if expand_degree == 0 || expand_degree > max {
        return Err(Error::DegreeOverflow {
            requested: expand_degree,
            max,
        });
    }
    let mut f = PolyMap::zeros(n + 1, n, expand_degree)?;
    let mut e = vec![0u8; n + 1];
    e[0] = 1;
    f.set_coeff(0, &e, -1.0 / params.tau[0])?;
    e[0] = 0;
    e[n] = 1;
    f.set_coeff(0, &e, params.alpha / params.tau[0])?;
    e[n] = 0;
    for i in 1..n {
        let tau = params.tau[i];
        e[i] = 1;
        f.set_coeff(i, &e, -1.0 / tau)?;
        e[i] = 0;
        for &(k, c) in TANH_SERIES.iter().filter(|t| t.0 <= expand_degree) {
            e[i - 1] = k as u8;
            let coeff = -params.vdd[i - 1] * c / params.v_t.powi(k as i32) / tau;
            f.set_coeff(i, &e, coeff)?;
            e[i - 1] = 0;
        }
    }
    let mut h = PolyMap::zeros(n, 1, expand_degree)?;
    let mut e = vec![0u8; n];
    e[n - 1] = 1;
    h.set_coeff(0, &e, 1.0)?;
    Ok((PolyVectorField::new(f)?, h))
}

/// Inverter chain with the exact `tanh` characteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct InverterChain {
    pub params: InverterChainParams,
}

impl DrivenSystem for InverterChain {
    fn state_dim(&self) -> usize {
        self.params.stages()
    }

    fn rhs(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let p = &self.params;
        dx[0] = (-x[0] + p.alpha * u) / p.tau[0];
        for i in 1..x.len() {
            dx[i] = (-x[i] - p.vdd[i - 1] * (x[i - 1] / p.v_t).tanh()) / p.tau[i];
        }
    }

    fn outputs(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[x.len() - 1];
    }
}

/// Generator interpolating at `±i k` for `k = 1..=5`.
pub fn inverter_generator() -> Result<SignalGenerator> {
    let spec = InterpolationSpec::imaginary_axis(&[1.0, 2.0, 3.0, 4.0, 5.0])?;
    build_generator(&spec, None, None)
}
