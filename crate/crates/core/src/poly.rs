//! Truncated multivariate polynomial maps in graded monomial bases.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// Largest supported total degree.
pub const MAX_DEGREE: usize = 12;
/// Largest supported number of monomials in a basis.
pub const MAX_MONOMIALS: usize = 200_000;

/// Monomials of total degree `0..=degree` in `nvars` variables, ordered by
/// degree and, within a degree, by their sorted variable lists.
#[derive(Debug)]
pub struct MonomialBasis {
    nvars: usize,
    degree: usize,
    exps: Vec<Vec<u8>>,
    offsets: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    /// For every non-constant monomial: index of the monomial with its last
    /// variable removed, and that variable.
    parent: Vec<(usize, usize)>,
}

fn binomial(n: usize, k: usize) -> usize {
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
        if r > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    r as usize
}

impl MonomialBasis {
    pub fn new(nvars: usize, degree: usize) -> Result<Arc<Self>> {
        let count = binomial(nvars + degree, degree);
        if degree > MAX_DEGREE || count > MAX_MONOMIALS {
            return Err(Error::DegreeOverflow {
                requested: degree,
                max: MAX_DEGREE,
            });
        }
        let mut exps = vec![vec![0u8; nvars]];
        let mut last_var = vec![0usize];
        let mut parent = vec![(usize::MAX, usize::MAX)];
        let mut offsets = vec![0, 1];
        for _ in 1..=degree {
            let (lo, hi) = (offsets[offsets.len() - 2], offsets[offsets.len() - 1]);
            for p in lo..hi {
                for v in last_var[p]..nvars {
                    let mut e = exps[p].clone();
                    e[v] += 1;
                    exps.push(e);
                    last_var.push(v);
                    parent.push((p, v));
                }
            }
            offsets.push(exps.len());
        }
        let index = exps
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        Ok(Arc::new(MonomialBasis {
            nvars,
            degree,
            exps,
            offsets,
            index,
            parent,
        }))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self, i: usize) -> &[u8] {
        &self.exps[i]
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.exps[i].iter().map(|&e| e as usize).sum()
    }

    /// Index range of the monomials of total degree `k`.
    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    /// Values of every monomial at `x`.
    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        v[0] = 1.0;
        for i in 1..self.len() {
            let (p, var) = self.parent[i];
            v[i] = v[p] * x[var];
        }
        v
    }

    /// Matrix `M_k` of the Lie derivative along `S omega` on degree-`k`
    /// monomials: `d/dt omega^[k] = M_k omega^[k]`.
    pub fn lie_matrix(&self, k: usize, s: &Mat) -> Mat {
        let range = self.range(k);
        let lo = range.start;
        let mut m = Mat::zeros(range.len(), range.len());
        let mut e = vec![0u8; self.nvars];
        for a in range.clone() {
            for j in 0..self.nvars {
                let aj = self.exps[a][j];
                if aj == 0 {
                    continue;
                }
                for l in 0..self.nvars {
                    let sjl = s[(j, l)];
                    if sjl == 0.0 {
                        continue;
                    }
                    e.copy_from_slice(&self.exps[a]);
                    e[j] -= 1;
                    e[l] += 1;
                    let b = self.index[&e];
                    m[(a - lo, b - lo)] += aj as f64 * sjl;
                }
            }
        }
        m
    }

    /// Truncated product of two scalar series on this basis.
    fn mul(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        let nz_b: Vec<usize> = (0..b.len()).filter(|&j| b[j] != 0.0).collect();
        let mut e = vec![0u8; self.nvars];
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            let di = self.degree_of(i);
            for &j in &nz_b {
                if di + self.degree_of(j) > self.degree {
                    continue;
                }
                for (v, x) in e.iter_mut().enumerate() {
                    *x = self.exps[i][v] + self.exps[j][v];
                }
                out[self.index[&e]] += ai * b[j];
            }
        }
        out
    }
}

/// Polynomial map `R^nvars -> R^nout` of bounded total degree, stored as a
/// coefficient matrix with one column per basis monomial.
#[derive(Debug, Clone)]
pub struct PolyMap {
    basis: Arc<MonomialBasis>,
    pub coeffs: Mat,
}

impl PartialEq for PolyMap {
    fn eq(&self, other: &Self) -> bool {
        self.nvars() == other.nvars()
            && self.degree() == other.degree()
            && self.coeffs == other.coeffs
    }
}

impl PolyMap {
    pub fn zeros(nvars: usize, nout: usize, degree: usize) -> Result<Self> {
        let basis = MonomialBasis::new(nvars, degree)?;
        Ok(Self::zeros_on(basis, nout))
    }

    pub fn zeros_on(basis: Arc<MonomialBasis>, nout: usize) -> Self {
        let coeffs = Mat::zeros(nout, basis.len());
        PolyMap { basis, coeffs }
    }

    /// The linear map `x -> m x`.
    pub fn linear(m: &Mat, degree: usize) -> Result<Self> {
        let mut p = Self::zeros(m.ncols(), m.nrows(), degree.max(1))?;
        for j in 0..m.ncols() {
            p.coeffs.set_column(1 + j, &m.column(j));
        }
        Ok(p)
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn nvars(&self) -> usize {
        self.basis.nvars
    }

    pub fn nout(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn coeff(&self, out: usize, exps: &[u8]) -> f64 {
        self.basis
            .index_of(exps)
            .map_or(0.0, |i| self.coeffs[(out, i)])
    }

    pub fn set_coeff(&mut self, out: usize, exps: &[u8], value: f64) -> Result<()> {
        let i = self
            .basis
            .index_of(exps)
            .ok_or_else(|| Error::Invalid(format!("monomial {exps:?} outside basis")))?;
        self.coeffs[(out, i)] = value;
        Ok(())
    }

    /// Coefficients of the degree-`k` homogeneous part.
    pub fn homogeneous(&self, k: usize) -> Mat {
        let r = self.basis.range(k);
        self.coeffs.columns(r.start, r.len()).into_owned()
    }

    pub fn set_homogeneous(&mut self, k: usize, block: &Mat) {
        let r = self.basis.range(k);
        self.coeffs.columns_mut(r.start, r.len()).copy_from(block);
    }

    /// Jacobian of the degree-one part.
    pub fn linear_part(&self) -> Mat {
        self.homogeneous(1)
    }

    pub fn eval(&self, x: &[f64]) -> Vector {
        let v = Vector::from_vec(self.basis.values(x));
        &self.coeffs * v
    }

    pub fn jacobian(&self, x: &[f64]) -> Mat {
        let b = &self.basis;
        let vals = b.values(x);
        let mut jac = Mat::zeros(self.nout(), self.nvars());
        let mut e = vec![0u8; b.nvars];
        for i in 1..b.len() {
            for v in 0..b.nvars {
                let ev = b.exps[i][v];
                if ev == 0 {
                    continue;
                }
                e.copy_from_slice(&b.exps[i]);
                e[v] -= 1;
                let d = ev as f64 * vals[b.index[&e]];
                for o in 0..self.nout() {
                    jac[(o, v)] += self.coeffs[(o, i)] * d;
                }
            }
        }
        jac
    }

    /// Same map with every monomial of degree above `order` dropped.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.degree() {
            return Err(Error::OrderExceedsDegree {
                order,
                degree: self.degree(),
            });
        }
        let basis = MonomialBasis::new(self.nvars(), order)?;
        let coeffs = self.coeffs.columns(0, basis.len()).into_owned();
        Ok(PolyMap { basis, coeffs })
    }

    /// Coefficients re-expressed on a basis of higher degree.
    pub fn extend(&self, degree: usize) -> Result<Self> {
        let basis = MonomialBasis::new(self.nvars(), degree.max(self.degree()))?;
        let mut out = Self::zeros_on(basis, self.nout());
        let n = self.basis.len().min(out.basis.len());
        out.coeffs
            .columns_mut(0, n)
            .copy_from(&self.coeffs.columns(0, n));
        Ok(out)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self(inner(y))`, truncated to the degree of `inner`'s basis.
    ///
    /// `inner` must have no constant term so that truncation is exact.
    pub fn compose(&self, inner: &PolyMap) -> Result<PolyMap> {
        if inner.nout() != self.nvars() {
            return Err(Error::Dimension(format!(
                "composing a map of {} variables with one of {} outputs",
                self.nvars(),
                inner.nout()
            )));
        }
        if inner.coeffs.column(0).iter().any(|&c| c != 0.0) {
            return Err(Error::Invalid("inner map must vanish at the origin".into()));
        }
        let ib = inner.basis.clone();
        let outer = &self.basis;
        let mut result = PolyMap::zeros_on(ib.clone(), self.nout());
        let mut memo: HashMap<usize, Vec<f64>> = HashMap::new();
        let mut one = vec![0.0; ib.len()];
        one[0] = 1.0;
        memo.insert(0, one);
        let rows: Vec<Vec<f64>> = (0..inner.nout())
            .map(|r| inner.coeffs.row(r).iter().cloned().collect())
            .collect();
        for beta in 0..outer.len() {
            if outer.degree_of(beta) > ib.degree {
                break;
            }
            if (0..self.nout()).all(|o| self.coeffs[(o, beta)] == 0.0) {
                continue;
            }
            let series = power(outer, &ib, &rows, beta, &mut memo).clone();
            for o in 0..self.nout() {
                let c = self.coeffs[(o, beta)];
                if c != 0.0 {
                    for (k, s) in series.iter().enumerate() {
                        result.coeffs[(o, k)] += c * s;
                    }
                }
            }
        }
        Ok(result)
    }
}

/// Series of the outer monomial `beta` evaluated on the inner components.
fn power<'a>(
    outer: &MonomialBasis,
    inner: &MonomialBasis,
    rows: &[Vec<f64>],
    beta: usize,
    memo: &'a mut HashMap<usize, Vec<f64>>,
) -> &'a Vec<f64> {
    if !memo.contains_key(&beta) {
        let (p, v) = outer.parent[beta];
        let base = power(outer, inner, rows, p, memo).clone();
        let prod = inner.mul(&base, &rows[v]);
        memo.insert(beta, prod);
    }
    &memo[&beta]
}
