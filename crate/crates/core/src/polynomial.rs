//! Multivariate polynomials, used for the integrable part `h(p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial<S> {
    pub coef: S,
    pub exps: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial<S> {
    nvars: usize,
    terms: Vec<Monomial<S>>,
}

#[inline]
fn pow_deriv<S: Scalar>(x: S, e: u32, order: u32) -> S {
    if order > e {
        return S::zero();
    }
    let mut c = S::one();
    for j in 0..order {
        c *= S::from_int((e - j) as i64);
    }
    c * x.powi((e - order) as i32)
}

impl<S: Scalar> Polynomial<S> {
    pub fn new(nvars: usize, terms: Vec<Monomial<S>>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| t.exps.len() != nvars) {
            return Err(Error::Dimension(format!(
                "monomial exponents {:?} for a polynomial in {nvars} variables",
                t.exps
            )));
        }
        Ok(Self { nvars, terms })
    }

    /// `½ pᵀ M p` for a symmetric `M`.
    pub fn quadratic_form(m: &Mat<S>) -> Self {
        let n = m.rows();
        let mut terms = Vec::new();
        for i in 0..n {
            for j in i..n {
                let c = if i == j {
                    S::lit(0.5) * m[(i, i)]
                } else {
                    m[(i, j)]
                };
                if c != S::zero() {
                    let mut exps = vec![0; n];
                    exps[i] += 1;
                    exps[j] += 1;
                    terms.push(Monomial { coef: c, exps });
                }
            }
        }
        Self { nvars: n, terms }
    }

    /// `½|p|²`.
    pub fn kinetic(n: usize) -> Self {
        Self::quadratic_form(&Mat::identity(n))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Monomial<S>] {
        &self.terms
    }

    pub fn add_term(&mut self, coef: S, exps: Vec<u32>) {
        assert_eq!(exps.len(), self.nvars);
        self.terms.push(Monomial { coef, exps });
    }

    pub fn eval(&self, p: &[S]) -> S {
        self.terms
            .iter()
            .map(|t| {
                t.exps.iter().zip(p).fold(
                    t.coef,
                    |acc, (&e, &x)| if e == 0 { acc } else { acc * x.powi(e as i32) },
                )
            })
            .sum()
    }

    pub fn gradient_into(&self, p: &[S], out: &mut [S]) {
        out.iter_mut().for_each(|x| *x = S::zero());
        for t in &self.terms {
            for i in 0..self.nvars {
                if t.exps[i] == 0 {
                    continue;
                }
                let mut v = t.coef;
                for (j, (&e, &x)) in t.exps.iter().zip(p).enumerate() {
                    v *= pow_deriv(x, e, (i == j) as u32);
                }
                out[i] += v;
            }
        }
    }

    pub fn gradient(&self, p: &[S]) -> Vec<S> {
        let mut g = vec![S::zero(); self.nvars];
        self.gradient_into(p, &mut g);
        g
    }

    /// Hessian, row-major `n×n`.
    pub fn hessian_into(&self, p: &[S], out: &mut [S]) {
        let n = self.nvars;
        out.iter_mut().for_each(|x| *x = S::zero());
        for t in &self.terms {
            for i in 0..n {
                if t.exps[i] == 0 {
                    continue;
                }
                for k in i..n {
                    if t.exps[k] == 0 || (i == k && t.exps[i] < 2) {
                        continue;
                    }
                    let mut v = t.coef;
                    for (j, (&e, &x)) in t.exps.iter().zip(p).enumerate() {
                        let order = (j == i) as u32 + (j == k) as u32;
                        v *= pow_deriv(x, e, order);
                    }
                    out[i * n + k] += v;
                    if k != i {
                        out[k * n + i] += v;
                    }
                }
            }
        }
    }

    pub fn hessian(&self, p: &[S]) -> Mat<S> {
        let n = self.nvars;
        let mut h = Mat::zeros(n, n);
        self.hessian_into(p, h.as_mut_slice());
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_a_cubic() {
        // h = ½ p1² + ½ p2² + 0.1 p2³ + 0.3 p1 p2²
        let mut h = Polynomial::<f64>::kinetic(2);
        h.add_term(0.1, vec![0, 3]);
        h.add_term(0.3, vec![1, 2]);
        let p = [0.4, -0.7];
        let g = h.gradient(&p);
        assert!((g[0] - (0.4 + 0.3 * 0.49)).abs() < 1e-15);
        assert!((g[1] - (-0.7 + 0.3 * 0.49 + 0.6 * 0.4 * -0.7)).abs() < 1e-15);
        let hs = h.hessian(&p);
        assert!((hs[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((hs[(0, 1)] - 0.6 * -0.7).abs() < 1e-15);
        assert!((hs[(1, 0)] - hs[(0, 1)]).abs() < 1e-15);
        assert!((hs[(1, 1)] - (1.0 + 0.6 * -0.7 + 0.6 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn quadratic_form_roundtrip() {
        let m: Mat<f64> = Mat::from_rows(&[vec![1.49, -0.7], vec![-0.7, 1.0]]);
        let h = Polynomial::quadratic_form(&m);
        let hs = h.hessian(&[0.3, 0.1]);
        assert!((&hs - &m).max_abs() < 1e-15);
        assert!((h.eval(&[1.0, 0.7]) - 0.5 * (1.49 - 2.0 * 0.49 + 0.49)).abs() < 1e-15);
    }
}
