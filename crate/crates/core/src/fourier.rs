//! Real multivariate trigonometric polynomials on the unit torus.
//!
//! A term is `a·cos(2π k·x) + b·sin(2π k·x)`. Terms are stored once per
//! pair `{k, -k}` with the first nonzero entry of `k` positive, which keeps
//! the series real-valued and makes the mode table unique.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigMode<S> {
    pub k: Vec<i32>,
    pub cos: S,
    pub sin: S,
}

/// Canonical representative of `{k, -k}` and the sign applied to the sine part.
pub fn canonical_mode(k: &[i32]) -> (Vec<i32>, i32) {
    match k.iter().find(|&&x| x != 0) {
        Some(&first) if first < 0 => (k.iter().map(|&x| -x).collect(), -1),
        _ => (k.to_vec(), 1),
    }
}

#[inline]
fn phase<S: Scalar>(k: &[i32], x: &[S]) -> S {
    let mut acc = S::zero();
    for (&ki, &xi) in k.iter().zip(x) {
        if ki != 0 {
            acc += S::from_int(ki as i64) * xi;
        }
    }
    S::TAU() * acc
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSeries<S> {
    dims: Vec<String>,
    modes: Vec<TrigMode<S>>,
}

/// Value and derivatives up to third order at one point.
///
/// `hess` is `d×d` and `third` is `d×d×d`, both row-major.
#[derive(Clone, Debug, Default)]
pub struct Jet<S> {
    pub value: S,
    pub grad: Vec<S>,
    pub hess: Vec<S>,
    pub third: Vec<S>,
}

impl<S: Scalar> Jet<S> {
    pub fn new(d: usize) -> Self {
        Self {
            value: S::zero(),
            grad: vec![S::zero(); d],
            hess: vec![S::zero(); d * d],
            third: vec![S::zero(); d * d * d],
        }
    }

    fn clear(&mut self) {
        self.value = S::zero();
        self.grad.iter_mut().for_each(|x| *x = S::zero());
        self.hess.iter_mut().for_each(|x| *x = S::zero());
        self.third.iter_mut().for_each(|x| *x = S::zero());
    }
}

impl<S: Scalar> FourierSeries<S> {
    pub fn zero(dims: Vec<String>) -> Self {
        Self {
            dims,
            modes: Vec::new(),
        }
    }

    /// Builds a series, merging `k` with `-k` and dropping zero terms.
    pub fn from_modes(
        dims: Vec<String>,
        modes: impl IntoIterator<Item = TrigMode<S>>,
    ) -> Result<Self> {
        let d = dims.len();
        let mut acc: BTreeMap<Vec<i32>, (S, S)> = BTreeMap::new();
        for m in modes {
            if m.k.len() != d {
                return Err(Error::Dimension(format!(
                    "mode {:?} has {} entries, series has {} variables",
                    m.k,
                    m.k.len(),
                    d
                )));
            }
            let (k, sign) = canonical_mode(&m.k);
            let e = acc.entry(k).or_insert((S::zero(), S::zero()));
            e.0 += m.cos;
            e.1 += S::from_int(sign as i64) * m.sin;
        }
        let modes = acc
            .into_iter()
            .filter_map(|(k, (c, s))| {
                let s = if k.iter().all(|&x| x == 0) {
                    S::zero()
                } else {
                    s
                };
                (c != S::zero() || s != S::zero()).then_some(TrigMode { k, cos: c, sin: s })
            })
            .collect();
        Ok(Self { dims, modes })
    }

    pub fn constant(dims: Vec<String>, c: S) -> Self {
        let d = dims.len();
        Self::from_modes(
            dims,
            [TrigMode {
                k: vec![0; d],
                cos: c,
                sin: S::zero(),
            }],
        )
        .expect("constant mode has the right length")
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn ndims(&self) -> usize {
        self.dims.len()
    }

    pub fn modes(&self) -> &[TrigMode<S>] {
        &self.modes
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    /// Largest `|k_i|` per variable.
    pub fn max_degree(&self) -> Vec<i32> {
        let mut deg = vec![0; self.ndims()];
        for m in &self.modes {
            for (d, &k) in deg.iter_mut().zip(&m.k) {
                *d = (*d).max(k.abs());
            }
        }
        deg
    }

    /// Sum of `|cos| + |sin|` over all terms; a bound on the sup norm.
    pub fn l1_norm(&self) -> S {
        self.modes.iter().map(|m| m.cos.abs() + m.sin.abs()).sum()
    }

    pub fn mean(&self) -> S {
        self.modes
            .iter()
            .find(|m| m.k.iter().all(|&x| x == 0))
            .map_or(S::zero(), |m| m.cos)
    }

    pub fn eval(&self, x: &[S]) -> S {
        debug_assert_eq!(x.len(), self.ndims());
        let mut v = S::zero();
        for m in &self.modes {
            let th = phase(&m.k, x);
            v += m.cos * th.cos() + m.sin * th.sin();
        }
        v
    }

    /// Partial derivative along variable `axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        let modes = self.modes.iter().filter(|m| m.k[axis] != 0).map(|m| {
            let w = S::TAU() * S::from_int(m.k[axis] as i64);
            TrigMode {
                k: m.k.clone(),
                cos: w * m.sin,
                sin: -w * m.cos,
            }
        });
        Self {
            dims: self.dims.clone(),
            modes: modes.collect(),
        }
    }

    pub fn gradient(&self, x: &[S]) -> Vec<S> {
        let mut jet = Jet::new(self.ndims());
        self.jet_into(x, 1, &mut jet);
        jet.grad
    }

    /// Value and derivatives up to `order` (at most 3), written into `out`.
    pub fn jet_into(&self, x: &[S], order: usize, out: &mut Jet<S>) {
        let d = self.ndims();
        out.clear();
        let tau = S::TAU();
        let tau2 = tau * tau;
        let tau3 = tau2 * tau;
        let mut kf = [S::zero(); 17];
        for m in &self.modes {
            let th = phase(&m.k, x);
            let (s, c) = th.sin_cos();
            let f0 = m.cos * c + m.sin * s;
            out.value += f0;
            if order == 0 {
                continue;
            }
            let f1 = -m.cos * s + m.sin * c;
            for (kfi, &ki) in kf.iter_mut().zip(&m.k) {
                *kfi = S::from_int(ki as i64);
            }
            for i in 0..d {
                if m.k[i] != 0 {
                    out.grad[i] += tau * kf[i] * f1;
                }
            }
            if order == 1 {
                continue;
            }
            for i in 0..d {
                if m.k[i] == 0 {
                    continue;
                }
                for j in 0..d {
                    if m.k[j] != 0 {
                        out.hess[i * d + j] -= tau2 * kf[i] * kf[j] * f0;
                    }
                }
            }
            if order == 2 {
                continue;
            }
            for i in 0..d {
                if m.k[i] == 0 {
                    continue;
                }
                for j in 0..d {
                    if m.k[j] == 0 {
                        continue;
                    }
                    let kij = kf[i] * kf[j];
                    for l in 0..d {
                        if m.k[l] != 0 {
                            out.third[(i * d + j) * d + l] -= tau3 * kij * kf[l] * f1;
                        }
                    }
                }
            }
        }
    }

    pub fn jet(&self, x: &[S], order: usize) -> Jet<S> {
        let mut out = Jet::new(self.ndims());
        self.jet_into(x, order, &mut out);
        out
    }

    pub fn scale(&self, c: S) -> Self {
        Self {
            dims: self.dims.clone(),
            modes: self
                .modes
                .iter()
                .map(|m| TrigMode {
                    k: m.k.clone(),
                    cos: c * m.cos,
                    sin: c * m.sin,
                })
                .collect(),
        }
    }

    /// `self - other` on the same variables.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Dimension(
                "subtracting series on different variables".into(),
            ));
        }
        let neg = other.modes.iter().map(|m| TrigMode {
            k: m.k.clone(),
            cos: -m.cos,
            sin: -m.sin,
        });
        Self::from_modes(self.dims.clone(), self.modes.iter().cloned().chain(neg))
    }

    /// Re-embeds a series in a larger variable list: variable `i` of `self`
    /// becomes variable `positions[i]` of the result.
    pub fn embed(&self, dims: Vec<String>, positions: &[usize]) -> Result<Self> {
        let d = dims.len();
        let modes = self.modes.iter().map(|m| {
            let mut k = vec![0; d];
            for (i, &p) in positions.iter().enumerate() {
                k[p] = m.k[i];
            }
            TrigMode {
                k,
                cos: m.cos,
                sin: m.sin,
            }
        });
        Self::from_modes(dims, modes)
    }
}

/// Average of `g` over the unit torus `T^d` by the `n^d` midpoint-free
/// rectangle rule, which is exact for trigonometric polynomials of degree
/// below `n`.
///
/// Before averaging, `g` is compared with its translate by one period
/// along each variable at a few probe points.
pub fn torus_average<S: Scalar>(dims: &[String], n: usize, g: impl Fn(&[S]) -> S) -> Result<S> {
    let d = dims.len();
    let probes = [0.137, 0.523, 0.871];
    for axis in 0..d {
        for &a in &probes {
            let x: Vec<S> = (0..d).map(|i| S::lit(a + 0.211 * i as f64)).collect();
            let mut y = x.clone();
            y[axis] += S::one();
            let (gx, gy) = (g(&x), g(&y));
            let tol = S::lit(1e3) * S::epsilon() * (S::one() + gx.abs());
            if (gx - gy).abs() > tol {
                return Err(Error::NotPeriodic(dims[axis].clone()));
            }
        }
    }
    let total = n.pow(d as u32);
    let h = S::one() / S::from_usize_lossy(n);
    let mut idx = vec![0usize; d];
    let mut x = vec![S::zero(); d];
    let mut acc = S::zero();
    for _ in 0..total {
        for i in 0..d {
            x[i] = S::from_usize_lossy(idx[i]) * h;
        }
        acc += g(&x);
        for i in (0..d).rev() {
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(acc / S::from_usize_lossy(total))
}

/// Quadratic polynomial `c0 + c1·d + ½ dᵀ c2 d` in a displacement `d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly2<S> {
    pub c0: S,
    pub c1: Vec<S>,
    /// Symmetric `n×n`, row-major.
    pub c2: Vec<S>,
}

impl<S: Scalar> Poly2<S> {
    pub fn constant(c0: S, n: usize) -> Self {
        Self {
            c0,
            c1: vec![S::zero(); n],
            c2: vec![S::zero(); n * n],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.c1.iter().chain(&self.c2).all(|&x| x == S::zero())
    }

    pub fn eval(&self, d: &[S]) -> S {
        let n = d.len();
        let mut v = self.c0;
        for i in 0..n {
            v += self.c1[i] * d[i];
            for j in 0..n {
                v += S::lit(0.5) * self.c2[i * n + j] * d[i] * d[j];
            }
        }
        v
    }

    fn grad_into(&self, d: &[S], out: &mut [S]) {
        let n = d.len();
        for i in 0..n {
            let mut g = self.c1[i];
            for j in 0..n {
                g += self.c2[i * n + j] * d[j];
            }
            out[i] = g;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalTerm<S> {
    pub k: Vec<i32>,
    pub cos: Poly2<S>,
    pub sin: Poly2<S>,
}

/// Trigonometric polynomial in `x ∈ T^d` whose coefficients are quadratic
/// polynomials in `p - p_ref`, `p ∈ R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModalSeries<S> {
    dims: Vec<String>,
    p_ref: Vec<S>,
    terms: Vec<ModalTerm<S>>,
}

/// Second-order jet of a [`ModalSeries`] in `(x, p)`.
#[derive(Clone, Debug, Default)]
pub struct ModalJet<S> {
    pub value: S,
    pub dx: Vec<S>,
    pub dp: Vec<S>,
    /// `d×d`
    pub dxx: Vec<S>,
    /// `d×n`
    pub dxp: Vec<S>,
    /// `n×n`
    pub dpp: Vec<S>,
}

impl<S: Scalar> ModalJet<S> {
    pub fn new(d: usize, n: usize) -> Self {
        Self {
            value: S::zero(),
            dx: vec![S::zero(); d],
            dp: vec![S::zero(); n],
            dxx: vec![S::zero(); d * d],
            dxp: vec![S::zero(); d * n],
            dpp: vec![S::zero(); n * n],
        }
    }

    fn clear(&mut self) {
        self.value = S::zero();
        for v in [
            &mut self.dx,
            &mut self.dp,
            &mut self.dxx,
            &mut self.dxp,
            &mut self.dpp,
        ] {
            v.iter_mut().for_each(|x| *x = S::zero());
        }
    }
}

impl<S: Scalar> ModalSeries<S> {
    pub fn new(dims: Vec<String>, p_ref: Vec<S>, terms: Vec<ModalTerm<S>>) -> Result<Self> {
        let d = dims.len();
        let n = p_ref.len();
        for t in &terms {
            if t.k.len() != d {
                return Err(Error::Dimension(format!(
                    "mode {:?} expects {d} wave numbers",
                    t.k
                )));
            }
            for poly in [&t.cos, &t.sin] {
                if poly.c1.len() != n || poly.c2.len() != n * n {
                    return Err(Error::Dimension(format!(
                        "coefficient polynomial of mode {:?} must act on R^{n}",
                        t.k
                    )));
                }
            }
        }
        Ok(Self { dims, p_ref, terms })
    }

    /// Momentum-independent series.
    pub fn from_series(series: &FourierSeries<S>, p_ref: Vec<S>) -> Self {
        let n = p_ref.len();
        let terms = series
            .modes()
            .iter()
            .map(|m| ModalTerm {
                k: m.k.clone(),
                cos: Poly2::constant(m.cos, n),
                sin: Poly2::constant(m.sin, n),
            })
            .collect();
        Self {
            dims: series.dims().to_vec(),
            p_ref,
            terms,
        }
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn p_ref(&self) -> &[S] {
        &self.p_ref
    }

    pub fn terms(&self) -> &[ModalTerm<S>] {
        &self.terms
    }

    pub fn is_momentum_independent(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.cos.is_constant() && t.sin.is_constant())
    }

    /// Series with coefficients frozen at `p`.
    pub fn at(&self, p: &[S]) -> FourierSeries<S> {
        let dp: Vec<S> = p.iter().zip(&self.p_ref).map(|(&a, &b)| a - b).collect();
        let modes = self.terms.iter().map(|t| TrigMode {
            k: t.k.clone(),
            cos: t.cos.eval(&dp),
            sin: t.sin.eval(&dp),
        });
        FourierSeries::from_modes(self.dims.clone(), modes)
            .expect("terms validated on construction")
    }

    pub fn at_reference(&self) -> FourierSeries<S> {
        self.at(&self.p_ref.clone())
    }

    pub fn eval(&self, x: &[S], p: &[S]) -> S {
        let dp: Vec<S> = p.iter().zip(&self.p_ref).map(|(&a, &b)| a - b).collect();
        self.terms
            .iter()
            .map(|t| {
                let (s, c) = phase(&t.k, x).sin_cos();
                t.cos.eval(&dp) * c + t.sin.eval(&dp) * s
            })
            .sum()
    }

    /// Second-order jet at `(x, p)` written into `out`.
    pub fn jet_into(&self, x: &[S], p: &[S], out: &mut ModalJet<S>) {
        let d = self.dims.len();
        let n = self.p_ref.len();
        out.clear();
        let tau = S::TAU();
        let tau2 = tau * tau;
        let mut dp = [S::zero(); 8];
        let dp = if n <= 8 {
            for i in 0..n {
                dp[i] = p[i] - self.p_ref[i];
            }
            &dp[..n]
        } else {
            panic!("modal series supports at most 8 momentum variables")
        };
        let mut ga = [S::zero(); 8];
        let mut gb = [S::zero(); 8];
        for t in &self.terms {
            let (s, c) = phase(&t.k, x).sin_cos();
            let a = t.cos.eval(dp);
            let b = t.sin.eval(dp);
            let f0 = a * c + b * s;
            let f1 = -a * s + b * c;
            out.value += f0;
            for i in 0..d {
                let ki = t.k[i];
                if ki == 0 {
                    continue;
                }
                let kfi = S::from_int(ki as i64);
                out.dx[i] += tau * kfi * f1;
                for j in 0..d {
                    if t.k[j] != 0 {
                        out.dxx[i * d + j] -= tau2 * kfi * S::from_int(t.k[j] as i64) * f0;
                    }
                }
            }
            if t.cos.is_constant() && t.sin.is_constant() {
                continue;
            }
            t.cos.grad_into(dp, &mut ga[..n]);
            t.sin.grad_into(dp, &mut gb[..n]);
            for a_ in 0..n {
                out.dp[a_] += ga[a_] * c + gb[a_] * s;
                let g1 = -ga[a_] * s + gb[a_] * c;
                for i in 0..d {
                    if t.k[i] != 0 {
                        out.dxp[i * n + a_] += tau * S::from_int(t.k[i] as i64) * g1;
                    }
                }
                for b_ in 0..n {
                    out.dpp[a_ * n + b_] += t.cos.c2[a_ * n + b_] * c + t.sin.c2[a_ * n + b_] * s;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dims(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn sample() -> FourierSeries<f64> {
        FourierSeries::from_modes(
            dims(&["t", "q1", "q2"]),
            [
                TrigMode {
                    k: vec![0, 0, 0],
                    cos: 1.0,
                    sin: 0.0,
                },
                TrigMode {
                    k: vec![1, -1, 0],
                    cos: 0.3,
                    sin: -0.2,
                },
                TrigMode {
                    k: vec![0, 2, 1],
                    cos: -0.1,
                    sin: 0.4,
                },
                TrigMode {
                    k: vec![-1, 1, 1],
                    cos: 0.05,
                    sin: 0.07,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn negative_modes_are_folded() {
        let s = FourierSeries::from_modes(
            dims(&["x"]),
            [
                TrigMode {
                    k: vec![-2],
                    cos: 1.0,
                    sin: 1.0,
                },
                TrigMode {
                    k: vec![2],
                    cos: 1.0,
                    sin: 1.0,
                },
            ],
        )
        .unwrap();
        assert_eq!(s.modes().len(), 1);
        assert_eq!(s.modes()[0].k, vec![2]);
        assert_eq!(s.modes()[0].cos, 2.0);
        assert_eq!(s.modes()[0].sin, 0.0);
        assert!(s.is_zero() == false);
    }

    #[test]
    fn derivative_series_matches_jet() {
        let s = sample();
        let x = [0.31, -0.12, 0.77];
        let jet = s.jet(&x, 3);
        for axis in 0..3 {
            let ds = s.derivative(axis);
            assert!((ds.eval(&x) - jet.grad[axis]).abs() < 1e-12);
            for j in 0..3 {
                assert!((ds.derivative(j).eval(&x) - jet.hess[axis * 3 + j]).abs() < 1e-11);
                for l in 0..3 {
                    let t = ds.derivative(j).derivative(l).eval(&x);
                    assert!((t - jet.third[(axis * 3 + j) * 3 + l]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn five_point_stencil_converges_at_fourth_order() {
        let s = sample();
        let x = [0.2, 0.45, -0.3];
        let exact = s.gradient(&x);
        let err = |h: f64, axis: usize| {
            let at = |dx: f64| {
                let mut y = x;
                y[axis] += dx;
                s.eval(&y)
            };
            let fd = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            (fd - exact[axis]).abs()
        };
        for axis in 0..3 {
            let e1 = err(1e-2, axis);
            let e2 = err(1e-3, axis);
            // Ten-fold step reduction should gain about four digits.
            assert!(e2 < e1 * 2e-3, "axis {axis}: {e1:e} -> {e2:e}");
        }
    }

    #[test]
    fn torus_average_rejects_aperiodic() {
        let names = dims(&["t"]);
        let err = torus_average::<f64>(&names, 8, |x| x[0]).unwrap_err();
        assert!(matches!(err, Error::NotPeriodic(ref v) if v == "t"));
        let m = torus_average::<f64>(&names, 8, |x| 2.0 + (std::f64::consts::TAU * x[0]).cos())
            .unwrap();
        assert!((m - 2.0).abs() < 1e-14);
    }

    #[test]
    fn modal_jet_matches_finite_differences() {
        let terms = vec![
            ModalTerm {
                k: vec![1, -1],
                cos: Poly2 {
                    c0: 0.3,
                    c1: vec![0.5, -0.2],
                    c2: vec![0.1, 0.05, 0.05, -0.3],
                },
                sin: Poly2 {
                    c0: 0.0,
                    c1: vec![0.0, 0.7],
                    c2: vec![0.0; 4],
                },
            },
            ModalTerm {
                k: vec![0, 1],
                cos: Poly2::constant(1.0, 2),
                sin: Poly2::constant(0.2, 2),
            },
        ];
        let g: ModalSeries<f64> =
            ModalSeries::new(dims(&["t", "q"]), vec![0.6, 0.0], terms).unwrap();
        let x = [0.13, 0.41];
        let p = [0.7, -0.05];
        let mut jet = ModalJet::new(2, 2);
        g.jet_into(&x, &p, &mut jet);
        assert!((jet.value - g.eval(&x, &p)).abs() < 1e-15);
        let h = 1e-6;
        for a in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[a] += h;
            pm[a] -= h;
            let fd = (g.eval(&x, &pp) - g.eval(&x, &pm)) / (2.0 * h);
            assert!((fd - jet.dp[a]).abs() < 1e-8);
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let mut jp = ModalJet::new(2, 2);
                let mut jm = ModalJet::new(2, 2);
                g.jet_into(&xp, &p, &mut jp);
                g.jet_into(&xm, &p, &mut jm);
                assert!(((jp.dp[a] - jm.dp[a]) / (2.0 * h) - jet.dxp[i * 2 + a]).abs() < 1e-7);
            }
            for b in 0..2 {
                let mut jp = ModalJet::new(2, 2);
                let mut jm = ModalJet::new(2, 2);
                let mut pp = p;
                let mut pm = p;
                pp[b] += h;
                pm[b] -= h;
                g.jet_into(&x, &pp, &mut jp);
                g.jet_into(&x, &pm, &mut jm);
                assert!(((jp.dp[a] - jm.dp[a]) / (2.0 * h) - jet.dpp[a * 2 + b]).abs() < 1e-7);
            }
        }
        let frozen = g.at(&p);
        assert!((frozen.eval(&x) - g.eval(&x, &p)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn series_is_one_periodic(x in -3.0..3.0f64, y in -3.0..3.0f64, z in -3.0..3.0f64, axis in 0usize..3) {
            let s = sample();
            let p = [x, y, z];
            let mut q = p;
            q[axis] += 1.0;
            prop_assert!((s.eval(&p) - s.eval(&q)).abs() < 1e-12);
        }

        #[test]
        fn quadrature_average_matches_mean(n in 6usize..12) {
            let s = sample();
            let avg = torus_average(s.dims(), n, |x| s.eval(x)).unwrap();
            prop_assert!((avg - s.mean()).abs() < 1e-12);
        }
    }
}
