//! First-order averaging: the homological equation, the symplectic
//! corrector `ψ^ε` and the normal form `H₁ = H̃ ∘ ψ^ε`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{FourierSeries, TrigMode};
use crate::hamiltonian::{tq_point, Hamiltonian, PhaseJet};
use crate::model::{average_potential, HamiltonianSpec};
use crate::report::CertificateReport;
use crate::scalar::Scalar;

/// Divisors below this are treated as exact resonances.
pub const RESONANCE_CUTOFF: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorEntry<S> {
    pub k: Vec<i32>,
    /// `2π(k₀ + k_{q₁}·ω)`
    pub divisor: S,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomologicalSolution<S> {
    pub f: FourierSeries<S>,
    pub divisors: Vec<DivisorEntry<S>>,
    pub smallest_divisor: S,
}

/// Solves `∂_t f + ∂_q f·(ω, 0) = G(·, ·, p₀) − V` mode by mode.
///
/// `g_at_p0` lives on `(t, q₁, q₂)` and `v` on `q₂`. Modes with
/// `k₀ = k_{q₁} = 0` must cancel between `G` and `V`.
pub fn solve_homological<S: Scalar>(
    g_at_p0: &FourierSeries<S>,
    v: &FourierSeries<S>,
    omega: &[S],
) -> Result<HomologicalSolution<S>> {
    let m = omega.len();
    let d = g_at_p0.ndims();
    if d < m + 2 || v.ndims() != d - 1 - m {
        return Err(Error::Dimension(format!(
            "G has {d} angles, V has {}, omega has {m} components",
            v.ndims()
        )));
    }
    let positions: Vec<usize> = (m + 1..d).collect();
    let v_full = v.embed(g_at_p0.dims().to_vec(), &positions)?;
    let rhs = g_at_p0.sub(&v_full)?;
    let scale = S::one() + rhs.l1_norm();
    let cutoff = S::lit(RESONANCE_CUTOFF);
    let mut modes = Vec::new();
    let mut divisors = Vec::new();
    let mut smallest = S::infinity();
    for md in rhs.modes() {
        let nu = S::from_int(md.k[0] as i64)
            + md.k[1..=m]
                .iter()
                .zip(omega)
                .map(|(&k, &w)| S::from_int(k as i64) * w)
                .sum::<S>();
        let div = S::TAU() * nu;
        let coeff = md.cos.abs().max(md.sin.abs());
        if div.abs() <= cutoff {
            if coeff > S::lit(1e-14) * scale {
                return Err(Error::Resonance {
                    mode: md.k.clone(),
                    coefficient: coeff.f64(),
                });
            }
            continue;
        }
        smallest = smallest.min(div.abs());
        divisors.push(DivisorEntry {
            k: md.k.clone(),
            divisor: div,
        });
        modes.push(TrigMode {
            k: md.k.clone(),
            cos: -md.sin / div,
            sin: md.cos / div,
        });
    }
    Ok(HomologicalSolution {
        f: FourierSeries::from_modes(g_at_p0.dims().to_vec(), modes)?,
        divisors,
        smallest_divisor: smallest,
    })
}

/// Point of the extended phase space `(t, e, q, p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedPoint<S> {
    pub t: S,
    pub e: S,
    pub q: Vec<S>,
    pub p: Vec<S>,
}

/// `ψ^ε(t, e, q, p) = (t, e + ε²∂_t f, q, p + ε²∂_q f)`, the time-`ε²` flow of `−f`.
pub fn apply_psi<S: Scalar>(
    f: &FourierSeries<S>,
    epsilon: S,
    pt: &ExtendedPoint<S>,
) -> ExtendedPoint<S> {
    shift(f, epsilon * epsilon, pt)
}

pub fn invert_psi<S: Scalar>(
    f: &FourierSeries<S>,
    epsilon: S,
    pt: &ExtendedPoint<S>,
) -> ExtendedPoint<S> {
    shift(f, -epsilon * epsilon, pt)
}

fn shift<S: Scalar>(f: &FourierSeries<S>, c: S, pt: &ExtendedPoint<S>) -> ExtendedPoint<S> {
    let x = tq_point(pt.t, &pt.q);
    let g = f.gradient(&x[..=pt.q.len()]);
    ExtendedPoint {
        t: pt.t,
        e: pt.e + c * g[0],
        q: pt.q.clone(),
        p: pt.p.iter().zip(&g[1..]).map(|(&p, &d)| p + c * d).collect(),
    }
}

/// `H₁(t, q, p) = H(t, q, p + ε²∂_q f) + ε²∂_t f`, evaluated by composition.
#[derive(Clone, Debug)]
pub struct NormalFormH1<S> {
    pub base: HamiltonianSpec<S>,
    pub hom: HomologicalSolution<S>,
    pub v: FourierSeries<S>,
}

impl<S: Scalar> NormalFormH1<S> {
    pub fn new(spec: &HamiltonianSpec<S>) -> Result<Self> {
        let v = average_potential(spec)?;
        let hom = solve_homological(&spec.g.at_reference(), &v, &spec.omega)?;
        Ok(Self {
            base: spec.clone(),
            hom,
            v,
        })
    }

    pub fn epsilon(&self) -> S {
        self.base.epsilon
    }

    pub fn f(&self) -> &FourierSeries<S> {
        &self.hom.f
    }

    /// Same normal form at another `ε`; `f` does not depend on `ε`.
    pub fn with_epsilon(&self, epsilon: S) -> Self {
        Self {
            base: self.base.with_epsilon(epsilon),
            hom: self.hom.clone(),
            v: self.v.clone(),
        }
    }

    /// `R(t, q, p) = G(t, q, p) − G(t, q, p₀)`.
    pub fn remainder(&self, t: S, q: &[S], p: &[S]) -> S {
        let x = tq_point(t, q);
        self.base.remainder(&x[..=q.len()], p)
    }

    /// `(∂h(p) − ∂h(p₀))·∂_q f`, the frequency-drift part of the `ε²` term.
    pub fn drift(&self, t: S, q: &[S], p: &[S]) -> S {
        let x = tq_point(t, q);
        let df = self.hom.f.gradient(&x[..=q.len()]);
        let a = self.base.h.gradient(p);
        let b = self.base.h.gradient(&self.base.p0);
        a.iter()
            .zip(&b)
            .zip(&df[1..])
            .map(|((&a, &b), &d)| (a - b) * d)
            .sum()
    }

    /// `H₁ − (h − ε²V(q₂) − ε²R + ε²·drift)`, which is `O(ε⁴)`.
    pub fn model_residual(&self, t: S, q: &[S], p: &[S]) -> S {
        let e2 = self.epsilon() * self.epsilon();
        let m = self.base.m;
        let model = self.base.h.eval(p) - e2 * self.v.eval(&q[m..]) - e2 * self.remainder(t, q, p)
            + e2 * self.drift(t, q, p);
        self.value(t, q, p) - model
    }
}

impl<S: Scalar> Hamiltonian<S> for NormalFormH1<S> {
    fn dof(&self) -> usize {
        self.base.n
    }

    fn jet(&self, t: S, q: &[S], p: &[S], second: bool, out: &mut PhaseJet<S>) {
        let n = self.base.n;
        let d = n + 1;
        let e2 = self.epsilon() * self.epsilon();
        let x = tq_point(t, q);
        self.hom
            .f
            .jet_into(&x[..d], if second { 3 } else { 2 }, &mut out.f);
        let mut u = [S::zero(); 16];
        for i in 0..n {
            u[i] = p[i] + e2 * out.f.grad[1 + i];
        }
        self.base.jet(t, q, &u[..n], second, out);

        let fj = &out.f;
        let fq = |i: usize, j: usize| e2 * fj.hess[(1 + i) * d + 1 + j];
        let (kq, rest) = out.buf.split_at_mut(n);
        let (ku, rest) = rest.split_at_mut(n);
        let (kqq, rest) = rest.split_at_mut(n * n);
        let (kqu, rest) = rest.split_at_mut(n * n);
        let kuu = &mut rest[..n * n];
        kq.copy_from_slice(&out.dq);
        ku.copy_from_slice(&out.dp);

        out.value += e2 * fj.grad[0];
        let mut dt = out.dt + e2 * fj.hess[0];
        for i in 0..n {
            dt += ku[i] * e2 * fj.hess[1 + i];
        }
        out.dt = dt;
        for i in 0..n {
            let mut v = kq[i] + e2 * fj.hess[1 + i];
            for j in 0..n {
                v += ku[j] * fq(j, i);
            }
            out.dq[i] = v;
        }
        if !second {
            return;
        }
        kqq.copy_from_slice(&out.dqq);
        kqu.copy_from_slice(&out.dqp);
        kuu.copy_from_slice(&out.dpp);
        // ∂_{q_i}∂_{p_j}H₁ = K_{q_i u_j} + Σ_k K_{u_k u_j} F_{k i}
        for i in 0..n {
            for j in 0..n {
                let mut v = kqu[i * n + j];
                for k in 0..n {
                    v += kuu[k * n + j] * fq(k, i);
                }
                out.dqp[i * n + j] = v;
            }
        }
        for i in 0..n {
            for l in 0..n {
                let mut v = kqq[i * n + l] + e2 * fj.third[(1 + i) * d * d + (1 + l) * d];
                for k in 0..n {
                    v += kqu[i * n + k] * fq(k, l);
                    v += out.dqp[l * n + k] * fq(k, i);
                    v += ku[k] * e2 * fj.third[((1 + k) * d + 1 + i) * d + 1 + l];
                }
                out.dqq[i * n + l] = v;
            }
        }
    }
}

/// Sup of `∂_t f + ∂_{q₁}f·ω − (G(·, ·, p₀) − V)` over a shifted uniform
/// grid with `per_axis` points on every angle.
pub fn homological_residual<S: Scalar>(
    spec: &HamiltonianSpec<S>,
    h1: &NormalFormH1<S>,
    per_axis: usize,
) -> S {
    let m = spec.m;
    let f = h1.f();
    let d = f.ndims();
    let g = spec.g.at_reference();
    let derivs: Vec<FourierSeries<S>> = (0..=m).map(|i| f.derivative(i)).collect();
    let total = per_axis.pow(d as u32);
    let mut x = vec![S::zero(); d];
    let mut worst = S::zero();
    for idx in 0..total {
        let mut rest = idx;
        for (a, v) in x.iter_mut().enumerate() {
            let shift = S::lit(0.013 * (a as f64 + 1.0));
            *v = S::from_usize_lossy(rest % per_axis) / S::from_usize_lossy(per_axis) + shift;
            rest /= per_axis;
        }
        let mut lhs = derivs[0].eval(&x);
        for i in 0..m {
            lhs += spec.omega[i] * derivs[1 + i].eval(&x);
        }
        let rhs = g.eval(&x) - h1.v.eval(&x[1 + m..]);
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Mode table of `f` with the small divisors, and the homological residual.
pub fn averaging_report<S: Scalar>(
    spec: &HamiltonianSpec<S>,
    h1: &NormalFormH1<S>,
    tol: f64,
) -> CertificateReport {
    let mut rep = CertificateReport::new("averaging");
    rep.check_le(
        "homological_residual",
        homological_residual(spec, h1, 16).f64(),
        tol,
    );
    let table: Vec<serde_json::Value> = h1
        .f()
        .modes()
        .iter()
        .map(|md| {
            let div = h1.hom.divisors.iter().find(|e| e.k == md.k).map(|e| e.divisor.f64());
            serde_json::json!({ "k": md.k, "cos": md.cos.f64(), "sin": md.sin.f64(), "divisor": div })
        })
        .collect();
    rep.record("f_modes", table);
    rep.record("smallest_divisor", h1.hom.smallest_divisor.f64());
    let v: Vec<serde_json::Value> =
        h1.v.modes()
            .iter()
            .map(|md| serde_json::json!({ "k": md.k, "cos": md.cos.f64(), "sin": md.sin.f64() }))
            .collect();
    rep.record("v_modes", v);
    rep
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub epsilon: f64,
    pub sup_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemainderSweep {
    pub rows: Vec<RemainderRow>,
    /// Least-squares slope of `log s` against `log ε`; absent when `s ≡ 0`.
    pub fitted_slope: Option<f64>,
    pub report: CertificateReport,
}

pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Measures `s(ε) = sup |H₁ − (h − ε²V − ε²R + ε²·drift)|` over a fixed
/// random sample with `‖p − p₀‖_∞ ≤ delta` and fits its order in `ε`.
pub fn remainder_order_sweep<S: Scalar>(
    spec: &HamiltonianSpec<S>,
    epsilons: &[S],
    delta: S,
    samples: usize,
    seed: u64,
) -> Result<RemainderSweep> {
    let h1 = NormalFormH1::new(spec)?;
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(S, Vec<S>, Vec<S>)> = (0..samples)
        .map(|_| {
            let t = S::lit(rng.gen::<f64>());
            let q = (0..n).map(|_| S::lit(rng.gen::<f64>())).collect();
            let p = spec
                .p0
                .iter()
                .map(|&c| c + delta * S::lit(rng.gen_range(-1.0..=1.0)))
                .collect();
            (t, q, p)
        })
        .collect();
    let mut rows = Vec::new();
    for &eps in epsilons {
        let h = h1.with_epsilon(eps);
        let sup = pts
            .iter()
            .map(|(t, q, p)| h.model_residual(*t, q, p).abs())
            .fold(S::zero(), S::max);
        rows.push(RemainderRow {
            epsilon: eps.f64(),
            sup_residual: sup.f64(),
        });
    }
    let mut rep = CertificateReport::new("remainder_order");
    rep.record("samples", samples);
    rep.record("seed", seed);
    rep.record("rows", &rows);
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sup_residual).collect();
    let exact = ys.iter().all(|&y| y <= 1e-15);
    let fitted_slope = if exact {
        rep.check_holds("remainder_identically_zero", true, None);
        None
    } else if ys.iter().any(|&y| y <= 0.0) {
        rep.check_holds(
            "remainder_positive",
            false,
            Some("zero residual at some ε".into()),
        );
        None
    } else {
        let slope = fit_loglog(&xs, &ys);
        rep.check_ge("fitted_slope", slope, 3.5);
        let ratios: Vec<f64> = ys.windows(2).map(|w| w[0] / w[1]).collect();
        rep.record("successive_ratios", &ratios);
        Some(slope)
    };
    rep.record("fitted_slope", fitted_slope);
    Ok(RemainderSweep {
        rows,
        fitted_slope,
        report: rep,
    })
}
