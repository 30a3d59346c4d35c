//! The near-integrable system `H(t,q,p) = h(p) − ε²G(t,q,p)`, its resonance
//! geometry and the averaged objects built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{torus_average, FourierSeries, ModalSeries, ModalTerm, Poly2, TrigMode};
use crate::linalg::Mat;
use crate::polynomial::Polynomial;
use crate::report::CertificateReport;
use crate::scalar::{norm_inf, Scalar};

/// Residual tolerance for the resonance condition `∂h(p₀) = (ω, 0)`.
pub const TOL_RESONANCE: f64 = 1e-10;
/// Residual tolerance for `∂_{p₂}h(p₁, P₂(p₁)) = 0`.
pub const TOL_NEWTON: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// Tolerance for `∂V(0) = 0`.
pub const TOL_CRITICAL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec<S> {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub h: Polynomial<S>,
    /// Perturbation on `(t, q₁…, q₂…)` with coefficients polynomial in `p − p₀`.
    pub g: ModalSeries<S>,
    pub p0: Vec<S>,
    pub omega: Vec<S>,
    pub epsilon: S,
}

/// Variable names for `(t, q)`.
pub fn angle_names(m: usize, r: usize) -> Vec<String> {
    let mut v = vec!["t".to_string()];
    v.extend((0..m).map(|i| format!("q1_{i}")));
    v.extend((0..r).map(|i| format!("q2_{i}")));
    v
}

pub fn slow_angle_names(r: usize) -> Vec<String> {
    (0..r).map(|i| format!("q2_{i}")).collect()
}

impl<S: Scalar> HamiltonianSpec<S> {
    /// Validates dimensions and the resonance condition.
    pub fn new(
        m: usize,
        r: usize,
        h: Polynomial<S>,
        g: ModalSeries<S>,
        p0: Vec<S>,
        omega: Vec<S>,
        epsilon: S,
    ) -> Result<Self> {
        let spec = Self {
            n: m + r,
            m,
            r,
            h,
            g,
            p0,
            omega,
            epsilon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if self.m + self.r != n || self.m == 0 || self.r == 0 {
            return Err(Error::Config(format!(
                "resonance split m = {}, r = {} does not add up to n = {n} with m, r ≥ 1",
                self.m, self.r
            )));
        }
        if self.h.nvars() != n || self.p0.len() != n || self.omega.len() != self.m {
            return Err(Error::Dimension(
                "h, p0 and omega must match (n, n, m)".into(),
            ));
        }
        if self.g.dims().len() != n + 1 || self.g.p_ref().len() != n {
            return Err(Error::Dimension(
                "G must be a series on (t, q) with coefficients in p".into(),
            ));
        }
        if self.g.p_ref() != self.p0.as_slice() {
            return Err(Error::Config(
                "G's coefficient polynomials must be centred at p0".into(),
            ));
        }
        if !(self.epsilon >= S::zero()) {
            return Err(Error::Config("epsilon must be non-negative".into()));
        }
        let res = self.resonance_residual();
        if res > S::lit(TOL_RESONANCE) {
            return Err(Error::Config(format!(
                "∂h(p0) differs from (omega, 0) by {:e}",
                res.f64()
            )));
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: S) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    /// `‖∂h(p₀) − (ω, 0)‖_∞`.
    pub fn resonance_residual(&self) -> S {
        let g = self.h.gradient(&self.p0);
        let target: Vec<S> = self
            .omega
            .iter()
            .copied()
            .chain(std::iter::repeat(S::zero()).take(self.r))
            .collect();
        let diff: Vec<S> = g.iter().zip(&target).map(|(&a, &b)| a - b).collect();
        norm_inf(&diff)
    }

    pub fn p1_ref(&self) -> &[S] {
        &self.p0[..self.m]
    }

    pub fn p2_ref(&self) -> &[S] {
        &self.p0[self.m..]
    }

    /// Joins `(p₁, p₂)`.
    pub fn join(&self, a: &[S], b: &[S]) -> Vec<S> {
        a.iter().chain(b).copied().collect()
    }

    /// `R(t,q,p) = G(t,q,p) − G(t,q,p₀)`.
    pub fn remainder(&self, tq: &[S], p: &[S]) -> S {
        self.g.eval(tq, p) - self.g.eval(tq, &self.p0)
    }

    pub fn hamiltonian(&self, t: S, q: &[S], p: &[S]) -> S {
        let tq: Vec<S> = std::iter::once(t).chain(q.iter().copied()).collect();
        let e2 = self.epsilon * self.epsilon;
        self.h.eval(p) - e2 * self.g.eval(&tq, p)
    }
}

/// `V(q₂) = ∫ G(t, q₁, q₂, p₀) dt dq₁`, by exact extraction of the modes
/// with `k_t = 0` and `k_{q₁} = 0`.
pub fn average_potential<S: Scalar>(spec: &HamiltonianSpec<S>) -> Result<FourierSeries<S>> {
    let g0 = spec.g.at_reference();
    let m = spec.m;
    let modes = g0
        .modes()
        .iter()
        .filter(|md| md.k[..=m].iter().all(|&k| k == 0))
        .map(|md| TrigMode {
            k: md.k[m + 1..].to_vec(),
            cos: md.cos,
            sin: md.sin,
        });
    FourierSeries::from_modes(slow_angle_names(spec.r), modes)
}

/// Averages an arbitrary function `g(t, q₁, q₂)` over `(t, q₁)` on an
/// `n_avg^{1+m}` grid at each point of an `n_q2^r` grid in `q₂`, then fits
/// the trigonometric interpolant in `q₂`.
///
/// Fails when `g` is not one-periodic in one of the declared variables.
pub fn average_potential_sampled<S: Scalar>(
    m: usize,
    r: usize,
    n_avg: usize,
    n_q2: usize,
    g: impl Fn(&[S]) -> S,
) -> Result<FourierSeries<S>> {
    let names = angle_names(m, r);
    let fast: Vec<String> = names[..=m].to_vec();
    let total = n_q2.pow(r as u32);
    let h = S::one() / S::from_usize_lossy(n_q2);
    let mut samples = Vec::with_capacity(total);
    let mut grid_pts = Vec::with_capacity(total);
    for lin in 0..total {
        let mut idx = lin;
        let mut q2 = vec![S::zero(); r];
        for slot in q2.iter_mut().rev() {
            *slot = S::from_usize_lossy(idx % n_q2) * h;
            idx /= n_q2;
        }
        let avg = torus_average(&fast, n_avg, |x: &[S]| {
            let full: Vec<S> = x.iter().chain(&q2).copied().collect();
            g(&full)
        })?;
        samples.push(avg);
        grid_pts.push(q2);
    }
    for (axis, name) in names[m + 1..].iter().enumerate() {
        let mut x: Vec<S> = (0..=m + r).map(|i| S::lit(0.3 + 0.17 * i as f64)).collect();
        let a = g(&x);
        x[m + 1 + axis] += S::one();
        if (a - g(&x)).abs() > S::lit(1e3) * S::epsilon() * (S::one() + a.abs()) {
            return Err(Error::NotPeriodic(name.clone()));
        }
    }
    // Discrete Fourier coefficients for |k_i| < n_q2 / 2.
    let kmax = ((n_q2 - 1) / 2) as i32;
    let span = (2 * kmax + 1) as usize;
    let mut modes = Vec::new();
    for lin in 0..span.pow(r as u32) {
        let mut idx = lin;
        let mut k = vec![0i32; r];
        for slot in k.iter_mut().rev() {
            *slot = (idx % span) as i32 - kmax;
            idx /= span;
        }
        let (canon, _) = crate::fourier::canonical_mode(&k);
        if canon != k {
            continue;
        }
        let zero = k.iter().all(|&x| x == 0);
        let mut c = S::zero();
        let mut s = S::zero();
        for (q2, &v) in grid_pts.iter().zip(&samples) {
            let th = S::TAU()
                * k.iter()
                    .zip(q2)
                    .map(|(&ki, &x)| S::from_int(ki as i64) * x)
                    .sum::<S>();
            c += v * th.cos();
            s += v * th.sin();
        }
        let w = if zero { S::one() } else { S::lit(2.0) } / S::from_usize_lossy(total);
        let (c, s) = (c * w, s * w);
        let tiny = S::lit(1e-14);
        if c.abs() > tiny || s.abs() > tiny {
            modes.push(TrigMode { k, cos: c, sin: s });
        }
    }
    FourierSeries::from_modes(slow_angle_names(r), modes)
}

/// Solves `∂_{p₂}h(p₁, p₂) = 0` by Newton's method started at `p₂⁰`.
pub fn solve_p2<S: Scalar>(spec: &HamiltonianSpec<S>, p1: &[S]) -> Result<Vec<S>> {
    solve_p2_from(spec, p1, spec.p2_ref())
}

pub fn solve_p2_from<S: Scalar>(
    spec: &HamiltonianSpec<S>,
    p1: &[S],
    start: &[S],
) -> Result<Vec<S>> {
    let (m, r, n) = (spec.m, spec.r, spec.n);
    let mut p = spec.join(p1, start);
    let mut grad = vec![S::zero(); n];
    let mut hess = vec![S::zero(); n * n];
    let mut residual = S::infinity();
    for _ in 0..NEWTON_MAX_ITER {
        spec.h.gradient_into(&p, &mut grad);
        residual = norm_inf(&grad[m..]);
        if residual <= S::lit(TOL_NEWTON) {
            return Ok(p[m..].to_vec());
        }
        spec.h.hessian_into(&p, &mut hess);
        let mut block = Mat::zeros(r, r);
        for i in 0..r {
            for j in 0..r {
                block[(i, j)] = hess[(m + i) * n + m + j];
            }
        }
        let step = block.solve(&grad[m..]).map_err(|_| Error::NoConvergence {
            what: "P2".into(),
            iterations: 0,
            residual: residual.f64(),
        })?;
        for i in 0..r {
            p[m + i] -= step[i];
        }
    }
    spec.h.gradient_into(&p, &mut grad);
    residual = residual.min(norm_inf(&grad[m..]));
    if residual <= S::lit(TOL_NEWTON) {
        return Ok(p[m..].to_vec());
    }
    Err(Error::NoConvergence {
        what: "P2".into(),
        iterations: NEWTON_MAX_ITER,
        residual: residual.f64(),
    })
}

/// Averaged objects attached to a [`HamiltonianSpec`].
#[derive(Clone, Debug)]
pub struct AveragedData<S> {
    pub spec: HamiltonianSpec<S>,
    pub v: FourierSeries<S>,
    /// `∂²V(0)`; positive definiteness is certified by [`check_hypotheses`].
    pub a: Mat<S>,
}

impl<S: Scalar> AveragedData<S> {
    pub fn new(spec: &HamiltonianSpec<S>) -> Result<Self> {
        let v = average_potential(spec)?;
        let r = spec.r;
        let jet = v.jet(&vec![S::zero(); r], 2);
        let a = Mat::from_row_slice(r, r, &jet.hess);
        Ok(Self {
            spec: spec.clone(),
            v,
            a,
        })
    }

    pub fn p2(&self, p1: &[S]) -> Result<Vec<S>> {
        solve_p2(&self.spec, p1)
    }

    /// Full momentum `(p₁, P₂(p₁))`.
    pub fn on_cylinder(&self, p1: &[S]) -> Result<Vec<S>> {
        Ok(self.spec.join(p1, &self.p2(p1)?))
    }

    fn hessian_blocks(&self, p1: &[S]) -> Result<(Mat<S>, Mat<S>, Mat<S>)> {
        let (m, r) = (self.spec.m, self.spec.r);
        let p = self.on_cylinder(p1)?;
        let h = self.spec.h.hessian(&p);
        let mut h11 = Mat::zeros(m, m);
        let mut h12 = Mat::zeros(m, r);
        let mut h22 = Mat::zeros(r, r);
        for i in 0..m {
            for j in 0..m {
                h11[(i, j)] = h[(i, j)];
            }
            for j in 0..r {
                h12[(i, j)] = h[(i, m + j)];
            }
        }
        for i in 0..r {
            for j in 0..r {
                h22[(i, j)] = h[(m + i, m + j)];
            }
        }
        Ok((h11, h12, h22))
    }

    /// `B(p₁) = ∂²_{p₂}h(p₁, P₂(p₁))`.
    pub fn b(&self, p1: &[S]) -> Result<Mat<S>> {
        Ok(self.hessian_blocks(p1)?.2)
    }

    /// `∂P₂/∂p₁ = −(∂²_{p₂}h)⁻¹ ∂_{p₂}∂_{p₁}h`, an `r×m` matrix.
    pub fn dp2(&self, p1: &[S]) -> Result<Mat<S>> {
        let (_, h12, h22) = self.hessian_blocks(p1)?;
        let rhs = h12.transpose();
        let inv = h22.inverse()?;
        Ok((&inv * &rhs).scale(-S::one()))
    }

    /// `h₀(p₁) = h(p₁, P₂(p₁))`.
    pub fn h0(&self, p1: &[S]) -> Result<S> {
        Ok(self.spec.h.eval(&self.on_cylinder(p1)?))
    }

    /// Frequency map `Ω₀(p₁) = ∂_{p₁}h(p₁, P₂(p₁))`.
    pub fn omega0(&self, p1: &[S]) -> Result<Vec<S>> {
        let p = self.on_cylinder(p1)?;
        Ok(self.spec.h.gradient(&p)[..self.spec.m].to_vec())
    }

    /// Torsion `∂_{p₁}Ω₀`, the Schur complement `h₁₁ − h₁₂ h₂₂⁻¹ h₂₁`.
    pub fn torsion(&self, p1: &[S]) -> Result<Mat<S>> {
        let (h11, h12, h22) = self.hessian_blocks(p1)?;
        let inv = h22.inverse()?;
        let corr = &(&h12 * &inv) * &h12.transpose();
        Ok(&h11 - &corr)
    }
}

/// Points of the working ball `‖p₁ − p₁⁰‖_∞ ≤ δ` on a tensor grid with `per_axis`
/// points along each axis.
pub fn ball_samples<S: Scalar>(center: &[S], radius: S, per_axis: usize) -> Vec<Vec<S>> {
    let m = center.len();
    let total = per_axis.pow(m as u32);
    (0..total)
        .map(|lin| {
            let mut idx = lin;
            let mut p = center.to_vec();
            for slot in p.iter_mut().rev() {
                let j = idx % per_axis;
                idx /= per_axis;
                let u = if per_axis == 1 {
                    S::zero()
                } else {
                    S::lit(-1.0)
                        + S::lit(2.0) * S::from_usize_lossy(j) / S::from_usize_lossy(per_axis - 1)
                };
                *slot += radius * u;
            }
            p
        })
        .collect()
}

/// Certifies the non-degeneracy hypotheses on the working ball of radius `delta`.
pub fn check_hypotheses<S: Scalar>(spec: &HamiltonianSpec<S>, delta: S) -> CertificateReport {
    let mut rep = CertificateReport::new("hypotheses");
    rep.check_le(
        "resonance_residual",
        spec.resonance_residual().f64(),
        TOL_RESONANCE,
    );
    let avg = match AveragedData::new(spec) {
        Ok(a) => a,
        Err(e) => {
            rep.check_holds("averaging", false, Some(e.to_string()));
            return rep;
        }
    };
    let (m, r) = (spec.m, spec.r);
    let samples = ball_samples(spec.p1_ref(), delta, 9);

    // Convexity of h over the ball, sampled around the resonant surface.
    let mut min_hess = f64::INFINITY;
    let offsets = ball_samples(&vec![S::zero(); r], delta, 3);
    for p1 in &samples {
        let p2 = solve_p2(spec, p1).unwrap_or_else(|_| spec.p2_ref().to_vec());
        for off in &offsets {
            let p2o: Vec<S> = p2.iter().zip(off).map(|(&a, &b)| a + b).collect();
            let (vals, _) = spec.h.hessian(&spec.join(p1, &p2o)).symmetric_eigen();
            min_hess = min_hess.min(vals[0].f64());
        }
    }
    rep.record("min_hessian_eigenvalue", min_hess);
    if !rep.check_gt("hessian_min_eigenvalue", min_hess, 0.0) {
        rep.with_detail("Hessian not positive definite");
    }

    let crit = norm_inf(&avg.v.gradient(&vec![S::zero(); r])).f64();
    rep.check_le("critical_point_residual", crit, TOL_CRITICAL);

    let (a_vals, _) = avg.a.symmetric_eigen();
    let a_vals: Vec<f64> = a_vals.iter().map(|v| v.f64()).collect();
    rep.record("a_eigenvalues", &a_vals);
    if !rep.check_gt("a_min_eigenvalue", a_vals[0], 0.0) {
        rep.with_detail("A not positive definite");
    }

    let mut min_b = f64::INFINITY;
    let mut newton_ok = true;
    for p1 in &samples {
        match avg.b(p1) {
            Ok(b) => min_b = min_b.min(b.symmetric_eigen().0[0].f64()),
            Err(_) => newton_ok = false,
        }
    }
    rep.check_holds("p2_newton_converged", newton_ok, None);
    rep.record("min_b_eigenvalue", min_b);
    if !rep.check_gt("b_min_eigenvalue", min_b, 0.0) {
        rep.with_detail("B not positive definite");
    }
    rep.record("m", m);
    rep.record("r", r);
    rep
}

/// Outcome of a brute-force small-divisor scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorScan {
    pub passed: bool,
    /// Smallest `|k₀ + k·ω|·|k|^τ` and the mode `(k₀, k)` attaining it.
    pub smallest_normalized: f64,
    pub normalized_mode: (i64, Vec<i64>),
    /// Smallest raw divisor `|k₀ + k·ω|` and its mode.
    pub smallest_raw: f64,
    pub raw_mode: (i64, Vec<i64>),
    /// First mode violating the bound, in scan order.
    pub offending: Option<(i64, Vec<i64>)>,
}

/// Enumerates `k ∈ Z^m`, `0 < |k|₁ ≤ kmax`, up to sign, in order of `|k|₁`.
fn wave_vectors(m: usize, kmax: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for norm in 1..=kmax {
        let mut acc = Vec::new();
        enumerate_l1(m, norm, &mut Vec::new(), &mut acc);
        acc.retain(|k| k.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0));
        acc.sort();
        out.extend(acc);
    }
    out
}

fn enumerate_l1(m: usize, remaining: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    if prefix.len() == m - 1 {
        for v in [remaining, -remaining] {
            let mut k = prefix.clone();
            k.push(v);
            if !out.contains(&k) {
                out.push(k);
            }
        }
        return;
    }
    for v in -remaining..=remaining {
        prefix.push(v);
        enumerate_l1(m, remaining - v.abs(), prefix, out);
        prefix.pop();
    }
}

pub fn diophantine_scan(omega: &[f64], gamma: f64, tau: f64, kmax: i64) -> DivisorScan {
    let om_norm = omega.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let k0max = (kmax as f64 * (1.0 + om_norm)).ceil() as i64;
    let mut scan = DivisorScan {
        passed: true,
        smallest_normalized: f64::INFINITY,
        normalized_mode: (0, vec![]),
        smallest_raw: f64::INFINITY,
        raw_mode: (0, vec![]),
        offending: None,
    };
    for k in wave_vectors(omega.len(), kmax) {
        let kw: f64 = k.iter().zip(omega).map(|(&a, &b)| a as f64 * b).sum();
        let kn = k.iter().map(|x| x.abs()).sum::<i64>() as f64;
        for k0 in -k0max..=k0max {
            let div = (k0 as f64 + kw).abs();
            let normalized = div * kn.powf(tau);
            if div < scan.smallest_raw {
                scan.smallest_raw = div;
                scan.raw_mode = (k0, k.clone());
            }
            if normalized < scan.smallest_normalized {
                scan.smallest_normalized = normalized;
                scan.normalized_mode = (k0, k.clone());
            }
            if normalized < gamma && scan.offending.is_none() {
                scan.passed = false;
                scan.offending = Some((k0, k.clone()));
            }
        }
    }
    scan
}

/// Verifies `|k₀ + k·ω| ≥ γ/|k|^τ` for `0 < |k| ≤ kmax`.
pub fn diophantine_check(omega: &[f64], gamma: f64, tau: f64, kmax: i64) -> CertificateReport {
    let scan = diophantine_scan(omega, gamma, tau, kmax);
    let mut rep = CertificateReport::new("diophantine");
    rep.record("gamma", gamma);
    rep.record("tau", tau);
    rep.record("kmax", kmax);
    rep.record("smallest_raw_divisor", scan.smallest_raw);
    rep.record("raw_mode", &scan.raw_mode);
    rep.record("normalized_mode", &scan.normalized_mode);
    rep.check_ge(
        "smallest_normalized_divisor",
        scan.smallest_normalized,
        gamma,
    );
    if let Some(mode) = &scan.offending {
        rep.with_detail(format!(
            "resonance within truncation at (k0, k) = ({}, {:?})",
            mode.0, mode.1
        ));
        rep.record("offending_mode", mode);
    }
    rep
}

/// Built-in scenario family used by the tests and the CLI.
pub mod builtin {
    use super::*;

    pub fn golden_mean<S: Scalar>() -> S {
        (S::lit(5.0).sqrt() - S::one()) / S::lit(2.0)
    }

    fn mode<S: Scalar>(k: [i32; 3], c: S, n: usize) -> ModalTerm<S> {
        ModalTerm {
            k: k.to_vec(),
            cos: Poly2::constant(c, n),
            sin: Poly2::constant(S::zero(), n),
        }
    }

    /// `h = ½|p|²` on `T¹ × T¹`, `ω = (√5 − 1)/2`, `p₀ = (ω, 0)` and
    ///
    /// `G = (1 − cos 2πq₂)(1 + μ cos 2πt cos 2πq₁) + μ(p₁ − ω) sin 2πq₂ cos 2π(t − q₁)`.
    ///
    /// The momentum-dependent term vanishes at `p₀`, so `V`, the
    /// homological solution and the divisor table only see the first
    /// product. Without it the product vanishes to second order at
    /// `q₂ = 0` and the averaged cylinder stays exactly invariant.
    pub fn pendulum_cylinder<S: Scalar>(mu: S, epsilon: S) -> HamiltonianSpec<S> {
        let n = 2;
        let om = golden_mean::<S>();
        let half = S::lit(0.5);
        let quarter = S::lit(0.25);
        let mut terms = vec![mode([0, 0, 0], S::one(), n), mode([0, 0, 1], -S::one(), n)];
        if mu != S::zero() {
            terms.push(mode([1, 1, 0], half * mu, n));
            terms.push(mode([1, -1, 0], half * mu, n));
            for k in [[1, 1, 1], [1, 1, -1], [1, -1, 1], [1, -1, -1]] {
                terms.push(mode(k, -quarter * mu, n));
            }
            // μ(p₁ − ω)·sin 2πq₂·cos 2π(t − q₁) = ½μ(p₁ − ω)[sin 2π(t − q₁ + q₂) − sin 2π(t − q₁ − q₂)]
            let lin = |c: S| Poly2 {
                c0: S::zero(),
                c1: vec![c, S::zero()],
                c2: vec![S::zero(); 4],
            };
            terms.push(ModalTerm {
                k: vec![1, -1, 1],
                cos: Poly2::constant(S::zero(), n),
                sin: lin(half * mu),
            });
            terms.push(ModalTerm {
                k: vec![1, -1, -1],
                cos: Poly2::constant(S::zero(), n),
                sin: lin(-half * mu),
            });
        }
        let p0 = vec![om, S::zero()];
        let g = ModalSeries::new(angle_names(1, 1), p0.clone(), terms).expect("well-formed modes");
        HamiltonianSpec::new(1, 1, Polynomial::kinetic(2), g, p0, vec![om], epsilon)
            .expect("builtin scenario is consistent")
    }

    /// The μ = 0 member: `G = 1 − cos 2πq₂`.
    pub fn unperturbed<S: Scalar>(epsilon: S) -> HamiltonianSpec<S> {
        pendulum_cylinder(S::zero(), epsilon)
    }

    /// Replaces the perturbation of a scenario by a momentum-independent series.
    pub fn with_potential<S: Scalar>(
        base: &HamiltonianSpec<S>,
        g: &FourierSeries<S>,
    ) -> HamiltonianSpec<S> {
        HamiltonianSpec {
            g: ModalSeries::from_series(g, base.p0.clone()),
            ..base.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::builtin::*;
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn names3() -> Vec<String> {
        angle_names(1, 1)
    }

    fn series(modes: &[([i32; 3], f64, f64)]) -> FourierSeries<f64> {
        FourierSeries::from_modes(
            names3(),
            modes.iter().map(|&(k, c, s)| TrigMode {
                k: k.to_vec(),
                cos: c,
                sin: s,
            }),
        )
        .unwrap()
    }

    #[test]
    fn pendulum_average_matches_quadrature() {
        let spec = pendulum_cylinder::<f64>(0.3, 0.05);
        let v = average_potential(&spec).unwrap();
        // Oracle: 64×64 tensor rectangle rule in (t, q₁) at a few q₂.
        let g0 = |t: f64, q1: f64, q2: f64| {
            (1.0 - (TAU * q2).cos()) * (1.0 + 0.3 * (TAU * t).cos() * (TAU * q1).cos())
        };
        for &q2 in &[0.0, 0.13, 0.4, 0.77] {
            let mut acc = 0.0;
            for i in 0..64 {
                for j in 0..64 {
                    acc += g0(i as f64 / 64.0, j as f64 / 64.0, q2);
                }
            }
            acc /= 4096.0;
            assert!((v.eval(&[q2]) - acc).abs() < 1e-12);
            assert!((v.eval(&[q2]) - (1.0 - (TAU * q2).cos())).abs() < 1e-14);
        }
    }

    #[test]
    fn averaging_trivial_cases() {
        let base = unperturbed::<f64>(0.1);
        let invariant = series(&[([0, 0, 1], 0.5, 0.2), ([0, 0, 2], 0.1, 0.0)]);
        let v = average_potential(&with_potential(&base, &invariant)).unwrap();
        for &q in &[0.1, 0.6] {
            assert!((v.eval(&[q]) - invariant.eval(&[0.3, 0.9, q])).abs() < 1e-15);
        }
        let zero_mean = series(&[([1, 0, 1], 0.5, 0.0), ([1, 0, -1], 0.5, 0.0)]);
        let v = average_potential(&with_potential(&base, &zero_mean)).unwrap();
        assert!(v.is_zero());
    }

    #[test]
    fn sampled_average_agrees_with_mode_extraction() {
        let spec = pendulum_cylinder::<f64>(0.3, 0.05);
        let exact = average_potential(&spec).unwrap();
        let g0 = spec.g.at_reference();
        let sampled = average_potential_sampled::<f64>(1, 1, 16, 9, |x| g0.eval(x)).unwrap();
        for &q in &[0.05, 0.31, 0.92] {
            assert!((sampled.eval(&[q]) - exact.eval(&[q])).abs() < 1e-10);
        }
        let err = average_potential_sampled::<f64>(1, 1, 8, 5, |x| x[2]).unwrap_err();
        assert!(matches!(err, Error::NotPeriodic(_)));
    }

    fn spec_with_h(h: Polynomial<f64>, p0: Vec<f64>, omega: f64) -> HamiltonianSpec<f64> {
        let g = ModalSeries::from_series(
            &series(&[([0, 0, 0], 1.0, 0.0), ([0, 0, 1], -1.0, 0.0)]),
            p0.clone(),
        );
        HamiltonianSpec::new(1, 1, h, g, p0, vec![omega], 0.05).unwrap()
    }

    #[test]
    fn p2_trivial_for_kinetic_energy() {
        let spec = unperturbed::<f64>(0.05);
        for &p1 in &[0.4, 0.618, 0.8] {
            assert_eq!(solve_p2(&spec, &[p1]).unwrap(), vec![0.0]);
        }
    }

    #[test]
    fn p2_sheared_closed_form() {
        // h = ½p₁² + ½(p₂ − 0.7 p₁)²; P₂ = 0.7 p₁, ∂h(p₀) = (p₁⁰, 0) at p₀ = (ω, 0.7ω).
        let c = 0.7;
        let m = Mat::from_rows(&[vec![1.0 + c * c, -c], vec![-c, 1.0]]);
        let om = golden_mean::<f64>();
        let spec = spec_with_h(Polynomial::quadratic_form(&m), vec![om, c * om], om);
        for &p1 in &[0.3, 0.5, 0.9] {
            let p2 = solve_p2(&spec, &[p1]).unwrap();
            assert!((p2[0] - c * p1).abs() < 1e-12);
        }
        let avg = AveragedData::new(&spec).unwrap();
        // Ω₀(p₁) = p₁, torsion 1.
        assert!((avg.omega0(&[0.55]).unwrap()[0] - 0.55).abs() < 1e-12);
        assert!((avg.torsion(&[0.55]).unwrap()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p2_cubic_residual_and_implicit_derivative() {
        // h = ½p₁² + ½p₂² + 0.1p₂³ + 0.2 p₁ p₂² (so P₂ depends on p₁ only through the cubic).
        let mut h = Polynomial::kinetic(2);
        h.add_term(0.1, vec![0, 3]);
        h.add_term(0.2, vec![1, 2]);
        h.add_term(0.05, vec![1, 1]);
        let p1_0 = 0.5;
        let spec0 = HamiltonianSpec {
            n: 2,
            m: 1,
            r: 1,
            h: h.clone(),
            g: ModalSeries::from_series(&series(&[([0, 0, 1], -1.0, 0.0)]), vec![0.0, 0.0]),
            p0: vec![0.0, 0.0],
            omega: vec![0.0],
            epsilon: 0.05,
        };
        let p2_0 = solve_p2_from(&spec0, &[p1_0], &[0.0]).unwrap();
        let p0 = vec![p1_0, p2_0[0]];
        let om = h.gradient(&p0)[0];
        let g = ModalSeries::from_series(&series(&[([0, 0, 1], -1.0, 0.0)]), p0.clone());
        let spec = HamiltonianSpec::new(1, 1, h.clone(), g, p0, vec![om], 0.05).unwrap();
        let avg = AveragedData::new(&spec).unwrap();
        for &p1 in &[0.35, 0.5, 0.65] {
            let p2 = solve_p2(&spec, &[p1]).unwrap();
            let res = h.gradient(&[p1, p2[0]])[1];
            assert!(res.abs() <= 1e-12);
            let step = 1e-5;
            let fd = (solve_p2(&spec, &[p1 + step]).unwrap()[0]
                - solve_p2(&spec, &[p1 - step]).unwrap()[0])
                / (2.0 * step);
            assert!((fd - avg.dp2(&[p1]).unwrap()[(0, 0)]).abs() < 1e-6);
        }
    }

    #[test]
    fn hypotheses_pass_for_pendulum() {
        let spec = pendulum_cylinder::<f64>(0.3, 0.05);
        let rep = check_hypotheses(&spec, 0.2);
        assert!(rep.passed, "{}", rep.failure_summary());
        let a = rep.values["a_eigenvalues"][0].as_f64().unwrap();
        assert!((a - 4.0 * PI * PI).abs() < 1e-10);
        assert!((a - 39.478).abs() < 1e-3);
    }

    #[test]
    fn hypotheses_detect_wrong_sign_of_potential() {
        let base = unperturbed::<f64>(0.05);
        let flipped = series(&[([0, 0, 1], 1.0, 0.0)]);
        let rep = check_hypotheses(&with_potential(&base, &flipped), 0.2);
        assert!(!rep.passed);
        assert!(rep.failure_summary().contains("A not positive definite"));
    }

    #[test]
    fn hypotheses_detect_indefinite_hessian() {
        let m = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        let om = golden_mean::<f64>();
        let spec = spec_with_h(Polynomial::quadratic_form(&m), vec![om, 0.0], om);
        let rep = check_hypotheses(&spec, 0.2);
        assert!(!rep.passed);
        assert!(rep
            .failure_summary()
            .contains("Hessian not positive definite"));
    }

    #[test]
    fn golden_mean_is_diophantine() {
        let om = golden_mean::<f64>();
        let rep = diophantine_check(&[om], 0.2, 2.0, 50);
        assert!(rep.passed, "{}", rep.failure_summary());
        // Independent brute force over the same modes.
        let mut best = f64::INFINITY;
        for k in 1..=50i64 {
            for k0 in -100..=100i64 {
                best = best.min((k0 as f64 + k as f64 * om).abs() * (k as f64).powi(2));
            }
        }
        let got = rep
            .get_check("smallest_normalized_divisor")
            .unwrap()
            .measured;
        assert!((got - best).abs() < 1e-15);
    }

    #[test]
    fn exact_resonance_is_reported() {
        let scan = diophantine_scan(&[0.5], 0.01, 1.0, 2);
        assert!(!scan.passed);
        assert_eq!(scan.offending, Some((-1, vec![2])));
    }

    #[test]
    fn smallest_divisor_sits_on_fibonacci_denominators() {
        let fib = [1i64, 2, 3, 5, 8, 13, 21, 34, 55];
        let scan = diophantine_scan(&[golden_mean::<f64>()], 0.2, 2.0, 50);
        assert_eq!(scan.raw_mode.1, vec![34]);
        assert_eq!(scan.raw_mode.0, -21);
        assert!(fib.contains(&scan.normalized_mode.1[0]));
    }

    #[test]
    fn wave_vectors_in_two_dimensions() {
        let ks = wave_vectors(2, 2);
        // |k|₁ = 1: (0,1), (1,0); |k|₁ = 2: (0,2), (1,-1), (1,1), (2,0)
        assert_eq!(ks.len(), 6);
        assert!(ks.iter().all(|k| k.iter().find(|&&x| x != 0).unwrap() > &0));
    }

    #[test]
    fn resonance_condition_enforced() {
        let spec = unperturbed::<f64>(0.05);
        let mut bad = spec.clone();
        bad.omega = vec![0.5];
        assert!(bad.validate().is_err());
    }
}
