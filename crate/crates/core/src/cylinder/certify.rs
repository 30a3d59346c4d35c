//! A-posteriori certificates for a computed cylinder.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::averaging::NormalFormH1;
use crate::error::Result;
use crate::flow::Rk4;
use crate::hamiltonian::{Hamiltonian, PhaseJet, QuadraticModel};
use crate::linalg::Mat;
use crate::model::{AveragedData, HamiltonianSpec};
use crate::reduction::ReductionData;
use crate::report::CertificateReport;
use crate::scalar::{norm_inf, Scalar};

use super::graph::{wrap01, GraphFunction, InterpScratch, TensorField};
use super::scaled::ScaledChart;
use super::solve::split;

/// Result of [`invariance_residual`].
#[derive(Clone, Debug, Serialize)]
pub struct InvarianceResidual {
    /// Max over nodes with `‖p₁ − p₁⁰‖ ≤ inner_radius`.
    pub max: f64,
    /// Max over every checked node.
    pub max_all: f64,
    pub inner_radius: f64,
    pub nodes: usize,
    /// `(t, q₁…, p₁…)` of the worst inner node.
    pub argmax: Vec<f64>,
    pub h_step: f64,
}

/// Flows each checked node of the `H₁` graph for `h_step` and measures the
/// scaled normal distance `max(|Δx|, |Δy|)` to the graph at the advected base.
/// Every `stride`-th node along each axis is checked.
#[allow(clippy::too_many_arguments)]
pub fn invariance_residual<S: Scalar>(
    graph: &GraphFunction<S>,
    h1: &NormalFormH1<S>,
    red: &ReductionData<S>,
    epsilon: S,
    h_step: S,
    step: S,
    inner_radius: S,
    stride: usize,
) -> Result<InvarianceResidual> {
    let h1 = h1.with_epsilon(epsilon);
    let (m, r) = (graph.m, graph.r);
    let stride = stride.max(1);
    let center = red.avg.spec.p1_ref();
    let mut rk = Rk4::new(m + r);
    let mut scratch = InterpScratch::default();
    let mut buf = vec![S::zero(); 2 * r];
    let mut out = InvarianceResidual {
        max: 0.0,
        max_all: 0.0,
        inner_radius: inner_radius.f64(),
        nodes: 0,
        argmax: vec![],
        h_step: h_step.f64(),
    };
    for flat in 0..graph.len() {
        let idx = graph.field.grid.multi_index(flat);
        if idx.iter().any(|&k| k % stride != 0) {
            continue;
        }
        let (t, q1, p1) = graph.node(flat);
        let z0 = graph.phase_point(t, &q1, &p1);
        let mut z = z0.clone();
        let mut e = S::zero();
        rk.advance(&h1, t, t + h_step, &mut z, &mut e, step, None)?;
        let (bq, bp, q2, p2) = split(&z, m, r);
        graph.eval_into(t + h_step, &bq, &bp, &mut buf, &mut scratch);
        let frame = red.frame(&bp)?;
        let (x, y) = frame.to_xy(&q2, &p2, epsilon);
        let (xg, yg) = frame.to_xy(&buf[..r], &buf[r..], epsilon);
        let mut d = S::zero();
        for j in 0..r {
            d = d.max((x[j] - xg[j]).abs()).max((y[j] - yg[j]).abs());
        }
        let d = d.f64();
        out.nodes += 1;
        out.max_all = out.max_all.max(d);
        let inner =
            (0..m).all(|i| (p1[i] - center[i]).abs() <= inner_radius * (S::one() + S::lit(1e-12)));
        if inner && d >= out.max {
            out.max = d;
            out.argmax = GraphFunction::point(t, &q1, &p1)
                .iter()
                .map(|v| v.f64())
                .collect();
        }
    }
    Ok(out)
}

/// `‖f‖_{C0}` and the largest first derivative over the grid nodes, with
/// derivatives taken from the interpolant.
#[derive(Clone, Debug, Serialize)]
pub struct C1Norm {
    pub c0: f64,
    pub c0_at: Vec<f64>,
    /// Sup of each partial derivative, axes `(t, q₁…, p₁…)`.
    pub derivatives: Vec<f64>,
    pub c1: f64,
    pub c1_at: Vec<f64>,
}

fn c1_norm<S: Scalar>(f: &TensorField<S>) -> C1Norm {
    let mut out = C1Norm {
        c0: 0.0,
        c0_at: vec![],
        derivatives: vec![],
        c1: 0.0,
        c1_at: vec![],
    };
    let at = |flat: usize| {
        f.grid
            .node(flat)
            .iter()
            .map(|v| v.f64())
            .collect::<Vec<_>>()
    };
    for (i, v) in f.values.iter().enumerate() {
        if v.abs().f64() > out.c0 {
            out.c0 = v.abs().f64();
            out.c0_at = at(i / f.comps);
        }
    }
    out.c1 = out.c0;
    out.c1_at = out.c0_at.clone();
    for axis in 0..f.grid.ndims() {
        if f.grid.axes[axis].n == 1 {
            out.derivatives.push(0.0);
            continue;
        }
        let d = f.derivative_at_nodes(axis);
        let mut best = 0.0f64;
        for (i, v) in d.iter().enumerate() {
            let a = v.abs().f64();
            if a > best {
                best = a;
            }
            if a > out.c1 {
                out.c1 = a;
                out.c1_at = at(i / f.comps);
            }
        }
        out.derivatives.push(best);
    }
    out
}

/// Splits the graph of `H` into `Q₂` and `P₂ − P₂⁰` and measures C¹ norms.
pub fn graph_norms<S: Scalar>(
    graph: &GraphFunction<S>,
    avg: &AveragedData<S>,
) -> Result<(C1Norm, C1Norm)> {
    let r = graph.r;
    let mut q2 = TensorField::zeros(graph.field.grid.clone(), r);
    let mut dp2 = TensorField::zeros(graph.field.grid.clone(), r);
    for flat in 0..graph.len() {
        let (_, _, p1) = graph.node(flat);
        let p20 = avg.p2(&p1)?;
        let v = graph.field.node_values(flat);
        q2.node_values_mut(flat).copy_from_slice(&v[..r]);
        for j in 0..r {
            dp2.node_values_mut(flat)[j] = v[r + j] - p20[j];
        }
    }
    Ok((c1_norm(&q2), c1_norm(&dp2)))
}

/// Checks `ε‖Q₂^ε‖_{C1} ≤ κ` and `‖P₂^ε − P₂⁰‖_{C1} ≤ κ`, where
/// `‖f‖_{C1} = max(‖f‖_{C0}, maxᵢ‖∂ᵢf‖_{C0})` over `(t, q₁, p₁)`.
pub fn estimate_norms<S: Scalar>(
    graph: &GraphFunction<S>,
    avg: &AveragedData<S>,
    epsilon: S,
    kappa: S,
) -> Result<CertificateReport> {
    let (q2, dp2) = graph_norms(graph, avg)?;
    let mut rep = CertificateReport::new("norms");
    let e = epsilon.f64();
    let k = kappa.f64();
    rep.check_le("eps_q2_c1", e * q2.c1, k);
    rep.check_le("p2_c1", dp2.c1, k);
    rep.record("q2_c0", q2.c0);
    rep.record("q2_c1", q2.c1);
    rep.record("p2_c0", dp2.c0);
    rep.record("q2", &q2);
    rep.record("p2_deviation", &dp2);
    rep.record("kappa", k);
    Ok(rep)
}

/// Finite-time exponents along on-graph orbits, measured in the scaled
/// chart `(θ, r, x, y)`.
#[derive(Clone, Debug, Serialize)]
pub struct HyperbolicityCertificate {
    /// Expansion rate in τ-units (`min λ(D)` over `B`).
    pub a: f64,
    /// Same rate in t-units, `εa`.
    pub a_t: f64,
    /// C¹ bound of the principal slow field, `α·sup‖∂Ω₀‖`.
    pub b_principal: f64,
    /// Measured C¹ bound of the slow field along the graph.
    pub b_measured: f64,
    pub b: f64,
    /// Expected normal exponents `±ε·spec(D)` at `p₁⁰`, t-units.
    pub expected_normal: Vec<f64>,
    /// Per orbit: `r` expanding exponents then `r` contracting, t-units.
    pub normal_rates: Vec<Vec<f64>>,
    /// Per orbit: `2m` tangential exponents, t-units.
    pub tangential_rates: Vec<Vec<f64>>,
    pub horizon: f64,
    pub c0_bound_lhs: f64,
    pub c0_bound_rhs: f64,
}

impl HyperbolicityCertificate {
    pub fn max_normal_relative_error(&self) -> f64 {
        let r = self.expected_normal.len();
        let mut worst = 0.0f64;
        for orbit in &self.normal_rates {
            for i in 0..r {
                let want = self.expected_normal[r - 1 - i];
                worst = worst.max((orbit[i] - want).abs() / want.abs());
                let back = self.expected_normal[i];
                worst = worst.max((orbit[r + i] + back).abs() / back.abs());
            }
        }
        worst
    }

    pub fn max_tangential(&self) -> f64 {
        self.tangential_rates
            .iter()
            .flatten()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    pub fn report(&self, epsilon: f64) -> CertificateReport {
        let mut rep = CertificateReport::new("hyperbolicity");
        rep.check_gt("spectral_gap", self.a - self.b, 0.0);
        rep.check_le("b_over_a", self.b / self.a, 0.5);
        rep.check_le(
            "normal_relative_error",
            self.max_normal_relative_error(),
            0.2,
        );
        rep.check_le(
            "tangential_over_eps_b",
            self.max_tangential() / (epsilon * self.b),
            1.0,
        );
        rep.check_le("c0_bound", self.c0_bound_lhs, self.c0_bound_rhs);
        rep.record("certificate", self);
        rep
    }
}

/// Measures `b` as the largest operator norm of `∂(θ', r')/∂(θ, r)` along
/// the graph, by central differences of the base point.
pub fn slow_field_c1<S: Scalar>(
    graph: &GraphFunction<S>,
    h1: &NormalFormH1<S>,
    red: &ReductionData<S>,
    epsilon: S,
    per_axis: usize,
) -> Result<f64> {
    let h1 = h1.with_epsilon(epsilon);
    let (m, r) = (graph.m, graph.r);
    let n = m + r;
    let alpha = red.alpha;
    let center = red.avg.spec.p1_ref();
    let k = per_axis.max(2);
    let hq = S::lit(1e-5);
    let mut jet = PhaseJet::new(n);
    let mut slow = |t: S, q1: &[S], p1: &[S]| -> Vec<S> {
        let z = graph.phase_point(t, q1, p1);
        h1.jet(t, &z[..n], &z[n..], false, &mut jet);
        let mut s: Vec<S> = jet.dp[..m].iter().map(|&v| alpha * v).collect();
        s.extend(jet.dq[..m].iter().map(|&v| -v / epsilon));
        s
    };
    let mut best = S::zero();
    let total = (2 * k) * (2 * k).pow(m as u32) * k.pow(m as u32);
    for idx in 0..total {
        let it = idx % (2 * k);
        let mut rest = idx / (2 * k);
        let t = S::from_usize_lossy(it) / S::from_usize_lossy(2 * k);
        let mut q1 = vec![S::zero(); m];
        let mut p1 = vec![S::zero(); m];
        for i in 0..m {
            q1[i] = S::from_usize_lossy(rest % (2 * k)) / S::from_usize_lossy(2 * k);
            rest /= 2 * k;
        }
        for i in 0..m {
            let frac = S::from_usize_lossy(rest % k) / S::from_usize_lossy(k - 1);
            p1[i] = center[i] - graph.delta * S::lit(0.8) + S::lit(1.6) * graph.delta * frac;
            rest /= k;
        }
        let mut jac = Mat::zeros(2 * m, 2 * m);
        for j in 0..2 * m {
            let (mut qp, mut qm, mut pp, mut pm) = (q1.clone(), q1.clone(), p1.clone(), p1.clone());
            let scale = if j < m {
                qp[j] += hq;
                qm[j] -= hq;
                epsilon * alpha
            } else {
                pp[j - m] += hq;
                pm[j - m] -= hq;
                S::one()
            };
            let fp = slow(t, &qp, &pp);
            let fm = slow(t, &qm, &pm);
            for i in 0..2 * m {
                jac[(i, j)] = (fp[i] - fm[i]) / (S::lit(2.0) * hq * scale);
            }
        }
        best = best.max(jac.spectral_norm());
    }
    Ok(best.f64())
}

/// Benettin QR exponents along `n_orbits` orbits of `H₁` started on the
/// `t = 0` section; the base point is projected back onto the graph after
/// every period.
#[allow(clippy::too_many_arguments)]
pub fn hyperbolicity_rates<S: Scalar>(
    graph: &GraphFunction<S>,
    c0_bound: (f64, f64),
    h1: &NormalFormH1<S>,
    red: &ReductionData<S>,
    epsilon: S,
    n_orbits: usize,
    horizon: S,
    step: S,
    seed: u64,
) -> Result<HyperbolicityCertificate> {
    let h1e = h1.with_epsilon(epsilon);
    let (m, r) = (graph.m, graph.r);
    let n = m + r;
    let chart = ScaledChart::new(red, epsilon);
    let center = red.avg.spec.p1_ref().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let periods = horizon.ceil().to_usize().unwrap_or(1).max(1);
    let mut rk = Rk4::new(n);
    let mut normal_rates = Vec::new();
    let mut tangential_rates = Vec::new();
    for k in 0..n_orbits {
        let mut q1: Vec<S> = (0..m)
            .map(|_| S::lit((k as f64 + rng.gen::<f64>()) / n_orbits as f64))
            .collect();
        let mut p1: Vec<S> = center
            .iter()
            .map(|&c| c + graph.delta * S::lit(0.5 * (2.0 * rng.gen::<f64>() - 1.0)))
            .collect();
        // Columns start along (x, r, θ, y) so that QR keeps the normal
        // directions first and last.
        let mut q = Mat::<S>::zeros(2 * n, 2 * n);
        let order: Vec<usize> = (2 * m..2 * m + r)
            .chain(m..2 * m)
            .chain(0..m)
            .chain(2 * m + r..2 * n)
            .collect();
        for (col, &row) in order.iter().enumerate() {
            q[(row, col)] = S::one();
        }
        let mut sums = vec![S::zero(); 2 * n];
        let mut elapsed = 0usize;
        for _ in 0..periods {
            let z0 = graph.phase_point(S::zero(), &q1, &p1);
            let m0 = chart.jacobian(&z0)?;
            let mut z = z0.clone();
            let mut phi = Mat::<S>::identity(2 * n);
            let mut e = S::zero();
            rk.advance_tangent(
                &h1e,
                S::zero(),
                S::one(),
                &mut z,
                &mut e,
                phi.as_mut_slice(),
                step,
                None,
            )?;
            let m1 = chart.jacobian(&z)?;
            let a = &(&m1 * &phi) * &m0.inverse()?;
            let (qn, rn) = (&a * &q).qr();
            for i in 0..2 * n {
                sums[i] += rn[(i, i)].abs().ln();
            }
            q = qn;
            elapsed += 1;
            let (bq, bp, _, _) = split(&z, m, r);
            q1 = bq.into_iter().map(wrap01).collect();
            p1 = bp;
            if (0..m).any(|i| (p1[i] - center[i]).abs() > graph.delta) {
                break;
            }
        }
        let lam: Vec<f64> = sums.iter().map(|s| s.f64() / elapsed as f64).collect();
        let mut normal = lam[..r].to_vec();
        normal.extend_from_slice(&lam[2 * n - r..]);
        normal_rates.push(normal);
        tangential_rates.push(lam[r..2 * n - r].to_vec());
    }
    let d0 = red.d(&center)?;
    let expected_normal: Vec<f64> = d0
        .eigenvalues()
        .iter()
        .map(|&l| (epsilon * l).f64())
        .collect();
    let b_measured = slow_field_c1(graph, h1, red, epsilon, 4)?;
    let a = red.a_rate.f64();
    let b_principal = red.b_rate.f64();
    Ok(HyperbolicityCertificate {
        a,
        a_t: epsilon.f64() * a,
        b_principal,
        b_measured,
        b: b_principal.max(b_measured),
        expected_normal,
        normal_rates,
        tangential_rates,
        horizon: periods as f64,
        c0_bound_lhs: c0_bound.0,
        c0_bound_rhs: c0_bound.1,
    })
}

/// Settings of [`containment_test`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContainmentConfig {
    pub n_seeds: usize,
    /// Half-length of the time window, t-units.
    pub t_half: f64,
    pub tol_contain: f64,
    pub step: f64,
    pub seed: u64,
    /// Radius of the ball of seed momenta.
    pub seed_radius: f64,
}

/// Seeds orbits of `H` near the graph, keeps those that stay in
/// `𝒟^ε = {‖q₂‖ ≤ √δ, ‖p₁ − p₁⁰‖ ≤ δ, ‖p₂ − P₂(p₁)‖ ≤ ε}` over
/// `[−T_half, T_half]`, and certifies their distance to the graph at `t = 0`.
pub fn containment_test<S: Scalar>(
    graph: &GraphFunction<S>,
    spec: &HamiltonianSpec<S>,
    red: &ReductionData<S>,
    cfg: &ContainmentConfig,
) -> Result<CertificateReport> {
    let epsilon = spec.epsilon;
    let (m, r) = (graph.m, graph.r);
    let n = m + r;
    let delta = graph.delta;
    let center = spec.p1_ref().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rk = Rk4::new(n);
    let step = S::lit(cfg.step);
    let t_half = S::lit(cfg.t_half);
    let (count, dt) = crate::flow::step_plan(S::zero(), t_half, step);
    let sq = delta.sqrt();
    let inside = |z: &[S]| -> Result<bool> {
        let p1 = &z[n..n + m];
        if (0..m).any(|i| (p1[i] - center[i]).abs() > delta) || z.iter().any(|v| !v.is_finite()) {
            return Ok(false);
        }
        let p2s = red.avg.p2(p1)?;
        Ok(norm_inf(&z[m..n]) <= sq && (0..r).all(|j| (z[n + m + j] - p2s[j]).abs() <= epsilon))
    };
    let mut survivors = 0usize;
    let mut on_graph = (0usize, 0usize);
    let mut worst = 0.0f64;
    let mut largest_surviving_offset = 0.0f64;
    let mut smallest_escaping_offset = f64::INFINITY;
    for k in 0..cfg.n_seeds {
        let q1: Vec<S> = (0..m).map(|_| S::lit(rng.gen::<f64>())).collect();
        let p1: Vec<S> = center
            .iter()
            .map(|&c| c + S::lit(cfg.seed_radius * (2.0 * rng.gen::<f64>() - 1.0)))
            .collect();
        let exact = k % 4 == 0;
        let mag = if exact {
            0.0
        } else {
            10f64.powf(-8.0 + 7.0 * rng.gen::<f64>())
        };
        let dir: Vec<S> = (0..2 * r)
            .map(|_| S::lit(2.0 * rng.gen::<f64>() - 1.0))
            .collect();
        let frame = red.frame(&p1)?;
        let (dq, dp) = {
            let x: Vec<S> = dir[..r].iter().map(|&v| v * S::lit(mag)).collect();
            let y: Vec<S> = dir[r..].iter().map(|&v| v * S::lit(mag)).collect();
            let (q2, p2) = frame.from_xy(&x, &y, epsilon);
            let p2: Vec<S> = p2.iter().zip(&frame.p2).map(|(&a, &b)| a - b).collect();
            (q2, p2)
        };
        let mut z0 = graph.phase_point(S::zero(), &q1, &p1);
        for j in 0..r {
            z0[m + j] += dq[j];
            z0[n + m + j] += dp[j];
        }
        let mut stays = inside(&z0)?;
        for sign in [S::one(), -S::one()] {
            if !stays {
                break;
            }
            let mut y = z0.clone();
            y.push(S::zero());
            for i in 0..count {
                let t = sign * S::from_usize_lossy(i) * dt;
                rk.step(spec, t, sign * dt, &mut y, None);
                if !inside(&y[..2 * n])? {
                    stays = false;
                    break;
                }
            }
        }
        if exact {
            on_graph.0 += 1;
        }
        if stays {
            survivors += 1;
            if exact {
                on_graph.1 += 1;
            }
            let (gq, gp) = graph.eval(S::zero(), &q1, &p1);
            let mut d = S::zero();
            for j in 0..r {
                d = d
                    .max((z0[m + j] - gq[j]).abs())
                    .max((z0[n + m + j] - gp[j]).abs());
            }
            worst = worst.max(d.f64());
            largest_surviving_offset = largest_surviving_offset.max(mag);
        } else {
            smallest_escaping_offset = smallest_escaping_offset.min(mag);
        }
    }
    let mut rep = CertificateReport::new("containment");
    rep.check_le("max_survivor_distance", worst, cfg.tol_contain);
    rep.check_ge("survivors", survivors as f64, 1.0);
    rep.check_ge(
        "on_graph_survival_fraction",
        on_graph.1 as f64 / on_graph.0.max(1) as f64,
        1.0,
    );
    rep.record("seeds", cfg.n_seeds);
    rep.record("largest_surviving_offset", largest_surviving_offset);
    rep.record(
        "smallest_escaping_offset",
        if smallest_escaping_offset.is_finite() {
            smallest_escaping_offset
        } else {
            -1.0
        },
    );
    rep.record("config", cfg);
    Ok(rep)
}

/// Exit time of the averaged quadratic model from `‖x‖ ≤ 1, ‖y‖ ≤ 1`,
/// started at `x = 0.5·v`, `y = 0` with `v` the slowest eigenvector of `D`.
/// The linear prediction is `log 2 / (ε λ_min(D))`.
pub fn escape_time_check<S: Scalar>(
    red: &ReductionData<S>,
    epsilon: S,
    step: S,
) -> Result<CertificateReport> {
    let spec = &red.avg.spec;
    let (m, r) = (spec.m, spec.r);
    let n = m + r;
    let model = QuadraticModel {
        h: spec.h.clone(),
        a: red.a.matrix().clone(),
        m,
        epsilon,
    };
    let p1 = spec.p1_ref().to_vec();
    let frame = red.frame(&p1)?;
    let v = frame.d.eigenvectors().column(0);
    let x: Vec<S> = v.iter().map(|&c| S::lit(0.5) * c).collect();
    let y = vec![S::zero(); r];
    let (q2, p2) = frame.from_xy(&x, &y, epsilon);
    let mut yv = vec![S::zero(); m];
    yv.extend(q2);
    yv.extend_from_slice(&p1);
    yv.extend(p2);
    yv.push(S::zero());
    let mut rk = Rk4::new(n);
    let predicted = (S::lit(2.0).ln() / (epsilon * frame.d.min_eigenvalue())).f64();
    let mut t = S::zero();
    let limit = S::lit(10.0 * predicted);
    let mut exit = f64::INFINITY;
    while t < limit {
        rk.step(&model, t, step, &mut yv, None);
        t += step;
        let z = &yv[..2 * n];
        let f = red.frame(&z[n..n + m])?;
        let (xx, yy) = f.to_xy(&z[m..n], &z[n + m..], epsilon);
        if norm_inf(&xx) > S::one() || norm_inf(&yy) > S::one() {
            exit = t.f64();
            break;
        }
    }
    let mut rep = CertificateReport::new("escape_time");
    rep.check_le("relative_error", (exit / predicted - 1.0).abs(), 0.5);
    rep.record("measured", exit);
    rep.record("predicted", predicted);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylinder::graph::GridSizes;
    use crate::cylinder::solve::{graph_solve, CylinderSolution, SolverConfig};
    use crate::model::builtin::{pendulum_cylinder, unperturbed};
    use std::f64::consts::{LN_2, PI};

    fn solve(mu: f64, eps: f64) -> (NormalFormH1<f64>, ReductionData<f64>, CylinderSolution<f64>) {
        let spec = if mu == 0.0 {
            unperturbed(eps)
        } else {
            pendulum_cylinder(mu, eps)
        };
        let avg = AveragedData::new(&spec).unwrap();
        let red = ReductionData::new(&avg, 0.2, None).unwrap();
        let h1 = NormalFormH1::new(&spec).unwrap();
        let cfg = SolverConfig {
            grid: GridSizes {
                nt: 8,
                nq: 8,
                np: 9,
            },
            remainder_samples: 3,
            ..SolverConfig::default()
        };
        let sol = graph_solve(&h1, &red, eps, 0.2, &cfg).unwrap();
        (h1, red, sol)
    }

    #[test]
    fn unperturbed_certificates_are_exact() {
        let (h1, red, sol) = solve(0.0, 0.1);
        let res = invariance_residual(&sol.graph_h1, &h1, &red, 0.1, 0.1, 0.02, 0.16, 1).unwrap();
        assert!(res.max_all <= 1e-14, "{}", res.max_all);
        let rep = estimate_norms(&sol.graph_h, &red.avg, 0.1, 0.1).unwrap();
        assert_eq!(rep.value_f64("q2_c1"), Some(0.0));
        assert_eq!(rep.value_f64("p2_c0"), Some(0.0));
        let hyp = hyperbolicity_rates(
            &sol.graph_h1,
            (sol.diagnostics.xy_c0, sol.diagnostics.c0_bound_rhs),
            &h1,
            &red,
            0.1,
            2,
            20.0,
            0.02,
            3,
        )
        .unwrap();
        let rel = hyp.max_normal_relative_error();
        assert!(rel < 0.02, "{rel} {:?}", hyp.normal_rates);
        assert!((hyp.expected_normal[0] - 0.2 * PI).abs() < 1e-12);
        let cfg = ContainmentConfig {
            n_seeds: 8,
            t_half: 10.0,
            tol_contain: 1e-3,
            step: 0.02,
            seed: 1,
            seed_radius: 0.1,
        };
        let spec = unperturbed::<f64>(0.1);
        let rep = containment_test(&sol.graph_h, &spec, &red, &cfg).unwrap();
        assert!(rep.passed, "{}", rep.failure_summary());
    }

    #[test]
    fn escape_time_matches_linear_estimate() {
        let spec = unperturbed::<f64>(0.05);
        let avg = AveragedData::new(&spec).unwrap();
        let red = ReductionData::new(&avg, 0.2, None).unwrap();
        let rep = escape_time_check(&red, 0.05, 0.01).unwrap();
        assert!(rep.passed);
        let predicted = rep.value_f64("predicted").unwrap();
        assert!((predicted - LN_2 / (2.0 * PI * 0.05)).abs() < 1e-12);
        assert!((rep.value_f64("measured").unwrap() / predicted - 1.0).abs() < 0.05);
    }

    #[test]
    fn perturbed_rates_split() {
        let (h1, red, sol) = solve(0.3, 0.1);
        let hyp = hyperbolicity_rates(
            &sol.graph_h1,
            (sol.diagnostics.xy_c0, sol.diagnostics.c0_bound_rhs),
            &h1,
            &red,
            0.1,
            2,
            50.0,
            0.02,
            5,
        )
        .unwrap();
        let rep = hyp.report(0.1);
        assert!(rep.passed, "{}\n{:?}", rep.failure_summary(), hyp);
        let res = invariance_residual(&sol.graph_h1, &h1, &red, 0.1, 0.1, 0.02, 0.16, 1).unwrap();
        assert!(res.max < 1e-6, "{res:?}");
    }
}
