//! Perron iteration for the invariant graph of the normal form `H₁`.
//!
//! The unknown is the pair `(X, Y)` of scaled normal coordinates on the
//! `t = 0` section, over `(q₁, p₁) ∈ T^m × B`. One sweep flows every node
//! forward and backward by `K` whole periods: the expanding component is
//! corrected from the forward image, the contracting one from the backward
//! image, each damped by `e^{−εKD}`. The remaining time slices are filled by
//! transporting the section with the flow.

use serde::{Deserialize, Serialize};

use crate::averaging::NormalFormH1;
use crate::error::{Error, Result};
use crate::flow::Rk4;
use crate::hamiltonian::Hamiltonian;
use crate::linalg::Mat;
use crate::reduction::{LocalFrame, ReductionData};
use crate::scalar::{norm_inf, wrap_centered, Scalar};

use super::graph::{wrap01, GraphFunction, GridSizes, InterpScratch};
use super::scaled::{remainder_sup, RemainderBound};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grid: GridSizes,
    /// Stopping threshold on the sup-norm sweep update, scaled variables.
    pub tol_graph: f64,
    /// RK4 step in `t`.
    pub step: f64,
    pub max_sweeps: usize,
    /// Periods per sweep; `ceil(1/(εa))` when absent.
    pub horizon_periods: Option<usize>,
    /// Fraction of the coincidence domain the graph may occupy.
    pub margin: f64,
    /// Points per non-angular axis when sampling the remainder.
    pub remainder_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid: GridSizes::default(),
            tol_graph: 1e-8,
            step: 0.02,
            max_sweeps: 80,
            horizon_periods: None,
            margin: 0.9,
            remainder_samples: 5,
        }
    }
}

const TRANSPORT_TOL: f64 = 1e-12;
const TRANSPORT_MAX_ITER: usize = 50;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub sweeps: usize,
    pub updates: Vec<f64>,
    /// Geometric mean of up to five successive update ratios ending at the
    /// first sweep below tolerance.
    pub contraction_rate: f64,
    /// `e^{−(a−b)εK}`
    pub predicted_rate: f64,
    pub horizon_periods: usize,
    pub sweep_horizon_tau: f64,
    pub effective_horizon_tau: f64,
    /// `max(5, log(10 sup‖R‖/(a·tol)))/a`
    pub reference_horizon_tau: f64,
    /// `e^{−aT}·sup‖R‖/a` at the effective horizon.
    pub tail_bound: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub remainder: RemainderBound,
    pub xy_c0: f64,
    pub c0_bound_rhs: f64,
    pub max_q2: f64,
    pub max_p2_deviation: f64,
    pub q2_limit: f64,
    pub p2_limit: f64,
    pub transport_max_residual: f64,
    pub transport_max_iterations: usize,
    pub periodicity_mismatch: f64,
}

/// Output of [`graph_solve`].
#[derive(Clone, Debug)]
pub struct CylinderSolution<S> {
    /// `(X, Y)` on the full grid.
    pub xy: GraphFunction<S>,
    /// `(Q₂, P₂)` of the invariant graph of `H₁`.
    pub graph_h1: GraphFunction<S>,
    /// `(Q₂, P₂)` of the invariant graph of `H`, obtained through `ψ^ε`.
    pub graph_h: GraphFunction<S>,
    pub diagnostics: SolveDiagnostics,
}

impl<S: Scalar> CylinderSolution<S> {
    /// `(X, Y)` on the `t = 0` section.
    pub fn section(&self) -> GraphFunction<S> {
        self.xy.slice(0)
    }
}

/// Section `(X, Y)` over `(q₁, p₁)` with helpers to produce phase points.
pub(crate) struct Section<'a, S> {
    pub graph: &'a GraphFunction<S>,
    pub red: &'a ReductionData<S>,
    pub epsilon: S,
    scratch: InterpScratch<S>,
    buf: Vec<S>,
}

impl<'a, S: Scalar> Section<'a, S> {
    pub fn new(graph: &'a GraphFunction<S>, red: &'a ReductionData<S>, epsilon: S) -> Self {
        Self {
            graph,
            red,
            epsilon,
            scratch: InterpScratch::default(),
            buf: vec![S::zero(); 2 * graph.r],
        }
    }

    pub fn xy(&mut self, q1: &[S], p1: &[S]) -> (Vec<S>, Vec<S>) {
        self.graph
            .eval_into(S::zero(), q1, p1, &mut self.buf, &mut self.scratch);
        let r = self.graph.r;
        (self.buf[..r].to_vec(), self.buf[r..].to_vec())
    }

    /// Phase point over `(q₁, p₁)`.
    pub fn point(&mut self, q1: &[S], p1: &[S]) -> Result<Vec<S>> {
        let frame = self.red.frame(p1)?;
        let (x, y) = self.xy(q1, p1);
        Ok(compose(q1, p1, &frame, &x, &y, self.epsilon))
    }
}

pub(crate) fn compose<S: Scalar>(
    q1: &[S],
    p1: &[S],
    frame: &LocalFrame<S>,
    x: &[S],
    y: &[S],
    eps: S,
) -> Vec<S> {
    let (q2, p2) = frame.from_xy(x, y, eps);
    let mut z = q1.to_vec();
    z.extend(q2);
    z.extend_from_slice(p1);
    z.extend(p2);
    z
}

/// Splits `z` into base `(q₁, p₁)` and normal part `(q₂, p₂)`.
pub(crate) fn split<S: Scalar>(z: &[S], m: usize, r: usize) -> (Vec<S>, Vec<S>, Vec<S>, Vec<S>) {
    let n = m + r;
    (
        z[..m].to_vec(),
        z[n..n + m].to_vec(),
        z[m..n].to_vec(),
        z[n + m..].to_vec(),
    )
}

fn flow<S: Scalar, H: Hamiltonian<S>>(
    rk: &mut Rk4<S>,
    h: &H,
    z: &mut [S],
    t0: S,
    t1: S,
    step: S,
) -> Result<()> {
    let mut e = S::zero();
    rk.advance(h, t0, t1, z, &mut e, step, None)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::DomainEscape { time: t1.f64() });
    }
    Ok(())
}

/// Solves for the invariant graph of `h1` starting from `(X, Y) = 0`.
pub fn graph_solve<S: Scalar>(
    h1: &NormalFormH1<S>,
    red: &ReductionData<S>,
    epsilon: S,
    delta: S,
    cfg: &SolverConfig,
) -> Result<CylinderSolution<S>> {
    graph_solve_from(h1, red, epsilon, delta, cfg, None)
}

/// As [`graph_solve`], warm-started from a section `(X, Y)` if given.
pub fn graph_solve_from<S: Scalar>(
    h1: &NormalFormH1<S>,
    red: &ReductionData<S>,
    epsilon: S,
    delta: S,
    cfg: &SolverConfig,
    initial: Option<&GraphFunction<S>>,
) -> Result<CylinderSolution<S>> {
    let h1 = h1.with_epsilon(epsilon);
    let (m, r) = (red.m(), red.r());
    let center = red.avg.spec.p1_ref().to_vec();
    let step = S::lit(cfg.step);
    let a = red.a_rate;
    let k_periods = cfg
        .horizon_periods
        .unwrap_or_else(|| (S::one() / (epsilon * a)).ceil().to_usize().unwrap_or(1))
        .max(1);
    let kt = S::from_usize_lossy(k_periods);

    let mut section = GraphFunction::zeros(
        m,
        r,
        GridSizes { nt: 1, ..cfg.grid },
        &center,
        epsilon,
        delta,
    );
    if let Some(init) = initial {
        for i in 0..section.len() {
            let (_, q1, p1) = section.node(i);
            let v = init.field.eval(&GraphFunction::point(S::zero(), &q1, &p1));
            section.field.node_values_mut(i).copy_from_slice(&v);
        }
    }
    let nodes: Vec<(Vec<S>, Vec<S>)> = (0..section.len())
        .map(|i| {
            let (_, q1, p1) = section.node(i);
            (q1, p1)
        })
        .collect();
    let frames: Vec<LocalFrame<S>> = nodes
        .iter()
        .map(|(_, p1)| red.frame(p1))
        .collect::<Result<_>>()?;
    let decay: Vec<Mat<S>> = frames
        .iter()
        .map(|f| {
            f.d.matrix()
                .symmetric_function(|l| (-epsilon * kt * l).exp())
        })
        .collect();

    let remainder = remainder_sup(&h1, red, epsilon, delta, cfg.remainder_samples)?;
    let af = a.f64();
    let sweep_tau = (epsilon * kt).f64();
    // Sweeps also continue until the tail e^{−aT}·sup‖R‖/a drops below tol/10.
    let tail_at = |sweeps: usize| (-af * sweep_tau * sweeps as f64).exp() * remainder.sup / af;

    let mut rk = Rk4::new(m + r);
    let mut updates: Vec<f64> = Vec::new();
    let mut next = section.field.values.clone();
    loop {
        let mut sec = Section::new(&section, red, epsilon);
        let mut upd = S::zero();
        for (i, (q1, p1)) in nodes.iter().enumerate() {
            let vals = section.field.node_values(i);
            let (x, y) = (&vals[..r], &vals[r..]);
            let z0 = compose(q1, p1, &frames[i], x, y, epsilon);
            let mut res = [S::zero(); 2];
            let mut out = vec![S::zero(); 2 * r];
            for (dir, sign) in [(0usize, S::one()), (1, -S::one())] {
                let mut z = z0.clone();
                flow(&mut rk, &h1, &mut z, S::zero(), sign * kt, step)?;
                let (bq, bp, q2, p2) = split(&z, m, r);
                let frame = red.frame(&bp)?;
                let (xe, ye) = frame.to_xy(&q2, &p2, epsilon);
                let (xo, yo) = sec.xy(&bq, &bp);
                let resid: Vec<S> = if dir == 0 {
                    xe.iter().zip(&xo).map(|(&a, &b)| a - b).collect()
                } else {
                    ye.iter().zip(&yo).map(|(&a, &b)| a - b).collect()
                };
                let corr = decay[i].mul_vec(&resid);
                for j in 0..r {
                    out[dir * r + j] = vals[dir * r + j] - corr[j];
                }
                res[dir] = norm_inf(&corr);
            }
            upd = upd.max(res[0]).max(res[1]);
            next[i * 2 * r..(i + 1) * 2 * r].copy_from_slice(&out);
        }
        drop(sec);
        std::mem::swap(&mut section.field.values, &mut next);
        updates.push(upd.f64());
        let k = updates.len();
        if !upd.is_finite() {
            return Err(Error::NonContraction {
                rate: f64::INFINITY,
            });
        }
        if upd.f64() <= cfg.tol_graph {
            if tail_at(k) <= cfg.tol_graph / 10.0 {
                break;
            }
        } else if k > 5 {
            let rate = (updates[k - 1] / updates[k - 6]).powf(0.2);
            if rate >= 1.0 {
                return Err(Error::NonContraction { rate });
            }
        }
        if k >= cfg.max_sweeps {
            return Err(Error::NoConvergence {
                what: "graph sweeps".into(),
                iterations: k,
                residual: upd.f64(),
            });
        }
    }

    let (xy, graph_h1, transport) = transport_slices(&h1, red, &section, epsilon, cfg)?;
    let periodicity = periodicity_mismatch(&h1, red, &section, epsilon, step)?;
    let graph_h = transfer_to_h(&h1, &graph_h1, epsilon)?;

    let mut max_q2 = S::zero();
    let mut max_dev = S::zero();
    for i in 0..graph_h1.len() {
        let (_, _, p1) = graph_h1.node(i);
        let p2s = red.avg.p2(&p1)?;
        let v = graph_h1.field.node_values(i);
        max_q2 = max_q2.max(norm_inf(&v[..r]));
        let dev: Vec<S> = v[r..].iter().zip(&p2s).map(|(&a, &b)| a - b).collect();
        max_dev = max_dev.max(norm_inf(&dev));
    }
    let q2_limit = S::lit(cfg.margin) * delta.sqrt();
    let p2_limit = S::lit(cfg.margin) * epsilon;
    if max_q2 > q2_limit || max_dev > p2_limit {
        return Err(Error::CoincidenceMargin(format!(
            "max ‖q₂‖ = {:e} (limit {:e}), max ‖p₂ − P₂‖ = {:e} (limit {:e})",
            max_q2.f64(),
            q2_limit.f64(),
            max_dev.f64(),
            p2_limit.f64()
        )));
    }

    let bf = red.b_rate.f64();
    let k = updates.len();
    // Rate over the sweeps up to the first one below tolerance; later sweeps
    // only extend the horizon and may sit at round-off level.
    let kc = updates
        .iter()
        .position(|&u| u <= cfg.tol_graph)
        .map_or(k, |i| i + 1);
    let lag = (kc - 1).min(5);
    let contraction_rate = if lag == 0 || updates[kc - 1 - lag] == 0.0 {
        0.0
    } else {
        (updates[kc - 1] / updates[kc - 1 - lag]).powf(1.0 / lag as f64)
    };
    let effective = sweep_tau * k as f64;
    let reference = 5f64.max((10.0 * remainder.sup / (af * cfg.tol_graph)).ln()) / af;
    let diagnostics = SolveDiagnostics {
        sweeps: k,
        contraction_rate,
        predicted_rate: (-(af - bf) * sweep_tau).exp(),
        horizon_periods: k_periods,
        sweep_horizon_tau: sweep_tau,
        effective_horizon_tau: effective,
        reference_horizon_tau: reference,
        tail_bound: tail_at(k),
        a: af,
        b: bf,
        alpha: red.alpha.f64(),
        xy_c0: xy.field.max_abs().f64(),
        c0_bound_rhs: 2.0 / af * remainder.sup,
        remainder,
        updates,
        max_q2: max_q2.f64(),
        max_p2_deviation: max_dev.f64(),
        q2_limit: q2_limit.f64(),
        p2_limit: p2_limit.f64(),
        transport_max_residual: transport.0,
        transport_max_iterations: transport.1,
        periodicity_mismatch: periodicity,
    };
    Ok(CylinderSolution {
        xy,
        graph_h1,
        graph_h,
        diagnostics,
    })
}

/// Finds the section base point whose orbit reaches `(q₁*, p₁*)` after
/// time `s` (starting at `t0`), returning the phase point reached and the
/// final residual and iteration count.
#[allow(clippy::too_many_arguments)]
fn transport_point<S: Scalar, H: Hamiltonian<S>>(
    h: &H,
    sec: &mut Section<'_, S>,
    rk: &mut Rk4<S>,
    t0: S,
    s: S,
    q1t: &[S],
    p1t: &[S],
    step: S,
) -> Result<(Vec<S>, f64, usize)> {
    let red = sec.red;
    let m = red.m();
    let r = red.r();
    let n = m + r;
    let tors = red.avg.torsion(p1t)?;
    let om = red.avg.omega0(p1t)?;
    let mut bq: Vec<S> = q1t.iter().zip(&om).map(|(&q, &w)| q - w * s).collect();
    let mut bp = p1t.to_vec();
    let mut last = f64::INFINITY;
    for it in 1..=TRANSPORT_MAX_ITER {
        let mut z = sec.point(&bq, &bp)?;
        flow(rk, h, &mut z, t0, t0 + s, step)?;
        let eq: Vec<S> = (0..m).map(|i| wrap_centered(z[i] - q1t[i])).collect();
        let ep: Vec<S> = (0..m).map(|i| z[n + i] - p1t[i]).collect();
        last = norm_inf(&eq).max(norm_inf(&ep)).f64();
        if last <= TRANSPORT_TOL {
            return Ok((z, last, it));
        }
        let shear = tors.mul_vec(&ep);
        for i in 0..m {
            bp[i] -= ep[i];
            bq[i] -= eq[i] - shear[i] * s;
        }
    }
    Err(Error::NoConvergence {
        what: "slice transport".into(),
        iterations: TRANSPORT_MAX_ITER,
        residual: last,
    })
}

type Transported<S> = (GraphFunction<S>, GraphFunction<S>, (f64, usize));

fn transport_slices<S: Scalar>(
    h1: &NormalFormH1<S>,
    red: &ReductionData<S>,
    section: &GraphFunction<S>,
    epsilon: S,
    cfg: &SolverConfig,
) -> Result<Transported<S>> {
    let (m, r) = (red.m(), red.r());
    let center = section.p1_center.clone();
    let delta = section.delta;
    let mut xy = GraphFunction::zeros(m, r, cfg.grid, &center, epsilon, delta);
    let mut g1 = xy.clone();
    let step = S::lit(cfg.step);
    let nt = cfg.grid.nt;
    let per = xy.field.grid.stride(0);
    let mut sec = Section::new(section, red, epsilon);
    let mut rk = Rk4::new(m + r);
    let mut worst = (0.0f64, 0usize);
    for flat in 0..xy.len() {
        let (t, q1, p1) = xy.node(flat);
        let it = flat / per;
        let frame = red.frame(&p1)?;
        let (x, y, z) = if it == 0 {
            let (x, y) = sec.xy(&q1, &p1);
            let z = compose(&q1, &p1, &frame, &x, &y, epsilon);
            (x, y, z)
        } else {
            let (t0, s) = if 2 * it <= nt {
                (S::zero(), t)
            } else {
                (S::one(), t - S::one())
            };
            let (z, res, iters) = transport_point(h1, &mut sec, &mut rk, t0, s, &q1, &p1, step)?;
            worst = (worst.0.max(res), worst.1.max(iters));
            let (_, _, q2, p2) = split(&z, m, r);
            let (x, y) = frame.to_xy(&q2, &p2, epsilon);
            (x, y, z)
        };
        let v = xy.field.node_values_mut(flat);
        v[..r].copy_from_slice(&x);
        v[r..].copy_from_slice(&y);
        let (_, _, q2, p2) = split(&z, m, r);
        let g = g1.field.node_values_mut(flat);
        g[..r].copy_from_slice(&q2);
        g[r..].copy_from_slice(&p2);
    }
    Ok((xy, g1, worst))
}

/// Transports the section over one full period and compares with itself.
fn periodicity_mismatch<S: Scalar>(
    h1: &NormalFormH1<S>,
    red: &ReductionData<S>,
    section: &GraphFunction<S>,
    epsilon: S,
    step: S,
) -> Result<f64> {
    let (m, r) = (red.m(), red.r());
    let mut sec = Section::new(section, red, epsilon);
    let mut rk = Rk4::new(m + r);
    let mut worst = 0.0f64;
    for i in 0..section.len() {
        let (_, q1, p1) = section.node(i);
        let (z, _, _) =
            transport_point(h1, &mut sec, &mut rk, S::zero(), S::one(), &q1, &p1, step)?;
        let (_, _, q2, p2) = split(&z, m, r);
        let (x, y) = red.frame(&p1)?.to_xy(&q2, &p2, epsilon);
        let v = section.field.node_values(i);
        for j in 0..r {
            worst = worst
                .max((x[j] - v[j]).abs().f64())
                .max((y[j] - v[r + j]).abs().f64());
        }
    }
    Ok(worst)
}

/// Maps the `H₁` graph through `ψ^ε(q, p) = (q, p + ε²∂_q f)` and resamples
/// it over the original grid in `(t, q₁, p₁)`.
pub fn transfer_to_h<S: Scalar>(
    h1: &NormalFormH1<S>,
    g1: &GraphFunction<S>,
    epsilon: S,
) -> Result<GraphFunction<S>> {
    let (m, r) = (g1.m, g1.r);
    let e2 = epsilon * epsilon;
    let f = h1.f();
    let mut out = g1.clone();
    let mut scratch = InterpScratch::default();
    let mut buf = vec![S::zero(); 2 * r];
    let mut x = vec![S::zero(); 1 + m + r];
    for flat in 0..g1.len() {
        let (t, q1, p1h) = g1.node(flat);
        x[0] = wrap01(t);
        x[1..=m].copy_from_slice(&q1);
        let mut p1 = p1h.clone();
        let mut converged = false;
        for _ in 0..50 {
            g1.eval_into(t, &q1, &p1, &mut buf, &mut scratch);
            x[1 + m..].copy_from_slice(&buf[..r]);
            let grad = f.gradient(&x);
            let mut change = S::zero();
            for i in 0..m {
                let np = p1h[i] - e2 * grad[1 + i];
                change = change.max((np - p1[i]).abs());
                p1[i] = np;
            }
            if change <= S::lit(16.0) * S::epsilon() * (S::one() + norm_inf(&p1h)) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "graph transfer".into(),
                iterations: 50,
                residual: f64::NAN,
            });
        }
        g1.eval_into(t, &q1, &p1, &mut buf, &mut scratch);
        x[1 + m..].copy_from_slice(&buf[..r]);
        let grad = f.gradient(&x);
        let v = out.field.node_values_mut(flat);
        v[..r].copy_from_slice(&buf[..r]);
        for j in 0..r {
            v[r + j] = buf[r + j] + e2 * grad[1 + m + j];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin::{pendulum_cylinder, unperturbed};
    use crate::model::AveragedData;

    fn small() -> SolverConfig {
        SolverConfig {
            grid: GridSizes {
                nt: 8,
                nq: 8,
                np: 9,
            },
            remainder_samples: 3,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn unperturbed_graph_is_zero() {
        let spec = unperturbed::<f64>(0.1);
        let avg = AveragedData::new(&spec).unwrap();
        let red = ReductionData::new(&avg, 0.2, None).unwrap();
        let h1 = NormalFormH1::new(&spec).unwrap();
        let sol = graph_solve(&h1, &red, 0.1, 0.2, &small()).unwrap();
        assert!(sol.diagnostics.xy_c0 <= 1e-8);
        assert!(sol.diagnostics.updates.iter().all(|&u| u <= 1e-12));
        assert!(sol.graph_h.field.max_abs() <= 1e-12);
    }

    #[test]
    fn perturbed_solve_contracts() {
        let spec = pendulum_cylinder::<f64>(0.3, 0.1);
        let avg = AveragedData::new(&spec).unwrap();
        let red = ReductionData::new(&avg, 0.2, None).unwrap();
        let h1 = NormalFormH1::new(&spec).unwrap();
        let sol = graph_solve(&h1, &red, 0.1, 0.2, &small()).unwrap();
        let d = &sol.diagnostics;
        assert!(d.xy_c0 > 0.0 && d.xy_c0 <= d.c0_bound_rhs, "{d:?}");
        assert!(
            d.contraction_rate < d.predicted_rate,
            "{} vs {}",
            d.contraction_rate,
            d.predicted_rate
        );
        assert!(d.transport_max_residual <= 1e-12);
        assert!(d.periodicity_mismatch < 1e-6, "{}", d.periodicity_mismatch);
    }

    #[test]
    fn tight_margin_aborts() {
        let spec = pendulum_cylinder::<f64>(0.3, 0.1);
        let avg = AveragedData::new(&spec).unwrap();
        let red = ReductionData::new(&avg, 0.2, None).unwrap();
        let h1 = NormalFormH1::new(&spec).unwrap();
        let cfg = SolverConfig {
            margin: 1e-9,
            ..small()
        };
        assert!(matches!(
            graph_solve(&h1, &red, 0.1, 0.2, &cfg),
            Err(Error::CoincidenceMargin(_))
        ));
    }
}
