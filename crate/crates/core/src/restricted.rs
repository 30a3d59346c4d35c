//! The restricted time-one map on the `t = 0` section of the cylinder and
//! its integrable limit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cylinder::graph::{wrap01, GraphFunction};
use crate::error::Result;
use crate::flow::Rk4;
use crate::hamiltonian::{Hamiltonian, PhaseJet};
use crate::linalg::{symplectic_form, Mat};
use crate::model::{AveragedData, HamiltonianSpec};
use crate::report::CertificateReport;
use crate::scalar::{norm_inf, wrap_centered, Scalar};

/// Default difference step for derivatives of the graph interpolant.
const EMBED_STEP: f64 = 1e-6;
/// Below this `Φ` and `Φ₀` are considered equal.
pub const INTEGRATOR_TOL: f64 = 1e-10;

/// `Φ₀(q₁, p₁) = (q₁ + Ω₀(p₁) mod 1, p₁)`.
pub fn phi0<S: Scalar>(avg: &AveragedData<S>, q1: &[S], p1: &[S]) -> Result<(Vec<S>, Vec<S>)> {
    let om = avg.omega0(p1)?;
    Ok((
        q1.iter().zip(&om).map(|(&q, &w)| wrap01(q + w)).collect(),
        p1.to_vec(),
    ))
}

/// `dΦ₀ = [[I, ∂Ω₀], [0, I]]`.
pub fn dphi0<S: Scalar>(avg: &AveragedData<S>, p1: &[S]) -> Result<Mat<S>> {
    let m = p1.len();
    let t = avg.torsion(p1)?;
    let mut d = Mat::identity(2 * m);
    for i in 0..m {
        for j in 0..m {
            d[(i, m + j)] = t[(i, j)];
        }
    }
    Ok(d)
}

/// Time-one map of `H` restricted to the graph over the `t = 0` section.
#[derive(Clone, Debug)]
pub struct RestrictedMap<S> {
    /// `(Q₂, P₂)(0, ·, ·)` of the graph of `H`.
    pub section: GraphFunction<S>,
    pub spec: HamiltonianSpec<S>,
    pub avg: AveragedData<S>,
    pub step: S,
}

impl<S: Scalar> RestrictedMap<S> {
    /// `graph` is the full graph of `H` (or a single `t = 0` slice).
    pub fn new(
        graph: &GraphFunction<S>,
        spec: &HamiltonianSpec<S>,
        avg: &AveragedData<S>,
        step: S,
    ) -> Self {
        Self {
            section: graph.slice(0),
            spec: spec.clone(),
            avg: avg.clone(),
            step,
        }
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    pub fn epsilon(&self) -> S {
        self.spec.epsilon
    }

    /// Phase point over `(q₁, p₁)`.
    pub fn embed(&self, q1: &[S], p1: &[S]) -> Vec<S> {
        self.section.phase_point(S::zero(), q1, p1)
    }

    /// `∂z/∂(q₁, p₁)` of the embedding, `2n×2m`.
    pub fn embed_jacobian(&self, q1: &[S], p1: &[S]) -> Mat<S> {
        let (m, r) = (self.spec.m, self.spec.r);
        let n = m + r;
        let h = S::lit(EMBED_STEP);
        let mut j = Mat::zeros(2 * n, 2 * m);
        for c in 0..2 * m {
            let (mut qp, mut qm, mut pp, mut pm) =
                (q1.to_vec(), q1.to_vec(), p1.to_vec(), p1.to_vec());
            if c < m {
                qp[c] += h;
                qm[c] -= h;
            } else {
                pp[c - m] += h;
                pm[c - m] -= h;
            }
            let (a2, b2) = self.section.eval(S::zero(), &qp, &pp);
            let (a1, b1) = self.section.eval(S::zero(), &qm, &pm);
            for i in 0..r {
                j[(m + i, c)] = (a2[i] - a1[i]) / (h + h);
                j[(n + m + i, c)] = (b2[i] - b1[i]) / (h + h);
            }
        }
        for i in 0..m {
            j[(i, i)] = S::one();
            j[(n + i, m + i)] = S::one();
        }
        j
    }

    /// `Φ(q₁, p₁)`; `q₁` is returned on the universal cover.
    pub fn phi(&self, q1: &[S], p1: &[S]) -> Result<(Vec<S>, Vec<S>)> {
        let n = self.spec.n;
        let m = self.m();
        let mut z = self.embed(q1, p1);
        let mut e = S::zero();
        Rk4::new(n).advance(
            &self.spec,
            S::zero(),
            S::one(),
            &mut z,
            &mut e,
            self.step,
            None,
        )?;
        Ok((z[..m].to_vec(), z[n..n + m].to_vec()))
    }

    /// `Φ` and `dΦ = Π·Dφ·J`.
    pub fn phi_with_jacobian(&self, q1: &[S], p1: &[S]) -> Result<((Vec<S>, Vec<S>), Mat<S>)> {
        let n = self.spec.n;
        let m = self.m();
        let mut z = self.embed(q1, p1);
        let mut e = S::zero();
        let mut phi = Mat::<S>::identity(2 * n);
        Rk4::new(n).advance_tangent(
            &self.spec,
            S::zero(),
            S::one(),
            &mut z,
            &mut e,
            phi.as_mut_slice(),
            self.step,
            None,
        )?;
        let dz = &phi * &self.embed_jacobian(q1, p1);
        let mut d = Mat::zeros(2 * m, 2 * m);
        for i in 0..m {
            for c in 0..2 * m {
                d[(i, c)] = dz[(i, c)];
                d[(m + i, c)] = dz[(n + i, c)];
            }
        }
        Ok(((z[..m].to_vec(), z[n..n + m].to_vec()), d))
    }

    /// `ω_A = Jᵀ Ω J`, the pullback of `Σ dqᵢ ∧ dpᵢ` to the graph.
    pub fn omega_a(&self, q1: &[S], p1: &[S]) -> Mat<S> {
        let j = self.embed_jacobian(q1, p1);
        &(&j.transpose() * &symplectic_form(self.spec.n)) * &j
    }

    /// Samples `(q₁, p₁)`: `nq × np` tensor grid over `T^m × B₀` (m = 1 uses
    /// it directly) followed by `extra` seeded random points.
    pub fn samples(
        &self,
        b0: S,
        nq: usize,
        np: usize,
        extra: usize,
        seed: u64,
    ) -> Vec<(Vec<S>, Vec<S>)> {
        let m = self.m();
        let center = self.spec.p1_ref().to_vec();
        let mut out = Vec::new();
        let total = nq.pow(m as u32) * np.pow(m as u32);
        for idx in 0..total {
            let mut rest = idx;
            let mut q1 = vec![S::zero(); m];
            let mut p1 = vec![S::zero(); m];
            for v in q1.iter_mut() {
                *v = S::from_usize_lossy(rest % nq) / S::from_usize_lossy(nq);
                rest /= nq;
            }
            for (i, v) in p1.iter_mut().enumerate() {
                let frac = if np > 1 {
                    S::from_usize_lossy(rest % np) / S::from_usize_lossy(np - 1)
                } else {
                    S::lit(0.5)
                };
                *v = center[i] - b0 + S::lit(2.0) * b0 * frac;
                rest /= np;
            }
            out.push((q1, p1));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..extra {
            let q1 = (0..m).map(|_| S::lit(rng.gen::<f64>())).collect();
            let p1 = center
                .iter()
                .map(|&c| c + b0 * S::lit(2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            out.push((q1, p1));
        }
        out
    }
}

/// `sup ‖Φ − Φ₀‖` and `sup ‖dΦ − dΦ₀‖` over a sample set.
#[derive(Clone, Debug, Serialize)]
pub struct MapDistance {
    pub epsilon: f64,
    pub phi_dist: f64,
    pub dphi_dist: f64,
    pub samples: usize,
}

pub fn map_distance<S: Scalar>(
    map: &RestrictedMap<S>,
    samples: &[(Vec<S>, Vec<S>)],
) -> Result<MapDistance> {
    let m = map.m();
    let mut phi_dist = S::zero();
    let mut dphi_dist = S::zero();
    for (q1, p1) in samples {
        let ((qn, pn), d) = map.phi_with_jacobian(q1, p1)?;
        let (q0, p0) = phi0(&map.avg, q1, p1)?;
        for i in 0..m {
            phi_dist = phi_dist
                .max(wrap_centered(qn[i] - q0[i]).abs())
                .max((pn[i] - p0[i]).abs());
        }
        dphi_dist = dphi_dist.max((&d - &dphi0(&map.avg, p1)?).max_abs());
    }
    Ok(MapDistance {
        epsilon: map.epsilon().f64(),
        phi_dist: phi_dist.f64(),
        dphi_dist: dphi_dist.f64(),
        samples: samples.len(),
    })
}

/// Certifies strict decrease of `sup‖Φ − Φ₀‖` along a ladder ordered by
/// decreasing `ε` (unless it vanishes to integrator tolerance throughout),
/// smallness at the finest `ε` and `‖dΦ − dΦ₀‖ ≤ η` there.
pub fn convergence_sweep(rows: &[MapDistance], final_tol: f64, eta: f64) -> CertificateReport {
    let mut rep = CertificateReport::new("convergence");
    let mut sorted: Vec<&MapDistance> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        b.epsilon
            .partial_cmp(&a.epsilon)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let worst_ratio = sorted
        .windows(2)
        .map(|w| w[1].phi_dist / w[0].phi_dist)
        .fold(0.0f64, f64::max);
    let exact = sorted.iter().all(|d| d.phi_dist <= INTEGRATOR_TOL);
    if exact {
        rep.check_holds("phi_dist_at_integrator_tolerance", true, None);
    } else if sorted.len() > 1 {
        rep.check_lt("phi_dist_successive_ratio", worst_ratio, 1.0);
    }
    if let Some(last) = sorted.last() {
        rep.check_le("phi_dist_finest", last.phi_dist, final_tol);
        rep.check_le("dphi_dist_finest", last.dphi_dist, eta);
    }
    rep.record("rows", rows);
    rep
}

/// Time-one images of graph points over `T^m × B₀` must have `p₁ ∈ B` and
/// lie on the graph within `tol`; also records `max‖ṗ₁‖/ε²` along the way.
pub fn section_invariance<S: Scalar>(
    map: &RestrictedMap<S>,
    samples: &[(Vec<S>, Vec<S>)],
    tol: f64,
) -> Result<CertificateReport> {
    let spec = &map.spec;
    let (m, r) = (spec.m, spec.r);
    let n = m + r;
    let e2 = spec.epsilon * spec.epsilon;
    let center = spec.p1_ref();
    let delta = map.section.delta;
    let mut rk = Rk4::new(n);
    let mut jet = PhaseJet::new(n);
    let (count, dt) = crate::flow::step_plan(S::zero(), S::one(), map.step);
    let mut off_graph = S::zero();
    let mut p1_excursion = S::zero();
    let mut pdot = S::zero();
    for (q1, p1) in samples {
        let mut y = map.embed(q1, p1);
        y.push(S::zero());
        for i in 0..=count {
            let t = S::from_usize_lossy(i) * dt;
            spec.jet(t, &y[..n], &y[n..2 * n], false, &mut jet);
            pdot = pdot.max(norm_inf(&jet.dq[..m]));
            if i < count {
                rk.step(spec, t, dt, &mut y, None);
            }
        }
        let z = &y[..2 * n];
        for i in 0..m {
            p1_excursion = p1_excursion.max((z[n + i] - center[i]).abs());
        }
        let (gq, gp) = map.section.eval(S::zero(), &z[..m], &z[n..n + m]);
        for j in 0..r {
            off_graph = off_graph
                .max((z[m + j] - gq[j]).abs())
                .max((z[n + m + j] - gp[j]).abs());
        }
    }
    let mut rep = CertificateReport::new("section_invariance");
    rep.check_le("image_distance", off_graph.f64(), tol);
    rep.check_le("image_p1_excursion", p1_excursion.f64(), delta.f64());
    rep.record("pdot1_over_eps2", (pdot / e2).f64());
    rep.record("samples", samples.len());
    Ok(rep)
}

/// Positive definiteness of the symmetric part of `∂_{p₁}(q₁∘Φ)` and its
/// distance to the integrable torsion `∂_{p₁}Ω₀`.
pub fn torsion_check<S: Scalar>(
    map: &RestrictedMap<S>,
    samples: &[(Vec<S>, Vec<S>)],
    min_eig: f64,
) -> Result<CertificateReport> {
    let m = map.m();
    let mut lo = S::infinity();
    let mut diff = S::zero();
    let mut nonpositive = 0usize;
    for (q1, p1) in samples {
        let (_, d) = map.phi_with_jacobian(q1, p1)?;
        let mut block = Mat::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                block[(i, j)] = d[(i, m + j)];
            }
        }
        let (vals, _) = block.symmetric_part().symmetric_eigen();
        if vals[0] <= S::zero() {
            nonpositive += 1;
        }
        lo = lo.min(vals[0]);
        diff = diff.max((&block - &map.avg.torsion(p1)?).max_abs());
    }
    let mut rep = CertificateReport::new("torsion");
    rep.check_ge("min_eigenvalue", lo.f64(), min_eig);
    rep.check_le("nonpositive_samples", nonpositive as f64, 0.0);
    rep.record("max_distance_to_integrable", diff.f64());
    rep.record("samples", samples.len());
    Ok(rep)
}

/// Non-degeneracy of `ω_A`, the pullback identity `dΦᵀ ω_A(Φx) dΦ = ω_A(x)`
/// and the deviation of `ω_A` from the standard form.
pub fn restricted_form_check<S: Scalar>(
    map: &RestrictedMap<S>,
    samples: &[(Vec<S>, Vec<S>)],
    min_det: f64,
    tol: f64,
) -> Result<CertificateReport> {
    let m = map.m();
    let std_form = symplectic_form::<S>(m);
    let mut det_lo = S::infinity();
    let mut pull = S::zero();
    let mut dev = S::zero();
    for (q1, p1) in samples {
        let w = map.omega_a(q1, p1);
        det_lo = det_lo.min(w.determinant().abs());
        dev = dev.max((&w - &std_form).max_abs());
        let ((qn, pn), d) = map.phi_with_jacobian(q1, p1)?;
        let wn = map.omega_a(&qn.iter().map(|&q| wrap01(q)).collect::<Vec<_>>(), &pn);
        let lhs = &(&d.transpose() * &wn) * &d;
        pull = pull.max((&lhs - &w).max_abs());
    }
    let mut rep = CertificateReport::new("restricted_form");
    rep.check_ge("min_abs_det", det_lo.f64(), min_det);
    rep.check_le("pullback_residual", pull.f64(), tol);
    rep.record("deviation_from_standard", dev.f64());
    rep.record("samples", samples.len());
    Ok(rep)
}
