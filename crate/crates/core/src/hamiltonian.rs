//! Time-periodic Hamiltonians on `T^{1+n} × R^n` and their second-order jets.

use crate::fourier::{Jet, ModalJet};
use crate::linalg::Mat;
use crate::model::HamiltonianSpec;
use crate::polynomial::Polynomial;
use crate::scalar::Scalar;

/// Value and derivatives of `H(t, q, p)` up to second order in `(q, p)`.
///
/// Matrices are `n×n` row-major; `dqp[i*n + j] = ∂_{q_i}∂_{p_j}H`.
#[derive(Clone, Debug)]
pub struct PhaseJet<S> {
    pub n: usize,
    pub value: S,
    pub dt: S,
    pub dq: Vec<S>,
    pub dp: Vec<S>,
    pub dqq: Vec<S>,
    pub dqp: Vec<S>,
    pub dpp: Vec<S>,
    pub(crate) g: ModalJet<S>,
    pub(crate) f: Jet<S>,
    pub(crate) hp: Vec<S>,
    pub(crate) hpp: Vec<S>,
    pub(crate) buf: Vec<S>,
}

impl<S: Scalar> PhaseJet<S> {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            value: S::zero(),
            dt: S::zero(),
            dq: vec![S::zero(); n],
            dp: vec![S::zero(); n],
            dqq: vec![S::zero(); n * n],
            dqp: vec![S::zero(); n * n],
            dpp: vec![S::zero(); n * n],
            g: ModalJet::new(n + 1, n),
            f: Jet::new(n + 1),
            hp: vec![S::zero(); n],
            hpp: vec![S::zero(); n * n],
            buf: vec![S::zero(); 4 * n * n + 4 * n],
        }
    }

    /// Hamiltonian vector field `(∂_pH, −∂_qH)`.
    pub fn field_into(&self, out: &mut [S]) {
        let n = self.n;
        out[..n].copy_from_slice(&self.dp);
        for i in 0..n {
            out[n + i] = -self.dq[i];
        }
    }

    /// Jacobian of the vector field, `2n×2n` row-major:
    /// `[[∂_{pq}H, ∂_{pp}H], [−∂_{qq}H, −∂_{qp}H]]`.
    pub fn field_jacobian_into(&self, out: &mut [S]) {
        let n = self.n;
        let w = 2 * n;
        for i in 0..n {
            for j in 0..n {
                out[i * w + j] = self.dqp[j * n + i];
                out[i * w + n + j] = self.dpp[i * n + j];
                out[(n + i) * w + j] = -self.dqq[i * n + j];
                out[(n + i) * w + n + j] = -self.dqp[i * n + j];
            }
        }
    }
}

pub trait Hamiltonian<S: Scalar>: Sync {
    fn dof(&self) -> usize;

    /// Fills value, `∂_t`, `∂_q`, `∂_p` and, when `second` is set, the
    /// second derivatives in `(q, p)`.
    fn jet(&self, t: S, q: &[S], p: &[S], second: bool, out: &mut PhaseJet<S>);

    fn value(&self, t: S, q: &[S], p: &[S]) -> S {
        let mut j = PhaseJet::new(self.dof());
        self.jet(t, q, p, false, &mut j);
        j.value
    }

    /// Vector field at `z = (q, p)`.
    fn field(&self, t: S, z: &[S]) -> Vec<S> {
        let n = self.dof();
        let mut j = PhaseJet::new(n);
        self.jet(t, &z[..n], &z[n..], false, &mut j);
        let mut out = vec![S::zero(); 2 * n];
        j.field_into(&mut out);
        out
    }

    fn field_jacobian(&self, t: S, z: &[S]) -> Mat<S> {
        let n = self.dof();
        let mut j = PhaseJet::new(n);
        self.jet(t, &z[..n], &z[n..], true, &mut j);
        let mut out = Mat::zeros(2 * n, 2 * n);
        j.field_jacobian_into(out.as_mut_slice());
        out
    }
}

pub(crate) fn tq_point<S: Scalar>(t: S, q: &[S]) -> [S; 17] {
    let mut x = [S::zero(); 17];
    x[0] = t;
    x[1..=q.len()].copy_from_slice(q);
    x
}

/// `H = h(p) − ε²G(t, q, p)`.
impl<S: Scalar> Hamiltonian<S> for HamiltonianSpec<S> {
    fn dof(&self) -> usize {
        self.n
    }

    fn jet(&self, t: S, q: &[S], p: &[S], second: bool, out: &mut PhaseJet<S>) {
        let n = self.n;
        let e2 = self.epsilon * self.epsilon;
        let x = tq_point(t, q);
        self.g.jet_into(&x[..=n], p, &mut out.g);
        self.h.gradient_into(p, &mut out.hp);
        out.value = self.h.eval(p) - e2 * out.g.value;
        out.dt = -e2 * out.g.dx[0];
        let d = n + 1;
        for i in 0..n {
            out.dq[i] = -e2 * out.g.dx[1 + i];
            out.dp[i] = out.hp[i] - e2 * out.g.dp[i];
        }
        if !second {
            return;
        }
        self.h.hessian_into(p, &mut out.hpp);
        for i in 0..n {
            for j in 0..n {
                out.dqq[i * n + j] = -e2 * out.g.dxx[(1 + i) * d + 1 + j];
                out.dqp[i * n + j] = -e2 * out.g.dxp[(1 + i) * n + j];
                out.dpp[i * n + j] = out.hpp[i * n + j] - e2 * out.g.dpp[i * n + j];
            }
        }
    }
}

/// Averaged model `h(p) − (ε²/2)⟨A q₂, q₂⟩`, with the slow angles on their
/// universal cover. Its cylinder `q₂ = 0, p₂ = P₂(p₁)` is exactly invariant
/// and the normal dynamics is linear.
#[derive(Clone, Debug)]
pub struct QuadraticModel<S> {
    pub h: Polynomial<S>,
    pub a: Mat<S>,
    pub m: usize,
    pub epsilon: S,
}

impl<S: Scalar> Hamiltonian<S> for QuadraticModel<S> {
    fn dof(&self) -> usize {
        self.h.nvars()
    }

    fn jet(&self, _t: S, q: &[S], p: &[S], second: bool, out: &mut PhaseJet<S>) {
        let n = self.dof();
        let m = self.m;
        let r = n - m;
        let e2 = self.epsilon * self.epsilon;
        let q2 = &q[m..];
        let aq = self.a.mul_vec(q2);
        let quad: S = aq.iter().zip(q2).map(|(&a, &b)| a * b).sum();
        self.h.gradient_into(p, &mut out.dp);
        out.value = self.h.eval(p) - S::lit(0.5) * e2 * quad;
        out.dt = S::zero();
        for i in 0..m {
            out.dq[i] = S::zero();
        }
        for i in 0..r {
            out.dq[m + i] = -e2 * aq[i];
        }
        if !second {
            return;
        }
        self.h.hessian_into(p, &mut out.dpp);
        out.dqq.iter_mut().for_each(|x| *x = S::zero());
        out.dqp.iter_mut().for_each(|x| *x = S::zero());
        for i in 0..r {
            for j in 0..r {
                out.dqq[(m + i) * n + m + j] = -e2 * self.a[(i, j)];
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::builtin::pendulum_cylinder;

    /// Central-difference check of a Hamiltonian's jet.
    pub fn check_jet<H: Hamiltonian<f64>>(
        h: &H,
        t: f64,
        q: &[f64],
        p: &[f64],
        tol1: f64,
        tol2: f64,
    ) {
        let n = h.dof();
        let mut j = PhaseJet::new(n);
        h.jet(t, q, p, true, &mut j);
        let step = 1e-5;
        let v = |t: f64, q: &[f64], p: &[f64]| h.value(t, q, p);
        let fd_t = (v(t + step, q, p) - v(t - step, q, p)) / (2.0 * step);
        assert!((fd_t - j.dt).abs() < tol1, "dt {fd_t} vs {}", j.dt);
        let mut jp = PhaseJet::new(n);
        let mut jm = PhaseJet::new(n);
        for i in 0..n {
            let (mut qp, mut qm) = (q.to_vec(), q.to_vec());
            qp[i] += step;
            qm[i] -= step;
            let fd = (v(t, &qp, p) - v(t, &qm, p)) / (2.0 * step);
            assert!((fd - j.dq[i]).abs() < tol1, "dq[{i}] {fd} vs {}", j.dq[i]);
            h.jet(t, &qp, p, false, &mut jp);
            h.jet(t, &qm, p, false, &mut jm);
            for k in 0..n {
                let fdqq = (jp.dq[k] - jm.dq[k]) / (2.0 * step);
                assert!(
                    (fdqq - j.dqq[i * n + k]).abs() < tol2,
                    "dqq[{i},{k}] {fdqq} vs {}",
                    j.dqq[i * n + k]
                );
                let fdqp = (jp.dp[k] - jm.dp[k]) / (2.0 * step);
                assert!(
                    (fdqp - j.dqp[i * n + k]).abs() < tol2,
                    "dqp[{i},{k}] {fdqp} vs {}",
                    j.dqp[i * n + k]
                );
            }
            let (mut pp, mut pm) = (p.to_vec(), p.to_vec());
            pp[i] += step;
            pm[i] -= step;
            let fd = (v(t, q, &pp) - v(t, q, &pm)) / (2.0 * step);
            assert!((fd - j.dp[i]).abs() < tol1, "dp[{i}] {fd} vs {}", j.dp[i]);
            h.jet(t, q, &pp, false, &mut jp);
            h.jet(t, q, &pm, false, &mut jm);
            for k in 0..n {
                let fdpp = (jp.dp[k] - jm.dp[k]) / (2.0 * step);
                assert!(
                    (fdpp - j.dpp[i * n + k]).abs() < tol2,
                    "dpp[{i},{k}] {fdpp} vs {}",
                    j.dpp[i * n + k]
                );
            }
        }
    }

    #[test]
    fn original_jet_matches_differences() {
        let spec = pendulum_cylinder::<f64>(0.3, 0.3);
        check_jet(&spec, 0.21, &[0.33, 0.08], &[0.7, -0.04], 1e-8, 1e-7);
    }

    #[test]
    fn quadratic_model_jet() {
        let model = QuadraticModel {
            h: Polynomial::kinetic(2),
            a: Mat::from_rows(&[vec![4.0 * std::f64::consts::PI.powi(2)]]),
            m: 1,
            epsilon: 0.2,
        };
        check_jet(&model, 0.0, &[0.1, 0.05], &[0.6, 0.01], 1e-8, 1e-7);
        let jac = model.field_jacobian(0.0, &[0.1, 0.05, 0.6, 0.01]);
        // q̇₂ = p₂, ṗ₂ = ε²A q₂.
        assert!((jac[(1, 3)] - 1.0).abs() < 1e-15);
        assert!((jac[(3, 1)] - 0.04 * 4.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
    }
}
