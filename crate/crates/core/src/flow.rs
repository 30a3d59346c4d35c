//! Fixed-step fourth-order Runge–Kutta integration of Hamiltonian flows and
//! their variational equations.
//!
//! States are `z = (q, p) ∈ R^{2n}` with angles lifted to the universal
//! cover. Alongside `z` the integrator carries the extended-phase energy `e`
//! with `ė = −∂_tH`, so that `H(t, z) + e` is a first integral.

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, PhaseJet};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct BoundingBox<S> {
    pub lower: Vec<S>,
    pub upper: Vec<S>,
}

impl<S: Scalar> BoundingBox<S> {
    /// Box that constrains nothing.
    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![S::neg_infinity(); dim],
            upper: vec![S::infinity(); dim],
        }
    }

    pub fn contains(&self, z: &[S]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig<S> {
    /// Largest admissible step; the actual step divides the horizon evenly.
    pub step: S,
    pub tangent: bool,
    pub bbox: Option<BoundingBox<S>>,
    /// Store every `record_every`-th step; zero keeps only the endpoints.
    pub record_every: usize,
}

impl<S: Scalar> Default for FlowConfig<S> {
    fn default() -> Self {
        Self {
            step: S::lit(1e-3),
            tangent: false,
            bbox: None,
            record_every: 1,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrajectorySample<S> {
    pub times: Vec<S>,
    pub states: Vec<Vec<S>>,
    /// Extended energy `H̃ = H(t, z) + e` at each stored time.
    pub energies: Vec<S>,
    pub jacobians: Option<Vec<Mat<S>>>,
}

impl<S: Scalar> TrajectorySample<S> {
    pub fn final_state(&self) -> &[S] {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn energy_drift(&self) -> S {
        let e0 = self.energies[0];
        self.energies
            .iter()
            .map(|&e| (e - e0).abs())
            .fold(S::zero(), S::max)
    }
}

/// Number of uniform steps and the step size for a horizon.
pub fn step_plan<S: Scalar>(t0: S, t1: S, step_max: S) -> (usize, S) {
    let span = t1 - t0;
    if span == S::zero() {
        return (0, S::zero());
    }
    let count = (span.abs() / step_max)
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    (count, span / S::from_usize_lossy(count))
}

/// Reusable RK4 workspace.
pub struct Rk4<S> {
    n: usize,
    jet: PhaseJet<S>,
    k: [Vec<S>; 4],
    tmp: Vec<S>,
    kj: [Vec<S>; 4],
    jac: Vec<S>,
    tmpj: Vec<S>,
}

impl<S: Scalar> Rk4<S> {
    pub fn new(n: usize) -> Self {
        let w = 2 * n + 1;
        let w2 = 4 * n * n;
        Self {
            n,
            jet: PhaseJet::new(n),
            k: [
                vec![S::zero(); w],
                vec![S::zero(); w],
                vec![S::zero(); w],
                vec![S::zero(); w],
            ],
            tmp: vec![S::zero(); w],
            kj: [
                vec![S::zero(); w2],
                vec![S::zero(); w2],
                vec![S::zero(); w2],
                vec![S::zero(); w2],
            ],
            jac: vec![S::zero(); w2],
            tmpj: vec![S::zero(); w2],
        }
    }

    /// Extended field at `y = (z, e)`; also the field Jacobian when `jac`.
    fn eval<H: Hamiltonian<S> + ?Sized>(&mut self, h: &H, t: S, y: &[S], stage: usize, jac: bool) {
        let n = self.n;
        h.jet(t, &y[..n], &y[n..2 * n], jac, &mut self.jet);
        let out = &mut self.k[stage];
        self.jet.field_into(&mut out[..2 * n]);
        out[2 * n] = -self.jet.dt;
        if jac {
            self.jet.field_jacobian_into(&mut self.jac);
        }
    }

    fn matmul_into(&self, a: &[S], b: &[S], out: &mut [S]) {
        let w = 2 * self.n;
        for i in 0..w {
            for j in 0..w {
                let mut acc = S::zero();
                for l in 0..w {
                    acc += a[i * w + l] * b[l * w + j];
                }
                out[i * w + j] = acc;
            }
        }
    }

    /// One RK4 step of size `dt` on `y = (z, e)` and, if given, on the
    /// fundamental matrix `phi`.
    pub fn step<H: Hamiltonian<S> + ?Sized>(
        &mut self,
        h: &H,
        t: S,
        dt: S,
        y: &mut [S],
        mut phi: Option<&mut [S]>,
    ) {
        let half = S::lit(0.5) * dt;
        let tangent = phi.is_some();
        let w = y.len();
        let coeffs = [S::zero(), half, half, dt];
        let times = [t, t + half, t + half, t + dt];
        for stage in 0..4 {
            if stage == 0 {
                self.tmp.copy_from_slice(y);
            } else {
                let c = coeffs[stage];
                for i in 0..w {
                    self.tmp[i] = y[i] + c * self.k[stage - 1][i];
                }
            }
            let state = std::mem::take(&mut self.tmp);
            self.eval(h, times[stage], &state, stage, tangent);
            self.tmp = state;
            if let Some(phi) = phi.as_deref() {
                let c = coeffs[stage];
                let mut arg = std::mem::take(&mut self.tmpj);
                if stage == 0 {
                    arg.copy_from_slice(phi);
                } else {
                    for i in 0..arg.len() {
                        arg[i] = phi[i] + c * self.kj[stage - 1][i];
                    }
                }
                let mut out = std::mem::take(&mut self.kj[stage]);
                self.matmul_into(&self.jac, &arg, &mut out);
                self.kj[stage] = out;
                self.tmpj = arg;
            }
        }
        let sixth = dt / S::lit(6.0);
        let two = S::lit(2.0);
        for i in 0..w {
            y[i] += sixth * (self.k[0][i] + two * (self.k[1][i] + self.k[2][i]) + self.k[3][i]);
        }
        if let Some(phi) = phi.as_deref_mut() {
            for i in 0..phi.len() {
                phi[i] +=
                    sixth * (self.kj[0][i] + two * (self.kj[1][i] + self.kj[2][i]) + self.kj[3][i]);
            }
        }
    }

    /// Integrates `z` (and the energy `e`) from `t0` to `t1`.
    pub fn advance<H: Hamiltonian<S> + ?Sized>(
        &mut self,
        h: &H,
        t0: S,
        t1: S,
        z: &mut [S],
        e: &mut S,
        step_max: S,
        bbox: Option<&BoundingBox<S>>,
    ) -> Result<()> {
        self.advance_impl(h, t0, t1, z, e, None, step_max, bbox)
    }

    /// As [`advance`](Self::advance), also propagating the `2n×2n`
    /// fundamental matrix `phi` (row-major).
    #[allow(clippy::too_many_arguments)]
    pub fn advance_tangent<H: Hamiltonian<S> + ?Sized>(
        &mut self,
        h: &H,
        t0: S,
        t1: S,
        z: &mut [S],
        e: &mut S,
        phi: &mut [S],
        step_max: S,
        bbox: Option<&BoundingBox<S>>,
    ) -> Result<()> {
        self.advance_impl(h, t0, t1, z, e, Some(phi), step_max, bbox)
    }

    #[allow(clippy::too_many_arguments)]
    fn advance_impl<H: Hamiltonian<S> + ?Sized>(
        &mut self,
        h: &H,
        t0: S,
        t1: S,
        z: &mut [S],
        e: &mut S,
        mut phi: Option<&mut [S]>,
        step_max: S,
        bbox: Option<&BoundingBox<S>>,
    ) -> Result<()> {
        let n = self.n;
        let (count, dt) = step_plan(t0, t1, step_max);
        let mut y = [S::zero(); 33];
        let y = &mut y[..2 * n + 1];
        y[..2 * n].copy_from_slice(z);
        y[2 * n] = *e;
        for i in 0..count {
            let t = t0 + S::from_usize_lossy(i) * dt;
            self.step(h, t, dt, y, phi.as_deref_mut());
            if let Some(b) = bbox {
                if !b.contains(&y[..2 * n]) || y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::DomainEscape {
                        time: (t + dt).f64(),
                    });
                }
            }
        }
        z.copy_from_slice(&y[..2 * n]);
        *e = y[2 * n];
        Ok(())
    }
}

/// Integrates from `t0` to `t1`, recording states, energies and optionally
/// Jacobians.
pub fn integrate<S: Scalar, H: Hamiltonian<S> + ?Sized>(
    h: &H,
    z0: &[S],
    t0: S,
    t1: S,
    cfg: &FlowConfig<S>,
) -> Result<TrajectorySample<S>> {
    let n = h.dof();
    if z0.len() != 2 * n {
        return Err(Error::Dimension(format!(
            "state of length {} for {n} degrees of freedom",
            z0.len()
        )));
    }
    let mut rk = Rk4::new(n);
    let (count, dt) = step_plan(t0, t1, cfg.step);
    let mut y: Vec<S> = z0
        .iter()
        .copied()
        .chain(std::iter::once(S::zero()))
        .collect();
    let mut phi = cfg
        .tangent
        .then(|| Mat::<S>::identity(2 * n).as_slice().to_vec());
    let mut out = TrajectorySample {
        jacobians: cfg.tangent.then(Vec::new),
        ..Default::default()
    };
    let energy = |t: S, y: &[S]| h.value(t, &y[..n], &y[n..2 * n]) + y[2 * n];
    let push = |out: &mut TrajectorySample<S>, t: S, y: &[S], phi: &Option<Vec<S>>| {
        out.times.push(t);
        out.states.push(y[..2 * n].to_vec());
        out.energies.push(energy(t, y));
        if let (Some(js), Some(p)) = (out.jacobians.as_mut(), phi.as_ref()) {
            js.push(Mat::from_row_slice(2 * n, 2 * n, p));
        }
    };
    push(&mut out, t0, &y, &phi);
    for i in 0..count {
        let t = t0 + S::from_usize_lossy(i) * dt;
        rk.step(h, t, dt, &mut y, phi.as_deref_mut());
        if let Some(b) = &cfg.bbox {
            if !b.contains(&y[..2 * n]) || y.iter().any(|v| !v.is_finite()) {
                return Err(Error::DomainEscape {
                    time: (t + dt).f64(),
                });
            }
        }
        let last = i + 1 == count;
        if last || (cfg.record_every > 0 && (i + 1) % cfg.record_every == 0) {
            let tn = if last { t1 } else { t + dt };
            push(&mut out, tn, &y, &phi);
        }
    }
    Ok(out)
}

/// Flows `z0` from `t0` to `t1` and returns the end state.
pub fn flow_to<S: Scalar, H: Hamiltonian<S> + ?Sized>(
    h: &H,
    z0: &[S],
    t0: S,
    t1: S,
    step: S,
) -> Result<Vec<S>> {
    let mut rk = Rk4::new(h.dof());
    let mut z = z0.to_vec();
    let mut e = S::zero();
    rk.advance(h, t0, t1, &mut z, &mut e, step, None)?;
    Ok(z)
}

/// End state and fundamental matrix of the flow from `t0` to `t1`.
pub fn flow_with_tangent<S: Scalar, H: Hamiltonian<S> + ?Sized>(
    h: &H,
    z0: &[S],
    t0: S,
    t1: S,
    step: S,
) -> Result<(Vec<S>, Mat<S>)> {
    let n = h.dof();
    let mut rk = Rk4::new(n);
    let mut z = z0.to_vec();
    let mut e = S::zero();
    let mut phi = Mat::identity(2 * n);
    rk.advance_tangent(h, t0, t1, &mut z, &mut e, phi.as_mut_slice(), step, None)?;
    Ok((z, phi))
}

/// The time-one map from the section `t = 0`, with its Jacobian on request.
pub fn time_one_map<S: Scalar, H: Hamiltonian<S> + ?Sized>(
    h: &H,
    z0: &[S],
    step: S,
    jacobian: bool,
) -> Result<(Vec<S>, Option<Mat<S>>)> {
    if jacobian {
        let (z, j) = flow_with_tangent(h, z0, S::zero(), S::one(), step)?;
        Ok((z, Some(j)))
    } else {
        Ok((flow_to(h, z0, S::zero(), S::one(), step)?, None))
    }
}

/// `‖JᵀΩJ − Ω‖_max` for the standard symplectic form in `(q, p)` order.
pub fn symplecticity_defect<S: Scalar>(j: &Mat<S>) -> S {
    let n = j.rows() / 2;
    let omega = crate::linalg::symplectic_form::<S>(n);
    let pull = &(&j.transpose() * &omega) * j;
    (&pull - &omega).max_abs()
}
