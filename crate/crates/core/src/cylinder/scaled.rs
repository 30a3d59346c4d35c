//! Scaled coordinates `(τ, θ, r, x, y)` and the pushforward of a
//! Hamiltonian field into them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Hamiltonian, PhaseJet};
use crate::linalg::Mat;
use crate::reduction::{LocalFrame, ReductionData};
use crate::scalar::Scalar;

/// `τ = εt`, `θ = εαq₁`, `r = p₁`, and `(x, y)` from the local frame at `r`.
#[derive(Clone, Debug)]
pub struct ScaledChart<'a, S> {
    pub red: &'a ReductionData<S>,
    pub epsilon: S,
    pub alpha: S,
}

impl<'a, S: Scalar> ScaledChart<'a, S> {
    pub fn new(red: &'a ReductionData<S>, epsilon: S) -> Self {
        Self {
            red,
            epsilon,
            alpha: red.alpha,
        }
    }

    fn mr(&self) -> (usize, usize) {
        (self.red.m(), self.red.r())
    }

    /// Scaled state `(τ, θ, r, x, y)` to `(t, z)` with `z = (q₁, q₂, p₁, p₂)`.
    pub fn to_original(&self, state: &[S]) -> Result<(S, Vec<S>)> {
        let (m, r) = self.mr();
        let e = self.epsilon;
        let t = state[0] / e;
        let theta = &state[1..=m];
        let p1 = &state[1 + m..1 + 2 * m];
        let x = &state[1 + 2 * m..1 + 2 * m + r];
        let y = &state[1 + 2 * m + r..];
        let (q2, p2) = self.red.frame(p1)?.from_xy(x, y, e);
        let mut z: Vec<S> = theta.iter().map(|&th| th / (e * self.alpha)).collect();
        z.extend(q2);
        z.extend_from_slice(p1);
        z.extend(p2);
        Ok((t, z))
    }

    pub fn to_scaled(&self, t: S, z: &[S]) -> Result<Vec<S>> {
        let (m, r) = self.mr();
        let n = m + r;
        let frame = self.red.frame(&z[n..n + m])?;
        Ok(self.to_scaled_with(&frame, t, z))
    }

    pub fn to_scaled_with(&self, frame: &LocalFrame<S>, t: S, z: &[S]) -> Vec<S> {
        let (m, r) = self.mr();
        let n = m + r;
        let e = self.epsilon;
        let (x, y) = frame.to_xy(&z[m..n], &z[n + m..], e);
        let mut s = vec![e * t];
        s.extend(z[..m].iter().map(|&q| e * self.alpha * q));
        s.extend_from_slice(&z[n..n + m]);
        s.extend(x);
        s.extend(y);
        s
    }

    /// `∂(θ, r, x, y)/∂(q₁, q₂, p₁, p₂)` at `z`, with `∂_{p₁}L` by differences.
    pub fn jacobian(&self, z: &[S]) -> Result<Mat<S>> {
        let (m, r) = self.mr();
        let n = m + r;
        let e = self.epsilon;
        let p1 = &z[n..n + m];
        let frame = self.red.frame(p1)?;
        let dl = self.red.dl(p1)?;
        let dli = self.red.dl_inv(p1)?;
        let dp2 = self.red.avg.dp2(p1)?;
        let q2 = &z[m..n];
        let dev: Vec<S> = z[n + m..]
            .iter()
            .zip(&frame.p2)
            .map(|(&a, &b)| a - b)
            .collect();
        let mut jm = Mat::zeros(2 * n, 2 * n);
        for i in 0..m {
            jm[(i, i)] = e * self.alpha;
            jm[(m + i, n + i)] = S::one();
        }
        let (xr, yr) = (2 * m, 2 * m + r);
        for i in 0..r {
            for j in 0..r {
                jm[(xr + i, m + j)] = e * frame.l_inv[(i, j)];
                jm[(yr + i, m + j)] = -e * frame.l_inv[(i, j)];
                jm[(xr + i, n + m + j)] = frame.l[(i, j)];
                jm[(yr + i, n + m + j)] = frame.l[(i, j)];
            }
            for k in 0..m {
                let mut common = S::zero();
                let mut odd = S::zero();
                for j in 0..r {
                    common += dl[k][(i, j)] * dev[j] - frame.l[(i, j)] * dp2[(j, k)];
                    odd += e * dli[k][(i, j)] * q2[j];
                }
                jm[(xr + i, n + k)] = common + odd;
                jm[(yr + i, n + k)] = common - odd;
            }
        }
        Ok(jm)
    }

    /// τ-derivative of `(θ, r, x, y)` given the t-derivative `ż` at `z`.
    pub fn pushforward(&self, z: &[S], zdot: &[S]) -> Result<Vec<S>> {
        let jm = self.jacobian(z)?;
        Ok(jm
            .mul_vec(zdot)
            .into_iter()
            .map(|v| v / self.epsilon)
            .collect())
    }

    /// Principal part `(αΩ(r, x, y), 0, D(r)x, −D(r)y)` with
    /// `Ω(r, x, y) = ∂_{p₁}h(r, P₂(r) + L⁻¹(x + y)/2)`.
    pub fn principal(&self, state: &[S]) -> Result<Vec<S>> {
        let (m, r) = self.mr();
        let p1 = &state[1 + m..1 + 2 * m];
        let x = &state[1 + 2 * m..1 + 2 * m + r];
        let y = &state[1 + 2 * m + r..];
        let frame = self.red.frame(p1)?;
        let sum: Vec<S> = x
            .iter()
            .zip(y)
            .map(|(&a, &b)| (a + b) * S::lit(0.5))
            .collect();
        let p2: Vec<S> = frame
            .l_inv
            .mul_vec(&sum)
            .iter()
            .zip(&frame.p2)
            .map(|(&a, &b)| a + b)
            .collect();
        let p = self.red.avg.spec.join(p1, &p2);
        let grad = self.red.avg.spec.h.gradient(&p);
        let mut out: Vec<S> = grad[..m].iter().map(|&w| self.alpha * w).collect();
        out.extend(std::iter::repeat(S::zero()).take(m));
        out.extend(frame.d.matrix().mul_vec(x));
        out.extend(frame.d.matrix().mul_vec(y).into_iter().map(|v| -v));
        Ok(out)
    }
}

/// Field of `h` in scaled coordinates (τ-derivative of `(θ, r, x, y)`).
///
/// The state must satisfy `‖x‖ ≤ 1`, `‖y‖ ≤ 1` and `r ∈ B`.
pub fn scaled_field<S: Scalar, H: Hamiltonian<S>>(
    h: &H,
    red: &ReductionData<S>,
    epsilon: S,
    delta: S,
    state: &[S],
) -> Result<Vec<S>> {
    let chart = ScaledChart::new(red, epsilon);
    let (m, r) = (red.m(), red.r());
    let p1 = &state[1 + m..1 + 2 * m];
    let center = red.avg.spec.p1_ref();
    if let Some(i) = (0..m).find(|&i| (p1[i] - center[i]).abs() > delta) {
        return Err(Error::OutOfDomain(format!(
            "r_{} = {} outside B",
            i + 1,
            p1[i]
        )));
    }
    if let Some(v) = state[1 + 2 * m..].iter().find(|v| v.abs() > S::one()) {
        return Err(Error::OutOfDomain(format!(
            "normal coordinate {v} outside the unit box"
        )));
    }
    let _ = r;
    let (t, z) = chart.to_original(state)?;
    let zdot = h.field(t, &z);
    chart.pushforward(&z, &zdot)
}

/// Supremum of the normal remainder `R = (x' − Dx, y' + Dy)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemainderBound {
    pub sup: f64,
    pub sup_x: f64,
    pub sup_y: f64,
    /// `(t, q₁…, q₂…, p₁…, p₂…)` where the sup is attained.
    pub argmax: Vec<f64>,
    pub samples: usize,
}

/// Samples `R` over the coincidence box `‖q₂‖ ≤ √δ`, `‖p₁ − p₁⁰‖ ≤ δ`,
/// `‖p₂ − P₂(p₁)‖ ≤ ε` on a tensor grid with `per_axis` points per
/// non-angular axis and `2·per_axis` per angle.
pub fn remainder_sup<S: Scalar, H: Hamiltonian<S>>(
    h: &H,
    red: &ReductionData<S>,
    epsilon: S,
    delta: S,
    per_axis: usize,
) -> Result<RemainderBound> {
    let (m, r) = (red.m(), red.r());
    let n = m + r;
    let k = per_axis.max(2);
    let na = 2 * k;
    let lin = |lo: S, hi: S, i: usize| {
        lo + (hi - lo) * S::from_usize_lossy(i) / S::from_usize_lossy(k - 1)
    };
    let center = red.avg.spec.p1_ref().to_vec();
    let sq = delta.sqrt();
    let mut best = RemainderBound {
        sup: 0.0,
        sup_x: 0.0,
        sup_y: 0.0,
        argmax: vec![],
        samples: 0,
    };
    let mut jet = PhaseJet::new(n);
    let mut zdot = vec![S::zero(); 2 * n];
    let count = |base: usize, dims: usize| base.pow(dims as u32);
    for ip in 0..count(k, m) {
        let p1: Vec<S> = (0..m)
            .map(|i| {
                lin(
                    center[i] - delta,
                    center[i] + delta,
                    (ip / k.pow(i as u32)) % k,
                )
            })
            .collect();
        let frame = red.frame(&p1)?;
        let dl = red.dl(&p1)?;
        let dli = red.dl_inv(&p1)?;
        let dp2 = red.avg.dp2(&p1)?;
        for ia in 0..count(na, 1 + m) {
            let ang: Vec<S> = (0..=m)
                .map(|i| {
                    S::from_usize_lossy((ia / na.pow(i as u32)) % na) / S::from_usize_lossy(na)
                })
                .collect();
            for iq in 0..count(k, 2 * r) {
                let q2: Vec<S> = (0..r)
                    .map(|i| lin(-sq, sq, (iq / k.pow(i as u32)) % k))
                    .collect();
                let dev: Vec<S> = (0..r)
                    .map(|i| lin(-epsilon, epsilon, (iq / k.pow((r + i) as u32)) % k))
                    .collect();
                let mut z = ang[1..].to_vec();
                z.extend_from_slice(&q2);
                z.extend_from_slice(&p1);
                z.extend(dev.iter().zip(&frame.p2).map(|(&a, &b)| a + b));
                h.jet(ang[0], &z[..n], &z[n..], false, &mut jet);
                jet.field_into(&mut zdot);
                let (x, y) = frame.to_xy(&z[m..n], &z[n + m..], epsilon);
                let dx = frame.d.matrix().mul_vec(&x);
                let dy = frame.d.matrix().mul_vec(&y);
                for i in 0..r {
                    let mut common = S::zero();
                    let mut odd = S::zero();
                    for j in 0..r {
                        common += frame.l[(i, j)] * zdot[n + m + j];
                        odd += epsilon * frame.l_inv[(i, j)] * zdot[m + j];
                        for kk in 0..m {
                            let pd = zdot[n + kk];
                            common +=
                                (dl[kk][(i, j)] * dev[j] - frame.l[(i, j)] * dp2[(j, kk)]) * pd;
                            odd += epsilon * dli[kk][(i, j)] * q2[j] * pd;
                        }
                    }
                    let rx = ((common + odd) / epsilon - dx[i]).abs().f64();
                    let ry = ((common - odd) / epsilon + dy[i]).abs().f64();
                    best.sup_x = best.sup_x.max(rx);
                    best.sup_y = best.sup_y.max(ry);
                    if rx.max(ry) > best.sup {
                        best.sup = rx.max(ry);
                        let mut arg = vec![ang[0].f64()];
                        arg.extend(z.iter().map(|v| v.f64()));
                        best.argmax = arg;
                    }
                }
                best.samples += 1;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::averaging::NormalFormH1;
    use crate::flow::flow_to;
    use crate::hamiltonian::QuadraticModel;
    use crate::model::builtin::pendulum_cylinder;
    use crate::model::AveragedData;
    use crate::polynomial::Polynomial;
    use std::f64::consts::PI;

    fn setup(mu: f64, eps: f64) -> (NormalFormH1<f64>, ReductionData<f64>) {
        let spec = pendulum_cylinder::<f64>(mu, eps);
        let avg = AveragedData::new(&spec).unwrap();
        let red = ReductionData::new(&avg, 0.2, None).unwrap();
        (NormalFormH1::new(&spec).unwrap(), red)
    }

    #[test]
    fn quadratic_model_reduces_to_principal_part() {
        let (_, red) = setup(0.0, 0.05);
        let model = QuadraticModel {
            h: Polynomial::kinetic(2),
            a: red.a.matrix().clone(),
            m: 1,
            epsilon: 0.05,
        };
        let chart = ScaledChart::new(&red, 0.05);
        for state in [
            [0.01, 0.003, 0.7, 0.3, -0.2],
            [0.2, 0.0, 0.5, 0.0, 0.0],
            [0.0, 0.01, 0.62, -0.9, 0.4],
        ] {
            let f = scaled_field(&model, &red, 0.05, 0.2, &state).unwrap();
            let p = chart.principal(&state).unwrap();
            for (a, b) in f.iter().zip(&p) {
                assert!((a - b).abs() < 1e-9, "{f:?} vs {p:?}");
            }
            assert!((f[2] - 2.0 * PI * state[3]).abs() < 1e-9);
        }
        let on = scaled_field(&model, &red, 0.05, 0.2, &[0.0, 0.0, 0.7, 0.0, 0.0]).unwrap();
        assert_eq!((on[2], on[3]), (0.0, 0.0));
    }

    #[test]
    fn domain_escape_is_flagged() {
        let (h1, red) = setup(0.3, 0.05);
        assert!(matches!(
            scaled_field(&h1, &red, 0.05, 0.2, &[0.0, 0.0, 0.7, 1.5, 0.0]),
            Err(Error::OutOfDomain(_))
        ));
        assert!(matches!(
            scaled_field(&h1, &red, 0.05, 0.2, &[0.0, 0.0, 0.3, 0.0, 0.0]),
            Err(Error::OutOfDomain(_))
        ));
    }

    #[test]
    fn pushforward_matches_differenced_flow() {
        let (h1, red) = setup(0.3, 0.05);
        let eps = 0.05;
        let chart = ScaledChart::new(&red, eps);
        let state = [0.013, 0.004, 0.66, 0.21, -0.37];
        let (t, z) = chart.to_original(&state).unwrap();
        let field = scaled_field(&h1, &red, eps, 0.2, &state).unwrap();
        let dt = 1e-3;
        let zp = flow_to(&h1, &z, t, t + dt, 1e-4).unwrap();
        let zm = flow_to(&h1, &z, t, t - dt, 1e-4).unwrap();
        let sp = chart.to_scaled(t + dt, &zp).unwrap();
        let sm = chart.to_scaled(t - dt, &zm).unwrap();
        for i in 0..4 {
            let fd = (sp[1 + i] - sm[1 + i]) / (2.0 * dt * eps);
            assert!(
                (fd - field[i]).abs() < 1e-6,
                "component {i}: {fd} vs {}",
                field[i]
            );
        }
        let back = chart.to_scaled(t, &z).unwrap();
        for (a, b) in back.iter().zip(&state) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn remainder_vanishes_for_quadratic_model_only() {
        let (h1, red) = setup(0.3, 0.05);
        let model = QuadraticModel {
            h: Polynomial::kinetic(2),
            a: red.a.matrix().clone(),
            m: 1,
            epsilon: 0.05,
        };
        let quad = remainder_sup(&model, &red, 0.05, 0.2, 3).unwrap();
        assert!(quad.sup < 1e-10, "{}", quad.sup);
        let full = remainder_sup(&h1, &red, 0.05, 0.2, 3).unwrap();
        assert!(full.sup > 1e-3);
        assert_eq!(full.samples, 3 * 36 * 9);
    }
}
