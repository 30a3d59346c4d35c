//! Linear hyperbolic reduction of the normal dynamics: SPD roots, the
//! matrices `L` and `D`, and the `(x, y)` change of variables.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{ball_samples, AveragedData};
use crate::report::CertificateReport;
use crate::scalar::Scalar;

/// Symmetric positive definite matrix with its eigendecomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix<S> {
    mat: Mat<S>,
    vals: Vec<S>,
    vecs: Mat<S>,
}

impl<S: Scalar> SpdMatrix<S> {
    pub fn new(m: Mat<S>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "{}×{} matrix is not square",
                m.rows(),
                m.cols()
            )));
        }
        let scale = S::one() + m.max_abs();
        if m.asymmetry() > S::lit(1e-12) * scale {
            return Err(Error::NotSpd {
                min_eigenvalue: f64::NAN,
            });
        }
        let sym = m.symmetric_part();
        let (vals, vecs) = sym.symmetric_eigen();
        let min = vals[0];
        if !(min > S::lit(1e-14) * scale) {
            return Err(Error::NotSpd {
                min_eigenvalue: min.f64(),
            });
        }
        Ok(Self {
            mat: sym,
            vals,
            vecs,
        })
    }

    pub fn from_diag(d: &[S]) -> Result<Self> {
        Self::new(Mat::from_diag(d))
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &Mat<S> {
        &self.mat
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> &[S] {
        &self.vals
    }

    pub fn eigenvectors(&self) -> &Mat<S> {
        &self.vecs
    }

    pub fn min_eigenvalue(&self) -> S {
        self.vals[0]
    }

    pub fn max_eigenvalue(&self) -> S {
        self.vals[self.vals.len() - 1]
    }

    /// `M^s` through the eigendecomposition.
    pub fn pow(&self, s: S) -> Self {
        let vals: Vec<S> = self.vals.iter().map(|&l| l.powf(s)).collect();
        let n = self.dim();
        let mut mat = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = S::zero();
                for k in 0..n {
                    acc += self.vecs[(i, k)] * vals[k] * self.vecs[(j, k)];
                }
                mat[(i, j)] = acc;
            }
        }
        let mat = mat.symmetric_part();
        Self {
            mat,
            vals: if s >= S::zero() {
                vals
            } else {
                vals.into_iter().rev().collect()
            },
            vecs: if s >= S::zero() {
                self.vecs.clone()
            } else {
                let mut v = Mat::zeros(n, n);
                for k in 0..n {
                    v.set_column(k, &self.vecs.column(n - 1 - k));
                }
                v
            },
        }
    }

    pub fn sqrt(&self) -> Self {
        self.pow(S::lit(0.5))
    }

    pub fn inverse(&self) -> Self {
        self.pow(-S::one())
    }

    pub fn inv_sqrt(&self) -> Self {
        self.pow(S::lit(-0.5))
    }
}

/// Symmetric positive definite square root.
pub fn spd_sqrt<S: Scalar>(m: &Mat<S>) -> Result<SpdMatrix<S>> {
    Ok(SpdMatrix::new(m.clone())?.sqrt())
}

/// The SPD solution of `L²AL² = B`:
/// `L = (A^{-1/2}(A^{1/2}BA^{1/2})^{1/2}A^{-1/2})^{1/2}`.
pub fn compute_l<S: Scalar>(a: &SpdMatrix<S>, b: &SpdMatrix<S>) -> Result<SpdMatrix<S>> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension("A and B must have equal dimension".into()));
    }
    let ah = a.sqrt();
    let amh = a.inv_sqrt();
    let inner = SpdMatrix::new(&(ah.matrix() * b.matrix()) * ah.matrix())?.sqrt();
    let l2 = SpdMatrix::new(&(amh.matrix() * inner.matrix()) * amh.matrix())?;
    Ok(l2.sqrt())
}

/// `‖L²AL² − B‖_max`.
pub fn l_residual<S: Scalar>(l: &SpdMatrix<S>, a: &Mat<S>, b: &Mat<S>) -> S {
    let l2 = l.matrix() * l.matrix();
    let lhs = &(&(&l2 * a) * &l2) - b;
    lhs.max_abs()
}

/// The two expressions `LAL` and `L⁻¹BL⁻¹` for `D`.
pub fn d_forms<S: Scalar>(l: &SpdMatrix<S>, a: &Mat<S>, b: &Mat<S>) -> (Mat<S>, Mat<S>) {
    let li = l.inverse();
    let d1 = &(l.matrix() * a) * l.matrix();
    let d2 = &(li.matrix() * b) * li.matrix();
    (d1, d2)
}

/// Linear part of the normal dynamics at one base point `p₁`.
#[derive(Clone, Debug)]
pub struct LocalFrame<S> {
    pub p1: Vec<S>,
    /// `P₂(p₁)`
    pub p2: Vec<S>,
    pub l: Mat<S>,
    pub l_inv: Mat<S>,
    pub d: SpdMatrix<S>,
}

impl<S: Scalar> LocalFrame<S> {
    /// `x = L(p₂ − P₂) + εL⁻¹q₂`, `y = L(p₂ − P₂) − εL⁻¹q₂`.
    pub fn to_xy(&self, q2: &[S], p2: &[S], epsilon: S) -> (Vec<S>, Vec<S>) {
        let dp: Vec<S> = p2.iter().zip(&self.p2).map(|(&a, &b)| a - b).collect();
        let u = self.l.mul_vec(&dp);
        let v = self.l_inv.mul_vec(q2);
        let x = u.iter().zip(&v).map(|(&u, &v)| u + epsilon * v).collect();
        let y = u.iter().zip(&v).map(|(&u, &v)| u - epsilon * v).collect();
        (x, y)
    }

    /// `q₂ = L(x − y)/2ε`, `p₂ = P₂ + L⁻¹(x + y)/2`.
    pub fn from_xy(&self, x: &[S], y: &[S], epsilon: S) -> (Vec<S>, Vec<S>) {
        let half = S::lit(0.5);
        let diff: Vec<S> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
        let sum: Vec<S> = x.iter().zip(y).map(|(&a, &b)| (a + b) * half).collect();
        let q2 = self
            .l
            .mul_vec(&diff)
            .into_iter()
            .map(|v| v * half / epsilon)
            .collect();
        let p2 = self
            .l_inv
            .mul_vec(&sum)
            .into_iter()
            .zip(&self.p2)
            .map(|(v, &c)| c + v)
            .collect();
        (q2, p2)
    }
}

/// Reduction data over the working ball `‖p₁ − p₁⁰‖_∞ ≤ δ`.
#[derive(Clone, Debug)]
pub struct ReductionData<S> {
    pub avg: AveragedData<S>,
    pub a: SpdMatrix<S>,
    pub delta: S,
    /// Scaling of the fast angles, `θ = εαq₁`.
    pub alpha: S,
    /// Lower bound of the expansion rate: min over the ball of `λ_min(D)`.
    pub a_rate: S,
    /// Largest eigenvalue of `D` over the ball.
    pub d_max: S,
    /// `sup ‖∂_{p₁}Ω₀‖` over the ball.
    pub torsion_sup: S,
    /// C¹ bound `α·sup‖∂Ω₀‖` of the principal slow field.
    pub b_rate: S,
}

/// Step of the central differences used for `∂_{p₁}L`.
const DL_STEP: f64 = 1e-5;

impl<S: Scalar> ReductionData<S> {
    /// Samples the ball, fixes `α = min(0.5, 0.5·a/sup‖∂Ω₀‖)` unless overridden.
    pub fn new(avg: &AveragedData<S>, delta: S, alpha: Option<S>) -> Result<Self> {
        let a = SpdMatrix::new(avg.a.clone())?;
        let mut rd = Self {
            avg: avg.clone(),
            a,
            delta,
            alpha: S::lit(0.5),
            a_rate: S::infinity(),
            d_max: S::zero(),
            torsion_sup: S::zero(),
            b_rate: S::zero(),
        };
        let per_axis = 9;
        for p1 in ball_samples(avg.spec.p1_ref(), delta, per_axis) {
            let d = rd.d(&p1)?;
            rd.a_rate = rd.a_rate.min(d.min_eigenvalue());
            rd.d_max = rd.d_max.max(d.max_eigenvalue());
            rd.torsion_sup = rd.torsion_sup.max(avg.torsion(&p1)?.spectral_norm());
        }
        let half = S::lit(0.5);
        rd.alpha = match alpha {
            Some(a) => a,
            None if rd.torsion_sup > S::zero() => half.min(half * rd.a_rate / rd.torsion_sup),
            None => half,
        };
        rd.b_rate = rd.alpha * rd.torsion_sup;
        Ok(rd)
    }

    pub fn m(&self) -> usize {
        self.avg.spec.m
    }

    pub fn r(&self) -> usize {
        self.avg.spec.r
    }

    pub fn b(&self, p1: &[S]) -> Result<SpdMatrix<S>> {
        SpdMatrix::new(self.avg.b(p1)?)
    }

    pub fn l(&self, p1: &[S]) -> Result<SpdMatrix<S>> {
        compute_l(&self.a, &self.b(p1)?)
    }

    /// `D(p₁) = L A L`.
    pub fn d(&self, p1: &[S]) -> Result<SpdMatrix<S>> {
        let l = self.l(p1)?;
        SpdMatrix::new(&(l.matrix() * self.a.matrix()) * l.matrix())
    }

    pub fn frame(&self, p1: &[S]) -> Result<LocalFrame<S>> {
        let l = self.l(p1)?;
        let d = SpdMatrix::new(&(l.matrix() * self.a.matrix()) * l.matrix())?;
        Ok(LocalFrame {
            p1: p1.to_vec(),
            p2: self.avg.p2(p1)?,
            l_inv: l.inverse().matrix().clone(),
            l: l.matrix().clone(),
            d,
        })
    }

    /// `∂L/∂p₁_k` by central differences, one matrix per component.
    pub fn dl(&self, p1: &[S]) -> Result<Vec<Mat<S>>> {
        let h = S::lit(DL_STEP);
        (0..p1.len())
            .map(|k| {
                let (mut pp, mut pm) = (p1.to_vec(), p1.to_vec());
                pp[k] += h;
                pm[k] -= h;
                let lp = self.l(&pp)?;
                let lm = self.l(&pm)?;
                Ok((lp.matrix() - lm.matrix()).scale(S::one() / (h + h)))
            })
            .collect()
    }

    /// `∂(L⁻¹)/∂p₁_k = −L⁻¹ (∂L/∂p₁_k) L⁻¹`.
    pub fn dl_inv(&self, p1: &[S]) -> Result<Vec<Mat<S>>> {
        let li = self.l(p1)?.inverse();
        Ok(self
            .dl(p1)?
            .into_iter()
            .map(|dl| (&(li.matrix() * &dl) * li.matrix()).scale(-S::one()))
            .collect())
    }
}

/// `(q₂, p₂) ↦ (x, y)` at base `p₁`.
pub fn xy_change<S: Scalar>(
    q2: &[S],
    p2: &[S],
    p1: &[S],
    epsilon: S,
    data: &ReductionData<S>,
) -> Result<(Vec<S>, Vec<S>)> {
    Ok(data.frame(p1)?.to_xy(q2, p2, epsilon))
}

/// `(x, y) ↦ (q₂, p₂)` at base `p₁`.
pub fn xy_inverse<S: Scalar>(
    x: &[S],
    y: &[S],
    p1: &[S],
    epsilon: S,
    data: &ReductionData<S>,
) -> Result<(Vec<S>, Vec<S>)> {
    Ok(data.frame(p1)?.from_xy(x, y, epsilon))
}

/// Conjugates the linear field of `½⟨Bp,p⟩ − ½⟨Aq,q⟩` by
/// `x = (Lp + L⁻¹q)/√2`, `y = (Lp − L⁻¹q)/√2` and checks it becomes
/// `diag(D, −D)`. The stable space is computed independently of `L` and
/// compared with the candidate closed forms `p = −L⁻²q` and `p = −L²q`.
pub fn linear_block_check<S: Scalar>(
    a: &SpdMatrix<S>,
    b: &SpdMatrix<S>,
) -> Result<CertificateReport> {
    let r = a.dim();
    let mut rep = CertificateReport::new("linear_block");
    let l = compute_l(a, b)?;
    let li = l.inverse();
    let (d1, d2) = d_forms(&l, a.matrix(), b.matrix());
    rep.check_le(
        "l_defining_residual",
        l_residual(&l, a.matrix(), b.matrix()).f64(),
        1e-10,
    );
    rep.check_le("d_forms_agree", (&d1 - &d2).max_abs().f64(), 1e-10);

    let mut m = Mat::zeros(2 * r, 2 * r);
    let mut t = Mat::zeros(2 * r, 2 * r);
    let s = S::one() / S::lit(2.0).sqrt();
    for i in 0..r {
        for j in 0..r {
            m[(i, r + j)] = b.matrix()[(i, j)];
            m[(r + i, j)] = a.matrix()[(i, j)];
            t[(i, j)] = s * li.matrix()[(i, j)];
            t[(i, r + j)] = s * l.matrix()[(i, j)];
            t[(r + i, j)] = -s * li.matrix()[(i, j)];
            t[(r + i, r + j)] = s * l.matrix()[(i, j)];
        }
    }
    let conj = &(&t * &m) * &t.inverse()?;
    let mut block = S::zero();
    for i in 0..r {
        for j in 0..r {
            block = block
                .max((conj[(i, j)] - d1[(i, j)]).abs())
                .max((conj[(r + i, r + j)] + d1[(i, j)]).abs())
                .max(conj[(i, r + j)].abs())
                .max(conj[(r + i, j)].abs());
        }
    }
    rep.check_le("block_diagonal_residual", block.f64(), 1e-10);

    // Stable solutions q(t) = e^{−Ct}q₀ with C² = BA and p = −B⁻¹Cq:
    // B⁻¹C = B^{-1/2}(B^{1/2}AB^{1/2})^{1/2}B^{-1/2}.
    let bh = b.sqrt();
    let bmh = b.inv_sqrt();
    let inner = SpdMatrix::new(&(bh.matrix() * a.matrix()) * bh.matrix())?.sqrt();
    let k = &(bmh.matrix() * inner.matrix()) * bmh.matrix();
    let invariance = (&(&(&k * b.matrix()) * &k) - a.matrix()).max_abs();
    rep.check_le("stable_space_invariance", invariance.f64(), 1e-10);
    let l2 = l.matrix() * l.matrix();
    let lm2 = li.matrix() * li.matrix();
    let match_inverse = (&k - &lm2).max_abs().f64();
    let match_direct = (&k - &l2).max_abs().f64();
    rep.check_le("stable_space_matches_x_equals_zero", match_inverse, 1e-10);
    rep.record("stable_space_vs_minus_l_inv_squared", match_inverse);
    rep.record("stable_space_vs_minus_l_squared", match_direct);
    rep.record(
        "stable_space_closed_form",
        if match_inverse <= 1e-10 {
            "p = -L^-2 q"
        } else if match_direct <= 1e-10 {
            "p = -L^2 q"
        } else {
            "neither"
        },
    );
    let rows: Vec<Vec<f64>> = (0..r)
        .map(|i| (0..r).map(|j| -k[(i, j)].f64()).collect())
        .collect();
    rep.record("stable_space_p_of_q", rows);
    let dvals: Vec<f64> = SpdMatrix::new(d1)?
        .eigenvalues()
        .iter()
        .map(|v| v.f64())
        .collect();
    rep.record("d_eigenvalues", dvals);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin::pendulum_cylinder;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn random_spd(seed: &[f64], n: usize) -> Mat<f64> {
        let g = Mat::from_row_slice(n, n, &seed[..n * n]);
        let mut m = &g * &g.transpose();
        for i in 0..n {
            m[(i, i)] += 0.1;
        }
        m
    }

    #[test]
    fn sqrt_examples() {
        let i = spd_sqrt(&Mat::<f64>::identity(3)).unwrap();
        assert!((i.matrix() - &Mat::identity(3)).max_abs() < 1e-15);
        let d = spd_sqrt(&Mat::from_diag(&[4.0, 9.0])).unwrap();
        assert!((d.matrix() - &Mat::from_diag(&[2.0, 3.0])).max_abs() < 1e-15);
        assert!(spd_sqrt(&Mat::from_diag(&[1.0, -1.0])).is_err());
        assert!(spd_sqrt(&Mat::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]])).is_err());
    }

    #[test]
    fn scalar_l_and_d() {
        let a = SpdMatrix::from_diag(&[4.0 * PI * PI]).unwrap();
        let b = SpdMatrix::from_diag(&[1.0]).unwrap();
        let l = compute_l(&a, &b).unwrap();
        let want = (2.0 * PI).powf(-0.5);
        assert!((l.matrix()[(0, 0)] - want).abs() < 1e-15);
        assert!((want - 0.3989).abs() < 1e-4);
        let (d1, d2) = d_forms(&l, a.matrix(), b.matrix());
        assert!((d1[(0, 0)] - 2.0 * PI).abs() < 1e-13 && (d2[(0, 0)] - 2.0 * PI).abs() < 1e-13);
        let i = SpdMatrix::from_diag(&[1.0, 1.0]).unwrap();
        assert!((compute_l(&i, &i).unwrap().matrix() - &Mat::identity(2)).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_pairs_are_exact() {
        let a = SpdMatrix::from_diag(&[2.0, 0.5, 7.0]).unwrap();
        let b = SpdMatrix::from_diag(&[3.0, 1.5, 0.2]).unwrap();
        let l = compute_l(&a, &b).unwrap();
        for (i, (&ai, &bi)) in [2.0f64, 0.5, 7.0]
            .iter()
            .zip(&[3.0f64, 1.5, 0.2])
            .enumerate()
        {
            assert!((l.matrix()[(i, i)] - (bi / ai).powf(0.25)).abs() < 1e-12);
        }
    }

    #[test]
    fn xy_scalar_example_and_roundtrip() {
        let spec = pendulum_cylinder::<f64>(0.3, 0.1);
        let avg = AveragedData::new(&spec).unwrap();
        let rd = ReductionData::new(&avg, 0.2, None).unwrap();
        let p1 = [spec.omega[0]];
        let (x, y) = xy_change(&[0.01], &[0.02], &p1, 0.1, &rd).unwrap();
        let l = (2.0 * PI).powf(-0.5);
        assert!((x[0] - (l * 0.02 + 0.1 * 0.01 / l)).abs() < 1e-15);
        assert!((x[0] - 0.010485).abs() < 1e-5);
        let (q2, p2) = xy_inverse(&x, &y, &p1, 0.1, &rd).unwrap();
        assert!((q2[0] - 0.01).abs() < 1e-13 && (p2[0] - 0.02).abs() < 1e-13);
        let (x0, y0) = xy_change(&[0.0], &[0.0], &p1, 0.1, &rd).unwrap();
        assert_eq!((x0[0], y0[0]), (0.0, 0.0));
        assert!((rd.alpha - 0.5).abs() < 1e-15);
        assert!((rd.a_rate - 2.0 * PI).abs() < 1e-12);
        assert!((rd.b_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn linear_block_examples() {
        let i = SpdMatrix::from_diag(&[1.0]).unwrap();
        let rep = linear_block_check(&i, &i).unwrap();
        assert!(rep.passed, "{}", rep.failure_summary());
        assert_eq!(rep.values["stable_space_p_of_q"][0][0].as_f64(), Some(-1.0));
        let a = SpdMatrix::from_diag(&[4.0 * PI * PI]).unwrap();
        let rep = linear_block_check(&a, &i).unwrap();
        assert!(rep.passed);
        assert!((rep.values["d_eigenvalues"][0].as_f64().unwrap() - 2.0 * PI).abs() < 1e-12);
        assert_eq!(rep.values["stable_space_closed_form"], "p = -L^-2 q");
    }

    fn matrices(n: usize) -> impl Strategy<Value = (Mat<f64>, Mat<f64>)> {
        (
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(-1.0f64..1.0, n * n),
        )
            .prop_map(move |(a, b)| (random_spd(&a, n), random_spd(&b, n)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn l_solves_defining_equation((a, b) in (1usize..=6).prop_flat_map(matrices)) {
            let sa = SpdMatrix::new(a.clone()).unwrap();
            let sb = SpdMatrix::new(b.clone()).unwrap();
            let l = compute_l(&sa, &sb).unwrap();
            let scale = 1.0 + a.max_abs().max(b.max_abs());
            prop_assert!(l_residual(&l, &a, &b) <= 1e-10 * scale);
            let (d1, d2) = d_forms(&l, &a, &b);
            prop_assert!((&d1 - &d2).max_abs() <= 1e-10 * scale);
            let rep = linear_block_check(&sa, &sb).unwrap();
            prop_assert!(rep.get_check("block_diagonal_residual").unwrap().measured <= 1e-9 * scale);
        }

        #[test]
        fn sqrt_squares_back((a, _) in (1usize..=6).prop_flat_map(matrices), c in 0.01f64..100.0) {
            let s = spd_sqrt(&a).unwrap();
            prop_assert!((&(s.matrix() * s.matrix()) - &a).max_abs() <= 1e-10 * (1.0 + a.max_abs()));
            let sc = spd_sqrt(&a.scale(c)).unwrap();
            prop_assert!((sc.matrix() - &s.matrix().scale(c.sqrt())).max_abs() <= 1e-12 * (1.0 + c) * (1.0 + a.max_abs()));
        }
    }
}
