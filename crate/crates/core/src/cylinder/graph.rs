//! Tensor-product interpolation and the graph container.
//!
//! Periodic axes use trigonometric (periodic sinc) interpolation, bounded
//! axes use barycentric interpolation on Chebyshev–Lobatto points.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Periodic,
    Chebyshev,
}

/// One interpolation axis. Periodic axes have period 1 and nodes `k/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axis<S> {
    pub kind: AxisKind,
    pub n: usize,
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> Axis<S> {
    pub fn periodic(n: usize) -> Self {
        Self {
            kind: AxisKind::Periodic,
            n: n.max(1),
            lo: S::zero(),
            hi: S::one(),
        }
    }

    pub fn chebyshev(n: usize, lo: S, hi: S) -> Self {
        Self {
            kind: AxisKind::Chebyshev,
            n: n.max(1),
            lo,
            hi,
        }
    }

    pub fn node(&self, k: usize) -> S {
        match self.kind {
            AxisKind::Periodic => S::from_usize_lossy(k) / S::from_usize_lossy(self.n),
            AxisKind::Chebyshev => {
                let half = S::lit(0.5);
                let mid = half * (self.lo + self.hi);
                if self.n == 1 {
                    return mid;
                }
                let c = (S::PI() * S::from_usize_lossy(k) / S::from_usize_lossy(self.n - 1)).cos();
                mid + half * (self.hi - self.lo) * c
            }
        }
    }

    pub fn nodes(&self) -> Vec<S> {
        (0..self.n).map(|k| self.node(k)).collect()
    }

    /// Interpolation weights at `x`, zero weights omitted.
    pub fn weights(&self, x: S, out: &mut Vec<(usize, S)>) {
        out.clear();
        let n = self.n;
        if n == 1 {
            out.push((0, S::one()));
            return;
        }
        match self.kind {
            AxisKind::Periodic => {
                let nf = S::from_usize_lossy(n);
                let xs = x * nf;
                let k = xs.round();
                if (xs - k).abs() < S::lit(64.0) * S::epsilon() * (S::one() + xs.abs()) {
                    let idx = k.to_i64().unwrap_or(0).rem_euclid(n as i64) as usize;
                    out.push((idx, S::one()));
                    return;
                }
                // Offset from the nearest node, shared by numerator and denominators
                // so that their rounding cancels near a node.
                let r = xs - k;
                let k0 = k.to_i64().unwrap_or(0).rem_euclid(n as i64);
                let parity = if k0 % 2 == 0 { S::one() } else { -S::one() };
                let s = parity * (S::PI() * r).sin() / nf;
                let even = n % 2 == 0;
                for j in 0..n {
                    let d = S::PI() * (r + S::from_int(k0 - j as i64)) / nf;
                    let sign = if j % 2 == 0 { S::one() } else { -S::one() };
                    let w = if even {
                        sign * s * d.cos() / d.sin()
                    } else {
                        sign * s / d.sin()
                    };
                    out.push((j, w));
                }
            }
            AxisKind::Chebyshev => {
                let tol = S::lit(64.0) * S::epsilon() * (S::one() + self.hi.abs() + self.lo.abs());
                let nodes = self.nodes();
                if let Some(k) = nodes.iter().position(|&xk| (x - xk).abs() < tol) {
                    out.push((k, S::one()));
                    return;
                }
                let mut total = S::zero();
                for (k, &xk) in nodes.iter().enumerate() {
                    let mut lam = if k % 2 == 0 { S::one() } else { -S::one() };
                    if k == 0 || k == n - 1 {
                        lam = lam * S::lit(0.5);
                    }
                    let w = lam / (x - xk);
                    total += w;
                    out.push((k, w));
                }
                for e in out.iter_mut() {
                    e.1 /= total;
                }
            }
        }
    }

    /// Differentiation matrix of the interpolant at the nodes.
    pub fn diff_matrix(&self) -> Mat<S> {
        let n = self.n;
        let mut d = Mat::zeros(n, n);
        if n == 1 {
            return d;
        }
        match self.kind {
            AxisKind::Periodic => {
                let nf = S::from_usize_lossy(n);
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let k = i as i64 - j as i64;
                        let sign = if k.rem_euclid(2) == 0 {
                            S::one()
                        } else {
                            -S::one()
                        };
                        let arg = S::PI() * S::from_int(k) / nf;
                        d[(i, j)] = if n % 2 == 0 {
                            S::PI() * sign * arg.cos() / arg.sin()
                        } else {
                            S::PI() * sign / arg.sin()
                        };
                    }
                }
            }
            AxisKind::Chebyshev => {
                let x: Vec<S> = (0..n)
                    .map(|k| (S::PI() * S::from_usize_lossy(k) / S::from_usize_lossy(n - 1)).cos())
                    .collect();
                let c = |k: usize| {
                    let base = if k == 0 || k == n - 1 {
                        S::lit(2.0)
                    } else {
                        S::one()
                    };
                    if k % 2 == 0 {
                        base
                    } else {
                        -base
                    }
                };
                let scale = S::lit(2.0) / (self.hi - self.lo);
                for i in 0..n {
                    let mut row = S::zero();
                    for j in 0..n {
                        if i != j {
                            let v = c(i) / c(j) / (x[i] - x[j]);
                            d[(i, j)] = v * scale;
                            row += v;
                        }
                    }
                    d[(i, i)] = -row * scale;
                }
            }
        }
        d
    }
}

/// Tensor grid; axis 0 varies slowest in the flat node index.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorGrid<S> {
    pub axes: Vec<Axis<S>>,
    strides: Vec<usize>,
}

impl<S: Scalar> TensorGrid<S> {
    pub fn new(axes: Vec<Axis<S>>) -> Self {
        let mut strides = vec![1; axes.len()];
        for i in (0..axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].n;
        }
        Self { axes, strides }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ndims(&self) -> usize {
        self.axes.len()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (i, &s) in self.strides.iter().enumerate() {
            idx[i] = flat / s;
            flat %= s;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(&i, &s)| i * s).sum()
    }

    pub fn node(&self, flat: usize) -> Vec<S> {
        self.multi_index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&k, a)| a.node(k))
            .collect()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }
}

/// Vector-valued function sampled on a [`TensorGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField<S> {
    pub grid: TensorGrid<S>,
    pub comps: usize,
    /// Node-major, `comps` values per node.
    pub values: Vec<S>,
}

/// Reusable buffers for [`TensorField::eval_into`].
#[derive(Clone, Debug, Default)]
pub struct InterpScratch<S> {
    weights: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> TensorField<S> {
    pub fn zeros(grid: TensorGrid<S>, comps: usize) -> Self {
        let len = grid.len() * comps;
        Self {
            grid,
            comps,
            values: vec![S::zero(); len],
        }
    }

    pub fn node_values(&self, flat: usize) -> &[S] {
        &self.values[flat * self.comps..(flat + 1) * self.comps]
    }

    pub fn node_values_mut(&mut self, flat: usize) -> &mut [S] {
        let c = self.comps;
        &mut self.values[flat * c..(flat + 1) * c]
    }

    pub fn eval_into(&self, x: &[S], out: &mut [S], scratch: &mut InterpScratch<S>) {
        let d = self.grid.ndims();
        scratch.weights.resize_with(d, Vec::new);
        for (i, axis) in self.grid.axes.iter().enumerate() {
            axis.weights(x[i], &mut scratch.weights[i]);
        }
        out[..self.comps].iter_mut().for_each(|v| *v = S::zero());
        self.contract(&scratch.weights, 0, 0, S::one(), out);
    }

    pub fn eval(&self, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.comps];
        self.eval_into(x, &mut out, &mut InterpScratch::default());
        out
    }

    fn contract(
        &self,
        weights: &[Vec<(usize, S)>],
        axis: usize,
        offset: usize,
        factor: S,
        out: &mut [S],
    ) {
        let stride = self.grid.stride(axis);
        if axis + 1 == weights.len() {
            let c = self.comps;
            for &(k, w) in &weights[axis] {
                let base = (offset + k * stride) * c;
                let fw = factor * w;
                for (o, &v) in out.iter_mut().zip(&self.values[base..base + c]) {
                    *o += fw * v;
                }
            }
        } else {
            for &(k, w) in &weights[axis] {
                self.contract(weights, axis + 1, offset + k * stride, factor * w, out);
            }
        }
    }

    /// Derivative of the interpolant along `axis`, sampled at the nodes.
    pub fn derivative_at_nodes(&self, axis: usize) -> Vec<S> {
        let dm = self.grid.axes[axis].diff_matrix();
        let n = self.grid.axes[axis].n;
        let stride = self.grid.stride(axis);
        let c = self.comps;
        let mut out = vec![S::zero(); self.values.len()];
        for flat in 0..self.grid.len() {
            let k = (flat / stride) % n;
            let base = flat - k * stride;
            for j in 0..n {
                let w = dm[(k, j)];
                if w == S::zero() {
                    continue;
                }
                let src = (base + j * stride) * c;
                for cc in 0..c {
                    out[flat * c + cc] += w * self.values[src + cc];
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> S {
        self.values.iter().fold(S::zero(), |m, &v| m.max(v.abs()))
    }
}

/// Grid sizes of a graph over `(t, q₁, p₁)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSizes {
    pub nt: usize,
    pub nq: usize,
    pub np: usize,
}

impl Default for GridSizes {
    fn default() -> Self {
        Self {
            nt: 32,
            nq: 32,
            np: 33,
        }
    }
}

/// Graph `(t, q₁, p₁) ↦ (q₂, p₂)` sampled on a tensor grid. The `t` and `q₁`
/// axes are periodic; `p₁` runs over the box `B = p₁⁰ ± δ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphFunction<S> {
    pub m: usize,
    pub r: usize,
    pub epsilon: S,
    pub delta: S,
    pub p1_center: Vec<S>,
    pub field: TensorField<S>,
}

impl<S: Scalar> GraphFunction<S> {
    pub fn zeros(
        m: usize,
        r: usize,
        sizes: GridSizes,
        p1_center: &[S],
        epsilon: S,
        delta: S,
    ) -> Self {
        let mut axes = vec![Axis::periodic(sizes.nt)];
        axes.extend((0..m).map(|_| Axis::periodic(sizes.nq)));
        axes.extend(
            p1_center
                .iter()
                .map(|&c| Axis::chebyshev(sizes.np, c - delta, c + delta)),
        );
        Self {
            m,
            r,
            epsilon,
            delta,
            p1_center: p1_center.to_vec(),
            field: TensorField::zeros(TensorGrid::new(axes), 2 * r),
        }
    }

    pub fn sizes(&self) -> GridSizes {
        let a = &self.field.grid.axes;
        GridSizes {
            nt: a[0].n,
            nq: a[1].n,
            np: a[1 + self.m].n,
        }
    }

    pub fn len(&self) -> usize {
        self.field.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(t, q₁, p₁)` of a node.
    pub fn node(&self, flat: usize) -> (S, Vec<S>, Vec<S>) {
        let x = self.field.grid.node(flat);
        (x[0], x[1..=self.m].to_vec(), x[1 + self.m..].to_vec())
    }

    /// `t`-index of a node.
    pub fn t_index(&self, flat: usize) -> usize {
        flat / self.field.grid.stride(0)
    }

    pub fn point(t: S, q1: &[S], p1: &[S]) -> Vec<S> {
        let mut x = Vec::with_capacity(1 + 2 * q1.len());
        x.push(t);
        x.extend_from_slice(q1);
        x.extend_from_slice(p1);
        x
    }

    /// `(q₂, p₂)` at `(t, q₁, p₁)`; angles wrap.
    pub fn eval(&self, t: S, q1: &[S], p1: &[S]) -> (Vec<S>, Vec<S>) {
        let mut out = vec![S::zero(); 2 * self.r];
        self.eval_into(t, q1, p1, &mut out, &mut InterpScratch::default());
        let p2 = out.split_off(self.r);
        (out, p2)
    }

    pub fn eval_into(
        &self,
        t: S,
        q1: &[S],
        p1: &[S],
        out: &mut [S],
        scratch: &mut InterpScratch<S>,
    ) {
        let x = Self::point(
            wrap01(t),
            &q1.iter().map(|&q| wrap01(q)).collect::<Vec<_>>(),
            p1,
        );
        self.field.eval_into(&x, out, scratch);
    }

    /// Full phase point `(q, p)` on the graph.
    pub fn phase_point(&self, t: S, q1: &[S], p1: &[S]) -> Vec<S> {
        let (q2, p2) = self.eval(t, q1, p1);
        let mut z = q1.to_vec();
        z.extend(q2);
        z.extend_from_slice(p1);
        z.extend(p2);
        z
    }

    /// The `t = t_index` slice as a graph with a single time node.
    pub fn slice(&self, t_index: usize) -> Self {
        let mut g = Self::zeros(
            self.m,
            self.r,
            GridSizes {
                nt: 1,
                ..self.sizes()
            },
            &self.p1_center,
            self.epsilon,
            self.delta,
        );
        let per = self.field.grid.stride(0) * self.field.comps;
        g.field
            .values
            .copy_from_slice(&self.field.values[t_index * per..(t_index + 1) * per]);
        g
    }

    /// Node table in the export column order `t, q₁…, p₁…, q₂…, p₂…`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let mut header: Vec<String> = vec!["t".into()];
        header.extend((1..=self.m).map(|i| format!("q1_{i}")));
        header.extend((1..=self.m).map(|i| format!("p1_{i}")));
        header.extend((1..=self.r).map(|i| format!("q2_{i}")));
        header.extend((1..=self.r).map(|i| format!("p2_{i}")));
        s.push_str(&header.join(","));
        s.push('\n');
        for flat in 0..self.len() {
            let x = self.field.grid.node(flat);
            let vals = self.field.node_values(flat);
            let row: Vec<String> = x
                .iter()
                .chain(vals)
                .map(|v| format!("{}", v.f64()))
                .collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }

    pub fn header(&self) -> GraphHeader {
        GraphHeader {
            m: self.m,
            r: self.r,
            sizes: self.sizes(),
            epsilon: self.epsilon.f64(),
            delta: self.delta.f64(),
            p1_center: self.p1_center.iter().map(|v| v.f64()).collect(),
            columns: self.to_csv().lines().next().unwrap_or_default().to_string(),
        }
    }

    /// Rebuilds a graph from its header and node table.
    pub fn from_csv(header: &GraphHeader, csv: &str) -> Result<Self> {
        let center: Vec<S> = header.p1_center.iter().map(|&v| S::lit(v)).collect();
        let mut g = Self::zeros(
            header.m,
            header.r,
            header.sizes,
            &center,
            S::lit(header.epsilon),
            S::lit(header.delta),
        );
        let width = 1 + 2 * header.m + 2 * header.r;
        let mut count = 0;
        for (i, line) in csv
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .enumerate()
        {
            let cols: Vec<f64> = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("graph table row {}: {e}", i + 1)))?;
            if cols.len() != width || i >= g.len() {
                return Err(Error::Dimension(format!(
                    "graph table row {} has {} columns",
                    i + 1,
                    cols.len()
                )));
            }
            for (v, &c) in g
                .field
                .node_values_mut(i)
                .iter_mut()
                .zip(&cols[1 + 2 * header.m..])
            {
                *v = S::lit(c);
            }
            count += 1;
        }
        if count != g.len() {
            return Err(Error::Dimension(format!(
                "graph table has {count} rows, expected {}",
                g.len()
            )));
        }
        Ok(g)
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&self.header())?,
        )?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        Ok(())
    }

    pub fn read(dir: &Path, stem: &str) -> Result<Self> {
        let hp = dir.join(format!("{stem}.json"));
        let cp = dir.join(format!("{stem}.csv"));
        for p in [&hp, &cp] {
            if !p.exists() {
                return Err(Error::MissingArtifact(p.display().to_string()));
            }
        }
        let header: GraphHeader = serde_json::from_str(&std::fs::read_to_string(hp)?)?;
        Self::from_csv(&header, &std::fs::read_to_string(cp)?)
    }
}

/// JSON header of an exported graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphHeader {
    pub m: usize,
    pub r: usize,
    pub sizes: GridSizes,
    pub epsilon: f64,
    pub delta: f64,
    pub p1_center: Vec<f64>,
    pub columns: String,
}

/// Representative of an angle in `[0, 1)`.
pub fn wrap01<S: Scalar>(x: S) -> S {
    let y = x - x.floor();
    if y >= S::one() {
        S::zero()
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn periodic_interpolation_is_exact_for_band_limited() {
        for n in [8usize, 9] {
            let axis = Axis::<f64>::periodic(n);
            let f = |x: f64| {
                0.3 + (TAU * x).cos() - 0.5 * (2.0 * TAU * x).sin() + 0.2 * (3.0 * TAU * x).cos()
            };
            let grid = TensorGrid::new(vec![axis.clone()]);
            let mut fld = TensorField::zeros(grid, 1);
            for k in 0..n {
                fld.values[k] = f(axis.node(k));
            }
            let near = 3.0 / n as f64;
            for &x in &[
                0.0,
                0.013,
                0.37,
                0.5,
                0.99,
                1.25,
                -0.4,
                near - 1e-14,
                near + 1e-12,
                near - 1.2e-6,
            ] {
                assert!(
                    (fld.eval(&[wrap01(x)])[0] - f(x)).abs() < 1e-13,
                    "n={n} x={x}"
                );
            }
            let d = fld.derivative_at_nodes(0);
            for k in 0..n {
                let x = axis.node(k);
                let df = -TAU * (TAU * x).sin()
                    - TAU * (2.0 * TAU * x).cos()
                    - 0.6 * TAU * (3.0 * TAU * x).sin();
                assert!((d[k] - df).abs() < 1e-11, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn chebyshev_is_exact_for_polynomials() {
        let axis = Axis::<f64>::chebyshev(7, 0.4, 0.8);
        let f = |x: f64| 1.0 - 2.0 * x + 3.0 * x.powi(4) - x.powi(6);
        let mut fld = TensorField::zeros(TensorGrid::new(vec![axis.clone()]), 1);
        for k in 0..7 {
            fld.values[k] = f(axis.node(k));
        }
        for &x in &[0.4, 0.41, 0.6, 0.77, 0.8, 0.85] {
            assert!((fld.eval(&[x])[0] - f(x)).abs() < 1e-12, "x={x}");
        }
        let d = fld.derivative_at_nodes(0);
        for k in 0..7 {
            let x = axis.node(k);
            let df = -2.0 + 12.0 * x.powi(3) - 6.0 * x.powi(5);
            assert!((d[k] - df).abs() < 1e-10);
        }
    }

    #[test]
    fn tensor_graph_roundtrip_and_export() {
        let mut g = GraphFunction::<f64>::zeros(
            1,
            1,
            GridSizes {
                nt: 4,
                nq: 6,
                np: 5,
            },
            &[0.6],
            0.05,
            0.2,
        );
        let f = |t: f64, q: f64, p: f64| {
            (
                (TAU * t).cos() * (TAU * q).sin() * p,
                0.1 * p * p + (TAU * q).cos(),
            )
        };
        for i in 0..g.len() {
            let (t, q, p) = g.node(i);
            let (a, b) = f(t, q[0], p[0]);
            g.field.node_values_mut(i).copy_from_slice(&[a, b]);
        }
        let (q2, p2) = g.eval(0.3, &[1.7], &[0.55]);
        let (a, b) = f(0.3, 0.7, 0.55);
        assert!((q2[0] - a).abs() < 1e-12 && (p2[0] - b).abs() < 1e-12);
        let dir = tempfile::tempdir().unwrap();
        g.write(dir.path(), "graph").unwrap();
        let back = GraphFunction::<f64>::read(dir.path(), "graph").unwrap();
        assert_eq!(back, g);
        assert!(matches!(
            GraphFunction::<f64>::read(dir.path(), "missing"),
            Err(Error::MissingArtifact(_))
        ));
        let s = g.slice(1);
        let (q2s, _) = s.eval(0.0, &[0.2], &[0.7]);
        let (q2g, _) = g.eval(0.25, &[0.2], &[0.7]);
        assert!((q2s[0] - q2g[0]).abs() < 1e-12);
    }
}
