//! Phase-space charts, symplectic pairings and Hamiltonian vector fields.
//!
//! Every catalog manifold is a product of a few factor types, each living in
//! an extrinsic chart with explicit constraints:
//!
//! * `Sphere`: unit vectors in R^3, form `scale * <p, a x b>`.
//! * `Plane`: R^2 with `du ^ dv`.
//! * `CotangentSphere`: pairs `(q, p)` in R^6 with `|q| = 1`, `<q, p> = 0`,
//!   form `dp ^ dq` summed over coordinates.
//! * `Projective`: CP^n as unit vectors in C^{n+1} (real/imaginary parts
//!   interleaved) modulo the diagonal phase, form `2 * scale * Im<a_h, b_h>`
//!   on horizontal lifts.
//!
//! The sign convention throughout is `omega(X_f, .) = -df`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::ModelKind;

/// Momentum-map value `(f1, f2)`. Models with one degree of freedom report
/// `f2 = 0`.
pub type Value = [f64; 2];

/// Constraint residual tolerance for points handed to the public operations.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Points drifting further than this are rejected outright; between this and
/// `CONSTRAINT_TOL` they are re-projected silently.
const CONSTRAINT_HARD_TOL: f64 = 1e-8;

/// A point of a model phase space in its extrinsic chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub coords: Vec<f64>,
    pub model: ModelKind,
}

impl PhasePoint {
    pub fn new(model: ModelKind, coords: Vec<f64>) -> Self {
        Self { coords, model }
    }
}

/// Tangent vector at a base point, same chart as the base.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub components: Vec<f64>,
    pub base: PhasePoint,
}

/// One factor of a product chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Factor {
    Sphere { scale: f64 },
    Plane,
    CotangentSphere,
    Projective { n: usize, scale: f64 },
}

impl Factor {
    pub fn ambient_dim(&self) -> usize {
        match *self {
            Factor::Sphere { .. } => 3,
            Factor::Plane => 2,
            Factor::CotangentSphere => 6,
            Factor::Projective { n, .. } => 2 * (n + 1),
        }
    }

    pub fn manifold_dim(&self) -> usize {
        match *self {
            Factor::Sphere { .. } | Factor::Plane => 2,
            Factor::CotangentSphere => 4,
            Factor::Projective { n, .. } => 2 * n,
        }
    }

    /// Number of unit-cube coordinates consumed by `from_unit_cube`.
    fn seed_dim(&self) -> usize {
        match *self {
            Factor::Sphere { .. } | Factor::Plane => 2,
            Factor::CotangentSphere => 4,
            Factor::Projective { n, .. } => 2 * (n + 1),
        }
    }

    fn residual(&self, x: &[f64]) -> f64 {
        match *self {
            Factor::Sphere { .. } => (dot(x, x) - 1.0).abs(),
            Factor::Plane => 0.0,
            Factor::CotangentSphere => {
                let (q, p) = x.split_at(3);
                (dot(q, q) - 1.0).abs().max(dot(q, p).abs())
            }
            Factor::Projective { .. } => (dot(x, x) - 1.0).abs(),
        }
    }

    fn project(&self, x: &mut [f64]) {
        match *self {
            Factor::Sphere { .. } | Factor::Projective { .. } => {
                let r = dot(x, x).sqrt();
                x.iter_mut().for_each(|c| *c /= r);
            }
            Factor::Plane => {}
            Factor::CotangentSphere => {
                let (q, p) = x.split_at_mut(3);
                let r = dot(q, q).sqrt();
                q.iter_mut().for_each(|c| *c /= r);
                let qp = dot(q, p);
                for i in 0..3 {
                    p[i] -= qp * q[i];
                }
            }
        }
    }

    /// Unit normals of the constraint set at `x` (including the gauge
    /// direction for `Projective`).
    fn normals(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match *self {
            Factor::Sphere { .. } => vec![x.to_vec()],
            Factor::Plane => vec![],
            Factor::CotangentSphere => {
                let mut n1 = vec![0.0; 6];
                n1[..3].copy_from_slice(&x[..3]);
                let mut n2 = vec![0.0; 6];
                n2[..3].copy_from_slice(&x[3..]);
                n2[3..].copy_from_slice(&x[..3]);
                vec![n1, n2]
            }
            Factor::Projective { .. } => vec![x.to_vec(), times_i(x)],
        }
    }

    /// Orthonormal basis of the (horizontal) tangent space at `x`.
    fn tangent_basis(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match *self {
            Factor::Plane => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            Factor::Sphere { .. } => {
                let axis = if x[0].abs() <= x[1].abs() && x[0].abs() <= x[2].abs() {
                    [1.0, 0.0, 0.0]
                } else if x[1].abs() <= x[2].abs() {
                    [0.0, 1.0, 0.0]
                } else {
                    [0.0, 0.0, 1.0]
                };
                let d = dot(&axis, x);
                let mut t1 = [axis[0] - d * x[0], axis[1] - d * x[1], axis[2] - d * x[2]];
                let r = dot(&t1, &t1).sqrt();
                t1.iter_mut().for_each(|c| *c /= r);
                let t2 = cross(x, &t1);
                vec![t1.to_vec(), t2.to_vec()]
            }
            _ => {
                let dim = self.ambient_dim();
                let mut frame: Vec<Vec<f64>> = Vec::new();
                for n in self.normals(x) {
                    push_orthonormal(&mut frame, n);
                }
                let n_normals = frame.len();
                for k in 0..dim {
                    let mut e = vec![0.0; dim];
                    e[k] = 1.0;
                    push_orthonormal(&mut frame, e);
                    if frame.len() == n_normals + self.manifold_dim() {
                        break;
                    }
                }
                frame.split_off(n_normals)
            }
        }
    }

    fn pairing(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Factor::Sphere { scale } => scale * dot(x, &cross(a, b)),
            Factor::Plane => a[0] * b[1] - a[1] * b[0],
            Factor::CotangentSphere => dot(&a[3..], &b[..3]) - dot(&a[..3], &b[3..]),
            Factor::Projective { scale, .. } => {
                let ah = horizontal(x, a);
                let bh = horizontal(x, b);
                // Im<a, b> = sum(re_a im_b - im_a re_b)
                let mut s = 0.0;
                for k in 0..ah.len() / 2 {
                    s += ah[2 * k] * bh[2 * k + 1] - ah[2 * k + 1] * bh[2 * k];
                }
                2.0 * scale * s
            }
        }
    }

    /// Hamiltonian field of a function with ambient gradient `g` at `x`.
    fn field(&self, x: &[f64], g: &[f64], out: &mut [f64]) {
        match *self {
            Factor::Sphere { scale } => {
                let c = cross(x, g);
                for i in 0..3 {
                    out[i] = c[i] / scale;
                }
            }
            Factor::Plane => {
                out[0] = -g[1];
                out[1] = g[0];
            }
            Factor::Projective { scale, .. } => {
                let ig: Vec<f64> = times_i(g).iter().map(|c| c / (2.0 * scale)).collect();
                out.copy_from_slice(&horizontal(x, &ig));
            }
            Factor::CotangentSphere => {
                // No closed form worth the bookkeeping: solve omega(X, b_j) = -dg(b_j)
                // in an orthonormal tangent frame.
                let basis = self.tangent_basis(x);
                let m = basis.len();
                let w = DMatrix::from_fn(m, m, |i, j| self.pairing(x, &basis[i], &basis[j]));
                let rhs = DVector::from_fn(m, |i, _| dot(&basis[i], g));
                let a = w
                    .lu()
                    .solve(&rhs)
                    .expect("cotangent pairing is nondegenerate");
                out.iter_mut().for_each(|c| *c = 0.0);
                for (i, b) in basis.iter().enumerate() {
                    for k in 0..out.len() {
                        out[k] += a[i] * b[k];
                    }
                }
            }
        }
    }

    fn from_unit_cube(&self, u: &[f64], out: &mut [f64], plane_radius: f64) {
        use std::f64::consts::PI;
        match *self {
            Factor::Sphere { .. } => {
                let z = 2.0 * u[0] - 1.0;
                let phi = 2.0 * PI * u[1];
                let r = (1.0 - z * z).max(0.0).sqrt();
                out.copy_from_slice(&[r * phi.cos(), r * phi.sin(), z]);
            }
            Factor::Plane => {
                out[0] = plane_radius * (2.0 * u[0] - 1.0);
                out[1] = plane_radius * (2.0 * u[1] - 1.0);
            }
            Factor::CotangentSphere => {
                let z = 2.0 * u[0] - 1.0;
                let phi = 2.0 * PI * u[1];
                let r = (1.0 - z * z).max(0.0).sqrt();
                let q = [r * phi.cos(), r * phi.sin(), z];
                out[..3].copy_from_slice(&q);
                let raw = [
                    plane_radius * (2.0 * u[2] - 1.0),
                    plane_radius * (2.0 * u[3] - 1.0),
                    0.0,
                ];
                // p = raw components in a tangent frame at q.
                let basis = Factor::Sphere { scale: 1.0 }.tangent_basis(&q);
                for i in 0..3 {
                    out[3 + i] = raw[0] * basis[0][i] + raw[1] * basis[1][i];
                }
            }
            Factor::Projective { .. } => {
                // Box-Muller pairs give a rotation-invariant direction.
                for k in 0..out.len() / 2 {
                    let r = (-2.0 * (1.0 - u[2 * k]).max(1e-300).ln()).sqrt();
                    let th = 2.0 * PI * u[2 * k + 1];
                    out[2 * k] = r * th.cos();
                    out[2 * k + 1] = r * th.sin();
                }
                let n = dot(out, out).sqrt();
                out.iter_mut().for_each(|c| *c /= n);
            }
        }
    }

    /// Directional derivative of `embed` at `x` along `v`.
    fn embed_derivative(&self, x: &[f64], v: &[f64], out: &mut Vec<f64>) {
        match *self {
            Factor::Projective { n, .. } => {
                for j in 0..=n {
                    for k in j..=n {
                        let (aj, bj, ak, bk) = (x[2 * j], x[2 * j + 1], x[2 * k], x[2 * k + 1]);
                        let (daj, dbj, dak, dbk) = (v[2 * j], v[2 * j + 1], v[2 * k], v[2 * k + 1]);
                        let re = daj * ak + aj * dak + dbj * bk + bj * dbk;
                        let im = dbj * ak + bj * dak - daj * bk - aj * dbk;
                        out.push(re);
                        if j != k {
                            out.push(im);
                        }
                    }
                }
            }
            _ => out.extend_from_slice(v),
        }
    }

    /// Gauge-invariant coordinates used for distances between points.
    fn embed(&self, x: &[f64], out: &mut Vec<f64>) {
        match *self {
            Factor::Projective { n, .. } => {
                for j in 0..=n {
                    for k in j..=n {
                        let (aj, bj) = (x[2 * j], x[2 * j + 1]);
                        let (ak, bk) = (x[2 * k], x[2 * k + 1]);
                        // z_j conj(z_k)
                        let re = aj * ak + bj * bk;
                        let im = bj * ak - aj * bk;
                        if j == k {
                            out.push(re);
                        } else {
                            out.push(re);
                            out.push(im);
                        }
                    }
                }
            }
            _ => out.extend_from_slice(x),
        }
    }
}

/// Product chart of factors; ambient coordinates are concatenated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub factors: Vec<Factor>,
}

impl Chart {
    pub fn new(factors: Vec<Factor>) -> Self {
        Self { factors }
    }

    pub fn ambient_dim(&self) -> usize {
        self.factors.iter().map(Factor::ambient_dim).sum()
    }

    pub fn manifold_dim(&self) -> usize {
        self.factors.iter().map(Factor::manifold_dim).sum()
    }

    pub fn seed_dim(&self) -> usize {
        self.factors.iter().map(Factor::seed_dim).sum()
    }

    fn slices(&self) -> impl Iterator<Item = (usize, &Factor)> + '_ {
        self.factors.iter().scan(0usize, |off, f| {
            let start = *off;
            *off += f.ambient_dim();
            Some((start, f))
        })
    }

    /// Largest constraint residual over all factors.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.slices()
            .map(|(o, f)| f.residual(&x[o..o + f.ambient_dim()]))
            .fold(0.0, f64::max)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (o, f) in self.slices() {
            f.project(&mut x[o..o + f.ambient_dim()]);
        }
    }

    /// Validates a coordinate vector; re-projects small drift.
    pub fn check(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ambient_dim() {
            return Err(Error::ConstraintViolation {
                residual: f64::INFINITY,
                detail: format!(
                    "expected {} coordinates, got {}",
                    self.ambient_dim(),
                    x.len()
                ),
            });
        }
        let r = self.residual(x);
        if !r.is_finite() || r > CONSTRAINT_HARD_TOL {
            return Err(Error::ConstraintViolation {
                residual: r,
                detail: "point is off the manifold".into(),
            });
        }
        let mut y = x.to_vec();
        if r > CONSTRAINT_TOL {
            self.project(&mut y);
        }
        Ok(y)
    }

    /// Orthonormal tangent basis as columns of an ambient x manifold matrix.
    pub fn tangent_basis(&self, x: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.ambient_dim(), self.manifold_dim());
        let mut col = 0;
        for (o, f) in self.slices() {
            for v in f.tangent_basis(&x[o..o + f.ambient_dim()]) {
                for (k, c) in v.iter().enumerate() {
                    b[(o + k, col)] = *c;
                }
                col += 1;
            }
        }
        b
    }

    /// Largest inner product of `v` with the unit constraint normals at `x`.
    pub fn tangency_residual(&self, x: &[f64], v: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (o, f) in self.slices() {
            let d = f.ambient_dim();
            for n in f.normals(&x[o..o + d]) {
                let nn = dot(&n, &n).sqrt();
                worst = worst.max((dot(&n, &v[o..o + d]) / nn).abs());
            }
        }
        worst
    }

    pub fn pairing(&self, x: &[f64], a: &[f64], b: &[f64]) -> f64 {
        self.slices()
            .map(|(o, f)| {
                let d = f.ambient_dim();
                f.pairing(&x[o..o + d], &a[o..o + d], &b[o..o + d])
            })
            .sum()
    }

    /// Matrix of the pairing on the columns of `basis`.
    pub fn pairing_matrix(&self, x: &[f64], basis: &DMatrix<f64>) -> DMatrix<f64> {
        let m = basis.ncols();
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|j| basis.column(j).iter().copied().collect())
            .collect();
        DMatrix::from_fn(m, m, |i, j| self.pairing(x, &cols[i], &cols[j]))
    }

    /// Hamiltonian field of the function whose ambient gradient is `g`.
    pub fn field_from_gradient(&self, x: &[f64], g: &[f64], out: &mut [f64]) {
        for (o, f) in self.slices() {
            let d = f.ambient_dim();
            f.field(&x[o..o + d], &g[o..o + d], &mut out[o..o + d]);
        }
    }

    /// Maps a point of the unit cube of dimension `seed_dim` onto the manifold.
    /// Non-compact plane directions are scaled into `[-plane_radius, plane_radius]`.
    pub fn from_unit_cube(&self, u: &[f64], plane_radius: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.ambient_dim()];
        let mut uo = 0;
        for (o, f) in self.slices() {
            let d = f.ambient_dim();
            let s = f.seed_dim();
            f.from_unit_cube(&u[uo..uo + s], &mut x[o..o + d], plane_radius);
            uo += s;
        }
        x
    }

    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len() + 4);
        for (o, f) in self.slices() {
            f.embed(&x[o..o + f.ambient_dim()], &mut out);
        }
        out
    }

    pub fn embed_derivative(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len() + 4);
        for (o, f) in self.slices() {
            let d = f.ambient_dim();
            f.embed_derivative(&x[o..o + d], &v[o..o + d], &mut out);
        }
        out
    }

    /// Gauge-invariant distance between two points of the chart.
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let ea = self.embed(a);
        let eb = self.embed(b);
        ea.iter()
            .zip(&eb)
            .map(|(p, q)| (p - q).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn times_i(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for k in 0..x.len() / 2 {
        out[2 * k] = -x[2 * k + 1];
        out[2 * k + 1] = x[2 * k];
    }
    out
}

/// Removes the components of `w` along `z` and `iz`.
fn horizontal(z: &[f64], w: &[f64]) -> Vec<f64> {
    let iz = times_i(z);
    let zz = dot(z, z);
    let a = dot(z, w) / zz;
    let b = dot(&iz, w) / zz;
    w.iter()
        .zip(z.iter().zip(&iz))
        .map(|(wk, (zk, izk))| wk - a * zk - b * izk)
        .collect()
}

fn push_orthonormal(frame: &mut Vec<Vec<f64>>, mut v: Vec<f64>) {
    for _ in 0..2 {
        for f in frame.iter() {
            let d = dot(f, &v);
            v.iter_mut().zip(f).for_each(|(a, b)| *a -= d * b);
        }
    }
    let n = norm(&v);
    if n > 1e-8 {
        v.iter_mut().for_each(|c| *c /= n);
        frame.push(v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn charts() -> Vec<Chart> {
        vec![
            Chart::new(vec![Factor::Sphere { scale: -1.0 }, Factor::Plane]),
            Chart::new(vec![
                Factor::Sphere { scale: -1.0 },
                Factor::Sphere { scale: -2.5 },
            ]),
            Chart::new(vec![Factor::CotangentSphere]),
            Chart::new(vec![Factor::Projective { n: 2, scale: 1.0 }]),
        ]
    }

    #[test]
    fn tangent_basis_is_orthonormal_and_tangent() {
        for chart in charts() {
            let u: Vec<f64> = (0..chart.seed_dim())
                .map(|k| 0.13 + 0.07 * k as f64)
                .collect();
            let x = chart.from_unit_cube(&u, 1.5);
            assert!(chart.residual(&x) < 1e-12);
            let b = chart.tangent_basis(&x);
            let g = b.transpose() * &b;
            assert!((g - DMatrix::identity(b.ncols(), b.ncols())).norm() < 1e-12);
            for j in 0..b.ncols() {
                let v: Vec<f64> = b.column(j).iter().copied().collect();
                assert!(chart.tangency_residual(&x, &v) < 1e-12);
            }
        }
    }

    #[test]
    fn pairing_is_antisymmetric_and_nondegenerate() {
        for chart in charts() {
            let u: Vec<f64> = (0..chart.seed_dim())
                .map(|k| 0.31 + 0.05 * k as f64)
                .collect();
            let x = chart.from_unit_cube(&u, 1.0);
            let b = chart.tangent_basis(&x);
            let w = chart.pairing_matrix(&x, &b);
            assert!((&w + w.transpose()).norm() < 1e-12);
            assert!(w.determinant().abs() > 1e-3);
        }
    }

    #[test]
    fn off_manifold_point_is_rejected() {
        let chart = Chart::new(vec![Factor::Sphere { scale: 1.0 }]);
        assert!(matches!(
            chart.check(&[1.0, 0.1, 0.0]),
            Err(Error::ConstraintViolation { .. })
        ));
        assert!(chart.check(&[1.0, 0.0]).is_err());
        assert!(chart.check(&[0.0, 0.0, 1.0]).is_ok());
    }

    #[test]
    fn projective_distance_ignores_phase() {
        let chart = Chart::new(vec![Factor::Projective { n: 1, scale: 1.0 }]);
        let a = [0.6, 0.0, 0.0, 0.8];
        let th: f64 = 0.7;
        let b = [
            0.6 * th.cos(),
            0.6 * th.sin(),
            -0.8 * th.sin(),
            0.8 * th.cos(),
        ];
        assert!(chart.distance(&a, &b) < 1e-14);
    }
}
