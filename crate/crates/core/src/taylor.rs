//! Linear coefficients of the Taylor-series invariant at a focus-focus point.
//!
//! The value map is normalized at quadratic order: `H = A (F - F(m))` with
//! the quadratic parts of `H` equal to `(q1, q2) = (x1 xi2 - x2 xi1, x1 xi1 + x2 xi2)`.
//! Higher-order corrections to `H` only add `O(r log r)` terms to the
//! regularized periods, which the ray fits extrapolate away.
//!
//! The logarithm is taken of `w = c2 + i c1`, which is `conj(z1) z2` for
//! `z1 = x1 + i x2`, `z2 = xi1 + i xi2`. With `omega = dx ^ dxi` the first
//! period winds as `+arg w`, so `sigma1 = tau1 - arg w` is smooth.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibration::{fiber_point, period_lattice_from, PeriodOptions, ValueMap};
use crate::geom::Value;
use crate::singularity::{self, eigen_pairs, linearization, CriticalPoint, SingularityType};
use crate::systems::{instantiate, ModelSpec, ModelSystem};

type C64 = Complex<f64>;

/// Quadratic normalization at a focus-focus point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub value_map: ValueMap,
    /// Real linear symplectic map from the orthonormal tangent frame at `m`
    /// to normal-form coordinates `(x1, xi1, x2, xi2)`, row-major.
    pub frame: Vec<Vec<f64>>,
    /// Joint eigenvalues of the linearized fields of `(f1, f2)` at `m`.
    pub joint_eigenvalues: Vec<[(f64, f64); 2]>,
    /// Condition number of the value map.
    pub condition: f64,
}

impl Normalization {
    /// The value map with row signs flipped by `signs`.
    pub fn representative(&self, signs: [f64; 2]) -> ValueMap {
        let mut map = self.value_map;
        for (row, s) in map.rows.iter_mut().zip(signs) {
            row[0] *= s;
            row[1] *= s;
        }
        map
    }
}

/// Joint eigenvector data of a commuting pair of 4x4 Hamiltonian matrices.
struct JointEigen {
    a: C64,
    b: C64,
    v: DVector<C64>,
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

fn joint_eigen(l1: &DMatrix<f64>, l2: &DMatrix<f64>) -> Result<Vec<JointEigen>> {
    let l = l1 * 0.37 + l2 * 0.91;
    let lc = to_complex(&l);
    let (l1c, l2c) = (to_complex(l1), to_complex(l2));
    let n = l.nrows();
    let mut out = Vec::new();
    for (k, lambda) in eigen_pairs(&l).into_iter().enumerate() {
        let mut v = DVector::from_fn(n, |i, _| {
            C64::new(1.0 + 0.1 * i as f64, 0.3 * (i + k) as f64)
        });
        let mut shift = lambda + C64::new(1e-9, 1e-9);
        for _ in 0..4 {
            let mut m = lc.clone();
            for i in 0..n {
                m[(i, i)] -= shift;
            }
            let Some(w) = m.lu().solve(&v) else {
                return Err(Error::IllConditioned(f64::INFINITY));
            };
            v = &w / C64::new(w.norm(), 0.0);
            shift = (v.adjoint() * &lc * &v)[(0, 0)] + C64::new(1e-12, 1e-12);
        }
        let a = (v.adjoint() * &l1c * &v)[(0, 0)];
        let b = (v.adjoint() * &l2c * &v)[(0, 0)];
        out.push(JointEigen { a, b, v });
    }
    Ok(out)
}

/// Real 2x2 map `A` with `A (a, b) = (i, 1)` for the joint eigenvalue pair
/// `(a, b)` with `Im a > 0`, `Re b > 0`.
fn value_rows(pairs: &[(C64, C64)]) -> Result<[[f64; 2]; 2]> {
    let &(a, b) = pairs
        .iter()
        .find(|(a, b)| a.im > 0.0 && b.re > 0.0)
        .ok_or_else(|| {
            Error::NotFocusFocus("no joint eigenvalue pair with Im a > 0, Re b > 0".into())
        })?;
    let m = nalgebra::Matrix2::new(a.re, b.re, a.im, b.im);
    let inv = m
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    let r1 = inv * nalgebra::Vector2::new(0.0, 1.0);
    let r2 = inv * nalgebra::Vector2::new(1.0, 0.0);
    Ok([[r1[0], r1[1]], [r2[0], r2[1]]])
}

/// Value-map rows normalizing the linearizations `l1`, `l2` of `(f1, f2)`.
pub fn normalize_linearizations(l1: &DMatrix<f64>, l2: &DMatrix<f64>) -> Result<[[f64; 2]; 2]> {
    let je = joint_eigen(l1, l2)?;
    let pairs: Vec<(C64, C64)> = je.iter().map(|j| (j.a, j.b)).collect();
    value_rows(&pairs)
}

fn condition_number(rows: &[[f64; 2]; 2]) -> f64 {
    let m = nalgebra::Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]);
    let sv = m.singular_values();
    if sv.min() == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / sv.min()
    }
}

/// Linear symplectic frame and value map at the focus-focus point `m`.
pub fn normalize_quadratic(model: &ModelSystem, m: &CriticalPoint) -> Result<Normalization> {
    if m.kind != SingularityType::FocusFocus || model.dof() != 2 {
        return Err(Error::NotFocusFocus(format!("point is {:?}", m.kind)));
    }
    let x = model.chart.check(&m.point.coords)?;
    let l1 = linearization(model, &x, [1.0, 0.0]);
    let l2 = linearization(model, &x, [0.0, 1.0]);
    let je = joint_eigen(&l1, &l2)?;
    let pairs: Vec<(C64, C64)> = je.iter().map(|j| (j.a, j.b)).collect();
    let mut rows = value_rows(&pairs)?;
    let condition = condition_number(&rows);
    if condition > 1e6 {
        return Err(Error::IllConditioned(condition));
    }
    // The circle-action row must not mix in f2.
    if rows[0][1].abs() > 1e-6 * rows[0][0].abs() {
        return Err(Error::NotFocusFocus(format!(
            "f1 is not a multiple of q1 at quadratic order (mixing {:.3e})",
            rows[0][1]
        )));
    }
    rows[0][1] = 0.0;

    // Frame: match joint eigenvectors with those of the normal form.
    let q = instantiate(ModelSpec::QModel)?;
    let zero = [0.0; 4];
    let (q1, q2) = (
        linearization(&q, &zero, [1.0, 0.0]),
        linearization(&q, &zero, [0.0, 1.0]),
    );
    let qe = joint_eigen(&q1, &q2)?;
    let normalized = |a: C64, b: C64| {
        (
            a * rows[0][0] + b * rows[0][1],
            a * rows[1][0] + b * rows[1][1],
        )
    };
    let find = |list: &[JointEigen], target: (C64, C64), norm: bool| -> Option<DVector<C64>> {
        list.iter()
            .find(|j| {
                let (a, b) = if norm {
                    normalized(j.a, j.b)
                } else {
                    (j.a, j.b)
                };
                (a - target.0).norm() < 1e-5 && (b - target.1).norm() < 1e-5
            })
            .map(|j| j.v.clone())
    };
    let i = C64::new(0.0, 1.0);
    let one = C64::new(1.0, 0.0);
    let t1 = (i, one);
    let t3 = (-i, -one);
    let missing = || Error::NotFocusFocus("joint eigenvectors do not match the normal form".into());
    let v1 = find(&je, t1, true).ok_or_else(missing)?;
    let v3 = find(&je, t3, true).ok_or_else(missing)?;
    let w1 = find(&qe, t1, false).ok_or_else(missing)?;
    let w3 = find(&qe, t3, false).ok_or_else(missing)?;
    let b = model.chart.tangent_basis(&x);
    let wm = to_complex(&model.chart.pairing_matrix(&x, &b));
    let wq = to_complex(&q.chart.pairing_matrix(&zero, &q.chart.tangent_basis(&zero)));
    let om = |w: &DMatrix<C64>, u: &DVector<C64>, v: &DVector<C64>| (u.transpose() * w * v)[(0, 0)];
    let scale = om(&wq, &w1, &w3) / om(&wm, &v1, &v3);
    let vs = DMatrix::from_columns(&[v1.clone(), v1.conjugate(), v3.clone(), v3.conjugate()]);
    let w3s = &w3 / scale;
    let ws = DMatrix::from_columns(&[w1.clone(), w1.conjugate(), w3s.clone(), w3s.conjugate()]);
    let vinv = vs
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    let phi = (ws * vinv).map(|z| z.re);
    let frame = (0..4)
        .map(|r| (0..4).map(|c| phi[(r, c)]).collect())
        .collect();

    Ok(Normalization {
        value_map: ValueMap {
            origin: m.value,
            rows,
        },
        frame,
        joint_eigenvalues: je
            .iter()
            .map(|j| [(j.a.re, j.a.im), (j.b.re, j.b.im)])
            .collect(),
        condition,
    })
}

/// Source of `(tau1, tau2)` at normalized values `c` near the focus-focus value.
pub trait PeriodSource: Sync {
    /// Returns `(tau1, tau2, c_actual)` where `c_actual` is the normalized
    /// value at which the periods were measured.
    fn periods(&self, c: Value) -> Result<(f64, f64, Value)>;
}

/// Periods of a model under a value map.
pub struct ModelPeriods<'a> {
    pub model: &'a ModelSystem,
    pub map: ValueMap,
    pub opts: PeriodOptions,
}

impl PeriodSource for ModelPeriods<'_> {
    fn periods(&self, c: Value) -> Result<(f64, f64, Value)> {
        let f = self.map.invert(c);
        let a = fiber_point(self.model, f)?;
        let lat = period_lattice_from(self.model, &a, &self.map, &self.opts)?;
        Ok((lat.tau1, lat.tau2, lat.c))
    }
}

/// Exact periods generated by a known quadratic `S`:
/// `S = a10 x + a01 y + s20 x^2 + s11 x y + s02 y^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPeriods {
    pub a10: f64,
    pub a01: f64,
    pub quadratic: [f64; 3],
}

impl PeriodSource for SyntheticPeriods {
    fn periods(&self, c: Value) -> Result<(f64, f64, Value)> {
        let [s20, s11, s02] = self.quadratic;
        let sigma1 = self.a10 + 2.0 * s20 * c[0] + s11 * c[1];
        let sigma2 = self.a01 + s11 * c[0] + 2.0 * s02 * c[1];
        let w = C64::new(c[1], c[0]);
        let tau1 = (sigma1 + w.arg()).rem_euclid(2.0 * PI);
        let tau2 = sigma2 - w.norm().ln();
        Ok((tau1, tau2, c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSample {
    pub r: f64,
    pub c: Value,
    pub tau1: f64,
    pub tau2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

/// Log-regularized periods along the ray `c = r (cos angle, sin angle)`, with
/// `sigma1` continued continuously in `r`.
pub fn regularized_periods(
    source: &dyn PeriodSource,
    ray_angle: f64,
    radii: &[f64],
) -> Result<Vec<SigmaSample>> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::BadParameter("radii must be positive".into()));
    }
    let mut out: Vec<SigmaSample> = Vec::with_capacity(radii.len());
    for &r in radii {
        let (tau1, tau2, c) = source.periods([r * ray_angle.cos(), r * ray_angle.sin()])?;
        let w = C64::new(c[1], c[0]);
        let mut sigma1 = tau1 - w.arg();
        if let Some(prev) = out.last() {
            sigma1 = nearest_branch(sigma1, prev.sigma1);
        }
        out.push(SigmaSample {
            r,
            c,
            tau1,
            tau2,
            sigma1,
            sigma2: tau2 + w.norm().ln(),
        });
    }
    Ok(out)
}

fn nearest_branch(x: f64, reference: f64) -> f64 {
    x + 2.0 * PI * ((reference - x) / (2.0 * PI)).round()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorOptions {
    pub ray_angles: Vec<f64>,
    pub radii: Vec<f64>,
    pub spread_limit: f64,
    pub periods: PeriodOptions,
    /// Row signs selecting the value-map representative. The default
    /// `(-1, 1)` reverses the circle action.
    pub signs: [f64; 2],
}

impl Default for TaylorOptions {
    fn default() -> Self {
        let rays = 6;
        Self {
            ray_angles: (0..rays)
                .map(|k| 0.3 + 2.0 * PI * k as f64 / rays as f64)
                .collect(),
            radii: (0..8).map(|k| 0.08 * 0.6105f64.powi(k)).collect(),
            spread_limit: 5e-3,
            periods: PeriodOptions::default(),
            signs: [-1.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayFit {
    pub angle: f64,
    pub intercept: [f64; 2],
    pub samples: Vec<SigmaSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorLinear {
    /// Coefficient of `x`, in `[0, 2pi)`.
    pub a10: f64,
    /// Coefficient of `y`.
    pub a01: f64,
    /// Largest pairwise intercept difference over rays, per coefficient.
    pub spread: [f64; 2],
    pub rays: Vec<RayFit>,
    pub normalization: Option<Normalization>,
}

/// Least-squares intercept of `y = k + alpha r log r + beta r`.
pub fn extrapolate(r: &[f64], y: &[f64]) -> f64 {
    let n = r.len();
    let cols = if n >= 4 { 3 } else { n.min(2) };
    let a = DMatrix::from_fn(n, cols, |i, j| match j {
        0 => 1.0,
        1 if cols == 3 => r[i] * r[i].ln(),
        _ => r[i],
    });
    let b = DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-14).expect("svd solve");
    sol[0]
}

/// Fits ray intercepts from any period source and reduces them to `(a10, a01)`.
pub fn taylor_from_source(source: &dyn PeriodSource, opts: &TaylorOptions) -> Result<TaylorLinear> {
    if opts.ray_angles.len() < 4 || opts.radii.len() < 3 {
        return Err(Error::BadParameter(
            "need at least 4 rays and 3 radii".into(),
        ));
    }
    let rays: Vec<Result<RayFit>> = {
        use rayon::prelude::*;
        opts.ray_angles
            .par_iter()
            .map(|&angle| {
                let samples = regularized_periods(source, angle, &opts.radii)?;
                let r: Vec<f64> = samples.iter().map(|s| s.r).collect();
                let s1: Vec<f64> = samples.iter().map(|s| s.sigma1).collect();
                let s2: Vec<f64> = samples.iter().map(|s| s.sigma2).collect();
                Ok(RayFit {
                    angle,
                    intercept: [extrapolate(&r, &s1), extrapolate(&r, &s2)],
                    samples,
                })
            })
            .collect()
    };
    let mut rays = rays.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = rays[0].intercept[0];
    for ray in rays.iter_mut() {
        ray.intercept[0] = nearest_branch(ray.intercept[0], reference);
    }
    let n = rays.len() as f64;
    let mean1 = rays.iter().map(|r| r.intercept[0]).sum::<f64>() / n;
    let mean2 = rays.iter().map(|r| r.intercept[1]).sum::<f64>() / n;
    let spread = |k: usize| {
        let (lo, hi) = rays
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.intercept[k]), hi.max(r.intercept[k]))
            });
        hi - lo
    };
    let spread = [spread(0), spread(1)];
    let worst = spread[0].max(spread[1]);
    if worst > opts.spread_limit {
        return Err(Error::SpreadTooLarge {
            spread: worst,
            limit: opts.spread_limit,
        });
    }
    Ok(TaylorLinear {
        a10: mean1.rem_euclid(2.0 * PI),
        a01: mean2,
        spread,
        rays,
        normalization: None,
    })
}

/// The focus-focus critical point of a simple semitoric model.
pub fn focus_focus_point(model: &ModelSystem) -> Result<CriticalPoint> {
    let mut ff = Vec::new();
    for p in singularity::rank0_points(model) {
        let cp = singularity::classify(model, &p)?;
        if cp.kind == SingularityType::FocusFocus {
            ff.push(cp);
        }
    }
    match ff.len() {
        1 => Ok(ff.remove(0)),
        0 => Err(Error::NotFocusFocus(format!(
            "{} has no focus-focus point",
            model.id()
        ))),
        _ => Err(Error::NotSimple { c1: ff[0].value[0] }),
    }
}

/// Linear Taylor coefficients at the focus-focus point `m`.
pub fn taylor_linear(model: &ModelSystem, m: &CriticalPoint) -> Result<TaylorLinear> {
    taylor_linear_with(model, m, &TaylorOptions::default())
}

pub fn taylor_linear_with(
    model: &ModelSystem,
    m: &CriticalPoint,
    opts: &TaylorOptions,
) -> Result<TaylorLinear> {
    let norm = normalize_quadratic(model, m)?;
    let source = ModelPeriods {
        model,
        map: norm.representative(opts.signs),
        opts: opts.periods,
    };
    let mut out = taylor_from_source(&source, opts)?;
    out.normalization = Some(norm);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::singularity::classify;

    #[test]
    fn q_model_normalization_is_identity() {
        let q = instantiate(ModelSpec::QModel).unwrap();
        let m = classify(&q, &q.point(vec![0.0; 4])).unwrap();
        assert_eq!(m.kind, SingularityType::FocusFocus);
        let n = normalize_quadratic(&q, &m).unwrap();
        let rows = n.value_map.rows;
        for (r, e) in rows.iter().flatten().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((r - e).abs() < 1e-8, "{rows:?}");
        }
        for (i, row) in n.frame.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-6, "{:?}", n.frame);
            }
        }
    }

    #[test]
    fn scaling_f2_is_absorbed() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let x = [0.0, 0.0, 1.0, 0.0, 0.0];
        let l1 = linearization(&jc, &x, [1.0, 0.0]);
        let l2 = linearization(&jc, &x, [0.0, 1.0]);
        let a = normalize_linearizations(&l1, &l2).unwrap();
        let b = normalize_linearizations(&l1, &(&l2 * 2.0)).unwrap();
        assert!((a[1][1] - 2.0 * b[1][1]).abs() < 1e-8);
        assert!((a[0][0] - b[0][0]).abs() < 1e-8);
    }

    #[test]
    fn frame_is_symplectic_and_normalizes() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let x = [0.0, 0.0, 1.0, 0.0, 0.0];
        let m = classify(&jc, &jc.point(x.to_vec())).unwrap();
        let n = normalize_quadratic(&jc, &m).unwrap();
        let phi = DMatrix::from_fn(4, 4, |i, j| n.frame[i][j]);
        let b = jc.chart.tangent_basis(&x);
        let w = jc.chart.pairing_matrix(&x, &b);
        let q = instantiate(ModelSpec::QModel).unwrap();
        let wq = q
            .chart
            .pairing_matrix(&[0.0; 4], &q.chart.tangent_basis(&[0.0; 4]));
        assert!((phi.transpose() * &wq * &phi - &w).norm() < 1e-6);
        let rows = n.value_map.rows;
        let lh2 = linearization(&jc, &x, rows[1]);
        let lq2 = linearization(&q, &[0.0; 4], [0.0, 1.0]);
        let phi_inv = phi.clone().try_inverse().unwrap();
        assert!((&phi * lh2 * phi_inv - lq2).norm() < 1e-5);
    }

    #[test]
    fn synthetic_source_recovers_constants() {
        let s = SyntheticPeriods {
            a10: 0.9,
            a01: 2.25,
            quadratic: [0.3, -0.2, 0.5],
        };
        let t = taylor_from_source(&s, &TaylorOptions::default()).unwrap();
        assert!(
            (t.a10 - 0.9).abs() < 1e-6 && (t.a01 - 2.25).abs() < 1e-6,
            "{t:?}"
        );
        let samples = regularized_periods(
            &SyntheticPeriods {
                quadratic: [0.0; 3],
                ..s
            },
            1.0,
            &[0.1, 0.01],
        )
        .unwrap();
        for x in samples {
            assert!((x.sigma1 - 0.9).abs() < 1e-12 && (x.sigma2 - 2.25).abs() < 1e-12);
        }
    }

    #[test]
    fn toric_model_has_no_focus_focus() {
        let m = instantiate(ModelSpec::CpnRotation { n: 2, lambda: 1.0 }).unwrap();
        assert!(matches!(
            focus_focus_point(&m),
            Err(Error::NotFocusFocus(_))
        ));
    }

    #[test]
    fn extrapolation_removes_r_log_r() {
        let r: Vec<f64> = (0..6).map(|k| 0.1 * 0.5f64.powi(k)).collect();
        let y: Vec<f64> = r.iter().map(|r| 1.5 + 0.7 * r * r.ln() - 0.2 * r).collect();
        assert!((extrapolate(&r, &y) - 1.5).abs() < 1e-12);
    }
}
