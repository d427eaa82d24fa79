//! Fibers over regular values: fiber points, period lattices, regular grids.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow_combination, halton_points};
use crate::error::{Error, Result};
use crate::geom::{norm, PhasePoint, Value};
use crate::ode::Integrator;
use crate::singularity;
use crate::systems::ModelSystem;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodLattice {
    pub c: Value,
    /// Closing time along the circle action, in `[0, 2pi)`.
    pub tau1: f64,
    /// First return time of the second flow to the circle orbit.
    pub tau2: f64,
    /// Distance from the start point after flowing `tau2` then `tau1`.
    pub residual: f64,
}

/// Affine change of value coordinates `H = rows * (F - origin)`.
///
/// `H1` must be a multiple of `f1` (`rows[0][1] == 0`) so that its flow is the
/// circle action up to a speed factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueMap {
    pub origin: Value,
    pub rows: [[f64; 2]; 2],
}

impl ValueMap {
    pub fn identity() -> Self {
        Self {
            origin: [0.0, 0.0],
            rows: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn apply(&self, f: Value) -> Value {
        let d = [f[0] - self.origin[0], f[1] - self.origin[1]];
        [
            self.rows[0][0] * d[0] + self.rows[0][1] * d[1],
            self.rows[1][0] * d[0] + self.rows[1][1] * d[1],
        ]
    }

    pub fn invert(&self, h: Value) -> Value {
        let [[a, b], [c, d]] = self.rows;
        let det = a * d - b * c;
        [
            self.origin[0] + (d * h[0] - b * h[1]) / det,
            self.origin[1] + (-c * h[0] + a * h[1]) / det,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodOptions {
    /// Integrator tolerance.
    pub tol: f64,
    /// Largest integration time before giving up on a return.
    pub horizon: f64,
}

impl Default for PeriodOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            horizon: 50.0 * 2.0 * PI,
        }
    }
}

/// Applies the `f1` circle action for time `s` to embedded coordinates.
pub fn rotate_embedded(model: &ModelSystem, e: &[f64], s: f64) -> Vec<f64> {
    let mut out = e.to_vec();
    for p in model.s1_planes() {
        let (c, sn) = ((p.rate * s).cos(), (p.rate * s).sin());
        out[p.i] = c * e[p.i] - sn * e[p.j];
        out[p.j] = sn * e[p.i] + c * e[p.j];
    }
    out
}

/// Time `s` in `[0, 2pi)` minimising `|point - R_s(base)|`, and that distance.
pub fn nearest_on_orbit(model: &ModelSystem, base: &[f64], point: &[f64]) -> (f64, f64) {
    let (mut alpha, mut beta) = (0.0, 0.0);
    for p in model.s1_planes() {
        alpha += point[p.i] * base[p.i] + point[p.j] * base[p.j];
        beta += p.rate * (point[p.j] * base[p.i] - point[p.i] * base[p.j]);
    }
    let s = beta.atan2(alpha).rem_euclid(2.0 * PI);
    let r = rotate_embedded(model, base, s);
    let d = r
        .iter()
        .zip(point)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    (s, d)
}

fn value_jacobian(model: &ModelSystem, x: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = model.chart.tangent_basis(x);
    let dof = model.dof();
    let mut j = DMatrix::zeros(dof, b.ncols());
    let mut g = vec![0.0; x.len()];
    for r in 0..dof {
        let w = if r == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
        model.gradient(x, w, &mut g);
        for c in 0..b.ncols() {
            j[(r, c)] = (0..x.len()).map(|k| g[k] * b[(k, c)]).sum();
        }
    }
    (j, b)
}

/// Relative rank defect of `dF` at `x`: smallest over largest singular value.
pub fn rank_ratio(model: &ModelSystem, x: &[f64]) -> f64 {
    let (j, _) = value_jacobian(model, x);
    let sv = j.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0.0;
    }
    sv.min() / max
}

fn value_residual(model: &ModelSystem, x: &[f64], c: Value) -> f64 {
    let f = model.eval(x);
    let d = model.dof();
    (0..d).map(|k| (f[k] - c[k]).powi(2)).sum::<f64>().sqrt()
}

/// Newton solve of `F(x) = c` on the manifold starting from `seed`.
pub fn solve_fiber_point(model: &ModelSystem, c: Value, seed: &PhasePoint) -> Result<PhasePoint> {
    let x = newton_fiber(model, c, &model.chart.check(&seed.coords)?)?;
    if rank_ratio(model, &x) < 1e-8 {
        return Err(Error::SingularValue { value: c });
    }
    for v in singularity::rank0_values(model) {
        if (v[0] - c[0]).hypot(v[1] - c[1]) < 1e-9 {
            return Err(Error::SingularValue { value: c });
        }
    }
    Ok(model.point(x))
}

fn newton_fiber(model: &ModelSystem, c: Value, x0: &[f64]) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    let dof = model.dof();
    let mut res = value_residual(model, &x, c);
    for _ in 0..100 {
        if res < 1e-13 {
            break;
        }
        let (j, b) = value_jacobian(model, &x);
        let f = model.eval(&x);
        let r = nalgebra::DVector::from_fn(dof, |k, _| f[k] - c[k]);
        let jjt = &j * j.transpose();
        let Some(sol) = jjt.clone().lu().solve(&r) else {
            return Err(Error::NoConvergence(
                "rank-deficient Jacobian in fiber solve".into(),
            ));
        };
        let delta = j.transpose() * sol;
        let step = &b * delta;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut y: Vec<f64> = x
                .iter()
                .zip(step.iter())
                .map(|(a, s)| a - lambda * s)
                .collect();
            model.chart.project(&mut y);
            let ry = value_residual(model, &y, c);
            if ry < res {
                x = y;
                res = ry;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res < 1e-10 {
        Ok(x)
    } else {
        Err(Error::NoConvergence(format!(
            "fiber residual {res:.3e} at c = {c:?}"
        )))
    }
}

/// Finds a fiber point over `c` far from the rank-0 critical points.
pub fn fiber_point(model: &ModelSystem, c: Value) -> Result<PhasePoint> {
    fiber_points(model, c, 1).map(|mut v| v.remove(0))
}

/// Up to `count` distinct fiber points over `c`, preferring points far from
/// rank-0 critical points.
pub fn fiber_points(model: &ModelSystem, c: Value, count: usize) -> Result<Vec<PhasePoint>> {
    let crit = singularity::rank0_points(model);
    let mut seeds = halton_points(model, 512, 17);
    seeds.sort_by(|a, b| {
        value_residual(model, &a.coords, c)
            .partial_cmp(&value_residual(model, &b.coords, c))
            .unwrap()
    });
    let mut found: Vec<(f64, PhasePoint)> = Vec::new();
    let mut last_err = None;
    for seed in seeds.iter().take(24) {
        match solve_fiber_point(model, c, seed) {
            Ok(p) => {
                if found
                    .iter()
                    .any(|(_, q)| model.chart.distance(&q.coords, &p.coords) < 1e-3)
                {
                    continue;
                }
                let clearance = crit
                    .iter()
                    .map(|m| model.chart.distance(&m.coords, &p.coords))
                    .fold(f64::INFINITY, f64::min);
                found.push((clearance, p));
            }
            Err(e @ Error::SingularValue { .. }) => return Err(e),
            Err(e) => last_err = Some(e),
        }
    }
    if found.is_empty() {
        return Err(
            last_err.unwrap_or_else(|| Error::NoConvergence("no fiber seeds converged".into()))
        );
    }
    found.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    Ok(found.into_iter().take(count).map(|(_, p)| p).collect())
}

/// Period lattice at the regular value `c`, from a fiber point found automatically.
pub fn period_lattice(model: &ModelSystem, c: Value) -> Result<PeriodLattice> {
    let a = fiber_point(model, c)?;
    period_lattice_from(model, &a, &ValueMap::identity(), &PeriodOptions::default())
}

/// Period lattice of `H = map(F)` from base point `a`.
///
/// The value `c` reported is `map(F(a))`.
pub fn period_lattice_from(
    model: &ModelSystem,
    a: &PhasePoint,
    map: &ValueMap,
    opts: &PeriodOptions,
) -> Result<PeriodLattice> {
    if model.dof() != 2 {
        return Err(Error::Unsupported(
            "period lattice needs two degrees of freedom".into(),
        ));
    }
    if map.rows[0][1] != 0.0 {
        return Err(Error::Unsupported(
            "first normalized component must be a multiple of f1".into(),
        ));
    }
    let x0 = model.chart.check(&a.coords)?;
    let speed = map.rows[0][0];
    let w2 = map.rows[1];
    let (tau2, s_star) = first_return(model, &x0, w2, opts)?;
    // Closing along X_H1 = speed * X_f1 undoes the orbit offset s_star.
    let tau1 = (-s_star / speed).rem_euclid(2.0 * PI / speed.abs());
    let y = flow_combination(model, w2, &x0, tau2, opts.tol)?;
    let z = flow_combination(model, [speed, 0.0], &y, tau1, opts.tol)?;
    let residual = model.chart.distance(&z, &x0);
    Ok(PeriodLattice {
        c: map.apply(model.eval(&x0)),
        tau1: if tau1 >= 2.0 * PI {
            tau1 - 2.0 * PI
        } else {
            tau1
        },
        tau2,
        residual,
    })
}

/// First positive time at which the flow of `w . F` from `x0` meets the
/// circle orbit of `x0`, and the orbit parameter of the meeting point.
pub fn first_return(
    model: &ModelSystem,
    x0: &[f64],
    w: [f64; 2],
    opts: &PeriodOptions,
) -> Result<(f64, f64)> {
    let base = model.chart.embed(x0);
    let rhs = |y: &[f64], d: &mut [f64]| model.field(y, w, d);
    let proj = |y: &mut [f64]| model.chart.project(y);
    let event = |y: &[f64]| -> (f64, f64, f64) {
        let e = model.chart.embed(y);
        let (s, d) = nearest_on_orbit(model, &base, &e);
        let on = rotate_embedded(model, &base, s);
        let v = model.field_vec(y, w);
        let dv = model.chart.embed_derivative(y, &v);
        let g: f64 = e
            .iter()
            .zip(&on)
            .zip(&dv)
            .map(|((a, b), c)| (a - b) * c)
            .sum();
        (g, d, s)
    };
    let mut it = Integrator::new(&rhs, &proj, x0, opts.tol, false);
    let mut prev_y = x0.to_vec();
    let mut prev_t = 0.0;
    let (mut prev_g, mut prev_d, _) = event(x0);
    let mut armed = false;
    let mut max_d: f64 = 0.0;
    while it.t < opts.horizon {
        it.step(opts.horizon)?;
        let (g, d, _) = event(&it.y);
        max_d = max_d.max(d);
        if !armed && d > 1e-3 && g > 0.0 {
            armed = true;
        } else if armed && prev_g < 0.0 && g >= 0.0 && prev_d.min(d) < 0.2 * max_d {
            // Illinois refinement on the step interval, re-integrating from the left end.
            let (mut lo, mut hi) = (0.0, it.t - prev_t);
            let (mut glo, mut ghi) = (prev_g, g);
            let mut side = 0i32;
            let mut root = (hi, it.y.clone());
            for _ in 0..100 {
                let mid = if (glo - ghi).abs() > 0.0 {
                    let m = (lo * ghi - hi * glo) / (ghi - glo);
                    if m > lo && m < hi {
                        m
                    } else {
                        0.5 * (lo + hi)
                    }
                } else {
                    0.5 * (lo + hi)
                };
                let ym = crate::ode::integrate(&rhs, &proj, &prev_y, mid, opts.tol)?;
                let (gm, _, _) = event(&ym);
                root = (mid, ym);
                if gm < 0.0 {
                    lo = mid;
                    glo = gm;
                    if side == -1 {
                        ghi *= 0.5;
                    }
                    side = -1;
                } else {
                    hi = mid;
                    ghi = gm;
                    if side == 1 {
                        glo *= 0.5;
                    }
                    side = 1;
                }
                if hi - lo < 1e-10 || gm == 0.0 {
                    break;
                }
            }
            let (_, dr, sr) = event(&root.1);
            if dr < 1e-6 {
                return Ok((prev_t + root.0, sr));
            }
        }
        prev_g = g;
        prev_d = d;
        prev_t = it.t;
        prev_y.clone_from(&it.y);
    }
    Err(Error::ReturnNotFound {
        horizon: opts.horizon,
    })
}

/// Grid of regular values inside the image of `F`, clear of singular values.
///
/// `bbox = [c1_min, c1_max, c2_min, c2_max]`. The image boundary and disks of
/// `exclusion_radius` around rank-0 critical values are excluded.
pub fn regular_grid(
    model: &ModelSystem,
    bbox: [f64; 4],
    resolution: usize,
    exclusion_radius: f64,
) -> Result<Vec<Value>> {
    let singular = singularity::rank0_values(model);
    let n = resolution.max(2);
    let mut out = Vec::new();
    let c1s: Vec<f64> = (0..n)
        .map(|i| bbox[0] + (bbox[1] - bbox[0]) * (i as f64 + 0.5) / n as f64)
        .collect();
    let (f1_lo, f1_hi) = model.f1_range();
    for &c1 in &c1s {
        if c1 < f1_lo + exclusion_radius || c1 > f1_hi - exclusion_radius {
            continue;
        }
        let Some((lo, hi)) = model.image_profile(c1) else {
            continue;
        };
        let c2s: Vec<f64> = if model.dof() == 1 {
            vec![0.0]
        } else {
            (0..n)
                .map(|j| bbox[2] + (bbox[3] - bbox[2]) * (j as f64 + 0.5) / n as f64)
                .filter(|&c2| c2 > lo + exclusion_radius && c2 < hi - exclusion_radius)
                .collect()
        };
        for c2 in c2s {
            let c = [c1, c2];
            let near_singular = singular
                .iter()
                .any(|v| (v[0] - c1).hypot(v[1] - c2) < exclusion_radius);
            if !near_singular {
                out.push(c);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyGrid(format!(
            "no regular values in bbox {bbox:?}"
        )));
    }
    Ok(out)
}

pub(crate) fn field_norm(model: &ModelSystem, x: &[f64], w: [f64; 2]) -> f64 {
    norm(&model.field_vec(x, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{instantiate, ModelSpec};

    #[test]
    fn orbit_projection_recovers_rotation_angle() {
        let m = instantiate(ModelSpec::JaynesCummings).unwrap();
        let p = halton_points(&m, 5, 1).pop().unwrap();
        let e = m.chart.embed(&p.coords);
        let r = rotate_embedded(&m, &e, 1.234);
        let (s, d) = nearest_on_orbit(&m, &e, &r);
        assert!((s - 1.234).abs() < 1e-12 && d < 1e-12);
    }

    #[test]
    fn equator_fiber_point() {
        let m = instantiate(ModelSpec::S2Height).unwrap();
        let seed = m.point(vec![0.6, 0.0, 0.8]);
        let p = solve_fiber_point(&m, [0.0, 0.0], &seed).unwrap();
        assert!(value_residual(&m, &p.coords, [0.0, 0.0]) < 1e-10);
    }

    #[test]
    fn focus_focus_value_is_singular() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        assert!(matches!(
            fiber_point(&jc, [1.0, 0.0]),
            Err(Error::SingularValue { .. })
        ));
    }

    #[test]
    fn regular_fiber_point_solves_to_tolerance() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let p = fiber_point(&jc, [0.5, 0.1]).unwrap();
        assert!(value_residual(&jc, &p.coords, [0.5, 0.1]) < 1e-10);
    }

    #[test]
    fn toric_lattice_is_standard() {
        let m = instantiate(ModelSpec::CpnRotation { n: 2, lambda: 1.0 }).unwrap();
        let l = period_lattice(&m, [0.3, 0.4]).unwrap();
        assert!((l.tau2 - 2.0 * PI).abs() < 1e-6, "{l:?}");
        assert!(l.tau1.min(2.0 * PI - l.tau1) < 1e-6);
        assert!(l.residual < 1e-6);
    }

    #[test]
    fn jaynes_cummings_periods_are_base_point_independent() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let pts = fiber_points(&jc, [0.5, 0.1], 3).unwrap();
        assert!(pts.len() >= 2);
        let opts = PeriodOptions::default();
        let lat: Vec<_> = pts
            .iter()
            .map(|p| period_lattice_from(&jc, p, &ValueMap::identity(), &opts).unwrap())
            .collect();
        for l in &lat[1..] {
            assert!((l.tau2 - lat[0].tau2).abs() < 1e-6, "{lat:?}");
            let d = (l.tau1 - lat[0].tau1).rem_euclid(2.0 * PI);
            assert!(d.min(2.0 * PI - d) < 1e-6, "{lat:?}");
            assert!(l.residual < 1e-6);
        }
    }

    #[test]
    fn grid_excludes_focus_value() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let g = regular_grid(&jc, [-1.0, 3.0, -2.0, 2.0], 40, 0.05).unwrap();
        assert!(g.iter().all(|c| (c[0] - 1.0).hypot(c[1]) >= 0.05));
        assert!(g.iter().any(|c| (c[0] - 1.0).hypot(c[1]) < 0.2));
        let s2 = instantiate(ModelSpec::S2Height).unwrap();
        let g = regular_grid(&s2, [-2.0, 2.0, -1.0, 1.0], 20, 0.01).unwrap();
        assert!(g.iter().all(|c| c[1] == 0.0 && c[0] > -1.0 && c[0] < 1.0));
        assert!(matches!(
            regular_grid(&jc, [-5.0, -3.0, 4.0, 6.0], 10, 0.01),
            Err(Error::EmptyGrid(_))
        ));
    }
}
