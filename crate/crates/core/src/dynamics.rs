//! Momentum-map evaluation, Hamiltonian fields and their flows.

use crate::error::{Error, Result};
use crate::geom::{PhasePoint, TangentVector, Value};
use crate::ode;
use crate::systems::ModelSystem;

/// Which momentum-map component generates a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    F1,
    F2,
}

impl Component {
    pub fn weights(self) -> [f64; 2] {
        match self {
            Component::F1 => [1.0, 0.0],
            Component::F2 => [0.0, 1.0],
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Component::F1),
            2 => Ok(Component::F2),
            _ => Err(Error::BadParameter(format!(
                "component must be 1 or 2 (got {i})"
            ))),
        }
    }
}

fn checked(model: &ModelSystem, p: &PhasePoint) -> Result<Vec<f64>> {
    if p.model != model.kind() {
        return Err(Error::BadParameter(format!(
            "point belongs to {} but model is {}",
            p.model,
            model.id()
        )));
    }
    model.chart.check(&p.coords)
}

pub fn evaluate_f(model: &ModelSystem, p: &PhasePoint) -> Result<Value> {
    let x = checked(model, p)?;
    Ok(model.eval(&x))
}

pub fn hamiltonian_field(
    model: &ModelSystem,
    component: Component,
    p: &PhasePoint,
) -> Result<TangentVector> {
    let x = checked(model, p)?;
    let components = model.field_vec(&x, component.weights());
    Ok(TangentVector {
        components,
        base: model.point(x),
    })
}

/// `omega(X_f1, X_f2)` at `p`.
pub fn poisson_bracket(model: &ModelSystem, p: &PhasePoint) -> Result<f64> {
    let x = checked(model, p)?;
    let x1 = model.field_vec(&x, [1.0, 0.0]);
    let x2 = model.field_vec(&x, [0.0, 1.0]);
    Ok(model.chart.pairing(&x, &x1, &x2))
}

/// Flows `p` along the field of `w1 f1 + w2 f2` for signed time `time`.
pub fn flow_combination(
    model: &ModelSystem,
    w: [f64; 2],
    x: &[f64],
    time: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::BadParameter(format!(
            "tolerance must be positive (got {tol})"
        )));
    }
    let rhs = |y: &[f64], d: &mut [f64]| model.field(y, w, d);
    let proj = |y: &mut [f64]| model.chart.project(y);
    ode::integrate(&rhs, &proj, x, time, tol)
}

pub fn flow(
    model: &ModelSystem,
    component: Component,
    p: &PhasePoint,
    time: f64,
    tol: f64,
) -> Result<PhasePoint> {
    let x = checked(model, p)?;
    let y = flow_combination(model, component.weights(), &x, time, tol)?;
    Ok(model.point(y))
}

/// Largest `|omega(X_f, v) + df(v)|` over a tangent frame at `p`, for both
/// components, with `df` by central differences of step `h`.
pub fn duality_residual(model: &ModelSystem, p: &PhasePoint, h: f64) -> Result<f64> {
    let x = checked(model, p)?;
    let basis = model.chart.tangent_basis(&x);
    let mut worst: f64 = 0.0;
    for j in 0..basis.ncols() {
        let v: Vec<f64> = basis.column(j).iter().copied().collect();
        let shifted = |s: f64| {
            let mut y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + s * b).collect();
            model.chart.project(&mut y);
            model.eval(&y)
        };
        let (fp, fm) = (shifted(h), shifted(-h));
        for (k, w) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
            let df = (fp[k] - fm[k]) / (2.0 * h);
            let xf = model.field_vec(&x, w);
            worst = worst.max((model.chart.pairing(&x, &xf, &v) + df).abs());
        }
    }
    Ok(worst)
}

/// Largest change of either momentum-map component along the flow of each
/// component over `time`, sampled at ten checkpoints.
pub fn conservation_drift(model: &ModelSystem, p: &PhasePoint, time: f64, tol: f64) -> Result<f64> {
    let x = checked(model, p)?;
    let f0 = model.eval(&x);
    let mut worst: f64 = 0.0;
    for w in [[1.0, 0.0], [0.0, 1.0]] {
        let rhs = |y: &[f64], d: &mut [f64]| model.field(y, w, d);
        let proj = |y: &mut [f64]| model.chart.project(y);
        let mut y = x.clone();
        for _ in 0..10 {
            y = ode::integrate(&rhs, &proj, &y, time / 10.0, tol)?;
            let f = model.eval(&y);
            worst = worst.max((f[0] - f0[0]).abs()).max((f[1] - f0[1]).abs());
        }
    }
    Ok(worst)
}

/// Quasi-random points on the manifold (Halton sequence with an integer offset).
pub fn halton_points(model: &ModelSystem, count: usize, seed: u64) -> Vec<PhasePoint> {
    let dim = model.chart.seed_dim();
    (0..count)
        .map(|k| {
            let u: Vec<f64> = (0..dim)
                .map(|d| halton(k as u64 + 1 + seed, PRIMES[d]))
                .collect();
            model.point(model.chart.from_unit_cube(&u, model.plane_radius()))
        })
        .collect()
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{catalog, instantiate, ModelSpec};
    use std::f64::consts::PI;

    #[test]
    fn jaynes_cummings_focus_point_value() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let p = jc.point(vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(evaluate_f(&jc, &p).unwrap(), [1.0, 0.0]);
        let off = jc.point(vec![0.0, 0.0, 1.1, 0.0, 0.0]);
        assert!(matches!(
            evaluate_f(&jc, &off),
            Err(Error::ConstraintViolation { .. })
        ));
    }

    #[test]
    fn coupled_value_at_singular_point() {
        let m = instantiate(ModelSpec::CoupledAngularMomenta {
            r1: 1.0,
            r2: 2.5,
            t: 0.0,
        })
        .unwrap();
        let p = m.point(vec![0.0, 0.0, 1.0, 0.0, 0.0, -1.0]);
        assert_eq!(evaluate_f(&m, &p).unwrap(), [-1.5, 1.0]);
    }

    #[test]
    fn s2_height_field_is_horizontal() {
        let m = instantiate(ModelSpec::S2Height).unwrap();
        let p = m.point(vec![1.0, 0.0, 0.0]);
        let x = hamiltonian_field(&m, Component::F1, &p).unwrap();
        assert_eq!(x.components[2], 0.0);
        assert!((x.components[1].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn s2_height_flow_is_periodic() {
        let m = instantiate(ModelSpec::S2Height).unwrap();
        let p = m.point(vec![0.6, 0.0, 0.8]);
        let q = flow(&m, Component::F1, &p, 2.0 * PI, 1e-12).unwrap();
        assert!(m.chart.distance(&p.coords, &q.coords) < 1e-8);
        // Closed-form rotation about the z-axis at quarter period.
        let r = flow(&m, Component::F1, &p, PI / 2.0, 1e-12).unwrap();
        assert!((r.coords[0]).abs() < 1e-9 && (r.coords[1] - 0.6).abs() < 1e-9);
        assert_eq!(flow(&m, Component::F1, &p, 0.0, 1e-9).unwrap(), p);
    }

    #[test]
    fn focus_point_fields_vanish() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let p = jc.point(vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        for c in [Component::F1, Component::F2] {
            let x = hamiltonian_field(&jc, c, &p).unwrap();
            assert!(x.components.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn jaynes_cummings_f2_conserved_under_f1_flow() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let p = halton_points(&jc, 3, 7).pop().unwrap();
        let f0 = evaluate_f(&jc, &p).unwrap();
        for k in 1..=4 {
            let q = flow(&jc, Component::F1, &p, 5.0 * k as f64, 1e-12).unwrap();
            let f = evaluate_f(&jc, &q).unwrap();
            assert!((f[1] - f0[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn bad_tolerance_is_rejected() {
        let m = instantiate(ModelSpec::S2Height).unwrap();
        let p = m.point(vec![0.0, 0.0, 1.0]);
        assert!(flow(&m, Component::F1, &p, 1.0, 0.0).is_err());
    }

    #[test]
    fn duality_and_drift_on_catalog() {
        for m in catalog() {
            for p in halton_points(&m, 5, 11) {
                assert!(duality_residual(&m, &p, 1e-5).unwrap() < 1e-6, "{}", m.id());
            }
            let p = halton_points(&m, 1, 2).pop().unwrap();
            assert!(
                conservation_drift(&m, &p, 10.0, 1e-11).unwrap() < 1e-7,
                "{}",
                m.id()
            );
        }
    }

    #[test]
    fn halton_points_are_on_manifold() {
        for m in catalog() {
            for p in halton_points(&m, 50, 0) {
                assert!(m.chart.residual(&p.coords) < 1e-12, "{}", m.id());
            }
        }
    }

    #[test]
    fn circle_action_matches_f1_flow() {
        use crate::fibration::rotate_embedded;
        for m in catalog() {
            let p = halton_points(&m, 4, 3).pop().unwrap();
            let s = 0.7;
            let q = flow(&m, Component::F1, &p, s, 1e-12).unwrap();
            let rotated = rotate_embedded(&m, &m.chart.embed(&p.coords), s);
            let e = m.chart.embed(&q.coords);
            let d: f64 = rotated
                .iter()
                .zip(&e)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(d < 1e-9, "{}: {d}", m.id());
        }
    }
}
