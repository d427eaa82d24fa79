//! Critical points of the momentum map and their Williamson-type classification.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::halton_points;
use crate::error::{Error, Result};
use crate::fibration::field_norm;
use crate::geom::{PhasePoint, Value};
use crate::systems::{instantiate, ModelSpec, ModelSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularityType {
    /// Rank-0 point of a one-degree-of-freedom system with a centre.
    Elliptic,
    /// Rank-0 saddle of a one-degree-of-freedom system.
    Hyperbolic,
    EllipticElliptic,
    FocusFocus,
    TransversallyElliptic,
    EllipticHyperbolic,
    HyperbolicHyperbolic,
    TransversallyHyperbolic,
    Degenerate,
}

impl SingularityType {
    pub fn is_elliptic_type(self) -> bool {
        matches!(
            self,
            SingularityType::Elliptic
                | SingularityType::EllipticElliptic
                | SingularityType::TransversallyElliptic
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub point: PhasePoint,
    pub value: Value,
    pub rank: usize,
    pub kind: SingularityType,
    /// Spectrum of the linearization as `(re, im)` pairs (rank 0 only).
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Numerical knobs for classification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Generic combination `mu1 f1 + mu2 f2` used for the spectrum.
    pub mu: [f64; 2],
    /// Eigenvalue-pattern tolerance.
    pub pattern_tol: f64,
    /// Singular values of `dF` below this (relative) count as zero.
    pub rank_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            mu: [0.37, 0.91],
            pattern_tol: 1e-6,
            rank_tol: 1e-8,
        }
    }
}

/// Alternative combinations tried when the default one is resonant.
const REDRAWS: [[f64; 2]; 4] = [[0.83, -0.29], [0.61, 0.47], [-0.23, 0.77], [1.13, 0.19]];

const FD_STEP: f64 = 1e-6;

/// Linearization of the field of `w . F` at `x` in the orthonormal tangent frame.
pub fn linearization(model: &ModelSystem, x: &[f64], w: [f64; 2]) -> DMatrix<f64> {
    let b = model.chart.tangent_basis(x);
    let m = b.ncols();
    let n = x.len();
    let mut l = DMatrix::zeros(m, m);
    for j in 0..m {
        let mut xp: Vec<f64> = (0..n).map(|k| x[k] + FD_STEP * b[(k, j)]).collect();
        let mut xm: Vec<f64> = (0..n).map(|k| x[k] - FD_STEP * b[(k, j)]).collect();
        model.chart.project(&mut xp);
        model.chart.project(&mut xm);
        let fp = model.field_vec(&xp, w);
        let fm = model.field_vec(&xm, w);
        for i in 0..m {
            l[(i, j)] = (0..n).map(|k| b[(k, i)] * (fp[k] - fm[k])).sum::<f64>() / (2.0 * FD_STEP);
        }
    }
    l
}

/// Symplectic frame `(e_1..e_n, f_1..f_n)` at `x`, as coefficients in the
/// orthonormal tangent frame (columns), built by symplectic Gram–Schmidt.
pub fn symplectic_frame(model: &ModelSystem, x: &[f64]) -> DMatrix<f64> {
    let b = model.chart.tangent_basis(x);
    let w = model.chart.pairing_matrix(x, &b);
    let m = w.nrows();
    let om = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * &w * v)[(0, 0)];
    let mut pool: Vec<DVector<f64>> = (0..m)
        .map(|k| DVector::from_fn(m, |i, _| if i == k { 1.0 } else { 0.0 }))
        .collect();
    let mut es = Vec::new();
    let mut fs = Vec::new();
    while !pool.is_empty() {
        let e = pool.remove(0);
        let (k, best) = pool
            .iter()
            .enumerate()
            .map(|(k, v)| (k, om(&e, v)))
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .expect("even dimension");
        let f = pool.remove(k) / best;
        for v in pool.iter_mut() {
            let a = om(v, &f);
            let c = om(v, &e);
            *v = &*v - &e * a + &f * c;
        }
        es.push(e);
        fs.push(f);
    }
    let mut s = DMatrix::zeros(m, m);
    for (k, e) in es.iter().chain(fs.iter()).enumerate() {
        s.set_column(k, e);
    }
    s
}

/// Spectrum of a Hamiltonian matrix. Eigenvalues come in `±λ` pairs, so for
/// sizes 2 and 4 they follow from `tr(L^2)` and `tr(L^4)`.
pub(crate) fn eigen_pairs(l: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let l2 = l * l;
    let roots: Vec<Complex<f64>> = match l.nrows() {
        2 => vec![Complex::new(0.5 * l2.trace(), 0.0)],
        4 => {
            let s = 0.5 * l2.trace();
            let q = 0.5 * (&l2 * &l2).trace();
            let p = 0.5 * (s * s - q);
            let d = Complex::new(s * s - 4.0 * p, 0.0).sqrt();
            vec![
                (Complex::new(s, 0.0) + d) * 0.5,
                (Complex::new(s, 0.0) - d) * 0.5,
            ]
        }
        _ => {
            return nalgebra::linalg::Schur::try_new(l.clone(), 1e-14, 10_000)
                .map(|s| s.complex_eigenvalues().iter().copied().collect())
                .unwrap_or_default()
        }
    };
    roots
        .into_iter()
        .flat_map(|r| {
            let z = r.sqrt();
            [z, -z]
        })
        .collect()
}

/// Eigenvalue-pattern classification of a Hamiltonian matrix. `None` when the
/// pattern is ambiguous at tolerance `tol`.
fn pattern(eigs: &[Complex<f64>], tol: f64) -> Option<SingularityType> {
    let scale = eigs.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = tol * scale;
    if eigs.iter().any(|z| z.norm() < tol) {
        return None;
    }
    for i in 0..eigs.len() {
        for j in i + 1..eigs.len() {
            if (eigs[i] - eigs[j]).norm() < tol {
                return None;
            }
        }
    }
    let imag = eigs
        .iter()
        .filter(|z| z.re.abs() < tol && z.im.abs() >= tol)
        .count();
    let real = eigs
        .iter()
        .filter(|z| z.im.abs() < tol && z.re.abs() >= tol)
        .count();
    let complex = eigs
        .iter()
        .filter(|z| z.im.abs() >= tol && z.re.abs() >= tol)
        .count();
    match (eigs.len(), imag, real, complex) {
        (2, 2, 0, 0) => Some(SingularityType::Elliptic),
        (2, 0, 2, 0) => Some(SingularityType::Hyperbolic),
        (4, 4, 0, 0) => Some(SingularityType::EllipticElliptic),
        (4, 0, 0, 4) => Some(SingularityType::FocusFocus),
        (4, 2, 2, 0) => Some(SingularityType::EllipticHyperbolic),
        (4, 0, 4, 0) => Some(SingularityType::HyperbolicHyperbolic),
        _ => None,
    }
}

/// Classifies a rank-0 critical point.
pub fn classify(model: &ModelSystem, p: &PhasePoint) -> Result<CriticalPoint> {
    classify_with(model, p, &ClassifyOptions::default())
}

pub fn classify_with(
    model: &ModelSystem,
    p: &PhasePoint,
    opts: &ClassifyOptions,
) -> Result<CriticalPoint> {
    let x = model.chart.check(&p.coords)?;
    let fnorm = field_norm(model, &x, [1.0, 0.0]).max(field_norm(model, &x, [0.0, 1.0]));
    if fnorm > 1e-7 {
        return Err(Error::BadParameter(format!(
            "point is not rank-0 critical (field norm {fnorm:.3e})"
        )));
    }
    let l1 = linearization(model, &x, [1.0, 0.0]);
    let l2 = linearization(model, &x, [0.0, 1.0]);
    let (kind, eigs) = classify_linearizations(&l1, &l2, model.dof(), opts);
    Ok(CriticalPoint {
        value: model.eval(&x),
        point: model.point(x),
        rank: 0,
        kind,
        eigenvalues: eigs.iter().map(|z| (z.re, z.im)).collect(),
    })
}

/// Classification from the linearized fields of `f1` and `f2`.
pub fn classify_linearizations(
    l1: &DMatrix<f64>,
    l2: &DMatrix<f64>,
    dof: usize,
    opts: &ClassifyOptions,
) -> (SingularityType, Vec<Complex<f64>>) {
    if dof == 2 {
        // Non-degeneracy needs the two linear fields to be independent.
        let n1 = l1.norm();
        let n2 = l2.norm();
        if n1 < opts.pattern_tol || n2 < opts.pattern_tol {
            return (
                SingularityType::Degenerate,
                eigen_pairs(&(l1 * opts.mu[0] + l2 * opts.mu[1])),
            );
        }
        let c = l1.dot(l2) / (n1 * n2);
        if 1.0 - c.abs() < opts.pattern_tol {
            return (
                SingularityType::Degenerate,
                eigen_pairs(&(l1 * opts.mu[0] + l2 * opts.mu[1])),
            );
        }
    }
    let mut first = None;
    for mu in std::iter::once(opts.mu).chain(REDRAWS) {
        let l = if dof == 1 {
            l1.clone()
        } else {
            l1 * mu[0] + l2 * mu[1]
        };
        let eigs = eigen_pairs(&l);
        if first.is_none() {
            first = Some(eigs.clone());
        }
        if let Some(kind) = pattern(&eigs, opts.pattern_tol) {
            return (kind, eigs);
        }
        if dof == 1 {
            break;
        }
    }
    (SingularityType::Degenerate, first.unwrap_or_default())
}

/// Sign-carrying discriminant `tr(L^4) - tr(L^2)^2 / 4` of a 4x4 Hamiltonian
/// matrix: positive for two elliptic (or two hyperbolic) pairs, negative for a
/// focus-focus quadruple, zero at a collision.
pub fn discriminant(l: &DMatrix<f64>) -> f64 {
    let l2 = l * l;
    let t2 = l2.trace();
    let t4 = (&l2 * &l2).trace();
    t4 - 0.25 * t2 * t2
}

/// Classifies a rank-1 critical point by its transversal linearization.
pub fn classify_rank1(model: &ModelSystem, x: &[f64], opts: &ClassifyOptions) -> CriticalPoint {
    let b = model.chart.tangent_basis(x);
    let mut g = vec![0.0; x.len()];
    let mut d = DMatrix::zeros(2, b.ncols());
    for r in 0..2 {
        model.gradient(x, if r == 0 { [1.0, 0.0] } else { [0.0, 1.0] }, &mut g);
        for c in 0..b.ncols() {
            d[(r, c)] = (0..x.len()).map(|k| g[k] * b[(k, c)]).sum();
        }
    }
    // Combination with vanishing differential: left singular vector of the smallest singular value.
    let svd = d.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let k = if svd.singular_values[0] < svd.singular_values[1] {
        0
    } else {
        1
    };
    let w = [u[(0, k)], u[(1, k)]];
    let l = linearization(model, x, w);
    let mut eigs = eigen_pairs(&l);
    eigs.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    let scale = eigs[0].norm().max(1e-300);
    let tol = opts.pattern_tol.max(1e-5);
    let kind =
        if eigs.len() < 4 || eigs[0].norm() < tol || eigs[2].norm() > tol * scale.max(1.0) * 10.0 {
            SingularityType::Degenerate
        } else if eigs[0].re.abs() < tol * scale && eigs[1].re.abs() < tol * scale {
            SingularityType::TransversallyElliptic
        } else if eigs[0].im.abs() < tol * scale && eigs[1].im.abs() < tol * scale {
            SingularityType::TransversallyHyperbolic
        } else {
            SingularityType::Degenerate
        };
    CriticalPoint {
        point: model.point(x.to_vec()),
        value: model.eval(x),
        rank: 1,
        kind,
        eigenvalues: eigs.iter().map(|z| (z.re, z.im)).collect(),
    }
}

/// Levenberg–Marquardt descent of `|r(x)|^2` on the manifold; returns the
/// final point and residual norm.
fn descend(
    model: &ModelSystem,
    x0: &[f64],
    residual: &dyn Fn(&[f64]) -> Vec<f64>,
    target: f64,
) -> (Vec<f64>, f64) {
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut damping = 1e-3;
    for _ in 0..200 {
        if rn < target {
            break;
        }
        let b = model.chart.tangent_basis(&x);
        let m = b.ncols();
        let mut j = DMatrix::zeros(r.len(), m);
        let h = 1e-7;
        for c in 0..m {
            let mut xp: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(k, v)| v + h * b[(k, c)])
                .collect();
            let mut xm: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(k, v)| v - h * b[(k, c)])
                .collect();
            model.chart.project(&mut xp);
            model.chart.project(&mut xm);
            let rp = residual(&xp);
            let rm = residual(&xm);
            for i in 0..r.len() {
                j[(i, c)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rv = DVector::from_vec(r.clone());
        let jt = j.transpose();
        let jtj = &jt * &j;
        let grad = &jt * &rv;
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for i in 0..m {
                a[(i, i)] += damping * (1.0 + jtj[(i, i)]);
            }
            let Some(delta) = a.lu().solve(&grad) else {
                damping *= 10.0;
                continue;
            };
            let step = &b * delta;
            let mut y: Vec<f64> = x.iter().zip(step.iter()).map(|(v, s)| v - s).collect();
            model.chart.project(&mut y);
            let ry = residual(&y);
            let ryn = ry.iter().map(|v| v * v).sum::<f64>().sqrt();
            if ryn < rn {
                x = y;
                r = ry;
                rn = ryn;
                damping = (damping * 0.2).max(1e-12);
                improved = true;
                break;
            }
            damping *= 10.0;
        }
        if !improved || x.iter().any(|v| v.abs() > 1e3) {
            break;
        }
    }
    (x, rn)
}

fn both_fields(model: &ModelSystem, x: &[f64]) -> Vec<f64> {
    let mut r = model.field_vec(x, [1.0, 0.0]);
    if model.dof() == 2 {
        r.extend(model.field_vec(x, [0.0, 1.0]));
    }
    r
}

fn wedge(model: &ModelSystem, x: &[f64]) -> Vec<f64> {
    let a = model.field_vec(x, [1.0, 0.0]);
    let b = model.field_vec(x, [0.0, 1.0]);
    let n = x.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(a[i] * b[j] - a[j] * b[i]);
        }
    }
    out
}

/// Rank-0 critical points found from a fixed quasi-random seed set.
///
/// Results are memoized per model specification.
pub fn rank0_points(model: &ModelSystem) -> Vec<PhasePoint> {
    static CACHE: OnceLock<Mutex<HashMap<String, Vec<PhasePoint>>>> = OnceLock::new();
    let key = serde_json::to_string(&model.spec).unwrap_or_default();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(v) = cache.lock().unwrap().get(&key) {
        return v.clone();
    }
    let found = search_rank0(model);
    cache.lock().unwrap().insert(key, found.clone());
    found
}

fn search_rank0(model: &ModelSystem) -> Vec<PhasePoint> {
    let mut found: Vec<PhasePoint> = Vec::new();
    for seed in halton_points(model, 64, 0) {
        let (x, rn) = descend(model, &seed.coords, &|y| both_fields(model, y), 1e-13);
        if rn < 1e-10
            && !found
                .iter()
                .any(|q| model.chart.distance(&q.coords, &x) < 1e-6)
        {
            found.push(model.point(x));
        }
    }
    found
}

pub fn rank0_values(model: &ModelSystem) -> Vec<Value> {
    rank0_points(model)
        .iter()
        .map(|p| model.eval(&p.coords))
        .collect()
}

/// Result of a critical-point search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalCensus {
    pub points: Vec<CriticalPoint>,
    /// Seeds that did not converge to a critical point.
    pub failures: usize,
}

impl CriticalCensus {
    pub fn rank0(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points.iter().filter(|p| p.rank == 0)
    }

    pub fn focus_focus(&self) -> impl Iterator<Item = &CriticalPoint> {
        self.points
            .iter()
            .filter(|p| p.kind == SingularityType::FocusFocus)
    }
}

/// Searches for critical points from `seed_count` quasi-random seeds.
///
/// Rank-0 points are refined until both fields vanish to 1e-10; rank-1
/// points are representative samples of their families with wedge norm below 1e-10.
pub fn find_critical_points(model: &ModelSystem, seed_count: usize) -> Result<CriticalCensus> {
    find_critical_points_seeded(model, seed_count, 0)
}

/// As [`find_critical_points`], starting `offset` entries into the Halton sequence.
pub fn find_critical_points_seeded(
    model: &ModelSystem,
    seed_count: usize,
    offset: u64,
) -> Result<CriticalCensus> {
    if seed_count == 0 {
        return Err(Error::BadParameter("seed_count must be at least 1".into()));
    }
    let opts = ClassifyOptions::default();
    let seeds = halton_points(model, seed_count, offset);
    let results: Vec<Option<CriticalPoint>> = {
        use rayon::prelude::*;
        seeds
            .par_iter()
            .map(|seed| {
                let (x0, r0) = descend(model, &seed.coords, &|y| both_fields(model, y), 1e-13);
                if r0 < 1e-10 {
                    return classify_with(model, &model.point(x0), &opts).ok();
                }
                if model.dof() < 2 {
                    return None;
                }
                let (x1, r1) = descend(model, &seed.coords, &|y| wedge(model, y), 1e-13);
                if r1 >= 1e-10 {
                    return None;
                }
                let fnorm =
                    field_norm(model, &x1, [1.0, 0.0]).max(field_norm(model, &x1, [0.0, 1.0]));
                if fnorm < 1e-8 {
                    let (x2, r2) = descend(model, &x1, &|y| both_fields(model, y), 1e-13);
                    return if r2 < 1e-10 {
                        classify_with(model, &model.point(x2), &opts).ok()
                    } else {
                        None
                    };
                }
                Some(classify_rank1(model, &x1, &opts))
            })
            .collect()
    };
    let mut census = CriticalCensus {
        points: Vec::new(),
        failures: 0,
    };
    for r in results {
        match r {
            Some(cp) => {
                if !census
                    .points
                    .iter()
                    .any(|q| model.chart.distance(&q.point.coords, &cp.point.coords) < 1e-6)
                {
                    census.points.push(cp);
                }
            }
            None => census.failures += 1,
        }
    }
    census.points.sort_by_key(|p| p.rank);
    Ok(census)
}

/// Result of classifying a fixed point along a parameter family.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sweep {
    pub samples: Vec<(f64, SingularityType)>,
    /// Transition parameters bracketed to width `1e-6`: `(t_low, t_high, before, after)`.
    pub transitions: Vec<(f64, f64, SingularityType, SingularityType)>,
}

/// Classifies `point` for each `t` of the coupled-angular-momenta family
/// with fixed radii and brackets every type change by bisection.
pub fn sweep_parameter(r1: f64, r2: f64, point: &[f64], t_grid: &[f64]) -> Result<Sweep> {
    let opts = ClassifyOptions::default();
    let family = |t: f64| instantiate(ModelSpec::CoupledAngularMomenta { r1, r2, t });
    let classify_at = |t: f64| -> Result<SingularityType> {
        let m = family(t)?;
        Ok(classify_with(&m, &m.point(point.to_vec()), &opts)?.kind)
    };
    let disc_at = |t: f64| -> Result<f64> {
        let m = family(t)?;
        let l1 = linearization(&m, point, [1.0, 0.0]);
        let l2 = linearization(&m, point, [0.0, 1.0]);
        Ok(discriminant(&(l1 * opts.mu[0] + l2 * opts.mu[1])))
    };
    let mut samples = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        samples.push((t, classify_at(t)?));
    }
    let definite: Vec<(f64, SingularityType)> = samples
        .iter()
        .copied()
        .filter(|(_, k)| *k != SingularityType::Degenerate)
        .collect();
    let mut transitions = Vec::new();
    for pair in definite.windows(2) {
        let ((ta, ka), (tb, kb)) = (pair[0], pair[1]);
        if ka == kb {
            continue;
        }
        let (mut lo, mut hi) = (ta, tb);
        let slo = disc_at(lo)?.signum();
        while hi - lo > 1e-6 {
            let mid = 0.5 * (lo + hi);
            if disc_at(mid)?.signum() == slo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        transitions.push((lo, hi, ka, kb));
    }
    Ok(Sweep {
        samples,
        transitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::instantiate;

    #[test]
    fn jaynes_cummings_north_pole_is_focus_focus() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let cp = classify(&jc, &jc.point(vec![0.0, 0.0, 1.0, 0.0, 0.0])).unwrap();
        assert_eq!(cp.kind, SingularityType::FocusFocus);
        let cp = classify(&jc, &jc.point(vec![0.0, 0.0, -1.0, 0.0, 0.0])).unwrap();
        assert_eq!(cp.kind, SingularityType::EllipticElliptic);
    }

    #[test]
    fn coupled_half_is_focus_focus_and_zero_is_elliptic() {
        let p = vec![0.0, 0.0, 1.0, 0.0, 0.0, -1.0];
        let m = instantiate(ModelSpec::CoupledAngularMomenta {
            r1: 1.0,
            r2: 2.5,
            t: 0.5,
        })
        .unwrap();
        assert_eq!(
            classify(&m, &m.point(p.clone())).unwrap().kind,
            SingularityType::FocusFocus
        );
        let m = instantiate(ModelSpec::CoupledAngularMomenta {
            r1: 1.0,
            r2: 2.5,
            t: 0.0,
        })
        .unwrap();
        assert_eq!(
            classify(&m, &m.point(p)).unwrap().kind,
            SingularityType::EllipticElliptic
        );
    }

    #[test]
    fn regular_point_is_rejected() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let p = jc.point(vec![1.0, 0.0, 0.0, 0.3, 0.0]);
        assert!(classify(&jc, &p).is_err());
    }

    #[test]
    fn classification_independent_of_combination_and_frame() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let x = [0.0, 0.0, 1.0, 0.0, 0.0];
        let l1 = linearization(&jc, &x, [1.0, 0.0]);
        let l2 = linearization(&jc, &x, [0.0, 1.0]);
        let s = symplectic_frame(&jc, &x);
        let si = s.clone().try_inverse().unwrap();
        let (l1s, l2s) = (&si * &l1 * &s, &si * &l2 * &s);
        for mu in [[0.37, 0.91], [0.2, -1.3]] {
            let opts = ClassifyOptions {
                mu,
                ..Default::default()
            };
            assert_eq!(
                classify_linearizations(&l1, &l2, 2, &opts).0,
                SingularityType::FocusFocus
            );
            assert_eq!(
                classify_linearizations(&l1s, &l2s, 2, &opts).0,
                SingularityType::FocusFocus
            );
        }
    }

    #[test]
    fn symplectic_frame_is_standard() {
        let m = instantiate(ModelSpec::CoupledAngularMomenta {
            r1: 1.0,
            r2: 2.5,
            t: 0.5,
        })
        .unwrap();
        let x = [0.6, 0.0, 0.8, 0.0, 0.6, -0.8];
        let b = m.chart.tangent_basis(&x);
        let w = m.chart.pairing_matrix(&x, &b);
        let s = symplectic_frame(&m, &x);
        let ws = s.transpose() * w * &s;
        let mut j = DMatrix::zeros(4, 4);
        j[(0, 2)] = 1.0;
        j[(1, 3)] = 1.0;
        j[(2, 0)] = -1.0;
        j[(3, 1)] = -1.0;
        assert!((ws - j).norm() < 1e-12);
    }

    #[test]
    fn s2_height_critical_points_are_the_poles() {
        let m = instantiate(ModelSpec::S2Height).unwrap();
        let census = find_critical_points(&m, 32).unwrap();
        assert_eq!(census.points.len(), 2);
        for cp in &census.points {
            assert_eq!(cp.rank, 0);
            assert_eq!(cp.kind, SingularityType::Elliptic);
            assert!((cp.point.coords[2].abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_seeds_rejected() {
        let m = instantiate(ModelSpec::S2Height).unwrap();
        assert!(find_critical_points(&m, 0).is_err());
    }
}
