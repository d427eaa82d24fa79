//! Acceptance checks, shared by the test suite and the `selftest` command.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{conservation_drift, duality_residual, halton_points, poisson_bracket};
use crate::error::Result;
use crate::inverse::{
    circle_loop, fit_lattice, hausdorff_to_image, lattice_scale, locate_marked_values,
    transport_monodromy, ClassicalImage, LocateOptions,
};
use crate::polygon::{build_polygon, delzant_check, vertex_hausdorff, PolygonOptions};
use crate::quantum::{
    build_coupled_spins, build_jaynes_cummings, build_spin_toric, coupled_spins, joint_spectrum,
    OperatorPair,
};
use crate::singularity::{find_critical_points, sweep_parameter, SingularityType};
use crate::systems::{catalog, instantiate, ModelSpec};
use crate::taylor::{focus_focus_point, taylor_linear};

pub const CRITERIA: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {}: {} | {} [{:.1}s]",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds
        )
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn taylor_jaynes_cummings() -> Result<Outcome> {
    let m = instantiate(ModelSpec::JaynesCummings)?;
    let t = taylor_linear(&m, &focus_focus_point(&m)?)?;
    let (e10, e01) = (angle_gap(t.a10, PI / 2.0), (t.a01 - 5.0 * 2f64.ln()).abs());
    outcome(
        e10 <= 1e-2 && e01 <= 1e-2,
        format!(
            "a10 = {:.6} (err {e10:.2e}), a01 = {:.6} (err {e01:.2e}), tol 1e-2",
            t.a10, t.a01
        ),
    )
}

fn taylor_coupled() -> Result<Outcome> {
    let m = instantiate(ModelSpec::CoupledAngularMomenta {
        r1: 1.0,
        r2: 2.5,
        t: 0.5,
    })?;
    let t = taylor_linear(&m, &focus_focus_point(&m)?)?;
    let a10 = (9.0f64 / 13.0).atan();
    let a01 = 3.5 * 2f64.ln() + 3.0 * 3f64.ln() - 1.5 * 5f64.ln();
    let (e10, e01) = (angle_gap(t.a10, a10), (t.a01 - a01).abs());
    outcome(
        e10 <= 1e-2 && e01 <= 1e-2,
        format!(
            "a10 = {:.6} (err {e10:.2e}), a01 = {:.6} (err {e01:.2e}), tol 1e-2",
            t.a10, t.a01
        ),
    )
}

fn census() -> Result<Outcome> {
    let jc = instantiate(ModelSpec::JaynesCummings)?;
    let c = find_critical_points(&jc, 200)?;
    let ff: Vec<_> = c.focus_focus().collect();
    let at_pole = ff.len() == 1
        && jc
            .chart
            .distance(&ff[0].point.coords, &[0.0, 0.0, 1.0, 0.0, 0.0])
            < 1e-8;
    let others_elliptic = c
        .points
        .iter()
        .filter(|p| p.kind != SingularityType::FocusFocus)
        .all(|p| p.kind.is_elliptic_type());
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let sweep = sweep_parameter(1.0, 2.5, &[0.0, 0.0, 1.0, 0.0, 0.0, -1.0], &grid)?;
    let tr = &sweep.transitions;
    let pattern = tr.len() == 2
        && tr[0].2.is_elliptic_type()
        && tr[0].3 == SingularityType::FocusFocus
        && tr[1].2 == SingularityType::FocusFocus
        && tr[1].3.is_elliptic_type()
        && tr[0].1 < 0.5
        && tr[1].0 > 0.5;
    let brackets = tr
        .iter()
        .map(|t| format!("[{:.6}, {:.6}]", t.0, t.1))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(
        at_pole && others_elliptic && pattern,
        format!(
            "JC: {} focus-focus (at pole: {at_pole}), {} critical points, others elliptic: {others_elliptic}; coupled transitions {brackets}",
            ff.len(),
            c.points.len()
        ),
    )
}

fn toric_polygons() -> Result<Outcome> {
    let opts = PolygonOptions::default();
    let s2 = build_polygon(&instantiate(ModelSpec::S2Height)?, None, &opts)?;
    let cp = build_polygon(
        &instantiate(ModelSpec::CpnRotation { n: 2, lambda: 1.0 })?,
        None,
        &opts,
    )?;
    let d_s2 = vertex_hausdorff(&s2.vertices, &[[-1.0, 0.0], [1.0, 0.0]]);
    let d_cp = vertex_hausdorff(&cp.vertices, &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
    let delzant = delzant_check(&s2)?.pass && delzant_check(&cp)?.pass;
    outcome(
        d_s2 <= 1e-3 && d_cp <= 1e-3 && delzant,
        format!("d_H(s2) = {d_s2:.2e}, d_H(CP2) = {d_cp:.2e}, tol 1e-3; Delzant: {delzant}"),
    )
}

fn involution_suite() -> Result<Outcome> {
    let models = catalog();
    let mut bracket: f64 = 0.0;
    let mut drift: f64 = 0.0;
    let mut duality: f64 = 0.0;
    for m in &models {
        let pts = halton_points(m, 1000, 0);
        let b = pts
            .par_iter()
            .map(|p| poisson_bracket(m, p).map(f64::abs))
            .collect::<Result<Vec<_>>>()?;
        bracket = b.into_iter().fold(bracket, f64::max);
        let d = pts[..100]
            .par_iter()
            .map(|p| duality_residual(m, p, 1e-5))
            .collect::<Result<Vec<_>>>()?;
        duality = d.into_iter().fold(duality, f64::max);
        let f = pts[..8]
            .par_iter()
            .map(|p| conservation_drift(m, p, 10.0, 1e-11))
            .collect::<Result<Vec<_>>>()?;
        drift = f.into_iter().fold(drift, f64::max);
    }
    outcome(
        bracket < 1e-9 && drift < 1e-7 && duality < 1e-6,
        format!(
            "{} models: max |{{f1,f2}}| = {bracket:.2e} (<1e-9), drift = {drift:.2e} (<1e-7), duality = {duality:.2e} (<1e-6)",
            models.len()
        ),
    )
}

fn quantum_suite() -> Result<Outcome> {
    let pairs: Vec<OperatorPair> = vec![
        build_spin_toric(0.5)?,
        build_spin_toric(10.0)?,
        build_jaynes_cummings(5.0, 60)?,
        build_jaynes_cummings(10.0, 80)?,
        coupled_spins(10.0, 1.0, 2.5, 0.5)?,
        build_coupled_spins(4.0, 10.0, 1.0, 2.5, 1.0)?,
        coupled_spins(8.0, 1.0, 2.5, 0.0)?,
    ];
    let mut herm: f64 = 0.0;
    let mut comm: f64 = 0.0;
    let mut resid: f64 = 0.0;
    for p in &pairs {
        herm = herm.max(p.hermitian_defect());
        comm = comm.max(p.relative_commutator());
        resid = resid.max(joint_spectrum(p)?.max_residual);
    }
    outcome(
        herm <= 1e-12 && comm < 1e-10 && resid < 1e-8,
        format!(
            "{} pairs: hermitian defect {herm:.2e} (<=1e-12), relative commutator {comm:.2e} (<1e-10), eigen residual {resid:.2e} (<1e-8)",
            pairs.len()
        ),
    )
}

/// `d_H(JointSpec, F(M))` for the spin and coupled models at the given `j`.
pub fn convergence_distances(js: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let spin_image = ClassicalImage::diagonal();
    let coupled = instantiate(ModelSpec::CoupledAngularMomenta {
        r1: 1.0,
        r2: 2.5,
        t: 0.5,
    })?;
    let coupled_image = ClassicalImage::from_model(&coupled, None, 801)?;
    let mut spin = Vec::new();
    let mut cpl = Vec::new();
    for &j in js {
        let s = joint_spectrum(&build_spin_toric(j)?)?;
        spin.push(hausdorff_to_image(&s.points, &spin_image, s.hbar / 8.0));
        let c = joint_spectrum(&coupled_spins(j, 1.0, 2.5, 0.5)?)?;
        cpl.push(hausdorff_to_image(&c.points, &coupled_image, c.hbar / 8.0));
    }
    Ok((spin, cpl))
}

fn sci(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn halving_ok(d: &[f64]) -> (bool, Vec<f64>) {
    let ratios: Vec<f64> = d.windows(2).map(|w| w[0] / w[1]).collect();
    (ratios.iter().all(|r| (1.5..=3.0).contains(r)), ratios)
}

fn convergence() -> Result<Outcome> {
    let (spin, cpl) = convergence_distances(&[10.0, 20.0, 40.0])?;
    let (ok_s, rs) = halving_ok(&spin);
    let (ok_c, rc) = halving_ok(&cpl);
    outcome(
        ok_s && ok_c,
        format!(
            "spin d_H [{}] ratios {rs:.3?}; coupled d_H [{}] ratios {rc:.3?}; ratios in [1.5, 3]",
            sci(&spin),
            sci(&cpl)
        ),
    )
}

/// Window centre for the lattice residual check (regular value of the coupled model at `t = 1/2`).
pub const RESIDUAL_WINDOW: [f64; 2] = [1.5, 0.3];
/// Window radius in units of `hbar`.
pub const RESIDUAL_WINDOW_HBARS: f64 = 8.0;

fn residual_scaling() -> Result<Outcome> {
    let mut res = Vec::new();
    for j in [20.0, 40.0] {
        let s = joint_spectrum(&coupled_spins(j, 1.0, 2.5, 0.5)?)?;
        res.push(
            fit_lattice(&s, RESIDUAL_WINDOW, RESIDUAL_WINDOW_HBARS * s.hbar, s.hbar)?.residual,
        );
    }
    let ratio = res[0] / res[1];
    outcome(
        (3.0..=5.0).contains(&ratio),
        format!(
            "residual j=20 {:.3e}, j=40 {:.3e}, ratio {ratio:.3} in [3, 5]",
            res[0], res[1]
        ),
    )
}

fn monodromy() -> Result<Outcome> {
    let s = joint_spectrum(&coupled_spins(40.0, 1.0, 2.5, 0.5)?)?;
    let scale = lattice_scale(&s);
    let ff = [-1.5, 0.0];
    let mut mats = Vec::new();
    for cells in [6.0, 8.0] {
        let r = cells * scale;
        mats.push(transport_monodromy(
            &s,
            &circle_loop(ff, r, 0.5 * r, 8),
            s.hbar,
        )?);
    }
    let unipotent = mats.iter().all(|m| {
        let [[a, b], [c, d]] = m.matrix;
        !m.is_identity()
            && m.det() == 1
            && m.trace().abs() == 2
            && (b.abs() + c.abs() == 1)
            && a.abs() == 1
            && d.abs() == 1
    });
    let stable = mats[0].matrix == mats[1].matrix;
    let r = 6.0 * scale;
    let regular = transport_monodromy(&s, &circle_loop(RESIDUAL_WINDOW, r, 0.5 * r, 8), s.hbar)?;
    let jc: Vec<_> = [20.0, 40.0]
        .iter()
        .map(|&j| joint_spectrum(&build_jaynes_cummings(j, 200)?))
        .collect::<Result<_>>()?;
    let found = locate_marked_values(&jc, &LocateOptions::default())?;
    let located = found.len() == 1 && (found[0][0] - 1.0).hypot(found[0][1]) <= 0.05;
    outcome(
        unipotent && stable && regular.is_identity() && located,
        format!(
            "coupled loop {:?} (refined {:?}), regular loop {:?}, JC marked values {:.4?}",
            mats[0].matrix, mats[1].matrix, regular.matrix, found
        ),
    )
}

fn title(id: u8) -> &'static str {
    match id {
        1 => "Jaynes-Cummings linear Taylor invariant",
        2 => "coupled angular momenta linear Taylor invariant",
        3 => "singularity census and coupling sweep",
        4 => "toric polygons",
        5 => "involution, conservation and duality",
        6 => "quantum structure",
        7 => "semiclassical convergence",
        8 => "lattice residual scaling",
        9 => "monodromy detection",
        _ => "unknown",
    }
}

/// Runs one acceptance criterion; errors count as failures.
pub fn run(id: u8) -> CriterionReport {
    let start = Instant::now();
    let result = match id {
        1 => taylor_jaynes_cummings(),
        2 => taylor_coupled(),
        3 => census(),
        4 => toric_polygons(),
        5 => involution_suite(),
        6 => quantum_suite(),
        7 => convergence(),
        8 => residual_scaling(),
        9 => monodromy(),
        _ => outcome(false, format!("no criterion {id}")),
    };
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("{}: {e}", e.name())),
    };
    CriterionReport {
        id,
        title: title(id).into(),
        pass,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}
