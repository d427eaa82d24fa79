//! Action integration and the marked polygon of a semitoric model.
//!
//! The second action satisfies `dI2 = (tau1 dc1 + tau2 dc2) / 2pi`, with
//! `tau1` lifted continuously along the integration path. Boundary heights
//! are reached by vertical integration from a spine that passes below every
//! marked value whose cut points up (and above those whose cut points down),
//! so no path crosses a cut.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibration::{fiber_point, period_lattice_from, PeriodOptions, ValueMap};
use crate::geom::Value;
use crate::singularity::{self, SingularityType};
use crate::systems::ModelSystem;

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPolygon {
    /// Counter-clockwise vertex ring (no repeated closing vertex).
    pub vertices: Vec<Value>,
    pub marked_points: Vec<Value>,
    pub cut_signs: Vec<i8>,
    /// Storage only; never computed.
    pub twisting_labels: Option<Vec<i64>>,
    /// True when the image was clipped to a finite `c1` window.
    pub truncated: bool,
}

impl MarkedPolygon {
    /// Polygon without marked points.
    pub fn toric(vertices: Vec<Value>) -> Self {
        Self {
            vertices,
            marked_points: Vec::new(),
            cut_signs: Vec::new(),
            twisting_labels: None,
            truncated: false,
        }
    }

    /// Lower and upper boundary heights at abscissa `x`, if inside.
    pub fn vertical_extent(&self, x: f64) -> Option<(f64, f64)> {
        let n = self.vertices.len();
        let mut ys = Vec::new();
        for i in 0..n {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let (lo, hi) = (a[0].min(b[0]), a[0].max(b[0]));
            if x < lo || x > hi {
                continue;
            }
            if (b[0] - a[0]).abs() < 1e-14 {
                ys.push(a[1]);
                ys.push(b[1]);
            } else {
                ys.push(a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0]));
            }
        }
        let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonOptions {
    /// Number of sampled columns across the `c1` window.
    pub resolution: usize,
    /// Window for models whose `f1` is unbounded.
    pub c1_window: Option<(f64, f64)>,
    /// Slope snapping tolerance.
    pub slope_tol: f64,
    /// Largest denominator accepted for snapped slopes.
    pub max_denominator: i64,
    pub periods: PeriodOptions,
}

impl Default for PolygonOptions {
    fn default() -> Self {
        Self {
            resolution: 48,
            c1_window: None,
            slope_tol: 2e-3,
            max_denominator: 64,
            periods: PeriodOptions::default(),
        }
    }
}

/// Focus-focus values of `model`, sorted by `c1`.
pub fn focus_focus_values(model: &ModelSystem) -> Result<Vec<Value>> {
    let mut out = Vec::new();
    for p in singularity::rank0_points(model) {
        let cp = singularity::classify(model, &p)?;
        if cp.kind == SingularityType::FocusFocus {
            out.push(cp.value);
        }
    }
    out.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
    for w in out.windows(2) {
        if (w[1][0] - w[0][0]).abs() < 1e-6 {
            return Err(Error::NotSimple { c1: w[0][0] });
        }
    }
    Ok(out)
}

/// Integration domain for the second action: image profile, marked values and
/// the cut-avoiding spine.
pub struct ActionChart<'a> {
    pub model: &'a ModelSystem,
    pub c1_range: (f64, f64),
    pub marked: Vec<Value>,
    pub cut_signs: Vec<i8>,
    pub periods: PeriodOptions,
}

impl<'a> ActionChart<'a> {
    pub fn new(
        model: &'a ModelSystem,
        cut_signs: Option<&[i8]>,
        c1_window: Option<(f64, f64)>,
    ) -> Result<Self> {
        if model.dof() != 2 {
            return Err(Error::Unsupported(
                "action charts need two degrees of freedom".into(),
            ));
        }
        let (a, b) = model.f1_range();
        let (lo, hi) = match c1_window {
            Some((l, h)) => (l.max(a), h.min(b)),
            None => (a, b),
        };
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::Unsupported(format!(
                "{} needs a finite c1 window",
                model.id()
            )));
        }
        let marked = focus_focus_values(model)?;
        let cut_signs = match cut_signs {
            Some(s) if s.len() == marked.len() && s.iter().all(|e| *e == 1 || *e == -1) => {
                s.to_vec()
            }
            Some(s) => {
                return Err(Error::BadParameter(format!(
                    "expected {} cut signs of +1 or -1, got {:?}",
                    marked.len(),
                    s
                )))
            }
            None => vec![1; marked.len()],
        };
        Ok(Self {
            model,
            c1_range: (lo, hi),
            marked,
            cut_signs,
            periods: PeriodOptions::default(),
        })
    }

    pub fn profile(&self, c1: f64) -> Result<(f64, f64)> {
        match self.model.image_profile(c1) {
            Some((lo, hi)) if lo.is_finite() && hi.is_finite() => Ok((lo, hi)),
            _ => Err(Error::BadParameter(format!(
                "c1 = {c1} is outside a bounded part of the image"
            ))),
        }
    }

    /// Relative height of the spine within the column at `c1`.
    fn spine_fraction(&self, c1: f64) -> f64 {
        let level = |e: i8| if e > 0 { 0.25 } else { 0.75 };
        if self.marked.is_empty() {
            return 0.5;
        }
        let k = self.marked.partition_point(|m| m[0] < c1);
        if k == 0 {
            return level(self.cut_signs[0]);
        }
        if k == self.marked.len() {
            return level(self.cut_signs[k - 1]);
        }
        let (m0, m1) = (self.marked[k - 1][0], self.marked[k][0]);
        let s = (c1 - m0) / (m1 - m0);
        level(self.cut_signs[k - 1]) * (1.0 - s) + level(self.cut_signs[k]) * s
    }

    pub fn spine(&self, c1: f64) -> Result<f64> {
        let (lo, hi) = self.profile(c1)?;
        Ok(lo + self.spine_fraction(c1) * (hi - lo))
    }

    /// Checks that the spine passes on the correct side of every marked value.
    pub fn check_spine(&self) -> Result<()> {
        for (m, &e) in self.marked.iter().zip(&self.cut_signs) {
            let s = self.spine(m[0])?;
            if (s - m[1]) * f64::from(e) >= 0.0 {
                return Err(Error::PathThroughSingularValue { near: *m });
            }
        }
        Ok(())
    }

    fn periods_at(&self, c: Value) -> Result<(f64, f64)> {
        for m in &self.marked {
            if (c[0] - m[0]).hypot(c[1] - m[1]) < 1e-9 {
                return Err(Error::PathThroughSingularValue { near: *m });
            }
        }
        let a = fiber_point(self.model, c)?;
        let p = period_lattice_from(self.model, &a, &ValueMap::identity(), &self.periods)?;
        Ok((p.tau1, p.tau2))
    }

    /// `int (tau1 dc1 + tau2 dc2) / 2pi` along a polyline with a continuous
    /// `tau1` lift. `lift` seeds the branch and returns the final lift.
    pub fn integrate_polyline(&self, path: &[Value], lift: Option<f64>) -> Result<(f64, f64)> {
        let mut total = 0.0;
        let mut lift = lift;
        for w in path.windows(2) {
            let (v, l) = self.integrate_segment(w[0], w[1], lift, 0)?;
            total += v;
            lift = Some(l);
        }
        Ok((total, lift.unwrap_or(0.0)))
    }

    fn integrate_segment(
        &self,
        a: Value,
        b: Value,
        lift: Option<f64>,
        depth: u32,
    ) -> Result<(f64, f64)> {
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = d[0].hypot(d[1]);
        if len == 0.0 {
            return Ok((0.0, lift.unwrap_or(0.0)));
        }
        for m in &self.marked {
            let s = (((m[0] - a[0]) * d[0] + (m[1] - a[1]) * d[1]) / (len * len)).clamp(0.0, 1.0);
            if (a[0] + s * d[0] - m[0]).hypot(a[1] + s * d[1] - m[1]) < 1e-9 {
                return Err(Error::PathThroughSingularValue { near: *m });
            }
        }
        let nodes: Vec<Value> = GL8
            .iter()
            .map(|(x, _)| {
                let s = 0.5 * (x + 1.0);
                [a[0] + s * d[0], a[1] + s * d[1]]
            })
            .collect();
        let taus: Vec<(f64, f64)> = nodes
            .par_iter()
            .map(|&c| self.periods_at(c))
            .collect::<Result<_>>()?;
        let mut prev = lift;
        let mut lifted = Vec::with_capacity(8);
        for &(t1, _) in &taus {
            let v = match prev {
                None => t1 - 2.0 * PI * (t1 / (2.0 * PI)).round(),
                Some(p) => t1 + 2.0 * PI * ((p - t1) / (2.0 * PI)).round(),
            };
            if let Some(p) = prev {
                if (v - p).abs() > PI / 4.0 {
                    if depth >= 6 {
                        return Err(Error::BranchAmbiguity { jump: v - p });
                    }
                    let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                    let (v1, l1) = self.integrate_segment(a, mid, lift, depth + 1)?;
                    let (v2, l2) = self.integrate_segment(mid, b, Some(l1), depth + 1)?;
                    return Ok((v1 + v2, l2));
                }
            }
            lifted.push(v);
            prev = Some(v);
        }
        let mut sum = 0.0;
        for (k, (_, wgt)) in GL8.iter().enumerate() {
            sum += wgt * (lifted[k] * d[0] + taus[k].1 * d[1]);
        }
        Ok((0.5 * sum / (2.0 * PI), prev.unwrap()))
    }

    /// `int tau2 / 2pi dc2` on the vertical segment from `(c1, y0)` to `(c1, y1)`,
    /// graded towards an endpoint that is a marked value.
    fn vertical(&self, c1: f64, y0: f64, y1: f64) -> Result<f64> {
        let singular_end = self
            .marked
            .iter()
            .any(|m| (m[0] - c1).abs() < 1e-12 && (m[1] - y1).abs() < 1e-12);
        if !singular_end {
            let n = 4;
            let mut pts = Vec::with_capacity(n + 1);
            for k in 0..=n {
                pts.push([c1, y0 + (y1 - y0) * k as f64 / n as f64]);
            }
            return Ok(self.integrate_polyline(&pts, None)?.0);
        }
        // Geometric grading: the period blows up logarithmically at the end.
        let mut pts = vec![[c1, y0]];
        let mut s = 0.5;
        for _ in 0..14 {
            pts.push([c1, y1 - s * (y1 - y0)]);
            s *= 0.5;
        }
        let (body, _) = self.integrate_polyline(&pts, None)?;
        let last = pts[pts.len() - 1][1];
        let (_, tau2) = self.periods_at([c1, last])?;
        // Remaining tail of length h: tau2 ~ -log|y| grows mildly, so h * tau2 bounds it.
        Ok(body + (y1 - last) * tau2 / (2.0 * PI))
    }

    /// Second action at `c` relative to `anchor`, along vertical legs joined by the spine.
    pub fn second_action(&self, c: Value, anchor: Value) -> Result<f64> {
        self.check_spine()?;
        for (m, &e) in self.marked.iter().zip(&self.cut_signs) {
            for p in [c, anchor] {
                // A vertical leg on the cut itself would run through the marked value.
                if (p[0] - m[0]).abs() < 1e-9 && (p[1] - m[1]) * f64::from(e) > 0.0 {
                    return Err(Error::PathThroughSingularValue { near: *m });
                }
            }
        }
        let sa = self.spine(anchor[0])?;
        let sc = self.spine(c[0])?;
        let up_a = self.vertical(anchor[0], sa, anchor[1])?;
        let spine = self.spine_integral(anchor[0], c[0])?;
        let up_c = self.vertical(c[0], sc, c[1])?;
        Ok(spine + up_c - up_a)
    }

    /// Integral along the spine from `x0` to `x1`.
    pub fn spine_integral(&self, x0: f64, x1: f64) -> Result<f64> {
        let n = ((x1 - x0).abs() / (self.c1_range.1 - self.c1_range.0) * 48.0)
            .ceil()
            .max(1.0) as usize;
        let pts: Vec<Value> = (0..=n)
            .map(|k| {
                let x = x0 + (x1 - x0) * k as f64 / n as f64;
                Ok([x, self.spine(x)?])
            })
            .collect::<Result<_>>()?;
        Ok(self.integrate_polyline(&pts, None)?.0)
    }
}

/// Second action `I2(c) - I2(anchor)` under the given cut convention.
pub fn second_action(
    model: &ModelSystem,
    c: Value,
    anchor: Value,
    cut_signs: Option<&[i8]>,
) -> Result<f64> {
    let window = Some((c[0].min(anchor[0]), c[0].max(anchor[0])));
    let (a, b) = model.f1_range();
    let chart = ActionChart::new(
        model,
        cut_signs,
        if a.is_finite() && b.is_finite() {
            None
        } else {
            window
        },
    )?;
    chart.second_action(c, anchor)
}

/// Best rational `p/q` with `q <= max_q` approximating `x`, and its error.
pub fn snap_rational(x: f64, max_q: i64) -> (i64, i64, f64) {
    let mut best = (x.round() as i64, 1, (x - x.round()).abs());
    for q in 2..=max_q {
        let p = (x * q as f64).round();
        let err = (x - p / q as f64).abs();
        if err < best.2 - 1e-12 {
            best = (p as i64, q, err);
        }
    }
    best
}

#[derive(Clone, Copy, Debug)]
struct Edge {
    slope: f64,
    point: Value,
}

fn fit_chain(xs: &[f64], ys: &[f64], opts: &PolygonOptions) -> Result<Vec<Edge>> {
    let slopes: Vec<f64> = (1..xs.len())
        .map(|k| (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1]))
        .collect();
    // Runs of consecutive intervals with a common slope.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=slopes.len() {
        if k == slopes.len() || (slopes[k] - slopes[start]).abs() > opts.slope_tol {
            runs.push((start, k));
            start = k;
        }
    }
    let mut edges: Vec<Edge> = Vec::new();
    for (s, e) in runs {
        if e - s < 2 {
            continue;
        }
        let n = (e - s) as f64;
        let mean = slopes[s..e].iter().sum::<f64>() / n;
        let (p, q, err) = snap_rational(mean, opts.max_denominator);
        if err > opts.slope_tol {
            return Err(Error::NonRationalEdge { dx: 1.0, dy: mean });
        }
        let slope = p as f64 / q as f64;
        let idx = s..=e;
        let m = idx.clone().count() as f64;
        let point = [
            idx.clone().map(|i| xs[i]).sum::<f64>() / m,
            idx.map(|i| ys[i]).sum::<f64>() / m,
        ];
        match edges.last_mut() {
            Some(last) if (last.slope - slope).abs() < 1e-12 => {
                last.point = [
                    0.5 * (last.point[0] + point[0]),
                    0.5 * (last.point[1] + point[1]),
                ];
            }
            _ => edges.push(Edge { slope, point }),
        }
    }
    if edges.is_empty() {
        return Err(Error::NonRationalEdge { dx: 0.0, dy: 0.0 });
    }
    Ok(edges)
}

fn chain_vertices(edges: &[Edge], x0: f64, x1: f64) -> Vec<Value> {
    let at = |e: &Edge, x: f64| e.point[1] + e.slope * (x - e.point[0]);
    let mut out = vec![[x0, at(&edges[0], x0)]];
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let x = (b.point[1] - a.point[1] + a.slope * a.point[0] - b.slope * b.point[0])
            / (a.slope - b.slope);
        out.push([x, at(&a, x)]);
    }
    let last = edges[edges.len() - 1];
    out.push([x1, at(&last, x1)]);
    out
}

fn dedup_ring(mut v: Vec<Value>) -> Vec<Value> {
    let mut out: Vec<Value> = Vec::with_capacity(v.len());
    for p in v.drain(..) {
        if out
            .last()
            .is_none_or(|q: &Value| (q[0] - p[0]).hypot(q[1] - p[1]) > 1e-6)
        {
            out.push(p);
        }
    }
    while out.len() > 1
        && (out[0][0] - out[out.len() - 1][0]).hypot(out[0][1] - out[out.len() - 1][1]) <= 1e-6
    {
        out.pop();
    }
    remove_collinear(out)
}

fn remove_collinear(v: Vec<Value>) -> Vec<Value> {
    if v.len() < 3 {
        return v;
    }
    let n = v.len();
    let keep: Vec<Value> = (0..n)
        .filter(|&i| {
            let (a, b, c) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            let scale = (b[0] - a[0]).hypot(b[1] - a[1]) * (c[0] - b[0]).hypot(c[1] - b[1]);
            cross.abs() > 1e-6 * scale.max(1e-300)
        })
        .map(|i| v[i])
        .collect();
    keep
}

/// Marked polygon of `model` with the given cut signs (default all `+1`).
pub fn build_polygon(
    model: &ModelSystem,
    cut_signs: Option<&[i8]>,
    opts: &PolygonOptions,
) -> Result<MarkedPolygon> {
    if model.dof() == 1 {
        // The image of a single periodic Hamiltonian is already its polygon.
        let (a, b) = model.f1_range();
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Unsupported(format!(
                "{} has an unbounded image",
                model.id()
            )));
        }
        return Ok(MarkedPolygon::toric(vec![[a, 0.0], [b, 0.0]]));
    }
    let (fa, fb) = model.f1_range();
    let window = if fa.is_finite() && fb.is_finite() {
        opts.c1_window
    } else {
        Some(opts.c1_window.unwrap_or((fa.max(-1e3), fa.max(-1e3) + 4.0)))
    };
    let mut chart = ActionChart::new(model, cut_signs, window)?;
    chart.periods = opts.periods;
    chart.check_spine()?;
    let (x0, x1) = chart.c1_range;
    let n = opts.resolution.max(8);
    let dx = (x1 - x0) / n as f64;
    let cols: Vec<f64> = (0..n)
        .map(|k| x0 + dx * (k as f64 + 0.5))
        .filter(|x| chart.marked.iter().all(|m| (x - m[0]).abs() > 0.25 * dx))
        .collect();
    // Spine values at each column, accumulated left to right.
    let mut spine_pts: Vec<Value> = Vec::with_capacity(cols.len());
    for &x in &cols {
        spine_pts.push([x, chart.spine(x)?]);
    }
    let mut spine_i2 = vec![0.0; cols.len()];
    let mut lift = None;
    for k in 1..cols.len() {
        let mid = 0.5 * (cols[k - 1] + cols[k]);
        let path = [spine_pts[k - 1], [mid, chart.spine(mid)?], spine_pts[k]];
        let (v, l) = chart.integrate_polyline(&path, lift)?;
        spine_i2[k] = spine_i2[k - 1] + v;
        lift = Some(l);
    }
    let legs: Vec<(f64, f64)> = cols
        .par_iter()
        .zip(spine_pts.par_iter())
        .map(|(&x, s)| {
            let (lo, hi) = chart.profile(x)?;
            Ok((chart.vertical(x, s[1], lo)?, chart.vertical(x, s[1], hi)?))
        })
        .collect::<Result<_>>()?;
    let lower: Vec<f64> = legs.iter().zip(&spine_i2).map(|(l, s)| s + l.0).collect();
    let upper: Vec<f64> = legs.iter().zip(&spine_i2).map(|(l, s)| s + l.1).collect();
    let lower_edges = fit_chain(&cols, &lower, opts)?;
    let upper_edges = fit_chain(&cols, &upper, opts)?;
    let mut lo_chain = chain_vertices(&lower_edges, x0, x1);
    let mut hi_chain = chain_vertices(&upper_edges, x0, x1);
    // Anchor at the image minimum: the lowest point over the left end keeps its height.
    let (lo0, _) = chart.profile(x0)?;
    let shift = lo0 - lo_chain[0][1];
    for p in lo_chain.iter_mut().chain(hi_chain.iter_mut()) {
        p[1] += shift;
    }
    let mut marked_points = Vec::new();
    for m in &chart.marked {
        // Interpolate the spine action to the marked abscissa, then rise to the value.
        let k = cols.partition_point(|&x| x < m[0]).clamp(1, cols.len() - 1);
        let base = spine_i2[k - 1] + chart.spine_integral(cols[k - 1], m[0])?;
        let s = chart.spine(m[0])?;
        marked_points.push([m[0], base + chart.vertical(m[0], s, m[1])? + shift]);
    }
    hi_chain.reverse();
    let mut ring = lo_chain;
    ring.extend(hi_chain);
    let vertices = dedup_ring(ring);
    if vertices.len() < 3 {
        return Err(Error::NonRationalEdge { dx: 0.0, dy: 0.0 });
    }
    Ok(MarkedPolygon {
        vertices,
        marked_points,
        cut_signs: chart.cut_signs.clone(),
        twisting_labels: None,
        truncated: window.is_some() && (fa.is_infinite() || fb.is_infinite()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelzantCertificate {
    pub pass: bool,
    /// Indices of vertices where the primitive edge vectors do not form a lattice basis.
    pub violations: Vec<usize>,
    /// Primitive integer edge directions, `edges[i]` from vertex `i` to `i + 1`.
    pub edges: Vec<[i64; 2]>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Primitive integer direction of `d`, within `tol` in angle.
pub fn primitive_direction(d: Value, max_q: i64, tol: f64) -> Result<[i64; 2]> {
    let len = d[0].hypot(d[1]);
    if len == 0.0 {
        return Err(Error::NonRationalEdge { dx: d[0], dy: d[1] });
    }
    let (big, small, swap) = if d[0].abs() >= d[1].abs() {
        (d[0], d[1], false)
    } else {
        (d[1], d[0], true)
    };
    let (p, q, _) = snap_rational(small / big, max_q);
    let g = gcd(p, q).max(1);
    let (p, q) = (p / g, q / g);
    let sign = if big < 0.0 { -1 } else { 1 };
    let v = if swap {
        [sign * p, sign * q]
    } else {
        [sign * q, sign * p]
    };
    let (vx, vy) = (v[0] as f64, v[1] as f64);
    let angle = ((vx * d[1] - vy * d[0]) / (vx.hypot(vy) * len)).abs();
    if angle > tol {
        return Err(Error::NonRationalEdge { dx: d[0], dy: d[1] });
    }
    Ok(v)
}

/// Rational-smooth vertex check on a polygon.
pub fn delzant_check(poly: &MarkedPolygon) -> Result<DelzantCertificate> {
    let v = &poly.vertices;
    if v.len() == 2 {
        let d = [v[1][0] - v[0][0], v[1][1] - v[0][1]];
        let e = primitive_direction(d, 64, 1e-4)?;
        return Ok(DelzantCertificate {
            pass: true,
            violations: Vec::new(),
            edges: vec![e, [-e[0], -e[1]]],
        });
    }
    if v.len() < 3 {
        return Err(Error::BadParameter(
            "polygon needs at least 3 vertices".into(),
        ));
    }
    let n = v.len();
    let edges: Vec<[i64; 2]> = (0..n)
        .map(|i| {
            let (a, b) = (v[i], v[(i + 1) % n]);
            primitive_direction([b[0] - a[0], b[1] - a[1]], 64, 1e-4)
        })
        .collect::<Result<_>>()?;
    let violations: Vec<usize> = (0..n)
        .filter(|&i| {
            let out = edges[i];
            let inc = edges[(i + n - 1) % n];
            let back = [-inc[0], -inc[1]];
            (out[0] * back[1] - out[1] * back[0]).abs() != 1
        })
        .collect();
    Ok(DelzantCertificate {
        pass: violations.is_empty(),
        violations,
        edges,
    })
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn vertex_hausdorff(a: &[Value], b: &[Value]) -> f64 {
    let one = |x: &[Value], y: &[Value]| {
        x.iter()
            .map(|p| {
                y.iter()
                    .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    one(a, b).max(one(b, a))
}

/// Hausdorff distance from the polygon boundary to a sampled boundary point set.
pub fn boundary_hausdorff(poly: &MarkedPolygon, samples: &[Value]) -> f64 {
    let v = &poly.vertices;
    let n = v.len();
    let seg = |p: Value, a: Value, b: Value| {
        let d = [b[0] - a[0], b[1] - a[1]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        let s = if l2 == 0.0 {
            0.0
        } else {
            (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
        };
        (p[0] - a[0] - s * d[0]).hypot(p[1] - a[1] - s * d[1])
    };
    let edges: Vec<(Value, Value)> = if n == 2 {
        vec![(v[0], v[1])]
    } else {
        (0..n).map(|i| (v[i], v[(i + 1) % n])).collect()
    };
    let to_poly = samples
        .iter()
        .map(|&p| {
            edges
                .iter()
                .map(|&(a, b)| seg(p, a, b))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let mut dense = Vec::new();
    for &(a, b) in &edges {
        for k in 0..=64 {
            let s = k as f64 / 64.0;
            dense.push([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]);
        }
    }
    let from_poly = dense
        .iter()
        .map(|p| {
            samples
                .iter()
                .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    to_poly.max(from_poly)
}

fn apply_affine(m: [[i64; 2]; 2], p: Value) -> Value {
    [
        m[0][0] as f64 * p[0] + m[0][1] as f64 * p[1],
        m[1][0] as f64 * p[0] + m[1][1] as f64 * p[1],
    ]
}

/// Applies `(x, y) -> (x, y + k (x - x0))` to the part of the polygon with `x >= x0`.
pub fn cut_shear(poly: &MarkedPolygon, x0: f64, k: i64) -> MarkedPolygon {
    let v = &poly.vertices;
    let n = v.len();
    let mut ring = Vec::with_capacity(n + 2);
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        ring.push(a);
        if (a[0] - x0) * (b[0] - x0) < 0.0 {
            let s = (x0 - a[0]) / (b[0] - a[0]);
            ring.push([x0, a[1] + s * (b[1] - a[1])]);
        }
    }
    let map = |p: Value| {
        if p[0] > x0 {
            [p[0], p[1] + k as f64 * (p[0] - x0)]
        } else {
            p
        }
    };
    let vertices = dedup_ring(ring.into_iter().map(map).collect());
    MarkedPolygon {
        vertices,
        marked_points: poly.marked_points.iter().copied().map(map).collect(),
        cut_signs: poly.cut_signs.clone(),
        twisting_labels: poly.twisting_labels.clone(),
        truncated: poly.truncated,
    }
}

fn centroid(v: &[Value]) -> Value {
    let n = v.len().max(1) as f64;
    [
        v.iter().map(|p| p[0]).sum::<f64>() / n,
        v.iter().map(|p| p[1]).sum::<f64>() / n,
    ]
}

fn same_up_to_translation(p: &MarkedPolygon, q: &MarkedPolygon, m: [[i64; 2]; 2]) -> bool {
    let pv: Vec<Value> = p.vertices.iter().map(|&x| apply_affine(m, x)).collect();
    let pm: Vec<Value> = p
        .marked_points
        .iter()
        .map(|&x| apply_affine(m, x))
        .collect();
    if pv.len() != q.vertices.len() {
        return false;
    }
    let (cp, cq) = (centroid(&pv), centroid(&q.vertices));
    let t = [cq[0] - cp[0], cq[1] - cp[1]];
    let shift = |v: Vec<Value>| {
        v.into_iter()
            .map(|x| [x[0] + t[0], x[1] + t[1]])
            .collect::<Vec<_>>()
    };
    vertex_hausdorff(&shift(pv), &q.vertices) < 1e-4
        && vertex_hausdorff(&shift(pm), &q.marked_points) < 1e-4
}

/// Equivalence of marked polygons under translations, vertical shears, cut
/// flips at marked points and, for polygons without marked points, a bounded
/// set of `GL(2, Z)` matrices.
pub fn polygon_equivalence(p: &MarkedPolygon, q: &MarkedPolygon) -> bool {
    if p.marked_points.len() != q.marked_points.len() {
        return false;
    }
    let mut mats: Vec<[[i64; 2]; 2]> = (-4..=4).map(|k| [[1, 0], [k, 1]]).collect();
    if p.marked_points.is_empty() {
        for a in -2i64..=2 {
            for b in -2..=2 {
                for c in -2..=2 {
                    for d in -2..=2 {
                        if (a * d - b * c).abs() == 1 {
                            mats.push([[a, b], [c, d]]);
                        }
                    }
                }
            }
        }
    }
    let n = p.marked_points.len();
    // Every combination of cut flips (k = 0 keeps the cut, +-1 flips it).
    let mut variants = vec![p.clone()];
    for i in 0..n {
        let x0 = p.marked_points[i][0];
        let mut next = Vec::new();
        for v in &variants {
            for k in [-1, 0, 1] {
                next.push(if k == 0 {
                    v.clone()
                } else {
                    cut_shear(v, x0, k)
                });
            }
        }
        variants = next;
    }
    variants
        .iter()
        .any(|v| mats.iter().any(|&m| same_up_to_translation(v, q, m)))
}
