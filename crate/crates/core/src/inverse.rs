//! Recovering classical data from joint spectra: image estimates, local
//! Bohr–Sommerfeld lattice fits and monodromy transport around defects.

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Value;
use crate::quantum::JointSpectrum;
use crate::systems::ModelSystem;

/// Uniform-grid spatial index over planar points.
pub struct PointIndex<'a> {
    cell: f64,
    points: &'a [[f64; 2]],
    map: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> PointIndex<'a> {
    pub fn new(points: &'a [[f64; 2]], cell: f64) -> Self {
        let mut map: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            map.entry(Self::key(cell, *p)).or_default().push(i);
        }
        Self { cell, points, map }
    }

    fn key(cell: f64, p: Value) -> (i64, i64) {
        ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64)
    }

    /// Indices of points within `radius` of `c`.
    pub fn within(&self, c: Value, radius: f64) -> Vec<usize> {
        let r = (radius / self.cell).ceil() as i64;
        let (kx, ky) = Self::key(self.cell, c);
        let mut out = Vec::new();
        for dx in -r..=r {
            for dy in -r..=r {
                if let Some(v) = self.map.get(&(kx + dx, ky + dy)) {
                    for &i in v {
                        let p = self.points[i];
                        if (p[0] - c[0]).hypot(p[1] - c[1]) <= radius {
                            out.push(i);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Distance from `c` to the nearest indexed point.
    pub fn nearest_distance(&self, c: Value) -> f64 {
        if self.points.is_empty() {
            return f64::INFINITY;
        }
        let (kx, ky) = Self::key(self.cell, c);
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    if let Some(v) = self.map.get(&(kx + dx, ky + dy)) {
                        for &i in v {
                            let p = self.points[i];
                            best = best.min((p[0] - c[0]).hypot(p[1] - c[1]));
                        }
                    }
                }
            }
            // Every unvisited cell is at least `ring * cell` away.
            if best <= ring as f64 * self.cell || ring > 1_000_000 {
                return best;
            }
            ring += 1;
        }
    }
}

fn segment_distance(p: Value, a: Value, b: Value) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let s = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    };
    (p[0] - a[0] - s * d[0]).hypot(p[1] - a[1] - s * d[1])
}

/// A classical momentum image used as the reference set in distance tests.
pub enum ClassicalImage {
    /// A straight segment, e.g. the diagonal image of a height function embedded as a pair.
    Segment([Value; 2]),
    /// The region `lo(c1) <= c2 <= hi(c1)` of a two-degree-of-freedom model over `c1_range`.
    Profile {
        c1_range: (f64, f64),
        columns: Vec<(f64, f64, f64)>,
        boundary: Vec<Value>,
    },
}

impl ClassicalImage {
    /// Image of the spin height model, `{(z, z) : |z| <= 1}`.
    pub fn diagonal() -> Self {
        ClassicalImage::Segment([[-1.0, -1.0], [1.0, 1.0]])
    }

    /// Image of a model over `c1_range` (clipped to the attained range),
    /// tabulated on `columns` values of `c1`.
    pub fn from_model(
        model: &ModelSystem,
        c1_range: Option<(f64, f64)>,
        columns: usize,
    ) -> Result<Self> {
        let (a, b) = model.f1_range();
        let (lo, hi) = c1_range.unwrap_or((a, b));
        let (lo, hi) = (lo.max(a), hi.min(b));
        if !(lo.is_finite() && hi.is_finite() && hi > lo) || model.dof() != 2 {
            return Err(Error::BadParameter(
                "image needs a finite c1 range on a two-dof model".into(),
            ));
        }
        let n = columns.max(2);
        let cols: Vec<(f64, f64, f64)> = (0..n)
            .into_par_iter()
            .filter_map(|k| {
                let c1 = lo + (hi - lo) * k as f64 / (n - 1) as f64;
                model.image_profile(c1).map(|(l, h)| (c1, l, h))
            })
            .collect();
        let mut boundary: Vec<Value> = cols.iter().map(|&(c, _, h)| [c, h]).collect();
        boundary.extend(cols.iter().rev().map(|&(c, l, _)| [c, l]));
        if let Some(&first) = boundary.first() {
            boundary.push(first);
        }
        Ok(ClassicalImage::Profile {
            c1_range: (lo, hi),
            columns: cols,
            boundary,
        })
    }

    fn profile_at(columns: &[(f64, f64, f64)], c1: f64) -> Option<(f64, f64)> {
        let k = columns.partition_point(|c| c.0 < c1);
        if k == 0 {
            return (columns[0].0 == c1).then_some((columns[0].1, columns[0].2));
        }
        if k >= columns.len() {
            return None;
        }
        let (a, b) = (columns[k - 1], columns[k]);
        let s = (c1 - a.0) / (b.0 - a.0);
        Some((a.1 + s * (b.1 - a.1), a.2 + s * (b.2 - a.2)))
    }

    /// Distance from `p` to the image (zero inside).
    pub fn distance(&self, p: Value) -> f64 {
        match self {
            ClassicalImage::Segment([a, b]) => segment_distance(p, *a, *b),
            ClassicalImage::Profile {
                columns, boundary, ..
            } => {
                if let Some((lo, hi)) = Self::profile_at(columns, p[0]) {
                    if p[1] >= lo && p[1] <= hi {
                        return 0.0;
                    }
                }
                boundary
                    .windows(2)
                    .map(|w| segment_distance(p, w[0], w[1]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Grid samples of the image with spacing at most `step`.
    pub fn samples(&self, step: f64) -> Vec<Value> {
        match self {
            ClassicalImage::Segment([a, b]) => {
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                let n = (len / step).ceil().max(1.0) as usize;
                (0..=n)
                    .map(|k| {
                        let s = k as f64 / n as f64;
                        [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
                    })
                    .collect()
            }
            ClassicalImage::Profile {
                c1_range, columns, ..
            } => {
                let n = ((c1_range.1 - c1_range.0) / step).ceil().max(1.0) as usize;
                let mut out = Vec::new();
                for k in 0..=n {
                    let c1 = c1_range.0 + (c1_range.1 - c1_range.0) * k as f64 / n as f64;
                    let Some((lo, hi)) = Self::profile_at(columns, c1) else {
                        continue;
                    };
                    let m = ((hi - lo) / step).ceil().max(1.0) as usize;
                    for i in 0..=m {
                        out.push([c1, lo + (hi - lo) * i as f64 / m as f64]);
                    }
                }
                out
            }
        }
    }
}

/// Hausdorff distance between a finite point set and a classical image,
/// with the image sampled at spacing `step`.
pub fn hausdorff_to_image(points: &[[f64; 2]], image: &ClassicalImage, step: f64) -> f64 {
    if points.is_empty() {
        return f64::INFINITY;
    }
    let outward = points
        .par_iter()
        .map(|&p| image.distance(p))
        .reduce(|| 0.0, f64::max);
    let index = PointIndex::new(points, (4.0 * step).max(1e-9));
    let inward = image
        .samples(step)
        .par_iter()
        .map(|&c| index.nearest_distance(c))
        .reduce(|| 0.0, f64::max);
    outward.max(inward)
}

/// Occupancy-grid estimate of the image of `F` from spectrum points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRegion {
    pub cell: f64,
    pub cells: BTreeSet<(i64, i64)>,
    /// Boundary loops traced along cell edges.
    pub boundary: Vec<Vec<Value>>,
}

impl ImageRegion {
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn key(&self, p: Value) -> (i64, i64) {
        (
            (p[0] / self.cell).floor() as i64,
            (p[1] / self.cell).floor() as i64,
        )
    }

    pub fn contains(&self, p: Value) -> bool {
        self.cells.contains(&self.key(p))
    }

    /// True when the whole disk lies in occupied cells (checked on a ring and its centre).
    pub fn contains_disk(&self, c: Value, r: f64) -> bool {
        let n = ((2.0 * PI * r / self.cell).ceil() as usize).max(16);
        self.contains(c)
            && (0..n).all(|k| {
                let a = 2.0 * PI * k as f64 / n as f64;
                self.contains([c[0] + r * a.cos(), c[1] + r * a.sin()])
            })
    }

    pub fn centers(&self) -> Vec<Value> {
        self.cells
            .iter()
            .map(|&(i, j)| [(i as f64 + 0.5) * self.cell, (j as f64 + 0.5) * self.cell])
            .collect()
    }

    /// Bounding box `[x_min, x_max, y_min, y_max]` of the occupied cells.
    pub fn bbox(&self) -> Option<[f64; 4]> {
        let xs = self.cells.iter().map(|c| c.0);
        let ys = self.cells.iter().map(|c| c.1);
        let (x0, x1) = (xs.clone().min()?, xs.max()?);
        let (y0, y1) = (ys.clone().min()?, ys.max()?);
        Some([
            x0 as f64 * self.cell,
            (x1 + 1) as f64 * self.cell,
            y0 as f64 * self.cell,
            (y1 + 1) as f64 * self.cell,
        ])
    }

    /// Hausdorff distance between the occupied cell centres and `image`.
    pub fn hausdorff(&self, image: &ClassicalImage) -> f64 {
        hausdorff_to_image(&self.centers(), image, self.cell / 4.0)
    }
}

fn neighbours8(c: (i64, i64)) -> impl Iterator<Item = (i64, i64)> {
    (-1..=1).flat_map(move |dx| (-1..=1).map(move |dy| (c.0 + dx, c.1 + dy)))
}

/// Occupancy closure (dilate then erode by one cell) of the spectrum points.
pub fn estimate_image(spec: &JointSpectrum, cell: f64) -> Result<ImageRegion> {
    if !(cell > 0.0) {
        return Err(Error::BadParameter(format!(
            "cell must be positive (got {cell})"
        )));
    }
    let raw: BTreeSet<(i64, i64)> = spec
        .points
        .iter()
        .map(|p| ((p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64))
        .collect();
    let dilated: BTreeSet<(i64, i64)> = raw.iter().flat_map(|&c| neighbours8(c)).collect();
    let cells: BTreeSet<(i64, i64)> = dilated
        .iter()
        .copied()
        .filter(|&c| neighbours8(c).all(|n| dilated.contains(&n)))
        .chain(raw.iter().copied())
        .collect();
    let boundary = trace_boundary(&cells, cell);
    Ok(ImageRegion {
        cell,
        cells,
        boundary,
    })
}

fn trace_boundary(cells: &BTreeSet<(i64, i64)>, cell: f64) -> Vec<Vec<Value>> {
    // Directed edges with the region on the left.
    let mut next: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
    for &(i, j) in cells {
        let sides = [
            ((i, j - 1), (i, j), (i + 1, j)),
            ((i + 1, j), (i + 1, j), (i + 1, j + 1)),
            ((i, j + 1), (i + 1, j + 1), (i, j + 1)),
            ((i - 1, j), (i, j + 1), (i, j)),
        ];
        for (nb, a, b) in sides {
            if !cells.contains(&nb) {
                next.entry(a).or_default().push(b);
            }
        }
    }
    let mut loops = Vec::new();
    let mut starts: Vec<(i64, i64)> = next.keys().copied().collect();
    starts.sort_unstable();
    for s in starts {
        while next.get(&s).is_some_and(|v| !v.is_empty()) {
            let mut lp = vec![s];
            let mut cur = s;
            while let Some(b) = next.get_mut(&cur).and_then(|v| v.pop()) {
                cur = b;
                lp.push(cur);
                if cur == s {
                    break;
                }
            }
            loops.push(
                lp.iter()
                    .map(|&(x, y)| [x as f64 * cell, y as f64 * cell])
                    .collect(),
            );
        }
    }
    loops
}

/// Affine lattice fitted to the spectrum in a disk window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeFit {
    pub center: Value,
    pub radius: f64,
    pub hbar: f64,
    /// Linear part `g0` with `points ~ offset + g0 (2 pi hbar k)`; columns are basis directions.
    pub g0: [[f64; 2]; 2],
    pub offset: Value,
    /// Reduced lattice basis `b1, b2` (columns of `2 pi hbar g0`).
    pub basis: [Value; 2],
    pub points: usize,
    /// Largest distance from a window point to its matched lattice site.
    pub residual: f64,
    /// Largest quadratic term of a second-order refit over the window.
    pub correction: f64,
}

/// One-dimensional ladder fitted to collinear spectrum points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderFit {
    pub direction: Value,
    pub spacing: f64,
    pub offset: Value,
    pub points: usize,
    pub residual: f64,
}

fn canonical(d: Value) -> Value {
    if d[0] > 0.0 || (d[0] == 0.0 && d[1] > 0.0) {
        d
    } else {
        [-d[0], -d[1]]
    }
}

fn norm2(v: Value) -> f64 {
    v[0].hypot(v[1])
}

/// Averages all differences within 25% of `seed` (up to sign).
fn cluster_mean(diffs: &[Value], seed: Value) -> Value {
    let tol = 0.25 * norm2(seed);
    let mut sum = [0.0, 0.0];
    let mut n = 0.0;
    for &d in diffs {
        for s in [1.0, -1.0] {
            let e = [s * d[0], s * d[1]];
            if (e[0] - seed[0]).hypot(e[1] - seed[1]) < tol {
                sum[0] += e[0];
                sum[1] += e[1];
                n += 1.0;
            }
        }
    }
    [sum[0] / n, sum[1] / n]
}

fn difference_vectors(pts: &[Value]) -> Vec<Value> {
    let mut diffs = Vec::new();
    for i in 0..pts.len() {
        let mut near: Vec<(f64, Value)> = pts
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| {
                let d = [q[0] - pts[i][0], q[1] - pts[i][1]];
                (norm2(d), d)
            })
            .collect();
        near.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        diffs.extend(
            near.iter()
                .take(8)
                .filter(|(n, _)| *n > 1e-12)
                .map(|(_, d)| canonical(*d)),
        );
    }
    diffs.sort_by(|a, b| norm2(*a).partial_cmp(&norm2(*b)).unwrap());
    diffs
}

fn gauss_reduce(mut b1: Value, mut b2: Value) -> (Value, Value) {
    for _ in 0..64 {
        if norm2(b2) < norm2(b1) {
            std::mem::swap(&mut b1, &mut b2);
        }
        let mu = ((b1[0] * b2[0] + b1[1] * b2[1]) / (b1[0] * b1[0] + b1[1] * b1[1])).round();
        if mu == 0.0 {
            break;
        }
        b2 = [b2[0] - mu * b1[0], b2[1] - mu * b1[1]];
    }
    if norm2(b2) < norm2(b1) {
        std::mem::swap(&mut b1, &mut b2);
    }
    (b1, b2)
}

/// Least squares `p ~ o + B k (+ quadratic)`: returns per-coordinate coefficients.
fn lsq(ks: &[[f64; 2]], pts: &[Value], quadratic: bool) -> Option<[Vec<f64>; 2]> {
    let cols = if quadratic { 6 } else { 3 };
    let a = DMatrix::from_fn(ks.len(), cols, |i, j| {
        let [k1, k2] = ks[i];
        [1.0, k1, k2, k1 * k1, k1 * k2, k2 * k2][j]
    });
    let svd = a.svd(true, true);
    let mut out: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (c, slot) in out.iter_mut().enumerate() {
        let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p[c]));
        let x = svd.solve(&b, 1e-12).ok()?;
        *slot = x.iter().copied().collect();
    }
    Some(out)
}

/// Integer labels propagated outward from `start` along short steps, so slow
/// drift of the local lattice across the window does not accumulate.
fn label_sites(pts: &[Value], basis: &Matrix2<f64>, start: usize) -> Result<Vec<[f64; 2]>> {
    let inv = basis
        .try_inverse()
        .ok_or_else(|| Error::NotALattice("singular basis".into()))?;
    let reach = 1.25 * basis.column(0).norm().max(basis.column(1).norm());
    let index = PointIndex::new(pts, reach);
    let mut labels: Vec<Option<[i64; 2]>> = vec![None; pts.len()];
    labels[start] = Some([0, 0]);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let li = labels[i].unwrap();
        for j in index.within(pts[i], reach) {
            if j == i {
                continue;
            }
            let k = inv * Vector2::new(pts[j][0] - pts[i][0], pts[j][1] - pts[i][1]);
            let off = (k[0] - k[0].round()).abs().max((k[1] - k[1].round()).abs());
            if off > 0.35 {
                continue;
            }
            let lj = [li[0] + k[0].round() as i64, li[1] + k[1].round() as i64];
            match labels[j] {
                None => {
                    labels[j] = Some(lj);
                    queue.push_back(j);
                }
                Some(prev) if prev != lj => {
                    return Err(Error::NotALattice("inconsistent lattice labels".into()));
                }
                _ => {}
            }
        }
    }
    let labels: Vec<[i64; 2]> = labels
        .into_iter()
        .map(|l| l.ok_or_else(|| Error::NotALattice("window points are not connected".into())))
        .collect::<Result<_>>()?;
    let mut seen = labels.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != labels.len() {
        return Err(Error::NotALattice("two points share a lattice site".into()));
    }
    Ok(labels.iter().map(|l| [l[0] as f64, l[1] as f64]).collect())
}

/// Fits an affine image of `2 pi hbar Z^2` to the spectrum points in a disk window.
pub fn fit_lattice(
    spec: &JointSpectrum,
    center: Value,
    radius: f64,
    hbar: f64,
) -> Result<LatticeFit> {
    let index = PointIndex::new(&spec.points, radius.max(1e-9));
    fit_lattice_indexed(spec, &index, center, radius, hbar)
}

fn fit_lattice_indexed(
    spec: &JointSpectrum,
    index: &PointIndex,
    center: Value,
    radius: f64,
    hbar: f64,
) -> Result<LatticeFit> {
    let pts: Vec<Value> = index
        .within(center, radius)
        .into_iter()
        .map(|i| spec.points[i])
        .collect();
    fit_points(&pts, center, radius, hbar)
}

/// Lattice fit on an explicit point set.
pub fn fit_points(pts: &[Value], center: Value, radius: f64, hbar: f64) -> Result<LatticeFit> {
    if pts.len() < 12 {
        return Err(Error::NotALattice(format!(
            "only {} points in window",
            pts.len()
        )));
    }
    let diffs = difference_vectors(pts);
    let Some(&seed1) = diffs.first() else {
        return Err(Error::NotALattice("no difference vectors".into()));
    };
    let b1 = cluster_mean(&diffs, seed1);
    let n1 = norm2(b1);
    let seed2 = diffs
        .iter()
        .copied()
        .find(|d| (b1[0] * d[1] - b1[1] * d[0]).abs() > 0.3 * n1 * norm2(*d));
    let Some(seed2) = seed2 else {
        return Err(Error::NotALattice(
            "difference vectors are collinear".into(),
        ));
    };
    let b2 = cluster_mean(&diffs, seed2);
    let (b1, b2) = gauss_reduce(b1, b2);
    let basis = Matrix2::new(b1[0], b2[0], b1[1], b2[1]);
    let start = (0..pts.len())
        .min_by(|&a, &b| {
            let da = (pts[a][0] - center[0]).hypot(pts[a][1] - center[1]);
            let db = (pts[b][0] - center[0]).hypot(pts[b][1] - center[1]);
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    let ks = label_sites(pts, &basis, start)?;
    let coef =
        lsq(&ks, pts, false).ok_or_else(|| Error::NotALattice("least squares failed".into()))?;
    let origin = Vector2::new(coef[0][0], coef[1][0]);
    let basis = Matrix2::new(coef[0][1], coef[0][2], coef[1][1], coef[1][2]);
    let residual = pts
        .iter()
        .zip(&ks)
        .map(|(p, k)| {
            let q = origin + basis * Vector2::new(k[0], k[1]);
            (p[0] - q[0]).hypot(p[1] - q[1])
        })
        .fold(0.0, f64::max);
    let correction = match lsq(&ks, pts, true) {
        Some(c) if ks.len() >= 12 => ks
            .iter()
            .map(|k| {
                let q = |v: &Vec<f64>| v[3] * k[0] * k[0] + v[4] * k[0] * k[1] + v[5] * k[1] * k[1];
                q(&c[0]).hypot(q(&c[1]))
            })
            .fold(0.0, f64::max),
        _ => 0.0,
    };
    let s = 2.0 * PI * hbar;
    let g0 = [
        [basis[(0, 0)] / s, basis[(0, 1)] / s],
        [basis[(1, 0)] / s, basis[(1, 1)] / s],
    ];
    let det = g0[0][0] * g0[1][1] - g0[0][1] * g0[1][0];
    if det.abs() <= 1e-6 {
        return Err(Error::NotALattice(format!(
            "degenerate lattice map (det {det:.3e})"
        )));
    }
    Ok(LatticeFit {
        center,
        radius,
        hbar,
        g0,
        offset: [origin[0], origin[1]],
        basis: [
            [basis[(0, 0)], basis[(1, 0)]],
            [basis[(0, 1)], basis[(1, 1)]],
        ],
        points: pts.len(),
        residual,
        correction,
    })
}

/// Fits an equally spaced ladder to collinear spectrum points in a window.
pub fn fit_ladder(spec: &JointSpectrum, center: Value, radius: f64) -> Result<LadderFit> {
    let index = PointIndex::new(&spec.points, radius.max(1e-9));
    let pts: Vec<Value> = index
        .within(center, radius)
        .into_iter()
        .map(|i| spec.points[i])
        .collect();
    if pts.len() < 3 {
        return Err(Error::NotALattice(format!(
            "only {} points in window",
            pts.len()
        )));
    }
    let diffs = difference_vectors(&pts);
    let b = cluster_mean(&diffs, diffs[0]);
    let len = norm2(b);
    let dir = [b[0] / len, b[1] / len];
    let p0 = pts[0];
    let ks: Vec<f64> = pts
        .iter()
        .map(|p| (((p[0] - p0[0]) * dir[0] + (p[1] - p0[1]) * dir[1]) / len).round())
        .collect();
    let n = ks.len() as f64;
    let km = ks.iter().sum::<f64>() / n;
    let pm = [
        pts.iter().map(|p| p[0]).sum::<f64>() / n,
        pts.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    let skk: f64 = ks.iter().map(|k| (k - km).powi(2)).sum();
    let step = [
        ks.iter()
            .zip(&pts)
            .map(|(k, p)| (k - km) * (p[0] - pm[0]))
            .sum::<f64>()
            / skk,
        ks.iter()
            .zip(&pts)
            .map(|(k, p)| (k - km) * (p[1] - pm[1]))
            .sum::<f64>()
            / skk,
    ];
    let offset = [pm[0] - km * step[0], pm[1] - km * step[1]];
    let residual = pts
        .iter()
        .zip(&ks)
        .map(|(p, k)| (p[0] - offset[0] - k * step[0]).hypot(p[1] - offset[1] - k * step[1]))
        .fold(0.0, f64::max);
    let spacing = norm2(step);
    Ok(LadderFit {
        direction: [step[0] / spacing, step[1] / spacing],
        spacing,
        offset,
        points: pts.len(),
        residual,
    })
}

/// Result of transporting a lattice basis around a closed chain of windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonodromyResult {
    pub windows: Vec<(Value, f64)>,
    /// Final basis expressed in the initial basis (columns).
    pub matrix: [[i64; 2]; 2],
    /// Per-step nearest-vector margins, relative to the transported vector length.
    pub margins: Vec<f64>,
    /// Distance of the closing coefficients from integers.
    pub rounding: f64,
}

impl MonodromyResult {
    pub fn is_identity(&self) -> bool {
        self.matrix == [[1, 0], [0, 1]]
    }

    pub fn trace(&self) -> i64 {
        self.matrix[0][0] + self.matrix[1][1]
    }

    pub fn det(&self) -> i64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }
}

/// `count` windows of radius `window` centred on a circle of radius `radius`.
pub fn circle_loop(center: Value, radius: f64, window: f64, count: usize) -> Vec<(Value, f64)> {
    (0..count)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / count as f64;
            (
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()],
                window,
            )
        })
        .collect()
}

fn basis_matrix(b: &[Value; 2]) -> Matrix2<f64> {
    Matrix2::new(b[0][0], b[1][0], b[0][1], b[1][1])
}

/// Re-expresses `v` as the nearest lattice vector of `basis`; returns it and the margin.
fn snap(basis: &Matrix2<f64>, inv: &Matrix2<f64>, v: Vector2<f64>) -> (Vector2<f64>, f64) {
    let k = inv * v;
    let base = Vector2::new(k[0].round(), k[1].round());
    let mut dists: Vec<(f64, Vector2<f64>)> = Vec::with_capacity(9);
    for dx in -1..=1 {
        for dy in -1..=1 {
            let kk = base + Vector2::new(dx as f64, dy as f64);
            dists.push(((basis * kk - v).norm(), kk));
        }
    }
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let margin = (dists[1].0 - dists[0].0) / v.norm();
    (basis * dists[0].1, margin)
}

/// Transports a lattice basis around `loop_windows` and back into the first window.
pub fn transport_monodromy(
    spec: &JointSpectrum,
    loop_windows: &[(Value, f64)],
    hbar: f64,
) -> Result<MonodromyResult> {
    if loop_windows.len() < 3 {
        return Err(Error::BadParameter(
            "a loop needs at least 3 windows".into(),
        ));
    }
    let cell = loop_windows
        .iter()
        .map(|w| w.1)
        .fold(f64::INFINITY, f64::min);
    let index = PointIndex::new(&spec.points, cell);
    transport_indexed(spec, &index, loop_windows, hbar)
}

fn transport_indexed(
    spec: &JointSpectrum,
    index: &PointIndex,
    loop_windows: &[(Value, f64)],
    hbar: f64,
) -> Result<MonodromyResult> {
    let fits: Vec<LatticeFit> = loop_windows
        .iter()
        .map(|&(c, r)| fit_lattice_indexed(spec, index, c, r, hbar))
        .collect::<Result<_>>()?;
    let b0 = basis_matrix(&fits[0].basis);
    let mut e = [
        Vector2::new(b0[(0, 0)], b0[(1, 0)]),
        Vector2::new(b0[(0, 1)], b0[(1, 1)]),
    ];
    let mut margins = Vec::new();
    for (step, fit) in fits
        .iter()
        .enumerate()
        .skip(1)
        .chain(std::iter::once((0, &fits[0])))
    {
        let b = basis_matrix(&fit.basis);
        let inv = b
            .try_inverse()
            .ok_or_else(|| Error::NotALattice("singular basis".into()))?;
        let mut worst = f64::INFINITY;
        for v in e.iter_mut() {
            let (snapped, margin) = snap(&b, &inv, *v);
            worst = worst.min(margin);
            *v = snapped;
        }
        margins.push(worst);
        if worst < 0.2 {
            return Err(Error::TransportAmbiguity {
                window: step,
                margin: worst,
            });
        }
    }
    let inv0 = b0
        .try_inverse()
        .ok_or_else(|| Error::NotALattice("singular basis".into()))?;
    let c = [inv0 * e[0], inv0 * e[1]];
    let rounding = c
        .iter()
        .flat_map(|v| [(v[0] - v[0].round()).abs(), (v[1] - v[1].round()).abs()])
        .fold(0.0, f64::max);
    if rounding > 0.1 {
        return Err(Error::TransportAmbiguity {
            window: 0,
            margin: 1.0 - rounding,
        });
    }
    let matrix = [
        [c[0][0].round() as i64, c[1][0].round() as i64],
        [c[0][1].round() as i64, c[1][1].round() as i64],
    ];
    let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
    if det.abs() != 1 {
        return Err(Error::TransportAmbiguity {
            window: 0,
            margin: 0.0,
        });
    }
    Ok(MonodromyResult {
        windows: loop_windows.to_vec(),
        matrix,
        margins,
        rounding,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocateOptions {
    /// Scan grid resolution per axis.
    pub grid: usize,
    /// Loop radius in units of the typical lattice vector length.
    pub loop_cells: f64,
    /// Window radius as a fraction of the loop radius.
    pub window_fraction: f64,
    /// Number of windows per loop.
    pub windows: usize,
}

impl Default for LocateOptions {
    fn default() -> Self {
        Self {
            grid: 20,
            loop_cells: 6.0,
            window_fraction: 0.5,
            windows: 8,
        }
    }
}

/// Median nearest-neighbour distance of the spectrum points.
pub fn typical_spacing(spec: &JointSpectrum) -> f64 {
    if spec.points.len() < 2 {
        return 0.0;
    }
    let mut xs: Vec<f64> = spec.points.iter().map(|p| p[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let span = (xs[xs.len() - 1] - xs[0]).max(1e-9);
    let index = PointIndex::new(&spec.points, span / (spec.points.len() as f64).sqrt());
    let mut d: Vec<f64> = spec
        .points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            index
                .within(p, 4.0 * span / (spec.points.len() as f64).sqrt())
                .into_iter()
                .filter(|&j| j != i)
                .map(|j| (spec.points[j][0] - p[0]).hypot(spec.points[j][1] - p[1]))
                .filter(|&x| x > 1e-12)
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|d| d.is_finite())
        .collect();
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d[d.len() / 2]
}

/// Median length of the shorter of the two independent nearest-neighbour
/// steps; an estimate of the longer reduced lattice vector `2 pi hbar |g0 e|`.
pub fn lattice_scale(spec: &JointSpectrum) -> f64 {
    let s = typical_spacing(spec);
    if s == 0.0 {
        return 0.0;
    }
    let index = PointIndex::new(&spec.points, s);
    let stride = (spec.points.len() / 2000).max(1);
    let mut d: Vec<f64> = (0..spec.points.len())
        .step_by(stride)
        .collect::<Vec<_>>()
        .par_iter()
        .filter_map(|&i| {
            let p = spec.points[i];
            let mut near: Vec<Value> = index
                .within(p, 6.0 * s)
                .into_iter()
                .filter(|&j| j != i)
                .map(|j| [spec.points[j][0] - p[0], spec.points[j][1] - p[1]])
                .collect();
            near.sort_by(|a, b| norm2(*a).partial_cmp(&norm2(*b)).unwrap());
            let first = *near.first()?;
            near.iter()
                .find(|v| {
                    (first[0] * v[1] - first[1] * v[0]).abs() > 0.3 * norm2(first) * norm2(**v)
                })
                .map(|v| norm2(*v))
        })
        .collect();
    if d.is_empty() {
        return s;
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d[d.len() / 2]
}

/// Status of a loop centred at a scan point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LoopStatus {
    Invalid,
    Trivial,
    Defect,
}

struct Scanner<'a> {
    spec: &'a JointSpectrum,
    index: PointIndex<'a>,
    region: ImageRegion,
    radius: f64,
    window: f64,
    count: usize,
}

impl Scanner<'_> {
    fn status(&self, c: Value) -> LoopStatus {
        if !self.region.contains_disk(c, self.radius + self.window) {
            return LoopStatus::Invalid;
        }
        let windows = circle_loop(c, self.radius, self.window, self.count);
        match transport_indexed(self.spec, &self.index, &windows, self.spec.hbar) {
            Ok(m) if m.is_identity() => LoopStatus::Trivial,
            Ok(_) => LoopStatus::Defect,
            Err(_) => LoopStatus::Invalid,
        }
    }

    /// Midpoint of the defect run along a line through `c` in direction `dir`.
    fn refine_axis(&self, c: Value, dir: Value) -> Option<f64> {
        let n = 41;
        let span = self.radius;
        let hits: Vec<f64> = (0..n)
            .into_par_iter()
            .filter_map(|k| {
                let s = -span + 2.0 * span * k as f64 / (n - 1) as f64;
                let p = [c[0] + s * dir[0], c[1] + s * dir[1]];
                (self.status(p) == LoopStatus::Defect).then_some(s)
            })
            .collect();
        if hits.is_empty() {
            return None;
        }
        Some(0.5 * (hits[0] + hits[hits.len() - 1]))
    }
}

/// Marked values detected in one spectrum.
pub fn scan_defects(spec: &JointSpectrum, opts: &LocateOptions) -> Result<Vec<Value>> {
    let s = typical_spacing(spec);
    if s == 0.0 {
        return Ok(Vec::new());
    }
    let radius = opts.loop_cells * lattice_scale(spec);
    let window = opts.window_fraction * radius;
    let region = estimate_image(spec, 2.0 * s)?;
    let Some(bbox) = region.bbox() else {
        return Ok(Vec::new());
    };
    let scanner = Scanner {
        spec,
        index: PointIndex::new(&spec.points, window),
        region,
        radius,
        window,
        count: opts.windows,
    };
    // The coarse grid is subdivided to half the loop radius,
    // so every interior value sits well inside at least one scanned loop.
    let g = opts.grid.max(2);
    let gx = g.max((2.0 * (bbox[1] - bbox[0]) / radius).ceil() as usize);
    let gy = g.max((2.0 * (bbox[3] - bbox[2]) / radius).ceil() as usize);
    let centers: Vec<Value> = (0..gx)
        .flat_map(|i| {
            (0..gy).map(move |j| {
                [
                    bbox[0] + (bbox[1] - bbox[0]) * (i as f64 + 0.5) / gx as f64,
                    bbox[2] + (bbox[3] - bbox[2]) * (j as f64 + 0.5) / gy as f64,
                ]
            })
        })
        .collect();
    let flagged: Vec<Value> = centers
        .par_iter()
        .filter(|&&c| scanner.status(c) == LoopStatus::Defect)
        .copied()
        .collect();
    // Group flagged centres lying within two loop radii of each other.
    let mut groups: Vec<Vec<Value>> = Vec::new();
    for c in flagged {
        match groups.iter_mut().find(|g| {
            g.iter()
                .any(|q| (q[0] - c[0]).hypot(q[1] - c[1]) < 2.0 * radius)
        }) {
            Some(g) => g.push(c),
            None => groups.push(vec![c]),
        }
    }
    let mut out = Vec::new();
    for g in groups {
        let n = g.len() as f64;
        let mut c = [
            g.iter().map(|p| p[0]).sum::<f64>() / n,
            g.iter().map(|p| p[1]).sum::<f64>() / n,
        ];
        for _ in 0..2 {
            if let Some(dx) = scanner.refine_axis(c, [1.0, 0.0]) {
                c[0] += dx;
            }
            if let Some(dy) = scanner.refine_axis(c, [0.0, 1.0]) {
                c[1] += dy;
            }
        }
        out.push(c);
    }
    Ok(out)
}

/// Marked values confirmed across spectra at several `hbar`.
///
/// Values are reported from the spectrum with the smallest `hbar` and kept
/// only if every other spectrum has a detection within `5 hbar_max`.
pub fn locate_marked_values(spectra: &[JointSpectrum], opts: &LocateOptions) -> Result<Vec<Value>> {
    if spectra.len() < 2 {
        return Err(Error::BadParameter(
            "need spectra at two or more values of hbar".into(),
        ));
    }
    let found: Vec<Vec<Value>> = spectra
        .iter()
        .map(|s| scan_defects(s, opts))
        .collect::<Result<_>>()?;
    let hbar_max = spectra.iter().map(|s| s.hbar).fold(0.0, f64::max);
    let finest = (0..spectra.len())
        .min_by(|&a, &b| spectra[a].hbar.partial_cmp(&spectra[b].hbar).unwrap())
        .unwrap();
    let tol = 5.0 * hbar_max;
    Ok(found[finest]
        .iter()
        .copied()
        .filter(|c| {
            found
                .iter()
                .all(|other| other.iter().any(|q| (q[0] - c[0]).hypot(q[1] - c[1]) < tol))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{build_spin_toric, joint_spectrum};

    fn synthetic(g: [[f64; 2]; 2], offset: Value, hbar: f64, n: i64) -> JointSpectrum {
        let s = 2.0 * PI * hbar;
        let mut points = Vec::new();
        for a in -n..=n {
            for b in -n..=n {
                let (x, y) = (s * a as f64, s * b as f64);
                points.push([
                    offset[0] + g[0][0] * x + g[0][1] * y,
                    offset[1] + g[1][0] * x + g[1][1] * y,
                ]);
            }
        }
        JointSpectrum {
            hbar,
            block_index: vec![0; points.len()],
            points,
            excluded: 0,
            max_residual: 0.0,
        }
    }

    #[test]
    fn exact_lattice_is_recovered() {
        let g = [[1.0, 0.3], [-0.2, 0.8]];
        let spec = synthetic(g, [0.1, -0.05], 0.01, 12);
        let fit = fit_lattice(&spec, [0.0, 0.0], 0.25, 0.01).unwrap();
        assert!(fit.residual < 1e-12, "{}", fit.residual);
        let det = fit.g0[0][0] * fit.g0[1][1] - fit.g0[0][1] * fit.g0[1][0];
        assert!((det.abs() - (0.8 + 0.06)).abs() < 1e-9);
    }

    #[test]
    fn spin_ladder_is_not_a_planar_lattice() {
        let spec = joint_spectrum(&build_spin_toric(40.0).unwrap()).unwrap();
        assert!(matches!(
            fit_lattice(&spec, [0.0, 0.0], 0.5, 1.0 / 40.0),
            Err(Error::NotALattice(_))
        ));
        let ladder = fit_ladder(&spec, [0.0, 0.0], 0.5).unwrap();
        assert!((ladder.spacing - 2f64.sqrt() / 40.0).abs() < 1e-12);
        assert!(ladder.residual < 1e-12);
    }

    #[test]
    fn regular_loop_has_trivial_monodromy() {
        let spec = synthetic([[1.0, 0.2], [0.1, 0.9]], [0.0, 0.0], 0.01, 30);
        let w = circle_loop([0.0, 0.0], 0.6, 0.3, 8);
        let m = transport_monodromy(&spec, &w, 0.01).unwrap();
        assert!(m.is_identity());
    }

    #[test]
    fn empty_spectrum_gives_empty_region() {
        let spec = JointSpectrum {
            hbar: 0.1,
            points: vec![],
            block_index: vec![],
            excluded: 0,
            max_residual: 0.0,
        };
        assert!(estimate_image(&spec, 0.1).unwrap().is_empty());
    }

    #[test]
    fn spin_image_estimate_is_close() {
        let spec = joint_spectrum(&build_spin_toric(40.0).unwrap()).unwrap();
        let cell = 0.05;
        let region = estimate_image(&spec, cell).unwrap();
        let d = region.hausdorff(&ClassicalImage::diagonal());
        assert!(d <= 2.0 * cell + spec.hbar, "{d}");
    }

    #[test]
    fn boundary_of_single_cell_is_a_square() {
        let cells: BTreeSet<(i64, i64)> = [(0, 0)].into_iter().collect();
        let b = trace_boundary(&cells, 1.0);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].len(), 5);
    }
}
