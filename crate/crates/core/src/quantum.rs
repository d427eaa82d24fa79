//! Commuting operator pairs and their joint spectra.
//!
//! Every quantization here is written in a basis where `J` is diagonal, so
//! `J` is stored as its diagonal and `H` as a sparse real symmetric matrix.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compressed sparse rows of a real square matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds from triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Highest Fock level kept.
    pub n_max: usize,
    /// Number of spin states per Fock level.
    pub spin_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorPair {
    pub label: String,
    pub hbar: f64,
    pub dim: usize,
    /// Diagonal of `J` in the working basis.
    pub j_diag: Vec<f64>,
    pub h: Csr,
    pub truncation: Option<Truncation>,
}

impl OperatorPair {
    /// Largest `|H_ij - H_ji|` (`J` is real diagonal, hence symmetric).
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.h.row(r) {
                worst = worst.max((v - self.h.get(c, r)).abs());
            }
        }
        worst
    }

    /// Frobenius norm of `JH - HJ`.
    pub fn commutator_norm(&self) -> f64 {
        let mut s = 0.0;
        for r in 0..self.dim {
            for (c, v) in self.h.row(r) {
                s += ((self.j_diag[r] - self.j_diag[c]) * v).powi(2);
            }
        }
        s.sqrt()
    }

    /// `|[J, H]| / (|J| |H|)` in Frobenius norms.
    pub fn relative_commutator(&self) -> f64 {
        let nj = self.j_diag.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nh = self.h.frobenius();
        if nj == 0.0 || nh == 0.0 {
            return 0.0;
        }
        self.commutator_norm() / (nj * nh)
    }
}

fn two_j(j: f64) -> Result<usize> {
    let t = 2.0 * j;
    if !(t >= 1.0) || (t - t.round()).abs() > 1e-12 {
        return Err(Error::BadParameter(format!(
            "spin must be a positive half-integer (got {j})"
        )));
    }
    Ok(t.round() as usize)
}

/// `m` values and `s+` coefficients `<m+1|s+|m>` of a spin-`j` representation.
fn spin_ladder(tj: usize) -> (Vec<f64>, Vec<f64>) {
    let j = tj as f64 / 2.0;
    let m: Vec<f64> = (0..=tj).map(|k| -j + k as f64).collect();
    let up = m
        .iter()
        .map(|&m| (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt())
        .collect();
    (m, up)
}

/// Spin-`j` height system: `J = H = hbar s_z` with `hbar = 1/j`.
pub fn build_spin_toric(j: f64) -> Result<OperatorPair> {
    let tj = two_j(j)?;
    let hbar = 1.0 / j;
    let (m, _) = spin_ladder(tj);
    let diag: Vec<f64> = m.iter().map(|m| hbar * m).collect();
    let t = diag.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
    Ok(OperatorPair {
        label: format!("spin_toric(j={j})"),
        hbar,
        dim: tj + 1,
        h: Csr::from_triplets(tj + 1, t),
        j_diag: diag,
        truncation: None,
    })
}

/// Spin-oscillator quantization of the Jaynes–Cummings system with `hbar = 1/j`.
///
/// `J = hbar (N + 1/2) + hbar s_z`, `H = (1/4) sqrt(2 hbar) hbar (a s+ + a^dag s-)`,
/// whose symbols are `(u^2+v^2)/2 + z` and `(ux + vy)/2`.
pub fn build_jaynes_cummings(j: f64, n_max: usize) -> Result<OperatorPair> {
    let tj = two_j(j)?;
    if n_max < 2 {
        return Err(Error::BadParameter("n_max must be at least 2".into()));
    }
    let hbar = 1.0 / j;
    let sd = tj + 1;
    let dim = sd * (n_max + 1);
    let (m, up) = spin_ladder(tj);
    let idx = |n: usize, k: usize| n * sd + k;
    let mut j_diag = vec![0.0; dim];
    let mut t = Vec::new();
    let coupling = 0.25 * (2.0 * hbar).sqrt() * hbar;
    for n in 0..=n_max {
        for k in 0..sd {
            j_diag[idx(n, k)] = hbar * (n as f64 + 0.5) + hbar * m[k];
            // a s+ : |n, m> -> sqrt(n) up(m) |n-1, m+1>
            if n > 0 && k + 1 < sd {
                let v = coupling * (n as f64).sqrt() * up[k];
                t.push((idx(n - 1, k + 1), idx(n, k), v));
                t.push((idx(n, k), idx(n - 1, k + 1), v));
            }
        }
    }
    Ok(OperatorPair {
        label: format!("jaynes_cummings(j={j}, n_max={n_max})"),
        hbar,
        dim,
        j_diag,
        h: Csr::from_triplets(dim, t),
        truncation: Some(Truncation {
            n_max,
            spin_dim: sd,
        }),
    })
}

/// Coupled spins quantizing the coupled angular momenta.
///
/// Requires `j2 / j1 = R2 / R1`; then `hbar = R1 / j1 = R2 / j2` and
/// `J = hbar (s_z1 + s_z2)` commutes with `s1 . s2`.
/// `H = (1-t) s_z1 / j1 + t (s1 . s2) / (j1 j2)`.
pub fn build_coupled_spins(j1: f64, j2: f64, r1: f64, r2: f64, t: f64) -> Result<OperatorPair> {
    if !(r2 > r1 && r1 > 0.0) || !(0.0..=1.0).contains(&t) {
        return Err(Error::BadParameter(format!(
            "need R2 > R1 > 0 and t in [0, 1] (got R1={r1}, R2={r2}, t={t})"
        )));
    }
    let (t1, t2) = (two_j(j1)?, two_j(j2)?);
    if ((j2 / j1) - (r2 / r1)).abs() > 1e-12 {
        return Err(Error::BadParameter(format!(
            "spins must satisfy j2/j1 = R2/R1 for [J, H] = 0 (got j1={j1}, j2={j2})"
        )));
    }
    let hbar = r1 / j1;
    let (m1, up1) = spin_ladder(t1);
    let (m2, up2) = spin_ladder(t2);
    let (d1, d2) = (t1 + 1, t2 + 1);
    let dim = d1 * d2;
    let idx = |a: usize, b: usize| a * d2 + b;
    let mut j_diag = vec![0.0; dim];
    let mut trip = Vec::new();
    let scale = t / (j1 * j2);
    for a in 0..d1 {
        for b in 0..d2 {
            let i = idx(a, b);
            j_diag[i] = hbar * (m1[a] + m2[b]);
            trip.push((i, i, (1.0 - t) * m1[a] / j1 + scale * m1[a] * m2[b]));
            // (s1+ s2- + s1- s2+) / 2
            if a + 1 < d1 && b > 0 {
                let v = 0.5 * scale * up1[a] * up2[b - 1];
                let k = idx(a + 1, b - 1);
                trip.push((k, i, v));
                trip.push((i, k, v));
            }
        }
    }
    Ok(OperatorPair {
        label: format!("coupled_spins(j1={j1}, j2={j2}, R1={r1}, R2={r2}, t={t})"),
        hbar,
        dim,
        j_diag,
        h: Csr::from_triplets(dim, trip),
        truncation: None,
    })
}

/// Coupled spins with `j1 = j` and `j2 = j R2 / R1`.
pub fn coupled_spins(j: f64, r1: f64, r2: f64, t: f64) -> Result<OperatorPair> {
    build_coupled_spins(j, j * r2 / r1, r1, r2, t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointSpectrum {
    pub hbar: f64,
    pub points: Vec<[f64; 2]>,
    pub block_index: Vec<usize>,
    /// Eigenpairs dropped because of Fock truncation contamination.
    pub excluded: usize,
    /// Largest simultaneous-eigenvector residual over emitted points.
    pub max_residual: f64,
}

impl JointSpectrum {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Gap below which `J` eigenvalues belong to the same block.
    pub block_gap: f64,
    /// Fock-tail mass above which an eigenvector is excluded.
    pub truncation_mass: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            block_gap: 1e-9,
            truncation_mass: 1e-10,
        }
    }
}

pub fn joint_spectrum(pair: &OperatorPair) -> Result<JointSpectrum> {
    joint_spectrum_with(pair, &SpectrumOptions::default())
}

struct BlockOut {
    points: Vec<[f64; 2]>,
    excluded: usize,
    residual: f64,
}

pub fn joint_spectrum_with(pair: &OperatorPair, opts: &SpectrumOptions) -> Result<JointSpectrum> {
    let mut order: Vec<usize> = (0..pair.dim).collect();
    order.sort_by(|&a, &b| pair.j_diag[a].partial_cmp(&pair.j_diag[b]).unwrap());
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match blocks.last_mut() {
            Some(b) if pair.j_diag[i] - pair.j_diag[*b.last().unwrap()] <= opts.block_gap => {
                b.push(i)
            }
            _ => blocks.push(vec![i]),
        }
    }
    for b in &blocks {
        let spread = pair.j_diag[*b.last().unwrap()] - pair.j_diag[b[0]];
        if spread > opts.block_gap {
            return Err(Error::BlockAmbiguity { gap: spread });
        }
    }
    let outs: Vec<BlockOut> = blocks
        .par_iter()
        .map(|b| solve_block(pair, b, opts))
        .collect();
    let mut spec = JointSpectrum {
        hbar: pair.hbar,
        points: Vec::new(),
        block_index: Vec::new(),
        excluded: 0,
        max_residual: 0.0,
    };
    for (k, o) in outs.into_iter().enumerate() {
        spec.block_index
            .extend(std::iter::repeat_n(k, o.points.len()));
        spec.points.extend(o.points);
        spec.excluded += o.excluded;
        spec.max_residual = spec.max_residual.max(o.residual);
    }
    Ok(spec)
}

fn solve_block(pair: &OperatorPair, block: &[usize], opts: &SpectrumOptions) -> BlockOut {
    let n = block.len();
    let local: std::collections::HashMap<usize, usize> =
        block.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let mut m = DMatrix::zeros(n, n);
    for (a, &i) in block.iter().enumerate() {
        for (c, v) in pair.h.row(i) {
            if let Some(&b) = local.get(&c) {
                m[(a, b)] = v;
            }
        }
    }
    let lambda1 = block.iter().map(|&i| pair.j_diag[i]).sum::<f64>() / n as f64;
    let eig = SymmetricEigen::new(m);
    let mut out = BlockOut {
        points: Vec::with_capacity(n),
        excluded: 0,
        residual: 0.0,
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let mut hv: std::collections::HashMap<usize, f64> = std::collections::HashMap::new();
    for k in idx {
        let lambda2 = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k);
        if let Some(tr) = pair.truncation {
            let tail: f64 = block
                .iter()
                .zip(v.iter())
                .filter(|(&i, _)| i / tr.spin_dim + 1 >= tr.n_max)
                .map(|(_, x)| x * x)
                .sum();
            if tail > opts.truncation_mass {
                out.excluded += 1;
                continue;
            }
        }
        // Residuals on the full space, including leakage out of the block.
        hv.clear();
        let mut rj = 0.0;
        for (a, &i) in block.iter().enumerate() {
            rj += ((pair.j_diag[i] - lambda1) * v[a]).powi(2);
            for (c, h) in pair.h.row(i) {
                *hv.entry(c).or_insert(0.0) += h * v[a];
            }
        }
        let mut rh = 0.0;
        for (c, val) in &hv {
            let own = local.get(c).map_or(0.0, |&a| lambda2 * v[a]);
            rh += (val - own).powi(2);
        }
        out.residual = out.residual.max(rj.sqrt() + rh.sqrt());
        out.points.push([lambda1, lambda2]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_level_spin() {
        let s = joint_spectrum(&build_spin_toric(0.5).unwrap()).unwrap();
        assert_eq!(s.points, vec![[-1.0, -1.0], [1.0, 1.0]]);
    }

    #[test]
    fn spin_ten_is_an_equally_spaced_ladder() {
        let s = joint_spectrum(&build_spin_toric(10.0).unwrap()).unwrap();
        assert_eq!(s.len(), 21);
        for (k, p) in s.points.iter().enumerate() {
            assert!((p[0] - (-1.0 + 0.1 * k as f64)).abs() < 1e-14);
            assert_eq!(p[0], p[1]);
        }
    }

    #[test]
    fn bad_spin_rejected() {
        assert!(build_spin_toric(0.3).is_err());
        assert!(build_spin_toric(0.0).is_err());
    }

    #[test]
    fn jaynes_cummings_commutes_and_has_hbar_ladder() {
        let p = build_jaynes_cummings(5.0, 60).unwrap();
        assert!(p.commutator_norm() < 1e-12);
        assert!(p.hermitian_defect() == 0.0);
        let s = joint_spectrum(&p).unwrap();
        assert!(s.max_residual < 1e-8);
        let mut j: Vec<f64> = s.points.iter().map(|q| q[0]).collect();
        j.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        for w in j.windows(2) {
            assert!((w[1] - w[0] - p.hbar).abs() < 1e-12);
        }
        assert!(s.excluded > 0);
    }

    #[test]
    fn coupled_spins_count_and_commutation() {
        let p = coupled_spins(4.0, 1.0, 2.5, 0.5).unwrap();
        assert!(p.commutator_norm() < 1e-12);
        let s = joint_spectrum(&p).unwrap();
        assert_eq!(s.len(), 9 * 21);
        assert!(s.max_residual < 1e-8);
        // min(s1 . s2) = -j1 (j2 + 1), so H reaches below -1 by O(hbar).
        for q in &s.points {
            assert!(q[0].abs() <= 3.5 + 1e-12 && q[1].abs() <= 1.0 + p.hbar);
        }
    }

    #[test]
    fn coupled_spins_at_zero_is_sz() {
        let p = coupled_spins(2.0, 1.0, 2.5, 0.0).unwrap();
        let s = joint_spectrum(&p).unwrap();
        for q in &s.points {
            let m = q[1] * 2.0;
            assert!((m - m.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_spins_rejected() {
        assert!(matches!(
            build_coupled_spins(10.0, 10.0, 1.0, 2.5, 0.5),
            Err(Error::BadParameter(_))
        ));
    }

    #[test]
    fn csr_roundtrip() {
        let m = Csr::from_triplets(3, vec![(0, 1, 2.0), (0, 1, 1.0), (2, 0, -1.0)]);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 1.0, 1.0]), vec![3.0, 0.0, -1.0]);
    }
}
