//! Catalog of integrable systems with closed-form momentum maps.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Chart, Factor, PhasePoint, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SphericalPendulum,
    JaynesCummings,
    CoupledAngularMomenta,
    S2Height,
    CpnRotation,
    /// Linear focus-focus model `(x1 xi2 - x2 xi1, x1 xi1 + x2 xi2)` on R^4.
    QModel,
}

impl ModelKind {
    pub fn id(&self) -> &'static str {
        match self {
            ModelKind::SphericalPendulum => "spherical_pendulum",
            ModelKind::JaynesCummings => "jaynes_cummings",
            ModelKind::CoupledAngularMomenta => "coupled_angular_momenta",
            ModelKind::S2Height => "s2_height",
            ModelKind::CpnRotation => "cpn_rotation",
            ModelKind::QModel => "q_model",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Some(match id {
            "spherical_pendulum" => ModelKind::SphericalPendulum,
            "jaynes_cummings" => ModelKind::JaynesCummings,
            "coupled_angular_momenta" => ModelKind::CoupledAngularMomenta,
            "s2_height" | "spin_toric" => ModelKind::S2Height,
            "cpn_rotation" => ModelKind::CpnRotation,
            "q_model" => ModelKind::QModel,
            _ => return None,
        })
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Model identifier plus parameters, as read from `{"model": .., "params": {..}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case")]
pub enum ModelSpec {
    SphericalPendulum,
    JaynesCummings,
    CoupledAngularMomenta {
        #[serde(default = "default_r1")]
        r1: f64,
        #[serde(default = "default_r2")]
        r2: f64,
        #[serde(default = "default_t")]
        t: f64,
    },
    S2Height,
    CpnRotation {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    QModel,
}

fn default_r1() -> f64 {
    1.0
}
fn default_r2() -> f64 {
    2.5
}
fn default_t() -> f64 {
    0.5
}
fn default_n() -> usize {
    2
}
fn default_lambda() -> f64 {
    1.0
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::SphericalPendulum => ModelKind::SphericalPendulum,
            ModelSpec::JaynesCummings => ModelKind::JaynesCummings,
            ModelSpec::CoupledAngularMomenta { .. } => ModelKind::CoupledAngularMomenta,
            ModelSpec::S2Height => ModelKind::S2Height,
            ModelSpec::CpnRotation { .. } => ModelKind::CpnRotation,
            ModelSpec::QModel => ModelKind::QModel,
        }
    }

    /// Default parameters for a model id.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::SphericalPendulum => ModelSpec::SphericalPendulum,
            ModelKind::JaynesCummings => ModelSpec::JaynesCummings,
            ModelKind::CoupledAngularMomenta => ModelSpec::CoupledAngularMomenta {
                r1: default_r1(),
                r2: default_r2(),
                t: default_t(),
            },
            ModelKind::S2Height => ModelSpec::S2Height,
            ModelKind::CpnRotation => ModelSpec::CpnRotation {
                n: default_n(),
                lambda: default_lambda(),
            },
            ModelKind::QModel => ModelSpec::QModel,
        }
    }
}

/// Structural flags of a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// Both components generate 2pi-periodic flows.
    pub toric: bool,
    /// `f1` generates a proper 2pi-periodic flow and singularities have no hyperbolic part.
    pub semitoric: bool,
    /// The periodic component is not proper; excluded from polygon/Taylor pipelines.
    pub non_proper_j: bool,
    /// Constructed test system rather than a physical model.
    pub synthetic: bool,
}

/// Reference value with the location it was quoted from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownValue {
    pub name: String,
    pub value: Vec<f64>,
    pub provenance: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSystem {
    pub spec: ModelSpec,
    pub chart: Chart,
    pub flags: Flags,
    pub known: Vec<KnownValue>,
}

/// One rotating plane of the `f1` circle action, in embedding coordinates:
/// coordinates `(i, j)` rotate by angle `rate * s` after time `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationPlane {
    pub i: usize,
    pub j: usize,
    pub rate: f64,
}

/// The models every run can rely on.
pub fn catalog() -> Vec<ModelSystem> {
    [
        ModelSpec::SphericalPendulum,
        ModelSpec::JaynesCummings,
        ModelSpec::default_for(ModelKind::CoupledAngularMomenta),
        ModelSpec::S2Height,
        ModelSpec::CpnRotation { n: 1, lambda: 1.0 },
        ModelSpec::CpnRotation { n: 2, lambda: 1.0 },
        ModelSpec::QModel,
    ]
    .into_iter()
    .map(|s| instantiate(s).expect("catalog defaults are valid"))
    .collect()
}

pub fn instantiate(spec: ModelSpec) -> Result<ModelSystem> {
    let no_flags = Flags {
        toric: false,
        semitoric: false,
        non_proper_j: false,
        synthetic: false,
    };
    let (chart, flags, known) = match &spec {
        ModelSpec::SphericalPendulum => (
            Chart::new(vec![Factor::CotangentSphere]),
            Flags {
                non_proper_j: true,
                ..no_flags
            },
            vec![],
        ),
        ModelSpec::JaynesCummings => (
            Chart::new(vec![Factor::Sphere { scale: -1.0 }, Factor::Plane]),
            Flags {
                semitoric: true,
                ..no_flags
            },
            vec![
                KnownValue {
                    name: "focus_focus_point".into(),
                    value: vec![0.0, 0.0, 1.0, 0.0, 0.0],
                    provenance: "with the exception of m=(0,0,1,0,0)".into(),
                },
                KnownValue {
                    name: "taylor_linear".into(),
                    value: vec![PI / 2.0, 5.0 * 2f64.ln()],
                    provenance: "(pi/2) x + 5 log 2 y + O(2)".into(),
                },
            ],
        ),
        ModelSpec::CoupledAngularMomenta { r1, r2, t } => {
            let (r1, r2, t) = (*r1, *r2, *t);
            if !(r1 > 0.0 && r2 > r1) {
                return Err(Error::BadParameter(format!(
                    "coupled_angular_momenta requires R2 > R1 > 0 (got R1 = {r1}, R2 = {r2})"
                )));
            }
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::BadParameter(format!(
                    "coupled_angular_momenta requires t in [0, 1] (got {t})"
                )));
            }
            let mut known = vec![KnownValue {
                name: "singular_point".into(),
                value: vec![0.0, 0.0, 1.0, 0.0, 0.0, -1.0],
                provenance: "(0,0,1,0,0,-1) is a singularity".into(),
            }];
            if r1 == 1.0 && r2 == 2.5 && t == 0.5 {
                known.push(KnownValue {
                    name: "taylor_linear".into(),
                    value: vec![
                        (9f64 / 13.0).atan(),
                        3.5 * 2f64.ln() + 3.0 * 3f64.ln() - 1.5 * 5f64.ln(),
                    ],
                    provenance: "arctan(9/13) x + (7/2 log 2 + 3 log 3 - 3/2 log 5) y".into(),
                });
            }
            (
                Chart::new(vec![
                    Factor::Sphere { scale: -r1 },
                    Factor::Sphere { scale: -r2 },
                ]),
                Flags {
                    semitoric: true,
                    ..no_flags
                },
                known,
            )
        }
        ModelSpec::S2Height => (
            Chart::new(vec![Factor::Sphere { scale: -1.0 }]),
            Flags {
                toric: true,
                semitoric: true,
                ..no_flags
            },
            vec![KnownValue {
                name: "image".into(),
                value: vec![-1.0, 1.0],
                provenance: "Clearly F(S^2)=[-1,1]".into(),
            }],
        ),
        ModelSpec::CpnRotation { n, lambda } => {
            if !(1..=2).contains(n) {
                return Err(Error::BadParameter(format!(
                    "cpn_rotation supports n in {{1, 2}} (got {n})"
                )));
            }
            if !(*lambda > 0.0) {
                return Err(Error::BadParameter(format!(
                    "cpn_rotation requires lambda > 0 (got {lambda})"
                )));
            }
            (
                Chart::new(vec![Factor::Projective {
                    n: *n,
                    scale: *lambda,
                }]),
                Flags {
                    toric: true,
                    semitoric: true,
                    ..no_flags
                },
                vec![],
            )
        }
        ModelSpec::QModel => (
            Chart::new(vec![Factor::Plane, Factor::Plane]),
            Flags {
                synthetic: true,
                ..no_flags
            },
            vec![],
        ),
    };
    Ok(ModelSystem {
        spec,
        chart,
        flags,
        known,
    })
}

/// Instantiates from a JSON parameter document `{"model": id, "params": {..}}`.
pub fn instantiate_json(doc: &serde_json::Value) -> Result<ModelSystem> {
    let mut doc = doc.clone();
    if let Some(obj) = doc.as_object_mut() {
        let id = obj
            .get("model")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Config("missing \"model\"".into()))?;
        let kind = ModelKind::from_id(id)
            .ok_or_else(|| Error::BadParameter(format!("unknown model {id:?}")))?;
        obj.insert("model".into(), serde_json::Value::String(kind.id().into()));
        let unit = matches!(
            kind,
            ModelKind::SphericalPendulum
                | ModelKind::JaynesCummings
                | ModelKind::S2Height
                | ModelKind::QModel
        );
        if unit {
            obj.remove("params");
        } else if !obj.contains_key("params") {
            obj.insert("params".into(), serde_json::json!({}));
        }
    }
    let spec: ModelSpec =
        serde_json::from_value(doc).map_err(|e| Error::BadParameter(e.to_string()))?;
    instantiate(spec)
}

impl ModelSystem {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn id(&self) -> &'static str {
        self.kind().id()
    }

    /// Number of degrees of freedom (1 or 2).
    pub fn dof(&self) -> usize {
        self.chart.manifold_dim() / 2
    }

    pub fn point(&self, coords: Vec<f64>) -> PhasePoint {
        PhasePoint::new(self.kind(), coords)
    }

    /// Closed-form momentum map on ambient coordinates (no constraint check).
    pub fn eval(&self, x: &[f64]) -> Value {
        match &self.spec {
            ModelSpec::JaynesCummings => [
                0.5 * (x[3] * x[3] + x[4] * x[4]) + x[2],
                0.5 * (x[3] * x[0] + x[4] * x[1]),
            ],
            ModelSpec::CoupledAngularMomenta { r1, r2, t } => [
                r1 * x[2] + r2 * x[5],
                (1.0 - t) * x[2] + t * (x[0] * x[3] + x[1] * x[4] + x[2] * x[5]),
            ],
            ModelSpec::S2Height => [x[2], 0.0],
            ModelSpec::SphericalPendulum => [
                x[0] * x[4] - x[1] * x[3],
                0.5 * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]) + x[2],
            ],
            ModelSpec::CpnRotation { n, lambda } => {
                let m = |k: usize| x[2 * k] * x[2 * k] + x[2 * k + 1] * x[2 * k + 1];
                let total: f64 = (0..=*n).map(m).sum();
                if *n == 1 {
                    [lambda * m(1) / total, 0.0]
                } else {
                    [lambda * m(1) / total, lambda * m(2) / total]
                }
            }
            ModelSpec::QModel => [x[0] * x[3] - x[2] * x[1], x[0] * x[1] + x[2] * x[3]],
        }
    }

    /// Ambient gradient of `w1 f1 + w2 f2`.
    pub fn gradient(&self, x: &[f64], w: [f64; 2], g: &mut [f64]) {
        let [a, b] = w;
        match &self.spec {
            ModelSpec::JaynesCummings => {
                g[0] = b * 0.5 * x[3];
                g[1] = b * 0.5 * x[4];
                g[2] = a;
                g[3] = a * x[3] + b * 0.5 * x[0];
                g[4] = a * x[4] + b * 0.5 * x[1];
            }
            ModelSpec::CoupledAngularMomenta { r1, r2, t } => {
                g[0] = b * t * x[3];
                g[1] = b * t * x[4];
                g[2] = a * r1 + b * ((1.0 - t) + t * x[5]);
                g[3] = b * t * x[0];
                g[4] = b * t * x[1];
                g[5] = a * r2 + b * t * x[2];
            }
            ModelSpec::S2Height => {
                g[0] = 0.0;
                g[1] = 0.0;
                g[2] = a;
            }
            ModelSpec::SphericalPendulum => {
                g[0] = a * x[4];
                g[1] = -a * x[3];
                g[2] = b;
                g[3] = -a * x[1] + b * x[3];
                g[4] = a * x[0] + b * x[4];
                g[5] = b * x[5];
            }
            ModelSpec::CpnRotation { n, lambda } => {
                // On the unit sphere the normalisation is constant; its gradient
                // is radial and removed by the horizontal projection.
                g.iter_mut().for_each(|c| *c = 0.0);
                for (k, wk) in [(1usize, a), (2usize, b)] {
                    if k <= *n {
                        g[2 * k] += 2.0 * lambda * wk * x[2 * k];
                        g[2 * k + 1] += 2.0 * lambda * wk * x[2 * k + 1];
                    }
                }
            }
            ModelSpec::QModel => {
                // q1 = x1 xi2 - x2 xi1, q2 = x1 xi1 + x2 xi2 with x = (x1, xi1, x2, xi2)
                g[0] = a * x[3] + b * x[1];
                g[1] = -a * x[2] + b * x[0];
                g[2] = -a * x[1] + b * x[3];
                g[3] = a * x[0] + b * x[2];
            }
        }
    }

    /// Hamiltonian field of `w1 f1 + w2 f2` at ambient point `x`.
    pub fn field(&self, x: &[f64], w: [f64; 2], out: &mut [f64]) {
        let mut g = [0.0; 8];
        let n = x.len();
        self.gradient(x, w, &mut g[..n]);
        self.chart.field_from_gradient(x, &g[..n], out);
    }

    pub fn field_vec(&self, x: &[f64], w: [f64; 2]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.field(x, w, &mut out);
        out
    }

    /// Planes rotated by the `f1` circle action, in `Chart::embed` coordinates.
    pub fn s1_planes(&self) -> Vec<RotationPlane> {
        let p = |i, j, rate| RotationPlane { i, j, rate };
        match &self.spec {
            ModelSpec::JaynesCummings => vec![p(0, 1, 1.0), p(3, 4, 1.0)],
            ModelSpec::CoupledAngularMomenta { .. } => vec![p(0, 1, 1.0), p(3, 4, 1.0)],
            ModelSpec::S2Height => vec![p(0, 1, 1.0)],
            ModelSpec::SphericalPendulum => vec![p(0, 1, 1.0), p(3, 4, 1.0)],
            ModelSpec::QModel => vec![p(0, 2, -1.0), p(1, 3, -1.0)],
            ModelSpec::CpnRotation { n, .. } => {
                // Embedding order: for j <= k, diagonal -> 1 slot, off-diagonal -> (re, im).
                let mut planes = Vec::new();
                let mut idx = 0;
                for j in 0..=*n {
                    for k in j..=*n {
                        if j == k {
                            idx += 1;
                            continue;
                        }
                        // z_j conj(z_k) picks up exp(i s) if j == 1, exp(-i s) if k == 1.
                        if j == 1 {
                            planes.push(p(idx, idx + 1, 1.0));
                        } else if k == 1 {
                            planes.push(p(idx, idx + 1, -1.0));
                        }
                        idx += 2;
                    }
                }
                planes
            }
        }
    }

    /// Range of `f1` over the manifold (`INFINITY` if unbounded).
    pub fn f1_range(&self) -> (f64, f64) {
        match &self.spec {
            ModelSpec::JaynesCummings => (-1.0, f64::INFINITY),
            ModelSpec::CoupledAngularMomenta { r1, r2, .. } => (-r1 - r2, r1 + r2),
            ModelSpec::S2Height => (-1.0, 1.0),
            ModelSpec::SphericalPendulum | ModelSpec::QModel => (f64::NEG_INFINITY, f64::INFINITY),
            ModelSpec::CpnRotation { lambda, .. } => (0.0, *lambda),
        }
    }

    /// Range of `f2` on the level set `f1 = c1`, or `None` if `c1` is not attained.
    /// One-degree-of-freedom models report `(0, 0)`.
    pub fn image_profile(&self, c1: f64) -> Option<(f64, f64)> {
        let (a, b) = self.f1_range();
        if !(c1 >= a && c1 <= b) {
            return None;
        }
        match &self.spec {
            ModelSpec::S2Height | ModelSpec::CpnRotation { n: 1, .. } => Some((0.0, 0.0)),
            ModelSpec::CpnRotation { lambda, .. } => Some((0.0, lambda - c1)),
            ModelSpec::JaynesCummings => {
                let top = c1.min(1.0);
                let h = |z: f64| 0.5 * (2.0 * (c1 - z) * (1.0 - z * z)).max(0.0).sqrt();
                let hi = maximize_1d(h, -1.0, top);
                Some((-hi, hi))
            }
            ModelSpec::CoupledAngularMomenta { r1, r2, t } => {
                let (r1, r2, t) = (*r1, *r2, *t);
                // z1 range such that z2 = (c1 - r1 z1) / r2 stays in [-1, 1]
                let lo_z = ((c1 - r2) / r1).max(-1.0);
                let hi_z = ((c1 + r2) / r1).min(1.0);
                if lo_z > hi_z {
                    return None;
                }
                let f = |z1: f64, sign: f64| {
                    let z2 = ((c1 - r1 * z1) / r2).clamp(-1.0, 1.0);
                    let rho = ((1.0 - z1 * z1).max(0.0) * (1.0 - z2 * z2).max(0.0)).sqrt();
                    (1.0 - t) * z1 + t * (z1 * z2 + sign * rho)
                };
                let hi = maximize_1d(|z| f(z, 1.0), lo_z, hi_z);
                let lo = -maximize_1d(|z| -f(z, -1.0), lo_z, hi_z);
                Some((lo, hi))
            }
            ModelSpec::SphericalPendulum => {
                let lo = if c1 == 0.0 {
                    -1.0
                } else {
                    -maximize_1d(
                        |z| -(c1 * c1 / (2.0 * (1.0 - z * z)) + z),
                        -1.0 + 1e-12,
                        1.0 - 1e-12,
                    )
                };
                Some((lo, f64::INFINITY))
            }
            ModelSpec::QModel => Some((f64::NEG_INFINITY, f64::INFINITY)),
        }
    }

    /// Radius of the box used for seeding non-compact plane factors.
    pub fn plane_radius(&self) -> f64 {
        match self.kind() {
            ModelKind::JaynesCummings => 2.5,
            ModelKind::SphericalPendulum => 2.0,
            _ => 1.5,
        }
    }

    pub fn known(&self, name: &str) -> Option<&KnownValue> {
        self.known.iter().find(|k| k.name == name)
    }
}

/// Maximum of a continuous function on `[a, b]` by grid scan plus golden-section refinement.
pub(crate) fn maximize_1d(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return f(a);
    }
    let n = 400;
    let mut best = (f(a), a);
    for k in 1..=n {
        let x = a + (b - a) * k as f64 / n as f64;
        let v = f(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    let step = (b - a) / n as f64;
    let (mut lo, mut hi) = ((best.1 - step).max(a), (best.1 + step).min(b));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..100 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    best.0.max(f1).max(f2).max(f(a)).max(f(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_contains_required_models() {
        let ids: Vec<&str> = catalog().iter().map(|m| m.id()).collect();
        for id in [
            "spherical_pendulum",
            "jaynes_cummings",
            "coupled_angular_momenta",
            "s2_height",
            "cpn_rotation",
        ] {
            assert!(ids.contains(&id), "missing {id}");
        }
        let cpn: Vec<_> = catalog()
            .into_iter()
            .filter(|m| m.kind() == ModelKind::CpnRotation)
            .map(|m| m.dof())
            .collect();
        assert_eq!(cpn, vec![1, 2]);
    }

    #[test]
    fn coupled_parameters_are_validated() {
        let bad = instantiate(ModelSpec::CoupledAngularMomenta {
            r1: 2.0,
            r2: 1.0,
            t: 0.5,
        });
        assert!(matches!(bad, Err(Error::BadParameter(_))));
        let bad_t = instantiate(ModelSpec::CoupledAngularMomenta {
            r1: 1.0,
            r2: 2.0,
            t: 1.5,
        });
        assert!(matches!(bad_t, Err(Error::BadParameter(_))));
        assert!(instantiate(ModelSpec::CoupledAngularMomenta {
            r1: 1.0,
            r2: 2.5,
            t: 0.5
        })
        .is_ok());
        assert!(instantiate(ModelSpec::JaynesCummings).is_ok());
        assert!(instantiate(ModelSpec::CpnRotation { n: 2, lambda: -1.0 }).is_err());
    }

    #[test]
    fn json_parameters_round_trip() {
        let doc = serde_json::json!({"model": "coupled_angular_momenta", "params": {"r1": 1.0, "r2": 2.5, "t": 0.25}});
        let m = instantiate_json(&doc).unwrap();
        assert_eq!(
            m.spec,
            ModelSpec::CoupledAngularMomenta {
                r1: 1.0,
                r2: 2.5,
                t: 0.25
            }
        );
        let jc = instantiate_json(&serde_json::json!({"model": "jaynes_cummings"})).unwrap();
        assert_eq!(jc.kind(), ModelKind::JaynesCummings);
        let d = instantiate_json(&serde_json::json!({"model": "cpn_rotation"})).unwrap();
        assert_eq!(d.spec, ModelSpec::CpnRotation { n: 2, lambda: 1.0 });
        assert!(instantiate_json(&serde_json::json!({"model": "nope"})).is_err());
    }

    #[test]
    fn closed_form_values() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        assert_eq!(jc.eval(&[0.0, 0.0, 1.0, 0.0, 0.0]), [1.0, 0.0]);
        let s2 = instantiate(ModelSpec::S2Height).unwrap();
        assert_eq!(s2.eval(&[0.0, 0.0, 1.0])[0], 1.0);
        let cam = instantiate(ModelSpec::CoupledAngularMomenta {
            r1: 1.0,
            r2: 2.5,
            t: 0.0,
        })
        .unwrap();
        assert_eq!(cam.eval(&[0.0, 0.0, 1.0, 0.0, 0.0, -1.0]), [-1.5, 1.0]);
    }

    #[test]
    fn cp1_is_a_height_system_on_zero_lambda() {
        let m = instantiate(ModelSpec::CpnRotation { n: 1, lambda: 3.0 }).unwrap();
        assert_eq!(m.f1_range(), (0.0, 3.0));
        assert_eq!(m.eval(&[1.0, 0.0, 0.0, 0.0])[0], 0.0);
        assert_eq!(m.eval(&[0.0, 0.0, 0.0, 1.0])[0], 3.0);
    }

    #[test]
    fn jaynes_cummings_profile_pinches_at_minimum() {
        let jc = instantiate(ModelSpec::JaynesCummings).unwrap();
        let (lo, hi) = jc.image_profile(-1.0).unwrap();
        assert!(lo.abs() < 1e-12 && hi.abs() < 1e-12);
        assert!(jc.image_profile(-1.1).is_none());
        let (lo, hi) = jc.image_profile(1.0).unwrap();
        assert!(hi > 0.0 && (lo + hi).abs() < 1e-15);
    }
}
