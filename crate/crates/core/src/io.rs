//! Run configuration and output formats: JSON reports, spectrum CSV, SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};
use crate::polygon::MarkedPolygon;
use crate::quantum::JointSpectrum;
use crate::systems::{instantiate_json, ModelSystem};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "SEMITORIC_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub model: String,
    /// Model parameters, e.g. `{"r1": 1, "r2": 2.5, "t": 0.5}`.
    pub params: serde_json::Map<String, Json>,
    /// Integrator tolerance.
    pub tol: f64,
    /// Columns for polygon construction.
    pub resolution: usize,
    /// Quasi-random seeds for critical point searches.
    pub seeds: usize,
    /// Spin quantum number for single-spectrum commands.
    pub j: f64,
    /// Spin quantum numbers for convergence and recovery runs.
    pub j_sequence: Vec<f64>,
    /// Fock cutoff for oscillator factors.
    pub n_max: usize,
    pub cut_signs: Option<Vec<i8>>,
    pub c1_window: Option<[f64; 2]>,
    /// Coupling values for parameter sweeps.
    pub t_grid: Vec<f64>,
    /// Regular value for `periods`.
    pub value: Option<[f64; 2]>,
    /// Occupancy cell size for image estimates (default: twice the level spacing).
    pub cell: Option<f64>,
    pub out_dir: Option<String>,
    /// Offset into the Halton sequence.
    pub seed: u64,
    /// Worker threads (default: available parallelism).
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            model: "jaynes_cummings".into(),
            params: serde_json::Map::new(),
            tol: 1e-11,
            resolution: 48,
            seeds: 64,
            j: 10.0,
            j_sequence: vec![20.0, 40.0],
            n_max: 200,
            cut_signs: None,
            c1_window: None,
            t_grid: (0..=20).map(|k| k as f64 / 20.0).collect(),
            value: None,
            cell: None,
            out_dir: None,
            seed: 0,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        to_json_string(&serde_json::to_value(self).expect("config serializes"))
    }

    pub fn instantiate(&self) -> Result<ModelSystem> {
        let mut doc = serde_json::Map::new();
        doc.insert("model".into(), Json::String(self.model.clone()));
        doc.insert("params".into(), Json::Object(self.params.clone()));
        instantiate_json(&Json::Object(doc))
    }

    /// Output directory: the config value, else the environment, else `.`.
    pub fn output_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var(OUTPUT_DIR_ENV).ok().filter(|s| !s.is_empty()))
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn param_f64(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(Json::as_f64)
    }
}

/// Fixed 17-significant-digit rendering.
pub fn format_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_json(out: &mut String, v: &Json, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Json::Null => out.push_str("null"),
        Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Json::Number(n) => {
            if n.is_i64() || n.is_u64() {
                out.push_str(&n.to_string());
            } else {
                match n.as_f64() {
                    Some(x) if x.is_finite() => out.push_str(&format_f64(x)),
                    _ => out.push_str("null"),
                }
            }
        }
        Json::String(s) => out.push_str(&serde_json::to_string(s).expect("string serializes")),
        Json::Array(a) if a.is_empty() => out.push_str("[]"),
        Json::Array(a) => {
            // Short numeric arrays stay on one line.
            if a.len() <= 4 && a.iter().all(|x| x.is_number()) {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_json(out, x, indent);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(out, indent + 2);
                write_json(out, x, indent + 2);
                if i + 1 < a.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push(']');
        }
        Json::Object(m) if m.is_empty() => out.push_str("{}"),
        Json::Object(m) => {
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_json(out, x, indent + 2);
                if i + 1 < m.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Pretty JSON with every float written to 17 significant digits.
pub fn to_json_string(v: &Json) -> String {
    let mut s = String::new();
    write_json(&mut s, v, 0);
    s.push('\n');
    s
}

/// Result document `{"command", "config", "result"}`.
pub fn report(config: &RunConfig, result: Json) -> String {
    let doc = serde_json::json!({
        "command": config.command,
        "config": serde_json::to_value(config).expect("config serializes"),
        "result": result,
    });
    to_json_string(&doc)
}

/// Structured error document for the error stream.
pub fn error_report(err: &Error, command: &str) -> String {
    let doc = serde_json::json!({
        "error": err.name(),
        "kind": if err.is_validation() { "validation" } else { "numeric" },
        "message": err.to_string(),
        "command": command,
    });
    serde_json::to_string(&doc).expect("error serializes")
}

pub const SPECTRUM_HEADER: &str = "hbar,lambda1,lambda2,block";

pub fn spectrum_csv(spec: &JointSpectrum) -> String {
    let mut s = String::with_capacity(64 * spec.len() + 32);
    s.push_str(SPECTRUM_HEADER);
    s.push('\n');
    let h = format_f64(spec.hbar);
    for (p, b) in spec.points.iter().zip(&spec.block_index) {
        let _ = writeln!(s, "{h},{},{},{b}", format_f64(p[0]), format_f64(p[1]));
    }
    s
}

/// Parses spectrum CSV back into points; all rows must share one `hbar`.
pub fn parse_spectrum_csv(text: &str) -> Result<JointSpectrum> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SPECTRUM_HEADER => {}
        other => return Err(Error::Config(format!("bad spectrum header {other:?}"))),
    }
    let mut hbar = None;
    let mut points = Vec::new();
    let mut block_index = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || Error::Config(format!("bad spectrum row {}: {line:?}", n + 2));
        if f.len() != 4 {
            return Err(bad());
        }
        let h: f64 = f[0].parse().map_err(|_| bad())?;
        let l1: f64 = f[1].parse().map_err(|_| bad())?;
        let l2: f64 = f[2].parse().map_err(|_| bad())?;
        let b: usize = f[3].parse().map_err(|_| bad())?;
        match hbar {
            None => hbar = Some(h),
            Some(h0) if h0 != h => {
                return Err(Error::Config(
                    "mixed hbar values in one spectrum file".into(),
                ))
            }
            _ => {}
        }
        points.push([l1, l2]);
        block_index.push(b);
    }
    Ok(JointSpectrum {
        hbar: hbar.ok_or_else(|| Error::Config("empty spectrum file".into()))?,
        points,
        block_index,
        excluded: 0,
        max_residual: 0.0,
    })
}

struct Frame {
    x0: f64,
    y1: f64,
    scale: f64,
    width: f64,
    height: f64,
}

const SVG_SIZE: f64 = 600.0;
const SVG_MARGIN: f64 = 30.0;

impl Frame {
    fn fit(points: impl Iterator<Item = [f64; 2]>) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in points {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        let span = (x1 - x0).max(y1 - y0).max(1e-12);
        let scale = (SVG_SIZE - 2.0 * SVG_MARGIN) / span;
        Self {
            x0,
            y1,
            scale,
            width: (x1 - x0) * scale + 2.0 * SVG_MARGIN,
            height: (y1 - y0) * scale + 2.0 * SVG_MARGIN,
        }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        (
            SVG_MARGIN + (p[0] - self.x0) * self.scale,
            SVG_MARGIN + (self.y1 - p[1]) * self.scale,
        )
    }

    fn open(&self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.2}\" height=\"{:.2}\" viewBox=\"0 0 {:.2} {:.2}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            self.width, self.height, self.width, self.height
        )
    }
}

/// Polygon outline with marked points and their cuts.
pub fn polygon_svg(poly: &MarkedPolygon) -> String {
    let frame = Frame::fit(poly.vertices.iter().chain(&poly.marked_points).copied());
    let mut s = frame.open();
    let pts: Vec<String> = poly
        .vertices
        .iter()
        .map(|&p| {
            let (x, y) = frame.map(p);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let _ = writeln!(
        s,
        "<polygon points=\"{}\" fill=\"#dde6f3\" stroke=\"#1f3b73\" stroke-width=\"1.5\"/>",
        pts.join(" ")
    );
    for (m, e) in poly.marked_points.iter().zip(&poly.cut_signs) {
        let (x, y) = frame.map(*m);
        let end = poly
            .vertical_extent(m[0])
            .map(|(lo, hi)| if *e > 0 { hi } else { lo })
            .unwrap_or(m[1]);
        let (_, ye) = frame.map([m[0], end]);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.3}\" y1=\"{y:.3}\" x2=\"{x:.3}\" y2=\"{ye:.3}\" stroke=\"#a03030\" stroke-dasharray=\"4 3\"/>"
        );
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"4\" fill=\"#a03030\"/>"
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Scatter plot of spectrum points with optional highlighted values.
pub fn scatter_svg(points: &[[f64; 2]], marks: &[[f64; 2]]) -> String {
    let frame = Frame::fit(points.iter().chain(marks).copied());
    let mut s = frame.open();
    for &p in points {
        let (x, y) = frame.map(p);
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"1.2\" fill=\"#1f3b73\"/>"
        );
    }
    for &p in marks {
        let (x, y) = frame.map(p);
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"6\" fill=\"none\" stroke=\"#a03030\" stroke-width=\"2\"/>"
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `contents` to `dir/name`, creating `dir` as needed.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(format_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn model_only_config_is_valid() {
        let c = RunConfig::parse(r#"{"model": "s2_height"}"#).unwrap();
        assert_eq!(c.model, "s2_height");
        assert_eq!(c.j_sequence, vec![20.0, 40.0]);
        assert!(c.instantiate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            RunConfig::parse(r#"{"modle": "x"}"#),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn config_round_trip() {
        let mut c = RunConfig::default();
        c.tol = 1.0 / 3.0;
        c.c1_window = Some([-1.0, 2.0 / 7.0]);
        c.params.insert("t".into(), serde_json::json!(0.1));
        assert_eq!(RunConfig::parse(&c.render()).unwrap(), c);
    }

    #[test]
    fn csv_round_trip() {
        let spec = JointSpectrum {
            hbar: 0.1,
            points: vec![[0.1, -0.2], [1.0 / 3.0, 0.0]],
            block_index: vec![0, 1],
            excluded: 0,
            max_residual: 0.0,
        };
        let text = spectrum_csv(&spec);
        assert!(text.starts_with("hbar,lambda1,lambda2,block\n"));
        let back = parse_spectrum_csv(&text).unwrap();
        assert_eq!(back.points, spec.points);
        assert_eq!(back.block_index, spec.block_index);
    }

    #[test]
    fn report_embeds_config() {
        let c = RunConfig {
            command: "taylor".into(),
            ..RunConfig::default()
        };
        let text = report(&c, serde_json::json!({"a10": 1.5}));
        let doc: Json = serde_json::from_str(&text).unwrap();
        assert_eq!(doc["config"]["command"], "taylor");
        assert_eq!(doc["result"]["a10"], 1.5);
    }
}
