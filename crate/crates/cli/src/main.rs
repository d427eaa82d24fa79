use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value as Json};

use semitoric::fibration::period_lattice;
use semitoric::inverse::{estimate_image, locate_marked_values, typical_spacing, LocateOptions};
use semitoric::io::{
    error_report, polygon_svg, report, scatter_svg, spectrum_csv, write_output, RunConfig,
};
use semitoric::polygon::{build_polygon, delzant_check, PolygonOptions};
use semitoric::quantum::{
    build_jaynes_cummings, build_spin_toric, coupled_spins, joint_spectrum, OperatorPair,
};
use semitoric::selftest;
use semitoric::singularity::{find_critical_points_seeded, sweep_parameter, SingularityType};
use semitoric::systems::catalog;
use semitoric::taylor::{focus_focus_point, taylor_linear};
use semitoric::{Error, ModelSpec, Result};

#[derive(Parser)]
#[command(
    name = "semitoric",
    version,
    about = "Semitoric integrable systems toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the model catalog.
    Systems(Common),
    /// Find and classify critical points.
    Classify(Common),
    /// Classify the pole pair of the coupled spins along the coupling parameter.
    Sweep(Common),
    /// Period lattice at a regular value.
    Periods(Common),
    /// Marked semitoric polygon.
    Polygon(Common),
    /// Linear Taylor invariant at the focus-focus point.
    Taylor(Common),
    /// Joint spectrum of the quantized system as CSV.
    Spectrum(Common),
    /// Recover marked values from a sequence of joint spectra.
    Recover(Common),
    /// Run the acceptance suite.
    Selftest {
        #[command(flatten)]
        common: Common,
        /// Criterion ids to run (default: all).
        #[arg(long, value_delimiter = ',')]
        criterion: Vec<u8>,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Model parameter override, `key=value`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    j_sequence: Option<Vec<f64>>,
    #[arg(long)]
    n_max: Option<usize>,
    /// Regular value `c1,c2`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    value: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    cut_signs: Option<Vec<i8>>,
    #[arg(long)]
    resolution: Option<usize>,
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (overrides the environment).
    #[arg(long)]
    out: Option<String>,
}

impl Common {
    fn config(&self, command: &str) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        c.command = command.into();
        if let Some(m) = &self.model {
            if *m != c.model {
                c.params.clear();
            }
            c.model = m.clone();
        }
        for kv in &self.params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::BadParameter(format!("expected key=value, got {kv:?}")))?;
            let v = serde_json::from_str::<Json>(v.trim())
                .ok()
                .filter(Json::is_number)
                .ok_or_else(|| {
                    Error::BadParameter(format!("parameter {k} is not a number: {v:?}"))
                })?;
            c.params.insert(k.trim().into(), v);
        }
        if let Some(j) = self.j {
            c.j = j;
        }
        if let Some(js) = &self.j_sequence {
            c.j_sequence = js.clone();
        }
        if let Some(n) = self.n_max {
            c.n_max = n;
        }
        if let Some(v) = &self.value {
            match v.as_slice() {
                [a, b] => c.value = Some([*a, *b]),
                _ => {
                    return Err(Error::BadParameter(
                        "--value takes two numbers c1,c2".into(),
                    ))
                }
            }
        }
        if let Some(s) = &self.cut_signs {
            c.cut_signs = Some(s.clone());
        }
        if let Some(r) = self.resolution {
            c.resolution = r;
        }
        if let Some(s) = self.seeds {
            c.seeds = s;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(w) = self.workers {
            c.workers = Some(w);
        }
        if let Some(o) = &self.out {
            c.out_dir = Some(o.clone());
        }
        Ok(c)
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Json {
    serde_json::to_value(v).expect("result serializes")
}

/// Quantized operator pair for the configured model at spin `j`.
fn operator_pair(c: &RunConfig, j: f64) -> Result<OperatorPair> {
    match c.instantiate()?.spec {
        ModelSpec::S2Height => build_spin_toric(j),
        ModelSpec::JaynesCummings => build_jaynes_cummings(j, c.n_max),
        ModelSpec::CoupledAngularMomenta { r1, r2, t } => coupled_spins(j, r1, r2, t),
        other => Err(Error::Unsupported(format!(
            "no quantization for {}",
            other.kind()
        ))),
    }
}

/// Writes the JSON report as `<command>.json` and returns it.
fn emit(c: &RunConfig, result: Json) -> Result<String> {
    let text = report(c, result);
    write_output(&c.output_dir(), &format!("{}.json", c.command), &text)?;
    Ok(text)
}

fn systems(c: &RunConfig) -> Result<String> {
    let models: Vec<Json> = catalog()
        .iter()
        .map(|m| {
            json!({
                "id": m.id(),
                "spec": to_json(&m.spec),
                "dof": m.dof(),
                "flags": to_json(&m.flags),
                "known": to_json(&m.known),
            })
        })
        .collect();
    emit(c, json!({ "models": models }))
}

fn classify(c: &RunConfig) -> Result<String> {
    let model = c.instantiate()?;
    let census = find_critical_points_seeded(&model, c.seeds, c.seed)?;
    let ff: Vec<Json> = census.focus_focus().map(to_json).collect();
    let others_elliptic = census
        .points
        .iter()
        .filter(|p| p.kind != SingularityType::FocusFocus)
        .all(|p| p.kind.is_elliptic_type());
    emit(
        c,
        json!({
            "model": model.id(),
            "focus_focus": ff,
            "others_elliptic_type": others_elliptic,
            "points": to_json(&census.points),
            "failures": census.failures,
        }),
    )
}

fn sweep(c: &RunConfig) -> Result<String> {
    let r1 = c.param_f64("r1").unwrap_or(1.0);
    let r2 = c.param_f64("r2").unwrap_or(2.5);
    let point = [0.0, 0.0, 1.0, 0.0, 0.0, -1.0];
    let s = sweep_parameter(r1, r2, &point, &c.t_grid)?;
    emit(
        c,
        json!({ "r1": r1, "r2": r2, "point": point, "sweep": to_json(&s) }),
    )
}

fn periods(c: &RunConfig) -> Result<String> {
    let model = c.instantiate()?;
    let value = c.value.ok_or_else(|| {
        Error::BadParameter("periods needs a regular value (--value c1,c2)".into())
    })?;
    let lattice = period_lattice(&model, value)?;
    emit(c, to_json(&lattice))
}

fn polygon(c: &RunConfig) -> Result<String> {
    let model = c.instantiate()?;
    let opts = PolygonOptions {
        resolution: c.resolution,
        c1_window: c
            .c1_window
            .map(|[a, b]| (a, b))
            .or(PolygonOptions::default().c1_window),
        ..PolygonOptions::default()
    };
    let poly = build_polygon(&model, c.cut_signs.as_deref(), &opts)?;
    let delzant = if poly.marked_points.is_empty() {
        Some(to_json(&delzant_check(&poly)?))
    } else {
        None
    };
    write_output(&c.output_dir(), "polygon.svg", &polygon_svg(&poly))?;
    emit(
        c,
        json!({ "model": model.id(), "polygon": to_json(&poly), "delzant": delzant }),
    )
}

fn taylor(c: &RunConfig) -> Result<String> {
    let model = c.instantiate()?;
    let m = focus_focus_point(&model)?;
    let t = taylor_linear(&model, &m)?;
    emit(
        c,
        json!({
            "model": model.id(),
            "point": to_json(&m.point),
            "a10": t.a10,
            "a01": t.a01,
            "taylor": to_json(&t),
        }),
    )
}

fn spectrum(c: &RunConfig) -> Result<String> {
    let spec = joint_spectrum(&operator_pair(c, c.j)?)?;
    let csv = spectrum_csv(&spec);
    let dir = c.output_dir();
    write_output(&dir, "spectrum.csv", &csv)?;
    write_output(&dir, "spectrum.svg", &scatter_svg(&spec.points, &[]))?;
    emit(
        c,
        json!({
            "hbar": spec.hbar,
            "points": spec.len(),
            "excluded": spec.excluded,
            "max_residual": spec.max_residual,
        }),
    )?;
    Ok(csv)
}

fn recover(c: &RunConfig) -> Result<String> {
    if c.j_sequence.is_empty() {
        return Err(Error::BadParameter("j_sequence is empty".into()));
    }
    let spectra = c
        .j_sequence
        .iter()
        .map(|&j| joint_spectrum(&operator_pair(c, j)?))
        .collect::<Result<Vec<_>>>()?;
    let marked = locate_marked_values(&spectra, &LocateOptions::default())?;
    let finest = spectra
        .iter()
        .min_by(|a, b| a.hbar.partial_cmp(&b.hbar).unwrap())
        .expect("nonempty");
    let cell = c.cell.unwrap_or_else(|| 2.0 * typical_spacing(finest));
    let image = estimate_image(finest, cell)?;
    write_output(
        &c.output_dir(),
        "recover.svg",
        &scatter_svg(&finest.points, &marked),
    )?;
    let sizes: Vec<Json> = spectra
        .iter()
        .map(|s| json!({ "hbar": s.hbar, "points": s.len() }))
        .collect();
    emit(
        c,
        json!({
            "spectra": sizes,
            "marked_values": marked,
            "image": { "cell": image.cell, "cells": image.cells.len(), "bbox": image.bbox() },
        }),
    )
}

fn run_selftest(c: &RunConfig, ids: &[u8]) -> Result<(String, bool)> {
    let ids: Vec<u8> = if ids.is_empty() {
        selftest::CRITERIA.to_vec()
    } else {
        ids.to_vec()
    };
    if let Some(bad) = ids.iter().find(|i| !selftest::CRITERIA.contains(i)) {
        return Err(Error::BadParameter(format!("unknown criterion {bad}")));
    }
    let mut reports = Vec::new();
    for id in ids {
        let r = selftest::run(id);
        println!("{}", r.line());
        reports.push(r);
    }
    let pass = reports.iter().all(|r| r.pass);
    let rows: Vec<Json> = reports
        .iter()
        .map(|r| json!({ "id": r.id, "title": r.title, "pass": r.pass, "detail": r.detail, "seconds": r.seconds }))
        .collect();
    emit(c, json!({ "pass": pass, "criteria": rows }))?;
    Ok((String::new(), pass))
}

fn dispatch(cli: Cli) -> (String, Result<(String, bool)>) {
    let (name, common, ids) = match &cli.command {
        Command::Systems(a) => ("systems", a, None),
        Command::Classify(a) => ("classify", a, None),
        Command::Sweep(a) => ("sweep", a, None),
        Command::Periods(a) => ("periods", a, None),
        Command::Polygon(a) => ("polygon", a, None),
        Command::Taylor(a) => ("taylor", a, None),
        Command::Spectrum(a) => ("spectrum", a, None),
        Command::Recover(a) => ("recover", a, None),
        Command::Selftest { common, criterion } => ("selftest", common, Some(criterion.as_slice())),
    };
    let result = (|| {
        let c = common.config(name)?;
        if let Some(w) = c.workers {
            if w == 0 {
                return Err(Error::BadParameter("workers must be at least 1".into()));
            }
            // Fails only if a pool already exists.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build_global();
        }
        let ok = |s: String| (s, true);
        match name {
            "systems" => systems(&c).map(ok),
            "classify" => classify(&c).map(ok),
            "sweep" => sweep(&c).map(ok),
            "periods" => periods(&c).map(ok),
            "polygon" => polygon(&c).map(ok),
            "taylor" => taylor(&c).map(ok),
            "spectrum" => spectrum(&c).map(ok),
            "recover" => recover(&c).map(ok),
            _ => run_selftest(&c, ids.unwrap_or(&[])),
        }
    })();
    (name.to_string(), result)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let doc = json!({
                "error": "Usage",
                "kind": "validation",
                "message": e.to_string().trim_end(),
                "command": Json::Null,
            });
            eprintln!("{doc}");
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        (_, Ok((out, pass))) => {
            print!("{out}");
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        (name, Err(e)) => {
            eprintln!("{}", error_report(&e, &name));
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
