use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use accreta_core::config::Severity;
use accreta_core::convolution::{convolve as convolve_time_field, ActivationTrace};
use accreta_core::coupling::{run_observed, touches_frame, CoupledState, IterationRecord, Verdict};
use accreta_core::diagnostics::{regularity_suite, RegularityReport};
use accreta_core::elliptic::{solve_on_growth, TimeField};
use accreta_core::grid::{Grid, ScalarField};
use accreta_core::hj::{backtrack_curve, solve_attachment, AttachmentField, MetricField, Stencil};
use accreta_core::io;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::setup::{self, invalid, Loaded, Manifest};

const OK: u8 = 0;
const MAX_ITER: u8 = 3;

#[derive(Debug, Serialize, Deserialize)]
pub struct History {
    pub verdict: Verdict,
    pub tol: f64,
    pub relaxation: f64,
    pub representation_residual: Option<f64>,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub passed: bool,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
    pub report: RegularityReport,
}

pub fn validate(config: &Path) -> Result<u8> {
    let (config, base) = setup::read_config(config)?;
    let issues = config.validate(&base);
    let mut out = std::io::stdout().lock();
    for issue in &issues {
        writeln!(out, "{issue}")?;
    }
    if issues.iter().any(|i| i.severity == Severity::Error) {
        return Err(invalid(format!("{} error(s)", issues.iter().filter(|i| i.severity == Severity::Error).count())));
    }
    writeln!(out, "ok")?;
    Ok(OK)
}

fn check_grid(expected: &Grid<f64>, found: &Grid<f64>, path: &Path) -> Result<()> {
    if expected != found {
        return Err(invalid(format!("{}: grid differs from the configured grid", path.display())));
    }
    Ok(())
}

fn read_activation(path: &Path, grid: &Grid<f64>) -> Result<Vec<f64>> {
    let (field, _) = io::read_field::<f64>(path).with_context(|| format!("reading {}", path.display()))?;
    check_grid(grid, field.grid(), path)?;
    Ok((0..grid.len()).map(|i| field.get(i).unwrap_or(0.0)).collect())
}

fn solve_frozen(loaded: &Loaded, activation: Vec<f64>) -> Result<AttachmentField<f64>> {
    let p = &loaded.problem;
    let metric = MetricField::new(p.grid, p.evaluator.clone(), activation)?;
    Ok(solve_attachment(&p.domain, &metric, p.coupling.stencil_radius)?)
}

fn warn_frame(field: &AttachmentField<f64>, horizon: f64) {
    if touches_frame(field, horizon) {
        log::warn!("the grown set reaches the window frame before T = {horizon}; enlarge the window");
    }
}

fn write_curves(path: &Path, field: &AttachmentField<f64>, count: usize) -> Result<()> {
    let grid = field.v.grid();
    let dim = grid.dim();
    let nodes: Vec<usize> = field.v.iter().map(|(i, _)| i).collect();
    let mut text = String::from(if dim == 2 { "curve,k,x,y\n" } else { "curve,k,x,y,z\n" });
    for c in 0..count.min(nodes.len()) {
        let curve = backtrack_curve(field, nodes[c * nodes.len() / count])?;
        for (k, p) in curve.points(grid).iter().enumerate() {
            let coords: Vec<String> = p[..dim].iter().map(|x| x.to_string()).collect();
            text.push_str(&format!("{c},{k},{}\n", coords.join(",")));
        }
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn hj(config: &Path, out: &Path, activation: Option<&Path>, curves: usize) -> Result<u8> {
    let loaded = setup::load(config)?;
    let mut manifest = Manifest::new("hj", &loaded)?;
    let grid = loaded.problem.grid;
    let a = match activation {
        Some(path) => {
            manifest.input("activation", path);
            read_activation(path, &grid)?
        }
        None => vec![0.0; grid.len()],
    };
    let start = Instant::now();
    let field = solve_frozen(&loaded, a)?;
    manifest.timings.insert("hj".into(), start.elapsed().as_secs_f64());
    warn_frame(&field, loaded.problem.coupling.horizon);
    io::write_field(&out.join("v.csv"), &field.v, "v", None)?;
    if curves > 0 {
        write_curves(&out.join("curves.csv"), &field, curves)?;
    }
    manifest.write(out)?;
    Ok(OK)
}

/// Attachment field read back from disk; only the values are available.
fn field_from_values(loaded: &Loaded, v: ScalarField<f64>) -> Result<AttachmentField<f64>> {
    let p = &loaded.problem;
    let n = p.grid.len();
    Ok(AttachmentField {
        v,
        predecessor: vec![None; n],
        stencil: Stencil::new(p.grid.dim(), p.coupling.stencil_radius)?,
        sources: p.domain.v0.intersection(&p.domain.omega),
    })
}

fn solve_u(loaded: &Loaded, field: &AttachmentField<f64>) -> Result<TimeField<f64>> {
    let c = &loaded.problem.coupling;
    Ok(solve_on_growth(field, &loaded.problem.domain, c.horizon, c.samples, &c.poisson)?)
}

pub fn elliptic(config: &Path, v: &Path, out: &Path) -> Result<u8> {
    let loaded = setup::load(config)?;
    let mut manifest = Manifest::new("elliptic", &loaded)?;
    manifest.input("v", v);
    let (values, _) = io::read_field::<f64>(v).with_context(|| format!("reading {}", v.display()))?;
    check_grid(&loaded.problem.grid, values.grid(), v)?;
    let field = field_from_values(&loaded, values)?;
    let start = Instant::now();
    let u = solve_u(&loaded, &field)?;
    manifest.timings.insert("elliptic".into(), start.elapsed().as_secs_f64());
    io::write_series(&out.join("u"), &u.times, &u.slices, "u")?;
    setup::write_json(&out.join("elliptic.json"), &u.reports)?;
    manifest.write(out)?;
    Ok(OK)
}

pub fn convolve(config: &Path, u: &Path, out: &Path) -> Result<u8> {
    let loaded = setup::load(config)?;
    let mut manifest = Manifest::new("convolve", &loaded)?;
    manifest.input("u", u);
    let (times, slices) = io::read_series::<f64>(u).with_context(|| format!("reading {}", u.display()))?;
    check_grid(&loaded.problem.grid, slices[0].grid(), u)?;
    let tf = TimeField { grid: loaded.problem.grid, times, slices, reports: Vec::new() };
    let start = Instant::now();
    let ku = convolve_time_field(&tf, &loaded.problem.coupling.kernels)?;
    manifest.timings.insert("convolve".into(), start.elapsed().as_secs_f64());
    write_trace(&out.join("ku"), &ku)?;
    manifest.write(out)?;
    Ok(OK)
}

fn write_trace(dir: &Path, ku: &ActivationTrace<f64>) -> Result<()> {
    Ok(io::write_dense_series(dir, &ku.grid, &ku.times, &ku.values, "ku")?)
}

fn write_state(dir: &Path, state: &CoupledState<f64>, v_name: &str) -> Result<()> {
    let grid = state.attachment.v.grid();
    io::write_dense(&dir.join("activation.csv"), grid, &state.activation, "activation", None)?;
    io::write_field(&dir.join(v_name), &state.attachment.v, "v", None)?;
    io::write_series(&dir.join("u"), &state.time_field.times, &state.time_field.slices, "u")?;
    write_trace(&dir.join("ku"), &state.trace)
}

fn diagnostics(loaded: &Loaded, field: &AttachmentField<f64>) -> Result<Diagnostics> {
    let p = &loaded.problem;
    let (lo, hi) = (p.model.sigma_lower(), p.model.sigma_upper());
    let report = regularity_suite(&p.domain, field, lo, hi, &p.diagnostics)?;
    for c in report.failures() {
        log::warn!("check {} failed: {} > {} + {}", c.name, c.measured, c.bound, c.slack);
    }
    Ok(Diagnostics { passed: report.passed(), sigma_lower: lo, sigma_upper: hi, report })
}

pub fn couple(config: &Path, out: &Path, keep_iterations: bool) -> Result<u8> {
    let loaded = setup::load(config)?;
    let mut manifest = Manifest::new("couple", &loaded)?;
    let p = &loaded.problem;
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let outcome = run_observed(&p.domain, &p.evaluator, &p.coupling, |state| {
        if keep_iterations {
            let dir = out.join("iterations").join(format!("j_{:04}", state.iteration));
            write_state(&dir, state, "v.csv").map_err(|e| accreta_core::Error::InvalidArgument(format!("{e:#}")))?;
        }
        Ok(())
    })?;
    manifest.timings.insert("couple".into(), start.elapsed().as_secs_f64());
    let state = &outcome.state;
    warn_frame(&state.attachment, p.coupling.horizon);

    write_state(out, state, "v_final.csv")?;
    let history = History {
        verdict: outcome.verdict,
        tol: p.coupling.tol,
        relaxation: p.coupling.relaxation,
        representation_residual: outcome.representation_residual,
        records: state.history.clone(),
    };
    setup::write_json(&out.join("history.json"), &history)?;

    let start = Instant::now();
    let diag = diagnostics(&loaded, &state.attachment)?;
    manifest.timings.insert("diagnostics".into(), start.elapsed().as_secs_f64());
    setup::write_json(&out.join("diagnostics.json"), &diag)?;

    let verdict = serde_json::to_value(outcome.verdict)?;
    manifest.outcome = verdict.as_str().map(str::to_string);
    manifest.write(out)?;
    log::info!(
        "{:?} after {} iteration(s); diagnostics {}",
        outcome.verdict,
        state.history.len(),
        if diag.passed { "passed" } else { "FAILED" }
    );
    Ok(match outcome.verdict {
        Verdict::Converged => OK,
        Verdict::MaxIterReached => MAX_ITER,
    })
}

pub fn diagnose(run: &Path, out: Option<&Path>) -> Result<u8> {
    let loaded = setup::load(&run.join("manifest.json"))?;
    let grid = loaded.problem.grid;
    let activation = read_activation(&run.join("activation.csv"), &grid)?;
    let (stored, _) = io::read_field::<f64>(&run.join("v_final.csv"))?;
    check_grid(&grid, stored.grid(), &run.join("v_final.csv"))?;
    let field = solve_frozen(&loaded, activation)?;
    let same = field.v.support() == stored.support() && field.v.iter().all(|(i, v)| stored.get(i) == Some(v));
    if !same {
        return Err(invalid(format!("{}: v_final.csv is not the attachment field of activation.csv", run.display())));
    }
    let diag = diagnostics(&loaded, &field)?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| run.join("diagnostics.json"));
    setup::write_json(&path, &diag)?;
    let failed: Vec<String> = diag.report.failures().iter().map(|c| c.name.clone()).collect();
    println!("{} checks, {} failed{}", diag.report.checks.len(), failed.len(), if failed.is_empty() { String::new() } else { format!(": {}", failed.join(", ")) });
    Ok(OK)
}

