//! Subcommand orchestration and file output.
//!
//! CSV files carry a header row and fixed column order; floats are written
//! with 17 significant digits so identical configurations give identical
//! bytes.
//!
//! | file | columns |
//! |------|---------|
//! | `reference.csv` | `k,y1,y2` (`y2` empty for the last five rows) |
//! | `trajectory.csv` | `k,t,x1..x6,u1,u2,ubar1,ubar2` (inputs empty at `k = N`) |
//! | `simulation.csv` | `k,t,x1..x6` |
//! | `plot.csv` | `k,t,series,value` |

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::beam_model::{CraneModel, CraneState, ForceInput};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::flat_param::{check_submersivity, reference_regularity, FlatReference};
use crate::ltv_canonical::RANK_RATIO_TOL;
use crate::planner_ff::{feedforward, plan_reference, rollout, FeedforwardResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Plan,
    Ff,
    Simulate,
    Check,
    ExportPlot,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] = [
        Subcommand::Plan,
        Subcommand::Ff,
        Subcommand::Simulate,
        Subcommand::Check,
        Subcommand::ExportPlot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Plan => "plan",
            Subcommand::Ff => "ff",
            Subcommand::Simulate => "simulate",
            Subcommand::Check => "check",
            Subcommand::ExportPlot => "export-plot",
        }
    }
}

impl std::str::FromStr for Subcommand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::invalid("subcommand", format!("unknown `{s}`")))
    }
}

/// Files written and a JSON summary for the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: Subcommand,
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvOut {
    fn create(path: PathBuf, header: &[&str]) -> Result<Self> {
        let writer = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        let mut out = Self { path, writer };
        out.row(header.iter().map(|s| s.to_string()))?;
        Ok(out)
    }

    fn row(&mut self, cells: impl IntoIterator<Item = String>) -> Result<()> {
        let cells: Vec<String> = cells.into_iter().collect();
        self.writer
            .write_record(&cells)
            .map_err(|e| csv_error(&self.path, e))
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv {
            path: path.display().to_string(),
            message: format!("{other:?}"),
        },
    }
}

fn write_json(path: PathBuf, value: &Value) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn config_echo(cfg: &ExperimentConfig) -> Value {
    serde_json::to_value(cfg).expect("configuration always serializes")
}

fn write_reference(dir: &Path, r: &FlatReference) -> Result<PathBuf> {
    let mut out = CsvOut::create(dir.join("reference.csv"), &["k", "y1", "y2"])?;
    for (k, y1) in r.y1().iter().enumerate() {
        let y2 = r.y2().get(k).map(|&v| fmt_float(v)).unwrap_or_default();
        out.row([k.to_string(), fmt_float(*y1), y2])?;
    }
    out.finish()
}

fn state_cells(x: &CraneState) -> impl Iterator<Item = String> + '_ {
    x.0.iter().map(|&v| fmt_float(v))
}

fn write_trajectory(dir: &Path, ff: &FeedforwardResult, ts: f64) -> Result<PathBuf> {
    let header = [
        "k", "t", "x1", "x2", "x3", "x4", "x5", "x6", "u1", "u2", "ubar1", "ubar2",
    ];
    let mut out = CsvOut::create(dir.join("trajectory.csv"), &header)?;
    for (k, x) in ff.x_d.iter().enumerate() {
        let mut cells = vec![k.to_string(), fmt_float(k as f64 * ts)];
        cells.extend(state_cells(x));
        match (ff.u_d.get(k), ff.ubar_d.get(k)) {
            (Some(u), Some(ub)) => {
                cells.extend(u.0.iter().chain(ub.0.iter()).map(|&v| fmt_float(v)))
            }
            _ => cells.extend(std::iter::repeat_n(String::new(), 4)),
        }
        out.row(cells)?;
    }
    out.finish()
}

fn write_states(path: PathBuf, xs: &[CraneState], ts: f64) -> Result<PathBuf> {
    let header = ["k", "t", "x1", "x2", "x3", "x4", "x5", "x6"];
    let mut out = CsvOut::create(path, &header)?;
    for (k, x) in xs.iter().enumerate() {
        let mut cells = vec![k.to_string(), fmt_float(k as f64 * ts)];
        cells.extend(state_cells(x));
        out.row(cells)?;
    }
    out.finish()
}

fn write_plot(dir: &Path, r: &FlatReference, ff: &FeedforwardResult, ts: f64) -> Result<PathBuf> {
    let mut out = CsvOut::create(dir.join("plot.csv"), &["k", "t", "series", "value"])?;
    let n = r.horizon();
    let mut series = |name: &str, values: &mut dyn Iterator<Item = f64>| -> Result<()> {
        for (k, v) in values.enumerate() {
            out.row([
                k.to_string(),
                fmt_float(k as f64 * ts),
                name.to_string(),
                fmt_float(v),
            ])?;
        }
        Ok(())
    };
    series("y1", &mut r.y1()[..=n].iter().copied())?;
    series("y2", &mut r.y2()[..=n].iter().copied())?;
    for i in 0..6 {
        series(&format!("x{}", i + 1), &mut ff.x_d.iter().map(|x| x.0[i]))?;
    }
    for i in 0..2 {
        series(&format!("u{}", i + 1), &mut ff.u_d.iter().map(|u| u.0[i]))?;
    }
    for i in 0..2 {
        series(
            &format!("ubar{}", i + 1),
            &mut ff.ubar_d.iter().map(|u| u.0[i]),
        )?;
    }
    out.finish()
}

/// Reads `u1,u2` columns; rows with empty inputs are skipped.
pub fn read_inputs(path: &Path) -> Result<Vec<ForceInput>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv {
                path: path.display().to_string(),
                message: format!("missing column `{name}`"),
            })
    };
    let (i1, i2) = (column("u1")?, column("u2")?);
    let mut inputs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let cell = |i: usize| record.get(i).unwrap_or("").trim();
        if cell(i1).is_empty() && cell(i2).is_empty() {
            continue;
        }
        let parse = |i: usize| {
            cell(i).parse::<f64>().map_err(|e| Error::Csv {
                path: path.display().to_string(),
                message: format!("row {}: {e}", line + 2),
            })
        };
        inputs.push(ForceInput::new(parse(i1)?, parse(i2)?));
    }
    Ok(inputs)
}

fn diagnostics_json(ff: &FeedforwardResult, cfg: &ExperimentConfig) -> Value {
    let d = &ff.diagnostics;
    json!({
        "max_open_loop_dev": d.max_open_loop_dev,
        "relative_open_loop_dev": d.relative_dev(),
        "state_scale": d.scale,
        "min_sv_Mk": d.min_sv_mk,
        "min_sv_ratio": d.min_sv_ratio,
        "rank_failures": d.rank_failures,
        "rest_force_error": d.rest_force_error,
        "config_echo": config_echo(cfg),
    })
}

fn goal_error(cfg: &ExperimentConfig, x: &CraneState) -> f64 {
    (x.0 - cfg.plan.goal.state().0).amax()
}

struct Planned {
    model: CraneModel,
    reference: FlatReference,
}

fn plan(cfg: &ExperimentConfig) -> Result<Planned> {
    let model = cfg.model()?;
    let reference = plan_reference(&model, &cfg.plan_spec())?;
    log::info!(
        "planned N = {} from {:?} to {:?}",
        reference.horizon(),
        cfg.plan.start,
        cfg.plan.goal
    );
    Ok(Planned { model, reference })
}

/// Runs one subcommand and writes its artifacts into `out`
/// (default: the configured output directory).
pub fn run_subcommand(
    command: Subcommand,
    cfg: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<RunReport> {
    let dir = out.unwrap_or(&cfg.output.dir);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ts = cfg.params.ts;
    let mut files = Vec::new();
    let summary = match command {
        Subcommand::Plan => {
            let p = plan(cfg)?;
            files.push(write_reference(dir, &p.reference)?);
            json!({ "N": p.reference.horizon() })
        }
        Subcommand::Ff => {
            let p = plan(cfg)?;
            let ff = feedforward(&p.model, &p.reference)?;
            files.push(write_reference(dir, &p.reference)?);
            files.push(write_trajectory(dir, &ff, ts)?);
            let diag = diagnostics_json(&ff, cfg);
            files.push(write_json(dir.join("diagnostics.json"), &diag)?);
            let rel = ff.diagnostics.relative_dev();
            if !(rel <= cfg.tolerances.open_loop_rel) {
                return Err(Error::Consistency {
                    what: "open-loop reproduction",
                    residual: rel,
                    tolerance: cfg.tolerances.open_loop_rel,
                });
            }
            let mut s = diag;
            s.as_object_mut().map(|m| m.remove("config_echo"));
            s
        }
        Subcommand::Simulate => {
            let model = cfg.model()?;
            let x0 = cfg
                .simulate
                .x0
                .map(|x| CraneState::new(x[0], x[1], x[2], x[3], x[4], x[5]))
                .unwrap_or_else(|| cfg.plan.start.state());
            let us = match &cfg.simulate.u_csv {
                Some(path) => read_inputs(path)?,
                None => {
                    let p = plan(cfg)?;
                    feedforward(&p.model, &p.reference)?.u_d
                }
            };
            let xs = rollout(&model, &x0, &us)?;
            files.push(write_states(dir.join("simulation.csv"), &xs, ts)?);
            let last = xs[xs.len() - 1];
            let goal = goal_error(cfg, &last);
            log::info!("simulated {} steps, goal error {goal:.3e}", us.len());
            json!({
                "steps": us.len(),
                "final_state": last.0.as_slice(),
                "goal_error": goal,
                "goal_reached": goal <= cfg.tolerances.final_state,
            })
        }
        Subcommand::Check => {
            let p = plan(cfg)?;
            let reg = reference_regularity(&p.model, &p.reference)?;
            let ff = feedforward(&p.model, &p.reference)?;
            let mut sub_failures = Vec::new();
            let mut min_rank = 6;
            let mut min_ratio = f64::INFINITY;
            for (k, (x, u)) in ff.x_d.iter().zip(&ff.u_d).enumerate() {
                let s = check_submersivity(&p.model, x, u).map_err(|e| e.at_step(k as i64))?;
                min_rank = min_rank.min(s.rank);
                min_ratio = min_ratio.min(s.singular_values[5] / s.singular_values[0]);
                if s.rank < 6 {
                    sub_failures.push(k);
                }
            }
            let report = json!({
                "regularity": {
                    "steps": reg.entries.len(),
                    "all_full_rank": reg.all_full_rank(),
                    "min_sv_Mk": reg.min_sigma(),
                    "min_sv_ratio": reg.min_ratio(),
                    "rank_failures": reg.rank_failures(),
                },
                "submersivity": {
                    "steps": ff.u_d.len(),
                    "min_rank": min_rank,
                    "min_sv_ratio": min_ratio,
                    "rank_failures": sub_failures,
                },
                "config_echo": config_echo(cfg),
            });
            files.push(write_json(dir.join("check.json"), &report)?);
            if !reg.all_full_rank() || !sub_failures.is_empty() {
                return Err(Error::Consistency {
                    what: "rank check",
                    residual: reg.min_ratio().min(min_ratio),
                    tolerance: RANK_RATIO_TOL,
                });
            }
            let mut s = report;
            s.as_object_mut().map(|m| m.remove("config_echo"));
            s
        }
        Subcommand::ExportPlot => {
            let p = plan(cfg)?;
            let ff = feedforward(&p.model, &p.reference)?;
            files.push(write_plot(dir, &p.reference, &ff, ts)?);
            json!({ "N": p.reference.horizon(), "series": 14 })
        }
    };
    Ok(RunReport {
        command,
        files,
        summary,
    })
}
