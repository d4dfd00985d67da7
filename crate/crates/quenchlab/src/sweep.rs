//! Parameter sweeps: cartesian product of overrides, run in parallel with
//! per-row error isolation.

use std::path::Path;

use rayon::prelude::*;

use crate::config::{Scenario, SweepAxis};
use crate::lab::{prepare, verify, LabError, Prepared, Simulation, Verification};
use crate::output::{num, write_run};

pub const THREADS_ENV: &str = "QUENCHLAB_THREADS";

/// One point of the product: the override values and the derived scenario.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub values: Vec<(SweepAxis, f64)>,
    pub scenario: Scenario,
}

/// Expands the sweep axes. No axes, or any empty axis, yields no points.
pub fn expand(base: &Scenario) -> Vec<GridPoint> {
    let axes = &base.sweep.axes;
    if axes.is_empty() || axes.iter().any(|(_, v)| v.is_empty()) {
        return Vec::new();
    }
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    (0..total)
        .map(|index| {
            let mut rest = index;
            let mut values = Vec::with_capacity(axes.len());
            // last axis varies fastest
            for (axis, vals) in axes.iter().rev() {
                values.push((*axis, vals[rest % vals.len()]));
                rest /= vals.len();
            }
            values.reverse();
            let mut scenario = base.clone();
            for (axis, v) in &values {
                scenario = scenario.with_override(*axis, *v);
            }
            scenario.name = format!("{}-{index:04}", base.name);
            scenario.sweep.axes.clear();
            GridPoint { values, scenario }
        })
        .collect()
}

#[derive(Debug)]
pub struct RowOutcome {
    pub prepared: Prepared,
    pub simulation: Simulation,
    pub verification: Verification,
}

#[derive(Debug)]
pub struct Row {
    pub point: GridPoint,
    pub outcome: Result<RowOutcome, LabError>,
}

pub fn run_scenario(s: &Scenario) -> Result<RowOutcome, LabError> {
    let prepared = prepare(s)?;
    let simulation = prepared.simulate()?;
    let verification = verify(&prepared, &simulation);
    Ok(RowOutcome {
        prepared,
        simulation,
        verification,
    })
}

/// Thread count from `QUENCHLAB_THREADS`; `None` means the rayon default.
pub fn threads_from_env() -> Result<Option<usize>, LabError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(LabError::Invalid(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

/// Runs every grid point. Rows come back in grid order whatever the thread
/// count, and a failing row does not abort the others.
pub fn run_sweep(
    base: &Scenario,
    threads: Option<usize>,
    out: Option<&Path>,
) -> Result<Vec<Row>, LabError> {
    let points = expand(base);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| LabError::Invalid(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        points
            .into_par_iter()
            .map(|point| {
                let outcome = run_scenario(&point.scenario).and_then(|o| {
                    if let Some(dir) = out {
                        write_run(dir, &o.prepared, &o.simulation, &o.verification)?;
                    }
                    Ok(o)
                });
                Row { point, outcome }
            })
            .collect()
    });
    Ok(rows)
}

pub fn table_header(base: &Scenario) -> String {
    let mut cols: Vec<&str> = vec!["name"];
    cols.extend(base.sweep.axes.iter().map(|(a, _)| a.as_str()));
    cols.extend([
        "psi0",
        "T_lower",
        "tstar",
        "tstar_low",
        "tstar_high",
        "T0",
        "Tbar",
        "verdict",
        "sandwich",
        "tstar_over_T",
        "T0_over_tstar",
        "error",
    ]);
    cols.join(",")
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

pub fn table_csv(base: &Scenario, rows: &[Row]) -> String {
    let mut out = table_header(base);
    out.push('\n');
    for row in rows {
        let mut cells = vec![row.point.scenario.name.clone()];
        cells.extend(row.point.values.iter().map(|(_, v)| num(*v)));
        match &row.outcome {
            Ok(o) => {
                let r = &o.prepared.report;
                let ts = o.simulation.tstar;
                let tstar = ts.map(|e| e.tstar);
                cells.extend([
                    num(o.prepared.psi0),
                    cell(r.t_lower),
                    cell(tstar),
                    cell(ts.map(|e| e.low)),
                    cell(ts.map(|e| e.high)),
                    cell(r.t0_upper),
                    cell(r.tbar_upper),
                    o.simulation.traj.verdict.as_str().to_string(),
                    o.verification.sandwich.as_str().to_string(),
                    cell(tstar.zip(r.t_lower).map(|(t, l)| t / l)),
                    cell(r.t0_upper.zip(tstar).map(|(u, t)| u / t)),
                    String::new(),
                ]);
            }
            Err(e) => {
                cells.extend((0..11).map(|_| String::new()));
                let msg = e.to_string().replace(['\n', ','], " ");
                cells.push(format!("\"{}\"", msg.replace('"', "'")));
            }
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
