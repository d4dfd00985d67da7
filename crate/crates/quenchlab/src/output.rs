//! Trajectory CSV, JSON summary, bound tables and SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use quenchlab_core::evolution::{Trajectory, TstarEstimate};
use serde_json::{json, Map, Value};

use crate::lab::{Prepared, Simulation, Verification};

pub const CSV_HEADER: &str = "t,phi,phi1,phi2,psi,psi1,psi2,sup_u,sup_v,min_u,min_v,dt";

/// Shortest round-trip representation, so files are reproducible bit for bit.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else if x.is_nan() {
        String::from("nan")
    } else if x > 0.0 {
        String::from("inf")
    } else {
        String::from("-inf")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.samples.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let row = [
            s.t, s.f.phi, s.f.phi1, s.f.phi2, s.f.psi, s.f.psi1, s.f.psi2, s.sup_u, s.sup_v,
            s.min_u, s.min_v, s.dt,
        ];
        let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn jnum(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn jopt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, jnum)
}

fn tstar_json(est: Option<&TstarEstimate>) -> Value {
    match est {
        Some(e) => json!({
            "value": jnum(e.tstar),
            "low": jnum(e.low),
            "high": jnum(e.high),
            "crossing": jnum(e.crossing),
            "stderr": jnum(e.stderr),
            "samples_used": e.samples_used,
        }),
        None => json!({"value": null, "low": null, "high": null}),
    }
}

pub fn sobolev_json(prep: &Prepared) -> Value {
    let mut m = Map::new();
    for e in &prep.sobolev {
        m.insert(format!("{}", e.r), jnum(e.s));
    }
    Value::Object(m)
}

/// The bound-related part of the summary, shared by `bounds` and `verify`.
pub fn bounds_json(prep: &Prepared) -> Value {
    let r = &prep.report;
    let k = &r.constants;
    json!({
        "scenario": prep.scenario.name,
        "lambda1": jnum(prep.eig.lambda1),
        "S": sobolev_json(prep),
        "phi0": jnum(prep.phi0),
        "psi0": jnum(prep.psi0),
        "amplitude_factor": jnum(prep.amplitude_factor),
        "constants": {
            "A": jnum(k.a),
            "B": jnum(k.b),
            "Atilde": jopt(k.atilde),
            "K": jnum(k.k),
            "c": jnum(k.c),
            "cbar": jnum(k.cbar),
            "delta": jnum(k.delta),
            "Q": jnum(k.q_const),
            "theta": jnum(k.theta),
        },
        "bounds": {
            "T": jopt(r.t_lower),
            "Ttilde": jopt(r.t_tilde),
            "T0": jopt(r.t0_upper),
            "Tbar": jopt(r.tbar_upper),
        },
        "h": {
            "eta_m": jopt(r.eta_m),
            "root": jopt(r.h_root),
            "positive_at_psi0": r.flags.h_positive_at_psi0,
            "positive_on_ray": r.flags.h_positive_on_ray,
        },
        "corollary_threshold": jopt(r.corollary_threshold),
        "upper_applicable": r.upper_applicable,
        "lower_applicable": prep.lower_applicable,
        "diagnostics": r.diagnostics.iter().chain(&prep.diagnostics).collect::<Vec<_>>(),
    })
}

pub fn summary_json(prep: &Prepared, sim: &Simulation, ver: &Verification) -> Value {
    let mut v = bounds_json(prep);
    let obj = v.as_object_mut().expect("object");
    obj.insert(String::from("tstar"), tstar_json(sim.tstar.as_ref()));
    obj.insert(
        String::from("tstar_phi"),
        tstar_json(sim.tstar_phi.as_ref()),
    );
    let mut verdicts = Map::new();
    verdicts.insert(String::from("run"), json!(sim.traj.verdict.as_str()));
    for (name, c) in ver.entries() {
        verdicts.insert(name.to_string(), json!(c.as_str()));
    }
    verdicts.insert(
        String::from("left_nonnegative"),
        json!(ver.left_nonnegative),
    );
    obj.insert(String::from("verdicts"), Value::Object(verdicts));
    obj.insert(
        String::from("run"),
        json!({
            "horizon": jnum(prep.run_horizon),
            "reached": jnum(sim.traj.last().t),
            "steps": sim.traj.samples.len() - 1,
            "rejected_steps": sim.traj.rejected_steps,
            "factorizations": sim.traj.factorizations,
            "remark1_worst": jnum(ver.remark1_worst),
            "majorant_worst": jnum(ver.majorant_worst),
        }),
    );
    obj.insert(String::from("notes"), json!(ver.notes));
    v
}

pub fn bounds_text(prep: &Prepared) -> String {
    let r = &prep.report;
    let k = &r.constants;
    let rows: Vec<(String, String)> = [
        ("scenario", prep.scenario.name.clone()),
        ("lambda1", num(prep.eig.lambda1)),
        ("phi0", num(prep.phi0)),
        ("psi0", num(prep.psi0)),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b))
    .chain(
        prep.sobolev
            .iter()
            .map(|e| (format!("S({})", e.r), num(e.s))),
    )
    .chain(
        [
            ("A", num(k.a)),
            ("B", num(k.b)),
            ("Atilde", opt_num(k.atilde)),
            ("K", num(k.k)),
            ("c", num(k.c)),
            ("cbar", num(k.cbar)),
            ("delta", num(k.delta)),
            ("Q", num(k.q_const)),
            ("theta", num(k.theta)),
            ("T", opt_num(r.t_lower)),
            ("Ttilde", opt_num(r.t_tilde)),
            ("T0", opt_num(r.t0_upper)),
            ("Tbar", opt_num(r.tbar_upper)),
            ("eta_m", opt_num(r.eta_m)),
            ("h_root", opt_num(r.h_root)),
            ("threshold", opt_num(r.corollary_threshold)),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b)),
    )
    .collect();
    let width = rows
        .iter()
        .map(|(a, _)| a.chars().count())
        .max()
        .unwrap_or(0);
    let mut out = String::new();
    for (a, b) in rows {
        let b = if b.is_empty() { String::from("-") } else { b };
        let _ = writeln!(out, "{a:<width$}  {b}");
    }
    for d in r.diagnostics.iter().chain(&prep.diagnostics) {
        let _ = writeln!(out, "note: {d}");
    }
    out
}

/// Vertical marker on a plot.
pub struct Marker<'a> {
    pub label: &'a str,
    pub t: f64,
    pub color: &'a str,
}

/// Line plot of `(t, y)` with a logarithmic y axis. Markers beyond the data
/// range are pinned to the right edge and labelled with their value.
pub fn svg_plot(title: &str, ylabel: &str, data: &[(f64, f64)], markers: &[Marker]) -> String {
    let (w, h) = (720.0, 440.0);
    let (left, right, top, bottom) = (80.0, 30.0, 40.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let pts: Vec<(f64, f64)> = data
        .iter()
        .copied()
        .filter(|(_, y)| *y > 0.0 && y.is_finite())
        .collect();
    let t_max = data
        .iter()
        .map(|d| d.0)
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let (mut lo, mut hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, y)| {
            (a.min(y.log10()), b.max(y.log10()))
        });
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    lo = lo.floor();
    hi = hi.ceil().max(lo + 1.0);
    let sx = |t: f64| left + pw * (t / t_max).clamp(0.0, 1.0);
    let sy = |y: f64| top + ph * (1.0 - (y.log10() - lo) / (hi - lo));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        w / 2.0,
        esc(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let mut e = lo as i64;
    while e as f64 <= hi {
        let y = sy(10f64.powi(e as i32));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
        e += 1;
    }
    for i in 0..=4 {
        let t = t_max * i as f64 / 4.0;
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            top + ph + 18.0,
            short(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#,
        left + pw / 2.0,
        h - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        esc(ylabel)
    );
    if !pts.is_empty() {
        let path: Vec<String> = pts
            .iter()
            .map(|(t, y)| format!("{:.2},{:.2}", sx(*t), sy(*y)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline fill="none" stroke="#1f4e9c" stroke-width="1.6" points="{}"/>"##,
            path.join(" ")
        );
    }
    for (i, m) in markers.iter().enumerate() {
        if !m.t.is_finite() || m.t < 0.0 {
            continue;
        }
        let x = sx(m.t);
        let outside = m.t > t_max;
        let label = if outside {
            format!("{} = {} →", m.label, short(m.t))
        } else {
            format!("{} = {}", m.label, short(m.t))
        };
        let ly = top + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{}" stroke="{}" stroke-dasharray="5,3"/><text x="{:.2}" y="{ly:.2}" text-anchor="end" fill="{}">{}</text>"#,
            top + ph,
            m.color,
            x - 4.0,
            m.color,
            esc(&label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn short(x: f64) -> String {
    format!("{x:.3e}")
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn markers(prep: &Prepared, sim: &Simulation) -> Vec<(&'static str, f64, &'static str)> {
    let r = &prep.report;
    let mut m = Vec::new();
    if let Some(t) = r.t_lower {
        m.push(("T", t, "#2a8a2a"));
    }
    if let Some(e) = &sim.tstar {
        m.push(("t*", e.tstar, "#b03030"));
    }
    if let Some(t) = r.t0_upper {
        m.push(("T0", t, "#7a3fa0"));
    }
    if let Some(t) = r.tbar_upper {
        m.push(("Tbar", t, "#b07a00"));
    }
    m
}

/// Writes the enabled outputs of a run into `dir/<scenario name>/`.
pub fn write_run(
    dir: &Path,
    prep: &Prepared,
    sim: &Simulation,
    ver: &Verification,
) -> std::io::Result<PathBuf> {
    let out = dir.join(&prep.scenario.name);
    std::fs::create_dir_all(&out)?;
    let o = &prep.scenario.run.outputs;
    if o.csv {
        std::fs::write(out.join("trajectory.csv"), trajectory_csv(&sim.traj))?;
    }
    if o.json {
        let mut text =
            serde_json::to_string_pretty(&summary_json(prep, sim, ver)).expect("serializable");
        text.push('\n');
        std::fs::write(out.join("summary.json"), text)?;
    }
    if o.svg {
        let ms = markers(prep, sim);
        let ms: Vec<Marker> = ms
            .iter()
            .map(|(l, t, c)| Marker {
                label: l,
                t: *t,
                color: c,
            })
            .collect();
        let title = &prep.scenario.name;
        std::fs::write(
            out.join("phi.svg"),
            svg_plot(&format!("{title}: Φ(t)"), "Φ", &sim.traj.phi_series(), &ms),
        )?;
        std::fs::write(
            out.join("psi.svg"),
            svg_plot(&format!("{title}: Ψ(t)"), "Ψ", &sim.traj.psi_series(), &ms),
        )?;
    }
    Ok(out)
}
