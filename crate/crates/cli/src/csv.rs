//! CSV artifacts. Every real is written as `{:.16e}` (17 significant
//! digits), rows end in `\n`.

use std::fmt::Write as _;

use isslab::gains::GainEntry;
use isslab::{Report, Trajectory};

pub fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn quoted(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn trajectory(traj: &Trajectory) -> String {
    let g = traj.grid();
    let two_d = g.dim() == 2;
    let mut out = String::from(if two_d { "t,x,y,u\n" } else { "t,x,u\n" });
    for (t, field) in traj.times().iter().zip(traj.fields()) {
        for (node, u) in field.values().iter().enumerate() {
            let (x, y) = g.coords(node);
            if two_d {
                let _ = writeln!(out, "{},{},{},{}", real(*t), real(x), real(y), real(*u));
            } else {
                let _ = writeln!(out, "{},{},{}", real(*t), real(x), real(*u));
            }
        }
    }
    out
}

/// One row per sample. `running` holds the running sups of `f` and `d`;
/// bound and margin come from the matching sample of `report` (NaN when
/// there is no report or no asserted bound).
pub fn supnorms(traj: &Trajectory, running: &[(f64, f64)], report: Option<&Report>) -> String {
    let mut out = String::from("t,sup_space,running_sup_f,running_sup_d,bound,margin\n");
    for (k, (t, field)) in traj.times().iter().zip(traj.fields()).enumerate() {
        let sup = field.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let (f, d) = running.get(k).copied().unwrap_or((f64::NAN, f64::NAN));
        let (bound, margin) = report
            .and_then(|r| r.details.get(k))
            .map_or((f64::NAN, f64::NAN), |s| (s.bound, s.margin));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            real(*t),
            real(sup),
            real(f),
            real(d),
            real(bound),
            real(margin)
        );
    }
    out
}

pub fn gains(entries: &[GainEntry]) -> String {
    let mut out = String::from("name,value,provenance\n");
    for e in entries {
        let _ = writeln!(out, "{},{},{}", quoted(&e.name), real(e.value), quoted(&e.provenance));
    }
    out
}

pub fn reports(reports: &[Report]) -> String {
    let mut out = String::from("check,verdict,worst_margin,witness_x,witness_t\n");
    for r in reports {
        let (x, t) = r.worst_location.map_or((f64::NAN, f64::NAN), |l| (l.x, l.t));
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            quoted(&r.check),
            r.verdict,
            real(r.worst_margin),
            real(x),
            real(t)
        );
    }
    out
}

/// `(t, value)` pairs under a two-column header.
pub fn series(header: &str, rows: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = format!("{header}\n");
    for (a, b) in rows {
        let _ = writeln!(out, "{},{}", real(a), real(b));
    }
    out
}
