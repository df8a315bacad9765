use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// Hypotheses of the bound do not hold; nothing was asserted.
    NotAsserted,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotAsserted => "not-asserted",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Location {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

/// One bound evaluation: `margin = bound - observed`, passing when
/// `margin >= -tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMargin {
    pub location: Location,
    pub observed: f64,
    pub bound: f64,
    pub tol: f64,
    pub margin: f64,
}

impl SampleMargin {
    pub fn new(location: Location, observed: f64, bound: f64, tol: f64) -> Self {
        SampleMargin {
            location,
            observed,
            bound,
            tol,
            margin: bound - observed,
        }
    }

    pub fn passes(&self) -> bool {
        self.margin >= -self.tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub check: String,
    pub verdict: Verdict,
    /// Smallest `bound - observed` over all samples.
    pub worst_margin: f64,
    /// Where the worst margin occurs; for failures, the worst violation.
    pub worst_location: Option<Location>,
    pub samples_checked: usize,
    pub details: Vec<SampleMargin>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn from_samples(check: impl Into<String>, details: Vec<SampleMargin>) -> Self {
        let failing = details.iter().any(|s| !s.passes());
        let worst_margin = details.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
        let worst = if failing {
            details
                .iter()
                .min_by(|a, b| (a.margin + a.tol).total_cmp(&(b.margin + b.tol)))
        } else {
            details.iter().min_by(|a, b| a.margin.total_cmp(&b.margin))
        };
        Report {
            check: check.into(),
            verdict: if failing { Verdict::Fail } else { Verdict::Pass },
            worst_margin,
            worst_location: worst.map(|s| s.location),
            samples_checked: details.len(),
            details,
            notes: Vec::new(),
        }
    }

    /// Raw observations without an asserted bound; `bound` entries are NaN.
    pub fn not_asserted(
        check: impl Into<String>,
        reason: impl Into<String>,
        observations: Vec<(Location, f64)>,
    ) -> Self {
        let details: Vec<SampleMargin> = observations
            .into_iter()
            .map(|(location, observed)| SampleMargin {
                location,
                observed,
                bound: f64::NAN,
                tol: f64::NAN,
                margin: f64::NAN,
            })
            .collect();
        Report {
            check: check.into(),
            verdict: Verdict::NotAsserted,
            worst_margin: f64::NAN,
            worst_location: None,
            samples_checked: details.len(),
            details,
            notes: vec![reason.into()],
        }
    }

    /// Combines sub-reports: fail beats pass beats not-asserted.
    pub fn merge(check: impl Into<String>, parts: Vec<Report>) -> Self {
        let mut out = Report {
            check: check.into(),
            verdict: Verdict::NotAsserted,
            worst_margin: f64::INFINITY,
            worst_location: None,
            samples_checked: 0,
            details: Vec::new(),
            notes: Vec::new(),
        };
        let asserted: Vec<&Report> = parts.iter().filter(|r| r.verdict != Verdict::NotAsserted).collect();
        if !asserted.is_empty() {
            let any_fail = asserted.iter().any(|r| r.verdict == Verdict::Fail);
            out.verdict = if any_fail { Verdict::Fail } else { Verdict::Pass };
            let pick = asserted
                .iter()
                .filter(|r| !any_fail || r.verdict == Verdict::Fail)
                .min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))
                .expect("non-empty");
            out.worst_location = pick.worst_location;
            out.worst_margin = asserted.iter().map(|r| r.worst_margin).fold(f64::INFINITY, f64::min);
        } else {
            out.worst_margin = f64::NAN;
        }
        for r in parts {
            out.samples_checked += r.samples_checked;
            out.notes
                .extend(r.notes.into_iter().map(|n| format!("{}: {n}", r.check)));
            out.details.extend(r.details);
        }
        out
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Slack for comparing simulated norms with analytic bounds:
/// `1e-6 (1 + bound) + 10 (h^2 + dt^2)`, or a fixed user value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub h: f64,
    pub dt: f64,
    pub fixed: Option<f64>,
}

impl Tolerance {
    pub fn rule(h: f64, dt: f64) -> Self {
        Tolerance { h, dt, fixed: None }
    }

    pub fn fixed(value: f64) -> Self {
        Tolerance {
            h: 0.0,
            dt: 0.0,
            fixed: Some(value),
        }
    }

    pub fn at(&self, bound: f64) -> f64 {
        match self.fixed {
            Some(v) => v,
            None => 1e-6 * (1.0 + bound.abs()) + 10.0 * (self.h * self.h + self.dt * self.dt),
        }
    }
}
