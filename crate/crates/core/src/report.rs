//! Human-readable and line-oriented `key=value` renderings of check results.
//!
//! Machine output never contains timings, so equal inputs render byte-identically.

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use crate::brace::{BraceReport, OdotReport, YbeReport};
use crate::budget::Mode;
use crate::corr::{CorrCheck, CorrReport};
use crate::error::Error;
use crate::flows::{FlowsReport, OdotEqualityReport, RoundTripReport};
use crate::prelie::PreLieReport;
use crate::props::{Lattice, PropertyReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass,
    /// Informational: a property that may legitimately fail.
    Info,
    Skipped,
    Fail,
    Critical,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Info => "info",
            Status::Skipped => "skipped",
            Status::Fail => "fail",
            Status::Critical => "critical",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Human,
    Machine,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "human" => Ok(Format::Human),
            "machine" => Ok(Format::Machine),
            _ => Err(Error::Spec(format!("unknown format `{s}` (expected human or machine)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Section {
    pub name: String,
    pub status: Status,
    pub fields: Vec<(String, String)>,
    pub elapsed: Option<Duration>,
}

impl Section {
    pub fn new(name: impl Into<String>, status: Status) -> Self {
        Section { name: name.into(), status, fields: Vec::new(), elapsed: None }
    }

    pub fn pass_if(name: impl Into<String>, ok: bool) -> Self {
        Section::new(name, if ok { Status::Pass } else { Status::Fail })
    }

    pub fn field(mut self, key: impl Into<String>, value: impl fmt::Display) -> Self {
        self.fields.push((key.into(), value.to_string()));
        self
    }

    pub fn opt(self, key: &str, value: Option<impl fmt::Display>) -> Self {
        match value {
            Some(v) => self.field(key, v),
            None => self,
        }
    }

    pub fn elapsed(mut self, d: Duration) -> Self {
        self.elapsed = Some(d);
        self
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub config: Vec<(String, String)>,
    pub sections: Vec<Section>,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report { command: command.into(), config: Vec::new(), sections: Vec::new() }
    }

    pub fn config(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        self.config.push((key.into(), value.to_string()));
    }

    pub fn push(&mut self, s: Section) {
        self.sections.push(s);
    }

    pub fn extend(&mut self, s: impl IntoIterator<Item = Section>) {
        self.sections.extend(s);
    }

    /// The worst status among sections, ignoring informational ones.
    pub fn status(&self) -> Status {
        self.sections.iter().map(|s| s.status).filter(|s| *s != Status::Info && *s != Status::Skipped).max().unwrap_or(Status::Pass)
    }

    pub fn passed(&self) -> bool {
        self.status() == Status::Pass
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Human => self.human(),
            Format::Machine => self.machine(),
        }
    }

    fn human(&self) -> String {
        let mut out = format!("brace-forge {}\n", self.command);
        for (k, v) in &self.config {
            out += &format!("  {k}: {v}\n");
        }
        for s in &self.sections {
            let tag = match s.status {
                Status::Pass => "PASS",
                Status::Info => "INFO",
                Status::Skipped => "SKIP",
                Status::Fail => "FAIL",
                Status::Critical => "CRITICAL",
            };
            out += &format!("[{tag}] {}", s.name);
            if let Some(d) = s.elapsed {
                out += &format!(" ({:.3}s)", d.as_secs_f64());
            }
            out.push('\n');
            for (k, v) in &s.fields {
                out += &format!("    {k}: {v}\n");
            }
        }
        out += &format!("result: {}\n", self.status().to_string().to_uppercase());
        out
    }

    fn machine(&self) -> String {
        let mut out = format!("command={}\n", escape(&self.command));
        for (k, v) in &self.config {
            out += &format!("config.{}={}\n", key(k), escape(v));
        }
        for s in &self.sections {
            let name = key(&s.name);
            out += &format!("{name}.status={}\n", s.status);
            for (k, v) in &s.fields {
                out += &format!("{name}.{}={}\n", key(k), escape(v));
            }
        }
        out += &format!("status={}\n", self.status());
        out
    }
}

fn key(s: &str) -> String {
    let mut k: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' { c.to_ascii_lowercase() } else if c == '\'' { 'p' } else { '_' })
        .collect();
    while k.contains("__") {
        k = k.replace("__", "_");
    }
    k.trim_matches('_').to_string()
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('\n', "\\n")
}

pub fn brace_section(name: &str, r: &BraceReport) -> Section {
    let mut s = Section::pass_if(name, r.passed).field("mode", r.mode).field("seed", r.seed);
    for (check, mode) in &r.checks {
        s = s.field(format!("check.{check}"), mode);
    }
    if !r.skipped.is_empty() {
        s = s.field("skipped", r.skipped.join(","));
    }
    s = s.field("left_series.orders", join(&r.series_orders)).field("left_series.length", r.series_length);
    s.opt("witness", r.witness())
}

pub fn prelie_section(name: &str, r: &PreLieReport) -> Section {
    let mut s = Section::pass_if(name, r.passed).field("mode", r.mode).field("seed", r.seed);
    for (check, mode) in &r.checks {
        s = s.field(format!("check.{check}"), mode);
    }
    s.opt("left_nilpotency", r.left_nilpotency).opt("witness", r.failures.first())
}

/// Properties are informational: failing one is a finding, not an error.
/// A `critical` entry (a criterion holding while its conclusion fails) is.
pub fn property_section(r: &PropertyReport) -> Section {
    let status = if r.critical.is_some() { Status::Critical } else { Status::Info };
    let mut s = Section::new(format!("property.{}", r.id), status).field("holds", r.holds).field("mode", r.mode);
    for (k, v) in &r.params {
        s = s.field(k.clone(), v);
    }
    s.opt("witness", r.witness.as_ref()).opt("critical", r.critical.as_ref())
}

pub fn lattice_sections(l: &Lattice) -> Vec<Section> {
    let mut out: Vec<Section> = l.reports.iter().map(property_section).collect();
    let mut s = Section::new("implications", if l.violations.is_empty() { Status::Pass } else { Status::Critical })
        .field("k", l.k)
        .field("violations", l.violations.len());
    for (i, v) in l.violations.iter().enumerate() {
        s = s.field(format!("violation.{i}"), v);
    }
    out.push(s);
    out
}

pub fn odot_section(r: &OdotReport) -> Section {
    let choices: Vec<String> = r.choices.iter().map(|c| c.to_string()).collect();
    Section::pass_if("odot", r.holds())
        .field("k", r.k)
        .field("quotient_order", r.quotient_order)
        .field("preconditions", r.preconditions)
        .field("representative_independent", r.representative_independent)
        .field("choice_independent", r.choice_independent)
        .field("choices", choices.join(","))
        .field("mode", r.mode)
        .opt("witness", r.witness.as_ref())
}

pub fn ybe_section(r: &YbeReport) -> Section {
    Section::pass_if("ybe", r.holds())
        .field("involutive", r.involutive)
        .field("braid", r.braid)
        .field("mode", r.mode)
        .opt("witness", r.witness.as_ref())
}

fn critical_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Critical
    }
}

pub fn flows_sections(r: &FlowsReport) -> Vec<Section> {
    let mut out = vec![brace_section("flows.pseudobrace", &r.pseudobrace)];
    if !r.pseudobrace.passed {
        out[0].status = Status::Critical;
    }
    out.push(
        Section::new("flows.omega", critical_if(r.omega.holds()))
            .field("bijective", r.omega.bijective)
            .field("cycles_ok", r.omega.cycles_ok)
            .field("cycles", r.omega.cycles)
            .field("longest_cycle", r.omega.longest_cycle)
            .field("mode", r.omega.mode)
            .opt("witness", r.omega.witness.as_ref()),
    );
    let t = &r.truncation;
    out.push(
        Section::new("flows.truncation", critical_if(t.holds))
            .field("rows", format!("{}..={}", t.rows.0, t.rows.1))
            .field("skipped", join(&t.skipped))
            .field("mode", t.mode)
            .opt("witness", t.witness.as_ref()),
    );
    for p in &r.properties {
        let mut s = property_section(p);
        s.name = format!("flows.{}", s.name);
        s.status = critical_if(p.holds && p.critical.is_none());
        out.push(s);
    }
    out.push(mode_section("flows.w_powers", &r.w_powers, Status::Critical));
    out
}

pub fn mode_section(name: &str, r: &std::result::Result<Mode, String>, bad: Status) -> Section {
    match r {
        Ok(m) => Section::new(name, Status::Pass).field("mode", m),
        Err(w) => Section::new(name, bad).field("witness", w),
    }
}

pub fn roundtrip_section(r: &RoundTripReport) -> Section {
    let mut s = Section::new("roundtrip", critical_if(r.equal))
        .field("k", r.k)
        .field("choice", r.choice)
        .field("regime", r.regime)
        .field("extracted", &r.extracted)
        .field("quotient", &r.quotient)
        .field("pairs", r.pairs)
        .field("mode", r.mode)
        .opt("witness", r.witness.as_ref());
    let total: Duration = r.stages.iter().map(|st| st.elapsed).sum();
    for st in &r.stages {
        if let Some(m) = st.mode {
            s = s.field(format!("stage.{}.mode", st.name), m);
        }
    }
    s.elapsed(total)
}

pub fn stage_sections(r: &RoundTripReport) -> Vec<Section> {
    r.stages
        .iter()
        .map(|st| Section::new(format!("stage.{}", st.name), Status::Pass).opt("mode", st.mode).elapsed(st.elapsed))
        .collect()
}

pub fn odot_equality_section(r: &OdotEqualityReport) -> Section {
    Section::new("odot_equality", critical_if(r.equal))
        .field("pairs", r.pairs)
        .field("mode", r.mode)
        .opt("witness", r.witness.as_ref())
}

fn check_section(prefix: &str, c: &CorrCheck) -> Section {
    let mut s = mode_section(&format!("{prefix}.{}", c.id), &c.outcome, Status::Critical);
    s.fields.insert(0, ("claim".into(), c.name.clone()));
    s
}

pub fn corr_sections(r: &CorrReport) -> Vec<Section> {
    let w = &r.wazny;
    let mut out = vec![Section::new("corr.wazny", critical_if(w.holds))
        .field("k", w.k)
        .field("j_cap", r.j_cap)
        .field("pairs", w.pairs)
        .field("mode", w.mode)
        .opt("witness", w.witness.as_ref())];
    out.push(match &r.fstar {
        Ok(f) => Section::new("corr.fstar_odot", critical_if(f.holds))
            .field("depth", f.depth)
            .field("quotient_order", f.quotient_order)
            .field("mode", f.mode)
            .opt("witness", f.witness.as_ref()),
        Err(e) => Section::new("corr.fstar_odot", Status::Skipped).field("reason", e),
    });
    out.push(match &r.g {
        Ok((order, cycles, longest)) => Section::new("corr.g", Status::Pass)
            .field("quotient_order", order)
            .field("cycles", cycles)
            .field("longest_cycle", longest),
        Err(e) if e.starts_with("CRITICAL") => Section::new("corr.g", Status::Critical).field("witness", e),
        Err(e) => Section::new("corr.g", Status::Skipped).field("reason", e),
    });
    out.extend(r.checks.iter().map(|c| check_section("corr", c)));
    out
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machine_format_is_flat_and_stable() {
        let mut r = Report::new("verify");
        r.config("gen", "trivial:p=7,exps=2");
        r.push(Section::new("brace axioms", Status::Pass).field("mode", "exhaustive").field("note", "a\nb").elapsed(Duration::from_secs(3)));
        r.push(Section::new("property.P1''", Status::Info).field("holds", false));
        let m = r.render(Format::Machine);
        assert_eq!(
            m,
            "command=verify\nconfig.gen=trivial:p=7,exps=2\nbrace_axioms.status=pass\nbrace_axioms.mode=exhaustive\n\
             brace_axioms.note=a\\nb\nproperty.p1pp.status=info\nproperty.p1pp.holds=false\nstatus=pass\n"
        );
        assert!(r.render(Format::Human).contains("(3.000s)"));
        assert!(!m.contains("3.000"));
    }

    #[test]
    fn worst_status_wins() {
        let mut r = Report::new("x");
        r.push(Section::new("a", Status::Pass));
        r.push(Section::new("b", Status::Info));
        assert!(r.passed());
        r.push(Section::new("c", Status::Fail));
        r.push(Section::new("d", Status::Critical));
        assert_eq!(r.status(), Status::Critical);
    }
}
