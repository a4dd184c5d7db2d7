//! Command-line front end: one `cmd_*` function per subcommand, each turning a
//! [`RunConfig`] into a [`Report`].

use std::path::PathBuf;

use brace_forge::brace::{left_series, verify_brace, verify_odot, verify_pseudobrace, verify_ybe};
use brace_forge::corpus::{self, Built, Structure};
use brace_forge::flows::{self, FlowsContext};
use brace_forge::prelie::{self, extract_prelie, verify_prelie};
use brace_forge::props::{self, m_param};
use brace_forge::report::{self, Format, Report, Section, Status};
use brace_forge::{Brace, BraceKind, Budget, Error, PreLie, PullbackChoice};

pub const DEFAULT_DEPTH: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Props,
    Extract,
    Flows,
    Roundtrip,
    Corr,
    Gen,
    Info,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Props => "props",
            Command::Extract => "extract",
            Command::Flows => "flows",
            Command::Roundtrip => "roundtrip",
            Command::Corr => "corr",
            Command::Gen => "gen",
            Command::Info => "info",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Input {
    Gen(String),
    Path(PathBuf),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub input: Input,
    /// `None` means `min_k` of the input shape.
    pub k: Option<u32>,
    pub budget: Budget,
    pub choice: PullbackChoice,
    pub depth: usize,
    pub format: Format,
    /// Where `gen` and `extract` write the structure, if anywhere.
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command, input: Input) -> Self {
        RunConfig {
            command,
            input,
            k: None,
            budget: Budget::default(),
            choice: PullbackChoice::Canonical,
            depth: DEFAULT_DEPTH,
            format: Format::Human,
            out: None,
        }
    }
}

/// Outcome of a run: the report, or an input/usage error.
pub enum Outcome {
    Report(Report),
    Raw(String),
}

pub fn exit_code(result: &Result<Outcome, Error>) -> i32 {
    match result {
        Ok(Outcome::Report(r)) => {
            if r.passed() {
                0
            } else {
                1
            }
        }
        Ok(Outcome::Raw(_)) => 0,
        Err(e) if is_usage_error(e) => 2,
        Err(_) => 1,
    }
}

pub fn is_usage_error(e: &Error) -> bool {
    matches!(e, Error::Parse { .. } | Error::Registry(_) | Error::Version { .. } | Error::Spec(_) | Error::Io(_) | Error::Structural(_))
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, Error> {
    match cfg.command {
        Command::Verify => cmd_verify(cfg).map(Outcome::Report),
        Command::Props => cmd_props(cfg).map(Outcome::Report),
        Command::Extract => cmd_extract(cfg).map(Outcome::Report),
        Command::Flows => cmd_flows(cfg).map(Outcome::Report),
        Command::Roundtrip => cmd_roundtrip(cfg).map(Outcome::Report),
        Command::Corr => cmd_corr(cfg).map(Outcome::Report),
        Command::Gen => cmd_gen(cfg),
        Command::Info => cmd_info(cfg).map(Outcome::Report),
    }
}

fn load(cfg: &RunConfig) -> Result<Structure, Error> {
    match &cfg.input {
        Input::Gen(spec) => Ok(match corpus::from_spec(spec)? {
            Built::Brace(b) => Structure::Brace(b),
            Built::PreLie(p) => Structure::PreLie(p),
        }),
        Input::Path(p) => corpus::load(p),
    }
}

fn load_brace(cfg: &RunConfig) -> Result<Brace, Error> {
    match load(cfg)? {
        Structure::Brace(b) => Ok(b),
        Structure::PreLie(_) => Err(Error::Spec(format!("`{}` needs a brace input", cfg.command.name()))),
    }
}

fn shape_k(cfg: &RunConfig, shape: &brace_forge::GroupShape) -> u32 {
    cfg.k.unwrap_or_else(|| shape.min_k())
}

/// The header every report carries, so a run can be repeated from it.
fn header(cfg: &RunConfig, k: Option<u32>) -> Report {
    let mut r = Report::new(cfg.command.name());
    match &cfg.input {
        Input::Gen(s) => r.config("gen", s),
        Input::Path(p) => r.config("in", p.display()),
    }
    if let Some(k) = k {
        r.config("k", k);
    }
    r.config("budget", cfg.budget.exhaustive);
    r.config("samples", cfg.budget.samples);
    r.config("seed", cfg.budget.seed);
    r.config("choice", cfg.choice);
    r.config("depth", cfg.depth);
    r
}

fn error_section(name: &str, e: &Error) -> Section {
    let status = if e.is_critical() { Status::Critical } else { Status::Fail };
    Section::new(name, status).field("error", e)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Report, Error> {
    let mut r = header(cfg, None);
    match load(cfg)? {
        Structure::Brace(b) => {
            r.config("shape", b.shape());
            let rep = if b.kind() == BraceKind::Brace { verify_brace(&b, &cfg.budget) } else { verify_pseudobrace(&b, &cfg.budget) };
            r.push(report::brace_section(b.kind().as_str(), &rep));
            if rep.passed && b.kind() == BraceKind::Brace {
                match verify_ybe(&b, &cfg.budget) {
                    Ok(y) => r.push(report::ybe_section(&y)),
                    Err(e) => r.push(error_section("ybe", &e)),
                }
            }
        }
        Structure::PreLie(p) => {
            r.config("shape", p.shape());
            r.push(report::prelie_section("prelie", &verify_prelie(&p, &cfg.budget)));
        }
    }
    Ok(r)
}

pub fn cmd_props(cfg: &RunConfig) -> Result<Report, Error> {
    match load(cfg)? {
        Structure::Brace(b) => {
            let k = shape_k(cfg, b.shape());
            let mut r = header(cfg, Some(k));
            r.config("shape", b.shape());
            r.extend(report::lattice_sections(&props::implication_lattice(&b, k, &cfg.budget)));
            Ok(r)
        }
        Structure::PreLie(p) => {
            let mut r = header(cfg, None);
            r.config("shape", p.shape());
            r.push(report::property_section(&props::check_property3(&p, &cfg.budget)));
            let s = Section::new("nilpotency", Status::Info)
                .opt("left", prelie::left_nilpotency_index(&p))
                .opt("strong", prelie::strong_nilpotency_index(&p));
            r.push(s);
            Ok(r)
        }
    }
}

fn extracted(cfg: &RunConfig, b: &Brace, k: u32, r: &mut Report) -> Option<PreLie> {
    match extract_prelie(b, k, cfg.choice, &cfg.budget) {
        Ok(p) => Some(p),
        Err(e) => {
            r.push(error_section("extract", &e));
            None
        }
    }
}

pub fn cmd_extract(cfg: &RunConfig) -> Result<Report, Error> {
    let b = load_brace(cfg)?;
    let k = shape_k(cfg, b.shape());
    let mut r = header(cfg, Some(k));
    r.config("shape", b.shape());
    if let Some(p) = extracted(cfg, &b, k, &mut r) {
        r.push(Section::new("extract", Status::Pass).field("shape", p.shape()).field("provenance", &p.meta().provenance));
        let mut v = report::prelie_section("prelie", &verify_prelie(&p, &cfg.budget));
        if v.status != Status::Pass {
            v.status = Status::Critical;
        }
        r.push(v);
        r.push(report::property_section(&props::check_property3(&p, &cfg.budget)));
        if let Some(out) = &cfg.out {
            corpus::save(&Structure::PreLie(p), out)?;
            r.push(Section::new("output", Status::Pass).field("path", out.display()));
        }
    }
    Ok(r)
}

pub fn cmd_flows(cfg: &RunConfig) -> Result<Report, Error> {
    let (pl, mut r) = match load(cfg)? {
        Structure::PreLie(p) => {
            let mut r = header(cfg, None);
            r.config("shape", p.shape());
            (Some(p), r)
        }
        Structure::Brace(b) => {
            let k = shape_k(cfg, b.shape());
            let mut r = header(cfg, Some(k));
            r.config("shape", b.shape());
            (extracted(cfg, &b, k, &mut r), r)
        }
    };
    let Some(pl) = pl else { return Ok(r) };
    let ctx = match FlowsContext::new(&pl, cfg.choice) {
        Ok(c) => std::sync::Arc::new(c),
        Err(e) => {
            r.push(error_section("flows.context", &e));
            return Ok(r);
        }
    };
    r.push(
        Section::new("flows.context", Status::Pass)
            .field("regime", ctx.regime())
            .field("j_max", ctx.j_max())
            .field("left_index", ctx.left_index())
            .field("m", ctx.m()),
    );
    match flows::flows_circ(ctx) {
        Ok(fb) => r.extend(report::flows_sections(&flows::verify_flows(&fb, &cfg.budget))),
        Err(e) => r.push(error_section("flows.circ", &e)),
    }
    Ok(r)
}

pub fn cmd_roundtrip(cfg: &RunConfig) -> Result<Report, Error> {
    let b = load_brace(cfg)?;
    let k = shape_k(cfg, b.shape());
    let mut r = header(cfg, Some(k));
    r.config("shape", b.shape());
    match flows::verify_roundtrip(&b, k, cfg.choice, &cfg.budget) {
        Ok(rt) => {
            r.push(report::roundtrip_section(&rt));
            if cfg.format == Format::Human {
                r.extend(report::stage_sections(&rt));
            }
        }
        Err(e) => r.push(error_section("roundtrip", &e)),
    }
    Ok(r)
}

pub fn cmd_corr(cfg: &RunConfig) -> Result<Report, Error> {
    let b = load_brace(cfg)?;
    let k = shape_k(cfg, b.shape());
    let mut r = header(cfg, Some(k));
    r.config("shape", b.shape());
    match brace_forge::corr::verify_corr(&b, k, cfg.choice, cfg.depth, &cfg.budget) {
        Ok(c) => r.extend(report::corr_sections(&c)),
        Err(e) => r.push(error_section("corr", &e)),
    }
    Ok(r)
}

/// Writes the structure to `--out`, or returns its JSON for standard output.
pub fn cmd_gen(cfg: &RunConfig) -> Result<Outcome, Error> {
    let s = load(cfg)?;
    match &cfg.out {
        Some(path) => {
            corpus::save(&s, path)?;
            let mut r = header(cfg, None);
            r.push(Section::new("output", Status::Pass).field("path", path.display()));
            Ok(Outcome::Report(r))
        }
        None => Ok(Outcome::Raw(corpus::to_json_string(&s)?)),
    }
}

pub fn cmd_info(cfg: &RunConfig) -> Result<Report, Error> {
    let mut r = header(cfg, None);
    let (shape, s) = match load(cfg)? {
        Structure::Brace(b) => {
            let series = left_series(&b, &cfg.budget);
            let orders: Vec<String> = series.orders().iter().map(|o| o.to_string()).collect();
            let s = Section::new("structure", Status::Info)
                .field("kind", b.kind().as_str())
                .field("backing", b.backing_label())
                .field("provenance", &b.meta().provenance)
                .field("left_series.orders", orders.join(","))
                .field("left_series.mode", series.mode);
            (b.shape().clone(), s)
        }
        Structure::PreLie(p) => {
            let s = Section::new("structure", Status::Info)
                .field("kind", "prelie")
                .field("provenance", &p.meta().provenance)
                .opt("left_nilpotency", prelie::left_nilpotency_index(&p))
                .opt("strong_nilpotency", prelie::strong_nilpotency_index(&p));
            (p.shape().clone(), s)
        }
    };
    r.push(
        s.field("shape", &shape)
            .field("order", shape.order())
            .field("p", shape.p())
            .field("n", shape.n())
            .field("uniform", shape.is_uniform())
            .field("min_k", shape.min_k())
            .field("m", m_param(shape.p())),
    );
    Ok(r)
}

/// Checks `⊙` across the canonical and three offset pullbacks.
pub fn odot_report(cfg: &RunConfig) -> Result<Report, Error> {
    let b = load_brace(cfg)?;
    let k = shape_k(cfg, b.shape());
    let mut r = header(cfg, Some(k));
    let seed = cfg.budget.seed;
    let choices = [PullbackChoice::Canonical, PullbackChoice::offset(seed + 1), PullbackChoice::offset(seed + 2), PullbackChoice::offset(seed + 3)];
    match verify_odot(&b, k, &choices, &cfg.budget) {
        Ok(o) => r.push(report::odot_section(&o)),
        Err(e) => r.push(error_section("odot", &e)),
    }
    Ok(r)
}
