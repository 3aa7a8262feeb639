//! Command-line front end for `pconvex`.
//!
//! Exit codes: 0 success, 1 verification violation, 2 input or runtime error,
//! 3 requested route not certified.

pub mod args;
pub mod output;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use pconvex::conditions::check_subadditive;
use pconvex::{
    audit_all, certify, check_lower_bound, survey, Certificate, Generator, GeneratorError, Grid2, GridError,
    MeasureError, MeasureSpace, Method, Modulus, ModulusError, ModulusTable, OracleError, ParanormContext,
    ParanormError, UcRoute,
};
use thiserror::Error;

use args::{AuditArgs, BallArgs, CertifyArgs, Cli, Command, Format, ModulusArgs, Output, Points, Space, VerifyArgs};
use output::{
    coords, fmt17, sig, strings, to_csv, to_json, BallOut, CaseOut, CertificateOut, ConditionOut, ModulusOut, Report,
    Sig17, VerifyOut,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_ROUTE: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Route(String),
    #[error("{0}")]
    Violation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Runtime(_) => EXIT_INPUT,
            CliError::Route(_) => EXIT_ROUTE,
            CliError::Violation(_) => EXIT_VIOLATION,
        }
    }
}

impl From<GeneratorError> for CliError {
    fn from(e: GeneratorError) -> Self {
        CliError::Input(format!("generator: {e}"))
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        CliError::Input(format!("weights: {e}"))
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Input(format!("grid: {e}"))
    }
}

impl From<ModulusError> for CliError {
    fn from(e: ModulusError) -> Self {
        match e {
            ModulusError::NotStrictlyConvex { .. } | ModulusError::WrongGenerator { .. } => {
                CliError::Route(e.to_string())
            }
            ModulusError::OutOfDomain { .. }
            | ModulusError::TransformedOutOfDomain { .. }
            | ModulusError::Generator(_) => CliError::Input(e.to_string()),
            ModulusError::OutOfRange { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Modulus(m) => m.into(),
            OracleError::OutOfDomain { .. } | OracleError::EmptyArc { .. } => CliError::Input(e.to_string()),
            OracleError::Revalidation { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ParanormError> for CliError {
    fn from(e: ParanormError) -> Self {
        match e {
            ParanormError::NotPlanar { .. } | ParanormError::TooFewPoints { .. } | ParanormError::BadRadius { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

/// A finished command: the report bytes, its exit code and any messages for stderr.
#[derive(Debug)]
pub struct Outcome {
    pub report: Vec<u8>,
    pub code: u8,
    pub messages: Vec<String>,
}

/// Parses `args`, runs the command, writes the report and returns the exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let out = output_of(&cli.command).out.clone();
    match run(&cli.command) {
        Ok(outcome) => {
            for m in &outcome.messages {
                eprintln!("pconvex: {m}");
            }
            let written = match &out {
                Some(path) => std::fs::write(path, &outcome.report).map_err(|e| format!("{}: {e}", path.display())),
                None => std::io::stdout().write_all(&outcome.report).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => outcome.code,
                Err(e) => {
                    eprintln!("pconvex: cannot write report: {e}");
                    EXIT_INPUT
                }
            }
        }
        Err(e) => {
            eprintln!("pconvex: {e}");
            e.exit_code()
        }
    }
}

fn output_of(cmd: &Command) -> &Output {
    match cmd {
        Command::Audit(a) => &a.output,
        Command::Certify(a) => &a.output,
        Command::Modulus(a) => &a.output,
        Command::Verify(a) => &a.output,
        Command::Ball(a) => &a.output,
    }
}

pub fn run(cmd: &Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Audit(a) => cmd_audit(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Modulus(a) => cmd_modulus(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Ball(a) => cmd_ball(a),
    }
}

type Echo = BTreeMap<&'static str, String>;

fn echo(command: &str, format: Format) -> Echo {
    let mut e = Echo::new();
    e.insert("command", command.to_string());
    e.insert("format", format.to_string());
    e
}

fn grid_for(g: &Generator, text: Option<&str>) -> Result<Grid2, CliError> {
    Ok(match text {
        Some(t) => t.parse::<Grid2>()?.capped_for(g),
        None => Grid2::default_for(g),
    })
}

struct Loaded {
    g: Generator,
    space: MeasureSpace,
    grid: Grid2,
}

fn load(space: &Space, echo: &mut Echo) -> Result<Loaded, CliError> {
    let g = Generator::from_spec_str(&space.phi)?;
    let m: MeasureSpace = space.weights.parse()?;
    let grid = grid_for(&g, space.grid.as_deref())?;
    echo.insert("phi", space.phi.clone());
    echo.insert("generator", g.to_string());
    echo.insert("weights", m.to_string());
    echo.insert("grid", grid.to_string());
    Ok(Loaded { g, space: m, grid })
}

fn echo_points(points: &Points, echo: &mut Echo) -> Vec<(f64, f64)> {
    echo.insert("r", points.r.text.clone());
    match &points.eps {
        Some(e) => echo.insert("eps", e.text.clone()),
        None => echo.insert("eps_frac", points.eps_frac.text.clone()),
    };
    points.pairs()
}

fn finish<T: serde::Serialize>(
    format: Format,
    report: Report<T>,
    csv: impl FnOnce(&[T]) -> (Vec<String>, Vec<Vec<String>>),
) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => to_json(&report).map_err(|e| CliError::Runtime(e.to_string())),
        Format::Csv => {
            let (header, rows) = csv(&report.results);
            to_csv(&header, &rows).map_err(|e| CliError::Runtime(e.to_string()))
        }
    }
}

fn report<T: serde::Serialize>(config_echo: Echo, results: Vec<T>) -> Report<T> {
    Report {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_echo,
        results,
        summary: None,
        warnings: Vec::new(),
    }
}

fn condition_csv(rows: &[ConditionOut], with_kind: Option<&str>) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = strings(&[
        "name",
        "verdict",
        "margin",
        "rel_margin",
        "evaluated",
        "skipped",
        "witness",
    ]);
    if with_kind.is_some() {
        header.insert(0, "kind".into());
    }
    let body = rows
        .iter()
        .map(|c| {
            let mut row = vec![
                c.name.clone(),
                c.verdict.to_string(),
                fmt17(c.margin.0),
                fmt17(c.rel_margin.0),
                c.evaluated.to_string(),
                c.skipped.to_string(),
                c.witness
                    .as_ref()
                    .map(|w| coords(&w.point.iter().map(|s| s.0).collect::<Vec<_>>()))
                    .unwrap_or_default(),
            ];
            if let Some(kind) = with_kind {
                row.insert(0, kind.to_string());
            }
            row
        })
        .collect();
    (header, body)
}

fn cmd_audit(a: &AuditArgs) -> Result<Outcome, CliError> {
    let mut e = echo("audit", a.output.format);
    let g = Generator::from_spec_str(&a.phi)?;
    let grid = grid_for(&g, a.grid.as_deref())?;
    e.insert("phi", a.phi.clone());
    e.insert("generator", g.to_string());
    e.insert("grid", grid.to_string());
    let results: Vec<ConditionOut> = audit_all(&g, &grid).iter().map(ConditionOut::from).collect();
    let bytes = finish(a.output.format, report(e, results), |r| condition_csv(r, None))?;
    Ok(Outcome {
        report: bytes,
        code: EXIT_OK,
        messages: Vec::new(),
    })
}

fn certificate_out(c: &Certificate) -> CertificateOut {
    CertificateOut {
        generator: c.generator.clone(),
        weights: sig(&c.weights),
        case: CaseOut {
            label: c.case.label(),
            sub_probability: c.case.sub_probability,
            counting_like: c.case.counting_like,
            integer_weights: c.case.integer_weights,
            total_mass: Sig17(c.case.total_mass),
        },
        paranorm_routes: c.paranorm_routes.iter().map(|r| r.as_str()).collect(),
        uc_routes: c.uc_routes.iter().map(|r| r.as_str()).collect(),
        grid: c.grid.to_string(),
        grid_audited: c.grid_audited,
        notes: c.notes.clone(),
        evidence: c.reports.iter().map(ConditionOut::from).collect(),
    }
}

fn cmd_certify(a: &CertifyArgs) -> Result<Outcome, CliError> {
    let mut e = echo("certify", a.output.format);
    let l = load(&a.space, &mut e)?;
    let cert = certify(&l.g, &l.space, &l.grid);
    let results = vec![certificate_out(&cert)];
    let bytes = finish(a.output.format, report(e, results), |r| {
        let c = &r[0];
        let (mut header, mut rows) = condition_csv(&c.evidence, Some("condition"));
        header[1] = "name".into();
        let route = |kind: &str, name: &str| {
            let mut row = vec![kind.to_string(), name.to_string(), "applies".to_string()];
            row.resize(header.len(), String::new());
            row
        };
        let mut routes: Vec<Vec<String>> = c.paranorm_routes.iter().map(|n| route("paranorm_route", n)).collect();
        routes.extend(c.uc_routes.iter().map(|n| route("uc_route", n)));
        routes.append(&mut rows);
        (header, routes)
    })?;
    Ok(Outcome {
        report: bytes,
        code: EXIT_OK,
        messages: Vec::new(),
    })
}

/// Certification state for modulus selection.
struct Routes<'a> {
    g: &'a Generator,
    cert: Certificate,
    allow: bool,
    warnings: Vec<String>,
}

impl<'a> Routes<'a> {
    fn new(l: &'a Loaded, allow: bool) -> Self {
        Routes {
            g: &l.g,
            cert: certify(&l.g, &l.space, &l.grid),
            allow,
            warnings: Vec::new(),
        }
    }

    fn failing(&self) -> String {
        let bad: Vec<String> = self
            .cert
            .reports
            .iter()
            .filter(|r| !r.holds())
            .map(|r| format!("{} {}", r.name, r.verdict.as_str()))
            .collect();
        if bad.is_empty() {
            String::new()
        } else {
            format!(" ({})", bad.join(", "))
        }
    }

    fn missing(&mut self, method: Method, what: &str) -> Result<(), CliError> {
        let msg = format!(
            "method {method} requires {what}, which is not certified for {} on weights {:?}{}",
            self.g,
            self.cert.weights,
            self.failing()
        );
        if self.allow {
            self.warnings.push(format!("uncertified: {msg}"));
            Ok(())
        } else {
            Err(CliError::Route(msg))
        }
    }

    fn need(&mut self, method: Method, route: UcRoute) -> Result<(), CliError> {
        if !self.cert.has_paranorm_route() {
            self.missing(method, "a paranorm route (Lemma1-F-concave or Lemma3-Mulholland)")?;
        }
        if !self.cert.has_uc_route(route) {
            self.missing(method, &format!("route {}", route.as_str()))?;
        }
        Ok(())
    }

    fn modulus(&mut self, method: Method, grid: &Grid2) -> Result<Modulus, CliError> {
        match method {
            Method::EA => {
                self.need(method, UcRoute::Superquadratic)?;
                Ok(Modulus::EA(self.g.clone()))
            }
            Method::EF => {
                self.need(method, UcRoute::ImplicitModulus)?;
                Ok(Modulus::implicit(self.g.clone(), grid)?)
            }
            Method::Thm5 => {
                self.need(method, UcRoute::ExactExp)?;
                Ok(Modulus::thm5_for(self.g, &self.cert.weights)?)
            }
            Method::Clarkson => {
                let m = Modulus::clarkson_for(self.g)?;
                self.need(method, UcRoute::Superquadratic)?;
                Ok(m)
            }
            Method::Psi => Err(CliError::Input(
                "psi-transform needs --psi and is resolved separately".into(),
            )),
        }
    }

    /// The first certified of thm5, eA, eF; None when only strict convexity holds.
    fn auto(&mut self, grid: &Grid2) -> Result<Option<Modulus>, CliError> {
        let c = &self.cert;
        if c.has_paranorm_route() {
            for (route, method) in [
                (UcRoute::ExactExp, Method::Thm5),
                (UcRoute::Superquadratic, Method::EA),
                (UcRoute::ImplicitModulus, Method::EF),
            ] {
                if c.has_uc_route(route) {
                    return self.modulus(method, grid).map(Some);
                }
            }
            if c.has_uc_route(UcRoute::StrictConvexity) {
                self.warnings
                    .push("no modulus formula applies (Thm11-strict-convexity only); reporting empirical delta".into());
                return Ok(None);
            }
        }
        Err(CliError::Route(format!(
            "no uniform-convexity route is certified for {} on weights {:?}{}",
            self.g,
            c.weights,
            self.failing()
        )))
    }
}

fn parse_method(text: &str) -> Result<Method, CliError> {
    text.parse().map_err(CliError::Input)
}

fn cmd_modulus(a: &ModulusArgs) -> Result<Outcome, CliError> {
    let mut e = echo("modulus", a.output.format);
    let l = load(&a.space, &mut e)?;
    let pts = echo_points(&a.points, &mut e);
    let method = parse_method(&a.method)?;
    e.insert("method", method.to_string());
    e.insert("allow_uncertified", a.allow_uncertified.to_string());
    let mut routes = Routes::new(&l, a.allow_uncertified);
    let modulus = if method == Method::Psi {
        let psi_text = a
            .psi
            .as_deref()
            .ok_or_else(|| CliError::Input("--method psi needs --psi".into()))?;
        let psi = Generator::from_spec_str(psi_text)?;
        let base = parse_method(&a.base)?;
        if base == Method::Psi {
            return Err(CliError::Input("--base cannot itself be psi".into()));
        }
        e.insert("psi", psi_text.to_string());
        e.insert("base", base.to_string());
        let sub = check_subadditive(&psi, &Grid2::default_for(&psi));
        if !sub.holds() {
            routes.missing(
                Method::Psi,
                &format!(
                    "a subadditive transform (subadditive {} for {psi})",
                    sub.verdict.as_str()
                ),
            )?;
        }
        Modulus::Psi {
            base: Box::new(routes.modulus(base, &l.grid)?),
            psi,
        }
    } else {
        routes.modulus(method, &l.grid)?
    };
    let table = ModulusTable::build(&modulus, &pts)?;
    let mut rep = report(e, table.rows.iter().map(ModulusOut::from).collect());
    rep.warnings = routes.warnings.clone();
    let bytes = finish(a.output.format, rep, |rows| {
        let header = strings(&["r", "eps", "method", "delta", "residual"]);
        let body = rows
            .iter()
            .map(|m| {
                vec![
                    fmt17(m.r.0),
                    fmt17(m.eps.0),
                    m.method.to_string(),
                    fmt17(m.delta.0),
                    m.residual.map(|s| fmt17(s.0)).unwrap_or_default(),
                ]
            })
            .collect();
        (header, body)
    })?;
    Ok(Outcome {
        report: bytes,
        code: EXIT_OK,
        messages: routes.warnings,
    })
}

fn cmd_verify(a: &VerifyArgs) -> Result<Outcome, CliError> {
    let mut e = echo("verify", a.output.format);
    let l = load(&a.space, &mut e)?;
    let pts = echo_points(&a.points, &mut e);
    e.insert("samples", a.samples.to_string());
    e.insert("seed", a.seed.to_string());
    e.insert("allow_uncertified", a.allow_uncertified.to_string());
    if a.corrupt_delta != 1.0 {
        e.insert("corrupt_delta", fmt17(a.corrupt_delta));
    }
    let mut routes = Routes::new(&l, a.allow_uncertified);
    let modulus = match a.method.as_deref() {
        Some(text) => {
            let m = parse_method(text)?;
            if m == Method::Psi {
                return Err(CliError::Input(
                    "psi-transform tables are available from `modulus` only".into(),
                ));
            }
            Some(routes.modulus(m, &l.grid)?)
        }
        None => routes.auto(&l.grid)?,
    };
    e.insert(
        "method",
        modulus.as_ref().map_or("empirical".into(), |m| m.method().to_string()),
    );
    let ctx = ParanormContext::new(l.g.clone(), l.space.clone());
    let lb = match &modulus {
        Some(m) => check_lower_bound(&ctx, m, &pts, a.samples, a.seed, a.corrupt_delta)?,
        None => survey(&ctx, &pts, a.samples, a.seed)?,
    };
    let mut summary = BTreeMap::new();
    summary.insert("violations", lb.violations.into());
    summary.insert("low_coverage_points", lb.low_coverage_points.into());
    summary.insert("points", lb.rows.len().into());
    let mut rep = report(e, lb.rows.iter().map(VerifyOut::from).collect());
    rep.summary = Some(summary);
    rep.warnings = routes.warnings.clone();
    if lb.low_coverage_points > 0 {
        rep.warnings.push(format!(
            "{} grid points had fewer than 100 feasible pairs",
            lb.low_coverage_points
        ));
    }
    let mut messages = rep.warnings.clone();
    let k = l.space.dim();
    let bytes = finish(a.output.format, rep, |rows| {
        let mut header = strings(&["r", "eps", "delta_theory", "delta_empirical", "violation_flag"]);
        header.extend((1..=k).map(|i| format!("x{i}")));
        header.extend((1..=k).map(|i| format!("y{i}")));
        let body = rows
            .iter()
            .map(|v| {
                let mut row = vec![
                    fmt17(v.r.0),
                    fmt17(v.eps.0),
                    fmt17(v.delta_theory.0),
                    fmt17(v.delta_empirical.0),
                    u8::from(v.violation).to_string(),
                ];
                for coords in [&v.x, &v.y] {
                    row.extend((0..k).map(|i| coords.get(i).map(|s| fmt17(s.0)).unwrap_or_default()));
                }
                row
            })
            .collect();
        (header, body)
    })?;
    let code = if lb.violations > 0 {
        messages.push(format!(
            "{} of {} grid points violate the lower bound",
            lb.violations,
            lb.rows.len()
        ));
        EXIT_VIOLATION
    } else {
        EXIT_OK
    };
    Ok(Outcome {
        report: bytes,
        code,
        messages,
    })
}

/// Largest |p(reflection) − r| over the axis (and, for equal weights, diagonal) reflections.
fn symmetry_defect(ctx: &ParanormContext, pts: &[[f64; 2]], r: f64, diagonals: bool) -> f64 {
    let mut worst = 0.0f64;
    for &[a, b] in pts {
        let mut images = vec![[-a, b], [a, -b], [-a, -b]];
        if diagonals {
            images.extend([[b, a], [-b, -a]]);
        }
        for im in images {
            worst = worst.max((ctx.p(&im) - r).abs());
        }
    }
    worst
}

/// Smallest cross product of consecutive edges of the closed polygon, scaled by r².
fn min_turn(pts: &[[f64; 2]], r: f64) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (p, q, s) = (pts[i], pts[(i + 1) % n], pts[(i + 2) % n]);
            let (u, v) = ([q[0] - p[0], q[1] - p[1]], [s[0] - q[0], s[1] - q[1]]);
            (u[0] * v[1] - u[1] * v[0]) / (r * r)
        })
        .fold(f64::INFINITY, f64::min)
}

fn cmd_ball(a: &BallArgs) -> Result<Outcome, CliError> {
    let mut e = echo("ball", a.output.format);
    let l = load(&a.space, &mut e)?;
    e.insert("r", fmt17(a.r));
    e.insert("n", a.n.to_string());
    if l.space.dim() != 2 {
        return Err(CliError::Input(format!(
            "ball needs exactly 2 weights, got {}",
            l.space.dim()
        )));
    }
    if a.n < 4 {
        return Err(CliError::Input(format!("ball needs n >= 4, got {}", a.n)));
    }
    let ctx = ParanormContext::new(l.g.clone(), l.space.clone());
    let pts = ctx.ball_boundary(a.r, a.n)?;
    let xs: Vec<[f64; 2]> = pts.iter().map(|b| b.x).collect();
    let w = l.space.weights();
    let diagonals = w[0] == w[1];
    let defect = symmetry_defect(&ctx, &xs, a.r, diagonals);
    let tol = 1e-9 * a.r.max(1.0);
    if defect.is_nan() || defect > tol {
        return Err(CliError::Violation(format!(
            "ball boundary is not symmetric: defect {defect:e} > {tol:e}"
        )));
    }
    let turn = min_turn(&xs, a.r);
    let convex = turn >= -1e-12;
    let mut summary = BTreeMap::new();
    summary.insert("symmetric", true.into());
    summary.insert("diagonal_symmetry_checked", diagonals.into());
    summary.insert("convex_spot_check", convex.into());
    let mut rep = report(
        e,
        pts.iter()
            .map(|b| BallOut {
                theta: Sig17(b.theta),
                x: [Sig17(b.x[0]), Sig17(b.x[1])],
            })
            .collect(),
    );
    rep.summary = Some(summary);
    if !convex {
        rep.warnings
            .push(format!("boundary polygon is not convex (min edge turn {turn:e})"));
    }
    let messages = rep.warnings.clone();
    let bytes = finish(a.output.format, rep, |rows| {
        let header = strings(&["theta", "x1", "x2"]);
        let body = rows
            .iter()
            .map(|b| vec![fmt17(b.theta.0), fmt17(b.x[0].0), fmt17(b.x[1].0)])
            .collect();
        (header, body)
    })?;
    Ok(Outcome {
        report: bytes,
        code: EXIT_OK,
        messages,
    })
}
