//! Command implementations behind the `qcmass` binary.
//!
//! Every command returns a [`CommandResult`] instead of printing, so tests
//! can drive the full command surface in-process. Payloads on stdout are
//! deterministic; timings and warnings go to stderr.

use std::ffi::OsString;
use std::fmt::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qcmass_core::lp::LARGE_DIMENSION_WARNING;
use qcmass_core::numeric::r;
use qcmass_core::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const EXTREMIZE_SCHEMA: &str = "qcmass.extremize/1";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandResult {
    fn ok(stdout: String) -> Self {
        CommandResult {
            exit_code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn usage(message: impl std::fmt::Display) -> Self {
        CommandResult {
            exit_code: EXIT_USAGE,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }

    fn failure(message: impl std::fmt::Display) -> Self {
        CommandResult {
            exit_code: EXIT_FAILURE,
            stdout: String::new(),
            stderr: format!("error: {message}\n"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qcmass", version, about = "Exact mass bounds for quasi-copulas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the extremal box-volume LP and certify the optimum.
    Extremize(ExtremizeArgs),
    /// Check the quasi-copula axioms of a mass grid.
    Verify(SourceArgs),
    /// Mass a grid puts on a box.
    Volume(VolumeArgs),
    /// Marginal grid after integrating out one axis.
    Margin(MarginArgs),
    /// Compare LP minima with the conjectured lower bound.
    Conjecture(ConjectureArgs),
    /// Check the reported four-dimensional extremal assignments.
    CheckWitness(CheckWitnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    Min,
    Max,
}

impl From<Direction> for Sense {
    fn from(d: Direction) -> Sense {
        match d {
            Direction::Min => Sense::Minimize,
            Direction::Max => Sense::Maximize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Bland,
    Dantzig,
}

#[derive(Debug, Args)]
pub struct ExtremizeArgs {
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(long, value_enum)]
    pub direction: Direction,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,
    /// Write the LP in text form to this path before solving.
    #[arg(long)]
    pub emit_lp: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bland")]
    pub rule: Rule,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Builtin grid: q1 or q2.
    #[arg(long)]
    pub example: Option<String>,
    /// Grid file in JSON form.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VolumeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Box as lo:hi per axis, comma separated.
    #[arg(long = "box")]
    pub bx: String,
}

#[derive(Debug, Args)]
pub struct MarginArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Axis to integrate out, counted from 1.
    #[arg(long)]
    pub drop_axis: usize,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: GridFormat,
}

#[derive(Debug, Args)]
pub struct ConjectureArgs {
    #[arg(long)]
    pub max_dim: usize,
}

#[derive(Debug, Args)]
pub struct CheckWitnessArgs {
    #[arg(short = 'n')]
    pub n: usize,
    #[arg(long, value_enum)]
    pub direction: Direction,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli.command),
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                CommandResult {
                    exit_code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CommandResult::ok(text)
            }
        }
    }
}

pub fn execute(command: Command) -> CommandResult {
    match command {
        Command::Extremize(a) => cmd_extremize(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Volume(a) => cmd_volume(&a),
        Command::Margin(a) => cmd_margin(&a),
        Command::Conjecture(a) => cmd_conjecture(&a),
        Command::CheckWitness(a) => cmd_check_witness(&a),
    }
}

fn load_source(source: &SourceArgs) -> Result<(String, GridQuasiCopula), CommandResult> {
    let (name, grid) = match (&source.example, &source.file) {
        (Some(id), None) => {
            let id: BuiltinExample = id.parse().map_err(CommandResult::usage)?;
            (id.to_string(), builtin_grid(id))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CommandResult::usage(format!("{}: {e}", path.display())))?;
            let grid = MassGrid::from_json(&text)
                .map_err(|e| CommandResult::usage(format!("{}: {e}", path.display())))?;
            (path.display().to_string(), grid)
        }
        _ => return Err(CommandResult::usage("exactly one of --example or --file is required")),
    };
    let qc = make_grid_qc(grid).map_err(CommandResult::usage)?;
    Ok((name, qc))
}

fn verdict_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn large_dimension_note(n: usize, stderr: &mut String) {
    if n >= LARGE_DIMENSION_WARNING {
        let _ = writeln!(
            stderr,
            "warning: n = {n} gives {} rows over {} variables; expect a long solve",
            n + n * (1 << n) + (n + 1) * (1 << n),
            2 * n + (1 << n)
        );
    }
}

#[derive(Serialize)]
struct ExtremizeReport {
    schema: &'static str,
    dimension: usize,
    direction: &'static str,
    optimum: Rational,
    #[serde(rename = "box")]
    bx: Vec<[Rational; 2]>,
    vertices: Vec<VertexEntry>,
    pivots: PivotCounts,
    peak_bits: u64,
    certificate: String,
}

#[derive(Serialize)]
struct VertexEntry {
    vertex: String,
    value: Rational,
}

#[derive(Serialize)]
struct PivotCounts {
    phase1: usize,
    phase2: usize,
    total: usize,
}

pub fn cmd_extremize(args: &ExtremizeArgs) -> CommandResult {
    if args.n < 2 {
        return CommandResult::usage(format!("-n must be at least 2 (got {})", args.n));
    }
    let sense: Sense = args.direction.into();
    let mut stderr = String::new();
    large_dimension_note(args.n, &mut stderr);

    let (lp, layout) = match build_extremal_lp(args.n, sense) {
        Ok(built) => built,
        Err(e) => return CommandResult::usage(e),
    };
    if let Some(path) = &args.emit_lp {
        if let Err(e) = std::fs::write(path, export_lp(&lp)) {
            return CommandResult::usage(format!("{}: {e}", path.display()));
        }
    }

    let options = SolverOptions {
        rule: match args.rule {
            Rule::Bland => PivotRule::Bland,
            Rule::Dantzig => PivotRule::Dantzig,
        },
    };
    let start = Instant::now();
    let sol = match solve_with(&lp, &options) {
        Ok(sol) => sol,
        Err(e) => return CommandResult::failure(e),
    };
    let elapsed = start.elapsed();
    let (Some(optimum), Ok(asg)) = (sol.objective.clone(), solution_to_assignment(&layout, &sol))
    else {
        return CommandResult::failure(format!("LP status {}", sol.status));
    };
    let verdict = match certify(&lp, &sol) {
        Ok(v) => v,
        Err(e) => return CommandResult::failure(e),
    };
    let _ = writeln!(
        stderr,
        "solved n = {} {} in {:.3} s ({} pivots)",
        args.n,
        sense,
        elapsed.as_secs_f64(),
        sol.pivots()
    );

    let vertices: Vec<VertexEntry> = VertexPattern::all(args.n)
        .map(|v| VertexEntry {
            vertex: v.label(),
            value: asg.value(&v).clone(),
        })
        .collect();
    let bx: Vec<[Rational; 2]> = asg
        .bx
        .intervals()
        .iter()
        .map(|(lo, hi)| [lo.clone(), hi.clone()])
        .collect();

    let stdout = match args.format {
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(out, "dimension {}", args.n);
            let _ = writeln!(out, "direction {sense}");
            let _ = writeln!(out, "optimum {optimum}");
            for (axis, [lo, hi]) in bx.iter().enumerate() {
                let _ = writeln!(out, "box {} {lo}:{hi}", axis + 1);
            }
            for v in &vertices {
                let _ = writeln!(out, "vertex {} {}", v.vertex, v.value);
            }
            let _ = writeln!(
                out,
                "pivots {} phase1 {} phase2 {}",
                sol.pivots(),
                sol.phase1_pivots,
                sol.phase2_pivots
            );
            let _ = writeln!(out, "peak_bits {}", sol.peak_bits);
            let _ = writeln!(out, "certificate {verdict}");
            out
        }
        ReportFormat::Json => {
            let report = ExtremizeReport {
                schema: EXTREMIZE_SCHEMA,
                dimension: args.n,
                direction: sense.token(),
                optimum,
                bx,
                vertices,
                pivots: PivotCounts {
                    phase1: sol.phase1_pivots,
                    phase2: sol.phase2_pivots,
                    total: sol.pivots(),
                },
                peak_bits: sol.peak_bits,
                certificate: verdict.to_string(),
            };
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            text
        }
    };
    CommandResult {
        exit_code: if verdict.passed() { EXIT_OK } else { EXIT_FAILURE },
        stdout,
        stderr,
    }
}

pub fn cmd_verify(args: &SourceArgs) -> CommandResult {
    let (name, qc) = match load_source(args) {
        Ok(loaded) => loaded,
        Err(e) => return e,
    };
    let report = qc.verify_axioms();
    let envelope = qc.frechet_envelope_check();
    let total = qc.total_mass();
    let total_ok = total == Rational::one();

    let mut out = String::new();
    let _ = writeln!(out, "source {name}");
    let _ = writeln!(out, "dimension {}", qc.dimension());
    let _ = writeln!(out, "grounded {}", verdict_word(report.grounded_ok));
    let _ = writeln!(out, "uniform_margins {}", verdict_word(report.uniform_margins_ok));
    let _ = writeln!(out, "monotone {}", verdict_word(report.monotone_ok));
    let _ = writeln!(out, "lipschitz {}", verdict_word(report.lipschitz_ok));
    let _ = writeln!(out, "frechet_envelope {}", verdict_word(envelope.is_empty()));
    let _ = writeln!(out, "total_mass {} {total}", verdict_word(total_ok));
    for v in &report.violations {
        let _ = writeln!(
            out,
            "violation {} {} lhs {} rhs {}",
            v.kind, v.location, v.lhs, v.rhs
        );
    }
    for v in &envelope {
        let node: Vec<String> = v.node.iter().map(|x| x.to_string()).collect();
        let bound = match v.bound {
            EnvelopeBound::Lower => "lower",
            EnvelopeBound::Upper => "upper",
        };
        let _ = writeln!(
            out,
            "violation frechet_{bound} ({}) value {} bound {}",
            node.join(","),
            v.value,
            v.bound_value
        );
    }
    let passed = report.passed() && envelope.is_empty() && total_ok;
    let _ = writeln!(out, "result {}", verdict_word(passed));
    CommandResult {
        exit_code: if passed { EXIT_OK } else { EXIT_FAILURE },
        stdout: out,
        stderr: String::new(),
    }
}

pub fn cmd_volume(args: &VolumeArgs) -> CommandResult {
    let (_, qc) = match load_source(&args.source) {
        Ok(loaded) => loaded,
        Err(e) => return e,
    };
    let bx: NBox = match args.bx.parse() {
        Ok(bx) => bx,
        Err(e) => return CommandResult::usage(e),
    };
    match qc.box_volume(&bx) {
        Ok(v) => CommandResult::ok(format!("{v}\n")),
        Err(e) => CommandResult::usage(e),
    }
}

/// Plot-ready CSV: one row per nonzero cell with its bounds and mass.
pub fn margin_csv(grid: &MassGrid) -> String {
    let n = grid.dimension();
    let mut out = String::new();
    let header: Vec<String> = (1..=n).flat_map(|i| [format!("lo_{i}"), format!("hi_{i}")]).collect();
    let _ = writeln!(out, "{},mass", header.join(","));
    for (cell, mass) in grid.cells() {
        let bx = grid.cell_box(cell).expect("stored cells are in range");
        let bounds: Vec<String> = bx
            .intervals()
            .iter()
            .flat_map(|(lo, hi)| [lo.to_string(), hi.to_string()])
            .collect();
        let _ = writeln!(out, "{},{mass}", bounds.join(","));
    }
    out
}

pub fn cmd_margin(args: &MarginArgs) -> CommandResult {
    let (_, qc) = match load_source(&args.source) {
        Ok(loaded) => loaded,
        Err(e) => return e,
    };
    let n = qc.dimension();
    if n < 2 {
        return CommandResult::usage("cannot marginalize a one-dimensional grid");
    }
    if args.drop_axis == 0 || args.drop_axis > n {
        return CommandResult::usage(format!(
            "--drop-axis must be between 1 and {n} (got {})",
            args.drop_axis
        ));
    }
    let margin = match qc.grid().marginalize(args.drop_axis - 1) {
        Ok(m) => m,
        Err(e) => return CommandResult::usage(e),
    };
    CommandResult::ok(match args.format {
        GridFormat::Csv => margin_csv(&margin),
        GridFormat::Json => margin.to_json() + "\n",
    })
}

/// One line of the conjecture table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConjectureRow {
    pub n: usize,
    pub lp_min: Rational,
    pub conjecture: Rational,
    pub candidate_feasible: bool,
    pub candidate_value: Rational,
    pub certificate: Verdict,
}

impl ConjectureRow {
    pub fn verdict(&self) -> &'static str {
        match self.lp_min.cmp(&self.conjecture) {
            std::cmp::Ordering::Equal => "matches",
            std::cmp::Ordering::Less => "below",
            std::cmp::Ordering::Greater => "above",
        }
    }

    /// The LP optimum is a lower bound for every feasible point, so a
    /// consistent row has a feasible candidate worth the conjectured value
    /// and an LP minimum no larger than it.
    pub fn consistent(&self) -> bool {
        self.candidate_feasible
            && self.candidate_value == self.conjecture
            && self.lp_min <= self.conjecture
            && self.certificate.passed()
    }
}

pub fn conjecture_row(n: usize) -> Result<ConjectureRow, String> {
    let (lp, layout) = build_extremal_lp(n, Sense::Minimize).map_err(|e| e.to_string())?;
    let sol = solve(&lp).map_err(|e| e.to_string())?;
    let lp_min = sol
        .objective
        .clone()
        .ok_or_else(|| format!("n = {n}: LP status {}", sol.status))?;
    let certificate = certify(&lp, &sol).map_err(|e| e.to_string())?;
    let candidate = candidate_pattern(n).map_err(|e| e.to_string())?;
    let report = check_assignment(&lp, &layout, &candidate).map_err(|e| e.to_string())?;
    Ok(ConjectureRow {
        n,
        lp_min,
        conjecture: conjectured_minimum(n),
        candidate_feasible: report.feasible,
        candidate_value: report.objective_value,
        certificate,
    })
}

pub fn cmd_conjecture(args: &ConjectureArgs) -> CommandResult {
    if args.max_dim < 2 {
        return CommandResult::usage(format!("--max-dim must be at least 2 (got {})", args.max_dim));
    }
    let mut stderr = String::new();
    large_dimension_note(args.max_dim, &mut stderr);
    let mut out = String::from(
        "n,lp_min,conjecture,box_lo,box_hi,candidate,candidate_value,certificate,verdict\n",
    );
    let mut all_consistent = true;
    for n in 2..=args.max_dim {
        let start = Instant::now();
        let row = match conjecture_row(n) {
            Ok(row) => row,
            Err(e) => {
                let mut failed = CommandResult::failure(e);
                failed.stdout = out;
                return failed;
            }
        };
        let _ = writeln!(stderr, "n = {n} solved in {:.3} s", start.elapsed().as_secs_f64());
        let m = (2 * n - 1) as i64;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            n,
            row.lp_min,
            row.conjecture,
            r(n as i64 - 1, m),
            r(2 * n as i64 - 2, m),
            if row.candidate_feasible { "feasible" } else { "infeasible" },
            row.candidate_value,
            verdict_word(row.certificate.passed()),
            row.verdict()
        );
        all_consistent &= row.consistent();
    }
    CommandResult {
        exit_code: if all_consistent { EXIT_OK } else { EXIT_FAILURE },
        stdout: out,
        stderr,
    }
}

/// Objective values of the reported four-dimensional extremal assignments.
pub fn reported_objective(sense: Sense) -> Rational {
    match sense {
        Sense::Minimize => r(-9, 7),
        Sense::Maximize => r(2, 1),
    }
}

/// Checks `asg` against the extremal LP and compares its objective with
/// `expected`. Exit code 0 iff feasible with exactly that objective.
pub fn witness_result(sense: Sense, asg: &VertexAssignment, expected: &Rational) -> CommandResult {
    let n = asg.dimension();
    let (lp, layout) = match build_extremal_lp(n, sense) {
        Ok(built) => built,
        Err(e) => return CommandResult::usage(e),
    };
    let report = match check_assignment(&lp, &layout, asg) {
        Ok(report) => report,
        Err(e) => return CommandResult::usage(e),
    };
    let passed = report.feasible && report.objective_value == *expected;

    let mut out = String::new();
    let _ = writeln!(out, "dimension {n}");
    let _ = writeln!(out, "direction {sense}");
    for (axis, (lo, hi)) in asg.bx.intervals().iter().enumerate() {
        let _ = writeln!(out, "box {} {lo}:{hi}", axis + 1);
    }
    let _ = writeln!(out, "feasible {}", if report.feasible { "yes" } else { "no" });
    let _ = writeln!(out, "objective {}", report.objective_value);
    let _ = writeln!(out, "expected {expected}");
    for v in &report.violated_rows {
        let _ = writeln!(
            out,
            "violated_row {} {} {} {} {}",
            v.row, v.family, v.lhs, v.relation, v.rhs
        );
    }
    let _ = writeln!(out, "result {}", verdict_word(passed));
    CommandResult {
        exit_code: if passed { EXIT_OK } else { EXIT_FAILURE },
        stdout: out,
        stderr: String::new(),
    }
}

pub fn cmd_check_witness(args: &CheckWitnessArgs) -> CommandResult {
    if args.n != 4 {
        return CommandResult::usage(format!(
            "reported assignments exist only for -n 4 (got {})",
            args.n
        ));
    }
    let sense: Sense = args.direction.into();
    match reported_witness(4, sense) {
        Ok(asg) => witness_result(sense, &asg, &reported_objective(sense)),
        Err(e) => CommandResult::usage(e),
    }
}
