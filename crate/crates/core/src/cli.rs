//! The `pels` command line.
//!
//! ```text
//! pels run <scenario.json> [--trace out.jsonl] [--report out.json] [--check]
//! pels compare <pels> <baseline> [--freq-a MHZ] [--freq-b MHZ] [--json]
//! pels sweep [--links 1..8] [--scm-lines 4,6,8] <scenario.json> [--json out.json]
//! pels build <in.pels> -o <out.bin> [--scm-lines N]
//! pels dump <in.bin>
//! ```
//!
//! Invoked under the name `pelsc` (for example through a symlink) the binary
//! accepts only `build` and `dump`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 simulation error recorded,
//! 3 check failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::asm::{assemble_str, disassemble, validate_against_capacity, Program};
use crate::report::{compare_at, SimReport};
use crate::scenario::Scenario;
use crate::sweep::{parse_counts, render_table, sweep};
use crate::trace::{emit_trace, TraceLevel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SIMULATION: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pels", version, about = "Cycle-accurate peripheral event linking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario.
    Run(RunArgs),
    /// Compare a PELS run with a baseline run of the same stimulus.
    Compare(CompareArgs),
    /// Run a scenario over a grid of link counts and SCM sizes.
    Sweep(SweepArgs),
    /// Assemble a `.pels` source into a binary image.
    Build(BuildArgs),
    /// Disassemble a binary image.
    Dump(DumpArgs),
}

#[derive(Debug, Parser)]
#[command(name = "pelsc", version, about = "Microcode assembler and disassembler")]
struct PelscCli {
    #[command(subcommand)]
    command: AsmCommand,
}

#[derive(Debug, Subcommand)]
enum AsmCommand {
    /// Assemble a `.pels` source into a binary image.
    Build(BuildArgs),
    /// Disassemble a binary image.
    Dump(DumpArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,
    /// Write the JSON Lines trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Assert the scenario's `expect` block.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// PELS report or scenario.
    a: PathBuf,
    /// Baseline report or scenario.
    b: PathBuf,
    /// Clock frequency of the first side, MHz.
    #[arg(long)]
    freq_a: Option<f64>,
    /// Clock frequency of the second side, MHz.
    #[arg(long)]
    freq_b: Option<f64>,
    /// Print the comparison as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Link counts, `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "1..8")]
    links: String,
    /// SCM sizes, `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "4,6,8")]
    scm_lines: String,
    scenario: PathBuf,
    /// Write the results as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Reject programs that do not fit an SCM of this many lines.
    #[arg(long)]
    scm_lines: Option<usize>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    input: PathBuf,
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

macro_rules! say {
    ($w:expr, $($arg:tt)*) => {
        // Output to a closed pipe is not worth failing the command over.
        let _ = writeln!($w, $($arg)*);
    };
}

/// Runs the command line with the process arguments and standard streams.
pub fn main_from_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn invoked_as_pelsc(argv0: Option<&OsString>) -> bool {
    argv0
        .and_then(|a| Path::new(a).file_stem().map(|s| s.to_os_string()))
        .is_some_and(|s| s == "pelsc")
}

/// Runs the command line on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let mut io = Io { out, err };
    if invoked_as_pelsc(args.first()) {
        match PelscCli::try_parse_from(&args) {
            Ok(cli) => match cli.command {
                AsmCommand::Build(a) => build(a, &mut io),
                AsmCommand::Dump(a) => dump(a, &mut io),
            },
            Err(e) => usage(e, &mut io),
        }
    } else {
        match Cli::try_parse_from(&args) {
            Ok(cli) => match cli.command {
                Command::Run(a) => run_scenario(a, &mut io),
                Command::Compare(a) => compare_cmd(a, &mut io),
                Command::Sweep(a) => sweep_cmd(a, &mut io),
                Command::Build(a) => build(a, &mut io),
                Command::Dump(a) => dump(a, &mut io),
            },
            Err(e) => usage(e, &mut io),
        }
    }
}

fn usage(e: clap::Error, io: &mut Io) -> i32 {
    let text = e.render().to_string();
    if e.use_stderr() {
        let _ = write!(io.err, "{text}");
        EXIT_CONFIG
    } else {
        let _ = write!(io.out, "{text}");
        EXIT_OK
    }
}

fn write_file(path: &Path, bytes: &[u8], io: &mut Io) -> bool {
    match std::fs::write(path, bytes) {
        Ok(()) => true,
        Err(e) => {
            say!(io.err, "error: {}: {e}", path.display());
            false
        }
    }
}

fn run_scenario(args: RunArgs, io: &mut Io) -> i32 {
    let level = match TraceLevel::from_env() {
        Ok(l) => l,
        Err(e) => {
            say!(io.err, "error: {}: {e}", crate::trace::TRACE_LEVEL_ENV);
            return EXIT_CONFIG;
        }
    };
    let scenario = match Scenario::load(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    if args.check && scenario.expect.is_none() {
        say!(
            io.err,
            "error: {}: --check needs an `expect` block",
            args.scenario.display()
        );
        return EXIT_CONFIG;
    }
    let report = match scenario.run(level) {
        Ok(r) => r,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(path) = &args.trace {
        let mut buf = Vec::new();
        emit_trace(&report.trace, &mut buf).expect("writing to memory");
        if !write_file(path, &buf, io) {
            return EXIT_CONFIG;
        }
    }
    if let Some(path) = &args.report {
        if !write_file(path, report.without_trace().to_json().as_bytes(), io) {
            return EXIT_CONFIG;
        }
    }
    say!(io.out, "{report}");

    if args.check {
        let failures = scenario.expect.as_ref().map(|e| e.check(&report)).unwrap_or_default();
        if !failures.is_empty() {
            for f in &failures {
                say!(io.err, "check failed: {f}");
            }
            return EXIT_CHECK;
        }
        say!(io.out, "check passed");
    }
    if report.has_errors() {
        say!(io.err, "{} simulation error(s) recorded", report.errors.len());
        return EXIT_SIMULATION;
    }
    EXIT_OK
}

/// A report file, or a scenario that is run to produce one.
fn load_report(path: &Path) -> Result<SimReport, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Ok(report) = SimReport::from_json(&text) {
        return Ok(report);
    }
    let mut scenario = Scenario::from_json(&text, &path.display().to_string()).map_err(|e| e.to_string())?;
    scenario.origin = Some(path.to_path_buf());
    scenario.run(TraceLevel::Off).map_err(|e| e.to_string())
}

fn compare_cmd(args: CompareArgs, io: &mut Io) -> i32 {
    let (a, b) = match (load_report(&args.a), load_report(&args.b)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            say!(io.err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    match compare_at(&a, &b, args.freq_a, args.freq_b) {
        Ok(c) if args.json => {
            say!(
                io.out,
                "{}",
                serde_json::to_string_pretty(&c).expect("comparisons serialize")
            );
            EXIT_OK
        }
        Ok(c) => {
            say!(io.out, "{c}");
            EXIT_OK
        }
        Err(e) => {
            say!(io.err, "error: {e}");
            EXIT_CONFIG
        }
    }
}

fn sweep_cmd(args: SweepArgs, io: &mut Io) -> i32 {
    let counts = parse_counts(&args.links).and_then(|l| parse_counts(&args.scm_lines).map(|s| (l, s)));
    let (links, scm) = match counts {
        Ok(c) => c,
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let template = match Scenario::load(&args.scenario) {
        Ok(s) if !s.links.is_empty() => s,
        Ok(_) => {
            say!(
                io.err,
                "error: {}: sweep template needs at least one link",
                args.scenario.display()
            );
            return EXIT_CONFIG;
        }
        Err(e) => {
            say!(io.err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let results = sweep(&template, &links, &scm);
    let _ = write!(io.out, "{}", render_table(&results));
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&results).expect("sweep results serialize");
        if !write_file(path, json.as_bytes(), io) {
            return EXIT_CONFIG;
        }
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        say!(io.err, "{failed} of {} configurations failed validation", results.len());
        return EXIT_CHECK;
    }
    say!(io.out, "all {} configurations passed", results.len());
    EXIT_OK
}

fn build(args: BuildArgs, io: &mut Io) -> i32 {
    let text = match std::fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => {
            say!(io.err, "error: {}: {e}", args.input.display());
            return EXIT_CONFIG;
        }
    };
    let checked = assemble_str(&text).and_then(|p| match args.scm_lines {
        Some(n) => validate_against_capacity(&p, n).map(|_| p),
        None => Ok(p),
    });
    let program = match checked {
        Ok(p) => p,
        Err(e) => {
            say!(io.err, "{}:{e}", args.input.display());
            return EXIT_CONFIG;
        }
    };
    let image = program.to_image();
    if !write_file(&args.output, &image, io) {
        return EXIT_CONFIG;
    }
    say!(
        io.out,
        "{}: {} command(s), {} bytes",
        args.output.display(),
        program.len(),
        image.len()
    );
    EXIT_OK
}

fn dump(args: DumpArgs, io: &mut Io) -> i32 {
    let bytes = match std::fs::read(&args.input) {
        Ok(b) => b,
        Err(e) => {
            say!(io.err, "error: {}: {e}", args.input.display());
            return EXIT_CONFIG;
        }
    };
    match Program::from_image(&bytes) {
        Ok(p) => {
            let text = disassemble(&p);
            if !text.is_empty() {
                say!(io.out, "{text}");
            }
            EXIT_OK
        }
        Err(e) => {
            say!(io.err, "error: {}: {e}", args.input.display());
            EXIT_CONFIG
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn argv0_selects_the_assembler_front_end() {
        assert!(invoked_as_pelsc(Some(&OsString::from("/usr/bin/pelsc"))));
        assert!(invoked_as_pelsc(Some(&OsString::from("pelsc.exe"))));
        assert!(!invoked_as_pelsc(Some(&OsString::from("pels"))));
        let (code, _, err) = call(&["pelsc", "run", "x.json"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("unrecognized subcommand"), "{err}");
    }

    #[test]
    fn help_is_success() {
        let (code, out, _) = call(&["pels", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("sweep"));
    }

    #[test]
    fn build_and_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("p.pels");
        let bin = dir.path().join("p.bin");
        std::fs::write(&src, "top: toggle 0, 1\nloop 3, top\n").unwrap();
        let (code, out, _) = call(&["pels", "build", src.to_str().unwrap(), "-o", bin.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert_eq!(std::fs::read(&bin).unwrap().len(), 12);
        let (code, out, _) = call(&["pelsc", "dump", bin.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out, "L0: toggle 0x0, 0x1\nloop 3, L0\n");
    }

    #[test]
    fn build_reports_capacity() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("p.pels");
        std::fs::write(&src, "wait 1\nwait 1\nwait 1\nwait 1\nwait 1\n").unwrap();
        let out = dir.path().join("p.bin");
        let (code, _, err) = call(&[
            "pels",
            "build",
            src.to_str().unwrap(),
            "-o",
            out.to_str().unwrap(),
            "--scm-lines",
            "4",
        ]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("E301"), "{err}");
    }
}
