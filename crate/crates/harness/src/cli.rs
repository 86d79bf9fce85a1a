//! Command-line entry point.
//!
//! Reports go to standard output as JSON; check lines and progress go to
//! standard error. Exit codes: 0 success, 1 a check failed, 2 usage or
//! configuration error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use blowscope::diagnostics::Verdict;
use blowscope::integrator::run as integrate;
use blowscope::solutions::{gaussian, ground_state, pseudoconformal_blowup, sample_family, soliton, PseudoconformalFamily};
use blowscope::spectral::io::read_field;
use blowscope::spectral::io::{CONVENTION_TAG, VERSION as SNAPSHOT_VERSION};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{rates_report, scan_report, Settings};
use crate::error::{HarnessError, Result, EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE};
use crate::exact::{exact_report, ExactKind};
use crate::lemma::{load_lemma_config, run_lemma};
use crate::rundir::{self, RunMeta, FORMAT_VERSION, REPORT_DIR, SNAPSHOT_DIR};
use crate::scenario::{load_scenario, Evaluate, Family, InitialData, LoadedScenario};

#[derive(Debug, Parser)]
#[command(name = "blowscope", version, about = "Blow-up simulations and concentration diagnostics for L²-critical NLS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run scenarios and store each in its run directory.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Run directory; only with a single scenario.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Concentration scans of every stored snapshot.
    Scan { run_dir: PathBuf },
    /// Rate fits and the inequality checks.
    Rates { run_dir: PathBuf },
    /// Persistence experiments from a case file.
    Lemma {
        config: PathBuf,
        /// Directory for the tables and the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact solutions: profile constants, and residuals with --check.
    Exact {
        family: ExactKind,
        #[arg(long)]
        check: bool,
    },
    /// Software and file-format versions.
    Version,
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| HarnessError::io("<stdout>", e))
}

fn note(err: &mut dyn Write, line: &str) {
    let _ = writeln!(err, "{line}");
}

fn verdict_code(v: Verdict) -> i32 {
    if v == Verdict::Fail {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Simulate { scenarios, out: dir } => simulate(&scenarios, dir, out, err),
        Command::Scan { run_dir } => scan(&run_dir, out, err),
        Command::Rates { run_dir } => rates(&run_dir, out, err),
        Command::Lemma { config, out: dir } => lemma(&config, dir.as_deref(), out, err),
        Command::Exact { family, check } => exact(family, check, out, err),
        Command::Version => {
            let tag = String::from_utf8_lossy(&CONVENTION_TAG).trim_end_matches('\0').to_string();
            emit(
                out,
                &format!(
                    "blowscope {}\nrun-directory format {FORMAT_VERSION}\nsnapshot format {SNAPSHOT_VERSION} (convention {tag})\n",
                    env!("CARGO_PKG_VERSION")
                ),
            )?;
            Ok(EXIT_OK)
        }
    }
}

#[derive(Serialize)]
struct Simulated<'a> {
    run_dir: &'a Path,
    #[serde(flatten)]
    meta: &'a RunMeta,
}

fn simulate(paths: &[PathBuf], dir: Option<PathBuf>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if dir.is_some() && paths.len() > 1 {
        return Err(HarnessError::Usage("--out needs a single scenario".into()));
    }
    let loaded = paths.iter().map(|p| load_scenario(p)).collect::<Result<Vec<_>>>()?;
    let roots = loaded
        .iter()
        .map(|l| {
            dir.clone().or_else(|| l.output_dir()).ok_or_else(|| {
                HarnessError::Usage(format!(
                    "{}: no output directory; set `output` or pass --out",
                    l.path.display()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<RunMeta>> = if loaded.len() == 1 {
        vec![simulate_one(&loaded[0], &roots[0])]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = loaded
                .iter()
                .zip(&roots)
                .map(|(l, r)| s.spawn(move || simulate_one(l, r)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("simulation worker panicked"))
                .collect()
        })
    };
    let mut code = EXIT_OK;
    for ((l, root), res) in loaded.iter().zip(&roots).zip(results) {
        match res {
            Ok(meta) => {
                note(
                    err,
                    &format!(
                        "{}: {} records, {} steps, trusted until t = {} -> {}",
                        meta.name,
                        meta.records,
                        meta.steps,
                        meta.trusted_until,
                        root.display()
                    ),
                );
                emit(out, &json(&Simulated { run_dir: root, meta: &meta })?)?;
            }
            Err(e) => {
                note(err, &format!("error: {}: {e}", l.path.display()));
                code = code.max(e.exit_code());
            }
        }
    }
    Ok(code)
}

fn simulate_one(loaded: &LoadedScenario, root: &Path) -> Result<RunMeta> {
    rundir::create(root)?;
    let result = compute_and_store(loaded, root);
    if result.is_err() {
        for d in [root.join(SNAPSHOT_DIR), root.join(REPORT_DIR), root.to_path_buf()] {
            let _ = fs::remove_dir(d);
        }
    }
    result
}

fn compute_and_store(loaded: &LoadedScenario, root: &Path) -> Result<RunMeta> {
    let sc = &loaded.scenario;
    let grid = sc.grid()?;
    let eq = sc.equation()?;
    let t0 = sc.schedule.t_start;
    let u0 = match &sc.initial {
        InitialData::ExactFamily { family, t_star, evaluate } => {
            let gs = ground_state(grid.dim())?;
            match family {
                Family::Soliton => soliton(&gs, t0, &grid)?,
                Family::Pseudoconformal => {
                    let fam = PseudoconformalFamily::new(gs, *t_star)?;
                    if *evaluate == Evaluate::Formula {
                        let run = sample_family(&fam, &grid, &sc.sample_times()?, sc.schedule.snapshot_every)?;
                        return rundir::write_run(root, &loaded.source, sc, "formula", &run);
                    }
                    pseudoconformal_blowup(&fam, t0, &grid)?
                }
            }
        }
        InitialData::Gaussian {
            amplitude,
            width,
            center,
        } => gaussian(*amplitude, *width, *center, &grid)?,
        InitialData::File { path } => {
            let full = loaded.base_dir().join(path);
            let file = File::open(&full).map_err(|e| HarnessError::io(&full, e))?;
            let (field, _) = read_field(&mut BufReader::new(file))?;
            if field.grid() != &grid {
                return Err(HarnessError::Usage(format!(
                    "{}: field grid does not match the scenario grid",
                    full.display()
                )));
            }
            field
        }
    };
    let ctl = sc.step_control().expect("validated: integration has a [step] table");
    let schedule = sc.schedule().expect("validated: integration has a cadence");
    let run = integrate(&u0, &eq, &ctl, &schedule)?;
    rundir::write_run(root, &loaded.source, sc, "integrate", &run)
}

fn scan(root: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let stored = rundir::load(root)?;
    let settings = Settings::resolve(&stored.scenario, &stored.run)?;
    let report = scan_report(&stored.meta.name, &stored.run, &settings)?;
    let text = json(&report)?;
    let mut table = Vec::new();
    report.write_csv(&mut table)?;
    let a = rundir::write_report(root, "scan", "json", text.as_bytes())?;
    let b = rundir::write_report(root, "scan", "csv", &table)?;
    note(
        err,
        &format!(
            "scanned {} snapshots at {} scales -> {}, {}",
            report.snapshots.len(),
            report.scales.len(),
            a.display(),
            b.display()
        ),
    );
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn rates(root: &Path, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let stored = rundir::load(root)?;
    let settings = Settings::resolve(&stored.scenario, &stored.run)?;
    let report = rates_report(&stored.meta.name, &stored.run, &settings)?;
    let text = json(&report)?;
    rundir::write_report(root, "rates", "json", text.as_bytes())?;
    let mut window = Vec::new();
    if report.write_window_csv(&mut window)? {
        rundir::write_report(root, "window", "csv", &window)?;
    }
    let mut partition = Vec::new();
    if report.write_partition_csv(&mut partition)? {
        rundir::write_report(root, "partition", "csv", &partition)?;
    }
    for c in &report.checks {
        note(err, &c.line());
    }
    emit(out, &text)?;
    Ok(verdict_code(report.verdict))
}

fn lemma(config: &Path, dir: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = load_lemma_config(config)?;
    let report = run_lemma(&cfg)?;
    let text = json(&report)?;
    if let Some(dir) = dir {
        for c in &report.cases {
            let mut bytes = Vec::new();
            c.table.write_csv(&mut bytes)?;
            rundir::write_unique(dir, &c.name, "csv", &bytes)?;
        }
        for s in &report.sweeps {
            let mut bytes = Vec::new();
            s.write_csv(&mut bytes).map_err(|e| HarnessError::io(dir, e))?;
            rundir::write_unique(dir, &s.name, "csv", &bytes)?;
        }
        rundir::write_unique(dir, "lemma", "json", text.as_bytes())?;
    }
    let word = |v: Verdict| match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::NotApplicable => "NOT_APPLICABLE",
    };
    for c in &report.cases {
        note(
            err,
            &format!(
                "{:<14} {:<28} min captured {:.6} vs c1/2 = {:.6}",
                word(c.table.verdict),
                c.name,
                c.table.min_captured,
                c.table.c1 / 2.0
            ),
        );
    }
    for s in &report.sweeps {
        let exponent = s
            .persistence_fit
            .as_ref()
            .map_or_else(|| "n/a".into(), |f| format!("{:.4}", f.exponent));
        note(
            err,
            &format!("{:<14} {:<28} dilation exponent {exponent}", word(s.verdict), s.name),
        );
    }
    emit(out, &text)?;
    Ok(verdict_code(report.verdict))
}

fn exact(kind: ExactKind, check: bool, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let report = exact_report(kind, check)?;
    if let Some(r) = &report.profile_residual {
        note(err, &format!("profile residual {:e} (tolerance {:e})", r.residual, r.tolerance));
    }
    if let Some(c) = &report.cross_solver {
        note(
            err,
            &format!(
                "cross-solver mass {:e}, peak {:e} (tolerance {:e})",
                c.mass_difference, c.peak_difference, c.tolerance
            ),
        );
    }
    if let Some(r) = &report.equation_residual {
        note(
            err,
            &format!("equation residual {:e}, control {:e} (tolerance {:e})", r.relative, r.control, r.tolerance),
        );
    }
    emit(out, &json(&report)?)?;
    Ok(verdict_code(report.verdict))
}
