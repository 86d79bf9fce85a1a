//! Run directories.
//!
//! ```text
//! <run>/scenario.toml      copy of the scenario that produced the run
//! <run>/run.json           metadata (grid, termination, T* estimate, snapshot index)
//! <run>/diagnostics.csv    one row per record: t,mass,density,F,sup_norm,tail_fraction
//! <run>/snapshots/*.bin    fields in the binary snapshot format
//! <run>/reports/*          analysis outputs, never overwritten
//! ```

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use blowscope::diagnostics::TimeSeries;
use blowscope::integrator::{RunResult, Sign, Snapshot, Termination, TstarEstimate};
use blowscope::spectral::io::{read_field, write_field};
use blowscope::spectral::Grid;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::scenario::{parse_stored_scenario, Scenario};

pub const MANIFEST: &str = "scenario.toml";
pub const RUN_JSON: &str = "run.json";
pub const DIAGNOSTICS_CSV: &str = "diagnostics.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const REPORT_DIR: &str = "reports";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub format_version: u32,
    pub software_version: String,
    pub name: String,
    pub dim: usize,
    pub sign: Sign,
    pub n: usize,
    pub half_width: f64,
    /// `integrate` or `formula`.
    pub source: String,
    pub termination: Termination,
    pub tstar: Option<TstarEstimate>,
    pub seeded_t_star: Option<f64>,
    pub trusted_until: f64,
    pub steps: usize,
    pub records: usize,
    pub snapshots: Vec<SnapshotEntry>,
}

/// A run read back from disk.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub root: PathBuf,
    pub meta: RunMeta,
    pub scenario: Scenario,
    pub run: RunResult,
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| HarnessError::io(path, e))
}

/// Creates `root` for a new run; refuses a directory that already has content.
pub fn create(root: &Path) -> Result<()> {
    if root.exists() {
        let mut entries = io(root, fs::read_dir(root))?;
        if entries.next().is_some() {
            return Err(HarnessError::RunDir(
                root.to_path_buf(),
                "already contains files; run directories are append-only".into(),
            ));
        }
    }
    io(root, fs::create_dir_all(root.join(SNAPSHOT_DIR)))?;
    io(root, fs::create_dir_all(root.join(REPORT_DIR)))?;
    Ok(())
}

/// Writes a completed run into a directory made by [`create`].
pub fn write_run(root: &Path, manifest: &str, scenario: &Scenario, source: &str, run: &RunResult) -> Result<RunMeta> {
    let path = root.join(MANIFEST);
    io(&path, fs::write(&path, manifest))?;

    let path = root.join(DIAGNOSTICS_CSV);
    let mut w = BufWriter::new(io(&path, File::create(&path))?);
    run.diagnostics.write_csv(&mut w)?;
    io(&path, w.flush())?;

    let mut entries = Vec::with_capacity(run.snapshots.len());
    for (k, snap) in run.snapshots.iter().enumerate() {
        let file = format!("{SNAPSHOT_DIR}/snap_{k:05}.bin");
        let path = root.join(&file);
        let mut w = BufWriter::new(io(&path, File::create(&path))?);
        write_field(&mut w, &snap.field, snap.t)?;
        io(&path, w.flush())?;
        entries.push(SnapshotEntry { t: snap.t, file });
    }

    let meta = RunMeta {
        format_version: FORMAT_VERSION,
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        name: scenario.name.clone(),
        dim: scenario.equation.dim,
        sign: scenario.equation.sign,
        n: scenario.grid.n,
        half_width: scenario.grid.half_width,
        source: source.to_string(),
        termination: run.termination,
        tstar: run.tstar,
        seeded_t_star: scenario.seeded_t_star(),
        trusted_until: run.trusted_until,
        steps: run.steps,
        records: run.diagnostics.len(),
        snapshots: entries,
    };
    let path = root.join(RUN_JSON);
    io(&path, fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n"))?;
    Ok(meta)
}

/// Reads a run directory back into memory.
pub fn load(root: &Path) -> Result<StoredRun> {
    let bad = |m: String| HarnessError::RunDir(root.to_path_buf(), m);
    if !root.join(RUN_JSON).is_file() {
        return Err(bad(format!("missing {RUN_JSON}; not a run directory")));
    }
    let path = root.join(RUN_JSON);
    let meta: RunMeta = serde_json::from_str(&io(&path, fs::read_to_string(&path))?)
        .map_err(|e| bad(format!("{RUN_JSON}: {e}")))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {}", meta.format_version)));
    }
    let path = root.join(MANIFEST);
    let manifest = io(&path, fs::read_to_string(&path))?;
    let scenario = parse_stored_scenario(&path, &manifest)?;
    let grid = Grid::new(meta.dim, meta.n, meta.half_width)?;

    let path = root.join(DIAGNOSTICS_CSV);
    let diagnostics = TimeSeries::read_csv(meta.dim, BufReader::new(io(&path, File::open(&path))?))?;
    if diagnostics.len() != meta.records {
        return Err(bad(format!(
            "{DIAGNOSTICS_CSV} has {} records, {RUN_JSON} lists {}",
            diagnostics.len(),
            meta.records
        )));
    }
    let mut snapshots = Vec::with_capacity(meta.snapshots.len());
    for entry in &meta.snapshots {
        let path = root.join(&entry.file);
        let (field, t) = read_field(&mut BufReader::new(io(&path, File::open(&path))?))?;
        if field.grid() != &grid || t.to_bits() != entry.t.to_bits() {
            return Err(bad(format!("{} does not match {RUN_JSON}", entry.file)));
        }
        snapshots.push(Snapshot { t, field });
    }
    Ok(StoredRun {
        root: root.to_path_buf(),
        run: RunResult {
            snapshots,
            diagnostics,
            termination: meta.termination,
            tstar: meta.tstar,
            trusted_until: meta.trusted_until,
            steps: meta.steps,
        },
        scenario,
        meta,
    })
}

/// Stores `bytes` as `reports/<stem>.<ext>` through [`write_unique`].
pub fn write_report(root: &Path, stem: &str, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
    write_unique(&root.join(REPORT_DIR), stem, ext, bytes)
}

/// Stores `bytes` as `dir/<stem>.<ext>`. An identical existing file is left in
/// place; a differing one is kept and the new content goes to the first free
/// `<stem>.<k>.<ext>`.
pub fn write_unique(dir: &Path, stem: &str, ext: &str, bytes: &[u8]) -> Result<PathBuf> {
    io(dir, fs::create_dir_all(dir))?;
    for k in 0usize.. {
        let name = if k == 0 { format!("{stem}.{ext}") } else { format!("{stem}.{k}.{ext}") };
        let path = dir.join(name);
        if !path.exists() {
            io(&path, fs::write(&path, bytes))?;
            return Ok(path);
        }
        if io(&path, fs::read(&path))? == bytes {
            return Ok(path);
        }
    }
    unreachable!("file names are unbounded")
}
