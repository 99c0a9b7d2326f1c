//! The four batch commands. Each writes its primary output to a file or to
//! `out`, diagnostics to `err`, and returns the process exit code:
//! 0 success, 1 per-instance failures (or validation violations), 2 unusable
//! input or arguments.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use groundcheck_core::evaluation::evaluate;
use groundcheck_core::provider::{EmbeddingTable, FixtureStore};
use groundcheck_core::semantics::junk_list_from;
use groundcheck_core::{GroundingInstance, Prediction, ReasoningConfig};

use crate::dataset::load_dataset;
use crate::embeddings::load_embedding_table;
use crate::fixtures::load_fixtures;
use crate::jsonl::write_line;
use crate::judge::{gather_all, judge_all, sweep_parallel, Providers};
use crate::manifest::RunManifest;
use crate::remote::RemoteClient;
use crate::report::{best_line, render_table, sweep_csv, ReportFile};
use crate::trace::{read_traces, TraceRecord};
use crate::validate::validate_bundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Exit {
    Success = 0,
    Partial = 1,
    Failure = 2,
}

impl From<Exit> for std::process::ExitCode {
    fn from(e: Exit) -> Self {
        std::process::ExitCode::from(e as u8)
    }
}

/// Where providers come from.
#[derive(Debug, Clone, Default)]
pub struct Sources {
    pub dataset: PathBuf,
    pub fixtures: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Base URL of a model service; replaces fixtures for proposal and
    /// grounding, and the embedding table when none is given.
    pub remote: Option<String>,
    pub remote_timeout: Duration,
}

/// Read a junk list file: one answer per line, `#` starts a comment.
pub fn read_junk_list(path: &Path) -> io::Result<std::collections::BTreeSet<String>> {
    let text = fs::read_to_string(path)?;
    Ok(junk_list_from(
        text.lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty()),
    ))
}

struct Loaded {
    dataset: Vec<GroundingInstance>,
    fixtures: Option<FixtureStore>,
    table: Option<EmbeddingTable>,
    remote: Option<RemoteClient>,
    manifest: RunManifest,
}

impl Loaded {
    fn providers(&self) -> Result<Providers<'_>, String> {
        let remote = self.remote.as_ref();
        let (proposer, grounder): (
            &(dyn groundcheck_core::provider::AnswerProposer + Sync),
            &(dyn groundcheck_core::provider::Grounder + Sync),
        ) = match (&self.fixtures, remote) {
            (Some(f), _) => (f, f),
            (None, Some(r)) => (r, r),
            (None, None) => return Err("either --fixtures or --remote is required".into()),
        };
        let embedder: &(dyn groundcheck_core::provider::Embedder + Sync) =
            match (&self.table, remote) {
                (Some(t), _) => t,
                (None, Some(r)) => r,
                (None, None) => return Err("either --embeddings or --remote is required".into()),
            };
        Ok(Providers {
            proposer,
            grounder,
            embedder,
        })
    }
}

fn load(command: &str, src: &Sources, config: &ReasoningConfig) -> Result<Loaded, String> {
    config.validate().map_err(|e| e.to_string())?;
    let dataset = load_dataset(&src.dataset).map_err(|e| e.to_string())?;
    let fixtures = src
        .fixtures
        .as_deref()
        .map(load_fixtures)
        .transpose()
        .map_err(|e| e.to_string())?;
    let table = src
        .embeddings
        .as_deref()
        .map(load_embedding_table)
        .transpose()
        .map_err(|e| e.to_string())?;
    let remote = src
        .remote
        .as_deref()
        .map(|url| RemoteClient::new(url, src.remote_timeout));
    let mut inputs: Vec<(&str, &Path)> = vec![("dataset", &src.dataset)];
    if let Some(p) = &src.fixtures {
        inputs.push(("fixtures", p));
    }
    if let Some(p) = &src.embeddings {
        inputs.push(("embeddings", p));
    }
    let manifest = RunManifest::new(command, Some(config.clone()), &inputs)
        .map_err(|e| e.to_string())?
        .with_remote(src.remote.as_deref());
    let loaded = Loaded {
        dataset,
        fixtures,
        table,
        remote,
        manifest,
    };
    loaded.providers()?;
    Ok(loaded)
}

fn open_out<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> io::Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn emit_manifest(
    manifest: &RunManifest,
    out: Option<&Path>,
    err: &mut dyn Write,
) -> io::Result<()> {
    match out {
        Some(p) => {
            manifest.write_sidecar(p)?;
        }
        None => writeln!(err, "manifest: {}", serde_json::to_string(manifest)?)?,
    }
    Ok(())
}

/// Judge every dataset instance and write one trace record per instance.
pub fn cmd_judge(
    src: &Sources,
    config: &ReasoningConfig,
    out_path: Option<&Path>,
    jobs: usize,
    stdout: &mut dyn Write,
    err: &mut dyn Write,
) -> Exit {
    let loaded = match load("judge", src, config) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return Exit::Failure;
        }
    };
    let providers = loaded.providers().expect("checked in load");
    let results = judge_all(&loaded.dataset, providers, config, jobs);

    let run = || -> io::Result<usize> {
        let mut out = open_out(out_path, stdout)?;
        let mut failures = 0;
        for (inst, r) in loaded.dataset.iter().zip(results) {
            let record = match r {
                Ok(d) => TraceRecord::from_decision(d, config, &loaded.manifest.id),
                Err(e) => {
                    failures += 1;
                    writeln!(err, "error: {e}")?;
                    TraceRecord::error(&inst.instance_id, e.to_string(), &loaded.manifest.id)
                }
            };
            write_line(&mut out, &record)?;
        }
        out.flush()?;
        Ok(failures)
    };
    let failures = match run() {
        Ok(n) => n,
        Err(e) => {
            let _ = writeln!(err, "error: writing traces: {e}");
            return Exit::Failure;
        }
    };
    if let Err(e) = emit_manifest(&loaded.manifest, out_path, err) {
        let _ = writeln!(err, "error: writing manifest: {e}");
        return Exit::Failure;
    }
    let _ = writeln!(
        err,
        "{} instances, {} decided, {} errored",
        loaded.dataset.len(),
        loaded.dataset.len() - failures,
        failures
    );
    if failures > 0 {
        Exit::Partial
    } else {
        Exit::Success
    }
}

/// Default report path: `run.jsonl` → `run.report.json`.
pub fn default_report_path(traces: &Path) -> PathBuf {
    traces.with_extension("report.json")
}

/// Score a trace file against the dataset's gold labels.
pub fn cmd_evaluate(
    dataset_path: &Path,
    traces_path: &Path,
    out_path: Option<&Path>,
    stdout: &mut dyn Write,
    err: &mut dyn Write,
) -> Exit {
    let fail = |err: &mut dyn Write, msg: String| {
        let _ = writeln!(err, "error: {msg}");
        Exit::Failure
    };
    let dataset = match load_dataset(dataset_path) {
        Ok(d) => d,
        Err(e) => return fail(err, e.to_string()),
    };
    let traces = match read_traces(traces_path) {
        Ok(t) => t,
        Err(e) => return fail(err, e.to_string()),
    };
    let known: std::collections::HashSet<&str> =
        dataset.iter().map(|i| i.instance_id.as_str()).collect();
    if let Some(t) = traces.iter().find(|t| !known.contains(t.instance_id())) {
        return fail(
            err,
            format!("trace for unknown instance {:?}", t.instance_id()),
        );
    }
    let predictions: Vec<Prediction> = traces
        .iter()
        .filter_map(|t| t.verdict().map(|s| Prediction::new(t.instance_id(), s)))
        .collect();
    let errored: Vec<String> = traces
        .iter()
        .filter(|t| t.verdict().is_none())
        .map(|t| t.instance_id().to_string())
        .collect();
    let report = match evaluate(&dataset, &predictions) {
        Ok(r) => r,
        Err(e) => return fail(err, e.to_string()),
    };
    if report.overall.counts.total == 0 {
        return fail(
            err,
            "nothing to evaluate: no decided instance has a gold label".into(),
        );
    }
    let manifest = match RunManifest::new(
        "evaluate",
        None,
        &[("dataset", dataset_path), ("traces", traces_path)],
    ) {
        Ok(m) => m,
        Err(e) => return fail(err, e.to_string()),
    };
    let file = ReportFile {
        manifest: manifest.id.clone(),
        report,
        errored,
    };
    let out = out_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| default_report_path(traces_path));
    let write = || -> io::Result<()> {
        let mut body = serde_json::to_string_pretty(&file)?;
        body.push('\n');
        fs::write(&out, body)?;
        manifest.write_sidecar(&out)?;
        Ok(())
    };
    if let Err(e) = write() {
        return fail(err, format!("writing report {}: {e}", out.display()));
    }
    let _ = stdout.write_all(render_table(&file).as_bytes());
    let _ = writeln!(err, "report written to {}", out.display());
    Exit::Success
}

/// Evaluate every (tau_iou, tau_sem) cell and emit a CSV plus the best cell.
pub fn cmd_sweep(
    src: &Sources,
    config: &ReasoningConfig,
    (tau_iou_grid, tau_sem_grid): (&[f64], &[f64]),
    out_path: Option<&Path>,
    jobs: usize,
    stdout: &mut dyn Write,
    err: &mut dyn Write,
) -> Exit {
    let loaded = match load("sweep", src, config) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return Exit::Failure;
        }
    };
    let providers = loaded.providers().expect("checked in load");
    let mut evidence = Vec::with_capacity(loaded.dataset.len());
    for r in gather_all(&loaded.dataset, providers, config, jobs) {
        match r {
            Ok(ev) => evidence.push(ev),
            Err(e) => {
                let _ = writeln!(err, "error: sweep aborted: {e}");
                return Exit::Failure;
            }
        }
    }
    let sweep = match sweep_parallel(
        &loaded.dataset,
        &evidence,
        tau_iou_grid,
        tau_sem_grid,
        config,
        jobs,
    ) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: sweep aborted: {e}");
            return Exit::Failure;
        }
    };
    let csv = sweep_csv(&sweep);
    let best = best_line(&sweep);
    let result = match out_path {
        Some(p) => fs::write(p, &csv)
            .and_then(|_| emit_manifest(&loaded.manifest, Some(p), err))
            .and_then(|_| writeln!(stdout, "{best}")),
        None => stdout
            .write_all(csv.as_bytes())
            .and_then(|_| writeln!(err, "{best}"))
            .and_then(|_| emit_manifest(&loaded.manifest, None, err)),
    };
    if let Err(e) = result {
        let _ = writeln!(err, "error: writing sweep: {e}");
        return Exit::Failure;
    }
    Exit::Success
}

/// Check every schema invariant across the three input files.
pub fn cmd_validate(
    dataset: &Path,
    fixtures: &Path,
    embeddings: &Path,
    config: &ReasoningConfig,
    stdout: &mut dyn Write,
) -> Exit {
    let violations = validate_bundle(dataset, fixtures, embeddings, config);
    for v in &violations {
        let _ = writeln!(stdout, "{v}");
    }
    let _ = writeln!(stdout, "{} violations", violations.len());
    if violations.is_empty() {
        Exit::Success
    } else {
        Exit::Partial
    }
}
