//! Experiment orchestration: expand a config into `(policy, seed)` cells, run
//! them on a worker pool, write per-cell traces, then assemble the summary,
//! ensemble and bounds files once every cell has finished.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dmra_core::{
    run, verify_summaries, ArrivalSpec, BoundsReport, PolicySpec, SystemParams, TraceSummary,
};
use rayon::prelude::*;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::output;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("`sweep` needs `sweep.k` in the config")]
    MissingSweep,
    #[error("no drift-plus-penalty policy or sweep to verify")]
    NothingToVerify,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Model(#[from] dmra_core::Error),
}

/// Which subcommand drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Every configured policy against every seed.
    Run,
    /// Fixed-`K` control replaced by one policy per `sweep.k` entry; baselines
    /// are kept.
    Sweep,
    /// Fixed-`K` ensembles only; writes bounds reports, no traces.
    Verify,
}

#[derive(Debug, Clone)]
pub struct CellFailure {
    pub policy: PolicySpec,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub files: Vec<PathBuf>,
    pub summaries: Vec<TraceSummary>,
    pub reports: Vec<BoundsReport>,
    pub failures: Vec<CellFailure>,
}

/// Policies to run, duplicates removed, in configuration order.
pub fn plan(cfg: &ExperimentConfig, mode: Mode) -> Result<Vec<PolicySpec>, ExperimentError> {
    let fixed_ks = |policies: &[PolicySpec]| -> Vec<f64> {
        policies
            .iter()
            .filter_map(|p| match p {
                PolicySpec::Dmra { k } => Some(*k),
                _ => None,
            })
            .collect()
    };
    let mut out: Vec<PolicySpec> = Vec::new();
    match mode {
        Mode::Run => out.extend(cfg.policies.iter().cloned()),
        Mode::Sweep => {
            let ks = cfg.k_sweep.as_ref().ok_or(ExperimentError::MissingSweep)?;
            out.extend(ks.iter().map(|&k| PolicySpec::Dmra { k }));
            out.extend(
                cfg.policies
                    .iter()
                    .filter(|p| !matches!(p, PolicySpec::Dmra { .. }))
                    .cloned(),
            );
        }
        Mode::Verify => {
            let ks = match &cfg.k_sweep {
                Some(ks) => ks.clone(),
                None => fixed_ks(&cfg.policies),
            };
            if ks.is_empty() {
                return Err(ExperimentError::NothingToVerify);
            }
            out.extend(ks.into_iter().map(|k| PolicySpec::Dmra { k }));
        }
    }
    let mut unique: Vec<PolicySpec> = Vec::with_capacity(out.len());
    for p in out {
        if !unique.contains(&p) {
            unique.push(p);
        }
    }
    Ok(unique)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))
}

/// Runs one policy over many seeds and keeps only the time averages.
pub fn run_ensemble(
    params: &SystemParams,
    arrival: &ArrivalSpec,
    policy: &PolicySpec,
    horizon: u64,
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<TraceSummary>, ExperimentError> {
    pool(workers)?.install(|| {
        seeds
            .par_iter()
            .map(|&seed| Ok(run(params, arrival, policy, horizon, seed)?.summary()?))
            .collect()
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, ExperimentError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn write_file(
    path: PathBuf,
    files: &mut Vec<PathBuf>,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<(), ExperimentError> {
    let mut w = create(&path)?;
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|source| ExperimentError::Io {
            path: path.clone(),
            source,
        })?;
    files.push(path);
    Ok(())
}

/// Runs every cell and writes the output files into `out_dir`.
///
/// A failing cell is recorded in [`ExperimentOutput::failures`] and the
/// remaining cells still run.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    mode: Mode,
    out_dir: &Path,
) -> Result<ExperimentOutput, ExperimentError> {
    fs::create_dir_all(out_dir).map_err(|source| ExperimentError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let digest = cfg.digest();
    let policies = plan(cfg, mode)?;
    let cells: Vec<(PolicySpec, u64)> = policies
        .iter()
        .flat_map(|p| cfg.seeds.iter().map(move |&s| (p.clone(), s)))
        .collect();
    let write_traces = mode != Mode::Verify;

    let results: Vec<Result<(TraceSummary, Option<PathBuf>), String>> =
        pool(cfg.workers)?.install(|| {
            cells
                .par_iter()
                .map(|(policy, seed)| {
                    let trace = run(&cfg.params, &cfg.arrival, policy, cfg.horizon, *seed)
                        .map_err(|e| e.to_string())?
                        .with_digest(digest.clone());
                    let summary = trace.summary().map_err(|e| e.to_string())?;
                    if !write_traces {
                        return Ok((summary, None));
                    }
                    let path = out_dir.join(output::trace_file_name(policy, *seed));
                    let mut files = Vec::new();
                    write_file(path, &mut files, |w| output::write_trace(w, &trace))
                        .map_err(|e| e.to_string())?;
                    Ok((summary, files.pop()))
                })
                .collect()
        });

    let mut out = ExperimentOutput::default();
    for ((policy, seed), result) in cells.into_iter().zip(results) {
        match result {
            Ok((summary, file)) => {
                out.summaries.push(summary);
                out.files.extend(file);
            }
            Err(message) => out.failures.push(CellFailure {
                policy,
                seed,
                message,
            }),
        }
    }

    if mode != Mode::Verify {
        write_file(out_dir.join("summary.csv"), &mut out.files, |w| {
            output::write_summary(w, &digest, &out.summaries)
        })?;
        write_file(out_dir.join("ensemble.csv"), &mut out.files, |w| {
            output::write_ensemble(w, &digest, &out.summaries)
        })?;
    }

    for policy in &policies {
        let PolicySpec::Dmra { k } = *policy else {
            continue;
        };
        let runs: Vec<TraceSummary> = out
            .summaries
            .iter()
            .filter(|s| s.policy == *policy)
            .cloned()
            .collect();
        if runs.is_empty() {
            continue;
        }
        match verify_summaries(&runs, &cfg.params, k, &cfg.arrival) {
            Ok(report) => {
                write_file(
                    out_dir.join(format!("bounds_k{k}.txt")),
                    &mut out.files,
                    |w| output::write_report(w, &digest, &report),
                )?;
                out.reports.push(report);
            }
            Err(e) => out.failures.push(CellFailure {
                policy: policy.clone(),
                seed: 0,
                message: format!("bounds: {e}"),
            }),
        }
    }
    if !out.reports.is_empty() {
        write_file(out_dir.join("bounds.csv"), &mut out.files, |w| {
            output::write_report_csv(w, &digest, &out.reports)
        })?;
    }
    Ok(out)
}
