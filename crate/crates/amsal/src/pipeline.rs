//! Align → erase → evaluate, as library calls and as on-disk stages.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use amsal_core::metrics::{self, EvalReport};
use amsal_core::probe::{class_count, majority_rate, LinearRegression, LogisticProbe, ProbeConfig};
use amsal_core::rng::split_indices;
use amsal_core::{
    apply_eraser, fit_inlp, fit_sal, kmeans_assign, AmsalResult, AmsalTrace, Assignment, Eraser, GuardedRecords,
    Matrix, Selection,
};

use crate::config::{Aligner, Backend, PipelineConfig, Task, ZMode};
use crate::error::{Error, Result};
use crate::format::{load_ids, load_matrix, load_pairs, load_values, save_ids, save_matrix_as, write};
use crate::model::{load_eraser, save_eraser};
use crate::parallel::run_amsal_threaded;

pub const ASSIGNMENT_FILE: &str = "assignment.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const ERASER_FILE: &str = "eraser.amse";
pub const ERASED_STEM: &str = "x_erased";
pub const REPORT_FILE: &str = "report.txt";

/// Guarded records bounded for `n` inputs, read as `cfg.z_mode` directs.
pub fn load_records(cfg: &PipelineConfig, n: usize) -> Result<GuardedRecords> {
    let z = load_matrix(cfg.require(&cfg.z, "z")?)?;
    Ok(match cfg.z_mode {
        ZMode::Records => {
            let priors = cfg.priors.clone().unwrap_or_else(|| vec![1.0 / z.rows() as f64; z.rows()]);
            GuardedRecords::from_priors(z, &priors, n, cfg.amsal.slack)?
        }
        ZMode::Samples => GuardedRecords::from_samples(&z, n, cfg.amsal.slack)?.0,
    })
}

/// Reads an alignment file and checks it against `n` inputs and `m` records.
pub fn load_assignment(path: &Path, n: usize, m: usize) -> Result<Assignment> {
    let ids = load_ids(path)?;
    if ids.len() != n {
        return Err(Error::invalid(format!("{}: {} entries for {n} inputs", path.display(), ids.len())));
    }
    if let Some((i, j)) = ids.iter().enumerate().find(|(_, &j)| j >= m) {
        return Err(Error::invalid(format!("{}: row {i} names record {j} of {m}", path.display())));
    }
    Ok(Assignment::new(ids))
}

pub struct Alignment {
    pub assignment: Assignment,
    /// Present for the alternating aligner.
    pub amsal: Option<AmsalResult>,
}

pub fn align(
    cfg: &PipelineConfig,
    x: &Matrix,
    records: &GuardedRecords,
    truth: Option<&Assignment>,
    threads: usize,
) -> Result<Alignment> {
    let mut amsal = cfg.amsal.clone();
    if cfg.partial {
        amsal.selection = Selection::Partial(load_pairs(cfg.require(&cfg.labels, "labels")?)?);
    }
    Ok(match cfg.aligner {
        Aligner::Amsal => {
            let result = run_amsal_threaded(x, records, &amsal, truth, threads)?;
            Alignment { assignment: result.assignment.clone(), amsal: Some(result) }
        }
        Aligner::Kmeans => Alignment { assignment: kmeans_assign(x, records, &amsal)?, amsal: None },
    })
}

pub fn fit_eraser(cfg: &PipelineConfig, x: &Matrix, records: &GuardedRecords, pi: &Assignment) -> Result<Eraser> {
    Ok(match cfg.backend {
        Backend::Sal => fit_sal(x, records, pi, cfg.rank)?.with_reduced_output(cfg.reduced),
        Backend::Inlp => fit_inlp(x, pi.as_slice(), cfg.inlp_rounds)?,
    })
}

fn dense_ids(ids: &[usize]) -> Vec<usize> {
    let mut seen: Vec<usize> = ids.to_vec();
    seen.sort_unstable();
    seen.dedup();
    ids.iter().map(|g| seen.binary_search(g).expect("present")).collect()
}

/// Metrics on `x` (normally the erased inputs). Task metrics need `cfg.y`;
/// guarded groups come from `cfg.groups`, else `truth`, else `aligned`.
pub fn evaluate(
    cfg: &PipelineConfig,
    x: &Matrix,
    aligned: Option<&Assignment>,
    truth: Option<&Assignment>,
) -> Result<EvalReport> {
    let n = x.rows();
    let mut report = EvalReport {
        alignment_accuracy: aligned.zip(truth).map(|(a, t)| a.accuracy(t)),
        ..EvalReport::default()
    };
    let groups: Option<Vec<usize>> = match (&cfg.groups, truth, aligned) {
        (Some(p), _, _) => Some(load_ids(p)?),
        (None, Some(t), _) => Some(t.as_slice().to_vec()),
        (None, None, Some(a)) => Some(a.as_slice().to_vec()),
        (None, None, None) => None,
    };
    if let Some(g) = &groups {
        if g.len() != n {
            return Err(Error::invalid(format!("{} group ids for {n} inputs", g.len())));
        }
    }
    let (train, test) = split_indices(n, cfg.test_fraction, cfg.amsal.rng_seed);
    let x_train = x.select_rows(&train)?;
    let x_test = x.select_rows(&test)?;
    if let Some(g) = &groups {
        let g = dense_ids(g);
        let train_groups: Vec<usize> = train.iter().map(|&i| g[i]).collect();
        if class_count(&train_groups) >= 2 && majority_rate(&train_groups) < 1.0 {
            let probe = LogisticProbe::fit(&x_train, &train_groups, &ProbeConfig::default())?;
            let test_groups: Vec<usize> = test.iter().map(|&i| g[i]).collect();
            report.guarded_accuracy = Some(probe.accuracy(&x_test, &test_groups)?);
        }
    }
    let Some(y_path) = cfg.y.as_deref() else {
        return Ok(report);
    };
    let test_groups: Option<Vec<usize>> = groups.map(|g| test.iter().map(|&i| g[i]).collect());
    match cfg.task {
        Task::Classification => {
            let y = load_ids(y_path)?;
            if y.len() != n {
                return Err(Error::invalid(format!("{} task labels for {n} inputs", y.len())));
            }
            let pick = |rows: &[usize]| rows.iter().map(|&i| y[i]).collect::<Vec<_>>();
            let probe = LogisticProbe::fit(&x_train, &pick(&train), &ProbeConfig::default())?;
            let pred = probe.predict(&x_test)?;
            let gold = pick(&test);
            report.task_accuracy = Some(metrics::accuracy(&gold, &pred)?);
            report.f1_macro = Some(metrics::f1_macro(&gold, &pred)?);
            if let Some(g) = test_groups.filter(|g| g.iter().all(|&v| v <= 1)) {
                report.tpr_gap_rms = Some(metrics::tpr_gap_rms(&gold, &pred, &g)?);
            }
        }
        Task::Regression => {
            let y = load_values(y_path)?;
            if y.len() != n {
                return Err(Error::invalid(format!("{} task targets for {n} inputs", y.len())));
            }
            let pick = |rows: &[usize]| rows.iter().map(|&i| y[i]).collect::<Vec<_>>();
            let model = LinearRegression::fit(&x_train, &pick(&train))?;
            let pred = model.predict(&x_test)?;
            let gold = pick(&test);
            report.mae = Some(metrics::mae(&gold, &pred)?);
            if let Some(g) = test_groups {
                let errors: Vec<f64> = gold.iter().zip(&pred).map(|(t, p)| (t - p).abs()).collect();
                report.mae_gap = Some(metrics::mae_gap(&errors, &dense_ids(&g))?);
            }
        }
    }
    Ok(report)
}

pub fn format_trace(trace: &AmsalTrace) -> String {
    let mut out = String::from("iteration,seed,objective,accuracy\n");
    for r in &trace.rows {
        let acc = r.accuracy.map(|a| format!("{a:?}")).unwrap_or_default();
        writeln!(out, "{},{},{:?},{acc}", r.iteration, r.seed, r.objective).expect("string write");
    }
    out
}

pub fn format_report(report: &EvalReport) -> String {
    report.entries().iter().map(|(k, v)| format!("{k}={v:?}\n")).collect()
}

fn out_dir(cfg: &PipelineConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

fn load_inputs(cfg: &PipelineConfig) -> Result<(Matrix, GuardedRecords, Option<Assignment>)> {
    let x = load_matrix(cfg.require(&cfg.x, "x")?)?;
    let records = load_records(cfg, x.rows())?;
    let truth = cfg.truth.as_deref().map(|p| load_assignment(p, x.rows(), records.len())).transpose()?;
    Ok((x, records, truth))
}

fn erased_path(cfg: &PipelineConfig, dir: &Path) -> PathBuf {
    dir.join(format!("{ERASED_STEM}.{}", cfg.format.extension()))
}

/// `align` stage: writes the alignment and, for AMSAL, the objective trace.
pub fn run_align(cfg: &PipelineConfig, threads: usize) -> Result<Alignment> {
    cfg.validate()?;
    let (x, records, truth) = load_inputs(cfg)?;
    let alignment = align(cfg, &x, &records, truth.as_ref(), threads)?;
    let dir = out_dir(cfg)?;
    save_ids(alignment.assignment.as_slice(), "record", &dir.join(ASSIGNMENT_FILE))?;
    if let Some(r) = &alignment.amsal {
        write(&dir.join(TRACE_FILE), format_trace(&r.trace).as_bytes())?;
    }
    Ok(alignment)
}

/// `erase` stage: fits an eraser from `cfg.assignment` (or loads `cfg.eraser`)
/// and writes it with the erased inputs.
pub fn run_erase(cfg: &PipelineConfig) -> Result<Eraser> {
    cfg.validate()?;
    let x = load_matrix(cfg.require(&cfg.x, "x")?)?;
    let eraser = match &cfg.eraser {
        Some(p) => load_eraser(p)?,
        None => {
            let records = load_records(cfg, x.rows())?;
            let pi = load_assignment(cfg.require(&cfg.assignment, "assignment")?, x.rows(), records.len())?;
            fit_eraser(cfg, &x, &records, &pi)?
        }
    };
    let erased = apply_eraser(&eraser, &x)?;
    let dir = out_dir(cfg)?;
    if cfg.eraser.is_none() {
        save_eraser(&eraser, &dir.join(ERASER_FILE))?;
    }
    save_matrix_as(&erased, &erased_path(cfg, dir), cfg.format)?;
    Ok(eraser)
}

/// `eval` stage on `cfg.x` as given.
pub fn run_eval(cfg: &PipelineConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let x = load_matrix(cfg.require(&cfg.x, "x")?)?;
    let n = x.rows();
    let read = |p: &Option<PathBuf>| -> Result<Option<Assignment>> {
        p.as_deref().map(|p| load_ids(p).map(Assignment::new)).transpose()
    };
    let (aligned, truth) = (read(&cfg.assignment)?, read(&cfg.truth)?);
    for a in aligned.iter().chain(&truth) {
        if a.len() != n {
            return Err(Error::invalid(format!("alignment covers {} of {n} inputs", a.len())));
        }
    }
    let report = evaluate(cfg, &x, aligned.as_ref(), truth.as_ref())?;
    write(&out_dir(cfg)?.join(REPORT_FILE), format_report(&report).as_bytes())?;
    Ok(report)
}

pub struct PipelineOutput {
    pub alignment: Alignment,
    pub eraser: Eraser,
    pub erased: Matrix,
    pub report: EvalReport,
}

/// Every stage in one process; writes all artifacts under `cfg.out`.
pub fn run_pipeline(cfg: &PipelineConfig, threads: usize) -> Result<PipelineOutput> {
    cfg.validate()?;
    cfg.check_files()?;
    let (x, records, truth) = load_inputs(cfg)?;
    let alignment = align(cfg, &x, &records, truth.as_ref(), threads)?;
    let eraser = match &cfg.eraser {
        Some(p) => load_eraser(p)?,
        None => fit_eraser(cfg, &x, &records, &alignment.assignment)?,
    };
    let erased = apply_eraser(&eraser, &x)?;
    let report = evaluate(cfg, &erased, Some(&alignment.assignment), truth.as_ref())?;
    let dir = out_dir(cfg)?;
    save_ids(alignment.assignment.as_slice(), "record", &dir.join(ASSIGNMENT_FILE))?;
    if let Some(r) = &alignment.amsal {
        write(&dir.join(TRACE_FILE), format_trace(&r.trace).as_bytes())?;
    }
    save_eraser(&eraser, &dir.join(ERASER_FILE))?;
    save_matrix_as(&erased, &erased_path(cfg, dir), cfg.format)?;
    write(&dir.join(REPORT_FILE), format_report(&report).as_bytes())?;
    Ok(PipelineOutput { alignment, eraser, erased, report })
}
