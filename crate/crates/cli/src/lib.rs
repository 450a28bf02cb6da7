//! Batch driver: privacy phase then ADMM for a range of seeds, with per
//! instance trace and load files plus a JSON summary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use privopf::admm::{run_admm, AdmmConfig, AdmmResult};
use privopf::network::{read_case_file, read_reference_dispatch, NetworkModel};
use privopf::privacy::{default_ranges, obfuscate_all, Mechanism, ObfuscatedLoads, PrivacyParams};
use privopf::validation::{fidelity_report, power_flow_residuals, privacy_loss, FeasibilityReport, FidelityReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_AGENT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case_path: PathBuf,
    pub reference_dispatch_path: PathBuf,
    pub epsilon: f64,
    pub alpha: f64,
    pub mechanism: Mechanism,
    pub seed: u64,
    pub num_instances: usize,
    pub admm: AdmmConfig,
    pub output_dir: PathBuf,
    /// 0 picks the rayon default.
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(case_path: PathBuf, reference_dispatch_path: PathBuf, output_dir: PathBuf) -> Self {
        Self {
            case_path,
            reference_dispatch_path,
            epsilon: 1.0,
            alpha: 0.1,
            mechanism: Mechanism::PolarLaplace,
            seed: 0,
            num_instances: 50,
            admm: AdmmConfig::default(),
            output_dir,
            threads: 0,
        }
    }
}

/// One instance's entry in `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: usize,
    pub seed: u64,
    pub noise_shape: String,
    pub wall_time_min: f64,
    /// Agent failure that aborted the run; `metrics` is then absent.
    pub error: Option<String>,
    pub metrics: Option<InstanceMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub iterations: usize,
    pub converged: bool,
    /// Residuals at the last iteration before boosting may fire, or at the
    /// final iteration when the run stopped earlier.
    pub eps_p_pre_boost: f64,
    pub eps_d_pre_boost: f64,
    pub eps_p_final: f64,
    pub eps_d_final: f64,
    pub rho_final: f64,
    pub privacy_loss: f64,
    pub percent_diff: f64,
    pub fidelity: FidelityReport,
    pub feasibility: FeasibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub records: Vec<InstanceRecord>,
}

/// Result of a batch: the summary written to disk and the exit code.
#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub exit_code: i32,
}

/// Loads and checks everything before any file is written.
pub fn prepare(cfg: &ExperimentConfig) -> Result<(NetworkModel, PrivacyParams), CliError> {
    if cfg.num_instances == 0 {
        return Err(CliError::Config("--instances must be at least 1".into()));
    }
    cfg.admm.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let params = PrivacyParams::new(cfg.epsilon, cfg.alpha, cfg.mechanism).map_err(|e| CliError::Config(e.to_string()))?;
    let model = read_case_file(&cfg.case_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", cfg.case_path.display())))?;
    let dispatch = read_reference_dispatch(&cfg.reference_dispatch_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", cfg.reference_dispatch_path.display())))?;
    let model = model.load_reference_costs(&dispatch).map_err(|e| CliError::Config(e.to_string()))?;
    let reference_total: f64 = model.generators().iter().filter_map(|g| g.reference_cost).sum();
    if reference_total == 0.0 {
        return Err(CliError::Config("total reference cost is zero; cost differences are undefined".into()));
    }
    Ok((model, params))
}

/// Runs every instance and writes `trace_k.csv`, `loads_k.csv` and
/// `summary.json` to the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let (model, params) = prepare(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::Io(format!("{}: {e}", cfg.output_dir.display())))?;

    let outputs: Vec<Result<InstanceRecord, CliError>> = pool.install(|| {
        (0..cfg.num_instances)
            .into_par_iter()
            .map(|k| run_instance(cfg, &model, &params, k))
            .collect()
    });
    let records = outputs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let exit_code = if records.iter().any(|r| r.error.is_some()) { EXIT_AGENT } else { EXIT_OK };
    let summary = Summary { config: cfg.clone(), records };
    let json = serde_json::to_string_pretty(&summary).expect("summary is serializable");
    write(&cfg.output_dir.join("summary.json"), json.as_bytes())?;
    Ok(RunOutcome { summary, exit_code })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn run_instance(
    cfg: &ExperimentConfig,
    model: &NetworkModel,
    params: &PrivacyParams,
    k: usize,
) -> Result<InstanceRecord, CliError> {
    let start = Instant::now();
    let seed = cfg.seed.wrapping_add(k as u64);
    let ranges = (params.mechanism == Mechanism::Piecewise).then(|| default_ranges(model));
    let noisy = obfuscate_all(model, params, ranges.as_deref(), seed).map_err(|e| CliError::Config(e.to_string()))?;
    // The original loads stop here: only `noisy` reaches the coordinator.
    let outcome = run_admm(model, &noisy, &cfg.admm);
    let (error, metrics) = match outcome {
        Ok(result) => {
            write(&cfg.output_dir.join(format!("trace_{k}.csv")), result.trace.to_csv_string().as_bytes())?;
            write(&cfg.output_dir.join(format!("loads_{k}.csv")), loads_csv(&noisy, &result).as_bytes())?;
            (None, Some(metrics(model, &noisy, &result, &cfg.admm)))
        }
        Err(e) => (Some(e.to_string()), None),
    };
    Ok(InstanceRecord {
        instance: k,
        seed,
        noise_shape: params.mechanism.noise_shape().to_string(),
        wall_time_min: start.elapsed().as_secs_f64() / 60.0,
        error,
        metrics,
    })
}

fn metrics(model: &NetworkModel, noisy: &ObfuscatedLoads, result: &AdmmResult, admm: &AdmmConfig) -> InstanceMetrics {
    let last = result.trace.last().expect("t_max >= 1");
    let pre = result.trace.at(admm.pre_boost_iteration()).unwrap_or(last);
    let fidelity = fidelity_report(model, &result.state.consensus.generator, admm.beta)
        .expect("reference costs were loaded and dispatch sizes match");
    let z = &result.state.bus;
    let feasibility = power_flow_residuals(model, &z.voltage, &z.generator, &z.load, &z.flow)
        .expect("bus variables match the model dimensions");
    InstanceMetrics {
        iterations: result.iterations_used,
        converged: result.converged,
        eps_p_pre_boost: pre.eps_p,
        eps_d_pre_boost: pre.eps_d,
        eps_p_final: last.eps_p,
        eps_d_final: last.eps_d,
        rho_final: result.state.rho,
        privacy_loss: privacy_loss(&result.hat_loads, noisy.values()).expect("one hat load per noisy load"),
        percent_diff: fidelity.percent_diff,
        fidelity,
        feasibility,
    }
}

/// `load_index,p_tilde,q_tilde,p_hat,q_hat`.
pub fn loads_csv(noisy: &ObfuscatedLoads, result: &AdmmResult) -> String {
    let mut out = String::from("load_index,p_tilde,q_tilde,p_hat,q_hat\n");
    for (k, (t, h)) in noisy.values().iter().zip(&result.hat_loads).enumerate() {
        out.push_str(&format!("{k},{:?},{:?},{:?},{:?}\n", t.re, t.im, h.re, h.im));
    }
    out
}

/// Means over instances of the Table I quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryMeans {
    pub primal: f64,
    pub primal_boosted: f64,
    pub dual: f64,
    pub dual_boosted: f64,
    pub time_min: f64,
    pub count: usize,
}

/// Averages over records that completed; `None` if none did.
pub fn summary_means(summary: &Summary) -> Option<SummaryMeans> {
    let done: Vec<(&InstanceRecord, &InstanceMetrics)> =
        summary.records.iter().filter_map(|r| r.metrics.as_ref().map(|m| (r, m))).collect();
    if done.is_empty() {
        return None;
    }
    let n = done.len() as f64;
    let mean = |f: &dyn Fn(&InstanceRecord, &InstanceMetrics) -> f64| done.iter().map(|(r, m)| f(r, m)).sum::<f64>() / n;
    Some(SummaryMeans {
        primal: mean(&|_, m| m.eps_p_pre_boost),
        primal_boosted: mean(&|_, m| m.eps_p_final),
        dual: mean(&|_, m| m.eps_d_pre_boost),
        dual_boosted: mean(&|_, m| m.eps_d_final),
        time_min: mean(&|r, _| r.wall_time_min),
        count: done.len(),
    })
}

/// `[min, median, mean, max]` of the signed cost difference (percent) over
/// completed records.
pub fn percent_diff_stats(summary: &Summary) -> Option<[f64; 4]> {
    let mut v: Vec<f64> = summary.records.iter().filter_map(|r| r.metrics.as_ref().map(|m| m.percent_diff)).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    Some([v[0], median, v.iter().sum::<f64>() / n as f64, v[n - 1]])
}

/// Table of means; `*` marks values after boosting.
pub fn format_summary(summary: &Summary) -> String {
    let mut out = format!(
        "{:<24} {:>11} {:>11} {:>11} {:>11} {:>10} {:>5}\n",
        "case", "Primal", "Primal*", "Dual", "Dual*", "Time(min)", "n"
    );
    let name = summary.config.case_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match summary_means(summary) {
        Some(m) => out.push_str(&format!(
            "{:<24} {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e} {:>10.4} {:>5}\n",
            name, m.primal, m.primal_boosted, m.dual, m.dual_boosted, m.time_min, m.count
        )),
        None => out.push_str(&format!("{name:<24} no completed instances\n")),
    }
    if let Some([min, median, mean, max]) = percent_diff_stats(summary) {
        out.push_str(&format!(
            "cost difference (%): min {min:.4}  median {median:.4}  mean {mean:.4}  max {max:.4}\n"
        ));
    }
    let failed = summary.records.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        out.push_str(&format!("{failed} instance(s) failed\n"));
    }
    out
}

pub fn read_summary(path: &Path) -> Result<Summary, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: malformed summary: {e}", path.display())))
}
