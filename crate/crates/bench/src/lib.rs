//! Benchmark harness comparing allocation methods on seeded random instances.
//!
//! The binary is a thin layer over [`generate`], [`run`] and the summary
//! helpers here, so tests can drive the same code paths directly.

pub mod files;

use std::time::Instant;

use contention::allocation::{
    assignment_cost, exhaustive_search, hungarian_assign, scenario1_ground_truth,
    scenario2_cost_matrix, scenario2_entry_ground_truth, CostModel, Method, Scenario1Params,
    Scenario1Spec, Scenario2Params, Scenario2Spec,
};
use contention::OrthantOptions;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::files::{
    InstanceResults, MethodOutcome, MethodSummary, ResultsFile, ScenarioBody, ScenarioFile,
    TimingRecord, FILE_VERSION, RESULTS_FORMAT, SCENARIO_FORMAT, TOOL_VERSION,
};

/// Errors split by exit status: usage problems exit with 2, failures during computation with 1.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchError {
    Usage(String),
    Compute(String),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Usage(_) => 2,
            BenchError::Compute(_) => 1,
        }
    }
}

impl std::fmt::Display for BenchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BenchError::Usage(m) => write!(f, "usage error: {m}"),
            BenchError::Compute(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<contention::Error> for BenchError {
    fn from(e: contention::Error) -> Self {
        BenchError::Compute(e.to_string())
    }
}

/// Derives an independent seed for a labelled sub-task (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, label: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(label.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const LABEL_INSTANCE: u64 = 1;
const LABEL_METHOD: u64 = 2;
const LABEL_TRUTH: u64 = 3;

/// What to generate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GenerateRequest {
    Scenario1(Scenario1Params),
    Scenario2(Scenario2Params),
}

/// Builds a scenario file of `instances` seeded instances.
pub fn generate(
    request: &GenerateRequest,
    instances: usize,
    seed: u64,
) -> Result<ScenarioFile, BenchError> {
    if instances == 0 {
        return Err(BenchError::Usage("instance count must be positive".into()));
    }
    let usage = |e: contention::Error| BenchError::Usage(e.to_string());
    let body = match request {
        GenerateRequest::Scenario1(params) => {
            params.validate().map_err(usage)?;
            let specs = (0..instances)
                .map(|i| {
                    Scenario1Spec::generate(params, derive_seed(seed, LABEL_INSTANCE, i as u64))
                })
                .collect::<Result<_, _>>()?;
            ScenarioBody::Scenario1 {
                params: params.clone(),
                instances: specs,
            }
        }
        GenerateRequest::Scenario2(params) => {
            params.validate().map_err(usage)?;
            let specs = (0..instances)
                .map(|i| {
                    Scenario2Spec::generate(params, derive_seed(seed, LABEL_INSTANCE, i as u64))
                })
                .collect::<Result<_, _>>()?;
            ScenarioBody::Scenario2 {
                params: params.clone(),
                instances: specs,
            }
        }
    };
    Ok(ScenarioFile {
        format: SCENARIO_FORMAT.into(),
        version: FILE_VERSION,
        tool_version: TOOL_VERSION.into(),
        seed,
        body,
    })
}

/// Settings of one benchmark run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub methods: Vec<Method>,
    pub ground_truth_samples: u64,
    pub seed: u64,
    /// Relative tolerance of order-probability integration.
    pub tolerance: f64,
    pub model: CostModel,
}

impl RunConfig {
    pub fn new(methods: Vec<Method>, ground_truth_samples: u64, seed: u64) -> Self {
        let model = CostModel::default();
        Self {
            methods,
            ground_truth_samples,
            seed,
            tolerance: model.orthant.rel_tol,
            model,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.model.orthant = OrthantOptions {
            rel_tol: tolerance,
            ..self.model.orthant
        };
        self
    }
}

struct Chosen {
    assignment: Vec<usize>,
    predicted: f64,
    seconds: f64,
}

fn run_scenario1(
    spec: &Scenario1Spec,
    index: usize,
    cfg: &RunConfig,
) -> Result<Vec<(Chosen, f64, f64)>, BenchError> {
    let truth_seed = derive_seed(cfg.seed, LABEL_TRUTH, index as u64);
    cfg.methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let started = Instant::now();
            let (a, predicted) = exhaustive_search(
                spec,
                method,
                derive_seed(cfg.seed, LABEL_METHOD, (index * 64 + k) as u64),
            )?;
            let seconds = started.elapsed().as_secs_f64();
            // Every method is judged on the same realizations.
            let truth = scenario1_ground_truth(spec, &a, cfg.ground_truth_samples, truth_seed)?;
            Ok((
                Chosen {
                    assignment: spec.robot_locations(&a),
                    predicted,
                    seconds,
                },
                truth.mean,
                truth.standard_error(),
            ))
        })
        .collect()
}

fn run_scenario2(
    spec: &Scenario2Spec,
    index: usize,
    cfg: &RunConfig,
) -> Result<Vec<(Chosen, f64, f64)>, BenchError> {
    let n = spec.robots();
    let chosen = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| -> Result<Chosen, BenchError> {
            let started = Instant::now();
            let costs = scenario2_cost_matrix(
                spec,
                method,
                &cfg.model,
                derive_seed(cfg.seed, LABEL_METHOD, (index * 64 + k) as u64),
            )?;
            let assignment = hungarian_assign(&costs)?;
            let seconds = started.elapsed().as_secs_f64();
            Ok(Chosen {
                predicted: assignment_cost(&costs, &assignment),
                assignment,
                seconds,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    // Ground truth per pairing, shared by methods choosing the same pairing.
    let mut pairs: Vec<(usize, usize)> = chosen
        .iter()
        .flat_map(|c| c.assignment.iter().enumerate().map(|(i, &j)| (i, j)))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let truths: Vec<((usize, usize), (f64, f64))> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let seed = derive_seed(cfg.seed, LABEL_TRUTH, ((index * n + i) * n + j) as u64);
            let m = scenario2_entry_ground_truth(spec, i, j, cfg.ground_truth_samples, seed);
            ((i, j), (m.mean, m.variance() / m.count as f64))
        })
        .collect();
    let lookup = |i: usize, j: usize| {
        truths[truths
            .binary_search_by_key(&(i, j), |t| t.0)
            .expect("computed")]
        .1
    };
    Ok(chosen
        .into_iter()
        .map(|c| {
            let (mean, var) =
                c.assignment
                    .iter()
                    .enumerate()
                    .fold((0.0, 0.0), |(m, v), (i, &j)| {
                        let (em, ev) = lookup(i, j);
                        (m + em, v + ev)
                    });
            (c, mean, var.sqrt())
        })
        .collect())
}

/// Mean and normal-approximation 95% confidence half-width.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// Outcome of [`run`]: the deterministic results and the separate wall times.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub results: ResultsFile,
    pub timings: Vec<TimingRecord>,
}

/// Runs every method on every instance of a scenario file.
///
/// `scenario_bytes` must be the raw file so its hash can be recorded.
pub fn run(scenario_bytes: &[u8], cfg: &RunConfig) -> Result<RunOutput, BenchError> {
    let scenario = files::parse_scenario(scenario_bytes)?;
    if cfg.methods.is_empty() {
        return Err(BenchError::Usage("no methods given".into()));
    }
    if cfg.ground_truth_samples == 0 {
        return Err(BenchError::Usage(
            "ground-truth sample count must be positive".into(),
        ));
    }
    if !(cfg.tolerance > 0.0 && cfg.tolerance < 1.0) {
        return Err(BenchError::Usage("tolerance must lie in (0, 1)".into()));
    }
    let per_instance: Vec<Vec<(Chosen, f64, f64)>> = match &scenario.body {
        ScenarioBody::Scenario1 { instances, .. } => instances
            .par_iter()
            .enumerate()
            .map(|(i, s)| run_scenario1(s, i, cfg))
            .collect::<Result<_, _>>()?,
        ScenarioBody::Scenario2 { instances, .. } => instances
            .par_iter()
            .enumerate()
            .map(|(i, s)| run_scenario2(s, i, cfg))
            .collect::<Result<_, _>>()?,
    };

    let tags: Vec<String> = cfg.methods.iter().map(|m| m.to_string()).collect();
    let mut instances = Vec::with_capacity(per_instance.len());
    let mut timings = Vec::new();
    for (index, outcomes) in per_instance.into_iter().enumerate() {
        let best = outcomes.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
        let outcomes = outcomes
            .into_iter()
            .zip(&tags)
            .map(|((chosen, truth, se), tag)| {
                timings.push(TimingRecord {
                    instance: index,
                    method: tag.clone(),
                    wall_time_s: chosen.seconds,
                });
                MethodOutcome {
                    method: tag.clone(),
                    assignment: chosen.assignment,
                    predicted_cost: chosen.predicted,
                    ground_truth: truth,
                    ground_truth_std_error: se,
                    regret: truth - best,
                }
            })
            .collect();
        instances.push(InstanceResults { index, outcomes });
    }
    let summary = summarize(&tags, &instances);
    Ok(RunOutput {
        results: ResultsFile {
            format: RESULTS_FORMAT.into(),
            version: FILE_VERSION,
            tool_version: TOOL_VERSION.into(),
            scenario_kind: scenario.body.kind().into(),
            scenario_hash: files::sha256_hex(scenario_bytes),
            seed: cfg.seed,
            ground_truth_samples: cfg.ground_truth_samples,
            tolerance: cfg.tolerance,
            methods: tags,
            rule: cfg.model.rule.to_text(),
            instances,
            summary,
        },
        timings,
    })
}

/// Per-method regret statistics over instances.
pub fn summarize(tags: &[String], instances: &[InstanceResults]) -> Vec<MethodSummary> {
    tags.iter()
        .map(|tag| {
            let picked: Vec<&MethodOutcome> = instances
                .iter()
                .filter_map(|inst| inst.outcomes.iter().find(|o| &o.method == tag))
                .collect();
            let regrets: Vec<f64> = picked.iter().map(|o| o.regret).collect();
            let (mean_regret, half) = mean_ci95(&regrets);
            let n = picked.len().max(1) as f64;
            MethodSummary {
                method: tag.clone(),
                instances: picked.len(),
                mean_regret,
                regret_ci_half_width: half,
                mean_ground_truth: picked.iter().map(|o| o.ground_truth).sum::<f64>() / n,
                mean_predicted_cost: picked.iter().map(|o| o.predicted_cost).sum::<f64>() / n,
            }
        })
        .collect()
}

/// One point of the regret versus computation time figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigurePoint {
    pub method: String,
    pub x_mean_wall_time_s: f64,
    pub y_mean_regret: f64,
    pub yerr_ci_half_width: f64,
}

pub fn figure_points(summary: &[MethodSummary], timings: &[TimingRecord]) -> Vec<FigurePoint> {
    summary
        .iter()
        .map(|s| {
            let times: Vec<f64> = timings
                .iter()
                .filter(|t| t.method == s.method)
                .map(|t| t.wall_time_s)
                .collect();
            FigurePoint {
                method: s.method.clone(),
                x_mean_wall_time_s: times.iter().sum::<f64>() / times.len().max(1) as f64,
                y_mean_regret: s.mean_regret,
                yerr_ci_half_width: s.regret_ci_half_width,
            }
        })
        .collect()
}

/// Serializes records as CSV with a header row in field order.
pub fn to_csv<T: Serialize>(records: &[T]) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)
            .map_err(|e| BenchError::Compute(e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| BenchError::Compute(e.to_string()))
}

pub fn read_timings(bytes: &[u8]) -> Result<Vec<TimingRecord>, BenchError> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| BenchError::Usage(format!("invalid timings file: {e}")))
}

/// Plain-text table of a results summary.
pub fn format_summary(results: &ResultsFile) -> String {
    let mut out = format!(
        "{} instances of {} (scenario {}), ground truth from {} samples\n",
        results.instances.len(),
        results.scenario_kind,
        &results.scenario_hash[..12.min(results.scenario_hash.len())],
        results.ground_truth_samples
    );
    out.push_str(&format!(
        "{:<12} {:>10} {:>12} {:>12} {:>14}\n",
        "method", "instances", "mean regret", "95% CI ±", "mean cost"
    ));
    for s in &results.summary {
        out.push_str(&format!(
            "{:<12} {:>10} {:>12.5} {:>12.5} {:>14.5}\n",
            s.method, s.instances, s.mean_regret, s.regret_ci_half_width, s.mean_ground_truth
        ));
    }
    out
}
