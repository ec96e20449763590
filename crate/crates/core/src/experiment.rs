//! Seeded attack trials and their aggregation into per-(algorithm, length)
//! records.
//!
//! A data point is `messages_per_point` messages, each attacked
//! `runs_per_message` times. For every message the run with the lowest cost
//! is kept (the attacker cannot see the true key), and the kept runs'
//! bits-matched values are averaged.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cipher::{encrypt_bytes, SdesKey};
use crate::langmodel::{KeyFitness, LangError, LanguageModel, NGramWeights};
use crate::search::{
    brute_force, ga_run, ma_run, sa_run, Candidate, ConfigError, Counted, GaConfig, MaConfig,
    Memoized, SaConfig,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("message is empty")]
    EmptyMessage,
    #[error("corpus has {available} symbols; a {requested}-symbol excerpt was requested")]
    InsufficientCorpus { available: usize, requested: usize },
    #[error("unknown algorithm {0:?} (expected ga, ma, sa or brute)")]
    UnknownAlgorithm(String),
    #[error("{algorithm} at length {length}, message {message}, run {run}: {source}")]
    Trial {
        algorithm: Algorithm,
        length: usize,
        message: usize,
        run: usize,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("CSV line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "MA")]
    Ma,
    #[serde(rename = "SA")]
    Sa,
    #[serde(rename = "BRUTE")]
    Brute,
}

impl Algorithm {
    /// The three metaheuristics, in the order the comparison table lists them.
    pub const METAHEURISTICS: [Algorithm; 3] = [Algorithm::Ma, Algorithm::Ga, Algorithm::Sa];

    fn code(self) -> u64 {
        match self {
            Algorithm::Ga => 1,
            Algorithm::Ma => 2,
            Algorithm::Sa => 3,
            Algorithm::Brute => 4,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ga => "GA",
            Algorithm::Ma => "MA",
            Algorithm::Sa => "SA",
            Algorithm::Brute => "BRUTE",
        })
    }
}

impl FromStr for Algorithm {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ga" => Ok(Algorithm::Ga),
            "ma" => Ok(Algorithm::Ma),
            "sa" => Ok(Algorithm::Sa),
            "brute" => Ok(Algorithm::Brute),
            _ => Err(ExperimentError::UnknownAlgorithm(s.to_string())),
        }
    }
}

/// Engine parameters for every algorithm.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolverSettings {
    pub ga: GaConfig,
    pub ma: MaConfig,
    pub sa: SaConfig,
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ga.validate()?;
        self.ma.validate()?;
        self.sa.validate()
    }
}

/// Outcome of one attack run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub algorithm: Algorithm,
    pub ciphertext_len: usize,
    pub true_key: SdesKey,
    pub found_key: SdesKey,
    pub found_cost: f64,
    pub bits_matched: u32,
    pub elapsed_s: f64,
    pub seed: u64,
    pub evaluations: u64,
}

impl TrialResult {
    /// Equality on everything except wall-clock time.
    pub fn same_outcome(&self, other: &TrialResult) -> bool {
        TrialResult {
            elapsed_s: 0.0,
            ..self.clone()
        } == TrialResult {
            elapsed_s: 0.0,
            ..other.clone()
        }
    }
}

/// Aggregate of one (algorithm, ciphertext length) data point.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub algorithm: Algorithm,
    pub ciphertext_len: usize,
    pub mean_bits: f64,
    pub std_dev_bits: f64,
    pub mean_time: f64,
    pub trials: usize,
}

/// Number of positions where the two keys agree.
pub fn bits_matched(a: SdesKey, b: SdesKey) -> u32 {
    SdesKey::BITS as u32 - a.hamming_distance(b)
}

/// A contiguous `length`-symbol excerpt of `corpus` at a random offset.
pub fn generate_message(
    corpus: &str,
    length: usize,
    rng: &mut impl Rng,
) -> Result<String, ExperimentError> {
    let symbols: Vec<char> = corpus.chars().collect();
    if symbols.len() < length {
        return Err(ExperimentError::InsufficientCorpus {
            available: symbols.len(),
            requested: length,
        });
    }
    let offset = rng.gen_range(0..=symbols.len() - length);
    Ok(symbols[offset..offset + length].iter().collect())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable mix of a base seed with a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &part| {
        splitmix64(acc ^ splitmix64(part))
    })
}

const MESSAGE_DOMAIN: u64 = 0x006d_6573_7361_6765;

/// Seed for the message and true key of one message slot. Independent of the
/// algorithm, so every algorithm attacks the same messages.
pub fn message_seed(base_seed: u64, length: usize, message: usize) -> u64 {
    derive_seed(base_seed, &[MESSAGE_DOMAIN, length as u64, message as u64])
}

/// Seed for the engine RNG of one run.
pub fn trial_seed(
    base_seed: u64,
    algorithm: Algorithm,
    length: usize,
    message: usize,
    run: usize,
) -> u64 {
    derive_seed(
        base_seed,
        &[algorithm.code(), length as u64, message as u64, run as u64],
    )
}

/// Draw the message excerpt and the true key for one message slot.
pub fn draw_message(
    corpus: &str,
    length: usize,
    seed: u64,
) -> Result<(String, SdesKey), ExperimentError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let message = generate_message(corpus, length, &mut rng)?;
    let key = SdesKey::from_index(rng.gen_range(0..SdesKey::SPACE));
    Ok((message, key))
}

/// Encrypt `message` under `true_key` and attack the ciphertext with one
/// engine.
pub fn run_trial(
    algorithm: Algorithm,
    message: &str,
    true_key: SdesKey,
    model: &LanguageModel,
    weights: NGramWeights,
    settings: &SolverSettings,
    seed: u64,
) -> Result<TrialResult, ExperimentError> {
    if message.is_empty() {
        return Err(ExperimentError::EmptyMessage);
    }
    let ciphertext = encrypt_bytes(message.as_bytes(), true_key);
    let fitness = KeyFitness::new(&ciphertext, model, weights)?;
    let objective = Counted::new(Memoized::new(fitness));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let start = Instant::now();
    let found: Candidate = match algorithm {
        Algorithm::Ga => ga_run(&settings.ga, &objective, &mut rng),
        Algorithm::Ma => ma_run(&settings.ma, &objective, &mut rng),
        Algorithm::Sa => sa_run(&settings.sa, &objective, &mut rng),
        Algorithm::Brute => brute_force(&objective),
    };
    let elapsed_s = start.elapsed().as_secs_f64();

    Ok(TrialResult {
        algorithm,
        ciphertext_len: message.chars().count(),
        true_key,
        found_key: found.key,
        found_cost: found.cost,
        bits_matched: bits_matched(true_key, found.key),
        elapsed_s,
        seed,
        evaluations: objective.calls(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanPoint {
    pub algorithm: Algorithm,
    pub ciphertext_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub points: Vec<PlanPoint>,
    pub messages_per_point: usize,
    pub runs_per_message: usize,
    pub base_seed: u64,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
}

/// Ciphertext lengths 100, 200, ..., 1000.
pub fn default_lengths() -> Vec<usize> {
    (1..=10).map(|i| i * 100).collect()
}

impl ExperimentPlan {
    /// Every (length, algorithm) pair, lengths outermost.
    pub fn grid(algorithms: &[Algorithm], lengths: &[usize], base_seed: u64) -> Self {
        let points = lengths
            .iter()
            .flat_map(|&ciphertext_len| {
                algorithms.iter().map(move |&algorithm| PlanPoint {
                    algorithm,
                    ciphertext_len,
                })
            })
            .collect();
        Self {
            points,
            messages_per_point: 10,
            runs_per_message: 10,
            base_seed,
            workers: 0,
        }
    }

    /// Three metaheuristics over lengths 100..=1000, 10 messages x 10 runs.
    pub fn standard(base_seed: u64) -> Self {
        Self::grid(&Algorithm::METAHEURISTICS, &default_lengths(), base_seed)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<ExperimentRecord>,
    /// Every run, ordered by (point, message, run).
    pub trials: Vec<TrialResult>,
}

/// Mean and population standard deviation.
pub fn mean_and_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// The lowest-cost run of one message; ties keep the earliest run.
pub fn best_run(runs: &[TrialResult]) -> Option<&TrialResult> {
    runs.iter().reduce(|best, t| {
        if t.found_cost < best.found_cost {
            t
        } else {
            best
        }
    })
}

/// Aggregate one data point from its runs grouped by message.
pub fn aggregate_point(
    algorithm: Algorithm,
    ciphertext_len: usize,
    runs_by_message: &[&[TrialResult]],
) -> ExperimentRecord {
    let best: Vec<&TrialResult> = runs_by_message
        .iter()
        .filter_map(|runs| best_run(runs))
        .collect();
    let bits: Vec<f64> = best.iter().map(|t| f64::from(t.bits_matched)).collect();
    let (mean_bits, std_dev_bits) = mean_and_std(&bits);
    let times: Vec<f64> = best.iter().map(|t| t.elapsed_s).collect();
    ExperimentRecord {
        algorithm,
        ciphertext_len,
        mean_bits,
        std_dev_bits,
        mean_time: mean_and_std(&times).0,
        trials: best.len(),
    }
}

/// Run every trial of the plan (in parallel when `plan.workers != 1`) and
/// aggregate. Results do not depend on the worker count.
pub fn run_experiment(
    plan: &ExperimentPlan,
    corpus: &str,
    model: &LanguageModel,
    weights: NGramWeights,
    settings: &SolverSettings,
) -> Result<ExperimentOutcome, ExperimentError> {
    settings.validate()?;
    let mut jobs = Vec::new();
    for (p, point) in plan.points.iter().enumerate() {
        for m in 0..plan.messages_per_point {
            for r in 0..plan.runs_per_message {
                jobs.push((p, point, m, r));
            }
        }
    }

    let run_job = |&(_, point, m, r): &(usize, &PlanPoint, usize, usize)| {
        let len = point.ciphertext_len;
        let context = |e: ExperimentError| ExperimentError::Trial {
            algorithm: point.algorithm,
            length: len,
            message: m,
            run: r,
            source: Box::new(e),
        };
        let (message, key) =
            draw_message(corpus, len, message_seed(plan.base_seed, len, m)).map_err(context)?;
        let seed = trial_seed(plan.base_seed, point.algorithm, len, m, r);
        run_trial(
            point.algorithm,
            &message,
            key,
            model,
            weights,
            settings,
            seed,
        )
        .map_err(context)
    };

    let results: Vec<Result<TrialResult, ExperimentError>> = if plan.workers == 1 {
        jobs.iter().map(run_job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(plan.workers)
            .build()
            .map_err(|e| ExperimentError::Pool(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(run_job).collect())
    };
    let trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let per_point = plan.messages_per_point * plan.runs_per_message;
    let records = plan
        .points
        .iter()
        .enumerate()
        .map(|(p, point)| {
            let point_trials = &trials[p * per_point..(p + 1) * per_point];
            let groups: Vec<&[TrialResult]> =
                point_trials.chunks(plan.runs_per_message.max(1)).collect();
            aggregate_point(point.algorithm, point.ciphertext_len, &groups)
        })
        .collect();
    Ok(ExperimentOutcome { records, trials })
}

pub const CSV_HEADER: &str = "algorithm,ciphertext_len,mean_bits,std_dev_bits,mean_time_s,trials";

pub fn emit_csv(records: &[ExperimentRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{}",
            r.algorithm, r.ciphertext_len, r.mean_bits, r.std_dev_bits, r.mean_time, r.trials
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<ExperimentRecord>, ExperimentError> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(ExperimentError::Csv {
            line: 1,
            message: "missing or unexpected header".into(),
        });
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: &str| ExperimentError::Csv {
            line: line_no,
            message: message.into(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        let [algorithm, len, mean, std, time, trials] = fields[..] else {
            return Err(bad("expected 6 fields"));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        records.push(ExperimentRecord {
            algorithm: algorithm.parse().map_err(|_| bad("bad algorithm"))?,
            ciphertext_len: len.parse().map_err(|_| bad("bad length"))?,
            mean_bits: num(mean)?,
            std_dev_bits: num(std)?,
            mean_time: num(time)?,
            trials: trials.parse().map_err(|_| bad("bad trial count"))?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: &str) -> SdesKey {
        s.parse().unwrap()
    }

    fn trial(cost: f64, bits: u32) -> TrialResult {
        TrialResult {
            algorithm: Algorithm::Ga,
            ciphertext_len: 100,
            true_key: key("0000000000"),
            found_key: key("0000000000"),
            found_cost: cost,
            bits_matched: bits,
            elapsed_s: 0.5,
            seed: 1,
            evaluations: 10,
        }
    }

    #[test]
    fn bits_matched_examples() {
        let k = key("1010000010");
        assert_eq!(bits_matched(k, k), 10);
        assert_eq!(bits_matched(k, k.complement()), 0);
        assert_eq!(bits_matched(k, key("1010000011")), 9);
    }

    #[test]
    fn message_excerpts() {
        let corpus = "THE CAT SAT ON THE MAT";
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(generate_message(corpus, 0, &mut rng).unwrap(), "");
        let a = generate_message(corpus, 7, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_message(corpus, 7, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        assert!(corpus.contains(&a));
        assert!(matches!(
            generate_message(corpus, 100, &mut rng),
            Err(ExperimentError::InsufficientCorpus { .. })
        ));
    }

    #[test]
    fn best_run_uses_cost_not_bits() {
        // The lowest-cost run recovered fewer bits than a costlier one.
        let runs = [trial(0.40, 10), trial(0.35, 6), trial(0.50, 9)];
        assert_eq!(best_run(&runs).unwrap().bits_matched, 6);
        let record = aggregate_point(Algorithm::Ga, 100, &[&runs]);
        assert_eq!(record.mean_bits, 6.0);
        assert_eq!(record.trials, 1);
    }

    #[test]
    fn aggregation_uses_population_std() {
        let a = [trial(0.1, 8)];
        let b = [trial(0.1, 10)];
        let record = aggregate_point(Algorithm::Ma, 500, &[&a, &b]);
        assert_eq!(record.mean_bits, 9.0);
        assert_eq!(record.std_dev_bits, 1.0);
        assert_eq!(record.mean_time, 0.5);
        assert_eq!(record.trials, 2);
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("MA".parse::<Algorithm>().unwrap(), Algorithm::Ma);
        assert_eq!("brute".parse::<Algorithm>().unwrap(), Algorithm::Brute);
        assert!(matches!(
            "tabu".parse::<Algorithm>(),
            Err(ExperimentError::UnknownAlgorithm(_))
        ));
        assert_eq!(Algorithm::Sa.to_string(), "SA");
    }

    #[test]
    fn csv_shapes() {
        assert_eq!(emit_csv(&[]), format!("{CSV_HEADER}\n"));
        let record = ExperimentRecord {
            algorithm: Algorithm::Ma,
            ciphertext_len: 1000,
            mean_bits: 9.17,
            std_dev_bits: 1.49,
            mean_time: 0.0123,
            trials: 10,
        };
        let csv = emit_csv(std::slice::from_ref(&record));
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(
            csv.lines().nth(1).unwrap(),
            "MA,1000,9.1700,1.4900,0.0123,10"
        );
        assert_eq!(parse_csv(&csv).unwrap(), vec![record]);
        assert!(parse_csv("nope\n").is_err());
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(derive_seed(42, &[1, 2, 3]), derive_seed(42, &[1, 2, 3]));
        assert_ne!(derive_seed(42, &[1, 2, 3]), derive_seed(42, &[1, 3, 2]));
        assert_ne!(
            trial_seed(7, Algorithm::Ga, 100, 0, 0),
            trial_seed(7, Algorithm::Ma, 100, 0, 0)
        );
        assert_eq!(message_seed(7, 100, 3), message_seed(7, 100, 3));
    }

    #[test]
    fn standard_plan_layout() {
        let plan = ExperimentPlan::standard(1);
        assert_eq!(plan.points.len(), 30);
        assert_eq!((plan.messages_per_point, plan.runs_per_message), (10, 10));
        assert_eq!(
            plan.points[0],
            PlanPoint {
                algorithm: Algorithm::Ma,
                ciphertext_len: 100
            }
        );
        assert_eq!(
            plan.points[29],
            PlanPoint {
                algorithm: Algorithm::Sa,
                ciphertext_len: 1000
            }
        );
    }
}
