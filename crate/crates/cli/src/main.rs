//! `sdes`: encrypt and decrypt with SDES, build n-gram models, and run key
//! recovery attacks and comparison experiments.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or validation
//! error.

mod config;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rand::SeedableRng;
use sdes_core::cipher::{decrypt_bytes, encrypt_bytes, SdesKey};
use sdes_core::experiment::{
    default_lengths, emit_csv, run_experiment, Algorithm, ExperimentError, ExperimentPlan,
};
use sdes_core::langmodel::{build_model, normalize_text, KeyFitness, LangError, LanguageModel};
use sdes_core::search::{brute_force, ga_run, ma_run, sa_run, Counted, Memoized};

use config::RunConfig;

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl From<LangError> for CliError {
    fn from(e: LangError) -> Self {
        match e {
            LangError::Io(_) | LangError::Format { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let usage = match &e {
            ExperimentError::Trial { source, .. } => !matches!(
                **source,
                ExperimentError::Lang(LangError::Io(_)) | ExperimentError::Pool(_)
            ),
            ExperimentError::Pool(_) | ExperimentError::Lang(LangError::Io(_)) => false,
            _ => true,
        };
        if usage {
            CliError::Usage(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(
    name = "sdes",
    version,
    about = "SDES cipher and metaheuristic key-recovery workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encrypt a byte stream (ECB, one byte per block).
    Encrypt(CryptArgs),
    /// Decrypt a byte stream (ECB, one byte per block).
    Decrypt(CryptArgs),
    /// Build an n-gram model file from a text corpus.
    BuildStats {
        /// Corpus text file.
        #[arg(long)]
        corpus: PathBuf,
        /// Model file to write.
        #[arg(long)]
        output: PathBuf,
    },
    /// Recover the key of a ciphertext with one search engine.
    Attack {
        /// ga, ma, sa or brute.
        #[arg(long, value_parser = parse_algorithm)]
        algo: Algorithm,
        /// Ciphertext file (raw bytes).
        #[arg(long)]
        ciphertext: PathBuf,
        /// Model file; the bundled reference corpus is used when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Run the comparison protocol and write one CSV row per data point.
    Experiment {
        /// Corpus the messages are drawn from [default: bundled reference corpus].
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Model file [default: built from the corpus].
        #[arg(long)]
        model: Option<PathBuf>,
        /// Algorithms to compare.
        #[arg(long, value_delimiter = ',', value_parser = parse_algorithm, default_value = "ma,ga,sa")]
        algos: Vec<Algorithm>,
        /// Ciphertext lengths in characters [default: 100,200,...,1000].
        #[arg(long, value_delimiter = ',')]
        lengths: Vec<usize>,
        /// Messages per data point.
        #[arg(long, default_value_t = 10)]
        messages: usize,
        /// Runs per message; the lowest-cost run of each message is kept.
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// CSV output path [default: stdout].
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write every run as JSON lines.
        #[arg(long)]
        trials_jsonl: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
}

#[derive(Args)]
struct CryptArgs {
    /// 10-bit key as a bit string, e.g. 1010000010.
    #[arg(long, value_parser = parse_key)]
    key: SdesKey,
    /// Input file [default: stdin].
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file [default: stdout].
    #[arg(long)]
    output: Option<PathBuf>,
}

/// Search parameters. Defaults are the tuned settings of the reference
/// comparison: GA with 100 individuals, crossover 0.95, mutation 0.05; MA
/// with 10 individuals, crossover and mutation 0.5; SA cooling by 0.95 with
/// 100*M proposals and at most 10*M acceptances per temperature (M = 10).
#[derive(Args, Default)]
struct SolverFlags {
    /// Flat `key = value` file (see README); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed; a random seed is chosen and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for experiments [default: 0, all cores].
    #[arg(long)]
    workers: Option<usize>,
    /// GA population size [default: 100].
    #[arg(long)]
    ga_pop_size: Option<String>,
    /// GA generations [default: 50].
    #[arg(long)]
    ga_max_gen: Option<String>,
    /// GA crossover probability [default: 0.95].
    #[arg(long)]
    ga_cross_rate: Option<String>,
    /// GA per-bit mutation probability [default: 0.05].
    #[arg(long)]
    ga_mutate_rate: Option<String>,
    /// GA elite individuals carried over [default: 1].
    #[arg(long)]
    ga_elitism: Option<String>,
    /// MA population size [default: 10].
    #[arg(long)]
    ma_pop_size: Option<String>,
    /// MA generations [default: 50].
    #[arg(long)]
    ma_max_gen: Option<String>,
    /// MA crossover probability [default: 0.5].
    #[arg(long)]
    ma_cross_rate: Option<String>,
    /// MA per-bit mutation probability [default: 0.5].
    #[arg(long)]
    ma_mutate_rate: Option<String>,
    /// MA elite individuals carried over [default: 1].
    #[arg(long)]
    ma_elitism: Option<String>,
    /// Maximum hill-climbing moves per local search [default: 1024].
    #[arg(long)]
    ma_depth_limit: Option<String>,
    /// SA initial temperature, or `auto` for 80% initial acceptance [default: auto].
    #[arg(long)]
    sa_t0: Option<String>,
    /// SA geometric cooling factor [default: 0.95].
    #[arg(long)]
    sa_cooling: Option<String>,
    /// SA problem size M [default: 10].
    #[arg(long)]
    sa_m: Option<String>,
    /// SA proposals per temperature [default: 100*M].
    #[arg(long)]
    sa_iters_per_temp: Option<String>,
    /// SA acceptances that end a temperature early [default: 10*M].
    #[arg(long)]
    sa_accept_cap: Option<String>,
    /// SA temperature-level cap [default: 500].
    #[arg(long)]
    sa_max_temp_steps: Option<String>,
    /// Unigram weight [default: 0].
    #[arg(long)]
    alpha: Option<String>,
    /// Bigram weight [default: 1].
    #[arg(long)]
    beta: Option<String>,
    /// Trigram weight [default: 0].
    #[arg(long)]
    gamma: Option<String>,
}

impl SolverFlags {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("ga.pop_size", &self.ga_pop_size),
            ("ga.max_gen", &self.ga_max_gen),
            ("ga.cross_rate", &self.ga_cross_rate),
            ("ga.mutate_rate", &self.ga_mutate_rate),
            ("ga.elitism", &self.ga_elitism),
            ("ma.pop_size", &self.ma_pop_size),
            ("ma.max_gen", &self.ma_max_gen),
            ("ma.cross_rate", &self.ma_cross_rate),
            ("ma.mutate_rate", &self.ma_mutate_rate),
            ("ma.elitism", &self.ma_elitism),
            ("ma.depth_limit", &self.ma_depth_limit),
            ("sa.t0", &self.sa_t0),
            ("sa.cooling", &self.sa_cooling),
            ("sa.m", &self.sa_m),
            ("sa.iters_per_temp", &self.sa_iters_per_temp),
            ("sa.accept_cap", &self.sa_accept_cap),
            ("sa.max_temp_steps", &self.sa_max_temp_steps),
            ("weights.alpha", &self.alpha),
            ("weights.beta", &self.beta),
            ("weights.gamma", &self.gamma),
        ]
    }

    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            cfg.apply_file(&text).map_err(CliError::Usage)?;
        }
        for (key, value) in self.overrides() {
            if let Some(value) = value {
                cfg.set(key, value).map_err(CliError::Usage)?;
            }
        }
        if let Some(seed) = self.seed {
            cfg.seed = Some(seed);
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        cfg.validate().map_err(CliError::Usage)?;
        Ok(cfg)
    }
}

fn parse_key(s: &str) -> Result<SdesKey, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: ExperimentError| e.to_string())
}

/// The configured seed, or a fresh one reported on stderr.
fn seed_or_announce(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or_else(|| {
        let seed = rand::random();
        eprintln!("seed: {seed} (auto-chosen; pass --seed {seed} to replay)");
        seed
    })
}

fn read_input(path: Option<&Path>) -> Result<Vec<u8>, CliError> {
    match path {
        Some(p) => fs::read(p).map_err(|e| io_error(p, e)),
        None => {
            let mut buf = Vec::new();
            io::stdin()
                .read_to_end(&mut buf)
                .map_err(|e| CliError::Runtime(format!("stdin: {e}")))?;
            Ok(buf)
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| io_error(p, e)),
        None => io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Runtime(format!("stdout: {e}"))),
    }
}

fn load_model(path: Option<&Path>) -> Result<LanguageModel, CliError> {
    match path {
        Some(p) => {
            let file = fs::File::open(p).map_err(|e| io_error(p, e))?;
            LanguageModel::read_from(io::BufReader::new(file))
                .map_err(|e| CliError::Runtime(format!("{}: {e}", p.display())))
        }
        None => Ok(sdes_core::reference_model()),
    }
}

fn cmd_crypt(args: &CryptArgs, encrypt: bool) -> Result<(), CliError> {
    let input = read_input(args.input.as_deref())?;
    let output = if encrypt {
        encrypt_bytes(&input, args.key)
    } else {
        decrypt_bytes(&input, args.key)
    };
    write_output(args.output.as_deref(), &output)
}

fn cmd_build_stats(corpus: &Path, output: &Path) -> Result<(), CliError> {
    let text = fs::read(corpus).map_err(|e| io_error(corpus, e))?;
    let source = corpus.file_name().map_or_else(
        || corpus.display().to_string(),
        |n| n.to_string_lossy().into_owned(),
    );
    let model = build_model(&String::from_utf8_lossy(&text), &source)?;
    let file = fs::File::create(output).map_err(|e| io_error(output, e))?;
    model.write_to(io::BufWriter::new(file))?;
    eprintln!(
        "wrote {}: {} unigrams, {} bigrams, {} trigrams",
        output.display(),
        model.unigram.len(),
        model.bigram.len(),
        model.trigram.len()
    );
    Ok(())
}

fn cmd_attack(
    algo: Algorithm,
    ciphertext: &Path,
    model: Option<&Path>,
    solver: &SolverFlags,
) -> Result<(), CliError> {
    let cfg = solver.resolve()?;
    let bytes = fs::read(ciphertext).map_err(|e| io_error(ciphertext, e))?;
    let model = load_model(model)?;
    let fitness = KeyFitness::new(&bytes, &model, cfg.weights().map_err(CliError::Usage)?)?;
    let objective = Counted::new(Memoized::new(fitness));
    let seed = if algo == Algorithm::Brute {
        None
    } else {
        Some(seed_or_announce(&cfg))
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let best = match algo {
        Algorithm::Ga => ga_run(&cfg.settings.ga, &objective, &mut rng),
        Algorithm::Ma => ma_run(&cfg.settings.ma, &objective, &mut rng),
        Algorithm::Sa => sa_run(&cfg.settings.sa, &objective, &mut rng),
        Algorithm::Brute => brute_force(&objective),
    };
    println!("algorithm: {algo}");
    if let Some(seed) = seed {
        println!("seed: {seed}");
    }
    println!("key: {}", best.key);
    println!("cost: {}", best.cost);
    println!("evaluations: {}", objective.calls());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_experiment(
    corpus: Option<&Path>,
    model: Option<&Path>,
    algos: &[Algorithm],
    lengths: &[usize],
    messages: usize,
    runs: usize,
    output: Option<&Path>,
    trials_jsonl: Option<&Path>,
    solver: &SolverFlags,
) -> Result<(), CliError> {
    let cfg = solver.resolve()?;
    if messages == 0 || runs == 0 {
        return Err(CliError::Usage(
            "--messages and --runs must be positive".into(),
        ));
    }
    let (text, default_model) = match corpus {
        Some(p) => {
            let raw = fs::read(p).map_err(|e| io_error(p, e))?;
            let raw = String::from_utf8_lossy(&raw).into_owned();
            let name = p.display().to_string();
            (
                normalize_text(&raw),
                build_model(&raw, &name).map_err(CliError::from),
            )
        }
        None => (
            sdes_core::reference_text(),
            Ok(sdes_core::reference_model()),
        ),
    };
    let model = match model {
        Some(p) => load_model(Some(p))?,
        None => default_model?,
    };
    let lengths = if lengths.is_empty() {
        default_lengths()
    } else {
        lengths.to_vec()
    };
    let base_seed = seed_or_announce(&cfg);
    let plan = ExperimentPlan {
        messages_per_point: messages,
        runs_per_message: runs,
        workers: cfg.workers,
        ..ExperimentPlan::grid(algos, &lengths, base_seed)
    };
    let outcome = run_experiment(
        &plan,
        &text,
        &model,
        cfg.weights().map_err(CliError::Usage)?,
        &cfg.settings,
    )?;

    write_output(output, emit_csv(&outcome.records).as_bytes())?;
    if let Some(path) = trials_jsonl {
        let mut lines = String::new();
        for t in &outcome.trials {
            let line = serde_json::to_string(t).map_err(|e| CliError::Runtime(e.to_string()))?;
            lines.push_str(&line);
            lines.push('\n');
        }
        fs::write(path, lines).map_err(|e| io_error(path, e))?;
    }

    eprintln!(
        "seed {base_seed}: {} trials over {} data points",
        outcome.trials.len(),
        outcome.records.len()
    );
    eprintln!(
        "{:<6} {:>6} {:>9} {:>8} {:>10}",
        "algo", "length", "mean_bits", "std_dev", "mean_time"
    );
    for r in &outcome.records {
        eprintln!(
            "{:<6} {:>6} {:>9.2} {:>8.2} {:>9.4}s",
            r.algorithm.to_string(),
            r.ciphertext_len,
            r.mean_bits,
            r.std_dev_bits,
            r.mean_time
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Encrypt(args) => cmd_crypt(args, true),
        Command::Decrypt(args) => cmd_crypt(args, false),
        Command::BuildStats { corpus, output } => cmd_build_stats(corpus, output),
        Command::Attack {
            algo,
            ciphertext,
            model,
            solver,
        } => cmd_attack(*algo, ciphertext, model.as_deref(), solver),
        Command::Experiment {
            corpus,
            model,
            algos,
            lengths,
            messages,
            runs,
            output,
            trials_jsonl,
            solver,
        } => cmd_experiment(
            corpus.as_deref(),
            model.as_deref(),
            algos,
            lengths,
            *messages,
            *runs,
            output.as_deref(),
            trials_jsonl.as_deref(),
            solver,
        ),
    }
}

fn main() -> ExitCode {
    let keys: String = config::KEYS
        .iter()
        .map(|(k, d)| format!("  {k:<20} {d}\n"))
        .collect();
    let matches = Cli::command()
        .after_long_help(format!(
            "Configuration keys (--config FILE, `key = value`) and defaults:\n{keys}"
        ))
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Runtime(msg)) = &e;
            eprintln!("error: {msg}");
            ExitCode::from(e.code())
        }
    }
}
