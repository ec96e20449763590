//! Key-search engines over the 1024-point SDES key space: exhaustive search,
//! hill climbing, a generational genetic algorithm, a memetic algorithm
//! (GA plus hill climbing), and simulated annealing.
//!
//! All engines minimize an [`Objective`]. Every random decision is drawn
//! from the caller's RNG, so a fixed seed reproduces a run exactly.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::OnceLock;

use rand::Rng;

use crate::cipher::SdesKey;

/// A deterministic cost over keys; lower is better.
pub trait Objective: Sync {
    fn evaluate(&self, key: SdesKey) -> f64;
}

impl<F> Objective for F
where
    F: Fn(SdesKey) -> f64 + Sync,
{
    fn evaluate(&self, key: SdesKey) -> f64 {
        self(key)
    }
}

/// Counts calls to the wrapped objective.
pub struct Counted<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O: Objective> Counted<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(AtomicOrdering::Relaxed)
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Objective> Objective for Counted<O> {
    fn evaluate(&self, key: SdesKey) -> f64 {
        self.calls.fetch_add(1, AtomicOrdering::Relaxed);
        self.inner.evaluate(key)
    }
}

/// Remembers the cost of every key already evaluated. The key space is
/// small enough to hold a slot per key.
pub struct Memoized<O> {
    inner: O,
    slots: Vec<OnceLock<f64>>,
}

impl<O: Objective> Memoized<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            slots: (0..SdesKey::SPACE).map(|_| OnceLock::new()).collect(),
        }
    }
}

impl<O: Objective> Objective for Memoized<O> {
    fn evaluate(&self, key: SdesKey) -> f64 {
        *self.slots[key.index()].get_or_init(|| self.inner.evaluate(key))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub key: SdesKey,
    pub cost: f64,
}

impl Candidate {
    pub fn evaluate(key: SdesKey, objective: &impl Objective) -> Self {
        Self {
            key,
            cost: objective.evaluate(key),
        }
    }

    /// Lower cost first; equal costs fall back to the smaller key.
    pub fn rank(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.key.cmp(&other.key))
    }

    fn better_of(self, other: Self) -> Self {
        if other.rank(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

fn random_key(rng: &mut impl Rng) -> SdesKey {
    SdesKey::from_index(rng.gen_range(0..SdesKey::SPACE))
}

/// Evaluate all 1024 keys; ties go to the smallest key.
pub fn brute_force(objective: &impl Objective) -> Candidate {
    SdesKey::all()
        .map(|key| Candidate::evaluate(key, objective))
        .reduce(Candidate::better_of)
        .expect("key space is non-empty")
}

/// Best-improvement hill climbing over the 10 single-bit-flip neighbors.
/// Stops at a local optimum or after `depth_limit` moves.
pub fn hill_climb(start: Candidate, objective: &impl Objective, depth_limit: usize) -> Candidate {
    let mut current = start;
    for _ in 0..depth_limit {
        let best_neighbor = (1..=SdesKey::BITS)
            .map(|bit| Candidate::evaluate(current.key.flip(bit), objective))
            .reduce(Candidate::better_of)
            .expect("ten neighbors");
        if best_neighbor.cost < current.cost {
            current = best_neighbor;
        } else {
            break;
        }
    }
    current
}

/// Binary tournament: the lower-cost of two uniformly drawn individuals.
fn tournament(population: &[Candidate], rng: &mut impl Rng) -> Candidate {
    let a = population[rng.gen_range(0..population.len())];
    let b = population[rng.gen_range(0..population.len())];
    if b.cost < a.cost {
        b
    } else {
        a
    }
}

/// Two independent binary-tournament winners.
pub fn select_parents(population: &[Candidate], rng: &mut impl Rng) -> (Candidate, Candidate) {
    assert!(!population.is_empty(), "selection from an empty population");
    (tournament(population, rng), tournament(population, rng))
}

/// One-point crossover with the cut after bit `cut` (1..=9): the child takes
/// bits 1..=cut from `a` and the rest from `b`.
pub fn crossover_at(a: SdesKey, b: SdesKey, cut: usize) -> SdesKey {
    assert!(
        (1..SdesKey::BITS).contains(&cut),
        "cut point {cut} out of range"
    );
    let low_mask = (1u16 << (SdesKey::BITS - cut)) - 1;
    SdesKey::from_index(((a.value() & !low_mask) | (b.value() & low_mask)) as usize & 0x3ff)
}

/// One-point crossover with the cut drawn uniformly from 1..=9.
pub fn crossover(a: SdesKey, b: SdesKey, rng: &mut impl Rng) -> SdesKey {
    crossover_at(a, b, rng.gen_range(1..SdesKey::BITS))
}

/// Flip each bit independently with probability `rate`.
pub fn mutate(key: SdesKey, rate: f64, rng: &mut impl Rng) -> SdesKey {
    (1..=SdesKey::BITS).fold(
        key,
        |k, bit| if rng.gen_bool(rate) { k.flip(bit) } else { k },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaConfig {
    pub pop_size: usize,
    pub max_gen: usize,
    pub cross_rate: f64,
    pub mutate_rate: f64,
    /// Number of best individuals copied unchanged into each generation.
    pub elitism: usize,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            pop_size: 100,
            max_gen: 50,
            cross_rate: 0.95,
            mutate_rate: 0.05,
            elitism: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(pub String);

fn check_probability(name: &str, p: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ConfigError(format!("{name} must be in [0,1], got {p}")))
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pop_size < 2 {
            return Err(ConfigError(format!(
                "pop_size must be at least 2, got {}",
                self.pop_size
            )));
        }
        if self.max_gen == 0 {
            return Err(ConfigError("max_gen must be positive".into()));
        }
        if self.elitism > self.pop_size {
            return Err(ConfigError("elitism cannot exceed pop_size".into()));
        }
        check_probability("cross_rate", self.cross_rate)?;
        check_probability("mutate_rate", self.mutate_rate)
    }
}

fn initial_population(
    size: usize,
    objective: &impl Objective,
    rng: &mut impl Rng,
) -> Vec<Candidate> {
    (0..size)
        .map(|_| Candidate::evaluate(random_key(rng), objective))
        .collect()
}

fn sort_population(population: &mut [Candidate]) {
    population.sort_by(Candidate::rank);
}

/// One generational step: elites carried over, the rest bred from
/// tournament-selected parents. Every 10-bit string is a valid key, so
/// children never need repair.
fn next_generation(
    population: &mut Vec<Candidate>,
    config: &GaConfig,
    objective: &impl Objective,
    rng: &mut impl Rng,
) {
    sort_population(population);
    let mut next: Vec<Candidate> = population[..config.elitism].to_vec();
    while next.len() < config.pop_size {
        let (mate1, mate2) = select_parents(population, rng);
        let child = if rng.gen_bool(config.cross_rate) {
            crossover(mate1.key, mate2.key, rng)
        } else {
            mate1.key
        };
        let child = mutate(child, config.mutate_rate, rng);
        next.push(Candidate::evaluate(child, objective));
    }
    *population = next;
}

fn population_best(population: &[Candidate]) -> Candidate {
    population
        .iter()
        .copied()
        .reduce(Candidate::better_of)
        .expect("non-empty population")
}

/// Result of a GA run with the best cost of the population after each
/// generation (index 0 is the initial population).
#[derive(Debug, Clone)]
pub struct GaTrace {
    pub best: Candidate,
    pub generation_best: Vec<f64>,
}

pub fn ga_run_traced(config: &GaConfig, objective: &impl Objective, rng: &mut impl Rng) -> GaTrace {
    let mut population = initial_population(config.pop_size, objective, rng);
    let mut best = population_best(&population);
    let mut generation_best = vec![best.cost];
    for _ in 0..config.max_gen {
        next_generation(&mut population, config, objective, rng);
        let gen_best = population_best(&population);
        generation_best.push(gen_best.cost);
        best = best.better_of(gen_best);
    }
    GaTrace {
        best,
        generation_best,
    }
}

/// Generational GA; returns the best individual ever seen.
pub fn ga_run(config: &GaConfig, objective: &impl Objective, rng: &mut impl Rng) -> Candidate {
    ga_run_traced(config, objective, rng).best
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaConfig {
    pub ga: GaConfig,
    /// Maximum hill-climbing moves per local search. The default allows a
    /// walk across the whole key space, so local searches always end at a
    /// local optimum.
    pub depth_limit: usize,
}

impl Default for MaConfig {
    fn default() -> Self {
        Self {
            ga: GaConfig {
                pop_size: 10,
                max_gen: 50,
                cross_rate: 0.5,
                mutate_rate: 0.5,
                elitism: 1,
            },
            depth_limit: SdesKey::SPACE,
        }
    }
}

impl MaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ga.validate()
    }
}

/// Memetic algorithm: every individual is hill-climbed after initialization
/// and after each GA generation; the overall best gets one more climb at the
/// end.
pub fn ma_run(config: &MaConfig, objective: &impl Objective, rng: &mut impl Rng) -> Candidate {
    let climb = |c: Candidate| hill_climb(c, objective, config.depth_limit);
    let mut population: Vec<Candidate> = initial_population(config.ga.pop_size, objective, rng)
        .into_iter()
        .map(climb)
        .collect();
    let mut best = population_best(&population);
    for _ in 0..config.ga.max_gen {
        next_generation(&mut population, &config.ga, objective, rng);
        for individual in population.iter_mut() {
            *individual = climb(*individual);
        }
        best = best.better_of(population_best(&population));
    }
    climb(best)
}

/// Metropolis criterion: always accept non-worsening moves, otherwise
/// accept with probability exp(-delta / temp).
pub fn metropolis_accept(delta: f64, temp: f64, rng: &mut impl Rng) -> bool {
    debug_assert!(temp > 0.0);
    delta <= 0.0 || rng.gen::<f64>() < (-delta / temp).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaConfig {
    /// Initial temperature; `None` calibrates it from sampled move deltas.
    pub t0: Option<f64>,
    pub cooling: f64,
    /// Problem size M used for the default per-temperature limits.
    pub m: usize,
    /// Proposals per temperature; defaults to 100 x M.
    pub iters_per_temp: Option<usize>,
    /// Accepted moves that end a temperature early; defaults to 10 x M.
    pub accept_cap: Option<usize>,
    pub max_temp_steps: usize,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            t0: None,
            cooling: 0.95,
            m: SdesKey::BITS,
            iters_per_temp: None,
            accept_cap: None,
            max_temp_steps: 500,
        }
    }
}

/// Deltas sampled when calibrating the initial temperature.
const T0_SAMPLES: usize = 100;
/// Target acceptance rate of an average worsening move at the start.
const T0_ACCEPTANCE: f64 = 0.8;

impl SaConfig {
    pub fn iters_per_temp(&self) -> usize {
        self.iters_per_temp.unwrap_or(100 * self.m)
    }

    pub fn accept_cap(&self) -> usize {
        self.accept_cap.unwrap_or(10 * self.m)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(t0) = self.t0 {
            if !(t0 > 0.0 && t0.is_finite()) {
                return Err(ConfigError(format!("t0 must be positive, got {t0}")));
            }
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(ConfigError(format!(
                "cooling must be in (0,1), got {}",
                self.cooling
            )));
        }
        if self.m == 0
            || self.iters_per_temp() == 0
            || self.accept_cap() == 0
            || self.max_temp_steps == 0
        {
            return Err(ConfigError("SA counts must be positive".into()));
        }
        Ok(())
    }
}

/// Mean absolute cost change of random single-bit flips from a random key,
/// scaled so that such a move is initially accepted with probability 0.8.
pub fn calibrate_t0(objective: &impl Objective, rng: &mut impl Rng) -> f64 {
    let start = Candidate::evaluate(random_key(rng), objective);
    let mean_delta = (0..T0_SAMPLES)
        .map(|_| {
            let bit = rng.gen_range(1..=SdesKey::BITS);
            (objective.evaluate(start.key.flip(bit)) - start.cost).abs()
        })
        .sum::<f64>()
        / T0_SAMPLES as f64;
    let t0 = mean_delta / (1.0 / T0_ACCEPTANCE).ln();
    if t0 > 0.0 {
        t0
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct SaTrace {
    pub best: Candidate,
    pub initial_temperature: f64,
    /// Temperature levels visited.
    pub temperature_steps: usize,
}

pub fn sa_run_traced(config: &SaConfig, objective: &impl Objective, rng: &mut impl Rng) -> SaTrace {
    let initial_temperature = match config.t0 {
        Some(t0) => t0,
        None => calibrate_t0(objective, rng),
    };
    let mut temp = initial_temperature;
    let mut current = Candidate::evaluate(random_key(rng), objective);
    let mut best = current;
    let mut temperature_steps = 0;
    while temperature_steps < config.max_temp_steps {
        temperature_steps += 1;
        let mut accepted = 0;
        for _ in 0..config.iters_per_temp() {
            let bit = rng.gen_range(1..=SdesKey::BITS);
            let proposal = Candidate::evaluate(current.key.flip(bit), objective);
            if metropolis_accept(proposal.cost - current.cost, temp, rng) {
                current = proposal;
                best = best.better_of(current);
                accepted += 1;
                if accepted > config.accept_cap() {
                    break;
                }
            }
        }
        if accepted == 0 {
            break;
        }
        temp *= config.cooling;
    }
    SaTrace {
        best,
        initial_temperature,
        temperature_steps,
    }
}

/// Simulated annealing with geometric cooling; returns the best key seen.
pub fn sa_run(config: &SaConfig, objective: &impl Objective, rng: &mut impl Rng) -> Candidate {
    sa_run_traced(config, objective, rng).best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn key(s: &str) -> SdesKey {
        s.parse().unwrap()
    }

    fn hamming_to(target: SdesKey) -> impl Fn(SdesKey) -> f64 + Sync {
        move |k: SdesKey| f64::from(k.hamming_distance(target))
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn brute_force_finds_unique_zero() {
        let target = key("1111100000");
        let counted = Counted::new(hamming_to(target));
        let best = brute_force(&counted);
        assert_eq!(
            best,
            Candidate {
                key: target,
                cost: 0.0
            }
        );
        assert_eq!(counted.calls(), 1024);
    }

    #[test]
    fn brute_force_tie_break_is_smallest_key() {
        assert_eq!(brute_force(&|_: SdesKey| 0.5).key, key("0000000000"));
    }

    #[test]
    fn hill_climb_cases() {
        let target = key("0110011001");
        let obj = hamming_to(target);
        let at_opt = Candidate::evaluate(target, &obj);
        assert_eq!(hill_climb(at_opt, &obj, 100), at_opt);
        for start in SdesKey::all() {
            let got = hill_climb(Candidate::evaluate(start, &obj), &obj, 10);
            assert_eq!(got.key, target);
        }
        let start = Candidate::evaluate(target.complement(), &obj);
        assert_eq!(hill_climb(start, &obj, 0), start);
        assert_eq!(hill_climb(start, &obj, 3).cost, 7.0);
    }

    #[test]
    fn selection_cases() {
        let solo = [Candidate {
            key: key("0000000001"),
            cost: 0.3,
        }];
        let (a, b) = select_parents(&solo, &mut rng(1));
        assert_eq!((a, b), (solo[0], solo[0]));

        let pair = [
            Candidate {
                key: key("0000000001"),
                cost: 0.5,
            },
            Candidate {
                key: key("0000000010"),
                cost: 0.2,
            },
        ];
        // Whenever both members appear in a tournament, 0.2 wins, so 0.5 can
        // only win when drawn twice: P = 1/4.
        let mut r = rng(7);
        let draws = 10_000;
        let weak = (0..draws)
            .filter(|_| tournament(&pair, &mut r).cost == 0.5)
            .count();
        let freq = weak as f64 / draws as f64;
        assert!((freq - 0.25).abs() < 0.02, "{freq}");
    }

    #[test]
    fn crossover_cases() {
        let a = key("1111111111");
        let b = key("0000000000");
        assert_eq!(crossover_at(a, b, 5), key("1111100000"));
        assert_eq!(crossover_at(b, a, 1), key("0111111111"));
        let mut r = rng(3);
        for _ in 0..100 {
            assert_eq!(crossover(a, a, &mut r), a);
        }
    }

    #[test]
    fn mutation_cases() {
        let k = key("1010000010");
        let mut r = rng(11);
        assert_eq!(mutate(k, 0.0, &mut r), k);
        assert_eq!(mutate(k, 1.0, &mut r), k.complement());
        let trials = 10_000;
        let flips: u32 = (0..trials)
            .map(|_| mutate(k, 0.5, &mut r).hamming_distance(k))
            .sum();
        let mean = f64::from(flips) / trials as f64;
        assert!((mean - 5.0).abs() < 0.2, "{mean}");
    }

    #[test]
    fn ga_elite_best_never_worsens() {
        let target = key("1001011010");
        let obj = hamming_to(target);
        let cfg = GaConfig {
            pop_size: 8,
            max_gen: 40,
            mutate_rate: 0.3,
            ..GaConfig::default()
        };
        let trace = ga_run_traced(&cfg, &obj, &mut rng(5));
        assert!(trace.generation_best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(trace.generation_best.len(), 41);
    }

    #[test]
    fn ga_is_deterministic() {
        let obj = hamming_to(key("0101010101"));
        let cfg = GaConfig::default();
        assert_eq!(
            ga_run(&cfg, &obj, &mut rng(9)),
            ga_run(&cfg, &obj, &mut rng(9))
        );
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig {
            pop_size: 1,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GaConfig {
            cross_rate: 1.5,
            ..GaConfig::default()
        }
        .validate()
        .is_err());
        assert!(SaConfig {
            cooling: 1.0,
            ..SaConfig::default()
        }
        .validate()
        .is_err());
        assert!(SaConfig {
            t0: Some(0.0),
            ..SaConfig::default()
        }
        .validate()
        .is_err());
        assert!(MaConfig::default().validate().is_ok());
        let sa = SaConfig::default();
        assert_eq!((sa.iters_per_temp(), sa.accept_cap()), (1000, 100));
    }

    #[test]
    fn metropolis_edges() {
        let mut r = rng(2);
        assert!(metropolis_accept(-0.1, 1e-9, &mut r));
        assert!((0..1000).all(|_| metropolis_accept(0.0, 0.01, &mut r)));
    }

    #[test]
    fn sa_constant_objective_hits_temperature_cap() {
        let cfg = SaConfig {
            max_temp_steps: 37,
            ..SaConfig::default()
        };
        let counted = Counted::new(|_: SdesKey| 1.0);
        let trace = sa_run_traced(&cfg, &counted, &mut rng(4));
        assert_eq!(trace.temperature_steps, 37);
        assert_eq!(trace.initial_temperature, 1.0);
        // calibration (1 + 100), start (1), then accept_cap + 1 proposals per level
        assert_eq!(counted.calls(), 101 + 1 + 37 * 101);
    }

    #[test]
    fn memoized_matches_inner() {
        let inner = Counted::new(hamming_to(key("0000011111")));
        let memo = Memoized::new(|k: SdesKey| inner.evaluate(k));
        for k in SdesKey::all().chain(SdesKey::all()) {
            assert_eq!(
                memo.evaluate(k),
                f64::from(k.hamming_distance(key("0000011111")))
            );
        }
        assert_eq!(inner.calls(), 1024);
    }
}
