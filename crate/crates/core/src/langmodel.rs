//! N-gram language statistics and the weighted L1 cost between a candidate
//! decryption and a reference language.
//!
//! The alphabet is `A`..`Z` plus space. Tables are sparse: an n-gram that
//! never occurs is absent and reads as frequency 0.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::cipher::{CodeBook, SdesKey};

/// Upper bound of the cost for any valid weights.
pub const MAX_COST: f64 = 2.0;

/// Corpora shorter than this (after normalization) are rejected by
/// [`build_model`].
pub const MIN_CORPUS_SYMBOLS: usize = 1000;

const SUM_TOLERANCE: f64 = 1e-9;
const FORMAT_MAGIC: &str = "#sdes-ngram v1";

#[derive(Debug, Error)]
pub enum LangError {
    #[error("text of {length} symbols is too short for {order}-grams")]
    InsufficientText { order: usize, length: usize },
    #[error("corpus has {length} symbols after normalization; at least {minimum} required")]
    InsufficientCorpus { length: usize, minimum: usize },
    #[error("symbol {0:?} is not in the alphabet")]
    OutsideAlphabet(char),
    #[error(
        "invalid n-gram weights ({alpha}, {beta}, {gamma}): each must be in [0,1] and sum to 1"
    )]
    InvalidWeights { alpha: f64, beta: f64, gamma: f64 },
    #[error("empty ciphertext")]
    EmptyCiphertext,
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The 27 scored symbols.
pub struct Alphabet;

impl Alphabet {
    pub const SYMBOLS: &'static str = "ABCDEFGHIJKLMNOPQRSTUVWXYZ ";
    pub const SIZE: usize = 27;
    const SPACE: usize = 26;

    pub fn index(c: char) -> Option<usize> {
        match c {
            'A'..='Z' => Some(c as usize - 'A' as usize),
            ' ' => Some(Self::SPACE),
            _ => None,
        }
    }

    pub fn symbol(index: usize) -> char {
        Self::SYMBOLS.as_bytes()[index] as char
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Order {
    Unigram = 1,
    Bigram = 2,
    Trigram = 3,
}

impl Order {
    pub const ALL: [Order; 3] = [Order::Unigram, Order::Bigram, Order::Trigram];

    pub fn n(self) -> usize {
        self as usize
    }

    fn from_n(n: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.n() == n)
    }
}

/// Uppercase ASCII letters; collapse every run of anything else into one
/// space; trim the ends.
pub fn normalize_text(raw: &str) -> String {
    normalize_chars(raw.chars())
}

/// [`normalize_text`] over raw bytes, each byte read as one character.
pub fn normalize_bytes(raw: &[u8]) -> String {
    normalize_chars(raw.iter().map(|&b| b as char))
}

fn normalize_chars(chars: impl Iterator<Item = char>) -> String {
    let mut out = String::new();
    let mut pending_space = false;
    for c in chars {
        if c.is_ascii_alphabetic() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c.to_ascii_uppercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Relative frequencies of n-grams of a single order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrequencyTable(BTreeMap<String, f64>);

impl FrequencyTable {
    pub fn from_entries(entries: impl IntoIterator<Item = (String, f64)>) -> Self {
        Self(entries.into_iter().collect())
    }

    pub fn get(&self, gram: &str) -> f64 {
        self.0.get(gram).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    /// Sum of |self - other| over the union of both key sets, which equals
    /// the sum over the full alphabet product since absent entries are 0.
    pub fn l1_distance(&self, other: &FrequencyTable) -> f64 {
        let mut sum = 0.0;
        for (gram, &freq) in &self.0 {
            sum += (freq - other.get(gram)).abs();
        }
        for (gram, &freq) in &other.0 {
            if !self.0.contains_key(gram) {
                sum += freq;
            }
        }
        sum
    }

    /// Entries sorted by descending frequency.
    pub fn ranked(&self) -> Vec<(&str, f64)> {
        let mut entries: Vec<_> = self.iter().collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
        entries
    }
}

/// Unigram, bigram and trigram frequencies of one text. Orders that were not
/// requested are left empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TextStats {
    pub unigram: FrequencyTable,
    pub bigram: FrequencyTable,
    pub trigram: FrequencyTable,
}

impl TextStats {
    pub fn table(&self, order: Order) -> &FrequencyTable {
        match order {
            Order::Unigram => &self.unigram,
            Order::Bigram => &self.bigram,
            Order::Trigram => &self.trigram,
        }
    }

    fn table_mut(&mut self, order: Order) -> &mut FrequencyTable {
        match order {
            Order::Unigram => &mut self.unigram,
            Order::Bigram => &mut self.bigram,
            Order::Trigram => &mut self.trigram,
        }
    }
}

/// Count every contiguous n-gram for each requested order and divide by the
/// number of n-grams, `len - n + 1`.
pub fn compute_stats(text: &str, orders: &[Order]) -> Result<TextStats, LangError> {
    let symbols: Vec<char> = text.chars().collect();
    if let Some(bad) = symbols.iter().find(|&&c| Alphabet::index(c).is_none()) {
        return Err(LangError::OutsideAlphabet(*bad));
    }
    let mut stats = TextStats::default();
    for &order in orders {
        let n = order.n();
        if symbols.len() < n {
            return Err(LangError::InsufficientText {
                order: n,
                length: symbols.len(),
            });
        }
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for window in symbols.windows(n) {
            *counts.entry(window.iter().collect()).or_default() += 1;
        }
        let total = (symbols.len() - n + 1) as f64;
        *stats.table_mut(order) = FrequencyTable(
            counts
                .into_iter()
                .map(|(g, c)| (g, c as f64 / total))
                .collect(),
        );
    }
    Ok(stats)
}

/// Weights of the unigram, bigram and trigram terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NGramWeights {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl Default for NGramWeights {
    /// Bigram statistics only.
    fn default() -> Self {
        Self {
            alpha: 0.0,
            beta: 1.0,
            gamma: 0.0,
        }
    }
}

impl NGramWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self, LangError> {
        let in_unit = |w: f64| (0.0..=1.0).contains(&w);
        if !(in_unit(alpha) && in_unit(beta) && in_unit(gamma))
            || (alpha + beta + gamma - 1.0).abs() > SUM_TOLERANCE
        {
            return Err(LangError::InvalidWeights { alpha, beta, gamma });
        }
        Ok(Self { alpha, beta, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weight(&self, order: Order) -> f64 {
        match order {
            Order::Unigram => self.alpha,
            Order::Bigram => self.beta,
            Order::Trigram => self.gamma,
        }
    }

    /// Orders with a nonzero weight.
    pub fn active_orders(&self) -> Vec<Order> {
        Order::ALL
            .into_iter()
            .filter(|&o| self.weight(o) > 0.0)
            .collect()
    }
}

/// Reference language statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel {
    pub unigram: FrequencyTable,
    pub bigram: FrequencyTable,
    pub trigram: FrequencyTable,
    pub source: String,
}

/// Build unigram, bigram and trigram tables over the whole (normalized)
/// corpus.
pub fn build_model(corpus: &str, source: &str) -> Result<LanguageModel, LangError> {
    let text = normalize_text(corpus);
    let length = text.chars().count();
    if length < MIN_CORPUS_SYMBOLS {
        return Err(LangError::InsufficientCorpus {
            length,
            minimum: MIN_CORPUS_SYMBOLS,
        });
    }
    let stats = compute_stats(&text, &Order::ALL)?;
    Ok(LanguageModel {
        unigram: stats.unigram,
        bigram: stats.bigram,
        trigram: stats.trigram,
        source: source.to_string(),
    })
}

impl LanguageModel {
    pub fn table(&self, order: Order) -> &FrequencyTable {
        match order {
            Order::Unigram => &self.unigram,
            Order::Bigram => &self.bigram,
            Order::Trigram => &self.trigram,
        }
    }

    fn table_mut(&mut self, order: Order) -> &mut FrequencyTable {
        match order {
            Order::Unigram => &mut self.unigram,
            Order::Bigram => &mut self.bigram,
            Order::Trigram => &mut self.trigram,
        }
    }

    /// Serialize to the line-oriented model format:
    ///
    /// ```text
    /// #sdes-ngram v1 alphabet=ABCDEFGHIJKLMNOPQRSTUVWXYZ_ source=<free text>
    /// <order> <symbols> <frequency>
    /// ```
    ///
    /// Space is written as `_`. Frequencies use the shortest decimal form that
    /// parses back to the same `f64`.
    pub fn write_to(&self, mut out: impl Write) -> Result<(), LangError> {
        out.write_all(self.to_model_string().as_bytes())?;
        Ok(())
    }

    pub fn to_model_string(&self) -> String {
        let mut text = String::new();
        let _ = writeln!(
            text,
            "{FORMAT_MAGIC} alphabet={} source={}",
            encode_gram(Alphabet::SYMBOLS),
            self.source.replace(['\n', '\r'], " ")
        );
        for order in Order::ALL {
            for (gram, freq) in self.table(order).iter() {
                let _ = writeln!(text, "{} {} {}", order.n(), encode_gram(gram), freq);
            }
        }
        text
    }

    pub fn read_from(input: impl BufRead) -> Result<Self, LangError> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| format_error(1, "missing header"))?;
        let rest = header
            .strip_prefix(FORMAT_MAGIC)
            .ok_or_else(|| format_error(1, "unrecognized header"))?
            .trim_start();
        let rest = rest
            .strip_prefix("alphabet=")
            .ok_or_else(|| format_error(1, "missing alphabet"))?;
        let (alphabet, rest) = rest.split_once(' ').unwrap_or((rest, ""));
        if alphabet != encode_gram(Alphabet::SYMBOLS) {
            return Err(format_error(1, &format!("unsupported alphabet {alphabet}")));
        }
        let source = rest.strip_prefix("source=").unwrap_or("").to_string();

        let mut model = LanguageModel {
            unigram: FrequencyTable::default(),
            bigram: FrequencyTable::default(),
            trigram: FrequencyTable::default(),
            source,
        };
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [order, gram, freq] = fields[..] else {
                return Err(format_error(
                    line_no,
                    "expected `<order> <symbols> <frequency>`",
                ));
            };
            let order = order
                .parse()
                .ok()
                .and_then(Order::from_n)
                .ok_or_else(|| format_error(line_no, "order must be 1, 2 or 3"))?;
            let gram = decode_gram(gram);
            if gram.chars().count() != order.n()
                || gram.chars().any(|c| Alphabet::index(c).is_none())
            {
                return Err(format_error(
                    line_no,
                    "n-gram does not match its order or alphabet",
                ));
            }
            let freq: f64 = freq
                .parse()
                .map_err(|_| format_error(line_no, "frequency is not a number"))?;
            if !(freq.is_finite() && freq >= 0.0) {
                return Err(format_error(
                    line_no,
                    "frequency must be finite and non-negative",
                ));
            }
            model.table_mut(order).0.insert(gram, freq);
        }
        model.validate()?;
        Ok(model)
    }

    /// Unigram and bigram tables must sum to 1; trigram may also be empty.
    pub fn validate(&self) -> Result<(), LangError> {
        for order in Order::ALL {
            let table = self.table(order);
            if order == Order::Trigram && table.is_empty() {
                continue;
            }
            let total = table.total();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(format_error(
                    0,
                    &format!("{}-gram table sums to {total}", order.n()),
                ));
            }
        }
        Ok(())
    }
}

fn format_error(line: usize, message: &str) -> LangError {
    LangError::Format {
        line,
        message: message.to_string(),
    }
}

fn encode_gram(gram: &str) -> String {
    gram.replace(' ', "_")
}

fn decode_gram(gram: &str) -> String {
    gram.replace('_', " ")
}

/// Weighted L1 distance between the text's n-gram statistics and the model.
/// Only orders with a nonzero weight are computed.
pub fn cost(model: &LanguageModel, text: &str, weights: &NGramWeights) -> Result<f64, LangError> {
    let orders = weights.active_orders();
    let stats = compute_stats(text, &orders)?;
    Ok(orders
        .into_iter()
        .map(|o| weights.weight(o) * model.table(o).l1_distance(stats.table(o)))
        .sum())
}

/// Cost of the text obtained by decrypting `ciphertext` under `key`.
pub fn key_fitness(
    ciphertext: &[u8],
    key: SdesKey,
    model: &LanguageModel,
    weights: &NGramWeights,
) -> Result<f64, LangError> {
    if ciphertext.is_empty() {
        return Err(LangError::EmptyCiphertext);
    }
    let plain = crate::cipher::decrypt_bytes(ciphertext, key);
    cost(model, &normalize_bytes(&plain), weights)
}

/// Model tables laid out densely by symbol index; only the orders with a
/// nonzero weight are kept.
#[derive(Debug, Clone)]
struct DenseModel {
    weights: NGramWeights,
    unigram: Option<Vec<f64>>,
    bigram: Option<Vec<f64>>,
    trigram: Option<Vec<f64>>,
}

impl DenseModel {
    fn new(model: &LanguageModel, weights: NGramWeights) -> Self {
        let dense = |order: Order| -> Option<Vec<f64>> {
            if weights.weight(order) == 0.0 {
                return None;
            }
            let mut table = vec![0.0; Alphabet::SIZE.pow(order.n() as u32)];
            for (gram, freq) in model.table(order).iter() {
                let slot = gram.chars().fold(0, |acc, c| {
                    acc * Alphabet::SIZE + Alphabet::index(c).unwrap_or(0)
                });
                table[slot] = freq;
            }
            Some(table)
        };
        Self {
            weights,
            unigram: dense(Order::Unigram),
            bigram: dense(Order::Bigram),
            trigram: dense(Order::Trigram),
        }
    }

    fn max_order(&self) -> usize {
        self.weights.active_orders().last().map_or(0, |o| o.n())
    }

    /// Same quantity as [`cost`] on the symbol-index sequence.
    fn cost(&self, symbols: &[u8]) -> Result<f64, LangError> {
        let max_order = self.max_order();
        if symbols.len() < max_order {
            return Err(LangError::InsufficientText {
                order: max_order,
                length: symbols.len(),
            });
        }
        let mut total = 0.0;
        for (order, table) in [
            (Order::Unigram, &self.unigram),
            (Order::Bigram, &self.bigram),
            (Order::Trigram, &self.trigram),
        ] {
            let Some(table) = table else { continue };
            let n = order.n();
            let mut counts = vec![0u32; table.len()];
            for window in symbols.windows(n) {
                let slot = window
                    .iter()
                    .fold(0, |acc, &s| acc * Alphabet::SIZE + s as usize);
                counts[slot] += 1;
            }
            let grams = (symbols.len() - n + 1) as f64;
            let distance: f64 = table
                .iter()
                .zip(&counts)
                .map(|(&k, &c)| (k - f64::from(c) / grams).abs())
                .sum();
            total += self.weights.weight(order) * distance;
        }
        Ok(total)
    }
}

/// Scores candidate keys against one ciphertext. Produces the same values as
/// [`key_fitness`] using dense tables and a per-key decryption code book.
#[derive(Debug, Clone)]
pub struct KeyFitness {
    ciphertext: Vec<u8>,
    model: DenseModel,
}

impl KeyFitness {
    pub fn new(
        ciphertext: &[u8],
        model: &LanguageModel,
        weights: NGramWeights,
    ) -> Result<Self, LangError> {
        if ciphertext.is_empty() {
            return Err(LangError::EmptyCiphertext);
        }
        Ok(Self {
            ciphertext: ciphertext.to_vec(),
            model: DenseModel::new(model, weights),
        })
    }

    pub fn ciphertext(&self) -> &[u8] {
        &self.ciphertext
    }

    pub fn cost(&self, key: SdesKey) -> Result<f64, LangError> {
        let book = CodeBook::decryption(key);
        let mut symbols = Vec::with_capacity(self.ciphertext.len());
        let mut pending_space = false;
        for &byte in &self.ciphertext {
            let plain = book.map(byte);
            if plain.is_ascii_alphabetic() {
                if pending_space && !symbols.is_empty() {
                    symbols.push(Alphabet::SPACE as u8);
                }
                pending_space = false;
                symbols.push(plain.to_ascii_uppercase() - b'A');
            } else {
                pending_space = true;
            }
        }
        self.model.cost(&symbols)
    }
}

impl crate::search::Objective for KeyFitness {
    /// Keys whose decryption is too short to score get [`MAX_COST`].
    fn evaluate(&self, key: SdesKey) -> f64 {
        self.cost(key).unwrap_or(MAX_COST)
    }
}
