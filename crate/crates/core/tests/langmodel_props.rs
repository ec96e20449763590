mod common;

use proptest::prelude::*;
use sdes_core::cipher::{encrypt_bytes, SdesKey};
use sdes_core::langmodel::{
    build_model, compute_stats, cost, key_fitness, normalize_text, Alphabet, KeyFitness, LangError,
    NGramWeights, Order, MAX_COST,
};
use sdes_core::search::{brute_force, Objective};
use sdes_core::{reference_model, reference_text};

// Frozen from an independent Python pass over the same corpus
// (regex [^A-Za-z]+ -> ' ', strip, upper).
const NORMALIZED_LEN: usize = 134_997;
const TH_FREQUENCY: f64 = 0.025_756_318_705_739_43;

#[test]
fn reference_corpus_statistics() {
    let text = reference_text();
    assert_eq!(text.len(), NORMALIZED_LEN);
    let model = reference_model();
    assert!((model.bigram.get("TH") - TH_FREQUENCY).abs() < 1e-12);
    let top: Vec<&str> = model.bigram.ranked().iter().take(5).map(|e| e.0).collect();
    assert!(top.contains(&"TH"), "{top:?}");
    for order in Order::ALL {
        assert!((model.table(order).total() - 1.0).abs() < 1e-9);
        assert!(model.table(order).iter().all(|(_, f)| f >= 0.0));
    }
    assert_eq!(reference_model(), model);
}

#[test]
fn corpus_scores_zero_against_itself() {
    let model = reference_model();
    let text = reference_text();
    for weights in [
        NGramWeights::default(),
        NGramWeights::new(1.0, 0.0, 0.0).unwrap(),
        NGramWeights::new(0.2, 0.5, 0.3).unwrap(),
    ] {
        assert!(cost(&model, &text, &weights).unwrap().abs() < 1e-9);
    }
}

#[test]
fn dense_route_matches_sparse_route_for_all_keys() {
    let model = reference_model();
    let text = reference_text();
    let message = &text[5_000..5_400];
    let ciphertext = encrypt_bytes(message.as_bytes(), "0111010011".parse().unwrap());
    for weights in [
        NGramWeights::default(),
        NGramWeights::new(0.3, 0.3, 0.4).unwrap(),
    ] {
        let fast = KeyFitness::new(&ciphertext, &model, weights).unwrap();
        for key in SdesKey::all() {
            match (
                key_fitness(&ciphertext, key, &model, &weights),
                fast.cost(key),
            ) {
                (Ok(slow), Ok(quick)) => {
                    assert!((slow - quick).abs() < 1e-12, "key {key}: {slow} vs {quick}")
                }
                // Some keys decrypt every plaintext symbol to a non-letter.
                (
                    Err(LangError::InsufficientText { .. }),
                    Err(LangError::InsufficientText { .. }),
                ) => {
                    assert_eq!(fast.evaluate(key), MAX_COST)
                }
                (slow, quick) => panic!("key {key}: routes disagree: {slow:?} vs {quick:?}"),
            }
        }
    }
}

#[test]
fn true_key_minimizes_fitness_on_long_sample() {
    let model = reference_model();
    let text = reference_text();
    for (offset, key) in [
        (1_000, "1010000010"),
        (40_000, "0001110101"),
        (90_000, "1111000011"),
    ] {
        let key: SdesKey = key.parse().unwrap();
        let ciphertext = encrypt_bytes(&text.as_bytes()[offset..offset + 1000], key);
        let fitness = KeyFitness::new(&ciphertext, &model, NGramWeights::default()).unwrap();
        assert_eq!(brute_force(&fitness).key, key);
        let direct = key_fitness(&ciphertext, key, &model, &NGramWeights::default()).unwrap();
        assert_eq!(
            direct,
            key_fitness(&ciphertext, key, &model, &NGramWeights::default()).unwrap()
        );
        assert!((fitness.evaluate(key) - direct).abs() < 1e-12);
    }
}

#[test]
fn bigram_only_cost_needs_no_trigram_table() {
    let mut model = reference_model();
    model.trigram = Default::default();
    model.validate().unwrap();
    let stats = compute_stats("THE CAT", &[Order::Bigram]).unwrap();
    assert!(stats.trigram.is_empty() && stats.unigram.is_empty());
    assert!(cost(&model, "THE CAT", &NGramWeights::default()).is_ok());
}

#[test]
fn model_file_round_trip_on_reference_corpus() {
    let model = reference_model();
    let mut buffer = Vec::new();
    model.write_to(&mut buffer).unwrap();
    let back = sdes_core::langmodel::LanguageModel::read_from(buffer.as_slice()).unwrap();
    assert_eq!(back, model);
}

fn alphabet_text() -> impl Strategy<Value = String> {
    proptest::collection::vec(0usize..27, 3..120)
        .prop_map(|idx| idx.into_iter().map(Alphabet::symbol).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_bounded_and_order_independent(text in alphabet_text(), seed in any::<u64>()) {
        let model = build_model(&"the quick brown fox jumps over the lazy dog ".repeat(30), "pangram").unwrap();
        let c = cost(&model, &text, &NGramWeights::default()).unwrap();
        prop_assert!((0.0..=2.0 + 1e-12).contains(&c));

        // Walk the 27x27 product in a shuffled symbol order.
        let mut symbols: Vec<char> = Alphabet::SYMBOLS.chars().collect();
        let mut state = seed | 1;
        for i in (1..symbols.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            symbols.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let enumerated = common::l1_by_enumeration(&model.bigram, &text, 2, &symbols);
        prop_assert!((c - enumerated).abs() < 1e-12, "{} vs {}", c, enumerated);
    }

    #[test]
    fn normalized_text_stays_in_alphabet(raw in ".{0,200}") {
        let norm = normalize_text(&raw);
        prop_assert!(norm.chars().all(|c| Alphabet::index(c).is_some()));
        prop_assert!(!norm.starts_with(' ') && !norm.ends_with(' ') && !norm.contains("  "));
        prop_assert_eq!(normalize_text(&norm), norm.clone());
    }

    #[test]
    fn stats_tables_normalized(text in alphabet_text()) {
        let stats = compute_stats(&text, &Order::ALL).unwrap();
        for order in Order::ALL {
            prop_assert!((stats.table(order).total() - 1.0).abs() < 1e-9);
        }
    }
}
