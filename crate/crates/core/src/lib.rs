//! Simplified DES and a workbench for recovering its 10-bit key with genetic,
//! memetic and simulated-annealing search guided by n-gram statistics.
//!
//! - [`cipher`]: bit-exact SDES, block and ECB byte modes.
//! - [`langmodel`]: n-gram tables, the weighted L1 cost, model files.
//! - [`search`]: brute force, hill climbing, GA, MA and SA over keys.
//! - [`experiment`]: seeded trials, per-point aggregation, CSV output.

pub mod cipher;
pub mod experiment;
pub mod langmodel;
pub mod search;

/// Alice's Adventures in Wonderland (Project Gutenberg, public domain), as
/// distributed in the Canterbury compression corpus.
pub const REFERENCE_CORPUS: &str = include_str!("../data/alice29.txt");
pub const REFERENCE_CORPUS_SOURCE: &str =
    "alice29.txt (Alice's Adventures in Wonderland, Canterbury corpus)";

/// The bundled corpus after normalization.
pub fn reference_text() -> String {
    langmodel::normalize_text(REFERENCE_CORPUS)
}

/// A model built from the bundled corpus.
pub fn reference_model() -> langmodel::LanguageModel {
    langmodel::build_model(REFERENCE_CORPUS, REFERENCE_CORPUS_SOURCE)
        .expect("bundled corpus is long enough")
}
