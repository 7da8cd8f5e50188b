//! Phrase lookup over every contiguous token run.

use scenegraph_core::semantics::{Lexicon, PhraseMatch};

/// All `(start, len)` runs of `tokens` whose joined text is a lexicon
/// phrase, ordered by start and then length.
pub fn naive_find_phrases(lexicon: &Lexicon, tokens: &[String]) -> Vec<PhraseMatch> {
    let mut out = Vec::new();
    for start in 0..tokens.len() {
        for end in start + 1..=tokens.len() {
            let phrase = tokens[start..end].join(" ");
            if lexicon.entries().contains_key(&phrase) {
                out.push(PhraseMatch {
                    start,
                    len: end - start,
                    phrase,
                });
            }
        }
    }
    out
}
