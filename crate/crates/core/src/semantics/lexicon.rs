//! Word lists mapping phrases to ontology concepts, with a token-trie matcher.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::preprocess::{normalized_tokens, strip_template};
use super::report::{split_iri, Candidate, Evidence};

/// Household concepts shipped with the crate.
pub const BUILTIN_TSV: &str = include_str!("../../data/lexicon.tsv");

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LexiconEntry {
    pub concept: String,
    pub weight: f64,
}

#[derive(Clone, Debug, Default)]
struct TrieNode {
    next: HashMap<String, usize>,
    /// Normalized phrase ending here.
    phrase: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    /// Normalized phrase (singular tokens joined by one space) → concepts.
    entries: BTreeMap<String, Vec<LexiconEntry>>,
    trie: Vec<TrieNode>,
}

/// A phrase found in a token sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct PhraseMatch {
    pub start: usize,
    pub len: usize,
    pub phrase: String,
}

impl Lexicon {
    /// Parses `phrase<TAB>concept_iri<TAB>weight` lines. Blank lines and
    /// lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| LexiconError::Line { line: line_no, message };
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [phrase, concept, weight] = cols[..] else {
                return Err(err(format!("expected 3 tab-separated columns, found {}", cols.len())));
            };
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| err(format!("weight `{weight}` is not a number")))?;
            if !(weight > 0.0 && weight <= 1.0) {
                return Err(err(format!("weight {weight} outside (0, 1]")));
            }
            let concept = concept.trim();
            if split_iri(concept).is_none() {
                return Err(err(format!("`{concept}` is not a known-prefix IRI")));
            }
            lex.insert(phrase, concept, weight).map_err(err)?;
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TSV).expect("shipped lexicon is valid")
    }

    /// Adds one entry. A repeated (phrase, concept) pair keeps the larger weight.
    pub fn insert(&mut self, phrase: &str, concept: &str, weight: f64) -> Result<(), String> {
        let tokens = normalized_tokens(phrase);
        if tokens.is_empty() {
            return Err(format!("phrase `{phrase}` has no words"));
        }
        let key = tokens.join(" ");
        let list = self.entries.entry(key.clone()).or_default();
        match list.iter_mut().find(|e| e.concept == concept) {
            Some(e) => e.weight = e.weight.max(weight),
            None => list.push(LexiconEntry {
                concept: concept.to_string(),
                weight,
            }),
        }
        if self.trie.is_empty() {
            self.trie.push(TrieNode::default());
        }
        let mut node = 0;
        for t in tokens {
            node = match self.trie[node].next.get(&t) {
                Some(&n) => n,
                None => {
                    self.trie.push(TrieNode::default());
                    let n = self.trie.len() - 1;
                    self.trie[node].next.insert(t, n);
                    n
                }
            };
        }
        self.trie[node].phrase = Some(key);
        Ok(())
    }

    pub fn entries(&self) -> &BTreeMap<String, Vec<LexiconEntry>> {
        &self.entries
    }

    pub fn get(&self, phrase: &str) -> Option<&[LexiconEntry]> {
        self.entries.get(phrase).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every lexicon phrase occurring as a contiguous run of `tokens`.
    pub fn find_phrases(&self, tokens: &[String]) -> Vec<PhraseMatch> {
        let mut out = Vec::new();
        if self.trie.is_empty() {
            return out;
        }
        for start in 0..tokens.len() {
            let mut node = 0;
            for (k, t) in tokens[start..].iter().enumerate() {
                let Some(&n) = self.trie[node].next.get(t) else { break };
                node = n;
                if let Some(p) = &self.trie[node].phrase {
                    out.push(PhraseMatch {
                        start,
                        len: k + 1,
                        phrase: p.clone(),
                    });
                }
            }
        }
        out
    }
}

/// Lexicon candidates for a prim name or its query sentence.
///
/// Each concept is scored by its best match, `weight × matched / total`
/// tokens. Candidates come longest match first, then by weight, then by IRI.
pub fn link_via_lexicon(name: &str, lexicon: &Lexicon) -> Vec<Candidate> {
    let tokens = normalized_tokens(strip_template(name));
    rank_matches(
        &tokens,
        lexicon.find_phrases(&tokens).iter().flat_map(|m| {
            lexicon
                .get(&m.phrase)
                .unwrap_or_default()
                .iter()
                .map(move |e| (m.len, e))
        }),
    )
}

/// Shared ranking of (match length, entry) pairs.
pub fn rank_matches<'a>(tokens: &[String], hits: impl Iterator<Item = (usize, &'a LexiconEntry)>) -> Vec<Candidate> {
    let mut best: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for (len, e) in hits {
        let slot = best.entry(&e.concept).or_insert((len, e.weight));
        if (len, e.weight) > *slot {
            *slot = (len, e.weight);
        }
    }
    let mut ranked: Vec<(&str, usize, f64)> = best.into_iter().map(|(c, (l, w))| (c, l, w)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(b.0)));
    let total = tokens.len().max(1) as f64;
    ranked
        .into_iter()
        .filter_map(|(concept, len, weight)| {
            let (repo, id) = split_iri(concept)?;
            Some(Candidate {
                links: BTreeMap::from([(repo, id.to_string())]),
                score: weight * len as f64 / total,
                evidence: Evidence::Lexicon,
                enrichment: None,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Lexicon {
        Lexicon::parse("milk box\tdfl:milk_box.n\t1\nbox\tdfl:box.n\t0.8\n# note\n\nmilk\tdfl:milk.n\t0.9\n").unwrap()
    }

    #[test]
    fn longest_match_ranks_first() {
        let c = link_via_lexicon("a milk box in a room", &small());
        let iris: Vec<String> = c.iter().map(|c| c.concept_iris()[0].clone()).collect();
        assert_eq!(iris, ["dfl:milk_box.n", "dfl:milk.n", "dfl:box.n"]);
        assert_eq!(c[0].evidence, Evidence::Lexicon);
        let c = link_via_lexicon("MilkBox_2", &small());
        assert_eq!(c[0].score, 1.0);
        assert_eq!(c[2].score, 0.4);
    }

    #[test]
    fn no_hit_gives_nothing() {
        assert!(link_via_lexicon("Toaster", &small()).is_empty());
        assert!(link_via_lexicon("", &small()).is_empty());
    }

    #[test]
    fn plurals_match_singular_entries() {
        assert_eq!(link_via_lexicon("Boxes", &small())[0].concept_iris(), ["dfl:box.n"]);
    }

    #[test]
    fn bad_lines_are_located() {
        for (text, line) in [
            ("cup\tdfl:cup.n\t1\nmug\tdfl:mug.n\n", 2),
            ("cup\tdfl:cup.n\t0\n", 1),
            ("cup\tnope\t1\n", 1),
            ("#\n\n123\tdfl:x.n\t1\n", 3),
        ] {
            match Lexicon::parse(text) {
                Err(LexiconError::Line { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn builtin_lexicon_loads() {
        let lex = Lexicon::builtin();
        assert!(lex.len() >= 150, "{}", lex.len());
        let concepts: std::collections::BTreeSet<&str> =
            lex.entries().values().flatten().map(|e| e.concept.as_str()).collect();
        assert!(concepts.len() >= 140, "{}", concepts.len());
        assert!(concepts.iter().all(|c| c.starts_with("dfl:") && c.ends_with(".n")));
    }
}
