//! Semantic report and candidate types with their JSON form.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Report JSON schema version.
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repository {
    Dbpedia,
    Wikidata,
    Conceptnet,
    SomaDfl,
    Cskg,
}

impl Repository {
    pub const ALL: [Repository; 5] = [
        Repository::Dbpedia,
        Repository::Wikidata,
        Repository::Conceptnet,
        Repository::SomaDfl,
        Repository::Cskg,
    ];

    /// Compact IRI prefix, without the colon.
    pub fn prefix(self) -> &'static str {
        match self {
            Repository::Dbpedia => "dbpedia",
            Repository::Wikidata => "wd",
            Repository::Conceptnet => "conceptnet",
            Repository::SomaDfl => "dfl",
            Repository::Cskg => "cskg",
        }
    }

    pub fn from_prefix(prefix: &str) -> Option<Repository> {
        Repository::ALL.into_iter().find(|r| r.prefix() == prefix)
    }
}

/// Splits `dfl:cup.n` into its repository and id.
pub fn split_iri(iri: &str) -> Option<(Repository, &str)> {
    let (prefix, id) = iri.split_once(':')?;
    let repo = Repository::from_prefix(prefix)?;
    (!id.is_empty()).then_some((repo, id))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    TextToTriples,
    Lexicon,
    Manual,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Enrichment {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub part_types: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub material_types: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub typical_uses: Vec<String>,
}

impl Enrichment {
    pub fn is_empty(&self) -> bool {
        self.part_types.is_empty() && self.material_types.is_empty() && self.typical_uses.is_empty()
    }
}

/// One possible meaning of a prim name: ids of the same concept in one or
/// more repositories (at most one id per repository).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub links: BTreeMap<Repository, String>,
    pub score: f64,
    pub evidence: Evidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enrichment: Option<Enrichment>,
}

impl Candidate {
    /// `prefix:id` for every link, in repository order.
    pub fn concept_iris(&self) -> Vec<String> {
        self.links
            .iter()
            .map(|(r, id)| format!("{}:{id}", r.prefix()))
            .collect()
    }

    /// The IRI a label should use: the SOMA_DFL link if present, else the first.
    pub fn preferred_iri(&self) -> Option<String> {
        let (r, id) = self
            .links
            .get_key_value(&Repository::SomaDfl)
            .or_else(|| self.links.iter().next())?;
        Some(format!("{}:{id}", r.prefix()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChosenLabel {
    pub iri: String,
    /// Set when no candidate proposed this label.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub manual: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticReport {
    pub version: u32,
    /// Prim path.
    pub subject: String,
    pub candidates: Vec<Candidate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub chosen_labels: Vec<ChosenLabel>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportJsonError {
    #[error("report JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported report version {0}")]
    Version(u32),
    #[error("candidate without links in report for {0}")]
    EmptyLinks(String),
}

impl SemanticReport {
    pub fn new(subject: &str, candidates: Vec<Candidate>) -> Self {
        Self {
            version: REPORT_VERSION,
            subject: subject.to_string(),
            candidates,
            chosen_labels: Vec::new(),
        }
    }

    pub fn proposes(&self, iri: &str) -> bool {
        self.candidates
            .iter()
            .any(|c| c.concept_iris().iter().any(|i| i == iri))
    }

    /// Replaces the chosen labels, marking those no candidate proposed as manual.
    pub fn set_chosen(&mut self, labels: &[String]) {
        self.chosen_labels = labels
            .iter()
            .map(|iri| ChosenLabel {
                iri: iri.clone(),
                manual: !self.proposes(iri),
            })
            .collect();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportJsonError> {
        let r: SemanticReport = serde_json::from_str(text)?;
        if r.version != REPORT_VERSION {
            return Err(ReportJsonError::Version(r.version));
        }
        if r.candidates.iter().any(|c| c.links.is_empty()) {
            return Err(ReportJsonError::EmptyLinks(r.subject));
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn repo() -> impl Strategy<Value = Repository> {
        prop::sample::select(Repository::ALL.to_vec())
    }

    fn candidate() -> impl Strategy<Value = Candidate> {
        (
            prop::collection::btree_map(repo(), "[A-Za-z0-9_.]{1,8}", 1..4),
            0.0f64..=1.0,
            prop::sample::select(vec![Evidence::TextToTriples, Evidence::Lexicon, Evidence::Manual]),
            prop::option::of(prop::collection::vec("[a-z]{1,6}", 0..3)),
        )
            .prop_map(|(links, score, evidence, parts)| Candidate {
                links,
                score,
                evidence,
                enrichment: parts.map(|p| Enrichment {
                    part_types: p,
                    ..Default::default()
                }),
            })
    }

    proptest! {
        #[test]
        fn json_round_trip_is_identity(
            subject in "/World(/[A-Za-z_][A-Za-z0-9_]{0,6}){1,3}",
            candidates in prop::collection::vec(candidate(), 0..4),
            labels in prop::collection::vec("dfl:[a-z]{1,6}\\.n", 0..3),
        ) {
            let mut r = SemanticReport::new(&subject, candidates);
            r.set_chosen(&labels);
            let back = SemanticReport::from_json(&r.to_json()).unwrap();
            prop_assert_eq!(back, r);
        }
    }

    #[test]
    fn json_shape() {
        let mut r = SemanticReport::new(
            "/World/Cup_1",
            vec![Candidate {
                links: BTreeMap::from([(Repository::SomaDfl, "cup.n".to_string())]),
                score: 0.5,
                evidence: Evidence::Lexicon,
                enrichment: None,
            }],
        );
        r.set_chosen(&["dfl:cup.n".into(), "dfl:mug.n".into()]);
        assert_eq!(
            r.to_json(),
            r#"{"version":1,"subject":"/World/Cup_1","candidates":[{"links":{"soma_dfl":"cup.n"},"score":0.5,"evidence":"lexicon"}],"chosen_labels":[{"iri":"dfl:cup.n"},{"iri":"dfl:mug.n","manual":true}]}"#
        );
        assert!(matches!(
            SemanticReport::from_json(&r.to_json().replace(":1,", ":2,")),
            Err(ReportJsonError::Version(2))
        ));
    }
}
