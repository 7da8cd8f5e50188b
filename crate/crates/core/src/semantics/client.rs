//! Text-to-triples clients and extraction of concept links from their output.
//!
//! A client turns a sentence such as `a cup in a room` into an RDF graph in
//! Turtle. The topic of the sentence is the entity that is the subject of
//! the locative `in` relation the sentence template introduces; failing
//! that, the first typed entity that is not the object of another relation.
//! A candidate is produced when the topic, its type, or a class equivalent
//! to either, is a DBpedia resource. From there `owl:sameAs` links in the
//! same graph add Wikidata and ConceptNet ids, and ConceptNet-style
//! `HasA`/`MadeOf`/`UsedFor` edges fill the enrichment lists.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Duration;

use rio_api::model::{Subject, Term};
use rio_api::parser::TriplesParser;
use rio_turtle::{TurtleError, TurtleParser};

use super::report::{Candidate, Enrichment, Evidence, Repository};

/// Score given to every text-to-triples candidate.
pub const TEXT_TO_TRIPLES_SCORE: f64 = 0.9;

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
const OWL_SAME_AS: &str = "http://www.w3.org/2002/07/owl#sameAs";
const OWL_EQUIVALENT_CLASS: &str = "http://www.w3.org/2002/07/owl#equivalentClass";
const DBPEDIA: &str = "http://dbpedia.org/resource/";
const WIKIDATA: &str = "http://www.wikidata.org/entity/";
const CONCEPTNET: &str = "http://conceptnet.io/c/";

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    /// Network failure, timeout or server error; worth retrying.
    #[error("text-to-triples request failed (retriable): {0}")]
    Retriable(String),
    #[error("text-to-triples request rejected: {0}")]
    Rejected(String),
    #[error("text-to-triples response is not valid Turtle: {0}")]
    BadResponse(String),
    #[error("reading recorded response {path}: {source}")]
    Fixture { path: PathBuf, source: std::io::Error },
}

impl ClientError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, ClientError::Retriable(_))
    }
}

pub trait TextToTriplesClient: Send + Sync {
    /// Turtle for `sentence`, or `None` when the tool returned nothing.
    fn fetch(&self, sentence: &str) -> Result<Option<String>, ClientError>;
}

/// File name under which the response for `sentence` is recorded.
pub fn fixture_file_name(sentence: &str) -> String {
    let slug: String = sentence
        .to_lowercase()
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{slug}.ttl")
}

/// Replays recorded responses from a directory; never touches the network.
/// A sentence without a recording counts as an empty response.
#[derive(Clone, Debug)]
pub struct FixtureClient {
    pub dir: PathBuf,
}

impl FixtureClient {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl TextToTriplesClient for FixtureClient {
    fn fetch(&self, sentence: &str) -> Result<Option<String>, ClientError> {
        let path = self.dir.join(fixture_file_name(sentence));
        match std::fs::read_to_string(&path) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(source) => Err(ClientError::Fixture { path, source }),
        }
    }
}

/// HTTP client: `GET <endpoint>?text=<sentence>` asking for Turtle.
#[derive(Clone, Debug)]
pub struct LiveClient {
    pub endpoint: String,
    pub timeout: Duration,
    /// Sent as a bearer token when set.
    pub token: Option<String>,
}

impl LiveClient {
    pub fn new(endpoint: &str) -> Self {
        Self {
            endpoint: endpoint.to_string(),
            timeout: Duration::from_secs(30),
            token: None,
        }
    }
}

impl TextToTriplesClient for LiveClient {
    fn fetch(&self, sentence: &str) -> Result<Option<String>, ClientError> {
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let mut req = agent
            .get(&self.endpoint)
            .query("text", sentence)
            .set("Accept", "text/turtle");
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        match req.call() {
            Ok(resp) => {
                let body = resp.into_string().map_err(|e| ClientError::Retriable(e.to_string()))?;
                Ok((!body.trim().is_empty()).then_some(body))
            }
            Err(ureq::Error::Status(code, _)) if code >= 500 || code == 429 => {
                Err(ClientError::Retriable(format!("HTTP {code}")))
            }
            Err(ureq::Error::Status(code, _)) => Err(ClientError::Rejected(format!("HTTP {code}"))),
            Err(e) => Err(ClientError::Retriable(e.to_string())),
        }
    }
}

type Triple = (String, String, String);

fn parse_turtle(text: &str) -> Result<Vec<Triple>, ClientError> {
    let mut out = Vec::new();
    let mut parser = TurtleParser::new(text.as_bytes(), None);
    parser
        .parse_all(&mut |t| -> Result<(), TurtleError> {
            let s = match t.subject {
                Subject::NamedNode(n) => n.iri.to_string(),
                Subject::BlankNode(b) => format!("_:{}", b.id),
                Subject::Triple(_) => return Ok(()),
            };
            let o = match t.object {
                Term::NamedNode(n) => n.iri.to_string(),
                Term::BlankNode(b) => format!("_:{}", b.id),
                _ => return Ok(()),
            };
            out.push((s, t.predicate.iri.to_string(), o));
            Ok(())
        })
        .map_err(|e| ClientError::BadResponse(e.to_string()))?;
    Ok(out)
}

fn local_name(iri: &str) -> &str {
    iri.rsplit(['#', '/']).next().unwrap_or(iri)
}

fn topic(triples: &[Triple]) -> Option<&str> {
    if let Some((s, _, _)) = triples.iter().find(|(_, p, _)| local_name(p) == "in") {
        return Some(s);
    }
    let objects: BTreeSet<&str> = triples
        .iter()
        .filter(|(_, p, _)| p != RDF_TYPE)
        .map(|(_, _, o)| o.as_str())
        .collect();
    triples
        .iter()
        .find(|(s, p, _)| p == RDF_TYPE && !objects.contains(s.as_str()))
        .map(|(s, _, _)| s.as_str())
}

fn neighbours<'t>(triples: &'t [Triple], node: &str, predicates: &[&str]) -> Vec<&'t str> {
    let mut out = Vec::new();
    for (s, p, o) in triples {
        if !predicates.contains(&p.as_str()) {
            continue;
        }
        if s == node {
            out.push(o.as_str());
        } else if o == node && p != RDF_TYPE {
            out.push(s.as_str());
        }
    }
    out
}

/// Candidates extracted from a Turtle response.
pub fn candidates_from_turtle(text: &str) -> Result<Vec<Candidate>, ClientError> {
    let triples = parse_turtle(text)?;
    let Some(topic) = topic(&triples) else {
        return Ok(Vec::new());
    };
    let mut nodes = vec![topic];
    nodes.extend(neighbours(&triples, topic, &[RDF_TYPE]));
    let mut linked: Vec<&str> = nodes.clone();
    for n in &nodes {
        linked.extend(neighbours(&triples, n, &[OWL_SAME_AS, OWL_EQUIVALENT_CLASS]));
    }
    let dbpedia: BTreeSet<&str> = linked.into_iter().filter(|n| n.starts_with(DBPEDIA)).collect();
    let mut out = Vec::new();
    for db in dbpedia {
        let mut links = BTreeMap::from([(Repository::Dbpedia, db[DBPEDIA.len()..].to_string())]);
        let same = neighbours(&triples, db, &[OWL_SAME_AS]);
        for n in &same {
            if let Some(id) = n.strip_prefix(WIKIDATA) {
                links.entry(Repository::Wikidata).or_insert_with(|| id.to_string());
            } else if let Some(id) = n.strip_prefix(CONCEPTNET) {
                links.entry(Repository::Conceptnet).or_insert_with(|| id.to_string());
            }
        }
        let mut enrichment = Enrichment::default();
        let sources: Vec<&str> = std::iter::once(db).chain(same.iter().copied()).collect();
        for (s, p, o) in &triples {
            if !sources.contains(&s.as_str()) {
                continue;
            }
            let list = match local_name(p) {
                "HasA" => &mut enrichment.part_types,
                "MadeOf" => &mut enrichment.material_types,
                "UsedFor" => &mut enrichment.typical_uses,
                _ => continue,
            };
            let value = local_name(o).to_string();
            if !list.contains(&value) {
                list.push(value);
            }
        }
        out.push(Candidate {
            links,
            score: TEXT_TO_TRIPLES_SCORE,
            evidence: Evidence::TextToTriples,
            enrichment: (!enrichment.is_empty()).then_some(enrichment),
        });
    }
    Ok(out)
}

/// Sends `sentence` to `client` and extracts candidates from the answer.
pub fn link_via_text_to_triples(
    sentence: &str,
    client: &dyn TextToTriplesClient,
) -> Result<Vec<Candidate>, ClientError> {
    if sentence.is_empty() {
        return Ok(Vec::new());
    }
    match client.fetch(sentence)? {
        Some(text) => candidates_from_turtle(&text),
        None => Ok(Vec::new()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUP: &str = r#"
@prefix fred: <http://www.ontologydesignpatterns.org/ont/fred/domain.owl#> .
@prefix owl: <http://www.w3.org/2002/07/owl#> .
@prefix dbpedia: <http://dbpedia.org/resource/> .
fred:cup_1 a fred:Cup .
fred:room_1 a fred:Room .
fred:cup_1 fred:in fred:room_1 .
fred:Cup owl:equivalentClass dbpedia:Cup .
fred:Room owl:equivalentClass dbpedia:Room .
"#;

    #[test]
    fn topic_link_becomes_candidate() {
        let c = candidates_from_turtle(CUP).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].links, BTreeMap::from([(Repository::Dbpedia, "Cup".to_string())]));
        assert_eq!(c[0].score, TEXT_TO_TRIPLES_SCORE);
        assert_eq!(c[0].evidence, Evidence::TextToTriples);
    }

    #[test]
    fn no_topic_link_gives_nothing() {
        let text = CUP.replace("fred:Cup owl:equivalentClass dbpedia:Cup .", "");
        assert!(candidates_from_turtle(&text).unwrap().is_empty());
        assert!(candidates_from_turtle("").unwrap().is_empty());
    }

    #[test]
    fn same_as_hops_add_repositories_and_enrichment() {
        let text = format!(
            "{CUP}\n<http://dbpedia.org/resource/Cup> owl:sameAs <http://www.wikidata.org/entity/Q81727> .\n\
             <http://conceptnet.io/c/en/cup> owl:sameAs <http://dbpedia.org/resource/Cup> .\n\
             <http://conceptnet.io/c/en/cup> <http://conceptnet.io/r/HasA> <http://conceptnet.io/c/en/handle> .\n\
             <http://conceptnet.io/c/en/cup> <http://conceptnet.io/r/UsedFor> <http://conceptnet.io/c/en/drinking> .\n"
        );
        let c = candidates_from_turtle(&text).unwrap();
        assert_eq!(c[0].concept_iris(), ["dbpedia:Cup", "wd:Q81727", "conceptnet:en/cup"]);
        let e = c[0].enrichment.as_ref().unwrap();
        assert_eq!(e.part_types, ["handle"]);
        assert_eq!(e.typical_uses, ["drinking"]);
    }

    #[test]
    fn fixture_client_reads_recordings() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(fixture_file_name("a cup in a room")), CUP).unwrap();
        let client = FixtureClient::new(dir.path());
        assert_eq!(link_via_text_to_triples("a cup in a room", &client).unwrap().len(), 1);
        assert!(link_via_text_to_triples("a mug in a room", &client).unwrap().is_empty());
        std::fs::write(dir.path().join(fixture_file_name("a bad in a room")), "<<<").unwrap();
        assert!(matches!(
            link_via_text_to_triples("a bad in a room", &client),
            Err(ClientError::BadResponse(_))
        ));
    }

    #[test]
    fn unreachable_endpoint_is_retriable() {
        let mut client = LiveClient::new("http://127.0.0.1:9/fred");
        client.timeout = Duration::from_millis(500);
        let err = link_via_text_to_triples("a cup in a room", &client).unwrap_err();
        assert!(err.is_retriable(), "{err}");
    }
}
