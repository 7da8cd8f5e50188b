//! Implementation against independent oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenegraph_core::kg::{build_kg, competency_question, KnowledgeGraph, Ontology, Triple, INSTANCE_OF};
use scenegraph_core::math::relative_matrix_error;
use scenegraph_core::refine::mesh_mass_properties;
use scenegraph_core::scene::kinematic_classification;
use scenegraph_core::semantics::{normalized_tokens, strip_template, Lexicon};
use scenegraph_core::usda::parse;
use scenegraph_core::{JointType, SceneJoint};
use scenegraph_testkit::fixtures_dir;
use scenegraph_testkit::hull::{convex_hull, random_convex_points};
use scenegraph_testkit::kg::NaiveModel;
use scenegraph_testkit::lexicon::naive_find_phrases;
use scenegraph_testkit::loops::loop_oracle;
use scenegraph_testkit::monte_carlo::monte_carlo_mass_properties;
use scenegraph_testkit::round_trip::{import, SCENE_FIXTURES};
use scenegraph_testkit::synth::random_world;

#[test]
fn hull_mass_properties_agree_with_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let hull = convex_hull(&random_convex_points(&mut rng, 20));
        let exact = mesh_mass_properties(&hull, 1.0).unwrap();
        let mc = monte_carlo_mass_properties(&hull, 2_000_000, rng.gen());
        let (lo, hi) = hull.bounding_box().unwrap();
        assert!((exact.volume - mc.volume).abs() / mc.volume < 0.01);
        assert!((exact.center_of_mass - mc.center_of_mass).norm() / (hi - lo).norm() < 0.01);
        assert!(relative_matrix_error(&exact.inertia, &mc.inertia) < 0.01);
    }
}

/// Adds `extra` joints between random bodies of a random tree.
fn world_with_loops(seed: u64, bodies: usize, extra: usize) -> scenegraph_core::SceneWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = random_world(&mut rng, bodies);
    for k in 0..extra {
        let a = rng.gen_range(0..bodies);
        let b = rng.gen_range(0..bodies);
        let j = SceneJoint::new(
            &format!("extra_{k}"),
            JointType::Spherical,
            &format!("link_{a}"),
            &format!("link_{b}"),
        );
        w.world_joints_mut().push(j);
    }
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loop_detection_matches_edge_removal(seed in any::<u64>(), bodies in 1usize..12, extra in 0usize..4) {
        let w = world_with_loops(seed, bodies, extra);
        let got = kinematic_classification(&w);
        let want = loop_oracle(&w);
        let mut cycle = got.cycle_joints.clone();
        cycle.sort();
        prop_assert_eq!(cycle, want.cycle_joints);
        prop_assert_eq!(got.closing_joints.len(), want.cycle_rank);
    }

    #[test]
    fn lexicon_trie_matches_every_run(picks in proptest::collection::vec(0usize..10_000, 0..8)) {
        let lex = Lexicon::builtin();
        let vocab: Vec<String> = lex
            .entries()
            .keys()
            .flat_map(|p| p.split(' ').map(str::to_string).collect::<Vec<_>>())
            .chain(["red", "big", "old"].map(String::from))
            .collect();
        let tokens: Vec<String> = picks.iter().map(|&i| vocab[i % vocab.len()].clone()).collect();
        prop_assert_eq!(lex.find_phrases(&tokens), naive_find_phrases(&lex, &tokens));
    }
}

fn fixture_names() -> Vec<String> {
    let mut names = Vec::new();
    for rel in SCENE_FIXTURES {
        let (_, world) = import(&fixtures_dir().join(rel)).unwrap();
        names.extend(world.all_names().into_iter().map(str::to_string));
    }
    names
}

#[test]
fn lexicon_trie_matches_every_run_on_fixture_names() {
    let lex = Lexicon::builtin();
    for name in fixture_names() {
        let tokens = normalized_tokens(strip_template(&name));
        assert_eq!(lex.find_phrases(&tokens), naive_find_phrases(&lex, &tokens), "{name}");
    }
}

fn table_setting() -> KnowledgeGraph {
    let dir = fixtures_dir().join("kg");
    let onto = Ontology::parse(&std::fs::read_to_string(dir.join("table_setting.onto")).unwrap()).unwrap();
    let stage = parse(&std::fs::read_to_string(dir.join("table_setting.usda")).unwrap()).unwrap();
    build_kg(&stage, &onto).0
}

fn tool_bound(n: u8) -> scenegraph_core::kg::Query {
    let q = competency_question(n).unwrap().unwrap();
    let values = [("TOOL".to_string(), "dfl:knife.n".to_string())].into_iter().collect();
    q.bind(&values).unwrap()
}

#[test]
fn competency_answers_match_exhaustive_search_on_the_fixture() {
    let kg = table_setting();
    assert!(kg.all_triples().len() <= 200);
    let naive = NaiveModel::new(&kg);
    for n in 1..=5 {
        let q = tool_bound(n);
        assert_eq!(kg.evaluate(&q).unwrap().rows, naive.evaluate(&q), "CQ{n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random scenes over the fixture ontology: random labels, parts and contents.
    #[test]
    fn competency_answers_match_exhaustive_search_on_random_scenes(
        labels in proptest::collection::vec((0usize..12, 0usize..64), 1..14),
        links in proptest::collection::vec((0usize..12, 0usize..12, any::<bool>()), 0..10),
    ) {
        let base = table_setting();
        let classes: Vec<String> = base.ontology.classes.iter().cloned().collect();
        let mut kg = KnowledgeGraph::new(base.ontology.clone());
        for (x, c) in &labels {
            kg.add(Triple::new(&format!("scene:obj_{x}"), INSTANCE_OF, &classes[c % classes.len()]));
        }
        for (a, b, part) in &links {
            let p = if *part { "hasPart" } else { "contains" };
            kg.add(Triple::new(&format!("scene:obj_{a}"), p, &format!("scene:obj_{b}")));
        }
        let naive = NaiveModel::new(&kg);
        for n in 1..=5 {
            let q = tool_bound(n);
            prop_assert_eq!(kg.evaluate(&q).unwrap().rows, naive.evaluate(&q), "CQ{}", n);
        }
    }
}

#[test]
fn naive_model_sees_the_handle_disposition() {
    let naive = NaiveModel::new(&table_setting());
    assert!(naive.size() > 0);
    let q = competency_question(4).unwrap().unwrap();
    let rows = naive.evaluate(&q);
    assert!(rows.contains(&vec!["scene:World_fridge".to_string()]));
}
