//! Small built-in datasets: the Alice/Bob social graph used throughout the
//! documentation and a synthetic WordNet-like taxonomy generator for smoke
//! runs when no public dataset is at hand.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::explain::ExplainConfig;
use crate::graph::{GraphBuilder, KnowledgeGraph, SchemaMap, Split, Triple};
use crate::model::{EmbeddingStore, ModelKind};
use crate::surrogate::SurrogateMethod;

/// A graph with a hand-made model around the prediction `knows(Alice, Bob)`.
pub struct SocialFixture {
    pub graph: KnowledgeGraph,
    pub schema: SchemaMap,
    pub store: EmbeddingStore,
    pub predicted: Triple,
}

/// Pairs that know each other through a colleague (`knows` then
/// `works_with`), some also through a sibling. Alice and Bob are such a
/// pair, but `knows(Alice, Bob)` itself is held out; Carol and Dave are
/// embedded closest to them.
pub fn social() -> SocialFixture {
    // (head, tail, colleague, sibling-of-tail, position in embedding space)
    let pairs: [(&str, &str, &str, Option<&str>, f64); 6] = [
        ("Alice", "Bob", "Tom", Some("Pedro"), 0.0),
        ("Carol", "Dave", "Anja", Some("Jan"), 0.1),
        ("Erin", "Frank", "Mia", Some("Pia"), 0.6),
        ("Gus", "Hana", "Ned", None, 0.9),
        ("Ivan", "Jill", "Oli", None, 1.2),
        ("Kim", "Lou", "Rae", Some("Sid"), 1.5),
    ];
    let mut b = GraphBuilder::new();
    let mut positions: Vec<(String, [f64; 3])> = Vec::new();
    for (i, &(h, t, colleague, sibling, x)) in pairs.iter().enumerate() {
        let split = if i == 0 { Split::Valid } else { Split::Train };
        b.add(h, "knows", t, split);
        b.add(h, "knows", colleague, Split::Train);
        b.add(colleague, "works_with", t, Split::Train);
        positions.push((h.into(), [1.0, x, 0.0]));
        positions.push((t.into(), [0.0, x, 1.0]));
        positions.push((colleague.into(), [0.5, x + 3.0, 0.5]));
        if let Some(s) = sibling {
            b.add(h, "knows", s, Split::Train);
            b.add(s, "sibling_of", t, Split::Train);
            positions.push((s.into(), [0.5, x - 3.0, 0.5]));
        }
    }
    // Unrelated people, so that corrupted pairs exist.
    for (i, name) in ["Uma", "Vic", "Wes", "Xia"].iter().enumerate() {
        let other = ["Vic", "Wes", "Xia", "Uma"][i];
        b.add(name, "works_with", other, Split::Train);
        positions.push(((*name).into(), [3.0, 2.0 * i as f64, 3.0]));
    }
    let graph = b.build();
    let dim = 3;
    let mut entities = vec![0.0; graph.num_entities() * dim];
    for (name, v) in &positions {
        let e = graph.entity_id(name).expect("fixture entity").index();
        entities[e * dim..(e + 1) * dim].copy_from_slice(v);
    }
    let mut relations = vec![0.0; graph.num_relations() * dim];
    for (name, v) in [
        ("knows", [1.0, 0.2, 1.0]),
        ("works_with", [0.2, 1.0, 0.2]),
        ("sibling_of", [0.2, -1.0, 0.2]),
    ] {
        let r = graph.relation_id(name).expect("fixture relation").index();
        relations[r * dim..(r + 1) * dim].copy_from_slice(&v);
    }
    let store = EmbeddingStore::new(ModelKind::DistMult, dim, entities, relations, None)
        .expect("fixture dimensions");
    let schema = SchemaMap::uniform(&graph, "Person").expect("uniform schema");
    let predicted = graph
        .triple("Alice", "knows", "Bob")
        .expect("fixture triple");
    SocialFixture {
        graph,
        schema,
        store,
        predicted,
    }
}

/// Explainer settings the social graph is sized for: five neighbours and
/// walks of up to two edges, ranked by HSIC-Lasso.
pub fn social_config() -> ExplainConfig {
    let mut c = ExplainConfig::new(SurrogateMethod::HsicLasso);
    c.k = 5;
    c.max_walk_len = 2;
    c
}

/// Options of [`synthetic_wordnet`].
#[derive(Clone, Debug)]
pub struct WordNetConfig {
    /// Approximate number of triples over all splits.
    pub triples: usize,
    pub orders_per_division: usize,
    pub families_per_order: usize,
    pub genera_per_family: usize,
    /// Fraction of triples held out for validation and again for test.
    pub holdout: f64,
    /// Probability that a taxonomy edge also appears as an unrelated-relation edge.
    pub noise: f64,
    pub seed: u64,
}

impl Default for WordNetConfig {
    fn default() -> Self {
        Self {
            triples: 5000,
            orders_per_division: 3,
            families_per_order: 4,
            genera_per_family: 3,
            holdout: 0.05,
            noise: 0.15,
            seed: 7,
        }
    }
}

/// A generated taxonomy with its lexname-style schema.
pub struct WordNetFixture {
    pub graph: KnowledgeGraph,
    pub schema: SchemaMap,
    /// Entity to class assignments, as they would appear in a schema file.
    pub classes: Vec<(String, String)>,
}

const LEXNAMES: [&str; 4] = ["noun.animal", "noun.plant", "noun.object", "noun.group"];

/// Generates a WordNet-flavoured graph with WN18RR relation names.
///
/// Divisions contain orders, orders contain families, families contain
/// genera (`member_meronym`, whole to part). Every family is a hyponym of
/// its division's family category (`hypernym(family, <division>_family)`),
/// and the category itself is a member of the division; genera likewise
/// point to a genus category. The first division reproduces
/// `division_Eubacteria > order_Spirochaetales > family_Treponemataceae`
/// with the category `bacteria_family`, and the hypernym edge
/// `(family_Treponemataceae, hypernym, bacteria_family)` is always placed
/// in the validation split.
pub fn synthetic_wordnet(config: &WordNetConfig) -> WordNetFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut triples: Vec<(String, &'static str, String)> = Vec::new();
    let mut classes: Vec<(String, String)> = Vec::new();
    let per_division = {
        let (o, f, g) = (
            config.orders_per_division,
            config.families_per_order,
            config.genera_per_family,
        );
        // Taxonomy edges plus, on average, one derived-form pair per family
        // and genus.
        2 + o + 3 * o * f + 3 * o * f * g
    };
    let divisions =
        (config.triples as f64 / (per_division as f64 * (1.0 + config.noise))).ceil() as usize;
    let divisions = divisions.max(1);

    for d in 0..divisions {
        let class = LEXNAMES[d % LEXNAMES.len()].to_string();
        let (division, family_cat, genus_cat) = if d == 0 {
            (
                "division_Eubacteria".to_string(),
                "bacteria_family".to_string(),
                "bacteria_genus".to_string(),
            )
        } else {
            (
                format!("division_d{d}"),
                format!("d{d}_family"),
                format!("d{d}_genus"),
            )
        };
        for e in [&division, &family_cat, &genus_cat] {
            classes.push((e.clone(), class.clone()));
        }
        triples.push((division.clone(), "_member_meronym", family_cat.clone()));
        triples.push((division.clone(), "_member_meronym", genus_cat.clone()));
        for o in 0..config.orders_per_division {
            let order = match (d, o) {
                (0, 0) => "order_Spirochaetales".to_string(),
                (0, 1) => "order_Eubacteriales".to_string(),
                _ => format!("order_d{d}_o{o}"),
            };
            classes.push((order.clone(), class.clone()));
            triples.push((division.clone(), "_member_meronym", order.clone()));
            for f in 0..config.families_per_order {
                let family = match (d, o, f) {
                    (0, 0, 0) => "family_Treponemataceae".to_string(),
                    (0, 1, 0) => "family_Bacillaceae".to_string(),
                    _ => format!("family_d{d}_o{o}_f{f}"),
                };
                classes.push((family.clone(), class.clone()));
                triples.push((order.clone(), "_member_meronym", family.clone()));
                triples.push((family.clone(), "_hypernym", family_cat.clone()));
                derived_form(&mut triples, &mut classes, &family, &mut rng);
                for g in 0..config.genera_per_family {
                    let genus = format!("genus_d{d}_o{o}_f{f}_g{g}");
                    classes.push((genus.clone(), class.clone()));
                    triples.push((family.clone(), "_member_meronym", genus.clone()));
                    triples.push((genus.clone(), "_hypernym", genus_cat.clone()));
                    derived_form(&mut triples, &mut classes, &genus, &mut rng);
                }
            }
        }
    }
    // Noise: lexical relations between random nodes.
    let base = triples.len();
    let noise_relations = [
        "_derivationally_related_form",
        "_also_see",
        "_has_part",
        "_synset_domain_topic_of",
    ];
    for _ in 0..(base as f64 * config.noise) as usize {
        let (a, _, b) = &triples[rng.random_range(0..base)];
        let (c, _, _) = &triples[rng.random_range(0..base)];
        let rel = noise_relations[rng.random_range(0..noise_relations.len())];
        let (h, t) = if rng.random_bool(0.5) { (a, c) } else { (b, c) };
        if h != t {
            triples.push((h.clone(), rel, t.clone()));
        }
    }

    // Split: the designated triple goes to validation; other holdouts must
    // keep both entities present in train.
    let target = (
        "family_Treponemataceae".to_string(),
        "_hypernym",
        "bacteria_family".to_string(),
    );
    let mut order: Vec<usize> = (0..triples.len()).collect();
    order.shuffle(&mut rng);
    let holdout = (triples.len() as f64 * config.holdout) as usize;
    let mut degree: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    for (h, _, t) in &triples {
        *degree.entry(h).or_default() += 1;
        *degree.entry(t).or_default() += 1;
    }
    let mut split_of = vec![Split::Train; triples.len()];
    let (mut valid, mut test) = (0, 0);
    let mut seen: BTreeSet<&(String, &str, String)> = BTreeSet::new();
    for &i in &order {
        let t = &triples[i];
        if !seen.insert(t) {
            continue;
        }
        if *t == target {
            split_of[i] = Split::Valid;
            *degree.get_mut(t.0.as_str()).unwrap() -= 1;
            *degree.get_mut(t.2.as_str()).unwrap() -= 1;
            continue;
        }
        let keeps_entities = degree[t.0.as_str()] > 1 && degree[t.2.as_str()] > 1;
        if !keeps_entities {
            continue;
        }
        let slot = if valid < holdout {
            valid += 1;
            Split::Valid
        } else if test < holdout {
            test += 1;
            Split::Test
        } else {
            continue;
        };
        split_of[i] = slot;
        *degree.get_mut(t.0.as_str()).unwrap() -= 1;
        *degree.get_mut(t.2.as_str()).unwrap() -= 1;
    }
    let mut b = GraphBuilder::new();
    for ((h, r, t), split) in triples.iter().zip(split_of) {
        b.add(h, r, t, split);
    }
    let graph = b.build();
    let schema = SchemaMap::from_pairs(
        &graph,
        crate::config::DEFAULT_CLASS,
        classes.iter().map(|(e, c)| (e.as_str(), c.as_str())),
    )
    .expect("generated classes are valid");
    WordNetFixture {
        graph,
        schema,
        classes,
    }
}

/// With probability 1/2, links `node` to a new adjective form in both
/// directions (the relation is symmetric in WordNet).
fn derived_form(
    triples: &mut Vec<(String, &'static str, String)>,
    classes: &mut Vec<(String, String)>,
    node: &str,
    rng: &mut ChaCha8Rng,
) {
    if rng.random_bool(0.5) {
        let form = format!("{node}_adj");
        triples.push((
            node.to_owned(),
            "_derivationally_related_form",
            form.clone(),
        ));
        triples.push((
            form.clone(),
            "_derivationally_related_form",
            node.to_owned(),
        ));
        classes.push((form, "adj.pert".to_owned()));
    }
}
