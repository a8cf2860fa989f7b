//! Nearest training triples in triple-embedding space, and the positive /
//! negative entity pairs derived from them.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Split, Triple};
use crate::model::EmbeddingStore;

/// Default neighbourhood size. Pick it with an elbow plot over k when a
/// dataset clusters differently.
pub const DEFAULT_K: usize = 40;

const MAX_CORRUPTION_TRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborEntry {
    pub triple: Triple,
    pub embedding: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub predicted: Triple,
    pub query_embedding: Vec<f64>,
    pub k: usize,
    /// Sorted by ascending distance, ties by triple id.
    pub entries: Vec<NeighborEntry>,
}

/// Precomputed triple embeddings of a set of training triples.
#[derive(Debug, Clone)]
pub struct TripleEmbeddingIndex {
    triples: Vec<Triple>,
    width: usize,
    embeddings: Vec<f64>,
}

impl TripleEmbeddingIndex {
    /// Index over the train split of `graph`.
    pub fn build(store: &EmbeddingStore, graph: &KnowledgeGraph) -> Result<Self> {
        Self::from_triples(store, graph.train().to_vec())
    }

    pub fn from_triples(store: &EmbeddingStore, triples: Vec<Triple>) -> Result<Self> {
        let width = store.triple_embedding_len();
        let rows: Vec<Vec<f64>> = triples
            .par_iter()
            .map(|t| store.triple_embedding(t))
            .collect::<Result<_>>()?;
        Ok(Self {
            triples,
            width,
            embeddings: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.embeddings[i * self.width..(i + 1) * self.width]
    }

    /// The `k` indexed triples closest to `query` (Euclidean distance).
    pub fn nearest(&self, query: &[f64], k: usize) -> Vec<NeighborEntry> {
        let mut scored: Vec<(f64, usize)> = (0..self.len())
            .into_par_iter()
            .map(|i| (euclidean(query, self.row(i)), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| {
            a.0.total_cmp(&b.0)
                .then_with(|| self.triples[a.1].cmp(&self.triples[b.1]))
        };
        let k = k.min(scored.len());
        if k < scored.len() && k > 0 {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        scored.truncate(k);
        scored
            .into_iter()
            .map(|(distance, i)| NeighborEntry {
                triple: self.triples[i],
                embedding: self.row(i).to_vec(),
                distance,
            })
            .collect()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact k-nearest training triples of `predicted`.
pub fn knn(
    store: &EmbeddingStore,
    graph: &KnowledgeGraph,
    predicted: &Triple,
    k: usize,
) -> Result<NeighborSet> {
    if graph.train().is_empty() {
        return Err(Error::EmptyTrainSplit);
    }
    let index = TripleEmbeddingIndex::build(store, graph)?;
    knn_with_index(store, &index, predicted, k)
}

pub fn knn_with_index(
    store: &EmbeddingStore,
    index: &TripleEmbeddingIndex,
    predicted: &Triple,
    k: usize,
) -> Result<NeighborSet> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if index.is_empty() {
        return Err(Error::EmptyTrainSplit);
    }
    let query = store.triple_embedding(predicted)?;
    let entries = index.nearest(&query, k);
    Ok(NeighborSet {
        predicted: *predicted,
        query_embedding: query,
        k,
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivePair {
    pub head: EntityId,
    pub tail: EntityId,
    /// Neighbour triple the pair was taken from.
    pub source: Triple,
    pub embedding: Vec<f64>,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativePair {
    pub head: EntityId,
    pub tail: EntityId,
    /// Index into [`PairSets::positives`] of the pair this one corrupts.
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSets {
    pub relation: RelationId,
    pub positives: Vec<PositivePair>,
    pub negatives: Vec<NegativePair>,
}

/// Splits the neighbour pairs by whether they are linked by `relation` in
/// the train split, and samples one corruption per positive pair.
/// Neighbour pairs without that link are dropped.
pub fn build_pairs(
    neighbors: &NeighborSet,
    relation: RelationId,
    graph: &KnowledgeGraph,
    seed: u64,
) -> Result<PairSets> {
    let mut seen = HashSet::new();
    let positives: Vec<PositivePair> = neighbors
        .entries
        .iter()
        .filter(|e| {
            let link = Triple::new(e.triple.head, relation, e.triple.tail);
            graph.contains_in(&link, Split::Train) && seen.insert((e.triple.head, e.triple.tail))
        })
        .map(|e| PositivePair {
            head: e.triple.head,
            tail: e.triple.tail,
            source: e.triple,
            embedding: e.embedding.clone(),
            distance: e.distance,
        })
        .collect();
    if positives.is_empty() {
        return Err(Error::EmptyPositiveSet {
            relation: graph.relation_label(relation).to_owned(),
            k: neighbors.k,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = graph.num_entities() as u32;
    let mut negatives = Vec::with_capacity(positives.len());
    for (i, p) in positives.iter().enumerate() {
        let mut found = None;
        for _ in 0..MAX_CORRUPTION_TRIES {
            let e = EntityId(rng.random_range(0..n));
            let (h, t) = if rng.random_bool(0.5) {
                (e, p.tail)
            } else {
                (p.head, e)
            };
            if !graph.contains(&Triple::new(h, relation, t)) {
                found = Some((h, t));
                break;
            }
        }
        let (head, tail) = found.ok_or_else(|| {
            Error::CorruptionExhausted(
                graph
                    .display(&Triple::new(p.head, relation, p.tail))
                    .to_string(),
            )
        })?;
        negatives.push(NegativePair {
            head,
            tail,
            source: i,
        });
    }
    Ok(PairSets {
        relation,
        positives,
        negatives,
    })
}

/// The positive pair whose source triple lies closest to the predicted
/// triple; ties go to the smaller source triple id.
pub fn nearest_positive_pair(pairs: &PairSets) -> Result<(EntityId, EntityId)> {
    pairs
        .positives
        .iter()
        .min_by(|a, b| match a.distance.total_cmp(&b.distance) {
            Ordering::Equal => a.source.cmp(&b.source),
            o => o,
        })
        .map(|p| (p.head, p.tail))
        .ok_or(Error::EmptyPositiveSet {
            relation: format!("#{}", pairs.relation.0),
            k: 0,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::model::ModelKind;
    use proptest::prelude::*;

    /// Graph with one relation `r` and entities e0..e3; TransE store whose
    /// triple embeddings are controlled through 1-d vectors.
    fn line_graph() -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        b.add("e0", "r", "e1", Split::Train);
        b.add("e2", "r", "e3", Split::Train);
        b.add("e0", "r", "e3", Split::Valid);
        b.build()
    }

    #[test]
    fn nearest_of_two_points() {
        // Index rows v1 = (0, 0), v2 = (3, 4); query (0, 1).
        let index = TripleEmbeddingIndex {
            triples: vec![
                Triple::new(EntityId(0), RelationId(0), EntityId(1)),
                Triple::new(EntityId(2), RelationId(0), EntityId(3)),
            ],
            width: 2,
            embeddings: vec![0.0, 0.0, 3.0, 4.0],
        };
        let got = index.nearest(&[0.0, 1.0], 1);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].triple.head, EntityId(0));
        assert_eq!(got[0].distance, 1.0);

        let got = index.nearest(&[3.0, 4.0], 1);
        assert_eq!(got[0].distance, 0.0);
        assert_eq!(got[0].triple.head, EntityId(2));
    }

    #[test]
    fn positives_require_the_relation() {
        let g = line_graph();
        let store = EmbeddingStore::new(
            ModelKind::DistMult,
            1,
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0],
            None,
        )
        .unwrap();
        let predicted = g.triple("e0", "r", "e3").unwrap();
        let ns = knn(&store, &g, &predicted, 2).unwrap();
        let pairs = build_pairs(&ns, predicted.relation, &g, 7).unwrap();
        assert_eq!(pairs.positives.len(), 2);
        assert_eq!(pairs.negatives.len(), 2);
        for n in &pairs.negatives {
            let src = &pairs.positives[n.source];
            assert!(!g.contains(&Triple::new(n.head, predicted.relation, n.tail)));
            assert!((n.head == src.head) ^ (n.tail == src.tail));
        }
        let again = build_pairs(&ns, predicted.relation, &g, 7).unwrap();
        assert_eq!(pairs, again);
    }

    #[test]
    fn empty_positive_set_is_typed() {
        let mut b = GraphBuilder::new();
        b.add("a", "r", "b", Split::Train);
        b.add("a", "s", "c", Split::Valid);
        let g = b.build();
        let store = EmbeddingStore::new(
            ModelKind::DistMult,
            1,
            vec![1.0, 2.0, 3.0],
            vec![1.0, 1.0],
            None,
        )
        .unwrap();
        let predicted = g.triple("a", "s", "c").unwrap();
        let ns = knn(&store, &g, &predicted, 5).unwrap();
        assert!(matches!(
            build_pairs(&ns, predicted.relation, &g, 0),
            Err(Error::EmptyPositiveSet { .. })
        ));
    }

    #[test]
    fn nearest_positive_tie_breaks_on_triple_id() {
        let mk = |h: u32, t: u32, d: f64| PositivePair {
            head: EntityId(h),
            tail: EntityId(t),
            source: Triple::new(EntityId(h), RelationId(0), EntityId(t)),
            embedding: vec![],
            distance: d,
        };
        let pairs = PairSets {
            relation: RelationId(0),
            positives: vec![mk(5, 1, 0.5), mk(2, 9, 0.5), mk(0, 0, 0.7)],
            negatives: vec![],
        };
        assert_eq!(
            nearest_positive_pair(&pairs).unwrap(),
            (EntityId(2), EntityId(9))
        );
        let single = PairSets {
            relation: RelationId(0),
            positives: vec![mk(3, 4, 2.0)],
            negatives: vec![],
        };
        assert_eq!(
            nearest_positive_pair(&single).unwrap(),
            (EntityId(3), EntityId(4))
        );
    }

    proptest! {
        #[test]
        fn knn_sorted_bounded_and_matches_full_sort(
            rows in prop::collection::vec(prop::collection::vec(-5i32..5, 3), 1..40),
            query in prop::collection::vec(-5i32..5, 3),
            k in 1usize..50,
            rot in 0usize..40,
        ) {
            let triples: Vec<Triple> = (0..rows.len() as u32)
                .map(|i| Triple::new(EntityId(i), RelationId(0), EntityId(i)))
                .collect();
            let emb: Vec<f64> = rows.iter().flatten().map(|&v| v as f64).collect();
            let index = TripleEmbeddingIndex { triples: triples.clone(), width: 3, embeddings: emb.clone() };
            let q: Vec<f64> = query.iter().map(|&v| v as f64).collect();
            let got = index.nearest(&q, k);
            prop_assert_eq!(got.len(), k.min(rows.len()));
            prop_assert!(got.windows(2).all(|w| w[0].distance <= w[1].distance));

            // Full-sort oracle.
            let mut all: Vec<(f64, Triple)> = rows.iter().zip(&triples).map(|(r, t)| {
                let d: f64 = r.iter().zip(&q).map(|(a, b)| (*a as f64 - b).powi(2)).sum::<f64>().sqrt();
                (d, *t)
            }).collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let expected: Vec<Triple> = all.iter().take(k).map(|x| x.1).collect();
            let got_triples: Vec<Triple> = got.iter().map(|e| e.triple).collect();
            prop_assert_eq!(&got_triples, &expected);

            // Permuting the index order does not change the answer.
            let n = rows.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let index2 = TripleEmbeddingIndex {
                triples: perm.iter().map(|&i| triples[i]).collect(),
                width: 3,
                embeddings: perm.iter().flat_map(|&i| emb[i * 3..i * 3 + 3].to_vec()).collect(),
            };
            let got2: Vec<Triple> = index2.nearest(&q, k).iter().map(|e| e.triple).collect();
            prop_assert_eq!(got2, expected);
        }
    }
}
