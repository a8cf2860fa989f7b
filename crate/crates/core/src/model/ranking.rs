//! Filtered link-prediction ranking.
//!
//! Every evaluation triple is ranked twice: once against all tail
//! replacements and once against all head replacements. Candidates that form
//! a known-true triple according to the filter index are skipped. Ties are
//! counted against the true triple: `rank = 1 + #greater + #equal`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::graph::{EntityId, KnowledgeGraph, RelationId, Triple};

use super::EmbeddingStore;

/// Known-true triples used to filter ranking candidates.
#[derive(Debug, Clone)]
pub struct FilterIndex {
    tails: HashMap<(EntityId, RelationId), Vec<EntityId>>,
    heads: HashMap<(RelationId, EntityId), Vec<EntityId>>,
    fingerprint: String,
}

impl FilterIndex {
    /// Index over every split of `graph`.
    pub fn from_graph(graph: &KnowledgeGraph) -> Self {
        Self::from_triples(
            graph
                .train()
                .iter()
                .chain(graph.valid())
                .chain(graph.test())
                .copied(),
        )
    }

    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut all: Vec<Triple> = triples.into_iter().collect();
        all.sort_unstable();
        all.dedup();
        let mut tails: HashMap<_, Vec<EntityId>> = HashMap::new();
        let mut heads: HashMap<_, Vec<EntityId>> = HashMap::new();
        let mut hasher = Sha256::new();
        for t in &all {
            tails.entry((t.head, t.relation)).or_default().push(t.tail);
            heads.entry((t.relation, t.tail)).or_default().push(t.head);
            hasher.update(t.head.0.to_le_bytes());
            hasher.update(t.relation.0.to_le_bytes());
            hasher.update(t.tail.0.to_le_bytes());
        }
        let fingerprint = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Self {
            tails,
            heads,
            fingerprint,
        }
    }

    /// SHA-256 over the sorted triple list; equal fingerprints mean equal filters.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn known_tails(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.tails
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn known_heads(&self, relation: RelationId, tail: EntityId) -> &[EntityId] {
        self.heads
            .get(&(relation, tail))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRanks {
    pub head: usize,
    pub tail: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankMetrics {
    pub mrr: f64,
    #[serde(rename = "hits1")]
    pub hits_at_1: f64,
    /// Head-side and tail-side rank of every evaluation triple, interleaved.
    pub ranks: Vec<usize>,
}

impl RankMetrics {
    pub fn from_ranks(ranks: Vec<usize>) -> Self {
        let n = ranks.len().max(1) as f64;
        let mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n;
        let hits = ranks.iter().filter(|&&r| r == 1).count() as f64 / n;
        Self {
            mrr: if ranks.is_empty() { 0.0 } else { mrr },
            hits_at_1: if ranks.is_empty() { 0.0 } else { hits },
            ranks,
        }
    }

    pub fn per_triple(&self) -> Vec<TripleRanks> {
        self.ranks
            .chunks(2)
            .map(|c| TripleRanks {
                head: c[0],
                tail: c[1],
            })
            .collect()
    }
}

/// Pessimistic filtered rank of `scores[target]`.
pub fn rank_query(scores: &[f64], target: usize, filtered: &[EntityId]) -> usize {
    let s = scores[target];
    let mut skip = vec![false; scores.len()];
    for e in filtered {
        if let Some(x) = skip.get_mut(e.index()) {
            *x = true;
        }
    }
    skip[target] = true;
    1 + scores
        .iter()
        .zip(&skip)
        .filter(|(&c, &skipped)| !skipped && c >= s)
        .count()
}

pub(crate) fn triple_ranks(
    store: &EmbeddingStore,
    triple: &Triple,
    filter: &FilterIndex,
) -> Result<TripleRanks> {
    let tails = store.score_tails(triple.head, triple.relation)?;
    let tail = rank_query(
        &tails,
        triple.tail.index(),
        filter.known_tails(triple.head, triple.relation),
    );
    let heads = store.score_heads(triple.relation, triple.tail)?;
    let head = rank_query(
        &heads,
        triple.head.index(),
        filter.known_heads(triple.relation, triple.tail),
    );
    Ok(TripleRanks { head, tail })
}

/// Filtered MRR and Hits@1 over both corruption sides of `eval`.
pub fn evaluate_ranking(
    store: &EmbeddingStore,
    eval: &[Triple],
    filter: &FilterIndex,
) -> Result<RankMetrics> {
    let per: Vec<TripleRanks> = eval
        .par_iter()
        .map(|t| triple_ranks(store, t, filter))
        .collect::<Result<_>>()?;
    Ok(RankMetrics::from_ranks(
        per.iter().flat_map(|r| [r.head, r.tail]).collect(),
    ))
}
