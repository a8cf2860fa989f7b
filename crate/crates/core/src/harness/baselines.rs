//! Random-path baselines for the removal protocol.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{EntityId, KnowledgeGraph, Triple};
use crate::seed::triple_seed;

const MAX_TRIES: usize = 100;

/// Extends a walk from `start` by `length` random train edges in either
/// direction, never reusing an edge and never passing through `blocked`.
fn random_walk(
    graph: &KnowledgeGraph,
    start: EntityId,
    length: usize,
    blocked: &[EntityId],
    mut path: Vec<Triple>,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Triple>> {
    let mut at = start;
    for step in 0..length {
        let options: Vec<_> = graph
            .train_neighbors(at)
            .iter()
            .filter(|n| !path.contains(&n.triple_from(at)))
            // Only the final node may be a blocked entity.
            .filter(|n| step + 1 == length || !blocked.contains(&n.neighbor))
            .collect();
        let n = options.choose(rng)?;
        path.push(n.triple_from(at));
        at = n.neighbor;
    }
    Some(path)
}

/// A random connected path of `length` train triples anywhere in the graph.
pub fn baseline_global_random(
    graph: &KnowledgeGraph,
    predicted: &Triple,
    length: usize,
    seed: u64,
) -> BTreeSet<Triple> {
    let train = graph.train();
    if train.is_empty() || length == 0 {
        return BTreeSet::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(triple_seed(seed, 0x676c_6f62, predicted));
    for _ in 0..MAX_TRIES {
        let first = train[rng.random_range(0..train.len())];
        let end = if rng.random_bool(0.5) {
            first.head
        } else {
            first.tail
        };
        if let Some(path) = random_walk(graph, end, length - 1, &[], vec![first], &mut rng) {
            return path.into_iter().collect();
        }
    }
    log::warn!("no random path of length {length} found");
    BTreeSet::new()
}

/// A random path of `length` train triples starting at the predicted head
/// or tail (equivalently, ending there when read backwards).
pub fn baseline_local_random(
    graph: &KnowledgeGraph,
    predicted: &Triple,
    length: usize,
    seed: u64,
) -> BTreeSet<Triple> {
    if length == 0 {
        return BTreeSet::new();
    }
    let anchors: Vec<EntityId> = [predicted.head, predicted.tail]
        .into_iter()
        .filter(|&e| graph.train_degree(e) > 0)
        .collect();
    if anchors.is_empty() {
        log::warn!(
            "both anchors of ({}) are isolated; local random baseline is empty",
            graph.display(predicted)
        );
        return BTreeSet::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(triple_seed(seed, 0x6c6f_6361, predicted));
    let blocked = [predicted.head, predicted.tail];
    for _ in 0..MAX_TRIES {
        let start = *anchors.choose(&mut rng).expect("nonempty");
        if let Some(path) = random_walk(graph, start, length, &blocked, Vec::new(), &mut rng) {
            return path.into_iter().collect();
        }
    }
    log::warn!("no anchored random path of length {length} found");
    BTreeSet::new()
}

/// Every train triple touching the predicted head or tail. Not a method from
/// the literature; it bounds how much any local explanation can remove.
pub fn incident_edges(graph: &KnowledgeGraph, predicted: &Triple) -> BTreeSet<Triple> {
    [predicted.head, predicted.tail]
        .iter()
        .flat_map(|&e| {
            graph
                .train_neighbors(e)
                .iter()
                .map(move |n| n.triple_from(e))
        })
        .collect()
}
