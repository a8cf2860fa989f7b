//! Walk enumeration around an entity pair and abstraction of walks into
//! conjunctive clauses.
//!
//! A walk starts at one of the two anchors, follows train edges in either
//! direction, never repeats an edge and never passes *through* an anchor
//! (it may end on one). Walks that end on an anchor are the same clause when
//! read backwards, so such clauses are stored in a canonical orientation:
//! starting at `Head` when possible, otherwise whichever orientation has the
//! smaller key.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{
    ClassId, Direction, EntityId, KnowledgeGraph, Neighbor, RelationId, SchemaMap, Triple,
    HEAD_ROLE, TAIL_ROLE,
};
use crate::neighbors::PairSets;

pub const DEFAULT_WALK_BUDGET: usize = 100_000;

/// A node position inside a clause.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Head,
    Tail,
    Class(ClassId),
    Const(EntityId),
}

impl Term {
    pub fn is_anchor(self) -> bool {
        matches!(self, Term::Head | Term::Tail)
    }

    fn key(self, out: &mut String) {
        match self {
            Term::Head => out.push('H'),
            Term::Tail => out.push('T'),
            Term::Class(c) => write!(out, "C{}", c.0).unwrap(),
            Term::Const(e) => write!(out, "E{}", e.0).unwrap(),
        }
    }

    pub fn label<'a>(self, graph: &'a KnowledgeGraph, schema: &'a SchemaMap) -> &'a str {
        match self {
            Term::Head => HEAD_ROLE,
            Term::Tail => TAIL_ROLE,
            Term::Class(c) => schema.class_label(c),
            Term::Const(e) => graph.entity_label(e),
        }
    }
}

/// One hop of a clause: the relation, whether the edge was traversed from
/// its head to its tail, and the term of the node reached.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub relation: RelationId,
    pub forward: bool,
    pub node: Term,
}

/// A relation literal `relation(subject, object)` in original edge orientation.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub relation: RelationId,
    pub subject: Term,
    pub object: Term,
    /// True when the walk traversed the edge from subject to object.
    pub forward: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Clause {
    pub start: Term,
    pub steps: Vec<Step>,
}

impl Clause {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Terms of every node position, start included.
    pub fn nodes(&self) -> Vec<Term> {
        std::iter::once(self.start)
            .chain(self.steps.iter().map(|s| s.node))
            .collect()
    }

    pub fn literals(&self) -> Vec<Literal> {
        let mut prev = self.start;
        self.steps
            .iter()
            .map(|s| {
                let (subject, object) = if s.forward {
                    (prev, s.node)
                } else {
                    (s.node, prev)
                };
                prev = s.node;
                Literal {
                    relation: s.relation,
                    subject,
                    object,
                    forward: s.forward,
                }
            })
            .collect()
    }

    pub fn has_constant(&self) -> bool {
        self.steps.iter().any(|s| matches!(s.node, Term::Const(_)))
    }

    /// The same clause read from its last node back to its start.
    pub fn reversed(&self) -> Clause {
        let nodes = self.nodes();
        let m = self.steps.len();
        Clause {
            start: nodes[m],
            steps: (0..m)
                .map(|j| {
                    let s = self.steps[m - 1 - j];
                    Step {
                        relation: s.relation,
                        forward: !s.forward,
                        node: nodes[m - 1 - j],
                    }
                })
                .collect(),
        }
    }

    /// Orientation used for keys: walks between anchors read from `Head`
    /// where possible, else from whichever end gives the smaller key.
    pub fn canonical(self) -> Clause {
        let end = self.steps.last().map(|s| s.node);
        match end {
            Some(end) if end.is_anchor() => {
                let rev = self.reversed();
                match (self.start, rev.start) {
                    (Term::Head, Term::Tail) => self,
                    (Term::Tail, Term::Head) => rev,
                    _ => {
                        if rev.key() < self.key() {
                            rev
                        } else {
                            self
                        }
                    }
                }
            }
            _ => self,
        }
    }

    /// Injective string form: start term, then `relation` `>`/`<` node per step.
    pub fn key(&self) -> String {
        let mut out = String::new();
        self.start.key(&mut out);
        for s in &self.steps {
            write!(
                out,
                "|{}{}",
                s.relation.0,
                if s.forward { '>' } else { '<' }
            )
            .unwrap();
            s.node.key(&mut out);
        }
        out
    }

    pub fn display<'a>(
        &'a self,
        graph: &'a KnowledgeGraph,
        schema: &'a SchemaMap,
    ) -> ClauseDisplay<'a> {
        ClauseDisplay {
            clause: self,
            graph,
            schema,
        }
    }
}

pub struct ClauseDisplay<'a> {
    clause: &'a Clause,
    graph: &'a KnowledgeGraph,
    schema: &'a SchemaMap,
}

impl fmt::Display for ClauseDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, lit) in self.clause.literals().iter().enumerate() {
            if i > 0 {
                f.write_str(" ∧ ")?;
            }
            write!(
                f,
                "{}({},{})",
                self.graph.relation_label(lit.relation),
                lit.subject.label(self.graph, self.schema),
                lit.object.label(self.graph, self.schema)
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Walk {
    pub start: EntityId,
    pub steps: Vec<Neighbor>,
}

impl Walk {
    pub fn nodes(&self) -> Vec<EntityId> {
        std::iter::once(self.start)
            .chain(self.steps.iter().map(|s| s.neighbor))
            .collect()
    }

    pub fn triples(&self) -> Vec<Triple> {
        let mut at = self.start;
        self.steps
            .iter()
            .map(|s| {
                let t = s.triple_from(at);
                at = s.neighbor;
                t
            })
            .collect()
    }
}

/// Calls `visit` for every walk of length `1..=max_len` that starts at
/// `head` or `tail`, skipping edges listed in `excluded`. Stops early once
/// `budget` walks were produced; returns whether it stopped early.
pub fn for_each_walk(
    graph: &KnowledgeGraph,
    head: EntityId,
    tail: EntityId,
    max_len: usize,
    excluded: &[Triple],
    budget: usize,
    mut visit: impl FnMut(&Walk),
) -> bool {
    let mut count = 0usize;
    let starts: &[EntityId] = if head == tail { &[head] } else { &[head, tail] };
    for &start in starts {
        let mut walk = Walk {
            start,
            steps: Vec::with_capacity(max_len),
        };
        let mut used = Vec::with_capacity(max_len);
        if extend(
            graph, head, tail, max_len, excluded, budget, &mut count, &mut walk, &mut used,
            &mut visit,
        ) {
            return true;
        }
    }
    false
}

#[allow(clippy::too_many_arguments)]
fn extend(
    graph: &KnowledgeGraph,
    head: EntityId,
    tail: EntityId,
    max_len: usize,
    excluded: &[Triple],
    budget: usize,
    count: &mut usize,
    walk: &mut Walk,
    used: &mut Vec<Triple>,
    visit: &mut impl FnMut(&Walk),
) -> bool {
    let at = walk.steps.last().map_or(walk.start, |s| s.neighbor);
    for n in graph.train_neighbors(at) {
        let edge = n.triple_from(at);
        if excluded.contains(&edge) || used.contains(&edge) {
            continue;
        }
        if *count >= budget {
            return true;
        }
        walk.steps.push(*n);
        used.push(edge);
        *count += 1;
        debug_assert!(walk.nodes()[1..walk.steps.len()]
            .iter()
            .all(|&v| v != head && v != tail));
        visit(walk);
        let ends_here = n.neighbor == head || n.neighbor == tail;
        if !ends_here && walk.steps.len() < max_len {
            let stop = extend(
                graph, head, tail, max_len, excluded, budget, count, walk, used, visit,
            );
            if stop {
                return true;
            }
        }
        walk.steps.pop();
        used.pop();
    }
    false
}

pub fn enumerate_walks(
    graph: &KnowledgeGraph,
    head: EntityId,
    tail: EntityId,
    max_len: usize,
) -> Vec<Walk> {
    let mut out = Vec::new();
    for_each_walk(graph, head, tail, max_len, &[], usize::MAX, |w| {
        out.push(w.clone())
    });
    out
}

fn term_of(node: EntityId, head: EntityId, tail: EntityId, schema: &SchemaMap) -> Term {
    if node == head {
        Term::Head
    } else if node == tail {
        Term::Tail
    } else {
        Term::Class(schema.class_of(node))
    }
}

/// The abstract clause of `walk` and, for single-edge walks that reach a
/// non-anchor entity, the partially abstracted clause keeping that entity.
pub fn abstract_walk(
    walk: &Walk,
    head: EntityId,
    tail: EntityId,
    schema: &SchemaMap,
) -> (Clause, Option<Clause>) {
    let start = term_of(walk.start, head, tail, schema);
    let steps: Vec<Step> = walk
        .steps
        .iter()
        .map(|n| Step {
            relation: n.relation,
            forward: n.direction == Direction::Outgoing,
            node: term_of(n.neighbor, head, tail, schema),
        })
        .collect();
    let partial = match (walk.steps.as_slice(), steps.as_slice()) {
        ([n], [s]) if !s.node.is_anchor() => Some(Clause {
            start,
            steps: vec![Step {
                node: Term::Const(n.neighbor),
                ..*s
            }],
        }),
        _ => None,
    };
    (Clause { start, steps }.canonical(), partial)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Positive,
    Negative,
}

impl PairLabel {
    pub fn sign(self) -> f64 {
        match self {
            PairLabel::Positive => 1.0,
            PairLabel::Negative => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClauseRow {
    pub head: EntityId,
    pub tail: EntityId,
    pub label: PairLabel,
    /// Index of the positive pair this row stems from (itself for positives).
    pub origin: usize,
    /// Instance weight; 1 until a surrogate assigns kernel weights.
    pub weight: f64,
    /// `(clause index, frequency)`, sorted by clause index.
    pub frequencies: Vec<(usize, f64)>,
    pub walks: usize,
    pub truncated: bool,
}

impl ClauseRow {
    pub fn frequency(&self, clause: usize) -> f64 {
        self.frequencies
            .binary_search_by_key(&clause, |&(c, _)| c)
            .map_or(0.0, |i| self.frequencies[i].1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClauseTable {
    pub relation: RelationId,
    pub max_len: usize,
    /// Clause vocabulary sorted by key; rows refer to it by index.
    pub clauses: Vec<Clause>,
    pub keys: Vec<String>,
    /// Positive rows in pair order, then negative rows.
    pub rows: Vec<ClauseRow>,
}

impl ClauseTable {
    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Dense row-major `rows x clauses` frequency matrix.
    pub fn dense(&self) -> Vec<f64> {
        let d = self.num_clauses();
        let mut out = vec![0.0; self.rows.len() * d];
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, f) in &row.frequencies {
                out[i * d + c] = f;
            }
        }
        out
    }

    pub fn labels(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.label.sign()).collect()
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.keys.binary_search_by(|k| k.as_str().cmp(key)).ok()
    }

    /// Inspection-friendly JSON with clause keys and rendered clauses.
    pub fn to_json(&self, graph: &KnowledgeGraph, schema: &SchemaMap) -> serde_json::Value {
        let clauses: Vec<_> = self
            .clauses
            .iter()
            .zip(&self.keys)
            .map(|(c, k)| serde_json::json!({"key": k, "clause": c.display(graph, schema).to_string()}))
            .collect();
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                let freqs: BTreeMap<&str, f64> = r
                    .frequencies
                    .iter()
                    .map(|&(c, f)| (self.keys[c].as_str(), f))
                    .collect();
                serde_json::json!({
                    "pair": [graph.entity_label(r.head), graph.entity_label(r.tail)],
                    "label": r.label,
                    "weight": r.weight,
                    "walks": r.walks,
                    "truncated": r.truncated,
                    "frequencies": freqs,
                })
            })
            .collect();
        serde_json::json!({
            "relation": graph.relation_label(self.relation),
            "max_walk_len": self.max_len,
            "clauses": clauses,
            "rows": rows,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MineConfig {
    pub max_len: usize,
    pub walk_budget: usize,
    /// Skip the pair's own `relation` edge while walking; otherwise every
    /// positive pair trivially yields `relation(Head,Tail)`.
    pub exclude_target_edge: bool,
}

impl MineConfig {
    pub fn new(max_len: usize) -> Self {
        Self {
            max_len,
            walk_budget: DEFAULT_WALK_BUDGET,
            exclude_target_edge: true,
        }
    }
}

/// Clause multiset of one pair as counts, plus walk count and truncation flag.
pub fn pair_clause_counts(
    graph: &KnowledgeGraph,
    schema: &SchemaMap,
    head: EntityId,
    tail: EntityId,
    relation: RelationId,
    config: &MineConfig,
) -> (HashMap<Clause, usize>, usize, bool) {
    let excluded = if config.exclude_target_edge {
        vec![Triple::new(head, relation, tail)]
    } else {
        vec![]
    };
    let mut counts: HashMap<Clause, usize> = HashMap::new();
    let mut walks = 0;
    let truncated = for_each_walk(
        graph,
        head,
        tail,
        config.max_len,
        &excluded,
        config.walk_budget,
        |w| {
            walks += 1;
            let (c, partial) = abstract_walk(w, head, tail, schema);
            *counts.entry(c).or_default() += 1;
            if let Some(p) = partial {
                *counts.entry(p).or_default() += 1;
            }
        },
    );
    if truncated {
        log::warn!(
            "walk budget of {} exhausted for pair ({}, {})",
            config.walk_budget,
            graph.entity_label(head),
            graph.entity_label(tail)
        );
    }
    (counts, walks, truncated)
}

/// Mines the clause table of every positive and negative pair.
pub fn mine(
    pairs: &PairSets,
    graph: &KnowledgeGraph,
    schema: &SchemaMap,
    config: &MineConfig,
) -> ClauseTable {
    let specs: Vec<(EntityId, EntityId, PairLabel, usize)> = pairs
        .positives
        .iter()
        .enumerate()
        .map(|(i, p)| (p.head, p.tail, PairLabel::Positive, i))
        .chain(
            pairs
                .negatives
                .iter()
                .map(|n| (n.head, n.tail, PairLabel::Negative, n.source)),
        )
        .collect();
    let mined: Vec<_> = specs
        .par_iter()
        .map(|&(h, t, _, _)| pair_clause_counts(graph, schema, h, t, pairs.relation, config))
        .collect();

    let mut vocab: BTreeMap<String, Clause> = BTreeMap::new();
    for (counts, _, _) in &mined {
        for c in counts.keys() {
            vocab.entry(c.key()).or_insert_with(|| c.clone());
        }
    }
    let keys: Vec<String> = vocab.keys().cloned().collect();
    let index: HashMap<&Clause, usize> = vocab.values().enumerate().map(|(i, c)| (c, i)).collect();

    let rows = specs
        .iter()
        .zip(&mined)
        .map(
            |(&(head, tail, label, origin), (counts, walks, truncated))| {
                let total: usize = counts.values().sum();
                let mut frequencies: Vec<(usize, f64)> = counts
                    .iter()
                    .map(|(c, &n)| (index[c], n as f64 / total as f64))
                    .collect();
                frequencies.sort_unstable_by_key(|&(c, _)| c);
                ClauseRow {
                    head,
                    tail,
                    label,
                    origin,
                    weight: 1.0,
                    frequencies,
                    walks: *walks,
                    truncated: *truncated,
                }
            },
        )
        .collect();
    ClauseTable {
        relation: pairs.relation,
        max_len: config.max_len,
        clauses: vocab.into_values().collect(),
        keys,
        rows,
    }
}

/// Entity bindings of `clause` at the anchor pair, as sets of train triples.
///
/// Class positions bind to non-anchor entities of that class, constants and
/// anchors to themselves. A grounding never reuses a triple and never uses
/// `excluded` (normally the triple being explained). At most `limit` sets are
/// returned, in lexicographic order of the bound entity ids.
pub fn ground_clause(
    clause: &Clause,
    head: EntityId,
    tail: EntityId,
    graph: &KnowledgeGraph,
    schema: &SchemaMap,
    limit: usize,
    excluded: Option<Triple>,
) -> Vec<Vec<Triple>> {
    let start = match clause.start {
        Term::Head => head,
        Term::Tail => tail,
        // Mined clauses always start on an anchor.
        _ => return Vec::new(),
    };
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(clause.len());
    ground_from(
        clause,
        0,
        start,
        head,
        tail,
        graph,
        schema,
        limit,
        excluded,
        &mut current,
        &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn ground_from(
    clause: &Clause,
    depth: usize,
    at: EntityId,
    head: EntityId,
    tail: EntityId,
    graph: &KnowledgeGraph,
    schema: &SchemaMap,
    limit: usize,
    excluded: Option<Triple>,
    current: &mut Vec<Triple>,
    out: &mut Vec<Vec<Triple>>,
) {
    if depth == clause.len() {
        out.push(current.clone());
        return;
    }
    let step = clause.steps[depth];
    let want = if step.forward {
        Direction::Outgoing
    } else {
        Direction::Incoming
    };
    let adj = graph.train_neighbors(at);
    // Adjacency is sorted by relation first, so the matches are contiguous.
    let lo = adj.partition_point(|n| n.relation < step.relation);
    for n in adj[lo..].iter().take_while(|n| n.relation == step.relation) {
        if out.len() >= limit {
            return;
        }
        if n.direction != want {
            continue;
        }
        let ok = match step.node {
            Term::Head => n.neighbor == head,
            Term::Tail => n.neighbor == tail,
            Term::Const(e) => n.neighbor == e,
            Term::Class(c) => {
                n.neighbor != head && n.neighbor != tail && schema.class_of(n.neighbor) == c
            }
        };
        let triple = n.triple_from(at);
        if !ok || Some(triple) == excluded || current.contains(&triple) {
            continue;
        }
        current.push(triple);
        ground_from(
            clause,
            depth + 1,
            n.neighbor,
            head,
            tail,
            graph,
            schema,
            limit,
            excluded,
            current,
            out,
        );
        current.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphBuilder, Split};
    use proptest::prelude::*;

    fn people() -> (KnowledgeGraph, SchemaMap) {
        let mut b = GraphBuilder::new();
        b.add("Alice", "knows", "Tom", Split::Train);
        b.add("Tom", "works_with", "Bob", Split::Train);
        b.add("Alice", "knows", "Bob", Split::Valid);
        let g = b.build();
        let s = SchemaMap::uniform(&g, "Person").unwrap();
        (g, s)
    }

    fn e(g: &KnowledgeGraph, l: &str) -> EntityId {
        g.entity_id(l).unwrap()
    }

    #[test]
    fn two_hop_walk_abstracts_to_chain() {
        let (g, s) = people();
        let (alice, bob) = (e(&g, "Alice"), e(&g, "Bob"));
        let walks = enumerate_walks(&g, alice, bob, 2);
        let long: Vec<_> = walks.iter().filter(|w| w.steps.len() == 2).collect();
        // Once from Alice, once from Bob.
        assert_eq!(long.len(), 2);
        for w in long {
            let (c, partial) = abstract_walk(w, alice, bob, &s);
            assert!(partial.is_none());
            assert_eq!(
                c.display(&g, &s).to_string(),
                "knows(Head,Person) ∧ works_with(Person,Tail)"
            );
        }
    }

    #[test]
    fn single_edge_walk_emits_partial_clause() {
        let (g, s) = people();
        let (alice, bob) = (e(&g, "Alice"), e(&g, "Bob"));
        let w = enumerate_walks(&g, alice, bob, 1)
            .into_iter()
            .find(|w| w.start == alice)
            .unwrap();
        let (c, partial) = abstract_walk(&w, alice, bob, &s);
        assert_eq!(c.display(&g, &s).to_string(), "knows(Head,Person)");
        assert_eq!(
            partial.unwrap().display(&g, &s).to_string(),
            "knows(Head,Tom)"
        );
    }

    #[test]
    fn isolated_anchors_have_no_walks() {
        let mut b = GraphBuilder::new();
        b.add("a", "r", "b", Split::Train);
        b.add("x", "r", "y", Split::Test);
        let g = b.build();
        assert!(enumerate_walks(&g, e(&g, "x"), e(&g, "y"), 3).is_empty());
    }

    #[test]
    fn single_clause_neighbourhood_has_frequency_one() {
        let mut b = GraphBuilder::new();
        b.add("a", "r", "m1", Split::Train);
        b.add("a", "r", "m2", Split::Train);
        b.add("b", "r", "a", Split::Train);
        let g = b.build();
        let s = SchemaMap::uniform(&g, "Thing").unwrap();
        let pairs = PairSets {
            relation: g.relation_id("r").unwrap(),
            positives: vec![crate::neighbors::PositivePair {
                head: e(&g, "b"),
                tail: e(&g, "a"),
                source: Triple::new(e(&g, "b"), g.relation_id("r").unwrap(), e(&g, "a")),
                embedding: vec![],
                distance: 0.0,
            }],
            negatives: vec![],
        };
        // With the pair's own edge excluded, the only walks are a->m1, a->m2.
        let mut cfg = MineConfig::new(1);
        let t = mine(&pairs, &g, &s, &cfg);
        let abstract_idx = t.index_of("T|0>C0").unwrap();
        // Two abstract occurrences plus two different partial clauses.
        assert_eq!(t.rows[0].walks, 2);
        assert_eq!(t.rows[0].frequency(abstract_idx), 0.5);
        cfg.exclude_target_edge = false;
        let t = mine(&pairs, &g, &s, &cfg);
        assert_eq!(t.rows[0].walks, 4);
    }

    #[test]
    fn reversed_walks_share_a_key() {
        let (g, s) = people();
        let (alice, bob) = (e(&g, "Alice"), e(&g, "Bob"));
        let keys: Vec<String> = enumerate_walks(&g, alice, bob, 2)
            .iter()
            .filter(|w| w.steps.len() == 2)
            .map(|w| abstract_walk(w, alice, bob, &s).0.key())
            .collect();
        assert_eq!(keys[0], keys[1]);
        assert!(keys[0].starts_with('H'));
    }

    #[test]
    fn grounding_follows_the_clause() {
        let (g, s) = people();
        let (alice, bob) = (e(&g, "Alice"), e(&g, "Bob"));
        let w = enumerate_walks(&g, alice, bob, 2)
            .into_iter()
            .find(|w| w.steps.len() == 2)
            .unwrap();
        let (c, _) = abstract_walk(&w, alice, bob, &s);
        let groundings = ground_clause(&c, alice, bob, &g, &s, 10, None);
        assert_eq!(
            groundings,
            vec![vec![
                g.triple("Alice", "knows", "Tom").unwrap(),
                g.triple("Tom", "works_with", "Bob").unwrap()
            ]]
        );
        // The same clause grounds nowhere for an unrelated pair.
        assert!(ground_clause(&c, bob, alice, &g, &s, 10, None).is_empty());
    }

    #[test]
    fn grounding_skips_the_excluded_triple() {
        let (g, s) = people();
        let (alice, tom) = (e(&g, "Alice"), e(&g, "Tom"));
        let c = Clause {
            start: Term::Head,
            steps: vec![Step {
                relation: g.relation_id("knows").unwrap(),
                forward: true,
                node: Term::Tail,
            }],
        };
        let knows = g.triple("Alice", "knows", "Tom").unwrap();
        assert_eq!(ground_clause(&c, alice, tom, &g, &s, 10, None).len(), 1);
        assert!(ground_clause(&c, alice, tom, &g, &s, 10, Some(knows)).is_empty());
    }

    /// Brute-force walk oracle: every edge sequence from every node, filtered
    /// by the walk definition.
    fn brute_walks(
        edges: &[Triple],
        n: u32,
        head: EntityId,
        tail: EntityId,
        x: usize,
    ) -> Vec<(EntityId, Vec<(Triple, bool)>)> {
        fn rec(
            edges: &[Triple],
            at: EntityId,
            x: usize,
            cur: &mut Vec<(Triple, bool)>,
            out: &mut Vec<Vec<(Triple, bool)>>,
        ) {
            if !cur.is_empty() {
                out.push(cur.clone());
            }
            if cur.len() == x {
                return;
            }
            for &t in edges {
                for fwd in [true, false] {
                    let (from, to) = if fwd {
                        (t.head, t.tail)
                    } else {
                        (t.tail, t.head)
                    };
                    if from != at {
                        continue;
                    }
                    cur.push((t, fwd));
                    rec(edges, to, x, cur, out);
                    cur.pop();
                }
            }
        }
        let mut result = Vec::new();
        for s in 0..n {
            let start = EntityId(s);
            let mut all = Vec::new();
            rec(edges, start, x, &mut Vec::new(), &mut all);
            for w in all {
                let mut nodes = vec![start];
                for (t, fwd) in &w {
                    nodes.push(if *fwd { t.tail } else { t.head });
                }
                let anchor = |v: &EntityId| *v == head || *v == tail;
                let distinct = (0..w.len()).all(|i| (0..i).all(|j| w[i].0 != w[j].0));
                if anchor(&start)
                    && distinct
                    && nodes[1..nodes.len() - 1].iter().all(|v| !anchor(v))
                {
                    result.push((start, w));
                }
            }
        }
        result.sort();
        result
    }

    fn graph_from_edges(edges: &[(u32, u32, u32)], n: u32) -> KnowledgeGraph {
        let mut b = GraphBuilder::new();
        // Intern entities 0..n and relations in id order.
        for i in 0..n {
            b.add(&format!("e{i}"), "r0", &format!("e{i}"), Split::Test);
        }
        for r in 0..3 {
            b.add("e0", &format!("r{r}"), "e0", Split::Test);
        }
        for &(h, r, t) in edges {
            b.add(
                &format!("e{h}"),
                &format!("r{r}"),
                &format!("e{t}"),
                Split::Train,
            );
        }
        b.build()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn walks_match_brute_force(
            raw in prop::collection::vec((0u32..6, 0u32..3, 0u32..6), 0..10),
            a in 0u32..6,
            b in 0u32..6,
            x in 1usize..4,
        ) {
            let g = graph_from_edges(&raw, 6);
            let (head, tail) = (EntityId(a), EntityId(b));
            let mut got: Vec<(EntityId, Vec<(Triple, bool)>)> = enumerate_walks(&g, head, tail, x)
                .into_iter()
                .map(|w| {
                    let steps = w.triples().into_iter().zip(&w.steps)
                        .map(|(t, s)| (t, s.direction == Direction::Outgoing)).collect();
                    (w.start, steps)
                })
                .collect();
            got.sort();
            let edges: Vec<Triple> = g.train().to_vec();
            let want = brute_walks(&edges, 6, head, tail, x);
            prop_assert_eq!(got, want);
        }

        #[test]
        fn frequencies_match_multiset_recount(
            raw in prop::collection::vec((0u32..8, 0u32..3, 0u32..8), 1..16),
            pairs_raw in prop::collection::vec((0u32..8, 0u32..8), 1..4),
            x in 1usize..4,
        ) {
            let g = graph_from_edges(&raw, 8);
            let s = SchemaMap::from_pairs(&g, "A", [("e1", "B"), ("e4", "B"), ("e6", "C")]).unwrap();
            let rel = RelationId(0);
            let pairs = PairSets {
                relation: rel,
                positives: pairs_raw.iter().map(|&(h, t)| crate::neighbors::PositivePair {
                    head: EntityId(h), tail: EntityId(t),
                    source: Triple::new(EntityId(h), rel, EntityId(t)),
                    embedding: vec![], distance: 0.0,
                }).collect(),
                negatives: vec![],
            };
            let table = mine(&pairs, &g, &s, &MineConfig::new(x));
            for (row, &(h, t)) in table.rows.iter().zip(&pairs_raw) {
                // Independent recount: explicit list of clause keys.
                let mut keys: Vec<String> = Vec::new();
                let excluded = Triple::new(EntityId(h), rel, EntityId(t));
                for w in enumerate_walks(&g, EntityId(h), EntityId(t), x) {
                    if w.triples().contains(&excluded) { continue; }
                    let (c, p) = abstract_walk(&w, EntityId(h), EntityId(t), &s);
                    keys.push(c.key());
                    if let Some(p) = p { keys.push(p.key()); }
                }
                let total = keys.len();
                let sum: f64 = row.frequencies.iter().map(|f| f.1).sum();
                if total == 0 {
                    prop_assert!(row.frequencies.is_empty());
                } else {
                    prop_assert!((sum - 1.0).abs() < 1e-9);
                }
                for &(c, f) in &row.frequencies {
                    prop_assert!(f > 0.0 && f <= 1.0);
                    let n = keys.iter().filter(|k| **k == table.keys[c]).count();
                    prop_assert!((f - n as f64 / total as f64).abs() < 1e-12);
                }
                let distinct: std::collections::BTreeSet<_> = keys.iter().collect();
                prop_assert_eq!(distinct.len(), row.frequencies.len());
            }
        }

        #[test]
        fn keys_are_injective(
            a in prop::collection::vec((0u32..3, any::<bool>(), 0u8..4, 0u32..3), 1..4),
            b in prop::collection::vec((0u32..3, any::<bool>(), 0u8..4, 0u32..3), 1..4),
            sa in any::<bool>(),
            sb in any::<bool>(),
        ) {
            let mk = |start: bool, v: &[(u32, bool, u8, u32)]| Clause {
                start: if start { Term::Head } else { Term::Tail },
                steps: v.iter().map(|&(r, f, kind, id)| Step {
                    relation: RelationId(r),
                    forward: f,
                    node: match kind {
                        0 => Term::Head,
                        1 => Term::Tail,
                        2 => Term::Class(ClassId(id)),
                        _ => Term::Const(EntityId(id)),
                    },
                }).collect(),
            };
            let (ca, cb) = (mk(sa, &a), mk(sb, &b));
            prop_assert_eq!(ca == cb, ca.key() == cb.key());
            prop_assert_eq!(ca.reversed().reversed(), ca.clone());
            let canon = ca.clone().canonical();
            prop_assert_eq!(canon.clone().canonical(), canon);
        }
    }
}
