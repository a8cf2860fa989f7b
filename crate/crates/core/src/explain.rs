//! End-to-end explanation of one predicted triple: latent neighbourhood,
//! positive/negative pairs, clause mining, surrogate ranking, and the three
//! renderings of the top clauses (rules, groundings at the predicted pair,
//! groundings at the nearest analogous pair).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clauses::{ground_clause, mine, Clause, ClauseTable, Literal, MineConfig, Term};
use crate::error::Result;
use crate::graph::{EntityId, KnowledgeGraph, SchemaMap, Triple};
use crate::model::EmbeddingStore;
use crate::neighbors::{
    build_pairs, knn_with_index, nearest_positive_pair, NeighborSet, PairSets,
    TripleEmbeddingIndex, DEFAULT_K,
};
use crate::seed::triple_seed;
use crate::surrogate::{rank_clauses, SurrogateMethod, SurrogateParams, SurrogateReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    pub k: usize,
    pub max_walk_len: usize,
    pub walk_budget: usize,
    pub surrogate: SurrogateParams,
    /// Number of best-ranked clauses reported (and grounded).
    pub top_clauses: usize,
    /// Maximum groundings per clause and anchor pair.
    pub grounding_limit: usize,
    pub seed: u64,
}

impl ExplainConfig {
    pub fn new(method: SurrogateMethod) -> Self {
        Self {
            k: DEFAULT_K,
            max_walk_len: 1,
            walk_budget: crate::clauses::DEFAULT_WALK_BUDGET,
            surrogate: SurrogateParams::new(method),
            top_clauses: 5,
            grounding_limit: 10,
            seed: 0,
        }
    }

    fn mine_config(&self) -> MineConfig {
        MineConfig {
            max_len: self.max_walk_len,
            walk_budget: self.walk_budget,
            exclude_target_edge: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedClause {
    pub key: String,
    pub clause: Clause,
    pub relevance: f64,
    pub gamma: f64,
}

/// `body -> head`, where the body is a clause with its anchors replaced by
/// the predicted entities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub body: Vec<Literal>,
    pub head: Triple,
}

impl Rule {
    pub fn render(&self, graph: &KnowledgeGraph, schema: &SchemaMap) -> String {
        let mut out = String::new();
        for (i, lit) in self.body.iter().enumerate() {
            if i > 0 {
                out.push_str(" ∧ ");
            }
            write!(
                out,
                "{}({},{})",
                graph.relation_label(lit.relation),
                lit.subject.label(graph, schema),
                lit.object.label(graph, schema)
            )
            .unwrap();
        }
        let [h, r, t] = graph.labels_of(&self.head);
        write!(out, " → {r}({h},{t})").unwrap();
        out
    }

    /// The body with the predicted entities mapped back to `Head`/`Tail`.
    pub fn abstract_body(&self) -> Vec<Literal> {
        let back = |t: Term| match t {
            Term::Const(e) if e == self.head.head => Term::Head,
            Term::Const(e) if e == self.head.tail => Term::Tail,
            other => other,
        };
        self.body
            .iter()
            .map(|l| Literal {
                subject: back(l.subject),
                object: back(l.object),
                ..*l
            })
            .collect()
    }
}

pub fn make_rule(clause: &Clause, predicted: &Triple) -> Rule {
    let bind = |t: Term| match t {
        Term::Head => Term::Const(predicted.head),
        Term::Tail => Term::Const(predicted.tail),
        other => other,
    };
    Rule {
        body: clause
            .literals()
            .into_iter()
            .map(|l| Literal {
                subject: bind(l.subject),
                object: bind(l.object),
                ..l
            })
            .collect(),
        head: *predicted,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundedClause {
    pub key: String,
    pub relevance: f64,
    pub groundings: Vec<Vec<Triple>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub k: usize,
    pub max_walk_len: usize,
    pub method: SurrogateMethod,
    pub seed: u64,
    pub top_clauses: usize,
    pub grounding_limit: usize,
    pub sigma: f64,
    pub positives: usize,
    pub negatives: usize,
    pub vocabulary: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub predicted: Triple,
    pub provenance: Provenance,
    /// Reported clauses, most relevant first.
    pub clauses: Vec<RankedClause>,
    /// One rule per reported clause, same order.
    pub rules: Vec<Rule>,
    /// Groundings at the predicted pair; clauses without any are skipped.
    pub instance: Vec<GroundedClause>,
    pub analogy_pair: (EntityId, EntityId),
    pub analogy: Vec<GroundedClause>,
    pub skipped_instance: Vec<String>,
    pub skipped_analogy: Vec<String>,
    pub warnings: Vec<String>,
}

impl Explanation {
    /// Union of all instance groundings: the training evidence this
    /// explanation points at.
    pub fn removal_set(&self) -> BTreeSet<Triple> {
        self.instance
            .iter()
            .flat_map(|g| g.groundings.iter().flatten().copied())
            .collect()
    }

    pub fn to_json(&self, graph: &KnowledgeGraph, schema: &SchemaMap) -> serde_json::Value {
        let triple = |t: &Triple| {
            let [h, r, t] = graph.labels_of(t);
            json!([h, r, t])
        };
        let grounded = |gs: &[GroundedClause]| -> Vec<serde_json::Value> {
            gs.iter()
                .map(|g| {
                    let sets: Vec<Vec<serde_json::Value>> = g
                        .groundings
                        .iter()
                        .map(|set| set.iter().map(triple).collect())
                        .collect();
                    json!({"clause": g.key, "relevance": g.relevance, "groundings": sets})
                })
                .collect()
        };
        let clauses: Vec<_> = self
            .clauses
            .iter()
            .map(|c| {
                json!({
                    "key": c.key,
                    "clause": c.clause.display(graph, schema).to_string(),
                    "relevance": c.relevance,
                    "gamma": c.gamma,
                })
            })
            .collect();
        let rules: Vec<_> = self
            .rules
            .iter()
            .zip(&self.clauses)
            .map(|(r, c)| json!({"clause": c.key, "relevance": c.relevance, "rule": r.render(graph, schema)}))
            .collect();
        json!({
            "predicted": triple(&self.predicted),
            "provenance": self.provenance,
            "clauses": clauses,
            "rule": rules,
            "instance": grounded(&self.instance),
            "analogy": {
                "pair": [graph.entity_label(self.analogy_pair.0), graph.entity_label(self.analogy_pair.1)],
                "clauses": grounded(&self.analogy),
            },
            "skipped": {"instance": self.skipped_instance, "analogy": self.skipped_analogy},
            "removal_set": self.removal_set().iter().map(triple).collect::<Vec<_>>(),
            "warnings": self.warnings,
        })
    }

    pub fn to_text(&self, graph: &KnowledgeGraph, schema: &SchemaMap) -> String {
        let mut out = String::new();
        let p = &self.provenance;
        writeln!(out, "prediction: {}", graph.display(&self.predicted)).unwrap();
        writeln!(
            out,
            "  method {} | k {} | max walk length {} | seed {} | {} positive / {} negative pairs",
            p.method, p.k, p.max_walk_len, p.seed, p.positives, p.negatives
        )
        .unwrap();
        writeln!(out, "rules:").unwrap();
        for (r, c) in self.rules.iter().zip(&self.clauses) {
            writeln!(out, "  [{:.4}] {}", c.relevance, r.render(graph, schema)).unwrap();
        }
        let section = |out: &mut String, title: &str, gs: &[GroundedClause], skipped: &[String]| {
            writeln!(out, "{title}:").unwrap();
            for g in gs {
                let clause = self
                    .clauses
                    .iter()
                    .find(|c| c.key == g.key)
                    .map(|c| c.clause.display(graph, schema).to_string())
                    .unwrap_or_else(|| g.key.clone());
                writeln!(out, "  [{:.4}] {clause}", g.relevance).unwrap();
                for set in &g.groundings {
                    let parts: Vec<String> = set
                        .iter()
                        .map(|t| format!("({})", graph.display(t)))
                        .collect();
                    writeln!(out, "    {}", parts.join(" ∧ ")).unwrap();
                }
            }
            if !skipped.is_empty() {
                writeln!(out, "  ({} clause(s) without grounding)", skipped.len()).unwrap();
            }
        };
        section(&mut out, "instance", &self.instance, &self.skipped_instance);
        let (a, b) = self.analogy_pair;
        let title = format!(
            "analogy ({}, {})",
            graph.entity_label(a),
            graph.entity_label(b)
        );
        section(&mut out, &title, &self.analogy, &self.skipped_analogy);
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        out
    }

    /// Instance and analogy groundings as a DOT digraph; the predicted edge
    /// is dashed.
    pub fn to_dot(&self, graph: &KnowledgeGraph) -> String {
        let mut out = String::from("digraph explanation {\n  rankdir=LR;\n");
        let quote = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        let mut edges: BTreeSet<Triple> = BTreeSet::new();
        for g in self.instance.iter().chain(&self.analogy) {
            edges.extend(g.groundings.iter().flatten().copied());
        }
        for t in &edges {
            let [h, r, tl] = graph.labels_of(t);
            writeln!(out, "  {} -> {} [label={}];", quote(h), quote(tl), quote(r)).unwrap();
        }
        let [h, r, t] = graph.labels_of(&self.predicted);
        writeln!(
            out,
            "  {} -> {} [label={}, style=dashed, color=blue];",
            quote(h),
            quote(t),
            quote(r)
        )
        .unwrap();
        out.push_str("}\n");
        out
    }
}

/// Intermediate artifacts of one explanation run.
#[derive(Clone, Debug)]
pub struct ExplainTrace {
    pub neighbors: NeighborSet,
    pub pairs: PairSets,
    pub table: ClauseTable,
    pub report: SurrogateReport,
}

/// Explains predictions of one trained model over one graph. The triple
/// embedding index of the train split is built once and reused.
pub struct Explainer<'a> {
    graph: &'a KnowledgeGraph,
    store: &'a EmbeddingStore,
    schema: &'a SchemaMap,
    config: ExplainConfig,
    index: TripleEmbeddingIndex,
}

impl<'a> Explainer<'a> {
    pub fn new(
        graph: &'a KnowledgeGraph,
        store: &'a EmbeddingStore,
        schema: &'a SchemaMap,
        config: ExplainConfig,
    ) -> Result<Self> {
        let index = TripleEmbeddingIndex::build(store, graph)?;
        Ok(Self {
            graph,
            store,
            schema,
            config,
            index,
        })
    }

    pub fn config(&self) -> &ExplainConfig {
        &self.config
    }

    pub fn explain(&self, predicted: &Triple) -> Result<Explanation> {
        self.explain_traced(predicted).map(|(e, _)| e)
    }

    pub fn explain_all(&self, predicted: &[Triple]) -> Vec<Result<Explanation>> {
        predicted.par_iter().map(|t| self.explain(t)).collect()
    }

    pub fn explain_traced(&self, predicted: &Triple) -> Result<(Explanation, ExplainTrace)> {
        let cfg = &self.config;
        let neighbors = knn_with_index(self.store, &self.index, predicted, cfg.k)?;
        let pairs = build_pairs(
            &neighbors,
            predicted.relation,
            self.graph,
            triple_seed(cfg.seed, 0x7061_6972, predicted),
        )?;
        let table = mine(&pairs, self.graph, self.schema, &cfg.mine_config());
        let report = rank_clauses(
            &table,
            &pairs,
            &neighbors.query_embedding,
            Some(self.store),
            &cfg.surrogate,
        )?;

        let clauses: Vec<RankedClause> = report
            .ranking
            .iter()
            .filter(|s| s.score > 0.0)
            .take(cfg.top_clauses)
            .map(|s| RankedClause {
                key: s.key.clone(),
                clause: table.clauses[s.clause].clone(),
                relevance: s.score,
                gamma: s.gamma,
            })
            .collect();
        let rules = clauses
            .iter()
            .map(|c| make_rule(&c.clause, predicted))
            .collect();

        let analogy_pair = nearest_positive_pair(&pairs)?;
        let ground = |head: EntityId, tail: EntityId| {
            let excluded = Triple::new(head, predicted.relation, tail);
            let mut grounded = Vec::new();
            let mut skipped = Vec::new();
            for c in &clauses {
                let groundings = ground_clause(
                    &c.clause,
                    head,
                    tail,
                    self.graph,
                    self.schema,
                    cfg.grounding_limit,
                    Some(excluded),
                );
                if groundings.is_empty() {
                    skipped.push(c.key.clone());
                } else {
                    grounded.push(GroundedClause {
                        key: c.key.clone(),
                        relevance: c.relevance,
                        groundings,
                    });
                }
            }
            (grounded, skipped)
        };
        let (instance, skipped_instance) = ground(predicted.head, predicted.tail);
        let (analogy, skipped_analogy) = ground(analogy_pair.0, analogy_pair.1);

        let mut warnings = Vec::new();
        if clauses.is_empty() {
            warnings.push("no clause received a positive relevance score".to_owned());
        } else if instance.is_empty() && analogy.is_empty() {
            warnings.push("no reported clause could be grounded; rule modality only".to_owned());
        }
        for w in &warnings {
            log::warn!("{}: {w}", self.graph.display(predicted));
        }

        let explanation = Explanation {
            predicted: *predicted,
            provenance: Provenance {
                k: cfg.k,
                max_walk_len: cfg.max_walk_len,
                method: cfg.surrogate.method,
                seed: cfg.seed,
                top_clauses: cfg.top_clauses,
                grounding_limit: cfg.grounding_limit,
                sigma: report.sigma,
                positives: pairs.positives.len(),
                negatives: pairs.negatives.len(),
                vocabulary: table.num_clauses(),
            },
            clauses,
            rules,
            instance,
            analogy_pair,
            analogy,
            skipped_instance,
            skipped_analogy,
            warnings,
        };
        Ok((
            explanation,
            ExplainTrace {
                neighbors,
                pairs,
                table,
                report,
            },
        ))
    }
}

/// One-shot convenience wrapper around [`Explainer`].
pub fn explain(
    predicted: &Triple,
    graph: &KnowledgeGraph,
    store: &EmbeddingStore,
    schema: &SchemaMap,
    config: &ExplainConfig,
) -> Result<Explanation> {
    Explainer::new(graph, store, schema, config.clone())?.explain(predicted)
}
