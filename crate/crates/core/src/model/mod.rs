//! Embedding models: interaction functions, triple embeddings, training,
//! serialization and filtered ranking.

mod conve;
mod io;
mod ranking;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, RelationId, Triple};

pub use conve::{conve_combine, default_reshape, ConvEParams};
pub use io::{export_embeddings, import_embeddings, EmbeddingHeader};
pub use ranking::{evaluate_ranking, rank_query, FilterIndex, RankMetrics, TripleRanks};
pub use train::{
    example_loss, example_loss_and_grad, train, train_with_report, GradBuffer, Optimizer,
    TrainConfig, TrainReport,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TransE,
    DistMult,
    ConvE,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::TransE => "transe",
            ModelKind::DistMult => "distmult",
            ModelKind::ConvE => "conve",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "distmult" => Ok(ModelKind::DistMult),
            "conve" => Ok(ModelKind::ConvE),
            _ => Err(Error::UnknownModelKind(s.to_owned())),
        }
    }
}

/// Dense entity and relation vectors, stored row-major and indexed by the
/// interned ids of the graph they were trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    kind: ModelKind,
    dim: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
    conve: Option<ConvEParams>,
}

impl EmbeddingStore {
    pub fn new(
        kind: ModelKind,
        dim: usize,
        entities: Vec<f64>,
        relations: Vec<f64>,
        conve: Option<ConvEParams>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        for (name, data) in [("entity", &entities), ("relation", &relations)] {
            if data.len() % dim != 0 {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: data.len() % dim,
                    context: format!("{name} matrix length {}", data.len()),
                });
            }
            if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "non-finite value in {name} row {}",
                    pos / dim
                )));
            }
        }
        match (kind, &conve) {
            (ModelKind::ConvE, Some(p)) => p.validate(dim)?,
            (ModelKind::ConvE, None) => {
                return Err(Error::Config(
                    "ConvE store requires ConvE parameters".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::Config(format!(
                    "{kind} store must not carry ConvE parameters"
                )))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            dim,
            entities,
            relations,
            conve,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len() / self.dim
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len() / self.dim
    }

    pub fn conve_params(&self) -> Option<&ConvEParams> {
        self.conve.as_ref()
    }

    pub fn entity(&self, id: EntityId) -> Result<&[f64]> {
        let i = id.index();
        if i >= self.num_entities() {
            return Err(Error::MissingEmbedding(format!("entity #{}", id.0)));
        }
        Ok(&self.entities[i * self.dim..(i + 1) * self.dim])
    }

    pub fn relation(&self, id: RelationId) -> Result<&[f64]> {
        let i = id.index();
        if i >= self.num_relations() {
            return Err(Error::MissingEmbedding(format!("relation #{}", id.0)));
        }
        Ok(&self.relations[i * self.dim..(i + 1) * self.dim])
    }

    pub(crate) fn entity_unchecked(&self, i: usize) -> &[f64] {
        &self.entities[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn relation_unchecked(&self, i: usize) -> &[f64] {
        &self.relations[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn entity_matrix(&self) -> &[f64] {
        &self.entities
    }

    pub(crate) fn relation_matrix(&self) -> &[f64] {
        &self.relations
    }

    pub(crate) fn entity_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.entities
    }

    pub(crate) fn relation_matrix_mut(&mut self) -> &mut [f64] {
        &mut self.relations
    }

    fn check_triple(&self, triple: &Triple) -> Result<()> {
        self.entity(triple.head)?;
        self.relation(triple.relation)?;
        self.entity(triple.tail)?;
        Ok(())
    }

    /// Plausibility of a triple; higher is more plausible.
    pub fn score(&self, triple: &Triple) -> Result<f64> {
        self.check_triple(triple)?;
        Ok(self.score_unchecked(
            triple.head.index(),
            triple.relation.index(),
            triple.tail.index(),
        ))
    }

    pub(crate) fn score_unchecked(&self, h: usize, r: usize, t: usize) -> f64 {
        let hv = self.entity_unchecked(h);
        let rv = self.relation_unchecked(r);
        let tv = self.entity_unchecked(t);
        match self.kind {
            ModelKind::TransE => transe_score(hv, rv, tv),
            ModelKind::DistMult => distmult_score(hv, rv, tv),
            ModelKind::ConvE => {
                let params = self.conve.as_ref().expect("validated at construction");
                let combined = params.combine(hv, rv);
                dot(&combined, tv)
            }
        }
    }

    /// Scores every entity as tail of `(head, relation, ?)`.
    pub fn score_tails(&self, head: EntityId, relation: RelationId) -> Result<Vec<f64>> {
        self.entity(head)?;
        self.relation(relation)?;
        let (h, r) = (head.index(), relation.index());
        Ok(match self.kind {
            ModelKind::ConvE => {
                let params = self.conve.as_ref().expect("validated at construction");
                let combined = params.combine(self.entity_unchecked(h), self.relation_unchecked(r));
                (0..self.num_entities())
                    .map(|t| dot(&combined, self.entity_unchecked(t)))
                    .collect()
            }
            _ => (0..self.num_entities())
                .map(|t| self.score_unchecked(h, r, t))
                .collect(),
        })
    }

    /// Scores every entity as head of `(?, relation, tail)`.
    pub fn score_heads(&self, relation: RelationId, tail: EntityId) -> Result<Vec<f64>> {
        self.entity(tail)?;
        self.relation(relation)?;
        let (r, t) = (relation.index(), tail.index());
        Ok((0..self.num_entities())
            .map(|h| self.score_unchecked(h, r, t))
            .collect())
    }

    /// Vector used for neighbour retrieval: `[head; relation; tail]` for
    /// TransE/DistMult, `[combined(head, relation); tail]` for ConvE.
    pub fn triple_embedding(&self, triple: &Triple) -> Result<Vec<f64>> {
        self.check_triple(triple)?;
        let h = self.entity_unchecked(triple.head.index());
        let r = self.relation_unchecked(triple.relation.index());
        let t = self.entity_unchecked(triple.tail.index());
        Ok(match self.kind {
            ModelKind::TransE | ModelKind::DistMult => [h, r, t].concat(),
            ModelKind::ConvE => {
                let params = self.conve.as_ref().expect("validated at construction");
                let mut v = params.combine(h, r);
                v.extend_from_slice(t);
                v
            }
        })
    }

    pub fn triple_embedding_len(&self) -> usize {
        match self.kind {
            ModelKind::TransE | ModelKind::DistMult => 3 * self.dim,
            ModelKind::ConvE => 2 * self.dim,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn transe_score(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    let sq: f64 = h
        .iter()
        .zip(r)
        .zip(t)
        .map(|((a, b), c)| {
            let d = a + b - c;
            d * d
        })
        .sum();
    -sq.sqrt()
}

#[inline]
pub(crate) fn distmult_score(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    h.iter().zip(r).zip(t).map(|((a, b), c)| a * b * c).sum()
}
