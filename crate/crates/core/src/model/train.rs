//! Mini-batch training for TransE (margin ranking loss, unit-norm entities)
//! and DistMult (logistic loss with L2 penalty) on sampled negatives.
//!
//! Every random choice that concerns a training triple (its position in the
//! epoch and its corruptions) is drawn from a generator keyed by
//! `(seed, epoch, triple)`. Removing a few triples from the training set
//! therefore leaves the randomness seen by every other triple unchanged,
//! which keeps ablation runs comparable to unablated ones under one seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, Split, Triple};
use crate::seed::mix;

use super::{distmult_score, transe_score, EmbeddingStore, ModelKind};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adagrad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dimension: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Hinge margin (TransE only).
    pub margin: f64,
    pub negatives: usize,
    pub batch_size: usize,
    /// L2 penalty on the positive triple's vectors (DistMult only).
    pub regularization: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl TrainConfig {
    /// Desk-scale defaults that train in a few seconds on Kinship-sized graphs.
    pub fn for_model(kind: ModelKind) -> Self {
        match kind {
            ModelKind::TransE => TrainConfig {
                dimension: 100,
                epochs: 100,
                learning_rate: 0.1,
                margin: 1.0,
                negatives: 1,
                batch_size: 32,
                regularization: 0.0,
                optimizer: Optimizer::Sgd,
                seed: 1,
            },
            // Unregularised: slightly lower MRR than a small L2 penalty, but
            // predictions depend more on specific training edges.
            _ => TrainConfig {
                dimension: 100,
                epochs: 100,
                learning_rate: 0.1,
                margin: 1.0,
                negatives: 4,
                batch_size: 128,
                regularization: 0.0,
                optimizer: Optimizer::Adagrad,
                seed: 1,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dimension", self.dimension),
            ("epochs", self.epochs),
            ("negatives", self.negatives),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        if !(self.margin > 0.0) || !(self.regularization >= 0.0) {
            return Err(Error::Config(
                "margin must be > 0 and regularization >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-triple loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

/// Dense gradient accumulator that remembers which rows were touched.
#[derive(Debug, Clone)]
pub struct GradBuffer {
    dim: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
    entity_touched: Vec<bool>,
    relation_touched: Vec<bool>,
    touched_entities: Vec<usize>,
    touched_relations: Vec<usize>,
}

impl GradBuffer {
    pub fn new(num_entities: usize, num_relations: usize, dim: usize) -> Self {
        Self {
            dim,
            entities: vec![0.0; num_entities * dim],
            relations: vec![0.0; num_relations * dim],
            entity_touched: vec![false; num_entities],
            relation_touched: vec![false; num_relations],
            touched_entities: Vec::new(),
            touched_relations: Vec::new(),
        }
    }

    pub fn for_store(store: &EmbeddingStore) -> Self {
        Self::new(store.num_entities(), store.num_relations(), store.dim())
    }

    fn entity_row(&mut self, i: usize) -> &mut [f64] {
        if !self.entity_touched[i] {
            self.entity_touched[i] = true;
            self.touched_entities.push(i);
        }
        &mut self.entities[i * self.dim..(i + 1) * self.dim]
    }

    fn relation_row(&mut self, i: usize) -> &mut [f64] {
        if !self.relation_touched[i] {
            self.relation_touched[i] = true;
            self.touched_relations.push(i);
        }
        &mut self.relations[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entity_grad(&self, i: usize) -> &[f64] {
        &self.entities[i * self.dim..(i + 1) * self.dim]
    }

    pub fn relation_grad(&self, i: usize) -> &[f64] {
        &self.relations[i * self.dim..(i + 1) * self.dim]
    }

    pub fn clear(&mut self) {
        for &i in &self.touched_entities {
            self.entities[i * self.dim..(i + 1) * self.dim].fill(0.0);
            self.entity_touched[i] = false;
        }
        for &i in &self.touched_relations {
            self.relations[i * self.dim..(i + 1) * self.dim].fill(0.0);
            self.relation_touched[i] = false;
        }
        self.touched_entities.clear();
        self.touched_relations.clear();
    }
}

/// Loss of one positive triple against its corruptions.
pub fn example_loss(
    store: &EmbeddingStore,
    positive: &Triple,
    negatives: &[Triple],
    config: &TrainConfig,
) -> f64 {
    let s = |t: &Triple| {
        let (h, r, tl) = (
            store.entity_unchecked(t.head.index()),
            store.relation_unchecked(t.relation.index()),
            store.entity_unchecked(t.tail.index()),
        );
        match store.kind() {
            ModelKind::TransE => transe_score(h, r, tl),
            _ => distmult_score(h, r, tl),
        }
    };
    let k = negatives.len().max(1) as f64;
    let pos = s(positive);
    match store.kind() {
        ModelKind::TransE => {
            negatives
                .iter()
                .map(|n| (config.margin - pos + s(n)).max(0.0))
                .sum::<f64>()
                / k
        }
        _ => {
            let reg: f64 = [
                store.entity_unchecked(positive.head.index()),
                store.relation_unchecked(positive.relation.index()),
                store.entity_unchecked(positive.tail.index()),
            ]
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>())
            .sum();
            softplus(-pos)
                + negatives.iter().map(|n| softplus(s(n))).sum::<f64>() / k
                + config.regularization * reg
        }
    }
}

/// [`example_loss`] plus its gradient, scaled by `scale` and added to `grads`.
pub fn example_loss_and_grad(
    store: &EmbeddingStore,
    positive: &Triple,
    negatives: &[Triple],
    config: &TrainConfig,
    scale: f64,
    grads: &mut GradBuffer,
) -> f64 {
    let k = negatives.len().max(1) as f64;
    match store.kind() {
        ModelKind::TransE => {
            let pos = transe_score_grad(store, positive, 0.0, grads);
            let mut loss = 0.0;
            for n in negatives {
                let neg = transe_score_grad(store, n, 0.0, grads);
                let l = config.margin - pos + neg;
                if l > 0.0 {
                    loss += l;
                    // d/ds_pos = -1, d/ds_neg = +1
                    transe_score_grad(store, positive, -scale / k, grads);
                    transe_score_grad(store, n, scale / k, grads);
                }
            }
            loss / k
        }
        _ => {
            let pos = distmult_score_of(store, positive);
            let mut loss = softplus(-pos);
            distmult_score_grad(store, positive, -sigmoid(-pos) * scale, grads);
            for n in negatives {
                let s = distmult_score_of(store, n);
                loss += softplus(s) / k;
                distmult_score_grad(store, n, sigmoid(s) * scale / k, grads);
            }
            let reg = config.regularization;
            if reg > 0.0 {
                let dim = store.dim();
                let (h, r, t) = (
                    positive.head.index(),
                    positive.relation.index(),
                    positive.tail.index(),
                );
                for (row, src) in [
                    (h, store.entity_unchecked(h)),
                    (t, store.entity_unchecked(t)),
                ] {
                    let g = grads.entity_row(row);
                    for i in 0..dim {
                        g[i] += 2.0 * reg * scale * src[i];
                    }
                    loss += reg * src.iter().map(|x| x * x).sum::<f64>();
                }
                let src = store.relation_unchecked(r);
                let g = grads.relation_row(r);
                for i in 0..dim {
                    g[i] += 2.0 * reg * scale * src[i];
                }
                loss += reg * src.iter().map(|x| x * x).sum::<f64>();
            }
            loss
        }
    }
}

fn distmult_score_of(store: &EmbeddingStore, t: &Triple) -> f64 {
    distmult_score(
        store.entity_unchecked(t.head.index()),
        store.relation_unchecked(t.relation.index()),
        store.entity_unchecked(t.tail.index()),
    )
}

/// Adds `coeff * d score / d params` for a DistMult triple.
fn distmult_score_grad(store: &EmbeddingStore, t: &Triple, coeff: f64, grads: &mut GradBuffer) {
    let (hi, ri, ti) = (t.head.index(), t.relation.index(), t.tail.index());
    let h = store.entity_unchecked(hi);
    let r = store.relation_unchecked(ri);
    let tl = store.entity_unchecked(ti);
    let dim = store.dim();
    {
        let g = grads.entity_row(hi);
        for i in 0..dim {
            g[i] += coeff * r[i] * tl[i];
        }
    }
    {
        let g = grads.relation_row(ri);
        for i in 0..dim {
            g[i] += coeff * h[i] * tl[i];
        }
    }
    let g = grads.entity_row(ti);
    for i in 0..dim {
        g[i] += coeff * h[i] * r[i];
    }
}

/// Returns the TransE score; when `coeff != 0` also adds `coeff * d score / d params`.
fn transe_score_grad(
    store: &EmbeddingStore,
    t: &Triple,
    coeff: f64,
    grads: &mut GradBuffer,
) -> f64 {
    let (hi, ri, ti) = (t.head.index(), t.relation.index(), t.tail.index());
    let h = store.entity_unchecked(hi);
    let r = store.relation_unchecked(ri);
    let tl = store.entity_unchecked(ti);
    let diff: Vec<f64> = (0..store.dim()).map(|i| h[i] + r[i] - tl[i]).collect();
    let norm = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
    if coeff != 0.0 && norm > 0.0 {
        // score = -||d||, d score / d h = -d / ||d||
        let c = -coeff / norm;
        for (row, sign) in [(hi, 1.0), (ti, -1.0)] {
            let g = grads.entity_row(row);
            for (gi, di) in g.iter_mut().zip(&diff) {
                *gi += sign * c * di;
            }
        }
        let g = grads.relation_row(ri);
        for (gi, di) in g.iter_mut().zip(&diff) {
            *gi += c * di;
        }
    }
    -norm
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn triple_key(seed: u64, epoch: u64, salt: u64, t: &Triple) -> u64 {
    let k = mix(mix(seed, salt), epoch);
    let k = mix(k, t.head.0 as u64);
    let k = mix(k, t.relation.0 as u64);
    mix(k, t.tail.0 as u64)
}

fn init_store(
    graph: &KnowledgeGraph,
    kind: ModelKind,
    config: &TrainConfig,
) -> Result<EmbeddingStore> {
    let dim = config.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bound = match kind {
        ModelKind::TransE => 6.0 / (dim as f64).sqrt(),
        _ => 1.0 / (dim as f64).sqrt(),
    };
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n * dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect()
    };
    let mut entities = draw(graph.num_entities());
    let mut relations = draw(graph.num_relations());
    if kind == ModelKind::TransE {
        for row in entities.chunks_mut(dim).chain(relations.chunks_mut(dim)) {
            normalize(row);
        }
    }
    EmbeddingStore::new(kind, dim, entities, relations, None)
}

fn normalize(row: &mut [f64]) {
    let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        row.iter_mut().for_each(|x| *x /= n);
    }
}

fn sample_negatives(
    graph: &KnowledgeGraph,
    positive: &Triple,
    count: usize,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Triple>,
) {
    const MAX_TRIES: usize = 50;
    out.clear();
    let n = graph.num_entities() as u32;
    for _ in 0..count {
        let mut candidate = *positive;
        for _ in 0..MAX_TRIES {
            let e = EntityId(rng.random_range(0..n));
            candidate = if rng.random_bool(0.5) {
                Triple::new(e, positive.relation, positive.tail)
            } else {
                Triple::new(positive.head, positive.relation, e)
            };
            if candidate != *positive && !graph.contains_in(&candidate, Split::Train) {
                break;
            }
        }
        out.push(candidate);
    }
}

struct AdagradState {
    entities: Vec<f64>,
    relations: Vec<f64>,
}

/// Trains a TransE or DistMult model on the train split of `graph`.
pub fn train(
    graph: &KnowledgeGraph,
    kind: ModelKind,
    config: &TrainConfig,
) -> Result<EmbeddingStore> {
    train_with_report(graph, kind, config).map(|(s, _)| s)
}

pub fn train_with_report(
    graph: &KnowledgeGraph,
    kind: ModelKind,
    config: &TrainConfig,
) -> Result<(EmbeddingStore, TrainReport)> {
    if kind == ModelKind::ConvE {
        return Err(Error::UnsupportedTrainer(kind.to_string()));
    }
    config.validate()?;
    if graph.train().is_empty() {
        return Err(Error::EmptyTrainSplit);
    }
    let mut store = init_store(graph, kind, config)?;
    let dim = config.dimension;
    let mut grads = GradBuffer::for_store(&store);
    let mut adagrad = AdagradState {
        entities: vec![0.0; store.entity_matrix().len()],
        relations: vec![0.0; store.relation_matrix().len()],
    };
    let mut report = TrainReport::default();
    let mut negatives = Vec::with_capacity(config.negatives);
    let train = graph.train();

    for epoch in 0..config.epochs as u64 {
        let mut order: Vec<(u64, usize)> = train
            .iter()
            .enumerate()
            .map(|(i, t)| (triple_key(config.seed, epoch, 1, t), i))
            .collect();
        order.sort_unstable();

        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            for &(_, i) in batch {
                let pos = &train[i];
                let mut rng = ChaCha8Rng::seed_from_u64(triple_key(config.seed, epoch, 2, pos));
                sample_negatives(graph, pos, config.negatives, &mut rng, &mut negatives);
                epoch_loss +=
                    example_loss_and_grad(&store, pos, &negatives, config, scale, &mut grads);
            }
            if config.learning_rate > 0.0 {
                apply_update(&mut store, &grads, &mut adagrad, config);
                if kind == ModelKind::TransE {
                    let ents = store.entity_matrix_mut();
                    for &e in &grads.touched_entities {
                        normalize(&mut ents[e * dim..(e + 1) * dim]);
                    }
                }
            }
        }
        let mean = epoch_loss / train.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.5}");
        report.epoch_losses.push(mean);
    }
    Ok((store, report))
}

fn apply_update(
    store: &mut EmbeddingStore,
    grads: &GradBuffer,
    state: &mut AdagradState,
    config: &TrainConfig,
) {
    const EPS: f64 = 1e-10;
    let dim = store.dim();
    let lr = config.learning_rate;
    let step = |params: &mut [f64], acc: &mut [f64], g: &[f64]| match config.optimizer {
        Optimizer::Sgd => {
            for (p, gi) in params.iter_mut().zip(g) {
                *p -= lr * gi;
            }
        }
        Optimizer::Adagrad => {
            for ((p, a), gi) in params.iter_mut().zip(acc.iter_mut()).zip(g) {
                *a += gi * gi;
                *p -= lr * gi / (a.sqrt() + EPS);
            }
        }
    };
    for &e in &grads.touched_entities {
        let r = e * dim..(e + 1) * dim;
        step(
            &mut store.entity_matrix_mut()[r.clone()],
            &mut state.entities[r],
            grads.entity_grad(e),
        );
    }
    for &rel in &grads.touched_relations {
        let r = rel * dim..(rel + 1) * dim;
        step(
            &mut store.relation_matrix_mut()[r.clone()],
            &mut state.relations[r],
            grads.relation_grad(rel),
        );
    }
}
