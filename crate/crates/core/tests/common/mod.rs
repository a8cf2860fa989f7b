//! Independent oracles shared by the `oracles` and `acceptance` targets.
//! Each check runs a fixed number of seeded random instances and returns
//! the first disagreement as an error message.

#![allow(dead_code)]

use std::collections::BTreeMap;

use kgx::clauses::{abstract_walk, enumerate_walks, mine, MineConfig};
use kgx::graph::{
    Direction, EntityId, GraphBuilder, KnowledgeGraph, RelationId, SchemaMap, Split, Triple,
};
use kgx::model::{
    evaluate_ranking, example_loss, example_loss_and_grad, EmbeddingStore, FilterIndex, GradBuffer,
    ModelKind, TrainConfig,
};
use kgx::neighbors::{knn, PairSets, PositivePair};
use kgx::surrogate::{fit_hsic_lasso, ridge_solve, DesignMatrix, HsicConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub const ORACLES: [(&str, fn() -> Check); 7] = [
    (
        "walk enumeration vs recursive brute force",
        walks_vs_brute_force,
    ),
    (
        "clause frequencies vs multiset recount",
        frequencies_vs_recount,
    ),
    ("kNN vs full sort", knn_vs_full_sort),
    ("filtered ranks vs brute force", ranks_vs_brute_force),
    ("K-Lasso normal-equation residual", klasso_normal_equations),
    ("HSIC-Lasso vs exhaustive grid", hsic_vs_grid),
    (
        "gradients vs central differences",
        gradients_vs_finite_differences,
    ),
];

fn random_graph(
    rng: &mut ChaCha8Rng,
    nodes: u32,
    relations: u32,
    max_edges: usize,
) -> KnowledgeGraph {
    let mut b = GraphBuilder::new();
    // Register every node so ids are 0..nodes regardless of the edges drawn.
    for i in 0..nodes {
        b.add(&format!("e{i}"), "r0", &format!("e{i}"), Split::Test);
    }
    for r in 0..relations {
        b.add("e0", &format!("r{r}"), "e0", Split::Test);
    }
    for _ in 0..rng.random_range(1..=max_edges) {
        let (h, r, t) = (
            rng.random_range(0..nodes),
            rng.random_range(0..relations),
            rng.random_range(0..nodes),
        );
        b.add(
            &format!("e{h}"),
            &format!("r{r}"),
            &format!("e{t}"),
            Split::Train,
        );
    }
    b.build()
}

type RawWalk = (EntityId, Vec<(Triple, bool)>);

/// Every edge sequence of length `1..=x` from every node, kept when it
/// starts at an anchor, uses distinct edges and has no anchor inside.
fn brute_walks(
    edges: &[Triple],
    n: usize,
    head: EntityId,
    tail: EntityId,
    x: usize,
    skip: Option<Triple>,
) -> Vec<RawWalk> {
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
                if from == at {
                    cur.push((t, fwd));
                    rec(edges, to, x, cur, out);
                    cur.pop();
                }
            }
        }
    }
    let edges: Vec<Triple> = edges.iter().copied().filter(|t| Some(*t) != skip).collect();
    let anchor = |v: EntityId| v == head || v == tail;
    let mut result = Vec::new();
    for s in 0..n as u32 {
        let start = EntityId(s);
        let mut all = Vec::new();
        rec(&edges, start, x, &mut Vec::new(), &mut all);
        for w in all {
            let mut nodes = vec![start];
            for (t, fwd) in &w {
                nodes.push(if *fwd { t.tail } else { t.head });
            }
            let distinct = (0..w.len()).all(|i| (0..i).all(|j| w[i].0 != w[j].0));
            let inner_ok = nodes[1..nodes.len() - 1].iter().all(|&v| !anchor(v));
            if anchor(start) && distinct && inner_ok {
                result.push((start, w));
            }
        }
    }
    result.sort();
    result
}

pub fn walks_vs_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..200 {
        let n = rng.random_range(2..=6);
        let g = random_graph(&mut rng, n, 3, 10);
        let head = EntityId(rng.random_range(0..n));
        let tail = EntityId(rng.random_range(0..n));
        let x = rng.random_range(1..=3);
        let mut got: Vec<RawWalk> = enumerate_walks(&g, head, tail, x)
            .into_iter()
            .map(|w| {
                let steps = w
                    .triples()
                    .into_iter()
                    .zip(&w.steps)
                    .map(|(t, s)| (t, s.direction == Direction::Outgoing))
                    .collect();
                (w.start, steps)
            })
            .collect();
        got.sort();
        let want = brute_walks(g.train(), n as usize, head, tail, x, None);
        if got != want {
            return Err(format!(
                "trial {trial}: {} walks, oracle {}",
                got.len(),
                want.len()
            ));
        }
    }
    Ok(())
}

pub fn frequencies_vs_recount() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..100 {
        let g = random_graph(&mut rng, 8, 3, 16);
        let s = SchemaMap::from_pairs(&g, "A", [("e1", "B"), ("e4", "B"), ("e6", "C")])
            .map_err(|e| e.to_string())?;
        let rel = RelationId(0);
        let pairs: Vec<(u32, u32)> = (0..rng.random_range(1..4))
            .map(|_| (rng.random_range(0..8), rng.random_range(0..8)))
            .collect();
        let x = rng.random_range(1..=3);
        let sets = PairSets {
            relation: rel,
            positives: pairs
                .iter()
                .map(|&(h, t)| PositivePair {
                    head: EntityId(h),
                    tail: EntityId(t),
                    source: Triple::new(EntityId(h), rel, EntityId(t)),
                    embedding: vec![],
                    distance: 0.0,
                })
                .collect(),
            negatives: vec![],
        };
        let table = mine(&sets, &g, &s, &MineConfig::new(x));
        for (row, &(h, t)) in table.rows.iter().zip(&pairs) {
            let (h, t) = (EntityId(h), EntityId(t));
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            let mut total = 0usize;
            let skip = Some(Triple::new(h, rel, t));
            for (start, steps) in brute_walks(g.train(), 8, h, t, x, skip) {
                let walk = kgx::clauses::Walk {
                    start,
                    steps: steps
                        .iter()
                        .map(|&(tr, fwd)| kgx::graph::Neighbor {
                            relation: tr.relation,
                            neighbor: if fwd { tr.tail } else { tr.head },
                            direction: if fwd {
                                Direction::Outgoing
                            } else {
                                Direction::Incoming
                            },
                        })
                        .collect(),
                };
                let (c, p) = abstract_walk(&walk, h, t, &s);
                for clause in std::iter::once(c).chain(p) {
                    *counts.entry(clause.key()).or_default() += 1;
                    total += 1;
                }
            }
            let got: BTreeMap<String, f64> = row
                .frequencies
                .iter()
                .map(|&(c, f)| (table.keys[c].clone(), f))
                .collect();
            if got.len() != counts.len() {
                return Err(format!(
                    "trial {trial}: {} clauses, oracle {}",
                    got.len(),
                    counts.len()
                ));
            }
            for (key, n) in &counts {
                let want = *n as f64 / total as f64;
                match got.get(key) {
                    Some(f) if (f - want).abs() <= 1e-12 => {}
                    other => {
                        return Err(format!("trial {trial}: {key} has {other:?}, oracle {want}"))
                    }
                }
            }
        }
    }
    Ok(())
}

fn random_store(
    rng: &mut ChaCha8Rng,
    kind: ModelKind,
    entities: usize,
    relations: usize,
    dim: usize,
) -> (Vec<f64>, Vec<f64>, EmbeddingStore) {
    // Small integers make exact distance ties common.
    let mut draw = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| rng.random_range(-3i32..=3) as f64 * 0.5)
            .collect()
    };
    let e = draw(entities * dim);
    let r = draw(relations * dim);
    let store = EmbeddingStore::new(kind, dim, e.clone(), r.clone(), None).expect("valid store");
    (e, r, store)
}

pub fn knn_vs_full_sort() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..100 {
        let g = random_graph(&mut rng, 10, 3, 40);
        let dim = 2;
        let (e, r, store) = random_store(
            &mut rng,
            ModelKind::DistMult,
            g.num_entities(),
            g.num_relations(),
            dim,
        );
        let v = |m: &[f64], i: EntityId| m[i.index() * dim..(i.index() + 1) * dim].to_vec();
        let emb = |t: &Triple| {
            [
                v(&e, t.head),
                r[t.relation.index() * dim..(t.relation.index() + 1) * dim].to_vec(),
                v(&e, t.tail),
            ]
            .concat()
        };
        let predicted = Triple::new(
            EntityId(rng.random_range(0..10)),
            RelationId(0),
            EntityId(rng.random_range(0..10)),
        );
        let k = rng.random_range(1..50);
        let q = emb(&predicted);
        let mut all: Vec<(f64, Triple)> = g
            .train()
            .iter()
            .map(|t| {
                let d = emb(t)
                    .iter()
                    .zip(&q)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                (d, *t)
            })
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want: Vec<Triple> = all.iter().take(k).map(|x| x.1).collect();
        let got: Vec<Triple> = knn(&store, &g, &predicted, k)
            .map_err(|e| e.to_string())?
            .entries
            .iter()
            .map(|n| n.triple)
            .collect();
        if got != want {
            return Err(format!("trial {trial}: k={k} neighbours differ"));
        }
    }
    Ok(())
}

fn score(kind: ModelKind, e: &[f64], r: &[f64], dim: usize, t: &Triple) -> f64 {
    let h = &e[t.head.index() * dim..][..dim];
    let rel = &r[t.relation.index() * dim..][..dim];
    let tl = &e[t.tail.index() * dim..][..dim];
    match kind {
        ModelKind::TransE => -(0..dim)
            .map(|i| (h[i] + rel[i] - tl[i]).powi(2))
            .sum::<f64>()
            .sqrt(),
        _ => (0..dim).map(|i| h[i] * rel[i] * tl[i]).sum(),
    }
}

pub fn ranks_vs_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for trial in 0..200 {
        let kind = if trial % 2 == 0 {
            ModelKind::DistMult
        } else {
            ModelKind::TransE
        };
        let (n, dim) = (5u32, 2);
        let (e, r, store) = random_store(&mut rng, kind, n as usize, 2, dim);
        let rand_triple = |rng: &mut ChaCha8Rng| {
            Triple::new(
                EntityId(rng.random_range(0..n)),
                RelationId(rng.random_range(0..2)),
                EntityId(rng.random_range(0..n)),
            )
        };
        let known: Vec<Triple> = (0..rng.random_range(0..8))
            .map(|_| rand_triple(&mut rng))
            .collect();
        let queries: Vec<Triple> = (0..4).map(|_| rand_triple(&mut rng)).collect();
        let filter =
            FilterIndex::from_triples(known.iter().copied().chain(queries.iter().copied()));
        let metrics = evaluate_ranking(&store, &queries, &filter).map_err(|e| e.to_string())?;
        for (q, got) in queries.iter().zip(metrics.per_triple()) {
            let target = score(kind, &e, &r, dim, q);
            let rank = |tail_side: bool| {
                1 + (0..n)
                    .map(|c| {
                        if tail_side {
                            Triple::new(q.head, q.relation, EntityId(c))
                        } else {
                            Triple::new(EntityId(c), q.relation, q.tail)
                        }
                    })
                    .filter(|c| c != q && !known.contains(c) && !queries.contains(c))
                    .filter(|c| score(kind, &e, &r, dim, c) >= target)
                    .count()
            };
            if (got.head, got.tail) != (rank(false), rank(true)) {
                return Err(format!(
                    "trial {trial} {kind}: got {got:?}, oracle ({}, {})",
                    rank(false),
                    rank(true)
                ));
            }
        }
    }
    Ok(())
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DesignMatrix {
    let x = (0..rows * cols)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    let y = (0..rows)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let alpha = (0..rows).map(|_| rng.random_range(0.1..1.0)).collect();
    DesignMatrix::new(x, y, alpha, (0..cols).map(|c| format!("c{c}")).collect())
        .expect("valid matrix")
}

pub fn klasso_normal_equations() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for trial in 0..100 {
        let (rows, cols) = (rng.random_range(2..10), rng.random_range(1..12));
        let beta = 10f64.powf(rng.random_range(-3.0..1.0));
        let m = random_matrix(&mut rng, rows, cols);
        let w = ridge_solve(&m, beta).map_err(|e| e.to_string())?;
        // X^T A (y - X w) - beta w = 0
        let mut worst: f64 = 0.0;
        for j in 0..cols {
            let mut g = -beta * w[j];
            for i in 0..rows {
                let pred: f64 = (0..cols).map(|k| m.get(i, k) * w[k]).sum();
                g += m.alpha[i] * m.get(i, j) * (m.y[i] - pred);
            }
            worst = worst.max(g.abs());
        }
        if worst > 1e-8 {
            return Err(format!("trial {trial}: residual {worst:e}"));
        }
    }
    Ok(())
}

/// `H K H / |H K H|_F` on the full matrix.
fn centred(k: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = k.len();
    let nf = n as f64;
    let row: Vec<f64> = k.iter().map(|r| r.iter().sum::<f64>() / nf).collect();
    let grand = row.iter().sum::<f64>() / nf;
    let mut c: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| k[i][j] - row[i] - row[j] + grand).collect())
        .collect();
    let norm = c.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    for v in c.iter_mut().flatten() {
        *v = if norm > 1e-12 { *v / norm } else { 0.0 };
    }
    c
}

fn gaussian_gram(col: &[f64]) -> Vec<Vec<f64>> {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..col.len() {
        for j in i + 1..col.len() {
            if col[i] != col[j] {
                d.push((col[i] - col[j]).abs());
            }
        }
    }
    if d.is_empty() {
        return vec![vec![0.0; col.len()]; col.len()];
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let s = if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    };
    col.iter()
        .map(|a| {
            col.iter()
                .map(|b| (-(a - b).powi(2) / (2.0 * s * s)).exp())
                .collect()
        })
        .collect()
}

pub fn hsic_vs_grid() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let lambda = HsicConfig::default().lambda;
    for trial in 0..20 {
        let n = rng.random_range(4..9);
        let y: Vec<f64> = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let cols: Vec<Vec<f64>> = (0..2)
            .map(|_| {
                (0..n)
                    .map(|i| {
                        if rng.random_bool(0.7) {
                            (y[i] + 1.0) * rng.random_range(0.1..0.5)
                        } else {
                            rng.random_range(0.0..1.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let x: Vec<f64> = (0..n).flat_map(|i| [cols[0][i], cols[1][i]]).collect();
        let m = DesignMatrix::new(x, y.clone(), vec![1.0; n], vec!["a".into(), "b".into()])
            .map_err(|e| e.to_string())?;
        let report = fit_hsic_lasso(&m, &HsicConfig::default()).map_err(|e| e.to_string())?;
        let w = [
            report.score_of("a").unwrap_or(0.0).abs(),
            report.score_of("b").unwrap_or(0.0).abs(),
        ];

        let pos = y.iter().filter(|v| **v > 0.0).count() as f64;
        let neg = n as f64 - pos;
        let label: Vec<Vec<f64>> = y
            .iter()
            .map(|a| {
                y.iter()
                    .map(|b| {
                        if (a > &0.0) == (b > &0.0) {
                            1.0 / if *a > 0.0 { pos } else { neg }
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let l = centred(&label);
        let g = [
            centred(&gaussian_gram(&cols[0])),
            centred(&gaussian_gram(&cols[1])),
        ];
        let objective = |a: f64, b: f64| {
            let mut r = 0.0;
            for i in 0..n {
                for j in 0..n {
                    r += (l[i][j] - a * g[0][i][j] - b * g[1][i][j]).powi(2);
                }
            }
            0.5 * r + lambda * (a + b)
        };
        let mut best = f64::INFINITY;
        for i in 0..=300 {
            for j in 0..=300 {
                best = best.min(objective(i as f64 / 150.0, j as f64 / 150.0));
            }
        }
        let got = objective(w[0], w[1]);
        if got > best + 1e-9 {
            return Err(format!(
                "trial {trial}: objective {got} above grid minimum {best}"
            ));
        }
    }
    Ok(())
}

pub fn gradients_vs_finite_differences() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for kind in [ModelKind::DistMult, ModelKind::TransE] {
        let mut cfg = TrainConfig::for_model(kind);
        cfg.regularization = 0.01;
        cfg.margin = 4.0;
        let (ne, nr, dim) = (6, 2, 5);
        for trial in 0..5 {
            let e: Vec<f64> = (0..ne * dim).map(|_| rng.random_range(-0.5..0.5)).collect();
            let r: Vec<f64> = (0..nr * dim).map(|_| rng.random_range(-0.5..0.5)).collect();
            let build = |e: &[f64], r: &[f64]| {
                EmbeddingStore::new(kind, dim, e.to_vec(), r.to_vec(), None).expect("valid store")
            };
            let store = build(&e, &r);
            let pos = Triple::new(EntityId(0), RelationId(0), EntityId(1));
            let negs: Vec<Triple> = (0..3)
                .map(|_| Triple::new(EntityId(rng.random_range(2..6)), RelationId(0), EntityId(1)))
                .collect();
            let mut grads = GradBuffer::for_store(&store);
            example_loss_and_grad(&store, &pos, &negs, &cfg, 1.0, &mut grads);
            let h = 1e-6;
            for entity_side in [true, false] {
                let len = if entity_side { e.len() } else { r.len() };
                for idx in 0..len {
                    let (mut ep, mut em, mut rp, mut rm) =
                        (e.clone(), e.clone(), r.clone(), r.clone());
                    if entity_side {
                        ep[idx] += h;
                        em[idx] -= h;
                    } else {
                        rp[idx] += h;
                        rm[idx] -= h;
                    }
                    let numeric = (example_loss(&build(&ep, &rp), &pos, &negs, &cfg)
                        - example_loss(&build(&em, &rm), &pos, &negs, &cfg))
                        / (2.0 * h);
                    let analytic = if entity_side {
                        grads.entity_grad(idx / dim)[idx % dim]
                    } else {
                        grads.relation_grad(idx / dim)[idx % dim]
                    };
                    let rel =
                        (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
                    if rel > 1e-4 {
                        return Err(format!("{kind} trial {trial} param {idx}: numeric {numeric}, analytic {analytic}"));
                    }
                }
            }
        }
    }
    Ok(())
}

/// The three modality rows of the Alice/Bob example.
pub fn social_table() -> Check {
    use kgx::explain::Explainer;
    use kgx::fixtures::{social, social_config};
    let f = social();
    let e = Explainer::new(&f.graph, &f.store, &f.schema, social_config())
        .and_then(|x| x.explain(&f.predicted))
        .map_err(|e| e.to_string())?;
    let g = &f.graph;
    let triple = |h: &str, r: &str, t: &str| g.triple(h, r, t).expect("fixture triple");

    let rule = e
        .rules
        .first()
        .map(|r| r.render(g, &f.schema))
        .unwrap_or_default();
    let want_rule = "knows(Alice,Person) ∧ works_with(Person,Bob) → knows(Alice,Bob)";
    if rule != want_rule {
        return Err(format!("top rule `{rule}`"));
    }
    let want_instance = vec![vec![
        triple("Alice", "knows", "Tom"),
        triple("Tom", "works_with", "Bob"),
    ]];
    let instance = e
        .instance
        .first()
        .map(|c| c.groundings.clone())
        .unwrap_or_default();
    if instance != want_instance {
        return Err(format!("instance grounding {instance:?}"));
    }
    if e.analogy_pair != (g.entity_id("Carol").unwrap(), g.entity_id("Dave").unwrap()) {
        return Err(format!("analogy pair {:?}", e.analogy_pair));
    }
    let want_analogy = vec![vec![
        triple("Carol", "knows", "Anja"),
        triple("Anja", "works_with", "Dave"),
    ]];
    let analogy = e
        .analogy
        .first()
        .map(|c| c.groundings.clone())
        .unwrap_or_default();
    if analogy != want_analogy {
        return Err(format!("analogy grounding {analogy:?}"));
    }
    Ok(())
}
