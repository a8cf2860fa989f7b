//! Embedding files: one JSON header line followed by `[section]` blocks of
//! `id<TAB>v1,v2,...` rows. Values are written with Rust's shortest
//! round-trip float formatting, so export followed by import is bit-exact.
//!
//! ```text
//! {"format":"kgx-embeddings","version":1,"model_kind":"distmult","dimension":2,...}
//! [entities]
//! alice	0.25,-1.5
//! [relations]
//! knows	1,0.5
//! ```
//!
//! ConvE files additionally carry `[conve.filters]` (one row per filter,
//! row-major weights) and `[conve.projection]` (one row per feature).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;

use super::{default_reshape, ConvEParams, EmbeddingStore, ModelKind};

const FORMAT: &str = "kgx-embeddings";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvEShape {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<usize>,
    pub filter_rows: usize,
    pub filter_cols: usize,
    pub num_filters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub format: String,
    pub version: u32,
    pub model_kind: String,
    pub dimension: usize,
    pub entities: usize,
    pub relations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conve: Option<ConvEShape>,
}

fn push_row(out: &mut String, id: &str, values: &[f64]) {
    out.push_str(id);
    out.push('\t');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v}").expect("writing to a String cannot fail");
    }
    out.push('\n');
}

pub fn export_embeddings(
    store: &EmbeddingStore,
    graph: &KnowledgeGraph,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let header = EmbeddingHeader {
        format: FORMAT.into(),
        version: 1,
        model_kind: store.kind().as_str().into(),
        dimension: store.dim(),
        entities: store.num_entities(),
        relations: store.num_relations(),
        conve: store.conve_params().map(|p| ConvEShape {
            rows: Some(p.rows),
            cols: Some(p.cols),
            filter_rows: p.filter_rows,
            filter_cols: p.filter_cols,
            num_filters: p.num_filters,
        }),
    };
    let mut out = serde_json::to_string(&header)?;
    out.push('\n');
    out.push_str("[entities]\n");
    for e in graph.entities() {
        push_row(&mut out, graph.entity_label(e), store.entity(e)?);
    }
    out.push_str("[relations]\n");
    for r in graph.relations() {
        push_row(&mut out, graph.relation_label(r), store.relation(r)?);
    }
    if let Some(p) = store.conve_params() {
        out.push_str("[conve.filters]\n");
        let per = p.filter_rows * p.filter_cols;
        for (i, w) in p.filters.chunks(per).enumerate() {
            push_row(&mut out, &i.to_string(), w);
        }
        out.push_str("[conve.projection]\n");
        for (i, w) in p.projection.chunks(store.dim()).enumerate() {
            push_row(&mut out, &i.to_string(), w);
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_values(path: &Path, line: usize, text: &str, dim: usize) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| Error::Parse {
            path: path.to_owned(),
            line,
            message: e.to_string(),
        })?;
    if values.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: values.len(),
            context: format!("{}:{line}", path.display()),
        });
    }
    Ok(values)
}

/// Reads an embedding file and aligns its rows with the interned ids of `graph`.
pub fn import_embeddings(path: impl AsRef<Path>, graph: &KnowledgeGraph) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::Parse {
        path: path.to_owned(),
        line: 1,
        message: "missing header".into(),
    })?;
    let header: EmbeddingHeader = serde_json::from_str(first).map_err(|e| Error::Parse {
        path: path.to_owned(),
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    if header.format != FORMAT {
        return Err(Error::Parse {
            path: path.to_owned(),
            line: 1,
            message: format!("unsupported format `{}`", header.format),
        });
    }
    let kind: ModelKind = header.model_kind.parse()?;
    let dim = header.dimension;

    let mut sections: HashMap<String, Vec<(usize, String, String)>> = HashMap::new();
    let mut current: Option<String> = None;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.to_owned());
            continue;
        }
        let Some(section) = &current else {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: lineno,
                message: "row outside of a section".into(),
            });
        };
        let (id, values) = line.split_once('\t').ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: lineno,
            message: "expected `id<TAB>values`".into(),
        })?;
        sections.entry(section.clone()).or_default().push((
            lineno,
            id.to_owned(),
            values.to_owned(),
        ));
    }

    let mut rows_by_label = |section: &str, row_dim: usize| -> Result<HashMap<String, Vec<f64>>> {
        let mut out = HashMap::new();
        for (lineno, id, values) in sections.remove(section).unwrap_or_default() {
            out.insert(id, parse_values(path, lineno, &values, row_dim)?);
        }
        Ok(out)
    };
    let entity_rows = rows_by_label("entities", dim)?;
    let relation_rows = rows_by_label("relations", dim)?;

    let mut entities = Vec::with_capacity(graph.num_entities() * dim);
    for e in graph.entities() {
        let label = graph.entity_label(e);
        let row = entity_rows
            .get(label)
            .ok_or_else(|| Error::MissingEmbedding(format!("entity `{label}`")))?;
        entities.extend_from_slice(row);
    }
    let mut relations = Vec::with_capacity(graph.num_relations() * dim);
    for r in graph.relations() {
        let label = graph.relation_label(r);
        let row = relation_rows
            .get(label)
            .ok_or_else(|| Error::MissingEmbedding(format!("relation `{label}`")))?;
        relations.extend_from_slice(row);
    }
    if entity_rows.len() > graph.num_entities() {
        log::warn!(
            "{}: {} entity rows not present in the graph",
            path.display(),
            entity_rows.len() - graph.num_entities()
        );
    }

    let conve = match (kind, &header.conve) {
        (ModelKind::ConvE, Some(shape)) => {
            let (rows, cols) = match (shape.rows, shape.cols) {
                (Some(r), Some(c)) => (r, c),
                _ => default_reshape(dim),
            };
            let mut params = ConvEParams {
                rows,
                cols,
                filter_rows: shape.filter_rows,
                filter_cols: shape.filter_cols,
                num_filters: shape.num_filters,
                filters: Vec::new(),
                projection: Vec::new(),
            };
            let per = params.filter_rows * params.filter_cols;
            params.filters = ordered_rows(
                path,
                rows_by_label("conve.filters", per)?,
                params.num_filters,
                "conve.filters",
            )?;
            params.projection = ordered_rows(
                path,
                rows_by_label("conve.projection", dim)?,
                params.feature_len(),
                "conve.projection",
            )?;
            Some(params)
        }
        (ModelKind::ConvE, None) => {
            return Err(Error::Config(
                "ConvE file header lacks `conve` shape".into(),
            ))
        }
        _ => None,
    };
    EmbeddingStore::new(kind, dim, entities, relations, conve)
}

fn ordered_rows(
    path: &Path,
    mut rows: HashMap<String, Vec<f64>>,
    count: usize,
    section: &str,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..count {
        let row = rows.remove(&i.to_string()).ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: 0,
            message: format!("section [{section}] lacks row {i}"),
        })?;
        out.extend(row);
    }
    Ok(out)
}
