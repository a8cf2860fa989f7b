//! Knowledge graph storage: interned identifiers, train/valid/test splits and
//! per-entity adjacency.
//!
//! Entity and relation labels are interned to dense `u32` ids at load time.
//! A [`KnowledgeGraph`] is immutable once built; [`KnowledgeGraph::remove_triples`]
//! returns a new graph that shares the unchanged splits and the label tables
//! with the original.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A `(head, relation, tail)` fact over interned ids.
///
/// The derived ordering is lexicographic over the interned ids and is used
/// as the deterministic tie-breaker throughout the crate.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    fn slot(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.txt",
            Split::Valid => "valid.txt",
            Split::Test => "test.txt",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Outgoing,
    Incoming,
}

/// One adjacency entry seen from a given entity.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Neighbor {
    pub relation: RelationId,
    pub neighbor: EntityId,
    pub direction: Direction,
}

impl Neighbor {
    /// The underlying triple, given the entity this entry was listed under.
    pub fn triple_from(&self, origin: EntityId) -> Triple {
        match self.direction {
            Direction::Outgoing => Triple::new(origin, self.relation, self.neighbor),
            Direction::Incoming => Triple::new(self.neighbor, self.relation, origin),
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Labels {
    entities: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_index: HashMap<String, RelationId>,
}

impl Labels {
    fn entity(&mut self, label: &str) -> EntityId {
        if let Some(&id) = self.entity_index.get(label) {
            return id;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(label.to_owned());
        self.entity_index.insert(label.to_owned(), id);
        id
    }

    fn relation(&mut self, label: &str) -> RelationId {
        if let Some(&id) = self.relation_index.get(label) {
            return id;
        }
        let id = RelationId(self.relations.len() as u32);
        self.relations.push(label.to_owned());
        self.relation_index.insert(label.to_owned(), id);
        id
    }
}

#[derive(Debug)]
struct SplitData {
    triples: Vec<Triple>,
    members: HashSet<Triple>,
    adjacency: Vec<Vec<Neighbor>>,
}

impl SplitData {
    fn new(triples: BTreeSet<Triple>, n_entities: usize) -> Self {
        let triples: Vec<Triple> = triples.into_iter().collect();
        let members = triples.iter().copied().collect();
        let mut adjacency = vec![Vec::new(); n_entities];
        for t in &triples {
            adjacency[t.head.index()].push(Neighbor {
                relation: t.relation,
                neighbor: t.tail,
                direction: Direction::Outgoing,
            });
            adjacency[t.tail.index()].push(Neighbor {
                relation: t.relation,
                neighbor: t.head,
                direction: Direction::Incoming,
            });
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self {
            triples,
            members,
            adjacency,
        }
    }
}

/// Incremental loader; interns labels and deduplicates triples per split.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    labels: Labels,
    splits: [BTreeSet<Triple>; 3],
    duplicates_within_split: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one fact; returns `false` if it was already present in `split`.
    pub fn add(&mut self, head: &str, relation: &str, tail: &str, split: Split) -> bool {
        let t = Triple::new(
            self.labels.entity(head),
            self.labels.relation(relation),
            self.labels.entity(tail),
        );
        let inserted = self.splits[split.slot()].insert(t);
        if !inserted {
            self.duplicates_within_split += 1;
        }
        inserted
    }

    /// Reads a `head<TAB>relation<TAB>tail` file into `split`.
    pub fn load_triples(&mut self, path: impl AsRef<Path>, split: Split) -> Result<&mut Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    message: format!(
                        "expected `head<TAB>relation<TAB>tail`, found {} field(s)",
                        fields.len()
                    ),
                });
            }
            self.add(fields[0], fields[1], fields[2], split);
        }
        Ok(self)
    }

    pub fn build(self) -> KnowledgeGraph {
        let n = self.labels.entities.len();
        let [train, valid, test] = self.splits;
        let mut cross = 0;
        let train_set: &BTreeSet<Triple> = &train;
        for t in valid.iter().chain(test.iter()) {
            if train_set.contains(t) {
                cross += 1;
            }
        }
        cross += valid.intersection(&test).count();
        KnowledgeGraph {
            labels: Arc::new(self.labels),
            splits: [
                Arc::new(SplitData::new(train, n)),
                Arc::new(SplitData::new(valid, n)),
                Arc::new(SplitData::new(test, n)),
            ],
            duplicates_within_split: self.duplicates_within_split,
            duplicates_across_splits: cross,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    labels: Arc<Labels>,
    splits: [Arc<SplitData>; 3],
    duplicates_within_split: usize,
    duplicates_across_splits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub triples: usize,
    pub duplicates_within_split: usize,
    pub duplicates_across_splits: usize,
}

impl KnowledgeGraph {
    /// Loads `train.txt`, `valid.txt` and `test.txt` from a dataset directory.
    /// Missing valid/test files are treated as empty splits.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut builder = GraphBuilder::new();
        builder.load_triples(dir.join(Split::Train.file_name()), Split::Train)?;
        for split in [Split::Valid, Split::Test] {
            let path = dir.join(split.file_name());
            if path.exists() {
                builder.load_triples(path, split)?;
            }
        }
        Ok(builder.build())
    }

    pub fn num_entities(&self) -> usize {
        self.labels.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.labels.relations.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.num_entities() as u32).map(EntityId)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        (0..self.num_relations() as u32).map(RelationId)
    }

    /// Triples of one split, sorted by interned id.
    pub fn split(&self, split: Split) -> &[Triple] {
        &self.splits[split.slot()].triples
    }

    pub fn train(&self) -> &[Triple] {
        self.split(Split::Train)
    }

    pub fn valid(&self) -> &[Triple] {
        self.split(Split::Valid)
    }

    pub fn test(&self) -> &[Triple] {
        self.split(Split::Test)
    }

    /// Membership over all splits.
    pub fn contains(&self, triple: &Triple) -> bool {
        self.splits.iter().any(|s| s.members.contains(triple))
    }

    pub fn contains_in(&self, triple: &Triple, split: Split) -> bool {
        self.splits[split.slot()].members.contains(triple)
    }

    /// All adjacency entries of `entity` across every split, each tagged
    /// with its direction.
    pub fn neighbors_of(&self, entity: EntityId) -> Result<Vec<Neighbor>> {
        self.check_entity(entity)?;
        let mut out: Vec<Neighbor> = Split::ALL
            .iter()
            .flat_map(|&s| {
                self.splits[s.slot()].adjacency[entity.index()]
                    .iter()
                    .copied()
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Adjacency restricted to one split, sorted by `(relation, neighbor, direction)`.
    pub fn neighbors_in(&self, entity: EntityId, split: Split) -> &[Neighbor] {
        &self.splits[split.slot()].adjacency[entity.index()]
    }

    pub fn train_neighbors(&self, entity: EntityId) -> &[Neighbor] {
        self.neighbors_in(entity, Split::Train)
    }

    /// Number of train-split adjacency entries (in + out) of `entity`.
    pub fn train_degree(&self, entity: EntityId) -> usize {
        self.train_neighbors(entity).len()
    }

    fn check_entity(&self, entity: EntityId) -> Result<()> {
        if entity.index() < self.num_entities() {
            Ok(())
        } else {
            Err(Error::UnknownEntity(format!("#{}", entity.0)))
        }
    }

    pub fn entity_label(&self, id: EntityId) -> &str {
        &self.labels.entities[id.index()]
    }

    pub fn relation_label(&self, id: RelationId) -> &str {
        &self.labels.relations[id.index()]
    }

    pub fn entity_id(&self, label: &str) -> Result<EntityId> {
        self.labels
            .entity_index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownEntity(label.to_owned()))
    }

    pub fn relation_id(&self, label: &str) -> Result<RelationId> {
        self.labels
            .relation_index
            .get(label)
            .copied()
            .ok_or_else(|| Error::UnknownRelation(label.to_owned()))
    }

    pub fn triple(&self, head: &str, relation: &str, tail: &str) -> Result<Triple> {
        Ok(Triple::new(
            self.entity_id(head)?,
            self.relation_id(relation)?,
            self.entity_id(tail)?,
        ))
    }

    /// Parses `head relation tail` separated by tabs or whitespace.
    pub fn parse_triple(&self, text: &str) -> Result<Triple> {
        let fields: Vec<&str> = if text.contains('\t') {
            text.trim().split('\t').collect()
        } else {
            text.split_whitespace().collect()
        };
        match fields.as_slice() {
            [h, r, t] => self.triple(h.trim(), r.trim(), t.trim()),
            _ => Err(Error::Config(format!(
                "cannot parse triple `{text}`: expected three fields"
            ))),
        }
    }

    pub fn display(&self, triple: &Triple) -> TripleDisplay<'_> {
        TripleDisplay {
            graph: self,
            triple: *triple,
        }
    }

    pub fn labels_of(&self, triple: &Triple) -> [&str; 3] {
        [
            self.entity_label(triple.head),
            self.relation_label(triple.relation),
            self.entity_label(triple.tail),
        ]
    }

    /// Returns a copy whose train split no longer holds `removal`.
    /// Valid/test splits and label tables are shared with `self`.
    pub fn remove_triples(&self, removal: &BTreeSet<Triple>) -> Result<KnowledgeGraph> {
        if removal.is_empty() {
            return Ok(self.clone());
        }
        let train = &self.splits[Split::Train.slot()];
        if let Some(missing) = removal.iter().find(|t| !train.members.contains(t)) {
            return Err(Error::NotInTrain(self.display(missing).to_string()));
        }
        let kept: BTreeSet<Triple> = train
            .triples
            .iter()
            .filter(|t| !removal.contains(t))
            .copied()
            .collect();
        let mut out = self.clone();
        out.splits[Split::Train.slot()] = Arc::new(SplitData::new(kept, self.num_entities()));
        Ok(out)
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            entities: self.num_entities(),
            relations: self.num_relations(),
            train: self.train().len(),
            valid: self.valid().len(),
            test: self.test().len(),
            triples: self.train().len() + self.valid().len() + self.test().len(),
            duplicates_within_split: self.duplicates_within_split,
            duplicates_across_splits: self.duplicates_across_splits,
        }
    }

    pub fn duplicates_within_split(&self) -> usize {
        self.duplicates_within_split
    }

    pub fn write_split(&self, split: Split, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for t in self.split(split) {
            let [h, r, tl] = self.labels_of(t);
            out.push_str(h);
            out.push('\t');
            out.push_str(r);
            out.push('\t');
            out.push_str(tl);
            out.push('\n');
        }
        fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }

    /// Writes all three splits into `dir` using the standard file names.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for split in Split::ALL {
            self.write_split(split, dir.join(split.file_name()))?;
        }
        Ok(())
    }
}

pub struct TripleDisplay<'a> {
    graph: &'a KnowledgeGraph,
    triple: Triple,
}

impl fmt::Display for TripleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [h, r, t] = self.graph.labels_of(&self.triple);
        write!(f, "{h}, {r}, {t}")
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassId(pub u32);

pub const HEAD_ROLE: &str = "Head";
pub const TAIL_ROLE: &str = "Tail";

/// Total map from entities to classes. The anchor roles `Head` and `Tail`
/// are not classes and can never be assigned through a schema file.
#[derive(Debug, Clone)]
pub struct SchemaMap {
    classes: Vec<String>,
    class_index: HashMap<String, ClassId>,
    class_of: Vec<ClassId>,
    /// Entries naming entities that the graph does not know about.
    unknown_entities: BTreeMap<String, ClassId>,
}

impl SchemaMap {
    /// Every entity maps to `default_class`.
    pub fn uniform(graph: &KnowledgeGraph, default_class: &str) -> Result<Self> {
        Self::from_pairs(graph, default_class, std::iter::empty::<(&str, &str)>())
    }

    pub fn from_pairs<'a>(
        graph: &KnowledgeGraph,
        default_class: &str,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut schema = SchemaMap {
            classes: Vec::new(),
            class_index: HashMap::new(),
            class_of: Vec::new(),
            unknown_entities: BTreeMap::new(),
        };
        let default = schema.intern(default_class)?;
        schema.class_of = vec![default; graph.num_entities()];
        for (entity, class) in pairs {
            let class = schema.intern(class)?;
            match graph.entity_id(entity) {
                Ok(id) => schema.class_of[id.index()] = class,
                Err(_) => {
                    log::warn!("schema entry for unknown entity `{entity}`");
                    schema.unknown_entities.insert(entity.to_owned(), class);
                }
            }
        }
        Ok(schema)
    }

    /// Loads an `entity<TAB>class` file. A missing file yields the uniform map.
    pub fn load(path: Option<&Path>, graph: &KnowledgeGraph, default_class: &str) -> Result<Self> {
        let path = match path {
            Some(p) if p.exists() => p,
            _ => return Self::uniform(graph, default_class),
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    message: "expected `entity<TAB>class`".into(),
                });
            }
            pairs.push((fields[0].trim(), fields[1].trim()));
        }
        Self::from_pairs(graph, default_class, pairs)
    }

    fn intern(&mut self, class: &str) -> Result<ClassId> {
        if class == HEAD_ROLE || class == TAIL_ROLE {
            return Err(Error::ReservedClass(class.to_owned()));
        }
        if let Some(&id) = self.class_index.get(class) {
            return Ok(id);
        }
        let id = ClassId(self.classes.len() as u32);
        self.classes.push(class.to_owned());
        self.class_index.insert(class.to_owned(), id);
        Ok(id)
    }

    pub fn class_of(&self, entity: EntityId) -> ClassId {
        self.class_of[entity.index()]
    }

    pub fn class_label(&self, class: ClassId) -> &str {
        &self.classes[class.0 as usize]
    }

    pub fn class_id(&self, label: &str) -> Option<ClassId> {
        self.class_index.get(label).copied()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn unknown_entities(&self) -> &BTreeMap<String, ClassId> {
        &self.unknown_entities
    }
}
