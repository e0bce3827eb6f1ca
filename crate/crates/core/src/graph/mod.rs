//! Knowledge-graph representation of one manuscript.
//!
//! A paper graph holds typed entities extracted per chunk, merged for
//! redundancy, partitioned into communities by modularity optimization, and
//! summarized by per-community descriptors. Graphs are treated as undirected
//! and weighted for community detection; relation direction survives only in
//! rendered prompt text.

mod describe;
mod extract;
mod leiden;
mod modularity;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use describe::describe_community;
pub use extract::{extract_elements, merge_concepts, ExtractionOutcome};
pub use leiden::{detect_communities, LeidenConfig};
pub use modularity::{modularity, WeightedGraph};

use crate::gateway::{EmbeddingVector, Gateway};
use crate::ingest::{AcronymTable, Manuscript};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("community {0} is empty")]
    EmptyCommunity(u32),
    #[error("entity {0} not found")]
    UnknownEntity(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
    #[error(transparent)]
    Gateway(#[from] crate::gateway::GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Idea,
    Claim,
    TechnicalDetail,
    Evidence,
}

impl EntityKind {
    pub fn parse(raw: &str) -> Option<Self> {
        match raw {
            "idea" => Some(Self::Idea),
            "claim" => Some(Self::Claim),
            "technical_detail" => Some(Self::TechnicalDetail),
            "evidence" => Some(Self::Evidence),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Idea => "idea",
            Self::Claim => "claim",
            Self::TechnicalDetail => "technical_detail",
            Self::Evidence => "evidence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_id: String,
    pub kind: EntityKind,
    pub label: String,
    pub description: String,
    pub source_chunk_ids: Vec<String>,
    pub merged_from: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub source: String,
    pub target: String,
    pub kind: String,
    pub description: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub community_id: u32,
    pub text: String,
    pub member_entity_ids: Vec<String>,
    pub embedding: Option<EmbeddingVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperGraph {
    pub paper_id: String,
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub partition: BTreeMap<String, u32>,
    pub descriptors: BTreeMap<u32, Descriptor>,
}

impl PaperGraph {
    pub fn entity(&self, entity_id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.entity_id == entity_id)
    }

    /// Entity ids grouped by community, communities and members sorted.
    pub fn communities(&self) -> BTreeMap<u32, Vec<String>> {
        let mut map: BTreeMap<u32, Vec<String>> = BTreeMap::new();
        for (entity_id, community) in &self.partition {
            map.entry(*community).or_default().push(entity_id.clone());
        }
        map
    }

    /// Undirected weighted view for community detection. Entities are indexed
    /// in their stored order; self-loops never occur (dropped at merge time).
    pub fn weighted_view(&self) -> (WeightedGraph, Vec<String>) {
        let ids: Vec<String> = self.entities.iter().map(|e| e.entity_id.clone()).collect();
        let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut graph = WeightedGraph::new(ids.len());
        for relation in &self.relations {
            if let (Some(&a), Some(&b)) = (index.get(relation.source.as_str()), index.get(relation.target.as_str())) {
                graph.add_edge(a, b, relation.weight);
            }
        }
        (graph, ids)
    }

    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let content = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&content)?)
    }
}

/// Counters emitted by [`build_graph`] for observability.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub chunks_processed: usize,
    pub chunks_skipped: usize,
    pub entities_before_merge: usize,
    pub entities_after_merge: usize,
    pub relations_before_merge: usize,
    pub relations_after_merge: usize,
    pub dangling_relations_dropped: usize,
    pub merges_rejected: usize,
    pub community_count: usize,
}

/// Build the full graph for one manuscript: per-chunk extraction, concept
/// merging, community detection, and descriptor generation.
pub fn build_graph(
    m: &Manuscript,
    acronyms: &AcronymTable,
    gateway: &Gateway,
    leiden: &LeidenConfig,
) -> Result<(PaperGraph, BuildReport), GraphError> {
    let mut report = BuildReport::default();
    let mut entities: Vec<Entity> = Vec::new();
    let mut relations: Vec<Relation> = Vec::new();

    // Extraction calls are independent; results are consumed in chunk order
    // so entity ids stay stable regardless of scheduling.
    let outcomes: Vec<Option<ExtractionOutcome>> = {
        use rayon::prelude::*;
        m.chunks
            .par_iter()
            .map(|chunk| match extract_elements(chunk, acronyms, gateway) {
                Ok(outcome) => Some(outcome),
                Err(e) => {
                    log::warn!("chunk {} skipped: {e}", chunk.chunk_id);
                    None
                }
            })
            .collect()
    };
    for outcome in outcomes {
        match outcome {
            Some(mut outcome) => {
                report.chunks_processed += 1;
                report.dangling_relations_dropped += outcome.dangling_dropped;
                reid_fragment(&mut outcome, entities.len());
                entities.extend(outcome.entities);
                relations.extend(outcome.relations);
            }
            None => report.chunks_skipped += 1,
        }
    }
    report.entities_before_merge = entities.len();
    report.relations_before_merge = relations.len();

    let merged = merge_concepts(entities, relations, acronyms, gateway)?;
    report.merges_rejected = merged.merges_rejected;
    let (entities, relations) = (merged.entities, merged.relations);
    report.entities_after_merge = entities.len();
    report.relations_after_merge = relations.len();

    let mut graph = PaperGraph {
        paper_id: m.id.clone(),
        entities,
        relations,
        partition: BTreeMap::new(),
        descriptors: BTreeMap::new(),
    };

    let (view, ids) = graph.weighted_view();
    graph.partition = if view.total_weight() > 0.0 {
        let labels = detect_communities(&view, leiden)?;
        ids.iter().cloned().zip(labels.iter().map(|&c| c as u32)).collect()
    } else {
        // Edgeless graph: modularity is undefined, every entity stands alone.
        ids.iter().cloned().zip(0u32..).collect()
    };

    for (community_id, members) in graph.communities() {
        let descriptor = describe_community(&graph, community_id, &members, acronyms, gateway)?;
        graph.descriptors.insert(community_id, descriptor);
    }
    report.community_count = graph.descriptors.len();
    Ok((graph, report))
}

/// Shift a chunk-local extraction fragment onto the global id sequence.
fn reid_fragment(outcome: &mut ExtractionOutcome, offset: usize) {
    let remap: BTreeMap<String, String> = outcome
        .entities
        .iter()
        .enumerate()
        .map(|(i, e)| (e.entity_id.clone(), format!("e{}", offset + i)))
        .collect();
    for entity in &mut outcome.entities {
        entity.entity_id = remap[&entity.entity_id].clone();
    }
    for relation in &mut outcome.relations {
        relation.source = remap[&relation.source].clone();
        relation.target = remap[&relation.target].clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entity(id: &str, kind: EntityKind, label: &str) -> Entity {
        Entity {
            entity_id: id.to_string(),
            kind,
            label: label.to_string(),
            description: String::new(),
            source_chunk_ids: vec!["c0".to_string()],
            merged_from: Vec::new(),
        }
    }

    fn relation(source: &str, target: &str) -> Relation {
        Relation {
            source: source.to_string(),
            target: target.to_string(),
            kind: "supports".to_string(),
            description: String::new(),
            weight: 1.0,
        }
    }

    #[test]
    fn weighted_view_indexes_entities_in_order() {
        let graph = PaperGraph {
            paper_id: "p".into(),
            entities: vec![
                entity("e0", EntityKind::Idea, "a"),
                entity("e1", EntityKind::Claim, "b"),
                entity("e2", EntityKind::Evidence, "c"),
            ],
            relations: vec![relation("e0", "e1"), relation("e1", "e2")],
            partition: BTreeMap::new(),
            descriptors: BTreeMap::new(),
        };
        let (view, ids) = graph.weighted_view();
        assert_eq!(ids, vec!["e0", "e1", "e2"]);
        assert_eq!(view.node_count(), 3);
        assert_eq!(view.total_weight(), 2.0);
        assert_eq!(view.degree(1), 2.0);
    }

    #[test]
    fn save_load_roundtrip_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut graph = PaperGraph {
            paper_id: "p".into(),
            entities: vec![entity("e0", EntityKind::Idea, "a")],
            relations: vec![],
            partition: BTreeMap::from([("e0".to_string(), 0u32)]),
            descriptors: BTreeMap::new(),
        };
        graph.descriptors.insert(
            0,
            Descriptor {
                community_id: 0,
                text: "solo".into(),
                member_entity_ids: vec!["e0".into()],
                embedding: None,
            },
        );
        let path_a = dir.path().join("a.json");
        let path_b = dir.path().join("b.json");
        graph.save(&path_a).unwrap();
        let loaded = PaperGraph::load(&path_a).unwrap();
        assert_eq!(graph, loaded);
        loaded.save(&path_b).unwrap();
        assert_eq!(
            std::fs::read(&path_a).unwrap(),
            std::fs::read(&path_b).unwrap(),
            "serialization must be byte-stable"
        );
    }

    #[test]
    fn communities_group_partition() {
        let graph = PaperGraph {
            paper_id: "p".into(),
            entities: vec![
                entity("e0", EntityKind::Idea, "a"),
                entity("e1", EntityKind::Claim, "b"),
                entity("e2", EntityKind::Evidence, "c"),
            ],
            relations: vec![],
            partition: BTreeMap::from([
                ("e0".to_string(), 0u32),
                ("e1".to_string(), 1u32),
                ("e2".to_string(), 0u32),
            ]),
            descriptors: BTreeMap::new(),
        };
        let communities = graph.communities();
        assert_eq!(communities[&0], vec!["e0", "e2"]);
        assert_eq!(communities[&1], vec!["e1"]);
    }
}
