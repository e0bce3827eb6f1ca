//! Entity/relation extraction per chunk and duplicate-concept merging.

use std::collections::BTreeMap;

use super::{Entity, EntityKind, GraphError, Relation};
use crate::gateway::{Bindings, Gateway, OutputSchema};
use crate::ingest::{AcronymTable, Chunk};

/// One chunk's extraction result; entity ids are chunk-local (`e0`, `e1`, …)
/// until the graph builder shifts them onto the global sequence.
#[derive(Debug, Clone)]
pub struct ExtractionOutcome {
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub dangling_dropped: usize,
}

/// Extract entities and relations from one chunk via the gateway.
///
/// Relation endpoints must name extracted entities; dangling endpoints are
/// dropped with a warning. Entity kinds outside the four-element set are a
/// schema violation and surface as a gateway error.
pub fn extract_elements(
    chunk: &Chunk,
    acronyms: &AcronymTable,
    gateway: &Gateway,
) -> Result<ExtractionOutcome, GraphError> {
    let mut bindings = Bindings::new();
    bindings.insert("chunk".to_string(), chunk.text.clone());
    bindings.insert("acronyms".to_string(), acronyms.render());
    let prompt = gateway.render("element_extract", &bindings)?;
    let value = gateway.complete_structured(&prompt, &OutputSchema::graph_fragment())?;

    let mut entities: Vec<Entity> = Vec::new();
    let mut by_label: BTreeMap<String, String> = BTreeMap::new();
    for item in value["entities"].as_array().into_iter().flatten() {
        let label = item["name"].as_str().unwrap_or_default().trim().to_string();
        if label.is_empty() || by_label.contains_key(&label) {
            continue;
        }
        let kind = EntityKind::parse(item["kind"].as_str().unwrap_or_default())
            .expect("kind validated by schema");
        let entity_id = format!("e{}", entities.len());
        by_label.insert(label.clone(), entity_id.clone());
        entities.push(Entity {
            entity_id,
            kind,
            label,
            description: item["description"].as_str().unwrap_or_default().to_string(),
            source_chunk_ids: vec![chunk.chunk_id.clone()],
            merged_from: Vec::new(),
        });
    }

    let mut relations = Vec::new();
    let mut dangling_dropped = 0;
    for item in value["relations"].as_array().into_iter().flatten() {
        let source = item["source"].as_str().unwrap_or_default().trim();
        let target = item["target"].as_str().unwrap_or_default().trim();
        match (by_label.get(source), by_label.get(target)) {
            (Some(source_id), Some(target_id)) if source_id != target_id => {
                let weight = item["weight"].as_f64().filter(|w| *w > 0.0).unwrap_or(1.0);
                relations.push(Relation {
                    source: source_id.clone(),
                    target: target_id.clone(),
                    kind: item["kind"].as_str().unwrap_or_default().to_string(),
                    description: item["description"].as_str().unwrap_or_default().to_string(),
                    weight,
                });
            }
            _ => {
                dangling_dropped += 1;
                log::warn!(
                    "chunk {}: dropping relation {source} -> {target} (unknown endpoint or self-loop)",
                    chunk.chunk_id
                );
            }
        }
    }
    Ok(ExtractionOutcome {
        entities,
        relations,
        dangling_dropped,
    })
}

/// Result of [`merge_concepts`].
#[derive(Debug, Clone)]
pub struct MergeOutcome {
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
    pub merges_rejected: usize,
}

/// Merge entities naming the same concept, re-pointing every relation to the
/// merge representative. Self-loops produced by merging are dropped; parallel
/// edges between the same pair with the same kind combine by summing weights.
/// Cross-kind merge proposals are rejected and logged.
pub fn merge_concepts(
    entities: Vec<Entity>,
    relations: Vec<Relation>,
    acronyms: &AcronymTable,
    gateway: &Gateway,
) -> Result<MergeOutcome, GraphError> {
    if entities.is_empty() {
        return Ok(MergeOutcome {
            entities,
            relations,
            merges_rejected: 0,
        });
    }
    let listing = entities
        .iter()
        .map(|e| format!("{} [{}] {}", e.entity_id, e.kind.as_str(), e.label))
        .collect::<Vec<_>>()
        .join("\n");
    let mut bindings = Bindings::new();
    bindings.insert("entities".to_string(), listing);
    bindings.insert("acronyms".to_string(), acronyms.render());
    let prompt = gateway.render("concept_merge", &bindings)?;
    let value = gateway.complete_structured(&prompt, &OutputSchema::merge_proposal())?;

    let groups = value["merges"].as_array().cloned().unwrap_or_default();
    if groups.is_empty() {
        return Ok(MergeOutcome {
            entities,
            relations,
            merges_rejected: 0,
        });
    }

    // Proposals may reference entities by id or by label.
    let mut resolve: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, e) in entities.iter().enumerate() {
        resolve.entry(e.entity_id.clone()).or_default().push(i);
        resolve.entry(e.label.clone()).or_default().push(i);
    }

    let mut representative: Vec<usize> = (0..entities.len()).collect();
    let mut merges_rejected = 0;
    for group in &groups {
        let canonical = group["canonical"].as_str().unwrap_or_default().trim();
        let mut member_indices: Vec<usize> = Vec::new();
        for name in std::iter::once(canonical).chain(
            group["members"]
                .as_array()
                .into_iter()
                .flatten()
                .filter_map(|v| v.as_str()),
        ) {
            if let Some(indices) = resolve.get(name.trim()) {
                member_indices.extend(indices.iter().copied());
            }
        }
        member_indices.sort_unstable();
        member_indices.dedup();
        if member_indices.len() < 2 {
            continue;
        }
        let kind = entities[member_indices[0]].kind;
        if member_indices.iter().any(|&i| entities[i].kind != kind) {
            merges_rejected += 1;
            log::warn!("rejecting cross-kind merge proposal around \"{canonical}\"");
            continue;
        }
        let canonical_index = resolve
            .get(canonical)
            .and_then(|indices| indices.iter().copied().find(|i| member_indices.contains(i)))
            .unwrap_or(member_indices[0]);
        for &i in &member_indices {
            if representative[i] == i {
                representative[i] = canonical_index;
            }
        }
        representative[canonical_index] = canonical_index;
    }

    // Collapse chains (a→b→c) so every entity points at a surviving root.
    for i in 0..representative.len() {
        let mut root = i;
        let mut hops = 0;
        while representative[root] != root && hops <= representative.len() {
            root = representative[root];
            hops += 1;
        }
        representative[i] = root;
    }

    let mut merged_entities: Vec<Entity> = Vec::new();
    let mut id_of_root: BTreeMap<usize, String> = BTreeMap::new();
    for (i, entity) in entities.iter().enumerate() {
        if representative[i] != i {
            continue;
        }
        let mut survivor = entity.clone();
        for (j, other) in entities.iter().enumerate() {
            if j != i && representative[j] == i {
                survivor.merged_from.push(other.entity_id.clone());
                for chunk_id in &other.source_chunk_ids {
                    if !survivor.source_chunk_ids.contains(chunk_id) {
                        survivor.source_chunk_ids.push(chunk_id.clone());
                    }
                }
            }
        }
        id_of_root.insert(i, survivor.entity_id.clone());
        merged_entities.push(survivor);
    }

    let old_to_new: BTreeMap<&str, &str> = entities
        .iter()
        .enumerate()
        .map(|(i, e)| (e.entity_id.as_str(), id_of_root[&representative[i]].as_str()))
        .collect();

    let mut combined: BTreeMap<(String, String, String), Relation> = BTreeMap::new();
    for relation in &relations {
        let source = old_to_new[relation.source.as_str()].to_string();
        let target = old_to_new[relation.target.as_str()].to_string();
        if source == target {
            continue; // merge produced a self-loop
        }
        let (a, b) = if source <= target {
            (source.clone(), target.clone())
        } else {
            (target.clone(), source.clone())
        };
        combined
            .entry((a, b, relation.kind.clone()))
            .and_modify(|existing| existing.weight += relation.weight)
            .or_insert_with(|| Relation {
                source,
                target,
                kind: relation.kind.clone(),
                description: relation.description.clone(),
                weight: relation.weight,
            });
    }
    Ok(MergeOutcome {
        entities: merged_entities,
        relations: combined.into_values().collect(),
        merges_rejected,
    })
}
