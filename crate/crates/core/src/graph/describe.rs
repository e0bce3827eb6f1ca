//! Community descriptor generation.

use super::{Descriptor, GraphError, PaperGraph};
use crate::gateway::{Bindings, Gateway, OutputSchema};
use crate::ingest::AcronymTable;

/// Produce the report-like descriptor of one community.
pub fn describe_community(
    graph: &PaperGraph,
    community_id: u32,
    members: &[String],
    acronyms: &AcronymTable,
    gateway: &Gateway,
) -> Result<Descriptor, GraphError> {
    if members.is_empty() {
        return Err(GraphError::EmptyCommunity(community_id));
    }
    let member_lines = members
        .iter()
        .filter_map(|id| graph.entity(id))
        .map(|e| {
            if e.description.is_empty() {
                format!("{} [{}] {}", e.entity_id, e.kind.as_str(), e.label)
            } else {
                format!("{} [{}] {} — {}", e.entity_id, e.kind.as_str(), e.label, e.description)
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    let relation_lines = graph
        .relations
        .iter()
        .filter(|r| members.contains(&r.source) && members.contains(&r.target))
        .map(|r| {
            let source = graph.entity(&r.source).map(|e| e.label.as_str()).unwrap_or(&r.source);
            let target = graph.entity(&r.target).map(|e| e.label.as_str()).unwrap_or(&r.target);
            if r.description.is_empty() {
                format!("{source} --{}--> {target}", r.kind)
            } else {
                format!("{source} --{}--> {target} ({})", r.kind, r.description)
            }
        })
        .collect::<Vec<_>>()
        .join("\n");

    let mut bindings = Bindings::new();
    bindings.insert("members".to_string(), member_lines);
    bindings.insert(
        "relations".to_string(),
        if relation_lines.is_empty() {
            "(none)".to_string()
        } else {
            relation_lines
        },
    );
    bindings.insert("acronyms".to_string(), acronyms.render());
    let prompt = gateway.render("community_summary", &bindings)?;
    let value = gateway.complete_structured(&prompt, &OutputSchema::community_summary())?;
    Ok(Descriptor {
        community_id,
        text: value["summary"].as_str().unwrap_or_default().to_string(),
        member_entity_ids: members.to_vec(),
        embedding: None,
    })
}
