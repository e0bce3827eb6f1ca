//! Acronym extraction over the title/abstract/introduction span.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{IngestError, Manuscript};
use crate::gateway::{Bindings, Gateway, OutputSchema};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AcronymTable {
    pub entries: BTreeMap<String, String>,
}

impl AcronymTable {
    /// Plain-text rendering used inside prompts.
    pub fn render(&self) -> String {
        if self.entries.is_empty() {
            return "(none)".to_string();
        }
        self.entries
            .iter()
            .map(|(acronym, expansion)| format!("{acronym} = {expansion}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Ask the gateway for acronym definitions in the title/abstract/introduction
/// span, keeping only entries whose expansion appears verbatim in that span.
pub fn extract_acronyms(m: &Manuscript, gateway: &Gateway) -> Result<AcronymTable, IngestError> {
    let span = scanned_span(m);
    let mut bindings = Bindings::new();
    bindings.insert("span".to_string(), span.clone());
    let prompt = gateway.render("acronym_extract", &bindings)?;
    let value = gateway.complete_structured(&prompt, &OutputSchema::acronym_table())?;

    let mut entries = BTreeMap::new();
    for item in value["acronyms"].as_array().into_iter().flatten() {
        let acronym = item["acronym"].as_str().unwrap_or_default().trim();
        let expansion = item["expansion"].as_str().unwrap_or_default().trim();
        if acronym.is_empty() || expansion.is_empty() {
            continue;
        }
        if !span.contains(expansion) {
            log::warn!(
                "manuscript {}: dropping acronym {acronym} — expansion not found in scanned span",
                m.id
            );
            continue;
        }
        entries.insert(acronym.to_string(), expansion.to_string());
    }
    Ok(AcronymTable { entries })
}

fn scanned_span(m: &Manuscript) -> String {
    let introduction = m.introduction().map(|s| s.body.as_str()).unwrap_or_default();
    format!("{}\n{}\n{}", m.title, m.abstract_text, introduction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{fixture_line, GatewayConfig, ScriptedBackend};
    use crate::ingest::parse_manuscript;

    fn gateway_for(markdown: &str, id: &str, response: serde_json::Value) -> (Manuscript, Gateway) {
        let m = parse_manuscript(markdown, id, 2023, 1200).unwrap();
        let mut bindings = Bindings::new();
        bindings.insert("span".to_string(), scanned_span(&m));
        let line = fixture_line("acronym_extract", Some(&bindings), response);
        let backend = ScriptedBackend::from_fixture_lines(std::iter::once(line.as_str()), 8).unwrap();
        (m, Gateway::scripted(backend, None, GatewayConfig::default()))
    }

    #[test]
    fn verified_acronym_kept() {
        let markdown = "# T\n\n## Introduction\n\nGraph Neural Network (GNN) models are studied.\n";
        let (m, gw) = gateway_for(
            markdown,
            "a1",
            serde_json::json!({"acronyms": [{"acronym": "GNN", "expansion": "Graph Neural Network"}]}),
        );
        let table = extract_acronyms(&m, &gw).unwrap();
        assert_eq!(table.entries.get("GNN").map(String::as_str), Some("Graph Neural Network"));
    }

    #[test]
    fn hallucinated_expansion_dropped() {
        let markdown = "# T\n\n## Introduction\n\nNothing defines acronyms here.\n";
        let (m, gw) = gateway_for(
            markdown,
            "a2",
            serde_json::json!({"acronyms": [{"acronym": "LLM", "expansion": "Large Language Model"}]}),
        );
        let table = extract_acronyms(&m, &gw).unwrap();
        assert!(table.entries.is_empty());
    }

    #[test]
    fn empty_fixture_gives_empty_table() {
        let markdown = "# T\n\n## Introduction\n\nPlain prose only.\n";
        let (m, gw) = gateway_for(markdown, "a3", serde_json::json!({"acronyms": []}));
        let table = extract_acronyms(&m, &gw).unwrap();
        assert!(table.entries.is_empty());
        assert_eq!(table.render(), "(none)");
    }

    #[test]
    fn render_lists_entries_sorted() {
        let mut table = AcronymTable::default();
        table.entries.insert("GNN".into(), "Graph Neural Network".into());
        table.entries.insert("BT".into(), "Bradley-Terry".into());
        assert_eq!(table.render(), "BT = Bradley-Terry\nGNN = Graph Neural Network");
    }
}
