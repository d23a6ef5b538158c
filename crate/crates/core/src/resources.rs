//! Support resource catalog served on the dashboard.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResourceCategory {
    Campus,
    Crisis,
    SelfGuided,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportResource {
    pub title: String,
    pub description: String,
    pub url: String,
    pub category: ResourceCategory,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read resource catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed resource catalog: {0}")]
    Format(#[from] serde_json::Error),
}

const DEFAULT_CATALOG: &str = include_str!("../templates/resources.json");

/// Resource list with crisis entries guaranteed present.
#[derive(Debug, Clone)]
pub struct ResourceCatalog {
    entries: Vec<SupportResource>,
}

impl Default for ResourceCatalog {
    fn default() -> Self {
        Self::from_json(DEFAULT_CATALOG).expect("bundled catalog parses")
    }
}

impl ResourceCatalog {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let entries: Vec<SupportResource> = serde_json::from_str(text)?;
        Ok(Self::with_entries(entries))
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Builds a catalog; if the list has no crisis entries the bundled ones
    /// are placed first.
    pub fn with_entries(mut entries: Vec<SupportResource>) -> Self {
        if !entries.iter().any(|e| e.category == ResourceCategory::Crisis) {
            let defaults: Vec<SupportResource> =
                serde_json::from_str(DEFAULT_CATALOG).expect("bundled catalog parses");
            let crisis = defaults.into_iter().filter(|e| e.category == ResourceCategory::Crisis);
            entries.splice(0..0, crisis);
        }
        Self { entries }
    }

    pub fn entries(&self) -> &[SupportResource] {
        &self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_has_all_categories() {
        let c = ResourceCatalog::default();
        for cat in [ResourceCategory::Campus, ResourceCategory::Crisis, ResourceCategory::SelfGuided] {
            assert!(c.entries().iter().any(|e| e.category == cat));
        }
    }

    #[test]
    fn crisis_entries_reinstated() {
        let c = ResourceCatalog::from_json(
            r#"[{"title":"Counseling Center","description":"Walk-in hours","url":"https://example.edu/cc","category":"campus"}]"#,
        )
        .unwrap();
        assert_eq!(c.entries()[0].category, ResourceCategory::Crisis);
        assert_eq!(c.entries().last().unwrap().title, "Counseling Center");
    }

    #[test]
    fn bad_category_rejected() {
        assert!(ResourceCatalog::from_json(r#"[{"title":"x","description":"y","url":"z","category":"other"}]"#).is_err());
    }
}
