//! Label inventories and the compatibility maps that decide which
//! (event type, role, entity type) configurations are admissible.
//!
//! Every label set keeps `NONE` at index 0, so "lowest index" tie-breaks
//! elsewhere in the crate always prefer `NONE`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NONE: &str = "NONE";
pub const NONE_INDEX: usize = 0;

const BUNDLED_SCHEMA: &str = include_str!("../data/ace_schema.json");

/// An ordered label inventory with `NONE` at index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    fn from_file_order(kind: &str, labels: &[String]) -> Result<Self> {
        let none_count = labels.iter().filter(|l| l.as_str() == NONE).count();
        if none_count != 1 {
            return Err(Error::Schema(format!(
                "{kind} labels must contain NONE exactly once (found {none_count})"
            )));
        }
        let mut names = vec![NONE.to_string()];
        names.extend(labels.iter().filter(|l| l.as_str() != NONE).cloned());
        let mut index = HashMap::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::Schema(format!("empty {kind} label")));
            }
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::Schema(format!("duplicate {kind} label `{n}`")));
            }
        }
        Ok(Self { names, index })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Labels other than `NONE`, in schema order.
    pub fn non_none(&self) -> &[String] {
        &self.names[1..]
    }
}

/// On-disk form of the schema: a single JSON object with five fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaFile {
    pub event_types: Vec<String>,
    pub role_types: Vec<String>,
    pub entity_types: Vec<String>,
    #[serde(default)]
    pub event_roles: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub role_entities: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    pub event_types: LabelSet,
    pub role_types: LabelSet,
    pub entity_types: LabelSet,
    // Row-major compatibility masks.
    event_role: Vec<bool>,
    role_entity: Vec<bool>,
}

impl LabelSchema {
    /// The ACE-like schema compiled into the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_SCHEMA).expect("bundled schema is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SchemaFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("schema: {e}")))?;
        Self::from_file(&file)
    }

    pub fn from_file(file: &SchemaFile) -> Result<Self> {
        let event_types = LabelSet::from_file_order("event", &file.event_types)?;
        let role_types = LabelSet::from_file_order("role", &file.role_types)?;
        let entity_types = LabelSet::from_file_order("entity", &file.entity_types)?;
        let (nt, nr, na) = (event_types.len(), role_types.len(), entity_types.len());

        let mut event_role = vec![false; nt * nr];
        for t in 0..nt {
            // (t, NONE) is always admissible.
            event_role[t * nr] = true;
        }
        for (event, roles) in &file.event_roles {
            let t = event_types.get(event).ok_or_else(|| {
                Error::Schema(format!("event_roles key `{event}` is not an event type"))
            })?;
            if t == NONE_INDEX && !roles.is_empty() {
                return Err(Error::Schema(format!(
                    "event_roles[NONE] must be empty, found `{}`",
                    roles.join(",")
                )));
            }
            for role in roles {
                let r = role_types.get(role).ok_or_else(|| {
                    Error::Schema(format!("event `{event}` lists unknown role `{role}`"))
                })?;
                event_role[t * nr + r] = true;
            }
        }

        let mut role_entity = vec![false; nr * na];
        role_entity[..na].iter_mut().for_each(|c| *c = true);
        for (role, entities) in &file.role_entities {
            let r = role_types.get(role).ok_or_else(|| {
                Error::Schema(format!("role_entities key `{role}` is not a role type"))
            })?;
            let mut seen = BTreeSet::new();
            for ent in entities {
                let a = entity_types.get(ent).ok_or_else(|| {
                    Error::Schema(format!("role `{role}` lists unknown entity type `{ent}`"))
                })?;
                seen.insert(a);
            }
            if r == NONE_INDEX {
                if seen.len() != na {
                    let missing: Vec<&str> = (0..na)
                        .filter(|a| !seen.contains(a))
                        .map(|a| entity_types.name(a))
                        .collect();
                    return Err(Error::Schema(format!(
                        "role_entities[NONE] must list every entity type, missing `{}`",
                        missing.join(",")
                    )));
                }
                continue;
            }
            if seen.contains(&NONE_INDEX) {
                return Err(Error::Schema(format!(
                    "role `{role}` may not be filled by the NONE entity type"
                )));
            }
            for a in seen {
                role_entity[r * na + a] = true;
            }
        }

        Ok(Self {
            event_types,
            role_types,
            entity_types,
            event_role,
            role_entity,
        })
    }

    pub fn num_events(&self) -> usize {
        self.event_types.len()
    }

    pub fn num_roles(&self) -> usize {
        self.role_types.len()
    }

    pub fn num_entities(&self) -> usize {
        self.entity_types.len()
    }

    /// Whether role `r` may attach to event type `t` (`NONE` role always may).
    #[inline]
    pub fn event_role_allowed(&self, t: usize, r: usize) -> bool {
        self.event_role[t * self.num_roles() + r]
    }

    /// Whether entity type `a` may fill role `r`.
    #[inline]
    pub fn role_entity_allowed(&self, r: usize, a: usize) -> bool {
        self.role_entity[r * self.num_entities() + a]
    }

    /// Index-level validity of one (t, r, a) triple.
    #[inline]
    pub fn valid_triple(&self, t: usize, r: usize, a: usize) -> bool {
        self.event_role_allowed(t, r) && self.role_entity_allowed(r, a)
    }

    pub fn is_valid_config(&self, t: &str, r: &str, a: &str) -> Result<bool> {
        let t = self.event_index(t)?;
        let r = self.role_index(r)?;
        let a = self.entity_index(a)?;
        Ok(self.valid_triple(t, r, a))
    }

    pub fn event_index(&self, label: &str) -> Result<usize> {
        self.event_types.get(label).ok_or_else(|| Error::UnknownLabel {
            kind: "event",
            label: label.to_string(),
        })
    }

    pub fn role_index(&self, label: &str) -> Result<usize> {
        self.role_types.get(label).ok_or_else(|| Error::UnknownLabel {
            kind: "role",
            label: label.to_string(),
        })
    }

    pub fn entity_index(&self, label: &str) -> Result<usize> {
        self.entity_types.get(label).ok_or_else(|| Error::UnknownLabel {
            kind: "entity",
            label: label.to_string(),
        })
    }

    /// Roles permitted for event type `t`, excluding `NONE`.
    pub fn roles_of(&self, t: usize) -> impl Iterator<Item = usize> + '_ {
        (1..self.num_roles()).filter(move |&r| self.event_role_allowed(t, r))
    }

    /// Entity types permitted for role `r`.
    pub fn entities_of(&self, r: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_entities()).filter(move |&a| self.role_entity_allowed(r, a))
    }

    /// Average number of roles per non-NONE event type (k1).
    pub fn mean_roles_per_event(&self) -> f64 {
        let n = self.num_events() - 1;
        if n == 0 {
            return 0.0;
        }
        let total: usize = (1..self.num_events()).map(|t| self.roles_of(t).count()).sum();
        total as f64 / n as f64
    }

    /// Average number of entity types per non-NONE role (k2).
    pub fn mean_entities_per_role(&self) -> f64 {
        let n = self.num_roles() - 1;
        if n == 0 {
            return 0.0;
        }
        let total: usize = (1..self.num_roles()).map(|r| self.entities_of(r).count()).sum();
        total as f64 / n as f64
    }

    /// The canonical file form, used for fingerprints and bundles.
    pub fn to_file(&self) -> SchemaFile {
        let mut event_roles = BTreeMap::new();
        for t in 0..self.num_events() {
            let roles = self
                .roles_of(t)
                .map(|r| self.role_types.name(r).to_string())
                .collect();
            event_roles.insert(self.event_types.name(t).to_string(), roles);
        }
        let mut role_entities = BTreeMap::new();
        for r in 0..self.num_roles() {
            let ents = self
                .entities_of(r)
                .map(|a| self.entity_types.name(a).to_string())
                .collect();
            role_entities.insert(self.role_types.name(r).to_string(), ents);
        }
        SchemaFile {
            event_types: self.event_types.names().to_vec(),
            role_types: self.role_types.names().to_vec(),
            entity_types: self.entity_types.names().to_vec(),
            event_roles,
            role_entities,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("schema serializes")
    }

    /// Restricts the schema to a subset of event types, keeping only the roles
    /// and entity types they can reach. Used to build small test problems.
    pub fn subset(&self, events: &[&str]) -> Result<Self> {
        let mut file = self.to_file();
        let keep: BTreeSet<&str> = events.iter().copied().chain([NONE]).collect();
        file.event_types.retain(|e| keep.contains(e.as_str()));
        file.event_roles.retain(|e, _| keep.contains(e.as_str()));
        let roles: BTreeSet<String> = file
            .event_roles
            .values()
            .flatten()
            .cloned()
            .chain([NONE.to_string()])
            .collect();
        file.role_types.retain(|r| roles.contains(r));
        file.role_entities.retain(|r, _| roles.contains(r));
        let ents: BTreeSet<String> = file
            .role_entities
            .iter()
            .filter(|(r, _)| r.as_str() != NONE)
            .flat_map(|(_, v)| v.iter().cloned())
            .chain([NONE.to_string()])
            .collect();
        file.entity_types.retain(|a| ents.contains(a));
        if let Some(none) = file.role_entities.get_mut(NONE) {
            none.retain(|a| ents.contains(a));
        }
        Self::from_file(&file)
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<LabelSchema> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LabelSchema::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_schema_counts() {
        let s = LabelSchema::bundled();
        assert_eq!(s.num_events(), 34);
        assert_eq!(s.num_roles(), 29);
        assert_eq!(s.num_entities(), 10);
        assert_eq!(s.event_types.name(0), NONE);
        assert!(s.mean_roles_per_event() > 3.0);
        assert!(s.mean_entities_per_role() > 1.0);
    }

    #[test]
    fn marry_roles_accepted() {
        let s = LabelSchema::bundled();
        let t = s.event_index("Marry").unwrap();
        let roles: Vec<&str> = s.roles_of(t).map(|r| s.role_types.name(r)).collect();
        assert_eq!(roles, vec!["Person", "Place", "Time"]);
    }

    #[test]
    fn none_event_with_roles_rejected() {
        let text = r#"{"event_types":["NONE","Marry"],"role_types":["NONE","Person"],
            "entity_types":["NONE","PER"],"event_roles":{"NONE":["Person"]},
            "role_entities":{"Person":["PER"]}}"#;
        let err = LabelSchema::from_json(text).unwrap_err();
        assert!(err.to_string().contains("NONE"), "{err}");
    }

    #[test]
    fn unknown_labels_reported() {
        let text = r#"{"event_types":["NONE","Marry"],"role_types":["NONE","Person"],
            "entity_types":["NONE","PER"],"event_roles":{"Marry":["Spouse"]},
            "role_entities":{"Person":["PER"]}}"#;
        let err = LabelSchema::from_json(text).unwrap_err();
        assert!(err.to_string().contains("Spouse"));
        let missing_none = r#"{"event_types":["Marry"],"role_types":["NONE"],"entity_types":["NONE"]}"#;
        assert!(LabelSchema::from_json(missing_none).is_err());
    }

    #[test]
    fn config_validity_examples() {
        let s = LabelSchema::bundled();
        assert!(s.is_valid_config("Marry", "Person", "PER").unwrap());
        assert!(!s.is_valid_config("NONE", "Person", "PER").unwrap());
        assert!(s.is_valid_config("Attack", "NONE", "GPE").unwrap());
        assert!(!s.is_valid_config("Marry", "Attacker", "PER").unwrap());
        assert!(!s.is_valid_config("Marry", "Person", "GPE").unwrap());
        assert!(s.is_valid_config("Bogus", "NONE", "PER").is_err());
    }

    #[test]
    fn exhaustive_none_semantics() {
        let s = LabelSchema::bundled();
        for t in 0..s.num_events() {
            for a in 0..s.num_entities() {
                assert!(s.valid_triple(t, NONE_INDEX, a));
            }
            for r in 1..s.num_roles() {
                for a in 0..s.num_entities() {
                    if t == NONE_INDEX {
                        assert!(!s.valid_triple(t, r, a));
                    }
                    if a == NONE_INDEX {
                        assert!(!s.valid_triple(t, r, a));
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_round_trip() {
        let s = LabelSchema::bundled();
        let back = LabelSchema::from_json(&s.to_json()).unwrap();
        assert_eq!(back.to_json(), s.to_json());
    }

    #[test]
    fn subset_keeps_reachable_labels() {
        let s = LabelSchema::bundled().subset(&["Marry", "Attack"]).unwrap();
        assert_eq!(s.num_events(), 3);
        assert!(s.role_types.get("Attacker").is_some());
        assert!(s.role_types.get("Buyer").is_none());
        assert!(s.is_valid_config("Marry", "Person", "PER").unwrap());
    }
}
