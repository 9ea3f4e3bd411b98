//! Entity tables and constraint queries.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use thiserror::Error;

use crate::model::{DbBucket, DbResult, DONTCARE, NONE};
use crate::ontology::Ontology;
use crate::text::{normalize_value, time_minutes};

#[derive(Debug, Error)]
pub enum DbError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed table {path}: {message}")]
    Malformed { path: String, message: String },
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("domain `{domain}` has no attribute `{slot}`")]
    UnknownSlot { domain: String, slot: String },
}

pub type Entity = IndexMap<String, String>;

#[derive(Clone, Debug, Default)]
struct Table {
    rows: Vec<Entity>,
    attributes: BTreeSet<String>,
    /// (slot, normalized value) -> row ids
    index: HashMap<(String, String), BTreeSet<usize>>,
    /// slot -> (row id, minutes) for values that parse as clock times
    times: HashMap<String, Vec<(usize, u32)>>,
}

impl Table {
    fn new(rows: Vec<Entity>) -> Self {
        let mut t = Table { rows, ..Table::default() };
        for (id, row) in t.rows.iter().enumerate() {
            for (k, v) in row {
                t.attributes.insert(k.clone());
                t.index.entry((k.clone(), normalize_value(v))).or_default().insert(id);
                if let Some(m) = time_minutes(v) {
                    t.times.entry(k.clone()).or_default().push((id, m));
                }
            }
        }
        t
    }
}

/// Read-only per-domain entity store.
#[derive(Clone, Debug, Default)]
pub struct EntityDb {
    tables: HashMap<String, Table>,
    queryable: HashMap<String, bool>,
    /// Booking slots per domain; never matched against entities.
    booking: HashMap<String, BTreeSet<String>>,
    /// Reject constraints on attributes a table does not have.
    pub strict: bool,
}

/// Maps a count to its bucket token.
pub fn bucketize(count: usize, queryable: bool) -> DbBucket {
    if !queryable {
        return DbBucket::NoRes;
    }
    match count {
        0 => DbBucket::Db0,
        1 => DbBucket::Db1,
        2 | 3 => DbBucket::Db2,
        _ => DbBucket::Db3,
    }
}

fn json_rows(text: &str, path: &str) -> Result<Vec<Entity>, DbError> {
    let raw: Vec<serde_json::Map<String, serde_json::Value>> = serde_json::from_str(text)
        .map_err(|e| DbError::Malformed { path: path.to_string(), message: e.to_string() })?;
    Ok(raw
        .into_iter()
        .map(|obj| {
            obj.into_iter()
                .filter_map(|(k, v)| match v {
                    serde_json::Value::String(s) => Some((k, s.to_lowercase())),
                    serde_json::Value::Number(n) => Some((k, n.to_string())),
                    serde_json::Value::Bool(b) => Some((k, if b { "yes" } else { "no" }.to_string())),
                    _ => None,
                })
                .collect()
        })
        .collect())
}

impl EntityDb {
    pub fn new(ontology: &Ontology) -> Self {
        let queryable = ontology.domains().map(|(d, s)| (d.to_string(), s.queryable)).collect();
        let booking = ontology
            .domains()
            .map(|(d, s)| {
                let slots = s.informable.keys().filter(|k| ontology.is_booking_slot(d, k)).cloned().collect();
                (d.to_string(), slots)
            })
            .collect();
        Self { tables: HashMap::new(), queryable, booking, strict: false }
    }

    pub fn with_table(mut self, domain: &str, rows: Vec<Entity>) -> Self {
        self.tables.insert(domain.to_string(), Table::new(rows));
        self
    }

    /// Loads `<domain>_db.json` for every queryable domain. A queryable
    /// domain without a file gets an empty table.
    pub fn load_dir(dir: impl AsRef<Path>, ontology: &Ontology) -> Result<Self, DbError> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(DbError::Io {
                path: dir.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
            });
        }
        let mut db = Self::new(ontology);
        for (domain, schema) in ontology.domains() {
            if !schema.queryable {
                continue;
            }
            let path = dir.join(format!("{domain}_db.json"));
            let rows = if path.exists() {
                let p = path.display().to_string();
                let text = fs::read_to_string(&path).map_err(|source| DbError::Io { path: p.clone(), source })?;
                json_rows(&text, &p)?
            } else {
                log::warn!("no table for queryable domain `{domain}` in {}", dir.display());
                Vec::new()
            };
            db.tables.insert(domain.to_string(), Table::new(rows));
        }
        Ok(db)
    }

    pub fn table(&self, domain: &str) -> Option<&[Entity]> {
        self.tables.get(domain).map(|t| t.rows.as_slice())
    }

    pub fn is_queryable(&self, domain: &str) -> bool {
        self.queryable.get(domain).copied().unwrap_or(false) && self.tables.contains_key(domain)
    }

    /// Counts entities satisfying every constraint. `dontcare` matches
    /// anything; constraints on attributes the table lacks (booking slots)
    /// are ignored (others are errors under `strict`); `leave`/`arrive` compare as times.
    pub fn query<'a, I>(&self, domain: &str, constraints: I) -> Result<DbResult, DbError>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        if !self.queryable.contains_key(domain) {
            return Err(DbError::UnknownDomain(domain.to_string()));
        }
        let Some(table) = self.tables.get(domain).filter(|_| self.queryable[domain]) else {
            return Ok(DbResult::no_result(domain));
        };
        let mut matching: Option<BTreeSet<usize>> = None;
        for (slot, value) in constraints {
            if value == DONTCARE || slot == NONE {
                continue;
            }
            if !table.attributes.contains(slot) {
                if self.strict && !self.booking.get(domain).is_some_and(|b| b.contains(slot)) {
                    return Err(DbError::UnknownSlot { domain: domain.to_string(), slot: slot.to_string() });
                }
                continue;
            }
            let ids: BTreeSet<usize> = match (slot, time_minutes(value)) {
                ("leave", Some(req)) => time_filter(table, slot, |t| t >= req),
                ("arrive", Some(req)) => time_filter(table, slot, |t| t <= req),
                _ => table.index.get(&(slot.to_string(), normalize_value(value))).cloned().unwrap_or_default(),
            };
            matching = Some(match matching {
                None => ids,
                Some(prev) => prev.intersection(&ids).copied().collect(),
            });
        }
        let count = matching.map_or(table.rows.len(), |m| m.len());
        Ok(DbResult { domain: domain.to_string(), count, bucket: bucketize(count, true) })
    }
}

fn time_filter(table: &Table, slot: &str, keep: impl Fn(u32) -> bool) -> BTreeSet<usize> {
    table
        .times
        .get(slot)
        .map_or_else(BTreeSet::new, |ts| ts.iter().filter(|(_, m)| keep(*m)).map(|(i, _)| *i).collect())
}
