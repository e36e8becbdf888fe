//! JSON Lines persistence for [`KnowledgeGraph`].
//!
//! Line 1 is a header object; each following line is one entity with the
//! sixteen keys in fixed order. Entities are written in ascending id order so
//! consecutive saves of the same graph are byte-identical.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::KnowledgeGraph;
use crate::model::{Entity, EntityId};

pub const SCHEMA_NAME: &str = "automathkg";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("unsupported schema {schema:?} version {version}")]
    SchemaVersionMismatch { schema: String, version: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    /// Alternate names recorded by fusion; omitted when empty.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    aliases: BTreeMap<String, EntityId>,
}

pub fn write_kg<W: Write>(kg: &KnowledgeGraph, mut w: W) -> Result<(), StoreError> {
    let header = Header {
        schema: SCHEMA_NAME.to_string(),
        version: SCHEMA_VERSION,
        aliases: kg.aliases().clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for e in kg.entities() {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kg<R: Read>(r: R) -> Result<KnowledgeGraph, StoreError> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate();
    let header_line = match lines.next() {
        Some((_, l)) => l?,
        None => {
            return Err(StoreError::MalformedRecord {
                line: 1,
                reason: "missing header".into(),
            })
        }
    };
    let header: Header =
        serde_json::from_str(&header_line).map_err(|e| StoreError::MalformedRecord {
            line: 1,
            reason: format!("bad header: {e}"),
        })?;
    if header.schema != SCHEMA_NAME || header.version != SCHEMA_VERSION {
        return Err(StoreError::SchemaVersionMismatch {
            schema: header.schema,
            version: header.version,
        });
    }
    let mut kg = KnowledgeGraph::new();
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let e: Entity = serde_json::from_str(&line).map_err(|err| StoreError::MalformedRecord {
            line: lineno,
            reason: err.to_string(),
        })?;
        kg.add_entity(e).map_err(|err| StoreError::MalformedRecord {
            line: lineno,
            reason: err.to_string(),
        })?;
    }
    for (name, id) in &header.aliases {
        if !kg.contains(*id) {
            return Err(StoreError::MalformedRecord {
                line: 1,
                reason: format!("alias `{name}` points at unknown entity {id}"),
            });
        }
    }
    kg.restore_aliases(header.aliases);
    kg.rebuild_edges();
    Ok(kg)
}

pub fn save_kg(kg: &KnowledgeGraph, path: impl AsRef<Path>) -> Result<(), StoreError> {
    let f = File::create(path)?;
    write_kg(kg, BufWriter::new(f))
}

pub fn load_kg(path: impl AsRef<Path>) -> Result<KnowledgeGraph, StoreError> {
    read_kg(File::open(path)?)
}

pub fn kg_to_bytes(kg: &KnowledgeGraph) -> Vec<u8> {
    let mut buf = Vec::new();
    write_kg(kg, &mut buf).expect("writing to memory");
    buf
}
