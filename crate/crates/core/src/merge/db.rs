//! JSON-lines database: a header line, then one record per line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LogEntry, MergedCellRecord};

pub const DB_FORMAT: &str = "cellmine-db";
pub const DB_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DbError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    records: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Database {
    pub records: Vec<MergedCellRecord>,
}

impl Database {
    pub fn to_jsonl(&self) -> String {
        let header = Header { format: DB_FORMAT.into(), version: DB_VERSION, records: self.records.len() };
        let mut s = serde_json::to_string(&header).unwrap();
        s.push('\n');
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    pub fn parse_jsonl(src: &str) -> Result<Self, DbError> {
        let mut lines = src.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(DbError::Parse { line: 1, msg: "empty database".into() })?;
        let header: Header = serde_json::from_str(first).map_err(|e| DbError::Parse { line: 1, msg: e.to_string() })?;
        if header.format != DB_FORMAT || header.version != DB_VERSION {
            return Err(DbError::Parse {
                line: 1,
                msg: format!("unsupported format {} v{}", header.format, header.version),
            });
        }
        let records = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| DbError::Parse { line: i + 1, msg: e.to_string() }))
            .collect::<Result<Vec<MergedCellRecord>, _>>()?;
        if records.len() != header.records {
            return Err(DbError::Parse {
                line: 1,
                msg: format!("header says {} records, found {}", header.records, records.len()),
            });
        }
        Ok(Self { records })
    }
}

pub fn write_database(path: &Path, db: &Database) -> Result<(), DbError> {
    std::fs::write(path, db.to_jsonl())?;
    Ok(())
}

pub fn read_database(path: &Path) -> Result<Database, DbError> {
    Database::parse_jsonl(&std::fs::read_to_string(path)?)
}

pub fn write_log(path: &Path, log: &[LogEntry]) -> Result<(), DbError> {
    let mut s = String::new();
    for e in log {
        s.push_str(&serde_json::to_string(e).unwrap());
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, DbError> {
    std::fs::read_to_string(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| DbError::Parse { line: i + 1, msg: e.to_string() }))
        .collect()
}
