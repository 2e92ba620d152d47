//! Append-only store of verified barcodes with last-known-location queries
//! and stable CSV/JSON exports.
//!
//! On disk the store is one NDJSON log. Each line is either
//! `{"type":"mission","mission_id":N}` or `{"type":"record", ...}`; snapshot
//! images live next to it in `snapshots/<sha256-hex>.ppm`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::render::SnapshotRef;
use crate::scan::VerificationRecord;
use crate::warehouse::{BoxDims, Side, SlotAddress};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryRecord {
    pub barcode_id: String,
    pub address: SlotAddress,
    /// Catalog name, `None` when unclassified.
    pub box_type: Option<String>,
    pub measured_dims: BoxDims,
    pub snapshot_ref: SnapshotRef,
    pub mission_id: u64,
    pub tick: u64,
}

impl InventoryRecord {
    /// Builds a record from a verified laser read; `None` for failures.
    pub fn from_verification(rec: &VerificationRecord, mission_id: u64, tick: u64) -> Option<Self> {
        Some(Self {
            barcode_id: rec.barcode_id()?.to_owned(),
            address: rec.address,
            box_type: rec.classified_type.clone(),
            measured_dims: rec.measured_dims?,
            snapshot_ref: rec.snapshot_ref.clone()?,
            mission_id,
            tick,
        })
    }

    fn order_key(&self) -> (u64, u64) {
        (self.mission_id, self.tick)
    }
}

#[derive(Debug, Error)]
pub enum InventoryError {
    #[error("record for {barcode_id} already stored for mission {mission_id}")]
    DuplicateRecord { barcode_id: String, mission_id: u64 },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("unknown mission {0}")]
    UnknownMission(u64),
    #[error("inventory i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt inventory log line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(format!("unknown report format `{s}`")),
        }
    }
}

/// One exported line. Field order is the export column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub barcode_id: String,
    pub rack: u32,
    pub side: Side,
    pub section: u32,
    pub tier: u32,
    pub box_type: Option<String>,
    pub w: f64,
    pub h: f64,
    pub d: f64,
    pub snapshot_ref: String,
    pub tick: u64,
}

impl From<&InventoryRecord> for ReportRow {
    fn from(r: &InventoryRecord) -> Self {
        Self {
            barcode_id: r.barcode_id.clone(),
            rack: r.address.rack,
            side: r.address.side,
            section: r.address.section,
            tier: r.address.tier,
            box_type: r.box_type.clone(),
            w: r.measured_dims.w,
            h: r.measured_dims.h,
            d: r.measured_dims.d,
            snapshot_ref: r.snapshot_ref.to_string(),
            tick: r.tick,
        }
    }
}

impl ReportRow {
    pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, csv::Error> {
        csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
    }

    pub fn parse_json(text: &str) -> serde_json::Result<Vec<ReportRow>> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockReport {
    pub mission_id: u64,
    /// Records per box type; unclassified boxes count under `unclassified`.
    pub counts: BTreeMap<String, usize>,
    pub records: Vec<ReportRow>,
    pub unresolved_candidates: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Mission { mission_id: u64 },
    Record(InventoryRecord),
}

/// Single writer, append-only. Readers clone the store or use the query
/// methods; nothing is ever removed.
#[derive(Debug, Default)]
pub struct Inventory {
    records: Vec<InventoryRecord>,
    missions: BTreeSet<u64>,
    keys: HashSet<(String, u64)>,
    latest: HashMap<String, usize>,
    log: Option<File>,
    snapshot_dir: Option<PathBuf>,
}

impl Clone for Inventory {
    /// Clones the in-memory index only; the clone is detached from disk.
    fn clone(&self) -> Self {
        Self {
            records: self.records.clone(),
            missions: self.missions.clone(),
            keys: self.keys.clone(),
            latest: self.latest.clone(),
            log: None,
            snapshot_dir: None,
        }
    }
}

impl Inventory {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a log file and replays it into the index.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, InventoryError> {
        let path = path.as_ref();
        let mut store = Self::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: LogLine = serde_json::from_str(&line).map_err(|e| InventoryError::Corrupt {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                match parsed {
                    LogLine::Mission { mission_id } => {
                        store.missions.insert(mission_id);
                    }
                    LogLine::Record(r) => store.index(r)?,
                }
            }
        }
        store.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        store.snapshot_dir = Some(path.parent().unwrap_or(Path::new(".")).join("snapshots"));
        Ok(store)
    }

    fn append(&mut self, line: &LogLine) -> Result<(), InventoryError> {
        if let Some(f) = self.log.as_mut() {
            let mut text = serde_json::to_string(line).expect("log line serializes");
            text.push('\n');
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        Ok(())
    }

    fn index(&mut self, r: InventoryRecord) -> Result<(), InventoryError> {
        let key = (r.barcode_id.clone(), r.mission_id);
        if self.keys.contains(&key) {
            return Err(InventoryError::DuplicateRecord {
                barcode_id: r.barcode_id,
                mission_id: r.mission_id,
            });
        }
        self.keys.insert(key);
        self.missions.insert(r.mission_id);
        let idx = self.records.len();
        match self.latest.get(&r.barcode_id) {
            Some(&j) if self.records[j].order_key() >= r.order_key() => {}
            _ => {
                self.latest.insert(r.barcode_id.clone(), idx);
            }
        }
        self.records.push(r);
        Ok(())
    }

    /// Makes a mission known to the store even before it has records.
    pub fn register_mission(&mut self, mission_id: u64) -> Result<(), InventoryError> {
        if self.missions.insert(mission_id) {
            self.append(&LogLine::Mission { mission_id })?;
        }
        Ok(())
    }

    pub fn insert(&mut self, record: InventoryRecord) -> Result<(), InventoryError> {
        if record.barcode_id.is_empty() {
            return Err(InventoryError::InvalidRecord("empty barcode_id".into()));
        }
        let key = (record.barcode_id.clone(), record.mission_id);
        if self.keys.contains(&key) {
            return Err(InventoryError::DuplicateRecord {
                barcode_id: key.0,
                mission_id: key.1,
            });
        }
        self.append(&LogLine::Record(record.clone()))?;
        self.index(record)
    }

    /// Stores the snapshot payload under its content address.
    pub fn store_snapshot(&self, snapshot: &SnapshotRef, bytes: &[u8]) -> Result<Option<PathBuf>, InventoryError> {
        let Some(dir) = &self.snapshot_dir else {
            return Ok(None);
        };
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.ppm", snapshot.digest()));
        if !path.exists() {
            fs::write(&path, bytes)?;
        }
        Ok(Some(path))
    }

    pub fn records(&self) -> &[InventoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn missions(&self) -> &BTreeSet<u64> {
        &self.missions
    }

    pub fn last_mission_id(&self) -> Option<u64> {
        self.missions.iter().next_back().copied()
    }

    /// Latest sighting of a tag by `(mission_id, tick)`.
    pub fn query_by_tag(&self, barcode_id: &str) -> Option<&InventoryRecord> {
        self.latest.get(barcode_id).map(|&i| &self.records[i])
    }

    pub fn mission_records(&self, mission_id: u64) -> impl Iterator<Item = &InventoryRecord> {
        self.records.iter().filter(move |r| r.mission_id == mission_id)
    }

    fn rows(&self, mission_id: u64) -> Result<Vec<ReportRow>, InventoryError> {
        if !self.missions.contains(&mission_id) {
            return Err(InventoryError::UnknownMission(mission_id));
        }
        let mut rows: Vec<&InventoryRecord> = self.mission_records(mission_id).collect();
        rows.sort_by(|a, b| (a.tick, &a.address, &a.barcode_id).cmp(&(b.tick, &b.address, &b.barcode_id)));
        Ok(rows.into_iter().map(ReportRow::from).collect())
    }

    pub fn export_report(&self, mission_id: u64, format: ReportFormat) -> Result<String, InventoryError> {
        let rows = self.rows(mission_id)?;
        Ok(match format {
            ReportFormat::Csv => {
                let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
                w.write_record([
                    "barcode_id",
                    "rack",
                    "side",
                    "section",
                    "tier",
                    "box_type",
                    "w",
                    "h",
                    "d",
                    "snapshot_ref",
                    "tick",
                ])
                .map_err(csv_io)?;
                for row in &rows {
                    w.serialize(row).map_err(csv_io)?;
                }
                String::from_utf8(w.into_inner().map_err(|e| csv_io(e.into_error().into()))?).expect("csv is utf-8")
            }
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(&rows).expect("rows serialize");
                s.push('\n');
                s
            }
        })
    }

    pub fn stock_report(&self, mission_id: u64, unresolved_candidates: usize) -> Result<StockReport, InventoryError> {
        let records = self.rows(mission_id)?;
        let mut counts = BTreeMap::new();
        for r in &records {
            let key = r.box_type.clone().unwrap_or_else(|| "unclassified".into());
            *counts.entry(key).or_insert(0) += 1;
        }
        Ok(StockReport {
            mission_id,
            counts,
            records,
            unresolved_candidates,
        })
    }
}

fn csv_io(e: csv::Error) -> InventoryError {
    InventoryError::Io(std::io::Error::other(e.to_string()))
}
