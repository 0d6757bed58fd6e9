//! On-disk formats.
//!
//! * FSET: one feature set per file. Little-endian header
//!   `b"FSET" | u16 version | i32 level | u64 count | u64 dim` followed by
//!   `count * dim` little-endian `f32` values, row-major.
//! * Snapshot directory: a `manifest` file with `domain_id=<id>` and
//!   `level.<k>=<relative path>` lines pointing at FSET files.
//! * CSV: numeric feature rows, AP records (`domain_id,ap`) and gap series
//!   (`domain_id,gap`).
//! * Config: `key=value` lines, `#` starts a comment.
//! * Reports: pretty JSON with fixed key order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{AnalysisError, ApRecord};
use crate::feature::{DomainSnapshot, FeatureError, FeatureSet};
use crate::gating::SweepRow;

pub const FSET_MAGIC: [u8; 4] = *b"FSET";
pub const FSET_VERSION: u16 = 1;
pub const FSET_HEADER_LEN: usize = 4 + 2 + 4 + 8 + 8;
pub const MANIFEST_FILE: &str = "manifest";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {found:?}, expected \"FSET\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported FSET version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated: need {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },
    #[error("{extra} trailing bytes after payload")]
    TrailingBytes { extra: u64 },
    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedRows { line: u64, expected: usize, found: usize },
    #[error("line {line}: '{field}' is not a number")]
    NonNumeric { line: u64, field: String },
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error("config line {line}: {detail}")]
    Config { line: usize, detail: String },
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl IoError {
    /// True for failures of the filesystem itself, as opposed to content
    /// that was read but is invalid.
    pub fn is_io(&self) -> bool {
        match self {
            IoError::Io { .. } => true,
            IoError::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

pub fn encode_fset(f: &FeatureSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(FSET_HEADER_LEN + f.data().len() * 4);
    out.extend_from_slice(&FSET_MAGIC);
    out.extend_from_slice(&FSET_VERSION.to_le_bytes());
    out.extend_from_slice(&f.level().to_le_bytes());
    out.extend_from_slice(&(f.count() as u64).to_le_bytes());
    out.extend_from_slice(&(f.dim() as u64).to_le_bytes());
    for v in f.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_fset(bytes: &[u8]) -> Result<FeatureSet, IoError> {
    let actual = bytes.len() as u64;
    if bytes.len() >= 4 && bytes[..4] != FSET_MAGIC {
        return Err(IoError::BadMagic {
            found: bytes[..4].try_into().unwrap(),
        });
    }
    if bytes.len() < FSET_HEADER_LEN {
        return Err(IoError::Truncated {
            expected: FSET_HEADER_LEN as u64,
            actual,
        });
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != FSET_VERSION {
        return Err(IoError::UnsupportedVersion(version));
    }
    let level = i32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let dim = u64::from_le_bytes(bytes[18..26].try_into().unwrap());

    let payload = &bytes[FSET_HEADER_LEN..];
    let needed = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or(IoError::Truncated {
            expected: u64::MAX,
            actual: payload.len() as u64,
        })?;
    let have = payload.len() as u64;
    if have < needed {
        return Err(IoError::Truncated {
            expected: needed,
            actual: have,
        });
    }
    if have > needed {
        return Err(IoError::TrailingBytes { extra: have - needed });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FeatureSet::new(level, dim as usize, data)?)
}

pub fn write_fset(f: &FeatureSet, path: &Path) -> Result<(), IoError> {
    fs::write(path, encode_fset(f)).map_err(|e| IoError::io(path, e))
}

pub fn read_fset(path: &Path) -> Result<FeatureSet, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_fset(&bytes)
}

fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| IoError::io(path, e))
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Numeric rows, one sample per line. A first line whose first field is not
/// a number is treated as a header.
pub fn parse_csv_features(text: &str, level: i32) -> Result<FeatureSet, IoError> {
    let mut dim = None;
    let mut data = Vec::new();
    for (i, record) in csv_reader(text).records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let expected = *dim.get_or_insert(record.len());
        if record.len() != expected {
            return Err(IoError::RaggedRows {
                line,
                expected,
                found: record.len(),
            });
        }
        for field in &record {
            let v: f32 = field.parse().map_err(|_| IoError::NonNumeric {
                line,
                field: field.to_owned(),
            })?;
            data.push(v);
        }
    }
    Ok(FeatureSet::new(level, dim.unwrap_or(1), data)?)
}

pub fn read_csv_features(path: &Path, level: i32) -> Result<FeatureSet, IoError> {
    parse_csv_features(&read_text(path)?, level)
}

fn level_file_name(level: i32) -> String {
    format!("level_{level}.fset")
}

/// Writes one FSET per level plus the manifest into `dir` (created if needed).
pub fn write_snapshot_dir(snapshot: &DomainSnapshot, dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let mut manifest = format!("domain_id={}\n", snapshot.domain_id());
    for (&level, set) in snapshot.levels() {
        let name = level_file_name(level);
        write_fset(set, &dir.join(&name))?;
        manifest.push_str(&format!("level.{level}={name}\n"));
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(|e| IoError::io(&path, e))
}

pub fn read_snapshot_dir(dir: &Path) -> Result<DomainSnapshot, IoError> {
    let path = dir.join(MANIFEST_FILE);
    let text = read_text(&path)?;
    let bad = |detail: String| IoError::Format {
        path: path.clone(),
        detail,
    };
    let mut domain_id = None;
    let mut sets = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line {}: expected key=value", n + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "domain_id" {
            if domain_id.replace(value.to_owned()).is_some() {
                return Err(bad("domain_id given twice".into()));
            }
        } else if let Some(level) = key.strip_prefix("level.") {
            let level: i32 = level
                .parse()
                .map_err(|_| bad(format!("line {}: bad level label '{level}'", n + 1)))?;
            let set = read_fset(&dir.join(value))?;
            if set.level() != level {
                return Err(bad(format!(
                    "{value} holds level {} but the manifest lists it as level {level}",
                    set.level()
                )));
            }
            sets.push(set);
        } else {
            return Err(bad(format!("line {}: unknown key '{key}'", n + 1)));
        }
    }
    let domain_id = domain_id.ok_or_else(|| bad("missing domain_id".into()))?;
    Ok(DomainSnapshot::new(domain_id, sets)?)
}

fn keyed_rows(text: &str, value_column: &str) -> Result<Vec<(String, f64)>, IoError> {
    let mut rows = Vec::new();
    for (i, record) in csv_reader(text).records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() != 2 {
            return Err(IoError::RaggedRows {
                line,
                expected: 2,
                found: record.len(),
            });
        }
        if i == 0 {
            if &record[0] != "domain_id" || &record[1] != value_column {
                return Err(IoError::NonNumeric {
                    line,
                    field: format!("header must be 'domain_id,{value_column}'"),
                });
            }
            continue;
        }
        let value = record[1].parse::<f64>().map_err(|_| IoError::NonNumeric {
            line,
            field: record[1].to_owned(),
        })?;
        rows.push((record[0].to_owned(), value));
    }
    Ok(rows)
}

/// `domain_id,ap` records.
pub fn parse_ap_records(text: &str) -> Result<Vec<ApRecord>, IoError> {
    keyed_rows(text, "ap")?
        .into_iter()
        .map(|(id, ap)| ApRecord::new(id, ap).map_err(IoError::from))
        .collect()
}

pub fn read_ap_records(path: &Path) -> Result<Vec<ApRecord>, IoError> {
    parse_ap_records(&read_text(path)?)
}

/// `domain_id,gap` series.
pub fn parse_gap_series(text: &str) -> Result<Vec<(String, f64)>, IoError> {
    keyed_rows(text, "gap")
}

pub fn read_gap_series(path: &Path) -> Result<Vec<(String, f64)>, IoError> {
    parse_gap_series(&read_text(path)?)
}

/// Parsed `key=value` file. Duplicate keys are rejected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(IoError::Config {
                line: n + 1,
                detail: format!("expected key=value, got '{line}'"),
            })?;
            let key = key.trim().to_owned();
            if key.is_empty() {
                return Err(IoError::Config {
                    line: n + 1,
                    detail: "empty key".into(),
                });
            }
            if entries.insert(key.clone(), (n + 1, value.trim().to_owned())).is_some() {
                return Err(IoError::Config {
                    line: n + 1,
                    detail: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        Self::parse(&read_text(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Errors on the first key not in `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), IoError> {
        match self.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
            Some((k, (line, _))) => Err(IoError::Config {
                line: *line,
                detail: format!("unknown key '{k}'"),
            }),
            None => Ok(()),
        }
    }

    /// Parses `key` if present.
    pub fn parse_value<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, IoError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| IoError::Config {
                line: *line,
                detail: format!("{key}: {e}"),
            }),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Pretty JSON with a trailing newline. Struct fields keep declaration
/// order and integer-keyed maps are emitted in numeric order, so identical
/// inputs give byte-identical text.
pub fn report_json<T: Serialize + ?Sized>(report: &T) -> Result<String, IoError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

pub fn write_report<T: Serialize + ?Sized>(report: &T, path: &Path) -> Result<(), IoError> {
    let text = report_json(report)?;
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// Plot-ready `threshold,total_cost,adapt_count` table.
pub fn sweep_table_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("threshold,total_cost,adapt_count\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.threshold, r.total_cost, r.adapt_count));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gating::{AdaptationLog, GatingPolicy};
    use crate::metrics::{GapReport, Metric};

    fn three_by_two() -> FeatureSet {
        FeatureSet::from_rows(4, &[[1.5f32, -2.0], [0.1, 3.25], [f32::MIN_POSITIVE, 1e30]]).unwrap()
    }

    #[test]
    fn fset_round_trip() {
        let f = three_by_two();
        let bytes = encode_fset(&f);
        assert_eq!(bytes.len(), FSET_HEADER_LEN + 24);
        assert_eq!(&bytes[..4], b"FSET");
        assert_eq!(decode_fset(&bytes).unwrap(), f);
    }

    #[test]
    fn fset_rejections() {
        let mut bytes = encode_fset(&three_by_two());
        bytes[0] = b'X';
        assert!(matches!(decode_fset(&bytes), Err(IoError::BadMagic { found }) if &found == b"XSET"));

        let mut bytes = encode_fset(&three_by_two());
        bytes[4] = 2;
        assert!(matches!(decode_fset(&bytes), Err(IoError::UnsupportedVersion(2))));

        let mut bytes = encode_fset(&three_by_two());
        bytes.push(0);
        assert!(matches!(decode_fset(&bytes), Err(IoError::TrailingBytes { extra: 1 })));

        assert!(matches!(decode_fset(b"FSET\x01"), Err(IoError::Truncated { expected: 26, actual: 5 })));
    }

    #[test]
    fn fset_truncated_payload() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"FSET");
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&3i32.to_le_bytes());
        bytes.extend_from_slice(&10u64.to_le_bytes());
        bytes.extend_from_slice(&4u64.to_le_bytes());
        bytes.extend(std::iter::repeat_n(0u8, 100));
        assert!(matches!(
            decode_fset(&bytes),
            Err(IoError::Truncated { expected: 160, actual: 100 })
        ));
    }

    #[test]
    fn fset_with_zero_rows_is_invalid() {
        let mut bytes = encode_fset(&three_by_two());
        bytes.truncate(FSET_HEADER_LEN);
        bytes[10..18].copy_from_slice(&0u64.to_le_bytes());
        assert!(matches!(
            decode_fset(&bytes),
            Err(IoError::Feature(FeatureError::EmptyLevel { level: 4 }))
        ));
    }

    #[test]
    fn csv_features() {
        let f = parse_csv_features("1,2\n3,4\n", 3).unwrap();
        assert_eq!((f.count(), f.dim()), (2, 2));
        assert_eq!(f.data(), &[1.0, 2.0, 3.0, 4.0]);
        let f = parse_csv_features("x,y\n1,2", 3).unwrap();
        assert_eq!((f.count(), f.dim()), (1, 2));
        assert!(matches!(parse_csv_features("1,2\n3", 3), Err(IoError::RaggedRows { line: 2, .. })));
        assert!(matches!(parse_csv_features("1,2\n3,abc", 3), Err(IoError::NonNumeric { .. })));
        assert!(matches!(
            parse_csv_features("x,y\n", 3),
            Err(IoError::Feature(FeatureError::EmptyLevel { .. }))
        ));
    }

    #[test]
    fn ap_and_gap_csv() {
        let aps = parse_ap_records("domain_id,ap\nsrc,0.9\nfog,0.7\n").unwrap();
        assert_eq!(aps.len(), 2);
        assert_eq!(aps[1].domain_id(), "fog");
        assert!(parse_ap_records("id,ap\nsrc,0.9\n").is_err());
        assert!(matches!(parse_ap_records("domain_id,ap\nsrc,1.9\n"), Err(IoError::Analysis(_))));
        let gaps = parse_gap_series("domain_id,gap\nfog,0.25\n").unwrap();
        assert_eq!(gaps, vec![("fog".to_string(), 0.25)]);
    }

    #[test]
    fn config_parsing() {
        let c = KvConfig::parse("# comment\nmetric = swd\nthreshold=0.02 # inline\n\n").unwrap();
        assert_eq!(c.get("metric"), Some("swd"));
        assert_eq!(c.parse_value::<f64>("threshold").unwrap(), Some(0.02));
        assert_eq!(c.parse_value::<f64>("m").unwrap(), None);
        assert!(c.check_keys(&["metric", "threshold"]).is_ok());
        assert!(matches!(c.check_keys(&["metric"]), Err(IoError::Config { line: 3, .. })));
        assert!(KvConfig::parse("a=1\na=2").is_err());
        assert!(KvConfig::parse("novalue").is_err());
        assert!(c.parse_value::<usize>("metric").is_err());
    }

    #[test]
    fn gap_report_json_layout() {
        let r = GapReport::from_levels(Metric::Mmd, "s", "t", None, BTreeMap::from([(4, 2.0), (3, 1.0), (10, 3.0)]));
        let text = report_json(&r).unwrap();
        let compact: String = text.split_whitespace().collect();
        assert_eq!(
            compact,
            r#"{"metric":"MMD","source_id":"s","target_id":"t","m_used":null,"per_level":{"3":1.0,"4":2.0,"10":3.0},"aggregate":2.0}"#
        );
        assert_eq!(report_json(&r).unwrap(), text);
    }

    #[test]
    fn log_json_has_cost_fields() {
        let log = AdaptationLog {
            policy: GatingPolicy::new(Metric::Mmd, 0.0),
            decisions: vec![],
            total_cost: 2.0,
            adapt_count: 2,
            skip_count: 0,
        };
        let text = report_json(&log).unwrap();
        assert!(text.contains("\"total_cost\": 2.0"));
        assert!(text.contains("\"decisions\": []"));
    }

    #[test]
    fn sweep_table() {
        let rows = vec![SweepRow {
            threshold: 0.005,
            adapt_count: 3,
            total_cost: 3.0,
            mean_gap: 0.1,
            gaps: vec![],
        }];
        assert_eq!(sweep_table_csv(&rows), "threshold,total_cost,adapt_count\n0.005,3,3\n");
    }
}
