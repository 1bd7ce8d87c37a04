//! Canonical accident dataset schema and its CSV/JSONL forms.
//!
//! Field invariants live in the value types ([`ClockTime`], [`FreeText`],
//! [`VehicleTypes`], unsigned counts), so an [`AccidentRecord`] cannot hold
//! an out-of-range value.

mod normalize;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use normalize::{
    normalize_bool, normalize_count, normalize_date, normalize_time, normalize_vehicles,
    weekday_on_or_before, TimeConfig, Unnormalizable,
};

#[derive(Debug, thiserror::Error)]
pub enum RecordsError {
    #[error("invalid {field} value {value:?}: {message}")]
    InvalidValue {
        field: &'static str,
        value: String,
        message: String,
    },
    #[error("CSV schema mismatch at row {line}: {message}")]
    CsvSchemaMismatch { line: u64, message: String },
    #[error("JSONL line {line}: {message}")]
    Jsonl { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Wall-clock time of day, 24-hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClockTime {
    hour: u8,
    minute: u8,
}

impl ClockTime {
    pub fn new(hour: u8, minute: u8) -> Option<Self> {
        (hour < 24 && minute < 60).then_some(Self { hour, minute })
    }

    pub fn hour(&self) -> u8 {
        self.hour
    }

    pub fn minute(&self) -> u8 {
        self.minute
    }
}

impl fmt::Display for ClockTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour, self.minute)
    }
}

impl FromStr for ClockTime {
    type Err = RecordsError;

    /// Strict `HH:MM`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |message: &str| RecordsError::InvalidValue {
            field: "accident_time",
            value: s.to_string(),
            message: message.to_string(),
        };
        let b = s.as_bytes();
        if b.len() != 5 || b[2] != b':' || !b.iter().enumerate().all(|(i, c)| i == 2 || c.is_ascii_digit()) {
            return Err(bad("expected HH:MM"));
        }
        let hour = s[..2].parse().unwrap();
        let minute = s[3..].parse().unwrap();
        Self::new(hour, minute).ok_or_else(|| bad("out of range"))
    }
}

impl TryFrom<String> for ClockTime {
    type Error = RecordsError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ClockTime> for String {
    fn from(t: ClockTime) -> Self {
        t.to_string()
    }
}

/// Non-empty free text (location, road characteristics). Empty answers are
/// represented by `None`, never by an empty string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FreeText(String);

impl FreeText {
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        (!text.is_empty()).then_some(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FreeText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for FreeText {
    type Error = RecordsError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s).ok_or(RecordsError::InvalidValue {
            field: "free text",
            value: String::new(),
            message: "must not be empty".into(),
        })
    }
}

impl From<FreeText> for String {
    fn from(t: FreeText) -> Self {
        t.0
    }
}

/// Canonical vehicle tokens: trimmed, lowercase, non-empty, free of the
/// `|` list separator, duplicate-free, first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct VehicleTypes(Vec<String>);

impl VehicleTypes {
    /// Canonicalize tokens (trim, lowercase, collapse inner whitespace) and
    /// drop duplicates. Fails on tokens that are empty after trimming or
    /// contain `|`.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, RecordsError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<String> = Vec::new();
        for raw in tokens {
            let raw = raw.as_ref();
            let token = raw.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
            if token.is_empty() || token.contains('|') {
                return Err(RecordsError::InvalidValue {
                    field: "vehicle_types",
                    value: raw.to_string(),
                    message: "tokens must be non-empty and must not contain '|'".into(),
                });
            }
            if !out.contains(&token) {
                out.push(token);
            }
        }
        Ok(Self(out))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<String>> for VehicleTypes {
    type Error = RecordsError;
    fn try_from(v: Vec<String>) -> Result<Self, Self::Error> {
        Self::from_tokens(v)
    }
}

impl From<VehicleTypes> for Vec<String> {
    fn from(v: VehicleTypes) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccidentRecord {
    #[serde(rename = "source")]
    pub source_name: String,
    pub url: String,
    pub title: String,
    pub publish_date: Option<NaiveDate>,
    pub accident_date: Option<NaiveDate>,
    pub accident_time: Option<ClockTime>,
    pub killed: Option<u32>,
    pub injured: Option<u32>,
    pub location: Option<FreeText>,
    pub road_characteristics: Option<FreeText>,
    pub pedestrian_involved: Option<bool>,
    pub vehicle_types: VehicleTypes,
    #[serde(rename = "model")]
    pub model_name: String,
}

pub const CSV_HEADER: [&str; 13] = [
    "source",
    "url",
    "title",
    "publish_date",
    "accident_date",
    "accident_time",
    "killed",
    "injured",
    "location",
    "road_characteristics",
    "pedestrian_involved",
    "vehicle_types",
    "model",
];

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

impl AccidentRecord {
    fn csv_row(&self) -> [String; 13] {
        [
            self.source_name.clone(),
            self.url.clone(),
            self.title.clone(),
            opt(&self.publish_date),
            opt(&self.accident_date),
            opt(&self.accident_time),
            opt(&self.killed),
            opt(&self.injured),
            opt(&self.location),
            opt(&self.road_characteristics),
            opt(&self.pedestrian_involved),
            self.vehicle_types.tokens().join("|"),
            self.model_name.clone(),
        ]
    }

    fn from_csv_row(row: &csv::StringRecord, line: u64) -> Result<Self, RecordsError> {
        let mismatch = |message: String| RecordsError::CsvSchemaMismatch { line, message };
        if row.len() != CSV_HEADER.len() {
            return Err(mismatch(format!(
                "expected {} cells, found {}",
                CSV_HEADER.len(),
                row.len()
            )));
        }
        let cell = |i: usize| &row[i];
        let optional = |i: usize| Some(cell(i)).filter(|s| !s.is_empty());
        let parse_err = |i: usize, e: &dyn fmt::Display| {
            mismatch(format!("{}: cannot parse {:?}: {e}", CSV_HEADER[i], cell(i)))
        };

        let date = |i: usize| {
            optional(i)
                .map(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| parse_err(i, &e)))
                .transpose()
        };
        let count = |i: usize| {
            optional(i)
                .map(|s| {
                    if s.bytes().all(|b| b.is_ascii_digit()) {
                        s.parse::<u32>().map_err(|e| parse_err(i, &e))
                    } else {
                        Err(parse_err(i, &"not a non-negative integer"))
                    }
                })
                .transpose()
        };

        Ok(Self {
            source_name: cell(0).to_string(),
            url: cell(1).to_string(),
            title: cell(2).to_string(),
            publish_date: date(3)?,
            accident_date: date(4)?,
            accident_time: optional(5)
                .map(|s| s.parse::<ClockTime>().map_err(|e| parse_err(5, &e)))
                .transpose()?,
            killed: count(6)?,
            injured: count(7)?,
            location: optional(8).and_then(FreeText::new),
            road_characteristics: optional(9).and_then(FreeText::new),
            pedestrian_involved: match optional(10) {
                None => None,
                Some("true") => Some(true),
                Some("false") => Some(false),
                Some(_) => return Err(parse_err(10, &"expected true or false")),
            },
            vehicle_types: match optional(11) {
                None => VehicleTypes::default(),
                Some(s) => VehicleTypes::from_tokens(s.split('|')).map_err(|e| parse_err(11, &e))?,
            },
            model_name: cell(12).to_string(),
        })
    }
}

/// RFC 4180 CSV with the fixed header row and CRLF line endings.
pub fn to_csv(records: &[AccidentRecord]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    writer.write_record(CSV_HEADER).expect("writing to a Vec");
    for record in records {
        writer.write_record(record.csv_row()).expect("writing to a Vec");
    }
    writer.into_inner().expect("flushing a Vec")
}

pub fn from_csv(bytes: &[u8]) -> Result<Vec<AccidentRecord>, RecordsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(bytes);
    let header = reader
        .headers()
        .map_err(|e| RecordsError::CsvSchemaMismatch {
            line: 1,
            message: e.to_string(),
        })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(RecordsError::CsvSchemaMismatch {
            line: 1,
            message: format!("expected header {:?}", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        // Row number counting the header as row 1.
        let line = i as u64 + 2;
        let row = row.map_err(|e| RecordsError::CsvSchemaMismatch {
            line,
            message: e.to_string(),
        })?;
        out.push(AccidentRecord::from_csv_row(&row, line)?);
    }
    Ok(out)
}

/// One JSON object per line, `\n` terminated.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("serializing plain data");
        out.push(b'\n');
    }
    out
}

pub fn from_jsonl<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>, RecordsError> {
    let text = String::from_utf8_lossy(bytes);
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| RecordsError::Jsonl {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
