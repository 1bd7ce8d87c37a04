use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Deserialize;

use super::{EvalError, FieldSet};
use crate::records::{ClockTime, FreeText, VehicleTypes};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldEntry {
    pub fields: FieldSet,
    pub annotator_note: Option<String>,
}

/// Hand-annotated reference values keyed by article url.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldSet {
    entries: BTreeMap<String, GoldEntry>,
}

impl GoldSet {
    pub fn get(&self, url: &str) -> Option<&GoldEntry> {
        self.entries.get(url)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Urls in ascending order.
    pub fn urls(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn insert(&mut self, url: &str, entry: GoldEntry) -> Option<GoldEntry> {
        self.entries.insert(url.to_string(), entry)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGold {
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    url: String,
    fields: RawFields,
    #[serde(default)]
    annotator_note: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFields {
    accident_date: Option<String>,
    accident_time: Option<String>,
    killed: Option<i64>,
    injured: Option<i64>,
    location: Option<String>,
    road_characteristics: Option<String>,
    pedestrian_involved: Option<bool>,
    #[serde(default)]
    vehicle_types: Vec<String>,
}

fn invalid(entry: &str, field: &str, message: impl Into<String>) -> EvalError {
    EvalError::GoldInvalid {
        entry: entry.to_string(),
        field: field.to_string(),
        message: message.into(),
    }
}

impl RawFields {
    fn validate(self, url: &str) -> Result<FieldSet, EvalError> {
        let count = |name: &str, v: Option<i64>| {
            v.map(|n| u32::try_from(n).map_err(|_| invalid(url, name, format!("{n} is not a valid count"))))
                .transpose()
        };
        let text = |name: &str, v: Option<String>| {
            v.map(|s| FreeText::new(s).ok_or_else(|| invalid(url, name, "empty string; use null")))
                .transpose()
        };
        Ok(FieldSet {
            accident_date: self
                .accident_date
                .map(|s| {
                    NaiveDate::parse_from_str(&s, "%Y-%m-%d")
                        .map_err(|_| invalid(url, "accident_date", format!("{s:?} is not YYYY-MM-DD")))
                })
                .transpose()?,
            accident_time: self
                .accident_time
                .map(|s| {
                    s.parse::<ClockTime>()
                        .map_err(|_| invalid(url, "accident_time", format!("{s:?} is not HH:MM")))
                })
                .transpose()?,
            killed: count("killed", self.killed)?,
            injured: count("injured", self.injured)?,
            location: text("location", self.location)?,
            road_characteristics: text("road_characteristics", self.road_characteristics)?,
            pedestrian_involved: self.pedestrian_involved,
            vehicle_types: VehicleTypes::from_tokens(self.vehicle_types)
                .map_err(|e| invalid(url, "vehicle_types", e.to_string()))?,
        })
    }
}

/// Parse and validate a gold JSON document.
pub fn load_gold(bytes: &[u8]) -> Result<GoldSet, EvalError> {
    let raw: RawGold =
        serde_json::from_slice(bytes).map_err(|e| invalid("(document)", "(document)", e.to_string()))?;
    let mut set = GoldSet::default();
    for (i, entry) in raw.entries.into_iter().enumerate() {
        let url = entry.url.trim().to_string();
        if url.is_empty() {
            return Err(invalid(&format!("#{i}"), "url", "empty url"));
        }
        let fields = entry.fields.validate(&url)?;
        let previous = set.insert(
            &url,
            GoldEntry {
                fields,
                annotator_note: entry.annotator_note,
            },
        );
        if previous.is_some() {
            return Err(invalid(&url, "url", "duplicate url"));
        }
    }
    Ok(set)
}
