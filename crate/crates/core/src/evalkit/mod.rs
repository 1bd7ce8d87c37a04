//! Field-level scoring of generated datasets against a hand-annotated gold
//! standard, aggregated per model, source and field.

mod gold;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::records::{AccidentRecord, ClockTime, FreeText, VehicleTypes};

pub use gold::{load_gold, GoldEntry, GoldSet};
pub use report::emit_report;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("gold entry {entry}: {field}: {message}")]
    GoldInvalid {
        entry: String,
        field: String,
        message: String,
    },
    #[error("accuracy of an empty tally is undefined")]
    EmptyDenominator,
}

/// Scored fields, in dataset column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    AccidentDate,
    AccidentTime,
    Killed,
    Injured,
    Location,
    RoadCharacteristics,
    PedestrianInvolved,
    VehicleTypes,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::AccidentDate,
        Field::AccidentTime,
        Field::Killed,
        Field::Injured,
        Field::Location,
        Field::RoadCharacteristics,
        Field::PedestrianInvolved,
        Field::VehicleTypes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::AccidentDate => "accident_date",
            Field::AccidentTime => "accident_time",
            Field::Killed => "killed",
            Field::Injured => "injured",
            Field::Location => "location",
            Field::RoadCharacteristics => "road_characteristics",
            Field::PedestrianInvolved => "pedestrian_involved",
            Field::VehicleTypes => "vehicle_types",
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The eight scored values of one article, in canonical form.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FieldSet {
    pub accident_date: Option<NaiveDate>,
    pub accident_time: Option<ClockTime>,
    pub killed: Option<u32>,
    pub injured: Option<u32>,
    pub location: Option<FreeText>,
    pub road_characteristics: Option<FreeText>,
    pub pedestrian_involved: Option<bool>,
    pub vehicle_types: VehicleTypes,
}

impl From<&AccidentRecord> for FieldSet {
    fn from(r: &AccidentRecord) -> Self {
        Self {
            accident_date: r.accident_date,
            accident_time: r.accident_time,
            killed: r.killed,
            injured: r.injured,
            location: r.location.clone(),
            road_characteristics: r.road_characteristics.clone(),
            pedestrian_involved: r.pedestrian_involved,
            vehicle_types: r.vehicle_types.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Correct,
    Wrong,
}

impl From<bool> for Verdict {
    fn from(ok: bool) -> Self {
        if ok {
            Verdict::Correct
        } else {
            Verdict::Wrong
        }
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || ('\u{2000}'..='\u{206F}').contains(&c)
        || matches!(c, '\u{0964}' | '\u{0965}' | '\u{00AB}' | '\u{00BB}' | '\u{00B7}' | '\u{00A1}' | '\u{00BF}')
}

/// Lowercase, punctuation to spaces, whitespace runs collapsed.
pub fn fold_free_text(text: &str) -> String {
    let spaced: String = text
        .to_lowercase()
        .chars()
        .map(|c| if is_punctuation(c) { ' ' } else { c })
        .collect();
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn free_text_eq(a: &Option<FreeText>, b: &Option<FreeText>) -> bool {
    let fold = |t: &Option<FreeText>| t.as_ref().map(|t| fold_free_text(t.as_str()));
    fold(a) == fold(b)
}

/// Compare one field. Null matches only null; vehicle lists compare as
/// sets; free text compares after [`fold_free_text`].
pub fn match_field(field: Field, predicted: &FieldSet, gold: &FieldSet) -> Verdict {
    let (p, g) = (predicted, gold);
    Verdict::from(match field {
        Field::AccidentDate => p.accident_date == g.accident_date,
        Field::AccidentTime => p.accident_time == g.accident_time,
        Field::Killed => p.killed == g.killed,
        Field::Injured => p.injured == g.injured,
        Field::Location => free_text_eq(&p.location, &g.location),
        Field::RoadCharacteristics => free_text_eq(&p.road_characteristics, &g.road_characteristics),
        Field::PedestrianInvolved => p.pedestrian_involved == g.pedestrian_involved,
        Field::VehicleTypes => {
            let set = |v: &VehicleTypes| v.tokens().iter().cloned().collect::<BTreeSet<_>>();
            set(&p.vehicle_types) == set(&g.vehicle_types)
        }
    })
}

/// Accuracy as a raw fraction and as a whole percent rounded half-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub fraction: f64,
    pub percent: u64,
}

impl Accuracy {
    pub fn label(&self) -> String {
        format!("{}%", self.percent)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub correct: u64,
    pub wrong: u64,
}

impl Tally {
    pub fn new(correct: u64, wrong: u64) -> Self {
        Self { correct, wrong }
    }

    pub fn total(&self) -> u64 {
        self.correct + self.wrong
    }

    pub fn record(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::Correct => self.correct += 1,
            Verdict::Wrong => self.wrong += 1,
        }
    }

    pub fn accuracy(&self) -> Result<Accuracy, EvalError> {
        accuracy(self.correct, self.wrong)
    }
}

impl std::ops::AddAssign for Tally {
    fn add_assign(&mut self, rhs: Self) {
        self.correct += rhs.correct;
        self.wrong += rhs.wrong;
    }
}

pub fn accuracy(correct: u64, wrong: u64) -> Result<Accuracy, EvalError> {
    let total = correct + wrong;
    if total == 0 {
        return Err(EvalError::EmptyDenominator);
    }
    // floor(100c/t + 1/2) in integers.
    let percent = (200 * correct + total) / (2 * total);
    Ok(Accuracy {
        fraction: correct as f64 / total as f64,
        percent,
    })
}

/// Records produced by one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub model: String,
    pub records: Vec<AccidentRecord>,
}

impl Dataset {
    /// Model name taken from the records, or `fallback` if there are none.
    pub fn from_records(records: Vec<AccidentRecord>, fallback: &str) -> Self {
        let model = records
            .first()
            .map(|r| r.model_name.clone())
            .unwrap_or_else(|| fallback.to_string());
        Self { model, records }
    }
}

/// Tallies keyed by (model, source, field); everything else is derived.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvalReport {
    pub cells: BTreeMap<(String, String, Field), Tally>,
    /// Scored articles per (model, source).
    pub articles: BTreeMap<(String, String), u64>,
    /// Dataset rows whose url has no gold entry, per model.
    pub skipped: BTreeMap<String, u64>,
    /// Gold urls missing from a model's dataset.
    pub coverage_gaps: BTreeMap<String, Vec<String>>,
}

impl EvalReport {
    pub fn add_tally(&mut self, model: &str, source: &str, field: Field, tally: Tally) {
        *self
            .cells
            .entry((model.to_string(), source.to_string(), field))
            .or_default() += tally;
    }

    pub fn merge(&mut self, other: EvalReport) {
        for ((m, s, f), t) in other.cells {
            self.add_tally(&m, &s, f, t);
        }
        for (k, n) in other.articles {
            *self.articles.entry(k).or_default() += n;
        }
        for (m, n) in other.skipped {
            *self.skipped.entry(m).or_default() += n;
        }
        for (m, gaps) in other.coverage_gaps {
            self.coverage_gaps.entry(m).or_default().extend(gaps);
        }
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.cells
            .keys()
            .map(|(m, _, _)| m.as_str())
            .chain(self.skipped.keys().map(String::as_str))
            .chain(self.coverage_gaps.keys().map(String::as_str))
            .collect()
    }

    pub fn sources(&self, model: &str) -> BTreeSet<&str> {
        self.cells
            .keys()
            .filter(|(m, _, _)| m == model)
            .map(|(_, s, _)| s.as_str())
            .collect()
    }

    pub fn cell(&self, model: &str, source: &str, field: Field) -> Option<Tally> {
        self.cells
            .get(&(model.to_string(), source.to_string(), field))
            .copied()
    }

    /// Sum over all of the model's cells.
    pub fn model_total(&self, model: &str) -> Tally {
        self.sum(|m, _, _| m == model)
    }

    pub fn source_total(&self, model: &str, source: &str) -> Tally {
        self.sum(|m, s, _| m == model && s == source)
    }

    pub fn field_total(&self, model: &str, field: Field) -> Tally {
        self.sum(|m, _, f| m == model && f == field)
    }

    fn sum(&self, keep: impl Fn(&str, &str, Field) -> bool) -> Tally {
        let mut total = Tally::default();
        for ((m, s, f), t) in &self.cells {
            if keep(m, s, *f) {
                total += *t;
            }
        }
        total
    }
}

/// Score every dataset row whose url is in the gold set, on all eight
/// fields. Duplicate rows are each scored, so the result does not depend on
/// row order.
pub fn evaluate(dataset: &Dataset, gold: &GoldSet) -> EvalReport {
    let model = dataset.model.as_str();
    let mut report = EvalReport::default();
    let mut seen = BTreeSet::new();
    for record in &dataset.records {
        let Some(entry) = gold.get(&record.url) else {
            *report.skipped.entry(model.to_string()).or_default() += 1;
            continue;
        };
        seen.insert(record.url.as_str());
        *report
            .articles
            .entry((model.to_string(), record.source_name.clone()))
            .or_default() += 1;
        let predicted = FieldSet::from(record);
        for field in Field::ALL {
            report
                .cells
                .entry((model.to_string(), record.source_name.clone(), field))
                .or_default()
                .record(match_field(field, &predicted, &entry.fields));
        }
    }
    let gaps: Vec<String> = gold
        .urls()
        .filter(|u| !seen.contains(u))
        .map(str::to_string)
        .collect();
    if !gaps.is_empty() {
        report.coverage_gaps.insert(model.to_string(), gaps);
    }
    report
}

pub fn evaluate_all(datasets: &[Dataset], gold: &GoldSet) -> EvalReport {
    let mut report = EvalReport::default();
    for dataset in datasets {
        report.merge(evaluate(dataset, gold));
    }
    report
}
