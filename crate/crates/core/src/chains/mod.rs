//! The two LLM chains: report triage (Specific or General) and eight-field
//! extraction, plus the pipeline that turns articles into records.

mod prompts;
mod structured;

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::harvest::Article;
use crate::llmgate::{complete_within, CallBudget, ChatProvider, LlmError, LlmSettings};
use crate::pool::bounded_map;
use crate::records::{
    normalize_bool, normalize_count, normalize_date, normalize_time, normalize_vehicles,
    AccidentRecord, FreeText, TimeConfig,
};

pub use prompts::{render, PromptSet, TRIAGE_REASK};
pub use structured::{parse_structured_output, RawExtraction, StructuredOutputError};

/// Keys of the extraction answer, in schema order.
pub const EXTRACTION_KEYS: [&str; 8] = [
    "accident_date",
    "time",
    "injured",
    "killed",
    "location",
    "road_characteristics",
    "pedestrian_involved",
    "vehicle_types",
];

/// Provider calls allowed for triage: the question plus one re-ask.
pub const TRIAGE_CALLS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Specific,
    General,
}

impl Category {
    /// Case-insensitive label match after stripping quotes, `*` and a
    /// trailing period.
    pub fn parse_answer(answer: &str) -> Option<Self> {
        let cleaned = answer
            .trim()
            .trim_matches(|c: char| matches!(c, '"' | '\'' | '*' | '`' | '.') || c.is_whitespace())
            .to_lowercase();
        match cleaned.as_str() {
            "specific" => Some(Category::Specific),
            "general" => Some(Category::General),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChainError {
    #[error("article has an empty body")]
    EmptyBody,
    #[error("triage answer {answer:?} is neither Specific nor General")]
    UnparseableCategory { answer: String },
    #[error("no usable extraction after {attempts} provider calls: {last_error}")]
    ExtractionFailed { attempts: u32, last_error: String },
    #[error(transparent)]
    Llm(#[from] LlmError),
}

fn ensure_body(article: &Article) -> Result<(), ChainError> {
    if article.body.trim().is_empty() {
        Err(ChainError::EmptyBody)
    } else {
        Ok(())
    }
}

/// Ask whether the report is about one individual accident. An unusable
/// answer gets one re-ask; both questions share [`TRIAGE_CALLS`] provider
/// calls, transport retries included.
pub fn classify_report(
    article: &Article,
    provider: &dyn ChatProvider,
    settings: &LlmSettings,
    prompts: &PromptSet,
) -> Result<Category, ChainError> {
    ensure_body(article)?;
    let user = render(&prompts.triage_user, &article.entry.title, &article.body);
    let mut budget = CallBudget::new(TRIAGE_CALLS);

    let first = complete_within(provider, settings, &prompts.triage_system, &user, &mut budget)?;
    if let Some(category) = Category::parse_answer(&first.response_text) {
        return Ok(category);
    }
    if budget.remaining() == 0 {
        return Err(ChainError::UnparseableCategory {
            answer: first.response_text,
        });
    }

    let reask = format!("{user}\n\n{TRIAGE_REASK}");
    let second = complete_within(provider, settings, &prompts.triage_system, &reask, &mut budget)?;
    Category::parse_answer(&second.response_text).ok_or(ChainError::UnparseableCategory {
        answer: second.response_text,
    })
}

fn repair_prompt(user: &str, error: &StructuredOutputError) -> String {
    format!(
        "{user}\n\nYour previous answer could not be used: {error}. \
         Reply with only the JSON object with exactly the eight keys."
    )
}

/// Ask the eight schema questions. Unusable answers are re-asked with the
/// parse error quoted; at most `1 + settings.max_retries` provider calls are
/// made in total, transport retries included.
pub fn extract_record(
    article: &Article,
    provider: &dyn ChatProvider,
    settings: &LlmSettings,
    prompts: &PromptSet,
) -> Result<RawExtraction, ChainError> {
    ensure_body(article)?;
    let user = render(&prompts.extract_user, &article.entry.title, &article.body);
    let mut budget = CallBudget::for_settings(settings);
    let mut prompt = user.clone();
    loop {
        let exchange = match complete_within(provider, settings, &prompts.extract_system, &prompt, &mut budget) {
            Ok(exchange) => exchange,
            Err(LlmError::ExhaustedRetries { last_error, .. }) => {
                return Err(ChainError::ExtractionFailed {
                    attempts: budget.used(),
                    last_error,
                })
            }
            Err(e) => return Err(e.into()),
        };
        match parse_structured_output(&exchange.response_text) {
            Ok(raw) => return Ok(raw),
            Err(e) if budget.remaining() == 0 => {
                return Err(ChainError::ExtractionFailed {
                    attempts: budget.used(),
                    last_error: e.to_string(),
                })
            }
            Err(e) => {
                log::debug!("{}: unusable extraction answer: {e}", article.entry.link);
                prompt = repair_prompt(&user, &e);
            }
        }
    }
}

/// A raw answer that was not "unknown" yet normalized to null.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldNote {
    pub url: String,
    pub field: String,
    pub raw: String,
}

fn is_unknown(raw: &str) -> bool {
    let s = raw.trim();
    s.is_empty() || s.eq_ignore_ascii_case("unknown")
}

/// Turns raw chain answers into canonical [`AccidentRecord`]s.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Normalizer {
    #[serde(default)]
    pub time: TimeConfig,
}

impl Normalizer {
    pub fn normalize(
        &self,
        article: &Article,
        raw: &RawExtraction,
        model: &str,
    ) -> (AccidentRecord, Vec<FieldNote>) {
        let url = &article.entry.link;
        let mut notes = Vec::new();
        let mut note = |name: &str, raw: Option<&str>, lost: bool| {
            if let Some(v) = raw.filter(|v| lost && !is_unknown(v)) {
                notes.push(FieldNote {
                    url: url.clone(),
                    field: name.to_string(),
                    raw: v.to_string(),
                });
            }
        };
        fn text(v: &Option<String>) -> Option<&str> {
            v.as_deref().filter(|s| !is_unknown(s))
        }

        let publish_date = normalize_date(&article.entry.publish_date, None);
        note("publish_date", Some(&article.entry.publish_date), publish_date.is_none());
        let accident_date = text(&raw.accident_date).and_then(|s| normalize_date(s, publish_date));
        note("accident_date", raw.accident_date.as_deref(), accident_date.is_none());
        let accident_time = text(&raw.time).and_then(|s| normalize_time(s, &self.time));
        note("accident_time", raw.time.as_deref(), accident_time.is_none());
        let killed = text(&raw.killed).and_then(|s| normalize_count(s).ok().flatten());
        note("killed", raw.killed.as_deref(), killed.is_none());
        let injured = text(&raw.injured).and_then(|s| normalize_count(s).ok().flatten());
        note("injured", raw.injured.as_deref(), injured.is_none());
        let pedestrian_involved = text(&raw.pedestrian_involved).and_then(normalize_bool);
        note("pedestrian_involved", raw.pedestrian_involved.as_deref(), pedestrian_involved.is_none());
        let vehicle_types = normalize_vehicles(text(&raw.vehicle_types).unwrap_or(""));
        note("vehicle_types", raw.vehicle_types.as_deref(), vehicle_types.is_empty());
        let location = text(&raw.location).and_then(|s| FreeText::new(s.trim()));
        let road_characteristics = text(&raw.road_characteristics).and_then(|s| FreeText::new(s.trim()));

        let record = AccidentRecord {
            source_name: article.entry.source_name.clone(),
            url: url.clone(),
            title: article.entry.title.clone(),
            publish_date,
            accident_date,
            accident_time,
            killed,
            injured,
            location,
            road_characteristics,
            pedestrian_involved,
            vehicle_types,
            model_name: model.to_string(),
        };
        (record, notes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    General,
    Unparseable,
    ExtractionFailed,
}

/// An article left out of the dataset, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub url: String,
    pub title: String,
    pub source: String,
    pub reason: ExclusionReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Exclusion {
    fn new(article: &Article, reason: ExclusionReason, detail: Option<String>) -> Self {
        Self {
            url: article.entry.link.clone(),
            title: article.entry.title.clone(),
            source: article.entry.source_name.clone(),
            reason,
            detail,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineOutput {
    pub records: Vec<AccidentRecord>,
    pub excluded: Vec<Exclusion>,
    pub notes: Vec<FieldNote>,
}

enum Outcome {
    Record(AccidentRecord, Vec<FieldNote>),
    Excluded(Exclusion),
    Aborted(LlmError),
    Skipped,
}

/// Triage, extraction and normalization over a batch of articles.
pub struct Pipeline<'a> {
    pub provider: &'a dyn ChatProvider,
    pub settings: &'a LlmSettings,
    pub prompts: &'a PromptSet,
    pub normalizer: &'a Normalizer,
    /// Maximum articles in flight.
    pub bound: usize,
}

impl Pipeline<'_> {
    fn process(&self, article: &Article, abort: &AtomicBool) -> Outcome {
        if abort.load(Ordering::SeqCst) {
            return Outcome::Skipped;
        }
        let fail = |e: ChainError, reason: ExclusionReason| match e {
            ChainError::Llm(LlmError::ProviderAuth(m)) => {
                abort.store(true, Ordering::SeqCst);
                Outcome::Aborted(LlmError::ProviderAuth(m))
            }
            other => Outcome::Excluded(Exclusion::new(article, reason, Some(other.to_string()))),
        };

        match classify_report(article, self.provider, self.settings, self.prompts) {
            Ok(Category::General) => {
                return Outcome::Excluded(Exclusion::new(article, ExclusionReason::General, None))
            }
            Ok(Category::Specific) => {}
            Err(e) => return fail(e, ExclusionReason::Unparseable),
        }
        match extract_record(article, self.provider, self.settings, self.prompts) {
            Ok(raw) => {
                let (record, notes) = self.normalizer.normalize(article, &raw, &self.settings.model);
                Outcome::Record(record, notes)
            }
            Err(e) => fail(e, ExclusionReason::ExtractionFailed),
        }
    }

    /// Every article ends up either as a record or in the exclusion ledger,
    /// both in input order. An authentication failure stops the batch and
    /// is the only error returned.
    pub fn run(&self, articles: &[Article]) -> Result<PipelineOutput, LlmError> {
        self.settings.validate()?;
        let abort = AtomicBool::new(false);
        let outcomes = bounded_map(articles, self.bound, |a| self.process(a, &abort));

        let mut out = PipelineOutput::default();
        let mut auth = None;
        for outcome in outcomes {
            match outcome {
                Outcome::Record(record, notes) => {
                    out.records.push(record);
                    out.notes.extend(notes);
                }
                Outcome::Excluded(exclusion) => out.excluded.push(exclusion),
                Outcome::Aborted(e) => auth = auth.or(Some(e)),
                Outcome::Skipped => {}
            }
        }
        match auth {
            Some(e) => Err(e),
            None => Ok(out),
        }
    }
}

/// [`Pipeline::run`] with the built-in prompts.
pub fn run_pipeline(
    articles: &[Article],
    provider: &dyn ChatProvider,
    settings: &LlmSettings,
    normalizer: &Normalizer,
    bound: usize,
) -> Result<PipelineOutput, LlmError> {
    let prompts = PromptSet::builtin();
    Pipeline {
        provider,
        settings,
        prompts: &prompts,
        normalizer,
        bound,
    }
    .run(articles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harvest::NewsIndexEntry;
    use crate::llmgate::{FailKind, Script, ScriptStep, ScriptedProvider};
    use crate::records::{ClockTime, VehicleTypes};
    use chrono::{NaiveDate, TimeZone, Utc};

    fn article(title: &str, body: &str) -> Article {
        Article {
            entry: NewsIndexEntry {
                title: title.into(),
                link: format!("https://news.test/{}", title.replace(' ', "-").to_lowercase()),
                publish_date: "10 April 2024".into(),
                source_name: "News Test".into(),
            },
            body: body.into(),
            fetched_at: Utc.with_ymd_and_hms(2024, 4, 10, 6, 0, 0).unwrap(),
        }
    }

    const BUS_JSON: &str = r#"{"accident_date": "Monday", "time": "5:30 pm", "injured": "3", "killed": "2", "location": "Dhaka-Mawa highway", "road_characteristics": "highway", "pedestrian_involved": "no", "vehicle_types": "Bus and Motorcycle"}"#;

    fn classify(script: Script, a: &Article) -> (Result<Category, ChainError>, usize) {
        let p = ScriptedProvider::new(script);
        let r = classify_report(a, &p, &LlmSettings::gpt_4o(), &PromptSet::builtin());
        (r, p.call_count())
    }

    fn extract(script: Script, a: &Article) -> (Result<RawExtraction, ChainError>, usize) {
        let p = ScriptedProvider::new(script);
        let r = extract_record(a, &p, &LlmSettings::gpt_4o(), &PromptSet::builtin());
        (r, p.call_count())
    }

    #[test]
    fn triage_labels() {
        let a = article("Who is responsible for road accidents?", "Opinion piece.");
        assert_eq!(classify(Script::new().reply("", "General"), &a).0, Ok(Category::General));
        assert_eq!(classify(Script::new().reply("", "specific"), &a).0, Ok(Category::Specific));
        assert_eq!(classify(Script::new().reply("", " **Specific.** "), &a).0, Ok(Category::Specific));
    }

    #[test]
    fn triage_reasks_once() {
        let a = article("Bus crash", "Two killed.");
        let (r, calls) = classify(
            Script::new().steps(&[], vec![ScriptStep::Reply("maybe".into()), ScriptStep::Reply("Specific".into())], false),
            &a,
        );
        assert_eq!((r, calls), (Ok(Category::Specific), 2));

        let p = ScriptedProvider::new(Script::new().steps(&[], vec![ScriptStep::Reply("maybe".into())], true));
        let r = classify_report(&a, &p, &LlmSettings::gpt_4o(), &PromptSet::builtin());
        assert_eq!(r, Err(ChainError::UnparseableCategory { answer: "maybe".into() }));
        assert_eq!(p.call_count(), 2);
        assert!(p.calls()[1].user.ends_with(TRIAGE_REASK));
        assert!(p.calls()[0].user.contains("Title: Bus crash"));
        assert!(p.calls()[0].system.contains("'expert opinion on road accidents'"));
    }

    #[test]
    fn triage_budget_includes_transport_retries() {
        let a = article("Bus crash", "Two killed.");
        let (r, calls) = classify(
            Script::new().steps(&[], vec![ScriptStep::Fail(FailKind::Transient), ScriptStep::Reply("maybe".into())], true),
            &a,
        );
        assert!(matches!(r, Err(ChainError::UnparseableCategory { .. })));
        assert_eq!(calls, 2);
        let (r, calls) = classify(Script::new().steps(&[], vec![ScriptStep::Fail(FailKind::Transient)], true), &a);
        assert!(matches!(r, Err(ChainError::Llm(LlmError::ExhaustedRetries { attempts: 2, .. }))));
        assert_eq!(calls, 2);
    }

    #[test]
    fn empty_body_is_rejected_without_calls() {
        let (r, calls) = classify(Script::new().reply("", "Specific"), &article("t", "  "));
        assert_eq!((r, calls), (Err(ChainError::EmptyBody), 0));
    }

    #[test]
    fn extraction_happy_path() {
        let (r, calls) = extract(Script::new().reply("", BUS_JSON), &article("Bus hits motorcycle", "..."));
        let raw = r.unwrap();
        assert_eq!((raw.killed.as_deref(), raw.injured.as_deref()), (Some("2"), Some("3")));
        assert_eq!(calls, 1);
    }

    #[test]
    fn extraction_repairs_after_prose() {
        let p = ScriptedProvider::new(Script::new().steps(
            &[],
            vec![ScriptStep::Reply("Two people died.".into()), ScriptStep::Reply(BUS_JSON.into())],
            false,
        ));
        let r = extract_record(&article("Bus", "b"), &p, &LlmSettings::gpt_4o(), &PromptSet::builtin());
        assert!(r.is_ok());
        assert_eq!(p.call_count(), 2);
        assert!(p.calls()[1].user.contains("no JSON object found"));
    }

    #[test]
    fn extraction_gives_up_after_budget() {
        let (r, calls) = extract(
            Script::new().steps(&[], vec![ScriptStep::Reply("prose".into())], true),
            &article("Bus", "b"),
        );
        assert!(matches!(r, Err(ChainError::ExtractionFailed { attempts: 3, .. })));
        assert_eq!(calls, 3);
        let (r, calls) = extract(
            Script::new().steps(&[], vec![ScriptStep::Fail(FailKind::Transient)], true),
            &article("Bus", "b"),
        );
        assert!(matches!(r, Err(ChainError::ExtractionFailed { attempts: 3, .. })));
        assert_eq!(calls, 3);
    }

    #[test]
    fn extraction_auth_propagates() {
        let (r, calls) = extract(
            Script::new().steps(&[], vec![ScriptStep::Fail(FailKind::Auth)], true),
            &article("Bus", "b"),
        );
        assert!(matches!(r, Err(ChainError::Llm(LlmError::ProviderAuth(_)))));
        assert_eq!(calls, 1);
    }

    #[test]
    fn normalizer_builds_canonical_record() {
        let a = article("Bus hits motorcycle", "...");
        let raw = parse_structured_output(BUS_JSON).unwrap();
        let (rec, notes) = Normalizer::default().normalize(&a, &raw, "gpt-4o");
        assert_eq!(rec.publish_date, NaiveDate::from_ymd_opt(2024, 4, 10));
        assert_eq!(rec.accident_date, NaiveDate::from_ymd_opt(2024, 4, 8));
        assert_eq!(rec.accident_time, ClockTime::new(17, 30));
        assert_eq!((rec.killed, rec.injured), (Some(2), Some(3)));
        assert_eq!(rec.pedestrian_involved, Some(false));
        assert_eq!(rec.vehicle_types, VehicleTypes::from_tokens(["bus", "motorcycle"]).unwrap());
        assert_eq!(rec.location.as_ref().unwrap().as_str(), "Dhaka-Mawa highway");
        assert_eq!(rec.model_name, "gpt-4o");
        assert!(notes.is_empty());
    }

    #[test]
    fn normalizer_notes_lost_values_only() {
        let a = article("x", "...");
        let raw = RawExtraction {
            accident_date: Some("Unknown".into()),
            time: Some("night".into()),
            injured: Some("several".into()),
            killed: None,
            location: Some("unknown".into()),
            road_characteristics: Some(" ".into()),
            pedestrian_involved: Some("unclear".into()),
            vehicle_types: Some("unknown".into()),
        };
        let (rec, notes) = Normalizer::default().normalize(&a, &raw, "m");
        assert_eq!(rec.location, None);
        assert_eq!(rec.road_characteristics, None);
        let fields: Vec<_> = notes.iter().map(|n| n.field.as_str()).collect();
        assert_eq!(fields, ["accident_time", "injured", "pedestrian_involved"]);
    }

    fn routed(script: Script, articles: &[Article]) -> Result<PipelineOutput, LlmError> {
        let p = ScriptedProvider::new(script);
        run_pipeline(articles, &p, &LlmSettings::gpt_4o(), &Normalizer::default(), 3)
    }

    #[test]
    fn pipeline_partitions_articles() {
        let articles = [
            article("Bus crash alpha", "a"),
            article("Accident statistics beta", "b"),
            article("Truck crash gamma", "c"),
        ];
        let script = Script::new()
            .reply("Classify this news report.\n\nTitle: Accident statistics beta", "General")
            .steps(&["Classify"], vec![ScriptStep::Reply("Specific".into())], true)
            .steps(&["Extract"], vec![ScriptStep::Reply(BUS_JSON.into())], true);
        let out = routed(script, &articles).unwrap();
        let urls: Vec<_> = out.records.iter().map(|r| r.url.as_str()).collect();
        assert_eq!(urls, [articles[0].entry.link.as_str(), articles[2].entry.link.as_str()]);
        assert_eq!(out.excluded.len(), 1);
        assert_eq!(out.excluded[0].reason, ExclusionReason::General);
        assert_eq!(out.excluded[0].url, articles[1].entry.link);
    }

    #[test]
    fn pipeline_all_general() {
        let articles = [article("a", "a"), article("b", "b"), article("c", "c")];
        let out = routed(Script::new().steps(&[], vec![ScriptStep::Reply("General".into())], true), &articles).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.excluded.len(), 3);
    }

    #[test]
    fn pipeline_ledgers_failures() {
        let articles = [article("odd one", "a"), article("broken json", "b")];
        let script = Script::new()
            .steps(&["odd one"], vec![ScriptStep::Reply("perhaps".into())], true)
            .steps(&["Classify"], vec![ScriptStep::Reply("Specific".into())], true)
            .steps(&["Extract"], vec![ScriptStep::Reply("{\"killed\": 1}".into())], true);
        let out = routed(script, &articles).unwrap();
        let reasons: Vec<_> = out.excluded.iter().map(|e| e.reason).collect();
        assert_eq!(reasons, [ExclusionReason::Unparseable, ExclusionReason::ExtractionFailed]);
        assert!(out.excluded[1].detail.as_ref().unwrap().contains("wrong keys"));
    }

    #[test]
    fn pipeline_aborts_on_auth() {
        let articles: Vec<_> = (0..6).map(|i| article(&format!("a{i}"), "x")).collect();
        let r = routed(Script::new().steps(&[], vec![ScriptStep::Fail(FailKind::Auth)], true), &articles);
        assert!(matches!(r, Err(LlmError::ProviderAuth(_))));
    }

    #[test]
    fn exclusion_json_shape() {
        let e = Exclusion::new(&article("t", "b"), ExclusionReason::ExtractionFailed, None);
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(
            json,
            r#"{"url":"https://news.test/t","title":"t","source":"News Test","reason":"extraction_failed"}"#
        );
    }
}
