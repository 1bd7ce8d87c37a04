//! Generators and helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::PathBuf;

use chrono::{NaiveDate, TimeZone, Utc};
use proptest::prelude::*;
use roadwatch::harvest::{Article, NewsIndexEntry};
use roadwatch::markup::{Accessor, Selector, Step};
use roadwatch::records::{AccidentRecord, ClockTime, FreeText, VehicleTypes};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/run")
}

/// Text mixing ASCII, Bangla script, CSV metacharacters and line breaks.
pub fn tricky_text() -> impl Strategy<Value = String> {
    proptest::string::string_regex("[a-zA-Z0-9 ,;\"'|\\n\\r\u{0985}-\u{09B9}\u{09BE}-\u{09CC}\u{0964}\u{2013}\u{2014}]{0,24}").unwrap()
}

pub fn free_text() -> impl Strategy<Value = Option<FreeText>> {
    proptest::option::of(tricky_text().prop_filter_map("non-empty", FreeText::new))
}

pub fn date() -> impl Strategy<Value = NaiveDate> {
    (1990i32..2040, 1u32..=12, 1u32..=28).prop_map(|(y, m, d)| NaiveDate::from_ymd_opt(y, m, d).unwrap())
}

pub fn clock_time() -> impl Strategy<Value = ClockTime> {
    (0u8..24, 0u8..60).prop_map(|(h, m)| ClockTime::new(h, m).unwrap())
}

pub fn vehicles() -> impl Strategy<Value = VehicleTypes> {
    proptest::collection::vec("[a-z]{1,8}( [a-z]{1,6})?", 0..4)
        .prop_map(|tokens| VehicleTypes::from_tokens(tokens).unwrap())
}

pub fn record() -> impl Strategy<Value = AccidentRecord> {
    (
        (
            prop_oneof![Just("Prothom Alo"), Just("The Daily Star"), Just("প্রথম আলো")],
            0u32..10_000,
            tricky_text(),
            proptest::option::of(date()),
            proptest::option::of(date()),
            proptest::option::of(clock_time()),
        ),
        (
            proptest::option::of(0u32..500),
            proptest::option::of(any::<u32>()),
            free_text(),
            free_text(),
            proptest::option::of(any::<bool>()),
            vehicles(),
            "[a-z0-9.-]{1,16}",
        ),
    )
        .prop_map(
            |(
                (source, n, title, publish_date, accident_date, accident_time),
                (killed, injured, location, road_characteristics, pedestrian_involved, vehicle_types, model),
            )| AccidentRecord {
                source_name: source.to_string(),
                url: format!("https://news.test/a/{n}"),
                title,
                publish_date,
                accident_date,
                accident_time,
                killed,
                injured,
                location,
                road_characteristics,
                pedestrian_involved,
                vehicle_types,
                model_name: model,
            },
        )
}

fn ident() -> impl Strategy<Value = String> {
    "[a-zA-Z_][a-zA-Z0-9_-]{0,6}"
}

fn lower_ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9-]{0,6}"
}

pub fn step() -> impl Strategy<Value = Step> {
    (
        proptest::option::of(lower_ident()),
        proptest::collection::vec(ident(), 0..3),
        proptest::option::of(ident()),
        proptest::collection::vec((lower_ident(), "[ -~\u{0985}-\u{0990}]{0,10}"), 0..3),
        proptest::option::of(1usize..20),
    )
        .prop_map(|(tag, classes, id, attrs, index)| Step {
            tag,
            classes,
            id,
            attrs,
            index,
        })
}

pub fn selector() -> impl Strategy<Value = Selector> {
    (
        proptest::collection::vec(step(), 1..5),
        proptest::option::of(lower_ident()),
    )
        .prop_map(|(steps, attr)| Selector {
            steps,
            accessor: attr.map_or(Accessor::TextContent, Accessor::Attribute),
        })
}

pub fn article(i: usize, title: &str) -> Article {
    Article {
        entry: NewsIndexEntry {
            title: title.to_string(),
            link: format!("https://news.test/article-{i}"),
            publish_date: "10 April 2024".into(),
            source_name: ["Prothom Alo", "The Daily Star", "Dhaka Tribune"][i % 3].into(),
        },
        body: format!("Body of report number {i}."),
        fetched_at: Utc.with_ymd_and_hms(2024, 4, 10, 6, 0, 0).unwrap(),
    }
}

pub const VALID_EXTRACTION: &str = r#"{"accident_date": "yesterday", "time": "5:30 pm", "injured": "3", "killed": "2", "location": "Dhaka-Mawa highway", "road_characteristics": "highway", "pedestrian_involved": "no", "vehicle_types": "bus, motorcycle"}"#;

/// Unique title fragment for article `i`, safe to key script rules on.
pub fn tag(i: usize) -> String {
    format!("Title: Report {i:04} ")
}

pub fn tagged_article(i: usize) -> Article {
    article(i, &format!("Report {i:04} about a road crash"))
}
