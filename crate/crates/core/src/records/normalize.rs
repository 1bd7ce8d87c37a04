//! Field normalizers turning free-form model answers into canonical values.
//!
//! Each normalizer is idempotent on its own output: rendering a normalized
//! value back to text and normalizing again yields the same value.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::{ClockTime, VehicleTypes};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot normalize {raw:?}")]
pub struct Unnormalizable {
    pub raw: String,
}

fn is_unknown(s: &str) -> bool {
    s.is_empty() || s == "unknown"
}

fn clean(text: &str) -> String {
    text.trim()
        .trim_end_matches(['.', ',', ';', '!'])
        .trim()
        .to_lowercase()
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

/// Decimal digits or an English number word up to twenty. `"unknown"` and
/// the empty string are null.
pub fn normalize_count(text: &str) -> Result<Option<u32>, Unnormalizable> {
    let s = clean(text);
    if is_unknown(&s) {
        return Ok(None);
    }
    if s.bytes().all(|b| b.is_ascii_digit()) {
        return s.parse().map(Some).map_err(|_| Unnormalizable {
            raw: text.to_string(),
        });
    }
    NUMBER_WORDS
        .iter()
        .position(|w| *w == s)
        .map(|n| Some(n as u32))
        .ok_or_else(|| Unnormalizable {
            raw: text.to_string(),
        })
}

fn month_number(token: &str) -> Option<u32> {
    const MONTHS: [&str; 12] = [
        "january", "february", "march", "april", "may", "june", "july", "august", "september",
        "october", "november", "december",
    ];
    let t = token.trim_end_matches('.');
    MONTHS
        .iter()
        .position(|m| *m == t || (t.len() >= 3 && m.starts_with(t) && (t.len() == 3 || t == "sept")))
        .map(|i| i as u32 + 1)
}

fn day_number(token: &str) -> Option<u32> {
    let digits = token
        .strip_suffix("st")
        .or_else(|| token.strip_suffix("nd"))
        .or_else(|| token.strip_suffix("rd"))
        .or_else(|| token.strip_suffix("th"))
        .unwrap_or(token);
    if digits.is_empty() || digits.len() > 2 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn year_number(token: &str) -> Option<i32> {
    (token.len() == 4 && token.bytes().all(|b| b.is_ascii_digit()))
        .then(|| token.parse().ok())
        .flatten()
}

fn weekday_named(token: &str) -> Option<Weekday> {
    Some(match token {
        "monday" | "mon" => Weekday::Mon,
        "tuesday" | "tue" | "tues" => Weekday::Tue,
        "wednesday" | "wed" => Weekday::Wed,
        "thursday" | "thu" | "thurs" => Weekday::Thu,
        "friday" | "fri" => Weekday::Fri,
        "saturday" | "sat" => Weekday::Sat,
        "sunday" | "sun" => Weekday::Sun,
        _ => return None,
    })
}

/// Most recent date on `weekday` that is not after `anchor`.
pub fn weekday_on_or_before(anchor: NaiveDate, weekday: Weekday) -> NaiveDate {
    let back = (anchor.weekday().num_days_from_monday() + 7 - weekday.num_days_from_monday()) % 7;
    anchor - Duration::days(i64::from(back))
}

/// Absolute dates (ISO, `9 April 2024`, `April 9, 2024`) or relative phrases
/// (`yesterday`, `today`, weekday names) resolved against the publish date.
/// Anything else, or a relative phrase without a publish date, is null.
pub fn normalize_date(text: &str, publish_date: Option<NaiveDate>) -> Option<NaiveDate> {
    let s = clean(text);
    if is_unknown(&s) {
        return None;
    }
    if let Ok(d) = NaiveDate::parse_from_str(&s, "%Y-%m-%d") {
        return Some(d);
    }

    let tokens: Vec<&str> = s
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect();

    for t in &tokens {
        if t.len() == 10 {
            if let Ok(d) = NaiveDate::parse_from_str(t, "%Y-%m-%d") {
                return Some(d);
            }
        }
    }

    for w in tokens.windows(3) {
        // 9 April 2024
        if let (Some(d), Some(m), Some(y)) = (day_number(w[0]), month_number(w[1]), year_number(w[2])) {
            if let Some(date) = NaiveDate::from_ymd_opt(y, m, d) {
                return Some(date);
            }
        }
        // April 9, 2024
        if let (Some(m), Some(d), Some(y)) = (month_number(w[0]), day_number(w[1]), year_number(w[2])) {
            if let Some(date) = NaiveDate::from_ymd_opt(y, m, d) {
                return Some(date);
            }
        }
    }

    let anchor = publish_date?;
    for t in &tokens {
        match *t {
            "today" => return Some(anchor),
            "yesterday" => return Some(anchor - Duration::days(1)),
            other => {
                if let Some(weekday) = weekday_named(other) {
                    return Some(weekday_on_or_before(anchor, weekday));
                }
            }
        }
    }
    None
}

/// Optional mapping from named parts of the day ("night", "morning") to a
/// representative clock time. Empty by default, so named parts are null.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeConfig {
    #[serde(default)]
    pub named_parts: BTreeMap<String, ClockTime>,
}

/// `HH:MM` (24-hour), `H:MM am/pm`, `H am/pm`; `a.m.`/`p.m.` spellings and
/// `.` as the separator are accepted.
pub fn normalize_time(text: &str, config: &TimeConfig) -> Option<ClockTime> {
    let s = clean(text);
    if is_unknown(&s) {
        return None;
    }
    let compact = s.replace("a.m", "am").replace("p.m", "pm");
    let compact = compact.trim_end_matches('.').trim();

    let (clock, meridiem) = if let Some(rest) = compact.strip_suffix("am") {
        (rest.trim(), Some(false))
    } else if let Some(rest) = compact.strip_suffix("pm") {
        (rest.trim(), Some(true))
    } else {
        (compact, None)
    };

    let parsed = parse_clock(clock, meridiem);
    if parsed.is_some() {
        return parsed;
    }
    config
        .named_parts
        .iter()
        .find(|(name, _)| name.to_lowercase() == s)
        .map(|(_, t)| *t)
}

fn parse_clock(clock: &str, pm: Option<bool>) -> Option<ClockTime> {
    let (h, m) = match clock.split_once([':', '.']) {
        Some((h, m)) => (h, Some(m)),
        None => (clock, None),
    };
    let digits = |s: &str, max_len: usize| {
        (!s.is_empty() && s.len() <= max_len && s.bytes().all(|b| b.is_ascii_digit()))
            .then(|| s.parse::<u8>().ok())
            .flatten()
    };
    let hour = digits(h, 2)?;
    let minute = match m {
        Some(m) if m.len() == 2 => digits(m, 2)?,
        Some(_) => return None,
        None => {
            // A bare number is only a time with am/pm attached.
            pm?;
            0
        }
    };
    let hour = match pm {
        Some(is_pm) => {
            if !(1..=12).contains(&hour) {
                return None;
            }
            hour % 12 + if is_pm { 12 } else { 0 }
        }
        None => hour,
    };
    ClockTime::new(hour, minute)
}

/// Yes/no answers; the first word decides, so "Yes, a pedestrian was hit"
/// is true. Anything else is null.
pub fn normalize_bool(text: &str) -> Option<bool> {
    let s = clean(text);
    let first = s
        .split(|c: char| c.is_whitespace() || c == ',' || c == '.' || c == ';')
        .next()
        .unwrap_or("");
    match first {
        "yes" | "true" | "y" => Some(true),
        "no" | "false" | "n" => Some(false),
        _ => None,
    }
}

const VEHICLE_SYNONYMS: &[(&str, &str)] = &[
    ("auto-rickshaw", "autorickshaw"),
    ("auto-rickshaws", "autorickshaw"),
    ("auto rickshaw", "autorickshaw"),
    ("auto rickshaws", "autorickshaw"),
    ("autorickshaws", "autorickshaw"),
    ("cng", "autorickshaw"),
    ("cng-run autorickshaw", "autorickshaw"),
    ("cng-run auto-rickshaw", "autorickshaw"),
    ("battery-run rickshaw", "easybike"),
    ("easy bike", "easybike"),
    ("easy-bike", "easybike"),
    ("easybikes", "easybike"),
    ("bicycles", "bicycle"),
    ("cycle", "bicycle"),
    ("buses", "bus"),
    ("busses", "bus"),
    ("cars", "car"),
    ("private car", "car"),
    ("lorry", "truck"),
    ("lorries", "truck"),
    ("trucks", "truck"),
    ("covered vans", "covered van"),
    ("micro-bus", "microbus"),
    ("microbuses", "microbus"),
    ("motorbike", "motorcycle"),
    ("motorbikes", "motorcycle"),
    ("motor cycle", "motorcycle"),
    ("motorcycles", "motorcycle"),
    ("bike", "motorcycle"),
    ("pick-up", "pickup"),
    ("pick-up van", "pickup"),
    ("pickup van", "pickup"),
    ("pickups", "pickup"),
    ("rickshaws", "rickshaw"),
    ("trains", "train"),
    ("vans", "van"),
];

fn canonical_vehicle(token: &str) -> String {
    let mut t = token.split_whitespace().collect::<Vec<_>>().join(" ");
    loop {
        let stripped = ["a ", "an ", "the "]
            .iter()
            .find_map(|article| t.strip_prefix(article).map(str::to_string));
        match stripped {
            Some(rest) => t = rest.trim().to_string(),
            None => break,
        }
    }
    VEHICLE_SYNONYMS
        .iter()
        .find(|(from, _)| *from == t)
        .map_or(t, |(_, to)| to.to_string())
}

/// Split a vehicle answer on commas, semicolons, slashes, `&` and the word
/// "and", then canonicalize each token through the synonym table.
pub fn normalize_vehicles(text: &str) -> VehicleTypes {
    let s = clean(text);
    if is_unknown(&s) {
        return VehicleTypes::default();
    }
    let tokens = s
        .split([',', ';', '/', '&', '|'])
        .flat_map(|part| {
            let words: Vec<&str> = part.split_whitespace().collect();
            words
                .split(|w| *w == "and")
                .map(|ws| ws.join(" "))
                .collect::<Vec<_>>()
        })
        .map(|t| canonical_vehicle(&t))
        .filter(|t| !t.is_empty() && t != "unknown");
    VehicleTypes::from_tokens(tokens).expect("normalized vehicle tokens are canonical")
}
