//! Strict parsing of the extraction chain's JSON answer.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EXTRACTION_KEYS;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StructuredOutputError {
    #[error("no JSON object found in the answer")]
    NoJsonFound,
    #[error("wrong keys: missing {missing:?}, unexpected {extra:?}")]
    WrongKeys {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("invalid JSON: {0}")]
    JsonSyntax(String),
}

/// The eight answers exactly as the model gave them; JSON `null` is `None`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExtraction {
    pub accident_date: Option<String>,
    pub time: Option<String>,
    pub injured: Option<String>,
    pub killed: Option<String>,
    pub location: Option<String>,
    pub road_characteristics: Option<String>,
    pub pedestrian_involved: Option<String>,
    pub vehicle_types: Option<String>,
}

/// Byte range of the first balanced `{...}` region, honouring JSON string
/// quoting. `None` when there is no `{`; `Some(Err)` when it never closes.
fn first_object(text: &str) -> Option<Result<&str, StructuredOutputError>> {
    let start = text.find('{')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(Ok(&text[start..start + i + 1]));
                }
            }
            _ => {}
        }
    }
    Some(Err(StructuredOutputError::JsonSyntax(
        "unbalanced braces".into(),
    )))
}

fn coerce(value: &Value) -> Option<String> {
    match value {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(items) => Some(
            items
                .iter()
                .filter_map(coerce)
                .collect::<Vec<_>>()
                .join(", "),
        ),
        Value::Object(_) => Some(value.to_string()),
    }
}

/// Find the first balanced JSON object in `text` and require exactly the
/// eight extraction keys. Values are coerced to strings.
pub fn parse_structured_output(text: &str) -> Result<RawExtraction, StructuredOutputError> {
    let region = first_object(text).ok_or(StructuredOutputError::NoJsonFound)??;
    let value: Value = serde_json::from_str(region)
        .map_err(|e| StructuredOutputError::JsonSyntax(e.to_string()))?;
    let map = value
        .as_object()
        .ok_or_else(|| StructuredOutputError::JsonSyntax("not an object".into()))?;

    let missing: Vec<String> = EXTRACTION_KEYS
        .iter()
        .filter(|k| !map.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    let mut extra: Vec<String> = map
        .keys()
        .filter(|k| !EXTRACTION_KEYS.contains(&k.as_str()))
        .cloned()
        .collect();
    extra.sort();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(StructuredOutputError::WrongKeys { missing, extra });
    }

    let get = |k: &str| coerce(&map[k]);
    Ok(RawExtraction {
        accident_date: get("accident_date"),
        time: get("time"),
        injured: get("injured"),
        killed: get("killed"),
        location: get("location"),
        road_characteristics: get("road_characteristics"),
        pedestrian_involved: get("pedestrian_involved"),
        vehicle_types: get("vehicle_types"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{"accident_date": "9 April 2024", "time": "5:30 pm", "injured": "3", "killed": "two", "location": "Dhaka-Mawa highway", "road_characteristics": "highway", "pedestrian_involved": "no", "vehicle_types": "bus, motorcycle"}"#;

    #[test]
    fn fenced_json_is_found() {
        let text = format!("Here you go:\n```json\n{FULL}\n```\nHope this helps.");
        let raw = parse_structured_output(&text).unwrap();
        assert_eq!(raw.killed.as_deref(), Some("two"));
        assert_eq!(raw.vehicle_types.as_deref(), Some("bus, motorcycle"));
    }

    #[test]
    fn seven_keys_reports_missing() {
        let text = FULL.replace(r#", "time": "5:30 pm""#, "");
        assert_eq!(
            parse_structured_output(&text),
            Err(StructuredOutputError::WrongKeys {
                missing: vec!["time".into()],
                extra: vec![]
            })
        );
    }

    #[test]
    fn extra_keys_are_rejected() {
        let text = FULL.replace('}', r#", "weather": "rain"}"#);
        assert_eq!(
            parse_structured_output(&text),
            Err(StructuredOutputError::WrongKeys {
                missing: vec![],
                extra: vec!["weather".into()]
            })
        );
    }

    #[test]
    fn prose_has_no_json() {
        assert_eq!(
            parse_structured_output("The answer is 5"),
            Err(StructuredOutputError::NoJsonFound)
        );
    }

    #[test]
    fn syntax_errors() {
        assert!(matches!(
            parse_structured_output(r#"{"accident_date": "x""#),
            Err(StructuredOutputError::JsonSyntax(_))
        ));
        assert!(matches!(
            parse_structured_output(r#"{accident_date: x}"#),
            Err(StructuredOutputError::JsonSyntax(_))
        ));
    }

    #[test]
    fn braces_inside_strings_do_not_confuse_the_scan() {
        let text = FULL.replace("Dhaka-Mawa highway", "near {the} \\\"bridge}\\\"");
        let raw = parse_structured_output(&text).unwrap();
        assert_eq!(raw.location.as_deref(), Some("near {the} \"bridge}\""));
    }

    #[test]
    fn values_are_coerced_to_strings() {
        let text = r#"{"accident_date": null, "time": "unknown", "injured": 3, "killed": 0, "location": "x", "road_characteristics": {"type": "bridge"}, "pedestrian_involved": true, "vehicle_types": ["bus", "truck"]}"#;
        let raw = parse_structured_output(text).unwrap();
        assert_eq!(raw.accident_date, None);
        assert_eq!(raw.injured.as_deref(), Some("3"));
        assert_eq!(raw.killed.as_deref(), Some("0"));
        assert_eq!(raw.road_characteristics.as_deref(), Some(r#"{"type":"bridge"}"#));
        assert_eq!(raw.pedestrian_involved.as_deref(), Some("true"));
        assert_eq!(raw.vehicle_types.as_deref(), Some("bus, truck"));
    }
}
