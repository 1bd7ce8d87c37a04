use std::path::Path;

/// The four prompt templates. User templates use `{title}` and `{body}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub triage_system: String,
    pub triage_user: String,
    pub extract_system: String,
    pub extract_user: String,
}

pub const TRIAGE_REASK: &str = "Answer with exactly one word: Specific or General";

const FILES: [&str; 4] = [
    "triage_system.txt",
    "triage_user.txt",
    "extract_system.txt",
    "extract_user.txt",
];

impl PromptSet {
    pub fn builtin() -> Self {
        Self {
            triage_system: include_str!("../../prompts/v1/triage_system.txt").to_string(),
            triage_user: include_str!("../../prompts/v1/triage_user.txt").to_string(),
            extract_system: include_str!("../../prompts/v1/extract_system.txt").to_string(),
            extract_user: include_str!("../../prompts/v1/extract_user.txt").to_string(),
        }
    }

    /// Load all four templates from a directory using the built-in file names.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let read = |name: &str| std::fs::read_to_string(dir.join(name));
        let set = Self {
            triage_system: read(FILES[0])?,
            triage_user: read(FILES[1])?,
            extract_system: read(FILES[2])?,
            extract_user: read(FILES[3])?,
        };
        for (name, template) in [(FILES[1], &set.triage_user), (FILES[3], &set.extract_user)] {
            if !template.contains("{body}") {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{name} has no {{body}} placeholder"),
                ));
            }
        }
        Ok(set)
    }
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Substitute `{title}` and `{body}` in one left-to-right pass, so
/// placeholder-like text inside the values is left alone.
pub fn render(template: &str, title: &str, body: &str) -> String {
    let mut out = String::with_capacity(template.len() + title.len() + body.len());
    let mut rest = template;
    while let Some(i) = rest.find('{') {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        if let Some(after) = tail.strip_prefix("{title}") {
            out.push_str(title);
            rest = after;
        } else if let Some(after) = tail.strip_prefix("{body}") {
            out.push_str(body);
            rest = after;
        } else {
            out.push('{');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    out
}
