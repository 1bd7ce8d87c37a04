//! Robots Exclusion Protocol parsing and matching.
//!
//! Supports the subset of RFC 9309 that matters for a polite news crawler:
//! `User-agent`, `Allow` and `Disallow` lines, longest-match precedence and
//! the `*` fallback group. Path patterns are plain prefixes. `Crawl-delay`,
//! `Sitemap` and any other directive are accepted and ignored.

use percent_encoding::percent_decode_str;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleKind {
    Allow,
    Disallow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub kind: RuleKind,
    /// Percent-decoded path prefix. May be empty.
    pub path: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    /// Lowercased product tokens from the group's `User-agent` lines.
    pub agents: Vec<String>,
    pub rules: Vec<Rule>,
}

/// A parsed robots.txt file. Groups keep file order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotsPolicy {
    pub groups: Vec<Group>,
}

impl RobotsPolicy {
    /// Policy with no groups; everything is allowed.
    pub fn allow_all() -> Self {
        Self::default()
    }

    pub fn is_allowed(&self, agent: &str, path: &str) -> bool {
        is_allowed(self, agent, path)
    }
}

/// Parse raw robots.txt bytes, replacing invalid UTF-8.
pub fn parse_robots_bytes(bytes: &[u8]) -> RobotsPolicy {
    parse_robots(&String::from_utf8_lossy(bytes))
}

/// Lenient robots.txt parser. Never fails; unrecognised lines are skipped.
pub fn parse_robots(text: &str) -> RobotsPolicy {
    let mut groups: Vec<Group> = Vec::new();
    // True while we are still reading the User-agent lines that open a group.
    let mut in_agent_run = false;

    for raw_line in text.split(['\n', '\r']) {
        let line = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();

        match key.as_str() {
            "user-agent" => {
                let token = value.to_lowercase();
                if in_agent_run {
                    if let Some(group) = groups.last_mut() {
                        group.agents.push(token);
                    }
                } else {
                    groups.push(Group {
                        agents: vec![token],
                        rules: Vec::new(),
                    });
                    in_agent_run = true;
                }
            }
            "allow" | "disallow" => {
                in_agent_run = false;
                // Rules before the first User-agent line belong to no group.
                let Some(group) = groups.last_mut() else {
                    continue;
                };
                let kind = if key == "allow" {
                    RuleKind::Allow
                } else {
                    RuleKind::Disallow
                };
                group.rules.push(Rule {
                    kind,
                    path: decode_path(value),
                });
            }
            // sitemap, crawl-delay, host, ... : parsed and ignored. They do
            // not terminate the agent run because they are not group members.
            _ => {}
        }
    }

    RobotsPolicy { groups }
}

fn decode_path(raw: &str) -> String {
    percent_decode_str(raw).decode_utf8_lossy().into_owned()
}

/// The product token of a crawler user-agent string, e.g.
/// `"RoadwatchBot/0.1 (+https://example.org)"` yields `"roadwatchbot"`.
fn product_token(agent: &str) -> String {
    agent
        .trim()
        .split(|c: char| c == '/' || c.is_whitespace())
        .next()
        .unwrap_or("")
        .to_lowercase()
}

/// Decide whether `agent` may fetch `path` under `policy`.
///
/// The most specific group wins: a group whose token is a prefix of the
/// crawler's product token beats `*`, and longer tokens beat shorter ones.
/// Groups naming the same winning token are merged. Within the selected
/// rules the longest matching prefix decides; an Allow wins a tie.
pub fn is_allowed(policy: &RobotsPolicy, agent: &str, path: &str) -> bool {
    if path == "/robots.txt" {
        return true;
    }
    let token = product_token(agent);

    let mut best_len: Option<usize> = None;
    for group in &policy.groups {
        for pattern in &group.agents {
            if pattern != "*" && !pattern.is_empty() && token.starts_with(pattern.as_str()) {
                best_len = Some(best_len.map_or(pattern.len(), |b| b.max(pattern.len())));
            }
        }
    }

    let selected: Vec<&Group> = match best_len {
        Some(len) => policy
            .groups
            .iter()
            .filter(|g| {
                g.agents
                    .iter()
                    .any(|p| p != "*" && p.len() == len && token.starts_with(p.as_str()))
            })
            .collect(),
        None => policy
            .groups
            .iter()
            .filter(|g| g.agents.iter().any(|p| p == "*"))
            .collect(),
    };
    if selected.is_empty() {
        return true;
    }

    let path = decode_path(path);
    let mut verdict: Option<(usize, RuleKind)> = None;
    for rule in selected.iter().flat_map(|g| g.rules.iter()) {
        if rule.path.is_empty() || !path.starts_with(rule.path.as_str()) {
            continue;
        }
        let len = rule.path.len();
        verdict = match verdict {
            None => Some((len, rule.kind)),
            Some((best, _)) if len > best => Some((len, rule.kind)),
            Some((best, _)) if len == best && rule.kind == RuleKind::Allow => {
                Some((len, RuleKind::Allow))
            }
            keep => keep,
        };
    }

    !matches!(verdict, Some((_, RuleKind::Disallow)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_has_no_groups() {
        let policy = parse_robots("");
        assert!(policy.groups.is_empty());
        assert!(is_allowed(&policy, "roadwatch-bot", "/news/x"));
    }

    #[test]
    fn single_disallow() {
        let policy = parse_robots("User-agent: *\nDisallow: /private/");
        assert_eq!(policy.groups.len(), 1);
        assert_eq!(policy.groups[0].agents, vec!["*"]);
        assert_eq!(
            policy.groups[0].rules,
            vec![Rule {
                kind: RuleKind::Disallow,
                path: "/private/".into()
            }]
        );
        assert!(!is_allowed(&policy, "*", "/private/a"));
        assert!(is_allowed(&policy, "*", "/public/a"));
    }

    #[test]
    fn rules_keep_file_order_and_longest_match_wins() {
        let policy = parse_robots("User-agent: *\nDisallow: /news\nAllow: /news/accidents");
        let kinds: Vec<_> = policy.groups[0].rules.iter().map(|r| r.kind).collect();
        assert_eq!(kinds, vec![RuleKind::Disallow, RuleKind::Allow]);
        assert!(is_allowed(&policy, "*", "/news/accidents/1"));
        assert!(!is_allowed(&policy, "*", "/news/politics"));
    }

    #[test]
    fn equal_length_tie_goes_to_allow() {
        let policy = parse_robots("User-agent: *\nDisallow: /page\nAllow: /page");
        assert!(is_allowed(&policy, "bot", "/page/1"));
        let policy = parse_robots("User-agent: *\nAllow: /page\nDisallow: /page");
        assert!(is_allowed(&policy, "bot", "/page/1"));
    }

    #[test]
    fn empty_disallow_blocks_nothing() {
        let policy = parse_robots("User-agent: *\nDisallow:\n");
        assert!(is_allowed(&policy, "bot", "/anything"));
    }

    #[test]
    fn specific_group_beats_wildcard() {
        let text = "User-agent: *\nDisallow: /\n\nUser-agent: roadwatch\nAllow: /\nDisallow: /admin\n";
        let policy = parse_robots(text);
        assert!(is_allowed(&policy, "Roadwatch/0.1", "/news"));
        assert!(!is_allowed(&policy, "Roadwatch/0.1", "/admin/x"));
        assert!(!is_allowed(&policy, "otherbot", "/news"));
    }

    #[test]
    fn consecutive_agents_share_a_group() {
        let policy = parse_robots("User-agent: a\nUser-agent: b\nDisallow: /x\nUser-agent: c\nDisallow: /y");
        assert_eq!(policy.groups.len(), 2);
        assert_eq!(policy.groups[0].agents, vec!["a", "b"]);
        assert!(!is_allowed(&policy, "b", "/x"));
        assert!(is_allowed(&policy, "c", "/x"));
    }

    #[test]
    fn no_matching_group_allows() {
        let policy = parse_robots("User-agent: googlebot\nDisallow: /");
        assert!(is_allowed(&policy, "roadwatch", "/"));
    }

    #[test]
    fn ignores_comments_unknown_directives_and_orphan_rules() {
        let text = "Disallow: /orphan\n# comment\nSitemap: https://x/s.xml\nUser-agent: * # all\nCrawl-delay: 10\nDisallow: /tmp # temp\ngarbage line\n";
        let policy = parse_robots(text);
        assert_eq!(policy.groups.len(), 1);
        assert_eq!(policy.groups[0].rules.len(), 1);
        assert_eq!(policy.groups[0].rules[0].path, "/tmp");
        assert!(is_allowed(&policy, "bot", "/orphan"));
    }

    #[test]
    fn rule_paths_are_percent_decoded() {
        let policy = parse_robots("User-agent: *\nDisallow: /%7Euser/");
        assert_eq!(policy.groups[0].rules[0].path, "/~user/");
        assert!(!is_allowed(&policy, "bot", "/~user/page"));
        assert!(!is_allowed(&policy, "bot", "/%7Euser/page"));
    }

    #[test]
    fn robots_txt_itself_is_always_allowed() {
        let policy = parse_robots("User-agent: *\nDisallow: /");
        assert!(is_allowed(&policy, "bot", "/robots.txt"));
    }

    #[test]
    fn invalid_utf8_is_tolerated() {
        let policy = parse_robots_bytes(b"User-agent: *\nDisallow: /\xff\xfe\n");
        assert_eq!(policy.groups.len(), 1);
    }
}
