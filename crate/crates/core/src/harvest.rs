//! Site configs, news index harvesting and article body extraction.

use std::collections::HashSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::markup::{
    collapse_whitespace, extract_value, parse_html, parse_selector, select, DomNode, Element,
    Selector,
};
use crate::netfetch::{FetchError, Fetcher};
use crate::pool::bounded_map;

#[derive(Debug, thiserror::Error)]
pub enum HarvestError {
    #[error("invalid site config field {field}: {message}")]
    ConfigInvalid { field: String, message: String },
    #[error("no article text found at {url}")]
    EmptyBody { url: String },
    #[error(transparent)]
    Fetch(#[from] FetchError),
}

impl HarvestError {
    pub fn kind(&self) -> &'static str {
        match self {
            HarvestError::ConfigInvalid { .. } => "config_invalid",
            HarvestError::EmptyBody { .. } => "empty_body",
            HarvestError::Fetch(e) => e.kind(),
        }
    }
}

fn invalid(field: &str, message: impl Into<String>) -> HarvestError {
    HarvestError::ConfigInvalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSelectors {
    pub title: Selector,
    pub link: Selector,
    pub date: Selector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteConfig {
    pub source_name: String,
    pub listing_urls: Vec<Url>,
    pub index_selectors: IndexSelectors,
    pub article_body_selector: Option<Selector>,
    pub title_keywords: Option<Vec<String>>,
    pub max_pages: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndexSelectors {
    title: Option<String>,
    link: Option<String>,
    date: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSiteConfig {
    source_name: Option<String>,
    listing_urls: Option<Vec<String>>,
    index_selectors: Option<RawIndexSelectors>,
    article_body_selector: Option<String>,
    title_keywords: Option<Vec<String>>,
    max_pages: Option<i64>,
}

fn required_selector(field: &str, raw: Option<String>) -> Result<Selector, HarvestError> {
    let text = raw.ok_or_else(|| invalid(field, "missing"))?;
    parse_selector(&text).map_err(|e| invalid(field, e.to_string()))
}

/// Parse and validate a site config JSON document.
pub fn load_site_config(bytes: &[u8]) -> Result<SiteConfig, HarvestError> {
    let raw: RawSiteConfig =
        serde_json::from_slice(bytes).map_err(|e| invalid("(document)", e.to_string()))?;

    let source_name = raw
        .source_name
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| invalid("source_name", "missing or empty"))?;

    let raw_urls = raw
        .listing_urls
        .filter(|u| !u.is_empty())
        .ok_or_else(|| invalid("listing_urls", "at least one listing url is required"))?;
    let mut listing_urls = Vec::with_capacity(raw_urls.len());
    for (i, u) in raw_urls.iter().enumerate() {
        let field = format!("listing_urls[{i}]");
        let url = Url::parse(u).map_err(|e| invalid(&field, e.to_string()))?;
        if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
            return Err(invalid(&field, "expected an absolute http(s) url"));
        }
        if let Some(first) = listing_urls.first() {
            let first: &Url = first;
            if first.host_str() != url.host_str() {
                return Err(invalid(&field, "all listing urls must share one host"));
            }
        }
        listing_urls.push(url);
    }

    let sels = raw
        .index_selectors
        .ok_or_else(|| invalid("index_selectors", "missing"))?;
    let index_selectors = IndexSelectors {
        title: required_selector("index_selectors.title", sels.title)?,
        link: required_selector("index_selectors.link", sels.link)?,
        date: required_selector("index_selectors.date", sels.date)?,
    };

    let article_body_selector = raw
        .article_body_selector
        .map(|s| parse_selector(&s).map_err(|e| invalid("article_body_selector", e.to_string())))
        .transpose()?;

    let title_keywords = raw.title_keywords.map(|kws| {
        kws.into_iter()
            .map(|k| k.trim().to_lowercase())
            .filter(|k| !k.is_empty())
            .collect::<Vec<_>>()
    });

    let max_pages = match raw.max_pages {
        None => 1,
        Some(n) if n >= 1 => n as usize,
        Some(n) => return Err(invalid("max_pages", format!("must be at least 1, got {n}"))),
    };

    Ok(SiteConfig {
        source_name,
        listing_urls,
        index_selectors,
        article_body_selector,
        title_keywords,
        max_pages,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsIndexEntry {
    pub title: String,
    pub link: String,
    /// As displayed on the listing page; normalized later.
    pub publish_date: String,
    pub source_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    #[serde(flatten)]
    pub entry: NewsIndexEntry,
    pub body: String,
    pub fetched_at: DateTime<Utc>,
}

/// Something that went wrong but did not stop the harvest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestWarning {
    pub source: String,
    pub url: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestedIndex {
    pub entries: Vec<NewsIndexEntry>,
    pub warnings: Vec<HarvestWarning>,
}

fn document(html: &[u8]) -> Element {
    match parse_html(&String::from_utf8_lossy(html)) {
        DomNode::Element(e) => e,
        DomNode::Text(_) => unreachable!("parse_html returns an element root"),
    }
}

fn values(root: &Element, sel: &Selector) -> Vec<Option<String>> {
    select(root, sel)
        .into_iter()
        .map(|e| extract_value(e, &sel.accessor).ok())
        .collect()
}

fn title_passes(cfg: &SiteConfig, title: &str) -> bool {
    match &cfg.title_keywords {
        None => true,
        Some(kws) if kws.is_empty() => true,
        Some(kws) => {
            let lower = title.to_lowercase();
            kws.iter().any(|k| lower.contains(k.as_str()))
        }
    }
}

/// Scrape the listing pages of one site into index entries, in page order.
/// Page-level failures become warnings.
pub fn harvest_index(cfg: &SiteConfig, fetcher: &Fetcher) -> HarvestedIndex {
    let mut out = HarvestedIndex::default();
    let warn = |url: &Url, kind: &str, message: String| {
        log::warn!("{}: {url}: {message}", cfg.source_name);
        HarvestWarning {
            source: cfg.source_name.clone(),
            url: url.to_string(),
            kind: kind.to_string(),
            message,
        }
    };

    for listing in cfg.listing_urls.iter().take(cfg.max_pages) {
        let page = match fetcher.fetch_url(listing) {
            Ok(page) => page,
            Err(err) => {
                out.warnings.push(warn(listing, err.kind(), err.to_string()));
                continue;
            }
        };
        let root = document(&page.body);
        let titles = values(&root, &cfg.index_selectors.title);
        let links = values(&root, &cfg.index_selectors.link);
        let dates = values(&root, &cfg.index_selectors.date);

        let n = titles.len().min(links.len()).min(dates.len());
        if titles.len() != n || links.len() != n || dates.len() != n {
            out.warnings.push(warn(
                listing,
                "selector_mismatch",
                format!(
                    "title/link/date matched {}/{}/{} elements; keeping the first {n}",
                    titles.len(),
                    links.len(),
                    dates.len()
                ),
            ));
        }

        for (i, ((title, link), date)) in titles.into_iter().zip(links).zip(dates).enumerate() {
            let (Some(title), Some(link), Some(date)) = (title, link, date) else {
                out.warnings.push(warn(
                    listing,
                    "missing_value",
                    format!("index row {} lacks a title, link or date value", i + 1),
                ));
                continue;
            };
            let resolved = match listing.join(link.trim()) {
                Ok(u) if matches!(u.scheme(), "http" | "https") => u,
                _ => {
                    out.warnings.push(warn(
                        listing,
                        "bad_link",
                        format!("cannot resolve link {link:?}"),
                    ));
                    continue;
                }
            };
            if !title_passes(cfg, &title) {
                continue;
            }
            out.entries.push(NewsIndexEntry {
                title,
                link: resolved.to_string(),
                publish_date: date,
                source_name: cfg.source_name.clone(),
            });
        }
    }
    out
}

/// Stable removal of entries whose link was already seen.
pub fn dedup_entries(entries: Vec<NewsIndexEntry>) -> Vec<NewsIndexEntry> {
    let mut seen = HashSet::new();
    entries
        .into_iter()
        .filter(|e| seen.insert(e.link.clone()))
        .collect()
}

/// Generic main-text heuristic: the element whose direct `p` children carry
/// the most text wins, and those paragraphs are the body. Ties go to the
/// earliest element in document order.
pub fn extract_main_text(root: &Element) -> Option<String> {
    let mut best: Option<(usize, Vec<String>)> = None;
    for candidate in std::iter::once(root).chain(root.descendants()) {
        let paragraphs: Vec<String> = candidate
            .child_elements()
            .filter(|c| c.tag == "p")
            .map(Element::text_content)
            .filter(|t| !t.is_empty())
            .collect();
        let mass: usize = paragraphs.iter().map(|p| p.chars().count()).sum();
        if mass > 0 && best.as_ref().is_none_or(|(m, _)| mass > *m) {
            best = Some((mass, paragraphs));
        }
    }
    best.map(|(_, ps)| ps.join("\n\n"))
}

fn body_from_selector(root: &Element, sel: &Selector) -> Option<String> {
    let parts: Vec<String> = select(root, sel)
        .into_iter()
        .filter_map(|e| extract_value(e, &sel.accessor).ok())
        .map(|t| collapse_whitespace(&t))
        .filter(|t| !t.is_empty())
        .collect();
    (!parts.is_empty()).then(|| parts.join("\n\n"))
}

/// Download one article and pull out its body text.
pub fn fetch_article(
    entry: &NewsIndexEntry,
    cfg: &SiteConfig,
    fetcher: &Fetcher,
) -> Result<Article, HarvestError> {
    let page = fetcher.fetch(&entry.link)?;
    let root = document(&page.body);
    let body = cfg
        .article_body_selector
        .as_ref()
        .and_then(|sel| body_from_selector(&root, sel))
        .or_else(|| extract_main_text(&root))
        .ok_or_else(|| HarvestError::EmptyBody {
            url: entry.link.clone(),
        })?;
    Ok(Article {
        entry: entry.clone(),
        body,
        fetched_at: page.fetched_at,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HarvestRun {
    pub index: Vec<NewsIndexEntry>,
    pub articles: Vec<Article>,
    pub warnings: Vec<HarvestWarning>,
}

/// Harvest several sites: index every site, dedup across sites, then fetch
/// article bodies with at most `bound` concurrent workers. Output order is
/// config order, then page order.
pub fn harvest_sites(sites: &[SiteConfig], fetcher: &Fetcher, bound: usize) -> HarvestRun {
    let mut run = HarvestRun::default();
    let mut indexed: Vec<(usize, NewsIndexEntry)> = Vec::new();
    for (i, site) in sites.iter().enumerate() {
        let harvested = harvest_index(site, fetcher);
        run.warnings.extend(harvested.warnings);
        indexed.extend(harvested.entries.into_iter().map(|e| (i, e)));
    }

    let mut seen = HashSet::new();
    indexed.retain(|(_, e)| seen.insert(e.link.clone()));
    run.index = indexed.iter().map(|(_, e)| e.clone()).collect();

    let fetched = bounded_map(&indexed, bound, |(site, entry)| {
        fetch_article(entry, &sites[*site], fetcher)
    });
    for ((_, entry), result) in indexed.iter().zip(fetched) {
        match result {
            Ok(article) => run.articles.push(article),
            Err(err) => {
                log::warn!("{}: {}: {err}", entry.source_name, entry.link);
                run.warnings.push(HarvestWarning {
                    source: entry.source_name.clone(),
                    url: entry.link.clone(),
                    kind: err.kind().to_string(),
                    message: err.to_string(),
                });
            }
        }
    }
    run
}
