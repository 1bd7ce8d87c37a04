use std::collections::{HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use url::Url;

use super::clock::Clock;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

impl TransportResponse {
    pub fn ok(body: impl Into<Vec<u8>>) -> Self {
        Self {
            status: 200,
            body: body.into(),
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            body: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("network error: {0}")]
    Network(String),
}

/// One HTTP GET. Implementations do not retry; retry policy lives in the
/// fetcher.
pub trait Transport: Send + Sync {
    fn get(
        &self,
        url: &Url,
        user_agent: &str,
        timeout: Duration,
    ) -> Result<TransportResponse, TransportError>;
}

/// Real network transport.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new() -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for HttpTransport {
    fn get(
        &self,
        url: &Url,
        user_agent: &str,
        timeout: Duration,
    ) -> Result<TransportResponse, TransportError> {
        let response = self
            .client
            .get(url.as_str())
            .header(reqwest::header::USER_AGENT, user_agent)
            .timeout(timeout)
            .send()
            .map_err(classify_reqwest)?;
        let status = response.status().as_u16();
        let body = response.bytes().map_err(classify_reqwest)?.to_vec();
        Ok(TransportResponse { status, body })
    }
}

fn classify_reqwest(err: reqwest::Error) -> TransportError {
    if err.is_timeout() {
        TransportError::Timeout
    } else {
        TransportError::Network(err.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub url: String,
    pub user_agent: String,
    /// Monotonic clock reading when the request was issued.
    pub at: Duration,
}

/// Scripted replies for one URL.
pub type Reply = Result<TransportResponse, TransportError>;

/// In-memory transport for tests: replays scripted replies per URL and
/// records every request with a timestamp from the shared clock.
///
/// Replies for a URL are consumed in order; the last one repeats. URLs
/// without a script answer 404.
pub struct ScriptedTransport {
    clock: Arc<dyn Clock>,
    routes: Mutex<HashMap<String, VecDeque<Reply>>>,
    log: Mutex<Vec<RecordedRequest>>,
}

impl ScriptedTransport {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            routes: Mutex::new(HashMap::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn route(&self, url: &str, replies: Vec<Reply>) -> &Self {
        self.routes
            .lock()
            .unwrap()
            .insert(url.to_string(), replies.into());
        self
    }

    pub fn serve(&self, url: &str, body: impl Into<Vec<u8>>) -> &Self {
        self.route(url, vec![Ok(TransportResponse::ok(body))])
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.log.lock().unwrap().clone()
    }

    pub fn request_count(&self, url: &str) -> usize {
        self.log
            .lock()
            .unwrap()
            .iter()
            .filter(|r| r.url == url)
            .count()
    }
}

impl Transport for ScriptedTransport {
    fn get(
        &self,
        url: &Url,
        user_agent: &str,
        _timeout: Duration,
    ) -> Result<TransportResponse, TransportError> {
        self.log.lock().unwrap().push(RecordedRequest {
            url: url.to_string(),
            user_agent: user_agent.to_string(),
            at: self.clock.now(),
        });
        let mut routes = self.routes.lock().unwrap();
        match routes.get_mut(url.as_str()) {
            Some(queue) if queue.len() > 1 => queue.pop_front().unwrap(),
            Some(queue) => queue
                .front()
                .cloned()
                .unwrap_or_else(|| Ok(TransportResponse::status(404))),
            None => Ok(TransportResponse::status(404)),
        }
    }
}

/// Offline transport serving files from a directory laid out as
/// `<root>/<host>/<path>`. A path ending in `/` maps to `index.html`.
/// Missing files answer 404; the query string is ignored.
#[derive(Debug, Clone)]
pub struct FixtureTransport {
    root: PathBuf,
}

impl FixtureTransport {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn file_for(&self, url: &Url) -> Option<PathBuf> {
        let host = url.host_str()?;
        let mut path = self.root.join(host);
        let segments: Vec<&str> = url.path_segments()?.collect();
        for seg in &segments {
            if seg.is_empty() || *seg == "." || *seg == ".." {
                continue;
            }
            path.push(seg);
        }
        if segments.last().is_none_or(|s| s.is_empty()) {
            path.push("index.html");
        }
        Some(path)
    }
}

impl Transport for FixtureTransport {
    fn get(
        &self,
        url: &Url,
        _user_agent: &str,
        _timeout: Duration,
    ) -> Result<TransportResponse, TransportError> {
        match self.file_for(url).map(std::fs::read) {
            Some(Ok(body)) => Ok(TransportResponse::ok(body)),
            _ => Ok(TransportResponse::status(404)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netfetch::clock::ManualClock;
    use chrono::Utc;

    #[test]
    fn scripted_replies_are_consumed_then_last_repeats() {
        let clock = Arc::new(ManualClock::new(Utc::now()));
        let t = ScriptedTransport::new(clock);
        t.route(
            "http://a.test/x",
            vec![Ok(TransportResponse::status(503)), Ok(TransportResponse::ok("hi"))],
        );
        let url = Url::parse("http://a.test/x").unwrap();
        let timeout = Duration::from_secs(1);
        assert_eq!(t.get(&url, "ua", timeout).unwrap().status, 503);
        assert_eq!(t.get(&url, "ua", timeout).unwrap().status, 200);
        assert_eq!(t.get(&url, "ua", timeout).unwrap().status, 200);
        assert_eq!(t.request_count("http://a.test/x"), 3);
        let other = Url::parse("http://a.test/y").unwrap();
        assert_eq!(t.get(&other, "ua", timeout).unwrap().status, 404);
    }

    #[test]
    fn fixture_transport_maps_urls_to_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("site.test/news")).unwrap();
        std::fs::write(dir.path().join("site.test/news/index.html"), "listing").unwrap();
        std::fs::write(dir.path().join("site.test/news/a1.html"), "article").unwrap();
        let t = FixtureTransport::new(dir.path());
        let get = |u: &str| t.get(&Url::parse(u).unwrap(), "ua", Duration::from_secs(1)).unwrap();
        assert_eq!(get("http://site.test/news/").body, b"listing");
        assert_eq!(get("http://site.test/news/a1.html?x=1").body, b"article");
        assert_eq!(get("http://site.test/robots.txt").status, 404);
        assert_eq!(get("http://site.test/../etc/passwd").status, 404);
    }
}
