//! Polite HTTP retrieval: robots.txt compliance, per-host spacing and
//! bounded retry with a fixed backoff schedule.
//!
//! This is the only module that talks to the network, and it does so through
//! the [`Transport`] trait so every behaviour can be driven by a scripted
//! transport and a [`ManualClock`] in tests.

mod clock;
mod robots;
mod transport;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use chrono::{DateTime, Utc};
use url::Url;

pub use clock::{Clock, ManualClock, SystemClock};
pub use robots::{is_allowed, parse_robots, parse_robots_bytes, Group, RobotsPolicy, Rule, RuleKind};
pub use transport::{
    FixtureTransport, HttpTransport, RecordedRequest, Reply, ScriptedTransport, Transport,
    TransportError, TransportResponse,
};

pub const DEFAULT_USER_AGENT: &str = "roadwatch-bot/0.1";

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("invalid url {url:?}: {message}")]
    InvalidUrl { url: String, message: String },
    #[error("robots.txt disallows {url}")]
    RobotsDenied { url: String },
    #[error("giving up on {url} after {attempts} attempts: {last_error}")]
    ExhaustedRetries {
        url: String,
        attempts: u32,
        last_error: String,
    },
    #[error("{url} answered HTTP {status}")]
    NonRetryable {
        url: String,
        status: u16,
        attempts: u32,
    },
    #[error("invalid fetch options: {0}")]
    InvalidOptions(String),
}

impl FetchError {
    /// Short machine-readable tag, used in warning ledgers.
    pub fn kind(&self) -> &'static str {
        match self {
            FetchError::InvalidUrl { .. } => "invalid_url",
            FetchError::RobotsDenied { .. } => "robots_denied",
            FetchError::ExhaustedRetries { .. } => "exhausted_retries",
            FetchError::NonRetryable { .. } => "non_retryable",
            FetchError::InvalidOptions(_) => "invalid_options",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchOptions {
    pub user_agent: String,
    pub max_retries: u32,
    /// Sleep before retry `i + 1`. Must hold at least `max_retries` entries.
    pub backoff: Vec<Duration>,
    pub per_host_delay: Duration,
    pub timeout: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            user_agent: DEFAULT_USER_AGENT.to_string(),
            max_retries: 2,
            backoff: vec![Duration::from_secs(5), Duration::from_secs(10)],
            per_host_delay: Duration::from_secs(2),
            timeout: Duration::from_secs(30),
        }
    }
}

impl FetchOptions {
    pub fn validate(&self) -> Result<(), FetchError> {
        if self.backoff.len() < self.max_retries as usize {
            return Err(FetchError::InvalidOptions(format!(
                "backoff schedule has {} entries but max_retries is {}",
                self.backoff.len(),
                self.max_retries
            )));
        }
        if self.user_agent.trim().is_empty() {
            return Err(FetchError::InvalidOptions("user agent is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchResult {
    pub url: String,
    pub status: u16,
    pub body: Vec<u8>,
    pub attempts: u32,
    pub fetched_at: DateTime<Utc>,
}

impl FetchResult {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.body).into_owned()
    }
}

/// Serializes requests per host and keeps at least `delay` between the
/// starts of any two requests to the same host. Distinct hosts do not block
/// each other.
pub struct HostGate {
    clock: Arc<dyn Clock>,
    delay: Duration,
    slots: Mutex<HashMap<String, Arc<Mutex<Option<Duration>>>>>,
}

impl HostGate {
    pub fn new(clock: Arc<dyn Clock>, delay: Duration) -> Self {
        Self {
            clock,
            delay,
            slots: Mutex::new(HashMap::new()),
        }
    }

    /// Run `request` as the next request to `host`, waiting first if the
    /// previous one started less than `delay` ago.
    pub fn run<T>(&self, host: &str, request: impl FnOnce() -> T) -> T {
        let slot = self
            .slots
            .lock()
            .unwrap()
            .entry(host.to_string())
            .or_default()
            .clone();
        let mut last = slot.lock().unwrap();
        if let Some(previous) = *last {
            let ready = previous + self.delay;
            let now = self.clock.now();
            if ready > now {
                self.clock.sleep(ready - now);
            }
        }
        *last = Some(self.clock.now());
        request()
    }
}

fn host_key(url: &Url) -> String {
    format!(
        "{}:{}",
        url.host_str().unwrap_or_default(),
        url.port_or_known_default().unwrap_or(0)
    )
}

fn is_transient_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

/// REP-compliant fetcher with a per-origin robots.txt cache.
pub struct Fetcher {
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    opts: FetchOptions,
    gate: Arc<HostGate>,
    policies: Mutex<HashMap<String, Arc<OnceLock<Arc<RobotsPolicy>>>>>,
}

impl Fetcher {
    pub fn new(
        transport: Arc<dyn Transport>,
        clock: Arc<dyn Clock>,
        opts: FetchOptions,
    ) -> Result<Self, FetchError> {
        opts.validate()?;
        let gate = Arc::new(HostGate::new(clock.clone(), opts.per_host_delay));
        Ok(Self {
            transport,
            clock,
            opts,
            gate,
            policies: Mutex::new(HashMap::new()),
        })
    }

    pub fn options(&self) -> &FetchOptions {
        &self.opts
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// robots.txt policy for the origin of `url`, fetched once per origin
    /// for the lifetime of this fetcher. A missing or unreachable robots.txt
    /// yields an allow-all policy.
    pub fn policy_for(&self, url: &Url) -> Arc<RobotsPolicy> {
        let origin = url.origin().ascii_serialization();
        let cell = self
            .policies
            .lock()
            .unwrap()
            .entry(origin.clone())
            .or_default()
            .clone();
        cell.get_or_init(|| Arc::new(self.load_policy(url, &origin)))
            .clone()
    }

    fn load_policy(&self, url: &Url, origin: &str) -> RobotsPolicy {
        let robots_url = match Url::parse(&format!("{origin}/robots.txt")) {
            Ok(u) => u,
            Err(_) => return RobotsPolicy::allow_all(),
        };
        let reply = self.gate.run(&host_key(url), || {
            self.transport
                .get(&robots_url, &self.opts.user_agent, self.opts.timeout)
        });
        match reply {
            Ok(resp) if (200..300).contains(&resp.status) => parse_robots_bytes(&resp.body),
            Ok(resp) => {
                log::info!("{robots_url} answered {}; allowing all paths", resp.status);
                RobotsPolicy::allow_all()
            }
            Err(err) => {
                log::warn!("could not fetch {robots_url}: {err}; allowing all paths");
                RobotsPolicy::allow_all()
            }
        }
    }

    pub fn is_allowed(&self, url: &Url) -> bool {
        self.policy_for(url)
            .is_allowed(&self.opts.user_agent, url.path())
    }

    pub fn fetch(&self, url: &str) -> Result<FetchResult, FetchError> {
        let parsed = Url::parse(url).map_err(|e| FetchError::InvalidUrl {
            url: url.to_string(),
            message: e.to_string(),
        })?;
        self.fetch_url(&parsed)
    }

    /// GET `url` with retry on transient failures (network error, timeout,
    /// 429, 5xx). Other non-2xx statuses fail immediately.
    pub fn fetch_url(&self, url: &Url) -> Result<FetchResult, FetchError> {
        if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
            return Err(FetchError::InvalidUrl {
                url: url.to_string(),
                message: "expected an absolute http(s) url".into(),
            });
        }
        if !self.is_allowed(url) {
            return Err(FetchError::RobotsDenied {
                url: url.to_string(),
            });
        }

        let host = host_key(url);
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            let reply = self.gate.run(&host, || {
                self.transport
                    .get(url, &self.opts.user_agent, self.opts.timeout)
            });
            let last_error = match reply {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    return Ok(FetchResult {
                        url: url.to_string(),
                        status: resp.status,
                        body: resp.body,
                        attempts,
                        fetched_at: self.clock.utc_now(),
                    });
                }
                Ok(resp) if is_transient_status(resp.status) => format!("HTTP {}", resp.status),
                Ok(resp) => {
                    return Err(FetchError::NonRetryable {
                        url: url.to_string(),
                        status: resp.status,
                        attempts,
                    });
                }
                Err(err) => err.to_string(),
            };

            let retry_index = (attempts - 1) as usize;
            if attempts > self.opts.max_retries {
                return Err(FetchError::ExhaustedRetries {
                    url: url.to_string(),
                    attempts,
                    last_error,
                });
            }
            log::debug!("{url}: {last_error}; retrying (attempt {attempts})");
            self.clock.sleep(self.opts.backoff[retry_index]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn setup() -> (Arc<ManualClock>, Arc<ScriptedTransport>) {
        let clock = Arc::new(ManualClock::new(
            Utc.with_ymd_and_hms(2024, 4, 10, 6, 0, 0).unwrap(),
        ));
        let transport = Arc::new(ScriptedTransport::new(clock.clone()));
        (clock, transport)
    }

    fn fetcher(clock: &Arc<ManualClock>, transport: &Arc<ScriptedTransport>) -> Fetcher {
        Fetcher::new(transport.clone(), clock.clone(), FetchOptions::default()).unwrap()
    }

    #[test]
    fn first_try_success() {
        let (clock, transport) = setup();
        transport.serve("http://news.test/a", "body");
        let result = fetcher(&clock, &transport).fetch("http://news.test/a").unwrap();
        assert_eq!(result.attempts, 1);
        assert_eq!(result.body, b"body");
        assert_eq!(result.status, 200);
    }

    #[test]
    fn one_transient_failure_sleeps_five_seconds() {
        let (clock, transport) = setup();
        transport.route(
            "http://news.test/a",
            vec![Ok(TransportResponse::status(503)), Ok(TransportResponse::ok("x"))],
        );
        let result = fetcher(&clock, &transport).fetch("http://news.test/a").unwrap();
        assert_eq!(result.attempts, 2);
        let backoff: Vec<_> = clock
            .sleeps()
            .into_iter()
            .filter(|d| *d == Duration::from_secs(5))
            .collect();
        assert_eq!(backoff.len(), 1);
    }

    #[test]
    fn three_503s_exhaust_two_retries() {
        let (clock, transport) = setup();
        transport.route("http://news.test/a", vec![Ok(TransportResponse::status(503))]);
        let err = fetcher(&clock, &transport)
            .fetch("http://news.test/a")
            .unwrap_err();
        match err {
            FetchError::ExhaustedRetries { attempts, .. } => assert_eq!(attempts, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(transport.request_count("http://news.test/a"), 3);
        assert!(clock.sleeps().contains(&Duration::from_secs(10)));
    }

    #[test]
    fn client_error_is_not_retried() {
        let (clock, transport) = setup();
        transport.route("http://news.test/a", vec![Ok(TransportResponse::status(403))]);
        let err = fetcher(&clock, &transport)
            .fetch("http://news.test/a")
            .unwrap_err();
        assert!(matches!(err, FetchError::NonRetryable { status: 403, attempts: 1, .. }));
    }

    #[test]
    fn rate_limit_and_network_errors_are_retried() {
        let (clock, transport) = setup();
        transport.route(
            "http://news.test/a",
            vec![
                Ok(TransportResponse::status(429)),
                Err(TransportError::Timeout),
                Ok(TransportResponse::ok("x")),
            ],
        );
        let result = fetcher(&clock, &transport).fetch("http://news.test/a").unwrap();
        assert_eq!(result.attempts, 3);
    }

    #[test]
    fn disallowed_path_is_never_requested() {
        let (clock, transport) = setup();
        transport.serve("http://news.test/robots.txt", "User-agent: *\nDisallow: /private/");
        transport.serve("http://news.test/private/a", "secret");
        let err = fetcher(&clock, &transport)
            .fetch("http://news.test/private/a")
            .unwrap_err();
        assert!(matches!(err, FetchError::RobotsDenied { .. }));
        assert_eq!(transport.request_count("http://news.test/private/a"), 0);
    }

    #[test]
    fn robots_404_means_allow_all() {
        let (clock, transport) = setup();
        let f = fetcher(&clock, &transport);
        let url = Url::parse("http://news.test/x").unwrap();
        assert_eq!(*f.policy_for(&url), RobotsPolicy::allow_all());
    }

    #[test]
    fn robots_policy_is_cached_per_host() {
        let (clock, transport) = setup();
        transport.serve("http://a.test/robots.txt", "User-agent: *\nDisallow: /private/");
        transport.serve("http://b.test/robots.txt", "User-agent: *\nDisallow: /");
        let f = fetcher(&clock, &transport);
        let a = Url::parse("http://a.test/news").unwrap();
        let b = Url::parse("http://b.test/news").unwrap();
        let first = f.policy_for(&a);
        let second = f.policy_for(&a);
        assert_eq!(first, second);
        assert_eq!(transport.request_count("http://a.test/robots.txt"), 1);
        assert!(f.is_allowed(&a));
        assert!(!f.is_allowed(&b));
        assert_eq!(transport.request_count("http://b.test/robots.txt"), 1);
    }

    #[test]
    fn unreachable_robots_means_allow_all() {
        let (clock, transport) = setup();
        transport.route(
            "http://a.test/robots.txt",
            vec![Err(TransportError::Network("refused".into()))],
        );
        let f = fetcher(&clock, &transport);
        assert!(f.is_allowed(&Url::parse("http://a.test/x").unwrap()));
    }

    #[test]
    fn same_host_requests_are_spaced() {
        let (clock, transport) = setup();
        for i in 0..4 {
            transport.serve(&format!("http://a.test/{i}"), "x");
        }
        let f = fetcher(&clock, &transport);
        for i in 0..4 {
            f.fetch(&format!("http://a.test/{i}")).unwrap();
        }
        let times: Vec<_> = transport.requests().iter().map(|r| r.at).collect();
        assert_eq!(times.len(), 5); // robots.txt + 4 pages
        for pair in times.windows(2) {
            assert!(pair[1] - pair[0] >= Duration::from_secs(2));
        }
    }

    #[test]
    fn user_agent_header_is_sent() {
        let (clock, transport) = setup();
        transport.serve("http://a.test/x", "x");
        fetcher(&clock, &transport).fetch("http://a.test/x").unwrap();
        assert!(transport
            .requests()
            .iter()
            .all(|r| r.user_agent == DEFAULT_USER_AGENT));
    }

    #[test]
    fn options_validation() {
        let opts = FetchOptions {
            max_retries: 3,
            ..FetchOptions::default()
        };
        assert!(matches!(opts.validate(), Err(FetchError::InvalidOptions(_))));
        assert!(FetchOptions::default().validate().is_ok());
    }

    #[test]
    fn rejects_non_http_urls() {
        let (clock, transport) = setup();
        let f = fetcher(&clock, &transport);
        assert!(matches!(f.fetch("ftp://a.test/x"), Err(FetchError::InvalidUrl { .. })));
        assert!(matches!(f.fetch("not a url"), Err(FetchError::InvalidUrl { .. })));
    }
}
