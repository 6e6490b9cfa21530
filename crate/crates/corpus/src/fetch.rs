//! Rate-limited downloading with retries and a dead-letter log.
//!
//! The network itself sits behind [`Transport`] so the policy can be tested
//! without sockets; the `http` feature adds a blocking reqwest transport.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{ingest_bytes, IngestOutcome};
use crate::profile::FetchConfig;
use crate::store::Corpus;

pub const DEAD_LETTER_FILE: &str = "deadletter.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct FetchError {
    pub status: Option<u16>,
    pub message: String,
}

impl FetchError {
    /// Network errors, throttling and server errors are worth retrying;
    /// other client errors are not.
    pub fn retryable(&self) -> bool {
        match self.status {
            None => true,
            Some(s) => s == 429 || s >= 500,
        }
    }
}

pub trait Transport {
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, FetchError>;
}

pub trait Clock {
    fn now(&self) -> Instant;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadLetter {
    pub source_id: String,
    pub url: String,
    pub attempts: u32,
    pub error: String,
}

pub struct Fetcher<T, C = SystemClock> {
    transport: T,
    clock: C,
    config: FetchConfig,
    last_request: Option<Instant>,
}

impl<T: Transport> Fetcher<T, SystemClock> {
    pub fn new(transport: T, config: FetchConfig) -> Self {
        Self::with_clock(transport, SystemClock, config)
    }
}

impl<T: Transport, C: Clock> Fetcher<T, C> {
    pub fn with_clock(transport: T, clock: C, mut config: FetchConfig) -> Self {
        config.rate_limit_secs = config.rate_limit_secs.max(1.0);
        Self { transport, clock, config, last_request: None }
    }

    fn wait_turn(&mut self) {
        let gap = Duration::from_secs_f64(self.config.rate_limit_secs);
        if let Some(last) = self.last_request {
            let elapsed = self.clock.now().saturating_duration_since(last);
            if elapsed < gap {
                self.clock.sleep(gap - elapsed);
            }
        }
        self.last_request = Some(self.clock.now());
    }

    /// Fetches `url`, retrying with exponential backoff. Returns the number
    /// of attempts alongside the final error when every attempt failed.
    pub fn fetch(&mut self, url: &str) -> std::result::Result<Vec<u8>, (u32, FetchError)> {
        let mut attempt = 0;
        loop {
            self.wait_turn();
            attempt += 1;
            match self.transport.get(url) {
                Ok(body) => return Ok(body),
                Err(e) if !e.retryable() || attempt > self.config.max_retries => return Err((attempt, e)),
                Err(e) => {
                    let delay = self.config.backoff_secs * 2f64.powi(attempt as i32 - 1);
                    log::info!("{url}: attempt {attempt} failed ({}), retrying in {delay}s", e.message);
                    self.clock.sleep(Duration::from_secs_f64(delay));
                }
            }
        }
    }
}

#[derive(Debug, Default, Clone, PartialEq, Serialize)]
pub struct FetchSummary {
    pub ingested: usize,
    pub duplicates: usize,
    pub filtered: usize,
    pub failed: usize,
    pub dead_letters: usize,
}

/// Downloads and ingests each URL; exhausted URLs go to the dead-letter log.
pub fn fetch_and_ingest<T: Transport, C: Clock>(corpus: &Corpus, source_id: &str, urls: &[String], fetcher: &mut Fetcher<T, C>) -> Result<FetchSummary> {
    corpus.profile(source_id)?;
    let mut summary = FetchSummary::default();
    for url in urls {
        match fetcher.fetch(url) {
            Ok(bytes) => match ingest_bytes(corpus, source_id, &bytes, url) {
                Ok(IngestOutcome::Ingested(_)) => summary.ingested += 1,
                Ok(IngestOutcome::Duplicate(_)) => summary.duplicates += 1,
                Ok(IngestOutcome::Filtered(_)) => summary.filtered += 1,
                Err(e) => {
                    log::warn!("{url}: {e}");
                    summary.failed += 1;
                }
            },
            Err((attempts, e)) => {
                let dl = DeadLetter { source_id: source_id.into(), url: url.clone(), attempts, error: e.message };
                corpus.append_jsonl(DEAD_LETTER_FILE, &dl)?;
                summary.dead_letters += 1;
            }
        }
    }
    Ok(summary)
}

#[cfg(feature = "http")]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

#[cfg(feature = "http")]
impl HttpTransport {
    pub fn new(user_agent: &str) -> std::result::Result<Self, reqwest::Error> {
        let client = reqwest::blocking::Client::builder().user_agent(user_agent).timeout(Duration::from_secs(60)).build()?;
        Ok(Self { client })
    }
}

#[cfg(feature = "http")]
impl Transport for HttpTransport {
    fn get(&self, url: &str) -> std::result::Result<Vec<u8>, FetchError> {
        let resp = self.client.get(url).send().map_err(|e| FetchError { status: None, message: e.to_string() })?;
        let status = resp.status();
        if !status.is_success() {
            return Err(FetchError { status: Some(status.as_u16()), message: format!("HTTP {status}") });
        }
        resp.bytes().map(|b| b.to_vec()).map_err(|e| FetchError { status: None, message: e.to_string() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::{Cell, RefCell};

    struct FakeClock {
        t: Cell<Instant>,
        sleeps: RefCell<Vec<Duration>>,
    }

    impl Clock for &FakeClock {
        fn now(&self) -> Instant {
            self.t.get()
        }
        fn sleep(&self, d: Duration) {
            self.sleeps.borrow_mut().push(d);
            self.t.set(self.t.get() + d);
        }
    }

    struct Scripted(RefCell<Vec<std::result::Result<Vec<u8>, FetchError>>>);

    impl Transport for Scripted {
        fn get(&self, _: &str) -> std::result::Result<Vec<u8>, FetchError> {
            self.0.borrow_mut().remove(0)
        }
    }

    fn err(status: Option<u16>) -> std::result::Result<Vec<u8>, FetchError> {
        Err(FetchError { status, message: "boom".into() })
    }

    #[test]
    fn retries_with_backoff_then_succeeds() {
        let clock = FakeClock { t: Cell::new(Instant::now()), sleeps: RefCell::new(vec![]) };
        let t = Scripted(RefCell::new(vec![err(Some(503)), err(None), Ok(b"pdf".to_vec())]));
        let cfg = FetchConfig { backoff_secs: 2.0, rate_limit_secs: 1.0, max_retries: 3, ..Default::default() };
        let mut f = Fetcher::with_clock(t, &clock, cfg);
        assert_eq!(f.fetch("u").unwrap(), b"pdf");
        let secs: Vec<f64> = clock.sleeps.borrow().iter().map(Duration::as_secs_f64).collect();
        assert_eq!(secs, vec![2.0, 4.0]);
    }

    #[test]
    fn requests_are_spaced_by_the_rate_limit() {
        let clock = FakeClock { t: Cell::new(Instant::now()), sleeps: RefCell::new(vec![]) };
        let t = Scripted(RefCell::new(vec![Ok(vec![]), Ok(vec![])]));
        let cfg = FetchConfig { rate_limit_secs: 0.1, ..Default::default() };
        let mut f = Fetcher::with_clock(t, &clock, cfg);
        f.fetch("a").unwrap();
        f.fetch("b").unwrap();
        assert_eq!(clock.sleeps.borrow().as_slice(), &[Duration::from_secs(1)]);
    }

    #[test]
    fn client_errors_and_exhaustion_go_to_dead_letters() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::open(dir.path()).unwrap();
        corpus.save_profile(&crate::SourceProfile::new("s", "S")).unwrap();
        let clock = FakeClock { t: Cell::new(Instant::now()), sleeps: RefCell::new(vec![]) };
        let t = Scripted(RefCell::new(vec![err(Some(404)), err(Some(500)), err(Some(500))]));
        let cfg = FetchConfig { max_retries: 1, backoff_secs: 0.5, ..Default::default() };
        let mut f = Fetcher::with_clock(t, &clock, cfg);
        let urls = vec!["a".to_string(), "b".to_string()];
        let s = fetch_and_ingest(&corpus, "s", &urls, &mut f).unwrap();
        assert_eq!(s.dead_letters, 2);
        let dl: Vec<DeadLetter> = corpus.read_jsonl(DEAD_LETTER_FILE).unwrap();
        assert_eq!(dl.iter().map(|d| d.attempts).collect::<Vec<_>>(), vec![1, 2]);
    }
}
