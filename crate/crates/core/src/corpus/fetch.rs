use std::collections::BTreeMap;
use std::path::PathBuf;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::store::{comment_is_valid, read_jsonl};
use super::{Comment, CorpusError};

/// Where comments come from.
#[derive(Debug, Clone)]
pub enum Source {
    File(PathBuf),
    Api(ApiSource),
}

/// A paged JSON:API comment endpoint in the style of regulations.gov v4.
///
/// Each docket is listed with `GET {base_url}/comments?filter[docketId]=..`
/// using `page[number]` / `page[size]`. Records must carry the comment body in
/// `attributes.comment`; when `fetch_details` is set, records without it are
/// completed with `GET {base_url}/comments/{id}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiSource {
    pub base_url: String,
    pub docket_ids: Vec<String>,
    pub api_key_header: String,
    /// Environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub requests_per_second: f64,
    pub page_size: usize,
    pub max_pages: usize,
    pub max_retries: u32,
    pub fetch_details: bool,
}

impl ApiSource {
    pub fn new(base_url: impl Into<String>, docket_ids: Vec<String>) -> Self {
        ApiSource {
            base_url: base_url.into(),
            docket_ids,
            api_key_header: "X-Api-Key".into(),
            api_key_env: Some("REGULATIONS_API_KEY".into()),
            requests_per_second: 1.0,
            page_size: 250,
            max_pages: 20,
            max_retries: 3,
            fetch_details: false,
        }
    }
}

/// Keeps dockets whose comment count is strictly inside the given bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocketFilter {
    pub more_than: Option<usize>,
    pub fewer_than: Option<usize>,
}

impl DocketFilter {
    pub fn between(more_than: usize, fewer_than: usize) -> Self {
        DocketFilter {
            more_than: Some(more_than),
            fewer_than: Some(fewer_than),
        }
    }

    pub fn accepts(&self, count: usize) -> bool {
        self.more_than.is_none_or(|lo| count > lo) && self.fewer_than.is_none_or(|hi| count < hi)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FetchReport {
    pub comments: Vec<Comment>,
    /// Malformed or empty records.
    pub skipped: usize,
    /// Dockets removed by the filter, with their comment counts.
    pub filtered_dockets: BTreeMap<String, usize>,
}

pub fn fetch_comments(source: &Source, filter: &DocketFilter) -> Result<FetchReport, CorpusError> {
    let (comments, skipped) = match source {
        Source::File(path) => {
            let parsed = read_jsonl(path, comment_is_valid)?;
            (parsed.records, parsed.skipped.len())
        }
        Source::Api(api) => ApiClient::new(api)?.fetch_all()?,
    };
    Ok(apply_filter(comments, skipped, filter))
}

fn apply_filter(comments: Vec<Comment>, skipped: usize, filter: &DocketFilter) -> FetchReport {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for c in &comments {
        *counts.entry(c.docket_id.clone()).or_default() += 1;
    }
    let filtered_dockets: BTreeMap<String, usize> =
        counts.into_iter().filter(|&(_, n)| !filter.accepts(n)).collect();
    let comments = comments
        .into_iter()
        .filter(|c| !filtered_dockets.contains_key(&c.docket_id))
        .collect();
    FetchReport {
        comments,
        skipped,
        filtered_dockets,
    }
}

struct ApiClient<'a> {
    cfg: &'a ApiSource,
    agent: ureq::Agent,
    api_key: Option<String>,
    last_request: Option<Instant>,
}

impl<'a> ApiClient<'a> {
    fn new(cfg: &'a ApiSource) -> Result<Self, CorpusError> {
        let api_key = match &cfg.api_key_env {
            Some(var) => std::env::var(var).ok(),
            None => None,
        };
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build();
        Ok(ApiClient {
            cfg,
            agent: config.into(),
            api_key,
            last_request: None,
        })
    }

    fn fetch_all(&mut self) -> Result<(Vec<Comment>, usize), CorpusError> {
        let mut comments = Vec::new();
        let mut skipped = 0;
        for docket in &self.cfg.docket_ids {
            for page in 1..=self.cfg.max_pages {
                let url = format!("{}/comments", self.cfg.base_url.trim_end_matches('/'));
                let query = [
                    ("filter[docketId]".to_string(), docket.clone()),
                    ("page[number]".to_string(), page.to_string()),
                    ("page[size]".to_string(), self.cfg.page_size.to_string()),
                ];
                let body = self.get(&url, &query)?;
                let records = body.get("data").and_then(Value::as_array).cloned().unwrap_or_default();
                for record in &records {
                    match self.parse_comment(record, docket)? {
                        Some(c) if comment_is_valid(&c) => comments.push(c),
                        _ => skipped += 1,
                    }
                }
                let has_next = body
                    .pointer("/meta/hasNextPage")
                    .and_then(Value::as_bool)
                    .unwrap_or(false);
                if !has_next || records.is_empty() {
                    break;
                }
            }
        }
        Ok((comments, skipped))
    }

    fn parse_comment(&mut self, record: &Value, docket: &str) -> Result<Option<Comment>, CorpusError> {
        let Some(id) = record.get("id").and_then(Value::as_str) else {
            return Ok(None);
        };
        let attrs = record.get("attributes").cloned().unwrap_or(Value::Null);
        let mut text = attrs.get("comment").and_then(Value::as_str).map(str::to_string);
        let mut attrs = attrs;
        if text.is_none() && self.cfg.fetch_details {
            let url = format!("{}/comments/{}", self.cfg.base_url.trim_end_matches('/'), id);
            let detail = self.get(&url, &[])?;
            attrs = detail.pointer("/data/attributes").cloned().unwrap_or(Value::Null);
            text = attrs.get("comment").and_then(Value::as_str).map(str::to_string);
        }
        let Some(text) = text else {
            return Ok(None);
        };
        let field = |name: &str| attrs.get(name).and_then(Value::as_str).map(str::to_string);
        Ok(Some(Comment {
            comment_id: id.to_string(),
            docket_id: field("docketId").unwrap_or_else(|| docket.to_string()),
            agency: field("agencyId").unwrap_or_default(),
            text,
            received_at: field("receiveDate").or_else(|| field("postedDate")),
        }))
    }

    fn throttle(&mut self) {
        if self.cfg.requests_per_second > 0.0 {
            let interval = Duration::from_secs_f64(1.0 / self.cfg.requests_per_second);
            if let Some(last) = self.last_request {
                let elapsed = last.elapsed();
                if elapsed < interval {
                    thread::sleep(interval - elapsed);
                }
            }
        }
        self.last_request = Some(Instant::now());
    }

    fn get(&mut self, url: &str, query: &[(String, String)]) -> Result<Value, CorpusError> {
        let mut attempt = 0;
        loop {
            self.throttle();
            let mut req = self.agent.get(url);
            for (k, v) in query {
                req = req.query(k, v);
            }
            if let Some(key) = &self.api_key {
                req = req.header(self.cfg.api_key_header.as_str(), key.as_str());
            }
            let failure = match req.call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        return resp.body_mut().read_json::<Value>().map_err(|e| CorpusError::Fetch {
                            source_name: url.to_string(),
                            message: format!("invalid JSON body: {e}"),
                            retryable: false,
                        });
                    }
                    let retryable = status == 429 || status >= 500;
                    (format!("HTTP {status}"), retryable)
                }
                Err(e) => (e.to_string(), true),
            };
            let (message, retryable) = failure;
            if !retryable || attempt >= self.cfg.max_retries {
                return Err(CorpusError::Fetch {
                    source_name: url.to_string(),
                    message,
                    retryable,
                });
            }
            attempt += 1;
            log::warn!("retrying {url} after {message} (attempt {attempt})");
            thread::sleep(Duration::from_millis(200 * (1 << attempt.min(5))));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(id: &str, docket: &str) -> Comment {
        Comment {
            comment_id: id.into(),
            docket_id: docket.into(),
            agency: "EPA".into(),
            text: "Some text.".into(),
            received_at: None,
        }
    }

    #[test]
    fn filter_bounds_are_strict() {
        let f = DocketFilter::between(50, 1000);
        assert!(!f.accepts(50));
        assert!(f.accepts(51));
        assert!(f.accepts(999));
        assert!(!f.accepts(1000));
        assert!(DocketFilter::default().accepts(0));
    }

    #[test]
    fn small_docket_is_dropped() {
        let comments: Vec<Comment> = (0..40).map(|i| c(&format!("c{i}"), "D1")).collect();
        let report = apply_filter(comments, 0, &DocketFilter::between(50, 1000));
        assert!(report.comments.is_empty());
        assert_eq!(report.filtered_dockets.get("D1"), Some(&40));
    }
}
