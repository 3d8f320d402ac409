//! Minimal LLM client with a persistent response cache.
//!
//! The endpoint receives `POST {"prompt", "temperature", "max_tokens", "model"}`
//! and may answer with any of the common completion shapes (`text`,
//! `completion`, `response`, OpenAI `choices`, Anthropic `content`).
//! Responses are cached by the SHA-256 of the prompt and decoding
//! parameters; entries are never removed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::format::write_atomic;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self {
            model: None,
            temperature: 0.7,
            max_tokens: 512,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub prompt: String,
    pub params: DecodingParams,
    pub response: String,
    pub candidates: Vec<String>,
}

/// Cache key: hex SHA-256 over the prompt and the canonical JSON of `params`.
pub fn cache_key(prompt: &str, params: &DecodingParams) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hasher.update([0u8]);
    hasher.update(serde_json::to_vec(params).expect("params serialize"));
    hex::encode(hasher.finalize())
}

/// Splits a free-text answer into candidate strings.
///
/// Multi-line answers give one candidate per line; a single line is split on
/// commas. List markers, surrounding quotes and heading lines ending in ':'
/// are dropped.
pub fn parse_candidates(text: &str) -> Vec<String> {
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.ends_with(':'))
        .collect();
    let pieces: Vec<&str> = match lines.as_slice() {
        [single] => single.split(',').collect(),
        many => many.to_vec(),
    };
    pieces
        .into_iter()
        .map(clean_candidate)
        .filter(|c| !c.is_empty())
        .collect()
}

fn clean_candidate(raw: &str) -> String {
    let mut s = raw.trim();
    s = s.trim_start_matches(['-', '*', '•']).trim_start();
    let digits = s.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 && s[digits..].starts_with(['.', ')']) {
        s = s[digits + 1..].trim_start();
    }
    s.trim_matches(['"', '\'', '`']).trim().to_owned()
}

fn extract_text(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    let direct = ["text", "completion", "response", "output"]
        .iter()
        .find_map(|k| v.get(k).and_then(Value::as_str));
    if let Some(t) = direct {
        return Some(t.to_owned());
    }
    let choice = v.get("choices").and_then(|c| c.get(0));
    if let Some(c) = choice {
        if let Some(t) = c.pointer("/message/content").and_then(Value::as_str) {
            return Some(t.to_owned());
        }
        if let Some(t) = c.get("text").and_then(Value::as_str) {
            return Some(t.to_owned());
        }
    }
    v.pointer("/content/0/text")
        .and_then(Value::as_str)
        .map(str::to_owned)
}

/// Parses an endpoint response body into candidates.
pub fn parse_response(body: &str) -> Result<Vec<String>> {
    let text = extract_text(body).ok_or_else(|| Error::Parse {
        reason: "no completion text found in response body".into(),
        raw_body: body.to_owned(),
    })?;
    let candidates = parse_candidates(&text);
    if candidates.is_empty() {
        return Err(Error::Parse {
            reason: "response contained no candidates".into(),
            raw_body: body.to_owned(),
        });
    }
    Ok(candidates)
}

/// Cached LLM access. Safe to share across threads; cache writes are
/// serialized and each one atomically replaces the cache file.
pub struct LlmClient {
    endpoint: Option<String>,
    api_key: Option<String>,
    cache_path: Option<PathBuf>,
    cache: Mutex<BTreeMap<String, CacheEntry>>,
    max_retries: u32,
    network_calls: AtomicUsize,
}

impl LlmClient {
    /// Opens (or starts) the cache at `cache_path`. Without an endpoint the
    /// client answers from the cache only.
    pub fn new(endpoint: Option<String>, cache_path: Option<PathBuf>) -> Result<Self> {
        let cache = match &cache_path {
            Some(p) if p.exists() => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|source| Error::Json {
                    path: p.clone(),
                    source,
                })?
            }
            _ => BTreeMap::new(),
        };
        Ok(Self {
            endpoint,
            api_key: None,
            cache_path,
            cache: Mutex::new(cache),
            max_retries: 3,
            network_calls: AtomicUsize::new(0),
        })
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_max_retries(mut self, retries: u32) -> Self {
        self.max_retries = retries;
        self
    }

    /// Number of HTTP requests issued so far.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn cached(&self, prompt: &str, params: &DecodingParams) -> Option<CacheEntry> {
        let key = cache_key(prompt, params);
        self.cache.lock().expect("cache lock").get(&key).cloned()
    }

    /// Returns candidates for `prompt`, consulting the cache first.
    pub fn query(&self, prompt: &str, params: &DecodingParams) -> Result<Vec<String>> {
        if let Some(hit) = self.cached(prompt, params) {
            return Ok(hit.candidates);
        }
        let endpoint = self
            .endpoint
            .as_deref()
            .ok_or_else(|| Error::CacheMiss(prompt.to_owned()))?;
        let body = self.fetch(endpoint, prompt, params)?;
        let candidates = parse_response(&body)?;
        self.insert(CacheEntry {
            prompt: prompt.to_owned(),
            params: params.clone(),
            response: body,
            candidates: candidates.clone(),
        })?;
        Ok(candidates)
    }

    fn insert(&self, entry: CacheEntry) -> Result<()> {
        let key = cache_key(&entry.prompt, &entry.params);
        let mut cache = self.cache.lock().expect("cache lock");
        cache.entry(key).or_insert(entry);
        if let Some(path) = &self.cache_path {
            let mut text = serde_json::to_string_pretty(&*cache).expect("cache serializes");
            text.push('\n');
            write_atomic(path, text.as_bytes())?;
        }
        Ok(())
    }

    fn fetch(&self, endpoint: &str, prompt: &str, params: &DecodingParams) -> Result<String> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        let payload = serde_json::json!({
            "prompt": prompt,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
            "model": params.model,
        })
        .to_string();
        let network = |message: String| Error::Network {
            endpoint: endpoint.to_owned(),
            message,
        };
        let mut attempt = 0;
        loop {
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            let mut request = agent
                .post(endpoint)
                .header("content-type", "application/json");
            if let Some(key) = &self.api_key {
                request = request.header("authorization", format!("Bearer {key}"));
            }
            let mut response = request
                .send(payload.as_str())
                .map_err(|e| network(e.to_string()))?;
            let status = response.status().as_u16();
            if status == 429 {
                let retry_after = response
                    .headers()
                    .get("retry-after")
                    .and_then(|v| v.to_str().ok())
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .unwrap_or(1);
                if attempt >= self.max_retries {
                    return Err(Error::RateLimited {
                        endpoint: endpoint.to_owned(),
                        retry_after_secs: retry_after,
                    });
                }
                attempt += 1;
                std::thread::sleep(Duration::from_secs(retry_after));
                continue;
            }
            let body = response
                .body_mut()
                .read_to_string()
                .map_err(|e| network(e.to_string()))?;
            if !(200..300).contains(&status) {
                return Err(network(format!("HTTP {status}: {body}")));
            }
            return Ok(body);
        }
    }

    pub fn cache_path(&self) -> Option<&Path> {
        self.cache_path.as_deref()
    }
}
