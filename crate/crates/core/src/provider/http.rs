use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{DistributionBackend, MaskQuery, ProviderError, TokenDistribution};

#[derive(Serialize)]
struct BatchRequest<'a> {
    queries: &'a [MaskQuery],
}

#[derive(Deserialize)]
struct ProbsResponse {
    probs: Vec<f32>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BatchItem {
    Wrapped(ProbsResponse),
    Bare(Vec<f32>),
}

#[derive(Deserialize)]
struct BatchResponse {
    results: Vec<BatchItem>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Health {
    pub vocab_size: usize,
    pub backend: String,
}

/// Client for the inference sidecar's JSON protocol.
#[derive(Debug)]
pub struct HttpBackend {
    client: Client,
    base: String,
    vocab_size: usize,
    backend_id: String,
}

impl HttpBackend {
    /// Connects and reads vocabulary size and backend id from `/health`.
    pub fn connect(endpoint: &str) -> Result<Self, ProviderError> {
        let client = Self::client()?;
        let base = endpoint.trim_end_matches('/').to_string();
        let health = fetch_health(&client, &base)?;
        Ok(HttpBackend {
            client,
            base,
            vocab_size: health.vocab_size,
            backend_id: health.backend,
        })
    }

    /// Skips the health probe; the caller vouches for `vocab_size` and `backend_id`.
    pub fn with_identity(
        endpoint: &str,
        vocab_size: usize,
        backend_id: impl Into<String>,
    ) -> Result<Self, ProviderError> {
        Ok(HttpBackend {
            client: Self::client()?,
            base: endpoint.trim_end_matches('/').to_string(),
            vocab_size,
            backend_id: backend_id.into(),
        })
    }

    fn client() -> Result<Client, ProviderError> {
        Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .map_err(|e| ProviderError::BackendUnavailable(e.to_string()))
    }

    pub fn health(&self) -> Result<Health, ProviderError> {
        fetch_health(&self.client, &self.base)
    }

    fn post<T: Serialize + ?Sized>(
        &self,
        route: &str,
        body: &T,
    ) -> Result<reqwest::blocking::Response, ProviderError> {
        let url = format!("{}{route}", self.base);
        let resp = self
            .client
            .post(&url)
            .json(body)
            .send()
            .map_err(|e| ProviderError::BackendUnavailable(format!("{url}: {e}")))?;
        check_status(resp)
    }
}

fn check_status(
    resp: reqwest::blocking::Response,
) -> Result<reqwest::blocking::Response, ProviderError> {
    let status = resp.status();
    if status.is_success() {
        return Ok(resp);
    }
    let body = resp.text().unwrap_or_default();
    match status {
        StatusCode::SERVICE_UNAVAILABLE => {
            Err(ProviderError::BackendUnavailable(format!("503: {body}")))
        }
        StatusCode::BAD_REQUEST => Err(ProviderError::Rejected(body)),
        other => Err(ProviderError::BackendUnavailable(format!("{other}: {body}"))),
    }
}

fn fetch_health(client: &Client, base: &str) -> Result<Health, ProviderError> {
    let url = format!("{base}/health");
    let resp = client
        .get(&url)
        .send()
        .map_err(|e| ProviderError::BackendUnavailable(format!("{url}: {e}")))?;
    check_status(resp)?
        .json()
        .map_err(|e| ProviderError::MalformedDistribution(format!("health response: {e}")))
}

impl DistributionBackend for HttpBackend {
    fn backend_id(&self) -> &str {
        &self.backend_id
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn fetch(&self, queries: &[MaskQuery]) -> Result<Vec<TokenDistribution>, ProviderError> {
        let raw: Vec<Vec<f32>> = match queries {
            [] => Vec::new(),
            [single] => {
                let resp: ProbsResponse = self
                    .post("/distribution", single)?
                    .json()
                    .map_err(|e| ProviderError::MalformedDistribution(e.to_string()))?;
                vec![resp.probs]
            }
            many => {
                let resp: BatchResponse = self
                    .post("/distributions", &BatchRequest { queries: many })?
                    .json()
                    .map_err(|e| ProviderError::MalformedDistribution(e.to_string()))?;
                resp.results
                    .into_iter()
                    .map(|item| match item {
                        BatchItem::Wrapped(p) => p.probs,
                        BatchItem::Bare(v) => v,
                    })
                    .collect()
            }
        };
        raw.into_iter()
            .map(|probs| {
                if probs.len() != self.vocab_size {
                    return Err(ProviderError::VocabMismatch {
                        expected: self.vocab_size,
                        actual: probs.len(),
                    });
                }
                TokenDistribution::new(probs)
            })
            .collect()
    }
}
