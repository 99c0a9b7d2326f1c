//! Client for live model services.
//!
//! Wire protocol, UTF-8 JSON over HTTP POST:
//!
//! | path       | request                     | response                                |
//! |------------|-----------------------------|-----------------------------------------|
//! | `/propose` | `{question, k}`             | `{answers: [text]}`                     |
//! | `/ground`  | `{query, height, width}`    | `{rle: {counts, height, width}}`        |
//! | `/embed`   | `{text}`                    | `{vector: [number]}`                    |
//!
//! Every failure (transport, non-2xx status, body that does not match the
//! schema) becomes a [`ProviderError`] carrying the instance id and endpoint.

use std::time::Duration;

use groundcheck_core::geometry::{decode_rle, RleMask};
use groundcheck_core::provider::{AnswerProposer, Embedder, Grounder, ProviderError};
use groundcheck_core::{BitMask, Embedding, GroundingInstance};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RemoteRequest {
    Propose {
        question: String,
        k: usize,
    },
    Ground {
        query: String,
        height: usize,
        width: usize,
    },
    Embed {
        text: String,
    },
}

impl RemoteRequest {
    pub fn path(&self) -> &'static str {
        match self {
            Self::Propose { .. } => "/propose",
            Self::Ground { .. } => "/ground",
            Self::Embed { .. } => "/embed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RemoteResponse {
    Answers(Vec<String>),
    Mask(RleMask),
    Vector(Vec<f64>),
}

#[derive(Deserialize)]
struct AnswersBody {
    answers: Vec<String>,
}

#[derive(Deserialize)]
struct MaskBody {
    rle: RleMask,
}

#[derive(Deserialize)]
struct VectorBody {
    vector: Vec<f64>,
}

/// One endpoint serving all three provider roles.
#[derive(Debug, Clone)]
pub struct RemoteClient {
    endpoint: String,
    id: String,
    agent: ureq::Agent,
}

impl RemoteClient {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let endpoint = endpoint.trim_end_matches('/').to_string();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            id: format!("remote:{endpoint}"),
            endpoint,
            agent,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn post<T: DeserializeOwned>(
        &self,
        instance_id: &str,
        request: &RemoteRequest,
    ) -> Result<T, ProviderError> {
        let url = format!("{}{}", self.endpoint, request.path());
        let fail =
            |msg: String| ProviderError::failed(&self.id, instance_id, format!("{url}: {msg}"));
        let mut resp = self
            .agent
            .post(&url)
            .send_json(request)
            .map_err(|e| fail(e.to_string()))?;
        resp.body_mut()
            .read_json::<T>()
            .map_err(|e| fail(format!("bad response body: {e}")))
    }

    /// Send one request and check the response against the schema.
    pub fn remote_infer(
        &self,
        instance_id: &str,
        request: &RemoteRequest,
    ) -> Result<RemoteResponse, ProviderError> {
        match request {
            RemoteRequest::Propose { .. } => {
                let b: AnswersBody = self.post(instance_id, request)?;
                Ok(RemoteResponse::Answers(b.answers))
            }
            RemoteRequest::Ground { .. } => {
                let b: MaskBody = self.post(instance_id, request)?;
                Ok(RemoteResponse::Mask(b.rle))
            }
            RemoteRequest::Embed { .. } => {
                let b: VectorBody = self.post(instance_id, request)?;
                Ok(RemoteResponse::Vector(b.vector))
            }
        }
    }

    fn unexpected(&self, instance_id: &str) -> ProviderError {
        ProviderError::failed(
            &self.id,
            instance_id,
            "response kind does not match request",
        )
    }
}

impl AnswerProposer for RemoteClient {
    fn id(&self) -> &str {
        &self.id
    }

    fn propose(
        &self,
        instance: &GroundingInstance,
        k: usize,
    ) -> Result<Vec<String>, ProviderError> {
        let req = RemoteRequest::Propose {
            question: instance.question.clone(),
            k,
        };
        match self.remote_infer(&instance.instance_id, &req)? {
            RemoteResponse::Answers(mut a) => {
                a.truncate(k);
                Ok(a)
            }
            _ => Err(self.unexpected(&instance.instance_id)),
        }
    }
}

impl Grounder for RemoteClient {
    fn id(&self) -> &str {
        &self.id
    }

    fn ground(
        &self,
        instance: &GroundingInstance,
        _answer_index: usize,
        query: &str,
    ) -> Result<BitMask, ProviderError> {
        let req = RemoteRequest::Ground {
            query: query.to_string(),
            height: instance.image_height,
            width: instance.image_width,
        };
        let RemoteResponse::Mask(rle) = self.remote_infer(&instance.instance_id, &req)? else {
            return Err(self.unexpected(&instance.instance_id));
        };
        if (rle.height, rle.width) != (instance.image_height, instance.image_width) {
            return Err(ProviderError::failed(
                &self.id,
                &instance.instance_id,
                format!(
                    "mask is {}x{}, requested {}x{}",
                    rle.height, rle.width, instance.image_height, instance.image_width
                ),
            ));
        }
        decode_rle(&rle)
            .map_err(|e| ProviderError::failed(&self.id, &instance.instance_id, e.to_string()))
    }
}

impl Embedder for RemoteClient {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> Option<usize> {
        None
    }

    fn embed(&self, instance_id: &str, normalized: &str) -> Result<Embedding, ProviderError> {
        let req = RemoteRequest::Embed {
            text: normalized.to_string(),
        };
        let RemoteResponse::Vector(v) = self.remote_infer(instance_id, &req)? else {
            return Err(self.unexpected(instance_id));
        };
        Embedding::new(v).map_err(|e| ProviderError::failed(&self.id, instance_id, e.to_string()))
    }
}
