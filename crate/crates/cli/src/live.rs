//! Backend for OpenAI-compatible chat-completion endpoints.

use std::time::Duration;

use serde_json::{json, Value};
use thematica_core::provider::{Backend, BackendError, RenderedPrompt};
use thematica_core::ProviderConfig;

#[derive(Clone, Debug)]
pub struct HttpBackend {
    endpoint: String,
    model: Option<String>,
    credential: Option<String>,
    timeout: Duration,
}

impl HttpBackend {
    /// Reads the credential from the variable the config names, if any.
    pub fn from_config(config: &ProviderConfig) -> Result<Self, String> {
        let endpoint = config.endpoint.clone().ok_or("live provider needs an endpoint")?;
        let credential = match &config.credential_env {
            Some(var) => Some(std::env::var(var).map_err(|_| format!("credential variable `{var}` is not set"))?),
            None => None,
        };
        Ok(Self {
            endpoint,
            model: config.model.clone(),
            credential,
            timeout: config.timeout,
        })
    }

    pub fn request_body(&self, prompt: &RenderedPrompt) -> Value {
        let mut body = json!({
            "messages": [{"role": "user", "content": prompt.text}],
            "response_format": {"type": "json_object"},
            "temperature": 0,
        });
        if let Some(model) = &self.model {
            body["model"] = json!(model);
        }
        body
    }
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String, BackendError> {
        let fail = |e: reqwest::Error| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Unreachable(e.to_string())
            }
        };
        // built per call: the blocking client must not be created or dropped
        // on an async worker thread
        let client = reqwest::blocking::Client::builder().timeout(self.timeout).build().map_err(fail)?;
        let mut request = client.post(&self.endpoint).json(&self.request_body(prompt));
        if let Some(token) = &self.credential {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(fail)?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Unreachable(format!("endpoint answered {status}")));
        }
        let reply: Value = response.json().map_err(fail)?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Unreachable("reply has no choices[0].message.content".into()))
    }
}
