use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CompletionProvider, CompletionRequest, GatewayError};

/// Field layout of a chat/completions-style JSON endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpProviderConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: String,
    pub model_field: String,
    pub messages_field: String,
    pub temperature_field: String,
    pub max_output_field: String,
    /// JSON pointer to the reply text in the response body.
    pub response_pointer: String,
    pub timeout_secs: u64,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        HttpProviderConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            auth_env: "OPENAI_API_KEY".into(),
            model_field: "model".into(),
            messages_field: "messages".into(),
            temperature_field: "temperature".into(),
            max_output_field: "max_tokens".into(),
            response_pointer: "/choices/0/message/content".into(),
            timeout_secs: 120,
        }
    }
}

impl HttpProviderConfig {
    pub fn request_body(&self, request: &CompletionRequest) -> Value {
        let mut body = serde_json::Map::new();
        body.insert(self.model_field.clone(), json!(request.params.model_id));
        body.insert(
            self.messages_field.clone(),
            json!([{ "role": "user", "content": request.rendered_prompt }]),
        );
        body.insert(self.temperature_field.clone(), json!(request.params.temperature));
        body.insert(self.max_output_field.clone(), json!(request.params.max_output));
        Value::Object(body)
    }

    pub fn extract_reply(&self, body: &Value) -> Result<String, GatewayError> {
        body.pointer(&self.response_pointer)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| {
                GatewayError::Transport(format!(
                    "response has no string at `{}`",
                    self.response_pointer
                ))
            })
    }
}

pub struct HttpProvider {
    config: HttpProviderConfig,
    token: String,
    client: reqwest::blocking::Client,
}

impl HttpProvider {
    pub fn new(config: HttpProviderConfig) -> Result<Self, GatewayError> {
        let token = std::env::var(&config.auth_env).map_err(|_| {
            GatewayError::Config(format!("environment variable {} is not set", config.auth_env))
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(HttpProvider {
            config,
            token,
            client,
        })
    }
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.token)
            .json(&self.config.request_body(request))
            .send()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(GatewayError::Transport(format!("status {status}: {text}")));
        }
        if !status.is_success() {
            return Err(GatewayError::Rejected {
                status: status.as_u16(),
                message: text,
            });
        }
        let body: Value =
            serde_json::from_str(&text).map_err(|e| GatewayError::Transport(e.to_string()))?;
        self.config.extract_reply(&body)
    }
}
