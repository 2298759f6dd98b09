//! Rule-driven provider for assembling replay fixtures without a network.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CompletionProvider, CompletionRequest, GatewayError};

/// Answer `reply` to requests built from `template` whose prompt contains
/// every string in `contains`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub template: String,
    #[serde(default)]
    pub contains: Vec<String>,
    pub reply: String,
}

/// Ordered rules; the first match answers.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedProvider {
    pub rules: Vec<ScriptRule>,
}

impl ScriptedProvider {
    pub fn from_json(text: &str) -> Result<Self, GatewayError> {
        serde_json::from_str(text).map_err(|e| GatewayError::Config(format!("script: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl CompletionProvider for ScriptedProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        self.rules
            .iter()
            .find(|r| {
                r.template == request.prompt_template_id
                    && r.contains.iter().all(|c| request.rendered_prompt.contains(c.as_str()))
            })
            .map(|r| r.reply.clone())
            .ok_or_else(|| GatewayError::Rejected {
                status: 404,
                message: format!(
                    "no script rule for {} request {}",
                    request.prompt_template_id,
                    request.digest()
                ),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ModelParams;

    #[test]
    fn first_matching_rule_wins() {
        let p = ScriptedProvider::from_json(
            r#"{"rules": [
                {"template": "en/polarity", "contains": ["Retry 1", "cats"], "reply": "0.9"},
                {"template": "en/polarity", "contains": ["cats"], "reply": "n/a"}
            ]}"#,
        )
        .unwrap();
        let req = |prompt: &str| CompletionRequest::new("en/polarity", prompt, ModelParams::default()).unwrap();
        assert_eq!(p.complete(&req("about cats")).unwrap(), "n/a");
        assert_eq!(p.complete(&req("about cats\nRetry 1.")).unwrap(), "0.9");
        assert!(matches!(p.complete(&req("dogs")), Err(GatewayError::Rejected { .. })));
    }
}
