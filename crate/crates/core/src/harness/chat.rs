//! Chat-completion backend (OpenAI-compatible wire format).

use serde_json::{json, Value};

use super::{Backend, BackendConfig, BackendError, Completion, ModelSpec, TokenAlternative};
use crate::generator::PromptInstance;

pub struct ChatBackend {
    client: reqwest::blocking::Client,
    api_key: String,
}

impl ChatBackend {
    /// Reads the bearer token from `config.credential_env`. Fails before any
    /// network activity when the variable is unset or empty.
    pub fn from_env(config: &BackendConfig) -> Result<Self, BackendError> {
        match std::env::var(&config.credential_env) {
            Ok(key) if !key.trim().is_empty() => Self::with_key(key, config),
            _ => Err(BackendError::Auth(format!(
                "environment variable {} is not set",
                config.credential_env
            ))),
        }
    }

    pub fn with_key(api_key: String, config: &BackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(ChatBackend { client, api_key })
    }

    pub fn complete_text(
        &self,
        model: &ModelSpec,
        prompt_text: &str,
    ) -> Result<Completion, BackendError> {
        let response = self
            .client
            .post(&model.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(&request_body(model, prompt_text))
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    BackendError::Timeout(e.to_string())
                } else {
                    BackendError::Transport(e.to_string())
                }
            })?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(BackendError::Auth(truncate(&body))),
            429 => return Err(BackendError::RateLimited(truncate(&body))),
            _ => {
                return Err(BackendError::Http {
                    status,
                    body: truncate(&body),
                })
            }
        }
        let value: Value =
            serde_json::from_str(&body).map_err(|e| BackendError::Malformed(e.to_string()))?;
        parse_response(&value)
    }
}

impl Backend for ChatBackend {
    fn complete(
        &self,
        model: &ModelSpec,
        prompt: &PromptInstance,
    ) -> Result<Completion, BackendError> {
        self.complete_text(model, &prompt.text)
    }
}

/// One-shot call: credential lookup, request and parse.
pub fn chat_backend(
    model: &ModelSpec,
    prompt_text: &str,
    config: &BackendConfig,
) -> Result<Completion, BackendError> {
    ChatBackend::from_env(config)?.complete_text(model, prompt_text)
}

fn truncate(body: &str) -> String {
    const MAX: usize = 300;
    match body.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &body[..i]),
        None => body.to_string(),
    }
}

/// The prompt goes out as a single user message.
pub fn request_body(model: &ModelSpec, prompt_text: &str) -> Value {
    let opts = &model.request_options;
    let mut body = json!({
        "model": model.model_id,
        "messages": [{"role": "user", "content": prompt_text}],
        "temperature": opts.temperature,
    });
    if let Some(max) = opts.max_tokens {
        body["max_tokens"] = json!(max);
    }
    if opts.logprobs {
        body["logprobs"] = json!(true);
        body["top_logprobs"] = json!(opts.top_logprobs);
    }
    body
}

// Rounding in provider output occasionally yields tiny positive values.
const LOGPROB_SLACK: f64 = 1e-6;

fn logprob(v: &Value) -> Result<f64, BackendError> {
    let lp = v
        .as_f64()
        .ok_or_else(|| BackendError::Malformed("logprob is not a number".into()))?;
    if lp > LOGPROB_SLACK || lp.is_nan() {
        return Err(BackendError::Malformed(format!("positive logprob {lp}")));
    }
    Ok(lp.min(0.0))
}

/// Text of the first choice plus, when present, its per-token alternatives.
pub fn parse_response(body: &Value) -> Result<Completion, BackendError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Malformed("response has no choices".into()))?;
    let text = match choice.pointer("/message/content") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(other) => {
            return Err(BackendError::Malformed(format!(
                "message content is not text: {other}"
            )))
        }
    };

    let token_logprobs = match choice.pointer("/logprobs/content") {
        Some(Value::Array(tokens)) => {
            let mut out = Vec::with_capacity(tokens.len());
            for tok in tokens {
                let alternatives = match tok.get("top_logprobs") {
                    Some(Value::Array(top)) if !top.is_empty() => top
                        .iter()
                        .map(|alt| {
                            Ok(TokenAlternative {
                                token: alt
                                    .get("token")
                                    .and_then(Value::as_str)
                                    .unwrap_or_default()
                                    .to_string(),
                                logprob: logprob(alt.get("logprob").unwrap_or(&Value::Null))?,
                            })
                        })
                        .collect::<Result<Vec<_>, BackendError>>()?,
                    _ => vec![TokenAlternative {
                        token: tok
                            .get("token")
                            .and_then(Value::as_str)
                            .unwrap_or_default()
                            .to_string(),
                        logprob: logprob(tok.get("logprob").unwrap_or(&Value::Null))?,
                    }],
                };
                out.push(alternatives);
            }
            Some(out)
        }
        _ => None,
    };

    Ok(Completion {
        text,
        token_logprobs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Category;

    #[test]
    fn body_shape() {
        let m = ModelSpec::new("openai/gpt-4o-mini", Category::Cheap);
        let b = request_body(&m, "hello");
        assert_eq!(b["model"], "openai/gpt-4o-mini");
        assert_eq!(b["messages"].as_array().unwrap().len(), 1);
        assert_eq!(b["messages"][0]["role"], "user");
        assert_eq!(b["messages"][0]["content"], "hello");
        assert_eq!(b["temperature"], 0.0);
        assert!(b.get("logprobs").is_none());
    }

    #[test]
    fn body_requests_top_k_when_logprobs_on() {
        let mut m = ModelSpec::new("m", Category::Cheap);
        m.request_options.logprobs = true;
        m.request_options.top_logprobs = 7;
        let b = request_body(&m, "x");
        assert_eq!(b["logprobs"], true);
        assert_eq!(b["top_logprobs"], 7);
    }

    #[test]
    fn parses_text_and_logprobs() {
        let body = json!({
            "choices": [{
                "message": {"role": "assistant", "content": "{Team A}"},
                "logprobs": {"content": [
                    {"token": "{", "logprob": -0.01, "top_logprobs": [
                        {"token": "{", "logprob": -0.01},
                        {"token": "The", "logprob": -4.6}
                    ]},
                    {"token": "Team", "logprob": 0.0, "top_logprobs": []}
                ]}
            }]
        });
        let c = parse_response(&body).unwrap();
        assert_eq!(c.text, "{Team A}");
        let lps = c.token_logprobs.unwrap();
        assert_eq!(lps.len(), 2);
        assert_eq!(lps[0].len(), 2);
        assert_eq!(lps[1][0].token, "Team");
    }

    #[test]
    fn missing_logprobs_are_absent() {
        let body = json!({"choices": [{"message": {"content": "hi"}, "logprobs": null}]});
        assert_eq!(parse_response(&body).unwrap().token_logprobs, None);
    }

    #[test]
    fn malformed_responses() {
        assert!(matches!(
            parse_response(&json!({"error": "x"})),
            Err(BackendError::Malformed(_))
        ));
        let bad = json!({"choices": [{"message": {"content": "x"},
            "logprobs": {"content": [{"token": "x", "logprob": 0.5}]}}]});
        assert!(matches!(parse_response(&bad), Err(BackendError::Malformed(_))));
    }

    #[test]
    fn missing_credential_fails_early() {
        let cfg = BackendConfig {
            credential_env: "ABSURD_TEST_SURELY_UNSET_VARIABLE".into(),
            ..BackendConfig::default()
        };
        let m = ModelSpec {
            endpoint_url: "http://127.0.0.1:9/never".into(),
            ..ModelSpec::new("m", Category::Cheap)
        };
        assert!(matches!(
            chat_backend(&m, "x", &cfg),
            Err(BackendError::Auth(_))
        ));
    }
}
