use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{AnnotateError, AnnotationOracle, AnnotationRequest, FrontierAnnotation, Result};

pub const API_KEY_ENV: &str = "VLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_s: f64,
    /// Total requests per frame, counting the first.
    pub max_attempts: usize,
    /// Free-text scene context substituted into the prompt.
    pub context: String,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            api_key_env: API_KEY_ENV.into(),
            timeout_s: 60.0,
            max_attempts: 3,
            context: "robot camera view".into(),
        }
    }
}

/// Client for an OpenAI-compatible chat endpoint.
pub struct RemoteOracle {
    cfg: RemoteConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteOracle")
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

impl RemoteOracle {
    /// Reads the credential from the configured environment variable.
    pub fn from_env(cfg: RemoteConfig) -> Result<Self> {
        let key = std::env::var(&cfg.api_key_env).map_err(|_| {
            AnnotateError::Validation(format!(
                "environment variable {} is not set",
                cfg.api_key_env
            ))
        })?;
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: RemoteConfig, api_key: String) -> Result<Self> {
        if cfg.endpoint.is_empty() {
            return Err(AnnotateError::Validation("remote endpoint is empty".into()));
        }
        if cfg.max_attempts == 0 || !(cfg.timeout_s > 0.0) {
            return Err(AnnotateError::Validation(
                "max_attempts and timeout must be positive".into(),
            ));
        }
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            cfg,
            api_key,
            agent,
        })
    }

    fn post(&self, body: &Value) -> Result<String> {
        let mut resp = self
            .agent
            .post(&self.cfg.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(body.to_string())
            .map_err(|e| AnnotateError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| AnnotateError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(AnnotateError::Transport(format!("HTTP {status}: {text}")));
        }
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| AnnotateError::Transport(format!("response is not JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| {
                AnnotateError::Transport("response has no choices[0].message.content".into())
            })
    }
}

impl AnnotationOracle for RemoteOracle {
    fn kind(&self) -> &'static str {
        "remote"
    }

    fn annotate(&mut self, request: &AnnotationRequest<'_>) -> Result<FrontierAnnotation> {
        let prompt = request.template.render(&self.cfg.context)?;
        let png = base64::engine::general_purpose::STANDARD.encode(request.frame.encode_png()?);
        let mut messages = vec![
            json!({ "role": "system", "content": prompt.system }),
            json!({ "role": "user", "content": [
                { "type": "text", "text": prompt.user },
                { "type": "image_url", "image_url": { "url": format!("data:image/png;base64,{png}") } },
            ]}),
        ];
        let mut raw = String::new();
        for attempt in 1..=self.cfg.max_attempts {
            let body = json!({ "model": self.cfg.model, "temperature": 0, "messages": messages });
            raw = self.post(&body)?;
            if let Some(ann) = extract_annotation(&raw) {
                return Ok(ann);
            }
            log::warn!("annotation reply {attempt} unparseable, re-prompting");
            messages.push(json!({ "role": "assistant", "content": raw }));
            messages
                .push(json!({ "role": "user", "content": request.template.stricter_reprompt() }));
        }
        Err(AnnotateError::Oracle {
            attempts: self.cfg.max_attempts,
            reason: "no JSON object with left/center/right likelihoods".into(),
            raw,
        })
    }
}

fn likelihood(obj: &serde_json::Map<String, Value>, keys: [&str; 2]) -> Option<f64> {
    keys.iter()
        .find_map(|k| obj.get(*k))
        .and_then(Value::as_f64)
        .filter(|p| (0.0..=1.0).contains(p))
}

/// Balanced `{...}` spans in `text`, outermost first, skipping braces
/// inside string literals.
fn json_objects(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    while let Some(off) = text[start..].find('{') {
        let s = start + off;
        let (mut depth, mut in_str, mut esc) = (0usize, false, false);
        let mut end = None;
        for (i, &b) in bytes.iter().enumerate().skip(s) {
            if in_str {
                match b {
                    _ if esc => esc = false,
                    b'\\' => esc = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match end {
            Some(e) => {
                out.push(&text[s..=e]);
                start = s + 1;
            }
            None => break,
        }
    }
    out
}

/// First JSON object in a reply carrying three likelihoods in [0, 1], keyed
/// `left/center/right` or `p_left/p_center/p_right`.
pub fn extract_annotation(reply: &str) -> Option<FrontierAnnotation> {
    json_objects(reply).into_iter().find_map(|span| {
        let v: Value = serde_json::from_str(span).ok()?;
        let obj = v.as_object()?;
        Some(FrontierAnnotation {
            p_left: likelihood(obj, ["left", "p_left"])?,
            p_center: likelihood(obj, ["center", "p_center"])?,
            p_right: likelihood(obj, ["right", "p_right"])?,
            rationale: obj
                .get("rationale")
                .and_then(Value::as_str)
                .map(str::to_owned),
        })
    })
}
