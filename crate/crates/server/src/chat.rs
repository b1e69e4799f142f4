use causalwb::workflow::{parse_intent, WorkflowCommand, VERBS};
use causalwb::Error as CoreError;
use serde::Serialize;
use serde_json::{json, Value};

/// An OpenAI-style chat-completions endpoint used to translate free text
/// into a command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatConfig {
    pub base_url: String,
    pub api_key: String,
    pub model: String,
}

pub const ENV_BASE_URL: &str = "CAUSALWB_CHAT_BASE_URL";
pub const ENV_API_KEY: &str = "CAUSALWB_CHAT_API_KEY";
pub const ENV_MODEL: &str = "CAUSALWB_CHAT_MODEL";

impl ChatConfig {
    /// Configured only when both the base URL and the key are set.
    pub fn from_env() -> Option<Self> {
        let base_url = std::env::var(ENV_BASE_URL).ok().filter(|s| !s.is_empty())?;
        let api_key = std::env::var(ENV_API_KEY).ok().filter(|s| !s.is_empty())?;
        Some(Self {
            base_url,
            api_key,
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".into()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatReply {
    Command(WorkflowCommand),
    Clarification {
        message: String,
        suggestions: Vec<String>,
    },
}

const SYSTEM_PROMPT: &str = "Translate the user's request into exactly one JSON object describing a causal analysis step. \
The object has a \"command\" field, one of: load_data {source}, preprocess {plan}, describe, \
set_knowledge {delta: {forbidden: [[from, to]], required: [[from, to]]}}, \
discover {algorithm: pc|ges|notears|direct_lingam, params: {alpha, max_cond_set, lambda1, w_threshold, seed}}, \
set_graph {graph}, estimate_effect {treatment, outcome}, \
run_rca {method: traversal|counterfactual|cholesky, row, target, params}, \
simulate {graph, mechanism, intervention, n_normal}, evaluate {truth}, rollback {step}, generate_report. \
Reply with the JSON object only.";

fn clarification(message: String) -> ChatReply {
    ChatReply::Clarification {
        message,
        suggestions: VERBS.iter().map(|v| v.to_string()).collect(),
    }
}

fn from_grammar(text: &str) -> ChatReply {
    match parse_intent(text) {
        Ok(c) => ChatReply::Command(c),
        Err(CoreError::NeedsClarification {
            message,
            suggestions,
        }) => ChatReply::Clarification {
            message,
            suggestions,
        },
        Err(e) => clarification(e.to_string()),
    }
}

/// Strips an optional Markdown code fence around the model output.
fn unfence(s: &str) -> &str {
    let t = s.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

/// Checks endpoint output against the command schema and its parameter rules.
pub fn validate_output(content: &str) -> Result<WorkflowCommand, String> {
    let cmd: WorkflowCommand =
        serde_json::from_str(unfence(content)).map_err(|e| format!("not a valid command: {e}"))?;
    cmd.validate().map_err(|e| e.to_string())?;
    Ok(cmd)
}

async fn ask(client: &reqwest::Client, cfg: &ChatConfig, text: &str) -> Result<String, String> {
    let url = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
    let body = json!({
        "model": cfg.model,
        "temperature": 0,
        "messages": [
            {"role": "system", "content": SYSTEM_PROMPT},
            {"role": "user", "content": text},
        ],
    });
    let resp = client
        .post(url)
        .bearer_auth(&cfg.api_key)
        .json(&body)
        .send()
        .await
        .map_err(|e| format!("chat endpoint unreachable: {e}"))?;
    if !resp.status().is_success() {
        return Err(format!("chat endpoint returned {}", resp.status()));
    }
    let v: Value = resp
        .json()
        .await
        .map_err(|e| format!("chat endpoint reply: {e}"))?;
    v["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| "chat endpoint reply has no message content".into())
}

/// Maps text to a command preview. Nothing is executed here.
pub async fn translate(
    client: &reqwest::Client,
    cfg: Option<&ChatConfig>,
    text: &str,
) -> ChatReply {
    let Some(cfg) = cfg else {
        return from_grammar(text);
    };
    match ask(client, cfg, text)
        .await
        .and_then(|c| validate_output(&c))
    {
        Ok(cmd) => ChatReply::Command(cmd),
        Err(e) => clarification(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_output_is_accepted() {
        let c = validate_output("```json\n{\"command\":\"describe\"}\n```").unwrap();
        assert_eq!(c, WorkflowCommand::Describe);
        assert!(validate_output(
            "{\"command\":\"discover\",\"algorithm\":\"pc\",\"params\":{\"alpha\":7}}"
        )
        .is_err());
        assert!(validate_output("rm -rf /").is_err());
    }

    #[test]
    fn grammar_fallback() {
        assert!(matches!(
            from_grammar("please help"),
            ChatReply::Clarification { .. }
        ));
        assert_eq!(
            from_grammar("describe"),
            ChatReply::Command(WorkflowCommand::Describe)
        );
    }
}
