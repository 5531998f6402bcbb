//! Gateway to language-model completions.
//!
//! Every call goes through a registered prompt template and a JSON schema.
//! Responses that fail to parse or validate are retried with a corrective
//! preamble; free prose is never interpreted. The mock backend replays
//! scripted responses keyed by template and variables, so every AI-backed
//! operation is reproducible offline.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::text::sha256_hex;

pub const SUMMARIZE_TEMPLATE: &str = "summarize/1";
pub const PLACEMENT_TEMPLATE: &str = "placement/1";
pub const NAME_TEMPLATE: &str = "name/1";
pub const DESCRIBE_TEMPLATE: &str = "describe/1";

const BUILTIN: &[(&str, &str, &str)] = &[
    (
        SUMMARIZE_TEMPLATE,
        include_str!("../prompts/summarize/1.txt"),
        include_str!("../schemas/summarize/1.json"),
    ),
    (
        PLACEMENT_TEMPLATE,
        include_str!("../prompts/placement/1.txt"),
        include_str!("../schemas/placement/1.json"),
    ),
    (
        NAME_TEMPLATE,
        include_str!("../prompts/name/1.txt"),
        include_str!("../schemas/name/1.json"),
    ),
    (
        DESCRIBE_TEMPLATE,
        include_str!("../prompts/describe/1.txt"),
        include_str!("../schemas/describe/1.json"),
    ),
];

const CORRECTIVE_PREAMBLE: &str =
    "Your previous reply could not be accepted. Reply with a single JSON value that satisfies the requested shape and nothing else.";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub template_id: String,
    pub variables: BTreeMap<String, String>,
    pub response_schema_id: String,
}

impl PromptRequest {
    /// Request whose response schema shares the template's id.
    pub fn new(template_id: &str) -> Self {
        Self {
            template_id: template_id.to_string(),
            variables: BTreeMap::new(),
            response_schema_id: template_id.to_string(),
        }
    }

    pub fn var(mut self, name: &str, value: impl Into<String>) -> Self {
        self.variables.insert(name.to_string(), value.into());
        self
    }

    pub fn variables_digest(&self) -> String {
        variables_digest(&self.variables)
    }
}

pub fn variables_digest(variables: &BTreeMap<String, String>) -> String {
    sha256_hex(serde_json::to_vec(variables).expect("string map serializes"))
}

/// What a backend receives for a single attempt.
#[derive(Clone, Debug)]
pub struct RenderedPrompt {
    pub template_id: String,
    pub variables_digest: String,
    pub attempt: u32,
    pub text: String,
    pub response_schema: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend timed out")]
    Timeout,
}

pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider unreachable: {0}")]
    Unreachable(String),
    #[error("no schema-valid response after {attempts} attempts: {last_error}")]
    SchemaViolationExhausted { attempts: u32, last_error: String },
    #[error("provider timed out")]
    Timeout,
    #[error("mock scripts can only be registered in mock mode")]
    NotInMockMode,
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("unknown response schema `{0}`")]
    UnknownSchema(String),
    #[error("template `{template}` requires variable `{name}`")]
    MissingVariable { template: String, name: String },
    #[error("invalid provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    pub fn code(&self) -> &'static str {
        match self {
            ProviderError::Unreachable(_) => "provider_unreachable",
            ProviderError::SchemaViolationExhausted { .. } => "schema_violation_exhausted",
            ProviderError::Timeout => "timeout",
            ProviderError::NotInMockMode => "not_in_mock_mode",
            ProviderError::UnknownTemplate(_) => "unknown_template",
            ProviderError::UnknownSchema(_) => "unknown_schema",
            ProviderError::MissingVariable { .. } => "missing_variable",
            ProviderError::Config(_) => "invalid_config",
        }
    }

    /// True when the backend never produced an answer, as opposed to
    /// producing answers that failed validation.
    pub fn is_unavailable(&self) -> bool {
        matches!(self, ProviderError::Unreachable(_) | ProviderError::Timeout)
    }
}

impl From<BackendError> for ProviderError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Unreachable(msg) => ProviderError::Unreachable(msg),
            BackendError::Timeout => ProviderError::Timeout,
        }
    }
}

/// A prompt template with `{{name}}` placeholders.
#[derive(Clone, Debug)]
pub struct Template {
    id: String,
    body: String,
    required: Vec<String>,
}

impl Template {
    pub fn parse(id: &str, body: &str) -> Self {
        let mut required = Vec::new();
        let mut rest = body;
        while let Some(open) = rest.find("{{") {
            let after = &rest[open + 2..];
            let Some(close) = after.find("}}") else { break };
            let name = after[..close].trim().to_string();
            if !name.is_empty() && !required.contains(&name) {
                required.push(name);
            }
            rest = &after[close + 2..];
        }
        Self {
            id: id.to_string(),
            body: body.to_string(),
            required,
        }
    }

    pub fn required_variables(&self) -> &[String] {
        &self.required
    }

    pub fn render(&self, variables: &BTreeMap<String, String>) -> Result<String, ProviderError> {
        // single pass, so placeholder-like text inside values stays literal
        let mut out = String::with_capacity(self.body.len());
        let mut rest = self.body.as_str();
        while let Some(open) = rest.find("{{") {
            let after = &rest[open + 2..];
            let Some(close) = after.find("}}") else { break };
            out.push_str(&rest[..open]);
            let name = after[..close].trim();
            let value = variables.get(name).ok_or_else(|| ProviderError::MissingVariable {
                template: self.id.clone(),
                name: name.to_string(),
            })?;
            out.push_str(value);
            rest = &after[close + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

struct CompiledSchema {
    raw: Value,
    validator: jsonschema::Validator,
}

impl fmt::Debug for CompiledSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompiledSchema").field("raw", &self.raw).finish()
    }
}

#[derive(Debug, Default)]
pub struct PromptRegistry {
    templates: HashMap<String, Template>,
    schemas: HashMap<String, CompiledSchema>,
}

impl PromptRegistry {
    /// The templates and schemas shipped in `prompts/` and `schemas/`.
    pub fn builtin() -> Self {
        let mut registry = Self::default();
        for (id, body, schema) in BUILTIN {
            registry.register_template(Template::parse(id, body));
            let schema: Value = serde_json::from_str(schema).expect("builtin schema is JSON");
            registry.register_schema(id, schema).expect("builtin schema compiles");
        }
        registry
    }

    pub fn register_template(&mut self, template: Template) {
        self.templates.insert(template.id.clone(), template);
    }

    pub fn register_schema(&mut self, id: &str, schema: Value) -> Result<(), ProviderError> {
        let validator = jsonschema::validator_for(&schema)
            .map_err(|e| ProviderError::Config(format!("schema `{id}`: {e}")))?;
        self.schemas.insert(
            id.to_string(),
            CompiledSchema {
                raw: schema,
                validator,
            },
        );
        Ok(())
    }

    pub fn template(&self, id: &str) -> Option<&Template> {
        self.templates.get(id)
    }

    /// Replaces registered templates with any `<dir>/<name>/<version>.txt`
    /// present. An override may drop variables but not introduce new ones.
    /// Returns the ids that were replaced.
    pub fn override_templates(&mut self, dir: &Path) -> Result<Vec<String>, ProviderError> {
        let mut replaced = Vec::new();
        let mut ids: Vec<String> = self.templates.keys().cloned().collect();
        ids.sort();
        for id in ids {
            let path = dir.join(format!("{id}.txt"));
            if !path.is_file() {
                continue;
            }
            let body = std::fs::read_to_string(&path)
                .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
            let template = Template::parse(&id, &body);
            let known = self.templates[&id].required_variables();
            if let Some(extra) = template.required_variables().iter().find(|v| !known.contains(v)) {
                return Err(ProviderError::Config(format!(
                    "{}: unknown variable `{extra}`",
                    path.display()
                )));
            }
            self.register_template(template);
            replaced.push(id);
        }
        Ok(replaced)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderMode {
    Live,
    Mock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub mode: ProviderMode,
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the credential.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default)]
    pub model: Option<String>,
    pub max_retries: u32,
    #[serde(with = "duration_secs")]
    pub timeout: Duration,
}

impl ProviderConfig {
    pub fn mock() -> Self {
        Self {
            mode: ProviderMode::Mock,
            endpoint: None,
            credential_env: None,
            model: None,
            max_retries: 2,
            timeout: Duration::from_secs(30),
        }
    }

    pub fn live(endpoint: &str) -> Self {
        Self {
            mode: ProviderMode::Live,
            endpoint: Some(endpoint.to_string()),
            ..Self::mock()
        }
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

/// Key a scripted response list is registered under. Without a digest the
/// entry matches every request for that template.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MockKey {
    pub template_id: String,
    pub variables_digest: Option<String>,
}

impl MockKey {
    pub fn template(template_id: &str) -> Self {
        Self {
            template_id: template_id.to_string(),
            variables_digest: None,
        }
    }

    pub fn exact(request: &PromptRequest) -> Self {
        Self {
            template_id: request.template_id.clone(),
            variables_digest: Some(request.variables_digest()),
        }
    }
}

/// File format `mock-script/1`. Response entries that are JSON strings are
/// used verbatim as the raw reply; any other JSON value is serialized.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default = "mock_schema")]
    pub schema: String,
    pub entries: Vec<MockEntry>,
}

fn mock_schema() -> String {
    "mock-script/1".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub template_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables_digest: Option<String>,
    pub responses: Vec<Value>,
}

fn raw_response(value: &Value) -> String {
    match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MockCall {
    pub template_id: String,
    pub variables_digest: String,
    pub attempt: u32,
}

/// Scripted backend. Consumption is atomic per key; an exhausted or missing
/// script reports [`BackendError::Unreachable`].
#[derive(Debug, Default)]
pub struct MockBackend {
    scripts: Mutex<HashMap<MockKey, VecDeque<String>>>,
    calls: Mutex<Vec<MockCall>>,
}

impl MockBackend {
    pub fn from_script(script: &MockScript) -> Self {
        let backend = Self::default();
        for entry in &script.entries {
            let key = MockKey {
                template_id: entry.template_id.clone(),
                variables_digest: entry.variables_digest.clone(),
            };
            backend.push(key, entry.responses.iter().map(raw_response));
        }
        backend
    }

    pub fn push(&self, key: MockKey, responses: impl IntoIterator<Item = String>) {
        let mut scripts = self.scripts.lock().expect("mock script lock");
        scripts.entry(key).or_default().extend(responses);
    }

    pub fn calls(&self) -> Vec<MockCall> {
        self.calls.lock().expect("mock call lock").clone()
    }
}

impl Backend for MockBackend {
    fn complete(&self, prompt: &RenderedPrompt) -> Result<String, BackendError> {
        self.calls.lock().expect("mock call lock").push(MockCall {
            template_id: prompt.template_id.clone(),
            variables_digest: prompt.variables_digest.clone(),
            attempt: prompt.attempt,
        });
        let mut scripts = self.scripts.lock().expect("mock script lock");
        let exact = MockKey {
            template_id: prompt.template_id.clone(),
            variables_digest: Some(prompt.variables_digest.clone()),
        };
        let wildcard = MockKey::template(&prompt.template_id);
        for key in [exact, wildcard] {
            if let Some(response) = scripts.get_mut(&key).and_then(VecDeque::pop_front) {
                return Ok(response);
            }
        }
        Err(BackendError::Unreachable(format!(
            "no scripted response left for `{}`",
            prompt.template_id
        )))
    }
}

pub struct Provider {
    config: ProviderConfig,
    registry: PromptRegistry,
    backend: Arc<dyn Backend>,
    mock: Option<Arc<MockBackend>>,
}

impl fmt::Debug for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Provider").field("config", &self.config).finish_non_exhaustive()
    }
}

impl Provider {
    pub fn mock(script: MockScript) -> Self {
        Self::mock_with(ProviderConfig::mock(), script).expect("mock config")
    }

    pub fn mock_with(config: ProviderConfig, script: MockScript) -> Result<Self, ProviderError> {
        if config.mode != ProviderMode::Mock {
            return Err(ProviderError::Config("mock backend needs mode=mock".into()));
        }
        let mock = Arc::new(MockBackend::from_script(&script));
        Ok(Self {
            config,
            registry: PromptRegistry::builtin(),
            backend: mock.clone(),
            mock: Some(mock),
        })
    }

    pub fn live(config: ProviderConfig, backend: Arc<dyn Backend>) -> Result<Self, ProviderError> {
        if config.mode != ProviderMode::Live {
            return Err(ProviderError::Config("live backend needs mode=live".into()));
        }
        Ok(Self {
            config,
            registry: PromptRegistry::builtin(),
            backend,
            mock: None,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn registry_mut(&mut self) -> &mut PromptRegistry {
        &mut self.registry
    }

    pub fn register_mock_script(&self, key: MockKey, responses: Vec<String>) -> Result<(), ProviderError> {
        let mock = self.mock.as_ref().ok_or(ProviderError::NotInMockMode)?;
        mock.push(key, responses);
        Ok(())
    }

    /// Calls seen by the mock backend, empty in live mode.
    pub fn mock_calls(&self) -> Vec<MockCall> {
        self.mock.as_ref().map(|m| m.calls()).unwrap_or_default()
    }

    pub fn complete_structured(&self, request: &PromptRequest) -> Result<Value, ProviderError> {
        self.complete_checked(request, |_| Ok(()))
    }

    /// Like [`Provider::complete_structured`], with an extra semantic check
    /// (for example "the theme id exists") whose failures are retried the
    /// same way as schema violations.
    pub fn complete_checked<F>(&self, request: &PromptRequest, check: F) -> Result<Value, ProviderError>
    where
        F: Fn(&Value) -> Result<(), String>,
    {
        let template = self
            .registry
            .template(&request.template_id)
            .ok_or_else(|| ProviderError::UnknownTemplate(request.template_id.clone()))?;
        let schema = self
            .registry
            .schemas
            .get(&request.response_schema_id)
            .ok_or_else(|| ProviderError::UnknownSchema(request.response_schema_id.clone()))?;
        let body = template.render(&request.variables)?;
        let digest = request.variables_digest();

        let attempts = self.config.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            let text = if attempt == 0 {
                body.clone()
            } else {
                format!("{CORRECTIVE_PREAMBLE}\nProblem: {last_error}\n\n{body}")
            };
            let reply = self.backend.complete(&RenderedPrompt {
                template_id: request.template_id.clone(),
                variables_digest: digest.clone(),
                attempt,
                text,
                response_schema: schema.raw.clone(),
            });
            let raw = match reply {
                Ok(raw) => raw,
                // a backend that already answered badly reports the bad answer
                Err(_) if attempt > 0 => {
                    return Err(ProviderError::SchemaViolationExhausted { attempts: attempt, last_error });
                }
                Err(e) => return Err(e.into()),
            };
            match parse_against(&raw, schema).and_then(|v| check(&v).map(|()| v)) {
                Ok(value) => return Ok(value),
                Err(e) => last_error = e,
            }
        }
        Err(ProviderError::SchemaViolationExhausted {
            attempts,
            last_error,
        })
    }
}

fn parse_against(raw: &str, schema: &CompiledSchema) -> Result<Value, String> {
    let value: Value = serde_json::from_str(raw.trim()).map_err(|e| format!("not JSON: {e}"))?;
    if let Some(err) = schema.validator.iter_errors(&value).next() {
        return Err(format!("schema violation at `{}`: {err}", err.instance_path));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn name_request() -> PromptRequest {
        PromptRequest::new(NAME_TEMPLATE)
            .var("evidence", "- query latency")
            .var("current_name", "Untitled")
    }

    #[test]
    fn templates_declare_their_variables() {
        let registry = PromptRegistry::builtin();
        let summarize = registry.template(SUMMARIZE_TEMPLATE).unwrap();
        assert_eq!(
            summarize.required_variables(),
            ["text", "medium_budget", "short_budget", "tiny_budget"]
        );
        for (id, _, _) in BUILTIN {
            assert!(registry.schemas.contains_key(*id));
        }
    }

    #[test]
    fn template_overrides_come_from_a_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("name")).unwrap();
        std::fs::write(dir.path().join("name/1.txt"), "Name this: {{evidence}}").unwrap();
        let mut registry = PromptRegistry::builtin();
        assert_eq!(registry.override_templates(dir.path()).unwrap(), [NAME_TEMPLATE]);
        assert_eq!(registry.template(NAME_TEMPLATE).unwrap().required_variables(), ["evidence"]);

        std::fs::write(dir.path().join("name/1.txt"), "{{evidence}} {{mood}}").unwrap();
        let err = PromptRegistry::builtin().override_templates(dir.path()).unwrap_err();
        assert_eq!(err.code(), "invalid_config");
    }

    #[test]
    fn mock_keyed_by_template_returns_parsed_object() {
        let provider = Provider::mock(MockScript::default());
        provider
            .register_mock_script(MockKey::template(NAME_TEMPLATE), vec![r#"{"name":"Index Maintenance"}"#.into()])
            .unwrap();
        let value = provider.complete_structured(&name_request()).unwrap();
        assert_eq!(value, json!({"name": "Index Maintenance"}));
    }

    #[test]
    fn malformed_twice_exhausts_one_retry() {
        let mut config = ProviderConfig::mock();
        config.max_retries = 1;
        let provider = Provider::mock_with(config, MockScript::default()).unwrap();
        provider
            .register_mock_script(MockKey::template(NAME_TEMPLATE), vec!["nope".into(), "{\"name\":".into()])
            .unwrap();
        let err = provider.complete_structured(&name_request()).unwrap_err();
        assert_eq!(err.code(), "schema_violation_exhausted");
        assert!(matches!(err, ProviderError::SchemaViolationExhausted { attempts: 2, .. }));
    }

    #[test]
    fn bad_then_good_succeeds_with_one_retry() {
        let mut config = ProviderConfig::mock();
        config.max_retries = 1;
        let provider = Provider::mock_with(config, MockScript::default()).unwrap();
        provider
            .register_mock_script(
                MockKey::template(NAME_TEMPLATE),
                vec![r#"{"name": ""}"#.into(), r#"{"name": "Recall"}"#.into()],
            )
            .unwrap();
        let value = provider.complete_structured(&name_request()).unwrap();
        assert_eq!(value["name"], "Recall");
        let calls = provider.mock_calls();
        assert_eq!(calls.iter().map(|c| c.attempt).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn empty_or_consumed_script_is_unreachable() {
        let provider = Provider::mock(MockScript::default());
        assert_eq!(
            provider.complete_structured(&name_request()).unwrap_err().code(),
            "provider_unreachable"
        );
        provider
            .register_mock_script(MockKey::template(NAME_TEMPLATE), vec![r#"{"name":"A"}"#.into()])
            .unwrap();
        assert!(provider.complete_structured(&name_request()).is_ok());
        assert_eq!(
            provider.complete_structured(&name_request()).unwrap_err(),
            ProviderError::Unreachable("no scripted response left for `name/1`".into())
        );
    }

    #[test]
    fn exact_key_wins_over_template_key() {
        let provider = Provider::mock(MockScript::default());
        let request = name_request();
        provider
            .register_mock_script(MockKey::template(NAME_TEMPLATE), vec![r#"{"name":"Generic"}"#.into()])
            .unwrap();
        provider
            .register_mock_script(MockKey::exact(&request), vec![r#"{"name":"Specific"}"#.into()])
            .unwrap();
        assert_eq!(provider.complete_structured(&request).unwrap()["name"], "Specific");
        assert_eq!(provider.complete_structured(&request).unwrap()["name"], "Generic");
    }

    #[test]
    fn retry_into_empty_script_reports_the_invalid_answer() {
        let provider = Provider::mock(MockScript::default());
        provider
            .register_mock_script(MockKey::template(NAME_TEMPLATE), vec!["prose, not JSON".into()])
            .unwrap();
        let err = provider.complete_structured(&name_request()).unwrap_err();
        assert!(matches!(err, ProviderError::SchemaViolationExhausted { attempts: 1, .. }));
    }

    #[test]
    fn semantic_check_failures_are_retried() {
        let provider = Provider::mock(MockScript::default());
        provider
            .register_mock_script(
                MockKey::template(NAME_TEMPLATE),
                vec![r#"{"name":"bad"}"#.into(), r#"{"name":"good"}"#.into()],
            )
            .unwrap();
        let value = provider
            .complete_checked(&name_request(), |v| {
                if v["name"] == "bad" {
                    Err("rejected".into())
                } else {
                    Ok(())
                }
            })
            .unwrap();
        assert_eq!(value["name"], "good");
    }

    struct Refusing;

    impl Backend for Refusing {
        fn complete(&self, _: &RenderedPrompt) -> Result<String, BackendError> {
            Err(BackendError::Timeout)
        }
    }

    #[test]
    fn live_mode_rejects_mock_registration() {
        let provider = Provider::live(ProviderConfig::live("http://localhost:1"), Arc::new(Refusing)).unwrap();
        let err = provider
            .register_mock_script(MockKey::template(NAME_TEMPLATE), vec![])
            .unwrap_err();
        assert_eq!(err.code(), "not_in_mock_mode");
        assert_eq!(provider.complete_structured(&name_request()).unwrap_err(), ProviderError::Timeout);
    }

    #[test]
    fn render_is_single_pass() {
        let t = Template::parse("t", "a={{a}} b={{b}}");
        let vars = BTreeMap::from([("a".to_string(), "{{b}}".to_string()), ("b".to_string(), "2".to_string())]);
        assert_eq!(t.render(&vars).unwrap(), "a={{b}} b=2");
    }

    #[test]
    fn missing_variable_reported() {
        let provider = Provider::mock(MockScript::default());
        let err = provider
            .complete_structured(&PromptRequest::new(NAME_TEMPLATE).var("evidence", "x"))
            .unwrap_err();
        assert_eq!(
            err,
            ProviderError::MissingVariable {
                template: NAME_TEMPLATE.into(),
                name: "current_name".into()
            }
        );
    }

    #[test]
    fn schema_enforces_name_length() {
        let provider = Provider::mock(MockScript::default());
        let long = "x".repeat(61);
        provider
            .register_mock_script(
                MockKey::template(NAME_TEMPLATE),
                vec![json!({"name": long}).to_string(); 3],
            )
            .unwrap();
        assert_eq!(
            provider.complete_structured(&name_request()).unwrap_err().code(),
            "schema_violation_exhausted"
        );
    }

    #[test]
    fn script_file_format() {
        let script: MockScript = serde_json::from_value(json!({
            "schema": "mock-script/1",
            "entries": [
                {"template_id": "name/1", "responses": [{"name": "From Object"}, "{\"name\":\"From String\"}"]}
            ]
        }))
        .unwrap();
        let provider = Provider::mock(script);
        assert_eq!(provider.complete_structured(&name_request()).unwrap()["name"], "From Object");
        assert_eq!(provider.complete_structured(&name_request()).unwrap()["name"], "From String");
    }
}
