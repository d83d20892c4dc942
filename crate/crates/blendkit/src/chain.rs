//! Declarative request chaining: an ordered list of steps, each blending
//! one interaction (possibly once per element of a previously collected
//! list), with named collections carrying values between steps.
//!
//! A step's parameters may hold literals, `"${item}"` for the current
//! foreach element, or `"${name}"` for a whole prior collection (joined
//! with commas when it lands in a scalar parameter).

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::description::{Catalog, SpecError};
use crate::response::paths::DotPath;
use crate::session::{BlendResult, Session, SessionError};

/// One parameter value in a chain file.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Literal(Value),
    /// `"${item}"`: the current element of the foreach collection.
    Item,
    /// `"${name}"`: every value of a prior collection, comma-joined.
    WholeCollection(String),
}

/// What a step gathers from each of its blends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectSpec {
    pub name: String,
    /// Path into each blend's prepared content. A list at this path is
    /// flattened one level into the collection.
    pub source: DotPath,
    pub unique: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainStep {
    pub id: String,
    pub server: String,
    pub interaction: String,
    /// One blend per set (two or more sets express page-style fan-out).
    pub param_sets: Vec<IndexMap<String, ParamValue>>,
    /// Collection to iterate: the step runs once per element.
    pub foreach: Option<String>,
    pub collect: Option<CollectSpec>,
    /// Aborts the chain when the step collects nothing. Defaults to
    /// true exactly when a later step references this step's collection.
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainSpec {
    pub steps: Vec<ChainStep>,
}

/// Results of one step: one BlendResult per blend it performed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step_id: String,
    pub results: Vec<BlendResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ChainStatus {
    Completed,
    Aborted { step_id: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub steps: Vec<StepOutcome>,
    pub collections: IndexMap<String, Vec<Value>>,
    #[serde(flatten)]
    pub status: ChainStatus,
}

impl ChainResult {
    pub fn is_completed(&self) -> bool {
        self.status == ChainStatus::Completed
    }
}

fn err(path: impl Into<String>, message: impl Into<String>) -> SpecError {
    SpecError {
        path: path.into(),
        message: message.into(),
    }
}

/// Parse and validate a chain document against the catalog: structure,
/// unique step ids, known servers and interactions, and references that
/// resolve to collections declared by earlier steps.
pub fn parse_chain(document: &str, catalog: &Catalog) -> Result<ChainSpec, Vec<SpecError>> {
    let root: Value = match serde_json::from_str(document) {
        Ok(value) => value,
        Err(parse_err) => return Err(vec![err("$", parse_err.to_string())]),
    };
    let mut errors = Vec::new();
    let Value::Object(map) = &root else {
        return Err(vec![err("$", "expected a JSON object")]);
    };
    for key in map.keys() {
        if key != "steps" {
            errors.push(err(key.clone(), "unknown key"));
        }
    }
    let Some(steps_value) = map.get("steps") else {
        errors.push(err("$", "missing required field \"steps\""));
        return Err(errors);
    };
    let Value::Array(raw_steps) = steps_value else {
        errors.push(err("steps", "expected a list"));
        return Err(errors);
    };

    let mut steps = Vec::new();
    let mut explicit_required = Vec::new();
    let mut seen_ids: Vec<String> = Vec::new();
    let mut known_collections = Vec::new();
    for (index, raw) in raw_steps.iter().enumerate() {
        let at = format!("steps[{index}]");
        // Ids and collection names register even when the step has other
        // problems, so duplicate and reference errors stay precise.
        if let Some(id) = raw.get("id").and_then(Value::as_str) {
            if seen_ids.iter().any(|seen| seen == id) {
                errors.push(err(format!("{at}.id"), format!("duplicate step id {id:?}")));
            }
            seen_ids.push(id.to_owned());
        }
        let declared_collection = raw
            .get("collect")
            .and_then(|c| c.get("name"))
            .and_then(Value::as_str)
            .map(str::to_owned);

        if let Some((step, required)) =
            parse_step(raw, &at, catalog, &known_collections, &mut errors)
        {
            steps.push(step);
            explicit_required.push(required);
        }
        if let Some(name) = declared_collection {
            known_collections.push(name);
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    mark_required_defaults(&mut steps, &explicit_required);
    Ok(ChainSpec { steps })
}

/// A step is required by default when a later step references its
/// collection (via foreach or a whole-collection parameter); an explicit
/// `"required"` in the file always wins.
fn mark_required_defaults(steps: &mut [ChainStep], explicit: &[Option<bool>]) {
    let mut referenced: Vec<String> = Vec::new();
    for step in steps.iter() {
        if let Some(name) = &step.foreach {
            referenced.push(name.clone());
        }
        for set in &step.param_sets {
            for value in set.values() {
                if let ParamValue::WholeCollection(name) = value {
                    referenced.push(name.clone());
                }
            }
        }
    }
    for (step, explicit) in steps.iter_mut().zip(explicit) {
        step.required = match explicit {
            Some(flag) => *flag,
            None => step
                .collect
                .as_ref()
                .is_some_and(|collect| referenced.contains(&collect.name)),
        };
    }
}

fn parse_step(
    raw: &Value,
    at: &str,
    catalog: &Catalog,
    known_collections: &[String],
    errors: &mut Vec<SpecError>,
) -> Option<(ChainStep, Option<bool>)> {
    let Value::Object(map) = raw else {
        errors.push(err(at, "expected an object"));
        return None;
    };
    let before = errors.len();
    for key in map.keys() {
        match key.as_str() {
            "id" | "server" | "interaction" | "params" | "foreach" | "collect" | "required" => {}
            other => errors.push(err(format!("{at}.{other}"), "unknown key")),
        }
    }

    let id = require_string(map, "id", at, errors);
    let server = require_string(map, "server", at, errors);
    let interaction = require_string(map, "interaction", at, errors);
    if let (Some(server), Some(interaction)) = (&server, &interaction) {
        match catalog.get(server) {
            None => errors.push(err(
                format!("{at}.server"),
                format!("unknown server {server:?}"),
            )),
            Some(spec) if spec.interaction(interaction).is_none() => {
                errors.push(err(
                    format!("{at}.interaction"),
                    format!("server {server:?} has no interaction {interaction:?}"),
                ));
            }
            Some(_) => {}
        }
    }

    let foreach = match map.get("foreach") {
        None => None,
        Some(Value::String(text)) => match parse_reference(text) {
            Some(Reference::Collection(name)) => {
                if !known_collections.contains(&name) {
                    errors.push(err(
                        format!("{at}.foreach"),
                        format!("no earlier step collects {name:?}"),
                    ));
                }
                Some(name)
            }
            _ => {
                errors.push(err(
                    format!("{at}.foreach"),
                    "expected a \"${collection}\" reference",
                ));
                None
            }
        },
        Some(_) => {
            errors.push(err(format!("{at}.foreach"), "expected a string"));
            None
        }
    };

    let param_sets = parse_param_sets(
        map.get("params"),
        at,
        foreach.is_some(),
        known_collections,
        errors,
    );

    let collect = match map.get("collect") {
        None => None,
        Some(value) => parse_collect(value, &format!("{at}.collect"), errors),
    };

    let required = match map.get("required") {
        None => None,
        Some(Value::Bool(flag)) => Some(*flag),
        Some(_) => {
            errors.push(err(format!("{at}.required"), "expected a boolean"));
            None
        }
    };

    if errors.len() > before {
        return None;
    }
    let step = ChainStep {
        id: id?,
        server: server?,
        interaction: interaction?,
        param_sets,
        foreach,
        collect,
        required: false,
    };
    Some((step, required))
}

fn require_string(
    map: &serde_json::Map<String, Value>,
    key: &str,
    at: &str,
    errors: &mut Vec<SpecError>,
) -> Option<String> {
    match map.get(key) {
        Some(Value::String(text)) if !text.is_empty() => Some(text.clone()),
        Some(_) => {
            errors.push(err(format!("{at}.{key}"), "expected a non-empty string"));
            None
        }
        None => {
            errors.push(err(at, format!("missing required field {key:?}")));
            None
        }
    }
}

fn parse_param_sets(
    raw: Option<&Value>,
    at: &str,
    in_foreach: bool,
    known_collections: &[String],
    errors: &mut Vec<SpecError>,
) -> Vec<IndexMap<String, ParamValue>> {
    match raw {
        None => vec![IndexMap::new()],
        Some(Value::Object(map)) => {
            vec![parse_param_map(map, &format!("{at}.params"), in_foreach, known_collections, errors)]
        }
        Some(Value::Array(sets)) => {
            if in_foreach {
                errors.push(err(
                    format!("{at}.params"),
                    "a foreach step takes a single parameter map, not a list",
                ));
                return vec![IndexMap::new()];
            }
            if sets.is_empty() {
                errors.push(err(format!("{at}.params"), "expected at least one parameter set"));
                return vec![IndexMap::new()];
            }
            sets.iter()
                .enumerate()
                .map(|(i, set)| {
                    let set_at = format!("{at}.params[{i}]");
                    match set {
                        Value::Object(map) => {
                            parse_param_map(map, &set_at, in_foreach, known_collections, errors)
                        }
                        _ => {
                            errors.push(err(set_at, "expected an object"));
                            IndexMap::new()
                        }
                    }
                })
                .collect()
        }
        Some(_) => {
            errors.push(err(
                format!("{at}.params"),
                "expected an object or a list of objects",
            ));
            vec![IndexMap::new()]
        }
    }
}

fn parse_param_map(
    map: &serde_json::Map<String, Value>,
    at: &str,
    in_foreach: bool,
    known_collections: &[String],
    errors: &mut Vec<SpecError>,
) -> IndexMap<String, ParamValue> {
    let mut params = IndexMap::new();
    for (key, value) in map {
        let value_at = format!("{at}.{key}");
        let parsed = match value {
            Value::String(text) if text.contains("${") => match parse_reference(text) {
                Some(Reference::Item) => {
                    if !in_foreach {
                        errors.push(err(
                            value_at.clone(),
                            "\"${item}\" is only valid inside a foreach step",
                        ));
                    }
                    ParamValue::Item
                }
                Some(Reference::Collection(name)) => {
                    if !known_collections.contains(&name) {
                        errors.push(err(
                            value_at.clone(),
                            format!("no earlier step collects {name:?}"),
                        ));
                    }
                    ParamValue::WholeCollection(name)
                }
                None => {
                    errors.push(err(
                        value_at.clone(),
                        "a reference must be the whole value, like \"${users}\"",
                    ));
                    ParamValue::Literal(value.clone())
                }
            },
            other => ParamValue::Literal(other.clone()),
        };
        params.insert(key.clone(), parsed);
    }
    params
}

enum Reference {
    Item,
    Collection(String),
}

fn parse_reference(text: &str) -> Option<Reference> {
    let name = text.strip_prefix("${")?.strip_suffix('}')?;
    if name.is_empty() || name.contains('$') || name.contains('{') {
        return None;
    }
    if name == "item" {
        Some(Reference::Item)
    } else {
        Some(Reference::Collection(name.to_owned()))
    }
}

fn parse_collect(raw: &Value, at: &str, errors: &mut Vec<SpecError>) -> Option<CollectSpec> {
    let Value::Object(map) = raw else {
        errors.push(err(at, "expected an object"));
        return None;
    };
    for key in map.keys() {
        match key.as_str() {
            "name" | "source" | "unique" => {}
            other => errors.push(err(format!("{at}.{other}"), "unknown key")),
        }
    }
    let name = require_string(map, "name", at, errors);
    let source = match map.get("source") {
        Some(Value::String(text)) => match DotPath::parse(text) {
            Ok(path) => Some(path),
            Err(path_err) => {
                errors.push(err(format!("{at}.source"), path_err.to_string()));
                None
            }
        },
        Some(_) => {
            errors.push(err(format!("{at}.source"), "expected a string"));
            None
        }
        None => {
            errors.push(err(at, "missing required field \"source\""));
            None
        }
    };
    let unique = match map.get("unique") {
        None => false,
        Some(Value::Bool(flag)) => *flag,
        Some(_) => {
            errors.push(err(format!("{at}.unique"), "expected a boolean"));
            false
        }
    };
    Some(CollectSpec {
        name: name?,
        source: source?,
        unique,
    })
}

fn scalar_text(value: &Value) -> String {
    match value {
        Value::String(text) => text.clone(),
        other => other.to_string(),
    }
}

/// Gather values at `segments` under `value`. Lists met along the path
/// are mapped over (the collection grows once per element); a list at
/// the path's end is flattened one level.
fn collect_from(value: &Value, segments: &[String], out: &mut Vec<Value>) {
    match segments {
        [] => match value {
            Value::Array(items) => out.extend(items.iter().cloned()),
            other => out.push(other.clone()),
        },
        [head, rest @ ..] => match value {
            Value::Object(map) => {
                if let Some(next) = map.get(head.as_str()) {
                    collect_from(next, rest, out);
                }
            }
            Value::Array(items) => {
                for item in items {
                    collect_from(item, segments, out);
                }
            }
            _ => {}
        },
    }
}

fn substitute(
    set: &IndexMap<String, ParamValue>,
    item: Option<&Value>,
    collections: &IndexMap<String, Vec<Value>>,
) -> crate::request::SuppliedParameters {
    let mut supplied = crate::request::SuppliedParameters::new();
    for (key, value) in set {
        let concrete = match value {
            ParamValue::Literal(literal) => literal.clone(),
            ParamValue::Item => item.cloned().unwrap_or(Value::Null),
            ParamValue::WholeCollection(name) => {
                let values = collections.get(name).map(Vec::as_slice).unwrap_or(&[]);
                Value::String(
                    values
                        .iter()
                        .map(scalar_text)
                        .collect::<Vec<_>>()
                        .join(","),
                )
            }
        };
        supplied.insert(key.clone(), concrete);
    }
    supplied
}

/// Execute the chain on a session. Per-blend failures are recorded in
/// the step's results and the chain moves on; a required step that
/// collects nothing aborts it. Lifecycle and parameter errors mean the
/// chain file itself is bad and surface as `Err`.
pub fn run_chain(spec: &ChainSpec, session: &mut Session) -> Result<ChainResult, SessionError> {
    let mut outcome = ChainResult {
        steps: Vec::new(),
        collections: IndexMap::new(),
        status: ChainStatus::Completed,
    };
    for step in &spec.steps {
        let items: Option<Vec<Value>> = step
            .foreach
            .as_ref()
            .map(|name| outcome.collections.get(name).cloned().unwrap_or_default());
        let mut results = Vec::new();
        session.load_server(&step.server)?;

        let runs: Vec<crate::request::SuppliedParameters> = match &items {
            Some(elements) => elements
                .iter()
                .flat_map(|element| {
                    step.param_sets
                        .iter()
                        .map(|set| substitute(set, Some(element), &outcome.collections))
                })
                .collect(),
            None => step
                .param_sets
                .iter()
                .map(|set| substitute(set, None, &outcome.collections))
                .collect(),
        };

        for params in runs {
            session.load_interaction(&step.interaction)?;
            session.set_parameters(params)?;
            results.push(session.blend()?);
        }

        if let Some(collect) = &step.collect {
            let mut values = Vec::new();
            for result in results.iter().filter(|r| r.is_success()) {
                let Some(prepared) = &result.prepared_content else {
                    continue;
                };
                collect_from(prepared, collect.source.segments(), &mut values);
            }
            if collect.unique {
                let mut seen = Vec::new();
                values.retain(|value| {
                    if seen.contains(value) {
                        false
                    } else {
                        seen.push(value.clone());
                        true
                    }
                });
            }
            let empty = values.is_empty();
            outcome.collections.insert(collect.name.clone(), values);
            if empty && step.required {
                outcome.status = ChainStatus::Aborted {
                    step_id: step.id.clone(),
                    reason: format!(
                        "required step {:?} collected no {:?} values",
                        step.id, collect.name
                    ),
                };
                outcome.steps.push(StepOutcome {
                    step_id: step.id.clone(),
                    results,
                });
                return Ok(outcome);
            }
        }
        outcome.steps.push(StepOutcome {
            step_id: step.id.clone(),
            results,
        });
    }
    Ok(outcome)
}
