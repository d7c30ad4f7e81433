//! TOML run configuration: `schema_version = 1` plus the fields of
//! [`SimConfig`], every one optional.

use std::path::Path;

use eve_core::engine::{EngineError, Topology};
use eve_core::SimConfig;
use toml::{Table, Value};

use crate::error::CliError;

pub const SCHEMA_VERSION: i64 = 1;

pub fn load(path: &Path) -> Result<SimConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<SimConfig, CliError> {
    let mut table: Table = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        CliError::Config(match line {
            Some(l) => format!("line {l}: {}", e.message()),
            None => e.message().to_string(),
        })
    })?;

    let mut issues = Vec::new();
    match table.remove("schema_version") {
        Some(Value::Integer(SCHEMA_VERSION)) => {}
        Some(other) => issues.push(format!(
            "schema_version: unsupported value {other}, expected {SCHEMA_VERSION}"
        )),
        None => issues.push("schema_version: missing".to_string()),
    }
    let mut unknown = Vec::new();
    unknown_keys(&table, &reference_for(&table), "", &mut unknown);
    issues.extend(unknown.into_iter().map(|k| format!("{k}: unknown key")));
    if !issues.is_empty() {
        return Err(CliError::Config(issues.join("; ")));
    }
    from_table(table)
}

/// Deserializes and validates a table that holds only [`SimConfig`] fields.
pub fn from_table(table: Table) -> Result<SimConfig, CliError> {
    let config: SimConfig = serde_path_to_error::deserialize(Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.into_inner().message()))
    })?;
    validate(&config)?;
    Ok(config)
}

pub fn validate(config: &SimConfig) -> Result<(), CliError> {
    config.validate().map_err(|e| match e {
        EngineError::Config(issues) => CliError::Config(
            issues
                .iter()
                .map(|i| format!("{}: {}", i.field, i.message))
                .collect::<Vec<_>>()
                .join("; "),
        ),
        other => CliError::Config(other.to_string()),
    })
}

/// Fully expanded config, re-parseable by [`parse`].
pub fn resolved(config: &SimConfig) -> String {
    let body = toml::to_string(config).expect("SimConfig serializes to TOML");
    format!("schema_version = {SCHEMA_VERSION}\n{body}")
}

pub fn to_table(config: &SimConfig) -> Table {
    match Value::try_from(config).expect("SimConfig serializes to TOML") {
        Value::Table(t) => t,
        _ => unreachable!("structs serialize to tables"),
    }
}

/// The default config's key tree, with the topology subtree matching the
/// variant the user asked for.
fn reference_for(user: &Table) -> Table {
    let mut reference = to_table(&SimConfig::default());
    let kind = user
        .get("network")
        .and_then(|n| n.get("topology"))
        .and_then(|t| t.get("kind"))
        .and_then(Value::as_str);
    let topology = match kind {
        Some("complete") => Some(Topology::Complete),
        Some("edge_list") => Some(Topology::EdgeList { edges: vec![] }),
        _ => None,
    };
    if let (Some(t), Some(Value::Table(net))) = (topology, reference.get_mut("network")) {
        net.insert(
            "topology".into(),
            Value::try_from(t).expect("Topology serializes to TOML"),
        );
    }
    reference
}

fn unknown_keys(user: &Table, reference: &Table, prefix: &str, out: &mut Vec<String>) {
    for (key, value) in user {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (reference.get(key), value) {
            (None, _) => out.push(path),
            (Some(Value::Table(r)), Value::Table(u)) => unknown_keys(u, r, &path, out),
            _ => {}
        }
    }
}

/// Returns `config` with the numeric field at dotted `path` set to `raw`.
pub fn with_param(config: &SimConfig, path: &str, raw: &str) -> Result<SimConfig, CliError> {
    let mut table = to_table(config);
    let mut keys = path.split('.').peekable();
    let mut cursor = &mut table;
    let slot = loop {
        let key = keys.next().unwrap_or_default();
        let Some(entry) = cursor.get_mut(key) else {
            return Err(CliError::Usage(format!("unknown param `{path}`")));
        };
        if keys.peek().is_none() {
            break entry;
        }
        match entry {
            Value::Table(t) => cursor = t,
            _ => return Err(CliError::Usage(format!("unknown param `{path}`"))),
        }
    };
    *slot = match slot {
        Value::Integer(_) => Value::Integer(raw.trim().parse().map_err(|_| {
            CliError::Usage(format!("param `{path}` needs an integer, got `{raw}`"))
        })?),
        Value::Float(_) => Value::Float(raw.trim().parse().map_err(|_| {
            CliError::Usage(format!("param `{path}` needs a number, got `{raw}`"))
        })?),
        _ => return Err(CliError::Usage(format!("param `{path}` is not numeric"))),
    };
    from_table(table)
}
