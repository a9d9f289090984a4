//! Report envelope and its JSON and TSV renderings.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::args::{Format, Output};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// SHA-256 over every input file in order, each prefixed by its role.
    pub input_digest: String,
    pub inputs: Vec<InputFile>,
    pub config: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub provenance: Provenance,
    pub result: Value,
    pub warnings: Vec<String>,
}

/// Collects the files a command reads so their digests land in the report.
#[derive(Debug, Default)]
pub struct Inputs {
    files: Vec<InputFile>,
    hasher: Sha256,
}

impl Inputs {
    /// Returns the bytes that were hashed.
    pub fn add(&mut self, role: &str, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        self.hasher.update(role.as_bytes());
        self.hasher.update([0u8]);
        self.hasher.update(&bytes);
        self.files.push(InputFile {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    pub fn provenance(self, config: Value) -> Provenance {
        Provenance {
            tool: "mpcr".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            input_digest: hex::encode(self.hasher.finalize()),
            inputs: self.files,
            config,
        }
    }
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report values serialize")
}

impl Report {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Tsv => {
                let mut rows = Vec::new();
                flatten("", &to_value(self), &mut rows);
                let mut s = String::from("key\tvalue\n");
                for (k, v) in rows {
                    s.push_str(&k);
                    s.push('\t');
                    s.push_str(&v);
                    s.push('\n');
                }
                s
            }
        }
    }

    pub fn write(&self, output: &Output) -> Result<(), CliError> {
        let text = self.render(output.format);
        match &output.out {
            Some(path) => {
                std::fs::write(path, text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
            }
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

/// Dotted keys for objects, numeric segments for arrays; empty containers
/// become `[]` or `{}`.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(xs) if !xs.is_empty() => {
            for (i, v) in xs.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::String(s) => out.push((prefix.to_string(), s.replace(['\t', '\n'], " "))),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

pub fn object(entries: Vec<(&str, Value)>) -> Value {
    Value::Object(
        entries
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect::<Map<_, _>>(),
    )
}
