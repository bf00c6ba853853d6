use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

pub const SCHEMA: &str = "geomap-report";
pub const SCHEMA_VERSION: u32 = 1;

/// Run settings echoed into every report.
#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub backend: String,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_per_axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub execution: String,
}

/// Inputs of one run: metric files and the names they declare.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Inputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<InputMetric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<InputMetric>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InputMetric {
    pub path: String,
    pub name: String,
    pub dimension: usize,
}

pub struct Document {
    pub command: &'static str,
    pub inputs: Inputs,
    pub settings: Option<Settings>,
    pub results: Value,
    pub classification: Option<String>,
    pub passed: Option<bool>,
    pub error: Option<String>,
    pub exit_code: i32,
}

impl Document {
    /// Render as pretty JSON. Non-finite numbers become `null`, each listed
    /// under `null_fields` with its JSON pointer and a reason.
    pub fn render(&self) -> String {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut doc = json!({
            "schema": SCHEMA,
            "schema_version": SCHEMA_VERSION,
            "tool": { "name": "geomap", "version": env!("CARGO_PKG_VERSION") },
            "timestamp": timestamp,
            "command": self.command,
            "inputs": self.inputs,
            "settings": self.settings,
            "results": self.results,
        });
        let obj = doc.as_object_mut().expect("object literal");
        if self.settings.is_none() {
            obj.remove("settings");
        }
        if self.results.is_null() {
            obj.remove("results");
        }
        if let Some(c) = &self.classification {
            obj.insert("classification".into(), json!(c));
        }
        if let Some(p) = self.passed {
            obj.insert("passed".into(), json!(p));
        }
        if let Some(e) = &self.error {
            obj.insert("error".into(), json!(e));
        }
        obj.insert("exit_code".into(), json!(self.exit_code));
        let mut nulls = Vec::new();
        collect_nulls(&doc, &mut String::new(), &mut nulls);
        doc.as_object_mut()
            .unwrap()
            .insert("null_fields".into(), Value::Array(nulls));
        let mut text = serde_json::to_string_pretty(&doc).expect("values serialise");
        text.push('\n');
        text
    }
}

/// Absent optional fields are skipped at serialisation, so every `null`
/// left in the tree stands for a NaN or infinity.
fn collect_nulls(v: &Value, path: &mut String, out: &mut Vec<Value>) {
    match v {
        Value::Null => out.push(json!({
            "path": path.clone(),
            "reason": "non-finite value (NaN or infinity) in the computation",
        })),
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                let len = path.len();
                path.push_str(&format!("/{i}"));
                collect_nulls(item, path, out);
                path.truncate(len);
            }
        }
        Value::Object(map) => {
            for (k, item) in map {
                let len = path.len();
                path.push('/');
                path.push_str(&k.replace('~', "~0").replace('/', "~1"));
                collect_nulls(item, path, out);
                path.truncate(len);
            }
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_values_are_listed() {
        let doc = Document {
            command: "verify",
            inputs: Inputs::default(),
            settings: None,
            results: json!({ "a": [1.0, f64::NAN], "b": { "c": f64::INFINITY } }),
            classification: None,
            passed: None,
            error: None,
            exit_code: 1,
        };
        let v: Value = serde_json::from_str(&doc.render()).unwrap();
        let paths: Vec<&str> = v["null_fields"]
            .as_array()
            .unwrap()
            .iter()
            .map(|n| n["path"].as_str().unwrap())
            .collect();
        assert!(paths.contains(&"/results/a/1"));
        assert!(paths.contains(&"/results/b/c"));
        assert_eq!(paths.len(), 2);
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
    }
}
