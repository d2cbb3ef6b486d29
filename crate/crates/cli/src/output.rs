//! Report layout: JSON with a fixed key order, and a CSV projection.

use serde::Serialize;
use serde_json::{Map, Value};

/// Rows for the CSV projection.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Table {
        Table {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct CommandOutput {
    pub hypotheses: Value,
    pub outputs: Value,
    pub caps_hit: Vec<String>,
    pub table: Option<Table>,
    pub code: i32,
}

impl CommandOutput {
    pub fn new(outputs: Value) -> CommandOutput {
        CommandOutput {
            hypotheses: Value::Object(Map::new()),
            outputs,
            ..Default::default()
        }
    }

    pub fn hypotheses(mut self, h: Value) -> Self {
        self.hypotheses = h;
        self
    }

    pub fn table(mut self, t: Table) -> Self {
        self.table = Some(t);
        self
    }

    pub fn code(mut self, code: i32) -> Self {
        self.code = code;
        self
    }
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub command: String,
    pub inputs: Value,
    pub hypotheses: Value,
    pub outputs: Value,
    pub caps_hit: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    #[serde(skip)]
    table: Option<Table>,
}

impl Report {
    pub fn new(command: &str, inputs: Value) -> Report {
        Report {
            command: command.to_string(),
            inputs,
            hypotheses: Value::Object(Map::new()),
            outputs: Value::Null,
            caps_hit: Vec::new(),
            error: None,
            wall_time_s: None,
            table: None,
        }
    }

    pub(crate) fn fill(&mut self, out: CommandOutput) {
        self.hypotheses = out.hypotheses;
        self.outputs = out.outputs;
        self.caps_hit.extend(out.caps_hit);
        self.table = out.table;
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let table = match &self.table {
            Some(t) => t.clone(),
            None => {
                let mut t = Table::new(&["key", "value"]);
                flatten("", &self.outputs, &mut t);
                t
            }
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.headers).expect("in-memory write");
        for r in &table.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn flatten(prefix: &str, v: &Value, t: &mut Table) {
    let join = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&join(k), x, t);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&join(&i.to_string()), x, t);
            }
        }
        Value::String(s) => t.push(vec![prefix.to_string(), s.clone()]),
        Value::Null => t.push(vec![prefix.to_string(), String::new()]),
        other => t.push(vec![prefix.to_string(), other.to_string()]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn key_order_and_csv() {
        let mut r = Report::new("height", json!({"b": 1, "a": 2}));
        r.fill(CommandOutput::new(json!({"height": {"value": "1.5", "error": "0"}, "list": [1, null]})));
        let s = r.to_json();
        let pos = |k: &str| s.find(&format!("\"{k}\"")).unwrap();
        assert!(pos("command") < pos("inputs"));
        assert!(pos("inputs") < pos("hypotheses"));
        assert!(pos("b") < pos("a"));
        assert!(pos("outputs") < pos("caps_hit"));
        assert_eq!(r.to_csv(), "key,value\nheight.value,1.5\nheight.error,0\nlist.0,1\nlist.1,\n");
    }
}
