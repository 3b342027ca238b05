use super::RewardlessMdp;
use crate::error::{Error, Result};
use serde_json::{Map, Value};
use std::path::Path;

impl RewardlessMdp {
    /// Parse the JSON document format
    /// `{"states": [...], "actions": [...], "transitions": {"<s>": {"<a>": [["<s'>", p], ...]}}}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| {
            Error::input(format!("malformed MDP JSON at line {}, column {}: {e}", e.line(), e.column()))
        })?;
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::input("MDP document must be a JSON object"))?;
        let states = name_list(obj, "states")?;
        let actions = name_list(obj, "actions")?;
        let trans = obj
            .get("transitions")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::input("field 'transitions' must be an object"))?;

        let index_of = |name: &str, field: &str| {
            states
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::input(format!("{field}: unknown state '{name}'")))
        };
        for key in trans.keys() {
            index_of(key, "transitions")?;
        }

        let ns = states.len();
        let mut rows = Vec::with_capacity(ns);
        for s in &states {
            let per = trans
                .get(s)
                .and_then(Value::as_object)
                .ok_or_else(|| Error::input(format!("transitions.{s}: missing or not an object")))?;
            for key in per.keys() {
                if !actions.contains(key) {
                    return Err(Error::input(format!("transitions.{s}: unknown action '{key}'")));
                }
            }
            let mut per_action = Vec::with_capacity(actions.len());
            for a in &actions {
                let field = format!("transitions.{s}.{a}");
                let entries = per
                    .get(a)
                    .and_then(Value::as_array)
                    .ok_or_else(|| Error::input(format!("{field}: missing or not an array")))?;
                let mut row = vec![0.0; ns];
                for (k, e) in entries.iter().enumerate() {
                    let pair = e.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                        Error::input(format!("{field}[{k}]: expected [\"<state>\", probability]"))
                    })?;
                    let target = pair[0]
                        .as_str()
                        .ok_or_else(|| Error::input(format!("{field}[{k}]: state must be a string")))?;
                    let p = pair[1]
                        .as_f64()
                        .ok_or_else(|| Error::input(format!("{field}[{k}]: probability must be a number")))?;
                    row[index_of(target, &field)?] += p;
                }
                per_action.push(row);
            }
            rows.push(per_action);
        }
        RewardlessMdp::new(states, actions, rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_value(&self) -> Value {
        let mut trans = Map::new();
        for (s, sname) in self.states.iter().enumerate() {
            let mut per = Map::new();
            for (a, aname) in self.actions.iter().enumerate() {
                let entries: Vec<Value> = self
                    .row(s, a)
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(t, p)| Value::Array(vec![Value::from(self.states[t].clone()), Value::from(*p)]))
                    .collect();
                per.insert(aname.clone(), Value::Array(entries));
            }
            trans.insert(sname.clone(), Value::Object(per));
        }
        let mut root = Map::new();
        root.insert("states".into(), Value::from(self.states.clone()));
        root.insert("actions".into(), Value::from(self.actions.clone()));
        root.insert("transitions".into(), Value::Object(trans));
        Value::Object(root)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("MDP serializes")
    }
}

fn name_list(obj: &Map<String, Value>, field: &str) -> Result<Vec<String>> {
    let arr = obj
        .get(field)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::input(format!("field '{field}' must be an array of names")))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_str()
                .map(str::to_owned)
                .ok_or_else(|| Error::input(format!("{field}[{i}]: expected a string")))
        })
        .collect()
}
