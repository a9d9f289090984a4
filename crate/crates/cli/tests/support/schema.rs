//! JSON Schema subset used by the report schema: type, enum, const,
//! required, properties, additionalProperties (boolean), items, minimum,
//! maximum, minLength, maxLength, allOf and if/then.

use serde_json::Value;

pub fn validate(schema: &Value, doc: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    check(schema, doc, "$", &mut errors);
    errors
}

pub fn is_valid(schema: &Value, doc: &Value) -> bool {
    validate(schema, doc).is_empty()
}

fn type_matches(name: &str, v: &Value) -> bool {
    match name {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.as_f64().is_some_and(|x| x.fract() == 0.0),
        other => panic!("unsupported type {other}"),
    }
}

fn check(schema: &Value, v: &Value, at: &str, errors: &mut Vec<String>) {
    let Some(s) = schema.as_object() else {
        return;
    };
    for key in s.keys() {
        let known = [
            "$schema",
            "title",
            "type",
            "enum",
            "const",
            "required",
            "properties",
            "additionalProperties",
            "items",
            "minimum",
            "maximum",
            "minLength",
            "maxLength",
            "allOf",
            "if",
            "then",
        ];
        assert!(known.contains(&key.as_str()), "unsupported keyword {key}");
    }
    if let Some(t) = s.get("type") {
        let names: Vec<&str> = match t {
            Value::String(n) => vec![n.as_str()],
            Value::Array(ns) => ns.iter().filter_map(Value::as_str).collect(),
            _ => panic!("bad type keyword"),
        };
        if !names.iter().any(|n| type_matches(n, v)) {
            errors.push(format!("{at}: expected {names:?}, got {v}"));
            return;
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.iter().any(|o| json_eq(o, v)) {
            errors.push(format!("{at}: {v} not in {options:?}"));
        }
    }
    if let Some(c) = s.get("const") {
        if !json_eq(c, v) {
            errors.push(format!("{at}: expected {c}, got {v}"));
        }
    }
    if let Some(x) = v.as_f64() {
        if let Some(lo) = s.get("minimum").and_then(Value::as_f64) {
            if x < lo {
                errors.push(format!("{at}: {x} below {lo}"));
            }
        }
        if let Some(hi) = s.get("maximum").and_then(Value::as_f64) {
            if x > hi {
                errors.push(format!("{at}: {x} above {hi}"));
            }
        }
    }
    if let Some(text) = v.as_str() {
        let len = text.chars().count() as u64;
        if s.get("minLength").and_then(Value::as_u64).is_some_and(|n| len < n) {
            errors.push(format!("{at}: string too short"));
        }
        if s.get("maxLength").and_then(Value::as_u64).is_some_and(|n| len > n) {
            errors.push(format!("{at}: string too long"));
        }
    }
    if let Some(obj) = v.as_object() {
        for r in s.get("required").and_then(Value::as_array).into_iter().flatten() {
            let r = r.as_str().unwrap();
            if !obj.contains_key(r) {
                errors.push(format!("{at}: missing {r}"));
            }
        }
        let props = s.get("properties").and_then(Value::as_object);
        for (k, child) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(sub) => check(sub, child, &format!("{at}.{k}"), errors),
                None => {
                    if s.get("additionalProperties") == Some(&Value::Bool(false)) {
                        errors.push(format!("{at}: unexpected property {k}"));
                    }
                }
            }
        }
    }
    if let (Some(items), Some(xs)) = (s.get("items"), v.as_array()) {
        for (i, x) in xs.iter().enumerate() {
            check(items, x, &format!("{at}[{i}]"), errors);
        }
    }
    for sub in s.get("allOf").and_then(Value::as_array).into_iter().flatten() {
        check(sub, v, at, errors);
    }
    if let Some(cond) = s.get("if") {
        if is_valid(cond, v) {
            if let Some(then) = s.get("then") {
                check(then, v, at, errors);
            }
        }
    }
}

/// Numbers compare by value, so `1` equals `1.0`.
fn json_eq(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}
