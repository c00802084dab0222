//! Lenient extraction of structured fields from free-form replies.

use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

/// Fields pulled from an `{'action': ...}` style reply.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionFields {
    pub action: String,
    pub utterance: Option<String>,
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

/// Rewrites python-style single-quoted dict text into JSON.
pub fn normalize_quotes(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_double = false;
    let mut prev = '\0';
    for c in s.chars() {
        match c {
            '"' if prev != '\\' => {
                in_double = !in_double;
                out.push(c);
            }
            '\'' if !in_double => out.push('"'),
            _ => out.push(c),
        }
        prev = c;
    }
    out
}

/// Brace-balanced `{...}` substrings, outermost first, in reply order.
pub fn brace_blocks(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    for (i, c) in s.char_indices() {
        match c {
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    out.push(&s[start..=i]);
                }
            }
            _ => {}
        }
    }
    out
}

/// JSON objects found in the reply: the whole text first, then each
/// balanced block (with single quotes normalised).
pub fn json_objects(reply: &str) -> Vec<serde_json::Map<String, Value>> {
    let mut out = Vec::new();
    if let Ok(Value::Object(m)) = serde_json::from_str::<Value>(reply.trim()) {
        out.push(m);
        return out;
    }
    for block in brace_blocks(reply) {
        for candidate in [block.to_string(), normalize_quotes(block)] {
            if let Ok(Value::Object(m)) = serde_json::from_str::<Value>(&candidate) {
                out.push(m);
                break;
            }
        }
    }
    out
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(scalar_text).collect();
            parts.map(|p| format!("[{}]", p.join(", ")))
        }
        _ => None,
    }
}

fn get_ci<'a>(m: &'a serde_json::Map<String, Value>, key: &str) -> Option<&'a Value> {
    m.iter().find(|(k, _)| k.trim().eq_ignore_ascii_case(key)).map(|(_, v)| v)
}

/// The last `action` field in the reply. Later fields win so a refined
/// answer overrides the first draft.
pub fn action_fields(reply: &str) -> Option<ActionFields> {
    let from_json = json_objects(reply).into_iter().rev().find_map(|m| {
        let action = scalar_text(get_ci(&m, "action")?)?;
        let utterance = get_ci(&m, "utterance").and_then(scalar_text);
        Some(ActionFields { action, utterance })
    });
    if from_json.is_some() {
        return from_json;
    }
    static ACTION: OnceLock<Regex> = OnceLock::new();
    let action = re(&ACTION, r#"(?i)['"]?action['"]?\s*:\s*['"]?\s*(\[[^\]]*\]|[A-Za-z]+)"#);
    let cap = action.captures_iter(reply).last()?;
    Some(ActionFields { action: cap[1].to_string(), utterance: None })
}

/// Numeric value of a JSON scalar or numeric string.
pub fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().trim_end_matches('%').trim().parse().ok(),
        _ => None,
    }
}

/// `(key, value)` pairs of every numeric entry in the reply's JSON objects,
/// falling back to a `key: number` scan of the raw text.
pub fn numeric_pairs(reply: &str) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for m in json_objects(reply) {
        for (k, v) in &m {
            if let Some(x) = number(v) {
                out.push((k.clone(), x));
            }
        }
    }
    if out.is_empty() {
        static PAIR: OnceLock<Regex> = OnceLock::new();
        let pair = re(&PAIR, r#"['"]?([A-Za-z][A-Za-z _-]*?)['"]?\s*[:=]\s*['"]?(-?[0-9]+(?:\.[0-9]+)?)"#);
        for cap in pair.captures_iter(reply) {
            if let Ok(x) = cap[2].parse() {
                out.push((cap[1].trim().to_string(), x));
            }
        }
    }
    out
}
