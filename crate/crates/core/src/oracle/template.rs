use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use super::OracleError;

macro_rules! shipped {
    ($($name:literal),* $(,)?) => {
        /// Names of the shipped templates.
        pub const TEMPLATE_NAMES: &[&str] = &[$($name),*];
        const SHIPPED: &[(&str, &str)] = &[$(($name, include_str!(concat!("../../templates/", $name, ".txt")))),*];
    };
}

shipped!(
    "hidden_inference",
    "opponent_modeling",
    "reward_calculation",
    "decision_making",
    "holdem_game_setting",
    "holdem_state",
    "direct",
    "cot",
    "reflexion",
    "holdem_hidden_inference",
    "holdem_modeling",
    "holdem_reward",
    "negotiation_game_setting",
    "negotiation_proposal_state",
    "negotiation_utterance_state",
    "negotiation_hidden_inference",
    "negotiation_reward",
    "tot_propose",
    "tot_evaluate",
);

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_][a-z0-9_]*)\}").expect("static regex"))
}

/// Placeholder names in order of first appearance. Braces around anything
/// other than a lowercase identifier are literal text.
pub fn placeholders(body: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for cap in placeholder_re().captures_iter(body) {
        let name = cap[1].to_string();
        if !out.contains(&name) {
            out.push(name);
        }
    }
    out
}

/// Prompt templates by name. Bodies are stored without the file's trailing
/// newline.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    bodies: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::shipped()
    }
}

impl TemplateSet {
    pub fn shipped() -> Self {
        let bodies = SHIPPED.iter().map(|(n, b)| (n.to_string(), strip_newline(b).to_string())).collect();
        TemplateSet { bodies }
    }

    /// Shipped templates with any `<name>.txt` in `dir` replacing the default
    /// of the same name.
    pub fn with_overrides(dir: &Path) -> Result<Self, OracleError> {
        let mut set = TemplateSet::shipped();
        let entries = std::fs::read_dir(dir)
            .map_err(|e| OracleError::Config(format!("template directory {}: {e}", dir.display())))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            if !set.bodies.contains_key(&name) {
                return Err(OracleError::Config(format!("unknown template override {}", path.display())));
            }
            let body = std::fs::read_to_string(&path)
                .map_err(|e| OracleError::Config(format!("reading {}: {e}", path.display())))?;
            set.bodies.insert(name, strip_newline(&body).to_string());
        }
        Ok(set)
    }

    pub fn body(&self, name: &str) -> Result<&str, OracleError> {
        self.bodies.get(name).map(String::as_str).ok_or_else(|| OracleError::Template(format!("no template {name:?}")))
    }

    /// Substitutes every placeholder. Fails if one has no binding; unused
    /// bindings are allowed so overridden templates may drop fields.
    pub fn render(&self, name: &str, bindings: &[(&str, String)]) -> Result<String, OracleError> {
        let body = self.body(name)?;
        let mut missing = Vec::new();
        let out = placeholder_re().replace_all(body, |cap: &regex::Captures| {
            match bindings.iter().find(|(k, _)| *k == &cap[1]) {
                Some((_, v)) => v.clone(),
                None => {
                    missing.push(cap[1].to_string());
                    cap[0].to_string()
                }
            }
        });
        if !missing.is_empty() {
            return Err(OracleError::Template(format!("{name}: unbound placeholders {}", missing.join(", "))));
        }
        Ok(out.into_owned())
    }
}

fn strip_newline(s: &str) -> &str {
    s.strip_suffix('\n').map(|s| s.strip_suffix('\r').unwrap_or(s)).unwrap_or(s)
}
