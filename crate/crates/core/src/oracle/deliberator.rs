use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::backends::query_hash;
use super::parse::action_fields;
use super::{
    Backend, ChatMessage, OracleError, OracleGame, Query, QueryContext, QueryKind, RewardSchema, TemplateSet, Variant,
    VariantTurn,
};

/// Which prompt family BIDDER's inference, modeling and reward queries use:
/// the environment-specific texts, or the generic method prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    #[default]
    Tailored,
    Generic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeliberatorConfig {
    pub style: PromptStyle,
    /// Keep rendered prompts in transcripts (large).
    pub log_prompts: bool,
    /// Candidates requested by the tot_lite variant.
    pub tot_candidates: usize,
}

impl Default for DeliberatorConfig {
    fn default() -> Self {
        DeliberatorConfig { style: PromptStyle::Tailored, log_prompts: false, tot_candidates: 3 }
    }
}

/// One backend call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    #[serde(flatten)]
    pub kind: QueryKind,
    pub attempt: u8,
    pub query_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<Vec<ChatMessage>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Backend calls made while reaching one decision, plus notes on every
/// fallback taken.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub exchanges: Vec<Exchange>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Transcript {
    pub fn calls(&self) -> usize {
        self.exchanges.len()
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    pub fn extend(&mut self, other: Transcript) {
        self.exchanges.extend(other.exchanges);
        self.notes.extend(other.notes);
    }
}

/// Renders queries, sends them to a backend and validates the replies.
pub struct Deliberator<G: OracleGame> {
    backend: Arc<dyn Backend<G>>,
    templates: Arc<TemplateSet>,
    cfg: DeliberatorConfig,
}

impl<G: OracleGame> Clone for Deliberator<G> {
    fn clone(&self) -> Self {
        Deliberator { backend: self.backend.clone(), templates: self.templates.clone(), cfg: self.cfg.clone() }
    }
}

impl<G: OracleGame> Deliberator<G> {
    pub fn new(backend: Arc<dyn Backend<G>>, templates: Arc<TemplateSet>, cfg: DeliberatorConfig) -> Self {
        Deliberator { backend, templates, cfg }
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn config(&self) -> &DeliberatorConfig {
        &self.cfg
    }

    pub fn render(&self, ctx: &QueryContext<G>) -> Result<Vec<ChatMessage>, OracleError> {
        G::render(&self.templates, self.cfg.style, ctx)
    }

    fn call(
        &self,
        ctx: &QueryContext<G>,
        messages: Vec<ChatMessage>,
        attempt: u8,
        tx: &mut Transcript,
    ) -> Result<(String, Vec<ChatMessage>), OracleError> {
        let query = Query { context: ctx.clone(), messages, attempt };
        let hash = query_hash(&query.messages);
        let result = self.backend.complete(&query);
        tx.exchanges.push(Exchange {
            kind: ctx.kind,
            attempt,
            query_hash: hash,
            prompt: self.cfg.log_prompts.then(|| query.messages.clone()),
            reply: result.as_ref().ok().cloned(),
            error: result.as_ref().err().map(|e| e.to_string()),
        });
        result.map(|r| (r, query.messages))
    }

    /// Asks once, and once more with the schema restated if `parse` rejects
    /// the reply. Transport failures are returned at once.
    fn ask<T>(
        &self,
        ctx: &QueryContext<G>,
        messages: Vec<ChatMessage>,
        tx: &mut Transcript,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, OracleError> {
        let (reply, mut messages) = self.call(ctx, messages, 0, tx)?;
        let err = match parse(&reply) {
            Ok(v) => return Ok(v),
            Err(e) => e,
        };
        messages.push(ChatMessage::assistant(reply));
        messages.push(ChatMessage::user(format!(
            "Your previous answer could not be used: {err}. {}",
            G::schema_hint(ctx.kind)
        )));
        let (reply, _) = self.call(ctx, messages, 1, tx)?;
        parse(&reply).map_err(OracleError::Parse)
    }

    fn action_parser<'a>(&self, ctx: &'a QueryContext<G>) -> impl Fn(&str) -> Result<G::Action, String> + 'a {
        move |reply: &str| {
            let fields = action_fields(reply).ok_or_else(|| "no action field found".to_string())?;
            let action = G::parse_action(&fields).ok_or_else(|| format!("{:?} is not an action", fields.action))?;
            if G::admissible(ctx, &action) {
                Ok(action)
            } else {
                Err(format!("{action} is not one of the legal actions: {}", join(&ctx.legal)))
            }
        }
    }

    /// Asks for an action; an unusable reply falls back to the first legal
    /// action in canonical order.
    fn ask_action(
        &self,
        ctx: &QueryContext<G>,
        messages: Vec<ChatMessage>,
        tx: &mut Transcript,
    ) -> Result<G::Action, OracleError> {
        match self.ask(ctx, messages, tx, self.action_parser(ctx)) {
            Ok(a) => Ok(a),
            Err(OracleError::Parse(e)) => {
                let fallback = ctx.legal.first().cloned().ok_or_else(|| OracleError::Parse(e.clone()))?;
                tx.note(format!("{:?}: {e}; fell back to {fallback}", ctx.kind));
                Ok(fallback)
            }
            Err(e) => Err(e),
        }
    }

    /// Most likely opponent hidden state from the public record.
    pub fn infer_hidden(
        &self,
        view: &G::View,
        space: &[G::Hidden],
        tx: &mut Transcript,
    ) -> Result<G::Hidden, OracleError> {
        match space {
            [] => return Err(OracleError::Config("empty hidden-state space".into())),
            [only] => return Ok(only.clone()),
            _ => {}
        }
        let mut ctx = QueryContext::new(QueryKind::Hidden, view.clone(), Vec::new());
        ctx.space = space.to_vec();
        let messages = self.render(&ctx)?;
        self.ask(&ctx, messages, tx, |reply| match G::parse_hidden(reply, &ctx) {
            Some(h) if ctx.space.contains(&h) => Ok(h),
            Some(h) => Err(format!("{h} is outside the allowed range")),
            None => Err("no hidden state found".into()),
        })
    }

    /// The opponent's most likely action. `view` is the deliberating seat's
    /// view of a state where the opponent is to act; `legal` is the
    /// opponent's legal set.
    pub fn model_opponent(
        &self,
        view: &G::View,
        hidden: &G::Hidden,
        legal: &[G::Action],
        tx: &mut Transcript,
    ) -> Result<G::Action, OracleError> {
        match legal {
            [] => return Err(OracleError::Config("opponent has no legal action".into())),
            [only] => return Ok(only.clone()),
            _ => {}
        }
        let mut ctx = QueryContext::new(QueryKind::Model, view.clone(), legal.to_vec());
        ctx.hidden = Some(hidden.clone());
        let messages = self.render(&ctx)?;
        self.ask_action(&ctx, messages, tx)
    }

    /// A reward in `[0, 1]` for every legal action, in `legal` order.
    pub fn estimate_rewards(
        &self,
        view: &G::View,
        hidden: &G::Hidden,
        legal: &[G::Action],
        tx: &mut Transcript,
    ) -> Result<Vec<(G::Action, f64)>, OracleError> {
        if legal.is_empty() {
            return Err(OracleError::Config("no legal action to score".into()));
        }
        let mut ctx = QueryContext::new(QueryKind::Reward, view.clone(), legal.to_vec());
        ctx.hidden = Some(hidden.clone());
        let messages = self.render(&ctx)?;
        let lookup = |found: &[(G::Action, f64)], a: &G::Action| found.iter().find(|(b, _)| b == a).map(|(_, r)| *r);

        let (first, mut messages) = self.call(&ctx, messages, 0, tx)?;
        let parsed = G::parse_rewards(&first, &ctx);
        let complete = match G::REWARD_SCHEMA {
            RewardSchema::Dense => legal.iter().all(|a| lookup(&parsed, a).is_some()),
            RewardSchema::Candidates => !parsed.is_empty(),
        };
        let mut found = parsed;
        if !complete {
            messages.push(ChatMessage::assistant(first));
            messages.push(ChatMessage::user(format!(
                "Your previous answer did not score every action. {}",
                G::schema_hint(QueryKind::Reward)
            )));
            let (second, _) = self.call(&ctx, messages, 1, tx)?;
            let mut again = G::parse_rewards(&second, &ctx);
            again.extend(found);
            found = again;
        }
        let fill = match G::REWARD_SCHEMA {
            RewardSchema::Candidates if !found.is_empty() => 0.0,
            _ => 0.5,
        };
        let mut out = Vec::with_capacity(legal.len());
        let mut filled = 0;
        for a in legal {
            let r = lookup(&found, a).unwrap_or_else(|| {
                filled += 1;
                fill
            });
            out.push((a.clone(), if r.is_nan() { fill } else { r.clamp(0.0, 1.0) }));
        }
        if filled > 0 && fill == 0.5 {
            tx.note(format!("reward: {filled} action(s) unscored, set to 0.5"));
        }
        Ok(out)
    }

    /// Final choice given the aggregated returns of each candidate action.
    pub fn decide(
        &self,
        view: &G::View,
        hidden: &G::Hidden,
        returns: &[(G::Action, f64)],
        tx: &mut Transcript,
    ) -> Result<G::Action, OracleError> {
        let legal: Vec<G::Action> = returns.iter().map(|(a, _)| a.clone()).collect();
        if let [only] = legal.as_slice() {
            return Ok(only.clone());
        }
        let mut ctx = QueryContext::new(QueryKind::Decide, view.clone(), legal);
        ctx.hidden = Some(hidden.clone());
        ctx.returns = returns.to_vec();
        let messages = self.render(&ctx)?;
        self.ask_action(&ctx, messages, tx)
    }

    /// Action chosen by a single-pass prompting baseline.
    pub fn variant_act(
        &self,
        view: &G::View,
        legal: &[G::Action],
        variant: Variant,
        tx: &mut Transcript,
    ) -> Result<G::Action, OracleError> {
        let t = &self.templates;
        let base = |turn: VariantTurn| -> Result<(QueryContext<G>, Vec<ChatMessage>), OracleError> {
            let ctx = QueryContext::new(QueryKind::Variant(turn), view.clone(), legal.to_vec());
            let messages = self.render(&ctx)?;
            Ok((ctx, messages))
        };
        match variant {
            Variant::Direct | Variant::Cot => {
                let (turn, template) = if variant == Variant::Direct {
                    (VariantTurn::Direct, "direct")
                } else {
                    (VariantTurn::Cot, "cot")
                };
                let (ctx, mut messages) = base(turn)?;
                append_user(&mut messages, t.render(template, &[])?);
                self.ask_action(&ctx, messages, tx)
            }
            Variant::Reflexion => {
                let (ctx, mut messages) = base(VariantTurn::Cot)?;
                append_user(&mut messages, t.render("cot", &[])?);
                let (draft, mut messages) = self.call(&ctx, messages, 0, tx)?;
                let mut refine = ctx.clone();
                refine.kind = QueryKind::Variant(VariantTurn::ReflexionRefine);
                refine.prior = vec![draft.clone()];
                messages.push(ChatMessage::assistant(draft.clone()));
                messages.push(ChatMessage::user(t.render("reflexion", &[])?));
                let (revised, _) = self.call(&refine, messages, 0, tx)?;
                let parse = self.action_parser(&refine);
                match parse(&revised).or_else(|_| parse(&draft)) {
                    Ok(a) => Ok(a),
                    Err(e) => {
                        let fallback = legal.first().cloned().ok_or(OracleError::Parse(e.clone()))?;
                        tx.note(format!("reflexion: {e}; fell back to {fallback}"));
                        Ok(fallback)
                    }
                }
            }
            Variant::TotLite => {
                let (ctx, mut messages) = base(VariantTurn::TotPropose)?;
                append_user(&mut messages, t.render("tot_propose", &[("count", self.cfg.tot_candidates.to_string())])?);
                let (proposals, mut messages) = self.call(&ctx, messages, 0, tx)?;
                let mut candidates: Vec<G::Action> = Vec::new();
                for line in proposals.lines() {
                    if let Some(a) = action_fields(line).and_then(|f| G::parse_action(&f)) {
                        if G::admissible(&ctx, &a) && !candidates.contains(&a) {
                            candidates.push(a);
                        }
                    }
                }
                if candidates.is_empty() {
                    tx.note("tot_lite: no usable candidates, evaluating all legal actions");
                    candidates = legal.to_vec();
                }
                let mut eval = ctx.clone();
                eval.kind = QueryKind::Variant(VariantTurn::TotEvaluate);
                eval.prior = vec![proposals.clone()];
                eval.legal = candidates.clone();
                messages.push(ChatMessage::assistant(proposals));
                let listing = candidates.iter().map(|a| format!("- {a}")).collect::<Vec<_>>().join("\n");
                messages.push(ChatMessage::user(t.render("tot_evaluate", &[("candidates", listing)])?));
                self.ask_action(&eval, messages, tx)
            }
        }
    }
}

fn append_user(messages: &mut Vec<ChatMessage>, text: String) {
    match messages.last_mut() {
        Some(last) if last.role == super::Role::User => {
            last.content.push_str("\n\n");
            last.content.push_str(&text);
        }
        _ => messages.push(ChatMessage::user(text)),
    }
}

pub(crate) fn join<A: std::fmt::Display>(items: &[A]) -> String {
    items.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}
