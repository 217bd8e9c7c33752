//! Chat templates that put the LM in "write a text-to-image prompt" mode.
//!
//! A template stores only the task texts. Role markers differ between LM
//! families, so they come from the backend as a [`ChatFormat`].

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backends::LmScorer;
use crate::error::{Result, VgdError};

pub const SYSTEM_PROMPT: &str = "You are a respectful and honest visual description generator for Stable Diffusion text prompt. Answer in 1 sentence and do not mention anything other than the prompt. Do not mention 'description'.";
pub const INVERSION_USER_PROMPT: &str = "Please generate the diffusion prompt on the given condition containing the objects, people, background, and the style of the image:";
pub const STYLE_USER_PROMPT: &str = "Please generate the diffusion prompt of the image style based on the given condition containing the painting style, color, and shapes of the image:";
pub const DISTILL_USER_PROMPT: &str = "Please generate the diffusion prompt within {max_length} tokens so that you can generate same images with a given prompt: {target_prompt}";
pub const MODEL_PREAMBLE: &str =
    "Answer: Sure, here is a prompt for stable diffusion within {max_length} tokens:";
pub const CAPTIONER_USER_PROMPT: &str = "<image> Describe the scene in this image with one sentence.";

/// Placeholder names that resolve to another binding.
const ALIASES: &[(&str, &str)] = &[("model.max_length", "max_length")];

pub type Bindings = BTreeMap<String, String>;

/// Role markers wrapped around the template texts. All empty means plain
/// concatenation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatFormat {
    pub system_prefix: String,
    pub system_suffix: String,
    pub user_prefix: String,
    pub user_suffix: String,
    pub assistant_prefix: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub template_id: String,
    pub system_text: String,
    pub user_text: String,
    pub model_preamble: String,
}

impl PromptTemplate {
    pub fn new(id: &str, system: &str, user: &str, preamble: &str) -> Self {
        Self {
            template_id: id.into(),
            system_text: system.into(),
            user_text: user.into(),
            model_preamble: preamble.into(),
        }
    }

    /// Full context text; generated tokens are appended right after it.
    pub fn render_text(&self, bindings: &Bindings, chat: &ChatFormat) -> Result<String> {
        let system = fill_placeholders(&self.system_text, bindings)?;
        let user = fill_placeholders(&self.user_text, bindings)?;
        let preamble = fill_placeholders(&self.model_preamble, bindings)?;
        Ok([
            chat.system_prefix.as_str(),
            &system,
            &chat.system_suffix,
            &chat.user_prefix,
            &user,
            &chat.user_suffix,
            &chat.assistant_prefix,
            &preamble,
        ]
        .concat())
    }
}

/// Replaces every `{name}` in `text`. Unbound names and stray braces are errors.
pub fn fill_placeholders(text: &str, bindings: &Bindings) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err(VgdError::Template(format!("unmatched '}}' in {text:?}")));
        }
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| VgdError::Template(format!("unclosed '{{' in {text:?}")))?;
        let name = &after[..close];
        if name.is_empty() || name.contains('{') {
            return Err(VgdError::Template(format!("malformed placeholder in {text:?}")));
        }
        let value = bindings
            .get(name)
            .or_else(|| {
                ALIASES
                    .iter()
                    .find(|(alias, _)| *alias == name)
                    .and_then(|(_, target)| bindings.get(*target))
            })
            .ok_or_else(|| VgdError::Template(format!("unbound placeholder {{{name}}}")))?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

/// One entry of a template override file. Missing fields keep the value of
/// the template being overridden (or empty for a new id).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateOverride {
    system: Option<String>,
    user: Option<String>,
    preamble: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TemplateFile {
    templates: BTreeMap<String, TemplateOverride>,
}

impl TemplateRegistry {
    pub fn builtin() -> Self {
        let templates = [
            PromptTemplate::new("inversion", SYSTEM_PROMPT, INVERSION_USER_PROMPT, MODEL_PREAMBLE),
            PromptTemplate::new("style", SYSTEM_PROMPT, STYLE_USER_PROMPT, MODEL_PREAMBLE),
            PromptTemplate::new("distill", SYSTEM_PROMPT, DISTILL_USER_PROMPT, MODEL_PREAMBLE),
            PromptTemplate::new("captioner", "", CAPTIONER_USER_PROMPT, ""),
        ]
        .into_iter()
        .map(|t| (t.template_id.clone(), t))
        .collect();
        Self { templates }
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate> {
        self.templates
            .get(id)
            .ok_or_else(|| VgdError::TemplateNotFound(id.into()))
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.template_id.clone(), template);
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    /// Applies overrides from a `.toml` or `.json` file:
    ///
    /// ```toml
    /// [templates.inversion]
    /// system = "..."
    /// user = "..."
    /// preamble = "..."
    /// ```
    pub fn load_overrides(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let file: TemplateFile = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| VgdError::Template(e.to_string()))?
        };
        for (id, o) in file.templates {
            let base = self
                .templates
                .get(&id)
                .cloned()
                .unwrap_or_else(|| PromptTemplate::new(&id, "", "", ""));
            self.insert(PromptTemplate {
                template_id: id,
                system_text: o.system.unwrap_or(base.system_text),
                user_text: o.user.unwrap_or(base.user_text),
                model_preamble: o.preamble.unwrap_or(base.model_preamble),
            });
        }
        Ok(())
    }

    pub fn render_text(&self, template_id: &str, bindings: &Bindings, chat: &ChatFormat) -> Result<String> {
        self.get(template_id)?.render_text(bindings, chat)
    }

    /// LM ids of the rendered context, ending where the first generated
    /// token goes.
    pub fn render_context(
        &self,
        template_id: &str,
        bindings: &Bindings,
        chat: &ChatFormat,
        lm: &dyn LmScorer,
    ) -> Result<Vec<u32>> {
        lm.tokenize(&self.render_text(template_id, bindings, chat)?)
    }
}
