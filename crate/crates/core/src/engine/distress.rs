//! Literal phrase matching that redirects explicit references to self-harm
//! toward the support resources. Nothing is scored or stored.

use std::path::Path;

const DEFAULT_LEXICON: &str = include_str!("../../templates/distress_lexicon.txt");

pub const RESOURCE_DIRECTIVE: &str = "The student has referred to self-harm or not wanting to live. Do not coach on this, do not endorse or explore it, and do not give advice about it. Respond with brief care, say you are not able to help with this here, and point them to the Support Resources tab, which lists crisis lines they can reach right now.";

/// Shown under a coach reply when the guard fired.
pub const RESOURCE_FOOTER: &str =
    "If you are thinking about harming yourself, please reach out now. See the Support Resources tab for crisis lines available 24/7.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    phrases: Vec<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_text(DEFAULT_LEXICON)
    }
}

impl Lexicon {
    /// One phrase per line; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Self {
        let phrases = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { phrases }
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::from_text(&std::fs::read_to_string(path)?))
    }

    pub fn empty() -> Self {
        Self { phrases: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    pub fn matches(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        self.phrases.iter().any(|p| lower.contains(p.as_str()))
    }
}

/// The directive to add to this turn's prompt, if any.
pub fn distress_guard(user_text: &str, lexicon: &Lexicon) -> Option<&'static str> {
    lexicon.matches(user_text).then_some(RESOURCE_DIRECTIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lexicon_fires_case_insensitively() {
        let lex = Lexicon::default();
        assert!(!lex.is_empty());
        assert_eq!(distress_guard("Sometimes I want to DIE honestly", &lex), Some(RESOURCE_DIRECTIVE));
        assert_eq!(distress_guard("I'm feeling good", &lex), None);
    }

    #[test]
    fn empty_lexicon_never_fires() {
        let lex = Lexicon::from_text("\n  \n# comment\n");
        assert!(lex.is_empty());
        assert_eq!(distress_guard("I want to die", &lex), None);
    }

    #[test]
    fn idempotent() {
        let lex = Lexicon::from_text("hurt myself");
        let a = distress_guard("I might hurt myself", &lex);
        assert_eq!(a, distress_guard("I might hurt myself", &lex));
    }
}
