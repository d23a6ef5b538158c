//! Transcript scrubbing applied before anything is written to storage.

use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};

pub const EMAIL_TOKEN: &str = "[REDACTED_EMAIL]";
pub const PHONE_TOKEN: &str = "[REDACTED_PHONE]";
pub const NAME_TOKEN: &str = "[NAME]";

fn email_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[A-Za-z0-9._%+\-]+@[A-Za-z0-9.\-]+\.[A-Za-z]{2,}").expect("email pattern"))
}

// E.164 (`+` and 8-15 digits) or a 10-digit number with optional country
// code and common separators.
fn phone_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"\+\d{8,15}\b|(?:\+\d{1,3}[\s.\-]?)?(?:\(\d{3}\)|\b\d{3})[\s.\-]?\d{3}[\s.\-]?\d{4}\b",
        )
        .expect("phone pattern")
    })
}

/// Pattern matches the privacy checks look for.
pub fn contains_pii(text: &str) -> bool {
    email_re().is_match(text) || phone_re().is_match(text)
}

/// Replaces email addresses, phone numbers, and (when given) the session
/// display name with redaction tokens. Over-redaction is acceptable.
#[derive(Debug, Clone, Default)]
pub struct Scrubber {
    name: Option<Regex>,
}

impl Scrubber {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_display_name(name: Option<&str>) -> Self {
        let name = name
            .map(str::trim)
            .filter(|n| n.chars().count() >= 2)
            .and_then(|n| {
                RegexBuilder::new(&format!(r"\b{}\b", regex::escape(n)))
                    .case_insensitive(true)
                    .build()
                    .ok()
            });
        Self { name }
    }

    pub fn scrub(&self, text: &str) -> String {
        let out = email_re().replace_all(text, EMAIL_TOKEN);
        let out = phone_re().replace_all(&out, PHONE_TOKEN);
        match &self.name {
            Some(re) => re.replace_all(&out, NAME_TOKEN).into_owned(),
            None => out.into_owned(),
        }
    }
}
