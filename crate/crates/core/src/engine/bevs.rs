//! Values check-in step machine. The engine advances the record; the model
//! only phrases the next question.

use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde_json::{json, Value};
use thiserror::Error;

use crate::domain::{validate_bevs_score, BevsAssessment, BevsRecord, BevsStep, ValueDomain};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BevsDirective {
    /// The student declined to start; ask again later without pressure.
    NotYet,
    AskValue(ValueDomain),
    AskScore(ValueDomain),
    /// The answer had no score between 1 and 7.
    ScoreRetry(ValueDomain),
    Confirm { lowest: (ValueDomain, u8), highest: (ValueDomain, u8) },
    /// The record is complete and should be saved; the goal-setting phase follows.
    Save,
}

impl BevsDirective {
    /// Instruction added to the prompt for this turn.
    pub fn instruction(&self) -> String {
        match self {
            BevsDirective::NotYet => {
                "The student is not ready to start the values check-in. Acknowledge that warmly and ask if they'd like to begin when ready.".into()
            }
            BevsDirective::AskValue(d) => format!(
                "Ask what kind of person they want to be or what matters to them in {}. Give one or two natural examples.",
                d.label()
            ),
            BevsDirective::AskScore(d) => format!(
                "Briefly acknowledge their answer, then ask on a scale of 1-7 how close their actions are to their values in {} (1 = not close at all, 7 = very close).",
                d.label()
            ),
            BevsDirective::ScoreRetry(d) => format!(
                "Their answer did not include a score from 1 to 7. Gently ask again for a whole number from 1 to 7 for {}.",
                d.label()
            ),
            BevsDirective::Confirm { lowest, highest } => format!(
                "Summarize the check-in in 2-3 lines. Lowest: {} ({}). Highest: {} ({}). Suggest one tiny action aligned with {}, then ask whether to save this values check-in and move on.",
                lowest.0.label(),
                lowest.1,
                highest.0.label(),
                highest.1,
                lowest.0.label()
            ),
            BevsDirective::Save => {
                "The values check-in is saved. Thank them and say that now that you know what matters to them, you can set a goal that aligns with their values.".into()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BevsError {
    #[error("values check-in already completed")]
    AlreadyDone,
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

const NEGATIVE: [&str; 9] = ["no", "nope", "not", "don't", "dont", "wait", "later", "change", "nah"];
const AFFIRMATIVE: [&str; 12] =
    ["yes", "yeah", "yep", "yup", "sure", "ok", "okay", "done", "save", "correct", "alright", "go"];

fn is_negative(text: &str) -> bool {
    words(text).iter().any(|w| NEGATIVE.contains(&w.as_str()))
}

/// Confirmation needs an affirmative word and no negation.
pub fn is_affirmative(text: &str) -> bool {
    let ws = words(text);
    ws.iter().any(|w| AFFIRMATIVE.contains(&w.as_str())) && !ws.iter().any(|w| NEGATIVE.contains(&w.as_str()))
}

const NUMBER_WORDS: [&str; 7] = ["one", "two", "three", "four", "five", "six", "seven"];

/// First number in the answer, as digits or a number word.
fn extract_score(text: &str) -> Option<u8> {
    static DIGITS: OnceLock<Regex> = OnceLock::new();
    let re = DIGITS.get_or_init(|| Regex::new(r"-?\d+").expect("valid regex"));
    let digit = re.find(text).map(|m| (m.start(), m.as_str().to_string()));
    let lower = text.to_lowercase();
    let word = words(&lower)
        .into_iter()
        .find_map(|w| NUMBER_WORDS.iter().position(|n| *n == w).map(|i| (lower.find(&w).unwrap_or(0), (i + 1).to_string())));
    let token = match (digit, word) {
        (Some(d), Some(w)) => if w.0 < d.0 { w.1 } else { d.1 },
        (Some(d), None) => d.1,
        (None, Some(w)) => w.1,
        (None, None) => return None,
    };
    validate_bevs_score(&token).ok()
}

/// Lowest and highest scoring domains; ties go to the earlier domain.
pub fn extremes(record: &BevsRecord) -> Option<((ValueDomain, u8), (ValueDomain, u8))> {
    let mut scored: Vec<(ValueDomain, u8)> = record.assessments.iter().map(|a| (a.domain, a.score)).collect();
    scored.sort_by_key(|(d, _)| *d as usize);
    let lowest = scored.iter().copied().reduce(|a, b| if b.1 < a.1 { b } else { a })?;
    let highest = scored.iter().copied().reduce(|a, b| if b.1 > a.1 { b } else { a })?;
    Some((lowest, highest))
}

/// Advances the record by one student answer.
pub fn bevs_step(
    mut record: BevsRecord,
    user_text: &str,
    now: DateTime<Utc>,
) -> Result<(BevsRecord, BevsDirective), BevsError> {
    let directive = match record.current_step {
        BevsStep::Done => return Err(BevsError::AlreadyDone),
        BevsStep::Intro => {
            if is_negative(user_text) {
                BevsDirective::NotYet
            } else {
                record.current_step = BevsStep::CollectValues;
                record.domain_index = 0;
                BevsDirective::AskValue(record.current_domain())
            }
        }
        BevsStep::CollectValues => {
            record.pending_value = Some(user_text.trim().to_string());
            record.current_step = BevsStep::CollectScores;
            BevsDirective::AskScore(record.current_domain())
        }
        BevsStep::CollectScores => match extract_score(user_text) {
            None => BevsDirective::ScoreRetry(record.current_domain()),
            Some(score) => {
                record.assessments.push(BevsAssessment {
                    domain: record.current_domain(),
                    value_statement: record.pending_value.take().unwrap_or_default(),
                    score,
                });
                if record.domain_index < 3 {
                    record.domain_index += 1;
                    record.current_step = BevsStep::CollectValues;
                    BevsDirective::AskValue(record.current_domain())
                } else {
                    record.current_step = BevsStep::Confirm;
                    let (lowest, highest) = extremes(&record).expect("four assessments");
                    BevsDirective::Confirm { lowest, highest }
                }
            }
        },
        BevsStep::Confirm => {
            if is_affirmative(user_text) {
                record.current_step = BevsStep::Done;
                record.completed_at = Some(now);
                BevsDirective::Save
            } else {
                let (lowest, highest) = extremes(&record).expect("four assessments");
                BevsDirective::Confirm { lowest, highest }
            }
        }
    };
    Ok((record, directive))
}

/// The `saveProfile` payload for a finished record.
pub fn save_payload(record: &BevsRecord) -> Value {
    json!({ "bevs": record })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn now() -> DateTime<Utc> {
        "2026-10-19T12:00:00Z".parse().unwrap()
    }

    fn walk(answers: &[&str]) -> (BevsRecord, BevsDirective) {
        let mut rec = BevsRecord::new(now());
        let mut last = BevsDirective::NotYet;
        for a in answers {
            let (r, d) = bevs_step(rec, a, now()).unwrap();
            rec = r;
            last = d;
        }
        (rec, last)
    }

    #[test]
    fn intro_starts_collection() {
        let (rec, d) = walk(&["yes let's start"]);
        assert_eq!(rec.current_step, BevsStep::CollectValues);
        assert_eq!(rec.domain_index, 0);
        assert_eq!(d, BevsDirective::AskValue(ValueDomain::WorkStudies));
        let (rec, d) = walk(&["not right now"]);
        assert_eq!(rec.current_step, BevsStep::Intro);
        assert_eq!(d, BevsDirective::NotYet);
    }

    #[test]
    fn full_walk() {
        let answers = [
            "sure", "Being successful.", "I would say a 3.", "Being there for friends", "5", "Sleep more",
            "four", "Music", "6",
        ];
        let (rec, d) = walk(&answers);
        assert_eq!(rec.current_step, BevsStep::Confirm);
        assert_eq!(rec.domain_index, 3);
        assert_eq!(
            d,
            BevsDirective::Confirm {
                lowest: (ValueDomain::WorkStudies, 3),
                highest: (ValueDomain::Leisure, 6)
            }
        );
        assert!(rec.is_consistent());
        let (done, d) = bevs_step(rec, "yes save it", now()).unwrap();
        assert_eq!(done.current_step, BevsStep::Done);
        assert_eq!(done.assessments.len(), 4);
        assert_eq!(d, BevsDirective::Save);
        assert!(done.is_consistent());
        assert_eq!(done.assessments[0].value_statement, "Being successful.");
        assert_eq!(bevs_step(done, "yes", now()), Err(BevsError::AlreadyDone));
    }

    #[test]
    fn out_of_range_stays() {
        let (rec, _) = walk(&["ok", "grades"]);
        for bad in ["8", "0", "maybe", "-2"] {
            let (r, d) = bevs_step(rec.clone(), bad, now()).unwrap();
            assert_eq!(r.current_step, BevsStep::CollectScores, "{bad}");
            assert_eq!(d, BevsDirective::ScoreRetry(ValueDomain::WorkStudies));
            assert!(r.assessments.is_empty());
        }
    }

    #[test]
    fn confirm_needs_yes() {
        let (rec, _) = walk(&["ok", "a", "1", "b", "2", "c", "3", "d", "4"]);
        let (r, d) = bevs_step(rec, "no, wait", now()).unwrap();
        assert_eq!(r.current_step, BevsStep::Confirm);
        assert!(matches!(d, BevsDirective::Confirm { .. }));
    }

    #[test]
    fn ties_take_earlier_domain() {
        let (rec, d) = walk(&["ok", "a", "4", "b", "4", "c", "4", "d", "4"]);
        assert_eq!(
            d,
            BevsDirective::Confirm { lowest: (ValueDomain::WorkStudies, 4), highest: (ValueDomain::WorkStudies, 4) }
        );
        assert_eq!(extremes(&rec).unwrap().0 .0, ValueDomain::WorkStudies);
    }

    proptest! {
        #[test]
        fn record_stays_consistent(answers in proptest::collection::vec("[a-z0-9 ]{0,8}", 0..30)) {
            let mut rec = BevsRecord::new(now());
            for a in &answers {
                match bevs_step(rec.clone(), a, now()) {
                    Ok((r, _)) => rec = r,
                    Err(BevsError::AlreadyDone) => break,
                }
                prop_assert!(rec.is_consistent(), "{rec:?}");
            }
        }
    }
}
