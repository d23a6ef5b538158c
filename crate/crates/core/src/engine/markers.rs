//! Phase-transition markers embedded in model text.

use crate::domain::Phase;

pub const ONGOING_MARKER: &str = "[ONGOING_PHASE]";
pub const GOAL_SETTING_MARKER: &str = "[GOAL_SETTING_PHASE]";

const MARKERS: [(&str, Phase); 2] = [(ONGOING_MARKER, Phase::ActiveCoaching), (GOAL_SETTING_MARKER, Phase::GoalSetting)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerParse {
    pub clean_text: String,
    /// Legal transition requested by the first marker.
    pub transition: Option<Phase>,
    /// Target of a first marker that is illegal from the current phase.
    pub illegal: Option<Phase>,
}

fn first_marker(text: &str) -> Option<(usize, &'static str, Phase)> {
    MARKERS
        .iter()
        .filter_map(|(m, p)| text.find(m).map(|i| (i, *m, *p)))
        .min_by_key(|(i, _, _)| *i)
}

/// True when `text` still contains a recognized marker.
pub fn contains_marker(text: &str) -> bool {
    first_marker(text).is_some()
}

/// Strips every recognized marker and reports the transition requested by
/// the first one.
///
/// Removal repeats until no marker remains, so a marker reassembled by an
/// inner removal (e.g. `[ONGOING_[ONGOING_PHASE]PHASE]`) is removed too.
/// A marker naming the current phase is stripped without effect.
pub fn parse_markers(text: &str, current: Phase) -> MarkerParse {
    let requested = first_marker(text).map(|(_, _, p)| p);
    let mut clean = text.to_string();
    while let Some((i, m, _)) = first_marker(&clean) {
        clean.replace_range(i..i + m.len(), "");
    }
    let clean_text = tidy(&clean);

    let (transition, illegal) = match requested {
        Some(p) if p == current => (None, None),
        Some(p) if current.can_transition_to(p) => (Some(p), None),
        Some(p) => {
            tracing::warn!(from = %current, to = %p, "illegal transition marker discarded");
            (None, Some(p))
        }
        None => (None, None),
    };
    MarkerParse { clean_text, transition, illegal }
}

/// Collapses the spacing left behind by removed markers.
fn tidy(text: &str) -> String {
    let lines: Vec<String> = text
        .lines()
        .map(|line| line.split([' ', '\t']).filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" "))
        .collect();
    lines.join("\n").trim().to_string()
}
