//! Shared inputs for the criterion benchmarks in `benches/`.

use kgchat_core::action::{Action, ActionKind, SegmentRef};
use kgchat_core::{Bindings, DialogueAct};

/// User lines replayed by the turn benchmark.
pub const UTTERANCES: &[&str] = &[
    "do you like music",
    "i really like funk",
    "alfred nobel was born in france right",
    "no i didn't thanks for telling me",
    "what movie is your favorite and do you like tom hanks",
    "how many siblings do you have",
    "where was jara cimrman born",
    "who starred in matrix",
];

/// A selector instance: `segments` groups of `per_segment` actions over a few
/// shared pair ids, every third one asking a question.
pub fn selector_instance(segments: usize, per_segment: usize) -> Vec<Vec<Action>> {
    (0..segments)
        .map(|g| {
            (0..per_segment)
                .map(|i| Action {
                    segment: SegmentRef {
                        hypothesis_index: 0,
                        segment_index: g,
                    },
                    kind: ActionKind::Handle,
                    da: DialogueAct::InfObj,
                    property_id: None,
                    bindings: Bindings::default(),
                    pair_id: format!("pair{}", (g + i) % 5),
                    confidence: 1.0 / (1 + (g * 7 + i * 3) % 10) as f64,
                    asks_question: (g + i) % 3 == 0,
                    popularity: i as f64,
                })
                .collect()
        })
        .collect()
}
