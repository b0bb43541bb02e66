//! The action selector: one action per segment, maximizing total confidence.

use std::cmp::{Ordering, Reverse};
use std::collections::BTreeSet;

use serde::Serialize;

use super::{Action, FALLBACK_PAIR};

/// Largest search space (product of group sizes plus one) searched exhaustively.
pub const EXHAUSTIVE_LIMIT: u64 = 10_000;

/// Confidences are summed in millionths so that equal totals compare equal.
pub fn score_units(confidence: f64) -> i64 {
    (confidence * 1e6).round() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    /// Index of the chosen action in each group; `None` where the group fell back.
    pub chosen: Vec<Option<usize>>,
    /// One action per group, fallbacks already substituted.
    pub actions: Vec<Action>,
    /// Sum of confidences of the chosen (non-fallback) actions.
    pub total: f64,
    /// The same sum in the units the search compares.
    pub total_units: i64,
    pub exhaustive: bool,
}

impl Selection {
    pub fn fallback_groups(&self) -> impl Iterator<Item = usize> + '_ {
        self.chosen.iter().enumerate().filter(|(_, c)| c.is_none()).map(|(i, _)| i)
    }
}

fn feasible(groups: &[Vec<Action>], chosen: &[Option<usize>]) -> bool {
    let mut pairs = BTreeSet::new();
    let mut questions = 0;
    for (g, c) in chosen.iter().enumerate() {
        let Some(i) = c else { continue };
        let a = &groups[g][*i];
        if !pairs.insert(a.pair_id.as_str()) {
            return false;
        }
        questions += usize::from(a.asks_question);
    }
    questions <= 1
}

/// Orders assignments: more groups served, then higher total, then earlier
/// groups with higher confidence, higher popularity and smaller pair id.
fn compare(groups: &[Vec<Action>], a: &[Option<usize>], b: &[Option<usize>]) -> Ordering {
    let summary = |c: &[Option<usize>]| {
        let assigned = c.iter().filter(|x| x.is_some()).count();
        let total: i64 = c
            .iter()
            .enumerate()
            .filter_map(|(g, x)| x.map(|i| score_units(groups[g][i].confidence)))
            .sum();
        (assigned, total)
    };
    summary(a).cmp(&summary(b)).then_with(|| {
        for (g, (x, y)) in a.iter().zip(b).enumerate() {
            let ord = match (x, y) {
                (None, None) => Ordering::Equal,
                (Some(_), None) => Ordering::Greater,
                (None, Some(_)) => Ordering::Less,
                (Some(i), Some(j)) => {
                    let (p, q) = (&groups[g][*i], &groups[g][*j]);
                    score_units(p.confidence)
                        .cmp(&score_units(q.confidence))
                        .then(p.popularity.total_cmp(&q.popularity))
                        .then_with(|| Reverse(&p.pair_id).cmp(&Reverse(&q.pair_id)))
                        .then_with(|| j.cmp(i))
                }
            };
            if ord != Ordering::Equal {
                return ord;
            }
        }
        Ordering::Equal
    })
}

fn exhaustive(groups: &[Vec<Action>]) -> Vec<Option<usize>> {
    fn walk(groups: &[Vec<Action>], current: &mut Vec<Option<usize>>, best: &mut Vec<Option<usize>>) {
        if !feasible(groups, current) {
            return;
        }
        if current.len() == groups.len() {
            if compare(groups, current, best) == Ordering::Greater {
                best.clone_from(current);
            }
            return;
        }
        let g = current.len();
        for option in (0..groups[g].len()).map(Some).chain([None]) {
            current.push(option);
            walk(groups, current, best);
            current.pop();
        }
    }
    let mut best = vec![None; groups.len()];
    walk(groups, &mut Vec::with_capacity(groups.len()), &mut best);
    best
}

fn greedy(groups: &[Vec<Action>]) -> Vec<Option<usize>> {
    let mut order: Vec<(usize, usize)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, list)| (0..list.len()).map(move |i| (g, i)))
        .collect();
    order.sort_by(|&(g1, i1), &(g2, i2)| {
        let (a, b) = (&groups[g1][i1], &groups[g2][i2]);
        score_units(b.confidence)
            .cmp(&score_units(a.confidence))
            .then(g1.cmp(&g2))
            .then(b.popularity.total_cmp(&a.popularity))
            .then_with(|| a.pair_id.cmp(&b.pair_id))
            .then(i1.cmp(&i2))
    });
    let mut chosen = vec![None; groups.len()];
    for (g, i) in order {
        if chosen[g].is_some() {
            continue;
        }
        chosen[g] = Some(i);
        if !feasible(groups, &chosen) {
            chosen[g] = None;
        }
    }
    chosen
}

fn fallback(group: &[Action]) -> Action {
    let top = group
        .iter()
        .max_by(|a, b| a.confidence.total_cmp(&b.confidence).then_with(|| b.pair_id.cmp(&a.pair_id)))
        .expect("groups are non-empty");
    Action {
        pair_id: FALLBACK_PAIR.to_string(),
        asks_question: false,
        ..top.clone()
    }
}

/// Picks one action per group such that no two share a pair and at most one
/// asks a question. Exact up to [`EXHAUSTIVE_LIMIT`] combinations, greedy above.
/// Groups left without a feasible action fall back to the acknowledge pair.
///
/// # Panics
/// If any group is empty.
pub fn select_actions(groups: &[Vec<Action>]) -> Selection {
    assert!(groups.iter().all(|g| !g.is_empty()), "empty action group");
    let space = groups
        .iter()
        .try_fold(1u64, |acc, g| acc.checked_mul(g.len() as u64 + 1))
        .unwrap_or(u64::MAX);
    let exhaustive_path = space <= EXHAUSTIVE_LIMIT;
    let chosen = if exhaustive_path { exhaustive(groups) } else { greedy(groups) };
    let mut total = 0.0;
    let mut total_units = 0;
    let actions = chosen
        .iter()
        .enumerate()
        .map(|(g, c)| match c {
            Some(i) => {
                total += groups[g][*i].confidence;
                total_units += score_units(groups[g][*i].confidence);
                groups[g][*i].clone()
            }
            None => {
                log::info!("segment group {g} has no feasible action; falling back");
                fallback(&groups[g])
            }
        })
        .collect();
    Selection {
        chosen,
        actions,
        total,
        total_units,
        exhaustive: exhaustive_path,
    }
}
