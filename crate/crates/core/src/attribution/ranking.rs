use serde::{Deserialize, Serialize};

use super::AttributionVector;

pub const TIE_BREAK_RULE: &str = "abs-desc-index-asc";

/// Feature indices ordered from most to least important by `|score|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub order: Vec<usize>,
    pub tie_break: String,
}

impl ImportanceRanking {
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].abs().total_cmp(&scores[a].abs()).then(a.cmp(&b)));
        Self { order, tie_break: TIE_BREAK_RULE.to_string() }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Position of every feature in the order (0 = most important).
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.order.len()];
        for (pos, &f) in self.order.iter().enumerate() {
            ranks[f] = pos;
        }
        ranks
    }
}

pub fn importance_ranking(attr: &AttributionVector) -> ImportanceRanking {
    ImportanceRanking::from_scores(&attr.scores)
}
