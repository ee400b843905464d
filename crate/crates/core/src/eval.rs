//! Span-detection and alignment scoring.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::document::{classify_table_complexity, ComplexityBucket, Table};
use crate::resolve::AlignmentTarget;
use crate::schema::LinkingSchema;
use crate::text::Span;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Intersection over union of two half-open spans; 0 when both are empty.
pub fn span_iou(a: Span, b: Span) -> f64 {
    let inter = a.intersection_len(&b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// A span scored for detection. Only items with equal `key` can match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanItem {
    pub key: String,
    pub span: Span,
}

impl SpanItem {
    pub fn new(key: impl Into<String>, span: Span) -> Self {
        Self { key: key.into(), span }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `(prediction index, gold index)` of each match.
    #[serde(skip)]
    pub matches: Vec<(usize, usize)>,
}

impl DetectionScores {
    /// Scores from raw counts. With no predictions precision is 1; with no
    /// gold items recall is 1.
    pub fn from_counts(true_positives: usize, predicted: usize, gold: usize) -> Self {
        let precision = if predicted == 0 { 1.0 } else { true_positives as f64 / predicted as f64 };
        let recall = if gold == 0 { 1.0 } else { true_positives as f64 / gold as f64 };
        Self { true_positives, predicted, gold, precision, recall, f1: f1_score(precision, recall), matches: Vec::new() }
    }
}

/// One-to-one greedy matching by descending IoU; a pair counts when its IoU
/// reaches `threshold`. Ties break by prediction index, then gold index.
pub fn score_detection(pred: &[SpanItem], gold: &[SpanItem], threshold: f64) -> DetectionScores {
    let mut by_key: HashMap<&str, Vec<usize>> = HashMap::new();
    for (j, g) in gold.iter().enumerate() {
        by_key.entry(g.key.as_str()).or_default().push(j);
    }
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for &j in by_key.get(p.key.as_str()).map(Vec::as_slice).unwrap_or(&[]) {
            let iou = span_iou(p.span, gold[j].span);
            if iou > 0.0 && iou >= threshold {
                candidates.push((iou, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_pred = vec![false; pred.len()];
    let mut used_gold = vec![false; gold.len()];
    let mut matches = Vec::new();
    for (_, i, j) in candidates {
        if !used_pred[i] && !used_gold[j] {
            used_pred[i] = true;
            used_gold[j] = true;
            matches.push((i, j));
        }
    }
    matches.sort_unstable();
    DetectionScores { matches, ..DetectionScores::from_counts(used_pred.iter().filter(|u| **u).count(), pred.len(), gold.len()) }
}

/// A mention's target, for resolution scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionItem {
    pub mention_id: String,
    pub table_id: String,
    pub target: AlignmentTarget,
}

impl ResolutionItem {
    pub fn new(mention_id: impl Into<String>, table_id: impl Into<String>, target: AlignmentTarget) -> Self {
        Self { mention_id: mention_id.into(), table_id: table_id.into(), target }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketScore {
    pub correct: usize,
    pub total: usize,
    /// `correct / total`; 0 for an empty bucket.
    pub accuracy: f64,
}

impl BucketScore {
    fn new(correct: usize, total: usize) -> Self {
        Self { correct, total, accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionScores {
    pub overall: BucketScore,
    pub buckets: BTreeMap<ComplexityBucket, BucketScore>,
    /// Predictions whose mention id has no gold counterpart.
    pub unmatched_predictions: Vec<String>,
}

/// Strict all-or-nothing scoring: a prediction is correct only when it
/// covers exactly the gold target's cells. Predictions without a gold item
/// count as incorrect.
pub fn score_resolution(pred: &[ResolutionItem], gold: &[ResolutionItem], tables: &[Table]) -> ResolutionScores {
    let table_of = |id: &str| tables.iter().find(|t| t.id == id);
    let mut counts: BTreeMap<ComplexityBucket, (usize, usize)> = ComplexityBucket::ALL.iter().map(|b| (*b, (0, 0))).collect();
    let gold_ids: BTreeSet<&str> = gold.iter().map(|g| g.mention_id.as_str()).collect();

    for g in gold {
        let Some(table) = table_of(&g.table_id) else {
            tracing::warn!(table = %g.table_id, "gold item refers to an unknown table, skipped");
            continue;
        };
        let entry = counts.get_mut(&classify_table_complexity(table)).expect("all buckets present");
        entry.1 += 1;
        let correct = pred
            .iter()
            .find(|p| p.mention_id == g.mention_id)
            .is_some_and(|p| p.table_id == g.table_id && p.target.covered_cells(table) == g.target.covered_cells(table));
        if correct {
            entry.0 += 1;
        }
    }

    let mut unmatched = Vec::new();
    for p in pred.iter().filter(|p| !gold_ids.contains(p.mention_id.as_str())) {
        tracing::warn!(mention = %p.mention_id, "prediction has no gold counterpart, counted incorrect");
        unmatched.push(p.mention_id.clone());
        if let Some(table) = table_of(&p.table_id) {
            counts.get_mut(&classify_table_complexity(table)).expect("all buckets present").1 += 1;
        }
    }

    let correct: usize = counts.values().map(|c| c.0).sum();
    let total: usize = counts.values().map(|c| c.1).sum();
    ResolutionScores {
        overall: BucketScore::new(correct, total),
        buckets: counts.into_iter().map(|(b, (c, t))| (b, BucketScore::new(c, t))).collect(),
        unmatched_predictions: unmatched,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub detection: DetectionScores,
    pub resolution: ResolutionScores,
}

impl ScoreReport {
    /// Plain-text table with aligned columns.
    pub fn to_text(&self) -> String {
        let d = &self.detection;
        let mut out = String::new();
        let _ = writeln!(out, "{:<22}{:>10}{:>10}{:>10}", "detection", "value", "count", "of");
        let _ = writeln!(out, "{:<22}{:>10.4}{:>10}{:>10}", "precision", d.precision, d.true_positives, d.predicted);
        let _ = writeln!(out, "{:<22}{:>10.4}{:>10}{:>10}", "recall", d.recall, d.true_positives, d.gold);
        let _ = writeln!(out, "{:<22}{:>10.4}", "f1", d.f1);
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<22}{:>10}{:>10}{:>10}", "resolution", "accuracy", "correct", "total");
        let r = &self.resolution;
        let _ = writeln!(out, "{:<22}{:>10.4}{:>10}{:>10}", "overall", r.overall.accuracy, r.overall.correct, r.overall.total);
        for (bucket, s) in &r.buckets {
            let _ = writeln!(out, "{:<22}{:>10.4}{:>10}{:>10}", bucket.as_str(), s.accuracy, s.correct, s.total);
        }
        out
    }
}

struct FlatMention {
    key: String,
    id: String,
    table_id: String,
    span: Span,
    target: Option<AlignmentTarget>,
}

/// Mentions keyed by (paragraph, table) with spans shifted to paragraph
/// offsets, so predicted and gold files may segment sentences differently.
fn flatten(schema: &LinkingSchema) -> Vec<FlatMention> {
    let mut out = Vec::new();
    for pair in &schema.pairs {
        let key = format!("{}|{}", pair.paragraph_id, pair.table_id);
        for s in &pair.sentences {
            for m in &s.mentions {
                out.push(FlatMention {
                    key: key.clone(),
                    id: format!("{}|{}", pair.table_id, m.id),
                    table_id: pair.table_id.clone(),
                    span: m.span.shift(s.span.start as isize),
                    target: m.target.clone(),
                });
            }
        }
    }
    out
}

/// Scores a predicted schema against a gold file.
///
/// Resolution is scored over gold mentions that carry a target. Each gold
/// mention takes the target of the prediction it was matched to during
/// detection; unmatched gold mentions count as incorrect.
pub fn score_schemas(pred: &LinkingSchema, gold: &LinkingSchema, tables: &[Table], threshold: f64) -> ScoreReport {
    let p = flatten(pred);
    let g = flatten(gold);
    let to_items = |v: &[FlatMention]| v.iter().map(|m| SpanItem::new(m.key.clone(), m.span)).collect::<Vec<_>>();
    let detection = score_detection(&to_items(&p), &to_items(&g), threshold);

    let gold_items: Vec<ResolutionItem> = g
        .iter()
        .filter_map(|m| Some(ResolutionItem::new(m.id.clone(), m.table_id.clone(), m.target.clone()?)))
        .collect();
    let pred_items: Vec<ResolutionItem> = detection
        .matches
        .iter()
        .filter_map(|&(i, j)| Some(ResolutionItem::new(g[j].id.clone(), p[i].table_id.clone(), p[i].target.clone()?)))
        .filter(|item| gold_items.iter().any(|gi| gi.mention_id == item.mention_id))
        .collect();
    let resolution = score_resolution(&pred_items, &gold_items, tables);
    ScoreReport { detection, resolution }
}
