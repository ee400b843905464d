//! Generators, fixture access and reporting for the acceptance suite in
//! `tests/acceptance.rs`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use proptest::prelude::*;
use rand::Rng;
use serde_json::{json, Value};
use tablelink_core::document::parse_table_grid;
use tablelink_core::geometry::Rect;
use tablelink_core::quantity::round_half_up;
use tablelink_core::resolve::DerivedOp;
use tablelink_core::Table;

/// Path of a bundled fixture document.
pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(format!("{name}.json"))
}

pub fn fixture(name: &str) -> Vec<u8> {
    std::fs::read(fixture_path(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

/// Collects one PASS/FAIL line per criterion.
#[derive(Debug, Default)]
pub struct Report {
    failures: Vec<String>,
    total: usize,
}

impl Report {
    /// Runs `check`, which returns a detail line or panics/errs on failure.
    pub fn criterion(&mut self, name: &str, check: impl FnOnce() -> Result<String, String>) {
        self.total += 1;
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string());
            Err(msg)
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                println!("FAIL  {name}: {detail}");
                self.failures.push(name.to_string());
            }
        }
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    /// Prints the summary and exits non-zero when any criterion failed.
    pub fn finish(self) {
        println!("{} of {} criteria passed", self.total - self.failures.len(), self.total);
        if !self.failures.is_empty() {
            std::process::exit(1);
        }
    }
}

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Table HTML with one header row and the given body rows.
pub fn table_html(header: &[String], rows: &[Vec<String>]) -> String {
    let mut html = String::from("<table><tr>");
    for h in header {
        html.push_str(&format!("<th>{h}</th>"));
    }
    html.push_str("</tr>");
    for r in rows {
        html.push_str("<tr>");
        for v in r {
            html.push_str(&format!("<td>{v}</td>"));
        }
        html.push_str("</tr>");
    }
    html.push_str("</table>");
    html
}

pub fn table_from_html(html: &str) -> Table {
    let grid = parse_table_grid(html).expect("generated markup parses");
    Table::from_grid("T1", 1, "", 0, Rect::new(50.0, 300.0, 500.0, 300.0), 1, grid)
}

/// A table of numbers with `rows` total rows (one header) and `cols`
/// columns. All values in a table share one number of decimals.
pub fn random_numeric_table(rng: &mut impl Rng, rows: usize, cols: usize) -> Table {
    let decimals = rng.random_range(1..=3usize);
    let scale = 10f64.powi(rng.random_range(2..=4));
    let header: Vec<String> = (0..cols).map(|c| format!("m{c}")).collect();
    let body: Vec<Vec<String>> = (1..rows)
        .map(|_| (0..cols).map(|_| format!("{:.*}", decimals, rng.random_range(0.0..scale))).collect())
        .collect();
    table_from_html(&table_html(&header, &body))
}

/// A derived value planted in a table: the operation, its operands and
/// the mention text reporting the rounded result.
#[derive(Debug, Clone)]
pub struct Injection {
    pub op: DerivedOp,
    pub a: tablelink_core::CellId,
    pub b: tablelink_core::CellId,
    pub text: String,
}

/// Picks two numeric data cells and an operation and renders the rounded
/// result the way a results section would report it.
pub fn inject_derived(rng: &mut impl Rng, table: &Table) -> Injection {
    let cells: Vec<_> = table
        .cells
        .iter()
        .filter(|c| !table.is_header_row(c.row))
        .filter_map(|c| c.numeric.as_ref().map(|n| (c.id, n.magnitude)))
        .collect();
    loop {
        let (a, va) = cells[rng.random_range(0..cells.len())];
        let (b, vb) = cells[rng.random_range(0..cells.len())];
        if a == b {
            continue;
        }
        let op = DerivedOp::ALL[rng.random_range(0..DerivedOp::ALL.len())];
        let Some(v) = op.apply(va, vb) else { continue };
        let precision = rng.random_range(1..=3u32);
        let rounded = round_half_up(v, precision);
        if !rounded.is_finite() || rounded.abs() < 10f64.powi(-(precision as i32)) {
            continue;
        }
        let percent = op == DerivedOp::PercentChange || rng.random_bool(0.25);
        let text = format!("{:.*}{}", precision as usize, rounded, if percent { "%" } else { "" });
        return Injection { op, a, b, text };
    }
}

/// Smallest `(tp, predicted, gold)` whose precision, recall and F1 print
/// as the given one-decimal percentages.
pub fn detection_counts(precision: f64, recall: f64, f1: f64, limit: usize) -> Option<(usize, usize, usize)> {
    let hit = |x: f64, target: f64| (100.0 * x - target).abs() <= 0.05;
    for gold in 1..=limit {
        for pred in 1..=limit {
            for tp in 1..=gold.min(pred) {
                let p = tp as f64 / pred as f64;
                let r = tp as f64 / gold as f64;
                if hit(p, precision) && hit(r, recall) && hit(2.0 * p * r / (p + r), f1) {
                    return Some((tp, pred, gold));
                }
            }
        }
    }
    None
}

/// Smallest per-bucket `(correct, total)` counts whose accuracies and
/// pooled accuracy print as the given one-decimal percentages.
pub fn bucket_counts(buckets: [f64; 3], overall: f64, limit: usize) -> Option<[(usize, usize); 3]> {
    let hit = |c: usize, n: usize, target: f64| (100.0 * c as f64 / n as f64 - target).abs() <= 0.05;
    let options = |target: f64| -> Vec<(usize, usize)> {
        (1..limit).flat_map(|n| (0..=n).map(move |c| (c, n))).filter(|&(c, n)| hit(c, n, target)).collect()
    };
    let [s, m, c] = buckets.map(options);
    let mut best: Option<[(usize, usize); 3]> = None;
    for &x in &s {
        for &y in &m {
            for &z in &c {
                let total = x.1 + y.1 + z.1;
                if hit(x.0 + y.0 + z.0, total, overall) && best.is_none_or(|b| total < b.iter().map(|p| p.1).sum()) {
                    best = Some([x, y, z]);
                }
            }
        }
    }
    best
}

// ---- proptest strategies ----

const WORDS: &[&str] = &[
    "We", "the", "model", "improves", "by", "results", "accuracy", "Table", "2", "Fig.", "e.g.", "et", "al.", "i.e.",
    "vs.", "approx.", "Sec.", "3.14", "4.2%", "1.6T", "−0.5", "naïve", "Ours", "baseline", "(see", "Tab.", "4)", "U.S.",
];
const ENDINGS: &[&str] = &[".", "!", "?", ".\"", ".)", "...", ";", ","];
const SEPARATORS: &[&str] = &[" ", " ", " ", "  ", "\n", "\t "];

/// Paragraph-like text: words, numbers, abbreviations and sentence ends
/// joined by assorted whitespace, with optional surrounding whitespace.
pub fn paragraph_text() -> impl Strategy<Value = String> {
    let token = (prop::sample::select(WORDS), prop::option::weighted(0.2, prop::sample::select(ENDINGS)))
        .prop_map(|(w, end)| format!("{w}{}", end.unwrap_or("")));
    (prop::collection::vec((token, prop::sample::select(SEPARATORS)), 1..40), prop::sample::select(SEPARATORS), any::<bool>())
        .prop_map(|(tokens, lead, pad)| {
            let mut s = if pad { lead.to_string() } else { String::new() };
            for (t, sep) in tokens {
                s.push_str(&t);
                s.push_str(sep);
            }
            if !pad {
                s.truncate(s.trim_end().len());
            }
            s
        })
}

/// Small labelled table: a `Method` stub column, metric headers and
/// numeric cells, with an optional full-width group label row.
pub fn labelled_table() -> impl Strategy<Value = (Vec<String>, Vec<Vec<String>>, Option<usize>)> {
    (2usize..6, 2usize..5).prop_flat_map(|(rows, metrics)| {
        let names = prop::collection::btree_set(prop::sample::select(MODEL_NAMES), rows..=rows);
        let values = prop::collection::vec(prop::collection::vec(0u32..10_000, metrics..=metrics), rows..=rows);
        let label = prop::option::of(0..rows);
        (names, values, label, Just(metrics)).prop_map(|(names, values, label, metrics)| {
            let mut header = vec!["Method".to_string()];
            header.extend(METRICS.iter().take(metrics).map(|m| m.to_string()));
            let body = names
                .into_iter()
                .zip(values)
                .map(|(name, vals)| {
                    let mut row = vec![name.to_string()];
                    row.extend(vals.into_iter().map(|v| format!("{:.2}", v as f64 / 100.0)));
                    row
                })
                .collect();
            (header, body, label)
        })
    })
}

const MODEL_NAMES: &[&str] = &["BERT", "RoBERTa", "Binder", "SQL", "Teacher+MLP", "GPT-3", "T5", "Ours", "Baseline", "MLP", "Transformer"];
const METRICS: &[&str] = &["Accuracy", "F1", "BLEU", "Recall"];
const CUES: &[&str] = &["improves by", "outperforms", "gain of", "drop of", "by", "relative", "absolute"];
const PHRASES: &[&str] = &["the first row", "the last column", "row 2", "column 3", "the first two rows", "Table 1", "GPT-3"];

pub fn table_html_with_label(header: &[String], body: &[Vec<String>], label: Option<usize>) -> String {
    let mut rows = body.to_vec();
    if let Some(at) = label {
        rows.insert(at, Vec::new());
    }
    let mut html = table_html(header, &[]);
    html.truncate(html.len() - "</table>".len());
    for r in &rows {
        if r.is_empty() {
            html.push_str(&format!("<tr><td colspan=\"{}\">Group setting</td></tr>", header.len()));
        } else {
            html.push_str("<tr>");
            for v in r {
                html.push_str(&format!("<td>{v}</td>"));
            }
            html.push_str("</tr>");
        }
    }
    html.push_str("</table>");
    html
}

/// A sentence mixing table vocabulary, numbers from the table, derived-like
/// numbers, cues and structural phrases.
pub fn sentence_about(header: Vec<String>, body: Vec<Vec<String>>) -> impl Strategy<Value = String> {
    let mut vocab: Vec<String> = header.clone();
    for row in &body {
        vocab.extend(row.iter().cloned());
    }
    vocab.extend(["Group setting", "setting", "methods", "and", "with", "on", "average", "4.5%", "+1.2", "1.6T", "12.5%"].map(String::from));
    vocab.extend(CUES.iter().map(|c| c.to_string()));
    vocab.extend(PHRASES.iter().map(|c| c.to_string()));
    let sep = prop::sample::select(vec![" ", " ", ", ", " (", ") "]);
    prop::collection::vec((prop::sample::select(vocab), sep), 1..16).prop_map(|parts| {
        let mut s = String::new();
        for (w, sep) in parts {
            s.push_str(&w);
            s.push_str(sep);
        }
        s.truncate(s.trim_end().len());
        s.push('.');
        s
    })
}

/// A single-table bundle whose paragraph cites the table and talks about it.
pub fn random_bundle() -> impl Strategy<Value = Vec<u8>> {
    labelled_table().prop_flat_map(|(header, body, label)| {
        let html = table_html_with_label(&header, &body, label);
        let sentences = prop::collection::vec(sentence_about(header, body), 1..4);
        (Just(html), sentences, 100.0f64..900.0, 100.0f64..1200.0).prop_map(|(html, sentences, w, h)| {
            let text = format!("Table 1 compares methods. {}", sentences.join(" "));
            let bundle: Value = json!({
                "doc_id": "generated",
                "pages": [{"index": 0, "width": w, "height": h}],
                "paragraphs": [{"id": "p1", "page": 0, "box": [w * 0.1, h * 0.1, w * 0.8, h * 0.2], "text": text}],
                "tables": [{"id": "T1", "number": 1, "caption": "Generated.", "page": 0,
                            "box": [w * 0.1, h * 0.4, w * 0.8, h * 0.5], "html": html}],
            });
            bundle.to_string().into_bytes()
        })
    })
}

/// Cell layout for a grid: each entry is `(row, col, row_span, col_span)`;
/// the cells tile the `rows x cols` grid exactly.
pub fn grid_layout() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, usize, usize)>)> {
    (1usize..9, 1usize..9, prop::collection::vec((1usize..4, 1usize..4), 81)).prop_map(|(rows, cols, spans)| {
        let mut taken = vec![vec![false; cols]; rows];
        let mut cells = Vec::new();
        let mut k = 0;
        for r in 0..rows {
            for c in 0..cols {
                if taken[r][c] {
                    continue;
                }
                let (want_rs, want_cs) = spans[k % spans.len()];
                k += 1;
                let mut cs = 1;
                while cs < want_cs && c + cs < cols && !taken[r][c + cs] {
                    cs += 1;
                }
                let mut rs = 1;
                while rs < want_rs && r + rs < rows && (c..c + cs).all(|cc| !taken[r + rs][cc]) {
                    rs += 1;
                }
                for row in taken.iter_mut().skip(r).take(rs) {
                    for slot in row.iter_mut().skip(c).take(cs) {
                        *slot = true;
                    }
                }
                cells.push((r, c, rs, cs));
            }
        }
        (rows, cols, cells)
    })
}

pub fn layout_html(rows: usize, cells: &[(usize, usize, usize, usize)]) -> String {
    let mut html = String::from("<table>");
    for r in 0..rows {
        html.push_str("<tr>");
        for &(row, col, rs, cs) in cells.iter().filter(|c| c.0 == r) {
            html.push_str(&format!("<td rowspan=\"{rs}\" colspan=\"{cs}\">c{row}-{col}</td>"));
        }
        html.push_str("</tr>");
    }
    html.push_str("</table>");
    html
}
