use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tablelink_acceptance::*;
use tablelink_core::document::{classify_table_complexity, parse_table_grid, PageInfo};
use tablelink_core::eval::{
    f1_score, score_detection, score_resolution, span_iou, DetectionScores, ResolutionItem, SpanItem,
};
use tablelink_core::geometry::{denormalize, normalize_box, NormalizedBox, Rect};
use tablelink_core::mention::{validate_mention_spans, Candidate, Mention, MentionSource, MentionType};
use tablelink_core::pipeline::link_bundle;
use tablelink_core::resolve::{
    derived_value_oracle, resolve_derived_value, AlignmentTarget, DerivedOp, Evidence, GridRect, MatchTier,
    ResolveSettings, Scope,
};
use tablelink_core::schema::MentionEntry;
use tablelink_core::scope::{coverage, merge_targets, DEFAULT_PROMOTION};
use tablelink_core::segment::{segment_sentences, Abbreviations, Sentence};
use tablelink_core::text::slice;
use tablelink_core::{CellId, ComplexityBucket, LinkingSchema, PipelineOptions, Span, Table};
use tablelink_service::{Fetch, Service};

const PROPERTY_CASES: u32 = 1000;

fn main() {
    let mut report = Report::default();
    report.criterion("golden fixtures", golden_fixtures);
    report.criterion("oracle equivalence", oracle_equivalence);
    report.criterion("metric harness fidelity", metric_fidelity);
    report.criterion("aggregate reconstruction", aggregate_reconstruction);
    report.criterion("property: sentence-span partition", prop_sentence_partition);
    report.criterion("property: mention substring soundness", prop_mention_soundness);
    report.criterion("property: grid coverage and no overlap", prop_grid_coverage);
    report.criterion("property: schema round-trip byte stability", prop_schema_round_trip);
    report.criterion("property: normalized bounds and round-trip", prop_normalized_boxes);
    report.criterion("property: merge coverage monotonicity and idempotence", prop_merge);
    report.criterion("property: cache determinism", prop_cache_determinism);
    report.finish();
}

fn mentions<'a>(schema: &'a LinkingSchema, text: &str) -> Vec<&'a MentionEntry> {
    schema
        .pairs
        .iter()
        .flat_map(|p| &p.sentences)
        .flat_map(|s| &s.mentions)
        .filter(|m| m.text == text)
        .collect()
}

fn one<'a>(schema: &'a LinkingSchema, text: &str) -> Result<&'a MentionEntry, String> {
    match mentions(schema, text).as_slice() {
        [m] => Ok(m),
        other => Err(format!("expected one mention {text:?}, found {}", other.len())),
    }
}

fn cell_texts(table: &Table, target: &AlignmentTarget) -> BTreeSet<String> {
    target.covered_cells(table).into_iter().map(|id| table.cell(id).unwrap().text.clone()).collect()
}

fn golden_fixtures() -> Result<String, String> {
    let bundles = [fixture("tabfact"), fixture("scienceqa"), fixture("model_sizes")];
    let start = Instant::now();
    let built: Vec<_> = bundles
        .iter()
        .map(|b| link_bundle(b, &PipelineOptions::default()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("fixture run took {elapsed:?}"))?;

    let (doc, schema) = &built[0];
    let table = &doc.tables[0];
    let m = one(schema, "12.5%")?;
    let target = m.target.as_ref().ok_or("12.5% unresolved")?;
    ensure(*target == AlignmentTarget::cells(vec![CellId::new(5, 1), CellId::new(7, 1)]), || format!("12.5% -> {target:?}"))?;
    ensure(cell_texts(table, target) == BTreeSet::from(["85.1".into(), "72.6".into()]), || "12.5% cells".into())?;
    ensure(matches!(m.evidence, Some(Evidence::Arithmetic { op: DerivedOp::Difference, .. })), || format!("{:?}", m.evidence))?;

    let (doc, schema) = &built[1];
    let table = &doc.tables[0];
    let m = one(schema, "11.21%")?;
    let target = m.target.as_ref().ok_or("11.21% unresolved")?;
    ensure(*target == AlignmentTarget::cells(vec![CellId::new(2, 4), CellId::new(8, 4)]), || format!("11.21% -> {target:?}"))?;
    ensure(cell_texts(table, target) == BTreeSet::from(["53.92".into(), "42.71".into()]), || "11.21% cells".into())?;

    let (doc, schema) = &built[2];
    let table = &doc.tables[0];
    let m = one(schema, "MegatronLM")?;
    ensure(m.target == Some(AlignmentTarget::Row { row: 7 }), || format!("MegatronLM -> {:?}", m.target))?;
    ensure(table.cell_at(7, 1).unwrap().text == "MegatronLM", || "row 7 is not MegatronLM".into())?;
    let m = one(schema, "8.3B")?;
    ensure(m.target == Some(AlignmentTarget::cells(vec![CellId::new(7, 2)])), || format!("8.3B -> {:?}", m.target))?;
    ensure(table.cell_at(7, 2).unwrap().text == "8.30E+09", || "8.3B cell text".into())?;
    let m = one(schema, "1.6T")?;
    ensure(m.target == Some(AlignmentTarget::cells(vec![CellId::new(12, 2)])), || format!("1.6T -> {:?}", m.target))?;
    ensure(table.cell_at(12, 2).unwrap().text == "1.57E+12", || "1.6T cell text".into())?;
    ensure(matches!(m.evidence, Some(Evidence::Lookup { tier: MatchTier::Approximate, .. })), || format!("1.6T evidence {:?}", m.evidence))?;

    Ok(format!("exact targets on all three fixtures in {elapsed:?}"))
}

fn oracle_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ab1e);
    let settings = ResolveSettings::default();
    let (mut unambiguous, mut rank1) = (0, 0);
    for case in 0..200 {
        let rows = rng.random_range(3..=12);
        let cols = rng.random_range(2..=12);
        let table = random_numeric_table(&mut rng, rows, cols);
        let inj = inject_derived(&mut rng, &table);
        let mention = Mention {
            id: "m".into(),
            sentence_id: "s".into(),
            text: inj.text.clone(),
            span: Span::new(0, inj.text.chars().count()),
            mtype: MentionType::DerivedValue,
            source: MentionSource::Deterministic,
        };
        let value = tablelink_core::quantity::parse_quantity(&inj.text).map_err(|e| e.to_string())?;
        let oracle = derived_value_oracle(&value, &table, Scope::WholeTable, &DerivedOp::ALL);
        ensure(oracle.iter().any(|c| c.op == inj.op && c.a == inj.a && c.b == inj.b), || format!("case {case}: oracle misses the planted pair"))?;

        let alignment = resolve_derived_value(&mention, &table, &[], &settings).ok_or_else(|| format!("case {case}: {} unresolved", inj.text))?;
        let Evidence::Arithmetic { op, operands: [a, b], .. } = alignment.evidence else {
            return Err(format!("case {case}: not arithmetic: {:?}", alignment.evidence));
        };
        ensure(oracle.iter().any(|c| c.op == op && c.a == a && c.b == b), || format!("case {case}: chosen {op:?}({a},{b}) not in oracle results"))?;

        let pairs: BTreeSet<(CellId, CellId)> = oracle.iter().map(|c| (c.a.min(c.b), c.a.max(c.b))).collect();
        if pairs.len() == 1 {
            unambiguous += 1;
            let best = oracle[0];
            ensure((best.op, best.a, best.b) == (op, a, b), || format!("case {case}: rank-1 {best:?} vs chosen {op:?}({a},{b})"))?;
            rank1 += 1;
        }
    }
    Ok(format!("200/200 chosen pairs in oracle results; {rank1}/{unambiguous} unambiguous cases equal rank-1"))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn check_detection(case: &str, got: &DetectionScores, p: f64, r: f64, f: f64) -> Result<(), String> {
    ensure(close(got.precision, p) && close(got.recall, r) && close(got.f1, f), || {
        format!("{case}: got P={} R={} F1={}, want {p} {r} {f}", got.precision, got.recall, got.f1)
    })
}

fn sized_table(rows: usize, cols: usize, id: &str) -> Table {
    let header: Vec<String> = (0..cols).map(|c| format!("h{c}")).collect();
    let body: Vec<Vec<String>> = (1..rows).map(|r| (0..cols).map(|c| format!("{}", r * 100 + c)).collect()).collect();
    let grid = parse_table_grid(&table_html(&header, &body)).unwrap();
    Table::from_grid(id, 1, "", 0, Rect::new(0.0, 0.0, 100.0, 100.0), 1, grid)
}

fn metric_fidelity() -> Result<String, String> {
    let s = Span::new;
    let item = |k: &str, a, b| SpanItem::new(k, Span::new(a, b));

    // 1-4: span IoU
    ensure(close(span_iou(s(0, 4), s(2, 6)), 1.0 / 3.0), || "case 1".into())?;
    ensure(close(span_iou(s(5, 10), s(5, 10)), 1.0), || "case 2".into())?;
    ensure(close(span_iou(s(0, 3), s(3, 6)), 0.0), || "case 3".into())?;
    ensure(close(span_iou(s(0, 10), s(2, 4)), 0.2), || "case 4".into())?;

    // 5: two matches out of three on each side, one at IoU 3/5
    let d = score_detection(
        &[item("s", 0, 4), item("s", 10, 14), item("s", 20, 22)],
        &[item("s", 0, 4), item("s", 11, 15), item("s", 30, 35)],
        0.5,
    );
    check_detection("case 5", &d, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0)?;

    // 6: matching is one-to-one
    let d = score_detection(&[item("s", 0, 10), item("s", 0, 9)], &[item("s", 0, 10)], 0.5);
    check_detection("case 6", &d, 0.5, 1.0, 2.0 / 3.0)?;

    // 7: IoU of exactly 0.5 counts, 3/7 does not
    let d = score_detection(&[item("a", 0, 4), item("b", 0, 3)], &[item("a", 0, 8), item("b", 0, 7)], 0.5);
    check_detection("case 7", &d, 0.5, 0.5, 0.5)?;

    // 8: empty predictions
    check_detection("case 8a", &score_detection(&[], &[item("s", 0, 1)], 0.5), 1.0, 0.0, 0.0)?;
    check_detection("case 8b", &score_detection(&[], &[], 0.5), 1.0, 1.0, 1.0)?;

    // 9: strict resolution per bucket at the area boundaries
    let tables = [sized_table(6, 8, "A48"), sized_table(7, 7, "B49"), sized_table(10, 9, "C90"), sized_table(13, 7, "D91")];
    let buckets: Vec<ComplexityBucket> = tables.iter().map(classify_table_complexity).collect();
    let want = [ComplexityBucket::Simple, ComplexityBucket::Standard, ComplexityBucket::Standard, ComplexityBucket::Complex];
    ensure(buckets == want, || format!("case 9 buckets {buckets:?}"))?;
    ensure(
        [48, 49, 90, 91].map(ComplexityBucket::from_area) == want,
        || "case 9 from_area boundaries".into(),
    )?;
    let r = |id: &str, t: &str, target| ResolutionItem::new(id, t, target);
    let gold = vec![
        r("g1", "A48", AlignmentTarget::Row { row: 2 }),
        r("g2", "A48", AlignmentTarget::cells(vec![CellId::new(1, 1)])),
        r("g3", "B49", AlignmentTarget::Column { col: 1 }),
        r("g4", "C90", AlignmentTarget::cells(vec![CellId::new(1, 1), CellId::new(2, 1)])),
        r("g5", "D91", AlignmentTarget::Row { row: 3 }),
    ];
    let pred = vec![
        r("g1", "A48", AlignmentTarget::Row { row: 2 }),
        r("g2", "A48", AlignmentTarget::Region { rect: GridRect::new(1, 1, 1, 1) }),
        r("g3", "B49", AlignmentTarget::Column { col: 2 }),
        r("g4", "C90", AlignmentTarget::cells(vec![CellId::new(2, 1), CellId::new(1, 1)])),
        r("p6", "D91", AlignmentTarget::Row { row: 3 }),
    ];
    let res = score_resolution(&pred, &gold, &tables);
    let acc = |b| res.buckets[&b].accuracy;
    ensure(
        close(res.overall.accuracy, 0.5)
            && (res.overall.correct, res.overall.total) == (3, 6)
            && close(acc(ComplexityBucket::Simple), 1.0)
            && close(acc(ComplexityBucket::Standard), 0.5)
            && close(acc(ComplexityBucket::Complex), 0.0)
            && res.unmatched_predictions == ["p6"],
        || format!("case 9: {res:?}"),
    )?;

    // 10: counts to scores, F1 = 2TP / (pred + gold)
    let d = DetectionScores::from_counts(107, 130, 124);
    check_detection("case 10", &d, 107.0 / 130.0, 107.0 / 124.0, 214.0 / 254.0)?;
    ensure(close(f1_score(0.0, 0.0), 0.0), || "case 10 zero F1".into())?;

    Ok("10 cases match to 1e-9; areas 48/49/90/91 bucket as simple/standard/standard/complex".into())
}

fn aggregate_reconstruction() -> Result<String, String> {
    let (tp, n_pred, n_gold) = detection_counts(82.3, 86.3, 84.3, 300).ok_or("no detection counts")?;
    let counts = bucket_counts([87.9, 73.1, 62.0], 75.4, 80).ok_or("no bucket counts")?;

    let gold: Vec<SpanItem> = (0..n_gold).map(|i| SpanItem::new(format!("s{i}"), Span::new(0, 10))).collect();
    let pred: Vec<SpanItem> = (0..n_pred)
        .map(|i| if i < tp { SpanItem::new(format!("s{i}"), Span::new(1, 10)) } else { SpanItem::new(format!("x{i}"), Span::new(0, 10)) })
        .collect();
    let det = score_detection(&pred, &gold, 0.5);

    let tables = [sized_table(6, 6, "simple"), sized_table(8, 8, "standard"), sized_table(12, 10, "complex")];
    let mut gold_items = Vec::new();
    let mut pred_items = Vec::new();
    for (table, &(correct, total)) in tables.iter().zip(counts.iter()) {
        for k in 0..total {
            let id = format!("{}-{k}", table.id);
            gold_items.push(ResolutionItem::new(&id, &table.id, AlignmentTarget::Row { row: 1 }));
            let row = if k < correct { 1 } else { 2 };
            pred_items.push(ResolutionItem::new(&id, &table.id, AlignmentTarget::Row { row }));
        }
    }
    let res = score_resolution(&pred_items, &gold_items, &tables);

    let reported = [
        ("precision", det.precision, 82.3),
        ("recall", det.recall, 86.3),
        ("f1", det.f1, 84.3),
        ("resolution", res.overall.accuracy, 75.4),
        ("simple", res.buckets[&ComplexityBucket::Simple].accuracy, 87.9),
        ("standard", res.buckets[&ComplexityBucket::Standard].accuracy, 73.1),
        ("complex", res.buckets[&ComplexityBucket::Complex].accuracy, 62.0),
    ];
    let mut lines = Vec::new();
    for (name, got, want) in reported {
        ensure((100.0 * got - want).abs() <= 0.1, || format!("{name}: {:.3} vs {want}", 100.0 * got))?;
        lines.push(format!("{name} {:.2}", 100.0 * got));
    }
    Ok(format!(
        "detection tp={tp} pred={n_pred} gold={n_gold}; buckets {counts:?}; {}",
        lines.join(", ")
    ))
}

fn run_property<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<String, String> {
    let mut runner = TestRunner::new(Config { cases: PROPERTY_CASES, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())?;
    Ok(format!("{PROPERTY_CASES} cases"))
}

fn prop_sentence_partition() -> Result<String, String> {
    let abbreviations = Abbreviations::default();
    run_property(paragraph_text(), |text| {
        let sentences = segment_sentences("p", &text, &abbreviations);
        let chars: Vec<char> = text.chars().collect();
        let mut covered = vec![false; chars.len()];
        let mut last_end = 0;
        for (k, s) in sentences.iter().enumerate() {
            prop_assert_eq!(&s.id, &format!("p.s{k}"));
            prop_assert!(s.span.start >= last_end && s.span.start < s.span.end && s.span.end <= chars.len());
            prop_assert_eq!(slice(&text, s.span), Some(s.text.as_str()));
            prop_assert!(!s.text.starts_with(char::is_whitespace) && !s.text.ends_with(char::is_whitespace));
            covered[s.span.start..s.span.end].iter_mut().for_each(|c| *c = true);
            last_end = s.span.end;
        }
        for (i, c) in chars.iter().enumerate() {
            prop_assert!(covered[i] || c.is_whitespace(), "char {} ({:?}) not covered in {:?}", i, c, text);
        }
        Ok(())
    })
}

fn prop_mention_soundness() -> Result<String, String> {
    let detector = tablelink_core::Settings::default().detector();
    let strategy = labelled_table().prop_flat_map(|(header, body, label)| {
        let html = table_html_with_label(&header, &body, label);
        let sentence = sentence_about(header, body);
        let bogus = prop::collection::vec((0usize..80, 0usize..20, "[a-zA-Z0-9%. ]{0,12}"), 0..6);
        (Just(html), sentence, bogus)
    });
    run_property(strategy, |(html, text, bogus)| {
        let table = table_from_html(&html);
        let sentence = Sentence { id: "p.s0".into(), paragraph_id: "p".into(), span: Span::new(0, text.chars().count()), text: text.clone() };
        let found = detector.detect(&sentence, &table);
        for (k, m) in found.iter().enumerate() {
            prop_assert_eq!(slice(&text, m.span), Some(m.text.as_str()), "{:?}", m);
            prop_assert_eq!(&m.id, &format!("p.s0.m{k}"));
        }
        for w in found.windows(2) {
            prop_assert!(!w[0].span.overlaps(&w[1].span), "overlapping {:?} {:?}", w[0], w[1]);
        }

        // Remote candidates with arbitrary spans and texts.
        let n = text.chars().count();
        let mut candidates: Vec<Candidate> = bogus
            .iter()
            .map(|(start, len, t)| {
                let span = Span::new(*start, start + len);
                let real = slice(&text, span).map(String::from);
                match (real, start % 3) {
                    (Some(r), 0) => Candidate::new(r, Some(span), MentionType::InferredEntity),
                    (_, 1) => Candidate::new(t.clone(), None, MentionType::ReferentialEntity),
                    _ => Candidate::new(t.clone(), Some(span), MentionType::RawValue),
                }
            })
            .collect();
        candidates.push(Candidate::new(text.clone(), Some(Span::new(0, n)), MentionType::InferredEntity));
        for m in validate_mention_spans(&sentence, &candidates, MentionSource::Remote) {
            prop_assert_eq!(slice(&text, m.span), Some(m.text.as_str()), "{:?}", m);
        }
        Ok(())
    })
}

fn prop_grid_coverage() -> Result<String, String> {
    run_property(grid_layout(), |(rows, cols, cells)| {
        let grid = parse_table_grid(&layout_html(rows, &cells)).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!((grid.n_rows, grid.n_cols), (rows, cols));
        let table = Table::from_grid("T", 1, "", 0, Rect::new(0.0, 0.0, 10.0, 10.0), 0, grid);
        for r in 0..rows {
            for c in 0..cols {
                let covering = table.cells.iter().filter(|cell| cell.covers(r, c)).count();
                prop_assert_eq!(covering, 1, "slot ({}, {})", r, c);
                prop_assert!(table.cell_at(r, c).is_some());
            }
        }
        let mut got: Vec<_> = table.cells.iter().map(|c| (c.row, c.col, c.row_span, c.col_span)).collect();
        let mut want = cells.clone();
        got.sort_unstable();
        want.sort_unstable();
        prop_assert_eq!(got, want);
        Ok(())
    })
}

fn prop_schema_round_trip() -> Result<String, String> {
    run_property(random_bundle(), |bundle| {
        let options = PipelineOptions::default();
        let (_, a) = link_bundle(&bundle, &options).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let (_, b) = link_bundle(&bundle, &options).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let text = |b: Vec<u8>| String::from_utf8(b).expect("utf-8 schema");
        let bytes = a.encode();
        prop_assert_eq!(text(bytes.clone()), text(b.encode()));
        let decoded = LinkingSchema::decode(&bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&decoded, &a);
        prop_assert_eq!(text(decoded.encode()), text(bytes.clone()));
        let pretty = LinkingSchema::decode(&a.encode_pretty()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(text(pretty.encode()), text(bytes));
        Ok(())
    })
}

fn prop_normalized_boxes() -> Result<String, String> {
    let strategy = (1.0f64..5000.0, 1.0f64..5000.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0);
    run_property(strategy, |(pw, ph, fx, fy, fw, fh)| {
        let page = PageInfo { index: 0, width: pw, height: ph };
        let x = fx * pw;
        let y = fy * ph;
        let rect = Rect::new(x, y, fw * (pw - x), fh * (ph - y));
        let nb = normalize_box(&rect, &page).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert!(nb.in_bounds(), "{:?}", nb);
        let back = denormalize(&nb, &page);
        for (got, want) in [(back.x, rect.x), (back.y, rect.y), (back.w, rect.w), (back.h, rect.h)] {
            prop_assert!((got - want).abs() <= 1e-9 * pw.max(ph), "{:?} -> {:?}", rect, back);
        }
        let q = nb.quantized();
        prop_assert!(q.in_bounds(), "{:?}", q);
        let json = serde_json::to_string(&q).unwrap();
        let reread: NormalizedBox = serde_json::from_str(&json).unwrap();
        prop_assert!((reread.x - q.x).abs() <= 1e-9 && (reread.w - q.w).abs() <= 1e-9, "{}", json);
        prop_assert_eq!(serde_json::to_string(&reread).unwrap(), json);
        Ok(())
    })
}

fn target_strategy(rows: usize, cols: usize) -> impl Strategy<Value = AlignmentTarget> {
    let cell = (1..rows, 0..cols).prop_map(|(r, c)| CellId::new(r, c));
    prop_oneof![
        prop::collection::vec(cell, 1..4).prop_map(AlignmentTarget::cells),
        (1..rows).prop_map(|row| AlignmentTarget::Row { row }),
        (0..cols).prop_map(|col| AlignmentTarget::Column { col }),
        (1..rows, 1..rows, 0..cols, 0..cols)
            .prop_map(|(a, b, c, d)| AlignmentTarget::Region { rect: GridRect::new(a.min(b), a.max(b), c.min(d), c.max(d)) }),
    ]
}

fn prop_merge() -> Result<String, String> {
    let strategy = (3usize..10, 2usize..8, 0.3f64..0.9).prop_flat_map(|(rows, cols, threshold)| {
        (Just((rows, cols, threshold)), prop::collection::vec(target_strategy(rows, cols), 1..8))
    });
    run_property(strategy, |((rows, cols, threshold), targets)| {
        let header: Vec<String> = (0..cols).map(|c| format!("h{c}")).collect();
        let body: Vec<Vec<String>> = (1..rows).map(|r| (0..cols).map(|c| format!("{r}.{c}")).collect()).collect();
        let table = table_from_html(&table_html(&header, &body));
        let merged = merge_targets(&targets, &table, threshold);
        let before = coverage(&targets, &table);
        let after = coverage(&merged, &table);
        prop_assert!(after.is_superset(&before), "lost cells: {:?}", before.difference(&after).collect::<Vec<_>>());
        prop_assert_eq!(&merge_targets(&merged, &table, threshold), &merged);
        let default_merged = merge_targets(&targets, &table, DEFAULT_PROMOTION);
        prop_assert!(coverage(&default_merged, &table).is_superset(&before));
        prop_assert_eq!(&merge_targets(&default_merged, &table, DEFAULT_PROMOTION), &default_merged);
        Ok(())
    })
}

fn prop_cache_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let service = Service::new(PipelineOptions::default(), dir.path()).map_err(|e| e.to_string())?;
    run_property(random_bundle(), |bundle| {
        let mut bytes = Vec::new();
        for _ in 0..2 {
            let job = service.submit(&bundle).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let job = service.wait(&job.job_id, Duration::from_secs(30)).ok_or_else(|| TestCaseError::fail("job lost"))?;
            match service.fetch_schema(&job.doc_id).map_err(|e| TestCaseError::fail(e.to_string()))? {
                Fetch::Ready { bytes: b, .. } => bytes.push(b),
                other => return Err(TestCaseError::fail(format!("not ready: {other:?}"))),
            }
        }
        prop_assert!(bytes[0] == bytes[1], "resubmission changed the schema bytes");
        let direct = link_bundle(&bundle, &PipelineOptions::default()).map_err(|e| TestCaseError::fail(e.to_string()))?.1.encode();
        prop_assert!(bytes[0] == direct, "cached bytes differ from a direct build");
        Ok(())
    })
}
