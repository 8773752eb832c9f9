//! Per-class precision/recall/F1, weighted and macro averages, and
//! table-style reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::BinaryLabel;
use crate::error::{Error, Result};

pub const REPORT_VERSION: u32 = 1;

/// Counts indexed `[gold][predicted]` in (NOT, OFF) order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn get(&self, gold: BinaryLabel, predicted: BinaryLabel) -> u64 {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Number of gold documents of `class`.
    pub fn support(&self, class: BinaryLabel) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    fn true_positives(&self, class: BinaryLabel) -> u64 {
        self.get(class, class)
    }

    fn predicted(&self, class: BinaryLabel) -> u64 {
        self.counts[0][class.index()] + self.counts[1][class.index()]
    }
}

pub fn confusion(golds: &[BinaryLabel], preds: &[BinaryLabel]) -> Result<ConfusionMatrix> {
    if golds.len() != preds.len() {
        return Err(Error::DimensionMismatch {
            expected: golds.len(),
            found: preds.len(),
        });
    }
    if golds.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty prediction set".into()));
    }
    let mut cm = ConfusionMatrix::default();
    for (g, p) in golds.iter().zip(preds) {
        cm.counts[g.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Per-class metrics plus whether a zero-denominator convention was used.
fn class_prf_flagged(cm: &ConfusionMatrix, class: BinaryLabel) -> (Prf, bool) {
    let tp = cm.true_positives(class);
    let (precision, zp) = ratio(tp, cm.predicted(class));
    let (recall, zr) = ratio(tp, cm.support(class));
    let sum = precision + recall;
    let f1 = if sum == 0.0 { 0.0 } else { 2.0 * precision * recall / sum };
    (Prf { precision, recall, f1 }, zp || zr || sum == 0.0)
}

/// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R); each is 0 when its
/// denominator is 0.
pub fn class_prf(cm: &ConfusionMatrix, class: BinaryLabel) -> Prf {
    class_prf_flagged(cm, class).0
}

/// Gold-support-weighted mean of the per-class metrics.
pub fn weighted_average(cm: &ConfusionMatrix) -> Result<Prf> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    let mut avg = Prf {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    for class in BinaryLabel::ALL {
        let w = cm.support(class) as f64 / total as f64;
        let m = class_prf(cm, class);
        avg.precision += w * m.precision;
        avg.recall += w * m.recall;
        avg.f1 += w * m.f1;
    }
    Ok(avg)
}

pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    let sum: f64 = BinaryLabel::ALL.iter().map(|&c| class_prf(cm, c).f1).sum();
    Ok(sum / BinaryLabel::COUNT as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: BinaryLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub version: u32,
    pub per_class: [ClassReport; 2],
    pub weighted: Prf,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Set when some metric fell back to the zero-denominator convention.
    pub zero_division: bool,
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        let weighted = weighted_average(&cm)?;
        let macro_f1 = macro_f1(&cm)?;
        let mut zero_division = false;
        let per_class = BinaryLabel::ALL.map(|label| {
            let (m, flagged) = class_prf_flagged(&cm, label);
            zero_division |= flagged;
            ClassReport {
                label,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                support: cm.support(label),
            }
        });
        Ok(EvalReport {
            version: REPORT_VERSION,
            per_class,
            weighted,
            macro_f1,
            accuracy: cm.correct() as f64 / cm.total() as f64,
            confusion: cm,
            zero_division,
        })
    }

    pub fn evaluate(golds: &[BinaryLabel], preds: &[BinaryLabel]) -> Result<Self> {
        EvalReport::from_confusion(confusion(golds, preds)?)
    }

    pub fn class(&self, label: BinaryLabel) -> &ClassReport {
        &self.per_class[label.index()]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: EvalReport =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("malformed report: {e}")))?;
        if report.version != REPORT_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported report version {}", report.version)));
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Json,
}

/// Two decimals, ties to even.
pub fn round2(value: f64) -> String {
    format!("{:.2}", (value * 100.0).round_ties_even() / 100.0)
}

const MODEL_WIDTH: usize = 24;

fn block(title: &str) -> String {
    format!(" | {title:^14}")
}

/// Header of the table layout: per-class P/R/F1 blocks, the weighted block
/// and macro F1.
pub fn table_header() -> String {
    let mut out = format!("{:<MODEL_WIDTH$}", "");
    for label in BinaryLabel::ALL {
        out.push_str(&block(label.display_name()));
    }
    out.push_str(&block("Weighted Average"));
    out.push_str(" |\n");
    let _ = write!(out, "{:<MODEL_WIDTH$}", "Model");
    for _ in 0..3 {
        out.push_str(" |    P    R   F1");
    }
    out.push_str(" | F1 Macro\n");
    out
}

pub fn table_row(model: &str, r: &EvalReport) -> String {
    let mut out = format!("{model:<MODEL_WIDTH$}");
    let triples = r
        .per_class
        .iter()
        .map(|c| [c.precision, c.recall, c.f1])
        .chain([[r.weighted.precision, r.weighted.recall, r.weighted.f1]]);
    for triple in triples {
        out.push_str(" |");
        for v in triple {
            let _ = write!(out, " {}", round2(v));
        }
    }
    let _ = writeln!(out, " | {}", round2(r.macro_f1));
    out
}

pub fn render_table(rows: &[(&str, &EvalReport)]) -> String {
    let mut out = table_header();
    for (model, report) in rows {
        out.push_str(&table_row(model, report));
    }
    out
}

pub fn render_report(r: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => {
            let mut out = render_table(&[("model", r)]);
            if r.zero_division {
                out.push_str("note: zero denominators were reported as 0\n");
            }
            out
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report serializes");
            s.push('\n');
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use BinaryLabel::{Not, Off};

    fn cm(counts: [[u64; 2]; 2]) -> ConfusionMatrix {
        ConfusionMatrix { counts }
    }

    #[test]
    fn confusion_tally() {
        let golds = [Off, Off, Off, Not, Not, Off, Not, Not, Not, Off];
        let preds = [Off, Not, Off, Not, Off, Off, Not, Not, Not, Not];
        let m = confusion(&golds, &preds).unwrap();
        assert_eq!(m.counts, [[4, 1], [2, 3]]);
        assert_eq!(m.total(), 10);
        assert_eq!(confusion(&[Off], &[Not]).unwrap().get(Off, Not), 1);
        assert!(confusion(&[], &[]).is_err());
        assert!(confusion(&[Off], &[]).is_err());
    }

    #[test]
    fn hand_case() {
        // OFF: TP=3, FP=1, FN=2
        let m = cm([[0, 1], [2, 3]]);
        let prf = class_prf(&m, Off);
        assert_eq!(prf.precision, 0.75);
        assert_eq!(prf.recall, 0.6);
        assert!((prf.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(round2(prf.f1), "0.67");
    }

    #[test]
    fn zero_denominators() {
        let m = cm([[5, 0], [0, 0]]);
        assert_eq!(
            class_prf(&m, Off),
            Prf {
                precision: 0.0,
                recall: 0.0,
                f1: 0.0
            }
        );
        let perfect = class_prf(&m, Not);
        assert_eq!((perfect.precision, perfect.recall, perfect.f1), (1.0, 1.0, 1.0));
        assert!(EvalReport::from_confusion(m).unwrap().zero_division);
        assert!(!EvalReport::from_confusion(cm([[1, 0], [0, 1]])).unwrap().zero_division);
        assert!(weighted_average(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn weighted_and_macro_hand_values() {
        // NOT: TP 45, FN 3, FP 7 -> F1 0.9; OFF: TP 5, FN 7, FP 3 -> F1 0.5
        let m = cm([[45, 3], [7, 5]]);
        assert!((class_prf(&m, Not).f1 - 0.9).abs() < 1e-12);
        assert!((class_prf(&m, Off).f1 - 0.5).abs() < 1e-12);
        assert_eq!((m.support(Not), m.support(Off)), (48, 12));
        assert!((weighted_average(&m).unwrap().f1 - 0.82).abs() < 1e-12);
        assert!((macro_f1(&m).unwrap() - 0.70).abs() < 1e-12);
    }

    #[test]
    fn rounding_is_half_even() {
        assert_eq!(round2(0.666667), "0.67");
        assert_eq!(round2(0.125), "0.12");
        assert_eq!(round2(0.375), "0.38");
        assert_eq!(round2(1.0), "1.00");
        assert_eq!(round2(0.0), "0.00");
    }

    fn report_with(per_class: [[f64; 3]; 2], weighted: [f64; 3], macro_f1: f64) -> EvalReport {
        let mut r = EvalReport::from_confusion(cm([[1, 0], [0, 1]])).unwrap();
        for (c, v) in r.per_class.iter_mut().zip(per_class) {
            (c.precision, c.recall, c.f1) = (v[0], v[1], v[2]);
        }
        r.weighted = Prf {
            precision: weighted[0],
            recall: weighted[1],
            f1: weighted[2],
        };
        r.macro_f1 = macro_f1;
        r
    }

    #[test]
    fn text_layout_matches_random_forest_row() {
        let r = report_with([[0.93, 0.99, 0.96], [0.92, 0.68, 0.78]], [0.93, 0.93, 0.93], 0.87);
        let text = render_table(&[("Random Forest", &r)]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("Non Hate Offensive"));
        assert!(lines[0].find("Non Hate Offensive") < lines[0].find("Hate Offensive |").map(|i| i + 1));
        assert!(lines[0].contains("Weighted Average"));
        assert!(lines[1].ends_with("| F1 Macro"));
        assert_eq!(
            lines[2],
            format!(
                "{:<24} | 0.93 0.99 0.96 | 0.92 0.68 0.78 | 0.93 0.93 0.93 | 0.87",
                "Random Forest"
            )
        );
        assert_eq!(lines[1].len(), lines[2].len() + "F1 Macro".len() - "0.87".len());
    }

    #[test]
    fn json_round_trip() {
        let r = EvalReport::from_confusion(cm([[7, 2], [3, 5]])).unwrap();
        let text = render_report(&r, ReportFormat::Json);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["version"], REPORT_VERSION);
        assert_eq!(EvalReport::from_json(&text).unwrap(), r);
        assert!(EvalReport::from_json(&text.replace("\"version\": 1", "\"version\": 9")).is_err());
    }

    fn labels() -> impl Strategy<Value = Vec<BinaryLabel>> {
        prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { Off } else { Not }), 1..=12)
    }

    proptest! {
        #[test]
        fn invariants(pairs in labels().prop_flat_map(|g| {
            let n = g.len();
            (Just(g), prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { Off } else { Not }), n))
        })) {
            let (golds, preds) = pairs;
            let r = EvalReport::evaluate(&golds, &preds).unwrap();
            prop_assert!((r.weighted.recall - r.accuracy).abs() < 1e-12);
            prop_assert_eq!(r.macro_f1, (r.per_class[0].f1 + r.per_class[1].f1) / 2.0);
            for v in [r.weighted.precision, r.weighted.recall, r.weighted.f1, r.macro_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if golds.iter().all(|&g| g == golds[0]) {
                let c = r.class(golds[0]);
                prop_assert!((r.weighted.f1 - c.f1).abs() < 1e-12);
                prop_assert!((r.weighted.precision - c.precision).abs() < 1e-12);
            }
        }
    }
}
