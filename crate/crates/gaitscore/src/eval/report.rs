//! Report rendering: a human-readable table, a machine-readable key-value
//! document, and the confusion matrix as CSV.

use super::EvalReport;

/// Text table: one row per class plus the macro average.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>6} {:>6} {:>6} {:>6}\n",
        "Gait Score", "F1", "AUC", "Pre", "Rec"
    ));
    for (k, m) in report.per_class.iter().enumerate() {
        out.push_str(&format!(
            "{:<12} {:>6.2} {:>6.2} {:>6.2} {:>6.2}\n",
            k, m.f1, m.auc, m.precision, m.recall
        ));
    }
    let m = &report.macro_avg;
    out.push_str(&format!(
        "{:<12} {:>6.2} {:>6.2} {:>6.2} {:>6.2}\n",
        "Macro Avg", m.f1, m.auc, m.precision, m.recall
    ));
    out.push_str(&format!(
        "\nBalanced accuracy: {:.4}  ({} exams)\n",
        report.balanced_accuracy, report.n_exams
    ));
    for w in &report.warnings {
        out.push_str(&format!("warning: {}\n", w));
    }
    out
}

/// Key-value document, one `key value` pair per line.
pub fn render_kv(report: &EvalReport) -> String {
    let mut out = String::new();
    for (k, m) in report.per_class.iter().enumerate() {
        out.push_str(&format!("class{}.f1 {:.6}\n", k, m.f1));
        out.push_str(&format!("class{}.auc {:.6}\n", k, m.auc));
        out.push_str(&format!("class{}.precision {:.6}\n", k, m.precision));
        out.push_str(&format!("class{}.recall {:.6}\n", k, m.recall));
    }
    let m = &report.macro_avg;
    out.push_str(&format!("macro.f1 {:.6}\n", m.f1));
    out.push_str(&format!("macro.auc {:.6}\n", m.auc));
    out.push_str(&format!("macro.precision {:.6}\n", m.precision));
    out.push_str(&format!("macro.recall {:.6}\n", m.recall));
    out.push_str(&format!(
        "balanced_accuracy {:.6}\n",
        report.balanced_accuracy
    ));
    out.push_str(&format!("n_exams {}\n", report.n_exams));
    out
}

/// Confusion matrix as CSV; rows are true classes, columns predictions.
pub fn confusion_csv(report: &EvalReport) -> String {
    let c = report.confusion.len();
    let mut out = String::from("true\\pred");
    for k in 0..c {
        out.push_str(&format!(",{}", k));
    }
    out.push('\n');
    for (t, row) in report.confusion.iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            out.push_str(&format!(",{}", v));
        }
        out.push('\n');
    }
    out
}
