use std::fmt::Write as _;

use super::{EvalReport, Field, Tally};

fn percent(t: Tally) -> String {
    t.accuracy().map(|a| a.label()).unwrap_or_else(|_| "-".into())
}

fn fraction(t: Tally) -> String {
    t.accuracy()
        .map(|a| format!("{:.4}", a.fraction))
        .unwrap_or_else(|_| "-".into())
}

/// Left-align the first column, right-align the rest.
fn render_table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn summary_table(report: &EvalReport) -> String {
    let mut rows = vec![["model", "correct", "wrong", "scored", "accuracy", "rounded"]
        .map(String::from)
        .to_vec()];
    for model in report.models() {
        let t = report.model_total(model);
        rows.push(vec![
            model.to_string(),
            t.correct.to_string(),
            t.wrong.to_string(),
            t.total().to_string(),
            fraction(t),
            percent(t),
        ]);
    }
    render_table(&rows)
}

fn model_grid(report: &EvalReport, model: &str) -> String {
    let mut header = vec!["source".to_string(), "articles".to_string()];
    header.extend(Field::ALL.iter().map(|f| f.name().to_string()));
    header.push("all".into());
    let mut rows = vec![header];
    for source in report.sources(model) {
        let articles = report
            .articles
            .get(&(model.to_string(), source.to_string()))
            .copied()
            .unwrap_or(0);
        let mut row = vec![source.to_string(), articles.to_string()];
        row.extend(
            Field::ALL
                .iter()
                .map(|f| percent(report.cell(model, source, *f).unwrap_or_default())),
        );
        row.push(percent(report.source_total(model, source)));
        rows.push(row);
    }
    let articles: u64 = report
        .articles
        .iter()
        .filter(|((m, _), _)| m == model)
        .map(|(_, n)| n)
        .sum();
    let mut total = vec!["all".to_string(), articles.to_string()];
    total.extend(Field::ALL.iter().map(|f| percent(report.field_total(model, *f))));
    total.push(percent(report.model_total(model)));
    rows.push(total);
    render_table(&rows)
}

/// A text table (overall accuracy per model, then a source-by-field grid
/// per model) and plot data as CSV with one row per cell.
pub fn emit_report(report: &EvalReport) -> (String, Vec<u8>) {
    let mut text = String::from("Overall accuracy\n");
    text.push_str(&summary_table(report));
    for model in report.models() {
        let _ = write!(text, "\nModel {model}\n");
        text.push_str(&model_grid(report, model));
        if let Some(n) = report.skipped.get(model).filter(|n| **n > 0) {
            let _ = writeln!(text, "rows without gold entry: {n}");
        }
        if let Some(gaps) = report.coverage_gaps.get(model).filter(|g| !g.is_empty()) {
            let _ = writeln!(text, "gold articles missing from dataset: {}", gaps.len());
            for url in gaps {
                let _ = writeln!(text, "  {url}");
            }
        }
    }

    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new());
    csv.write_record(["model", "source", "field", "correct", "wrong", "accuracy"])
        .expect("writing to a Vec");
    for ((model, source, field), tally) in &report.cells {
        let row = [
            model.clone(),
            source.clone(),
            field.name().to_string(),
            tally.correct.to_string(),
            tally.wrong.to_string(),
            fraction(*tally),
        ];
        csv.write_record(&row).expect("writing to a Vec");
    }
    (text, csv.into_inner().expect("flushing a Vec"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_is_header_only() {
        let (text, csv) = emit_report(&EvalReport::default());
        assert_eq!(csv, b"model,source,field,correct,wrong,accuracy\r\n");
        assert!(text.starts_with("Overall accuracy\nmodel"));
    }

    #[test]
    fn single_cell_is_one_row() {
        let mut r = EvalReport::default();
        r.add_tally("gpt-4o", "The Daily Star", Field::Killed, Tally::new(3, 1));
        let (_, csv) = emit_report(&r);
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(
            text,
            "model,source,field,correct,wrong,accuracy\r\ngpt-4o,The Daily Star,killed,3,1,0.7500\r\n"
        );
    }

    #[test]
    fn table_shows_rounded_totals() {
        let mut r = EvalReport::default();
        r.add_tally("llama-3-70b-8192", "all", Field::Killed, Tally::new(1450, 177));
        r.add_tally("gpt-3.5-turbo", "all", Field::Killed, Tally::new(1224, 384));
        r.add_tally("gpt-4o", "all", Field::Killed, Tally::new(1499, 145));
        let (text, _) = emit_report(&r);
        let summary: Vec<&str> = text.lines().skip(2).take(3).collect();
        assert_eq!(
            summary,
            [
                "gpt-3.5-turbo        1224    384    1608    0.7612      76%",
                "gpt-4o               1499    145    1644    0.9118      91%",
                "llama-3-70b-8192     1450    177    1627    0.8912      89%",
            ]
        );
    }
}
