//! Plain-text tables for `--format table`.

use crate::workspace::BlockersReport;

fn render(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.iter().map(|h| h.to_string()).collect());
    out += &line(widths.iter().map(|w| "-".repeat(*w)).collect());
    for r in rows {
        out += &line(r.clone());
    }
    out
}

pub fn blockers(report: &BlockersReport) -> String {
    let classified = report.blockers.iter().any(|b| b.taxonomy.is_some());
    let mut header = vec!["#", "score", "hits", "location", "function", "edge", "condition"];
    if classified {
        header.extend(["code", "label"]);
    }
    let rows: Vec<Vec<String>> = report
        .blockers
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut r = vec![
                (i + 1).to_string(),
                b.score.to_string(),
                b.times_hit.to_string(),
                format!("{}:{}:{}", b.location.file, b.location.start_line, b.location.start_col),
                b.function.clone(),
                format!("{:?}", b.blocked_edge.label).to_lowercase(),
                b.condition_text.clone(),
            ];
            if let Some(t) = &b.taxonomy {
                r.push(t.code.to_string());
                r.push(format!("{:?}", t.label));
            }
            r
        })
        .collect();
    let mut out = render(&header, &rows);
    if let Some(note) = &report.note {
        out += &format!("({note})\n");
    }
    out
}
