//! Report rendering: a human-readable markdown page and a long-format CSV
//! that parses back losslessly.

use serde::{Deserialize, Serialize};

use super::metrics::MetricsTable;

fn fmt_money(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("${v:.2}"),
        None => "n/a".to_string(),
    }
}

fn fmt_tokens_per(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.0}"),
        None => "n/a".to_string(),
    }
}

/// Success-by-round and token/cost tables.
pub fn render_markdown(m: &MetricsTable) -> String {
    let mut out = String::new();
    out.push_str("# Experiment report\n\n");
    out.push_str(&format!(
        "Model `{}` over {} tasks, {} round(s).\n\n",
        m.model,
        m.dataset_size,
        m.rounds.len()
    ));

    out.push_str("## Success by round\n\n");
    let mut header = String::from("| Model |");
    let mut rule = String::from("| --- |");
    for r in &m.rounds {
        if r.round == 0 {
            header.push_str(" Initial |");
        } else {
            header.push_str(&format!(" R{} |", r.round));
        }
        rule.push_str(" --- |");
    }
    out.push_str(&header);
    out.push('\n');
    out.push_str(&rule);
    out.push('\n');
    if !m.rounds.is_empty() {
        let mut row = format!("| {} |", m.model);
        for r in &m.rounds {
            row.push_str(&format!(" {:.1}% |", r.success_pct));
        }
        out.push_str(&row);
        out.push('\n');
    }
    out.push('\n');

    out.push_str("## Tokens and cost\n\n");
    out.push_str("| Model | Solved | TPT | EC-TPT | Tokens | Cost | Initial CPS | Total CPS |\n");
    out.push_str("| --- | --- | --- | --- | --- | --- | --- | --- |\n");
    if !m.rounds.is_empty() {
        let cumulative = m.rounds.last().map_or(0, |r| r.cumulative_solved);
        out.push_str(&format!(
            "| {} | {}/{} | {} | {} | {} | {} | {} | {} |\n",
            m.model,
            cumulative,
            m.dataset_size,
            fmt_tokens_per(m.tpt),
            fmt_tokens_per(m.ec_tpt),
            m.total_reasoning_tokens,
            fmt_money(Some(m.total_cost_usd)),
            fmt_money(m.initial_cps_usd),
            fmt_money(m.total_cps_usd),
        ));
    }
    out
}

/// One long-format row: a table name, a key, an optional round, a value.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CsvRow {
    pub table: String,
    pub key: String,
    pub round: Option<u32>,
    pub value: String,
}

fn row(table: &str, key: &str, round: Option<u32>, value: String) -> CsvRow {
    CsvRow {
        table: table.to_string(),
        key: key.to_string(),
        round,
        value,
    }
}

fn csv_rows(m: &MetricsTable) -> Vec<CsvRow> {
    let mut rows = vec![
        row("run", "model", None, m.model.clone()),
        row("run", "dataset_size", None, m.dataset_size.to_string()),
    ];
    for r in &m.rounds {
        let n = Some(r.round);
        rows.push(row("success", "attempted", n, r.attempted.to_string()));
        rows.push(row("success", "solved", n, r.solved.to_string()));
        rows.push(row("success", "cumulative_solved", n, r.cumulative_solved.to_string()));
        rows.push(row("success", "success_pct", n, format!("{:.4}", r.success_pct)));
        rows.push(row("success", "reasoning_tokens", n, r.reasoning_tokens.to_string()));
    }
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.6}"));
    rows.push(row("tokens", "tpt", None, opt(m.tpt)));
    rows.push(row("tokens", "ec_tpt", None, opt(m.ec_tpt)));
    rows.push(row("tokens", "total_reasoning_tokens", None, m.total_reasoning_tokens.to_string()));
    rows.push(row("tokens", "total_cost_usd", None, format!("{:.6}", m.total_cost_usd)));
    rows.push(row("tokens", "initial_cps_usd", None, opt(m.initial_cps_usd)));
    rows.push(row("tokens", "total_cps_usd", None, opt(m.total_cps_usd)));
    rows
}

pub fn render_csv(m: &MetricsTable) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for r in csv_rows(m) {
        writer.serialize(r).expect("csv rows serialize");
    }
    String::from_utf8(writer.into_inner().expect("csv flushes")).expect("csv is utf-8")
}

pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>, csv::Error> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader.deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ModelSpec;
    use crate::harness::metrics::{metrics_from_aggregates, RoundAggregate};

    fn sample() -> MetricsTable {
        let spec = ModelSpec {
            alias: "o1-mini".into(),
            wire_name: "w".into(),
            input_per_million: 3.0,
            output_per_million: 12.0,
        };
        let rounds = [
            RoundAggregate { attempted: 50, solved: 15, reasoning_tokens: 337_700 },
            RoundAggregate { attempted: 35, solved: 10, reasoning_tokens: 400_000 },
            RoundAggregate { attempted: 25, solved: 9, reasoning_tokens: 268_572 },
        ];
        metrics_from_aggregates(&rounds, 50, &spec)
    }

    #[test]
    fn markdown_has_the_expected_columns() {
        let text = render_markdown(&sample());
        assert!(text.contains("| Model | Initial | R1 | R2 |"));
        assert!(text.contains("| o1-mini | 30.0% | 50.0% | 68.0% |"));
        assert!(text.contains("| Model | Solved | TPT | EC-TPT | Tokens | Cost | Initial CPS | Total CPS |"));
        assert!(text.contains("| o1-mini | 34/50 | 6754 |"));
        assert!(text.contains("$12.08"));
    }

    #[test]
    fn empty_metrics_render_header_only_tables() {
        let spec = ModelSpec {
            alias: "m".into(),
            wire_name: "w".into(),
            input_per_million: 1.0,
            output_per_million: 1.0,
        };
        let m = metrics_from_aggregates(&[], 0, &spec);
        let text = render_markdown(&m);
        assert!(text.contains("| Model |"));
        assert!(text.contains("| Model | Solved | TPT |"));
        assert!(!text.contains("| m |"));
        let csv = render_csv(&m);
        let rows = parse_report_csv(&csv).unwrap();
        assert_eq!(rows.len(), 8); // run + tokens summaries, no round rows
    }

    #[test]
    fn csv_round_trips() {
        let m = sample();
        let text = render_csv(&m);
        let rows = parse_report_csv(&text).unwrap();
        assert_eq!(rows, csv_rows(&m));
        assert_eq!(render_csv(&m), text);
        let tpt = rows
            .iter()
            .find(|r| r.table == "tokens" && r.key == "tpt")
            .unwrap();
        assert_eq!(tpt.round, None);
        assert_eq!(tpt.value, "6754.000000");
    }

    #[test]
    fn undefined_metrics_survive_the_round_trip() {
        let spec = ModelSpec {
            alias: "m".into(),
            wire_name: "w".into(),
            input_per_million: 1.0,
            output_per_million: 5.0,
        };
        let m = metrics_from_aggregates(
            &[RoundAggregate { attempted: 5, solved: 0, reasoning_tokens: 100 }],
            5,
            &spec,
        );
        let rows = parse_report_csv(&render_csv(&m)).unwrap();
        let cps = rows.iter().find(|r| r.key == "initial_cps_usd").unwrap();
        assert_eq!(cps.value, "n/a");
    }
}
