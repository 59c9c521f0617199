//! Success and cost metrics, recomputable from the transcript alone.
//!
//! Token accounting follows the reasoning-token convention: the headline
//! numbers (TPT, EC-TPT, Tokens, Cost, CPS) count hidden reasoning tokens
//! only, priced at the output rate.

use serde::{Deserialize, Serialize};

use super::transcript::{TranscriptRecord, Verdict};
use crate::gateway::ModelSpec;

/// Per-round aggregate, the minimal input the metric formulas need.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RoundAggregate {
    pub attempted: usize,
    pub solved: usize,
    pub reasoning_tokens: u64,
}

#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub attempted: usize,
    pub solved: usize,
    pub cumulative_solved: usize,
    /// Cumulative solved over dataset size, in percent.
    pub success_pct: f64,
    pub reasoning_tokens: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsTable {
    pub model: String,
    pub dataset_size: usize,
    pub rounds: Vec<RoundMetrics>,
    /// Mean reasoning tokens per task in the initial round.
    pub tpt: Option<f64>,
    /// Mean reasoning tokens per correction exchange, all later rounds.
    pub ec_tpt: Option<f64>,
    pub total_reasoning_tokens: u64,
    /// Reasoning tokens priced at the output rate.
    pub total_cost_usd: f64,
    /// Initial-round reasoning cost over initial-round solves.
    pub initial_cps_usd: Option<f64>,
    /// Total cost over cumulative solves.
    pub total_cps_usd: Option<f64>,
}

/// Computes every table cell from per-round aggregates. Division by a zero
/// solve count yields `None`, rendered as an undefined marker, never a NaN.
pub fn metrics_from_aggregates(
    aggregates: &[RoundAggregate],
    dataset_size: usize,
    spec: &ModelSpec,
) -> MetricsTable {
    let out_rate = spec.output_per_million / 1e6;
    let mut rounds = Vec::with_capacity(aggregates.len());
    let mut cumulative = 0usize;
    for (i, agg) in aggregates.iter().enumerate() {
        cumulative += agg.solved;
        let success_pct = if dataset_size == 0 {
            0.0
        } else {
            cumulative as f64 / dataset_size as f64 * 100.0
        };
        rounds.push(RoundMetrics {
            round: i as u32,
            attempted: agg.attempted,
            solved: agg.solved,
            cumulative_solved: cumulative,
            success_pct,
            reasoning_tokens: agg.reasoning_tokens,
        });
    }

    let initial = aggregates.first();
    let tpt = initial.and_then(|r| {
        (r.attempted > 0).then(|| r.reasoning_tokens as f64 / r.attempted as f64)
    });
    let correction_attempts: usize = aggregates.iter().skip(1).map(|r| r.attempted).sum();
    let correction_tokens: u64 = aggregates.iter().skip(1).map(|r| r.reasoning_tokens).sum();
    let ec_tpt = (correction_attempts > 0)
        .then(|| correction_tokens as f64 / correction_attempts as f64);

    let total_reasoning_tokens: u64 = aggregates.iter().map(|r| r.reasoning_tokens).sum();
    let total_cost_usd = total_reasoning_tokens as f64 * out_rate;

    let initial_cps_usd = initial.and_then(|r| {
        (r.solved > 0).then(|| r.reasoning_tokens as f64 * out_rate / r.solved as f64)
    });
    let total_cps_usd = (cumulative > 0).then(|| total_cost_usd / cumulative as f64);

    MetricsTable {
        model: spec.alias.clone(),
        dataset_size,
        rounds,
        tpt,
        ec_tpt,
        total_reasoning_tokens,
        total_cost_usd,
        initial_cps_usd,
        total_cps_usd,
    }
}

/// Derives per-round aggregates from transcript records and computes the
/// table. Only task-solving exchanges count; `error` verdicts count as
/// attempted (the call was made) with whatever usage was billed.
pub fn compute_metrics(
    records: &[TranscriptRecord],
    dataset_size: usize,
    spec: &ModelSpec,
) -> MetricsTable {
    let max_round = records.iter().map(|r| r.round).max();
    let mut aggregates = Vec::new();
    if let Some(max_round) = max_round {
        for round in 0..=max_round {
            let in_round = records.iter().filter(|r| r.round == round);
            let mut agg = RoundAggregate {
                attempted: 0,
                solved: 0,
                reasoning_tokens: 0,
            };
            for record in in_round {
                agg.attempted += 1;
                if record.verdict == Verdict::Correct {
                    agg.solved += 1;
                }
                agg.reasoning_tokens += record.usage.reasoning;
            }
            aggregates.push(agg);
        }
    }
    metrics_from_aggregates(&aggregates, dataset_size, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(alias: &str, output: f64) -> ModelSpec {
        ModelSpec {
            alias: alias.into(),
            wire_name: format!("{alias}-wire"),
            input_per_million: 1.0,
            output_per_million: output,
        }
    }

    fn round(attempted: usize, solved: usize, reasoning_tokens: u64) -> RoundAggregate {
        RoundAggregate {
            attempted,
            solved,
            reasoning_tokens,
        }
    }

    #[test]
    fn published_accounting_rows_reproduce() {
        // Reasoning-heavy model: TPT 5493 over 50 tasks, 44 solved at once,
        // 312768 reasoning tokens in total at $60 per million output.
        let o1 = spec("o1", 60.0);
        let m = metrics_from_aggregates(
            &[round(50, 44, 5493 * 50), round(6, 6, 312_768 - 5493 * 50)],
            50,
            &o1,
        );
        assert!((m.initial_cps_usd.unwrap() - 0.37).abs() < 0.005);
        assert!((m.total_cost_usd - 18.77).abs() < 0.005);
        assert!((m.total_cps_usd.unwrap() - 0.38).abs() < 0.005);
        assert_eq!(m.tpt, Some(5493.0));

        // Smaller model: TPT 6754, 15 solved initially, 34 cumulative,
        // 1006272 reasoning tokens at $12 per million output.
        let mini = spec("o1-mini", 12.0);
        let m = metrics_from_aggregates(
            &[round(50, 15, 6754 * 50), round(35, 19, 1_006_272 - 6754 * 50)],
            50,
            &mini,
        );
        assert!((m.initial_cps_usd.unwrap() - 0.27).abs() < 0.005);
        assert!((m.total_cost_usd - 12.08).abs() < 0.005);
        assert!((m.total_cps_usd.unwrap() - 0.36).abs() < 0.005);
    }

    #[test]
    fn success_percentages_accumulate() {
        let m = metrics_from_aggregates(
            &[round(50, 15, 0), round(35, 5, 0), round(30, 5, 0)],
            50,
            &spec("m", 1.0),
        );
        let pct: Vec<f64> = m.rounds.iter().map(|r| r.success_pct).collect();
        assert_eq!(pct, vec![30.0, 40.0, 50.0]);
        assert_eq!(m.rounds[2].cumulative_solved, 25);
        for w in m.rounds.windows(2) {
            assert!(w[1].cumulative_solved >= w[0].cumulative_solved);
        }
    }

    #[test]
    fn zero_solves_yield_undefined_not_nan() {
        let m = metrics_from_aggregates(&[round(10, 0, 1000)], 10, &spec("m", 5.0));
        assert_eq!(m.initial_cps_usd, None);
        assert_eq!(m.total_cps_usd, None);
        assert!(m.total_cost_usd > 0.0);
        let empty = metrics_from_aggregates(&[], 0, &spec("m", 5.0));
        assert!(empty.rounds.is_empty());
        assert_eq!(empty.tpt, None);
        assert_eq!(empty.ec_tpt, None);
        assert_eq!(empty.total_cost_usd, 0.0);
    }

    #[test]
    fn ec_tpt_averages_over_correction_exchanges_only() {
        let m = metrics_from_aggregates(
            &[round(4, 2, 4000), round(2, 1, 1000), round(1, 0, 500)],
            4,
            &spec("m", 1.0),
        );
        assert_eq!(m.tpt, Some(1000.0));
        assert_eq!(m.ec_tpt, Some(500.0));
        assert_eq!(m.total_reasoning_tokens, 5500);
    }
}
