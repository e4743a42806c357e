//! Run reports: one self-describing `key=value` record per line, so results
//! can be grepped and recomputed without any parser dependency.

use std::time::Duration;

use isax::QueryStats;

pub fn ms(duration: Duration) -> f64 {
    duration.as_secs_f64() * 1e3
}

/// One answered query.
pub struct QueryRow {
    pub qid: usize,
    pub engine: &'static str,
    pub id: u32,
    pub distance: f64,
    pub total: Duration,
    pub stats: Option<QueryStats>,
    /// Oracle comparison when `--verify` is on: (scan distance, matched).
    pub verified: Option<(f64, bool)>,
}

impl QueryRow {
    pub fn render(&self) -> String {
        let mut line = format!(
            "record=query qid={} engine={} id={} distance={:.9} total_ms={:.3}",
            self.qid,
            self.engine,
            self.id,
            self.distance,
            ms(self.total)
        );
        if let Some(stats) = &self.stats {
            line.push_str(&format!(
                " approx_ms={:.3} fill_ms={:.3} refine_ms={:.3} lb_calcs={} real_calcs={} \
                 abandoned={} pruned={} candidates={} queue_abandonments={}",
                ms(stats.approx_time),
                ms(stats.fill_time),
                ms(stats.refine_time),
                stats.lb_calcs,
                stats.real_calcs,
                stats.abandoned_calcs,
                stats.pruned,
                stats.candidates,
                stats.queue_abandonments,
            ));
        }
        if let Some((scan_distance, matched)) = self.verified {
            line.push_str(&format!(
                " scan_distance={:.9} verified={}",
                scan_distance,
                if matched { "ok" } else { "fail" }
            ));
        }
        line
    }
}

/// Aggregate latencies; recomputable from the per-query rows.
pub fn summary_line(engine: &str, rows: &[QueryRow]) -> String {
    let latencies: Vec<f64> = rows.iter().map(|r| ms(r.total)).collect();
    let failures = rows.iter().filter(|r| matches!(r.verified, Some((_, false)))).count();
    let verified = rows.iter().filter(|r| r.verified.is_some()).count();
    let mut line = format!(
        "record=summary engine={engine} queries={} mean_ms={:.3} median_ms={:.3} p95_ms={:.3}",
        rows.len(),
        mean(&latencies),
        percentile(&latencies, 0.50),
        percentile(&latencies, 0.95),
    );
    if verified > 0 {
        line.push_str(&format!(" verified={}/{verified}", verified - failures));
    }
    line
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Nearest-rank percentile on a copy of the data.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(qid: usize, total_ms: f64) -> QueryRow {
        QueryRow {
            qid,
            engine: "tree",
            id: qid as u32,
            distance: 1.5,
            total: Duration::from_secs_f64(total_ms / 1e3),
            stats: None,
            verified: Some((1.5, true)),
        }
    }

    #[test]
    fn percentiles_use_nearest_rank() {
        let values: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(percentile(&values, 0.50), 50.0);
        assert_eq!(percentile(&values, 0.95), 95.0);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
    }

    #[test]
    fn summary_is_recomputable_from_rows() {
        let rows: Vec<QueryRow> = [4.0, 1.0, 3.0, 2.0, 10.0].iter().enumerate()
            .map(|(i, &t)| row(i, t))
            .collect();
        let summary = summary_line("tree", &rows);

        // recompute the aggregates from the rendered per-query rows alone
        let rendered: Vec<f64> = rows
            .iter()
            .map(|r| {
                let line = r.render();
                let field = line
                    .split_whitespace()
                    .find_map(|kv| kv.strip_prefix("total_ms="))
                    .unwrap();
                field.parse::<f64>().unwrap()
            })
            .collect();
        assert!(summary.contains(&format!("mean_ms={:.3}", mean(&rendered))));
        assert!(summary.contains(&format!("median_ms={:.3}", percentile(&rendered, 0.50))));
        assert!(summary.contains(&format!("p95_ms={:.3}", percentile(&rendered, 0.95))));
        assert!(summary.contains("verified=5/5"));
    }
}
