//! Thread-count sweep over identical fits.

use crate::em::{learn, FitConfig};
use crate::error::{GmmError, Result};
use crate::model::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub threads: usize,
    pub seconds: f64,
    /// Time with one thread divided by time with `threads`.
    pub speedup: f64,
    pub km_seconds: f64,
    pub final_avg_log_p: f64,
}

impl BenchRow {
    /// Fraction of the fit spent in k-means.
    pub fn km_share(&self) -> f64 {
        self.km_seconds / self.seconds
    }
}

/// Parses a comma-separated list of positive thread counts that includes 1.
pub fn parse_thread_list(text: &str) -> Result<Vec<usize>> {
    let list: Vec<usize> = text
        .split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(GmmError::invalid(format!("bad thread count {t:?}"))),
        })
        .collect::<Result<_>>()?;
    if !list.contains(&1) {
        return Err(GmmError::invalid("thread list must include 1"));
    }
    Ok(list)
}

/// Fits `data` once per entry of `threads` with otherwise identical settings.
pub fn run_bench(data: &Dataset, config: &FitConfig, threads: &[usize]) -> Result<Vec<BenchRow>> {
    if threads.is_empty() || threads.iter().any(|&t| t == 0) || !threads.contains(&1) {
        return Err(GmmError::invalid("thread list must be positive and include 1"));
    }
    let mut rows = Vec::with_capacity(threads.len());
    for &t in threads {
        let cfg = FitConfig {
            n_threads: t,
            print_mode: false,
            ..config.clone()
        };
        let (model, report) = learn(data, &cfg)?;
        let final_avg_log_p = match report.final_avg_log_p() {
            Some(v) => v,
            None => model.avg_log_p(data)?,
        };
        rows.push(BenchRow {
            threads: t,
            seconds: report.total_seconds(),
            speedup: 0.0,
            km_seconds: report.km_seconds,
            final_avg_log_p,
        });
    }
    let base = rows.iter().find(|r| r.threads == 1).map(|r| r.seconds).unwrap();
    for r in &mut rows {
        r.speedup = if r.threads == 1 { 1.0 } else { base / r.seconds };
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_list_parsing() {
        assert_eq!(parse_thread_list("1, 2,4").unwrap(), vec![1, 2, 4]);
        assert!(parse_thread_list("2,4").is_err());
        assert!(parse_thread_list("1,0").is_err());
        assert!(parse_thread_list("1,x").is_err());
    }
}
