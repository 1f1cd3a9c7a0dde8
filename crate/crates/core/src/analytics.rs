//! Historical-trace analytics: for each (tip threshold, delay) pair,
//! the fraction of observed transactions that both paid at least the
//! threshold tip and waited at least the delay — the frontrun exposure
//! a given delay setting would have left. Feeds epoch parameter
//! recommendations.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

/// Required CSV header, exact names and order.
pub const TRACE_HEADER: [&str; 6] = [
    "block_number",
    "tx_id",
    "base_fee_wei",
    "miner_tip_wei",
    "gas_price_wei",
    "wait_seconds",
];

#[derive(Debug, thiserror::Error)]
pub enum AnalyticsError {
    #[error("trace header mismatch: expected {expected:?}, got {got:?}")]
    SchemaMismatch { expected: String, got: String },
    #[error("trace contains no usable records")]
    EmptyTrace,
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("no grid point reaches the target probability")]
    Infeasible,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One historical observation: fees paid and how long the transaction
/// waited between first sight and confirmation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub block_number: u64,
    pub tx_id: String,
    pub base_fee_wei: u64,
    pub miner_tip_wei: u64,
    pub gas_price_wei: u64,
    pub wait_seconds: f64,
}

impl TraceRecord {
    /// Tip as percent of the block base fee.
    pub fn tip_pct(&self) -> f64 {
        100.0 * self.miner_tip_wei as f64 / self.base_fee_wei as f64
    }

    /// Exact threshold comparison `tip_pct >= threshold`, evaluated as
    /// `100000 * tip >= round(1000 * threshold) * base` in integers.
    /// Thresholds are treated at milli-percent resolution.
    pub fn tip_at_least(&self, threshold_pct: f64) -> bool {
        let threshold_mpct = (threshold_pct * 1000.0).round() as u128;
        100_000u128 * self.miner_tip_wei as u128 >= threshold_mpct * self.base_fee_wei as u128
    }

    pub fn waited_at_least(&self, delay_seconds: f64) -> bool {
        self.wait_seconds >= delay_seconds
    }
}

/// Whether malformed rows abort the ingest or are skipped and reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedRow {
    pub line: usize,
    pub reason: String,
}

/// Ingest outcome: validated records plus a skip report (lenient mode).
#[derive(Debug, Clone)]
pub struct IngestReport {
    pub records: Vec<TraceRecord>,
    pub skipped: Vec<SkippedRow>,
}

/// Reads and validates a trace CSV. The header must match
/// [`TRACE_HEADER`] exactly. Rows violating the record invariants
/// (zero base fee, negative wait, unparsable fields) are skipped with
/// line numbers in lenient mode and abort in strict mode.
pub fn ingest_trace(path: &Path, mode: IngestMode) -> Result<IngestReport, AnalyticsError> {
    let mut raw = String::new();
    std::fs::File::open(path)?.read_to_string(&mut raw)?;
    ingest_trace_str(&raw, mode)
}

/// [`ingest_trace`] over an in-memory document.
pub fn ingest_trace_str(raw: &str, mode: IngestMode) -> Result<IngestReport, AnalyticsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(raw.as_bytes());

    let got: Vec<String> = reader
        .headers()
        .map_err(|e| AnalyticsError::SchemaMismatch {
            expected: TRACE_HEADER.join(","),
            got: format!("unreadable header: {e}"),
        })?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if got != TRACE_HEADER {
        return Err(AnalyticsError::SchemaMismatch {
            expected: TRACE_HEADER.join(","),
            got: got.join(","),
        });
    }

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (index, row) in reader.records().enumerate() {
        let line = index + 2; // header is line 1
        let parsed = row
            .map_err(|e| e.to_string())
            .and_then(|fields| parse_row(&fields));
        match parsed {
            Ok(record) => records.push(record),
            Err(reason) => match mode {
                IngestMode::Strict => {
                    return Err(AnalyticsError::MalformedRow { line, reason });
                }
                IngestMode::Lenient => skipped.push(SkippedRow { line, reason }),
            },
        }
    }
    if records.is_empty() {
        return Err(AnalyticsError::EmptyTrace);
    }
    Ok(IngestReport { records, skipped })
}

fn parse_row(fields: &csv::StringRecord) -> Result<TraceRecord, String> {
    if fields.len() != TRACE_HEADER.len() {
        return Err(format!(
            "expected {} fields, got {}",
            TRACE_HEADER.len(),
            fields.len()
        ));
    }
    let field = |i: usize| fields.get(i).unwrap_or("").trim();
    let parse_u64 = |i: usize, name: &str| -> Result<u64, String> {
        field(i).parse::<u64>().map_err(|e| format!("{name}: {e}"))
    };
    let record = TraceRecord {
        block_number: parse_u64(0, "block_number")?,
        tx_id: field(1).to_string(),
        base_fee_wei: parse_u64(2, "base_fee_wei")?,
        miner_tip_wei: parse_u64(3, "miner_tip_wei")?,
        gas_price_wei: parse_u64(4, "gas_price_wei")?,
        wait_seconds: field(5)
            .parse::<f64>()
            .map_err(|e| format!("wait_seconds: {e}"))?,
    };
    if record.base_fee_wei == 0 {
        return Err("base_fee_wei must be positive".to_string());
    }
    if record.wait_seconds.is_nan() || record.wait_seconds < 0.0 {
        return Err("wait_seconds must be non-negative".to_string());
    }
    Ok(record)
}

/// An exact probability: hit count over record count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probability {
    pub hits: u64,
    pub total: u64,
}

impl Probability {
    pub fn value(&self) -> f64 {
        self.hits as f64 / self.total as f64
    }
}

/// Fraction of records with `tip_pct >= threshold` and
/// `wait >= delay`. Counting is exact; division happens only in
/// [`Probability::value`].
pub fn frontrun_probability(
    records: &[TraceRecord],
    tip_threshold_pct: f64,
    vdf_delay_s: f64,
) -> Result<Probability, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptyTrace);
    }
    let hits = records
        .iter()
        .filter(|r| r.tip_at_least(tip_threshold_pct) && r.waited_at_least(vdf_delay_s))
        .count() as u64;
    Ok(Probability {
        hits,
        total: records.len() as u64,
    })
}

/// Probability matrix over the tip x delay cross product.
#[derive(Debug, Clone, Serialize)]
pub struct GridReport {
    pub tip_pcts: Vec<f64>,
    pub delays_s: Vec<f64>,
    /// `cells[i][j]` is the probability at `(tip_pcts[i], delays_s[j])`.
    pub cells: Vec<Vec<Probability>>,
}

impl GridReport {
    /// Plot-ready CSV: `tip_pct,vdf_delay_s,count,total,probability`,
    /// real-valued columns with 6 decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tip_pct,vdf_delay_s,count,total,probability\n");
        for (i, tip) in self.tip_pcts.iter().enumerate() {
            for (j, delay) in self.delays_s.iter().enumerate() {
                let cell = self.cells[i][j];
                writeln!(
                    out,
                    "{tip:.6},{delay:.6},{},{},{:.6}",
                    cell.hits,
                    cell.total,
                    cell.value()
                )
                .expect("string write");
            }
        }
        out
    }
}

/// Evaluates [`frontrun_probability`] over the whole grid.
pub fn grid_report(
    records: &[TraceRecord],
    tip_pcts: &[f64],
    delays_s: &[f64],
) -> Result<GridReport, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptyTrace);
    }
    if tip_pcts.is_empty() || delays_s.is_empty() {
        return Err(AnalyticsError::Infeasible);
    }
    let cells = tip_pcts
        .iter()
        .map(|&tip| {
            delays_s
                .iter()
                .map(|&delay| frontrun_probability(records, tip, delay))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GridReport {
        tip_pcts: tip_pcts.to_vec(),
        delays_s: delays_s.to_vec(),
        cells,
    })
}

/// Recommended epoch parameters and the exposure they achieve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Recommendation {
    pub tip_pct: f64,
    pub vdf_delay_s: f64,
    pub probability: Probability,
}

/// Smallest `(delay, tip)` pair — lexicographic by delay, then tip —
/// whose exposure is at or below `target`.
pub fn recommend_epoch(
    records: &[TraceRecord],
    target: f64,
    tip_pcts: &[f64],
    delay_candidates: &[f64],
) -> Result<Recommendation, AnalyticsError> {
    if records.is_empty() {
        return Err(AnalyticsError::EmptyTrace);
    }
    let mut tips = tip_pcts.to_vec();
    let mut delays = delay_candidates.to_vec();
    tips.sort_by(|a, b| a.partial_cmp(b).expect("finite tips"));
    delays.sort_by(|a, b| a.partial_cmp(b).expect("finite delays"));
    for &delay in &delays {
        for &tip in &tips {
            let probability = frontrun_probability(records, tip, delay)?;
            if probability.value() <= target {
                return Ok(Recommendation {
                    tip_pct: tip,
                    vdf_delay_s: delay,
                    probability,
                });
            }
        }
    }
    Err(AnalyticsError::Infeasible)
}

/// The tip axis used in the exposure plots: 0% to 25% in 2.5% steps.
pub fn default_tip_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 * 2.5).collect()
}
