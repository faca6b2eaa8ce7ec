//! Per-round metrics records and their CSV / JSON-lines writers.
//!
//! Column order is fixed:
//!
//! | column | meaning |
//! |---|---|
//! | `round` | 1-based round number |
//! | `mode` | `ssfl`, `sfl` or `local` |
//! | `test_accuracy` | global network (full encoder and server classifier) on the test split |
//! | `cumulative_bytes_up` | client-to-server bytes so far |
//! | `cumulative_bytes_down` | server-to-client bytes so far |
//! | `cumulative_broadcast_bytes` | prefix broadcast bytes so far |
//! | `simulated_time_s` | simulated seconds at the end of the round |
//! | `fallback_step_count` | local-only steps taken this round |
//! | `mean_client_loss` | mean local-head loss this round; empty when there is none |
//! | `mean_server_loss` | mean server loss this round; empty when there is none |
//! | `client_accuracy` | mean test accuracy of the clients' own prefix and head; empty without heads |

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub mode: Mode,
    pub test_accuracy: f64,
    pub cumulative_bytes_up: u64,
    pub cumulative_bytes_down: u64,
    pub cumulative_broadcast_bytes: u64,
    pub simulated_time_s: f64,
    pub fallback_step_count: usize,
    pub mean_client_loss: Option<f64>,
    pub mean_server_loss: Option<f64>,
    pub client_accuracy: Option<f64>,
}

impl RoundMetrics {
    pub fn cumulative_bytes(&self) -> u64 {
        self.cumulative_bytes_up + self.cumulative_bytes_down + self.cumulative_broadcast_bytes
    }
}

pub fn write_csv<W: Write>(rows: &[RoundMetrics], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per line; also used for audit records.
pub fn write_jsonl<T: Serialize, W: Write>(rows: &[T], mut out: W) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<RoundMetrics>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Writes `<dir>/<stem>.csv` and `<dir>/<stem>.jsonl`, creating `dir`.
pub fn write_metrics_files(rows: &[RoundMetrics], dir: &Path, stem: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv(rows, std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.csv")))?))?;
    write_jsonl(rows, std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.jsonl")))?))?;
    Ok(())
}
