//! Timing grid over party counts and key sizes.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::graph::AdjacencyGraph;
use crate::protocol::{run_local, PhaseTimings, ProtocolError, ProtocolParams};
use crate::transport::Backend;

pub const CSV_HEADER: &str = "parties,key_bits,keygen_s,encrypt_s,iterate_s,total_s,iterations,converged";

/// `PARTIES x KEY_BITS`, each side a comma list, e.g. `3,5,7,10x128,256,512,1024`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchGrid {
    pub parties: Vec<usize>,
    pub key_bits: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid grid {input:?}: {reason}")]
pub struct GridParseError {
    pub input: String,
    pub reason: String,
}

fn parse_list<T: FromStr>(input: &str, side: &str, whole: &str) -> Result<Vec<T>, GridParseError> {
    let fail = |reason: String| GridParseError { input: whole.to_string(), reason };
    let values = input
        .split(',')
        .map(|t| t.trim().parse::<T>().map_err(|_| fail(format!("bad {side} value {t:?}"))))
        .collect::<Result<Vec<T>, _>>()?;
    if values.is_empty() {
        return Err(fail(format!("no {side} values")));
    }
    Ok(values)
}

impl FromStr for BenchGrid {
    type Err = GridParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (left, right) = s.split_once(['x', 'X']).ok_or_else(|| GridParseError {
            input: s.to_string(),
            reason: "expected PARTIESxKEY_BITS".into(),
        })?;
        Ok(BenchGrid {
            parties: parse_list(left, "party", s)?,
            key_bits: parse_list(right, "key size", s)?,
        })
    }
}

impl Default for BenchGrid {
    fn default() -> Self {
        BenchGrid { parties: vec![3, 5, 7, 10], key_bits: vec![128, 256, 512, 1024] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub parties: usize,
    pub key_bits: u64,
    /// Per-phase medians over the repetitions.
    pub timings: PhaseTimings,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the cell could not run; timings are then zero.
    pub error: Option<String>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn run_cell(
    graph: &AdjacencyGraph,
    params: &ProtocolParams,
    backend: Backend,
    reps: usize,
) -> Result<BenchCell, ProtocolError> {
    let mut runs = Vec::with_capacity(reps);
    for _ in 0..reps.max(1) {
        runs.push(run_local(graph, params, backend, None)?.report);
    }
    let phase = |f: fn(&PhaseTimings) -> f64| median(runs.iter().map(|r| f(&r.elapsed_s)).collect());
    let last = runs.last().expect("reps >= 1");
    Ok(BenchCell {
        parties: params.party_count,
        key_bits: params.key_bits,
        timings: PhaseTimings {
            keygen: phase(|t| t.keygen),
            encrypt: phase(|t| t.encrypt),
            iterate: phase(|t| t.iterate),
            total: phase(|t| t.total),
        },
        iterations: last.iterations,
        converged: last.converged,
        error: None,
    })
}

/// Runs every grid cell `reps` times. Failed cells are kept with `error` set
/// so that one bad configuration does not discard the rest of the grid.
pub fn run_bench(
    graph: &AdjacencyGraph,
    base: &ProtocolParams,
    grid: &BenchGrid,
    backend: Backend,
    reps: usize,
) -> Vec<BenchCell> {
    let mut cells = Vec::new();
    for &parties in &grid.parties {
        for &key_bits in &grid.key_bits {
            let params = ProtocolParams { party_count: parties, key_bits, ..*base };
            cells.push(run_cell(graph, &params, backend, reps).unwrap_or_else(|e| BenchCell {
                parties,
                key_bits,
                timings: PhaseTimings::default(),
                iterations: 0,
                converged: false,
                error: Some(e.to_string()),
            }));
        }
    }
    cells
}

pub fn to_csv(cells: &[BenchCell]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells.iter().filter(|c| c.error.is_none()) {
        let t = &c.timings;
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{},{}",
            c.parties, c.key_bits, t.keygen, t.encrypt, t.iterate, t.total, c.iterations, c.converged
        );
    }
    out
}

/// Total time of the cell with `parties` and `key_bits`, if it ran.
pub fn total_time(cells: &[BenchCell], parties: usize, key_bits: u64) -> Option<f64> {
    cells
        .iter()
        .find(|c| c.parties == parties && c.key_bits == key_bits && c.error.is_none())
        .map(|c| c.timings.total)
}

/// One row per party count, one column per key size, plus `t(2l)/t(l)`
/// for every consecutive pair of sizes where one doubles the other.
pub fn to_markdown(cells: &[BenchCell]) -> String {
    let mut parties: Vec<usize> = cells.iter().map(|c| c.parties).collect();
    parties.dedup();
    parties.sort_unstable();
    parties.dedup();
    let mut bits: Vec<u64> = cells.iter().map(|c| c.key_bits).collect();
    bits.sort_unstable();
    bits.dedup();
    let doublings: Vec<(u64, u64)> =
        bits.windows(2).filter(|w| w[1] == 2 * w[0]).map(|w| (w[0], w[1])).collect();

    let mut out = String::from("| parties |");
    for b in &bits {
        let _ = write!(out, " {b}-bit total (s) |");
    }
    for (lo, hi) in &doublings {
        let _ = write!(out, " t({hi})/t({lo}) |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(bits.len() + doublings.len()));
    out.push('\n');
    for &p in &parties {
        let _ = write!(out, "| {p} |");
        for &b in &bits {
            match total_time(cells, p, b) {
                Some(t) => {
                    let _ = write!(out, " {t:.3} |");
                }
                None => out.push_str(" failed |"),
            }
        }
        for &(lo, hi) in &doublings {
            match (total_time(cells, p, lo), total_time(cells, p, hi)) {
                (Some(a), Some(b)) if a > 0.0 => {
                    let _ = write!(out, " {:.2} |", b / a);
                }
                _ => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    out
}
