//! Cross-check of an encrypted run against the plaintext oracle.
//!
//! Two comparisons are made. Against the exact oracle, the encrypted ranks
//! may drift by at most `10 * m * base^-exponent` per iteration, since each
//! of up to `m` summed shares carries half a quantization step of rounding
//! error. Against the quantized replay the run must agree bit for bit at
//! every iteration.

use serde::{Deserialize, Serialize};

use crate::encoding::FixedPointCodec;
use crate::graph::AdjacencyGraph;
use crate::oracle::{self, l1_distance, max_abs_distance};
use crate::protocol::{run_local, ProtocolError, ProtocolParams, RunReport};
use crate::transport::Backend;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub nodes: usize,
    pub iterations: usize,
    pub converged: bool,
    pub oracle_iterations: usize,
    pub oracle_converged: bool,
    pub max_abs_diff: f64,
    pub l1_diff: f64,
    pub bound: f64,
    /// Every per-iteration rank vector equals the quantized replay exactly.
    pub replay_exact: bool,
    pub replay_max_abs_diff: f64,
    pub pass: bool,
    pub protocol_ranks: Vec<f64>,
    pub oracle_ranks: Vec<f64>,
    pub run: RunReport,
}

/// `10 * m * base^-exponent * iterations`.
pub fn error_bound(node_count: usize, params: &ProtocolParams, iterations: usize) -> f64 {
    10.0 * node_count as f64 * params.scale.resolution() * iterations as f64
}

pub fn verify(
    graph: &AdjacencyGraph,
    params: &ProtocolParams,
    backend: Backend,
) -> Result<VerifyReport, ProtocolError> {
    let outcome = run_local(graph, params, backend, None)?;
    let exact = oracle::pagerank(graph, params.damping, params.tolerance, params.max_iter)?;
    let codec = FixedPointCodec::from_config(params.scale, outcome.keypair.public.n().clone())?;
    let replay = oracle::quantized_pagerank_history(graph, &params.iteration(), &codec)?;

    let protocol_ranks = outcome.report.pagerank.clone();
    let replay_exact = replay.len() == outcome.history.len()
        && replay.iter().zip(&outcome.history).all(|(a, b)| {
            a.iteration == b.iteration
                && a.ranks.iter().zip(&b.ranks).all(|(x, y)| x.to_bits() == y.to_bits())
        });
    let replay_final = &replay.last().expect("max_iter >= 1").ranks;
    let max_abs_diff = max_abs_distance(&protocol_ranks, &exact.ranks);
    let bound = error_bound(graph.node_count(), params, outcome.report.iterations);
    Ok(VerifyReport {
        nodes: graph.node_count(),
        iterations: outcome.report.iterations,
        converged: outcome.report.converged,
        oracle_iterations: exact.iteration,
        oracle_converged: exact.converged(params.tolerance),
        max_abs_diff,
        l1_diff: l1_distance(&protocol_ranks, &exact.ranks),
        bound,
        replay_exact,
        replay_max_abs_diff: max_abs_distance(&protocol_ranks, replay_final),
        pass: max_abs_diff <= bound,
        protocol_ranks,
        oracle_ranks: exact.ranks,
        run: outcome.report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::ScaleConfig;

    #[test]
    fn two_cycle_within_one_step() {
        let g = AdjacencyGraph::from_edge_list(&[(0, 1), (1, 0)], 2).unwrap();
        let params = ProtocolParams { key_bits: 64, party_count: 2, ..ProtocolParams::default() };
        let report = verify(&g, &params, Backend::InProc).unwrap();
        assert!(report.max_abs_diff <= 1e-6);
        assert!(report.replay_exact);
        assert!(report.pass);
    }

    #[test]
    fn coarse_scale_widens_the_gap() {
        let g = AdjacencyGraph::random(12, 0.3, 6).unwrap();
        let fine = ProtocolParams { key_bits: 128, ..ProtocolParams::default() };
        let coarse = ProtocolParams { scale: ScaleConfig { base: 10, exponent: 2 }, ..fine };
        let fine = verify(&g, &fine, Backend::InProc).unwrap();
        let coarse = verify(&g, &coarse, Backend::InProc).unwrap();
        assert!(coarse.max_abs_diff > fine.max_abs_diff);
        assert!(coarse.replay_exact && fine.replay_exact);
        assert_eq!(coarse.pass, coarse.max_abs_diff <= coarse.bound);
        assert!(fine.pass);
    }
}
