use rayon::prelude::*;

use super::party::{EncryptedContribution, RoundBroadcast};
use super::ProtocolError;
use crate::encoding::FixedPointCodec;
use crate::graph::{AdjacencyGraph, PartitionPlan};
use crate::oracle::{l1_distance, IterationParams, PageRankState};
use crate::paillier::{Ciphertext, KeyPair};

/// Places every contributed column at its global index, giving the full
/// `m x m` matrix `T[i][j]`. Each party must contribute exactly once and
/// exactly the columns the plan assigns it.
pub fn merge_contributions(
    contributions: &[EncryptedContribution],
    plan: &PartitionPlan,
) -> Result<Vec<Vec<Ciphertext>>, ProtocolError> {
    let m = plan.node_count();
    let k = plan.party_count();
    let mut by_party: Vec<Option<&EncryptedContribution>> = vec![None; k];
    for c in contributions {
        if c.party_id >= k {
            return Err(ProtocolError::Unexpected {
                round: c.round,
                detail: format!("unknown party {}", c.party_id),
            });
        }
        if by_party[c.party_id].replace(c).is_some() {
            return Err(ProtocolError::DuplicateParty(c.party_id));
        }
    }
    let mut columns: Vec<Option<&Vec<Ciphertext>>> = vec![None; m];
    for (party, slot) in by_party.iter().enumerate() {
        let contribution = slot.ok_or(ProtocolError::MissingParty(party))?;
        if contribution.column_indices.len() != contribution.cipher_columns.len() {
            return Err(ProtocolError::Unexpected {
                round: contribution.round,
                detail: format!("party {party} sent mismatched column data"),
            });
        }
        for (&j, column) in contribution.column_indices.iter().zip(&contribution.cipher_columns) {
            if j >= m || plan.owner(j) != party {
                return Err(ProtocolError::Unexpected {
                    round: contribution.round,
                    detail: format!("party {party} contributed column {j} it does not own"),
                });
            }
            if column.len() != m {
                return Err(ProtocolError::Unexpected {
                    round: contribution.round,
                    detail: format!("column {j} has {} rows, expected {m}", column.len()),
                });
            }
            if columns[j].replace(column).is_some() {
                return Err(ProtocolError::DuplicateColumn(j));
            }
        }
    }
    let columns = columns
        .into_iter()
        .enumerate()
        .map(|(j, c)| c.ok_or(ProtocolError::MissingColumn(j)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..m).map(|i| columns.iter().map(|col| col[i].clone()).collect()).collect())
}

/// The key holder: owns the graph and the private key, decrypts merged
/// contributions and applies the rank update.
#[derive(Debug, Clone)]
pub struct Coordinator {
    keypair: KeyPair,
    graph: AdjacencyGraph,
    plan: PartitionPlan,
    codec: FixedPointCodec,
    params: IterationParams,
    state: PageRankState,
}

impl Coordinator {
    pub fn new(
        keypair: KeyPair,
        graph: AdjacencyGraph,
        plan: PartitionPlan,
        codec: FixedPointCodec,
        params: IterationParams,
    ) -> Result<Self, ProtocolError> {
        params.validate()?;
        if plan.node_count() != graph.node_count() {
            return Err(ProtocolError::Config(format!(
                "plan covers {} columns, graph has {} nodes",
                plan.node_count(),
                graph.node_count()
            )));
        }
        codec.check_headroom(graph.node_count())?;
        let state = PageRankState::uniform(graph.node_count());
        Ok(Coordinator { keypair, graph, plan, codec, params, state })
    }

    pub fn state(&self) -> &PageRankState {
        &self.state
    }

    pub fn keypair(&self) -> &KeyPair {
        &self.keypair
    }

    pub fn plan(&self) -> &PartitionPlan {
        &self.plan
    }

    pub fn codec(&self) -> &FixedPointCodec {
        &self.codec
    }

    pub fn graph(&self) -> &AdjacencyGraph {
        &self.graph
    }

    pub fn params(&self) -> &IterationParams {
        &self.params
    }

    pub fn converged(&self) -> bool {
        self.state.converged(self.params.tolerance)
    }

    pub fn finished(&self) -> bool {
        self.converged() || self.state.iteration >= self.params.max_iter
    }

    /// The broadcast that opens the next round.
    pub fn broadcast(&self) -> RoundBroadcast {
        RoundBroadcast {
            round: self.state.iteration as u64 + 1,
            ranks: self.state.ranks.clone(),
            out_degree: self.graph.out_degree().to_vec(),
        }
    }

    /// Merges, decrypts and decodes one round of contributions, then applies
    /// `ranks[i] = (1 - d) / m + d * sum_j T[j][i]`. On error the state is
    /// left untouched.
    pub fn round(
        &mut self,
        contributions: &[EncryptedContribution],
    ) -> Result<&PageRankState, ProtocolError> {
        let expected_round = self.state.iteration as u64 + 1;
        if let Some(stale) = contributions.iter().find(|c| c.round != expected_round) {
            return Err(ProtocolError::Unexpected {
                round: expected_round,
                detail: format!(
                    "party {} answered round {} during round {expected_round}",
                    stale.party_id, stale.round
                ),
            });
        }
        let merged = merge_contributions(contributions, &self.plan)?;
        let private = &self.keypair.private;
        let codec = &self.codec;
        // One quantization step of slack above 1.
        let ceiling = 1.0 + codec.config().resolution();
        let values: Vec<Vec<f64>> = merged
            .par_iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let value = codec.decode(&private.decrypt(c)?)?;
                        if !(0.0..=ceiling).contains(&value) {
                            return Err(ProtocolError::DecodedOutOfRange { row: i, col: j, value });
                        }
                        Ok(value)
                    })
                    .collect::<Result<Vec<f64>, ProtocolError>>()
            })
            .collect::<Result<_, _>>()?;

        let m = self.graph.node_count();
        let d = self.params.damping;
        let teleport = (1.0 - d) / m as f64;
        let ranks: Vec<f64> = (0..m)
            .map(|i| {
                let mut inflow = 0.0;
                for row in &values {
                    inflow += row[i];
                }
                teleport + d * inflow
            })
            .collect();
        self.state = PageRankState {
            last_delta: l1_distance(&ranks, &self.state.ranks),
            ranks,
            iteration: self.state.iteration + 1,
        };
        Ok(&self.state)
    }
}
