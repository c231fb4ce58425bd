use num_bigint::BigUint;
use num_traits::Zero;
use rayon::prelude::*;

use super::ProtocolError;
use crate::encoding::FixedPointCodec;
use crate::graph::EncryptedSlice;
use crate::hex::HexInt;
use crate::paillier::{Ciphertext, PublicKey};
use crate::transport::tcp::PartyListener;
use crate::transport::{Decimal, Link, ProtocolMessage};

/// What a party holds: its own slice, the public key and the codec.
#[derive(Debug, Clone)]
pub struct PartyState {
    pub party_id: usize,
    pub slice: EncryptedSlice,
    pub public_key: PublicKey,
    pub codec: FixedPointCodec,
}

/// The per-round public values.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundBroadcast {
    pub round: u64,
    pub ranks: Vec<f64>,
    pub out_degree: Vec<u64>,
}

impl RoundBroadcast {
    pub fn to_message(&self) -> ProtocolMessage {
        ProtocolMessage::RoundBroadcast {
            round: self.round,
            ranks: self.ranks.iter().copied().map(Decimal).collect(),
            out_degree: self.out_degree.clone(),
        }
    }
}

/// A party's scaled columns: `cipher_columns[k][i]` is row `i` of global
/// column `column_indices[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedContribution {
    pub party_id: usize,
    pub round: u64,
    pub column_indices: Vec<usize>,
    pub cipher_columns: Vec<Vec<Ciphertext>>,
}

impl EncryptedContribution {
    pub fn to_message(&self) -> ProtocolMessage {
        ProtocolMessage::Contribution {
            round: self.round,
            party_id: self.party_id,
            columns: self.column_indices.clone(),
            cipher_cols: self
                .cipher_columns
                .iter()
                .map(|col| col.iter().map(|c| HexInt(c.value().clone())).collect())
                .collect(),
        }
    }

    pub fn from_message(
        message: &ProtocolMessage,
        public_key: &PublicKey,
    ) -> Result<Self, ProtocolError> {
        let ProtocolMessage::Contribution { round, party_id, columns, cipher_cols } = message else {
            return Err(ProtocolError::Unexpected {
                round: message.round(),
                detail: format!("expected a contribution, got {}", message.kind()),
            });
        };
        if columns.len() != cipher_cols.len() {
            return Err(ProtocolError::Unexpected {
                round: *round,
                detail: "column count does not match cipher_cols".into(),
            });
        }
        let cipher_columns = cipher_cols
            .iter()
            .map(|col| {
                col.iter()
                    .map(|HexInt(v)| public_key.ciphertext_from_value(v.clone()))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EncryptedContribution {
            party_id: *party_id,
            round: *round,
            column_indices: columns.clone(),
            cipher_columns,
        })
    }
}

/// Row scalars `round(ranks[i] / out_degree[i] * scale)`, zero for rows
/// without out-links.
pub(crate) fn row_scalars(
    codec: &FixedPointCodec,
    ranks: &[f64],
    out_degree: &[u64],
) -> Result<Vec<BigUint>, ProtocolError> {
    ranks
        .iter()
        .zip(out_degree)
        .map(|(&rank, &degree)| {
            if degree == 0 {
                Ok(BigUint::zero())
            } else {
                Ok(codec.encode(rank / degree as f64)?)
            }
        })
        .collect()
}

/// Scales every entry of row `i` of the party's encrypted slice by the
/// fixed-point encoding of `ranks[i] / out_degree[i]`, using only the
/// public key.
pub fn secure_int_matrix(
    party: &PartyState,
    broadcast: &RoundBroadcast,
) -> Result<EncryptedContribution, ProtocolError> {
    let m = party.slice.row_count();
    if broadcast.ranks.len() != m || broadcast.out_degree.len() != m {
        return Err(ProtocolError::Unexpected {
            round: broadcast.round,
            detail: format!(
                "broadcast has {} ranks and {} degrees for a slice of {m} rows",
                broadcast.ranks.len(),
                broadcast.out_degree.len()
            ),
        });
    }
    let scalars = row_scalars(&party.codec, &broadcast.ranks, &broadcast.out_degree)?;
    let pk = &party.public_key;
    let slice = &party.slice;
    let cipher_columns = (0..slice.column_indices.len())
        .into_par_iter()
        .map(|k| {
            (0..m)
                .map(|i| pk.scalar_mul(&slice.cipher_matrix[i][k], &scalars[i]))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EncryptedContribution {
        party_id: party.party_id,
        round: broadcast.round,
        column_indices: slice.column_indices.clone(),
        cipher_columns,
    })
}

fn unexpected(message: &ProtocolMessage, wanted: &str) -> ProtocolError {
    ProtocolError::Unexpected {
        round: message.round(),
        detail: format!("expected {wanted}, got {}", message.kind()),
    }
}

fn setup_party<L: Link + ?Sized>(link: &mut L) -> Result<PartyState, ProtocolError> {
    let setup = link.recv().map_err(ProtocolError::transport(0))?;
    let ProtocolMessage::Setup { pk, codec, party_id, .. } = &setup else {
        return Err(unexpected(&setup, "setup"));
    };
    let public_key = PublicKey::from_parts(pk.n.0.clone(), pk.g.0.clone())?;
    let codec = FixedPointCodec::new(codec.base, codec.exp, public_key.n().clone())?;
    let party_id = *party_id;

    let delivery = link.recv().map_err(ProtocolError::transport(0))?;
    let ProtocolMessage::SliceDelivery { columns, cipher_rows, .. } = delivery else {
        return Err(unexpected(&delivery, "slice"));
    };
    let slice = EncryptedSlice::from_parts(party_id, columns, cipher_rows, &public_key)?;
    Ok(PartyState { party_id, slice, public_key, codec })
}

/// Runs one party to completion over `link`: setup, slice delivery, then a
/// contribution per broadcast until shutdown. Returns the number of rounds
/// served.
pub fn serve_party<L: Link + ?Sized>(link: &mut L) -> Result<u64, ProtocolError> {
    let result = serve_inner(link);
    if let Err(err) = &result {
        if !matches!(err, ProtocolError::Transport { .. } | ProtocolError::PartyFailed { .. }) {
            let _ = link.send(&ProtocolMessage::Error { round: 0, detail: err.to_string() });
        }
    }
    link.close();
    result
}

fn serve_inner<L: Link + ?Sized>(link: &mut L) -> Result<u64, ProtocolError> {
    let party = setup_party(link)?;
    let mut last_round = 0u64;
    let mut served = 0u64;
    loop {
        let message = link.recv().map_err(ProtocolError::transport(last_round))?;
        match message {
            ProtocolMessage::RoundBroadcast { round, ranks, out_degree } => {
                if round <= last_round {
                    return Err(ProtocolError::Unexpected {
                        round,
                        detail: format!("round {round} after round {last_round}"),
                    });
                }
                let broadcast = RoundBroadcast {
                    round,
                    ranks: ranks.into_iter().map(|Decimal(r)| r).collect(),
                    out_degree,
                };
                let contribution = match secure_int_matrix(&party, &broadcast) {
                    Ok(c) => c,
                    Err(err) => {
                        let _ = link.send(&ProtocolMessage::Error { round, detail: err.to_string() });
                        return Err(err);
                    }
                };
                link.send(&contribution.to_message()).map_err(ProtocolError::transport(round))?;
                last_round = round;
                served += 1;
            }
            ProtocolMessage::Shutdown { .. } => return Ok(served),
            ProtocolMessage::Error { round, detail } => {
                return Err(ProtocolError::PartyFailed {
                    party: party.party_id,
                    detail: format!("coordinator aborted in round {round}: {detail}"),
                })
            }
            other => return Err(unexpected(&other, "broadcast or shutdown")),
        }
    }
}

/// Accepts a single coordinator connection on `listener` and serves it.
pub fn serve_tcp_party(listener: &PartyListener) -> Result<u64, ProtocolError> {
    let mut link = listener.accept().map_err(ProtocolError::transport(0))?;
    serve_party(&mut link)
}
