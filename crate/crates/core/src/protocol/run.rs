use std::net::SocketAddr;
use std::thread;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::coordinator::Coordinator;
use super::party::{serve_party, EncryptedContribution};
use super::{ProtocolError, ProtocolParams};
use crate::encoding::{FixedPointCodec, ScaleConfig};
use crate::graph::{encrypt_slices, AdjacencyGraph, PartitionPlan};
use crate::hex::HexInt;
use crate::oracle::PageRankState;
use crate::paillier::{keygen, KeyPair};
use crate::transport::tcp::{PartyListener, TcpLink};
use crate::transport::transcript::Transcript;
use crate::transport::{inproc, Backend, Link, ProtocolMessage, WireCodec, WirePublicKey};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub keygen: f64,
    pub encrypt: f64,
    pub iterate: f64,
    pub total: f64,
}

/// The JSON summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub pagerank: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub key_bits: u64,
    pub parties: usize,
    pub codec: ScaleConfig,
    pub elapsed_s: PhaseTimings,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    /// State after every round, in order.
    pub history: Vec<PageRankState>,
    pub keypair: KeyPair,
    pub plan: PartitionPlan,
}

impl RunOutcome {
    pub fn final_state(&self) -> &PageRankState {
        self.history.last().expect("at least one round")
    }

    /// A fresh coordinator in the run's initial state, for transcript replay.
    pub fn initial_coordinator(
        &self,
        graph: &AdjacencyGraph,
        params: &ProtocolParams,
    ) -> Result<Coordinator, ProtocolError> {
        let codec = FixedPointCodec::from_config(params.scale, self.keypair.public.n().clone())?;
        Coordinator::new(
            self.keypair.clone(),
            graph.clone(),
            self.plan.clone(),
            codec,
            params.iteration(),
        )
    }
}

fn plan_for(graph: &AdjacencyGraph, params: &ProtocolParams) -> Result<PartitionPlan, ProtocolError> {
    if params.party_count == 1 {
        Ok(PartitionPlan::whole(graph.node_count()))
    } else {
        Ok(PartitionPlan::random(graph.node_count(), params.party_count, params.seed)?)
    }
}

/// Drives a complete run over one link per party, where link `p` reaches
/// party `p`. Any failure is reported to every party before returning.
pub fn run_protocol<L: Link, R: RngCore>(
    graph: &AdjacencyGraph,
    params: &ProtocolParams,
    links: &mut [L],
    rng: &mut R,
) -> Result<RunOutcome, ProtocolError> {
    let mut round = 0u64;
    let result = drive(graph, params, links, rng, &mut round);
    match &result {
        Ok(outcome) => {
            for link in links.iter_mut() {
                let _ = link.send(&ProtocolMessage::Shutdown {
                    round: outcome.report.iterations as u64,
                    detail: if outcome.report.converged { "converged" } else { "max_iter" }.into(),
                });
            }
        }
        Err(err) => {
            for link in links.iter_mut() {
                let _ = link.send(&ProtocolMessage::Error { round, detail: err.to_string() });
            }
        }
    }
    for link in links.iter_mut() {
        link.close();
    }
    result
}

fn drive<L: Link, R: RngCore>(
    graph: &AdjacencyGraph,
    params: &ProtocolParams,
    links: &mut [L],
    rng: &mut R,
    round: &mut u64,
) -> Result<RunOutcome, ProtocolError> {
    let m = graph.node_count();
    params.validate(m)?;
    if links.len() != params.party_count {
        return Err(ProtocolError::Config(format!(
            "{} parties configured but {} links supplied",
            params.party_count,
            links.len()
        )));
    }
    let started = Instant::now();

    let keypair = keygen(params.key_bits, rng)?;
    let codec = FixedPointCodec::from_config(params.scale, keypair.public.n().clone())?;
    codec.check_headroom(m)?;
    let keygen_s = started.elapsed().as_secs_f64();

    let encrypt_started = Instant::now();
    let plan = plan_for(graph, params)?;
    let slices = encrypt_slices(graph, &plan, &keypair.public, rng)?;
    let wire_pk = WirePublicKey {
        n: HexInt(keypair.public.n().clone()),
        g: HexInt(keypair.public.g().clone()),
    };
    let wire_codec = WireCodec { base: params.scale.base, exp: params.scale.exponent };
    for (link, slice) in links.iter_mut().zip(&slices) {
        let setup = ProtocolMessage::Setup {
            round: 0,
            pk: wire_pk.clone(),
            codec: wire_codec,
            party_id: slice.party_id,
        };
        link.send(&setup).map_err(ProtocolError::transport(0))?;
        let delivery = ProtocolMessage::SliceDelivery {
            round: 0,
            columns: slice.column_indices.clone(),
            cipher_rows: slice
                .cipher_matrix
                .iter()
                .map(|row| row.iter().map(|c| HexInt(c.value().clone())).collect())
                .collect(),
        };
        link.send(&delivery).map_err(ProtocolError::transport(0))?;
    }
    drop(slices);
    let encrypt_s = encrypt_started.elapsed().as_secs_f64();

    let iterate_started = Instant::now();
    let mut coordinator =
        Coordinator::new(keypair, graph.clone(), plan, codec, params.iteration())?;
    let mut history = Vec::new();
    while !coordinator.finished() {
        let broadcast = coordinator.broadcast();
        *round = broadcast.round;
        let message = broadcast.to_message();
        for link in links.iter_mut() {
            link.send(&message).map_err(ProtocolError::transport(*round))?;
        }
        let mut contributions = Vec::with_capacity(links.len());
        for (party, link) in links.iter_mut().enumerate() {
            let reply = link.recv().map_err(ProtocolError::transport(*round))?;
            if let ProtocolMessage::Error { detail, .. } = &reply {
                return Err(ProtocolError::PartyFailed { party, detail: detail.clone() });
            }
            let contribution =
                EncryptedContribution::from_message(&reply, &coordinator.keypair().public)?;
            if contribution.party_id != party {
                return Err(ProtocolError::Unexpected {
                    round: *round,
                    detail: format!("link {party} answered as party {}", contribution.party_id),
                });
            }
            contributions.push(contribution);
        }
        history.push(coordinator.round(&contributions)?.clone());
    }
    let iterate_s = iterate_started.elapsed().as_secs_f64();

    let state = coordinator.state().clone();
    let report = RunReport {
        pagerank: state.ranks.clone(),
        iterations: state.iteration,
        converged: coordinator.converged(),
        key_bits: params.key_bits,
        parties: params.party_count,
        codec: params.scale,
        elapsed_s: PhaseTimings {
            keygen: keygen_s,
            encrypt: encrypt_s,
            iterate: iterate_s,
            total: started.elapsed().as_secs_f64(),
        },
    };
    Ok(RunOutcome {
        report,
        history,
        keypair: coordinator.keypair().clone(),
        plan: coordinator.plan().clone(),
    })
}

/// Runs coordinator and parties inside this process, each party on its own
/// thread, over the chosen backend. TCP parties listen on loopback ports.
pub fn run_local(
    graph: &AdjacencyGraph,
    params: &ProtocolParams,
    backend: Backend,
    transcript: Option<&Transcript>,
) -> Result<RunOutcome, ProtocolError> {
    params.validate(graph.node_count())?;
    let k = params.party_count;
    let mut rng = ChaCha20Rng::from_entropy();
    thread::scope(|scope| {
        let mut handles = Vec::with_capacity(k);
        let mut links: Vec<Box<dyn Link>> = Vec::with_capacity(k);
        for party in 0..k {
            let coordinator_end: Box<dyn Link> = match backend {
                Backend::InProc => {
                    let (ours, mut theirs) = inproc::pair();
                    handles.push(scope.spawn(move || serve_party(&mut theirs)));
                    Box::new(ours)
                }
                Backend::Tcp => {
                    let listener = PartyListener::bind("127.0.0.1:0")
                        .map_err(ProtocolError::transport(0))?;
                    let addr = listener.local_addr().map_err(ProtocolError::transport(0))?;
                    handles.push(scope.spawn(move || {
                        let mut link = listener.accept().map_err(ProtocolError::transport(0))?;
                        serve_party(&mut link)
                    }));
                    Box::new(TcpLink::connect(addr).map_err(ProtocolError::transport(0))?)
                }
            };
            links.push(match transcript {
                Some(t) => Box::new(t.wrap(party, coordinator_end)),
                None => coordinator_end,
            });
        }
        let result = run_protocol(graph, params, &mut links, &mut rng);
        drop(links);
        let party_results: Vec<_> =
            handles.into_iter().map(|h| h.join().expect("party thread panicked")).collect();
        let outcome = result?;
        for (party, r) in party_results.into_iter().enumerate() {
            if let Err(err) = r {
                return Err(ProtocolError::PartyFailed { party, detail: err.to_string() });
            }
        }
        Ok(outcome)
    })
}

/// Dials parties that are already listening at `addrs` (party `p` at
/// `addrs[p]`) and runs the coordinator side.
pub fn run_remote(
    graph: &AdjacencyGraph,
    params: &ProtocolParams,
    addrs: &[SocketAddr],
    transcript: Option<&Transcript>,
) -> Result<RunOutcome, ProtocolError> {
    params.validate(graph.node_count())?;
    let mut links: Vec<Box<dyn Link>> = Vec::with_capacity(addrs.len());
    for (party, addr) in addrs.iter().enumerate() {
        let link = TcpLink::connect(addr).map_err(ProtocolError::transport(0))?;
        links.push(match transcript {
            Some(t) => Box::new(t.wrap(party, link)),
            None => Box::new(link),
        });
    }
    run_protocol(graph, params, &mut links, &mut ChaCha20Rng::from_entropy())
}
