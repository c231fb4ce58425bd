//! End-to-end acceptance run. Criteria run one after another (the timing
//! grid must not share the machine with other work) and each prints a single
//! PASS or FAIL line. The process exits non-zero if any criterion fails.

use std::collections::HashSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use cryptarank::bench::{run_bench, to_markdown, total_time, BenchGrid};
use cryptarank::graph::{encrypt_slices, reassemble_matrix, AdjacencyGraph, GraphError, PartitionPlan};
use cryptarank::oracle::{self, IterationParams};
use cryptarank::paillier::keygen;
use cryptarank::protocol::{audit_transcript, replay_transcript, run_local, ProtocolParams, RunReport};
use cryptarank::transport::transcript::{Direction, Transcript};
use cryptarank::transport::{Backend, ProtocolMessage};
use cryptarank::verify::verify;
use num_bigint::{BigUint, RandBigInt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn params(party_count: usize, key_bits: u64) -> ProtocolParams {
    ProtocolParams { party_count, key_bits, ..ProtocolParams::default() }
}

/// Seeds whose 20-node, p = 0.2 graph satisfies `keep`, in seed order.
fn seeds_where(count: usize, keep: impl Fn(&AdjacencyGraph) -> bool) -> Vec<(u64, AdjacencyGraph)> {
    (0u64..)
        .map(|s| (s, AdjacencyGraph::random(20, 0.2, s).unwrap()))
        .filter(|(_, g)| keep(g))
        .take(count)
        .collect()
}

fn oracle_converges(g: &AdjacencyGraph) -> bool {
    let p = IterationParams::default();
    oracle::pagerank(g, p.damping, p.tolerance, p.max_iter).unwrap().converged(p.tolerance)
}

fn oracle_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    for (seed, graph) in seeds_where(25, oracle_converges) {
        let report = verify(&graph, &ProtocolParams { seed, ..params(3, 512) }, Backend::InProc)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        worst = worst.max(report.max_abs_diff);
        if report.max_abs_diff > 1e-3 || !report.replay_exact {
            failures.push(format!(
                "seed {seed}: max_abs {:.3e}, replay_exact {}",
                report.max_abs_diff, report.replay_exact
            ));
        }
    }
    check(
        failures.is_empty(),
        format!("25 graphs, worst max-abs {worst:.3e} (limit 1e-3), replay exact; {failures:?}"),
    )
}

fn homomorphic_suite() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let kp = keygen(128, &mut rng).map_err(|e| e.to_string())?;
    let pk = &kp.public;
    let n = pk.n();
    let mut failures = 0;
    let pairs = 1000;
    for _ in 0..pairs {
        let a = rng.gen_biguint_below(n);
        let b = rng.gen_biguint_below(n);
        let k = rng.gen_biguint_below(n);
        let ca = pk.encrypt(&a, &mut rng).unwrap();
        let cb = pk.encrypt(&b, &mut rng).unwrap();
        let sum = kp.private.decrypt(&pk.add(&ca, &cb).unwrap()).unwrap();
        let scaled = kp.private.decrypt(&pk.scalar_mul(&ca, &k).unwrap()).unwrap();
        if sum != (&a + &b) % n {
            failures += 1;
        }
        if scaled != (&a * &k) % n {
            failures += 1;
        }
    }
    check(failures == 0, format!("{pairs} pairs at 128 bits, {failures} identity failures"))
}

fn probabilistic_encryption() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let kp = keygen(64, &mut rng).map_err(|e| e.to_string())?;
    let m = BigUint::from(42u32);
    let cts: Vec<_> = (0..100).map(|_| kp.public.encrypt(&m, &mut rng).unwrap()).collect();
    let distinct: HashSet<_> = cts.iter().map(|c| c.value().clone()).collect();
    let all_decrypt = cts.iter().all(|c| kp.private.decrypt(c).unwrap() == m);
    check(
        distinct.len() == 100 && all_decrypt,
        format!("{} distinct of 100 at 64 bits, all decrypt: {all_decrypt}", distinct.len()),
    )
}

fn partition_axioms() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let kp = keygen(64, &mut rng).map_err(|e| e.to_string())?;
    for case in 0..200u64 {
        let m = rng.gen_range(2..=50);
        let k = rng.gen_range(2..=m);
        let graph = AdjacencyGraph::random(m, rng.gen_range(0.05..0.95), case).unwrap();
        let plan = PartitionPlan::random(m, k, case).unwrap();
        let mut owners = vec![0usize; m];
        for p in 0..k {
            let cols = plan.columns_of(p);
            if cols.is_empty() {
                return Err(format!("case {case}: party {p} owns no column"));
            }
            for j in cols {
                owners[j] += 1;
            }
        }
        if owners.iter().any(|&c| c != 1) {
            return Err(format!("case {case}: ownership counts {owners:?}"));
        }
        let slices = encrypt_slices(&graph, &plan, &kp.public, &mut rng).unwrap();
        let matrix = reassemble_matrix(&slices, &kp.private).unwrap();
        let expected: Vec<Vec<BigUint>> =
            graph.rows().into_iter().map(|r| r.into_iter().map(BigUint::from).collect()).collect();
        if matrix != expected {
            return Err(format!("case {case}: reassembled matrix differs (m={m}, k={k})"));
        }
    }
    Ok("200 cases: complete, disjoint, reassembly bit-exact".into())
}

fn no_self_loops() -> Outcome {
    let rejected = [
        matches!(AdjacencyGraph::from_edge_list(&[(0, 1), (2, 2)], 3), Err(GraphError::SelfLoop(2))),
        AdjacencyGraph::from_matrix(&[vec![1, 0], vec![0, 0]]).is_err(),
        AdjacencyGraph::parse_edge_list("3\n0 1\n1 1\n").is_err(),
    ];
    let mut bad_seeds = Vec::new();
    for seed in 0..100u64 {
        let p = [0.2, 0.5, 0.99][seed as usize % 3];
        let g = AdjacencyGraph::random(20, p, seed).unwrap();
        if (0..20).any(|i| g.entry(i, i) != 0) {
            bad_seeds.push(seed);
        }
    }
    check(
        rejected.iter().all(|&r| r) && bad_seeds.is_empty(),
        format!("self-loop constructions rejected {rejected:?}; diagonal nonzero on seeds {bad_seeds:?}"),
    )
}

fn party_count_invariance() -> Outcome {
    let graph = AdjacencyGraph::random(20, 0.2, 6).unwrap();
    let runs: Vec<RunReport> = [1, 3, 5]
        .iter()
        .map(|&k| run_local(&graph, &params(k, 512), Backend::InProc, None).map(|o| o.report))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let bits = |r: &RunReport| r.pagerank.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let same = bits(&runs[0]) == bits(&runs[1]) && bits(&runs[0]) == bits(&runs[2]);
    check(
        same,
        format!("k=1,3,5 over {} iterations: bit-identical {same}", runs[0].iterations),
    )
}

fn table_trend() -> Outcome {
    let graph = AdjacencyGraph::random(10, 0.2, 7).unwrap();
    let base = ProtocolParams { max_iter: 10, ..ProtocolParams::default() };
    let grid = BenchGrid::default();
    let cells = run_bench(&graph, &base, &grid, Backend::InProc, 3);
    print!("{}", to_markdown(&cells));
    let mut problems = Vec::new();
    for &p in &grid.parties {
        let times: Vec<Option<f64>> = grid.key_bits.iter().map(|&b| total_time(&cells, p, b)).collect();
        let Some(times) = times.into_iter().collect::<Option<Vec<f64>>>() else {
            problems.push(format!("row {p}: a cell failed"));
            continue;
        };
        if times.windows(2).any(|w| w[1] <= w[0]) {
            problems.push(format!("row {p}: not strictly increasing {times:?}"));
        }
        let ratio = times[3] / times[2];
        if ratio < 3.0 {
            problems.push(format!("row {p}: t(1024)/t(512) = {ratio:.2}"));
        }
    }
    let ratios: Vec<String> = grid
        .parties
        .iter()
        .filter_map(|&p| Some(format!("{:.1}", total_time(&cells, p, 1024)? / total_time(&cells, p, 512)?)))
        .collect();
    check(
        problems.is_empty(),
        format!("4x4 grid on 10 nodes, t(1024)/t(512) per row {ratios:?}; {problems:?}"),
    )
}

fn convergence_contract() -> Outcome {
    let mut converged = 0;
    let mut slow = Vec::new();
    for (seed, graph) in seeds_where(25, AdjacencyGraph::is_strongly_connected) {
        let outcome = run_local(&graph, &ProtocolParams { seed, ..params(3, 512) }, Backend::InProc, None)
            .map_err(|e| format!("seed {seed}: {e}"))?;
        if outcome.report.converged && outcome.final_state().last_delta < 1e-6 {
            converged += 1;
        } else {
            slow.push(seed);
        }
    }
    // Where the protocol did not converge, tell apart the exact iteration and
    // the quantized one (which the protocol matches bit for bit).
    let mut diagnosis = Vec::new();
    for &seed in &slow {
        let graph = AdjacencyGraph::random(20, 0.2, seed).unwrap();
        let p = IterationParams::default();
        let exact = oracle::pagerank(&graph, p.damping, p.tolerance, p.max_iter).unwrap();
        let codec = cryptarank::encoding::FixedPointCodec::new(10, 6, BigUint::from(1u32) << 512u32).unwrap();
        let replay = oracle::quantized_pagerank_history(&graph, &p, &codec).unwrap();
        let tail: Vec<String> = replay.iter().rev().take(3).map(|s| format!("{:.2e}", s.last_delta)).collect();
        diagnosis.push(format!(
            "seed {seed}: exact oracle converged at {}, quantized replay last deltas {tail:?}",
            exact.iteration
        ));
    }
    let empty = AdjacencyGraph::from_edge_list(&[], 20).unwrap();
    let outcome = run_local(&empty, &params(3, 512), Backend::InProc, None).map_err(|e| e.to_string())?;
    let floor = (1.0 - 0.85) / 20.0;
    let empty_ok = outcome.history[0].ranks.iter().all(|&r| r == floor) && outcome.report.converged;
    check(
        converged >= 24 && empty_ok,
        format!(
            "{converged}/25 strongly connected graphs converged (not: {slow:?}); empty graph at \
             (1-d)/m after iteration 1: {empty_ok}; {diagnosis:?}"
        ),
    )
}

fn plaintext_fields(r: &RunReport) -> (Vec<u64>, usize, bool, u64, usize) {
    (r.pagerank.iter().map(|x| x.to_bits()).collect(), r.iterations, r.converged, r.key_bits, r.parties)
}

/// Runs once over each backend, recording the TCP run, and returns the
/// transcript for the audit.
fn transport_equivalence(recorded: &mut Option<(Transcript, cryptarank::protocol::RunOutcome)>) -> Outcome {
    let graph = AdjacencyGraph::random(20, 0.2, 9).unwrap();
    let p = ProtocolParams { seed: 9, ..params(3, 512) };
    let inproc = run_local(&graph, &p, Backend::InProc, None).map_err(|e| e.to_string())?;
    let transcript = Transcript::new();
    let tcp = run_local(&graph, &p, Backend::Tcp, Some(&transcript)).map_err(|e| e.to_string())?;
    let same = plaintext_fields(&inproc.report) == plaintext_fields(&tcp.report)
        && inproc.report.codec == tcp.report.codec;
    let coordinator = tcp.initial_coordinator(&graph, &p).map_err(|e| e.to_string())?;
    let replayed = replay_transcript(&transcript.entries(), coordinator).map_err(|e| e.to_string())?;
    let replay_same = replayed == tcp.history;
    let detail = format!(
        "inproc vs tcp report fields equal: {same}; replay of {} recorded rounds identical: {replay_same}",
        replayed.len()
    );
    *recorded = Some((transcript, tcp));
    check(same && replay_same, detail)
}

fn privacy_audit(recorded: &Option<(Transcript, cryptarank::protocol::RunOutcome)>) -> Outcome {
    let Some((transcript, outcome)) = recorded else {
        return Err("no recorded run".into());
    };
    let entries = transcript.entries();
    let violations = audit_transcript(&entries, &outcome.keypair, &outcome.plan);
    let to_party = entries.iter().filter(|e| e.direction == Direction::ToParty).count();

    // The audit must notice a bare adjacency bit smuggled into a slice.
    let mut tampered = entries.clone();
    let slice = tampered
        .iter_mut()
        .find_map(|e| match &mut e.message {
            ProtocolMessage::SliceDelivery { cipher_rows, .. } => Some(cipher_rows),
            _ => None,
        })
        .ok_or("transcript has no slice")?;
    slice[0][0] = cryptarank::hex::HexInt(BigUint::from(1u32));
    let caught = !audit_transcript(&tampered, &outcome.keypair, &outcome.plan).is_empty();

    check(
        violations.is_empty() && caught,
        format!(
            "{to_party} party-bound messages, {} violations; tampered slice detected: {caught}",
            violations.len()
        ),
    )
}

fn main() {
    let mut recorded = None;
    let criteria: Vec<(u32, &str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        (1, "oracle equivalence", Box::new(oracle_equivalence)),
        (2, "homomorphic identities", Box::new(homomorphic_suite)),
        (3, "probabilistic encryption", Box::new(probabilistic_encryption)),
        (4, "partition axioms", Box::new(partition_axioms)),
        (5, "zero diagonal", Box::new(no_self_loops)),
        (6, "party-count invariance", Box::new(party_count_invariance)),
        (7, "key-size timing trend", Box::new(table_trend)),
        (8, "convergence contract", Box::new(convergence_contract)),
        (9, "transport equivalence", Box::new(|| transport_equivalence(&mut recorded))),
    ];
    let mut failed = 0;
    let mut report = |id: u32, name: &str, outcome: Outcome, secs: f64| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag} [{name}] ({secs:.1} s) {detail}");
    };
    for (id, name, run) in criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
        report(id, name, outcome, started.elapsed().as_secs_f64());
    }
    let started = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| privacy_audit(&recorded)))
        .unwrap_or_else(|p| Err(format!("panicked: {:?}", p.downcast_ref::<String>())));
    report(10, "privacy audit", outcome, started.elapsed().as_secs_f64());

    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
