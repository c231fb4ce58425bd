//! Multi-party PageRank over Paillier-encrypted adjacency matrices.
//!
//! A coordinator owns a directed graph, splits its adjacency matrix by
//! columns across `k` parties, and hands each party only the encrypted
//! entries of its own columns. Every round the coordinator broadcasts the
//! current rank and out-degree vectors; each party scales its ciphertexts by
//! the fixed-point encoding of `rank[i] / out_degree[i]` using nothing but
//! the public key, and the coordinator decrypts, merges and applies the
//! damped PageRank update.
//!
//! The crate is organised bottom-up:
//!
//! - [`paillier`]: key generation, encryption, and the two homomorphic
//!   operations (ciphertext addition, plaintext scaling).
//! - [`encoding`]: fixed-point mapping between reals and the plaintext ring.
//! - [`graph`]: loop-free adjacency matrices, column partitions, and
//!   encrypted slices.
//! - [`oracle`]: plaintext PageRank, both exact and with the protocol's
//!   quantization replayed.
//! - [`protocol`]: coordinator and party logic, run drivers, transcript
//!   replay and the privacy audit.
//! - [`transport`]: message schema, length-prefixed JSON framing, and the
//!   in-process and TCP backends.
//! - [`verify`] and [`bench`]: the oracle cross-check and the key-size
//!   timing grid.
//!
//! ```
//! use cryptarank::graph::AdjacencyGraph;
//! use cryptarank::protocol::{run_local, ProtocolParams};
//! use cryptarank::transport::Backend;
//!
//! let graph = AdjacencyGraph::from_edge_list(&[(0, 1), (1, 2), (2, 0)], 3).unwrap();
//! let params = ProtocolParams { party_count: 2, key_bits: 128, ..ProtocolParams::default() };
//! let outcome = run_local(&graph, &params, Backend::InProc, None).unwrap();
//! assert!(outcome.report.converged);
//! for rank in &outcome.report.pagerank {
//!     assert!((rank - 1.0 / 3.0).abs() < 1e-6);
//! }
//! ```

pub mod bench;
pub mod encoding;
pub mod graph;
pub mod hex;
pub mod oracle;
pub mod paillier;
pub mod protocol;
pub mod transport;
pub mod verify;

// The guide under book/ is compiled as doc-tests so its snippets stay honest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/paillier.md")]
    mod paillier {}
    #[doc = include_str!("../../../book/src/fixed-point.md")]
    mod fixed_point {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/pagerank.md")]
    mod pagerank {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/transport.md")]
    mod transport {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
