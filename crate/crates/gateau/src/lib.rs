//! Graph-attention chess: a self-contained pipeline that plays, trains and
//! rates chess models whose network reads the board as a graph.
//!
//! The same parameter set runs on standard 8x8 chess and on the 5x5 Gardner
//! variant, because every tensor shape depends only on the embedding width
//! and block count, never on the board size.
//!
//! Crate map:
//! - [`chess`]: rules engine (move generation, termination, FEN/PGN).
//! - [`graph`]: the static per-variant move graph and feature encoding.
//! - [`tensor`]: minimal dense-array engine with reverse-mode gradients
//!   and the Adam optimizer.
//! - [`net`]: the edge-featured graph-attention network, its residual
//!   blocks, value/policy heads, and checkpoint files.
//! - [`mcts`]: Gumbel-style Monte Carlo tree search over exact dynamics.
//! - [`selfplay`]: the self-play training loop and replay frame window.
//! - [`elo`]: match tables, rating regression with delta-method confidence
//!   intervals, and adaptive matchmaking.
//! - [`cli`]: the command-line front end used by the `gateau` binary.
//!
//! See the crate examples for runnable entry points into each subsystem.

pub mod chess;


pub mod cli;
pub mod elo;
pub mod graph;
pub mod mcts;
pub mod net;
pub mod selfplay;
pub mod tensor;




