//! Kernel of the chemkernel runtime.
//!
//! A *chemical algorithm* is a control loop written as a set of reactions
//! `Σα·s →k Σβ·s`. This crate holds everything that does not need an
//! operating system: the network model and its analyses, the text DSL, the
//! stochastic next-reaction engine, the fluid (ODE) view, a bit-exact model of
//! the register-mapped hardware engine and the packet-queue harness that ties
//! reaction outputs to queues.
//!
//! The std companion crate `chemkernel` adds file formats and the CLI.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cadl;
pub mod engine;
pub mod fluid;
pub mod hw;
pub mod network;
pub mod patch;
pub mod rng;
pub mod ssa;
pub mod traffic;

pub use engine::{FiredEvent, InjectionEvent, ReactionEngine, Step, Trace, TraceConfig, TraceRecord};
pub use network::{EngineLimits, ReactionNetwork, ReactionId, SpeciesId};
pub use patch::ReconfigPatch;
pub use ssa::Engine;
