//! Planar tool-use reinforcement-learning workbench.
//!
//! A three-joint gripper arm in a top-down arena must pick up a T, L or I
//! shaped tool and drag a disc object to the arena bottom. This crate holds
//! everything that is pure computation:
//!
//! * [`physics`]: deterministic fixed-step rigid-body engine with a
//!   sequential-impulse contact solver.
//! * [`reward`]: subtask predicates and the piecewise shaped reward.
//! * [`env`]: episode layer (spawning, observations, the rasterizer).
//! * [`net`]: shared-trunk Gaussian policy / value network with hand-written
//!   backward passes.
//! * [`rl`]: advantage estimation, losses, the Kronecker-factored natural
//!   gradient optimizer and the synchronous update step.
//! * [`behavior`]: trajectory-log schema and the behavior detectors.
//!
//! The crate is `no_std` (with `alloc`); file formats, threading and the CLI
//! live in the `toolrl` companion crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod behavior;
pub mod env;
pub mod hash;
pub mod linalg;
pub mod math;
pub mod net;
pub mod physics;
pub mod reward;
pub mod rl;

pub use math::Vec2;
