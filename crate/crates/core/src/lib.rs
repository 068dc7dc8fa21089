// SPDX-License-Identifier: Apache-2.0

pub mod analysis;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod hamiltonians;
pub mod measurement;
pub mod spin;
pub mod verify;

pub use error::{Error, Result};
