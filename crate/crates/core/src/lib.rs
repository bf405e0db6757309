#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abg_power;
pub mod analysis;
pub mod channel;
pub mod error;
pub mod io;
pub mod link;
pub mod nncore;
pub mod par;
pub mod recon;
pub mod rib;

pub use error::{Error, Result};
