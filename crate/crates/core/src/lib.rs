#![allow(clippy::needless_range_loop)]

pub mod gnn;
pub mod graph_io;
mod linalg;
pub mod ot;
pub mod tensor;
pub mod train;
