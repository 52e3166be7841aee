//! Conservation-law traffic dynamics on a network of interconnected roads,
//! with receding-horizon boundary control solved as a quadratic program.

pub mod dynamics;
pub mod generate;
pub mod graph;
pub mod io;
pub mod mpc;
pub mod qp;
pub mod sim;
