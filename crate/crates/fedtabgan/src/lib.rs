//! File formats, TCP transport and the command-line front end for
//! [`fedtabgan_core`].

pub mod cli;
pub mod io;
pub mod model_file;
pub mod net;
pub mod plan_file;

pub use fedtabgan_core;
