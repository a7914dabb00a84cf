//! Random stream derivation.
//!
//! Every run has one root seed. Replicate `r` draws from PCG64 (XSL-RR
//! 128/64) with initial state `seed` and stream `r`, so replicates are
//! independent streams and any single replicate can be regenerated alone.

pub use rand_pcg::Pcg64;

pub fn replicate_rng(seed: u64, replicate: u64) -> Pcg64 {
    Pcg64::new(seed as u128, replicate as u128)
}
