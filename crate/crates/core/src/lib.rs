//! Dual-arm tethered-tool manipulation planning.

pub mod cable;
pub mod cmms;
pub mod collision;
pub mod grasp;
pub mod kinematics;
pub mod omms;
pub mod rrt;
pub mod scene;
pub mod se3;
pub mod workspace;

/// SplitMix64 finalizer: derive a stream-independent sub-seed, so parallel
/// work keyed by index stays deterministic.
pub(crate) fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
