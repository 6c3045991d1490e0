//! Active canonical-view selection and incremental object registration on a
//! simulated eye-in-hand tabletop rig.

pub mod augmenter;
pub mod bench;
pub mod capture;
pub mod detector;
pub mod explorer;
pub mod gov;
pub mod par;
pub mod renderer;
pub mod segmenter;
pub mod session;
pub mod store;
pub mod viewsphere;

/// 3-vector in millimetres (positions) or unitless (directions).
pub type Vec3 = nalgebra::Vector3<f64>;
/// 8-bit RGB triple.
pub type Rgb = [u8; 3];

/// Mix a base seed with a stream number (SplitMix64 finaliser), so derived
/// random streams are independent of evaluation order.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        ^ stream
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(0x6a09_e667_f3bc_c909);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
