//! Sub-seed derivation: a single master seed expands into independent
//! component seeds through splitmix64 mixing, so draws stay reproducible and
//! uncorrelated across components.

/// Standard splitmix64 output function.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for a named stream.
pub fn derive(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream.wrapping_add(0xA0761D6478BD642F)))
}

/// Stream tags for the experiment pipeline.
pub mod stream {
    /// Ground-truth draw from the prior.
    pub const X0: u64 = 1;
    /// Measurement noise.
    pub const DEGRADE: u64 = 2;
    /// Reverse-trajectory initialization.
    pub const INIT: u64 = 3;
    /// Risk-lab trials.
    pub const RISK: u64 = 4;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_stable() {
        let master = 42;
        let a = derive(master, stream::X0);
        let b = derive(master, stream::DEGRADE);
        let c = derive(master, stream::INIT);
        assert_ne!(a, b);
        assert_ne!(b, c);
        assert_eq!(a, derive(master, stream::X0));
    }
}
