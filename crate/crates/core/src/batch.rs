//! Data-parallel sweeps: exhaustive bit-flip tamper checks, batch seal
//! verification and whole-store verification.
//!
//! With the `parallel` feature (on by default) work is spread over a rayon
//! pool; without it, or with [`ExecutionMode::Sequential`], the same work
//! runs on the calling thread. Results are identical and in input order in
//! both modes.

use crate::trust::{verify_seal, TrustStore, VerificationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    Sequential,
    Parallel,
}

impl Default for ExecutionMode {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            ExecutionMode::Parallel
        } else {
            ExecutionMode::Sequential
        }
    }
}

/// Apply `f` to every item, preserving order.
pub fn map_items<T, R, F>(mode: ExecutionMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Apply `f` to every index in `0..n`, preserving order.
pub fn map_range<R, F>(mode: ExecutionMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecutionMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitFlipSweep {
    pub cases: usize,
    /// Flipped bit positions (byte * 8 + bit) that `verify_seal` still accepted.
    pub undetected: Vec<usize>,
}

impl BitFlipSweep {
    pub fn detected(&self) -> usize {
        self.cases - self.undetected.len()
    }

    pub fn all_detected(&self) -> bool {
        self.undetected.is_empty()
    }
}

pub fn flip_bit(bytes: &[u8], position: usize) -> Vec<u8> {
    let mut out = bytes.to_vec();
    out[position / 8] ^= 1 << (position % 8);
    out
}

/// Flip every bit of `sealed` in turn and verify each mutant.
pub fn bit_flip_sweep(sealed: &[u8], trust: &TrustStore) -> BitFlipSweep {
    bit_flip_sweep_with(ExecutionMode::default(), sealed, trust)
}

pub fn bit_flip_sweep_with(mode: ExecutionMode, sealed: &[u8], trust: &TrustStore) -> BitFlipSweep {
    let cases = sealed.len() * 8;
    let accepted = map_range(mode, cases, |pos| {
        verify_seal(&flip_bit(sealed, pos), trust).accepted()
    });
    BitFlipSweep {
        cases,
        undetected: accepted
            .into_iter()
            .enumerate()
            .filter_map(|(pos, ok)| ok.then_some(pos))
            .collect(),
    }
}

pub fn verify_many<B: AsRef<[u8]> + Sync>(
    mode: ExecutionMode,
    documents: &[B],
    trust: &TrustStore,
) -> Vec<VerificationReport> {
    map_items(mode, documents, |d| verify_seal(d.as_ref(), trust))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_on_ordering() {
        let seq = map_range(ExecutionMode::Sequential, 1000, |i| i * i);
        let par = map_range(ExecutionMode::Parallel, 1000, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn flip_bit_touches_one_bit() {
        assert_eq!(flip_bit(&[0, 0], 9), vec![0, 2]);
        assert_eq!(flip_bit(&[0xff], 7), vec![0x7f]);
    }
}
