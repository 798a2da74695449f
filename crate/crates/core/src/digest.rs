//! Algorithm-tagged digests.
//!
//! Every digest carries the tag of the algorithm that produced it, so objects
//! written today stay checkable after the default algorithm is retired.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest as _, Sha256, Sha512};

use crate::error::{Error, Result};

/// Registered digest algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DigestAlgorithm {
    Sha256,
    Sha512,
}

impl DigestAlgorithm {
    pub const DEFAULT: DigestAlgorithm = DigestAlgorithm::Sha256;

    pub fn tag(self) -> &'static str {
        match self {
            DigestAlgorithm::Sha256 => "sha256",
            DigestAlgorithm::Sha512 => "sha512",
        }
    }

    pub fn output_len(self) -> usize {
        match self {
            DigestAlgorithm::Sha256 => 32,
            DigestAlgorithm::Sha512 => 64,
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "sha256" => Ok(DigestAlgorithm::Sha256),
            "sha512" => Ok(DigestAlgorithm::Sha512),
            other => Err(Error::UnknownAlgorithm(other.to_string())),
        }
    }

    pub fn hash(self, bytes: &[u8]) -> Digest {
        let out = match self {
            DigestAlgorithm::Sha256 => Sha256::digest(bytes).to_vec(),
            DigestAlgorithm::Sha512 => Sha512::digest(bytes).to_vec(),
        };
        Digest {
            algorithm: self,
            bytes: out,
        }
    }
}

/// A digest value together with the algorithm that produced it.
///
/// Text form is `<tag>:<lowercase hex>`, e.g. `sha256:e3b0c4...`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest {
    algorithm: DigestAlgorithm,
    bytes: Vec<u8>,
}

impl Digest {
    pub fn new(algorithm: DigestAlgorithm, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() != algorithm.output_len() {
            return Err(Error::Key(format!(
                "{} digest must be {} bytes, got {}",
                algorithm.tag(),
                algorithm.output_len(),
                bytes.len()
            )));
        }
        Ok(Digest { algorithm, bytes })
    }

    /// Digest of `bytes` under the default algorithm.
    pub fn of(bytes: &[u8]) -> Self {
        DigestAlgorithm::DEFAULT.hash(bytes)
    }

    pub fn algorithm(&self) -> DigestAlgorithm {
        self.algorithm
    }

    pub fn algorithm_tag(&self) -> &'static str {
        self.algorithm.tag()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    /// Recompute over `bytes` with this digest's algorithm and compare.
    pub fn matches(&self, bytes: &[u8]) -> bool {
        self.algorithm.hash(bytes) == *self
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.algorithm.tag(), self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({self})")
    }
}

impl FromStr for Digest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (tag, hex_part) = s
            .split_once(':')
            .ok_or_else(|| Error::Key(format!("digest `{s}` lacks an algorithm tag")))?;
        let algorithm = DigestAlgorithm::from_tag(tag)?;
        if !is_lower_hex(hex_part) {
            return Err(Error::Key(format!("digest `{s}` is not lowercase hex")));
        }
        let bytes = hex::decode(hex_part).map_err(|e| Error::Key(e.to_string()))?;
        Digest::new(algorithm, bytes)
    }
}

pub(crate) fn is_lower_hex(s: &str) -> bool {
    !s.is_empty()
        && s.len().is_multiple_of(2)
        && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}
