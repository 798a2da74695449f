//! Bit-exact TDO/1 serialization.
//!
//! Digests and signatures are only meaningful over one byte sequence per
//! logical object, so the decoder accepts nothing but the encoder's exact
//! output. The normative grammar lives in `docs/format-tdo1`.

mod markup;
mod tdo;

pub use markup::{decode_canonical, parse, Element};
pub(crate) use tdo::{cert_from_el, cert_to_el, encode_payload_block, seal_message};

use base64::Engine;

use crate::digest::Digest;
use crate::error::{Error, Result};
use crate::model::{check, TrustworthyDigitalObject};

/// Format tag carried by the root element of every document.
pub const FORMAT: &str = "TDO/1";

/// A byte sequence in TDO/1 canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalDocument(Vec<u8>);

impl CanonicalDocument {
    pub fn from_element(el: &Element) -> Self {
        CanonicalDocument(el.to_bytes())
    }

    /// Accept `bytes` only if they are already canonical.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        decode_canonical(&bytes)?;
        Ok(CanonicalDocument(bytes))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn digest(&self) -> Digest {
        canonical_digest(&self.0)
    }
}

impl AsRef<[u8]> for CanonicalDocument {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

/// Encode a structurally valid TDO.
pub fn encode(tdo: &TrustworthyDigitalObject) -> Result<CanonicalDocument> {
    check(tdo)?;
    Ok(CanonicalDocument(tdo::tdo_to_el(tdo, true).to_bytes()))
}

/// Decode canonical bytes. Structural invariants (such as the version id
/// matching the payload) are not checked here; see
/// [`crate::model::validate_structure`].
pub fn decode(bytes: &[u8]) -> Result<TrustworthyDigitalObject> {
    let root = markup::parse(bytes)?;
    let tdo = tdo::tdo_from_el(&root)?;
    let canonical = tdo::tdo_to_el(&tdo, true).to_bytes();
    if canonical != bytes {
        let offset = canonical
            .iter()
            .zip(bytes)
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| canonical.len().min(bytes.len()));
        return Err(Error::Canonicality { offset });
    }
    Ok(tdo)
}

/// Digest of exact bytes under the default algorithm.
pub fn canonical_digest(bytes: &[u8]) -> Digest {
    Digest::of(bytes)
}

pub(crate) fn b64(bytes: &[u8]) -> String {
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

pub(crate) fn unb64(el: &Element, s: &str) -> Result<Vec<u8>> {
    base64::engine::general_purpose::STANDARD
        .decode(s)
        .map_err(|e| el.err(format!("bad base64: {e}")))
}

/// Root element of a standalone document, checked for name and format tag.
pub(crate) fn document_root(bytes: &[u8], name: &str) -> Result<Element> {
    let root = decode_canonical(bytes)?;
    root.expect_name(name)?;
    if root.req("format")? != FORMAT {
        return Err(root.err(format!("unsupported format, expected {FORMAT}")));
    }
    Ok(root)
}
