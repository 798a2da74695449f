//! Public-key sealing and recursive certificate-chain verification.
//!
//! A chain is grounded either in an institution's per-year root key
//! ([`KeyEpoch`]) or, without any certificate authority, in a key shared
//! directly between acquainted peers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use ed25519_dalek::{Signer, SigningKey, VerifyingKey};

use crate::canonical::{self, cert_to_el, document_root, CanonicalDocument, Element};
use crate::digest::Digest;
use crate::error::{Error, Result};
use crate::model::{check, TrustworthyDigitalObject};

/// Registered signature algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignatureAlgorithm {
    Ed25519,
}

impl SignatureAlgorithm {
    pub const DEFAULT: SignatureAlgorithm = SignatureAlgorithm::Ed25519;

    pub fn tag(self) -> &'static str {
        match self {
            SignatureAlgorithm::Ed25519 => "ed25519",
        }
    }

    pub fn public_key_len(self) -> usize {
        match self {
            SignatureAlgorithm::Ed25519 => ed25519_dalek::PUBLIC_KEY_LENGTH,
        }
    }

    pub fn secret_key_len(self) -> usize {
        match self {
            SignatureAlgorithm::Ed25519 => ed25519_dalek::SECRET_KEY_LENGTH,
        }
    }

    /// Strict verification; never panics on malformed keys or signatures.
    pub fn verify(self, public_key: &[u8], message: &[u8], signature: &[u8]) -> bool {
        match self {
            SignatureAlgorithm::Ed25519 => {
                let Ok(key_bytes) = <[u8; 32]>::try_from(public_key) else {
                    return false;
                };
                let Ok(key) = VerifyingKey::from_bytes(&key_bytes) else {
                    return false;
                };
                let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else {
                    return false;
                };
                key.verify_strict(message, &sig).is_ok()
            }
        }
    }
}

impl FromStr for SignatureAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ed25519" => Ok(SignatureAlgorithm::Ed25519),
            other => Err(Error::UnknownAlgorithm(other.to_string())),
        }
    }
}

impl fmt::Display for SignatureAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// An algorithm-tagged public key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey {
    pub algorithm: SignatureAlgorithm,
    pub bytes: Vec<u8>,
}

impl PublicKey {
    pub fn new(algorithm: SignatureAlgorithm, bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() != algorithm.public_key_len() {
            return Err(Error::Key(format!(
                "{algorithm} public key must be {} bytes",
                algorithm.public_key_len()
            )));
        }
        Ok(PublicKey { algorithm, bytes })
    }

    pub fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        self.algorithm.verify(&self.bytes, message, signature)
    }

    /// Key file: `[tag len][tag]P[key bytes]`.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        key_file(self.algorithm, b'P', &self.bytes)
    }

    /// Accepts a public key file or a secret key file (the public half is
    /// derived).
    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self> {
        let (algorithm, kind, body) = parse_key_file(bytes)?;
        match kind {
            b'P' => PublicKey::new(algorithm, body.to_vec()),
            b'S' => Ok(KeyPair::from_secret(algorithm, body)?.public()),
            _ => Err(Error::Key("unknown key kind".into())),
        }
    }
}

fn key_file(algorithm: SignatureAlgorithm, kind: u8, body: &[u8]) -> Vec<u8> {
    let tag = algorithm.tag().as_bytes();
    let mut out = Vec::with_capacity(2 + tag.len() + body.len());
    out.push(tag.len() as u8);
    out.extend_from_slice(tag);
    out.push(kind);
    out.extend_from_slice(body);
    out
}

fn parse_key_file(bytes: &[u8]) -> Result<(SignatureAlgorithm, u8, &[u8])> {
    let (&tag_len, rest) = bytes
        .split_first()
        .ok_or_else(|| Error::Key("empty key file".into()))?;
    let tag_len = tag_len as usize;
    if rest.len() < tag_len + 1 {
        return Err(Error::Key("truncated key file".into()));
    }
    let tag = std::str::from_utf8(&rest[..tag_len])
        .map_err(|_| Error::Key("key file tag is not ASCII".into()))?;
    let algorithm: SignatureAlgorithm = tag.parse()?;
    Ok((algorithm, rest[tag_len], &rest[tag_len + 1..]))
}

/// A signing key pair. The private half never appears in any TDO.
#[derive(Clone)]
pub struct KeyPair {
    algorithm: SignatureAlgorithm,
    signing: SigningKey,
}

impl fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyPair")
            .field("algorithm", &self.algorithm)
            .field("public_key", &hex::encode(self.public_key_bytes()))
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn generate(algorithm: SignatureAlgorithm) -> Self {
        match algorithm {
            SignatureAlgorithm::Ed25519 => KeyPair {
                algorithm,
                signing: SigningKey::generate(&mut rand_core::OsRng),
            },
        }
    }

    pub fn from_secret(algorithm: SignatureAlgorithm, secret: &[u8]) -> Result<Self> {
        let seed = <[u8; 32]>::try_from(secret).map_err(|_| {
            Error::Key(format!(
                "{algorithm} secret key must be {} bytes",
                algorithm.secret_key_len()
            ))
        })?;
        Ok(KeyPair {
            algorithm,
            signing: SigningKey::from_bytes(&seed),
        })
    }

    pub fn algorithm_tag(&self) -> &'static str {
        self.algorithm.tag()
    }

    pub fn algorithm(&self) -> SignatureAlgorithm {
        self.algorithm
    }

    pub fn public_key_bytes(&self) -> Vec<u8> {
        self.signing.verifying_key().to_bytes().to_vec()
    }

    pub fn private_key_bytes(&self) -> Vec<u8> {
        self.signing.to_bytes().to_vec()
    }

    pub fn public(&self) -> PublicKey {
        PublicKey {
            algorithm: self.algorithm,
            bytes: self.public_key_bytes(),
        }
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        self.signing.sign(message).to_bytes().to_vec()
    }

    pub fn to_file_bytes(&self) -> Vec<u8> {
        key_file(self.algorithm, b'S', &self.private_key_bytes())
    }

    pub fn from_file_bytes(bytes: &[u8]) -> Result<Self> {
        match parse_key_file(bytes)? {
            (algorithm, b'S', body) => KeyPair::from_secret(algorithm, body),
            _ => Err(Error::Key("not a secret key file".into())),
        }
    }
}

/// Generate a fresh key pair for a registered algorithm tag.
pub fn generate_keypair(algorithm_tag: &str) -> Result<KeyPair> {
    Ok(KeyPair::generate(algorithm_tag.parse()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Root,
    Witness,
    Editor,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Root => "root",
            Role::Witness => "witness",
            Role::Editor => "editor",
        }
    }

    fn may_issue(self) -> bool {
        self != Role::Editor
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root" => Ok(Role::Root),
            "witness" => Ok(Role::Witness),
            "editor" => Ok(Role::Editor),
            other => Err(Error::Role(format!("unknown role `{other}`"))),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A signed attestation binding a public key to a name and role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    /// Algorithm of the subject key.
    pub algorithm: SignatureAlgorithm,
    pub subject_public_key: Vec<u8>,
    pub subject_name: String,
    pub role: Role,
    /// Digest of the issuing certificate; absent only for roots.
    pub issuer_digest: Option<Digest>,
    pub valid_from: NaiveDate,
    pub valid_to: NaiveDate,
    pub signature: Vec<u8>,
}

impl Certificate {
    pub fn subject_key(&self) -> PublicKey {
        PublicKey {
            algorithm: self.algorithm,
            bytes: self.subject_public_key.clone(),
        }
    }

    /// Digest of the full canonical certificate element, signature included.
    pub fn digest(&self) -> Digest {
        Digest::of(&cert_to_el(self, true).to_bytes())
    }

    /// The bytes the issuer signs.
    pub fn to_be_signed(&self) -> Vec<u8> {
        cert_to_el(self, false).to_bytes()
    }

    pub fn covers(&self, date: NaiveDate) -> bool {
        self.valid_from <= date && date <= self.valid_to
    }

    pub fn verify_issued_by(&self, issuer_key: &PublicKey) -> bool {
        issuer_key.verify(&self.to_be_signed(), &self.signature)
    }

    pub fn to_document(&self) -> CanonicalDocument {
        CanonicalDocument::from_element(&cert_to_el(self, true))
    }

    pub fn from_document(bytes: &[u8]) -> Result<Self> {
        let el = canonical::decode_canonical(bytes)?;
        canonical::cert_from_el(&el)
    }
}

/// Issue a certificate. Roots are self-attested: no issuer certificate, and
/// the subject key must be the issuer's own key.
pub fn issue_certificate(
    issuer: &KeyPair,
    issuer_cert: Option<&Certificate>,
    subject_public_key: &PublicKey,
    subject_name: &str,
    role: Role,
    valid_from: NaiveDate,
    valid_to: NaiveDate,
) -> Result<Certificate> {
    if valid_to < valid_from {
        return Err(Error::EmptyValidity {
            valid_from,
            valid_to,
        });
    }
    let issuer_digest = match (role, issuer_cert) {
        (Role::Root, None) => {
            if *subject_public_key != issuer.public() {
                return Err(Error::Role(
                    "a root certificate must attest its issuer's own key".into(),
                ));
            }
            None
        }
        (Role::Root, Some(_)) => {
            return Err(Error::Role("root certificates have no issuer certificate".into()))
        }
        (_, None) => {
            return Err(Error::Role(format!(
                "{role} certificate requires an issuer certificate"
            )))
        }
        (_, Some(ic)) => {
            if ic.subject_key() != issuer.public() {
                return Err(Error::Key(
                    "issuer key does not match the issuer certificate".into(),
                ));
            }
            if !ic.role.may_issue() {
                return Err(Error::Role(format!("{} certificates cannot issue", ic.role)));
            }
            Some(ic.digest())
        }
    };
    let mut cert = Certificate {
        algorithm: subject_public_key.algorithm,
        subject_public_key: subject_public_key.bytes.clone(),
        subject_name: subject_name.to_string(),
        role,
        issuer_digest,
        valid_from,
        valid_to,
        signature: Vec::new(),
    };
    cert.signature = issuer.sign(&cert.to_be_signed());
    Ok(cert)
}

/// The seal over a TDO: a signature plus the complete chain, leaf first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seal {
    pub chain: Vec<Certificate>,
    pub seal_date: NaiveDate,
    pub signature: Vec<u8>,
}

impl Seal {
    pub fn signer_certificate(&self) -> Option<&Certificate> {
        self.chain.first()
    }

    pub fn root_certificate(&self) -> Option<&Certificate> {
        self.chain.last()
    }
}

fn chain_linkage(chain: &[Certificate]) -> Result<()> {
    let Some(last) = chain.last() else {
        return Err(Error::BrokenChain("empty chain".into()));
    };
    for (i, pair) in chain.windows(2).enumerate() {
        if pair[0].issuer_digest.as_ref() != Some(&pair[1].digest()) {
            return Err(Error::BrokenChain(format!(
                "certificate {i} (`{}`) is not issued by certificate {} (`{}`)",
                pair[0].subject_name,
                i + 1,
                pair[1].subject_name
            )));
        }
    }
    if last.role != Role::Root || last.issuer_digest.is_some() {
        return Err(Error::BrokenChain(format!(
            "chain ends at `{}`, which is not a root",
            last.subject_name
        )));
    }
    Ok(())
}

/// Seal an unsealed, structurally valid TDO.
///
/// `issuers` are the certificates above `signer_cert`, leaf to root; it is
/// empty when `signer_cert` is itself a self-attested peer root.
pub fn seal_tdo(
    tdo: &TrustworthyDigitalObject,
    signer: &KeyPair,
    signer_cert: &Certificate,
    issuers: &[Certificate],
    seal_date: NaiveDate,
) -> Result<TrustworthyDigitalObject> {
    if tdo.seal.is_some() {
        return Err(Error::AlreadySealed);
    }
    check(tdo)?;
    if signer_cert.subject_key() != signer.public() {
        return Err(Error::Key("signing key does not match the signer certificate".into()));
    }
    let mut chain = Vec::with_capacity(issuers.len() + 1);
    chain.push(signer_cert.clone());
    chain.extend_from_slice(issuers);
    chain_linkage(&chain)?;
    if !signer_cert.covers(seal_date) {
        return Err(Error::SealDateOutsideValidity {
            date: seal_date,
            valid_from: signer_cert.valid_from,
            valid_to: signer_cert.valid_to,
        });
    }
    let mut sealed = tdo.clone();
    sealed.seal = Some(Seal {
        chain,
        seal_date,
        signature: Vec::new(),
    });
    let message = canonical::seal_message(&sealed);
    if let Some(seal) = sealed.seal.as_mut() {
        seal.signature = signer.sign(&message);
    }
    Ok(sealed)
}

/// The bytes a seal signature covers: the canonical document with only the
/// seal's `signature` attribute left out.
pub fn seal_message(tdo: &TrustworthyDigitalObject) -> Vec<u8> {
    canonical::seal_message(tdo)
}

/// A published institutional root key for one calendar year.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyEpoch {
    pub institution: String,
    pub year: i32,
    pub public_key: PublicKey,
}

/// Root epochs and directly shared peer keys. Updates return new stores.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrustStore {
    epochs: BTreeMap<(String, i32), PublicKey>,
    peers: BTreeMap<String, PublicKey>,
}

impl TrustStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn epoch(&self, institution: &str, year: i32) -> Option<&PublicKey> {
        self.epochs.get(&(institution.to_string(), year))
    }

    pub fn peer(&self, name: &str) -> Option<&PublicKey> {
        self.peers.get(name)
    }

    pub fn epochs(&self) -> impl Iterator<Item = KeyEpoch> + '_ {
        self.epochs.iter().map(|((institution, year), key)| KeyEpoch {
            institution: institution.clone(),
            year: *year,
            public_key: key.clone(),
        })
    }

    pub fn peers(&self) -> impl Iterator<Item = (&str, &PublicKey)> {
        self.peers.iter().map(|(n, k)| (n.as_str(), k))
    }

    pub fn register_root_epoch(
        &self,
        institution: &str,
        year: i32,
        public_key: PublicKey,
    ) -> Result<TrustStore> {
        let key = (institution.to_string(), year);
        if self.epochs.contains_key(&key) {
            return Err(Error::DuplicateEpoch {
                institution: institution.to_string(),
                year,
            });
        }
        let mut next = self.clone();
        next.epochs.insert(key, public_key);
        Ok(next)
    }

    pub fn add_peer_key(&self, name: &str, public_key: PublicKey) -> Result<TrustStore> {
        if self.peers.contains_key(name) {
            return Err(Error::DuplicatePeer(name.to_string()));
        }
        let mut next = self.clone();
        next.peers.insert(name.to_string(), public_key);
        Ok(next)
    }

    pub fn remove_peer_key(&self, name: &str) -> TrustStore {
        let mut next = self.clone();
        next.peers.remove(name);
        next
    }

    pub fn to_document(&self) -> CanonicalDocument {
        let epochs = self.epochs.iter().map(|((institution, year), key)| {
            Element::new("epoch")
                .attr("alg", key.algorithm.tag())
                .attr("institution", institution.clone())
                .attr("key", canonical::b64(&key.bytes))
                .attr("year", year.to_string())
        });
        let peers = self.peers.iter().map(|(name, key)| {
            Element::new("peer")
                .attr("alg", key.algorithm.tag())
                .attr("key", canonical::b64(&key.bytes))
                .attr("name", name.clone())
        });
        CanonicalDocument::from_element(
            &Element::new("trust-store")
                .attr("format", canonical::FORMAT)
                .child(Element::new("epochs").children(epochs))
                .child(Element::new("peers").children(peers)),
        )
    }

    pub fn from_document(bytes: &[u8]) -> Result<Self> {
        let root = document_root(bytes, "trust-store")?;
        root.only_attrs(&["format"])?;
        let [epochs_el, peers_el] = root.children.as_slice() else {
            return Err(root.err("expected <epochs> and <peers>"));
        };
        epochs_el.expect_name("epochs")?;
        peers_el.expect_name("peers")?;
        let mut store = TrustStore::new();
        for e in epochs_el.children_named("epoch")? {
            e.only_attrs(&["alg", "institution", "key", "year"])?;
            let key = PublicKey::new(e.parse_req("alg")?, canonical::unb64(e, e.req("key")?)?)?;
            store = store.register_root_epoch(e.req("institution")?, e.parse_req("year")?, key)?;
        }
        for p in peers_el.children_named("peer")? {
            p.only_attrs(&["alg", "key", "name"])?;
            let key = PublicKey::new(p.parse_req("alg")?, canonical::unb64(p, p.req("key")?)?)?;
            store = store.add_peer_key(p.req("name")?, key)?;
        }
        Ok(store)
    }

    /// Load from disk; a missing file yields an empty store.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read(path) {
            Ok(bytes) => Self::from_document(&bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(TrustStore::new()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, self.to_document().as_bytes())
    }
}

/// Which of the two grounding terminals accepted a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundingPath {
    /// The root key is a registered institution key for the seal year.
    RootEpoch,
    /// The signer's key is a directly shared peer key.
    PeerKey,
}

/// Per-check outcome of [`verify_seal`]. Accepts iff every check passes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerificationReport {
    pub decode_ok: bool,
    pub signature_ok: bool,
    pub chain_ok: bool,
    pub grounding_ok: bool,
    pub date_ok: bool,
    pub grounded_via: Option<GroundingPath>,
    pub reasons: Vec<String>,
}

impl VerificationReport {
    pub fn accepted(&self) -> bool {
        self.decode_ok && self.signature_ok && self.chain_ok && self.grounding_ok && self.date_ok
    }

    /// `(check name, passed)` in report order.
    pub fn checks(&self) -> [(&'static str, bool); 5] {
        [
            ("decode", self.decode_ok),
            ("signature", self.signature_ok),
            ("chain", self.chain_ok),
            ("grounding", self.grounding_ok),
            ("date", self.date_ok),
        ]
    }
}

/// Verify sealed bytes entirely offline against a trust store.
pub fn verify_seal(sealed_bytes: &[u8], trust: &TrustStore) -> VerificationReport {
    let mut report = VerificationReport::default();
    let tdo = match canonical::decode(sealed_bytes) {
        Ok(t) => t,
        Err(e) => {
            report.reasons.push(format!("decode: {e}"));
            return report;
        }
    };
    verify_decoded(&tdo, trust, report)
}

/// [`verify_seal`] over an already decoded object.
pub fn verify_tdo(tdo: &TrustworthyDigitalObject, trust: &TrustStore) -> VerificationReport {
    verify_decoded(tdo, trust, VerificationReport::default())
}

fn verify_decoded(
    tdo: &TrustworthyDigitalObject,
    trust: &TrustStore,
    mut report: VerificationReport,
) -> VerificationReport {
    let violations = crate::model::validate_structure(tdo);
    if !violations.is_empty() {
        report
            .reasons
            .extend(violations.iter().map(|v| format!("structure: {v}")));
        return report;
    }
    report.decode_ok = true;

    let Some(seal) = &tdo.seal else {
        report.reasons.push("seal: absent".into());
        return report;
    };
    let Some(signer) = seal.signer_certificate() else {
        report.reasons.push("seal: empty chain".into());
        return report;
    };

    report.signature_ok = signer
        .subject_key()
        .verify(&canonical::seal_message(tdo), &seal.signature);
    if !report.signature_ok {
        report.reasons.push("signature: seal signature does not verify".into());
    }

    report.chain_ok = true;
    for (i, pair) in seal.chain.windows(2).enumerate() {
        let (child, parent) = (&pair[0], &pair[1]);
        if child.issuer_digest.as_ref() != Some(&parent.digest()) {
            report.chain_ok = false;
            report
                .reasons
                .push(format!("chain: certificate {i} does not name certificate {} as issuer", i + 1));
        } else if !child.verify_issued_by(&parent.subject_key()) {
            report.chain_ok = false;
            report
                .reasons
                .push(format!("chain: certificate {i} has an invalid issuer signature"));
        }
        if !parent.role.may_issue() {
            report.chain_ok = false;
            report
                .reasons
                .push(format!("chain: certificate {} is an editor and cannot issue", i + 1));
        }
        if child.role == Role::Root {
            report.chain_ok = false;
            report.reasons.push(format!("chain: root certificate at position {i}"));
        }
    }
    let root = &seal.chain[seal.chain.len() - 1];
    if root.role != Role::Root || root.issuer_digest.is_some() {
        report.chain_ok = false;
        report.reasons.push("chain: does not terminate at a root".into());
    } else if !root.verify_issued_by(&root.subject_key()) {
        report.chain_ok = false;
        report.reasons.push("chain: root self-attestation does not verify".into());
    }

    report.date_ok = seal.chain.iter().all(|c| c.covers(seal.seal_date));
    if !report.date_ok {
        for (i, c) in seal.chain.iter().enumerate().filter(|(_, c)| !c.covers(seal.seal_date)) {
            report.reasons.push(format!(
                "date: seal date {} outside certificate {i} validity {} .. {}",
                seal.seal_date, c.valid_from, c.valid_to
            ));
        }
    }

    let year = seal.seal_date.year();
    if trust.epoch(&root.subject_name, year) == Some(&root.subject_key()) {
        report.grounded_via = Some(GroundingPath::RootEpoch);
    } else if trust.peer(&signer.subject_name) == Some(&signer.subject_key()) {
        report.grounded_via = Some(GroundingPath::PeerKey);
    }
    report.grounding_ok = report.grounded_via.is_some();
    if !report.grounding_ok {
        report.reasons.push(format!(
            "grounding: no {year} root epoch for `{}` and `{}` is not a trusted peer",
            root.subject_name, signer.subject_name
        ));
    }
    report
}

#[cfg(test)]
mod tests;
