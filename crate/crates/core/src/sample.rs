//! Deterministic sample identities and objects for demonstrations, tests
//! and benchmarks. Keys derive from fixed seeds and must never protect
//! real material.

use chrono::NaiveDate;

use crate::error::Result;
use crate::model::{new_tdo, ContentBlob, MetadataRecord, TrustworthyDigitalObject};
use crate::provenance::{Created, ProvenanceStatement};
use crate::trust::{issue_certificate, seal_tdo, Certificate, KeyPair, Role, SignatureAlgorithm, TrustStore};

pub fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

/// Default seal date used by samples.
pub fn seal_date() -> NaiveDate {
    date(2024, 6, 1)
}

pub fn keypair(seed: u8) -> KeyPair {
    KeyPair::from_secret(SignatureAlgorithm::Ed25519, &[seed; 32]).expect("32-byte seed")
}

/// An institution with a root, a witness issued by the root, and an editor
/// issued by the witness.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub institution: String,
    pub root_key: KeyPair,
    pub root_cert: Certificate,
    pub witness_key: KeyPair,
    pub witness_cert: Certificate,
    pub editor_key: KeyPair,
    pub editor_cert: Certificate,
}

impl Hierarchy {
    /// Certificates valid 2020-01-01 through 2030-12-31.
    pub fn new(institution: &str, seed: u8) -> Self {
        let (from, to) = (date(2020, 1, 1), date(2030, 12, 31));
        let root_key = keypair(seed);
        let witness_key = keypair(seed.wrapping_add(1));
        let editor_key = keypair(seed.wrapping_add(2));
        let root_cert =
            issue_certificate(&root_key, None, &root_key.public(), institution, Role::Root, from, to)
                .expect("root");
        let witness_cert = issue_certificate(
            &root_key,
            Some(&root_cert),
            &witness_key.public(),
            &format!("{institution} witness"),
            Role::Witness,
            from,
            to,
        )
        .expect("witness");
        let editor_cert = issue_certificate(
            &witness_key,
            Some(&witness_cert),
            &editor_key.public(),
            &format!("{institution} editor"),
            Role::Editor,
            from,
            to,
        )
        .expect("editor");
        Hierarchy {
            institution: institution.to_string(),
            root_key,
            root_cert,
            witness_key,
            witness_cert,
            editor_key,
            editor_cert,
        }
    }

    /// Certificates above the editor, leaf to root.
    pub fn issuers(&self) -> Vec<Certificate> {
        vec![self.witness_cert.clone(), self.root_cert.clone()]
    }

    /// A trust store holding this institution's root as its `year` epoch.
    pub fn trust_store(&self, year: i32) -> TrustStore {
        self.register(&TrustStore::new(), year)
    }

    pub fn register(&self, trust: &TrustStore, year: i32) -> TrustStore {
        trust
            .register_root_epoch(&self.institution, year, self.root_key.public())
            .expect("epoch not yet registered")
    }

    /// Seal as the editor.
    pub fn seal(&self, tdo: &TrustworthyDigitalObject, on: NaiveDate) -> Result<TrustworthyDigitalObject> {
        seal_tdo(tdo, &self.editor_key, &self.editor_cert, &self.issuers(), on)
    }
}

/// A party trusted directly through a shared key, sealing with a
/// self-attested certificate.
#[derive(Debug, Clone)]
pub struct Peer {
    pub name: String,
    pub key: KeyPair,
    pub cert: Certificate,
}

impl Peer {
    pub fn new(name: &str, seed: u8) -> Self {
        let key = keypair(seed);
        let cert = issue_certificate(
            &key,
            None,
            &key.public(),
            name,
            Role::Root,
            date(2020, 1, 1),
            date(2030, 12, 31),
        )
        .expect("self-attested certificate");
        Peer {
            name: name.to_string(),
            key,
            cert,
        }
    }

    pub fn trust_store(&self) -> TrustStore {
        TrustStore::new()
            .add_peer_key(&self.name, self.key.public())
            .expect("fresh store")
    }

    pub fn seal(&self, tdo: &TrustworthyDigitalObject, on: NaiveDate) -> Result<TrustworthyDigitalObject> {
        seal_tdo(tdo, &self.key, &self.cert, &[], on)
    }
}

pub fn statement(creator: &str, created: &[u8], event: &str) -> ProvenanceStatement {
    ProvenanceStatement {
        creator: creator.to_string(),
        created: Created::Digest(crate::digest::Digest::of(created)),
        event: event.to_string(),
    }
}

/// An unsealed single-blob text object with title and genre metadata.
pub fn text_object(title: &str, body: &str) -> TrustworthyDigitalObject {
    let body = body.as_bytes().to_vec();
    let stmt = statement("A. Author", &body, "first draft");
    new_tdo(
        vec![ContentBlob::raw("body.txt", "text/plain", body)],
        [
            MetadataRecord::builtin("title", title),
            MetadataRecord::builtin("genre", "report"),
            MetadataRecord::builtin("creator", "A. Author"),
        ],
        stmt,
    )
    .expect("sample object is well formed")
}
