//! Trustworthy digital objects: canonical packaging, sealing and chain
//! grounding, provenance and authenticity judgement, durable VM encodings,
//! and replicated repositories.

pub mod batch;
pub mod canonical;
pub mod digest;
pub mod error;
mod fsutil;
pub mod model;
pub mod provenance;
pub mod repository;
pub mod sample;
pub mod trust;
pub mod vm;

pub use canonical::{canonical_digest, decode, encode, CanonicalDocument};
pub use digest::{Digest, DigestAlgorithm};
pub use error::{Error, Result};
pub use model::{
    derive_version_id, new_tdo, validate_structure, BlobEncoding, ContentBlob, ExternalReference,
    MetadataRecord, MetadataSet, ProtectionBlock, RefTarget, TrustworthyDigitalObject, VersionId,
    Violation, WorkId,
};
pub use provenance::{
    derive_version, judge_authenticity, record_transformation, trace_history, verify_derivation,
    AuthenticityVerdict, Created, DeriveMode, DerivationStatement, GenrePolicy, HistoryEntry,
    ProvenanceStatement, ReferentResolver, TransformationRecord,
};
pub use repository::{
    audit_replicas, ingest, replicate, resolve_work, retrieve, scan_links, verify_all, AuditReport,
    LinkOutcome, LinkScanReport, RepositoryStore,
};
pub use trust::{
    generate_keypair, issue_certificate, seal_tdo, verify_seal, verify_tdo, Certificate,
    GroundingPath, KeyPair, PublicKey, Role, Seal, SignatureAlgorithm, TrustStore,
    VerificationReport,
};
pub use vm::{
    assemble, decode_content, disassemble, execute, replay_equivalent, shift_events, vm_self_description,
    vm_spec_ref, ExecutionResult, Halt, TimedEvent, VmProgram,
};
