//! Domain types shared by every module, plus self-certifying identifier
//! derivation and structural validation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::canonical;
use crate::digest::{is_lower_hex, Digest};
use crate::error::{Error, Result};
use crate::provenance::{ProvenanceStatement, TransformationRecord};
use crate::trust::{Role, Seal};
use crate::vm;

/// Keys of the built-in metadata schema. Records using these keys may leave
/// `scheme` empty; every other key must be namespaced.
pub const BUILTIN_METADATA_KEYS: [&str; 5] = ["creator", "date", "description", "genre", "title"];

/// Content-derived identifier of one version: lowercase hex digest of the
/// canonical payload block.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VersionId(String);

impl VersionId {
    pub fn from_digest(digest: &Digest) -> Self {
        VersionId(digest.to_hex())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for VersionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if is_lower_hex(s) && (s.len() == 64 || s.len() == 128) {
            Ok(VersionId(s.to_string()))
        } else {
            Err(Error::Key(format!("`{s}` is not a version identifier")))
        }
    }
}

impl fmt::Display for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for VersionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VersionId({})", self.0)
    }
}

/// Identifier of the set of versions of a work: the first version's id.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorkId(String);

impl WorkId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&VersionId> for WorkId {
    fn from(v: &VersionId) -> Self {
        WorkId(v.0.clone())
    }
}

impl FromStr for WorkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: VersionId = s.parse()?;
        Ok(WorkId(v.0))
    }
}

impl fmt::Display for WorkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for WorkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WorkId({})", self.0)
    }
}

impl PartialEq<VersionId> for WorkId {
    fn eq(&self, other: &VersionId) -> bool {
        self.0 == other.0
    }
}

/// What an [`ExternalReference`] points at. Text form `version:<hex>` or
/// `work:<hex>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RefTarget {
    Version(VersionId),
    Work(WorkId),
}

impl fmt::Display for RefTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefTarget::Version(v) => write!(f, "version:{v}"),
            RefTarget::Work(w) => write!(f, "work:{w}"),
        }
    }
}

impl FromStr for RefTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("version", id)) => Ok(RefTarget::Version(id.parse()?)),
            Some(("work", id)) => Ok(RefTarget::Work(id.parse()?)),
            _ => Err(Error::Key(format!("`{s}` is not a reference target"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlobEncoding {
    Raw,
    VmProgram,
    VmEncoded,
}

impl BlobEncoding {
    pub fn as_str(self) -> &'static str {
        match self {
            BlobEncoding::Raw => "raw",
            BlobEncoding::VmProgram => "vm-program",
            BlobEncoding::VmEncoded => "vm-encoded",
        }
    }
}

impl FromStr for BlobEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(BlobEncoding::Raw),
            "vm-program" => Ok(BlobEncoding::VmProgram),
            "vm-encoded" => Ok(BlobEncoding::VmEncoded),
            other => Err(Error::Key(format!("unknown blob encoding `{other}`"))),
        }
    }
}

/// One content bit-string of a payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContentBlob {
    pub name: String,
    pub media_hint: String,
    pub encoding: BlobEncoding,
    pub bytes: Vec<u8>,
    /// Digest of the `vm-program` blob that decodes this one.
    pub decoder_ref: Option<Digest>,
}

impl ContentBlob {
    pub fn raw(name: impl Into<String>, media_hint: impl Into<String>, bytes: Vec<u8>) -> Self {
        ContentBlob {
            name: name.into(),
            media_hint: media_hint.into(),
            encoding: BlobEncoding::Raw,
            bytes,
            decoder_ref: None,
        }
    }

    pub fn program(name: impl Into<String>, program: &vm::VmProgram) -> Self {
        ContentBlob {
            name: name.into(),
            media_hint: vm::PROGRAM_MEDIA_TYPE.to_string(),
            encoding: BlobEncoding::VmProgram,
            bytes: program.to_bytes(),
            decoder_ref: None,
        }
    }

    pub fn vm_encoded(
        name: impl Into<String>,
        media_hint: impl Into<String>,
        bytes: Vec<u8>,
        decoder: &ContentBlob,
    ) -> Self {
        ContentBlob {
            name: name.into(),
            media_hint: media_hint.into(),
            encoding: BlobEncoding::VmEncoded,
            bytes,
            decoder_ref: Some(decoder.digest()),
        }
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.bytes)
    }
}

/// A reference to another object, always carrying the referent's digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalReference {
    pub target: RefTarget,
    /// Digest of the referent's sealed bytes. `None` only arises from
    /// hand-built or decoded values and is always a structural violation.
    pub expected_digest: Option<Digest>,
    pub relation: String,
}

impl ExternalReference {
    pub fn new(target: RefTarget, expected_digest: Digest, relation: impl Into<String>) -> Self {
        ExternalReference {
            target,
            expected_digest: Some(expected_digest),
            relation: relation.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetadataRecord {
    pub key: String,
    pub value: String,
    pub scheme: String,
}

impl MetadataRecord {
    /// A record in the built-in schema (empty scheme).
    pub fn builtin(key: impl Into<String>, value: impl Into<String>) -> Self {
        MetadataRecord {
            key: key.into(),
            value: value.into(),
            scheme: String::new(),
        }
    }

    pub fn namespaced(
        scheme: impl Into<String>,
        key: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        MetadataRecord {
            key: key.into(),
            value: value.into(),
            scheme: scheme.into(),
        }
    }

    /// `key` for built-in records, `scheme:key` otherwise.
    pub fn qualified_key(&self) -> String {
        qualify(&self.scheme, &self.key)
    }
}

fn qualify(scheme: &str, key: &str) -> String {
    if scheme.is_empty() {
        key.to_string()
    } else {
        format!("{scheme}:{key}")
    }
}

/// Metadata keyed and ordered by `(scheme, key)`.
///
/// The map ordering is the canonical ordering, so two sets built by inserting
/// the same records in different orders are equal and encode identically.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetadataSet(BTreeMap<(String, String), String>);

impl MetadataSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert a record, returning the previous value for the same
    /// `(scheme, key)`.
    pub fn insert(&mut self, record: MetadataRecord) -> Option<String> {
        self.0.insert((record.scheme, record.key), record.value)
    }

    pub fn get(&self, scheme: &str, key: &str) -> Option<&str> {
        self.0
            .get(&(scheme.to_string(), key.to_string()))
            .map(String::as_str)
    }

    pub fn contains_qualified(&self, qualified: &str) -> bool {
        self.0.keys().any(|(s, k)| qualify(s, k) == qualified)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = MetadataRecord> + '_ {
        self.0.iter().map(|((scheme, key), value)| MetadataRecord {
            key: key.clone(),
            value: value.clone(),
            scheme: scheme.clone(),
        })
    }
}

impl FromIterator<MetadataRecord> for MetadataSet {
    fn from_iter<I: IntoIterator<Item = MetadataRecord>>(iter: I) -> Self {
        let mut set = MetadataSet::new();
        for r in iter {
            set.insert(r);
        }
        set
    }
}

/// Identifiers, provenance, relationships and metadata of a TDO.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectionBlock {
    pub version_id: VersionId,
    pub work_id: WorkId,
    /// Steps, in order, that produced this version's content.
    pub provenance: Vec<TransformationRecord>,
    pub provenance_statement: Option<ProvenanceStatement>,
    pub predecessors: Vec<ExternalReference>,
    pub links: Vec<ExternalReference>,
    pub metadata: MetadataSet,
    pub vm_spec_ref: Option<Digest>,
}

/// Payload plus protection block, optionally sealed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustworthyDigitalObject {
    pub payload: Vec<ContentBlob>,
    pub protection: ProtectionBlock,
    pub seal: Option<Seal>,
}

impl TrustworthyDigitalObject {
    pub fn version_id(&self) -> &VersionId {
        &self.protection.version_id
    }

    pub fn work_id(&self) -> &WorkId {
        &self.protection.work_id
    }

    pub fn is_sealed(&self) -> bool {
        self.seal.is_some()
    }

    pub fn is_first_version(&self) -> bool {
        self.protection.predecessors.is_empty()
    }

    pub fn blob(&self, name: &str) -> Option<&ContentBlob> {
        self.payload.iter().find(|b| b.name == name)
    }

    /// Replace the metadata of an unsealed draft.
    pub fn with_metadata<I>(mut self, metadata: I) -> Result<Self>
    where
        I: IntoIterator<Item = MetadataRecord>,
    {
        if self.seal.is_some() {
            return Err(Error::AlreadySealed);
        }
        self.protection.metadata = metadata.into_iter().collect();
        check(&self)?;
        Ok(self)
    }

    /// Replace the link references of an unsealed draft.
    pub fn with_links(mut self, links: Vec<ExternalReference>) -> Result<Self> {
        if self.seal.is_some() {
            return Err(Error::AlreadySealed);
        }
        self.protection.links = links;
        check(&self)?;
        Ok(self)
    }

    /// Copy with the seal removed.
    pub fn unsealed(&self) -> Self {
        TrustworthyDigitalObject {
            seal: None,
            ..self.clone()
        }
    }
}

/// One broken structural rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn payload_violations(payload: &[ContentBlob]) -> Vec<Violation> {
    let mut out = Vec::new();
    if payload.is_empty() {
        out.push(Violation::new("payload", "must contain at least one blob"));
    }
    let mut seen = HashSet::new();
    for (i, blob) in payload.iter().enumerate() {
        let field = format!("payload[{i}]");
        if blob.name.is_empty() {
            out.push(Violation::new(&field, "blob name must be non-empty"));
        }
        if !seen.insert(blob.name.as_str()) {
            out.push(Violation::new(
                &field,
                format!("duplicate blob name `{}`", blob.name),
            ));
        }
        match (blob.encoding, &blob.decoder_ref) {
            (BlobEncoding::VmEncoded, None) => out.push(Violation::new(
                format!("{field}.decoder_ref"),
                "vm-encoded blob requires a decoder reference",
            )),
            (BlobEncoding::Raw | BlobEncoding::VmProgram, Some(_)) => out.push(Violation::new(
                format!("{field}.decoder_ref"),
                "only vm-encoded blobs carry a decoder reference",
            )),
            _ => {}
        }
    }
    out
}

/// Derive the self-certifying version identifier of a payload.
pub fn derive_version_id(payload: &[ContentBlob]) -> Result<VersionId> {
    let violations = payload_violations(payload);
    if !violations.is_empty() {
        return Err(Error::Structural(violations));
    }
    let block = canonical::encode_payload_block(payload);
    Ok(VersionId::from_digest(&Digest::of(&block)))
}

/// Build an unsealed first version.
pub fn new_tdo<I>(
    payload: Vec<ContentBlob>,
    metadata: I,
    provenance_statement: ProvenanceStatement,
) -> Result<TrustworthyDigitalObject>
where
    I: IntoIterator<Item = MetadataRecord>,
{
    let version_id = derive_version_id(&payload)?;
    let vm_spec_ref = needs_vm(&payload).then(vm::vm_spec_ref);
    let tdo = TrustworthyDigitalObject {
        protection: ProtectionBlock {
            work_id: WorkId::from(&version_id),
            version_id,
            provenance: Vec::new(),
            provenance_statement: Some(provenance_statement),
            predecessors: Vec::new(),
            links: Vec::new(),
            metadata: metadata.into_iter().collect(),
            vm_spec_ref,
        },
        payload,
        seal: None,
    };
    check(&tdo)?;
    Ok(tdo)
}

pub(crate) fn needs_vm(payload: &[ContentBlob]) -> bool {
    payload.iter().any(|b| b.encoding != BlobEncoding::Raw)
}

pub(crate) fn check(tdo: &TrustworthyDigitalObject) -> Result<()> {
    let violations = validate_structure(tdo);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Structural(violations))
    }
}

fn reference_violations(field: &str, refs: &[ExternalReference], out: &mut Vec<Violation>) {
    for (i, r) in refs.iter().enumerate() {
        if r.expected_digest.is_none() {
            out.push(Violation::new(
                format!("{field}[{i}].expected_digest"),
                "reference must carry its referent's digest",
            ));
        }
        if r.relation.is_empty() {
            out.push(Violation::new(
                format!("{field}[{i}].relation"),
                "relation must be non-empty",
            ));
        }
    }
}

/// Report every broken type invariant. Never fails.
pub fn validate_structure(tdo: &TrustworthyDigitalObject) -> Vec<Violation> {
    let mut out = payload_violations(&tdo.payload);
    let p = &tdo.protection;

    if out.is_empty() {
        if let Ok(computed) = derive_version_id(&tdo.payload) {
            if computed != p.version_id {
                out.push(Violation::new(
                    "protection.version_id",
                    format!("does not match payload digest {computed}"),
                ));
            }
        }
    }

    let first = p.work_id == p.version_id;
    if first && !p.predecessors.is_empty() {
        out.push(Violation::new(
            "protection.work_id",
            "a version with predecessors cannot be the first version of its work",
        ));
    }
    if !first && p.predecessors.is_empty() {
        out.push(Violation::new(
            "protection.predecessors",
            "a later version must reference its predecessor",
        ));
    }
    if p.predecessors
        .iter()
        .any(|r| r.target == RefTarget::Version(p.version_id.clone()))
    {
        out.push(Violation::new(
            "protection.predecessors",
            "a version cannot be its own predecessor",
        ));
    }
    reference_violations("protection.predecessors", &p.predecessors, &mut out);
    reference_violations("protection.links", &p.links, &mut out);

    match (&p.vm_spec_ref, needs_vm(&tdo.payload)) {
        (None, true) => out.push(Violation::new(
            "protection.vm_spec_ref",
            "required when any blob is not raw",
        )),
        (Some(d), _) if *d != vm::vm_spec_ref() => out.push(Violation::new(
            "protection.vm_spec_ref",
            "does not name a known machine description",
        )),
        _ => {}
    }

    if let Some(s) = &p.provenance_statement {
        if s.creator.is_empty() || s.event.is_empty() {
            out.push(Violation::new(
                "protection.provenance_statement",
                "creator and event must be non-empty",
            ));
        }
    }

    for (i, step) in p.provenance.iter().enumerate() {
        if step.index != i as u64 + 1 {
            out.push(Violation::new(
                format!("protection.provenance[{i}].index"),
                format!("expected {}", i + 1),
            ));
        }
        if i > 0 && p.provenance[i - 1].output_digest != step.input_digest {
            out.push(Violation::new(
                format!("protection.provenance[{i}].input_digest"),
                "must equal the previous step's output digest",
            ));
        }
    }

    for (scheme, key) in p.metadata.0.keys() {
        if key.is_empty() {
            out.push(Violation::new("protection.metadata", "empty key"));
        } else if scheme.is_empty() && !BUILTIN_METADATA_KEYS.contains(&key.as_str()) {
            out.push(Violation::new(
                format!("protection.metadata.{key}"),
                "key outside the built-in schema must be namespaced",
            ));
        }
    }

    if let Some(seal) = &tdo.seal {
        if seal.chain.is_empty() {
            out.push(Violation::new("seal.chain", "must contain the signer certificate"));
        } else {
            let last = seal.chain.len() - 1;
            for (i, cert) in seal.chain.iter().enumerate() {
                if i == last && cert.role != Role::Root {
                    out.push(Violation::new("seal.chain", "must terminate at a root certificate"));
                }
                if i != last && cert.role == Role::Root {
                    out.push(Violation::new(
                        format!("seal.chain[{i}]"),
                        "root certificate before the end of the chain",
                    ));
                }
            }
        }
    }
    out
}
