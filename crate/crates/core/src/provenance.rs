//! Derivation chains, provenance statements, genre policies, version
//! history and the authenticity verdict.
//!
//! A new version records the ordered steps that turned its source bytes into
//! its own content. The verdict holds only when three checks all pass: the
//! predecessor references and step chain resolve (derivative), a verifying
//! seal attests the provenance statement (provenance), and the genre policy
//! allows every step kind (faithful).

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::canonical::{self, document_root, CanonicalDocument, Element};
use crate::digest::Digest;
use crate::error::{Error, Result};
use crate::model::{
    derive_version_id, ContentBlob, ExternalReference, ProtectionBlock, RefTarget,
    TrustworthyDigitalObject, VersionId,
};
use crate::trust::{verify_tdo, TrustStore};

/// Transformation vocabulary shipped with the toolkit. Policies may name
/// further kinds.
pub const BUILTIN_TRANSFORMATIONS: [&str; 7] = [
    "identity-copy",
    "charset-transcode",
    "format-repackage",
    "lossless-compress",
    "lossy-compress",
    "excerpt",
    "render",
];

/// Media type of a predecessor embedded by [`DeriveMode::Nest`].
pub const NESTED_TDO_MEDIA_TYPE: &str = "application/x-tdo";

/// One recorded step of a derivation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformationRecord {
    /// 1-based position k within the derivation.
    pub index: u64,
    pub kind: String,
    pub input_digest: Digest,
    pub output_digest: Digest,
    /// Who chose this transformation.
    pub agent: String,
    pub event: String,
    pub timestamp: NaiveDate,
}

/// Claims that applying `steps` in order to the source yields the result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivationStatement {
    pub source_digest: Digest,
    pub result_digest: Digest,
    pub steps: Vec<TransformationRecord>,
}

impl DerivationStatement {
    /// The zero-step statement over `source`: C is the identity.
    pub fn identity(source: &[u8]) -> Self {
        let d = Digest::of(source);
        DerivationStatement {
            source_digest: d.clone(),
            result_digest: d,
            steps: Vec::new(),
        }
    }

    /// Adjacency and index checks, independent of any bytes.
    pub fn is_chained(&self) -> bool {
        chain_consistent(&self.steps)
            && match (self.steps.first(), self.steps.last()) {
                (Some(first), Some(last)) => {
                    first.input_digest == self.source_digest
                        && last.output_digest == self.result_digest
                }
                _ => self.source_digest == self.result_digest,
            }
    }
}

fn chain_consistent(steps: &[TransformationRecord]) -> bool {
    steps
        .iter()
        .enumerate()
        .all(|(i, s)| s.index == i as u64 + 1)
        && steps
            .windows(2)
            .all(|w| w[0].output_digest == w[1].input_digest)
}

/// Append one step. The input bytes must be the statement's current result.
#[allow(clippy::too_many_arguments)]
pub fn record_transformation(
    statement: &DerivationStatement,
    kind: &str,
    input_bytes: &[u8],
    output_bytes: &[u8],
    agent: &str,
    event: &str,
    timestamp: NaiveDate,
) -> Result<DerivationStatement> {
    let input_digest = statement.result_digest.algorithm().hash(input_bytes);
    if input_digest != statement.result_digest {
        return Err(Error::ChainBreak {
            expected: statement.result_digest.to_string(),
            actual: input_digest.to_string(),
        });
    }
    let output_digest = statement.result_digest.algorithm().hash(output_bytes);
    let mut next = statement.clone();
    next.steps.push(TransformationRecord {
        index: statement.steps.len() as u64 + 1,
        kind: kind.to_string(),
        input_digest,
        output_digest: output_digest.clone(),
        agent: agent.to_string(),
        event: event.to_string(),
        timestamp,
    });
    next.result_digest = output_digest;
    Ok(next)
}

/// True iff the statement relates exactly these source and result bytes.
pub fn verify_derivation(
    statement: &DerivationStatement,
    source_bytes: &[u8],
    result_bytes: &[u8],
) -> bool {
    statement.source_digest.matches(source_bytes)
        && statement.result_digest.matches(result_bytes)
        && statement.is_chained()
}

/// What a provenance statement says was created.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Created {
    Digest(Digest),
    Version(VersionId),
}

impl fmt::Display for Created {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Created::Digest(d) => write!(f, "{d}"),
            Created::Version(v) => write!(f, "version:{v}"),
        }
    }
}

impl FromStr for Created {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("version:") {
            Some(v) => Ok(Created::Version(v.parse()?)),
            None => Ok(Created::Digest(s.parse()?)),
        }
    }
}

/// Who produced which bytes or version, and on what occasion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvenanceStatement {
    pub creator: String,
    pub created: Created,
    pub event: String,
}

/// Faithfulness conventions for one genre.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenrePolicy {
    pub genre: String,
    pub allowed_kinds: BTreeSet<String>,
    /// Qualified metadata keys (`key` or `scheme:key`) that must be present.
    pub required_metadata: BTreeSet<String>,
}

impl GenrePolicy {
    pub fn new<K, M>(genre: &str, allowed_kinds: K, required_metadata: M) -> Result<Self>
    where
        K: IntoIterator,
        K::Item: Into<String>,
        M: IntoIterator,
        M::Item: Into<String>,
    {
        let policy = GenrePolicy {
            genre: genre.to_string(),
            allowed_kinds: allowed_kinds.into_iter().map(Into::into).collect(),
            required_metadata: required_metadata.into_iter().map(Into::into).collect(),
        };
        if policy.allowed_kinds.is_empty() {
            return Err(Error::Structural(vec![crate::model::Violation {
                field: "allowed_kinds".into(),
                rule: "a genre policy must allow at least one transformation kind".into(),
            }]));
        }
        Ok(policy)
    }

    pub fn to_document(&self) -> CanonicalDocument {
        CanonicalDocument::from_element(
            &Element::new("genre-policy")
                .attr("format", canonical::FORMAT)
                .attr("genre", self.genre.clone())
                .children(
                    self.allowed_kinds
                        .iter()
                        .map(|k| Element::new("allow").attr("kind", k.clone())),
                )
                .children(
                    self.required_metadata
                        .iter()
                        .map(|k| Element::new("require").attr("key", k.clone())),
                ),
        )
    }

    pub fn from_document(bytes: &[u8]) -> Result<Self> {
        let root = document_root(bytes, "genre-policy")?;
        root.only_attrs(&["format", "genre"])?;
        root.no_text()?;
        let mut allowed = Vec::new();
        let mut required = Vec::new();
        for c in &root.children {
            match c.name.as_str() {
                "allow" if required.is_empty() => {
                    c.only_attrs(&["kind"])?;
                    allowed.push(c.req("kind")?.to_string());
                }
                "require" => {
                    c.only_attrs(&["key"])?;
                    required.push(c.req("key")?.to_string());
                }
                _ => return Err(c.err("unexpected element")),
            }
        }
        GenrePolicy::new(root.req("genre")?, allowed, required)
    }
}

/// The authenticity verdict. Construct with [`AuthenticityVerdict::new`] so
/// that `authentic` is always the conjunction of the three checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthenticityVerdict {
    pub derivative_ok: bool,
    pub provenance_ok: bool,
    pub faithful_ok: bool,
    pub authentic: bool,
    pub reasons: Vec<String>,
}

impl AuthenticityVerdict {
    pub fn new(derivative_ok: bool, provenance_ok: bool, faithful_ok: bool, reasons: Vec<String>) -> Self {
        AuthenticityVerdict {
            derivative_ok,
            provenance_ok,
            faithful_ok,
            authentic: derivative_ok && provenance_ok && faithful_ok,
            reasons,
        }
    }

    pub fn checks(&self) -> [(&'static str, bool); 4] {
        [
            ("derivative", self.derivative_ok),
            ("provenance", self.provenance_ok),
            ("faithful", self.faithful_ok),
            ("authentic", self.authentic),
        ]
    }
}

/// Read-only lookup of referent bytes by reference target.
///
/// Implementations must tolerate concurrent queries. A work target may
/// resolve to several candidates (one per stored version).
pub trait ReferentResolver {
    fn resolve(&self, target: &RefTarget) -> Vec<Vec<u8>>;
}

impl<R: ReferentResolver + ?Sized> ReferentResolver for &R {
    fn resolve(&self, target: &RefTarget) -> Vec<Vec<u8>> {
        (**self).resolve(target)
    }
}

fn resolve_in_map<'a, I>(entries: I, target: &RefTarget) -> Vec<Vec<u8>>
where
    I: Iterator<Item = (&'a VersionId, &'a Vec<u8>)>,
{
    match target {
        RefTarget::Version(v) => entries
            .filter(|(k, _)| *k == v)
            .map(|(_, b)| b.clone())
            .collect(),
        RefTarget::Work(w) => entries
            .filter(|(_, b)| {
                canonical::decode(b)
                    .map(|t| t.protection.work_id == *w)
                    .unwrap_or(false)
            })
            .map(|(_, b)| b.clone())
            .collect(),
    }
}

impl ReferentResolver for BTreeMap<VersionId, Vec<u8>> {
    fn resolve(&self, target: &RefTarget) -> Vec<Vec<u8>> {
        resolve_in_map(self.iter(), target)
    }
}

impl ReferentResolver for HashMap<VersionId, Vec<u8>> {
    fn resolve(&self, target: &RefTarget) -> Vec<Vec<u8>> {
        resolve_in_map(self.iter(), target)
    }
}

/// How a new version records the version it started from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeriveMode {
    /// Reference the predecessor by id and digest.
    Link,
    /// Embed the predecessor's sealed bytes as a payload blob, and reference it.
    Nest,
}

impl FromStr for DeriveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "link" => Ok(DeriveMode::Link),
            "nest" => Ok(DeriveMode::Nest),
            other => Err(Error::Key(format!("unknown derive mode `{other}`"))),
        }
    }
}

/// Name of the payload blob holding a nested predecessor.
pub fn nested_blob_name(predecessor: &VersionId) -> String {
    format!("predecessor/{predecessor}.tdo")
}

/// Start a new unsealed version from a verifying sealed predecessor.
///
/// The predecessor's metadata is carried forward; use
/// [`TrustworthyDigitalObject::with_metadata`] to edit it before sealing.
pub fn derive_version(
    predecessor: &TrustworthyDigitalObject,
    new_payload: Vec<ContentBlob>,
    mode: DeriveMode,
    statement: &DerivationStatement,
    provenance: ProvenanceStatement,
    trust: &TrustStore,
) -> Result<TrustworthyDigitalObject> {
    let report = verify_tdo(predecessor, trust);
    if !report.accepted() {
        return Err(Error::UnverifiablePredecessor(report.reasons.join("; ")));
    }
    if !statement.is_chained() {
        return Err(Error::ChainBreak {
            expected: statement.result_digest.to_string(),
            actual: statement
                .steps
                .last()
                .map(|s| s.output_digest.to_string())
                .unwrap_or_else(|| statement.source_digest.to_string()),
        });
    }
    let sealed_bytes = canonical::encode(predecessor)?.into_bytes();
    let reference = ExternalReference::new(
        RefTarget::Version(predecessor.version_id().clone()),
        Digest::of(&sealed_bytes),
        "predecessor",
    );

    let mut payload = new_payload;
    if mode == DeriveMode::Nest {
        payload.push(ContentBlob::raw(
            nested_blob_name(predecessor.version_id()),
            NESTED_TDO_MEDIA_TYPE,
            sealed_bytes,
        ));
    }
    let version_id = derive_version_id(&payload)?;
    if version_id == *predecessor.version_id() {
        return Err(Error::Cycle(version_id));
    }
    let vm_spec_ref = crate::model::needs_vm(&payload).then(crate::vm::vm_spec_ref);
    let tdo = TrustworthyDigitalObject {
        payload,
        protection: ProtectionBlock {
            version_id,
            work_id: predecessor.work_id().clone(),
            provenance: statement.steps.clone(),
            provenance_statement: Some(provenance),
            predecessors: vec![reference],
            links: Vec::new(),
            metadata: predecessor.protection.metadata.clone(),
            vm_spec_ref,
        },
        seal: None,
    };
    crate::model::check(&tdo)?;
    Ok(tdo)
}

/// Nested predecessor objects embedded in a payload.
pub fn nested_predecessors(tdo: &TrustworthyDigitalObject) -> Vec<(Digest, TrustworthyDigitalObject)> {
    tdo.payload
        .iter()
        .filter(|b| b.media_hint == NESTED_TDO_MEDIA_TYPE)
        .filter_map(|b| canonical::decode(&b.bytes).ok().map(|t| (b.digest(), t)))
        .collect()
}

/// Judge whether a sealed TDO is an authentic copy.
pub fn judge_authenticity<R: ReferentResolver + ?Sized>(
    tdo: &TrustworthyDigitalObject,
    policy: &GenrePolicy,
    trust: &TrustStore,
    resolver: &R,
) -> AuthenticityVerdict {
    let mut reasons = Vec::new();
    let p = &tdo.protection;

    // derivative: predecessors resolve with matching digests, chain is intact
    let nested = nested_predecessors(tdo);
    let mut derivative_ok = true;
    for r in &p.predecessors {
        let Some(expected) = &r.expected_digest else {
            derivative_ok = false;
            reasons.push(format!("derivative: reference to {} has no digest", r.target));
            continue;
        };
        let embedded = nested.iter().any(|(d, _)| d == expected);
        if embedded {
            continue;
        }
        let candidates = resolver.resolve(&r.target);
        if candidates.is_empty() {
            derivative_ok = false;
            reasons.push(format!("derivative: predecessor {} unresolved", r.target));
        } else if !candidates.iter().any(|b| expected.matches(b)) {
            derivative_ok = false;
            reasons.push(format!(
                "derivative: predecessor {} does not match its recorded digest",
                r.target
            ));
        }
    }
    if !chain_consistent(&p.provenance) {
        derivative_ok = false;
        reasons.push("derivative: transformation chain is broken".into());
    }
    if let Some(last) = p.provenance.last() {
        if !tdo.payload.iter().any(|b| last.output_digest.matches(&b.bytes)) {
            derivative_ok = false;
            reasons.push("derivative: final transformation output is not in the payload".into());
        }
    }

    // provenance: a statement exists and the seal attesting it verifies
    let seal_report = verify_tdo(tdo, trust);
    let provenance_ok = p.provenance_statement.is_some() && seal_report.accepted();
    if p.provenance_statement.is_none() {
        reasons.push("provenance: no provenance statement".into());
    }
    if !seal_report.accepted() {
        reasons.extend(seal_report.reasons.iter().map(|r| format!("provenance: {r}")));
    }

    // faithful: every transformation allowed, required metadata present
    let mut faithful_ok = true;
    for step in &p.provenance {
        if !policy.allowed_kinds.contains(&step.kind) {
            faithful_ok = false;
            reasons.push(format!(
                "faithful: transformation {} `{}` not allowed for genre `{}`",
                step.index, step.kind, policy.genre
            ));
        }
    }
    for key in &policy.required_metadata {
        if !p.metadata.contains_qualified(key) {
            faithful_ok = false;
            reasons.push(format!("faithful: required metadata `{key}` missing"));
        }
    }
    if let Some(genre) = p.metadata.get("", "genre") {
        if genre != policy.genre {
            faithful_ok = false;
            reasons.push(format!(
                "faithful: object genre `{genre}` differs from policy genre `{}`",
                policy.genre
            ));
        }
    }

    AuthenticityVerdict::new(derivative_ok, provenance_ok, faithful_ok, reasons)
}

/// One hop of a history walk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryEntry {
    pub version_id: VersionId,
    /// For the starting object: its version id matches its payload. For each
    /// predecessor: resolved bytes match the recorded digest.
    pub verified: bool,
}

/// Walk predecessor references back to the first version.
///
/// A hop whose bytes do not match is flagged and the walk continues through
/// the (mismatching) object when it still decodes; an undecodable or missing
/// hop ends its branch.
pub fn trace_history<R: ReferentResolver + ?Sized>(
    tdo: &TrustworthyDigitalObject,
    resolver: &R,
) -> Result<Vec<HistoryEntry>> {
    let mut out = vec![HistoryEntry {
        version_id: tdo.version_id().clone(),
        verified: derive_version_id(&tdo.payload).ok().as_ref() == Some(tdo.version_id()),
    }];
    let mut emitted: HashSet<VersionId> = HashSet::from([tdo.version_id().clone()]);
    let mut path = vec![tdo.version_id().clone()];
    walk(tdo, resolver, &mut path, &mut emitted, &mut out)?;
    Ok(out)
}

fn walk<R: ReferentResolver + ?Sized>(
    current: &TrustworthyDigitalObject,
    resolver: &R,
    path: &mut Vec<VersionId>,
    emitted: &mut HashSet<VersionId>,
    out: &mut Vec<HistoryEntry>,
) -> Result<()> {
    for r in &current.protection.predecessors {
        let mut candidates: Vec<Vec<u8>> = Vec::new();
        if let Some(expected) = &r.expected_digest {
            candidates.extend(
                current
                    .payload
                    .iter()
                    .filter(|b| b.media_hint == NESTED_TDO_MEDIA_TYPE && expected.matches(&b.bytes))
                    .map(|b| b.bytes.clone()),
            );
        }
        candidates.extend(resolver.resolve(&r.target));
        let matching = r
            .expected_digest
            .as_ref()
            .and_then(|d| candidates.iter().position(|b| d.matches(b)));
        let verified = matching.is_some();
        let chosen = matching.or(if candidates.is_empty() { None } else { Some(0) });
        let decoded = chosen.and_then(|i| canonical::decode(&candidates[i]).ok());

        let id = match (&r.target, &decoded) {
            (RefTarget::Version(v), _) => v.clone(),
            (RefTarget::Work(_), Some(t)) => t.version_id().clone(),
            (RefTarget::Work(w), None) => w.as_str().parse()?,
        };
        if path.contains(&id) {
            return Err(Error::Cycle(id));
        }
        if !emitted.insert(id.clone()) {
            continue;
        }
        out.push(HistoryEntry {
            version_id: id.clone(),
            verified,
        });
        if let Some(next) = decoded {
            path.push(id);
            walk(&next, resolver, path, emitted, out)?;
            path.pop();
        }
    }
    Ok(())
}
