//! Content-addressed stores of sealed objects.
//!
//! Layout under the store root:
//!
//! ```text
//! objects/<first two hex>/<version>.tdo   sealed canonical bytes
//! index/versions/<version>                <index-entry> for the object
//! index/works/<work>/<version>            same entry, grouped by work
//! ```
//!
//! Every file is written to a temporary name and renamed into place. The
//! version index entry is written after the object and is what makes the
//! object visible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use crate::batch::{map_items, ExecutionMode};
use crate::canonical::{self, CanonicalDocument, Element, FORMAT};
use crate::digest::Digest;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::model::{
    derive_version_id, validate_structure, ExternalReference, RefTarget, VersionId, WorkId,
};
use crate::provenance::ReferentResolver;

/// Environment variable naming the default store root.
pub const REPOSITORY_ENV: &str = "TDO_REPO";
pub const DEFAULT_AUDIT_THRESHOLD: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub version_id: VersionId,
    pub work_id: WorkId,
    /// Digest of the stored sealed bytes.
    pub digest: Digest,
}

impl IndexEntry {
    pub fn to_document(&self) -> CanonicalDocument {
        CanonicalDocument::from_element(
            &Element::new("index-entry")
                .attr("digest", self.digest.to_string())
                .attr("format", FORMAT)
                .attr("version", self.version_id.as_str())
                .attr("work", self.work_id.as_str()),
        )
    }

    pub fn from_document(bytes: &[u8]) -> Result<Self> {
        let el = canonical::document_root(bytes, "index-entry")?;
        el.only_attrs(&["digest", "format", "version", "work"])?;
        el.no_children()?;
        el.no_text()?;
        Ok(IndexEntry {
            version_id: el.parse_req("version")?,
            work_id: el.parse_req("work")?,
            digest: el.parse_req("digest")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepositoryStore {
    root: PathBuf,
}

fn read_optional(path: &Path) -> Result<Option<Vec<u8>>> {
    match std::fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(path, e)),
    }
}

impl RepositoryStore {
    /// Open the store at `root`, creating its directories if absent.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let store = RepositoryStore { root: root.into() };
        for dir in [
            store.root.join("objects"),
            store.root.join("index").join("versions"),
            store.root.join("index").join("works"),
        ] {
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(store)
    }

    /// The store named by [`REPOSITORY_ENV`], if set.
    pub fn from_env() -> Result<Option<Self>> {
        match std::env::var_os(REPOSITORY_ENV) {
            Some(p) if !p.is_empty() => RepositoryStore::open(PathBuf::from(p)).map(Some),
            _ => Ok(None),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn object_path(&self, id: &VersionId) -> PathBuf {
        let s = id.as_str();
        self.root
            .join("objects")
            .join(&s[..2])
            .join(format!("{s}.tdo"))
    }

    fn version_index_path(&self, id: &VersionId) -> PathBuf {
        self.root.join("index").join("versions").join(id.as_str())
    }

    fn work_index_dir(&self, work: &WorkId) -> PathBuf {
        self.root.join("index").join("works").join(work.as_str())
    }

    pub fn index_entry(&self, id: &VersionId) -> Result<Option<IndexEntry>> {
        let path = self.version_index_path(id);
        match read_optional(&path)? {
            None => Ok(None),
            Some(b) => {
                let entry = IndexEntry::from_document(&b)
                    .map_err(|e| Error::StoredCorruption(format!("index entry {id}: {e}")))?;
                if entry.version_id != *id {
                    return Err(Error::StoredCorruption(format!(
                        "index entry {id} names {}",
                        entry.version_id
                    )));
                }
                Ok(Some(entry))
            }
        }
    }

    pub fn contains(&self, id: &VersionId) -> bool {
        self.version_index_path(id).is_file()
    }

    /// The stored object file, unverified.
    pub fn read_raw(&self, id: &VersionId) -> Result<Option<Vec<u8>>> {
        read_optional(&self.object_path(id))
    }

    /// Every indexed version, in id order.
    pub fn versions(&self) -> Result<Vec<VersionId>> {
        let dir = self.root.join("index").join("versions");
        let mut out = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if let Some(id) = entry.file_name().to_str().and_then(|n| n.parse().ok()) {
                out.push(id);
            }
        }
        out.sort();
        Ok(out)
    }

    fn work_members(&self, work: &WorkId) -> Result<Vec<VersionId>> {
        let dir = self.work_index_dir(work);
        let rd = match std::fs::read_dir(&dir) {
            Ok(rd) => rd,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&dir, e)),
        };
        let mut out = Vec::new();
        for entry in rd {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            if let Some(id) = entry.file_name().to_str().and_then(|n| n.parse().ok()) {
                out.push(id);
            }
        }
        out.sort();
        Ok(out)
    }
}

/// Store a sealed canonical object under its self-derived version id.
///
/// Trust grounding is not checked: custody and judgement are separate.
pub fn ingest(store: &RepositoryStore, sealed: &[u8]) -> Result<VersionId> {
    let tdo = canonical::decode(sealed)?;
    let computed = derive_version_id(&tdo.payload)?;
    if computed != *tdo.version_id() {
        return Err(Error::ForgedIdentifier {
            embedded: tdo.version_id().to_string(),
            computed: computed.to_string(),
        });
    }
    if !tdo.is_sealed() {
        return Err(Error::NotSealed);
    }
    let violations = validate_structure(&tdo);
    if !violations.is_empty() {
        return Err(Error::Structural(violations));
    }

    let id = computed;
    let entry = IndexEntry {
        version_id: id.clone(),
        work_id: tdo.work_id().clone(),
        digest: Digest::of(sealed),
    };
    if let Some(existing) = store.index_entry(&id)? {
        if existing.digest != entry.digest {
            return Err(Error::Conflict(id.to_string()));
        }
        if store.read_raw(&id)?.as_deref() == Some(sealed) {
            return Ok(id);
        }
    }
    let doc = entry.to_document();
    write_atomic(&store.object_path(&id), sealed)?;
    write_atomic(&store.version_index_path(&id), doc.as_bytes())?;
    write_atomic(
        &store.work_index_dir(&entry.work_id).join(id.as_str()),
        doc.as_bytes(),
    )?;
    Ok(id)
}

/// The stored bytes of `id`, re-verified against the index.
pub fn retrieve(store: &RepositoryStore, id: &VersionId) -> Result<Vec<u8>> {
    let entry = store
        .index_entry(id)?
        .ok_or_else(|| Error::NotFound(id.to_string()))?;
    let bytes = store
        .read_raw(id)?
        .ok_or_else(|| Error::StoredCorruption(format!("{id}: object file missing")))?;
    if !entry.digest.matches(&bytes) {
        return Err(Error::StoredCorruption(format!(
            "{id}: stored bytes do not match index digest"
        )));
    }
    Ok(bytes)
}

/// All stored versions of `work`, ordered by predecessor depth within the
/// store and then by id.
pub fn resolve_work(store: &RepositoryStore, work: &WorkId) -> Result<Vec<VersionId>> {
    let members = store.work_members(work)?;
    let set: BTreeSet<&VersionId> = members.iter().collect();
    let mut preds: BTreeMap<&VersionId, Vec<VersionId>> = BTreeMap::new();
    for id in &members {
        let listed = retrieve(store, id)
            .ok()
            .and_then(|b| canonical::decode(&b).ok())
            .map(|t| {
                t.protection
                    .predecessors
                    .iter()
                    .filter_map(|r| match &r.target {
                        RefTarget::Version(v) if set.contains(v) => Some(v.clone()),
                        _ => None,
                    })
                    .collect()
            })
            .unwrap_or_default();
        preds.insert(id, listed);
    }

    fn depth<'a>(
        id: &'a VersionId,
        preds: &BTreeMap<&'a VersionId, Vec<VersionId>>,
        memo: &mut BTreeMap<VersionId, usize>,
        visiting: &mut BTreeSet<VersionId>,
    ) -> usize {
        if let Some(&d) = memo.get(id) {
            return d;
        }
        if !visiting.insert(id.clone()) {
            return 0;
        }
        let d = preds
            .get(id)
            .map(|ps| {
                ps.iter()
                    .filter_map(|p| preds.get_key_value(p).map(|(k, _)| *k))
                    .map(|p| depth(p, preds, memo, visiting) + 1)
                    .max()
                    .unwrap_or(0)
            })
            .unwrap_or(0);
        visiting.remove(id);
        memo.insert(id.clone(), d);
        d
    }

    let mut memo = BTreeMap::new();
    let mut visiting = BTreeSet::new();
    let mut ordered: Vec<(usize, VersionId)> = members
        .iter()
        .map(|id| (depth(id, &preds, &mut memo, &mut visiting), id.clone()))
        .collect();
    ordered.sort();
    Ok(ordered.into_iter().map(|(_, id)| id).collect())
}

/// Copy `id` from `source` to `target`. Returns whether bytes were written;
/// `false` means the target already held the identical object.
pub fn replicate(source: &RepositoryStore, target: &RepositoryStore, id: &VersionId) -> Result<bool> {
    let bytes = retrieve(source, id)?;
    if retrieve(target, id).ok().as_deref() == Some(bytes.as_slice()) {
        return Ok(false);
    }
    ingest(target, &bytes)?;
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub version_id: VersionId,
    pub replicas_found: usize,
    pub replicas_verified: usize,
    pub threshold: usize,
    pub at_risk: bool,
}

impl AuditReport {
    pub fn new(version_id: VersionId, found: usize, verified: usize, threshold: usize) -> Self {
        AuditReport {
            version_id,
            replicas_found: found,
            replicas_verified: verified,
            threshold,
            at_risk: verified < threshold,
        }
    }

    pub fn to_document(&self) -> CanonicalDocument {
        CanonicalDocument::from_element(
            &Element::new("audit-report")
                .attr("at-risk", self.at_risk.to_string())
                .attr("format", FORMAT)
                .attr("found", self.replicas_found.to_string())
                .attr("threshold", self.threshold.to_string())
                .attr("verified", self.replicas_verified.to_string())
                .attr("version", self.version_id.as_str()),
        )
    }
}

/// Whether `store` holds a copy of `id` and whether that copy verifies.
pub fn replica_status(store: &RepositoryStore, id: &VersionId) -> (bool, bool) {
    let found = store.object_path(id).is_file();
    let verified = found
        && retrieve(store, id)
            .ok()
            .and_then(|b| canonical::decode(&b).ok())
            .is_some_and(|t| t.version_id() == id);
    (found, verified)
}

/// Count the replicas of `id` across `stores`. `threshold` is clamped to at
/// least 1.
pub fn audit_replicas(stores: &[RepositoryStore], id: &VersionId, threshold: usize) -> AuditReport {
    audit_replicas_with(ExecutionMode::default(), stores, id, threshold)
}

pub fn audit_replicas_with(
    mode: ExecutionMode,
    stores: &[RepositoryStore],
    id: &VersionId,
    threshold: usize,
) -> AuditReport {
    let status = map_items(mode, stores, |s| replica_status(s, id));
    let found = status.iter().filter(|(f, _)| *f).count();
    let verified = status.iter().filter(|(_, v)| *v).count();
    AuditReport::new(id.clone(), found, verified, threshold.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkOutcome {
    ResolvedMatch,
    ResolvedMismatch,
    Unresolved,
}

impl LinkOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkOutcome::ResolvedMatch => "resolved_match",
            LinkOutcome::ResolvedMismatch => "resolved_mismatch",
            LinkOutcome::Unresolved => "unresolved",
        }
    }
}

impl fmt::Display for LinkOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Predecessor,
    Link,
}

impl ReferenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceKind::Predecessor => "predecessor",
            ReferenceKind::Link => "link",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkScanEntry {
    pub kind: ReferenceKind,
    pub reference: ExternalReference,
    pub outcome: LinkOutcome,
    /// Index of the deciding store: 0 is the local store, then peers in order.
    pub store: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkScanReport {
    pub version_id: VersionId,
    /// One entry per reference: predecessors first, then links.
    pub entries: Vec<LinkScanEntry>,
}

impl LinkScanReport {
    pub fn outcomes(&self) -> Vec<LinkOutcome> {
        self.entries.iter().map(|e| e.outcome).collect()
    }

    pub fn all_match(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.outcome == LinkOutcome::ResolvedMatch)
    }

    pub fn to_document(&self) -> CanonicalDocument {
        let entries = self.entries.iter().map(|e| {
            Element::new("outcome")
                .attr("kind", e.kind.as_str())
                .attr("result", e.outcome.as_str())
                .attr("target", e.reference.target.to_string())
                .attr_opt("digest", e.reference.expected_digest.as_ref().map(|d| d.to_string()))
        });
        CanonicalDocument::from_element(
            &Element::new("link-scan")
                .attr("format", FORMAT)
                .attr("version", self.version_id.as_str())
                .children(entries),
        )
    }
}

/// Raw candidate bytes for `target` in one store.
fn candidates(store: &RepositoryStore, target: &RefTarget) -> Vec<Vec<u8>> {
    let ids = match target {
        RefTarget::Version(v) => vec![v.clone()],
        RefTarget::Work(w) => store.work_members(w).unwrap_or_default(),
    };
    ids.iter()
        .filter_map(|id| store.read_raw(id).ok().flatten())
        .collect()
}

/// Resolve every reference of `id` against `store` and then `peers`; the
/// first store holding the referent decides the outcome.
pub fn scan_links(
    store: &RepositoryStore,
    id: &VersionId,
    peers: &[RepositoryStore],
) -> Result<LinkScanReport> {
    let tdo = canonical::decode(&retrieve(store, id)?)?;
    let refs = tdo
        .protection
        .predecessors
        .iter()
        .map(|r| (ReferenceKind::Predecessor, r))
        .chain(tdo.protection.links.iter().map(|r| (ReferenceKind::Link, r)));
    let stores: Vec<&RepositoryStore> = std::iter::once(store).chain(peers).collect();
    let entries = refs
        .map(|(kind, r)| {
            let decided = stores.iter().enumerate().find_map(|(i, s)| {
                let found = candidates(s, &r.target);
                (!found.is_empty()).then_some((i, found))
            });
            let (outcome, store) = match decided {
                None => (LinkOutcome::Unresolved, None),
                Some((i, found)) => {
                    let ok = r
                        .expected_digest
                        .as_ref()
                        .is_some_and(|d| found.iter().any(|b| d.matches(b)));
                    let outcome = if ok {
                        LinkOutcome::ResolvedMatch
                    } else {
                        LinkOutcome::ResolvedMismatch
                    };
                    (outcome, Some(i))
                }
            };
            LinkScanEntry {
                kind,
                reference: r.clone(),
                outcome,
                store,
            }
        })
        .collect();
    Ok(LinkScanReport {
        version_id: id.clone(),
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreMismatch {
    pub version_id: VersionId,
    pub reason: String,
}

/// Check every indexed object against its index entry and its own id.
pub fn verify_all(store: &RepositoryStore) -> Result<Vec<StoreMismatch>> {
    verify_all_with(ExecutionMode::default(), store)
}

pub fn verify_all_with(mode: ExecutionMode, store: &RepositoryStore) -> Result<Vec<StoreMismatch>> {
    let ids = store.versions()?;
    let results = map_items(mode, &ids, |id| {
        let reason = match retrieve(store, id) {
            Err(e) => Some(e.to_string()),
            Ok(b) => match canonical::decode(&b) {
                Err(e) => Some(format!("stored object does not decode: {e}")),
                Ok(t) if t.version_id() != id => {
                    Some(format!("stored object carries id {}", t.version_id()))
                }
                Ok(_) => None,
            },
        };
        reason.map(|reason| StoreMismatch {
            version_id: id.clone(),
            reason,
        })
    });
    Ok(results.into_iter().flatten().collect())
}

impl ReferentResolver for RepositoryStore {
    fn resolve(&self, target: &RefTarget) -> Vec<Vec<u8>> {
        candidates(self, target)
    }
}

impl ReferentResolver for [RepositoryStore] {
    fn resolve(&self, target: &RefTarget) -> Vec<Vec<u8>> {
        self.iter().flat_map(|s| candidates(s, target)).collect()
    }
}

impl ReferentResolver for Vec<RepositoryStore> {
    fn resolve(&self, target: &RefTarget) -> Vec<Vec<u8>> {
        self.as_slice().resolve(target)
    }
}
