use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use tdo::model::MetadataSet;
use tdo::repository::{audit_replicas, scan_links};
use tdo::trust::GroundingPath;
use tdo::vm::replay::{events_from_document, events_to_document};
use tdo::*;

use crate::{Cli, CliConfig, Command, DeriveArgs, ExitStatus, ModeArg, OutputMode, PackArgs};

pub(crate) struct Io<'a> {
    pub stdin: &'a mut dyn Read,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(PathBuf, std::io::Error),
    Core(Error),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Core(Error::UnverifiablePredecessor(_)) => ExitStatus::Reject,
            CliError::Io(..) | CliError::Core(_) => ExitStatus::Failure,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(PathBuf::from("-"), e)
    }
}

type Outcome = std::result::Result<ExitStatus, CliError>;

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn is_std(path: &Path) -> bool {
    path.as_os_str() == "-"
}

fn read_input(io: &mut Io, path: &Path) -> std::result::Result<Vec<u8>, CliError> {
    if is_std(path) {
        let mut buf = Vec::new();
        io.stdin.read_to_end(&mut buf)?;
        Ok(buf)
    } else {
        fs::read(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> std::result::Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

/// Write the command's product to `--out`, or stdout.
fn emit(cfg: &CliConfig, io: &mut Io, bytes: &[u8]) -> std::result::Result<(), CliError> {
    match &cfg.out {
        Some(p) if !is_std(p) => write_file(p, bytes),
        _ => Ok(io.stdout.write_all(bytes)?),
    }
}

fn verdict(ok: bool) -> ExitStatus {
    if ok {
        ExitStatus::Accept
    } else {
        ExitStatus::Reject
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn print_checks(out: &mut dyn Write, checks: &[(&str, bool)], reasons: &[String]) -> std::io::Result<()> {
    for (name, ok) in checks {
        writeln!(out, "check: {name} {}", pass(*ok))?;
    }
    for r in reasons {
        writeln!(out, "reason: {r}")?;
    }
    Ok(())
}

fn grounding_name(g: Option<GroundingPath>) -> &'static str {
    match g {
        Some(GroundingPath::RootEpoch) => "root-epoch",
        Some(GroundingPath::PeerKey) => "peer-key",
        None => "none",
    }
}

fn load_trust(cfg: &CliConfig) -> std::result::Result<TrustStore, CliError> {
    Ok(TrustStore::load(&cfg.trust_store)?)
}

fn stores(cfg: &CliConfig) -> std::result::Result<Vec<RepositoryStore>, CliError> {
    if cfg.repos.is_empty() {
        return Err(usage("no repository: pass --repo or set TDO_REPO"));
    }
    cfg.repos
        .iter()
        .map(|r| RepositoryStore::open(r).map_err(CliError::from))
        .collect()
}

fn parse_id<T: std::str::FromStr>(s: &str) -> std::result::Result<T, CliError> {
    s.parse().map_err(|_| usage(format!("`{s}` is not a version identifier")))
}

fn split_pair<'s>(arg: &'s str, flag: &str) -> std::result::Result<(&'s str, &'s str), CliError> {
    arg.split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| usage(format!("--{flag} expects NAME=VALUE, got `{arg}`")))
}

pub(crate) fn dispatch(cli: &Cli, io: &mut Io) -> Outcome {
    let cfg = &cli.config;
    match &cli.command {
        Command::Keygen { path, alg } => keygen(io, path, alg),
        Command::RootAdd { institution, year, key } => {
            let key = PublicKey::from_file_bytes(&read_input(io, key)?)?;
            let trust = load_trust(cfg)?.register_root_epoch(institution, *year, key)?;
            trust.save(&cfg.trust_store)?;
            writeln!(io.stdout, "epoch: {institution} {year}")?;
            Ok(ExitStatus::Accept)
        }
        Command::PeerAdd { name, key } => {
            let key = PublicKey::from_file_bytes(&read_input(io, key)?)?;
            let trust = load_trust(cfg)?.add_peer_key(name, key)?;
            trust.save(&cfg.trust_store)?;
            writeln!(io.stdout, "peer: {name}")?;
            Ok(ExitStatus::Accept)
        }
        Command::CertIssue { issuer_key, issuer_cert, subject_key, name, role, valid_from, valid_to } => {
            let issuer = KeyPair::from_file_bytes(&read_input(io, issuer_key)?)?;
            let parent = match issuer_cert {
                Some(p) => Some(Certificate::from_document(&read_input(io, p)?)?),
                None => None,
            };
            let subject = PublicKey::from_file_bytes(&read_input(io, subject_key)?)?;
            let role: Role = role.parse()?;
            let cert = issue_certificate(&issuer, parent.as_ref(), &subject, name, role, *valid_from, *valid_to)?;
            emit(cfg, io, cert.to_document().as_bytes())?;
            Ok(ExitStatus::Accept)
        }
        Command::Pack(args) => {
            let payload = build_payload(io, args)?;
            let id = derive_version_id(&payload)?;
            let statement = ProvenanceStatement {
                creator: args.creator.clone(),
                created: Created::Version(id),
                event: args.event.clone(),
            };
            let tdo = new_tdo(payload, parse_meta(&args.meta)?, statement)?;
            emit(cfg, io, encode(&tdo)?.as_bytes())?;
            Ok(ExitStatus::Accept)
        }
        Command::Seal { input, key, cert, issuers, date } => {
            let tdo = decode(&read_input(io, input)?)?;
            let signer = KeyPair::from_file_bytes(&read_input(io, key)?)?;
            let signer_cert = Certificate::from_document(&read_input(io, cert)?)?;
            let issuers = issuers
                .iter()
                .map(|p| Ok(Certificate::from_document(&read_input(io, p)?)?))
                .collect::<std::result::Result<Vec<_>, CliError>>()?;
            let sealed = seal_tdo(&tdo, &signer, &signer_cert, &issuers, *date)?;
            emit(cfg, io, encode(&sealed)?.as_bytes())?;
            Ok(ExitStatus::Accept)
        }
        Command::Verify { input } => {
            let bytes = read_input(io, input)?;
            let report = verify_seal(&bytes, &load_trust(cfg)?);
            print_checks(io.stdout, &report.checks(), &report.reasons)?;
            writeln!(io.stdout, "grounded: {}", grounding_name(report.grounded_via))?;
            writeln!(io.stdout, "verdict: {}", if report.accepted() { "accept" } else { "reject" })?;
            Ok(verdict(report.accepted()))
        }
        Command::Inspect { input } => inspect(cfg, io, input),
        Command::Derive(args) => derive(cfg, io, args),
        Command::Judge { input, policy } => {
            let tdo = decode(&read_input(io, input)?)?;
            let policy = GenrePolicy::from_document(&read_input(io, policy)?)?;
            let trust = load_trust(cfg)?;
            let v = if cfg.repos.is_empty() {
                judge_authenticity(&tdo, &policy, &trust, &BTreeMap::<VersionId, Vec<u8>>::new())
            } else {
                judge_authenticity(&tdo, &policy, &trust, stores(cfg)?.as_slice())
            };
            print_checks(io.stdout, &v.checks(), &v.reasons)?;
            writeln!(io.stdout, "verdict: {}", if v.authentic { "accept" } else { "reject" })?;
            Ok(verdict(v.authentic))
        }
        Command::PolicyInit { genre, allowed_kinds, required_metadata } => {
            let policy = GenrePolicy::new(genre, allowed_kinds.iter().cloned(), required_metadata.iter().cloned())?;
            emit(cfg, io, policy.to_document().as_bytes())?;
            Ok(ExitStatus::Accept)
        }
        Command::VmAsm { input, disassemble: dis } => {
            let bytes = read_input(io, input)?;
            let out = if *dis {
                tdo::disassemble(&VmProgram::from_bytes(&bytes)?).into_bytes()
            } else {
                let src = String::from_utf8(bytes).map_err(|_| usage("assembly source is not UTF-8"))?;
                assemble(&src)?.to_bytes()
            };
            emit(cfg, io, &out)?;
            Ok(ExitStatus::Accept)
        }
        Command::VmRun { input, input_file, blob, events } => vm_run(cfg, io, input, input_file, blob, events),
        Command::VmSpec { digest } => {
            if *digest {
                writeln!(io.stdout, "{}", vm_spec_ref())?;
            } else {
                emit(cfg, io, vm_self_description().as_bytes())?;
            }
            Ok(ExitStatus::Accept)
        }
        Command::ReplayCheck { expected, actual } => {
            let a = events_from_document(&read_input(io, expected)?)?;
            let b = events_from_document(&read_input(io, actual)?)?;
            let shift = replay_equivalent(&a, &b);
            writeln!(io.stdout, "check: replay {}", pass(shift.is_some()))?;
            match shift {
                Some(c) => writeln!(io.stdout, "shift: {c}")?,
                None => writeln!(io.stdout, "reason: streams differ beyond a constant time shift")?,
            }
            Ok(verdict(shift.is_some()))
        }
        Command::Ingest { inputs } => {
            let store = stores(cfg)?.swap_remove(0);
            for input in inputs {
                let bytes = read_input(io, input)?;
                let id = ingest(&store, &bytes)?;
                writeln!(io.stdout, "ingested: {id}")?;
            }
            Ok(ExitStatus::Accept)
        }
        Command::Get { version } => {
            let id: VersionId = parse_id(version)?;
            let mut last = None;
            for store in stores(cfg)? {
                match retrieve(&store, &id) {
                    Ok(bytes) => {
                        emit(cfg, io, &bytes)?;
                        return Ok(ExitStatus::Accept);
                    }
                    Err(e) => {
                        writeln!(io.stderr, "{}: {e}", store.root().display())?;
                        last = Some(e);
                    }
                }
            }
            Err(last.map(CliError::Core).unwrap_or_else(|| usage("no repository")))
        }
        Command::Resolve { work } => {
            let work: WorkId = parse_id(work)?;
            for id in resolve_work(&stores(cfg)?[0], &work)? {
                writeln!(io.stdout, "{id}")?;
            }
            Ok(ExitStatus::Accept)
        }
        Command::Replicate { version } => {
            let id: VersionId = parse_id(version)?;
            let all = stores(cfg)?;
            if all.len() < 2 {
                return Err(usage("replicate needs a source --repo and at least one target --repo"));
            }
            for target in &all[1..] {
                let wrote = replicate(&all[0], target, &id)?;
                let what = if wrote { "replicated" } else { "present" };
                writeln!(io.stdout, "{what}: {}", target.root().display())?;
            }
            Ok(ExitStatus::Accept)
        }
        Command::Audit { version, threshold } => {
            let id: VersionId = parse_id(version)?;
            let r = audit_replicas(&stores(cfg)?, &id, *threshold);
            match cfg.output_mode {
                OutputMode::Document => emit(cfg, io, r.to_document().as_bytes())?,
                OutputMode::Text => {
                    writeln!(io.stdout, "version: {}", r.version_id)?;
                    writeln!(io.stdout, "found: {}", r.replicas_found)?;
                    writeln!(io.stdout, "verified: {}", r.replicas_verified)?;
                    writeln!(io.stdout, "threshold: {}", r.threshold)?;
                    writeln!(io.stdout, "check: replicas {}", pass(!r.at_risk))?;
                    writeln!(io.stdout, "at-risk: {}", r.at_risk)?;
                }
            }
            Ok(verdict(!r.at_risk))
        }
        Command::ScanLinks { version } => {
            let id: VersionId = parse_id(version)?;
            let all = stores(cfg)?;
            let report = scan_links(&all[0], &id, &all[1..])?;
            match cfg.output_mode {
                OutputMode::Document => emit(cfg, io, report.to_document().as_bytes())?,
                OutputMode::Text => {
                    for e in &report.entries {
                        let place = e.store.map(|s| all[s].root().display().to_string()).unwrap_or_else(|| "-".into());
                        writeln!(io.stdout, "{} {} {} {place}", e.kind.as_str(), e.reference.target, e.outcome)?;
                    }
                    writeln!(io.stdout, "check: links {}", pass(report.all_match()))?;
                }
            }
            Ok(verdict(report.all_match()))
        }
    }
}

fn keygen(io: &mut Io, path: &Path, alg: &str) -> Outcome {
    let kp = generate_keypair(alg)?;
    let mut public = path.as_os_str().to_owned();
    public.push(".pub");
    let public = PathBuf::from(public);
    write_file(path, &kp.to_file_bytes())?;
    write_file(&public, &kp.public().to_file_bytes())?;
    writeln!(io.stdout, "secret: {}", path.display())?;
    writeln!(io.stdout, "public: {}", public.display())?;
    writeln!(io.stdout, "fingerprint: {}", Digest::of(&kp.public_key_bytes()))?;
    Ok(ExitStatus::Accept)
}

fn parse_meta(args: &[String]) -> std::result::Result<Vec<MetadataRecord>, CliError> {
    args.iter()
        .map(|a| {
            let (key, value) = split_pair(a, "meta")?;
            Ok(match key.split_once(':') {
                Some((scheme, key)) => MetadataRecord::namespaced(scheme, key, value),
                None => MetadataRecord::builtin(key, value),
            })
        })
        .collect()
}

fn build_payload(io: &mut Io, args: &PackArgs) -> std::result::Result<Vec<ContentBlob>, CliError> {
    let mut media = BTreeMap::new();
    for m in &args.media {
        let (name, ty) = split_pair(m, "media")?;
        media.insert(name.to_string(), ty.to_string());
    }
    let media_of = |name: &str| media.get(name).cloned().unwrap_or_else(|| "application/octet-stream".into());

    let mut payload = Vec::new();
    for b in &args.blobs {
        let (name, path) = split_pair(b, "blob")?;
        payload.push(ContentBlob::raw(name, media_of(name), read_input(io, Path::new(path))?));
    }
    for p in &args.programs {
        let (name, path) = split_pair(p, "program")?;
        let src = String::from_utf8(read_input(io, Path::new(path))?)
            .map_err(|_| usage(format!("{path}: assembly source is not UTF-8")))?;
        payload.push(ContentBlob::program(name, &assemble(&src)?));
    }
    for e in &args.encoded {
        let (name, rest) = split_pair(e, "encoded")?;
        let (path, program) = rest
            .rsplit_once('@')
            .ok_or_else(|| usage(format!("--encoded expects NAME=PATH@PROGRAM, got `{e}`")))?;
        let decoder = payload
            .iter()
            .find(|b| b.name == program && b.encoding == BlobEncoding::VmProgram)
            .cloned()
            .ok_or_else(|| usage(format!("--encoded names `{program}`, which is not a --program blob")))?;
        let bytes = read_input(io, Path::new(path))?;
        payload.push(ContentBlob::vm_encoded(name, media_of(name), bytes, &decoder));
    }
    if payload.is_empty() {
        return Err(usage("a payload needs at least one --blob, --program or --encoded"));
    }
    Ok(payload)
}

fn derive(cfg: &CliConfig, io: &mut Io, args: &DeriveArgs) -> Outcome {
    let predecessor = decode(&read_input(io, &args.predecessor)?)?;
    let payload = build_payload(io, &args.pack)?;
    let source = match &args.from {
        Some(n) => predecessor.blob(n).ok_or_else(|| usage(format!("predecessor has no blob `{n}`")))?,
        None => &predecessor.payload[0],
    };
    let result = match &args.to {
        Some(n) => payload.iter().find(|b| &b.name == n).ok_or_else(|| usage(format!("no new blob `{n}`")))?,
        None => &payload[0],
    };
    let statement = record_transformation(
        &DerivationStatement::identity(&source.bytes),
        &args.kind,
        &source.bytes,
        &result.bytes,
        &args.agent,
        &args.pack.event,
        args.date,
    )?;
    let provenance = ProvenanceStatement {
        creator: args.pack.creator.clone(),
        created: Created::Digest(result.digest()),
        event: args.pack.event.clone(),
    };
    let mode = match args.mode {
        ModeArg::Link => DeriveMode::Link,
        ModeArg::Nest => DeriveMode::Nest,
    };
    let mut draft = derive_version(&predecessor, payload, mode, &statement, provenance, &load_trust(cfg)?)?;
    if !args.pack.meta.is_empty() {
        let mut meta: MetadataSet = draft.protection.metadata.clone();
        for r in parse_meta(&args.pack.meta)? {
            meta.insert(r);
        }
        let records: Vec<_> = meta.records().collect();
        draft = draft.with_metadata(records)?;
    }
    emit(cfg, io, encode(&draft)?.as_bytes())?;
    Ok(ExitStatus::Accept)
}

fn vm_run(
    cfg: &CliConfig,
    io: &mut Io,
    input: &Path,
    input_file: &Option<PathBuf>,
    blob: &Option<String>,
    events: &Option<PathBuf>,
) -> Outcome {
    let bytes = read_input(io, input)?;
    if let Some(name) = blob {
        let tdo = decode(&bytes)?;
        let b = tdo.blob(name).ok_or_else(|| usage(format!("object has no blob `{name}`")))?;
        emit(cfg, io, &decode_content(b, &tdo, cfg.fuel)?)?;
        return Ok(ExitStatus::Accept);
    }
    let program = match VmProgram::from_bytes(&bytes) {
        Ok(p) => p,
        Err(binary_err) => match std::str::from_utf8(&bytes) {
            Ok(src) => assemble(src)?,
            Err(_) => return Err(binary_err.into()),
        },
    };
    let data = match input_file {
        Some(p) => read_input(io, p)?,
        None => Vec::new(),
    };
    let r = execute(&program, &data, cfg.fuel);
    emit(cfg, io, &r.output)?;
    if let Some(p) = events {
        write_file(p, events_to_document(&r.events).as_bytes())?;
    }
    writeln!(io.stderr, "halt: {}", r.halted.as_str())?;
    if let Halt::Trap { offset, reason } = &r.halted {
        writeln!(io.stderr, "trap: offset {offset}: {reason}")?;
    }
    writeln!(io.stderr, "instructions: {}", r.instructions_executed)?;
    writeln!(io.stderr, "events: {}", r.events.len())?;
    Ok(verdict(r.halted == Halt::Normal))
}

fn inspect(cfg: &CliConfig, io: &mut Io, input: &Path) -> Outcome {
    let bytes = read_input(io, input)?;
    let tdo = decode(&bytes)?;
    let trust = load_trust(cfg)?;
    let out = &mut *io.stdout;
    let p = &tdo.protection;
    writeln!(out, "version: {}", p.version_id)?;
    writeln!(out, "work: {}", p.work_id)?;
    writeln!(out, "document-digest: {}", canonical_digest(&bytes))?;
    if let Some(d) = &p.vm_spec_ref {
        writeln!(out, "vm-spec: {d}")?;
    }
    for b in &tdo.payload {
        write!(out, "blob: {} {} {} {} bytes {}", b.name, b.encoding.as_str(), b.media_hint, b.bytes.len(), b.digest())?;
        if let Some(d) = &b.decoder_ref {
            write!(out, " decoder {d}")?;
        }
        writeln!(out)?;
    }
    for r in p.metadata.records() {
        writeln!(out, "meta: {} = {:?}", r.qualified_key(), r.value)?;
    }
    match &p.provenance_statement {
        Some(s) => writeln!(out, "statement: {:?} created {} in {:?}", s.creator, s.created, s.event)?,
        None => writeln!(out, "statement: absent")?,
    }
    for s in &p.provenance {
        writeln!(
            out,
            "step {}: {} {} -> {} by {:?} in {:?} on {}",
            s.index, s.kind, s.input_digest, s.output_digest, s.agent, s.event, s.timestamp
        )?;
    }
    for (label, refs) in [("predecessor", &p.predecessors), ("link", &p.links)] {
        for r in refs {
            let d = r.expected_digest.as_ref().map(ToString::to_string).unwrap_or_else(|| "-".into());
            writeln!(out, "{label}: {} {d} {:?}", r.target, r.relation)?;
        }
    }
    match &tdo.seal {
        None => writeln!(out, "seal: absent")?,
        Some(seal) => {
            writeln!(out, "seal: {} chain of {}", seal.seal_date, seal.chain.len())?;
            for (i, c) in seal.chain.iter().enumerate() {
                writeln!(out, "cert {i}: {} {:?} {} .. {}", c.role, c.subject_name, c.valid_from, c.valid_to)?;
            }
            let report = verify_tdo(&tdo, &trust);
            print_checks(out, &report.checks(), &report.reasons)?;
            writeln!(out, "grounded: {}", grounding_name(report.grounded_via))?;
        }
    }
    if !cfg.repos.is_empty() {
        for h in trace_history(&tdo, stores(cfg)?.as_slice())? {
            writeln!(out, "history: {} {}", h.version_id, if h.verified { "verified" } else { "unverified" })?;
        }
    }
    Ok(ExitStatus::Accept)
}
