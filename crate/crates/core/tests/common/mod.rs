#![allow(dead_code)]

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRng, TestRunner};

use tdo::model::{BUILTIN_METADATA_KEYS};
use tdo::provenance::{Created, TransformationRecord};
use tdo::sample::{self, Hierarchy};
use tdo::*;

/// Any text, control characters and non-ASCII included.
pub fn text(min: usize, max: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(any::<char>(), min..=max).prop_map(|v| v.into_iter().collect())
}

pub fn bytes(max: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(any::<u8>(), 0..=max)
}

pub fn digest() -> impl Strategy<Value = Digest> {
    (any::<bool>(), bytes(16)).prop_map(|(long, b)| {
        let alg = if long { DigestAlgorithm::Sha512 } else { DigestAlgorithm::Sha256 };
        alg.hash(&b)
    })
}

pub fn version_id() -> impl Strategy<Value = VersionId> {
    bytes(16).prop_map(|b| VersionId::from_digest(&Digest::of(&b)))
}

pub fn reference() -> impl Strategy<Value = ExternalReference> {
    (any::<bool>(), version_id(), digest(), text(1, 8)).prop_map(|(work, v, d, rel)| {
        let target = if work {
            RefTarget::Work(WorkId::from(&v))
        } else {
            RefTarget::Version(v)
        };
        ExternalReference::new(target, d, rel)
    })
}

pub fn metadata() -> impl Strategy<Value = Vec<MetadataRecord>> {
    let builtin = (0..BUILTIN_METADATA_KEYS.len(), text(0, 12))
        .prop_map(|(i, v)| MetadataRecord::builtin(BUILTIN_METADATA_KEYS[i], v));
    let namespaced = (text(1, 6), text(1, 6), text(0, 12))
        .prop_map(|(s, k, v)| MetadataRecord::namespaced(s, k, v));
    proptest::collection::vec(prop_oneof![builtin, namespaced], 0..5)
}

fn payload() -> impl Strategy<Value = Vec<ContentBlob>> {
    (
        proptest::collection::vec((text(0, 6), text(0, 10), bytes(48)), 1..4),
        any::<bool>(),
    )
        .prop_map(|(blobs, with_vm)| {
            let mut out: Vec<ContentBlob> = blobs
                .into_iter()
                .enumerate()
                .map(|(i, (name, media, b))| ContentBlob::raw(format!("{i}{name}"), media, b))
                .collect();
            if with_vm {
                let decoder = ContentBlob::program("vm/rle", &vm::corpus::rle_decode());
                let encoded = ContentBlob::vm_encoded(
                    "vm/data",
                    "application/octet-stream",
                    vm::corpus::rle_encode(b"aaabcc"),
                    &decoder,
                );
                out.push(decoder);
                out.push(encoded);
            }
            out
        })
}

fn steps() -> impl Strategy<Value = Vec<TransformationRecord>> {
    (
        proptest::collection::vec((text(1, 6), text(1, 6), text(1, 6), 1..3650i64), 0..4),
        digest(),
    )
        .prop_map(|(raw, first)| {
            let mut input = first;
            raw.into_iter()
                .enumerate()
                .map(|(i, (kind, agent, event, day))| {
                    let output = Digest::of(format!("{i}{kind}").as_bytes());
                    let rec = TransformationRecord {
                        index: i as u64 + 1,
                        kind,
                        input_digest: input.clone(),
                        output_digest: output.clone(),
                        agent,
                        event,
                        timestamp: sample::date(2000, 1, 1) + chrono::Duration::days(day),
                    };
                    input = output;
                    rec
                })
                .collect()
        })
}

fn statement() -> impl Strategy<Value = Option<ProvenanceStatement>> {
    proptest::option::weighted(
        0.8,
        (text(1, 8), any::<bool>(), digest(), version_id(), text(1, 8)).prop_map(
            |(creator, by_version, d, v, event)| ProvenanceStatement {
                creator,
                created: if by_version { Created::Version(v) } else { Created::Digest(d) },
                event,
            },
        ),
    )
}

/// Structurally valid objects: first versions or later versions, optionally
/// sealed through a fixed three-level hierarchy.
pub fn tdo() -> impl Strategy<Value = TrustworthyDigitalObject> {
    (
        payload(),
        metadata(),
        statement(),
        steps(),
        proptest::collection::vec(reference(), 0..3),
        proptest::option::of((version_id(), proptest::collection::vec(reference(), 1..3))),
        any::<bool>(),
    )
        .prop_map(|(payload, meta, stmt, steps, links, later, sealed)| {
            let version_id = derive_version_id(&payload).unwrap();
            let (work_id, predecessors) = match later {
                Some((w, preds)) if w != version_id => (WorkId::from(&w), preds),
                _ => (WorkId::from(&version_id), Vec::new()),
            };
            let needs_vm = payload.iter().any(|b| b.encoding != BlobEncoding::Raw);
            let t = TrustworthyDigitalObject {
                payload,
                protection: ProtectionBlock {
                    version_id,
                    work_id,
                    provenance: steps,
                    provenance_statement: stmt,
                    predecessors,
                    links,
                    metadata: meta.into_iter().collect(),
                    vm_spec_ref: needs_vm.then(vm_spec_ref),
                },
                seal: None,
            };
            assert!(validate_structure(&t).is_empty(), "{:?}", validate_structure(&t));
            if sealed {
                hierarchy().seal(&t, sample::seal_date()).unwrap()
            } else {
                t
            }
        })
}

pub fn hierarchy() -> Hierarchy {
    Hierarchy::new("Generated Archive", 40)
}

/// Draw `n` values from `strategy` with a fixed seed.
pub fn draw<S: Strategy>(strategy: S, n: usize, seed: u8) -> Vec<S::Value> {
    let mut runner = TestRunner::new_with_rng(
        Config::default(),
        TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &[seed; 32]),
    );
    (0..n)
        .map(|_| strategy.new_tree(&mut runner).expect("strategy draws").current())
        .collect()
}

/// Independent run-length decoder: (count, value) pairs, odd tail ignored.
pub fn rle_oracle(encoded: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < encoded.len() {
        out.extend(std::iter::repeat_n(encoded[i + 1], encoded[i] as usize));
        i += 2;
    }
    out
}

/// Independent 2-tag system: delete two, append the head's production.
pub fn tag_oracle(rules: &[(u8, &[u8])], word: &[u8], max_steps: usize) -> Vec<u8> {
    let mut q: std::collections::VecDeque<u8> = word.iter().copied().collect();
    for _ in 0..max_steps {
        if q.len() < 2 {
            break;
        }
        let Some((_, prod)) = rules.iter().find(|(s, _)| *s == q[0]) else {
            break;
        };
        q.extend(prod.iter());
        q.pop_front();
        q.pop_front();
    }
    q.into_iter().collect()
}

/// Fibonacci mod 2^64 by direct iteration.
pub fn fib_oracle(k: u64) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..k {
        let n = a.wrapping_add(b);
        a = b;
        b = n;
    }
    a
}

/// Five sealed objects: object i links to object i-1, and the last also
/// links to every earlier one. Returns `(id, sealed bytes)` in build order.
pub fn linked_corpus(h: &Hierarchy) -> Vec<(VersionId, Vec<u8>)> {
    let mut out: Vec<(VersionId, Vec<u8>)> = Vec::new();
    for i in 0..5 {
        let targets: Vec<&(VersionId, Vec<u8>)> = match i {
            0 => vec![],
            4 => out.iter().collect(),
            _ => vec![&out[i - 1]],
        };
        let links = targets
            .iter()
            .map(|(id, b)| ExternalReference::new(RefTarget::Version(id.clone()), Digest::of(b), "cites"))
            .collect();
        let t = sample::text_object(&format!("Part {i}"), &format!("contents of part {i}"))
            .with_links(links)
            .unwrap();
        let sealed = h.seal(&t, sample::seal_date()).unwrap();
        out.push((sealed.version_id().clone(), encode(&sealed).unwrap().into_bytes()));
    }
    out
}

pub fn sealed_bytes(h: &Hierarchy, title: &str, body: &str) -> Vec<u8> {
    let t = h.seal(&sample::text_object(title, body), sample::seal_date()).unwrap();
    encode(&t).unwrap().into_bytes()
}
