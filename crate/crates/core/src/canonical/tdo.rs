use chrono::NaiveDate;

use super::markup::Element;
use super::{b64, unb64, FORMAT};
use crate::digest::Digest;
use crate::error::Result;
use crate::model::{
    ContentBlob, ExternalReference, MetadataRecord, MetadataSet, ProtectionBlock,
    TrustworthyDigitalObject,
};
use crate::provenance::{ProvenanceStatement, TransformationRecord};
use crate::trust::{Certificate, Seal};

fn blob_to_el(blob: &ContentBlob) -> Element {
    Element::new("blob")
        .attr_opt("decoder", blob.decoder_ref.as_ref().map(Digest::to_string))
        .attr("encoding", blob.encoding.as_str())
        .attr("media", blob.media_hint.clone())
        .attr("name", blob.name.clone())
        .text(b64(&blob.bytes))
}

fn payload_to_el(payload: &[ContentBlob]) -> Element {
    Element::new("payload").children(payload.iter().map(blob_to_el))
}

/// Canonical bytes of the `<payload>` element; the preimage of a version id.
pub(crate) fn encode_payload_block(payload: &[ContentBlob]) -> Vec<u8> {
    payload_to_el(payload).to_bytes()
}

fn ref_to_el(r: &ExternalReference) -> Element {
    Element::new("ref")
        .attr_opt("digest", r.expected_digest.as_ref().map(Digest::to_string))
        .attr("relation", r.relation.clone())
        .attr("target", r.target.to_string())
}

fn step_to_el(s: &TransformationRecord) -> Element {
    Element::new("step")
        .attr("agent", s.agent.clone())
        .attr("event", s.event.clone())
        .attr("index", s.index.to_string())
        .attr("input", s.input_digest.to_string())
        .attr("kind", s.kind.clone())
        .attr("output", s.output_digest.to_string())
        .attr("timestamp", s.timestamp.to_string())
}

fn protection_to_el(p: &ProtectionBlock) -> Element {
    let mut el = Element::new("protection")
        .attr("version", p.version_id.to_string())
        .attr_opt("vm-spec", p.vm_spec_ref.as_ref().map(Digest::to_string))
        .attr("work", p.work_id.to_string());
    if let Some(s) = &p.provenance_statement {
        el = el.child(
            Element::new("statement")
                .attr("created", s.created.to_string())
                .attr("creator", s.creator.clone())
                .attr("event", s.event.clone()),
        );
    }
    el.child(Element::new("provenance").children(p.provenance.iter().map(step_to_el)))
        .child(Element::new("predecessors").children(p.predecessors.iter().map(ref_to_el)))
        .child(Element::new("links").children(p.links.iter().map(ref_to_el)))
        .child(Element::new("metadata").children(p.metadata.records().map(|r| {
            Element::new("meta")
                .attr("key", r.key)
                .attr("scheme", r.scheme)
                .text(r.value)
        })))
}

pub(crate) fn cert_to_el(c: &Certificate, with_signature: bool) -> Element {
    Element::new("cert")
        .attr("alg", c.algorithm.tag())
        .attr_opt("issuer", c.issuer_digest.as_ref().map(Digest::to_string))
        .attr("key", b64(&c.subject_public_key))
        .attr("name", c.subject_name.clone())
        .attr("role", c.role.as_str())
        .attr_opt("signature", with_signature.then(|| b64(&c.signature)))
        .attr("valid-from", c.valid_from.to_string())
        .attr("valid-to", c.valid_to.to_string())
}

fn seal_to_el(s: &Seal, with_signature: bool) -> Element {
    Element::new("seal")
        .attr("date", s.seal_date.to_string())
        .attr_opt("signature", with_signature.then(|| b64(&s.signature)))
        .children(s.chain.iter().map(|c| cert_to_el(c, true)))
}

pub(crate) fn tdo_to_el(tdo: &TrustworthyDigitalObject, seal_signature: bool) -> Element {
    let mut el = Element::new("tdo")
        .attr("format", FORMAT)
        .child(payload_to_el(&tdo.payload))
        .child(protection_to_el(&tdo.protection));
    if let Some(seal) = &tdo.seal {
        el = el.child(seal_to_el(seal, seal_signature));
    }
    el
}

/// The bytes a seal signs: the whole document with the seal's own
/// signature attribute left out. Seal date and chain are covered.
pub(crate) fn seal_message(tdo: &TrustworthyDigitalObject) -> Vec<u8> {
    tdo_to_el(tdo, false).to_bytes()
}

// -- decoding -------------------------------------------------------------

fn blob_from_el(el: &Element) -> Result<ContentBlob> {
    el.expect_name("blob")?;
    el.only_attrs(&["decoder", "encoding", "media", "name"])?;
    el.no_children()?;
    Ok(ContentBlob {
        name: el.req("name")?.to_string(),
        media_hint: el.req("media")?.to_string(),
        encoding: el.parse_req("encoding")?,
        bytes: unb64(el, &el.text)?,
        decoder_ref: el.parse_opt("decoder")?,
    })
}

fn ref_from_el(el: &Element) -> Result<ExternalReference> {
    el.only_attrs(&["digest", "relation", "target"])?;
    el.no_children()?;
    el.no_text()?;
    Ok(ExternalReference {
        target: el.parse_req("target")?,
        expected_digest: el.parse_opt("digest")?,
        relation: el.req("relation")?.to_string(),
    })
}

fn step_from_el(el: &Element) -> Result<TransformationRecord> {
    el.only_attrs(&["agent", "event", "index", "input", "kind", "output", "timestamp"])?;
    el.no_children()?;
    el.no_text()?;
    Ok(TransformationRecord {
        index: el.parse_req("index")?,
        kind: el.req("kind")?.to_string(),
        input_digest: el.parse_req("input")?,
        output_digest: el.parse_req("output")?,
        agent: el.req("agent")?.to_string(),
        event: el.req("event")?.to_string(),
        timestamp: el.parse_req::<NaiveDate>("timestamp")?,
    })
}

fn protection_from_el(el: &Element) -> Result<ProtectionBlock> {
    el.expect_name("protection")?;
    el.only_attrs(&["version", "vm-spec", "work"])?;
    el.no_text()?;
    let mut kids = el.children.iter().peekable();
    let provenance_statement = match kids.next_if(|s| s.name == "statement") {
        Some(s) => {
            s.only_attrs(&["created", "creator", "event"])?;
            s.no_children()?;
            s.no_text()?;
            Some(ProvenanceStatement {
                creator: s.req("creator")?.to_string(),
                created: s.parse_req("created")?,
                event: s.req("event")?.to_string(),
            })
        }
        _ => None,
    };
    let mut section = |name: &str| -> Result<&Element> {
        match kids.next() {
            Some(k) => {
                k.expect_name(name)?;
                k.only_attrs(&[])?;
                Ok(k)
            }
            None => Err(el.err(format!("missing <{name}>"))),
        }
    };
    let provenance = section("provenance")?
        .children_named("step")?
        .iter()
        .map(step_from_el)
        .collect::<Result<Vec<_>>>()?;
    let predecessors = section("predecessors")?
        .children_named("ref")?
        .iter()
        .map(ref_from_el)
        .collect::<Result<Vec<_>>>()?;
    let links = section("links")?
        .children_named("ref")?
        .iter()
        .map(ref_from_el)
        .collect::<Result<Vec<_>>>()?;
    let meta_el = section("metadata")?;
    let mut metadata = MetadataSet::new();
    for m in meta_el.children_named("meta")? {
        m.only_attrs(&["key", "scheme"])?;
        m.no_children()?;
        let record = MetadataRecord {
            key: m.req("key")?.to_string(),
            value: m.text.clone(),
            scheme: m.req("scheme")?.to_string(),
        };
        if metadata.insert(record).is_some() {
            return Err(m.err("duplicate metadata key"));
        }
    }
    if let Some(extra) = kids.next() {
        return Err(extra.err("unexpected element"));
    }
    Ok(ProtectionBlock {
        version_id: el.parse_req("version")?,
        work_id: el.parse_req("work")?,
        provenance,
        provenance_statement,
        predecessors,
        links,
        metadata,
        vm_spec_ref: el.parse_opt("vm-spec")?,
    })
}

pub(crate) fn cert_from_el(el: &Element) -> Result<Certificate> {
    el.expect_name("cert")?;
    el.only_attrs(&["alg", "issuer", "key", "name", "role", "signature", "valid-from", "valid-to"])?;
    el.no_children()?;
    el.no_text()?;
    Ok(Certificate {
        algorithm: el.parse_req("alg")?,
        subject_public_key: unb64(el, el.req("key")?)?,
        subject_name: el.req("name")?.to_string(),
        role: el.parse_req("role")?,
        issuer_digest: el.parse_opt("issuer")?,
        valid_from: el.parse_req("valid-from")?,
        valid_to: el.parse_req("valid-to")?,
        signature: unb64(el, el.req("signature")?)?,
    })
}

fn seal_from_el(el: &Element) -> Result<Seal> {
    el.expect_name("seal")?;
    el.only_attrs(&["date", "signature"])?;
    let chain = el
        .children_named("cert")?
        .iter()
        .map(cert_from_el)
        .collect::<Result<Vec<_>>>()?;
    Ok(Seal {
        chain,
        seal_date: el.parse_req("date")?,
        signature: unb64(el, el.req("signature")?)?,
    })
}

pub(crate) fn tdo_from_el(root: &Element) -> Result<TrustworthyDigitalObject> {
    root.expect_name("tdo")?;
    root.only_attrs(&["format"])?;
    if root.req("format")? != FORMAT {
        return Err(root.err(format!("unsupported format, expected {FORMAT}")));
    }
    root.no_text()?;
    let (payload_el, protection_el, seal_el) = match root.children.as_slice() {
        [p, q] => (p, q, None),
        [p, q, s] => (p, q, Some(s)),
        _ => return Err(root.err("expected <payload>, <protection> and optional <seal>")),
    };
    payload_el.expect_name("payload")?;
    payload_el.only_attrs(&[])?;
    let payload = payload_el
        .children_named("blob")?
        .iter()
        .map(blob_from_el)
        .collect::<Result<Vec<_>>>()?;
    Ok(TrustworthyDigitalObject {
        payload,
        protection: protection_from_el(protection_el)?,
        seal: seal_el.map(seal_from_el).transpose()?,
    })
}
