//! DEVM/1: a small deterministic stack machine for durable content decoders
//! and timed performances.

pub mod asm;
pub mod corpus;
pub mod isa;
pub mod machine;
pub mod program;
pub mod replay;

pub use asm::{assemble, disassemble};
pub use isa::Instr;
pub use machine::{execute, ExecutionResult, Halt};
pub use program::VmProgram;
pub use replay::{replay_equivalent, shift_events, TimedEvent};

use crate::canonical::CanonicalDocument;
use crate::digest::Digest;
use crate::error::{Error, Result};
use crate::model::{BlobEncoding, ContentBlob, TrustworthyDigitalObject};
use crate::provenance::nested_predecessors;

pub const PROGRAM_MEDIA_TYPE: &str = "application/x-devm";

/// The normative machine description, byte for byte.
pub const SPEC_DOCUMENT: &[u8] = include_bytes!("../../../../docs/devm1-spec");

/// Digest of [`SPEC_DOCUMENT`]; every object with a non-raw blob records it.
pub const VM_SPEC_REF: &str =
    "sha256:ef2fff79b2f3169a4ec349975eeb49dc3c8a54f0171f4d721733245945baa717";

pub fn vm_spec_ref() -> Digest {
    VM_SPEC_REF.parse().expect("well-formed constant")
}

pub fn vm_self_description() -> CanonicalDocument {
    CanonicalDocument::from_bytes(SPEC_DOCUMENT.to_vec()).expect("shipped document is canonical")
}

/// Find the program blob `decoder` names, in `tdo` or any nested predecessor.
pub fn find_decoder(tdo: &TrustworthyDigitalObject, decoder: &Digest) -> Option<VmProgram> {
    let here = tdo
        .payload
        .iter()
        .filter(|b| b.encoding == BlobEncoding::VmProgram && decoder.matches(&b.bytes))
        .find_map(|b| VmProgram::from_bytes(&b.bytes).ok());
    here.or_else(|| {
        nested_predecessors(tdo)
            .iter()
            .find_map(|(_, pred)| find_decoder(pred, decoder))
    })
}

/// Run the decoder of a vm-encoded blob over its bytes.
pub fn decode_content(
    blob: &ContentBlob,
    tdo: &TrustworthyDigitalObject,
    fuel: u64,
) -> Result<Vec<u8>> {
    if blob.encoding != BlobEncoding::VmEncoded {
        return Err(Error::NotVmEncoded(blob.name.clone()));
    }
    let decoder = blob
        .decoder_ref
        .as_ref()
        .ok_or_else(|| Error::MissingDecoder(format!("blob `{}` has no decoder reference", blob.name)))?;
    let program = find_decoder(tdo, decoder)
        .ok_or_else(|| Error::MissingDecoder(format!("no program blob with digest {decoder}")))?;
    let result = execute(&program, &blob.bytes, fuel);
    match result.halted {
        Halt::Normal => Ok(result.output),
        Halt::FuelExhausted => Err(Error::AbnormalHalt(format!(
            "fuel exhausted after {} instructions",
            result.instructions_executed
        ))),
        Halt::Trap { offset, reason } => {
            Err(Error::AbnormalHalt(format!("trap at offset {offset}: {reason}")))
        }
    }
}
