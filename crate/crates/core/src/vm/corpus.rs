//! Programs shipped with the toolkit, with helpers to build their inputs.

use std::sync::OnceLock;

use super::asm::assemble;
use super::program::VmProgram;

pub const IDENTITY_SRC: &str = include_str!("../../programs/identity.devm");
pub const RLE_DECODE_SRC: &str = include_str!("../../programs/rle_decode.devm");
pub const FIBONACCI_SRC: &str = include_str!("../../programs/fibonacci.devm");
pub const TAG_SYSTEM_SRC: &str = include_str!("../../programs/tag_system.devm");
pub const CHIME_SRC: &str = include_str!("../../programs/chime.devm");

/// `(name, source)` for every shipped program.
pub const SOURCES: [(&str, &str); 5] = [
    ("identity", IDENTITY_SRC),
    ("rle_decode", RLE_DECODE_SRC),
    ("fibonacci", FIBONACCI_SRC),
    ("tag_system", TAG_SYSTEM_SRC),
    ("chime", CHIME_SRC),
];

fn cached(cell: &'static OnceLock<VmProgram>, src: &str) -> VmProgram {
    cell.get_or_init(|| assemble(src).expect("shipped program assembles"))
        .clone()
}

macro_rules! shipped {
    ($name:ident, $src:ident) => {
        pub fn $name() -> VmProgram {
            static CELL: OnceLock<VmProgram> = OnceLock::new();
            cached(&CELL, $src)
        }
    };
}

shipped!(identity, IDENTITY_SRC);
shipped!(rle_decode, RLE_DECODE_SRC);
shipped!(fibonacci, FIBONACCI_SRC);
shipped!(tag_system, TAG_SYSTEM_SRC);
shipped!(chime, CHIME_SRC);

pub fn by_name(name: &str) -> Option<VmProgram> {
    Some(match name {
        "identity" => identity(),
        "rle_decode" => rle_decode(),
        "fibonacci" => fibonacci(),
        "tag_system" => tag_system(),
        "chime" => chime(),
        _ => return None,
    })
}

pub fn all() -> Vec<(&'static str, VmProgram)> {
    SOURCES
        .iter()
        .map(|(n, _)| (*n, by_name(n).expect("listed")))
        .collect()
}

/// Encode `data` as (count, value) pairs understood by [`rle_decode`].
pub fn rle_encode(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    for run in data.chunk_by(|a, b| a == b) {
        for piece in run.chunks(255) {
            out.push(piece.len() as u8);
            out.push(piece[0]);
        }
    }
    out
}

pub fn fibonacci_input(k: u64) -> Vec<u8> {
    k.to_le_bytes().to_vec()
}

/// Input for [`tag_system`]: `(symbol, production)` rules followed by the word.
/// At most 255 rules, each production at most 255 bytes.
pub fn tag_system_input(rules: &[(u8, &[u8])], word: &[u8]) -> Vec<u8> {
    assert!(rules.len() <= 255, "at most 255 rules");
    let mut out = vec![rules.len() as u8];
    for (symbol, production) in rules {
        assert!(production.len() <= 255, "production longer than 255 bytes");
        out.push(*symbol);
        out.push(production.len() as u8);
        out.extend_from_slice(production);
    }
    out.extend_from_slice(word);
    out
}
