//! Timed output events and time-shift equivalence between performances.

use crate::canonical::{self, CanonicalDocument, Element, FORMAT};
use crate::error::{Error, Result};

use super::isa::valid_channel;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TimedEvent {
    /// Abstract ticks.
    pub t: u64,
    pub channel: String,
    pub payload: Vec<u8>,
}

impl TimedEvent {
    pub fn new(t: u64, channel: impl Into<String>, payload: impl Into<Vec<u8>>) -> Self {
        TimedEvent {
            t,
            channel: channel.into(),
            payload: payload.into(),
        }
    }
}

pub fn is_time_ordered(events: &[TimedEvent]) -> bool {
    events.windows(2).all(|w| w[0].t <= w[1].t)
}

/// The constant `c` with `b[i] == a[i]` shifted by `c` ticks for every `i`,
/// or `None` when no such constant exists. Two empty streams are equivalent
/// with shift 0.
pub fn replay_equivalent(a: &[TimedEvent], b: &[TimedEvent]) -> Option<i64> {
    if a.len() != b.len() {
        return None;
    }
    let (Some(a0), Some(b0)) = (a.first(), b.first()) else {
        return Some(0);
    };
    let c = b0.t as i128 - a0.t as i128;
    let aligned = a.iter().zip(b).all(|(x, y)| {
        x.channel == y.channel && x.payload == y.payload && y.t as i128 - x.t as i128 == c
    });
    if aligned {
        i64::try_from(c).ok()
    } else {
        None
    }
}

/// Shift every event by `c` ticks; `None` if any time leaves the u64 range.
pub fn shift_events(events: &[TimedEvent], c: i64) -> Option<Vec<TimedEvent>> {
    events
        .iter()
        .map(|e| {
            let t = u64::try_from(e.t as i128 + c as i128).ok()?;
            Some(TimedEvent { t, ..e.clone() })
        })
        .collect()
}

pub fn events_to_document(events: &[TimedEvent]) -> CanonicalDocument {
    let root = Element::new("events").attr("format", FORMAT).children(
        events.iter().map(|e| {
            Element::new("event")
                .attr("channel", &e.channel)
                .attr("t", e.t.to_string())
                .text(canonical::b64(&e.payload))
        }),
    );
    CanonicalDocument::from_element(&root)
}

pub fn events_from_document(bytes: &[u8]) -> Result<Vec<TimedEvent>> {
    let root = canonical::document_root(bytes, "events")?;
    let mut out = Vec::new();
    for el in &root.children {
        el.expect_name("event")?;
        el.only_attrs(&["channel", "t"])?;
        el.no_children()?;
        let channel = el.req("channel")?.to_string();
        if !valid_channel(&channel) {
            return Err(el.err(format!("invalid channel name `{channel}`")));
        }
        out.push(TimedEvent {
            t: el.parse_req("t")?,
            channel,
            payload: canonical::unb64(el, &el.text)?,
        });
    }
    if !is_time_ordered(&out) {
        return Err(Error::parse(0, "events are not in nondecreasing time order"));
    }
    Ok(out)
}
