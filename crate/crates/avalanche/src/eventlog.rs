//! Compact binary event-log layout.
//!
//! One record per event, 11 bytes, little-endian:
//!
//! ```text
//! offset 0  f64  event time
//! offset 8  u8   kind  (0 Hop, 1 Gain1, 2 Loss1, 3 LossN, 4 LossCavity, 5 Loss0)
//! offset 9  u16  site  (0-based ladder site for Hop/Loss0, 0 otherwise)
//! ```

use thiserror::Error;

use crate::model::JumpEvent;

pub const RECORD_LEN: usize = 11;

#[derive(Debug, Error, PartialEq)]
pub enum EventLogError {
    #[error("byte length {0} is not a multiple of the {RECORD_LEN}-byte record size")]
    TruncatedRecord(usize),
    #[error("unknown event kind {kind} in record {index}")]
    UnknownKind { index: usize, kind: u8 },
    #[error("non-zero site {site} on siteless event kind {kind} in record {index}")]
    UnexpectedSite { index: usize, kind: u8, site: u16 },
    #[error("non-finite time in record {index}")]
    BadTime { index: usize },
}

fn kind_and_site(event: JumpEvent) -> (u8, u16) {
    match event {
        JumpEvent::Hop(p) => (0, u16::try_from(p).expect("site fits in u16")),
        JumpEvent::Gain1 => (1, 0),
        JumpEvent::Loss1 => (2, 0),
        JumpEvent::LossN => (3, 0),
        JumpEvent::LossCavity => (4, 0),
        JumpEvent::Loss0(p) => (5, u16::try_from(p).expect("site fits in u16")),
    }
}

pub fn encode(events: &[(f64, JumpEvent)]) -> Vec<u8> {
    let mut out = Vec::with_capacity(events.len() * RECORD_LEN);
    for &(time, event) in events {
        let (kind, site) = kind_and_site(event);
        out.extend_from_slice(&time.to_le_bytes());
        out.push(kind);
        out.extend_from_slice(&site.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(f64, JumpEvent)>, EventLogError> {
    if bytes.len() % RECORD_LEN != 0 {
        return Err(EventLogError::TruncatedRecord(bytes.len()));
    }
    let mut events = Vec::with_capacity(bytes.len() / RECORD_LEN);
    for (index, record) in bytes.chunks_exact(RECORD_LEN).enumerate() {
        let time = f64::from_le_bytes(record[0..8].try_into().unwrap());
        if !time.is_finite() {
            return Err(EventLogError::BadTime { index });
        }
        let kind = record[8];
        let site = u16::from_le_bytes(record[9..11].try_into().unwrap());
        let event = match kind {
            0 => JumpEvent::Hop(site as usize),
            5 => JumpEvent::Loss0(site as usize),
            1 | 2 | 3 | 4 => {
                if site != 0 {
                    return Err(EventLogError::UnexpectedSite { index, kind, site });
                }
                match kind {
                    1 => JumpEvent::Gain1,
                    2 => JumpEvent::Loss1,
                    3 => JumpEvent::LossN,
                    _ => JumpEvent::LossCavity,
                }
            }
            _ => return Err(EventLogError::UnknownKind { index, kind }),
        };
        events.push((time, event));
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let events = vec![
            (0.125, JumpEvent::Gain1),
            (0.5, JumpEvent::Hop(3)),
            (0.75, JumpEvent::LossCavity),
            (1.0, JumpEvent::Loss0(9)),
            (2.5, JumpEvent::LossN),
            (3.0, JumpEvent::Loss1),
        ];
        let bytes = encode(&events);
        assert_eq!(bytes.len(), events.len() * RECORD_LEN);
        assert_eq!(decode(&bytes).unwrap(), events);
    }

    #[test]
    fn rejects_truncation_and_bad_kind() {
        let bytes = encode(&[(1.0, JumpEvent::Gain1)]);
        assert_eq!(
            decode(&bytes[..10]),
            Err(EventLogError::TruncatedRecord(10))
        );
        let mut bad = bytes.clone();
        bad[8] = 17;
        assert_eq!(
            decode(&bad),
            Err(EventLogError::UnknownKind { index: 0, kind: 17 })
        );
        let mut bad_site = bytes;
        bad_site[9] = 1;
        assert!(matches!(
            decode(&bad_site),
            Err(EventLogError::UnexpectedSite { .. })
        ));
    }

    #[test]
    fn rejects_non_finite_time() {
        let mut bytes = encode(&[(1.0, JumpEvent::Hop(0))]);
        bytes[..8].copy_from_slice(&f64::NAN.to_le_bytes());
        assert_eq!(decode(&bytes), Err(EventLogError::BadTime { index: 0 }));
    }
}
