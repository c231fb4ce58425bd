//! Frame format: a big-endian `u32` byte length followed by that many bytes
//! of UTF-8 JSON. Reals travel as decimal strings with 17 significant digits
//! (`%.17g`), which round-trips every `f64` exactly.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::{ProtocolMessage, TransportError, WireCodec, WirePublicKey};
use crate::hex::HexInt;

/// Largest accepted frame body.
pub const MAX_FRAME_BYTES: usize = 256 * 1024 * 1024;

const LENGTH_PREFIX: usize = 4;

/// An `f64` that serializes as a `%.17g` decimal string.
#[derive(Clone, Copy, PartialEq)]
pub struct Decimal(pub f64);

impl fmt::Debug for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_g17(self.0))
    }
}

impl Serialize for Decimal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_g17(self.0))
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_decimal(&text)
            .map(Decimal)
            .ok_or_else(|| de::Error::custom(format!("invalid decimal {text:?}")))
    }
}

fn parse_decimal(text: &str) -> Option<f64> {
    let valid = !text.is_empty()
        && text.bytes().all(|b| b.is_ascii_digit() || matches!(b, b'-' | b'+' | b'.' | b'e'));
    if !valid {
        return None;
    }
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// C's `%.17g`: 17 significant digits, trailing zeros stripped, exponent
/// form when the decimal exponent is below -4 or at least 17.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exponent) = sci.split_once('e').expect("exponent form");
    let exponent: i32 = exponent.parse().expect("exponent digits");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let sign = if negative { "-" } else { "" };
    if (-4..17).contains(&exponent) {
        let body = if exponent >= 0 {
            let split = exponent as usize + 1;
            format!("{}.{}", &digits[..split], &digits[split..])
        } else {
            format!("0.{}{}", "0".repeat((-exponent - 1) as usize), digits)
        };
        let body = body.trim_end_matches('0').trim_end_matches('.');
        format!("{sign}{body}")
    } else {
        let frac = digits[1..].trim_end_matches('0');
        let mant = if frac.is_empty() { digits[..1].to_string() } else { format!("{}.{frac}", &digits[..1]) };
        let esign = if exponent < 0 { '-' } else { '+' };
        format!("{sign}{mant}e{esign}{:02}", exponent.abs())
    }
}

pub fn to_json(message: &ProtocolMessage) -> Result<Vec<u8>, TransportError> {
    serde_json::to_vec(message)
        .map_err(|e| TransportError::Malformed { offset: 0, reason: e.to_string() })
}

/// Parses a JSON body. Error offsets are relative to the body start.
pub fn from_json(body: &[u8]) -> Result<ProtocolMessage, TransportError> {
    // Read the tag first, then the variant body as a plain struct: serde
    // buffers internally tagged enums and drops positions from field errors.
    let malformed = |e: serde_json::Error| TransportError::Malformed {
        offset: byte_offset(body, e.line(), e.column()),
        reason: e.to_string(),
    };
    let tag: Tag = serde_json::from_slice(body).map_err(malformed)?;
    Ok(match tag.kind.as_str() {
        "setup" => {
            let b: SetupBody = serde_json::from_slice(body).map_err(malformed)?;
            ProtocolMessage::Setup { round: b.round, pk: b.pk, codec: b.codec, party_id: b.party_id }
        }
        "slice" => {
            let b: SliceBody = serde_json::from_slice(body).map_err(malformed)?;
            ProtocolMessage::SliceDelivery { round: b.round, columns: b.columns, cipher_rows: b.cipher_rows }
        }
        "broadcast" => {
            let b: BroadcastBody = serde_json::from_slice(body).map_err(malformed)?;
            ProtocolMessage::RoundBroadcast { round: b.round, ranks: b.ranks, out_degree: b.out_degree }
        }
        "contribution" => {
            let b: ContributionBody = serde_json::from_slice(body).map_err(malformed)?;
            ProtocolMessage::Contribution {
                round: b.round,
                party_id: b.party_id,
                columns: b.columns,
                cipher_cols: b.cipher_cols,
            }
        }
        "shutdown" => {
            let b: DetailBody = serde_json::from_slice(body).map_err(malformed)?;
            ProtocolMessage::Shutdown { round: b.round, detail: b.detail }
        }
        "error" => {
            let b: DetailBody = serde_json::from_slice(body).map_err(malformed)?;
            ProtocolMessage::Error { round: b.round, detail: b.detail }
        }
        other => {
            return Err(TransportError::Malformed {
                offset: find(body, b"\"kind\"").unwrap_or(0),
                reason: format!("unknown message kind {other:?}"),
            })
        }
    })
}

#[derive(Deserialize)]
struct Tag {
    kind: String,
}

#[derive(Deserialize)]
struct SetupBody {
    round: u64,
    pk: WirePublicKey,
    codec: WireCodec,
    party_id: usize,
}

#[derive(Deserialize)]
struct SliceBody {
    round: u64,
    columns: Vec<usize>,
    cipher_rows: Vec<Vec<HexInt>>,
}

#[derive(Deserialize)]
struct BroadcastBody {
    round: u64,
    ranks: Vec<Decimal>,
    out_degree: Vec<u64>,
}

#[derive(Deserialize)]
struct ContributionBody {
    round: u64,
    party_id: usize,
    columns: Vec<usize>,
    cipher_cols: Vec<Vec<HexInt>>,
}

#[derive(Deserialize)]
struct DetailBody {
    round: u64,
    detail: String,
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}

fn byte_offset(body: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = body
        .split(|&b| b == b'\n')
        .take(line - 1)
        .map(|l| l.len() + 1)
        .sum();
    (line_start + column.saturating_sub(1)).min(body.len())
}

pub fn encode_frame(message: &ProtocolMessage) -> Result<Vec<u8>, TransportError> {
    let body = to_json(message)?;
    if body.len() > MAX_FRAME_BYTES {
        return Err(TransportError::FrameTooLarge(body.len()));
    }
    let mut frame = Vec::with_capacity(LENGTH_PREFIX + body.len());
    frame.extend_from_slice(&(body.len() as u32).to_be_bytes());
    frame.extend_from_slice(&body);
    Ok(frame)
}

/// Decodes one frame from the front of `bytes`, returning the message and
/// the number of bytes consumed.
pub fn decode_frame(bytes: &[u8]) -> Result<(ProtocolMessage, usize), TransportError> {
    if bytes.len() < LENGTH_PREFIX {
        return Err(TransportError::Malformed {
            offset: bytes.len(),
            reason: "truncated length prefix".into(),
        });
    }
    let len = u32::from_be_bytes(bytes[..LENGTH_PREFIX].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(TransportError::FrameTooLarge(len));
    }
    let end = LENGTH_PREFIX + len;
    if bytes.len() < end {
        return Err(TransportError::Malformed {
            offset: bytes.len(),
            reason: format!("truncated body: expected {len} bytes, have {}", bytes.len() - LENGTH_PREFIX),
        });
    }
    let message = from_json(&bytes[LENGTH_PREFIX..end]).map_err(|e| match e {
        TransportError::Malformed { offset, reason } => {
            TransportError::Malformed { offset: offset + LENGTH_PREFIX, reason }
        }
        other => other,
    })?;
    Ok((message, end))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hex::HexInt;
    use crate::transport::{WireCodec, WirePublicKey};
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn hex(v: u64) -> HexInt {
        HexInt(BigUint::from(v))
    }

    #[test]
    fn g17_matches_c_printf() {
        // Expected strings produced by printf("%.17g").
        let cases = [
            (0.5, "0.5"),
            (1.0, "1"),
            (0.1, "0.10000000000000001"),
            (1.0 / 3.0, "0.33333333333333331"),
            (0.0075, "0.0074999999999999997"),
            (1e-5, "1.0000000000000001e-05"),
            (123456789.0, "123456789"),
            (1e17, "1e+17"),
            (-2.5, "-2.5"),
            (0.0, "0"),
        ];
        for (x, expected) in cases {
            assert_eq!(format_g17(x), expected, "x = {x}");
        }
    }

    #[test]
    fn setup_schema_is_bit_exact() {
        let message = ProtocolMessage::Setup {
            round: 0,
            pk: WirePublicKey { n: hex(0xab), g: hex(0xac) },
            codec: WireCodec { base: 10, exp: 6 },
            party_id: 2,
        };
        let body = String::from_utf8(to_json(&message).unwrap()).unwrap();
        assert_eq!(
            body,
            r#"{"kind":"setup","round":0,"pk":{"n":"ab","g":"ac"},"codec":{"base":10,"exp":6},"party_id":2}"#
        );
        let frame = encode_frame(&message).unwrap();
        assert_eq!(&frame[..4], &(body.len() as u32).to_be_bytes());
    }

    #[test]
    fn other_schemas() {
        let cases = [
            (
                ProtocolMessage::SliceDelivery {
                    round: 0,
                    columns: vec![1, 3],
                    cipher_rows: vec![vec![hex(1), hex(255)], vec![hex(16), hex(17)]],
                },
                r#"{"kind":"slice","round":0,"columns":[1,3],"cipher_rows":[["1","ff"],["10","11"]]}"#,
            ),
            (
                ProtocolMessage::RoundBroadcast {
                    round: 4,
                    ranks: vec![Decimal(0.5), Decimal(0.5)],
                    out_degree: vec![1, 1],
                },
                r#"{"kind":"broadcast","round":4,"ranks":["0.5","0.5"],"out_degree":[1,1]}"#,
            ),
            (
                ProtocolMessage::Contribution {
                    round: 4,
                    party_id: 1,
                    columns: vec![0],
                    cipher_cols: vec![vec![hex(10), hex(11)]],
                },
                r#"{"kind":"contribution","round":4,"party_id":1,"columns":[0],"cipher_cols":[["a","b"]]}"#,
            ),
            (
                ProtocolMessage::Shutdown { round: 9, detail: "converged".into() },
                r#"{"kind":"shutdown","round":9,"detail":"converged"}"#,
            ),
            (
                ProtocolMessage::Error { round: 2, detail: "boom".into() },
                r#"{"kind":"error","round":2,"detail":"boom"}"#,
            ),
        ];
        for (message, expected) in cases {
            assert_eq!(String::from_utf8(to_json(&message).unwrap()).unwrap(), expected);
            let (back, used) = decode_frame(&encode_frame(&message).unwrap()).unwrap();
            assert_eq!(back, message);
            assert_eq!(used, expected.len() + 4);
        }
    }

    #[test]
    fn truncated_frames_are_errors() {
        let frame = encode_frame(&ProtocolMessage::Shutdown { round: 1, detail: String::new() })
            .unwrap();
        assert!(matches!(decode_frame(&frame[..2]), Err(TransportError::Malformed { offset: 2, .. })));
        let cut = frame.len() - 3;
        assert!(matches!(
            decode_frame(&frame[..cut]),
            Err(TransportError::Malformed { offset, .. }) if offset == cut
        ));
    }

    #[test]
    fn malformed_bodies_report_offsets() {
        let body = br#"{"kind":"teleport","round":1}"#;
        match from_json(body) {
            Err(TransportError::Malformed { offset, reason }) => {
                assert!(reason.contains("teleport"), "{reason}");
                assert!(offset <= body.len());
            }
            other => panic!("unexpected {other:?}"),
        }
        let body = br#"{"kind":"slice","round":0,"columns":[0],"cipher_rows":[["xyz"]]}"#;
        match from_json(body) {
            Err(TransportError::Malformed { offset, .. }) => {
                // serde reports just past the offending string
                assert!(offset >= 55 && offset <= body.len(), "offset {offset}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut frame = 5u32.to_be_bytes().to_vec();
        frame.extend_from_slice(b"{\"a\":");
        assert!(matches!(decode_frame(&frame), Err(TransportError::Malformed { offset, .. }) if offset >= 4));
        assert!(from_json(br#"{"kind":"broadcast","round":1,"ranks":["nan"],"out_degree":[1]}"#).is_err());
    }

    #[test]
    fn oversized_length_prefix_is_rejected() {
        let frame = u32::MAX.to_be_bytes();
        assert!(matches!(decode_frame(&frame), Err(TransportError::FrameTooLarge(_))));
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let text = format_g17(x);
            prop_assert_eq!(parse_decimal(&text).unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn broadcast_frames_round_trip(
            ranks in proptest::collection::vec(0.0f64..1.0, 0..30),
            degrees in proptest::collection::vec(0u64..50, 0..30),
            round in any::<u32>(),
        ) {
            let message = ProtocolMessage::RoundBroadcast {
                round: round as u64,
                ranks: ranks.into_iter().map(Decimal).collect(),
                out_degree: degrees,
            };
            let (back, _) = decode_frame(&encode_frame(&message).unwrap()).unwrap();
            prop_assert_eq!(back, message);
        }
    }
}
