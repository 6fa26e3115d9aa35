//! Gesture to finger-command lookup and the 9-byte controller frame.
//!
//! Frame layout: `0xA5`, sequence number (u16 LE), thumb, index, middle,
//! ring, pinky (one byte each, 0 or 1), XOR checksum of the first 8 bytes.

use std::fmt;

use crate::gesture::{GestureClass, NUM_GESTURES};

pub const SYNC: u8 = 0xA5;
pub const FRAME_LEN: usize = 9;

/// Finger activations in thumb, index, middle, ring, pinky order.
/// 0 is fully relaxed, 1 fully contracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FingerCommand(pub [u8; 5]);

impl FingerCommand {
    pub fn thumb(&self) -> u8 {
        self.0[0]
    }
    pub fn index(&self) -> u8 {
        self.0[1]
    }
    pub fn middle(&self) -> u8 {
        self.0[2]
    }
    pub fn ring(&self) -> u8 {
        self.0[3]
    }
    pub fn pinky(&self) -> u8 {
        self.0[4]
    }
}

impl fmt::Display for FingerCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e] = self.0;
        write!(f, "({a},{b},{c},{d},{e})")
    }
}

const LOOKUP: [[u8; 5]; NUM_GESTURES] = [
    [1, 0, 0, 0, 0], // Thumb
    [0, 1, 0, 0, 0], // Index
    [0, 0, 1, 0, 0], // Middle
    [0, 0, 0, 1, 0], // Ring
    [0, 0, 0, 0, 1], // Little
    [1, 1, 0, 0, 0], // Thumb-Index
    [1, 0, 1, 0, 0], // Thumb-Middle
    [1, 0, 0, 1, 0], // Thumb-Ring
    [1, 0, 0, 0, 1], // Thumb-Little
    [0, 0, 0, 0, 0], // Hand Close
    [0, 1, 1, 0, 0], // Index-Middle
    [0, 0, 1, 1, 0], // Middle-Ring
    [0, 0, 0, 1, 1], // Ring-Little
    [0, 1, 1, 1, 0], // Index-Middle-Ring
    [0, 0, 1, 1, 1], // Middle-Ring-Little
];

pub fn class_to_command(class: GestureClass) -> FingerCommand {
    FingerCommand(LOOKUP[class.index()])
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame must be {FRAME_LEN} bytes, got {0}")]
    Length(usize),
    #[error("bad sync byte {0:#04x}")]
    BadSync(u8),
    #[error("checksum mismatch: computed {computed:#04x}, frame has {found:#04x}")]
    Checksum { computed: u8, found: u8 },
    #[error("finger byte {value} at position {finger} is not 0 or 1")]
    FingerValue { finger: usize, value: u8 },
}

fn checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |a, b| a ^ b)
}

pub fn encode_command_frame(cmd: FingerCommand, seq: u16) -> [u8; FRAME_LEN] {
    let mut f = [0u8; FRAME_LEN];
    f[0] = SYNC;
    f[1..3].copy_from_slice(&seq.to_le_bytes());
    f[3..8].copy_from_slice(&cmd.0);
    f[8] = checksum(&f[..8]);
    f
}

pub fn decode_command_frame(bytes: &[u8]) -> Result<(FingerCommand, u16), FrameError> {
    if bytes.len() != FRAME_LEN {
        return Err(FrameError::Length(bytes.len()));
    }
    if bytes[0] != SYNC {
        return Err(FrameError::BadSync(bytes[0]));
    }
    let computed = checksum(&bytes[..8]);
    if computed != bytes[8] {
        return Err(FrameError::Checksum {
            computed,
            found: bytes[8],
        });
    }
    let mut fingers = [0u8; 5];
    for (i, &v) in bytes[3..8].iter().enumerate() {
        if v > 1 {
            return Err(FrameError::FingerValue {
                finger: i,
                value: v,
            });
        }
        fingers[i] = v;
    }
    Ok((
        FingerCommand(fingers),
        u16::from_le_bytes([bytes[1], bytes[2]]),
    ))
}

/// `>A5...` upper-case hex rendering used on text sinks.
pub fn frame_hex(frame: &[u8]) -> String {
    let mut s = String::with_capacity(1 + 2 * frame.len());
    s.push('>');
    for b in frame {
        s.push_str(&format!("{b:02X}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_examples() {
        let by = |n: &str| class_to_command(GestureClass::from_name(n).unwrap()).0;
        assert_eq!(by("Thumb-Index"), [1, 1, 0, 0, 0]);
        assert_eq!(by("Hand Close"), [0, 0, 0, 0, 0]);
        assert_eq!(by("Middle-Ring-Little"), [0, 0, 1, 1, 1]);
    }

    #[test]
    fn hand_close_frame_bytes() {
        let f = encode_command_frame(class_to_command(GestureClass::HAND_CLOSE), 0);
        assert_eq!(f, [0xA5, 0, 0, 0, 0, 0, 0, 0, 0xA5]);
        assert_eq!(frame_hex(&f), ">A500000000000000A5");
    }

    #[test]
    fn decode_errors() {
        let f = encode_command_frame(FingerCommand([1, 0, 1, 0, 1]), 513);
        let mut bad = f;
        bad[8] ^= 0x01;
        assert!(matches!(
            decode_command_frame(&bad),
            Err(FrameError::Checksum { .. })
        ));
        let mut bad = f;
        bad[0] = 0x5A;
        assert_eq!(decode_command_frame(&bad), Err(FrameError::BadSync(0x5A)));
        let mut bad = f;
        bad[4] = 2;
        bad[8] = checksum(&bad[..8]);
        assert_eq!(
            decode_command_frame(&bad),
            Err(FrameError::FingerValue {
                finger: 1,
                value: 2
            })
        );
        assert_eq!(decode_command_frame(&f[..8]), Err(FrameError::Length(8)));
    }

    proptest! {
        #[test]
        fn frame_round_trip(class in 0usize..15, seq in any::<u16>()) {
            let cmd = class_to_command(GestureClass::new(class).unwrap());
            let frame = encode_command_frame(cmd, seq);
            prop_assert_eq!(decode_command_frame(&frame).unwrap(), (cmd, seq));
        }
    }
}
