//! Byte-level codecs for weight bundles and coordinator/worker messages.
//!
//! Weight bundle layout:
//!
//! ```text
//! u16 BE   layer count L
//! L x (u32 BE rows, u32 BE cols)
//! f32 LE   values, generator layers then discriminator layers
//! u32 BE   CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Each dense layer is stored as the row-major `out x (in + 1)` matrix
//! `[weights | bias]`, so the value count is the sum of the shape products.
//!
//! Message frame:
//!
//! ```text
//! u32 BE payload length, u8 type, u32 BE round, u32 BE node id, payload
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::gan::{ConfigDigest, GanModel};
use crate::nn::Network;

pub const MAX_PAYLOAD: usize = 256 * 1024 * 1024;
/// Bytes before the payload: length, type, round, node id.
pub const FRAME_HEADER: usize = 13;
pub const ASSIGN_PAYLOAD: usize = 4 + 8 + 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("unknown message type code {0}")]
    UnknownType(u8),
    #[error("truncated frame: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("payload length {0} exceeds the {MAX_PAYLOAD}-byte limit")]
    TooLarge(usize),
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("{0} message must have an empty payload")]
    NonEmptyPayload(&'static str),
    #[error("malformed {kind} payload: {reason}")]
    Payload { kind: &'static str, reason: &'static str },
    #[error("weights checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("weights bundle holds {found} bytes, layout requires {expected}")]
    ValueCount { expected: u64, found: u64 },
    #[error("weights layout does not match the model: {0}")]
    Layout(String),
}

impl WireError {
    /// Integrity failures of a weights bundle, as opposed to framing errors.
    pub fn is_integrity(&self) -> bool {
        matches!(self, WireError::Checksum { .. } | WireError::ValueCount { .. } | WireError::Layout(_))
    }
}

/// Flat 32-bit snapshot of a generator/discriminator pair.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightsBundle {
    /// `(rows, cols)` per layer.
    pub layout: Vec<(u32, u32)>,
    pub values: Vec<f32>,
}

fn layout_of(net: &Network, out: &mut Vec<(u32, u32)>) {
    for spec in net.specs() {
        out.push((spec.output_dim as u32, (spec.input_dim + 1) as u32));
    }
}

impl WeightsBundle {
    pub fn from_model(model: &GanModel) -> Self {
        let mut layout = Vec::new();
        layout_of(model.generator(), &mut layout);
        layout_of(model.discriminator(), &mut layout);
        let mut values = Vec::with_capacity(model.generator().param_count() + model.discriminator().param_count());
        model.generator().write_f32(&mut values);
        model.discriminator().write_f32(&mut values);
        Self { layout, values }
    }

    /// Overwrites the model's parameters. Optimizer and sampling state are
    /// left untouched.
    pub fn apply_to(&self, model: &mut GanModel) -> Result<(), WireError> {
        let mut expected = Vec::new();
        layout_of(model.generator(), &mut expected);
        layout_of(model.discriminator(), &mut expected);
        if expected != self.layout {
            return Err(WireError::Layout(alloc::format!("expected {:?}, found {:?}", expected, self.layout)));
        }
        let used = model.generator_mut().read_f32(&self.values).map_err(|e| WireError::Layout(e.to_string()))?;
        model.discriminator_mut().read_f32(&self.values[used..]).map_err(|e| WireError::Layout(e.to_string()))?;
        Ok(())
    }

    pub fn value_count(&self) -> usize {
        self.values.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + 8 * self.layout.len() + 4 * self.values.len() + 4);
        out.extend_from_slice(&(self.layout.len() as u16).to_be_bytes());
        for (rows, cols) in &self.layout {
            out.extend_from_slice(&rows.to_be_bytes());
            out.extend_from_slice(&cols.to_be_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() < 6 {
            return Err(WireError::Truncated { needed: 6, available: bytes.len() });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_be_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(WireError::Checksum { stored, computed });
        }
        let layers = usize::from(u16::from_be_bytes([body[0], body[1]]));
        let header = 2 + 8 * layers;
        if body.len() < header {
            return Err(WireError::ValueCount { expected: header as u64 + 4, found: bytes.len() as u64 });
        }
        let mut layout = Vec::with_capacity(layers);
        let mut count: u64 = 0;
        for chunk in body[2..header].chunks_exact(8) {
            let rows = u32::from_be_bytes(chunk[..4].try_into().expect("4 bytes"));
            let cols = u32::from_be_bytes(chunk[4..].try_into().expect("4 bytes"));
            count += u64::from(rows) * u64::from(cols);
            layout.push((rows, cols));
        }
        let expected = header as u64 + 4 * count + 4;
        if expected != bytes.len() as u64 {
            return Err(WireError::ValueCount { expected, found: bytes.len() as u64 });
        }
        let values = body[header..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { layout, values })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageKind {
    Hello = 1,
    Assign = 2,
    GlobalWeights = 3,
    TrainedWeights = 4,
    End = 5,
    Error = 6,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::Hello,
        MessageKind::Assign,
        MessageKind::GlobalWeights,
        MessageKind::TrainedWeights,
        MessageKind::End,
        MessageKind::Error,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, WireError> {
        Self::ALL.get(usize::from(code).wrapping_sub(1)).copied().ok_or(WireError::UnknownType(code))
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Hello => "HELLO",
            MessageKind::Assign => "ASSIGN",
            MessageKind::GlobalWeights => "GLOBAL_WEIGHTS",
            MessageKind::TrainedWeights => "TRAINED_WEIGHTS",
            MessageKind::End => "END",
            MessageKind::Error => "ERROR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    pub round: u32,
    pub node_id: u32,
    pub payload: Vec<u8>,
}

/// Payload of an ASSIGN message.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub node_id: u32,
    pub epochs: u64,
    pub config_digest: ConfigDigest,
}

impl Assignment {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ASSIGN_PAYLOAD);
        out.extend_from_slice(&self.node_id.to_be_bytes());
        out.extend_from_slice(&self.epochs.to_be_bytes());
        out.extend_from_slice(&self.config_digest);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        if bytes.len() != ASSIGN_PAYLOAD {
            return Err(WireError::Payload { kind: "ASSIGN", reason: "expected 44 bytes" });
        }
        Ok(Self {
            node_id: u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")),
            epochs: u64::from_be_bytes(bytes[4..12].try_into().expect("8 bytes")),
            config_digest: bytes[12..].try_into().expect("32 bytes"),
        })
    }
}

impl Message {
    pub fn new(kind: MessageKind, round: u32, node_id: u32, payload: Vec<u8>) -> Self {
        Self { kind, round, node_id, payload }
    }

    pub fn hello(node_id: u32) -> Self {
        Self::new(MessageKind::Hello, 0, node_id, Vec::new())
    }

    pub fn end(round: u32, node_id: u32) -> Self {
        Self::new(MessageKind::End, round, node_id, Vec::new())
    }

    pub fn assign(round: u32, assignment: &Assignment) -> Self {
        Self::new(MessageKind::Assign, round, assignment.node_id, assignment.encode())
    }

    pub fn weights(kind: MessageKind, round: u32, node_id: u32, bundle: &WeightsBundle) -> Self {
        Self::new(kind, round, node_id, bundle.encode())
    }

    pub fn error(round: u32, node_id: u32, text: &str) -> Self {
        Self::new(MessageKind::Error, round, node_id, text.as_bytes().to_vec())
    }

    /// Checks the payload rules of the message's type.
    pub fn validate(&self) -> Result<(), WireError> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(WireError::TooLarge(self.payload.len()));
        }
        match self.kind {
            MessageKind::Hello | MessageKind::End if !self.payload.is_empty() => {
                Err(WireError::NonEmptyPayload(self.kind.name()))
            }
            MessageKind::Assign => Assignment::decode(&self.payload).map(|_| ()),
            MessageKind::GlobalWeights | MessageKind::TrainedWeights => {
                WeightsBundle::decode(&self.payload).map(|_| ())
            }
            MessageKind::Error if core::str::from_utf8(&self.payload).is_err() => {
                Err(WireError::Payload { kind: "ERROR", reason: "text is not UTF-8" })
            }
            _ => Ok(()),
        }
    }

    pub fn bundle(&self) -> Result<WeightsBundle, WireError> {
        match self.kind {
            MessageKind::GlobalWeights | MessageKind::TrainedWeights => WeightsBundle::decode(&self.payload),
            _ => Err(WireError::Payload { kind: self.kind.name(), reason: "does not carry weights" }),
        }
    }

    pub fn assignment(&self) -> Result<Assignment, WireError> {
        match self.kind {
            MessageKind::Assign => Assignment::decode(&self.payload),
            _ => Err(WireError::Payload { kind: self.kind.name(), reason: "is not an assignment" }),
        }
    }

    pub fn error_text(&self) -> String {
        String::from_utf8_lossy(&self.payload).into_owned()
    }
}

pub fn encode_message(msg: &Message) -> Result<Vec<u8>, WireError> {
    msg.validate()?;
    let mut out = Vec::with_capacity(FRAME_HEADER + msg.payload.len());
    out.extend_from_slice(&(msg.payload.len() as u32).to_be_bytes());
    out.push(msg.kind.code());
    out.extend_from_slice(&msg.round.to_be_bytes());
    out.extend_from_slice(&msg.node_id.to_be_bytes());
    out.extend_from_slice(&msg.payload);
    Ok(out)
}

/// Payload length announced by a frame's first four bytes.
pub fn payload_len(prefix: [u8; 4]) -> Result<usize, WireError> {
    let len = u32::from_be_bytes(prefix) as usize;
    if len > MAX_PAYLOAD {
        return Err(WireError::TooLarge(len));
    }
    Ok(len)
}

/// Decodes exactly one complete frame.
pub fn decode_message(bytes: &[u8]) -> Result<Message, WireError> {
    if bytes.len() < FRAME_HEADER {
        return Err(WireError::Truncated { needed: FRAME_HEADER, available: bytes.len() });
    }
    let len = payload_len(bytes[..4].try_into().expect("4 bytes"))?;
    let kind = MessageKind::from_code(bytes[4])?;
    let needed = FRAME_HEADER + len;
    if bytes.len() < needed {
        return Err(WireError::Truncated { needed, available: bytes.len() });
    }
    if bytes.len() > needed {
        return Err(WireError::TrailingBytes(bytes.len() - needed));
    }
    let msg = Message {
        kind,
        round: u32::from_be_bytes(bytes[5..9].try_into().expect("4 bytes")),
        node_id: u32::from_be_bytes(bytes[9..13].try_into().expect("4 bytes")),
        payload: bytes[FRAME_HEADER..].to_vec(),
    };
    msg.validate()?;
    Ok(msg)
}
