//! Minimal DNS wire codec: A/IN queries out, responses in.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TYPE_A: u16 = 1;
pub const CLASS_IN: u16 = 1;
pub const HEADER_LEN: usize = 12;

const FLAG_QR: u16 = 0x8000;
const FLAG_RD: u16 = 0x0100;
const FLAG_RA: u16 = 0x0080;
const MAX_NAME_LEN: usize = 255;
const MAX_LABEL_LEN: usize = 63;
const MAX_POINTER_HOPS: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("empty hostname")]
    Empty,
    #[error("empty label in {0:?}")]
    EmptyLabel(String),
    #[error("label of {len} bytes exceeds 63 in {name:?}")]
    LabelTooLong { name: String, len: usize },
    #[error("encoded name of {0} bytes exceeds 255")]
    NameTooLong(usize),
    #[error("invalid character {ch:?} in {name:?}")]
    InvalidChar { name: String, ch: char },
}

/// An A/IN question with recursion desired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnsQuery {
    pub transaction_id: u16,
    pub qname: String,
}

impl DnsQuery {
    pub fn new(transaction_id: u16, qname: impl Into<String>) -> Self {
        Self {
            transaction_id,
            qname: qname.into(),
        }
    }

    /// A query with a fresh id drawn from the OS-seeded CSPRNG.
    pub fn random_id(qname: impl Into<String>) -> Self {
        Self::new(rand::random::<u16>(), qname)
    }
}

/// The question section of a parsed incoming message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuery {
    pub transaction_id: u16,
    pub qname: String,
    pub qtype: u16,
    pub qclass: u16,
    pub recursion_desired: bool,
    pub is_response: bool,
}

/// One resource record from the answer section. `address` is set for A
/// records; `rdata` always keeps the raw bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DnsAnswer {
    pub name: String,
    pub rtype: u16,
    pub ttl: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<Ipv4Addr>,
    pub rdata: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedResponse {
    pub transaction_id: u16,
    pub rcode: u8,
    pub answers: Vec<DnsAnswer>,
}

/// Checks a hostname and returns its labels (trailing dot tolerated).
pub fn validate_hostname(name: &str) -> Result<Vec<&str>, CodecError> {
    let trimmed = name.strip_suffix('.').unwrap_or(name);
    if trimmed.is_empty() {
        return Err(CodecError::Empty);
    }
    let labels: Vec<&str> = trimmed.split('.').collect();
    let mut encoded = 1;
    for label in &labels {
        if label.is_empty() {
            return Err(CodecError::EmptyLabel(name.to_string()));
        }
        if label.len() > MAX_LABEL_LEN {
            return Err(CodecError::LabelTooLong {
                name: name.to_string(),
                len: label.len(),
            });
        }
        if let Some(ch) = label
            .chars()
            .find(|c| !(c.is_ascii_alphanumeric() || *c == '-' || *c == '_'))
        {
            return Err(CodecError::InvalidChar {
                name: name.to_string(),
                ch,
            });
        }
        encoded += 1 + label.len();
    }
    if encoded > MAX_NAME_LEN {
        return Err(CodecError::NameTooLong(encoded));
    }
    Ok(labels)
}

fn push_name(out: &mut Vec<u8>, labels: &[&str]) {
    for label in labels {
        out.push(label.len() as u8);
        out.extend_from_slice(label.as_bytes());
    }
    out.push(0);
}

pub fn encode_query(q: &DnsQuery) -> Result<Vec<u8>, CodecError> {
    let labels = validate_hostname(&q.qname)?;
    let mut out = Vec::with_capacity(HEADER_LEN + q.qname.len() + 6);
    out.extend_from_slice(&q.transaction_id.to_be_bytes());
    out.extend_from_slice(&FLAG_RD.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&[0; 6]);
    push_name(&mut out, &labels);
    out.extend_from_slice(&TYPE_A.to_be_bytes());
    out.extend_from_slice(&CLASS_IN.to_be_bytes());
    Ok(out)
}

/// Builds a forged-style answer to `query`: same id and question, rcode 0,
/// one A record per address, owner names compressed to the question name.
pub fn encode_a_response(query: &ParsedQuery, addresses: &[Ipv4Addr], ttl: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(&query.transaction_id.to_be_bytes());
    let mut flags = FLAG_QR | FLAG_RA;
    if query.recursion_desired {
        flags |= FLAG_RD;
    }
    out.extend_from_slice(&flags.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(addresses.len() as u16).to_be_bytes());
    out.extend_from_slice(&[0; 4]);
    let labels: Vec<&str> = query.qname.split('.').filter(|l| !l.is_empty()).collect();
    push_name(&mut out, &labels);
    out.extend_from_slice(&query.qtype.to_be_bytes());
    out.extend_from_slice(&query.qclass.to_be_bytes());
    for addr in addresses {
        out.extend_from_slice(&[0xC0, HEADER_LEN as u8]);
        out.extend_from_slice(&TYPE_A.to_be_bytes());
        out.extend_from_slice(&CLASS_IN.to_be_bytes());
        out.extend_from_slice(&ttl.to_be_bytes());
        out.extend_from_slice(&4u16.to_be_bytes());
        out.extend_from_slice(&addr.octets());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn u16(&mut self) -> Option<u16> {
        let b = self.buf.get(self.pos..self.pos + 2)?;
        self.pos += 2;
        Some(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        let b = self.buf.get(self.pos..self.pos + 4)?;
        self.pos += 4;
        Some(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn bytes(&mut self, n: usize) -> Option<&'a [u8]> {
        let b = self.buf.get(self.pos..self.pos + n)?;
        self.pos += n;
        Some(b)
    }

    /// Reads a possibly compressed name, leaving `pos` after the in-place part.
    fn name(&mut self) -> Option<String> {
        let mut labels: Vec<String> = Vec::new();
        let mut cursor = self.pos;
        let mut resume: Option<usize> = None;
        let mut hops = 0;
        let mut total = 1;
        loop {
            let len = *self.buf.get(cursor)? as usize;
            match len & 0xC0 {
                0x00 => {
                    cursor += 1;
                    if len == 0 {
                        break;
                    }
                    let label = self.buf.get(cursor..cursor + len)?;
                    total += len + 1;
                    if total > MAX_NAME_LEN {
                        return None;
                    }
                    labels.push(String::from_utf8_lossy(label).to_ascii_lowercase());
                    cursor += len;
                }
                0xC0 => {
                    let lo = *self.buf.get(cursor + 1)? as usize;
                    hops += 1;
                    if hops > MAX_POINTER_HOPS {
                        return None;
                    }
                    if resume.is_none() {
                        resume = Some(cursor + 2);
                    }
                    cursor = ((len & 0x3F) << 8) | lo;
                }
                _ => return None,
            }
        }
        self.pos = resume.unwrap_or(cursor);
        Some(labels.join("."))
    }
}

struct Header {
    id: u16,
    flags: u16,
    qdcount: u16,
    ancount: u16,
}

fn read_header(r: &mut Reader<'_>) -> Option<Header> {
    let id = r.u16()?;
    let flags = r.u16()?;
    let qdcount = r.u16()?;
    let ancount = r.u16()?;
    r.u16()?;
    r.u16()?;
    Some(Header {
        id,
        flags,
        qdcount,
        ancount,
    })
}

/// Parses the header and first question of any DNS message.
pub fn decode_query(bytes: &[u8]) -> Option<ParsedQuery> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let h = read_header(&mut r)?;
    if h.qdcount == 0 {
        return None;
    }
    let qname = r.name()?;
    let qtype = r.u16()?;
    let qclass = r.u16()?;
    Some(ParsedQuery {
        transaction_id: h.id,
        qname,
        qtype,
        qclass,
        recursion_desired: h.flags & FLAG_RD != 0,
        is_response: h.flags & FLAG_QR != 0,
    })
}

/// Decodes a response, returning `None` unless it parses completely, is
/// flagged as a response, and carries `expected_id`.
pub fn decode_response(bytes: &[u8], expected_id: u16) -> Option<DecodedResponse> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let h = read_header(&mut r)?;
    if h.id != expected_id || h.flags & FLAG_QR == 0 {
        return None;
    }
    for _ in 0..h.qdcount {
        r.name()?;
        r.u16()?;
        r.u16()?;
    }
    let mut answers = Vec::with_capacity(h.ancount as usize);
    for _ in 0..h.ancount {
        let name = r.name()?;
        let rtype = r.u16()?;
        let class = r.u16()?;
        let ttl = r.u32()?;
        let rdlen = r.u16()? as usize;
        let rdata = r.bytes(rdlen)?;
        let address = (rtype == TYPE_A && class == CLASS_IN && rdlen == 4)
            .then(|| Ipv4Addr::new(rdata[0], rdata[1], rdata[2], rdata[3]));
        answers.push(DnsAnswer {
            name,
            rtype,
            ttl,
            address,
            rdata: hex_string(rdata),
        });
    }
    Some(DecodedResponse {
        transaction_id: h.id,
        rcode: (h.flags & 0x000F) as u8,
        answers,
    })
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
