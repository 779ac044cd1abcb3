// SPDX-License-Identifier: Apache-2.0

//! Segmented asset container and exclusion-range hashing.
//!
//! ```text
//! "PVL1" | kind:u8 label_len:u8 label payload_len:u32be payload | ...
//! ```
//!
//! The first segment is always `HEADER` and owns the magic bytes, so segment
//! ranges tile the whole file. The last segment is always `TRAILER`. A
//! `MANIFEST` segment, when present, sits directly after the header.

use std::fmt;

use thiserror::Error;

use crate::codec::{CodecError, MapBuilder, MapReader, Value};
use crate::crypto::{Digest, SHA256};

pub const MAGIC: &[u8; 4] = b"PVL1";
pub const MANIFEST_LABEL: &str = "prov.manifest";

const TLV_FIXED: usize = 1 + 1 + 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContainerError {
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("asset already carries a manifest")]
    DuplicateManifest,
    #[error("asset has no manifest")]
    NoManifest,
    #[error("range [{start}, +{length}) is outside the {len}-byte asset")]
    ExclusionOutOfBounds {
        start: usize,
        length: usize,
        len: usize,
    },
    #[error("exclusion ranges overlap or are unsorted at index {0}")]
    ExclusionsOverlap(usize),
    #[error("manifest segment is not fully covered by an exclusion")]
    ManifestNotExcluded,
    #[error("replacement is {actual} bytes, range is {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("unsupported digest algorithm `{0}`")]
    UnsupportedAlgorithm(String),
    #[error("no segment labelled `{0}`")]
    UnknownLabel(String),
    #[error("segment payload of {0} bytes does not fit a u32 length field")]
    PayloadTooLarge(usize),
}

fn malformed(msg: impl Into<String>) -> ContainerError {
    ContainerError::MalformedContainer(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SegmentKind {
    Header,
    ImageData,
    Metadata,
    Manifest,
    Trailer,
}

impl SegmentKind {
    pub fn code(self) -> u8 {
        match self {
            SegmentKind::Header => 1,
            SegmentKind::ImageData => 2,
            SegmentKind::Metadata => 3,
            SegmentKind::Manifest => 4,
            SegmentKind::Trailer => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => SegmentKind::Header,
            2 => SegmentKind::ImageData,
            3 => SegmentKind::Metadata,
            4 => SegmentKind::Manifest,
            5 => SegmentKind::Trailer,
            _ => return None,
        })
    }
}

impl fmt::Display for SegmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentKind::Header => "HEADER",
            SegmentKind::ImageData => "IMAGE_DATA",
            SegmentKind::Metadata => "METADATA",
            SegmentKind::Manifest => "MANIFEST",
            SegmentKind::Trailer => "TRAILER",
        })
    }
}

/// Half-open byte interval `[start, start + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ByteRange {
    pub start: usize,
    pub length: usize,
}

impl ByteRange {
    pub fn new(start: usize, length: usize) -> Self {
        ByteRange { start, length }
    }

    pub fn end(&self) -> usize {
        self.start + self.length
    }

    pub fn contains(&self, other: &ByteRange) -> bool {
        self.start <= other.start && other.end() <= self.end()
    }

    pub fn contains_offset(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end()
    }

    fn check_bounds(&self, len: usize) -> Result<(), ContainerError> {
        match self.start.checked_add(self.length) {
            Some(end) if end <= len && self.length > 0 => Ok(()),
            _ => Err(ContainerError::ExclusionOutOfBounds {
                start: self.start,
                length: self.length,
                len,
            }),
        }
    }

    pub(crate) fn to_value(self) -> Value {
        MapBuilder::new()
            .field("start", self.start as u64)
            .field("length", self.length as u64)
            .build()
    }

    pub(crate) fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let start = r.u64("start")?;
        let length = r.u64("length")?;
        r.finish()?;
        let to_usize = |n: u64, field| {
            usize::try_from(n).map_err(|_| CodecError::InvalidField {
                field,
                reason: "offset too large".into(),
            })
        };
        Ok(ByteRange::new(to_usize(start, "start")?, to_usize(length, "length")?))
    }
}

impl fmt::Display for ByteRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub kind: SegmentKind,
    pub label: String,
    /// Whole segment including its TLV header (and the magic, for the header).
    pub range: ByteRange,
    pub payload: ByteRange,
}

/// An asset file: raw bytes plus the segment map parsed from them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Asset {
    bytes: Vec<u8>,
    segments: Vec<Segment>,
}

/// One segment to be laid out by [`Asset::build`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentSpec {
    pub kind: SegmentKind,
    pub label: String,
    pub payload: Vec<u8>,
}

impl SegmentSpec {
    pub fn new(kind: SegmentKind, label: &str, payload: impl Into<Vec<u8>>) -> Self {
        SegmentSpec {
            kind,
            label: label.to_owned(),
            payload: payload.into(),
        }
    }
}

fn write_tlv(out: &mut Vec<u8>, kind: SegmentKind, label: &str, payload: &[u8]) -> Result<(), ContainerError> {
    let label_len = u8::try_from(label.len()).map_err(|_| malformed("label longer than 255 bytes"))?;
    let payload_len =
        u32::try_from(payload.len()).map_err(|_| ContainerError::PayloadTooLarge(payload.len()))?;
    out.push(kind.code());
    out.push(label_len);
    out.extend_from_slice(label.as_bytes());
    out.extend_from_slice(&payload_len.to_be_bytes());
    out.extend_from_slice(payload);
    Ok(())
}

impl Asset {
    /// Lays out segments into a new file and parses it back.
    pub fn build(segments: &[SegmentSpec]) -> Result<Asset, ContainerError> {
        let mut bytes = MAGIC.to_vec();
        for s in segments {
            write_tlv(&mut bytes, s.kind, &s.label, &s.payload)?;
        }
        parse_asset(&bytes)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn manifest_segment(&self) -> Option<&Segment> {
        self.segments.iter().find(|s| s.kind == SegmentKind::Manifest)
    }

    pub fn metadata_segment(&self, label: &str) -> Option<&Segment> {
        self.segments
            .iter()
            .find(|s| s.kind == SegmentKind::Metadata && s.label == label)
    }

    pub fn slice(&self, range: ByteRange) -> &[u8] {
        &self.bytes[range.start..range.end()]
    }

    pub fn payload(&self, segment: &Segment) -> &[u8] {
        self.slice(segment.payload)
    }
}

pub fn parse_asset(bytes: &[u8]) -> Result<Asset, ContainerError> {
    if bytes.len() < MAGIC.len() {
        return Err(malformed("shorter than magic"));
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(malformed("bad magic"));
    }
    let mut segments = Vec::new();
    let mut pos = MAGIC.len();
    while pos < bytes.len() {
        let seg_start = if segments.is_empty() { 0 } else { pos };
        if bytes.len() - pos < TLV_FIXED {
            return Err(malformed(format!("truncated segment header at {pos}")));
        }
        let kind = SegmentKind::from_code(bytes[pos])
            .ok_or_else(|| malformed(format!("unknown segment kind {:#04x} at {pos}", bytes[pos])))?;
        let label_len = bytes[pos + 1] as usize;
        let label_start = pos + 2;
        let len_start = label_start + label_len;
        if len_start + 4 > bytes.len() {
            return Err(malformed(format!("label runs past end of file at {pos}")));
        }
        let label = &bytes[label_start..len_start];
        if label.is_empty() || !label.iter().all(u8::is_ascii_graphic) {
            return Err(malformed(format!("invalid segment label at {pos}")));
        }
        let payload_len =
            u32::from_be_bytes(bytes[len_start..len_start + 4].try_into().unwrap()) as usize;
        let payload_start = len_start + 4;
        if payload_len > bytes.len() - payload_start {
            return Err(malformed(format!(
                "segment at {pos} declares {payload_len} payload bytes past end of file"
            )));
        }
        let end = payload_start + payload_len;
        segments.push(Segment {
            kind,
            label: String::from_utf8(label.to_vec()).expect("ascii"),
            range: ByteRange::new(seg_start, end - seg_start),
            payload: ByteRange::new(payload_start, payload_len),
        });
        pos = end;
    }
    check_layout(&segments)?;
    Ok(Asset {
        bytes: bytes.to_vec(),
        segments,
    })
}

fn check_layout(segments: &[Segment]) -> Result<(), ContainerError> {
    let manifests = segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Manifest)
        .count();
    if manifests > 1 {
        return Err(ContainerError::DuplicateManifest);
    }
    let (Some(first), Some(last)) = (segments.first(), segments.last()) else {
        return Err(malformed("no segments"));
    };
    if first.kind != SegmentKind::Header {
        return Err(malformed("first segment is not HEADER"));
    }
    if segments.len() < 2 || last.kind != SegmentKind::Trailer {
        return Err(malformed("missing TRAILER"));
    }
    for (i, s) in segments.iter().enumerate() {
        let interior = i != 0 && i != segments.len() - 1;
        if interior && matches!(s.kind, SegmentKind::Header | SegmentKind::Trailer) {
            return Err(malformed(format!("{} segment at index {i}", s.kind)));
        }
        if s.kind == SegmentKind::Manifest && i != 1 {
            return Err(malformed(format!("MANIFEST at index {i}, expected 1")));
        }
    }
    let mut labels: Vec<&str> = segments
        .iter()
        .filter(|s| s.kind == SegmentKind::Metadata)
        .map(|s| s.label.as_str())
        .collect();
    labels.sort_unstable();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(malformed(format!("duplicate metadata label `{}`", w[0])));
    }
    Ok(())
}

pub fn serialize_asset(asset: &Asset) -> Vec<u8> {
    asset.bytes.clone()
}

/// Digest over every byte outside the exclusions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HardBinding {
    pub algorithm: String,
    pub exclusions: Vec<ByteRange>,
    pub digest: Digest,
}

impl HardBinding {
    pub(crate) fn to_value(&self) -> Value {
        MapBuilder::new()
            .field("alg", self.algorithm.as_str())
            .field(
                "exclusions",
                Value::Array(self.exclusions.iter().map(|r| r.to_value()).collect()),
            )
            .field("digest", self.digest.to_value())
            .build()
    }

    pub(crate) fn from_value(value: Value) -> Result<Self, CodecError> {
        let mut r = MapReader::new(value)?;
        let algorithm = r.text("alg")?;
        let exclusions = r
            .take("exclusions")?
            .into_array()?
            .into_iter()
            .map(ByteRange::from_value)
            .collect::<Result<_, _>>()?;
        let digest = Digest::from_value(r.take("digest")?, "digest")?;
        r.finish()?;
        Ok(HardBinding {
            algorithm,
            exclusions,
            digest,
        })
    }
}

/// Validates exclusions against the asset: in bounds, sorted, disjoint, and
/// covering the manifest segment if there is one.
pub fn check_exclusions(asset: &Asset, exclusions: &[ByteRange]) -> Result<(), ContainerError> {
    for r in exclusions {
        r.check_bounds(asset.len())?;
    }
    for (i, w) in exclusions.windows(2).enumerate() {
        if w[1].start < w[0].end() {
            return Err(ContainerError::ExclusionsOverlap(i + 1));
        }
    }
    if let Some(m) = asset.manifest_segment() {
        if !exclusions.iter().any(|r| r.contains(&m.range)) {
            return Err(ContainerError::ManifestNotExcluded);
        }
    }
    Ok(())
}

pub fn compute_hard_binding(
    asset: &Asset,
    exclusions: &[ByteRange],
    algorithm: &str,
) -> Result<HardBinding, ContainerError> {
    if algorithm != SHA256 {
        return Err(ContainerError::UnsupportedAlgorithm(algorithm.to_owned()));
    }
    check_exclusions(asset, exclusions)?;
    let mut kept = Vec::with_capacity(exclusions.len() + 1);
    let mut cursor = 0;
    for r in exclusions {
        kept.push(&asset.bytes[cursor..r.start]);
        cursor = r.end();
    }
    kept.push(&asset.bytes[cursor..]);
    Ok(HardBinding {
        algorithm: algorithm.to_owned(),
        exclusions: exclusions.to_vec(),
        digest: Digest::of_parts(kept),
    })
}

pub fn embed_manifest(asset: &Asset, manifest_bytes: &[u8]) -> Result<Asset, ContainerError> {
    if asset.manifest_segment().is_some() {
        return Err(ContainerError::DuplicateManifest);
    }
    let header_end = asset.segments[0].range.end();
    let mut bytes = Vec::with_capacity(asset.len() + manifest_bytes.len() + 32);
    bytes.extend_from_slice(&asset.bytes[..header_end]);
    write_tlv(&mut bytes, SegmentKind::Manifest, MANIFEST_LABEL, manifest_bytes)?;
    bytes.extend_from_slice(&asset.bytes[header_end..]);
    parse_asset(&bytes)
}

pub fn extract_manifest(asset: &Asset) -> Option<&[u8]> {
    asset.manifest_segment().map(|s| asset.payload(s))
}

pub fn strip_manifest(asset: &Asset) -> Result<Asset, ContainerError> {
    let m = asset.manifest_segment().ok_or(ContainerError::NoManifest)?;
    let mut bytes = asset.bytes[..m.range.start].to_vec();
    bytes.extend_from_slice(&asset.bytes[m.range.end()..]);
    parse_asset(&bytes)
}

/// Swaps the manifest payload, shifting later segments as needed.
pub fn replace_manifest(asset: &Asset, manifest_bytes: &[u8]) -> Result<Asset, ContainerError> {
    embed_manifest(&strip_manifest(asset)?, manifest_bytes)
}

/// Length-preserving overwrite. The segment map is carried over untouched, so
/// a splice across a segment header yields bytes that may no longer parse.
pub fn splice_bytes(
    asset: &Asset,
    range: ByteRange,
    replacement: &[u8],
) -> Result<Asset, ContainerError> {
    range.check_bounds(asset.len())?;
    if replacement.len() != range.length {
        return Err(ContainerError::LengthMismatch {
            expected: range.length,
            actual: replacement.len(),
        });
    }
    let mut bytes = asset.bytes.clone();
    bytes[range.start..range.end()].copy_from_slice(replacement);
    Ok(Asset {
        bytes,
        segments: asset.segments.clone(),
    })
}
