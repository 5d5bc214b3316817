//! Bodies of the fuzz targets. Also compiled into the core test suite, which
//! replays the checked-in corpus on stable.
//!
//! Each body must not panic on any input. Anything a decoder accepts must
//! survive a re-encode unchanged.

#![allow(dead_code)]

use gpnet::cache;
use gpnet::classifier::checkpoint;
use gpnet::data::{
    decode_edges, decode_features, decode_labels, encode_edges, encode_features, encode_labels,
    encode_meta, encode_splits, from_bundle_bytes, parse_meta, parse_splits, to_bundle_bytes,
    BundleBytes,
};
use gpnet::sweep::{GridSpec, DEFAULT_MAX_POINTS};

pub const TARGETS: [(&str, fn(&[u8])); 7] = [
    ("bundle", bundle),
    ("bundle_meta", bundle_meta),
    ("bundle_splits", bundle_splits),
    ("bundle_arrays", bundle_arrays),
    ("feature_cache", feature_cache),
    ("checkpoint", checkpoint),
    ("sweep_grid", sweep_grid),
];

/// Four little-endian u16 lengths (meta, edges, features, labels), then the
/// parts back to back; whatever is left is `splits.json`.
pub fn split_bundle(data: &[u8]) -> Option<BundleBytes> {
    let mut lens = [0usize; 4];
    for (i, l) in lens.iter_mut().enumerate() {
        *l = u16::from_le_bytes(data.get(2 * i..2 * i + 2)?.try_into().unwrap()) as usize;
    }
    let mut rest = &data[8..];
    let mut take = |n: usize| -> Option<Vec<u8>> {
        let (head, tail) = rest.split_at_checked(n)?;
        rest = tail;
        Some(head.to_vec())
    };
    let meta = take(lens[0])?;
    let edges = take(lens[1])?;
    let features = take(lens[2])?;
    let labels = take(lens[3])?;
    Some(BundleBytes { meta, edges, features, labels, splits: rest.to_vec() })
}

pub fn join_bundle(b: &BundleBytes) -> Vec<u8> {
    let mut out = Vec::new();
    for part in [&b.meta, &b.edges, &b.features, &b.labels] {
        out.extend_from_slice(&(part.len() as u16).to_le_bytes());
    }
    for part in [&b.meta, &b.edges, &b.features, &b.labels, &b.splits] {
        out.extend_from_slice(part);
    }
    out
}

pub fn bundle(data: &[u8]) {
    let Some(parts) = split_bundle(data) else { return };
    let Ok(ds) = from_bundle_bytes(&parts) else { return };
    let bytes = to_bundle_bytes(&ds).expect("decoded bundle re-encodes");
    assert_eq!(bytes.edges, parts.edges);
    assert_eq!(bytes.features, parts.features);
    assert_eq!(bytes.labels, parts.labels);
    assert_eq!(from_bundle_bytes(&bytes).expect("re-encoded bundle decodes"), ds);
}

pub fn bundle_meta(data: &[u8]) {
    if let Ok(meta) = parse_meta(data) {
        assert_eq!(parse_meta(&encode_meta(&meta)).unwrap(), meta);
    }
}

pub fn bundle_splits(data: &[u8]) {
    if let Ok(splits) = parse_splits(data) {
        assert_eq!(parse_splits(&encode_splits(&splits)).unwrap(), splits);
    }
}

/// First byte picks the array; for features the next two give the shape.
pub fn bundle_arrays(data: &[u8]) {
    let Some((&kind, rest)) = data.split_first() else { return };
    match kind % 3 {
        0 => {
            if let Ok(e) = decode_edges(rest) {
                assert_eq!(encode_edges(&e), rest);
            }
        }
        1 => {
            if let Ok(l) = decode_labels(rest) {
                assert_eq!(encode_labels(&l), rest);
            }
        }
        _ => {
            let [r, c, body @ ..] = rest else { return };
            if let Ok(x) = decode_features(body, *r as usize, *c as usize) {
                assert_eq!(encode_features(&x), body);
            }
        }
    }
}

pub fn feature_cache(data: &[u8]) {
    if let Ok(f) = cache::decode(data) {
        assert_eq!(cache::encode(&f).unwrap(), data);
    }
}

pub fn checkpoint(data: &[u8]) {
    if let Ok(c) = checkpoint::decode(data) {
        assert_eq!(checkpoint::encode(&c), data);
    }
}

pub fn sweep_grid(data: &[u8]) {
    if let Ok(grid) = GridSpec::from_json(data) {
        let _ = grid.raw_size();
        if let Ok(points) = grid.expand(DEFAULT_MAX_POINTS, false) {
            assert!(points.len() <= DEFAULT_MAX_POINTS);
        }
    }
}
