//! Binary model format. All integers and floats are little-endian.
//!
//! ```text
//! "IRCF" | version: u32 | body_len: u64 | body | crc32(all preceding bytes): u32
//!
//! body:
//!   n_estimators u32, max_depth u32, min_samples_leaf u32, min_samples_split u32,
//!   max_features u32, seed u64
//!   n_samples u64, 7 x (min f64, max f64)
//!   n_trees u32, then per tree: n_nodes u32, then per node
//!     0x00 value f64                                       (leaf)
//!     0x01 feature u8, threshold f64, left u32, right u32, gain f64   (split)
//! ```

use crate::error::ModelFileError;

use super::{ForestHyperparams, ForestModel, Node, TrainingStats, Tree, N_INPUTS};

pub const MAGIC: &[u8; 4] = b"IRCF";
pub const FORMAT_VERSION: u32 = 1;

const PREFIX_LEN: usize = 4 + 4 + 8;
const TAG_LEAF: u8 = 0;
const TAG_SPLIT: u8 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(super) fn encode(model: &ForestModel) -> Vec<u8> {
    let mut body = Vec::new();
    let hp = &model.hyperparams;
    put_u32(&mut body, hp.n_estimators as u32);
    put_u32(&mut body, hp.max_depth as u32);
    put_u32(&mut body, hp.min_samples_leaf as u32);
    put_u32(&mut body, hp.min_samples_split as u32);
    put_u32(&mut body, hp.max_features as u32);
    put_u64(&mut body, hp.seed);

    put_u64(&mut body, model.stats.n_samples);
    for k in 0..N_INPUTS {
        put_f64(&mut body, model.stats.feature_min[k]);
        put_f64(&mut body, model.stats.feature_max[k]);
    }

    put_u32(&mut body, model.trees.len() as u32);
    for tree in &model.trees {
        put_u32(&mut body, tree.nodes.len() as u32);
        for node in &tree.nodes {
            match *node {
                Node::Leaf { value } => {
                    body.push(TAG_LEAF);
                    put_f64(&mut body, value);
                }
                Node::Split { feature, threshold, left, right, gain } => {
                    body.push(TAG_SPLIT);
                    body.push(feature);
                    put_f64(&mut body, threshold);
                    put_u32(&mut body, left);
                    put_u32(&mut body, right);
                    put_f64(&mut body, gain);
                }
            }
        }
    }

    let mut out = Vec::with_capacity(PREFIX_LEN + body.len() + 4);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_u64(&mut out, body.len() as u64);
    out.extend_from_slice(&body);
    let crc = crc32fast::hash(&out);
    put_u32(&mut out, crc);
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self.pos.checked_add(n).ok_or(ModelFileError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(ModelFileError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ModelFileError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelFileError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, ModelFileError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn corrupt(msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Corrupt(msg.into())
}

pub(super) fn decode(bytes: &[u8]) -> Result<ForestModel, ModelFileError> {
    if bytes.len() < MAGIC.len() {
        return Err(ModelFileError::Truncated);
    }
    if &bytes[..4] != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let mut head = Cursor { buf: bytes, pos: 4 };
    let version = head.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let body_len = usize::try_from(head.u64()?).map_err(|_| ModelFileError::Truncated)?;
    let expected = PREFIX_LEN.checked_add(body_len).and_then(|n| n.checked_add(4));
    match expected {
        Some(n) if bytes.len() < n => return Err(ModelFileError::Truncated),
        Some(n) if bytes.len() > n => return Err(corrupt("trailing bytes after checksum")),
        None => return Err(ModelFileError::Truncated),
        _ => {}
    }
    let (signed, crc) = bytes.split_at(bytes.len() - 4);
    if crc32fast::hash(signed) != u32::from_le_bytes(crc.try_into().unwrap()) {
        return Err(ModelFileError::Checksum);
    }

    let mut c = Cursor { buf: &signed[PREFIX_LEN..], pos: 0 };
    let hyperparams = ForestHyperparams {
        n_estimators: c.u32()? as usize,
        max_depth: c.u32()? as usize,
        min_samples_leaf: c.u32()? as usize,
        min_samples_split: c.u32()? as usize,
        max_features: c.u32()? as usize,
        seed: c.u64()?,
    };
    let n_samples = c.u64()?;
    let mut feature_min = [0.0; N_INPUTS];
    let mut feature_max = [0.0; N_INPUTS];
    for k in 0..N_INPUTS {
        feature_min[k] = c.f64()?;
        feature_max[k] = c.f64()?;
    }

    let n_trees = c.u32()? as usize;
    if n_trees == 0 {
        return Err(corrupt("model has no trees"));
    }
    let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
    for _ in 0..n_trees {
        let n_nodes = c.u32()? as usize;
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
        for _ in 0..n_nodes {
            let node = match c.u8()? {
                TAG_LEAF => Node::Leaf { value: c.f64()? },
                TAG_SPLIT => Node::Split {
                    feature: c.u8()?,
                    threshold: c.f64()?,
                    left: c.u32()?,
                    right: c.u32()?,
                    gain: c.f64()?,
                },
                tag => return Err(corrupt(format!("unknown node tag {tag}"))),
            };
            nodes.push(node);
        }
        let tree = Tree { nodes };
        validate_tree(&tree)?;
        trees.push(tree);
    }
    if c.pos != c.buf.len() {
        return Err(corrupt("unexpected bytes after the last tree"));
    }
    Ok(ForestModel { trees, hyperparams, stats: TrainingStats { n_samples, feature_min, feature_max } })
}

/// Checks the flat pre-order layout: children come after their parent, every
/// non-root node has exactly one parent, and values are usable.
pub(super) fn validate_tree(tree: &Tree) -> Result<(), ModelFileError> {
    let nodes = &tree.nodes;
    if nodes.is_empty() {
        return Err(corrupt("empty tree"));
    }
    let mut referenced = vec![false; nodes.len()];
    for (i, node) in nodes.iter().enumerate() {
        match *node {
            Node::Leaf { value } => {
                if !(value.is_finite() && value > 0.0) {
                    return Err(corrupt(format!("leaf {i} has invalid value {value}")));
                }
            }
            Node::Split { feature, threshold, left, right, .. } => {
                if feature as usize >= N_INPUTS {
                    return Err(corrupt(format!("node {i} splits on feature {feature}")));
                }
                if !threshold.is_finite() {
                    return Err(corrupt(format!("node {i} has a non-finite threshold")));
                }
                for child in [left as usize, right as usize] {
                    if child <= i || child >= nodes.len() || referenced[child] {
                        return Err(corrupt(format!("node {i} has invalid child {child}")));
                    }
                    referenced[child] = true;
                }
            }
        }
    }
    if referenced.iter().skip(1).any(|r| !r) {
        return Err(corrupt("tree contains unreachable nodes"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ForestModel {
        let tree = Tree {
            nodes: vec![
                Node::Split { feature: 6, threshold: 30.0, left: 1, right: 2, gain: 5.0 },
                Node::Leaf { value: 8000.0 },
                Node::Leaf { value: 1000.0 },
            ],
        };
        ForestModel {
            trees: vec![tree.clone(), tree],
            hyperparams: ForestHyperparams { n_estimators: 2, ..Default::default() },
            stats: TrainingStats { n_samples: 10, feature_min: [0.0; 7], feature_max: [1.0; 7] },
        }
    }

    #[test]
    fn round_trip() {
        let m = model();
        let bytes = encode(&m);
        assert_eq!(&bytes[..4], b"IRCF");
        assert_eq!(decode(&bytes).unwrap(), m);
    }

    #[test]
    fn header_errors() {
        let mut bytes = encode(&model());
        bytes[0] = b'X';
        assert_eq!(decode(&bytes).unwrap_err(), ModelFileError::BadMagic);

        let mut bytes = encode(&model());
        bytes[4] = 2;
        assert_eq!(decode(&bytes).unwrap_err(), ModelFileError::VersionMismatch { found: 2, expected: 1 });

        let bytes = encode(&model());
        for cut in [2, 10, bytes.len() - 1, bytes.len() - 40] {
            assert_eq!(decode(&bytes[..cut]).unwrap_err(), ModelFileError::Truncated, "cut {cut}");
        }
    }

    #[test]
    fn flipped_node_byte_fails_checksum() {
        let bytes = encode(&model());
        // Inside the last node of the last tree.
        let at = bytes.len() - 4 - 3;
        let mut bad = bytes.clone();
        bad[at] ^= 0x40;
        assert_eq!(decode(&bad).unwrap_err(), ModelFileError::Checksum);
    }

    #[test]
    fn structural_validation() {
        let cyclic = Tree {
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.0, left: 1, right: 1, gain: 0.0 },
                Node::Leaf { value: 1.0 },
            ],
        };
        assert!(validate_tree(&cyclic).is_err());
        let bad_feature = Tree {
            nodes: vec![
                Node::Split { feature: 7, threshold: 0.0, left: 1, right: 2, gain: 0.0 },
                Node::Leaf { value: 1.0 },
                Node::Leaf { value: 1.0 },
            ],
        };
        assert!(validate_tree(&bad_feature).is_err());
        let zero_leaf = Tree { nodes: vec![Node::Leaf { value: 0.0 }] };
        assert!(validate_tree(&zero_leaf).is_err());
    }
}
