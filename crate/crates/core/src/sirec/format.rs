//! Versioned JSON model files.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::model::{ModelConfig, SirecModel, SirecTree};
use super::tree::{DecisionTree, Node};
use crate::error::{Error, Result};
use crate::features::IntervalPair;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    config: ModelConfig,
    classes: Vec<i32>,
    trees: Vec<TreeRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    rnd_start: usize,
    length: usize,
    nodes: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum NodeKind {
    Split,
    Leaf,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    kind: NodeKind,
    feature: Option<usize>,
    threshold: Option<f32>,
    left: Option<usize>,
    right: Option<usize>,
    label: Option<i32>,
}

impl From<&Node> for NodeRecord {
    fn from(node: &Node) -> Self {
        match *node {
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => NodeRecord {
                kind: NodeKind::Split,
                feature: Some(feature),
                threshold: Some(threshold),
                left: Some(left),
                right: Some(right),
                label: None,
            },
            Node::Leaf { label } => NodeRecord {
                kind: NodeKind::Leaf,
                feature: None,
                threshold: None,
                left: None,
                right: None,
                label: Some(label),
            },
        }
    }
}

impl NodeRecord {
    fn into_node(self, tree: usize, node: usize) -> Result<Node> {
        let need = |present: bool, field: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::Model(format!(
                    "trees[{tree}].nodes[{node}]: missing field `{field}`"
                )))
            }
        };
        let forbid = |absent: bool, field: &str| {
            if absent {
                Ok(())
            } else {
                Err(Error::Model(format!(
                    "trees[{tree}].nodes[{node}]: field `{field}` must be null for this kind"
                )))
            }
        };
        match self.kind {
            NodeKind::Split => {
                need(self.feature.is_some(), "feature")?;
                need(self.threshold.is_some(), "threshold")?;
                need(self.left.is_some(), "left")?;
                need(self.right.is_some(), "right")?;
                forbid(self.label.is_none(), "label")?;
                Ok(Node::Split {
                    feature: self.feature.unwrap_or_default(),
                    threshold: self.threshold.unwrap_or_default(),
                    left: self.left.unwrap_or_default(),
                    right: self.right.unwrap_or_default(),
                })
            }
            NodeKind::Leaf => {
                need(self.label.is_some(), "label")?;
                for (v, f) in [
                    (self.feature.is_none(), "feature"),
                    (self.threshold.is_none(), "threshold"),
                    (self.left.is_none(), "left"),
                    (self.right.is_none(), "right"),
                ] {
                    forbid(v, f)?;
                }
                Ok(Node::Leaf {
                    label: self.label.unwrap_or_default(),
                })
            }
        }
    }
}

/// Pretty-printed JSON; identical models give identical bytes.
pub fn serialize(model: &SirecModel) -> Vec<u8> {
    let file = ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        config: *model.config(),
        classes: model.classes().to_vec(),
        trees: model
            .trees()
            .iter()
            .map(|t| TreeRecord {
                rnd_start: t.pair.rnd_start,
                length: t.pair.length,
                nodes: t.tree.nodes().iter().map(NodeRecord::from).collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("model serializes");
    out.push(b'\n');
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<SirecModel> {
    let value: Value = match serde_json::from_slice(bytes) {
        Ok(v) => v,
        Err(e) if e.is_eof() => {
            // Close whatever was cut off so the schema check can report the
            // first field that never arrived.
            let text = String::from_utf8_lossy(bytes);
            let repaired = close_truncated(&text)
                .and_then(|t| serde_json::from_str::<Value>(&t).ok())
                .ok_or_else(|| Error::Model(format!("truncated model file: {e}")))?;
            check_version(&repaired)?;
            return match serde_json::from_value::<ModelFile>(repaired) {
                Err(inner) => Err(Error::Model(format!("truncated model file: {inner}"))),
                Ok(_) => Err(Error::Model(format!("truncated model file: {e}"))),
            };
        }
        Err(e) => return Err(Error::Json(e)),
    };
    check_version(&value)?;
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Model(e.to_string()))?;
    from_file(file)
}

fn check_version(value: &Value) -> Result<()> {
    let found = value
        .get("format_version")
        .ok_or_else(|| Error::Model("missing field `format_version`".into()))?;
    if found.as_u64() != Some(MODEL_FORMAT_VERSION as u64) {
        return Err(Error::Version {
            found: found.to_string(),
            supported: MODEL_FORMAT_VERSION,
        });
    }
    Ok(())
}

fn from_file(file: ModelFile) -> Result<SirecModel> {
    let trees = file
        .trees
        .into_iter()
        .enumerate()
        .map(|(ti, t)| {
            let nodes = t
                .nodes
                .into_iter()
                .enumerate()
                .map(|(ni, n)| n.into_node(ti, ni))
                .collect::<Result<Vec<_>>>()?;
            let tree = DecisionTree::from_nodes(nodes).map_err(|e| Error::Model(format!("trees[{ti}]: {e}")))?;
            Ok(SirecTree {
                pair: IntervalPair {
                    rnd_start: t.rnd_start,
                    length: t.length,
                },
                tree,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SirecModel::from_parts(file.config, file.classes, trees)
}

/// Cuts `text` back to the last point where a value had just been completed
/// or a container opened, then appends the missing closing brackets.
fn close_truncated(text: &str) -> Option<String> {
    let mut stack: Vec<char> = Vec::new();
    let mut cuts: Vec<(usize, Vec<char>)> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text.char_indices() {
        if in_string {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' => {
                stack.push('}');
                cuts.push((i + 1, stack.clone()));
            }
            '[' => {
                stack.push(']');
                cuts.push((i + 1, stack.clone()));
            }
            '}' | ']' => {
                stack.pop();
            }
            ',' => cuts.push((i, stack.clone())),
            _ => {}
        }
    }
    cuts.into_iter().rev().find_map(|(at, open)| {
        let mut s = text[..at].to_string();
        s.extend(open.iter().rev());
        serde_json::from_str::<Value>(&s).ok().map(|_| s)
    })
}
