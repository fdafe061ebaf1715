//! Manipulation trees.
//!
//! Nodes are manipulated regions and edges encode spatial containment. A new
//! region is attached under the deepest existing node that fully contains it
//! (ties on depth go to the larger area, then to the smaller id). The root
//! spans the whole image, so every region has at least one candidate parent.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::mask::RegionMask;
use crate::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn is_root(self) -> bool {
        self == Self::ROOT
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeNode {
    pub id: NodeId,
    pub region: RegionMask,
    /// `None` for the root.
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub depth: usize,
    pub area: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManipulationTree {
    width: usize,
    height: usize,
    nodes: BTreeMap<NodeId, TreeNode>,
    insertion_order: Vec<NodeId>,
    next_id: u32,
}

impl ManipulationTree {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        let region = RegionMask::full(width, height)?;
        let root = TreeNode {
            id: NodeId::ROOT,
            area: region.area(),
            region,
            parent: None,
            children: Vec::new(),
            depth: 0,
        };
        Ok(ManipulationTree {
            width,
            height,
            nodes: BTreeMap::from([(NodeId::ROOT, root)]),
            insertion_order: Vec::new(),
            next_id: 1,
        })
    }

    /// Rebuilds a tree from stored `(id, parent, region)` records.
    ///
    /// Records may appear in any order; the root (id 0, no parent, full
    /// region) must be among them. Every structural invariant is checked.
    pub fn from_parts(
        width: usize,
        height: usize,
        records: Vec<(NodeId, Option<NodeId>, RegionMask)>,
        insertion_order: Vec<NodeId>,
    ) -> Result<Self> {
        let mut tree = Self::new(width, height)?;
        let mut parents = BTreeMap::new();
        let mut saw_root = false;
        for (id, parent, region) in records {
            if region.dims() != (width, height) {
                return Err(Error::dims((width, height), region.dims()));
            }
            match (id.is_root(), parent) {
                (true, None) => {
                    if region != tree.nodes[&NodeId::ROOT].region {
                        return Err(Error::InvalidTree("root must span the full grid".into()));
                    }
                    saw_root = true;
                }
                (false, Some(p)) => {
                    if parents.insert(id, p).is_some() {
                        return Err(Error::InvalidTree(format!("duplicate node {id}")));
                    }
                    tree.nodes.insert(
                        id,
                        TreeNode {
                            id,
                            area: region.area(),
                            region,
                            parent: Some(p),
                            children: Vec::new(),
                            depth: 0,
                        },
                    );
                }
                _ => {
                    return Err(Error::InvalidTree(format!(
                        "node {id} has an inconsistent root/parent record"
                    )))
                }
            }
        }
        if !saw_root {
            return Err(Error::InvalidTree("missing root node".into()));
        }
        for (&id, &p) in &parents {
            let parent = tree
                .nodes
                .get_mut(&p)
                .ok_or_else(|| Error::InvalidTree(format!("node {id} has unknown parent {p}")))?;
            parent.children.push(id);
        }
        // depths by walking from the root; anything unreached sits on a cycle
        let mut stack = vec![(NodeId::ROOT, 0usize)];
        let mut reached = 0;
        while let Some((id, depth)) = stack.pop() {
            reached += 1;
            let node = tree.nodes.get_mut(&id).expect("child ids are known");
            node.depth = depth;
            stack.extend(node.children.iter().map(|&c| (c, depth + 1)));
        }
        if reached != tree.nodes.len() {
            return Err(Error::InvalidTree("parent links contain a cycle".into()));
        }

        let mut seen = insertion_order.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != insertion_order.len()
            || seen != parents.keys().copied().collect::<Vec<_>>()
        {
            return Err(Error::InvalidTree(
                "insertion order must list every non-root node exactly once".into(),
            ));
        }
        tree.insertion_order = insertion_order;
        tree.next_id = tree.nodes.keys().last().map_or(1, |id| id.0 + 1);
        let problems = tree.validate();
        if let Some(first) = problems.first() {
            return Err(Error::InvalidTree(first.clone()));
        }
        Ok(tree)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// `true` when the tree holds only the root.
    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn node(&self, id: NodeId) -> Option<&TreeNode> {
        self.nodes.get(&id)
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[&NodeId::ROOT]
    }

    /// All nodes in id order, root first.
    pub fn nodes(&self) -> impl DoubleEndedIterator<Item = &TreeNode> {
        self.nodes.values()
    }

    pub fn insertion_order(&self) -> &[NodeId] {
        &self.insertion_order
    }

    /// The node a region would be attached to if inserted now.
    pub fn parent_for(&self, region: &RegionMask) -> Result<NodeId> {
        if region.dims() != self.dims() {
            return Err(Error::dims(self.dims(), region.dims()));
        }
        let mut best: Option<&TreeNode> = None;
        for node in self.nodes.values() {
            if !region.is_subset(&node.region)? {
                continue;
            }
            // ids ascend, so strict comparison keeps the smallest id on ties
            if best.is_none_or(|b| (node.depth, node.area) > (b.depth, b.area)) {
                best = Some(node);
            }
        }
        Ok(best.expect("the root contains every region").id)
    }

    pub fn insert_region(&mut self, region: RegionMask) -> Result<NodeId> {
        if region.dims() != self.dims() {
            return Err(Error::dims(self.dims(), region.dims()));
        }
        if region.is_empty() {
            return Err(Error::EmptyRegion);
        }
        let parent = self.parent_for(&region)?;
        let id = NodeId(self.next_id);
        self.next_id += 1;
        let depth = self.nodes[&parent].depth + 1;
        self.nodes.get_mut(&parent).unwrap().children.push(id);
        self.nodes.insert(
            id,
            TreeNode {
                id,
                area: region.area(),
                region,
                parent: Some(parent),
                children: Vec::new(),
                depth,
            },
        );
        self.insertion_order.push(id);
        Ok(id)
    }

    /// Nodes without children, in id order. The root appears only when it
    /// is the sole node.
    pub fn leaves(&self) -> Vec<NodeId> {
        self.nodes
            .values()
            .filter(|n| n.children.is_empty())
            .map(|n| n.id)
            .collect()
    }

    pub fn remove_leaf(&mut self, id: NodeId) -> Result<TreeNode> {
        if id.is_root() {
            return Err(Error::CannotRemoveRoot);
        }
        let node = self.nodes.get(&id).ok_or(Error::UnknownNode(id))?;
        if !node.children.is_empty() {
            return Err(Error::NotALeaf(id));
        }
        let node = self.nodes.remove(&id).unwrap();
        let parent = node.parent.expect("non-root nodes have a parent");
        self.nodes
            .get_mut(&parent)
            .unwrap()
            .children
            .retain(|&c| c != id);
        self.insertion_order.retain(|&c| c != id);
        Ok(node)
    }

    /// Ids of the strict ancestors of `id`, nearest first, excluding the root.
    pub fn ancestors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut cur = self.nodes.get(&id).and_then(|n| n.parent);
        while let Some(p) = cur {
            if p.is_root() {
                break;
            }
            out.push(p);
            cur = self.nodes[&p].parent;
        }
        out
    }

    /// Checks every structural invariant and returns a description of each
    /// violation. An empty list means the tree is well formed.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let root = self.root();
        if root.depth != 0 || root.parent.is_some() || root.area != self.width * self.height {
            problems.push("root must have depth 0, no parent and the full grid".to_string());
        }
        let mut child_total = 0;
        for node in self.nodes.values() {
            child_total += node.children.len();
            if node.region.dims() != self.dims() {
                problems.push(format!("node {} has mismatched dimensions", node.id));
                continue;
            }
            if node.area != node.region.area() {
                problems.push(format!("node {} area is stale", node.id));
            }
            for &c in &node.children {
                match self.nodes.get(&c) {
                    Some(child) if child.parent == Some(node.id) => {}
                    _ => problems.push(format!("node {} lists bad child {c}", node.id)),
                }
            }
            let Some(p) = node.parent else { continue };
            let Some(parent) = self.nodes.get(&p) else {
                problems.push(format!("node {} has unknown parent {p}", node.id));
                continue;
            };
            if node.depth != parent.depth + 1 {
                problems.push(format!("node {} depth is not parent depth + 1", node.id));
            }
            if !node.region.is_subset(&parent.region).unwrap_or(false) {
                problems.push(format!(
                    "node {} region is not contained in parent {p}",
                    node.id
                ));
            }
            if node.region.is_empty() {
                problems.push(format!("node {} has an empty region", node.id));
            }
        }
        if child_total != self.nodes.len() - 1 {
            problems.push("child counts do not sum to node count - 1".to_string());
        }
        problems
    }
}
