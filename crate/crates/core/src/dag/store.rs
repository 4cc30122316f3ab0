use std::collections::BTreeSet;

use super::block::{Block, BlockId};
use crate::error::{Error, Result};

/// Append-only store of every block issued in a run.
#[derive(Debug, Clone)]
pub struct DagStore {
    blocks: Vec<Block>,
    children: Vec<Vec<BlockId>>,
}

impl Default for DagStore {
    fn default() -> Self {
        Self::new()
    }
}

impl DagStore {
    /// A store holding only genesis.
    pub fn new() -> Self {
        DagStore {
            blocks: vec![Block::genesis()],
            children: vec![Vec::new()],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn next_id(&self) -> BlockId {
        BlockId(self.blocks.len() as u32)
    }

    pub fn get(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(id.index())
    }

    pub(crate) fn block_mut(&mut self, id: BlockId) -> &mut Block {
        &mut self.blocks[id.index()]
    }

    pub fn contains(&self, id: BlockId) -> bool {
        id.index() < self.blocks.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn last(&self) -> &Block {
        self.blocks.last().expect("store always holds genesis")
    }

    pub fn children(&self, id: BlockId) -> &[BlockId] {
        &self.children[id.index()]
    }

    /// Appends a block after checking id sequence and parent existence.
    pub(crate) fn push(&mut self, block: Block) -> Result<()> {
        let expected = self.next_id();
        if block.id != expected {
            return Err(Error::OutOfSequence {
                expected,
                got: block.id,
            });
        }
        if let Some(&parent) = block.parents.iter().find(|p| **p >= block.id) {
            return Err(Error::UnknownParent {
                block: block.id,
                parent,
            });
        }
        for p in &block.parents {
            self.children[p.index()].push(block.id);
        }
        self.children.push(Vec::new());
        self.blocks.push(block);
        Ok(())
    }

    /// Marks every block reachable from `roots` through parent edges,
    /// including the roots themselves.
    pub fn ancestor_mask(&self, roots: impl IntoIterator<Item = BlockId>) -> Vec<bool> {
        let mut seen = vec![false; self.blocks.len()];
        let mut stack: Vec<BlockId> = Vec::new();
        for r in roots {
            if self.contains(r) && !seen[r.index()] {
                seen[r.index()] = true;
                stack.push(r);
            }
        }
        while let Some(id) = stack.pop() {
            for &p in &self.blocks[id.index()].parents {
                if !seen[p.index()] {
                    seen[p.index()] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }

    /// Union of the past cones of `roots`, roots included.
    pub fn ancestors_of(&self, roots: impl IntoIterator<Item = BlockId>) -> BTreeSet<BlockId> {
        self.ancestor_mask(roots)
            .into_iter()
            .enumerate()
            .filter_map(|(i, hit)| hit.then_some(BlockId(i as u32)))
            .collect()
    }
}
