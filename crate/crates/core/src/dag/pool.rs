use std::collections::VecDeque;

use super::block::{Block, BlockId, RemovalCause};
use super::store::DagStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Hidden,
    /// Index into `TipPool::visible`.
    Visible(u32),
    Removed,
}

/// A block leaving the visible pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Removal {
    pub id: BlockId,
    pub at: f64,
    pub cause: RemovalCause,
}

/// Global tip pool with delayed visibility.
///
/// `visible` holds the blocks issuers may select; at time `t` it equals the
/// tip set as of `t - h`. Blocks wait in `hidden` for `h` after issuance. A
/// tip leaves `visible` once a referencing block becomes visible, or after
/// the expiration window runs out.
///
/// Three FIFO queues drive the state. All of them are time-ordered by
/// construction because visibility lags issuance by a constant, so no heap
/// is needed. At equal timestamps, referenced-removals apply before
/// expirations, which apply before visibility promotions.
///
/// Besides the node-view occupancy (`visible + hidden`) the pool tracks the
/// number of live tips: blocks not yet referenced by any issued block and
/// not expired. That is the tip count `L(t)` of the stochastic model.
#[derive(Debug, Clone)]
pub struct TipPool {
    now: f64,
    delay: f64,
    expiry: Option<f64>,
    visible: Vec<BlockId>,
    slots: Vec<Slot>,
    removal_scheduled: Vec<bool>,
    hidden: VecDeque<(f64, BlockId)>,
    referenced: VecDeque<(f64, BlockId)>,
    expirations: VecDeque<(f64, BlockId)>,
    live_tips: usize,
    removed_referenced: usize,
    removed_expired: usize,
}

impl TipPool {
    /// A pool whose only tip is genesis, visible from `t = 0`.
    pub fn new(delay: f64, expiry: Option<f64>) -> Self {
        let mut pool = TipPool {
            now: 0.0,
            delay,
            expiry,
            visible: vec![BlockId::GENESIS],
            slots: vec![Slot::Visible(0)],
            removal_scheduled: vec![false],
            hidden: VecDeque::new(),
            referenced: VecDeque::new(),
            expirations: VecDeque::new(),
            live_tips: 1,
            removed_referenced: 0,
            removed_expired: 0,
        };
        if let Some(window) = expiry {
            pool.expirations.push_back((window, BlockId::GENESIS));
        }
        pool
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn expiry(&self) -> Option<f64> {
        self.expiry
    }

    pub fn visible(&self) -> &[BlockId] {
        &self.visible
    }

    pub fn hidden(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.hidden.iter().map(|&(_, id)| id)
    }

    pub fn hidden_len(&self) -> usize {
        self.hidden.len()
    }

    /// `|visible| + |hidden|`: everything a node still treats as a tip.
    pub fn occupancy(&self) -> usize {
        self.visible.len() + self.hidden.len()
    }

    /// Blocks neither referenced by an issued block nor expired.
    pub fn tip_count(&self) -> usize {
        self.live_tips
    }

    pub fn removed_referenced(&self) -> usize {
        self.removed_referenced
    }

    pub fn removed_expired(&self) -> usize {
        self.removed_expired
    }

    pub fn is_visible(&self, id: BlockId) -> bool {
        matches!(self.slots.get(id.index()), Some(Slot::Visible(_)))
    }

    pub fn is_hidden(&self, id: BlockId) -> bool {
        matches!(self.slots.get(id.index()), Some(Slot::Hidden))
    }

    pub fn is_removed(&self, id: BlockId) -> bool {
        matches!(self.slots.get(id.index()), Some(Slot::Removed))
    }

    /// Current tips from the node view (visible and hidden).
    pub fn current_tips(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.visible.iter().copied().chain(self.hidden())
    }

    /// Applies every visibility, removal and expiration event up to `to`
    /// and returns the removals in time order.
    pub fn advance_time(&mut self, store: &mut DagStore, to: f64) -> Result<Vec<Removal>> {
        if to < self.now {
            return Err(Error::TimeReversal { now: self.now, to });
        }
        let mut removed = Vec::new();
        loop {
            let next_ref = self.referenced.front().map(|e| e.0);
            let next_exp = self.expirations.front().map(|e| e.0);
            let next_vis = self.hidden.front().map(|e| e.0);
            let next = [next_ref, next_exp, next_vis]
                .into_iter()
                .flatten()
                .fold(f64::INFINITY, f64::min);
            if next > to {
                break;
            }
            if next_ref == Some(next) {
                let (at, id) = self.referenced.pop_front().unwrap();
                if self.is_visible(id) {
                    self.remove(store, id, at, RemovalCause::Referenced);
                    removed.push(Removal {
                        id,
                        at,
                        cause: RemovalCause::Referenced,
                    });
                }
            } else if next_exp == Some(next) {
                let (at, id) = self.expirations.pop_front().unwrap();
                if !self.is_visible(id) {
                    continue;
                }
                // Genesis may not expire while it is the only selectable block.
                if id == BlockId::GENESIS && self.visible.len() == 1 {
                    let window = self.expiry.expect("expiration event without window");
                    self.expirations.push_back((at + window, id));
                    continue;
                }
                if store.get(id).is_some_and(|b| b.approved_at.is_none()) {
                    self.live_tips -= 1;
                }
                self.remove(store, id, at, RemovalCause::Expired);
                removed.push(Removal {
                    id,
                    at,
                    cause: RemovalCause::Expired,
                });
            } else {
                let (at, id) = self.hidden.pop_front().unwrap();
                self.slots[id.index()] = Slot::Visible(self.visible.len() as u32);
                self.visible.push(id);
                if let Some(window) = self.expiry {
                    self.expirations.push_back((at + window, id));
                }
            }
        }
        self.now = to;
        Ok(removed)
    }

    fn remove(&mut self, store: &mut DagStore, id: BlockId, at: f64, cause: RemovalCause) {
        let Slot::Visible(pos) = self.slots[id.index()] else {
            unreachable!("removing a block that is not visible");
        };
        let pos = pos as usize;
        self.visible.swap_remove(pos);
        if let Some(&moved) = self.visible.get(pos) {
            self.slots[moved.index()] = Slot::Visible(pos as u32);
        }
        self.slots[id.index()] = Slot::Removed;
        match cause {
            RemovalCause::Referenced => self.removed_referenced += 1,
            RemovalCause::Expired => self.removed_expired += 1,
        }
        let block = store.block_mut(id);
        block.removed_at = Some(at);
        block.removal_cause = Some(cause);
    }
}

/// Appends `block` to the store and enqueues it as a hidden tip.
///
/// Every distinct parent that is still in the pool and has no removal
/// pending gets a `Referenced` removal at `block.visible_at`; a tip
/// referenced twice is removed once, at the earlier time.
pub fn insert_block(store: &mut DagStore, pool: &mut TipPool, block: Block) -> Result<()> {
    let expected = store.next_id();
    if block.id != expected {
        return Err(Error::OutOfSequence {
            expected,
            got: block.id,
        });
    }
    if block.issued_at < pool.now {
        return Err(Error::TimeReversal {
            now: pool.now,
            to: block.issued_at,
        });
    }
    if let Some(&parent) = block.parents.iter().find(|p| **p >= block.id) {
        return Err(Error::UnknownParent {
            block: block.id,
            parent,
        });
    }

    let id = block.id;
    let issued_at = block.issued_at;
    let visible_at = block.visible_at;
    let parents = block.parents.clone();
    store.push(block)?;

    for p in parents {
        let slot = pool.slots[p.index()];
        let parent = store.block_mut(p);
        if parent.approved_at.is_none() {
            parent.approved_at = Some(issued_at);
            if slot != Slot::Removed {
                pool.live_tips -= 1;
            }
        }
        if slot != Slot::Removed && !pool.removal_scheduled[p.index()] {
            pool.removal_scheduled[p.index()] = true;
            pool.referenced.push_back((visible_at, p));
        }
    }

    pool.slots.push(Slot::Hidden);
    pool.removal_scheduled.push(false);
    pool.hidden.push_back((visible_at, id));
    pool.live_tips += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::Issuer;

    fn setup(expiry: Option<f64>) -> (DagStore, TipPool) {
        (DagStore::new(), TipPool::new(1.0, expiry))
    }

    fn issue(store: &mut DagStore, pool: &mut TipPool, t: f64, parents: &[u32]) -> BlockId {
        pool.advance_time(store, t).unwrap();
        let id = store.next_id();
        let block = Block::new(id, t, 1.0, parents.iter().map(|&p| BlockId(p)), Issuer::Honest);
        insert_block(store, pool, block).unwrap();
        id
    }

    #[test]
    fn first_insertion_is_hidden_until_delay() {
        let (mut s, mut p) = setup(None);
        let b = issue(&mut s, &mut p, 0.0, &[0]);
        assert!(p.is_hidden(b));
        assert_eq!(p.hidden_len(), 1);
        let removed = p.advance_time(&mut s, 0.999).unwrap();
        assert!(removed.is_empty());
        assert!(p.is_hidden(b));
        let removed = p.advance_time(&mut s, 1.0).unwrap();
        assert!(p.is_visible(b));
        assert_eq!(
            removed,
            vec![Removal {
                id: BlockId::GENESIS,
                at: 1.0,
                cause: RemovalCause::Referenced
            }]
        );
    }

    #[test]
    fn referenced_tip_leaves_when_referrer_visible() {
        let (mut s, mut p) = setup(None);
        let a = issue(&mut s, &mut p, 0.5, &[0]);
        p.advance_time(&mut s, 2.0).unwrap();
        assert!(p.is_visible(a));
        let b = issue(&mut s, &mut p, 2.0, &[a.0]);
        p.advance_time(&mut s, 2.9).unwrap();
        assert!(p.is_visible(a));
        let removed = p.advance_time(&mut s, 3.5).unwrap();
        assert_eq!(removed.len(), 1);
        assert_eq!(removed[0].id, a);
        assert_eq!(removed[0].cause, RemovalCause::Referenced);
        assert!(p.is_visible(b));
        let blk = s.get(a).unwrap();
        assert_eq!(blk.removed_at, Some(3.0));
        assert_eq!(blk.approved_at, Some(2.0));
    }

    #[test]
    fn double_reference_removes_once_at_earlier_time() {
        let (mut s, mut p) = setup(None);
        let a = issue(&mut s, &mut p, 0.0, &[0]);
        p.advance_time(&mut s, 1.5).unwrap();
        issue(&mut s, &mut p, 1.5, &[a.0]);
        issue(&mut s, &mut p, 1.7, &[a.0]);
        let removed = p.advance_time(&mut s, 10.0).unwrap();
        let of_a: Vec<_> = removed.iter().filter(|r| r.id == a).collect();
        assert_eq!(of_a.len(), 1);
        assert_eq!(of_a[0].at, 2.5);
        assert_eq!(p.removed_referenced(), 2); // genesis and a
    }

    #[test]
    fn unreferenced_tip_expires() {
        let (mut s, mut p) = setup(Some(100.0));
        let a = issue(&mut s, &mut p, 0.0, &[0]);
        // a becomes visible at 1.0 and expires at 101.0
        let removed = p.advance_time(&mut s, 100.5).unwrap();
        assert!(removed.iter().all(|r| r.id != a));
        let removed = p.advance_time(&mut s, 101.0).unwrap();
        assert_eq!(
            removed,
            vec![Removal {
                id: a,
                at: 101.0,
                cause: RemovalCause::Expired
            }]
        );
        assert!(s.get(a).unwrap().expired());
        assert_eq!(p.tip_count(), 0);
    }

    #[test]
    fn advancing_to_now_is_noop() {
        let (mut s, mut p) = setup(Some(5.0));
        issue(&mut s, &mut p, 0.3, &[0]);
        let before = (p.visible().to_vec(), p.hidden_len(), p.tip_count());
        assert!(p.advance_time(&mut s, 0.3).unwrap().is_empty());
        assert_eq!(before, (p.visible().to_vec(), p.hidden_len(), p.tip_count()));
        assert!(p.advance_time(&mut s, 0.1).is_err());
    }

    #[test]
    fn first_cause_wins() {
        let (mut s, mut p) = setup(Some(10.0));
        let a = issue(&mut s, &mut p, 0.0, &[0]);
        p.advance_time(&mut s, 3.0).unwrap();
        issue(&mut s, &mut p, 3.0, &[a.0]);
        p.advance_time(&mut s, 50.0).unwrap();
        assert_eq!(s.get(a).unwrap().removal_cause, Some(RemovalCause::Referenced));
        assert_eq!(s.get(a).unwrap().removed_at, Some(4.0));
    }

    #[test]
    fn referenced_exactly_at_expiry_counts_referenced() {
        // a visible at 1, expires at 11; child issued at 10 is visible at 11.
        let (mut s, mut p) = setup(Some(10.0));
        let a = issue(&mut s, &mut p, 0.0, &[0]);
        p.advance_time(&mut s, 10.0).unwrap();
        issue(&mut s, &mut p, 10.0, &[a.0]);
        p.advance_time(&mut s, 11.0).unwrap();
        assert_eq!(s.get(a).unwrap().removal_cause, Some(RemovalCause::Referenced));
    }

    #[test]
    fn genesis_survives_while_alone() {
        let (mut s, mut p) = setup(Some(10.0));
        p.advance_time(&mut s, 35.0).unwrap();
        assert!(p.is_visible(BlockId::GENESIS));
        let a = issue(&mut s, &mut p, 35.0, &[0]);
        p.advance_time(&mut s, 36.0).unwrap();
        assert!(p.is_visible(a));
        assert!(p.is_removed(BlockId::GENESIS));
    }

    #[test]
    fn live_tips_drop_on_issuance_of_referrer() {
        let (mut s, mut p) = setup(None);
        let a = issue(&mut s, &mut p, 0.0, &[0]);
        assert_eq!(p.tip_count(), 1);
        p.advance_time(&mut s, 2.0).unwrap();
        issue(&mut s, &mut p, 2.0, &[a.0]);
        // a is still visible (a false tip) but no longer counts as a tip.
        assert!(p.is_visible(a));
        assert_eq!(p.tip_count(), 1);
        assert_eq!(p.occupancy(), 2);
    }

    #[test]
    fn insert_rejects_unknown_parent() {
        let (mut s, mut p) = setup(None);
        let block = Block::new(BlockId(1), 0.0, 1.0, [BlockId(7)], Issuer::Honest);
        assert!(matches!(
            insert_block(&mut s, &mut p, block),
            Err(Error::UnknownParent { .. })
        ));
    }
}
