//! Parent selection: honest uniform sampling from the visible pool, and the
//! tip-inflation adversary that never approves tips.

use rand::Rng;

use crate::dag::{BlockId, DagStore, Removal, RemovalCause};
use crate::error::{Error, Result};

/// References per block and the honest share of the issuance rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    k: usize,
    mu: f64,
}

impl SelectionParams {
    pub fn new(k: usize, mu: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::Config("k must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::Config(format!("mu must be in [0, 1], got {mu}")));
        }
        Ok(SelectionParams { k, mu })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// `k` independent uniform draws, with replacement, from the visible pool.
pub fn select_honest<R: Rng + ?Sized>(
    visible: &[BlockId],
    k: usize,
    rng: &mut R,
) -> Result<Vec<BlockId>> {
    if visible.is_empty() {
        return Err(Error::EmptyTipPool);
    }
    Ok((0..k)
        .map(|_| visible[rng.gen_range(0..visible.len())])
        .collect())
}

/// Fallback when the visible pool is empty: the `k` most recently issued
/// blocks, tip or not.
pub fn select_recent(store: &DagStore, k: usize) -> Vec<BlockId> {
    let newest = store.len() as u32;
    (newest.saturating_sub(k as u32)..newest)
        .rev()
        .map(BlockId)
        .collect()
}

/// Private bookkeeping of the tip-inflation adversary.
///
/// The adversary attaches to its anchor: the newest block that has already
/// left the pool as `Referenced`. Such a block is no longer a tip, so an
/// adversary block adds one tip and removes none.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryState {
    last_own_block: Option<BlockId>,
    anchor: BlockId,
}

impl Default for AdversaryState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversaryChoice {
    pub parents: Vec<BlockId>,
    /// The anchor had aged past the parent-age bound and the adversary fell
    /// back to its own latest block, which costs one of its tips.
    pub reanchored: bool,
}

impl AdversaryState {
    pub fn new() -> Self {
        AdversaryState {
            last_own_block: None,
            anchor: BlockId::GENESIS,
        }
    }

    pub fn last_own_block(&self) -> Option<BlockId> {
        self.last_own_block
    }

    pub fn anchor(&self) -> BlockId {
        self.anchor
    }

    pub fn observe_removal(&mut self, removal: &Removal) {
        if removal.cause == RemovalCause::Referenced && removal.id > self.anchor {
            self.anchor = removal.id;
        }
    }

    pub fn record_issued(&mut self, id: BlockId) {
        self.last_own_block = Some(id);
    }
}

/// Parents for an adversary block issued at `now`: `k` copies of the
/// anchor. If `max_parent_age` is set and the anchor is older than that, the
/// adversary's own latest block is used instead.
pub fn select_adversary(
    state: &AdversaryState,
    store: &DagStore,
    k: usize,
    now: f64,
    max_parent_age: Option<f64>,
) -> AdversaryChoice {
    let anchor_age = store
        .get(state.anchor)
        .map(|b| now - b.issued_at)
        .unwrap_or(0.0);
    let stale = max_parent_age.is_some_and(|limit| anchor_age > limit);
    let (parent, reanchored) = match (stale, state.last_own_block) {
        (true, Some(own)) => (own, true),
        _ => (state.anchor, false),
    };
    AdversaryChoice {
        parents: vec![parent; k],
        reanchored,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_pcg::Pcg64;

    #[test]
    fn params_validate() {
        assert!(SelectionParams::new(0, 0.5).is_err());
        assert!(SelectionParams::new(2, 1.5).is_err());
        assert!(SelectionParams::new(2, -0.1).is_err());
        let p = SelectionParams::new(3, 0.25).unwrap();
        assert_eq!((p.k(), p.mu()), (3, 0.25));
    }

    #[test]
    fn singleton_pool() {
        let mut rng = Pcg64::seed_from_u64(1);
        let a = BlockId(4);
        assert_eq!(select_honest(&[a], 2, &mut rng).unwrap(), vec![a, a]);
    }

    #[test]
    fn empty_pool_signals() {
        let mut rng = Pcg64::seed_from_u64(1);
        assert_eq!(select_honest(&[], 2, &mut rng), Err(Error::EmptyTipPool));
    }

    #[test]
    fn two_tips_distinct_half_the_time() {
        let mut rng = Pcg64::seed_from_u64(42);
        let pool = [BlockId(1), BlockId(2)];
        let trials = 100_000;
        let distinct = (0..trials)
            .filter(|_| {
                let s = select_honest(&pool, 2, &mut rng).unwrap();
                s[0] != s[1]
            })
            .count();
        let p = distinct as f64 / trials as f64;
        assert!((p - 0.5).abs() < 0.01, "{p}");
    }

    #[test]
    fn recent_fallback() {
        let store = DagStore::new();
        assert_eq!(select_recent(&store, 3), vec![BlockId::GENESIS]);
    }

    #[test]
    fn adversary_bootstraps_on_genesis() {
        let store = DagStore::new();
        let state = AdversaryState::new();
        let choice = select_adversary(&state, &store, 3, 0.5, Some(101.0));
        assert_eq!(choice.parents, vec![BlockId::GENESIS; 3]);
        assert!(!choice.reanchored);
    }

    #[test]
    fn adversary_follows_newest_referenced_block() {
        let mut state = AdversaryState::new();
        state.observe_removal(&Removal {
            id: BlockId(7),
            at: 1.0,
            cause: RemovalCause::Referenced,
        });
        state.observe_removal(&Removal {
            id: BlockId(9),
            at: 1.0,
            cause: RemovalCause::Expired,
        });
        state.observe_removal(&Removal {
            id: BlockId(3),
            at: 1.0,
            cause: RemovalCause::Referenced,
        });
        assert_eq!(state.anchor(), BlockId(7));
    }
}
