use std::fmt;

/// Index of a block in issuance order. Genesis is always `BlockId(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u32);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Issuer {
    Genesis,
    Honest,
    Adversary,
}

impl Issuer {
    pub fn as_str(self) -> &'static str {
        match self {
            Issuer::Genesis => "genesis",
            Issuer::Honest => "honest",
            Issuer::Adversary => "adversary",
        }
    }
}

/// Why a block left the tip pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RemovalCause {
    /// A block referencing it became visible.
    Referenced,
    /// No referencing block became visible within the expiration window.
    Expired,
}

impl RemovalCause {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalCause::Referenced => "referenced",
            RemovalCause::Expired => "expired",
        }
    }
}

/// One mark of the block-issuance process together with its lifecycle in
/// the tip pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: BlockId,
    pub issued_at: f64,
    pub visible_at: f64,
    /// Distinct parents in ascending id order. The raw selection may contain
    /// duplicates; only the deduplicated set forms DAG edges.
    pub parents: Vec<BlockId>,
    pub issuer: Issuer,
    /// Issuance time of the first block that referenced this one.
    pub approved_at: Option<f64>,
    pub removed_at: Option<f64>,
    pub removal_cause: Option<RemovalCause>,
}

impl Block {
    pub fn genesis() -> Self {
        Block {
            id: BlockId::GENESIS,
            issued_at: 0.0,
            visible_at: 0.0,
            parents: Vec::new(),
            issuer: Issuer::Genesis,
            approved_at: None,
            removed_at: None,
            removal_cause: None,
        }
    }

    pub fn new(
        id: BlockId,
        issued_at: f64,
        delay: f64,
        selection: impl IntoIterator<Item = BlockId>,
        issuer: Issuer,
    ) -> Self {
        let mut parents: Vec<BlockId> = selection.into_iter().collect();
        parents.sort_unstable();
        parents.dedup();
        Block {
            id,
            issued_at,
            visible_at: issued_at + delay,
            parents,
            issuer,
            approved_at: None,
            removed_at: None,
            removal_cause: None,
        }
    }

    pub fn is_honest(&self) -> bool {
        self.issuer == Issuer::Honest
    }

    pub fn expired(&self) -> bool {
        self.removal_cause == Some(RemovalCause::Expired)
    }

    /// Time spent in the tip set: from issuance until the first referencing
    /// block was issued, or until expiry, whichever came first. `None` while
    /// the block is still an unapproved tip.
    pub fn tip_time(&self) -> Option<f64> {
        let expired_at = self.removed_at.filter(|_| self.expired());
        let end = match (self.approved_at, expired_at) {
            (Some(a), Some(e)) => a.min(e),
            (Some(a), None) => a,
            (None, Some(e)) => e,
            (None, None) => return None,
        };
        Some(end - self.issued_at)
    }
}
