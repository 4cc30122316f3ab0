use std::io::{self, Write};

use super::store::DagStore;

pub const DUMP_HEADER: &str = "id,issued_at,visible_at,parent_ids,issuer,removed_at,cause";

/// Writes one CSV line per block. Parent ids are `;`-separated; absent
/// removal fields are left empty.
pub fn write_dump<W: Write>(store: &DagStore, mut out: W) -> io::Result<()> {
    writeln!(out, "{DUMP_HEADER}")?;
    for b in store.blocks() {
        let parents = b
            .parents
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let removed_at = b.removed_at.map(|t| t.to_string()).unwrap_or_default();
        let cause = b.removal_cause.map(|c| c.as_str()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            b.id,
            b.issued_at,
            b.visible_at,
            parents,
            b.issuer.as_str(),
            removed_at,
            cause
        )?;
    }
    out.flush()
}
