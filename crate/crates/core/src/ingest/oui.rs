use alloc::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::mac::{parse_octets, MacAddress};

/// Set of known vendor prefixes (OUIs).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OuiTable {
    prefixes: BTreeSet<[u8; 3]>,
}

impl OuiTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses one `XX:XX:XX` prefix per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = OuiTable::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let prefix = parse_octets::<3>(line).ok_or_else(|| {
                Error::config(alloc::format!("OUI table line {}: invalid prefix {line:?}", lineno + 1))
            })?;
            table.prefixes.insert(prefix);
        }
        Ok(table)
    }

    pub fn insert(&mut self, prefix: [u8; 3]) {
        self.prefixes.insert(prefix);
    }

    pub fn contains(&self, prefix: [u8; 3]) -> bool {
        self.prefixes.contains(&prefix)
    }

    pub fn len(&self) -> usize {
        self.prefixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefixes.is_empty()
    }
}

impl FromIterator<[u8; 3]> for OuiTable {
    fn from_iter<I: IntoIterator<Item = [u8; 3]>>(iter: I) -> Self {
        OuiTable { prefixes: iter.into_iter().collect() }
    }
}

/// True iff the U/L bit is set or the prefix is not a known vendor OUI.
/// An empty table disables the prefix check.
pub fn is_randomized_mac(mac: MacAddress, oui_table: &OuiTable) -> bool {
    if mac.is_locally_administered() {
        return true;
    }
    if oui_table.is_empty() {
        return false;
    }
    !oui_table.contains(mac.prefix())
}
