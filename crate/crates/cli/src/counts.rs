//! Occupancy count files: one `occupancy,count` pair per line.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    /// Number of urns (species) holding each occupancy.
    pub counts: BTreeMap<u64, u64>,
    /// `sum occupancy * count`.
    pub n: u64,
}

pub fn parse_counts_file(path: &Path) -> CliResult<Counts> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_counts(&text, path)
}

/// Blank lines and lines starting with `#` are skipped. Repeated occupancies add up.
pub fn parse_counts(text: &str, path: &Path) -> CliResult<Counts> {
    let fail = |line: usize, reason: String| CliError::CountsParse { path: path.to_path_buf(), line, reason };
    let mut counts = BTreeMap::new();
    let mut n: u64 = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = s.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(fail(line, format!("expected `occupancy,count`, got {s:?}")));
        }
        let mut vals = [0u64; 2];
        for (slot, f) in vals.iter_mut().zip(&fields) {
            if f.starts_with('-') {
                return Err(fail(line, format!("negative value {f:?}")));
            }
            *slot = f.parse().map_err(|_| fail(line, format!("not a nonnegative integer: {f:?}")))?;
        }
        let [occ, cnt] = vals;
        let add = occ.checked_mul(cnt).and_then(|x| n.checked_add(x)).ok_or_else(|| fail(line, "ball total overflows".into()))?;
        n = add;
        *counts.entry(occ).or_insert(0) += cnt;
    }
    Ok(Counts { counts, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> CliResult<Counts> {
        parse_counts(s, Path::new("counts.csv"))
    }

    #[test]
    fn simple_file() {
        let c = parse("1,2\n2,1\n").unwrap();
        assert_eq!(c.counts, BTreeMap::from([(1, 2), (2, 1)]));
        assert_eq!(c.n, 4);
    }

    #[test]
    fn empty_file() {
        let c = parse("").unwrap();
        assert!(c.counts.is_empty());
        assert_eq!(c.n, 0);
    }

    #[test]
    fn malformed_reports_line() {
        match parse("x,1\n") {
            Err(CliError::CountsParse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        match parse("1,2\n\n3,-1\n") {
            Err(CliError::CountsParse { line, reason, .. }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("negative"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("1,2,3\n").is_err());
    }

    #[test]
    fn comments_and_repeats() {
        let c = parse("# species\n1, 3\n1,1\n").unwrap();
        assert_eq!(c.counts, BTreeMap::from([(1, 4)]));
        assert_eq!(c.n, 4);
    }
}
