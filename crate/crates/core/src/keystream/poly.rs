//! Tables of primitive feedback polynomials and the keyed choice among them.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{config, domain, Result};
use crate::gf2::BitVector;
use crate::keystream::lfsr::{Lfsr, LfsrSpec};

const BUILTIN: &str = include_str!("../../data/primitive_polys.txt");

/// Degree to list of feedback masks. Line format: `degree hex_mask`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PolynomialTable {
    entries: BTreeMap<usize, Vec<BitVector>>,
}

impl PolynomialTable {
    /// The bundled table (degrees 2..=24 and 31).
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled polynomial table parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<usize, Vec<BitVector>> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(d), Some(m), None) = (parts.next(), parts.next(), parts.next()) else {
                return config(format!("line {}: expected `degree hex_mask`", lineno + 1));
            };
            let degree: usize = d
                .parse()
                .map_err(|_| crate::Error::Config(format!("line {}: bad degree {d:?}", lineno + 1)))?;
            if degree == 0 {
                return config(format!("line {}: degree must be positive", lineno + 1));
            }
            let mask = BitVector::from_hex(degree, m)
                .map_err(|e| crate::Error::Config(format!("line {}: {e}", lineno + 1)))?;
            if mask.is_zero() {
                return config(format!("line {}: zero mask", lineno + 1));
            }
            entries.entry(degree).or_default().push(mask);
        }
        Ok(PolynomialTable { entries })
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn entries(&self, degree: usize) -> &[BitVector] {
        self.entries.get(&degree).map_or(&[], |v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BitVector)> {
        self.entries.iter().flat_map(|(d, v)| v.iter().map(move |m| (*d, m)))
    }

    pub fn to_text(&self) -> String {
        self.iter().map(|(d, m)| format!("{d} {}\n", m.to_hex())).collect()
    }
}

/// Select a feedback mask by reducing the key modulo the number of entries
/// for `degree`. Returns the entry index together with the mask.
pub fn sample_connection_polynomial<'t>(
    key: &BitVector,
    degree: usize,
    table: &'t PolynomialTable,
) -> Result<(usize, &'t BitVector)> {
    let list = table.entries(degree);
    if list.is_empty() {
        return config(format!("polynomial table has no entries for degree {degree}"));
    }
    let idx = key.rem_u64(list.len() as u64) as usize;
    Ok((idx, &list[idx]))
}

/// Exhaustively measure the cycle through seed `1`; primitive iff it is
/// `2^degree - 1`.
pub fn maximal_period(degree: usize, mask: &BitVector) -> Result<bool> {
    if degree > 32 {
        return domain(format!("exhaustive period check limited to degree 32, got {degree}"));
    }
    let spec = LfsrSpec::new(mask.clone(), BitVector::unit(degree, 0))?;
    let full = (1u64 << degree) - 1;
    Ok(Lfsr::cycle_length(&spec, full) == Some(full))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_has_desk_scale_degrees() {
        let t = PolynomialTable::builtin();
        for d in 2..=24 {
            assert!(!t.entries(d).is_empty(), "degree {d}");
        }
        assert_eq!(t.entries(31)[0].as_u64(), Some(0x9));
        assert!(!t.is_empty());
    }

    #[test]
    fn parse_errors() {
        assert!(PolynomialTable::parse("4").is_err());
        assert!(PolynomialTable::parse("4 0x3 extra").is_err());
        assert!(PolynomialTable::parse("x 0x3").is_err());
        assert!(PolynomialTable::parse("4 0x0").is_err());
        assert!(PolynomialTable::parse("4 0x1f").is_err());
        let t = PolynomialTable::parse("# comment\n4 0x3 # x^4+x+1\n\n4 0x9\n").unwrap();
        assert_eq!(t.entries(4).len(), 2);
        assert_eq!(PolynomialTable::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn keyed_selection() {
        let one = PolynomialTable::parse("5 0x5\n").unwrap();
        for k in 0..20 {
            let key = BitVector::from_u64(16, k).unwrap();
            assert_eq!(sample_connection_polynomial(&key, 5, &one).unwrap().1.as_u64(), Some(0x5));
        }
        let three = PolynomialTable::parse("5 0x5\n5 0x9\n5 0xf\n").unwrap();
        let pick = |k: u64| sample_connection_polynomial(&BitVector::from_u64(16, k).unwrap(), 5, &three).unwrap().0;
        assert_eq!(pick(0), 0);
        assert_ne!(pick(1), pick(2));
        assert_eq!(pick(4), pick(1));
        assert!(sample_connection_polynomial(&BitVector::zeros(8), 7, &three).is_err());
    }

    #[test]
    fn small_entries_are_primitive() {
        let t = PolynomialTable::builtin();
        for (d, m) in t.iter().filter(|(d, _)| *d <= 12) {
            assert!(maximal_period(d, m).unwrap(), "degree {d} mask {}", m.to_hex());
        }
        // x^4 + x^3 + x^2 + x + 1 has period 5
        assert!(!maximal_period(4, &BitVector::from_u64(4, 0xf).unwrap()).unwrap());
    }
}
