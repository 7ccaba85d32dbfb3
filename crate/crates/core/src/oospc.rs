//! Optical orthogonal signature pattern codes.
//!
//! A packing over `Z_u x Z_v` maps to a set of `u x v` binary matrices (one
//! codeword per block, ones at the block's elements). The correlation
//! verifier here is deliberately independent of the difference-counting
//! verifier: it evaluates the periodic shift-overlap sums directly, so the
//! two implementations cross-validate each other.

use serde::{Deserialize, Serialize};

use crate::abelian::Group;
use crate::error::{Error, Result};
use crate::packing::{verify_dp, CertKind, Certificate, Failure, Packing};

/// One binary signature pattern.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Codeword {
    rows: u32,
    cols: u32,
    bits: Vec<bool>,
}

impl Codeword {
    pub fn zero(rows: u32, cols: u32) -> Self {
        Codeword {
            rows,
            cols,
            bits: vec![false; rows as usize * cols as usize],
        }
    }

    pub fn get(&self, i: u32, j: u32) -> bool {
        self.bits[(i * self.cols + j) as usize]
    }

    pub fn set(&mut self, i: u32, j: u32, value: bool) {
        self.bits[(i * self.cols + j) as usize] = value;
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }
}

/// A set of equally sized patterns with balanced weights 4 and 5.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternSet {
    pub rows: u32,
    pub cols: u32,
    pub codewords: Vec<Codeword>,
}

impl PatternSet {
    pub fn weights(&self) -> Vec<usize> {
        self.codewords.iter().map(|c| c.weight()).collect()
    }
}

/// One codeword per block: ones exactly at the block's elements.
/// The packing must verify as a difference packing first.
pub fn to_patterns(p: &Packing) -> Result<PatternSet> {
    if p.group.arity() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            got: p.group.arity(),
        });
    }
    let cert = verify_dp(p)?;
    if !cert.ok {
        return Err(Error::UncertifiedInput(format!("{:?}", cert.failure)));
    }
    let (rows, cols) = (p.group.moduli()[0], p.group.moduli()[1]);
    let codewords = p
        .blocks
        .iter()
        .map(|b| {
            let mut cw = Codeword::zero(rows, cols);
            for e in b.elements() {
                cw.set(e.coords()[0], e.coords()[1], true);
            }
            cw
        })
        .collect();
    Ok(PatternSet {
        rows,
        cols,
        codewords,
    })
}

/// Periodic 2-D correlation at one shift:
/// `sum_{i,j} x[i][j] * y[(i+t1) mod rows][(j+t2) mod cols]`.
pub fn correlation(x: &Codeword, y: &Codeword, shift: (u32, u32)) -> Result<u32> {
    if x.rows != y.rows || x.cols != y.cols {
        return Err(Error::DimMismatch {
            a: format!("{}x{}", x.rows, x.cols),
            b: format!("{}x{}", y.rows, y.cols),
        });
    }
    let mut acc = 0u32;
    for i in 0..x.rows {
        for j in 0..x.cols {
            if x.get(i, j) && y.get((i + shift.0) % x.rows, (j + shift.1) % x.cols) {
                acc += 1;
            }
        }
    }
    Ok(acc)
}

/// Checks the pattern-code correlation bounds: every autocorrelation at a
/// nonzero shift at most 1, every cross-correlation at most 1 at all
/// shifts, all weights in `{4, 5}` and balanced. Reports the code size
/// against the bound `2 * floor((uv - |I|) / 32)`.
pub fn verify_oospc(ps: &PatternSet) -> Result<Certificate> {
    let group = Group::product2(ps.rows, ps.cols);
    let mut by_size = std::collections::BTreeMap::new();
    let mut cert = Certificate {
        kind: CertKind::Oospc,
        group: group.moduli().to_vec(),
        ok: true,
        blocks_by_size: Default::default(),
        balanced: false,
        total_differences: 0,
        max_multiplicity: 0,
        leave_size: 0,
        leave: Vec::new(),
        bound: Some(2 * ((group.order() - group.involution_count()) / 32)),
        failure: None,
        derivation: None,
    };
    for (idx, cw) in ps.codewords.iter().enumerate() {
        let w = cw.weight();
        if w != 4 && w != 5 {
            cert.ok = false;
            cert.failure = Some(Failure::BadWeight {
                codeword: idx,
                weight: w,
            });
            return Ok(cert);
        }
        *by_size.entry(w).or_insert(0usize) += 1;
    }
    cert.balanced = by_size.get(&4).copied().unwrap_or(0) == by_size.get(&5).copied().unwrap_or(0);
    cert.blocks_by_size = by_size;

    for (idx, cw) in ps.codewords.iter().enumerate() {
        for t1 in 0..ps.rows {
            for t2 in 0..ps.cols {
                if (t1, t2) == (0, 0) {
                    continue;
                }
                let c = correlation(cw, cw, (t1, t2))?;
                cert.max_multiplicity = cert.max_multiplicity.max(c);
                if c > 1 {
                    cert.ok = false;
                    cert.failure = Some(Failure::AutoCorrelation {
                        codeword: idx,
                        shift: (t1, t2),
                        value: c,
                    });
                    return Ok(cert);
                }
            }
        }
    }
    for a in 0..ps.codewords.len() {
        for b in (a + 1)..ps.codewords.len() {
            for t1 in 0..ps.rows {
                for t2 in 0..ps.cols {
                    let c = correlation(&ps.codewords[a], &ps.codewords[b], (t1, t2))?;
                    cert.max_multiplicity = cert.max_multiplicity.max(c);
                    if c > 1 {
                        cert.ok = false;
                        cert.failure = Some(Failure::CrossCorrelation {
                            a,
                            b,
                            shift: (t1, t2),
                            value: c,
                        });
                        return Ok(cert);
                    }
                }
            }
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::packing::Block;

    #[test]
    fn block_to_pattern() {
        let g = Group::product2(2, 4);
        let b = Block::new(&g, vec![g.elem(&[0, 0]).unwrap(), g.elem(&[0, 1]).unwrap()]).unwrap();
        let p = Packing::new(g, vec![2], vec![b]).unwrap();
        let ps = to_patterns(&p).unwrap();
        assert_eq!(ps.codewords.len(), 1);
        let cw = &ps.codewords[0];
        assert!(cw.get(0, 0) && cw.get(0, 1));
        assert_eq!(cw.weight(), 2);
    }

    #[test]
    fn empty_packing_gives_empty_code() {
        let p = Packing::empty(&Group::product2(4, 8), vec![4, 5]);
        let ps = to_patterns(&p).unwrap();
        assert!(ps.codewords.is_empty());
    }

    #[test]
    fn rejects_uncertified_input() {
        let g = Group::product2(4, 8);
        let b = Block::new(&g, vec![g.elem(&[0, 0]).unwrap(), g.elem(&[0, 1]).unwrap()]).unwrap();
        let p = Packing::new(g, vec![2], vec![b.clone(), b]).unwrap();
        assert!(matches!(to_patterns(&p), Err(Error::UncertifiedInput(_))));
    }

    #[test]
    fn correlation_values() {
        let mut x = Codeword::zero(2, 4);
        x.set(0, 0, true);
        x.set(0, 1, true);
        assert_eq!(correlation(&x, &x, (0, 0)).unwrap(), 2);
        assert_eq!(correlation(&x, &x, (0, 1)).unwrap(), 1);
        let mut y = Codeword::zero(2, 4);
        y.set(1, 2, true);
        assert_eq!(correlation(&x, &y, (0, 0)).unwrap(), 0);
        let z = Codeword::zero(3, 3);
        assert!(correlation(&x, &z, (0, 0)).is_err());
    }

    #[test]
    fn embedded_optimal_code_checks_out() {
        let ps = to_patterns(&catalog::optimal_4x24()).unwrap();
        assert_eq!(ps.codewords.len(), 4);
        let cert = verify_oospc(&ps).unwrap();
        assert!(cert.ok, "{:?}", cert.failure);
        assert!(cert.balanced);
        assert_eq!(cert.bound, Some(4));
    }

    #[test]
    fn duplicate_codeword_fails_cross_correlation() {
        let ps = to_patterns(&catalog::optimal_4x24()).unwrap();
        let mut doubled = ps.clone();
        doubled.codewords.push(ps.codewords[0].clone());
        let cert = verify_oospc(&doubled).unwrap();
        assert!(!cert.ok);
        assert!(matches!(cert.failure, Some(Failure::CrossCorrelation { .. })));
    }
}
