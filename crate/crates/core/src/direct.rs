//! Direct constructions of regular packings over `Z_4 x Z_8 x Z_p` and
//! `Z_4 x Z_24 x Z_p`.
//!
//! A small family of base blocks is chosen so that its difference list,
//! grouped by the `Z_4 x Z_b` projection, leaves exactly the right square
//! structure in the `Z_p` coordinate of every fiber; multiplying the blocks
//! through `C_0^2` (or a `{1,-1}` transversal of it, or all of
//! `Z_p \ {0}`) then covers each fiber exactly once. The square-class
//! preconditions are asserted at construction time and the assembled family
//! is certified downstream, so nothing rests on the parameter tables being
//! transcribed correctly.

use std::collections::BTreeMap;

use crate::abelian::{Elem, Group, Relabeling};
use crate::catalog::{self, DirectFamily, ZpSym};
use crate::error::{Error, Result};
use crate::packing::{Block, Packing};
use crate::residues::ResidueTables;

/// Which multipliers a base block is pushed through.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MultiplierSet {
    /// The squares `C_0^2`.
    Squares,
    /// One representative per `{s, -s}` pair of squares.
    SquaresModSign,
    /// All of `Z_p \ {0}`.
    AllNonzero,
}

impl MultiplierSet {
    pub fn values(self, tables: &ResidueTables) -> Result<Vec<u64>> {
        Ok(match self {
            MultiplierSet::Squares => tables.squares(),
            MultiplierSet::SquaresModSign => tables.square_representatives_mod_sign()?,
            MultiplierSet::AllNonzero => (1..tables.p()).collect(),
        })
    }
}

/// Base blocks over `Z_4 x Z_b x Z_p` with a multiplier set per block.
pub struct LiftSpec {
    pub group: Group,
    pub blocks: Vec<(Block, MultiplierSet)>,
}

/// Multiplies every base block through its multiplier set:
/// `{ (1,1,c) . B : (B, M) in spec, c in M }`.
pub fn lift(tables: &ResidueTables, spec: &LiftSpec) -> Result<Vec<Block>> {
    let g = &spec.group;
    let mut out = Vec::new();
    for (block, mset) in &spec.blocks {
        for c in mset.values(tables)? {
            let scaled: Vec<Elem> = block
                .elements()
                .iter()
                .map(|e| g.scale(&[1, 1, c as i64], e))
                .collect::<Result<_>>()?;
            let mut sorted = scaled.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != block.len() {
                return Err(Error::ScaledBlockCollapse {
                    multiplier: c,
                    block: format!("{:?}", block.elements()),
                });
            }
            out.push(Block::new(g, scaled)?);
        }
    }
    Ok(out)
}

/// The `Z_p` parts of the base family's difference list, grouped by the
/// `Z_4 x Z_b` projection, tagged with the originating block's multiplier
/// set.
fn fibers(spec: &LiftSpec) -> Result<BTreeMap<(u32, u32), Vec<(u64, MultiplierSet)>>> {
    let g = &spec.group;
    let mut map: BTreeMap<(u32, u32), Vec<(u64, MultiplierSet)>> = BTreeMap::new();
    for (block, mset) in &spec.blocks {
        let elems = block.elements();
        for i in 0..elems.len() {
            for j in 0..elems.len() {
                if i == j {
                    continue;
                }
                let d = g.difference(&elems[i], &elems[j])?;
                let c = d.coords();
                map.entry((c[0], c[1])).or_default().push((c[2] as u64, *mset));
            }
        }
    }
    Ok(map)
}

fn fiber_err(fiber: (u32, u32), reason: impl Into<String>) -> Error {
    Error::FiberCondition {
        fiber: format!("({},{})", fiber.0, fiber.1),
        reason: reason.into(),
    }
}

/// Precondition of the `p = 3 (mod 4)` lift: every fiber holds exactly two
/// nonzero values whose product is a non-square (so multiplying by the
/// squares covers `Z_p \ {0}` exactly once).
fn check_two_value_fibers(tables: &ResidueTables, spec: &LiftSpec) -> Result<()> {
    let ab = spec.group.moduli()[0] as usize * spec.group.moduli()[1] as usize;
    let fib = fibers(spec)?;
    if fib.len() != ab {
        return Err(fiber_err((0, 0), format!("only {} of {} fibers hit", fib.len(), ab)));
    }
    for (z, entries) in &fib {
        if entries.len() != 2 {
            return Err(fiber_err(*z, format!("{} values, expected 2", entries.len())));
        }
        let (a, b) = (entries[0].0, entries[1].0);
        if a == 0 || b == 0 {
            return Err(fiber_err(*z, "zero Z_p part"));
        }
        if tables.is_square((a * b % tables.p()) as i64)? {
            return Err(fiber_err(*z, format!("product {a}*{b} is a square")));
        }
    }
    Ok(())
}

/// Precondition of the `p = 1 (mod 4)` lift: every fiber holds a quadruple
/// `{l, -l, l', -l'}` with `l l'` a non-square (so a `{1,-1}` transversal of
/// the squares covers `Z_p \ {0}` exactly once).
fn check_negation_closed_fibers(tables: &ResidueTables, spec: &LiftSpec) -> Result<()> {
    let p = tables.p();
    let ab = spec.group.moduli()[0] as usize * spec.group.moduli()[1] as usize;
    let fib = fibers(spec)?;
    if fib.len() != ab {
        return Err(fiber_err((0, 0), format!("only {} of {} fibers hit", fib.len(), ab)));
    }
    for (z, entries) in &fib {
        if entries.len() != 4 {
            return Err(fiber_err(*z, format!("{} values, expected 4", entries.len())));
        }
        let mut vals: Vec<u64> = entries.iter().map(|&(v, _)| v).collect();
        if vals.iter().any(|&v| v == 0) {
            return Err(fiber_err(*z, "zero Z_p part"));
        }
        vals.sort_unstable();
        // peel off {l, -l} pairs
        let mut transversal = Vec::new();
        while let Some(&v) = vals.first() {
            let neg = (p - v) % p;
            let pos = vals.iter().rposition(|&x| x == neg);
            match pos {
                Some(idx) if vals[idx] == neg && !(idx == 0 && vals.len() > 1 && neg == v) => {
                    vals.remove(idx);
                    vals.remove(0);
                    transversal.push(v);
                }
                _ => return Err(fiber_err(*z, format!("value {v} lacks its negation"))),
            }
        }
        if transversal.len() != 2 {
            return Err(fiber_err(*z, "not a {l,-l,l',-l'} quadruple"));
        }
        let prod = transversal[0] * transversal[1] % p;
        if tables.is_square(prod as i64)? {
            return Err(fiber_err(*z, format!("transversal product {prod} is a square")));
        }
    }
    Ok(())
}

/// General exactness check used by the mixed-multiplier family: expanding
/// each fiber entry by its block's multiplier set must cover `Z_p \ {0}`
/// exactly once.
fn check_fiber_cover(tables: &ResidueTables, spec: &LiftSpec) -> Result<()> {
    let p = tables.p();
    let ab = spec.group.moduli()[0] as usize * spec.group.moduli()[1] as usize;
    let fib = fibers(spec)?;
    if fib.len() != ab {
        return Err(fiber_err((0, 0), format!("only {} of {} fibers hit", fib.len(), ab)));
    }
    for (z, entries) in &fib {
        let mut counts = vec![0u32; p as usize];
        for &(v, mset) in entries {
            if v == 0 {
                return Err(fiber_err(*z, "zero Z_p part"));
            }
            for c in mset.values(tables)? {
                counts[(v * c % p) as usize] += 1;
            }
        }
        if counts[0] != 0 {
            return Err(fiber_err(*z, "fiber covers 0"));
        }
        if let Some(x) = (1..p).find(|&x| counts[x as usize] != 1) {
            return Err(fiber_err(
                *z,
                format!("residue {x} covered {} times", counts[x as usize]),
            ));
        }
    }
    Ok(())
}

/// Instantiates a family's block templates at `p` (parameters, literals and
/// `theta` all reduced mod `p`), paired with per-block multiplier sets.
fn instantiate(family: DirectFamily, p: u64, tables: &ResidueTables) -> Result<LiftSpec> {
    let group = Group::new(vec![4, family.base_v(), p as u32])?;
    let template = catalog::template_of(family);
    let params = catalog::lemma_params(family, p)?;
    let needs_theta = template
        .blocks
        .iter()
        .flat_map(|b| b.iter())
        .any(|(_, _, s)| matches!(s, ZpSym::Theta(_)));
    let theta = if needs_theta { tables.find_theta()? } else { 0 };

    let mut blocks = Vec::new();
    for tb in template.blocks {
        let elems: Vec<Elem> = tb
            .iter()
            .map(|&(a, b, sym)| {
                let zp: i64 = match sym {
                    ZpSym::Lit(v) => v,
                    ZpSym::Theta(sign) => sign * theta as i64,
                    ZpSym::Par(i) => params[i as usize] as i64,
                };
                group.elem(&[a as i64, b as i64, zp])
            })
            .collect::<Result<_>>()?;
        blocks.push(Block::new(&group, elems)?);
    }
    for &i in template.mirrored {
        let src = &blocks[i];
        let elems: Vec<Elem> = src
            .elements()
            .iter()
            .map(|e| group.scale(&[1, 1, -1], e))
            .collect::<Result<_>>()?;
        blocks.push(Block::new(&group, elems)?);
    }

    let msets: Vec<MultiplierSet> = match family {
        DirectFamily::Eight3Mod4 | DirectFamily::TwentyFour3Mod4 => {
            vec![MultiplierSet::Squares; blocks.len()]
        }
        DirectFamily::Eight1Mod4 => vec![MultiplierSet::SquaresModSign; blocks.len()],
        DirectFamily::TwentyFour1Mod4 => {
            let mut m = vec![MultiplierSet::SquaresModSign; 2];
            m.extend([MultiplierSet::AllNonzero; 2]);
            m.extend([MultiplierSet::Squares; 7]);
            m
        }
    };
    debug_assert_eq!(msets.len(), blocks.len());
    Ok(LiftSpec {
        group,
        blocks: blocks.into_iter().zip(msets).collect(),
    })
}

fn build_family(family: DirectFamily, p: u64) -> Result<Packing> {
    let tables = ResidueTables::build(p)?;
    let spec = instantiate(family, p, &tables)?;
    match family {
        DirectFamily::Eight3Mod4 | DirectFamily::TwentyFour3Mod4 => {
            check_two_value_fibers(&tables, &spec)?
        }
        DirectFamily::Eight1Mod4 => check_negation_closed_fibers(&tables, &spec)?,
        DirectFamily::TwentyFour1Mod4 => check_fiber_cover(&tables, &spec)?,
    }
    let blocks = lift(&tables, &spec)?;
    let packing = Packing::new(spec.group.clone(), vec![4, 5], blocks)?
        .with_claimed_leave(vec![4, family.base_v(), 1]);
    Ok(packing)
}

/// A `(4 x 8p, 4 x 8, {4,5}, 1)` packing presented over `Z_4 x Z_8 x Z_p`,
/// for any prime `p >= 5`.
pub fn bdp_4x8p(p: u64) -> Result<Packing> {
    if p == 5 {
        // the embedded 4 x 40 base packing, split to Z_4 x Z_8 x Z_5
        let base = catalog::base_4x40();
        let rel = Relabeling::unmerge(&base.group, 1, 2, 5)?;
        let group = rel.dst().clone();
        let blocks = base
            .blocks
            .iter()
            .map(|b| Block::new(&group, b.elements().iter().map(|e| rel.map(e)).collect()))
            .collect::<Result<_>>()?;
        return Ok(Packing::new(group, vec![4, 5], blocks)?.with_claimed_leave(vec![4, 8, 1]));
    }
    if !catalog::DirectFamily::Eight3Mod4.in_domain(p) && !catalog::DirectFamily::Eight1Mod4.in_domain(p) {
        return Err(Error::PrimeDomain {
            family: "4x8p",
            p,
        });
    }
    let family = if p % 4 == 3 {
        DirectFamily::Eight3Mod4
    } else {
        DirectFamily::Eight1Mod4
    };
    build_family(family, p)
}

/// A `(4 x 24p, 4 x 24, {4,5}, 1)` packing presented over `Z_4 x Z_24 x Z_p`,
/// for any prime `p >= 7`.
pub fn bdp_4x24p(p: u64) -> Result<Packing> {
    let family = if DirectFamily::TwentyFour3Mod4.in_domain(p) {
        DirectFamily::TwentyFour3Mod4
    } else if DirectFamily::TwentyFour1Mod4.in_domain(p) {
        DirectFamily::TwentyFour1Mod4
    } else {
        return Err(Error::PrimeDomain {
            family: "4x24p",
            p,
        });
    };
    build_family(family, p)
}

/// CRT-merges the last two coordinates, giving the packing over
/// `Z_4 x Z_{8p}` (or `Z_4 x Z_{24p}`) with its two-coordinate leave claim.
pub fn merge_to_two_coords(p: &Packing) -> Result<Packing> {
    let rel = Relabeling::merge(&p.group, 1, 2)?;
    let group = rel.dst().clone();
    let blocks = p
        .blocks
        .iter()
        .map(|b| Block::new(&group, b.elements().iter().map(|e| rel.map(e)).collect()))
        .collect::<Result<_>>()?;
    let mut out = Packing::new(group, p.sizes.clone(), blocks)?;
    if let Some(shape) = &p.claimed_leave {
        out = out.with_claimed_leave(vec![shape[0], shape[1] * shape[2]]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::{delta, verify_regular, verify_sdf, MultiBlock};

    #[test]
    fn counts_for_small_primes() {
        let p7 = bdp_4x8p(7).unwrap();
        assert_eq!(p7.blocks.len(), 12);
        let counts = p7.block_count_by_size();
        assert_eq!(counts[&4], 6);
        assert_eq!(counts[&5], 6);

        let p5 = bdp_4x8p(5).unwrap();
        assert_eq!(p5.blocks.len(), 8);

        let p13 = bdp_4x8p(13).unwrap();
        assert_eq!(p13.blocks.len(), 24);

        let q7 = bdp_4x24p(7).unwrap();
        assert_eq!(q7.blocks.len(), 36);
        let counts = q7.block_count_by_size();
        assert_eq!(counts[&4], 18);
        assert_eq!(counts[&5], 18);
    }

    #[test]
    fn theta_block_present_for_13() {
        // theta(13) = 8, so the first base block is {(0,0,1),(0,0,12),(0,1,8),(0,1,5)}
        let tables = ResidueTables::build(13).unwrap();
        let spec = instantiate(DirectFamily::Eight1Mod4, 13, &tables).unwrap();
        let g = &spec.group;
        let want: Vec<Elem> = [[0, 0, 1], [0, 0, 12], [0, 1, 8], [0, 1, 5]]
            .iter()
            .map(|c| g.elem(&[c[0], c[1], c[2]]).unwrap())
            .collect();
        let mut want_sorted = want.clone();
        want_sorted.sort();
        assert_eq!(spec.blocks[0].0.elements(), &want_sorted[..]);
    }

    #[test]
    fn per_block_multiplicities_for_13() {
        // (p-1)/4 = 3, p-1 = 12, (p-1)/2 = 6
        let q13 = bdp_4x24p(13).unwrap();
        assert_eq!(q13.blocks.len(), 2 * 3 + 2 * 12 + 7 * 6);
    }

    #[test]
    fn domain_errors() {
        assert!(bdp_4x8p(4).is_err());
        assert!(bdp_4x8p(3).is_err());
        assert!(bdp_4x24p(5).is_err());
        assert!(bdp_4x24p(9).is_err());
    }

    #[test]
    fn identity_multiplier_set_is_a_no_op() {
        // a multiplier set of {1}: lift returns the base blocks unchanged
        let tables = ResidueTables::build(7).unwrap();
        let spec = instantiate(DirectFamily::Eight3Mod4, 7, &tables).unwrap();
        let single = LiftSpec {
            group: spec.group.clone(),
            blocks: spec
                .blocks
                .iter()
                .map(|(b, _)| (b.clone(), MultiplierSet::Squares))
                .take(1)
                .collect(),
        };
        // squares of Z_7 = {1,2,4}; scaling by 1 reproduces the base block
        let lifted = lift(&tables, &single).unwrap();
        assert!(lifted.contains(&single.blocks[0].0));
    }

    #[test]
    fn certified_regular_small() {
        for p in [5u64, 7, 13, 17] {
            let split = bdp_4x8p(p).unwrap();
            let merged = merge_to_two_coords(&split).unwrap();
            let cert = verify_regular(&merged, 4, 8).unwrap();
            assert!(cert.ok, "p = {p}: {:?}", cert.failure);
            assert_eq!(cert.leave_size, 32);
        }
        for p in [7u64, 11, 13, 17] {
            let split = bdp_4x24p(p).unwrap();
            let merged = merge_to_two_coords(&split).unwrap();
            let cert = verify_regular(&merged, 4, 24).unwrap();
            assert!(cert.ok, "p = {p}: {:?}", cert.failure);
            assert_eq!(cert.leave_size, 96);
        }
    }

    /// The base blocks project onto `Z_4 x Z_8` exactly as the embedded
    /// strong difference families.
    #[test]
    fn base_projections_match_sdfs() {
        let g8 = Group::product2(4, 8);
        for (p, lambda) in [(7u64, 2u32), (13, 4)] {
            let tables = ResidueTables::build(p).unwrap();
            let family = if p % 4 == 3 {
                DirectFamily::Eight3Mod4
            } else {
                DirectFamily::Eight1Mod4
            };
            let spec = instantiate(family, p, &tables).unwrap();
            let projected: Vec<MultiBlock> = spec
                .blocks
                .iter()
                .map(|(b, _)| {
                    MultiBlock::new(
                        &g8,
                        b.elements()
                            .iter()
                            .map(|e| g8.elem(&[e.coords()[0] as i64, e.coords()[1] as i64]).unwrap())
                            .collect(),
                    )
                    .unwrap()
                })
                .collect();
            let mut sorted_proj = projected.clone();
            sorted_proj.sort();
            let mut sdf = catalog::sdf_4x8(lambda).unwrap();
            sdf.sort();
            assert_eq!(sorted_proj, sdf, "p = {p}");
            // and the SDF property itself holds
            let cert = verify_sdf(&g8, &sdf, lambda).unwrap();
            assert!(cert.ok);
        }
    }

    /// Lifting one covered base difference through the squares covers its
    /// whole fiber exactly once.
    #[test]
    fn fiber_cover_spot_check() {
        let p = 7u64;
        let packing = bdp_4x8p(p).unwrap();
        let counts = delta(&packing.group, packing.blocks.iter().map(|b| b.elements())).unwrap();
        let g = &packing.group;
        for zp in 1..p {
            let e = g.elem(&[0, 3, zp as i64]).unwrap();
            assert_eq!(counts.count(&e), 1, "fiber (0,3) at {zp}");
        }
    }
}
