//! Difference packings and their certifying verifier.
//!
//! The verifier is the trust anchor of the crate: every constructed family is
//! re-checked here by exhaustive difference counting, and both positive and
//! negative outcomes are reported as a [`Certificate`] (negative certificates
//! carry a concrete witness).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abelian::{Elem, Group};
use crate::error::{Error, Result};

/// Dense difference counting up to this group order; sparse above.
const DENSE_LIMIT: usize = 1 << 22;

/// A block: a set of distinct elements, at least two.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Block {
    elements: Vec<Elem>,
}

impl Block {
    /// Builds a block from distinct elements; sorts them into canonical order.
    pub fn new(group: &Group, mut elements: Vec<Elem>) -> Result<Self> {
        for e in &elements {
            group.validate(e)?;
        }
        elements.sort();
        let len_before = elements.len();
        elements.dedup();
        if elements.len() != len_before {
            return Err(Error::ScaledBlockCollapse {
                multiplier: 1,
                block: format!("{elements:?}"),
            });
        }
        if elements.len() < 2 {
            return Err(Error::BlockTooSmall(elements.len()));
        }
        Ok(Block { elements })
    }

    pub fn elements(&self) -> &[Elem] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// A multiset block: repeated elements allowed (used by strong difference
/// families, where a repeat contributes zero differences).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct MultiBlock {
    elements: Vec<Elem>,
}

impl MultiBlock {
    pub fn new(group: &Group, mut elements: Vec<Elem>) -> Result<Self> {
        for e in &elements {
            group.validate(e)?;
        }
        if elements.len() < 2 {
            return Err(Error::BlockTooSmall(elements.len()));
        }
        elements.sort();
        Ok(MultiBlock { elements })
    }

    pub fn elements(&self) -> &[Elem] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }
}

/// A difference packing candidate: blocks over a group, with the size set `K`
/// and an optional claimed difference leave `(s_1, ..., s_r)` meaning the
/// subgroup `(m_1/s_1)Z_{m_1} x ... x (m_r/s_r)Z_{m_r}`.
#[derive(Clone, Debug)]
pub struct Packing {
    pub group: Group,
    pub sizes: Vec<usize>,
    pub blocks: Vec<Block>,
    pub claimed_leave: Option<Vec<u32>>,
}

impl Packing {
    pub fn new(group: Group, sizes: Vec<usize>, blocks: Vec<Block>) -> Result<Self> {
        for b in &blocks {
            if !sizes.contains(&b.len()) {
                return Err(Error::SizeNotInK {
                    size: b.len(),
                    k: sizes.clone(),
                });
            }
        }
        Ok(Packing {
            group,
            sizes,
            blocks,
            claimed_leave: None,
        })
    }

    pub fn with_claimed_leave(mut self, leave: Vec<u32>) -> Self {
        self.claimed_leave = Some(leave);
        self
    }

    /// Empty packing over `g` (its difference leave is all of `g`).
    pub fn empty(g: &Group, sizes: Vec<usize>) -> Self {
        Packing {
            group: g.clone(),
            sizes,
            blocks: Vec::new(),
            claimed_leave: Some(g.moduli().to_vec()),
        }
    }

    pub fn block_count_by_size(&self) -> BTreeMap<usize, usize> {
        let mut counts: BTreeMap<usize, usize> = self.sizes.iter().map(|&k| (k, 0)).collect();
        for b in &self.blocks {
            *counts.entry(b.len()).or_insert(0) += 1;
        }
        counts
    }
}

/// Multiplicity of each group element in a difference list.
pub struct DiffCount {
    group: Group,
    dense: Option<Vec<u32>>,
    sparse: BTreeMap<usize, u32>,
    total: usize,
}

impl DiffCount {
    fn new(group: &Group) -> Self {
        let n = group.order();
        DiffCount {
            group: group.clone(),
            dense: (n <= DENSE_LIMIT).then(|| vec![0u32; n]),
            sparse: BTreeMap::new(),
            total: 0,
        }
    }

    fn bump(&mut self, rank: usize) {
        match &mut self.dense {
            Some(v) => v[rank] += 1,
            None => *self.sparse.entry(rank).or_insert(0) += 1,
        }
        self.total += 1;
    }

    pub fn count_rank(&self, rank: usize) -> u32 {
        match &self.dense {
            Some(v) => v[rank],
            None => self.sparse.get(&rank).copied().unwrap_or(0),
        }
    }

    pub fn count(&self, e: &Elem) -> u32 {
        self.count_rank(self.group.rank(e))
    }

    /// Total number of counted differences, `sum over blocks of k(k-1)`.
    pub fn total(&self) -> usize {
        self.total
    }

    /// Elements with count zero, in rank order.
    pub fn zeros(&self) -> Vec<Elem> {
        match &self.dense {
            Some(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &c)| c == 0)
                .map(|(r, _)| self.group.unrank(r))
                .collect(),
            None => (0..self.group.order())
                .filter(|r| !self.sparse.contains_key(r))
                .map(|r| self.group.unrank(r))
                .collect(),
        }
    }

    /// Maximum multiplicity over nonzero elements, with a witness.
    pub fn max_nonidentity(&self) -> (u32, Option<Elem>) {
        let id = self.group.rank(&self.group.identity());
        let mut best = (0u32, None);
        match &self.dense {
            Some(v) => {
                for (r, &c) in v.iter().enumerate() {
                    if r != id && c > best.0 {
                        best = (c, Some(self.group.unrank(r)));
                    }
                }
            }
            None => {
                for (&r, &c) in &self.sparse {
                    if r != id && c > best.0 {
                        best = (c, Some(self.group.unrank(r)));
                    }
                }
            }
        }
        best
    }
}

/// The difference list of a family of blocks: for each block, `x - y` over
/// all ordered pairs of distinct positions. A repeated element in a multiset
/// block therefore contributes differences equal to the identity.
pub fn delta<'a, I>(group: &Group, blocks: I) -> Result<DiffCount>
where
    I: IntoIterator<Item = &'a [Elem]>,
{
    let mut counts = DiffCount::new(group);
    for block in blocks {
        for e in block {
            if !group.contains(e) {
                return Err(Error::MixedGroups);
            }
        }
        let ranks: Vec<Vec<u32>> = block.iter().map(|e| e.coords().to_vec()).collect();
        for i in 0..ranks.len() {
            for j in 0..ranks.len() {
                if i == j {
                    continue;
                }
                let mut rank = 0usize;
                for ((&a, &b), &m) in ranks[i].iter().zip(&ranks[j]).zip(group.moduli()) {
                    let d = (a as u64 + m as u64 - b as u64) % m as u64;
                    rank = rank * m as usize + d as usize;
                }
                counts.bump(rank);
            }
        }
    }
    Ok(counts)
}

pub fn delta_packing(p: &Packing) -> Result<DiffCount> {
    delta(&p.group, p.blocks.iter().map(|b| b.elements()))
}

/// What a verification claims about a family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CertKind {
    /// Plain difference packing: every element covered at most once.
    Dp,
    /// Difference packing whose leave is exactly the stated subgroup.
    Regular { leave_shape: Vec<u32> },
    /// Balanced packing meeting the size bound.
    OptimalBdp,
    /// Strong difference family with cover multiplicity `lambda`.
    Sdf { lambda: u32 },
    /// Difference matrix row-pair property.
    Dm { k: usize },
    /// Pattern-code correlation bounds.
    Oospc,
}

/// Witness attached to a negative certificate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Failure {
    Multiplicity { elem: Vec<u32>, count: u32 },
    IdentityCovered { count: u32 },
    LeaveWitness { elem: Vec<u32>, covered: bool },
    Unbalanced { counts: BTreeMap<usize, usize> },
    BlockCount { size: usize, count: usize, expected: usize },
    SdfMultiplicity { elem: Vec<u32>, count: u32, lambda: u32 },
    DmPair { row_a: usize, row_b: usize, elem: Vec<u32>, count: u32 },
    AutoCorrelation { codeword: usize, shift: (u32, u32), value: u32 },
    CrossCorrelation { a: usize, b: usize, shift: (u32, u32), value: u32 },
    BadWeight { codeword: usize, weight: usize },
}

/// One node of a derivation tree, embedded in certificates produced by the
/// construction engine.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivationNode {
    pub rule: String,
    pub group: Vec<u32>,
    pub claim: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<DerivationNode>,
}

/// Outcome of a verification, positive or negative.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(flatten)]
    pub kind: CertKind,
    pub group: Vec<u32>,
    pub ok: bool,
    pub blocks_by_size: BTreeMap<usize, usize>,
    pub balanced: bool,
    pub total_differences: usize,
    pub max_multiplicity: u32,
    pub leave_size: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leave: Vec<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivation: Option<DerivationNode>,
}

impl Certificate {
    fn base(kind: CertKind, p: &Packing) -> Self {
        Certificate {
            kind,
            group: p.group.moduli().to_vec(),
            ok: false,
            blocks_by_size: p.block_count_by_size(),
            balanced: false,
            total_differences: 0,
            max_multiplicity: 0,
            leave_size: 0,
            leave: Vec::new(),
            bound: None,
            failure: None,
            derivation: None,
        }
    }
}

fn leave_coords(leave: &[Elem]) -> Vec<Vec<u32>> {
    leave.iter().map(|e| e.coords().to_vec()).collect()
}

/// Checks the plain difference-packing property: every nonzero element
/// covered at most once and the identity not covered at all (a covered
/// identity means a repeated element inside a block, which is data
/// corruption for set blocks). Reports the difference leave.
pub fn verify_dp(p: &Packing) -> Result<Certificate> {
    let counts = delta_packing(p)?;
    let mut cert = Certificate::base(CertKind::Dp, p);
    cert.total_differences = counts.total();
    let id_count = counts.count(&p.group.identity());
    let (max, witness) = counts.max_nonidentity();
    cert.max_multiplicity = max;
    let leave = counts.zeros();
    cert.leave_size = leave.len();
    cert.leave = leave_coords(&leave);
    let counts_by_size = p.block_count_by_size();
    cert.balanced = counts_by_size.values().collect::<std::collections::BTreeSet<_>>().len() <= 1;
    if id_count > 0 {
        cert.failure = Some(Failure::IdentityCovered { count: id_count });
        return Ok(cert);
    }
    if max > 1 {
        let w = witness.expect("max > 1 has a witness");
        cert.failure = Some(Failure::Multiplicity {
            elem: w.coords().to_vec(),
            count: max,
        });
        return Ok(cert);
    }
    cert.ok = true;
    Ok(cert)
}

/// The expected leave subgroup for shape `(s_1, ..., s_r)` over `group`:
/// all elements with `x_i = 0 (mod m_i/s_i)`.
pub fn leave_subgroup(group: &Group, shape: &[u32]) -> Result<Vec<Elem>> {
    if shape.len() != group.arity() {
        return Err(Error::ArityMismatch {
            expected: group.arity(),
            got: shape.len(),
        });
    }
    let mut strides = Vec::with_capacity(shape.len());
    for (&s, &m) in shape.iter().zip(group.moduli()) {
        if s == 0 || m % s != 0 {
            return Err(Error::EmbeddingMismatch {
                inner: format!("shape {shape:?}"),
                outer: format!("{group}"),
            });
        }
        strides.push(m / s);
    }
    let mut elems = vec![group.identity()];
    for (i, (&s, &stride)) in shape.iter().zip(&strides).enumerate() {
        let mut next = Vec::with_capacity(elems.len() * s as usize);
        for e in &elems {
            for t in 0..s {
                let mut c = e.coords().to_vec();
                c[i] = t * stride;
                next.push(Elem::from_coords(c));
            }
        }
        elems = next;
    }
    elems.sort();
    Ok(elems)
}

/// Verifies a regular packing: the DP property plus leave exactly equal to
/// the subgroup described by `shape`.
pub fn verify_regular_shape(p: &Packing, shape: &[u32]) -> Result<Certificate> {
    let expected = leave_subgroup(&p.group, shape)?;
    let mut cert = verify_dp(p)?;
    cert.kind = CertKind::Regular {
        leave_shape: shape.to_vec(),
    };
    if !cert.ok {
        return Ok(cert);
    }
    let actual: Vec<Elem> = cert
        .leave
        .iter()
        .map(|c| Elem::from_coords(c.clone()))
        .collect();
    if actual != expected {
        cert.ok = false;
        // witness: an element on exactly one side
        let in_actual: std::collections::BTreeSet<_> = actual.iter().collect();
        let in_expected: std::collections::BTreeSet<_> = expected.iter().collect();
        let witness = expected
            .iter()
            .find(|e| !in_actual.contains(e))
            .map(|e| (e.clone(), true))
            .or_else(|| {
                actual
                    .iter()
                    .find(|e| !in_expected.contains(e))
                    .map(|e| (e.clone(), false))
            });
        if let Some((e, covered)) = witness {
            cert.failure = Some(Failure::LeaveWitness {
                elem: e.coords().to_vec(),
                covered,
            });
        }
    }
    Ok(cert)
}

/// Two-coordinate surface of [`verify_regular_shape`].
pub fn verify_regular(p: &Packing, s: u32, t: u32) -> Result<Certificate> {
    if p.group.arity() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            got: p.group.arity(),
        });
    }
    verify_regular_shape(p, &[s, t])
}

/// Per-size block counts and whether they are all equal.
pub fn verify_balanced(p: &Packing) -> (BTreeMap<usize, usize>, bool) {
    let counts = p.block_count_by_size();
    let balanced = counts
        .values()
        .collect::<std::collections::BTreeSet<_>>()
        .len()
        <= 1;
    (counts, balanced)
}

/// The largest possible per-size block count of a balanced packing:
/// `floor(|G \ I(G)| / sum_{k in K} (k^2 - k))`.
pub fn optimality_bound(group: &Group, sizes: &[usize]) -> Result<usize> {
    let denom: usize = sizes.iter().map(|&k| k * k - k).sum();
    if denom == 0 {
        return Err(Error::Format("empty or degenerate size set".into()));
    }
    Ok((group.order() - group.involution_count()) / denom)
}

/// Verifies optimality: DP, balanced, and per-size count meeting the bound.
pub fn verify_optimal_bdp(p: &Packing) -> Result<Certificate> {
    let bound = optimality_bound(&p.group, &p.sizes)?;
    let mut cert = verify_dp(p)?;
    cert.kind = CertKind::OptimalBdp;
    cert.bound = Some(bound);
    if !cert.ok {
        return Ok(cert);
    }
    let (counts, balanced) = verify_balanced(p);
    cert.balanced = balanced;
    if !balanced {
        cert.ok = false;
        cert.failure = Some(Failure::Unbalanced { counts });
        return Ok(cert);
    }
    for &k in &p.sizes {
        let c = counts.get(&k).copied().unwrap_or(0);
        if c != bound {
            cert.ok = false;
            cert.failure = Some(Failure::BlockCount {
                size: k,
                count: c,
                expected: bound,
            });
            return Ok(cert);
        }
    }
    Ok(cert)
}

/// Verifies a strong difference family: every element of the group,
/// including the identity, covered exactly `lambda` times.
pub fn verify_sdf(group: &Group, family: &[MultiBlock], lambda: u32) -> Result<Certificate> {
    let counts = delta(group, family.iter().map(|b| b.elements()))?;
    let mut by_size: BTreeMap<usize, usize> = BTreeMap::new();
    for b in family {
        *by_size.entry(b.len()).or_insert(0) += 1;
    }
    let mut cert = Certificate {
        kind: CertKind::Sdf { lambda },
        group: group.moduli().to_vec(),
        ok: true,
        blocks_by_size: by_size.clone(),
        balanced: by_size.values().collect::<std::collections::BTreeSet<_>>().len() <= 1,
        total_differences: counts.total(),
        max_multiplicity: 0,
        leave_size: 0,
        leave: Vec::new(),
        bound: None,
        failure: None,
        derivation: None,
    };
    for r in 0..group.order() {
        let c = counts.count_rank(r);
        cert.max_multiplicity = cert.max_multiplicity.max(c);
        if c != lambda {
            cert.ok = false;
            cert.failure = Some(Failure::SdfMultiplicity {
                elem: group.unrank(r).coords().to_vec(),
                count: c,
                lambda,
            });
            return Ok(cert);
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block(g: &Group, coords: &[[i64; 2]]) -> Block {
        Block::new(
            g,
            coords.iter().map(|c| g.elem(c).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn delta_single_pair() {
        let g = Group::product2(2, 4);
        let b = block(&g, &[[0, 0], [0, 1]]);
        let counts = delta(&g, [b.elements()]).unwrap();
        assert_eq!(counts.count(&g.elem(&[0, 1]).unwrap()), 1);
        assert_eq!(counts.count(&g.elem(&[0, 3]).unwrap()), 1);
        assert_eq!(counts.total(), 2);
    }

    #[test]
    fn delta_multiset_repeats_hit_identity() {
        let g = Group::product2(4, 8);
        let mb = MultiBlock::new(
            &g,
            vec![
                g.elem(&[0, 0]).unwrap(),
                g.elem(&[0, 0]).unwrap(),
                g.elem(&[0, 1]).unwrap(),
                g.elem(&[0, 1]).unwrap(),
            ],
        )
        .unwrap();
        let counts = delta(&g, [mb.elements()]).unwrap();
        assert_eq!(counts.count(&g.identity()), 4);
        assert_eq!(counts.total(), 12);
    }

    #[test]
    fn delta_empty() {
        let g = Group::product2(4, 8);
        let counts = delta(&g, std::iter::empty::<&[Elem]>()).unwrap();
        assert_eq!(counts.total(), 0);
        assert_eq!(counts.zeros().len(), 32);
    }

    #[test]
    fn dp_duplicate_blocks_fail_with_witness() {
        let g = Group::product2(4, 8);
        let b = block(&g, &[[0, 0], [0, 1]]);
        let p = Packing::new(g, vec![2], vec![b.clone(), b]).unwrap();
        let cert = verify_dp(&p).unwrap();
        assert!(!cert.ok);
        assert!(matches!(
            cert.failure,
            Some(Failure::Multiplicity { count: 2, .. })
        ));
    }

    #[test]
    fn empty_packing_is_regular_with_full_leave() {
        let g = Group::product2(4, 8);
        let p = Packing::empty(&g, vec![4, 5]);
        let cert = verify_regular(&p, 4, 8).unwrap();
        assert!(cert.ok);
        assert_eq!(cert.leave_size, 32);
    }

    #[test]
    fn bound_values() {
        assert_eq!(
            optimality_bound(&Group::product2(4, 8), &[4, 5]).unwrap(),
            0
        );
        assert_eq!(
            optimality_bound(&Group::product2(4, 120), &[4, 5]).unwrap(),
            14
        );
        assert_eq!(
            optimality_bound(&Group::product2(4, 24), &[4, 5]).unwrap(),
            2
        );
    }

    #[test]
    fn bound_matches_arithmetic_definition_small_orders() {
        // bound is the largest b with b * sum(k^2 - k) <= |G \ I(G)|
        for u in 1u32..=8 {
            for v in 1u32..=8 {
                let g = Group::product2(u, v);
                if g.order() > 512 {
                    continue;
                }
                let b = optimality_bound(&g, &[4, 5]).unwrap();
                let free = g.order() - g.involution_count();
                assert!(b * 32 <= free);
                assert!((b + 1) * 32 > free);
            }
        }
    }

    #[test]
    fn leave_subgroup_shape() {
        let g = Group::product2(2, 36);
        let leave = leave_subgroup(&g, &[2, 4]).unwrap();
        assert_eq!(leave.len(), 8);
        assert!(leave.contains(&g.elem(&[1, 27]).unwrap()));
        assert!(leave.contains(&g.identity()));
    }

    #[test]
    fn sdf_negative_example() {
        // single multiset block {0, 0} over Z_2 covers 0 twice and 1 never
        let g = Group::cyclic(2);
        let mb = MultiBlock::new(&g, vec![g.identity(), g.identity()]).unwrap();
        let cert = verify_sdf(&g, &[mb], 2).unwrap();
        assert!(!cert.ok);
        assert!(matches!(
            cert.failure,
            Some(Failure::SdfMultiplicity { count: 0, .. })
        ));
    }

    #[test]
    fn unbalanced_single_block() {
        let g = Group::product2(4, 24);
        let b = block(&g, &[[0, 0], [0, 1], [0, 3], [0, 7]]);
        let p = Packing::new(g, vec![4, 5], vec![b]).unwrap();
        let (counts, balanced) = verify_balanced(&p);
        assert!(!balanced);
        assert_eq!(counts[&4], 1);
        assert_eq!(counts[&5], 0);
    }

    proptest! {
        /// Difference lists are negation-symmetric and conserve k(k-1).
        #[test]
        fn delta_symmetry_and_conservation(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = Group::product2(rng.gen_range(2..8), rng.gen_range(2..10));
            let mut blocks = Vec::new();
            let mut expected_total = 0usize;
            for _ in 0..rng.gen_range(1..4) {
                let k = rng.gen_range(2..5).min(g.order());
                let mut elems: Vec<Elem> = Vec::new();
                while elems.len() < k {
                    let e = g.unrank(rng.gen_range(0..g.order()));
                    if !elems.contains(&e) {
                        elems.push(e);
                    }
                }
                expected_total += k * (k - 1);
                blocks.push(Block::new(&g, elems).unwrap());
            }
            let counts = delta(&g, blocks.iter().map(|b| b.elements())).unwrap();
            prop_assert_eq!(counts.total(), expected_total);
            for e in g.elements() {
                prop_assert_eq!(counts.count(&e), counts.count(&g.neg(&e)));
            }
        }
    }
}
