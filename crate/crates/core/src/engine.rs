//! The construction planner and executor.
//!
//! [`plan`] derives, for odd `u, v`, a deterministic tree of construction
//! rules (base families, direct lifts, factor moves, inflations, fills) that
//! assembles an optimal balanced packing over `Z_{4u} x Z_{8v}`;
//! [`execute`] runs the tree bottom-up, re-certifying every node, and
//! returns the packing with a certificate embedding the derivation.
//!
//! The case analysis factors `u = 3^a 5^c u'` and `v = 3^b 5^d v'` with
//! `gcd(u'v', 30) = 1`: the 3-part is handled by the embedded base families
//! (leave widths alternate between 8 and 24 with the parity of the
//! exponent), the 5-part by the `4 x 40` base packing and `(15,5;1)` /
//! `(5,5;1)` matrices, and the rest by the direct quadratic-residue lifts
//! chained through cyclic inflations. Each branch ends by filling the final
//! leave with the matching embedded optimal packing.

use serde::{Deserialize, Serialize};

use crate::abelian::{Group, Relabeling};
use crate::catalog;
use crate::compose::{self, Axis};
use crate::diffmat::DmProvider;
use crate::direct;
use crate::error::{Error, Result};
use crate::packing::{
    verify_optimal_bdp, verify_regular_shape, Block, Certificate, DerivationNode, Packing,
};

/// Leave width contributed by a 3-power exponent: 8 for even exponents,
/// 24 for odd ones.
pub fn leave_width(a: u32) -> u32 {
    if a % 2 == 0 {
        8
    } else {
        24
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn split_power(mut n: u64, p: u64) -> (u32, u64) {
    let mut e = 0;
    while n % p == 0 {
        n /= p;
        e += 1;
    }
    (e, n)
}

fn prime_factors_with_multiplicity(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        while n % d == 0 {
            out.push(d);
            n /= d;
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// What a plan node promises about its output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Claim {
    /// Leave is exactly the subgroup of the given shape.
    Regular(Vec<u32>),
    /// Meets the balanced-packing size bound.
    Optimal,
}

impl Claim {
    fn describe(&self) -> String {
        match self {
            Claim::Regular(s) => format!(
                "regular {}",
                s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("x")
            ),
            Claim::Optimal => "optimal".into(),
        }
    }
}

/// A construction rule; leaves are embedded data or direct lifts, inner
/// nodes are relabelings and the two composition rules.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    /// The packing with no blocks.
    Empty,
    /// One of the embedded small regular packings.
    Base { u: u32, v: u32 },
    Optimal4x24,
    Optimal4x120,
    Base4x40,
    /// Quadratic-residue lift over `Z_4 x Z_8 x Z_p`.
    DirectEight { p: u64 },
    /// Quadratic-residue lift over `Z_4 x Z_24 x Z_p`.
    DirectTwentyFour { p: u64 },
    /// CRT merge of the last two coordinates.
    MergeCoords,
    /// Move the coprime factor `w` between the two coordinates.
    MoveFactor { from: usize, to: usize, w: u32 },
    /// Fill the leave of the first child with the second child.
    Fill,
    /// Inflate by a `(Z_m x Z_n, 5; 1)` difference matrix.
    Inflate { m: u32, n: u32 },
    /// Inflate one axis by an `(m, 5; 1)` cyclic difference matrix.
    InflateAxis { m: u32, axis: Axis },
}

impl Rule {
    fn describe(&self) -> String {
        match self {
            Rule::Empty => "empty".into(),
            Rule::Base { u, v } => format!("base-{u}x{v}"),
            Rule::Optimal4x24 => "optimal-4x24".into(),
            Rule::Optimal4x120 => "optimal-4x120".into(),
            Rule::Base4x40 => "base-4x40".into(),
            Rule::DirectEight { p } => {
                let class = catalog::matching_classes(
                    if p % 4 == 3 {
                        catalog::DirectFamily::Eight3Mod4
                    } else {
                        catalog::DirectFamily::Eight1Mod4
                    },
                    *p,
                )
                .into_iter()
                .next()
                .unwrap_or_else(|| "base case".into());
                format!("direct-8p p={p} ({class})")
            }
            Rule::DirectTwentyFour { p } => {
                let class = catalog::matching_classes(
                    if p % 4 == 3 {
                        catalog::DirectFamily::TwentyFour3Mod4
                    } else {
                        catalog::DirectFamily::TwentyFour1Mod4
                    },
                    *p,
                )
                .into_iter()
                .next()
                .unwrap_or_else(|| "?".into());
                format!("direct-24p p={p} ({class})")
            }
            Rule::MergeCoords => "crt-merge".into(),
            Rule::MoveFactor { w, .. } => format!("move-factor w={w}"),
            Rule::Fill => "fill".into(),
            Rule::Inflate { m, n } => format!("inflate dm={m}x{n}"),
            Rule::InflateAxis { m, axis } => format!(
                "inflate-axis m={m} ({})",
                if *axis == Axis::U { "u side" } else { "v side" }
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanNode {
    pub rule: Rule,
    pub group: Group,
    pub claim: Claim,
    pub children: Vec<PlanNode>,
}

impl PlanNode {
    fn regular_pair(&self) -> (u32, u32) {
        match &self.claim {
            Claim::Regular(s) if s.len() == 2 => (s[0], s[1]),
            other => panic!("expected a two-coordinate regular claim, got {other:?}"),
        }
    }

    pub fn derivation(&self) -> DerivationNode {
        DerivationNode {
            rule: self.rule.describe(),
            group: self.group.moduli().to_vec(),
            claim: self.claim.describe(),
            children: self.children.iter().map(|c| c.derivation()).collect(),
        }
    }

    /// Pretty tree for `--explain`.
    pub fn render(&self, indent: usize, out: &mut String) {
        out.push_str(&"  ".repeat(indent));
        out.push_str(&format!(
            "{} over {} [{}]\n",
            self.rule.describe(),
            self.group,
            self.claim.describe()
        ));
        for c in &self.children {
            c.render(indent + 1, out);
        }
    }
}

/// A derivation tree for one `(u, v)` target, plus the difference-matrix
/// instances it needs. A plan with a non-empty `blocked` list is a
/// first-class result: it names exactly what is missing.
#[derive(Clone, Debug)]
pub struct Plan {
    pub u: u64,
    pub v: u64,
    pub root: PlanNode,
    pub required_dms: Vec<Vec<u32>>,
    pub blocked: Vec<Vec<u32>>,
}

// ---------------------------------------------------------------------------
// Node constructors (with algebraic simplification of trivial steps)
// ---------------------------------------------------------------------------

fn empty_node(u: u32, v: u32) -> PlanNode {
    PlanNode {
        rule: Rule::Empty,
        group: Group::product2(u, v),
        claim: Claim::Regular(vec![u, v]),
        children: Vec::new(),
    }
}

fn empty_optimal_node(u: u32, v: u32) -> PlanNode {
    PlanNode {
        rule: Rule::Empty,
        group: Group::product2(u, v),
        claim: Claim::Optimal,
        children: Vec::new(),
    }
}

fn base_node(u: u32, v: u32) -> PlanNode {
    let p = catalog::base_bdp(u, v).expect("planner only requests embedded keys");
    let claim = Claim::Regular(p.claimed_leave.expect("base families carry leaves"));
    PlanNode {
        rule: Rule::Base { u, v },
        group: p.group,
        claim,
        children: Vec::new(),
    }
}

fn opt24_node() -> PlanNode {
    PlanNode {
        rule: Rule::Optimal4x24,
        group: Group::product2(4, 24),
        claim: Claim::Optimal,
        children: Vec::new(),
    }
}

fn opt120_node() -> PlanNode {
    PlanNode {
        rule: Rule::Optimal4x120,
        group: Group::product2(4, 120),
        claim: Claim::Optimal,
        children: Vec::new(),
    }
}

fn base40_node() -> PlanNode {
    PlanNode {
        rule: Rule::Base4x40,
        group: Group::product2(4, 40),
        claim: Claim::Regular(vec![4, 8]),
        children: Vec::new(),
    }
}

fn direct8_node(p: u64) -> PlanNode {
    let split = PlanNode {
        rule: Rule::DirectEight { p },
        group: Group::new(vec![4, 8, p as u32]).expect("valid"),
        claim: Claim::Regular(vec![4, 8, 1]),
        children: Vec::new(),
    };
    PlanNode {
        rule: Rule::MergeCoords,
        group: Group::product2(4, 8 * p as u32),
        claim: Claim::Regular(vec![4, 8]),
        children: vec![split],
    }
}

fn direct24_node(p: u64) -> PlanNode {
    let split = PlanNode {
        rule: Rule::DirectTwentyFour { p },
        group: Group::new(vec![4, 24, p as u32]).expect("valid"),
        claim: Claim::Regular(vec![4, 24, 1]),
        children: Vec::new(),
    };
    PlanNode {
        rule: Rule::MergeCoords,
        group: Group::product2(4, 24 * p as u32),
        claim: Claim::Regular(vec![4, 24]),
        children: vec![split],
    }
}

/// Fill, simplifying the trivial cases: an empty whole-leave outer packing
/// is the inner packing, and an empty whole-leave inner packing leaves the
/// outer packing as is.
fn fill_node(outer: PlanNode, inner: PlanNode) -> PlanNode {
    let whole = |n: &PlanNode| match &n.claim {
        Claim::Regular(s) => s == &n.group.moduli().to_vec(),
        Claim::Optimal => false,
    };
    if matches!(outer.rule, Rule::Empty) && whole(&outer) {
        debug_assert_eq!(outer.group, inner.group);
        return inner;
    }
    if matches!(inner.rule, Rule::Empty) && whole(&inner) {
        debug_assert_eq!(outer.claim, inner.claim);
        return outer;
    }
    let group = outer.group.clone();
    let claim = inner.claim.clone();
    PlanNode {
        rule: Rule::Fill,
        group,
        claim,
        children: vec![outer, inner],
    }
}

fn scale_claim(claim: &Claim, m: u32, n: u32) -> Claim {
    match claim {
        Claim::Regular(s) => Claim::Regular(vec![m * s[0], n * s[1]]),
        Claim::Optimal => panic!("optimal packings are never inflated"),
    }
}

/// Inflation by a `(Z_m x Z_n, 5;1)` matrix; inflating an empty packing is
/// just the empty packing over the larger group.
fn inflate_node(base: PlanNode, m: u32, n: u32) -> PlanNode {
    let (u, v) = (base.group.moduli()[0], base.group.moduli()[1]);
    if matches!(base.rule, Rule::Empty) {
        let claim = scale_claim(&base.claim, m, n);
        let mut node = empty_node(m * u, n * v);
        node.claim = claim;
        return node;
    }
    let claim = scale_claim(&base.claim, m, n);
    PlanNode {
        rule: Rule::Inflate { m, n },
        group: Group::product2(m * u, n * v),
        claim,
        children: vec![base],
    }
}

fn inflate_axis_node(base: PlanNode, axis: Axis, m: u32) -> PlanNode {
    if m == 1 {
        return base;
    }
    let (u, v) = (base.group.moduli()[0], base.group.moduli()[1]);
    let (mu, nv, claim) = match axis {
        Axis::U => (m * u, v, scale_claim(&base.claim, m, 1)),
        Axis::V => (u, m * v, scale_claim(&base.claim, 1, m)),
    };
    if matches!(base.rule, Rule::Empty) {
        let mut node = empty_node(mu, nv);
        node.claim = claim;
        return node;
    }
    PlanNode {
        rule: Rule::InflateAxis { m, axis },
        group: Group::product2(mu, nv),
        claim,
        children: vec![base],
    }
}

/// Move the coprime factor `w` between coordinates. The regular claim
/// transforms by peeling the `gcd(shape, w)` part across.
fn move_node(child: PlanNode, from: usize, to: usize, w: u32) -> PlanNode {
    if w == 1 {
        return child;
    }
    let rel = Relabeling::move_factor(&child.group, from, to, w)
        .expect("planner only moves coprime factors");
    let group = rel.dst().clone();
    let claim = match &child.claim {
        Claim::Optimal => Claim::Optimal,
        Claim::Regular(s) => {
            let mut s = s.clone();
            let sigma = gcd(s[from] as u64, w as u64) as u32;
            s[from] /= sigma;
            s[to] *= sigma;
            Claim::Regular(s)
        }
    };
    if matches!(child.rule, Rule::Empty) {
        let mut node = empty_node(group.moduli()[0], group.moduli()[1]);
        node.claim = claim;
        return node;
    }
    PlanNode {
        rule: Rule::MoveFactor { from, to, w },
        group,
        claim,
        children: vec![child],
    }
}

// ---------------------------------------------------------------------------
// The case analysis
// ---------------------------------------------------------------------------

struct Planner;

impl Planner {
    fn pow3(a: u32) -> u32 {
        3u32.pow(a)
    }

    fn pow5(c: u32) -> u32 {
        5u32.pow(c)
    }

    /// `(4 x 8*3^a, 4 x f(a))`.
    fn power3_8(&self, a: u32) -> PlanNode {
        match a {
            0 => empty_node(4, 8),
            1 => empty_node(4, 24),
            2 => base_node(4, 72),
            3 => inflate_node(base_node(2, 36), 2, 6),
            4 => fill_node(inflate_node(base_node(2, 108), 2, 6), base_node(4, 72)),
            _ => {
                let prev = self.power3_8(a - 3);
                let scaled = inflate_axis_node(prev, Axis::V, 27);
                let inner = self.power3_8(if a % 2 == 1 { 3 } else { 4 });
                fill_node(scaled, inner)
            }
        }
    }

    /// `(12 x 8*3^a, 4 x f(a+1))`, `a >= 1`.
    fn power3_12(&self, a: u32) -> PlanNode {
        match a {
            1 => base_node(12, 24),
            2 => inflate_node(base_node(6, 12), 2, 6),
            3 => fill_node(inflate_node(base_node(6, 36), 2, 6), base_node(4, 72)),
            _ => {
                let base = self.power3_8(a - 2);
                let scaled = inflate_node(base, 3, 9);
                let inner = self.power3_12(if a % 2 == 1 { 3 } else { 2 });
                fill_node(scaled, inner)
            }
        }
    }

    /// `(36 x 8*3^a, 4 x f(a))`, `a >= 1`.
    fn power3_36(&self, a: u32) -> PlanNode {
        match a {
            1 => inflate_node(base_node(18, 4), 2, 6),
            2 => fill_node(inflate_node(base_node(18, 12), 2, 6), base_node(4, 72)),
            _ => {
                let base = self.power3_8(a - 1);
                let scaled = inflate_node(base, 9, 3);
                let inner = self.power3_36(if a % 2 == 1 { 1 } else { 2 });
                fill_node(scaled, inner)
            }
        }
    }

    /// `(4*3^a x 8*3^b, g x h)` with `(g, h)` in `{(4,8), (4,24), (12,8)}`.
    fn three_power_core(&self, a: u32, b: u32) -> PlanNode {
        if a == 0 {
            return self.power3_8(b);
        }
        if b == 0 {
            return move_node(self.power3_8(a), 1, 0, Self::pow3(a));
        }
        let base = move_node(self.power3_8(a - 1), 1, 0, Self::pow3(a - 1));
        let scaled = inflate_node(base, 3, Self::pow3(b));
        let inner = if a % 2 == 1 {
            self.power3_12(b)
        } else {
            self.power3_36(b)
        };
        fill_node(scaled, inner)
    }

    /// `(4 x 24*5^b, 4 x 120)` for `b >= 1`; `(4 x 24, 4 x 24)` for `b = 0`.
    fn five_chain(&self, b: u32) -> PlanNode {
        match b {
            0 => empty_node(4, 24),
            1 => empty_node(4, 120),
            2 => inflate_axis_node(base40_node(), Axis::V, 15),
            _ => {
                let prev = self.five_chain(b - 1);
                let scaled = inflate_axis_node(prev, Axis::V, 5);
                fill_node(scaled, self.five_chain(2))
            }
        }
    }

    /// `(20 x 24*5^b, 20 x 24)`, `b >= 1`.
    fn five_chain_wide(&self, b: u32) -> PlanNode {
        let corner = inflate_node(base40_node(), 5, 3); // (20 x 120, 20 x 24)
        if b == 1 {
            return corner;
        }
        let xb = self.five_chain(b);
        let scaled = inflate_axis_node(xb, Axis::U, 5);
        fill_node(scaled, corner)
    }

    /// `(4*5^a x 24*5^b, g x h)` with `(g,h)` = `(4,24)` / `(4,120)` /
    /// `(20,24)` according to the exponents.
    fn five_power_core(&self, a: u32, b: u32) -> PlanNode {
        if a == 0 {
            return self.five_chain(b);
        }
        let u_side = move_node(self.five_chain(a), 1, 0, Self::pow5(a));
        if b == 0 {
            return u_side;
        }
        let scaled = inflate_axis_node(u_side, Axis::V, Self::pow5(b));
        fill_node(scaled, self.five_chain_wide(b))
    }

    /// `(4u x 8v, 4 x 8)` for `gcd(uv, 6) = 1`.
    fn coprime6_core(&self, u: u32, v: u32) -> PlanNode {
        if v == 1 {
            if u == 1 {
                return empty_node(4, 8);
            }
            return move_node(self.coprime6_core(1, u), 1, 0, u);
        }
        if u == 1 {
            let primes = prime_factors_with_multiplicity(v as u64);
            let mut node = direct8_node(primes[0]);
            for &q in &primes[1..] {
                let scaled = inflate_axis_node(node, Axis::V, q as u32);
                node = fill_node(scaled, direct8_node(q));
            }
            return node;
        }
        let left = move_node(self.coprime6_core(1, u), 1, 0, u);
        let scaled = inflate_axis_node(left, Axis::V, v);
        fill_node(scaled, self.coprime6_core(1, v))
    }

    /// `(gu x hv, g x h)` for `gcd(uv, 30) = 1` and
    /// `(g, h)` in `{(4,24), (4,120), (12,8), (20,24)}`.
    fn coprime30_core(&self, u: u32, v: u32, g: u32, h: u32) -> PlanNode {
        match (g, h) {
            (4, 24) => {
                if v == 1 {
                    if u == 1 {
                        return empty_node(4, 24);
                    }
                    return move_node(self.coprime30_core(1, u, 4, 24), 1, 0, u);
                }
                if u == 1 {
                    let primes = prime_factors_with_multiplicity(v as u64);
                    let mut node = direct24_node(primes[0]);
                    for &q in &primes[1..] {
                        let scaled = inflate_axis_node(node, Axis::V, q as u32);
                        node = fill_node(scaled, direct24_node(q));
                    }
                    return node;
                }
                let left = move_node(self.coprime30_core(1, u, 4, 24), 1, 0, u);
                let scaled = inflate_axis_node(left, Axis::V, v);
                fill_node(scaled, self.coprime30_core(1, v, 4, 24))
            }
            (4, 120) => inflate_axis_node(self.coprime30_core(u, v, 4, 24), Axis::V, 5),
            (12, 8) => move_node(self.coprime30_core(u, v, 4, 24), 1, 0, 3),
            (20, 24) => move_node(self.coprime30_core(u, v, 4, 120), 1, 0, 5),
            _ => unreachable!("unsupported leave target"),
        }
    }

    /// The embedded optimal packing over `Z_g x Z_h` (relabeled as needed).
    fn optimal_small(&self, g: u32, h: u32) -> PlanNode {
        match (g, h) {
            (4, 8) => empty_optimal_node(4, 8),
            (4, 24) => opt24_node(),
            (12, 8) => move_node(opt24_node(), 1, 0, 3),
            (4, 120) => opt120_node(),
            (12, 40) => move_node(opt120_node(), 1, 0, 3),
            (20, 24) => move_node(opt120_node(), 1, 0, 5),
            (60, 8) => move_node(opt120_node(), 1, 0, 15),
            _ => unreachable!("planner only fills known leaves, got ({g},{h})"),
        }
    }

    /// `((4*3^a x 8*3^b*w, g x h), (g,h))` for `gcd(w, 30) = 1`.
    fn mixed_c0(&self, a: u32, b: u32, w: u32) -> (PlanNode, (u32, u32)) {
        let core = self.three_power_core(a, b);
        let (g, h) = core.regular_pair();
        if w == 1 {
            return (core, (g, h));
        }
        let scaled = inflate_axis_node(core, Axis::V, w);
        let inner = match (g, h) {
            (4, 8) => self.coprime6_core(1, w),
            (4, 24) => self.coprime30_core(1, w, 4, 24),
            (12, 8) => self.coprime30_core(1, w, 12, 8),
            _ => unreachable!(),
        };
        (fill_node(scaled, inner), (g, h))
    }

    /// `((4*3^a*u2 x 8*3^b*v2, g x h), (g,h))` for `gcd(u2 v2, 30) = 1`.
    fn both_c0(&self, a: u32, b: u32, u2: u32, v2: u32) -> (PlanNode, (u32, u32)) {
        if u2 == 1 {
            return self.mixed_c0(a, b, v2);
        }
        if v2 == 1 {
            let (node, pair) = self.mixed_c0(a, b, u2);
            return (move_node(node, 1, 0, u2), pair);
        }
        let core = self.three_power_core(a, b);
        let (g, h) = core.regular_pair();
        let scaled = inflate_node(core, u2, v2);
        let inner = match (g, h) {
            (4, 8) => self.coprime6_core(u2, v2),
            (4, 24) => self.coprime30_core(u2, v2, 4, 24),
            (12, 8) => self.coprime30_core(u2, v2, 12, 8),
            _ => unreachable!(),
        };
        (fill_node(scaled, inner), (g, h))
    }

    /// Optimal over `Z_{4*3^a} x Z_{8*3^b*v1}` for `gcd(v1, 6) = 1, v1 > 1`.
    fn optimal_stacked_v(&self, a: u32, b: u32, v1: u32) -> PlanNode {
        let (c, v2) = split_power(v1 as u64, 5);
        let v2 = v2 as u32;
        if c == 0 {
            let (node, (g, h)) = self.mixed_c0(a, b, v1);
            return fill_node(node, self.optimal_small(g, h));
        }
        let (base, (g, h)) = self.mixed_c0(a, b, v2);
        let scaled = inflate_axis_node(base, Axis::V, Self::pow5(c));
        let (inner, (g2, h2)) = match (g, h) {
            (4, 8) => (self.coprime6_core(1, Self::pow5(c)), (4, 8)),
            (4, 24) => (self.five_chain(c), (4, 120)),
            (12, 8) => (move_node(self.five_chain(c), 1, 0, 3), (12, 40)),
            _ => unreachable!(),
        };
        let filled = fill_node(scaled, inner);
        fill_node(filled, self.optimal_small(g2, h2))
    }

    /// Optimal over `Z_{4*3^a*u1} x Z_{8*3^b*v1}` for `u1, v1 > 1`,
    /// `gcd(u1 v1, 6) = 1`.
    fn optimal_both(&self, a: u32, b: u32, u1: u32, v1: u32) -> PlanNode {
        let (c, u2) = split_power(u1 as u64, 5);
        let (d, v2) = split_power(v1 as u64, 5);
        let (u2, v2) = (u2 as u32, v2 as u32);
        debug_assert!(c == 0 || d >= 1, "c >= 1, d = 0 is transposed earlier");
        let (w0, (g, h)) = self.both_c0(a, b, u2, v2);
        if c == 0 && d == 0 {
            return fill_node(w0, self.optimal_small(g, h));
        }
        if c == 0 {
            let scaled = inflate_axis_node(w0, Axis::V, Self::pow5(d));
            let (inner, (g2, h2)) = match (g, h) {
                (4, 8) => (self.coprime6_core(1, Self::pow5(d)), (4, 8)),
                (4, 24) => (self.five_chain(d), (4, 120)),
                (12, 8) => (move_node(self.five_chain(d), 1, 0, 3), (12, 40)),
                _ => unreachable!(),
            };
            let filled = fill_node(scaled, inner);
            return fill_node(filled, self.optimal_small(g2, h2));
        }
        // c, d >= 1
        let scaled = inflate_node(w0, Self::pow5(c), Self::pow5(d));
        let (inner, (g2, h2)) = match (g, h) {
            (4, 8) => (self.coprime6_core(Self::pow5(c), Self::pow5(d)), (4, 8)),
            (4, 24) => (self.five_power_core(c, d), (20, 24)),
            (12, 8) => (move_node(self.five_power_core(c, d), 1, 0, 3), (60, 8)),
            _ => unreachable!(),
        };
        let filled = fill_node(scaled, inner);
        fill_node(filled, self.optimal_small(g2, h2))
    }

    /// Optimal over `Z_{4*3^a*u1} x Z_{8*3^b*v1}`, `gcd(u1 v1, 6) = 1`.
    fn optimal_node(&self, a: u32, b: u32, u1: u32, v1: u32) -> PlanNode {
        if u1 == 1 && v1 == 1 {
            let core = self.three_power_core(a, b);
            let (g, h) = core.regular_pair();
            return fill_node(core, self.optimal_small(g, h));
        }
        if u1 == 1 {
            return self.optimal_stacked_v(a, b, v1);
        }
        if v1 == 1 {
            let solved = self.optimal_stacked_v(a, b, u1);
            return move_node(solved, 1, 0, u1);
        }
        let (c, u2) = split_power(u1 as u64, 5);
        let (d, _) = split_power(v1 as u64, 5);
        if c >= 1 && d == 0 {
            // move the u-side 5-power across, solve, move it back
            let solved = self.optimal_node(a, b, u2 as u32, Self::pow5(c) * v1);
            return move_node(solved, 1, 0, Self::pow5(c));
        }
        self.optimal_both(a, b, u1, v1)
    }
}

fn collect_dms(node: &PlanNode, out: &mut Vec<Vec<u32>>) {
    match &node.rule {
        Rule::Inflate { m, n } => {
            let key = vec![*m, *n];
            if !out.contains(&key) {
                out.push(key);
            }
        }
        Rule::InflateAxis { m, .. } => {
            let key = vec![*m];
            if !out.contains(&key) {
                out.push(key);
            }
        }
        _ => {}
    }
    for c in &node.children {
        collect_dms(c, out);
    }
}

/// Derives the construction tree for an optimal balanced packing over
/// `Z_{4u} x Z_{8v}`. Deterministic; difference-matrix availability is
/// checked against the provider and missing instances are reported in
/// `blocked` rather than failing.
pub fn plan(u: u64, v: u64, provider: &DmProvider) -> Result<Plan> {
    if u == 0 || v == 0 || u % 2 == 0 || v % 2 == 0 {
        return Err(Error::EvenInput { u, v });
    }
    if 8 * v > u32::MAX as u64 / 4 || 4 * u > u32::MAX as u64 / 4 {
        return Err(Error::Format(format!("target ({u}, {v}) is too large")));
    }
    let (a, u1) = split_power(u, 3);
    let (b, v1) = split_power(v, 3);
    debug_assert_eq!(gcd(u1 * v1, 6), 1);
    let root = Planner.optimal_node(a, b, u1 as u32, v1 as u32);
    debug_assert_eq!(
        root.group,
        Group::product2(4 * u as u32, 8 * v as u32),
        "plan target mismatch for ({u}, {v})"
    );
    let mut required_dms = Vec::new();
    collect_dms(&root, &mut required_dms);
    let blocked = required_dms
        .iter()
        .filter(|m| {
            let g = Group::new((*m).clone()).expect("valid moduli");
            !provider.available(&g, 5)
        })
        .cloned()
        .collect();
    Ok(Plan {
        u,
        v,
        root,
        required_dms,
        blocked,
    })
}

fn certify_node(packing: &Packing, node: &PlanNode) -> Result<Certificate> {
    let cert = match &node.claim {
        Claim::Regular(shape) => verify_regular_shape(packing, shape)?,
        Claim::Optimal => verify_optimal_bdp(packing)?,
    };
    if !cert.ok {
        return Err(Error::Certification {
            rule: node.rule.describe(),
            detail: format!("claim {} failed: {:?}", node.claim.describe(), cert.failure),
        });
    }
    Ok(cert)
}

fn exec_node(node: &PlanNode, provider: &DmProvider, recertify: bool) -> Result<Packing> {
    let children: Vec<Packing> = node
        .children
        .iter()
        .map(|c| exec_node(c, provider, recertify))
        .collect::<Result<_>>()?;
    let mut packing = match &node.rule {
        Rule::Empty => Packing::empty(&node.group, vec![4, 5]),
        Rule::Base { u, v } => catalog::base_bdp(*u, *v)?,
        Rule::Optimal4x24 => catalog::optimal_4x24(),
        Rule::Optimal4x120 => catalog::optimal_4x120(),
        Rule::Base4x40 => catalog::base_4x40(),
        Rule::DirectEight { p } => direct::bdp_4x8p(*p)?,
        Rule::DirectTwentyFour { p } => direct::bdp_4x24p(*p)?,
        Rule::MergeCoords => direct::merge_to_two_coords(&children[0])?,
        Rule::MoveFactor { from, to, w } => {
            let rel = Relabeling::move_factor(&children[0].group, *from, *to, *w)?;
            let group = rel.dst().clone();
            let blocks = children[0]
                .blocks
                .iter()
                .map(|b| Block::new(&group, b.elements().iter().map(|e| rel.map(e)).collect()))
                .collect::<Result<_>>()?;
            Packing::new(group, children[0].sizes.clone(), blocks)?
        }
        Rule::Fill => compose::fill(&children[0], &children[1], false)?,
        Rule::Inflate { m, n } => {
            let dm = provider.get(&Group::product2(*m, *n), 5)?;
            compose::inflate(&children[0], &dm, false)?
        }
        Rule::InflateAxis { m, axis } => {
            let dm = provider.get(&Group::cyclic(*m), 5)?;
            compose::inflate_axis(&children[0], *axis, &dm, false)?
        }
    };
    if packing.group != node.group {
        return Err(Error::Certification {
            rule: node.rule.describe(),
            detail: format!("group mismatch: {} vs planned {}", packing.group, node.group),
        });
    }
    packing.claimed_leave = match &node.claim {
        Claim::Regular(s) => Some(s.clone()),
        Claim::Optimal => None,
    };
    if recertify {
        certify_node(&packing, node)?;
    }
    Ok(packing)
}

/// The executed plan: the packing and its certificate, with the derivation
/// tree embedded.
pub struct EngineOutput {
    pub packing: Packing,
    pub certificate: Certificate,
}

/// Executes a plan bottom-up. With `recertify` every node is re-verified
/// against its claim; the root always is, regardless.
pub fn execute(plan: &Plan, provider: &DmProvider, recertify: bool) -> Result<EngineOutput> {
    if !plan.blocked.is_empty() {
        let names: Vec<String> = plan
            .blocked
            .iter()
            .map(|m| {
                format!(
                    "(Z{}, 5; 1)",
                    m.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" x Z")
                )
            })
            .collect();
        return Err(Error::BlockedPlan(names.join(", ")));
    }
    let packing = exec_node(&plan.root, provider, recertify)?;
    let mut cert = certify_node(&packing, &plan.root)?;
    cert.derivation = Some(plan.root.derivation());
    Ok(EngineOutput {
        packing,
        certificate: cert,
    })
}

/// Plans and executes in one call: a certified optimal balanced packing
/// over `Z_{4u} x Z_{8v}`.
pub fn construct_optimal(u: u64, v: u64, provider: &DmProvider) -> Result<EngineOutput> {
    let p = plan(u, v, provider)?;
    execute(&p, provider, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffmat::{DmDocument, DmRegistry, SearchOutcome, DEFAULT_BUDGET, DEFAULT_SEED};

    fn test_provider() -> DmProvider {
        // registry seeded with the searched (Z_2 x Z_6, 5; 1) instance
        let g = Group::product2(2, 6);
        let d = match crate::diffmat::dm_search(&g, 5, DEFAULT_BUDGET, DEFAULT_SEED).unwrap() {
            SearchOutcome::Found(d) => d,
            other => panic!("{other:?}"),
        };
        let mut reg = DmRegistry::empty();
        reg.push(DmDocument::from_matrix(&d, DEFAULT_SEED, "search"));
        DmProvider::new(reg, DEFAULT_BUDGET, DEFAULT_SEED)
    }

    #[test]
    fn leave_width_parity_identity() {
        for a in 0..40 {
            assert_eq!(leave_width(a) * leave_width(a + 1), 192);
        }
    }

    #[test]
    fn plan_shapes() {
        let provider = test_provider();
        // (3,3): the embedded 12 x 24 family filled with the empty optimal
        let p33 = plan(3, 3, &provider).unwrap();
        assert_eq!(p33.root.rule, Rule::Fill);
        assert_eq!(p33.root.children[0].rule, Rule::Base { u: 12, v: 24 });
        assert_eq!(p33.root.children[1].rule, Rule::Empty);
        assert!(p33.blocked.is_empty());

        // (1,7): direct lift, CRT merge, fill with the empty optimal
        let p17 = plan(1, 7, &provider).unwrap();
        assert_eq!(p17.root.rule, Rule::Fill);
        assert_eq!(p17.root.children[0].rule, Rule::MergeCoords);
        assert_eq!(
            p17.root.children[0].children[0].rule,
            Rule::DirectEight { p: 7 }
        );

        // (1,1): the empty packing is already optimal
        let p11 = plan(1, 1, &provider).unwrap();
        assert_eq!(p11.root.rule, Rule::Empty);
        assert_eq!(p11.root.claim, Claim::Optimal);
    }

    #[test]
    fn plan_is_deterministic() {
        let provider = test_provider();
        let a = plan(9, 15, &provider).unwrap();
        let b = plan(9, 15, &provider).unwrap();
        assert_eq!(a.root, b.root);
    }

    #[test]
    fn rejects_even_input() {
        let provider = test_provider();
        assert!(matches!(plan(2, 3, &provider), Err(Error::EvenInput { .. })));
        assert!(matches!(plan(3, 0, &provider), Err(Error::EvenInput { .. })));
    }

    #[test]
    fn execute_small_targets() {
        let provider = test_provider();
        for (u, v) in [(1u64, 1u64), (3, 3), (1, 7), (5, 3), (3, 5), (1, 15)] {
            let out = construct_optimal(u, v, &provider).unwrap();
            let bound = (32 * u * v as u64 - 4) as usize / 32;
            let counts = out.packing.block_count_by_size();
            assert_eq!(counts[&4], bound, "({u},{v})");
            assert_eq!(counts[&5], bound, "({u},{v})");
            assert!(out.certificate.ok);
            assert_eq!(
                out.packing.group,
                Group::product2(4 * u as u32, 8 * v as u32)
            );
        }
    }

    #[test]
    fn execute_specific_counts() {
        let provider = test_provider();
        // (3,3): 16 blocks. (1,15): 28 blocks, the 4 x 120 profile.
        let out = construct_optimal(3, 3, &provider).unwrap();
        assert_eq!(out.packing.blocks.len(), 16);
        assert_eq!(out.certificate.bound, Some(8));

        let out = construct_optimal(1, 15, &provider).unwrap();
        assert_eq!(out.packing.blocks.len(), 28);

        let out = construct_optimal(5, 3, &provider).unwrap();
        assert_eq!(out.packing.group, Group::product2(20, 24));
        assert_eq!(out.certificate.bound, Some(14));

        let out = construct_optimal(9, 9, &provider).unwrap();
        assert_eq!(out.packing.group, Group::product2(36, 72));
        assert_eq!(out.certificate.bound, Some(80));
    }

    #[test]
    fn derivation_tree_has_rule_labels() {
        let provider = test_provider();
        let out = construct_optimal(3, 3, &provider).unwrap();
        let deriv = out.certificate.derivation.as_ref().unwrap();
        assert_eq!(deriv.rule, "fill");
        assert_eq!(deriv.children.len(), 2);
        assert!(deriv.children[0].rule.contains("base-12x24"));
    }
}
