//! Embedded base data for the construction engine.
//!
//! Everything the recursive machinery bootstraps from lives here as static
//! tables: the nine small regular packings, the optimal `4 x 24` and
//! `4 x 120` packings, the `4 x 40` base packing, the two strong difference
//! families over `Z_4 x Z_8`, and the residue-class parameter tables of the
//! direct lifting constructions. Negative literals are stored as written and
//! reduced modulo the relevant modulus at instantiation, so the tables stay
//! diffable against their sources.

use crate::abelian::Group;
use crate::error::{Error, Result};
use crate::packing::{Block, MultiBlock, Packing};
use crate::residues::{is_prime, ResidueTables};

// ---------------------------------------------------------------------------
// Small regular (u x v, g x h, {4,5}, 1) packings
// ---------------------------------------------------------------------------

struct BaseFamily {
    u: u32,
    v: u32,
    g: u32,
    h: u32,
    blocks: &'static [&'static [(i64, i64)]],
}

const BASE_2X36: BaseFamily = BaseFamily {
    u: 2,
    v: 36,
    g: 2,
    h: 4,
    blocks: &[
        &[(0, 0), (1, 14), (1, 15), (1, 26)],
        &[(0, 0), (0, 5), (0, 15), (0, 19), (1, 7)],
        &[(0, 0), (0, 2), (0, 8), (1, 13)],
        &[(0, 0), (0, 3), (1, 4), (1, 20), (1, 33)],
    ],
};

const BASE_2X72: BaseFamily = BaseFamily {
    u: 2,
    v: 72,
    g: 2,
    h: 8,
    blocks: &[
        &[(0, 0), (0, 71), (1, 1), (1, 14)],
        &[(0, 0), (0, 17), (0, 37), (0, 48), (1, 20)],
        &[(0, 0), (0, 4), (0, 7), (0, 53)],
        &[(0, 0), (0, 33), (0, 38), (1, 22), (1, 43)],
        &[(0, 0), (0, 8), (0, 30), (1, 42)],
        &[(0, 0), (0, 14), (0, 70), (1, 46)],
        &[(0, 0), (0, 43), (1, 4), (1, 51), (1, 66)],
        &[(0, 0), (0, 28), (0, 60), (1, 35), (1, 41)],
    ],
};

const BASE_2X108: BaseFamily = BaseFamily {
    u: 2,
    v: 108,
    g: 2,
    h: 12,
    blocks: &[
        &[(0, 0), (0, 65), (0, 89), (1, 52)],
        &[(0, 0), (0, 5), (0, 37), (1, 43), (1, 49)],
        &[(0, 0), (0, 30), (0, 47), (0, 68)],
        &[(0, 0), (0, 59), (0, 60), (0, 93), (1, 91)],
        &[(0, 0), (0, 10), (0, 52), (0, 83), (1, 33)],
        &[(0, 0), (0, 46), (0, 96), (1, 35), (1, 39)],
        &[(0, 0), (0, 3), (0, 23), (1, 28), (1, 107)],
        &[(0, 0), (0, 13), (1, 53), (1, 92)],
        &[(0, 0), (0, 8), (0, 22), (1, 30)],
        &[(0, 0), (0, 51), (0, 67), (1, 93)],
        &[(0, 0), (0, 7), (1, 10), (1, 21), (1, 74)],
        &[(0, 0), (0, 2), (0, 28), (1, 48)],
    ],
};

const BASE_4X72: BaseFamily = BaseFamily {
    u: 4,
    v: 72,
    g: 4,
    h: 8,
    blocks: &[
        &[(0, 0), (0, 24), (1, 16), (2, 17), (2, 64)],
        &[(0, 0), (1, 49), (2, 16), (2, 35)],
        &[(0, 0), (1, 11), (3, 60), (3, 64)],
        &[(0, 0), (0, 65), (0, 70), (3, 4), (3, 42)],
        &[(0, 0), (0, 16), (2, 6), (3, 26), (3, 37)],
        &[(0, 0), (1, 53), (1, 70), (3, 39), (3, 40)],
        &[(0, 0), (1, 15), (1, 21), (2, 25), (3, 67)],
        &[(0, 0), (1, 17), (2, 60), (3, 13)],
        &[(0, 0), (0, 43), (1, 56), (1, 69), (2, 44)],
        &[(0, 0), (0, 49), (2, 11), (2, 51)],
        &[(0, 0), (0, 51), (1, 19), (1, 29), (3, 58)],
        &[(0, 0), (1, 55), (3, 5), (3, 31)],
        &[(0, 0), (0, 58), (1, 24), (1, 57)],
        &[(0, 0), (0, 15), (0, 37), (3, 35), (3, 65)],
        &[(0, 0), (0, 8), (0, 20), (2, 5)],
        &[(0, 0), (0, 28), (0, 31), (1, 34)],
    ],
};

const BASE_6X12: BaseFamily = BaseFamily {
    u: 6,
    v: 12,
    g: 2,
    h: 4,
    blocks: &[
        &[(0, 0), (0, 5), (1, 8), (3, 4)],
        &[(0, 0), (1, 11), (2, 4), (3, 5), (5, 6)],
        &[(0, 0), (0, 1), (2, 3), (4, 3)],
        &[(0, 0), (0, 2), (1, 0), (1, 4), (5, 5)],
    ],
};

const BASE_6X36: BaseFamily = BaseFamily {
    u: 6,
    v: 36,
    g: 2,
    h: 12,
    blocks: &[
        &[(0, 0), (1, 5), (3, 20), (5, 11)],
        &[(0, 0), (3, 26), (4, 24), (4, 25)],
        &[(0, 0), (0, 16), (3, 2), (4, 8), (4, 16)],
        &[(0, 0), (1, 17), (3, 7), (4, 34)],
        &[(0, 0), (2, 5), (2, 19), (3, 5)],
        &[(0, 0), (1, 29), (2, 31), (3, 25), (3, 35)],
        &[(0, 0), (0, 32), (1, 20), (2, 33), (2, 35)],
        &[(0, 0), (0, 7), (4, 27), (5, 24)],
        &[(0, 0), (1, 11), (2, 7), (3, 28)],
        &[(0, 0), (1, 16), (2, 23), (2, 34), (4, 12)],
        &[(0, 0), (1, 9), (1, 28), (3, 13), (5, 35)],
        &[(0, 0), (0, 5), (1, 8), (1, 31), (2, 18)],
    ],
};

const BASE_12X24: BaseFamily = BaseFamily {
    u: 12,
    v: 24,
    g: 4,
    h: 8,
    blocks: &[
        &[(0, 0), (2, 1), (2, 20), (6, 4), (10, 21)],
        &[(0, 0), (4, 15), (6, 5), (10, 1)],
        &[(0, 0), (2, 22), (3, 4), (7, 20)],
        &[(0, 0), (2, 0), (5, 10), (9, 22), (9, 23)],
        &[(0, 0), (0, 2), (1, 3), (2, 8), (11, 10)],
        &[(0, 0), (4, 22), (5, 9), (10, 15), (11, 1)],
        &[(0, 0), (0, 7), (1, 22), (7, 0), (8, 17)],
        &[(0, 0), (2, 12), (7, 7), (11, 16)],
        &[(0, 0), (1, 0), (8, 13), (11, 20)],
        &[(0, 0), (0, 13), (1, 20), (10, 6)],
        &[(0, 0), (2, 19), (5, 14), (9, 16), (10, 13)],
        &[(0, 0), (1, 2), (1, 18), (3, 23), (5, 12)],
        &[(0, 0), (4, 0), (5, 13), (9, 8)],
        &[(0, 0), (2, 10), (5, 15), (7, 6)],
        &[(0, 0), (0, 4), (3, 17), (4, 5)],
        &[(0, 0), (5, 16), (6, 1), (6, 11), (8, 3)],
    ],
};

const BASE_18X4: BaseFamily = BaseFamily {
    u: 18,
    v: 4,
    g: 2,
    h: 4,
    blocks: &[
        &[(0, 0), (1, 1), (8, 3), (11, 3), (14, 1)],
        &[(0, 0), (1, 0), (6, 3), (11, 0)],
        &[(0, 0), (3, 3), (6, 0), (7, 3), (8, 1)],
        &[(0, 0), (2, 0), (4, 2), (6, 1)],
    ],
};

const BASE_18X12: BaseFamily = BaseFamily {
    u: 18,
    v: 12,
    g: 2,
    h: 12,
    blocks: &[
        &[(0, 0), (4, 11), (5, 4), (15, 6), (17, 3)],
        &[(0, 0), (7, 7), (10, 10), (14, 3), (15, 10)],
        &[(0, 0), (1, 11), (2, 1), (13, 9)],
        &[(0, 0), (3, 7), (11, 3), (17, 9)],
        &[(0, 0), (8, 1), (10, 3), (11, 11), (12, 9)],
        &[(0, 0), (2, 10), (13, 11), (15, 3), (17, 6)],
        &[(0, 0), (3, 1), (5, 9), (15, 4)],
        &[(0, 0), (4, 2), (10, 0), (11, 0)],
        &[(0, 0), (2, 0), (5, 11), (8, 4), (13, 10)],
        &[(0, 0), (1, 4), (4, 4), (5, 5)],
        &[(0, 0), (2, 7), (6, 7), (8, 6), (12, 0)],
        &[(0, 0), (2, 5), (6, 8), (13, 2)],
    ],
};

const BASE_FAMILIES: &[&BaseFamily] = &[
    &BASE_2X36,
    &BASE_2X72,
    &BASE_2X108,
    &BASE_4X72,
    &BASE_6X12,
    &BASE_6X36,
    &BASE_12X24,
    &BASE_18X4,
    &BASE_18X12,
];

/// The optimal `(4 x 120, {4,5}, 1)` packing, 14 blocks of each size.
const OPTIMAL_4X120: &[&[(i64, i64)]] = &[
    &[(0, 0), (1, 103), (3, 27), (3, 73)],
    &[(0, 0), (1, 92), (1, 98), (2, 107)],
    &[(0, 0), (0, 4), (1, 17), (2, 35)],
    &[(0, 0), (1, 51), (2, 45), (3, 32)],
    &[(0, 0), (1, 46), (2, 16), (3, 113)],
    &[(0, 0), (1, 45), (1, 76), (2, 27)],
    &[(0, 0), (0, 15), (0, 48), (2, 88), (3, 4)],
    &[(0, 0), (0, 88), (2, 99), (3, 61), (3, 98)],
    &[(0, 0), (0, 69), (2, 86), (3, 50), (3, 112)],
    &[(0, 0), (0, 25), (0, 84), (3, 34), (3, 78)],
    &[(0, 0), (0, 113), (1, 23), (1, 101), (3, 47)],
    &[(0, 0), (1, 25), (2, 39), (3, 51)],
    &[(0, 0), (0, 28), (0, 57), (0, 77), (0, 98)],
    &[(0, 0), (0, 30), (0, 54), (0, 94), (3, 33)],
    &[(0, 0), (1, 106), (3, 58), (3, 92)],
    &[(0, 0), (0, 9), (1, 52), (2, 4)],
    &[(0, 0), (0, 47), (2, 98), (2, 110)],
    &[(0, 0), (1, 53), (1, 54), (2, 55)],
    &[(0, 0), (1, 35), (2, 91), (3, 29)],
    &[(0, 0), (1, 10), (1, 75), (2, 70), (3, 7)],
    &[(0, 0), (0, 23), (1, 39), (1, 78), (2, 43)],
    &[(0, 0), (0, 8), (1, 32), (2, 95), (3, 24)],
    &[(0, 0), (0, 3), (0, 13), (2, 41), (2, 59)],
    &[(0, 0), (0, 17), (0, 19), (1, 48), (1, 100)],
    &[(0, 0), (0, 14), (2, 111), (3, 55), (3, 100)],
    &[(0, 0), (0, 11), (0, 115), (2, 113), (3, 26)],
    &[(0, 0), (1, 80), (3, 79), (3, 117)],
    &[(0, 0), (1, 37), (2, 12), (3, 52)],
];

/// The optimal `(4 x 24, {4,5}, 1)` packing, 2 blocks of each size.
const OPTIMAL_4X24: &[&[(i64, i64)]] = &[
    &[(0, 0), (0, 1), (0, 3), (0, 7), (1, 0)],
    &[(0, 0), (0, 5), (0, 13), (1, 1), (1, 11)],
    &[(0, 0), (0, 9), (1, 3), (2, 5)],
    &[(0, 0), (1, 4), (2, 9), (3, 17)],
];

/// The `(4 x 40, 4 x 8, {4,5}, 1)` base packing used when the lifting prime
/// is 5.
const BASE_4X40: &[&[(i64, i64)]] = &[
    &[(0, 0), (1, 29), (1, 37), (2, 6), (2, 28)],
    &[(0, 0), (1, 4), (2, 17), (3, 18)],
    &[(0, 0), (0, 16), (1, 27), (3, 24)],
    &[(0, 0), (0, 7), (0, 21), (2, 8)],
    &[(0, 0), (0, 1), (0, 28), (0, 37), (3, 34)],
    &[(0, 0), (1, 18), (2, 2), (3, 14)],
    &[(0, 0), (0, 2), (1, 23), (2, 11), (3, 4)],
    &[(0, 0), (0, 23), (0, 29), (2, 7), (3, 21)],
];

/// The `(Z_4 x Z_8, {4,5}, 2)` strong difference family behind the
/// `p = 3 (mod 4)` lift.
const SDF_4X8_L2: &[&[(i64, i64)]] = &[
    &[(0, 0), (0, 5), (2, 1), (3, 1)],
    &[(0, 0), (0, 3), (1, 6), (2, 0)],
    &[(0, 0), (0, 4), (0, 6), (1, 3), (3, 2)],
    &[(0, 0), (0, 0), (0, 1), (1, 1), (2, 6)],
];

/// The `(Z_4 x Z_8, {4,5}, 4)` strong difference family behind the
/// `p = 1 (mod 4)` lift (blocks and elements repeat).
const SDF_4X8_L4: &[&[(i64, i64)]] = &[
    &[(0, 0), (0, 0), (0, 1), (0, 1)],
    &[(0, 0), (2, 0), (0, 4), (2, 4)],
    &[(0, 0), (0, 3), (1, 4), (3, 5)],
    &[(0, 0), (0, 6), (1, 0), (3, 3), (3, 6)],
    &[(0, 0), (0, 6), (1, 5), (2, 1), (3, 7)],
    &[(0, 0), (0, 3), (1, 4), (3, 5)],
    &[(0, 0), (0, 6), (1, 0), (3, 3), (3, 6)],
    &[(0, 0), (0, 6), (1, 5), (2, 1), (3, 7)],
];

fn packing_from_pairs(
    u: u32,
    v: u32,
    data: &[&[(i64, i64)]],
    claimed_leave: Option<(u32, u32)>,
) -> Packing {
    let group = Group::product2(u, v);
    let blocks = data
        .iter()
        .map(|b| {
            Block::new(
                &group,
                b.iter().map(|&(x, y)| group.elem(&[x, y]).unwrap()).collect(),
            )
            .expect("embedded block data is well-formed")
        })
        .collect();
    let mut p = Packing::new(group, vec![4, 5], blocks).expect("embedded sizes are in K");
    if let Some((g, h)) = claimed_leave {
        p = p.with_claimed_leave(vec![g, h]);
    }
    p
}

/// The nine embedded `(u x v, g x h, {4,5}, 1)` packings, keyed by `(u, v)`.
pub fn base_bdp(u: u32, v: u32) -> Result<Packing> {
    BASE_FAMILIES
        .iter()
        .find(|f| f.u == u && f.v == v)
        .map(|f| packing_from_pairs(f.u, f.v, f.blocks, Some((f.g, f.h))))
        .ok_or(Error::NotInCatalog { u, v })
}

/// Keys `(u, v, g, h)` of the embedded base packings.
pub fn base_bdp_keys() -> Vec<(u32, u32, u32, u32)> {
    BASE_FAMILIES.iter().map(|f| (f.u, f.v, f.g, f.h)).collect()
}

pub fn optimal_4x120() -> Packing {
    packing_from_pairs(4, 120, OPTIMAL_4X120, None)
}

pub fn optimal_4x24() -> Packing {
    packing_from_pairs(4, 24, OPTIMAL_4X24, None)
}

pub fn base_4x40() -> Packing {
    packing_from_pairs(4, 40, BASE_4X40, Some((4, 8)))
}

/// The embedded strong difference families over `Z_4 x Z_8`
/// (`lambda` in `{2, 4}`).
pub fn sdf_4x8(lambda: u32) -> Result<Vec<MultiBlock>> {
    let data = match lambda {
        2 => SDF_4X8_L2,
        4 => SDF_4X8_L4,
        _ => return Err(Error::NoSuchSdf(lambda)),
    };
    let group = Group::product2(4, 8);
    Ok(data
        .iter()
        .map(|b| {
            MultiBlock::new(
                &group,
                b.iter().map(|&(x, y)| group.elem(&[x, y]).unwrap()).collect(),
            )
            .expect("embedded multiset data is well-formed")
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Direct-construction templates and residue-class parameter tables
// ---------------------------------------------------------------------------

/// A parameter entry `c0 + c1*xi + c2*xi^2 + c3*xi^3`, evaluated modulo `p`
/// once the smallest non-residue `xi` is known.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamExpr(pub [i64; 4]);

impl ParamExpr {
    pub fn eval(&self, xi: u64, p: u64) -> u64 {
        let p_i = p as i128;
        let xi_i = xi as i128;
        let mut acc: i128 = 0;
        let mut pow: i128 = 1;
        for &c in &self.0 {
            acc = (acc + c as i128 % p_i * pow) % p_i;
            pow = pow * xi_i % p_i;
        }
        acc.rem_euclid(p_i) as u64
    }
}

const fn c(v: i64) -> ParamExpr {
    ParamExpr([v, 0, 0, 0])
}
const X: ParamExpr = ParamExpr([0, 1, 0, 0]);
const NX: ParamExpr = ParamExpr([0, -1, 0, 0]);
const X2: ParamExpr = ParamExpr([0, 0, 1, 0]);
const NX2: ParamExpr = ParamExpr([0, 0, -1, 0]);
const X3: ParamExpr = ParamExpr([0, 0, 0, 1]);
const TWO_X2: ParamExpr = ParamExpr([0, 0, 2, 0]);
const X_PLUS_X2: ParamExpr = ParamExpr([0, 1, 1, 0]);
const X_PLUS_1: ParamExpr = ParamExpr([1, 1, 0, 0]);

/// The four direct lifting families: base group `Z_4 x Z_8` or `Z_4 x Z_24`,
/// split by the square class of `-1` (`p = 3 (mod 4)` vs `p = 1 (mod 4)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DirectFamily {
    /// `Z_4 x Z_8 x Z_p`, `p = 3 (mod 4)`, `p >= 7`.
    Eight3Mod4,
    /// `Z_4 x Z_8 x Z_p`, `p = 1 (mod 4)`, `p > 5`.
    Eight1Mod4,
    /// `Z_4 x Z_24 x Z_p`, `p = 3 (mod 4)`, `p >= 7`.
    TwentyFour3Mod4,
    /// `Z_4 x Z_24 x Z_p`, `p = 1 (mod 4)`, `p > 5`.
    TwentyFour1Mod4,
}

impl DirectFamily {
    pub fn name(self) -> &'static str {
        match self {
            DirectFamily::Eight3Mod4 => "4x8p (p=3 mod 4)",
            DirectFamily::Eight1Mod4 => "4x8p (p=1 mod 4)",
            DirectFamily::TwentyFour3Mod4 => "4x24p (p=3 mod 4)",
            DirectFamily::TwentyFour1Mod4 => "4x24p (p=1 mod 4)",
        }
    }

    /// Middle modulus of the base group (8 or 24).
    pub fn base_v(self) -> u32 {
        match self {
            DirectFamily::Eight3Mod4 | DirectFamily::Eight1Mod4 => 8,
            _ => 24,
        }
    }

    pub fn param_len(self) -> usize {
        match self {
            DirectFamily::Eight3Mod4 | DirectFamily::Eight1Mod4 => 14,
            DirectFamily::TwentyFour3Mod4 => 6,
            DirectFamily::TwentyFour1Mod4 => 26,
        }
    }

    /// Whether `p` is inside this family's prime domain.
    pub fn in_domain(self, p: u64) -> bool {
        if !is_prime(p) {
            return false;
        }
        match self {
            DirectFamily::Eight3Mod4 | DirectFamily::TwentyFour3Mod4 => p % 4 == 3 && p >= 7,
            DirectFamily::Eight1Mod4 | DirectFamily::TwentyFour1Mod4 => p % 4 == 1 && p > 5,
        }
    }
}

/// Residue-class selector for one parameter row.
#[derive(Clone, Copy, Debug)]
pub enum ClassCond {
    /// `p = 1 (mod 8)`.
    Mod8Is1,
    /// `p = r (mod 24)`.
    Mod24(u64),
    /// `p` congruent to one of the listed residues mod 120.
    Mod120(&'static [u64]),
}

impl ClassCond {
    pub fn matches(&self, p: u64) -> bool {
        match self {
            ClassCond::Mod8Is1 => p % 8 == 1,
            ClassCond::Mod24(r) => p % 24 == *r,
            ClassCond::Mod120(rs) => rs.contains(&(p % 120)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ClassCond::Mod8Is1 => "1 mod 8".to_string(),
            ClassCond::Mod24(r) => format!("{r} mod 24"),
            ClassCond::Mod120(rs) => format!(
                "{} mod 120",
                rs.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
            ),
        }
    }
}

struct ParamClass {
    cond: ClassCond,
    entries: &'static [ParamExpr],
}

/// `Z_4 x Z_8 x Z_p`, `p = 3 (mod 4)`:
/// `(a1,a2,a3, b1,b2,b3, g1,g2,g3,g4, d1,d2,d3,d4)`.
const CLASSES_8_3MOD4: &[ParamClass] = &[
    ParamClass {
        cond: ClassCond::Mod24(7),
        entries: &[
            c(3), c(-2), c(1),
            c(-1), c(3), c(1),
            c(1), c(2), c(3), c(-1),
            c(2), c(1), c(3), c(-1),
        ],
    },
    ParamClass {
        cond: ClassCond::Mod24(11),
        entries: &[
            c(-1), c(1), c(3),
            c(-1), c(3), c(2),
            c(1), c(4), c(2), c(3),
            c(1), c(2), c(3), c(-1),
        ],
    },
    ParamClass {
        cond: ClassCond::Mod24(19),
        entries: &[
            c(1), c(4), c(2),
            c(1), c(-3), c(3),
            c(3), c(2), c(6), c(4),
            c(2), c(1), c(3), c(-1),
        ],
    },
    ParamClass {
        cond: ClassCond::Mod24(23),
        entries: &[
            c(3), c(2), c(1),
            c(3), c(1), c(2),
            c(-1), c(2), c(1), c(3),
            c(4), c(1), c(2), c(3),
        ],
    },
];

/// `Z_4 x Z_8 x Z_p`, `p = 1 (mod 4)`, same layout.
const CLASSES_8_1MOD4: &[ParamClass] = &[
    ParamClass {
        cond: ClassCond::Mod8Is1,
        entries: &[
            X_PLUS_X2, X2, TWO_X2,
            X2, X, NX,
            c(1), X, X2, NX,
            X, NX, c(-1), c(1),
        ],
    },
    ParamClass {
        cond: ClassCond::Mod120(&[29, 101]),
        entries: &[
            c(1), c(6), c(3),
            c(-4), c(6), c(-2),
            c(1), c(3), c(2), c(5),
            c(2), c(1), c(-1), c(5),
        ],
    },
    ParamClass {
        cond: ClassCond::Mod120(&[53, 77]),
        entries: &[
            c(1), c(2), c(5),
            c(1), c(5), c(-5),
            c(2), c(5), c(3), c(1),
            c(1), c(-1), c(5), c(2),
        ],
    },
    ParamClass {
        cond: ClassCond::Mod24(13),
        entries: &[
            c(1), c(3), c(9),
            c(1), c(3), c(2),
            c(1), c(-2), c(4), c(2),
            c(2), c(-2), c(6), c(4),
        ],
    },
];

/// `Z_4 x Z_24 x Z_p`, `p = 3 (mod 4)`: `(a1,a2,a3, b1,b2,b3)`.
const CLASSES_24_3MOD4: &[ParamClass] = &[
    ParamClass {
        cond: ClassCond::Mod24(7),
        entries: &[c(2), c(1), c(3), c(1), c(4), c(2)],
    },
    ParamClass {
        cond: ClassCond::Mod24(11),
        entries: &[c(2), c(1), c(4), c(1), c(3), c(2)],
    },
    ParamClass {
        cond: ClassCond::Mod24(19),
        entries: &[c(2), c(1), c(3), c(1), c(3), c(4)],
    },
    ParamClass {
        cond: ClassCond::Mod24(23),
        entries: &[c(3), c(1), c(2), c(2), c(1), c(3)],
    },
];

/// `Z_4 x Z_24 x Z_p`, `p = 1 (mod 4)`: 26 entries
/// `(a1..a3, b1..b4, g1..g4, d1..d3, e1..e3, f1..f3, z1..z3, h1..h3)`
/// where `e` and `f` are the two epsilon rows in block order.
const CLASSES_24_1MOD4: &[ParamClass] = &[
    ParamClass {
        cond: ClassCond::Mod8Is1,
        entries: &[
            X2, X_PLUS_X2, TWO_X2,
            c(1), c(-1), X, NX,
            X2, X3, NX2, X,
            X, X_PLUS_X2, X2,
            X_PLUS_1, c(1), X,
            X, X2, c(1),
            NX, X2, X,
            X, X_PLUS_X2, X2,
        ],
    },
    ParamClass {
        cond: ClassCond::Mod120(&[29, 101]),
        entries: &[
            c(1), c(2), c(10),
            c(1), c(2), c(3), c(4),
            c(1), c(4), c(6), c(2),
            c(1), c(2), c(3),
            c(1), c(2), c(6),
            c(2), c(1), c(3),
            c(2), c(3), c(1),
            c(2), c(10), c(12),
        ],
    },
    ParamClass {
        cond: ClassCond::Mod120(&[53, 77]),
        entries: &[
            c(1), c(2), c(5),
            c(1), c(2), c(3), c(4),
            c(1), c(4), c(6), c(2),
            c(1), c(2), c(3),
            c(1), c(2), c(3),
            c(2), c(1), c(3),
            c(2), c(3), c(1),
            c(2), c(1), c(3),
        ],
    },
    ParamClass {
        cond: ClassCond::Mod120(&[13, 37]),
        entries: &[
            c(1), c(4), c(6),
            c(1), c(2), c(3), c(4),
            c(1), c(3), c(5), c(2),
            c(-4), c(2), c(-2),
            c(1), c(2), c(4),
            c(2), c(4), c(6),
            c(2), c(-2), c(3),
            c(6), c(8), c(-2),
        ],
    },
    ParamClass {
        cond: ClassCond::Mod120(&[61, 109]),
        entries: &[
            c(1), c(3), c(9),
            c(1), c(2), c(3), c(5),
            c(1), c(3), c(5), c(2),
            c(-4), c(2), c(-2),
            c(2), c(1), c(3),
            c(2), c(4), c(6),
            c(2), c(6), c(4),
            c(4), c(6), c(-2),
        ],
    },
];

fn classes_of(family: DirectFamily) -> &'static [ParamClass] {
    match family {
        DirectFamily::Eight3Mod4 => CLASSES_8_3MOD4,
        DirectFamily::Eight1Mod4 => CLASSES_8_1MOD4,
        DirectFamily::TwentyFour3Mod4 => CLASSES_24_3MOD4,
        DirectFamily::TwentyFour1Mod4 => CLASSES_24_1MOD4,
    }
}

/// Labels of all residue classes matching `p` within the family's domain
/// (used by the coverage test: must be exactly one per prime).
pub fn matching_classes(family: DirectFamily, p: u64) -> Vec<String> {
    classes_of(family)
        .iter()
        .filter(|cl| cl.cond.matches(p))
        .map(|cl| cl.cond.label())
        .collect()
}

/// The parameter assignment for `p`, with symbolic entries evaluated at
/// `xi(p)` and reduced mod `p`. Dispatch order follows the tables: the
/// `1 mod 8` class first, then mod-120 classes, then mod-24 classes.
pub fn lemma_params(family: DirectFamily, p: u64) -> Result<Vec<u64>> {
    if !family.in_domain(p) {
        return Err(Error::PrimeDomain {
            family: family.name(),
            p,
        });
    }
    let class = classes_of(family)
        .iter()
        .find(|cl| cl.cond.matches(p))
        .ok_or(Error::ClassCoverage {
            family: family.name(),
            p,
        })?;
    let needs_xi = class.entries.iter().any(|e| e.0[1..] != [0, 0, 0]);
    let xi = if needs_xi {
        ResidueTables::build(p)?.xi()
    } else {
        0
    };
    Ok(class.entries.iter().map(|e| e.eval(xi, p)).collect())
}

/// Symbolic last coordinate of a template element.
#[derive(Clone, Copy, Debug)]
pub enum ZpSym {
    /// Integer literal (reduced mod p at instantiation).
    Lit(i64),
    /// `sign * theta`.
    Theta(i64),
    /// Index into the family's evaluated parameter tuple.
    Par(u8),
}

use ZpSym::{Lit, Par, Theta};

/// One block template over `Z_4 x Z_{8|24} x Z_p`.
pub type TemplateBlock = &'static [(u8, u8, ZpSym)];

pub struct DirectTemplate {
    /// Explicit blocks.
    pub blocks: &'static [TemplateBlock],
    /// Indices of blocks to append as `(1,1,-1) . B_i`, in order.
    pub mirrored: &'static [usize],
}

const TEMPLATE_8_3MOD4: DirectTemplate = DirectTemplate {
    blocks: &[
        &[(0, 0, Lit(0)), (0, 5, Par(0)), (2, 1, Par(1)), (3, 1, Par(2))],
        &[(0, 0, Lit(0)), (0, 3, Par(3)), (1, 6, Par(4)), (2, 0, Par(5))],
        &[(0, 0, Lit(0)), (0, 4, Par(6)), (0, 6, Par(7)), (1, 3, Par(8)), (3, 2, Par(9))],
        &[(0, 0, Lit(0)), (0, 0, Par(10)), (0, 1, Par(11)), (1, 1, Par(12)), (2, 6, Par(13))],
    ],
    mirrored: &[],
};

const TEMPLATE_8_1MOD4: DirectTemplate = DirectTemplate {
    blocks: &[
        &[(0, 0, Lit(1)), (0, 0, Lit(-1)), (0, 1, Theta(1)), (0, 1, Theta(-1))],
        &[(0, 0, Lit(0)), (2, 0, Par(0)), (0, 4, Par(1)), (2, 4, Par(2))],
        &[(0, 0, Lit(0)), (0, 3, Par(3)), (1, 4, Par(4)), (3, 5, Par(5))],
        &[(0, 0, Lit(0)), (0, 6, Par(6)), (1, 0, Par(7)), (3, 3, Par(8)), (3, 6, Par(9))],
        &[(0, 0, Lit(0)), (0, 6, Par(10)), (1, 5, Par(11)), (2, 1, Par(12)), (3, 7, Par(13))],
    ],
    mirrored: &[2, 3, 4],
};

const TEMPLATE_24_3MOD4: DirectTemplate = DirectTemplate {
    blocks: &[
        &[(0, 0, Lit(0)), (0, 0, Par(0)), (0, 1, Par(1)), (2, 7, Par(2))],
        &[(0, 0, Lit(0)), (0, 6, Par(3)), (0, 12, Par(4)), (2, 0, Par(5))],
        &[(0, 0, Lit(0)), (1, 3, Lit(1)), (1, 11, Lit(2)), (1, 22, Lit(3)), (3, 14, Lit(4))],
        &[(0, 0, Lit(0)), (2, 4, Lit(1)), (2, 14, Lit(2)), (3, 5, Lit(3)), (3, 8, Lit(4))],
        &[(0, 0, Lit(0)), (0, 15, Lit(1)), (1, 14, Lit(2)), (1, 21, Lit(3)), (3, 19, Lit(4))],
        &[(0, 0, Lit(0)), (0, 2, Lit(1)), (1, 2, Lit(2)), (3, 17, Lit(3))],
        &[(0, 0, Lit(0)), (0, 4, Lit(1)), (1, 12, Lit(2)), (3, 11, Lit(3))],
    ],
    mirrored: &[2, 3, 4, 5, 6],
};

const TEMPLATE_24_1MOD4: DirectTemplate = DirectTemplate {
    blocks: &[
        &[(0, 0, Lit(1)), (0, 0, Lit(-1)), (0, 2, Theta(1)), (0, 2, Theta(-1))],
        &[(0, 0, Lit(0)), (0, 12, Par(0)), (2, 0, Par(1)), (2, 12, Par(2))],
        &[(0, 0, Lit(0)), (0, 1, Lit(1)), (1, 1, Lit(2)), (1, 5, Lit(3)), (1, 11, Lit(4))],
        &[(0, 0, Lit(0)), (0, 9, Lit(1)), (1, 17, Lit(2)), (2, 23, Lit(3)), (3, 15, Lit(4))],
        &[(0, 0, Lit(0)), (0, 5, Par(3)), (0, 21, Par(4)), (1, 19, Par(5)), (2, 16, Par(6))],
        &[(0, 0, Lit(0)), (1, 2, Par(7)), (1, 15, Par(8)), (3, 11, Par(9)), (3, 22, Par(10))],
        &[(0, 0, Lit(0)), (0, 3, Par(11)), (1, 22, Par(12)), (2, 21, Par(13))],
        &[(0, 0, Lit(0)), (0, 7, Par(14)), (1, 21, Par(15)), (3, 4, Par(16))],
        &[(0, 0, Lit(0)), (0, 5, Par(17)), (2, 18, Par(18)), (3, 17, Par(19))],
        &[(0, 0, Lit(0)), (1, 12, Par(20)), (3, 9, Par(21)), (3, 17, Par(22))],
        &[(0, 0, Lit(0)), (0, 7, Par(23)), (1, 3, Par(24)), (2, 16, Par(25))],
    ],
    mirrored: &[],
};

pub fn template_of(family: DirectFamily) -> &'static DirectTemplate {
    match family {
        DirectFamily::Eight3Mod4 => &TEMPLATE_8_3MOD4,
        DirectFamily::Eight1Mod4 => &TEMPLATE_8_1MOD4,
        DirectFamily::TwentyFour3Mod4 => &TEMPLATE_24_3MOD4,
        DirectFamily::TwentyFour1Mod4 => &TEMPLATE_24_1MOD4,
    }
}

// ---------------------------------------------------------------------------
// Catalog browsing (CLI surface)
// ---------------------------------------------------------------------------

pub enum CatalogItem {
    Packing(Packing),
    Sdf { lambda: u32, family: Vec<MultiBlock> },
}

pub fn catalog_ids() -> Vec<String> {
    let mut ids: Vec<String> = BASE_FAMILIES
        .iter()
        .map(|f| format!("base-{}x{}", f.u, f.v))
        .collect();
    ids.push("base-4x40".into());
    ids.push("optimal-4x24".into());
    ids.push("optimal-4x120".into());
    ids.push("sdf-4x8-l2".into());
    ids.push("sdf-4x8-l4".into());
    ids
}

pub fn catalog_entry(id: &str) -> Result<CatalogItem> {
    match id {
        "base-4x40" => return Ok(CatalogItem::Packing(base_4x40())),
        "optimal-4x24" => return Ok(CatalogItem::Packing(optimal_4x24())),
        "optimal-4x120" => return Ok(CatalogItem::Packing(optimal_4x120())),
        "sdf-4x8-l2" => {
            return Ok(CatalogItem::Sdf {
                lambda: 2,
                family: sdf_4x8(2)?,
            })
        }
        "sdf-4x8-l4" => {
            return Ok(CatalogItem::Sdf {
                lambda: 4,
                family: sdf_4x8(4)?,
            })
        }
        _ => {}
    }
    if let Some(rest) = id.strip_prefix("base-") {
        if let Some((u, v)) = rest.split_once('x') {
            if let (Ok(u), Ok(v)) = (u.parse(), v.parse()) {
                return Ok(CatalogItem::Packing(base_bdp(u, v)?));
            }
        }
    }
    Err(Error::Format(format!("unknown catalog id: {id}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Transcription checksum: block counts, per-size balance and the
    /// `(uv - gh)/32` identity for every embedded list.
    #[test]
    fn embedded_counts_and_sizes() {
        for f in BASE_FAMILIES {
            let p = base_bdp(f.u, f.v).unwrap();
            let expected = ((f.u * f.v - f.g * f.h) / 32) as usize;
            let counts = p.block_count_by_size();
            assert_eq!(counts[&4], expected, "({}, {})", f.u, f.v);
            assert_eq!(counts[&5], expected, "({}, {})", f.u, f.v);
        }
        let b = optimal_4x120();
        assert_eq!(b.blocks.len(), 28);
        assert_eq!(b.block_count_by_size()[&4], 14);
        assert_eq!(b.block_count_by_size()[&5], 14);

        let o = optimal_4x24();
        assert_eq!(o.blocks.len(), 4);

        let f = base_4x40();
        assert_eq!(f.blocks.len(), 8);
        assert_eq!(f.block_count_by_size()[&4], 4);

        assert_eq!(sdf_4x8(2).unwrap().len(), 4);
        assert_eq!(sdf_4x8(4).unwrap().len(), 8);
        assert!(sdf_4x8(3).is_err());
    }

    #[test]
    fn known_blocks_present() {
        let p = base_bdp(2, 36).unwrap();
        let g = &p.group;
        let first: Vec<_> = [(0, 0), (1, 14), (1, 15), (1, 26)]
            .iter()
            .map(|&(x, y)| g.elem(&[x, y]).unwrap())
            .collect();
        assert_eq!(p.blocks[0].elements(), &first[..]);

        assert!(base_bdp(18, 4).is_ok());
        assert!(matches!(
            base_bdp(3, 3),
            Err(Error::NotInCatalog { u: 3, v: 3 })
        ));

        let o = optimal_4x24();
        assert_eq!(o.blocks[0].len(), 5);
        let g = &o.group;
        for &(x, y) in &[(0, 0), (0, 1), (0, 3), (0, 7), (1, 0)] {
            assert!(o.blocks[0].elements().contains(&g.elem(&[x, y]).unwrap()));
        }

        let f = base_4x40();
        let g = &f.group;
        let wanted: Vec<_> = [(0, 0), (0, 7), (0, 21), (2, 8)]
            .iter()
            .map(|&(x, y)| g.elem(&[x, y]).unwrap())
            .collect();
        assert!(f
            .blocks
            .iter()
            .any(|b| b.elements() == &wanted[..]));
    }

    #[test]
    fn sdf_first_blocks() {
        let g = Group::product2(4, 8);
        let l2 = sdf_4x8(2).unwrap();
        let first: Vec<_> = [(0, 0), (0, 5), (2, 1), (3, 1)]
            .iter()
            .map(|&(x, y)| g.elem(&[x, y]).unwrap())
            .collect();
        let mut sorted = first.clone();
        sorted.sort();
        assert_eq!(l2[0].elements(), &sorted[..]);

        let l4 = sdf_4x8(4).unwrap();
        assert_eq!(l4[0].elements().len(), 4);
        // first multiset block repeats (0,0) and (0,1)
        assert_eq!(
            l4[0]
                .elements()
                .iter()
                .filter(|e| **e == g.identity())
                .count(),
            2
        );
    }

    #[test]
    fn param_examples() {
        let params = lemma_params(DirectFamily::Eight3Mod4, 7).unwrap();
        assert_eq!(params, vec![3, 5, 1, 6, 3, 1, 1, 2, 3, 6, 2, 1, 3, 6]);

        let params = lemma_params(DirectFamily::TwentyFour3Mod4, 11).unwrap();
        assert_eq!(params, vec![2, 1, 4, 1, 3, 2]);

        // p = 17 has xi = 3: the first three entries are (9, 12, 18 mod 17)
        let params = lemma_params(DirectFamily::TwentyFour1Mod4, 17).unwrap();
        assert_eq!(&params[..3], &[9, 12, 1]);
        assert_eq!(params.len(), 26);
    }

    #[test]
    fn param_domains() {
        assert!(lemma_params(DirectFamily::Eight3Mod4, 13).is_err());
        assert!(lemma_params(DirectFamily::Eight1Mod4, 5).is_err());
        assert!(lemma_params(DirectFamily::TwentyFour1Mod4, 5).is_err());
        assert!(lemma_params(DirectFamily::TwentyFour3Mod4, 9).is_err());
    }

    #[test]
    fn param_expr_eval() {
        // xi + xi^2 at xi = 3 mod 17 = 12
        assert_eq!(X_PLUS_X2.eval(3, 17), 12);
        assert_eq!(c(-1).eval(0, 7), 6);
        assert_eq!(X3.eval(2, 11), 8);
        assert_eq!(NX2.eval(3, 17), 8);
        assert_eq!(X_PLUS_1.eval(3, 17), 4);
    }

    #[test]
    fn class_dispatch_is_a_partition_small() {
        for p in (7u64..5000).filter(|&p| is_prime(p)) {
            for family in [
                DirectFamily::Eight3Mod4,
                DirectFamily::Eight1Mod4,
                DirectFamily::TwentyFour3Mod4,
                DirectFamily::TwentyFour1Mod4,
            ] {
                if family.in_domain(p) {
                    assert_eq!(
                        matching_classes(family, p).len(),
                        1,
                        "family {family:?} p {p}"
                    );
                }
            }
        }
    }

    #[test]
    fn catalog_ids_resolve() {
        for id in catalog_ids() {
            assert!(catalog_entry(&id).is_ok(), "{id}");
        }
        assert!(catalog_entry("base-3x3").is_err());
        assert!(catalog_entry("nonsense").is_err());
    }
}
