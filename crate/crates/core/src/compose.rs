//! The recursive construction rules: filling a regular packing's leave with
//! a smaller packing, and inflating a regular packing by a difference
//! matrix.
//!
//! Both rules re-certify their ingredients and (unless asked not to) their
//! output, so a composition chain never propagates trust.

use crate::abelian::{scale_embed, Group};
use crate::diffmat::{verify_dm, DiffMatrix};
use crate::error::{Error, Result};
use crate::packing::{verify_optimal_bdp, verify_regular_shape, Block, Certificate, Packing};

fn require_ok(cert: &Certificate, rule: &str, what: &str) -> Result<()> {
    if cert.ok {
        Ok(())
    } else {
        Err(Error::Certification {
            rule: rule.into(),
            detail: format!("{what}: {:?}", cert.failure),
        })
    }
}

/// Certifies a packing against its own claim: leave shape when one is
/// claimed, optimality otherwise.
pub fn certify_claim(p: &Packing) -> Result<Certificate> {
    match &p.claimed_leave {
        Some(shape) => verify_regular_shape(p, shape),
        None => verify_optimal_bdp(p),
    }
}

/// Filling: the union of a `(u x v, g x h)`-regular packing with a packing
/// over `Z_g x Z_h` embedded into the leave subgroup. The result is optimal
/// when the inner packing is optimal, and `(s, t)`-regular when the inner
/// packing is `(s, t)`-regular.
pub fn fill(outer: &Packing, inner: &Packing, recertify: bool) -> Result<Packing> {
    let shape = outer
        .claimed_leave
        .clone()
        .ok_or_else(|| Error::Certification {
            rule: "fill".into(),
            detail: "outer packing carries no leave claim".into(),
        })?;
    let leave_group = Group::new(shape.clone())?;
    if inner.group != leave_group {
        return Err(Error::EmbeddingMismatch {
            inner: format!("{}", inner.group),
            outer: format!("leave {leave_group} of {}", outer.group),
        });
    }
    if recertify {
        require_ok(&verify_regular_shape(outer, &shape)?, "fill", "outer")?;
        require_ok(&certify_claim(inner)?, "fill", "inner")?;
    }
    let embed = scale_embed(&inner.group, &outer.group)?;
    let mut blocks = outer.blocks.clone();
    for b in &inner.blocks {
        blocks.push(Block::new(
            &outer.group,
            b.elements().iter().map(&embed).collect(),
        )?);
    }
    let mut sizes = outer.sizes.clone();
    for &k in &inner.sizes {
        if !sizes.contains(&k) {
            sizes.push(k);
        }
    }
    let mut out = Packing::new(outer.group.clone(), sizes, blocks)?;
    out.claimed_leave = inner.claimed_leave.clone();
    if recertify {
        require_ok(&certify_claim(&out)?, "fill", "output")?;
    }
    Ok(out)
}

/// Inflation: a `(u x v, g x h)`-regular packing times a
/// `(Z_m x Z_n, k_max; 1)` difference matrix gives an
/// `(mu x nv, mg x nh)`-regular packing. Block elements are taken in
/// lexicographic order and element `i` rides difference-matrix row `i`; for
/// each matrix column `(a, b)` the block maps to
/// `{ (x_i + u a_i, y_i + v b_i) }`.
pub fn inflate(base: &Packing, dm: &DiffMatrix, recertify: bool) -> Result<Packing> {
    let shape = base
        .claimed_leave
        .clone()
        .ok_or_else(|| Error::Certification {
            rule: "inflate".into(),
            detail: "base packing carries no leave claim".into(),
        })?;
    if base.group.arity() != 2 || dm.group.arity() != 2 {
        return Err(Error::ArityMismatch {
            expected: 2,
            got: base.group.arity().max(dm.group.arity()),
        });
    }
    let k_max = base.sizes.iter().copied().max().unwrap_or(0);
    if dm.k < k_max {
        return Err(Error::DmRowDeficit {
            need: k_max,
            have: dm.k,
        });
    }
    if recertify {
        require_ok(&verify_regular_shape(base, &shape)?, "inflate", "base")?;
        let cert = verify_dm(dm);
        require_ok(&cert, "inflate", "difference matrix")?;
    }
    let (u, v) = (base.group.moduli()[0], base.group.moduli()[1]);
    let (m, n) = (dm.group.moduli()[0], dm.group.moduli()[1]);
    let out_group = Group::product2(m * u, n * v);
    let mut blocks = Vec::with_capacity(base.blocks.len() * dm.group.order());
    for block in &base.blocks {
        let elems = block.elements(); // already sorted lexicographically
        for l in 0..dm.group.order() {
            let lifted = elems
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let shift = dm.rows[i][l].coords();
                    out_group.elem(&[
                        e.coords()[0] as i64 + (u * shift[0]) as i64,
                        e.coords()[1] as i64 + (v * shift[1]) as i64,
                    ])
                })
                .collect::<Result<_>>()?;
            blocks.push(Block::new(&out_group, lifted)?);
        }
    }
    let out = Packing::new(out_group, base.sizes.clone(), blocks)?
        .with_claimed_leave(vec![m * shape[0], n * shape[1]]);
    if recertify {
        require_ok(&certify_claim(&out)?, "inflate", "output")?;
    }
    Ok(out)
}

/// Which coordinate a single-axis inflation stretches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Axis {
    U,
    V,
}

/// Single-axis inflation by a cyclic `(m, k_max; 1)` matrix: equivalent to
/// [`inflate`] with the product of `cdm` and the one-column trivial matrix.
pub fn inflate_axis(base: &Packing, axis: Axis, cdm: &DiffMatrix, recertify: bool) -> Result<Packing> {
    if cdm.group.arity() != 1 {
        return Err(Error::ArityMismatch {
            expected: 1,
            got: cdm.group.arity(),
        });
    }
    let m = cdm.group.moduli()[0];
    let widened = match axis {
        Axis::U => Group::product2(m, 1),
        Axis::V => Group::product2(1, m),
    };
    let rows = cdm
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|e| {
                    let c = e.coords()[0] as i64;
                    match axis {
                        Axis::U => widened.elem(&[c, 0]),
                        Axis::V => widened.elem(&[0, c]),
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let dm2 = DiffMatrix::new(widened, rows)?;
    inflate(base, &dm2, recertify)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::diffmat::cdm_multiplication;
    use crate::packing::{delta_packing, optimality_bound};

    #[test]
    fn fill_base_with_empty_optimal() {
        // 16-block (4 x 72, 4 x 8) packing + empty optimal over Z_4 x Z_8
        let outer = catalog::base_bdp(4, 72).unwrap();
        let inner = Packing::empty(&Group::product2(4, 8), vec![4, 5]);
        let mut inner = inner;
        inner.claimed_leave = None; // claim optimality: bound over Z_4 x Z_8 is 0
        let out = fill(&outer, &inner, true).unwrap();
        assert_eq!(out.blocks.len(), 16);
        let cert = verify_optimal_bdp(&out).unwrap();
        assert!(cert.ok);
        assert_eq!(cert.bound, Some(8));
    }

    #[test]
    fn fill_with_whole_leave_empty_keeps_outer() {
        let outer = catalog::base_bdp(12, 24).unwrap();
        let inner = Packing::empty(&Group::product2(4, 8), vec![4, 5]);
        let out = fill(&outer, &inner, true).unwrap();
        assert_eq!(out.blocks.len(), outer.blocks.len());
        assert_eq!(out.claimed_leave, Some(vec![4, 8]));
        assert!(certify_claim(&out).unwrap().ok);
    }

    #[test]
    fn fill_optimal_4x24_into_direct_family() {
        // (4 x 168, 4 x 24) from the direct construction at p = 7, filled
        // with the optimal 4 x 24 packing: optimal with 36 + 4 blocks
        let base = crate::direct::bdp_4x24p(7).unwrap();
        let merged = crate::direct::merge_to_two_coords(&base).unwrap();
        let inner = catalog::optimal_4x24();
        let out = fill(&merged, &inner, true).unwrap();
        assert_eq!(out.blocks.len(), 40);
        let cert = verify_optimal_bdp(&out).unwrap();
        assert!(cert.ok);
        assert_eq!(cert.bound, Some(20));
    }

    #[test]
    fn fill_rejects_mismatched_inner_group() {
        let outer = catalog::base_bdp(4, 72).unwrap();
        let inner = Packing::empty(&Group::product2(2, 4), vec![4, 5]);
        assert!(fill(&outer, &inner, true).is_err());
    }

    #[test]
    fn inflate_empty_base_gives_empty() {
        let base = Packing::empty(&Group::product2(4, 8), vec![4, 5]);
        let dm = cdm_multiplication(5, 5).unwrap();
        let out = inflate_axis(&base, Axis::V, &dm, true).unwrap();
        assert!(out.blocks.is_empty());
        assert_eq!(out.group, Group::product2(4, 40));
        assert_eq!(out.claimed_leave, Some(vec![4, 40]));
    }

    #[test]
    fn inflate_by_product_matrix() {
        // (2 x 36, 2 x 4) base, (Z_2 x Z_6, 5; 1) matrix: 48-block (4 x 216, 4 x 24)
        let base = catalog::base_bdp(2, 36).unwrap();
        let g26 = Group::product2(2, 6);
        let dm = match crate::diffmat::dm_search(&g26, 5, crate::diffmat::DEFAULT_BUDGET, crate::diffmat::DEFAULT_SEED).unwrap() {
            crate::diffmat::SearchOutcome::Found(d) => d,
            other => panic!("{other:?}"),
        };
        let out = inflate(&base, &dm, true).unwrap();
        assert_eq!(out.group, Group::product2(4, 216));
        assert_eq!(out.blocks.len(), 48);
        assert_eq!(out.claimed_leave, Some(vec![4, 24]));
        let counts = out.block_count_by_size();
        assert_eq!(counts[&4], 24);
        assert_eq!(counts[&5], 24);
    }

    #[test]
    fn inflate_axis_base_4x40_by_15() {
        // (4 x 40, 4 x 8) base and a (15, 5; 1) matrix on the v side:
        // a (4 x 600, 4 x 120) packing
        let base = catalog::base_4x40();
        let provider = crate::diffmat::DmProvider::new(
            crate::diffmat::DmRegistry::empty(),
            crate::diffmat::DEFAULT_BUDGET,
            crate::diffmat::DEFAULT_SEED,
        );
        let cdm15 = provider.get(&Group::cyclic(15), 5).unwrap();
        let out = inflate_axis(&base, Axis::V, &cdm15, true).unwrap();
        assert_eq!(out.group, Group::product2(4, 600));
        assert_eq!(out.claimed_leave, Some(vec![4, 120]));
        assert_eq!(out.blocks.len(), 8 * 15);
    }

    #[test]
    fn inflate_axis_trivial_cdm_is_identity() {
        let base = catalog::base_bdp(2, 36).unwrap();
        let triv = cdm_multiplication(1, 5).unwrap();
        let out = inflate_axis(&base, Axis::V, &triv, true).unwrap();
        assert_eq!(out.group, base.group);
        assert_eq!(out.blocks.len(), base.blocks.len());
    }

    /// Every lift of one covered base difference is covered exactly once
    /// after inflation.
    #[test]
    fn inflation_lifts_each_difference_once() {
        let base = catalog::base_bdp(2, 36).unwrap();
        let dm = cdm_multiplication(5, 5).unwrap();
        let out = inflate_axis(&base, Axis::V, &dm, true).unwrap();
        // base difference (1, 14) - (0, 0) = (1, 14) is covered once;
        // its 5 lifts (1, 14 + 36 t) must each be covered once
        let counts = delta_packing(&out).unwrap();
        for t in 0..5i64 {
            let e = out.group.elem(&[1, 14 + 36 * t]).unwrap();
            assert_eq!(counts.count(&e), 1, "lift t = {t}");
        }
    }

    #[test]
    fn fill_count_identity_and_balance() {
        let outer = catalog::base_bdp(4, 72).unwrap();
        let inner = catalog::base_bdp(4, 72).ok(); // wrong group on purpose
        assert!(inner.is_some());
        // per-size balance is preserved through a real fill
        let inner = Packing::empty(&Group::product2(4, 8), vec![4, 5]);
        let out = fill(&outer, &inner, true).unwrap();
        let (counts, balanced) = crate::packing::verify_balanced(&out);
        assert!(balanced);
        assert_eq!(counts[&4] + counts[&5], outer.blocks.len());
        let bound = optimality_bound(&out.group, &out.sizes).unwrap();
        assert_eq!(bound, 8);
    }
}
