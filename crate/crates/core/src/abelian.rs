//! Finite abelian groups presented as products of cyclic groups.
//!
//! A [`Group`] is an ordered list of moduli `(m_1, ..., m_r)` standing for
//! `Z_{m_1} x ... x Z_{m_r}`; an [`Elem`] is a reduced coordinate tuple.
//! Everything downstream (difference counting, difference matrices, the
//! construction engine) works with these values, so the module also provides
//! the mixed-radix ranking used for dense counting and the CRT relabelings
//! used to move coprime factors between coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite abelian group `Z_{m_1} x ... x Z_{m_r}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Group {
    moduli: Vec<u32>,
}

/// An element of a [`Group`]: one reduced residue per coordinate.
///
/// Elements are always stored reduced; negative literals from construction
/// data are reduced at creation time so multiset counting is exact.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Elem(Vec<u32>);

impl fmt::Debug for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Z{}", self.moduli.iter().map(|m| m.to_string()).collect::<Vec<_>>().join("xZ"))
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Debug for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","))
    }
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Elem {
    pub fn coords(&self) -> &[u32] {
        &self.0
    }

    pub(crate) fn from_coords(coords: Vec<u32>) -> Self {
        Elem(coords)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Inverse of `a` modulo `m` (requires `gcd(a, m) = 1`).
fn mod_inverse(a: u64, m: u64) -> u64 {
    let (mut t, mut new_t): (i128, i128) = (0, 1);
    let (mut r, mut new_r): (i128, i128) = (m as i128, (a % m) as i128);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    debug_assert_eq!(r, 1, "mod_inverse: not invertible");
    ((t % m as i128 + m as i128) % m as i128) as u64
}

/// The unique `x` in `[0, m*w)` with `x = a (mod m)` and `x = b (mod w)`,
/// for coprime `m`, `w`.
fn crt_pair(a: u64, m: u64, b: u64, w: u64) -> u64 {
    if w == 1 {
        return a % m;
    }
    if m == 1 {
        return b % w;
    }
    let inv = mod_inverse(m % w, w);
    let diff = ((b % w) + w - (a % w)) % w;
    (a % m) + m * ((diff * inv) % w)
}

impl Group {
    pub fn new(moduli: Vec<u32>) -> Result<Self> {
        if let Some(&m) = moduli.iter().find(|&&m| m == 0) {
            return Err(Error::BadModulus(m));
        }
        Ok(Group { moduli })
    }

    pub fn cyclic(m: u32) -> Self {
        Group::new(vec![m]).expect("modulus >= 1")
    }

    /// `Z_u x Z_v`.
    pub fn product2(u: u32, v: u32) -> Self {
        Group::new(vec![u, v]).expect("moduli >= 1")
    }

    pub fn moduli(&self) -> &[u32] {
        &self.moduli
    }

    pub fn arity(&self) -> usize {
        self.moduli.len()
    }

    pub fn order(&self) -> usize {
        self.moduli.iter().map(|&m| m as usize).product()
    }

    pub fn identity(&self) -> Elem {
        Elem(vec![0; self.arity()])
    }

    fn check_arity(&self, len: usize) -> Result<()> {
        if len != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                got: len,
            });
        }
        Ok(())
    }

    /// Builds an element from (possibly negative or unreduced) coordinates.
    pub fn elem(&self, coords: &[i64]) -> Result<Elem> {
        self.check_arity(coords.len())?;
        Ok(Elem(
            coords
                .iter()
                .zip(&self.moduli)
                .map(|(&c, &m)| (c.rem_euclid(m as i64)) as u32)
                .collect(),
        ))
    }

    pub fn contains(&self, e: &Elem) -> bool {
        e.0.len() == self.arity() && e.0.iter().zip(&self.moduli).all(|(&c, &m)| c < m)
    }

    pub fn validate(&self, e: &Elem) -> Result<()> {
        if self.contains(e) {
            Ok(())
        } else {
            Err(Error::ElementOutOfGroup {
                elem: format!("{e}"),
                group: format!("{self}"),
            })
        }
    }

    pub fn add(&self, x: &Elem, y: &Elem) -> Elem {
        Elem(
            x.0.iter()
                .zip(&y.0)
                .zip(&self.moduli)
                .map(|((&a, &b), &m)| ((a as u64 + b as u64) % m as u64) as u32)
                .collect(),
        )
    }

    /// Componentwise `x - y` reduced modulo the moduli.
    pub fn difference(&self, x: &Elem, y: &Elem) -> Result<Elem> {
        self.check_arity(x.0.len())?;
        self.check_arity(y.0.len())?;
        Ok(Elem(
            x.0.iter()
                .zip(&y.0)
                .zip(&self.moduli)
                .map(|((&a, &b), &m)| ((a as u64 + m as u64 - b as u64) % m as u64) as u32)
                .collect(),
        ))
    }

    pub fn neg(&self, x: &Elem) -> Elem {
        Elem(
            x.0.iter()
                .zip(&self.moduli)
                .map(|(&a, &m)| if a == 0 { 0 } else { m - a })
                .collect(),
        )
    }

    /// Coordinatewise scalar action `(s_1 x_1, ..., s_r x_r)`.
    pub fn scale(&self, s: &[i64], x: &Elem) -> Result<Elem> {
        self.check_arity(s.len())?;
        self.check_arity(x.0.len())?;
        Ok(Elem(
            s.iter()
                .zip(&x.0)
                .zip(&self.moduli)
                .map(|((&si, &xi), &m)| {
                    let s_red = si.rem_euclid(m as i64) as u64;
                    ((s_red * xi as u64) % m as u64) as u32
                })
                .collect(),
        ))
    }

    /// Mixed-radix rank of an element, in `[0, order)`.
    pub fn rank(&self, e: &Elem) -> usize {
        let mut r = 0usize;
        for (&c, &m) in e.0.iter().zip(&self.moduli) {
            r = r * m as usize + c as usize;
        }
        r
    }

    pub fn unrank(&self, mut r: usize) -> Elem {
        let mut coords = vec![0u32; self.arity()];
        for i in (0..self.arity()).rev() {
            let m = self.moduli[i] as usize;
            coords[i] = (r % m) as u32;
            r /= m;
        }
        Elem(coords)
    }

    /// All elements in rank order.
    pub fn elements(&self) -> impl Iterator<Item = Elem> + '_ {
        (0..self.order()).map(|r| self.unrank(r))
    }

    /// The identity together with all involutions: `{ x : x + x = 0 }`.
    ///
    /// Computed coordinatewise: `2x = 0 (mod m)` has solutions `{0}` for odd
    /// `m` and `{0, m/2}` for even `m`.
    pub fn involution_closure(&self) -> Vec<Elem> {
        let mut out = vec![self.identity()];
        for (i, &m) in self.moduli.iter().enumerate() {
            if m % 2 == 0 && m > 1 {
                let mut doubled = Vec::with_capacity(out.len() * 2);
                for e in &out {
                    doubled.push(e.clone());
                    let mut c = e.0.clone();
                    c[i] = m / 2;
                    doubled.push(Elem(c));
                }
                out = doubled;
            }
        }
        out.sort();
        out
    }

    pub fn involution_count(&self) -> usize {
        self.moduli
            .iter()
            .map(|&m| if m % 2 == 0 && m > 1 { 2 } else { 1 })
            .product()
    }
}

/// The injection `Z_{g_1} x ... x Z_{g_r} -> Z_{m_1} x ... x Z_{m_r}`,
/// `x_i -> (m_i / g_i) x_i`, defined when `g_i | m_i` for all `i`.
///
/// Its image is exactly the subgroup `(m_1/g_1)Z_{m_1} x ... x (m_r/g_r)Z_{m_r}`,
/// which is how difference leaves are realized as embedded groups.
pub fn scale_embed(inner: &Group, outer: &Group) -> Result<impl Fn(&Elem) -> Elem> {
    if inner.arity() != outer.arity() {
        return Err(Error::ArityMismatch {
            expected: outer.arity(),
            got: inner.arity(),
        });
    }
    let factors: Vec<u32> = inner
        .moduli()
        .iter()
        .zip(outer.moduli())
        .map(|(&g, &m)| {
            if g == 0 || m % g != 0 {
                Err(Error::EmbeddingMismatch {
                    inner: format!("{inner}"),
                    outer: format!("{outer}"),
                })
            } else {
                Ok(m / g)
            }
        })
        .collect::<Result<_>>()?;
    Ok(move |e: &Elem| Elem(e.0.iter().zip(&factors).map(|(&c, &f)| c * f).collect()))
}

/// One primitive relabeling step; see [`Relabeling`].
#[derive(Clone, Debug, PartialEq, Eq)]
enum Step {
    /// Merge coordinate `j` (coprime modulus) into coordinate `i` by CRT;
    /// coordinate `j` is removed.
    Merge { i: usize, j: usize },
    /// Split coordinate `i` of modulus `r*w` (`gcd(r, w) = 1`) into modulus
    /// `r` at `i` and a new coordinate of modulus `w` inserted at `j`.
    Unmerge { i: usize, j: usize, w: u32 },
    /// Move the factor `w` of coordinate `from` onto coordinate `to`
    /// (requires `gcd(w, m_from/w) = gcd(w, m_to) = 1`).
    Move { from: usize, to: usize, w: u32 },
    /// Permute coordinates: output coordinate `k` takes input coordinate
    /// `perm[k]`.
    Permute(Vec<usize>),
}

/// A group isomorphism given as a chain of CRT merges/splits, factor moves
/// and coordinate permutations, applicable to elements in both directions.
#[derive(Clone, Debug)]
pub struct Relabeling {
    src: Group,
    dst: Group,
    steps: Vec<Step>,
}

fn step_apply(g: &Group, step: &Step) -> (Group, Box<dyn Fn(&Elem) -> Elem>) {
    match step {
        Step::Merge { i, j } => {
            let (i, j) = (*i, *j);
            let mi = g.moduli()[i] as u64;
            let mj = g.moduli()[j] as u64;
            let mut moduli = g.moduli().to_vec();
            moduli[i] = (mi * mj) as u32;
            moduli.remove(j);
            let out = Group::new(moduli).expect("valid moduli");
            let f = move |e: &Elem| {
                let merged = crt_pair(e.0[i] as u64, mi, e.0[j] as u64, mj) as u32;
                let mut coords = e.0.clone();
                coords[i] = merged;
                coords.remove(j);
                Elem(coords)
            };
            (out, Box::new(f))
        }
        Step::Unmerge { i, j, w } => {
            let (i, j, w) = (*i, *j, *w as u64);
            let m = g.moduli()[i] as u64;
            let r = m / w;
            let mut moduli = g.moduli().to_vec();
            moduli[i] = r as u32;
            moduli.insert(j, w as u32);
            let out = Group::new(moduli).expect("valid moduli");
            let f = move |e: &Elem| {
                let x = e.0[i] as u64;
                let mut coords = e.0.clone();
                coords[i] = (x % r) as u32;
                coords.insert(j, (x % w) as u32);
                Elem(coords)
            };
            (out, Box::new(f))
        }
        Step::Move { from, to, w } => {
            let (from, to, w) = (*from, *to, *w as u64);
            let m_from = g.moduli()[from] as u64;
            let m_to = g.moduli()[to] as u64;
            let r = m_from / w;
            let mut moduli = g.moduli().to_vec();
            moduli[from] = r as u32;
            moduli[to] = (m_to * w) as u32;
            let out = Group::new(moduli).expect("valid moduli");
            let f = move |e: &Elem| {
                let x = e.0[from] as u64;
                let mut coords = e.0.clone();
                coords[from] = (x % r) as u32;
                coords[to] = crt_pair(e.0[to] as u64, m_to, x % w, w) as u32;
                Elem(coords)
            };
            (out, Box::new(f))
        }
        Step::Permute(perm) => {
            let perm = perm.clone();
            let moduli = perm.iter().map(|&k| g.moduli()[k]).collect();
            let out = Group::new(moduli).expect("valid moduli");
            let f = move |e: &Elem| Elem(perm.iter().map(|&k| e.0[k]).collect());
            (out, Box::new(f))
        }
    }
}

fn step_inverse(g_before: &Group, step: &Step) -> Step {
    match step {
        Step::Merge { i, j } => Step::Unmerge {
            i: *i,
            j: *j,
            w: g_before.moduli()[*j],
        },
        Step::Unmerge { i, j, w: _ } => Step::Merge { i: *i, j: *j },
        Step::Move { from, to, w } => Step::Move {
            from: *to,
            to: *from,
            w: *w,
        },
        Step::Permute(perm) => {
            let mut inv = vec![0usize; perm.len()];
            for (k, &p) in perm.iter().enumerate() {
                inv[p] = k;
            }
            Step::Permute(inv)
        }
    }
}

impl Relabeling {
    pub fn identity(g: &Group) -> Self {
        Relabeling {
            src: g.clone(),
            dst: g.clone(),
            steps: Vec::new(),
        }
    }

    /// CRT merge of coordinates `i` and `j` (`i < j`, coprime moduli) into a
    /// single coordinate `m_i * m_j` at position `i`.
    pub fn merge(g: &Group, i: usize, j: usize) -> Result<Self> {
        if i >= g.arity() || j >= g.arity() || i == j {
            return Err(Error::ArityMismatch {
                expected: g.arity(),
                got: i.max(j) + 1,
            });
        }
        let (mi, mj) = (g.moduli()[i], g.moduli()[j]);
        if gcd(mi as u64, mj as u64) != 1 {
            return Err(Error::NonCoprimeRelabel { i, j, mi, mj });
        }
        Ok(Relabeling::from_steps(g, vec![Step::Merge { i, j }]))
    }

    /// Split the factor `w` out of coordinate `i`, inserting it as a new
    /// coordinate at position `j`.
    pub fn unmerge(g: &Group, i: usize, j: usize, w: u32) -> Result<Self> {
        let m = g.moduli()[i];
        if w == 0 || m % w != 0 || gcd(w as u64, (m / w) as u64) != 1 {
            return Err(Error::BadFactorMove { w, m });
        }
        Ok(Relabeling::from_steps(g, vec![Step::Unmerge { i, j, w }]))
    }

    /// Move the factor `w` of coordinate `from` onto coordinate `to`.
    pub fn move_factor(g: &Group, from: usize, to: usize, w: u32) -> Result<Self> {
        let m_from = g.moduli()[from];
        let m_to = g.moduli()[to];
        if w == 0 || m_from % w != 0 || gcd(w as u64, (m_from / w) as u64) != 1 {
            return Err(Error::BadFactorMove { w, m: m_from });
        }
        if gcd(w as u64, m_to as u64) != 1 {
            return Err(Error::BadFactorMove { w, m: m_to });
        }
        if w == 1 {
            return Ok(Relabeling::identity(g));
        }
        Ok(Relabeling::from_steps(g, vec![Step::Move { from, to, w }]))
    }

    /// Reorder coordinates: output coordinate `k` takes input coordinate
    /// `perm[k]`.
    pub fn permute(g: &Group, perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; g.arity()];
        if perm.len() != g.arity() {
            return Err(Error::ArityMismatch {
                expected: g.arity(),
                got: perm.len(),
            });
        }
        for &p in &perm {
            if p >= g.arity() || seen[p] {
                return Err(Error::Format("invalid coordinate permutation".into()));
            }
            seen[p] = true;
        }
        Ok(Relabeling::from_steps(g, vec![Step::Permute(perm)]))
    }

    fn from_steps(g: &Group, steps: Vec<Step>) -> Self {
        let mut cur = g.clone();
        for s in &steps {
            let (next, _) = step_apply(&cur, s);
            cur = next;
        }
        Relabeling {
            src: g.clone(),
            dst: cur,
            steps,
        }
    }

    pub fn src(&self) -> &Group {
        &self.src
    }

    pub fn dst(&self) -> &Group {
        &self.dst
    }

    /// Compose with another relabeling (whose source must equal `self.dst`).
    pub fn then(mut self, other: Relabeling) -> Result<Self> {
        if other.src != self.dst {
            return Err(Error::Format(format!(
                "relabeling mismatch: {} then {}",
                self.dst, other.src
            )));
        }
        self.steps.extend(other.steps);
        self.dst = other.dst;
        Ok(self)
    }

    pub fn map(&self, e: &Elem) -> Elem {
        let mut cur_group = self.src.clone();
        let mut cur = e.clone();
        for s in &self.steps {
            let (next, f) = step_apply(&cur_group, s);
            cur = f(&cur);
            cur_group = next;
        }
        cur
    }

    pub fn inverse(&self) -> Relabeling {
        let mut groups = vec![self.src.clone()];
        for s in &self.steps {
            let (next, _) = step_apply(groups.last().unwrap(), s);
            groups.push(next);
        }
        let inv_steps: Vec<Step> = self
            .steps
            .iter()
            .enumerate()
            .rev()
            .map(|(idx, s)| step_inverse(&groups[idx], s))
            .collect();
        Relabeling {
            src: self.dst.clone(),
            dst: self.src.clone(),
            steps: inv_steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn difference_basics() {
        let g = Group::product2(2, 4);
        let a = g.elem(&[0, 1]).unwrap();
        let b = g.elem(&[0, 0]).unwrap();
        assert_eq!(g.difference(&a, &b).unwrap(), g.elem(&[0, 1]).unwrap());
        assert_eq!(g.difference(&b, &a).unwrap(), g.elem(&[0, 3]).unwrap());

        let g = Group::new(vec![4, 8, 7]).unwrap();
        let x = g.elem(&[0, 5, 3]).unwrap();
        let y = g.elem(&[2, 1, 5]).unwrap();
        assert_eq!(g.difference(&x, &y).unwrap(), g.elem(&[2, 4, 5]).unwrap());
    }

    #[test]
    fn difference_arity_mismatch() {
        let g = Group::product2(2, 4);
        let a = g.elem(&[0, 1]).unwrap();
        let h = Group::cyclic(5);
        let b = h.elem(&[3]).unwrap();
        assert!(matches!(
            g.difference(&a, &b),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn scale_action() {
        let g = Group::new(vec![4, 8, 7]).unwrap();
        let x = g.elem(&[3, 1, 3]).unwrap();
        assert_eq!(g.scale(&[1, 1, 2], &x).unwrap(), g.elem(&[3, 1, 6]).unwrap());

        let g = Group::new(vec![4, 24, 7]).unwrap();
        let x = g.elem(&[1, 3, 1]).unwrap();
        assert_eq!(g.scale(&[1, 1, -1], &x).unwrap(), g.elem(&[1, 3, 6]).unwrap());

        let id = g.scale(&[1, 1, 1], &x).unwrap();
        assert_eq!(id, x);
    }

    #[test]
    fn involutions() {
        let g = Group::product2(4, 8);
        let inv = g.involution_closure();
        assert_eq!(inv.len(), 4);
        for e in &inv {
            assert_eq!(g.add(e, e), g.identity());
        }
        assert!(inv.contains(&g.elem(&[2, 4]).unwrap()));

        assert_eq!(Group::cyclic(7).involution_closure().len(), 1);

        let g = Group::product2(2, 6);
        let inv = g.involution_closure();
        assert_eq!(inv.len(), 4);
        assert!(inv.contains(&g.elem(&[1, 3]).unwrap()));
        assert_eq!(g.involution_count(), 4);
    }

    #[test]
    fn involution_closure_closed_under_negation() {
        for moduli in [vec![4, 8], vec![2, 6], vec![12, 24], vec![7], vec![1, 9]] {
            let g = Group::new(moduli).unwrap();
            let inv = g.involution_closure();
            assert!(inv.contains(&g.identity()));
            for e in &inv {
                assert!(inv.contains(&g.neg(e)));
            }
            assert_eq!(inv.len(), g.involution_count());
        }
    }

    #[test]
    fn crt_merge_examples() {
        let g = Group::product2(8, 5);
        let r = Relabeling::merge(&g, 0, 1).unwrap();
        assert_eq!(r.dst(), &Group::cyclic(40));
        assert_eq!(r.map(&g.elem(&[7, 3]).unwrap()), Group::cyclic(40).elem(&[23]).unwrap());
        assert_eq!(r.map(&g.identity()), Group::cyclic(40).identity());

        let g = Group::product2(3, 8);
        let r = Relabeling::merge(&g, 0, 1).unwrap();
        assert_eq!(r.map(&g.elem(&[1, 5]).unwrap()), Group::cyclic(24).elem(&[13]).unwrap());
    }

    #[test]
    fn crt_merge_rejects_non_coprime() {
        let g = Group::product2(4, 8);
        assert!(matches!(
            Relabeling::merge(&g, 0, 1),
            Err(Error::NonCoprimeRelabel { .. })
        ));
    }

    #[test]
    fn move_factor_roundtrip() {
        // Z_4 x Z_120 -> Z_20 x Z_24 by moving the factor 5.
        let g = Group::product2(4, 120);
        let r = Relabeling::move_factor(&g, 1, 0, 5).unwrap();
        assert_eq!(r.dst(), &Group::product2(20, 24));
        let inv = r.inverse();
        for e in g.elements() {
            assert_eq!(inv.map(&r.map(&e)), e);
        }
    }

    #[test]
    fn scale_embed_examples() {
        let inner = Group::product2(4, 8);
        let outer = Group::product2(4, 72);
        let f = scale_embed(&inner, &outer).unwrap();
        assert_eq!(f(&inner.elem(&[1, 3]).unwrap()), outer.elem(&[1, 27]).unwrap());

        let inner = Group::product2(2, 4);
        let outer = Group::product2(2, 36);
        let f = scale_embed(&inner, &outer).unwrap();
        assert_eq!(f(&inner.elem(&[0, 1]).unwrap()), outer.elem(&[0, 9]).unwrap());

        let same = scale_embed(&inner, &inner).unwrap();
        for e in inner.elements() {
            assert_eq!(same(&e), e);
        }
    }

    #[test]
    fn scale_embed_differences_stay_in_subgroup() {
        let inner = Group::product2(4, 8);
        let outer = Group::product2(4, 72);
        let f = scale_embed(&inner, &outer).unwrap();
        for a in inner.elements() {
            for b in inner.elements() {
                let d = outer.difference(&f(&a), &f(&b)).unwrap();
                assert_eq!(d.coords()[1] % 9, 0);
            }
        }
    }

    proptest! {
        #[test]
        fn difference_roundtrip(m1 in 1u32..12, m2 in 1u32..12, m3 in 1u32..12,
                                a in 0usize..1000, b in 0usize..1000) {
            let g = Group::new(vec![m1, m2, m3]).unwrap();
            let x = g.unrank(a % g.order());
            let y = g.unrank(b % g.order());
            let d = g.difference(&x, &y).unwrap();
            prop_assert_eq!(g.add(&d, &y), x);
        }

        #[test]
        fn rank_unrank_roundtrip(m1 in 1u32..20, m2 in 1u32..20, r in 0usize..10_000) {
            let g = Group::product2(m1, m2);
            let r = r % g.order();
            prop_assert_eq!(g.rank(&g.unrank(r)), r);
        }

        #[test]
        fn merge_roundtrip(ra in 0usize..10_000) {
            // coprime pair (16, 9)
            let g = Group::product2(16, 9);
            let rel = Relabeling::merge(&g, 0, 1).unwrap();
            let inv = rel.inverse();
            let e = g.unrank(ra % g.order());
            prop_assert_eq!(inv.map(&rel.map(&e)), e.clone());
            // the merged value satisfies both congruences
            let merged = rel.map(&e);
            prop_assert_eq!(merged.coords()[0] % 16, e.coords()[0]);
            prop_assert_eq!(merged.coords()[0] % 9, e.coords()[1]);
        }
    }

    #[test]
    fn merge_roundtrip_exhaustive_medium() {
        // groups up to order 10^4: a couple of representative shapes
        for (m1, m2) in [(8u32, 5u32), (16, 625), (99, 100)] {
            let g = Group::product2(m1, m2);
            let rel = Relabeling::merge(&g, 0, 1).unwrap();
            let inv = rel.inverse();
            for e in g.elements() {
                assert_eq!(inv.map(&rel.map(&e)), e);
            }
        }
    }
}
