use std::fmt;

/// Index of a variable inside a [`crate::CausalDiagram`], in declaration order.
pub type VarId = usize;

/// Maximum number of variables a diagram may declare.
pub const MAX_VARS: usize = 128;

/// A set of variables stored as a 128-bit mask.
///
/// Iteration yields members in ascending [`VarId`] order, which is the
/// declaration order of the owning diagram.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarSet(u128);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    #[inline]
    pub fn singleton(v: VarId) -> Self {
        debug_assert!(v < MAX_VARS);
        VarSet(1u128 << v)
    }

    #[inline]
    pub fn from_bits(bits: u128) -> Self {
        VarSet(bits)
    }

    #[inline]
    pub fn bits(self) -> u128 {
        self.0
    }

    #[inline]
    pub fn contains(self, v: VarId) -> bool {
        v < MAX_VARS && self.0 & (1u128 << v) != 0
    }

    #[inline]
    pub fn insert(&mut self, v: VarId) -> bool {
        let had = self.contains(v);
        self.0 |= 1u128 << v;
        !had
    }

    #[inline]
    pub fn remove(&mut self, v: VarId) -> bool {
        let had = self.contains(v);
        self.0 &= !(1u128 << v);
        had
    }

    #[inline]
    pub fn with(self, v: VarId) -> Self {
        VarSet(self.0 | (1u128 << v))
    }

    #[inline]
    pub fn without(self, v: VarId) -> Self {
        VarSet(self.0 & !(1u128 << v))
    }

    #[inline]
    pub fn union(self, other: VarSet) -> Self {
        VarSet(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: VarSet) -> Self {
        VarSet(self.0 & other.0)
    }

    #[inline]
    pub fn difference(self, other: VarSet) -> Self {
        VarSet(self.0 & !other.0)
    }

    #[inline]
    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn intersects(self, other: VarSet) -> bool {
        self.0 & other.0 != 0
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Smallest member, if any.
    #[inline]
    pub fn first(self) -> Option<VarId> {
        if self.0 == 0 {
            None
        } else {
            Some(self.0.trailing_zeros() as usize)
        }
    }

    #[inline]
    pub fn iter(self) -> VarSetIter {
        VarSetIter(self.0)
    }

    pub fn to_vec(self) -> Vec<VarId> {
        self.iter().collect()
    }
}

pub struct VarSetIter(u128);

impl Iterator for VarSetIter {
    type Item = VarId;

    #[inline]
    fn next(&mut self) -> Option<VarId> {
        if self.0 == 0 {
            return None;
        }
        let v = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(v)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for VarSetIter {}

impl IntoIterator for VarSet {
    type Item = VarId;
    type IntoIter = VarSetIter;

    fn into_iter(self) -> VarSetIter {
        self.iter()
    }
}

impl FromIterator<VarId> for VarSet {
    fn from_iter<I: IntoIterator<Item = VarId>>(iter: I) -> Self {
        let mut s = VarSet::EMPTY;
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_ops() {
        let mut s = VarSet::EMPTY;
        assert!(s.insert(3));
        assert!(!s.insert(3));
        s.insert(127);
        s.insert(0);
        assert_eq!(s.to_vec(), vec![0, 3, 127]);
        assert_eq!(s.len(), 3);
        assert_eq!(s.first(), Some(0));
        assert!(s.remove(0));
        assert_eq!(s.first(), Some(3));
        assert!(VarSet::singleton(3).is_subset(s));
    }

    proptest! {
        #[test]
        fn set_algebra_matches_btreeset(a in proptest::collection::btree_set(0usize..128, 0..20),
                                        b in proptest::collection::btree_set(0usize..128, 0..20)) {
            let sa: VarSet = a.iter().copied().collect();
            let sb: VarSet = b.iter().copied().collect();
            let u: Vec<_> = a.union(&b).copied().collect();
            let i: Vec<_> = a.intersection(&b).copied().collect();
            let d: Vec<_> = a.difference(&b).copied().collect();
            prop_assert_eq!(sa.union(sb).to_vec(), u);
            prop_assert_eq!(sa.intersection(sb).to_vec(), i);
            prop_assert_eq!(sa.difference(sb).to_vec(), d);
            prop_assert_eq!(sa.is_subset(sb), a.is_subset(&b));
        }
    }
}
