//! Per-cloudlet proactive result cache.
//!
//! Results are admitted as computations complete. While the store has room
//! every cacheable result is kept; once full, a newcomer replaces the least
//! popular resident (by the cloudlet's popularity vector) if that resident is
//! strictly less popular than the newcomer.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmitOutcome {
    Inserted,
    Replaced { victim: usize },
    Rejected,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheStore {
    capacity: usize,
    entries: BTreeSet<usize>,
    /// Popularity index from the bound vector, 0 = most popular.
    rank_of: HashMap<usize, usize>,
    cacheable: BTreeSet<usize>,
}

impl CacheStore {
    /// An empty, unbound cache over the given cacheable task set.
    pub fn new(capacity: usize, cacheable: impl IntoIterator<Item = usize>) -> Self {
        Self {
            capacity,
            entries: BTreeSet::new(),
            rank_of: HashMap::new(),
            cacheable: cacheable.into_iter().collect(),
        }
    }

    /// An empty cache bound to `xi`, whose entries define the cacheable set.
    pub fn with_popularity(capacity: usize, xi: &[usize]) -> Result<Self> {
        let mut c = Self::new(capacity, xi.iter().copied());
        c.rebind_popularity(xi)?;
        Ok(c)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().copied()
    }

    pub fn rank(&self, task_id: usize) -> Option<usize> {
        self.rank_of.get(&task_id).copied()
    }

    pub fn is_cacheable(&self, task_id: usize) -> bool {
        self.cacheable.contains(&task_id)
    }

    pub fn lookup(&self, task_id: usize) -> bool {
        self.entries.contains(&task_id)
    }

    pub fn admit(&mut self, task_id: usize) -> Result<AdmitOutcome> {
        if !self.cacheable.contains(&task_id) {
            return Ok(AdmitOutcome::Rejected);
        }
        if self.entries.contains(&task_id) {
            return Ok(AdmitOutcome::Duplicate);
        }
        let rank = self.rank(task_id).ok_or(Error::UnrankedTask(task_id))?;
        if self.entries.len() < self.capacity {
            self.entries.insert(task_id);
            return Ok(AdmitOutcome::Inserted);
        }
        let victim = self
            .entries
            .iter()
            .copied()
            .max_by_key(|t| self.rank_of[t])
            .filter(|t| self.rank_of[t] > rank);
        match victim {
            Some(victim) => {
                self.entries.remove(&victim);
                self.entries.insert(task_id);
                Ok(AdmitOutcome::Replaced { victim })
            }
            None => Ok(AdmitOutcome::Rejected),
        }
    }

    /// Installs a new popularity vector; cached entries are kept.
    pub fn rebind_popularity(&mut self, xi: &[usize]) -> Result<()> {
        let seen: BTreeSet<usize> = xi.iter().copied().collect();
        if seen.len() != xi.len() || seen != self.cacheable {
            return Err(Error::NotAPermutation);
        }
        self.rank_of = xi.iter().enumerate().map(|(r, &t)| (t, r)).collect();
        Ok(())
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Tasks 10, 11, 12 ranked 1st, 2nd, 3rd.
    fn store(capacity: usize) -> CacheStore {
        CacheStore::with_popularity(capacity, &[10, 11, 12]).unwrap()
    }

    #[test]
    fn empty_cache_misses() {
        let c = store(2);
        assert!((0..20).all(|t| !c.lookup(t)));
    }

    #[test]
    fn free_space_inserts_in_any_order() {
        let mut c = store(2);
        assert_eq!(c.admit(12).unwrap(), AdmitOutcome::Inserted);
        assert_eq!(c.admit(10).unwrap(), AdmitOutcome::Inserted);
        assert!(c.lookup(12) && c.lookup(10));
    }

    #[test]
    fn more_popular_newcomer_replaces() {
        let mut c = store(1);
        c.admit(12).unwrap();
        assert_eq!(c.admit(10).unwrap(), AdmitOutcome::Replaced { victim: 12 });
        assert_eq!(c.entries().collect::<Vec<_>>(), vec![10]);
    }

    #[test]
    fn less_popular_newcomer_rejected() {
        let mut c = store(1);
        c.admit(10).unwrap();
        assert_eq!(c.admit(12).unwrap(), AdmitOutcome::Rejected);
        assert_eq!(c.entries().collect::<Vec<_>>(), vec![10]);
    }

    #[test]
    fn evicts_least_popular_resident() {
        let mut c = CacheStore::with_popularity(2, &[1, 2, 3, 4]).unwrap();
        c.admit(3).unwrap();
        c.admit(4).unwrap();
        assert_eq!(c.admit(1).unwrap(), AdmitOutcome::Replaced { victim: 4 });
    }

    #[test]
    fn non_cacheable_never_stored() {
        let mut c = store(3);
        assert_eq!(c.admit(99).unwrap(), AdmitOutcome::Rejected);
        assert!(!c.lookup(99));
        assert!(c.is_empty());
    }

    #[test]
    fn duplicate_is_idempotent() {
        let mut c = store(2);
        c.admit(11).unwrap();
        let before = c.clone();
        assert_eq!(c.admit(11).unwrap(), AdmitOutcome::Duplicate);
        assert_eq!(c, before);
    }

    #[test]
    fn unbound_cache_reports_missing_rank() {
        let mut c = CacheStore::new(2, [1, 2]);
        assert!(matches!(c.admit(1), Err(Error::UnrankedTask(1))));
    }

    #[test]
    fn rebind_validates_permutation() {
        let mut c = store(2);
        assert!(matches!(c.rebind_popularity(&[10, 11]), Err(Error::NotAPermutation)));
        assert!(matches!(c.rebind_popularity(&[10, 11, 11]), Err(Error::NotAPermutation)));
        assert!(matches!(c.rebind_popularity(&[10, 11, 13]), Err(Error::NotAPermutation)));
        c.admit(10).unwrap();
        c.rebind_popularity(&[12, 11, 10]).unwrap();
        assert!(c.lookup(10));
    }

    #[test]
    fn reversed_ranks_reverse_eviction() {
        let seq = [11, 12, 10];
        let mut fwd = store(2);
        let mut rev = store(2);
        rev.rebind_popularity(&[12, 11, 10]).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for t in seq {
            a.push(fwd.admit(t).unwrap());
            b.push(rev.admit(t).unwrap());
        }
        // Forward ranks: 10 evicts 12. Reversed ranks: 10 is now least popular.
        assert_eq!(a[2], AdmitOutcome::Replaced { victim: 12 });
        assert_eq!(b[2], AdmitOutcome::Rejected);

        let mut c = store(1);
        c.admit(11).unwrap();
        c.rebind_popularity(&[12, 11, 10]).unwrap();
        // 10 was more popular than 11 before the rebind; now it is not.
        assert_eq!(c.admit(10).unwrap(), AdmitOutcome::Rejected);
        assert_eq!(c.admit(12).unwrap(), AdmitOutcome::Replaced { victim: 11 });
    }

    #[test]
    fn identical_rebind_is_transparent() {
        let seq = [12, 11, 12, 10, 11];
        let mut a = store(2);
        let mut b = store(2);
        b.rebind_popularity(&[10, 11, 12]).unwrap();
        for t in seq {
            assert_eq!(a.admit(t).unwrap(), b.admit(t).unwrap());
        }
        assert_eq!(a, b);
    }
}
