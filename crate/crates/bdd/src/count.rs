use num_bigint::BigUint;
use num_traits::{One, Zero};
use rustc_hash::{FxHashMap, FxHashSet};

use crate::manager::{Inner, FALSE, TERMINAL_LEVEL, TRUE};
use crate::{Bdd, BddError, BddManager, VarId};

fn support_of(inner: &Inner, root: u32) -> Vec<VarId> {
    let mut seen = FxHashSet::default();
    let mut vars = FxHashSet::default();
    let mut stack = vec![root];
    while let Some(f) = stack.pop() {
        if f <= TRUE || !seen.insert(f) {
            continue;
        }
        let n = inner.node(f);
        vars.insert(n.var);
        stack.push(n.lo);
        stack.push(n.hi);
    }
    let mut out: Vec<VarId> = vars.into_iter().map(VarId).collect();
    out.sort_unstable();
    out
}

impl BddManager {
    /// Variables the function actually depends on, in order.
    pub fn support(&self, f: &Bdd) -> Vec<VarId> {
        self.check(f);
        support_of(&self.inner.borrow(), f.id)
    }

    /// Number of nodes reachable from the root, terminals included.
    pub fn node_count(&self, f: &Bdd) -> usize {
        self.check(f);
        let inner = self.inner.borrow();
        let mut seen = FxHashSet::default();
        let mut stack = vec![f.id];
        while let Some(id) = stack.pop() {
            if !seen.insert(id) || id <= TRUE {
                continue;
            }
            let n = inner.node(id);
            stack.push(n.lo);
            stack.push(n.hi);
        }
        seen.len()
    }

    /// Exact number of satisfying assignments over `support`, which must
    /// contain every variable `f` depends on.
    pub fn sat_count(&self, f: &Bdd, support: &[VarId]) -> Result<BigUint, BddError> {
        self.check(f);
        let inner = self.inner.borrow();
        let mut vars = support.to_vec();
        vars.sort_unstable();
        vars.dedup();
        let mut position: FxHashMap<u32, usize> = FxHashMap::default();
        for (i, v) in vars.iter().enumerate() {
            position.insert(v.0, i);
        }
        if let Some(missing) = support_of(&inner, f.id)
            .into_iter()
            .find(|v| !position.contains_key(&v.0))
        {
            return Err(BddError::SupportTooSmall(missing.0));
        }
        let width = vars.len();
        let pos = |id: u32| -> usize {
            let level = inner.node(id).var;
            if level == TERMINAL_LEVEL {
                width
            } else {
                position[&level]
            }
        };
        // count(id) = models over the support variables at or below pos(id)
        let mut memo: FxHashMap<u32, BigUint> = FxHashMap::default();
        memo.insert(FALSE, BigUint::zero());
        memo.insert(TRUE, BigUint::one());
        let mut stack = vec![(f.id, false)];
        while let Some((id, expanded)) = stack.pop() {
            if memo.contains_key(&id) {
                continue;
            }
            let n = inner.node(id);
            if expanded {
                let here = pos(id);
                let lo = &memo[&n.lo] << (pos(n.lo) - here - 1);
                let hi = &memo[&n.hi] << (pos(n.hi) - here - 1);
                memo.insert(id, lo + hi);
            } else {
                stack.push((id, true));
                stack.push((n.lo, false));
                stack.push((n.hi, false));
            }
        }
        Ok(&memo[&f.id] << pos(f.id))
    }

    /// All satisfying assignments over `vars` (sorted into variable order),
    /// each as a vector of values aligned with the sorted variable list.
    /// Fails if more than `cap` assignments exist.
    pub fn sat_assignments(
        &self,
        f: &Bdd,
        vars: &[VarId],
        cap: usize,
    ) -> Result<Vec<Vec<bool>>, BddError> {
        let mut sorted = vars.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let count = self.sat_count(f, &sorted)?;
        if count > BigUint::from(cap) {
            return Err(BddError::EnumerationCap { cap });
        }
        let inner = self.inner.borrow();
        let mut out = Vec::new();
        let mut current = vec![false; sorted.len()];
        enumerate(&inner, f.id, &sorted, 0, &mut current, &mut out);
        Ok(out)
    }
}

fn enumerate(
    inner: &Inner,
    f: u32,
    vars: &[VarId],
    pos: usize,
    current: &mut Vec<bool>,
    out: &mut Vec<Vec<bool>>,
) {
    if f == FALSE {
        return;
    }
    if pos == vars.len() {
        debug_assert_eq!(f, TRUE);
        out.push(current.clone());
        return;
    }
    let n = inner.node(f);
    let (lo, hi) = if n.var == vars[pos].0 {
        (n.lo, n.hi)
    } else {
        (f, f)
    };
    current[pos] = false;
    enumerate(inner, lo, vars, pos + 1, current, out);
    current[pos] = true;
    enumerate(inner, hi, vars, pos + 1, current, out);
}
