use rustc_hash::FxHashMap;

use crate::manager::{FALSE, TRUE};
use crate::{Bdd, BddManager, VarId};

/// Immutable copy of one function, detached from its manager so that it can
/// be shared across threads and evaluated without locking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    /// `(var, lo, hi)`; indices 0 and 1 are the terminals.
    nodes: Vec<(u32, u32, u32)>,
    root: u32,
}

impl Snapshot {
    /// Evaluates the function under a total assignment.
    pub fn eval(&self, value_of: impl Fn(VarId) -> bool) -> bool {
        let mut id = self.root;
        while id > TRUE {
            let (var, lo, hi) = self.nodes[id as usize];
            id = if value_of(VarId(var)) { hi } else { lo };
        }
        id == TRUE
    }

    /// Internal nodes, terminals excluded.
    pub fn len(&self) -> usize {
        self.nodes.len() - 2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl BddManager {
    pub fn snapshot(&self, f: &Bdd) -> Snapshot {
        self.check(f);
        let inner = self.inner.borrow();
        let mut nodes = vec![(u32::MAX, FALSE, FALSE), (u32::MAX, TRUE, TRUE)];
        let mut map: FxHashMap<u32, u32> = FxHashMap::default();
        map.insert(FALSE, FALSE);
        map.insert(TRUE, TRUE);
        // iterative post-order so children are numbered first
        let mut stack = vec![(f.id, false)];
        while let Some((id, expanded)) = stack.pop() {
            if map.contains_key(&id) {
                continue;
            }
            let n = inner.node(id);
            if expanded {
                let new = nodes.len() as u32;
                nodes.push((n.var, map[&n.lo], map[&n.hi]));
                map.insert(id, new);
            } else {
                stack.push((id, true));
                stack.push((n.lo, false));
                stack.push((n.hi, false));
            }
        }
        Snapshot {
            nodes,
            root: map[&f.id],
        }
    }
}
