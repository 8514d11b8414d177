use std::cell::RefCell;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

use rustc_hash::FxHashMap;

use crate::BddError;

pub(crate) const FALSE: u32 = 0;
pub(crate) const TRUE: u32 = 1;
/// Level stored in terminal nodes; sorts below every variable.
pub(crate) const TERMINAL_LEVEL: u32 = u32::MAX;
/// Level stored in swept slots waiting on the free list.
const FREE_LEVEL: u32 = u32::MAX - 1;

const OP_ITE: u32 = 1;
const OP_EXISTS: u32 = 2;
const OP_AND_EXISTS: u32 = 3;

const MIN_GC_THRESHOLD: usize = 1 << 20;
const MIN_CACHE_BITS: u32 = 16;
const MAX_CACHE_BITS: u32 = 23;

/// Boolean variable handle. Variables are ordered by creation: a smaller id
/// sits closer to the root of every diagram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub(crate) u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub(crate) struct Node {
    pub(crate) var: u32,
    pub(crate) lo: u32,
    pub(crate) hi: u32,
}

#[derive(Clone, Copy, Default)]
struct CacheEntry {
    op: u32,
    a: u32,
    b: u32,
    c: u32,
    r: u32,
}

/// Interned set of variables used by quantification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VarSet {
    id: u32,
}

struct VarSetData {
    member: Vec<bool>,
    max: Option<u32>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ManagerStats {
    pub live_nodes: usize,
    pub allocated_nodes: usize,
    pub collections: usize,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

pub(crate) struct Inner {
    pub(crate) names: Vec<String>,
    pub(crate) name_index: FxHashMap<String, u32>,
    pub(crate) nodes: Vec<Node>,
    ext_refs: Vec<u32>,
    free: Vec<u32>,
    unique: FxHashMap<Node, u32>,
    cache: Vec<CacheEntry>,
    cache_mask: usize,
    var_sets: Vec<VarSetData>,
    var_set_index: FxHashMap<Vec<u32>, u32>,
    gc_threshold: usize,
    collections: usize,
    cache_hits: u64,
    cache_misses: u64,
}

#[inline]
fn mix(op: u32, a: u32, b: u32, c: u32) -> usize {
    let mut h = (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    h ^= (b as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F).rotate_left(17);
    h ^= (c as u64).wrapping_mul(0x1656_67B1_9E37_79F9).rotate_left(31);
    h ^= op as u64;
    h ^= h >> 29;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    (h ^ (h >> 32)) as usize
}

impl Inner {
    fn new() -> Self {
        let terminal = |id| Node {
            var: TERMINAL_LEVEL,
            lo: id,
            hi: id,
        };
        Inner {
            names: Vec::new(),
            name_index: FxHashMap::default(),
            nodes: vec![terminal(FALSE), terminal(TRUE)],
            ext_refs: vec![0, 0],
            free: Vec::new(),
            unique: FxHashMap::default(),
            cache: vec![CacheEntry::default(); 1 << MIN_CACHE_BITS],
            cache_mask: (1 << MIN_CACHE_BITS) - 1,
            var_sets: Vec::new(),
            var_set_index: FxHashMap::default(),
            gc_threshold: MIN_GC_THRESHOLD,
            collections: 0,
            cache_hits: 0,
            cache_misses: 0,
        }
    }

    #[inline]
    pub(crate) fn level(&self, f: u32) -> u32 {
        self.nodes[f as usize].var
    }

    #[inline]
    pub(crate) fn node(&self, f: u32) -> Node {
        self.nodes[f as usize]
    }

    pub(crate) fn live_nodes(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    pub(crate) fn add_ref(&mut self, f: u32) {
        debug_assert!(self.nodes[f as usize].var != FREE_LEVEL, "handle to a swept node");
        self.ext_refs[f as usize] += 1;
    }

    #[inline]
    pub(crate) fn mk(&mut self, var: u32, lo: u32, hi: u32) -> u32 {
        if lo == hi {
            return lo;
        }
        debug_assert!(var < self.level(lo) && var < self.level(hi), "order violation");
        let key = Node { var, lo, hi };
        if let Some(&id) = self.unique.get(&key) {
            return id;
        }
        let id = match self.free.pop() {
            Some(slot) => {
                self.nodes[slot as usize] = key;
                self.ext_refs[slot as usize] = 0;
                slot
            }
            None => {
                let id = self.nodes.len() as u32;
                self.nodes.push(key);
                self.ext_refs.push(0);
                id
            }
        };
        self.unique.insert(key, id);
        id
    }

    #[inline]
    fn cache_get(&mut self, op: u32, a: u32, b: u32, c: u32) -> Option<u32> {
        let e = self.cache[mix(op, a, b, c) & self.cache_mask];
        if e.op == op && e.a == a && e.b == b && e.c == c {
            self.cache_hits += 1;
            Some(e.r)
        } else {
            self.cache_misses += 1;
            None
        }
    }

    #[inline]
    fn cache_put(&mut self, op: u32, a: u32, b: u32, c: u32, r: u32) {
        let slot = mix(op, a, b, c) & self.cache_mask;
        self.cache[slot] = CacheEntry { op, a, b, c, r };
    }

    /// Collects garbage when the table has grown past the threshold. Must only
    /// be called when no raw node ids are held outside of `ext_refs`.
    pub(crate) fn maybe_collect(&mut self) {
        if self.live_nodes() > self.gc_threshold {
            self.collect();
        }
        self.resize_cache();
    }

    fn resize_cache(&mut self) {
        let want = (self.live_nodes().next_power_of_two().trailing_zeros())
            .clamp(MIN_CACHE_BITS, MAX_CACHE_BITS);
        if (1usize << want) > self.cache.len() {
            self.cache = vec![CacheEntry::default(); 1 << want];
            self.cache_mask = (1 << want) - 1;
        }
    }

    pub(crate) fn collect(&mut self) {
        let mut marked = vec![false; self.nodes.len()];
        marked[FALSE as usize] = true;
        marked[TRUE as usize] = true;
        let mut stack: Vec<u32> = (0..self.nodes.len() as u32)
            .filter(|&i| self.ext_refs[i as usize] > 0)
            .collect();
        while let Some(f) = stack.pop() {
            if marked[f as usize] {
                continue;
            }
            marked[f as usize] = true;
            let n = self.nodes[f as usize];
            stack.push(n.lo);
            stack.push(n.hi);
        }
        for (i, alive) in marked.iter().enumerate() {
            let n = self.nodes[i];
            if !alive && n.var != FREE_LEVEL {
                self.unique.remove(&n);
                self.nodes[i] = Node {
                    var: FREE_LEVEL,
                    lo: FALSE,
                    hi: FALSE,
                };
                self.free.push(i as u32);
            }
        }
        for e in self.cache.iter_mut() {
            e.op = 0;
        }
        self.collections += 1;
        self.gc_threshold = (2 * self.live_nodes()).max(MIN_GC_THRESHOLD);
    }

    #[inline]
    fn cofactors(&self, f: u32, var: u32) -> (u32, u32) {
        let n = self.nodes[f as usize];
        if n.var == var {
            (n.lo, n.hi)
        } else {
            (f, f)
        }
    }

    pub(crate) fn ite(&mut self, f: u32, g: u32, h: u32) -> u32 {
        if f == TRUE {
            return g;
        }
        if f == FALSE {
            return h;
        }
        let g = if g == f { TRUE } else { g };
        let h = if h == f { FALSE } else { h };
        if g == h {
            return g;
        }
        if g == TRUE && h == FALSE {
            return f;
        }
        // Canonical argument order for the commutative forms f∧g and f∨h.
        let (f, g, h) = if h == FALSE && g < f {
            (g, f, h)
        } else if g == TRUE && h < f {
            (h, g, f)
        } else {
            (f, g, h)
        };
        if let Some(r) = self.cache_get(OP_ITE, f, g, h) {
            return r;
        }
        let top = self.level(f).min(self.level(g)).min(self.level(h));
        let (f0, f1) = self.cofactors(f, top);
        let (g0, g1) = self.cofactors(g, top);
        let (h0, h1) = self.cofactors(h, top);
        let lo = self.ite(f0, g0, h0);
        let hi = self.ite(f1, g1, h1);
        let r = self.mk(top, lo, hi);
        self.cache_put(OP_ITE, f, g, h, r);
        r
    }

    #[inline]
    pub(crate) fn and(&mut self, f: u32, g: u32) -> u32 {
        self.ite(f, g, FALSE)
    }

    #[inline]
    pub(crate) fn or(&mut self, f: u32, g: u32) -> u32 {
        self.ite(f, TRUE, g)
    }

    pub(crate) fn intern_var_set(&mut self, vars: &[VarId]) -> VarSet {
        let mut key: Vec<u32> = vars.iter().map(|v| v.0).collect();
        key.sort_unstable();
        key.dedup();
        if let Some(&id) = self.var_set_index.get(&key) {
            return VarSet { id };
        }
        let mut member = vec![false; self.names.len()];
        for &v in &key {
            member[v as usize] = true;
        }
        let id = self.var_sets.len() as u32;
        self.var_sets.push(VarSetData {
            member,
            max: key.last().copied(),
        });
        self.var_set_index.insert(key, id);
        VarSet { id }
    }

    #[inline]
    fn in_set(&self, set: VarSet, var: u32) -> bool {
        let data = &self.var_sets[set.id as usize];
        data.member.get(var as usize).copied().unwrap_or(false)
    }

    #[inline]
    fn below_set(&self, set: VarSet, level: u32) -> bool {
        match self.var_sets[set.id as usize].max {
            Some(max) => level > max,
            None => true,
        }
    }

    pub(crate) fn exists(&mut self, f: u32, set: VarSet) -> u32 {
        let level = self.level(f);
        if level == TERMINAL_LEVEL || self.below_set(set, level) {
            return f;
        }
        if let Some(r) = self.cache_get(OP_EXISTS, f, set.id, 0) {
            return r;
        }
        let n = self.node(f);
        let lo = self.exists(n.lo, set);
        let r = if self.in_set(set, level) {
            if lo == TRUE {
                TRUE
            } else {
                let hi = self.exists(n.hi, set);
                self.or(lo, hi)
            }
        } else {
            let hi = self.exists(n.hi, set);
            self.mk(level, lo, hi)
        };
        self.cache_put(OP_EXISTS, f, set.id, 0, r);
        r
    }

    pub(crate) fn and_exists(&mut self, f: u32, g: u32, set: VarSet) -> u32 {
        if f == FALSE || g == FALSE {
            return FALSE;
        }
        if f == TRUE && g == TRUE {
            return TRUE;
        }
        if f == TRUE || f == g {
            return self.exists(g, set);
        }
        if g == TRUE {
            return self.exists(f, set);
        }
        let (f, g) = if f < g { (f, g) } else { (g, f) };
        let top = self.level(f).min(self.level(g));
        if self.below_set(set, top) {
            return self.and(f, g);
        }
        if let Some(r) = self.cache_get(OP_AND_EXISTS, f, g, set.id) {
            return r;
        }
        let (f0, f1) = self.cofactors(f, top);
        let (g0, g1) = self.cofactors(g, top);
        let lo = self.and_exists(f0, g0, set);
        let r = if self.in_set(set, top) {
            if lo == TRUE {
                TRUE
            } else {
                let hi = self.and_exists(f1, g1, set);
                self.or(lo, hi)
            }
        } else {
            let hi = self.and_exists(f1, g1, set);
            self.mk(top, lo, hi)
        };
        self.cache_put(OP_AND_EXISTS, f, g, set.id, r);
        r
    }

    pub(crate) fn restrict(
        &mut self,
        f: u32,
        assignment: &[Option<bool>],
        memo: &mut FxHashMap<u32, u32>,
    ) -> u32 {
        let level = self.level(f);
        if level == TERMINAL_LEVEL || level as usize >= assignment.len() {
            return f;
        }
        if let Some(&r) = memo.get(&f) {
            return r;
        }
        let n = self.node(f);
        let r = match assignment[level as usize] {
            Some(false) => self.restrict(n.lo, assignment, memo),
            Some(true) => self.restrict(n.hi, assignment, memo),
            None => {
                let lo = self.restrict(n.lo, assignment, memo);
                let hi = self.restrict(n.hi, assignment, memo);
                self.mk(level, lo, hi)
            }
        };
        memo.insert(f, r);
        r
    }

    pub(crate) fn replace(&mut self, f: u32, map: &[u32], memo: &mut FxHashMap<u32, u32>) -> u32 {
        let level = self.level(f);
        if level == TERMINAL_LEVEL {
            return f;
        }
        if let Some(&r) = memo.get(&f) {
            return r;
        }
        let n = self.node(f);
        let lo = self.replace(n.lo, map, memo);
        let hi = self.replace(n.hi, map, memo);
        let target = map[level as usize];
        let r = if target < self.level(lo) && target < self.level(hi) {
            self.mk(target, lo, hi)
        } else {
            let v = self.mk(target, FALSE, TRUE);
            self.ite(v, hi, lo)
        };
        memo.insert(f, r);
        r
    }

    /// Walks the whole table and reports the first violated structural invariant.
    pub(crate) fn audit(&self) -> Result<(), String> {
        let mut seen: FxHashMap<Node, u32> = FxHashMap::default();
        for (i, n) in self.nodes.iter().enumerate().skip(2) {
            if n.var == FREE_LEVEL {
                continue;
            }
            if n.lo == n.hi {
                return Err(format!("node {i} is redundant (lo == hi)"));
            }
            for child in [n.lo, n.hi] {
                let c = self.nodes[child as usize];
                if c.var == FREE_LEVEL {
                    return Err(format!("node {i} points at swept slot {child}"));
                }
                if c.var <= n.var {
                    return Err(format!("node {i} violates the variable order"));
                }
            }
            if let Some(j) = seen.insert(*n, i as u32) {
                return Err(format!("nodes {j} and {i} share (var, lo, hi)"));
            }
            if self.unique.get(n) != Some(&(i as u32)) {
                return Err(format!("node {i} missing from the unique table"));
            }
        }
        if seen.len() != self.unique.len() {
            return Err("unique table holds stale entries".to_string());
        }
        Ok(())
    }

    pub(crate) fn stats(&self) -> ManagerStats {
        ManagerStats {
            live_nodes: self.live_nodes(),
            allocated_nodes: self.nodes.len(),
            collections: self.collections,
            cache_hits: self.cache_hits,
            cache_misses: self.cache_misses,
        }
    }
}

/// Owner of the node table. Cloning yields another handle to the same
/// manager; all functions built through any handle share one table.
///
/// A manager is single-threaded. Independent managers may live on different
/// threads, and functions move between them only through serialization.
#[derive(Clone)]
pub struct BddManager {
    pub(crate) inner: Rc<RefCell<Inner>>,
}

/// A Boolean function inside a [`BddManager`]. Handles are reference counted
/// so that garbage collection never reclaims a function that is still held.
/// Two handles of the same manager are equal iff they denote the same function.
pub struct Bdd {
    pub(crate) mgr: Rc<RefCell<Inner>>,
    pub(crate) id: u32,
}

impl Clone for Bdd {
    fn clone(&self) -> Self {
        if self.id > TRUE {
            self.mgr.borrow_mut().add_ref(self.id);
        }
        Bdd {
            mgr: Rc::clone(&self.mgr),
            id: self.id,
        }
    }
}

impl Drop for Bdd {
    fn drop(&mut self) {
        if self.id > TRUE {
            if let Ok(mut inner) = self.mgr.try_borrow_mut() {
                inner.ext_refs[self.id as usize] -= 1;
            }
        }
    }
}

impl PartialEq for Bdd {
    fn eq(&self, other: &Self) -> bool {
        Rc::ptr_eq(&self.mgr, &other.mgr) && self.id == other.id
    }
}

impl Eq for Bdd {}

impl Hash for Bdd {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

impl fmt::Debug for Bdd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id {
            FALSE => write!(f, "Bdd(false)"),
            TRUE => write!(f, "Bdd(true)"),
            id => write!(f, "Bdd(#{id})"),
        }
    }
}

impl Bdd {
    pub fn is_true(&self) -> bool {
        self.id == TRUE
    }

    pub fn is_false(&self) -> bool {
        self.id == FALSE
    }

    /// Raw root id; stable until the function is dropped.
    pub fn root(&self) -> u32 {
        self.id
    }

    pub fn manager(&self) -> BddManager {
        BddManager {
            inner: Rc::clone(&self.mgr),
        }
    }

    pub fn and(&self, other: &Bdd) -> Bdd {
        self.manager().and(self, other)
    }

    pub fn or(&self, other: &Bdd) -> Bdd {
        self.manager().or(self, other)
    }

    pub fn not(&self) -> Bdd {
        self.manager().not(self)
    }
}

impl Default for BddManager {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for BddManager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        f.debug_struct("BddManager")
            .field("vars", &inner.names.len())
            .field("live_nodes", &inner.live_nodes())
            .finish()
    }
}

impl BddManager {
    pub fn new() -> Self {
        BddManager {
            inner: Rc::new(RefCell::new(Inner::new())),
        }
    }

    pub(crate) fn wrap(&self, inner: &mut Inner, id: u32) -> Bdd {
        if id > TRUE {
            inner.add_ref(id);
        }
        Bdd {
            mgr: Rc::clone(&self.inner),
            id,
        }
    }

    pub(crate) fn check(&self, f: &Bdd) {
        assert!(
            Rc::ptr_eq(&self.inner, &f.mgr),
            "decision diagram belongs to a different manager"
        );
    }

    pub fn same_manager(&self, other: &BddManager) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    /// Appends a variable at the bottom of the order.
    pub fn new_var(&self, name: impl Into<String>) -> Result<VarId, BddError> {
        let name = name.into();
        let mut inner = self.inner.borrow_mut();
        if inner.name_index.contains_key(&name) {
            return Err(BddError::DuplicateVariable(name));
        }
        let id = inner.names.len() as u32;
        inner.name_index.insert(name.clone(), id);
        inner.names.push(name);
        for set in inner.var_sets.iter_mut() {
            set.member.push(false);
        }
        Ok(VarId(id))
    }

    pub fn var_count(&self) -> usize {
        self.inner.borrow().names.len()
    }

    pub fn var_name(&self, v: VarId) -> Option<String> {
        self.inner.borrow().names.get(v.index()).cloned()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.inner.borrow().name_index.get(name).map(|&i| VarId(i))
    }

    pub fn var_names(&self) -> Vec<String> {
        self.inner.borrow().names.clone()
    }

    pub fn mk_true(&self) -> Bdd {
        Bdd {
            mgr: Rc::clone(&self.inner),
            id: TRUE,
        }
    }

    pub fn mk_false(&self) -> Bdd {
        Bdd {
            mgr: Rc::clone(&self.inner),
            id: FALSE,
        }
    }

    pub fn constant(&self, value: bool) -> Bdd {
        if value {
            self.mk_true()
        } else {
            self.mk_false()
        }
    }

    pub fn mk_var(&self, v: VarId) -> Result<Bdd, BddError> {
        self.literal(v, true)
    }

    pub fn literal(&self, v: VarId, positive: bool) -> Result<Bdd, BddError> {
        let mut inner = self.inner.borrow_mut();
        if v.index() >= inner.names.len() {
            return Err(BddError::UnknownVariable(v.0));
        }
        let id = if positive {
            inner.mk(v.0, FALSE, TRUE)
        } else {
            inner.mk(v.0, TRUE, FALSE)
        };
        Ok(self.wrap(&mut inner, id))
    }

    /// Conjunction of literals; `lits` need not be sorted.
    pub fn cube(&self, lits: &[(VarId, bool)]) -> Result<Bdd, BddError> {
        let mut sorted = lits.to_vec();
        sorted.sort_unstable_by(|a, b| b.0.cmp(&a.0));
        let mut inner = self.inner.borrow_mut();
        let nvars = inner.names.len();
        let mut node = TRUE;
        let mut prev: Option<(VarId, bool)> = None;
        for &(v, val) in &sorted {
            if v.index() >= nvars {
                return Err(BddError::UnknownVariable(v.0));
            }
            if let Some((pv, pval)) = prev {
                if pv == v {
                    if pval != val {
                        node = FALSE;
                        break;
                    }
                    continue;
                }
            }
            node = if val {
                inner.mk(v.0, FALSE, node)
            } else {
                inner.mk(v.0, node, FALSE)
            };
            prev = Some((v, val));
        }
        Ok(self.wrap(&mut inner, node))
    }

    pub fn ite(&self, f: &Bdd, g: &Bdd, h: &Bdd) -> Bdd {
        self.check(f);
        self.check(g);
        self.check(h);
        let mut inner = self.inner.borrow_mut();
        inner.maybe_collect();
        let r = inner.ite(f.id, g.id, h.id);
        self.wrap(&mut inner, r)
    }

    pub fn and(&self, f: &Bdd, g: &Bdd) -> Bdd {
        self.ite(f, g, &self.mk_false())
    }

    pub fn or(&self, f: &Bdd, g: &Bdd) -> Bdd {
        self.ite(f, &self.mk_true(), g)
    }

    pub fn not(&self, f: &Bdd) -> Bdd {
        self.ite(f, &self.mk_false(), &self.mk_true())
    }

    pub fn implies(&self, f: &Bdd, g: &Bdd) -> Bdd {
        self.ite(f, g, &self.mk_true())
    }

    pub fn xnor(&self, f: &Bdd, g: &Bdd) -> Bdd {
        let ng = self.not(g);
        self.ite(f, g, &ng)
    }

    pub fn and_all<'a>(&self, fs: impl IntoIterator<Item = &'a Bdd>) -> Bdd {
        fs.into_iter().fold(self.mk_true(), |acc, f| self.and(&acc, f))
    }

    pub fn or_all<'a>(&self, fs: impl IntoIterator<Item = &'a Bdd>) -> Bdd {
        fs.into_iter().fold(self.mk_false(), |acc, f| self.or(&acc, f))
    }

    pub fn var_set(&self, vars: &[VarId]) -> Result<VarSet, BddError> {
        let mut inner = self.inner.borrow_mut();
        if let Some(v) = vars.iter().find(|v| v.index() >= inner.names.len()) {
            return Err(BddError::UnknownVariable(v.0));
        }
        Ok(inner.intern_var_set(vars))
    }

    /// Existential quantification of `vars`.
    pub fn exists(&self, f: &Bdd, vars: &[VarId]) -> Result<Bdd, BddError> {
        let set = self.var_set(vars)?;
        Ok(self.exists_set(f, set))
    }

    pub fn exists_set(&self, f: &Bdd, set: VarSet) -> Bdd {
        self.check(f);
        let mut inner = self.inner.borrow_mut();
        inner.maybe_collect();
        let r = inner.exists(f.id, set);
        self.wrap(&mut inner, r)
    }

    pub fn forall(&self, f: &Bdd, vars: &[VarId]) -> Result<Bdd, BddError> {
        let nf = self.not(f);
        let e = self.exists(&nf, vars)?;
        Ok(self.not(&e))
    }

    /// `∃ vars. f ∧ g` without building the conjunction.
    pub fn and_exists(&self, f: &Bdd, g: &Bdd, set: VarSet) -> Bdd {
        self.check(f);
        self.check(g);
        let mut inner = self.inner.borrow_mut();
        inner.maybe_collect();
        let r = inner.and_exists(f.id, g.id, set);
        self.wrap(&mut inner, r)
    }

    /// Cofactor with respect to a partial assignment.
    pub fn restrict(&self, f: &Bdd, assignment: &[(VarId, bool)]) -> Result<Bdd, BddError> {
        self.check(f);
        let mut inner = self.inner.borrow_mut();
        let nvars = inner.names.len();
        let mut table = vec![None; nvars];
        for &(v, val) in assignment {
            if v.index() >= nvars {
                return Err(BddError::UnknownVariable(v.0));
            }
            table[v.index()] = Some(val);
        }
        inner.maybe_collect();
        let r = inner.restrict(f.id, &table, &mut FxHashMap::default());
        Ok(self.wrap(&mut inner, r))
    }

    /// Renames variables according to `pairs` (from, to). Renamings that keep
    /// the relative order are linear; others fall back to if-then-else.
    pub fn replace(&self, f: &Bdd, pairs: &[(VarId, VarId)]) -> Result<Bdd, BddError> {
        self.check(f);
        let mut inner = self.inner.borrow_mut();
        let nvars = inner.names.len();
        let mut map: Vec<u32> = (0..nvars as u32).collect();
        for &(from, to) in pairs {
            if from.index() >= nvars {
                return Err(BddError::UnknownVariable(from.0));
            }
            if to.index() >= nvars {
                return Err(BddError::UnknownVariable(to.0));
            }
            map[from.index()] = to.0;
        }
        inner.maybe_collect();
        let r = inner.replace(f.id, &map, &mut FxHashMap::default());
        Ok(self.wrap(&mut inner, r))
    }

    /// Forces a garbage collection; every function still held survives.
    pub fn collect_garbage(&self) {
        self.inner.borrow_mut().collect();
    }

    /// Checks reducedness, orderedness and hash-consing over the whole table.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.inner.borrow().audit()
    }

    pub fn stats(&self) -> ManagerStats {
        self.inner.borrow().stats()
    }
}
