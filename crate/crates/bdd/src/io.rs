//! Line-oriented text format for decision diagrams.
//!
//! ```text
//! SSABDD 1
//! <var count> <name> <name> ...
//! <id> <var> <lo> <hi>
//! ...
//! root <id>
//! ```
//!
//! Ids 0 and 1 are the false and true terminals. Node lines are emitted
//! children-first (post-order, low edge before high edge) and numbered from 2,
//! so serializing the same function under the same variable order always
//! produces the same bytes. `<var>` indexes into the name list of line 2.

use std::fmt::Write as _;

use rustc_hash::FxHashMap;

use crate::manager::{FALSE, TRUE};
use crate::{Bdd, BddError, BddManager};

pub const MAGIC: &str = "SSABDD 1";

impl BddManager {
    pub fn serialize(&self, f: &Bdd) -> String {
        self.check(f);
        let inner = self.inner.borrow();
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        let _ = write!(out, "{}", inner.names.len());
        for name in &inner.names {
            out.push(' ');
            out.push_str(name);
        }
        out.push('\n');

        let mut number: FxHashMap<u32, u64> = FxHashMap::default();
        number.insert(FALSE, 0);
        number.insert(TRUE, 1);
        let mut next = 2u64;
        let mut stack = vec![(f.id, false)];
        while let Some((id, expanded)) = stack.pop() {
            if number.contains_key(&id) {
                continue;
            }
            let n = inner.node(id);
            if expanded {
                let _ = writeln!(out, "{} {} {} {}", next, n.var, number[&n.lo], number[&n.hi]);
                number.insert(id, next);
                next += 1;
            } else {
                stack.push((id, true));
                stack.push((n.hi, false));
                stack.push((n.lo, false));
            }
        }
        let _ = writeln!(out, "root {}", number[&f.id]);
        out
    }

    /// Rebuilds a serialized function. Variables are matched by name, so the
    /// manager must already declare every variable listed in the header; the
    /// manager's order may differ from the file's.
    pub fn deserialize(&self, text: &str) -> Result<Bdd, BddError> {
        let err = |line: usize, msg: &str| BddError::Parse {
            line,
            message: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, l)) if l.trim_end() == MAGIC => {}
            _ => return Err(err(1, "missing `SSABDD 1` header")),
        }
        let (ln, header) = lines.next().ok_or_else(|| err(2, "missing variable list"))?;
        let mut fields = header.split_whitespace();
        let count: usize = fields
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| err(ln, "expected variable count"))?;
        let names: Vec<&str> = fields.collect();
        if names.len() != count {
            return Err(err(
                ln,
                &format!("declared {count} variables, listed {}", names.len()),
            ));
        }
        let mut vars = Vec::with_capacity(count);
        for name in &names {
            let v = self
                .var_by_name(name)
                .ok_or_else(|| err(ln, &format!("unknown variable `{name}`")))?;
            vars.push(self.mk_var(v)?);
        }

        let mut built: FxHashMap<u64, Bdd> = FxHashMap::default();
        built.insert(0, self.mk_false());
        built.insert(1, self.mk_true());
        let mut root = None;
        for (ln, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if root.is_some() {
                return Err(err(ln, "content after root line"));
            }
            if let Some(rest) = line.strip_prefix("root") {
                let id: u64 = rest
                    .trim()
                    .parse()
                    .map_err(|_| err(ln, "malformed root line"))?;
                root = Some(
                    built
                        .get(&id)
                        .cloned()
                        .ok_or_else(|| err(ln, &format!("root refers to undefined node {id}")))?,
                );
                continue;
            }
            let nums: Vec<u64> = line
                .split_whitespace()
                .map(|t| t.parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|_| err(ln, "expected `id var lo hi`"))?;
            let [id, var, lo, hi] = nums[..] else {
                return Err(err(ln, "expected `id var lo hi`"));
            };
            if id < 2 || built.contains_key(&id) {
                return Err(err(ln, &format!("node id {id} reserved or repeated")));
            }
            let v = vars
                .get(var as usize)
                .ok_or_else(|| err(ln, &format!("variable index {var} out of range")))?;
            let lo = built
                .get(&lo)
                .ok_or_else(|| err(ln, &format!("child {lo} not yet defined")))?;
            let hi = built
                .get(&hi)
                .ok_or_else(|| err(ln, &format!("child {hi} not yet defined")))?;
            if lo == hi {
                return Err(err(ln, "redundant node (lo == hi)"));
            }
            let node = self.ite(v, hi, lo);
            built.insert(id, node);
        }
        root.ok_or_else(|| err(text.lines().count().max(1), "missing root line"))
    }
}
