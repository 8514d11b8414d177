//! Binary encoding of state, input and next-state cell indices as blocks of
//! decision-diagram variables.
//!
//! Variable order: state dimensions ascending, with the bits of `x_i` and
//! `x+_i` interleaved pairwise. Each input dimension is placed directly before
//! the first state dimension whose update reads it; inputs no update reads
//! come last. Relations that only couple neighbouring dimensions then stay
//! narrow.

use serde::{Deserialize, Serialize};
use ssabs_bdd::{Bdd, BddError, BddManager, VarBlock, VarId};

use crate::depgraph::Dependency;

/// Order of the bits inside an interleaved block pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitOrder {
    /// Most significant bit closest to the root.
    #[default]
    MsbFirst,
    LsbFirst,
}

#[derive(Clone, Debug)]
pub struct Encoding {
    mgr: BddManager,
    state_counts: Vec<usize>,
    input_counts: Vec<usize>,
    x: Vec<VarBlock>,
    xp: Vec<VarBlock>,
    u: Vec<VarBlock>,
    state_vars: Vec<VarId>,
    next_vars: Vec<VarId>,
    input_vars: Vec<VarId>,
}

impl Encoding {
    /// Declares all blocks in `mgr`, which must not yet hold variables with
    /// the same names.
    pub fn new(
        mgr: &BddManager,
        state_counts: &[usize],
        input_counts: &[usize],
        deps: &[Dependency],
        bit_order: BitOrder,
    ) -> Result<Self, BddError> {
        let n = state_counts.len();
        let m = input_counts.len();
        let mut placement: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        for j in 0..m {
            let first = deps
                .iter()
                .position(|d| d.inputs.contains(&j))
                .unwrap_or(n);
            placement[first].push(j);
        }
        let bits = |width: usize| -> Vec<usize> {
            match bit_order {
                BitOrder::MsbFirst => (0..width).rev().collect(),
                BitOrder::LsbFirst => (0..width).collect(),
            }
        };
        let mut x: Vec<Vec<Option<VarId>>> = state_counts
            .iter()
            .map(|&c| vec![None; VarBlock::width_for(c)])
            .collect();
        let mut xp = x.clone();
        let mut u: Vec<Vec<Option<VarId>>> = input_counts
            .iter()
            .map(|&c| vec![None; VarBlock::width_for(c)])
            .collect();
        for (i, inputs) in placement.iter().enumerate() {
            for &j in inputs {
                for b in bits(u[j].len()) {
                    u[j][b] = Some(mgr.new_var(format!("u{}.b{b}", j + 1))?);
                }
            }
            if i == n {
                break;
            }
            for b in bits(x[i].len()) {
                x[i][b] = Some(mgr.new_var(format!("x{}.b{b}", i + 1))?);
                xp[i][b] = Some(mgr.new_var(format!("xp{}.b{b}", i + 1))?);
            }
        }
        let blocks = |v: Vec<Vec<Option<VarId>>>| -> Vec<VarBlock> {
            v.into_iter()
                .map(|b| VarBlock::new(b.into_iter().map(|v| v.expect("declared")).collect()))
                .collect()
        };
        let (x, xp, u) = (blocks(x), blocks(xp), blocks(u));
        let flat = |bs: &[VarBlock]| -> Vec<VarId> {
            let mut v: Vec<VarId> = bs.iter().flat_map(|b| b.vars().iter().copied()).collect();
            v.sort_unstable();
            v
        };
        Ok(Encoding {
            mgr: mgr.clone(),
            state_counts: state_counts.to_vec(),
            input_counts: input_counts.to_vec(),
            state_vars: flat(&x),
            next_vars: flat(&xp),
            input_vars: flat(&u),
            x,
            xp,
            u,
        })
    }

    pub fn manager(&self) -> &BddManager {
        &self.mgr
    }

    pub fn n(&self) -> usize {
        self.state_counts.len()
    }

    pub fn m(&self) -> usize {
        self.input_counts.len()
    }

    pub fn state_counts(&self) -> &[usize] {
        &self.state_counts
    }

    pub fn input_counts(&self) -> &[usize] {
        &self.input_counts
    }

    pub fn state_block(&self, i: usize) -> &VarBlock {
        &self.x[i]
    }

    pub fn next_block(&self, i: usize) -> &VarBlock {
        &self.xp[i]
    }

    pub fn input_block(&self, j: usize) -> &VarBlock {
        &self.u[j]
    }

    pub fn state_vars(&self) -> &[VarId] {
        &self.state_vars
    }

    pub fn next_vars(&self) -> &[VarId] {
        &self.next_vars
    }

    pub fn input_vars(&self) -> &[VarId] {
        &self.input_vars
    }

    /// Every variable of the encoding, in order.
    pub fn all_vars(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self
            .state_vars
            .iter()
            .chain(&self.next_vars)
            .chain(&self.input_vars)
            .copied()
            .collect();
        v.sort_unstable();
        v
    }

    /// Pairs mapping each state variable to its next-state twin.
    pub fn state_to_next(&self) -> Vec<(VarId, VarId)> {
        self.x
            .iter()
            .zip(&self.xp)
            .flat_map(|(a, b)| a.vars().iter().copied().zip(b.vars().iter().copied()))
            .collect()
    }

    pub fn next_to_state(&self) -> Vec<(VarId, VarId)> {
        self.state_to_next().into_iter().map(|(a, b)| (b, a)).collect()
    }

    pub fn push_state_literals(&self, i: usize, k: usize, out: &mut Vec<(VarId, bool)>) {
        out.extend(self.x[i].literals(k as u64));
    }

    pub fn push_input_literals(&self, j: usize, k: usize, out: &mut Vec<(VarId, bool)>) {
        out.extend(self.u[j].literals(k as u64));
    }

    /// Conjunction fixing the state blocks to `q`.
    pub fn state_cell(&self, q: &[usize]) -> Bdd {
        let mut lits = Vec::new();
        for (i, &k) in q.iter().enumerate() {
            self.push_state_literals(i, k, &mut lits);
        }
        self.mgr.cube(&lits).expect("encoding variables")
    }

    pub fn input_cell(&self, u: &[usize]) -> Bdd {
        let mut lits = Vec::new();
        for (j, &k) in u.iter().enumerate() {
            self.push_input_literals(j, k, &mut lits);
        }
        self.mgr.cube(&lits).expect("encoding variables")
    }

    pub fn next_cell(&self, q: &[usize]) -> Bdd {
        let lits: Vec<_> = q
            .iter()
            .enumerate()
            .flat_map(|(i, &k)| self.xp[i].literals(k as u64))
            .collect();
        self.mgr.cube(&lits).expect("encoding variables")
    }

    /// `lo <= x+_i <= hi`.
    pub fn next_range(&self, i: usize, lo: usize, hi: usize) -> Bdd {
        self.mgr
            .in_range(&self.xp[i], lo as u64, hi as u64)
            .expect("encoding variables")
    }

    fn valid(&self, blocks: &[VarBlock], counts: &[usize], dims: impl Iterator<Item = usize>) -> Bdd {
        let mut acc = self.mgr.mk_true();
        for d in dims {
            let ok = self
                .mgr
                .at_most_const(&blocks[d], counts[d] as u64 - 1)
                .expect("encoding variables");
            acc = self.mgr.and(&acc, &ok);
        }
        acc
    }

    /// Codes of state dimension `dims` within range.
    pub fn valid_states(&self, dims: impl Iterator<Item = usize>) -> Bdd {
        self.valid(&self.x, &self.state_counts, dims)
    }

    pub fn valid_inputs(&self, dims: impl Iterator<Item = usize>) -> Bdd {
        self.valid(&self.u, &self.input_counts, dims)
    }

    pub fn valid_next(&self, dims: impl Iterator<Item = usize>) -> Bdd {
        self.valid(&self.xp, &self.state_counts, dims)
    }

    /// All in-range codes of every block.
    pub fn domain(&self) -> Bdd {
        let a = self.valid_states(0..self.n());
        let b = self.valid_next(0..self.n());
        let c = self.valid_inputs(0..self.m());
        self.mgr.and_all([&a, &b, &c])
    }

    /// Decodes state, input and next-state indices from an assignment
    /// aligned with `vars`.
    pub fn decode(&self, vars: &[VarId], values: &[bool]) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let lookup = |v: VarId| -> bool {
            vars.binary_search(&v)
                .map(|p| values[p])
                .unwrap_or(false)
        };
        let dec = |bs: &[VarBlock]| -> Vec<usize> { bs.iter().map(|b| b.decode(lookup) as usize).collect() };
        (dec(&self.x), dec(&self.u), dec(&self.xp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_interleaves_and_places_inputs() {
        let mgr = BddManager::new();
        let deps = vec![
            Dependency::new(vec![0], vec![]),
            Dependency::new(vec![1], vec![1]),
            Dependency::new(vec![2], vec![0, 1]),
        ];
        let enc = Encoding::new(&mgr, &[4, 2, 3], &[2, 2, 5], &deps, BitOrder::MsbFirst).unwrap();
        assert_eq!(
            mgr.var_names(),
            vec![
                "x1.b1", "xp1.b1", "x1.b0", "xp1.b0", "u2.b0", "x2.b0", "xp2.b0", "u1.b0", "x3.b1",
                "xp3.b1", "x3.b0", "xp3.b0", "u3.b2", "u3.b1", "u3.b0"
            ]
        );
        assert_eq!(enc.state_vars().len(), 5);
        assert_eq!(enc.all_vars().len(), 15);
        // non-power-of-two counts exclude codes
        let dom = enc.domain();
        let count = mgr.sat_count(&dom, &enc.all_vars()).unwrap();
        assert_eq!(count, ssabs_bdd::BigUint::from(4u32 * 2 * 3 * 4 * 2 * 3 * 2 * 2 * 5));
    }

    #[test]
    fn decode_round_trip() {
        let mgr = BddManager::new();
        let deps = vec![Dependency::new(vec![0, 1], vec![0]); 2];
        let enc = Encoding::new(&mgr, &[5, 3], &[3], &deps, BitOrder::LsbFirst).unwrap();
        let f = mgr.and_all([&enc.state_cell(&[4, 1]), &enc.input_cell(&[2]), &enc.next_cell(&[0, 2])]);
        let vars = enc.all_vars();
        let sols = mgr.sat_assignments(&f, &vars, 10).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(enc.decode(&vars, &sols[0]), (vec![4, 1], vec![2], vec![0, 2]));
    }

    #[test]
    fn single_cell_dimensions_have_no_bits() {
        let mgr = BddManager::new();
        let enc = Encoding::new(&mgr, &[1], &[1], &[Dependency::new(vec![0], vec![0])], BitOrder::MsbFirst).unwrap();
        assert_eq!(mgr.var_count(), 0);
        assert!(enc.state_cell(&[0]).is_true());
        assert!(enc.next_range(0, 0, 0).is_true());
    }
}
