use crate::{Bdd, BddError, BddManager, VarId};

/// A binary-encoded integer held in a group of Boolean variables,
/// least-significant bit first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarBlock {
    vars: Vec<VarId>,
}

impl VarBlock {
    pub fn new(vars: Vec<VarId>) -> Self {
        VarBlock { vars }
    }

    /// Number of bits needed to encode `count` distinct values.
    pub fn width_for(count: usize) -> usize {
        if count <= 1 {
            0
        } else {
            (usize::BITS - (count - 1).leading_zeros()) as usize
        }
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn width(&self) -> usize {
        self.vars.len()
    }

    /// Number of representable codes, `2^width`.
    pub fn capacity(&self) -> u64 {
        1u64 << self.vars.len()
    }

    /// Literals fixing the block to the code `k`.
    pub fn literals(&self, k: u64) -> impl Iterator<Item = (VarId, bool)> + '_ {
        self.vars
            .iter()
            .enumerate()
            .map(move |(bit, &v)| (v, (k >> bit) & 1 == 1))
    }

    /// Decodes the block value from an assignment lookup.
    pub fn decode(&self, value_of: impl Fn(VarId) -> bool) -> u64 {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, &v)| value_of(v))
            .fold(0, |acc, (bit, _)| acc | (1 << bit))
    }
}

impl BddManager {
    /// `block == k`, bitwise.
    pub fn equals_const(&self, block: &VarBlock, k: u64) -> Result<Bdd, BddError> {
        if k >= block.capacity() {
            return Err(BddError::CodeOutOfRange {
                code: k,
                width: block.width(),
            });
        }
        let lits: Vec<_> = block.literals(k).collect();
        self.cube(&lits)
    }

    /// `a == b`, bitwise. Both blocks need the same width.
    pub fn equals_blocks(&self, a: &VarBlock, b: &VarBlock) -> Result<Bdd, BddError> {
        if a.width() != b.width() {
            return Err(BddError::WidthMismatch(a.width(), b.width()));
        }
        let mut acc = self.mk_true();
        for (&va, &vb) in a.vars.iter().zip(&b.vars).rev() {
            let x = self.mk_var(va)?;
            let y = self.mk_var(vb)?;
            let eq = self.xnor(&x, &y);
            acc = self.and(&eq, &acc);
        }
        Ok(acc)
    }

    /// `block <= k` as an unsigned comparison.
    pub fn at_most_const(&self, block: &VarBlock, k: u64) -> Result<Bdd, BddError> {
        if k >= block.capacity() {
            return Ok(self.mk_true());
        }
        let mut acc = self.mk_true();
        for (bit, &v) in block.vars.iter().enumerate() {
            let x = self.mk_var(v)?;
            let nx = self.not(&x);
            acc = if (k >> bit) & 1 == 1 {
                self.or(&nx, &acc)
            } else {
                self.and(&nx, &acc)
            };
        }
        Ok(acc)
    }

    /// `block >= k` as an unsigned comparison.
    pub fn at_least_const(&self, block: &VarBlock, k: u64) -> Result<Bdd, BddError> {
        if k == 0 {
            return Ok(self.mk_true());
        }
        if k >= block.capacity() {
            return Ok(self.mk_false());
        }
        let below = self.at_most_const(block, k - 1)?;
        Ok(self.not(&below))
    }

    /// `lo <= block <= hi`.
    pub fn in_range(&self, block: &VarBlock, lo: u64, hi: u64) -> Result<Bdd, BddError> {
        if lo > hi {
            return Ok(self.mk_false());
        }
        let ge = self.at_least_const(block, lo)?;
        let le = self.at_most_const(block, hi)?;
        Ok(self.and(&ge, &le))
    }
}
