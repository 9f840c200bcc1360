use std::ops::Range;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Marginal;
use crate::error::{Error, Result};

/// A named, contiguous slice of the parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl Block {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Named blocks that tile `[0, dim)` without gaps or overlaps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    blocks: Vec<Block>,
    dim: usize,
}

impl BlockLayout {
    pub fn new<S: Into<String>>(blocks: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut out: Vec<Block> = Vec::new();
        let mut start = 0;
        for (name, len) in blocks {
            let name = name.into();
            if len == 0 {
                return Err(Error::InvalidLayout(format!("block '{name}' is empty")));
            }
            if out.iter().any(|b| b.name == name) {
                return Err(Error::InvalidLayout(format!("duplicate block '{name}'")));
            }
            out.push(Block { name, start, len });
            start += len;
        }
        if out.is_empty() {
            return Err(Error::InvalidLayout("no blocks".into()));
        }
        Ok(Self { blocks: out, dim: start })
    }

    pub fn single(name: &str, dim: usize) -> Result<Self> {
        Self::new([(name, dim)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn range(&self, name: &str) -> Option<Range<usize>> {
        self.blocks.iter().find(|b| b.name == name).map(Block::range)
    }
}

/// A point in parameter space. Length always matches the layout and every
/// entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Arc<BlockLayout>,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Arc<BlockLayout>) -> Result<Self> {
        if values.len() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), got: values.len() });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { values, layout })
    }

    pub(crate) fn new_unchecked(values: Vec<f64>, layout: Arc<BlockLayout>) -> Self {
        debug_assert_eq!(values.len(), layout.dim());
        Self { values, layout }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout.range(name).map(|r| &self.values[r])
    }
}

/// Product of independent marginals, one per component.
#[derive(Debug, Clone)]
pub struct BlockPrior {
    layout: Arc<BlockLayout>,
    marginals: Vec<Marginal>,
}

impl BlockPrior {
    pub fn new(layout: Arc<BlockLayout>, marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.len() != layout.dim() {
            return Err(Error::DimensionMismatch { expected: layout.dim(), got: marginals.len() });
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self { layout, marginals })
    }

    /// Each block shares one marginal across its components.
    pub fn from_blocks<S: Into<String>>(
        blocks: impl IntoIterator<Item = (S, usize, Marginal)>,
    ) -> Result<Self> {
        let mut names = Vec::new();
        let mut marginals = Vec::new();
        for (name, len, m) in blocks {
            names.push((name.into(), len));
            marginals.extend(std::iter::repeat_n(m, len));
        }
        Self::new(Arc::new(BlockLayout::new(names)?), marginals)
    }

    pub fn iid(name: &str, dim: usize, m: Marginal) -> Result<Self> {
        Self::from_blocks([(name, dim, m)])
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn layout(&self) -> &Arc<BlockLayout> {
        &self.layout
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn marginal(&self, j: usize) -> &Marginal {
        &self.marginals[j]
    }

    /// `log p(theta)`, checking the dimension.
    pub fn log_density(&self, theta: &ParamVector) -> Result<f64> {
        if theta.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: theta.dim() });
        }
        Ok(self.ln_density(theta.values()))
    }

    /// Unchecked version for the sampler hot loop. Stops at the first
    /// component outside its support.
    pub fn ln_density(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim());
        let mut acc = 0.0;
        for (m, &x) in self.marginals.iter().zip(theta) {
            let l = m.ln_pdf(x);
            if l == f64::NEG_INFINITY {
                return l;
            }
            acc += l;
        }
        acc
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let values = self.marginals.iter().map(|m| m.sample(rng)).collect();
        ParamVector::new_unchecked(values, self.layout.clone())
    }

    pub fn variances(&self) -> Vec<f64> {
        self.marginals.iter().map(Marginal::variance).collect()
    }

    pub fn param(&self, values: Vec<f64>) -> Result<ParamVector> {
        ParamVector::new(values, self.layout.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    fn hanoi_like() -> BlockPrior {
        BlockPrior::from_blocks([
            ("demand", 3, Marginal::gaussian(0.75, 0.15).unwrap()),
            ("leak_size", 2, Marginal::exponential(0.002).unwrap()),
            ("leak_pos", 2, Marginal::uniform(0.0, 1.0).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn layout_tiles_dimension() {
        let p = hanoi_like();
        assert_eq!(p.dim(), 7);
        assert_eq!(p.layout().range("leak_size"), Some(3..5));
        assert!(BlockLayout::new([("a", 1), ("a", 2)]).is_err());
        assert!(BlockLayout::new([("a", 0)]).is_err());
    }

    #[test]
    fn density_is_sum_of_marginals() {
        let p = hanoi_like();
        let v = vec![0.7, 0.8, 0.9, 0.001, 0.003, 0.2, 0.9];
        let expected: f64 = p.marginals().iter().zip(&v).map(|(m, &x)| m.ln_pdf(x)).sum();
        let theta = p.param(v).unwrap();
        assert!((p.log_density(&theta).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn outside_support_is_neg_inf() {
        let p = hanoi_like();
        let theta = p.param(vec![0.7, 0.8, 0.9, -0.001, 0.003, 0.2, 0.9]).unwrap();
        assert_eq!(p.log_density(&theta).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn dimension_and_finiteness_checked() {
        let p = hanoi_like();
        assert!(matches!(p.param(vec![0.0; 6]), Err(Error::DimensionMismatch { .. })));
        let other = BlockLayout::single("x", 6).unwrap();
        let theta = ParamVector::new(vec![0.5; 6], Arc::new(other)).unwrap();
        assert!(p.log_density(&theta).is_err());
        assert!(matches!(
            p.param(vec![0.7, f64::NAN, 0.9, 0.001, 0.003, 0.2, 0.9]),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn samples_lie_in_support() {
        let p = hanoi_like();
        let mut rng = stream(3, 0, Purpose::Init, 0);
        for _ in 0..1000 {
            let t = p.sample(&mut rng);
            assert!(p.log_density(&t).unwrap().is_finite());
            assert_eq!(t.block("leak_pos").unwrap().len(), 2);
        }
    }
}
