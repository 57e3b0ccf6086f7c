//! Random access-point blocking and classification of the available set into
//! layout models.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of access points in the room.
pub const AP_COUNT: usize = 4;

/// A subset of the four corner access points, stored as a bit mask.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApSet(u8);

impl ApSet {
    pub const EMPTY: ApSet = ApSet(0);
    pub const ALL: ApSet = ApSet(0b1111);

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        let mut set = ApSet::EMPTY;
        for i in indices {
            if i >= AP_COUNT {
                return Err(Error::Domain(format!("access point index {i} out of range")));
            }
            set.insert(i);
        }
        Ok(set)
    }

    pub fn from_bits(bits: u8) -> Result<Self> {
        if bits > Self::ALL.0 {
            return Err(Error::Domain(format!("access point mask {bits:#b} has bits beyond index 3")));
        }
        Ok(ApSet(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, i: usize) -> bool {
        i < AP_COUNT && self.0 & (1 << i) != 0
    }

    /// # Panics
    /// If `i` is not a valid access point index.
    pub fn insert(&mut self, i: usize) {
        assert!(i < AP_COUNT, "access point index {i} out of range");
        self.0 |= 1 << i;
    }

    pub fn remove(&mut self, i: usize) {
        if i < AP_COUNT {
            self.0 &= !(1 << i);
        }
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn complement(self) -> Self {
        ApSet(!self.0 & Self::ALL.0)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..AP_COUNT).filter(move |&i| self.contains(i))
    }

    /// All sixteen subsets in mask order.
    pub fn all_subsets() -> impl Iterator<Item = ApSet> {
        (0..=Self::ALL.0).map(ApSet)
    }
}

impl fmt::Display for ApSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// One of the six equivalence classes of available access-point sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LayoutModel(u8);

impl LayoutModel {
    /// No access point available.
    pub const NONE: LayoutModel = LayoutModel(0);
    pub const SINGLE: LayoutModel = LayoutModel(1);
    pub const ADJACENT_PAIR: LayoutModel = LayoutModel(2);
    pub const DIAGONAL_PAIR: LayoutModel = LayoutModel(3);
    pub const TRIPLE: LayoutModel = LayoutModel(4);
    pub const ALL: LayoutModel = LayoutModel(5);

    pub const COUNT: usize = 6;

    pub fn new(id: u8) -> Result<Self> {
        if id as usize >= Self::COUNT {
            return Err(Error::Domain(format!("layout model id {id} out of range 0..=5")));
        }
        Ok(LayoutModel(id))
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = LayoutModel> {
        (0..Self::COUNT as u8).map(LayoutModel)
    }

    /// Models that produce a position measurement (1 through 5).
    pub fn measuring() -> impl Iterator<Item = LayoutModel> {
        (1..Self::COUNT as u8).map(LayoutModel)
    }

    /// Every access-point subset that falls in this model, in mask order.
    pub fn subsets(self) -> Vec<ApSet> {
        ApSet::all_subsets().filter(|s| classify_layout(*s) == self).collect()
    }
}

impl TryFrom<u8> for LayoutModel {
    type Error = Error;
    fn try_from(id: u8) -> Result<Self> {
        LayoutModel::new(id)
    }
}

impl From<LayoutModel> for u8 {
    fn from(m: LayoutModel) -> u8 {
        m.0
    }
}

impl fmt::Display for LayoutModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Model-{}", self.0)
    }
}

/// Per-step, per-access-point blocking probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockingConfig {
    pub block_probability: f64,
}

impl BlockingConfig {
    pub fn new(block_probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&block_probability) {
            return Err(Error::Config(format!("blocking probability must lie in [0, 1], got {block_probability}")));
        }
        Ok(Self { block_probability })
    }
}

/// Blocks each access point independently. Always consumes four uniforms.
pub fn draw_blocked<R: Rng + ?Sized>(cfg: &BlockingConfig, rng: &mut R) -> ApSet {
    let mut set = ApSet::EMPTY;
    for i in 0..AP_COUNT {
        let u: f64 = rng.gen();
        if u < cfg.block_probability {
            set.insert(i);
        }
    }
    set
}

/// Maps an available set to its layout model. Indices 0..3 go around the
/// perimeter, so `{0,2}` and `{1,3}` are the diagonal pairs.
pub fn classify_layout(available: ApSet) -> LayoutModel {
    match available.len() {
        0 => LayoutModel::NONE,
        1 => LayoutModel::SINGLE,
        2 => {
            let bits = available.bits();
            if bits == 0b0101 || bits == 0b1010 {
                LayoutModel::DIAGONAL_PAIR
            } else {
                LayoutModel::ADJACENT_PAIR
            }
        }
        3 => LayoutModel::TRIPLE,
        _ => LayoutModel::ALL,
    }
}

/// Index-based form of [`classify_layout`] that validates its input.
pub fn classify_indices(available: &[usize]) -> Result<LayoutModel> {
    Ok(classify_layout(ApSet::from_indices(available.iter().copied())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn named_examples() {
        assert_eq!(classify_indices(&[0, 1, 2, 3]).unwrap(), LayoutModel::ALL);
        assert_eq!(classify_indices(&[0, 2]).unwrap(), LayoutModel::DIAGONAL_PAIR);
        assert_eq!(classify_indices(&[0, 1]).unwrap(), LayoutModel::ADJACENT_PAIR);
        assert_eq!(classify_indices(&[]).unwrap(), LayoutModel::NONE);
        assert!(matches!(classify_indices(&[4]), Err(Error::Domain(_))));
    }

    #[test]
    fn subset_counts_per_model() {
        let counts: Vec<usize> = LayoutModel::all().map(|m| m.subsets().len()).collect();
        assert_eq!(counts, vec![1, 4, 4, 2, 4, 1]);
    }

    #[test]
    fn invariant_under_square_symmetries() {
        // rotation by one corner and reflection across the 0-2 diagonal
        let rotate = |i: usize| (i + 1) % 4;
        let reflect = |i: usize| [0, 3, 2, 1][i];
        for s in ApSet::all_subsets() {
            for g in [&rotate as &dyn Fn(usize) -> usize, &reflect] {
                let image = ApSet::from_indices(s.iter().map(g)).unwrap();
                assert_eq!(classify_layout(s), classify_layout(image), "{s} vs {image}");
            }
        }
    }

    #[test]
    fn degenerate_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let never = BlockingConfig::new(0.0).unwrap();
        let always = BlockingConfig::new(1.0).unwrap();
        for _ in 0..1000 {
            assert_eq!(draw_blocked(&never, &mut rng), ApSet::EMPTY);
            assert_eq!(draw_blocked(&always, &mut rng), ApSet::ALL);
        }
        assert!(BlockingConfig::new(1.5).is_err());
    }

    #[test]
    fn inclusion_frequency_matches_probability() {
        // std of the frequency is sqrt(p(1-p)/n) ≈ 0.00137, so 0.01 is > 7 sigma
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = BlockingConfig::new(0.25).unwrap();
        let n = 100_000;
        let mut hits = [0usize; AP_COUNT];
        for _ in 0..n {
            for i in draw_blocked(&cfg, &mut rng).iter() {
                hits[i] += 1;
            }
        }
        for h in hits {
            let f = h as f64 / n as f64;
            assert!((f - 0.25).abs() < 0.01, "frequency {f}");
        }
    }
}
