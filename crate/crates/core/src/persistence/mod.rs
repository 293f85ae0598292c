//! Vietoris–Rips persistent homology in dimensions 0 and 1.

mod betti;
mod brute;
mod rips;

pub use betti::{persistent_betti, BettiSummary, CLEAN_GAP_RATIO};
pub use brute::{brute_force_persistence, BRUTE_FORCE_MAX_POINTS};
pub use rips::{enclosing_radius, vr_persistence, ScaleCap};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Birth/death pairs of one homology dimension. An infinite death is
/// stored as `f64::INFINITY` and serialized as `null`.
///
/// `scale_cap` is the effective truncation of the filtration. It is infinite
/// (`null` in JSON) when the cap did not change the diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    pub dim: usize,
    pub scale_cap: f64,
    pub pairs: Vec<(f64, f64)>,
}

impl PersistenceDiagram {
    pub fn new(dim: usize, scale_cap: f64, mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.retain(|&(b, d)| b != d);
        Self { dim, scale_cap, pairs }
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// Pairs sorted by (birth, death), for order-independent comparison.
    pub fn sorted_pairs(&self) -> Vec<(f64, f64)> {
        let mut p = self.pairs.clone();
        p.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        p
    }

    pub fn finite_pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pairs.iter().copied().filter(|p| p.1.is_finite())
    }

    pub fn infinite_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.1.is_infinite()).count()
    }

    /// Persistence (`death - birth`) of each finite pair.
    pub fn finite_persistences(&self) -> Vec<f64> {
        self.finite_pairs().map(|(b, d)| d - b).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct DiagramRepr {
    dim: usize,
    scale_cap: Option<f64>,
    pairs: Vec<(f64, Option<f64>)>,
}

impl Serialize for PersistenceDiagram {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DiagramRepr {
            dim: self.dim,
            scale_cap: self.scale_cap.is_finite().then_some(self.scale_cap),
            pairs: self
                .pairs
                .iter()
                .map(|&(b, d)| (b, d.is_finite().then_some(d)))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PersistenceDiagram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = DiagramRepr::deserialize(d)?;
        for &(b, death) in &repr.pairs {
            if !b.is_finite() || b < 0.0 || death.is_some_and(|x| x < b) {
                return Err(serde::de::Error::custom(format!(
                    "invalid persistence pair ({b}, {death:?})"
                )));
            }
        }
        Ok(PersistenceDiagram::new(
            repr.dim,
            repr.scale_cap.unwrap_or(f64::INFINITY),
            repr.pairs
                .into_iter()
                .map(|(b, d)| (b, d.unwrap_or(f64::INFINITY)))
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_encodes_infinity_as_null() {
        let d = PersistenceDiagram::new(0, 2.5, vec![(0.0, 1.0), (0.0, f64::INFINITY)]);
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"dim":0,"scale_cap":2.5,"pairs":[[0.0,1.0],[0.0,null]]}"#);
        let back: PersistenceDiagram = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn zero_persistence_pairs_are_dropped() {
        let d = PersistenceDiagram::new(1, 1.0, vec![(0.5, 0.5), (0.2, 0.7)]);
        assert_eq!(d.pairs, vec![(0.2, 0.7)]);
    }

    #[test]
    fn json_rejects_inverted_pairs() {
        assert!(serde_json::from_str::<PersistenceDiagram>(r#"{"dim":1,"scale_cap":1,"pairs":[[2,1]]}"#).is_err());
    }
}
