use serde::{Deserialize, Serialize};

use super::PersistenceDiagram;

/// The widest gap must be at least this many times the runner-up for the
/// separation to count as clean.
pub const CLEAN_GAP_RATIO: f64 = 1.5;

/// Number of significant features in one diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BettiSummary {
    pub dim: usize,
    pub count: usize,
    pub threshold: f64,
    /// Width of the empty band that separates features from noise
    /// (0 when the threshold was given explicitly).
    pub gap_width: f64,
    /// True when the chosen gap is not clearly wider than the next one.
    pub ambiguous: bool,
}

/// Counts pairs whose persistence exceeds the threshold, plus every
/// infinite pair.
///
/// Without an explicit threshold the widest empty band is used: finite
/// persistences are sorted in decreasing order, the diagonal (persistence 0)
/// is appended as the last value, and the threshold is placed in the middle
/// of the largest absolute gap between consecutive values.
pub fn persistent_betti(diagram: &PersistenceDiagram, threshold: Option<f64>) -> BettiSummary {
    let infinite = diagram.infinite_count();
    let mut pers = diagram.finite_persistences();

    if let Some(t) = threshold {
        return BettiSummary {
            dim: diagram.dim,
            count: pers.iter().filter(|&&p| p > t).count() + infinite,
            threshold: t,
            gap_width: 0.0,
            ambiguous: false,
        };
    }
    if pers.is_empty() {
        return BettiSummary {
            dim: diagram.dim,
            count: infinite,
            threshold: 0.0,
            gap_width: 0.0,
            ambiguous: false,
        };
    }

    pers.sort_by(|a, b| b.total_cmp(a));
    pers.push(0.0);
    let gaps: Vec<f64> = pers.windows(2).map(|w| w[0] - w[1]).collect();
    // First maximum wins, so ties prefer fewer features.
    let (best, width) = gaps
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
    let runner_up = gaps
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best)
        .map(|(_, &g)| g)
        .fold(0.0, f64::max);

    BettiSummary {
        dim: diagram.dim,
        count: best + 1 + infinite,
        threshold: 0.5 * (pers[best] + pers[best + 1]),
        gap_width: width,
        ambiguous: runner_up > 0.0 && width < CLEAN_GAP_RATIO * runner_up,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diagram(pairs: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::new(1, f64::INFINITY, pairs.to_vec())
    }

    #[test]
    fn empty_diagram() {
        let s = persistent_betti(&diagram(&[]), None);
        assert_eq!((s.count, s.threshold), (0, 0.0));
    }

    #[test]
    fn unit_square_loop_with_explicit_threshold() {
        let s = persistent_betti(&diagram(&[(1.0, 2f64.sqrt())]), Some(0.2));
        assert_eq!(s.count, 1);
    }

    #[test]
    fn single_point_is_a_feature() {
        let s = persistent_betti(&diagram(&[(1.0, 2.0)]), None);
        assert_eq!(s.count, 1);
        assert_eq!(s.threshold, 0.5);
        assert!(!s.ambiguous);
    }

    #[test]
    fn eight_well_separated_features() {
        let mut pairs: Vec<(f64, f64)> = (0..8).map(|i| (0.1, 1.2 + 0.05 * i as f64)).collect();
        pairs.extend((0..30).map(|i| (0.2, 0.2 + 0.002 * i as f64 + 0.001)));
        let s = persistent_betti(&diagram(&pairs), None);
        assert_eq!(s.count, 8);
        assert!(!s.ambiguous);
        assert!(s.threshold > 0.1 && s.threshold < 1.1);
    }

    #[test]
    fn infinite_pairs_always_count() {
        let d = PersistenceDiagram::new(0, 1.0, vec![(0.0, f64::INFINITY), (0.0, 0.1), (0.0, 0.12)]);
        assert_eq!(persistent_betti(&d, Some(1.0)).count, 1);
        assert_eq!(persistent_betti(&d, None).count, 3);
    }

    #[test]
    fn close_gaps_are_flagged() {
        let s = persistent_betti(&diagram(&[(0.0, 1.0), (0.0, 0.6), (0.0, 0.25)]), None);
        assert!(s.ambiguous);
    }

    #[test]
    fn explicit_threshold_is_monotone() {
        let d = diagram(&[(0.0, 1.0), (0.0, 0.6), (0.0, 0.25), (0.1, 0.2)]);
        let counts: Vec<usize> = [0.0, 0.05, 0.2, 0.5, 0.9, 2.0]
            .iter()
            .map(|&t| persistent_betti(&d, Some(t)).count)
            .collect();
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
    }
}
