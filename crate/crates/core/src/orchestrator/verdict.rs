//! Ablation-trend verdicts over (noise scale, student return) series.

/// True iff student return is non-increasing as alpha increases (ties
/// allowed). The series may arrive in any order; it is sorted by alpha.
pub fn ablation_verdict(series: &[(f64, f64)]) -> bool {
    assert!(series.len() >= 2, "need at least two (alpha, return) points");
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite alpha"));
    sorted.windows(2).all(|w| w[1].1 <= w[0].1)
}

/// True iff the variant return strictly exceeds the baseline return
/// (curriculum-style pairwise comparisons).
pub fn improvement_verdict(variant_return: f64, baseline_return: f64) -> bool {
    variant_return > baseline_return
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_trend_is_monotone() {
        // Returns rise as alpha falls.
        let series = [(0.4, 5896.0), (0.3, 6735.0), (0.2, 7197.0), (0.1, 7435.0)];
        assert!(ablation_verdict(&series));
    }

    #[test]
    fn constructed_violation_fails() {
        assert!(!ablation_verdict(&[(0.1, 5.0), (0.2, 7.0)]));
    }

    #[test]
    fn ties_are_allowed() {
        assert!(ablation_verdict(&[(0.1, 5.0), (0.2, 5.0), (0.3, 4.0)]));
    }

    #[test]
    fn order_of_points_does_not_matter() {
        let shuffled = [(0.2, 7197.0), (0.4, 5896.0), (0.1, 7435.0), (0.3, 6735.0)];
        assert!(ablation_verdict(&shuffled));
    }

    #[test]
    fn curriculum_comparison() {
        assert!(improvement_verdict(455.13, 222.61));
        assert!(!improvement_verdict(222.61, 455.13));
    }
}
