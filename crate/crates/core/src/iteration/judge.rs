use serde::{Deserialize, Serialize};

use crate::world::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    pub success: bool,
    /// Mean distance over the index-aligned prefix; `None` if nothing was
    /// predicted.
    pub ne: Option<f64>,
}

/// Success requires the same number of goals, in order, each within
/// `tolerance` meters of the truth.
pub fn judge_success(predicted: &[Point], truth: &[Point], tolerance: f64) -> Judgement {
    debug_assert!(tolerance > 0.0);
    let distances: Vec<f64> = predicted.iter().zip(truth).map(|(p, t)| p.distance(t)).collect();
    let ne = (!distances.is_empty()).then(|| distances.iter().sum::<f64>() / distances.len() as f64);
    let success = predicted.len() == truth.len() && distances.iter().all(|&d| d <= tolerance);
    Judgement { success, ne }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match() {
        let pts = [Point::new(1.0, 2.0), Point::new(3.0, 4.0)];
        assert_eq!(judge_success(&pts, &pts, 0.5), Judgement { success: true, ne: Some(0.0) });
    }

    #[test]
    fn three_four_five() {
        let j = judge_success(&[Point::new(3.0, 4.0)], &[Point::new(0.0, 0.0)], 0.5);
        assert_eq!(j, Judgement { success: false, ne: Some(5.0) });
    }

    #[test]
    fn count_mismatch_fails() {
        let truth = [Point::new(1.0, 1.0), Point::new(2.0, 2.0)];
        let j = judge_success(&truth[..1], &truth, 0.5);
        assert_eq!(j, Judgement { success: false, ne: Some(0.0) });
        let j = judge_success(&[], &truth, 0.5);
        assert_eq!(j, Judgement { success: false, ne: None });
    }

    #[test]
    fn tolerance_is_inclusive_and_ordered() {
        let truth = [Point::new(0.0, 0.0), Point::new(10.0, 0.0)];
        let near = [Point::new(0.5, 0.0), Point::new(10.0, 0.3)];
        assert!(judge_success(&near, &truth, 0.5).success);
        let swapped = [truth[1], truth[0]];
        assert!(!judge_success(&swapped, &truth, 0.5).success);
    }
}
