//! Joint tail sample from simultaneous fades, and correlation checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::stats::pearson_correlation;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPair {
    pub x: f64,
    pub y: f64,
    pub window: i64,
}

/// One pair per window in which both receivers fade below their thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointTailSample {
    pub pairs: Vec<JointPair>,
    pub u_x: f64,
    pub u_y: f64,
    pub window_len: usize,
}

impl JointTailSample {
    pub fn xs(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.y).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn deepest_per_window(minima: &[(i64, f64)], u: f64, m: i64) -> BTreeMap<i64, f64> {
    let mut out = BTreeMap::new();
    for &(t, v) in minima.iter().filter(|(_, v)| *v < u) {
        let slot = out.entry(t.div_euclid(m)).or_insert(v);
        if v < *slot {
            *slot = v;
        }
    }
    out
}

/// Splits time into consecutive windows of `window_len` steps and keeps
/// the windows in which both series have a cluster minimum below their
/// threshold, pairing the deepest minimum of each.
pub fn align_joint_exceedances(
    minima_x: &[(i64, f64)],
    minima_y: &[(i64, f64)],
    u_x: f64,
    u_y: f64,
    window_len: usize,
) -> Result<JointTailSample> {
    if window_len == 0 {
        return Err(Error::domain("window length must be at least 1"));
    }
    let m = window_len as i64;
    let wx = deepest_per_window(minima_x, u_x, m);
    let wy = deepest_per_window(minima_y, u_y, m);
    let pairs = wx
        .iter()
        .filter_map(|(w, &x)| wy.get(w).map(|&y| JointPair { x, y, window: *w }))
        .collect();
    Ok(JointTailSample {
        pairs,
        u_x,
        u_y,
        window_len,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiversityVerdict {
    Suggested,
    Pointless,
    IndependentLinks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityDecision {
    pub verdict: DiversityVerdict,
    pub rationale: String,
}

/// Whether two receive antennas are worth combining, judged from the
/// correlation of their full traces.
pub fn spatial_diversity_feasible(rho_total: f64) -> DiversityDecision {
    let (verdict, rationale) = if rho_total > 0.5 {
        (
            DiversityVerdict::Pointless,
            format!("correlation {rho_total:.4} > 0.5: the links fade together, a second antenna adds little"),
        )
    } else if rho_total >= 0.1 {
        (
            DiversityVerdict::Suggested,
            format!("correlation {rho_total:.4} in [0.1, 0.5]: partially dependent links, diversity helps and joint tails need modeling"),
        )
    } else {
        (
            DiversityVerdict::IndependentLinks,
            format!("correlation {rho_total:.4} < 0.1: links are nearly independent, marginal models suffice"),
        )
    };
    DiversityDecision { verdict, rationale }
}

/// True when the tail correlation magnitude strictly exceeds `critical`.
pub fn tail_dependence_needed(rho_tail: f64, critical: f64) -> bool {
    rho_tail.abs() > critical
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disjoint_windows_give_nothing() {
        let s = align_joint_exceedances(&[(35, -20.0)], &[(55, -40.0)], -15.0, -30.0, 10).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn shared_window_gives_one_pair() {
        let s = align_joint_exceedances(&[(71, -20.0)], &[(78, -40.0)], -15.0, -30.0, 10).unwrap();
        assert_eq!(s.pairs, vec![JointPair { x: -20.0, y: -40.0, window: 7 }]);
    }

    #[test]
    fn three_window_trace() {
        // Windows of 4 steps; both fade in windows 0 and 2, only x in window 1.
        let mx = [(1, -16.0), (2, -18.0), (5, -17.0), (9, -19.0)];
        let my = [(3, -31.0), (10, -35.0), (11, -33.0), (6, -29.0)];
        let s = align_joint_exceedances(&mx, &my, -15.0, -30.0, 4).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s.pairs[0].x, s.pairs[0].y), (-18.0, -31.0));
        assert_eq!((s.pairs[1].x, s.pairs[1].y), (-19.0, -35.0));
        assert!(align_joint_exceedances(&mx, &my, -15.0, -30.0, 0).is_err());
    }

    #[test]
    fn diversity_rules() {
        assert_eq!(spatial_diversity_feasible(0.2766).verdict, DiversityVerdict::Suggested);
        assert_eq!(spatial_diversity_feasible(0.7).verdict, DiversityVerdict::Pointless);
        assert_eq!(spatial_diversity_feasible(0.05).verdict, DiversityVerdict::IndependentLinks);
    }

    #[test]
    fn tail_dependence_rule() {
        assert!(tail_dependence_needed(0.3957, 0.05));
        assert!(!tail_dependence_needed(0.0, 0.05));
        assert!(!tail_dependence_needed(0.05, 0.05));
    }
}
