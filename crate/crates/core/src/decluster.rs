//! Runs declustering of a dependent power trace into cluster minima.

use serde::{Deserialize, Serialize};

use crate::series::PowerSeries;

/// A run of below-threshold samples treated as one fade event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Time step of the first below-threshold sample.
    pub start: i64,
    /// Time step of the last below-threshold sample.
    pub end: i64,
    pub minimum: f64,
    pub min_index: i64,
}

/// Groups samples strictly below `u` into clusters.
///
/// A cluster opens at the first sample below `u`. Once a sample at or above
/// `u` is seen, the cluster stays open for `mg` further samples and closes
/// if all of them are also at or above `u`. A cluster still open at the end
/// of the series closes there. `mg` of zero is treated as one.
pub fn decluster(series: &PowerSeries, u: f64, mg: usize) -> Vec<Cluster> {
    let mg = mg.max(1);
    let mut out = Vec::new();
    let mut open: Option<Cluster> = None;
    let mut above_run = 0usize;
    for s in series.samples() {
        if s.dbm < u {
            above_run = 0;
            match open.as_mut() {
                Some(c) => {
                    c.end = s.t;
                    if s.dbm < c.minimum {
                        c.minimum = s.dbm;
                        c.min_index = s.t;
                    }
                }
                None => {
                    open = Some(Cluster {
                        start: s.t,
                        end: s.t,
                        minimum: s.dbm,
                        min_index: s.t,
                    })
                }
            }
        } else if open.is_some() {
            above_run += 1;
            if above_run > mg {
                out.extend(open.take());
                above_run = 0;
            }
        }
    }
    out.extend(open);
    out
}

/// One `(time step, dBm)` minimum per cluster, in order.
pub fn cluster_minima(clusters: &[Cluster]) -> Vec<(i64, f64)> {
    clusters.iter().map(|c| (c.min_index, c.minimum)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(v: &[f64]) -> PowerSeries {
        PowerSeries::from_values(v, 1.0).unwrap()
    }

    #[test]
    fn hand_traced_example() {
        let c = decluster(&series(&[-16.0, -17.0, -14.0, -14.0, -18.0]), -15.0, 1);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].start, c[0].end, c[0].minimum, c[0].min_index), (0, 1, -17.0, 1));
        assert_eq!((c[1].start, c[1].minimum, c[1].min_index), (4, -18.0, 4));
        assert_eq!(cluster_minima(&c), vec![(1, -17.0), (4, -18.0)]);
    }

    #[test]
    fn all_above_gives_nothing() {
        assert!(decluster(&series(&[-1.0, -2.0, -3.0]), -15.0, 2).is_empty());
        assert!(cluster_minima(&[]).is_empty());
    }

    #[test]
    fn single_run_and_earliest_tie() {
        let c = decluster(&series(&[-20.0, -20.0, -20.0]), -15.0, 2);
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].minimum, c[0].min_index), (-20.0, 0));
    }

    #[test]
    fn short_gap_is_bridged() {
        let c = decluster(&series(&[-16.0, -14.0, -17.0, -14.0, -14.0, -14.0]), -15.0, 1);
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].minimum, c[0].end), (-17.0, 2));
    }

    proptest! {
        #[test]
        fn clustering_invariants(v in prop::collection::vec(-30.0f64..0.0, 1..300), mg in 1usize..6) {
            let s = series(&v);
            let u = -15.0;
            let c = decluster(&s, u, mg);
            // Each below sample falls in exactly one cluster.
            for (t, x) in v.iter().enumerate() {
                let n = c.iter().filter(|k| k.start <= t as i64 && t as i64 <= k.end).count();
                if *x < u { prop_assert_eq!(n, 1); }
                prop_assert!(n <= 1);
            }
            // Gaps between clusters exceed mg samples.
            for w in c.windows(2) {
                prop_assert!(w[1].start - w[0].end > mg as i64);
            }
            for k in &c {
                prop_assert!(k.start <= k.min_index && k.min_index <= k.end && k.minimum < u);
            }
            let c2 = decluster(&s, u, mg + 1);
            prop_assert!(c2.len() <= c.len());
        }
    }
}
