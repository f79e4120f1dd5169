use crate::phys::Position;
use crate::wire::NodeId;

/// Seconds until two nodes moving at constant velocity drift more than `r`
/// apart. Infinite when their relative velocity is zero; zero when they are
/// already out of range.
pub fn expected_connection_time(pa: Position, va: (f64, f64), pb: Position, vb: (f64, f64), r: f64) -> f64 {
    let (dx, dy) = (pb.x - pa.x, pb.y - pa.y);
    let (wx, wy) = (vb.0 - va.0, vb.1 - va.1);
    let c = dx * dx + dy * dy - r * r;
    if c > 0.0 {
        return 0.0;
    }
    let a = wx * wx + wy * wy;
    if a == 0.0 {
        return f64::INFINITY;
    }
    let b = dx * wx + dy * wy;
    // Larger root of a t^2 + 2 b t + c = 0; c <= 0 keeps it non-negative.
    let disc = (b * b - a * c).max(0.0);
    ((-b + disc.sqrt()) / a).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityWeights {
    pub ect_weight: f64,
    pub ect_cap: f64,
    pub hop_penalty: f64,
    /// Weight of the weakest relay battery; this stands in for the energy
    /// part of the risk value.
    pub energy_weight: f64,
    pub energy_cap: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self { ect_weight: 1.0, ect_cap: 60.0, hop_penalty: 0.05, energy_weight: 1.0, energy_cap: 100.0 }
    }
}

/// A route candidate collected by the destination during its reply window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteOffer {
    pub last_hop: NodeId,
    pub min_ect: f64,
    /// Lowest residual energy among the relays; infinite for a direct link.
    pub min_energy: f64,
    pub hops: u16,
    pub arrived: f64,
}

/// Normalized bottleneck connection time plus normalized bottleneck relay
/// energy, minus a per-hop penalty.
pub fn rarp_utility(o: &RouteOffer, w: &UtilityWeights) -> f64 {
    w.ect_weight * o.min_ect.min(w.ect_cap) / w.ect_cap + w.energy_weight * o.min_energy.min(w.energy_cap) / w.energy_cap
        - w.hop_penalty * f64::from(o.hops)
}

/// Highest-utility offer; the earliest arrival wins ties.
pub fn best_offer(offers: &[RouteOffer], w: &UtilityWeights) -> Option<RouteOffer> {
    let mut best: Option<(f64, RouteOffer)> = None;
    for o in offers {
        let u = rarp_utility(o, w);
        if best.is_none_or(|(bu, _)| u > bu) {
            best = Some((u, *o));
        }
    }
    best.map(|(_, o)| o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Position {
        Position::new(x, y)
    }

    #[test]
    fn static_pair_never_disconnects() {
        assert_eq!(expected_connection_time(p(0.0, 0.0), (0.0, 0.0), p(100.0, 0.0), (0.0, 0.0), 250.0), f64::INFINITY);
    }

    #[test]
    fn head_on_divergence() {
        let t = expected_connection_time(p(0.0, 0.0), (-5.0, 0.0), p(50.0, 0.0), (5.0, 0.0), 250.0);
        assert!((t - 20.0).abs() < 1e-12);
    }

    #[test]
    fn already_out_of_range() {
        assert_eq!(expected_connection_time(p(0.0, 0.0), (1.0, 0.0), p(300.0, 0.0), (0.0, 0.0), 250.0), 0.0);
    }

    fn numeric_ect(pa: Position, va: (f64, f64), pb: Position, vb: (f64, f64), r: f64) -> f64 {
        // March forward in small steps, then bisect the crossing.
        let sep = |t: f64| {
            let ax = pa.x + va.0 * t;
            let ay = pa.y + va.1 * t;
            let bx = pb.x + vb.0 * t;
            let by = pb.y + vb.1 * t;
            (bx - ax).hypot(by - ay)
        };
        let mut lo = 0.0;
        let mut hi = 0.0;
        while sep(hi) <= r {
            lo = hi;
            hi += 0.01;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sep(mid) <= r {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn oblique_matches_numeric_trajectories() {
        let (pa, va) = (p(100.0, 200.0), (3.0, -4.0));
        let (pb, vb) = (p(180.0, 150.0), (-2.0, 6.5));
        let closed = expected_connection_time(pa, va, pb, vb, 250.0);
        let numeric = numeric_ect(pa, va, pb, vb, 250.0);
        assert!((closed - numeric).abs() < 1e-6, "{closed} vs {numeric}");
    }

    #[test]
    fn longer_connection_beats_one_fewer_hop() {
        // Equal bottleneck batteries, so only connection time and hops differ.
        let w = UtilityWeights::default();
        let a = RouteOffer { last_hop: NodeId(1), min_ect: 30.0, min_energy: 50.0, hops: 4, arrived: 0.0 };
        let b = RouteOffer { last_hop: NodeId(2), min_ect: 10.0, min_energy: 50.0, hops: 3, arrived: 0.0 };
        assert!((rarp_utility(&a, &w) - 0.8).abs() < 1e-12);
        assert!((rarp_utility(&b, &w) - (10.0 / 60.0 + 0.5 - 0.15)).abs() < 1e-12);
        assert_eq!(best_offer(&[b, a], &w).unwrap().last_hop, NodeId(1));
    }

    #[test]
    fn weak_relay_battery_costs_utility() {
        let w = UtilityWeights::default();
        let weak = RouteOffer { last_hop: NodeId(1), min_ect: 60.0, min_energy: 12.0, hops: 2, arrived: 0.0 };
        let strong = RouteOffer { last_hop: NodeId(2), min_ect: 40.0, min_energy: 80.0, hops: 3, arrived: 0.1 };
        // 1 + 0.12 - 0.10 = 1.02 against 40/60 + 0.8 - 0.15 = 1.3167
        assert!((rarp_utility(&weak, &w) - 1.02).abs() < 1e-12);
        assert!((rarp_utility(&strong, &w) - (40.0 / 60.0 + 0.8 - 0.15)).abs() < 1e-12);
        assert_eq!(best_offer(&[weak, strong], &w).unwrap().last_hop, NodeId(2));
    }

    #[test]
    fn single_offer_wins_and_empty_is_none() {
        let w = UtilityWeights::default();
        let o = RouteOffer { last_hop: NodeId(5), min_ect: 0.1, min_energy: 20.0, hops: 9, arrived: 1.0 };
        assert_eq!(best_offer(&[o], &w), Some(o));
        assert_eq!(best_offer(&[], &w), None);
    }

    #[test]
    fn ties_go_to_earliest_arrival() {
        let w = UtilityWeights::default();
        let a = RouteOffer { last_hop: NodeId(8), min_ect: f64::INFINITY, min_energy: f64::INFINITY, hops: 2, arrived: 1.0 };
        let b = RouteOffer { last_hop: NodeId(3), min_ect: f64::INFINITY, min_energy: f64::INFINITY, hops: 2, arrived: 1.1 };
        assert_eq!(best_offer(&[a, b], &w).unwrap().last_hop, NodeId(8));
    }

    proptest! {
        #[test]
        fn best_offer_is_utility_maximal(raw in proptest::collection::vec((0.0f64..120.0, 0.0f64..150.0, 1u16..12), 1..20)) {
            let w = UtilityWeights::default();
            let offers: Vec<RouteOffer> = raw.iter().enumerate().map(|(i, (e, en, h))| RouteOffer {
                last_hop: NodeId(i as u32), min_ect: *e, min_energy: *en, hops: *h, arrived: i as f64,
            }).collect();
            let best = best_offer(&offers, &w).unwrap();
            let bu = rarp_utility(&best, &w);
            for o in &offers {
                prop_assert!(rarp_utility(o, &w) <= bu);
            }
        }

        #[test]
        fn ect_keeps_pair_within_range(ax in 0.0f64..200.0, ay in 0.0f64..200.0, bx in 0.0f64..200.0, by in 0.0f64..200.0,
                                       vax in -7.0f64..7.0, vay in -7.0f64..7.0, vbx in -7.0f64..7.0, vby in -7.0f64..7.0) {
            let t = expected_connection_time(p(ax, ay), (vax, vay), p(bx, by), (vbx, vby), 250.0);
            prop_assume!(t.is_finite());
            let sep = |t: f64| ((bx + vbx * t) - (ax + vax * t)).hypot((by + vby * t) - (ay + vay * t));
            prop_assert!((sep(t) - 250.0).abs() < 1e-6);
            prop_assert!(sep(0.5 * t) <= 250.0 + 1e-9);
        }
    }
}
