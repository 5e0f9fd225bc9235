//! Property tests against the independent references in `evline-oracles`.

mod common;

use std::collections::HashMap;

use evline_core::cluster::{resolve_candidates, Cluster, ClusterConfig};
use evline_core::geometry::{
    connected_length, line_direction, longest_bin_chain, symmetric_eigen3, EventAccumulator, EventWindow, PlaneFit,
    Sym3,
};
use evline_core::line::{audit_history, merge_lines, Line, LineConfig};
use evline_core::{
    Event, EventFilter, FilterConfig, LineState, Micros, Polarity, Sae, SensorSize, TimeScale, TrackerConfig,
};
use evline_oracles::{batch_moments, bisection_eigenvalues, brute_force_bin_chain, nalgebra_eigen};
use evline_oracles::{NaiveFilter, NaiveFilterParams};
use proptest::prelude::*;

use common::{edge_stream, run_with_boundaries, Edge};

fn polarity(on: bool) -> Polarity {
    if on {
        Polarity::On
    } else {
        Polarity::Off
    }
}

/// `(dt, x, y, on)` steps with bursts of short gaps.
fn raw_stream(max_len: usize, w: u16, h: u16) -> impl Strategy<Value = Vec<(i64, u16, u16, bool)>> {
    prop::collection::vec(
        (prop_oneof![3 => 0i64..20, 1 => 0i64..3000], 0..w, 0..h, any::<bool>()),
        1..max_len,
    )
}

type EventKey = (Micros, u16, u16, u8);

fn sorted_key(e: &Event) -> EventKey {
    (e.t, e.x, e.y, e.polarity.bit())
}

fn multiset(events: impl IntoIterator<Item = Event>) -> Vec<EventKey> {
    let mut v: Vec<_> = events.into_iter().map(|e| sorted_key(&e)).collect();
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn filter_matches_naive_reference(
        steps in raw_stream(3000, 12, 10),
        half_extent in 1u16..3,
        min_support in 1usize..5,
        record in any::<bool>(),
    ) {
        let size = SensorSize::new(12, 10);
        let cfg = FilterConfig {
            neighborhood_half_extent: half_extent,
            neighborhood_min_support: min_support,
            update_sae_on_suppress: record,
            ..FilterConfig::default()
        };
        let mut filter = EventFilter::new(size, cfg.clone());
        let mut naive = NaiveFilter::new(NaiveFilterParams {
            width: size.width,
            height: size.height,
            refractory_same_us: cfg.refractory_same_polarity_us,
            refractory_opposite_us: cfg.refractory_opposite_polarity_us,
            half_extent: half_extent as i32,
            age_us: cfg.neighborhood_age_us,
            min_support,
            record_suppressed: record,
        });
        let mut t = 0;
        for (i, (dt, x, y, on)) in steps.into_iter().enumerate() {
            t += dt;
            let got = filter.filter_event(&Event::new(x, y, t, polarity(on))).passed();
            prop_assert_eq!(got, naive.decide(x, y, t, on), "event {}", i);
        }
    }

    #[test]
    fn sae_window_matches_scan(
        steps in raw_stream(2000, 16, 12),
        queries in prop::collection::vec((0u16..16, 0u16..12, 0u16..4, 0i64..40_000), 1..50),
    ) {
        let size = SensorSize::new(16, 12);
        let sae = Sae::new(size);
        let mut raw = Vec::new();
        let mut t = 0;
        for (dt, x, y, on) in steps {
            // out-of-order arrivals up to 1 ms back
            t += dt;
            let e = Event::new(x, y, (t - (x as i64 * 37) % 1000).max(0), polarity(on));
            sae.update(&e).unwrap();
            raw.push(e);
        }
        for (cx, cy, r, back) in queries {
            let min_t = t - back;
            let mut newest: HashMap<(u16, u16), Micros> = HashMap::new();
            for e in &raw {
                let n = newest.entry((e.x, e.y)).or_insert(Micros::MIN);
                *n = (*n).max(e.t);
            }
            let want = newest
                .iter()
                .filter(|(&(x, y), &nt)| {
                    (x as i32 - cx as i32).abs() <= r as i32
                        && (y as i32 - cy as i32).abs() <= r as i32
                        && (x, y) != (cx, cy)
                        && nt >= min_t
                })
                .count();
            prop_assert_eq!(sae.query_window(cx, cy, r, min_t), want);
        }
    }

    #[test]
    fn sae_state_ignores_insertion_order(
        pixels in prop::collection::vec((0u16..8, 0u16..6), 1..200)
            .prop_flat_map(|p| {
                let n = p.len();
                (Just(p), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
            }),
    ) {
        let (pixels, order) = pixels;
        let size = SensorSize::new(8, 6);
        let events: Vec<Event> = pixels
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Event::on(x, y, i as Micros * 10))
            .collect();
        let (a, b) = (Sae::new(size), Sae::new(size));
        events.iter().for_each(|e| a.update(e).unwrap());
        order.iter().for_each(|&i| b.update(&events[i]).unwrap());
        for y in 0..6 {
            for x in 0..8 {
                prop_assert_eq!(a.get(x, y), b.get(x, y));
            }
        }
    }

    #[test]
    fn eigenpairs_match_references(
        b in prop::array::uniform3(prop::array::uniform3(-10.0f64..10.0)),
        rank_deficient in any::<bool>(),
        exponent in -3i32..4,
    ) {
        let mut b = b;
        if rank_deficient {
            b[2] = b[1].map(|v| v * 0.5);
        }
        let scale = 10f64.powi(exponent);
        let mut m = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] = scale * (0..3).map(|k| b[k][r] * b[k][c]).sum::<f64>();
            }
        }
        let norm = m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let tol = 1e-9 * norm;
        let sym = Sym3::from_rows(m);
        let e = symmetric_eigen3(&sym);
        let (nv, _) = nalgebra_eigen(m);
        let bv = bisection_eigenvalues(m);
        for k in 0..3 {
            prop_assert!((e.values[k] - nv[k]).abs() <= tol, "{:?} vs {:?}", e.values, nv);
            prop_assert!((e.values[k] - bv[k]).abs() <= tol, "{:?} vs {:?}", e.values, bv);
            let v = e.vectors[k];
            let mv = sym.mul_vec(v);
            let residual = (0..3).map(|j| (mv[j] - e.values[k] * v[j]).powi(2)).sum::<f64>().sqrt();
            prop_assert!(residual <= tol, "residual {}", residual);
            for j in 0..3 {
                let dot: f64 = (0..3).map(|c| e.vectors[k][c] * e.vectors[j][c]).sum();
                let want = if j == k { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn direction_ignores_normal_sign(n in prop::array::uniform3(-1.0f64..1.0)) {
        let flipped = n.map(|v| -v);
        match (line_direction(n), line_direction(flipped)) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a, b),
        }
    }

    #[test]
    fn bin_chain_matches_brute_force(bins in prop::collection::vec(-30i64..30, 0..60)) {
        let mut sorted = bins.clone();
        prop_assert_eq!(longest_bin_chain(&mut sorted), brute_force_bin_chain(&bins));
    }

    #[test]
    fn connected_length_matches_brute_force(
        angle in 0.0f64..std::f64::consts::PI,
        steps in prop::collection::vec(prop_oneof![8 => 0.0f64..1.5, 1 => 2.0f64..9.0], 3..80),
        bin in prop::sample::select(vec![1.0, 2.0, 3.5]),
    ) {
        let d = [angle.cos(), angle.sin()];
        let mut s = 0.0;
        let events: Vec<Event> = steps
            .iter()
            .enumerate()
            .map(|(k, step)| {
                s += step;
                let x = (100.0 + d[0] * (s - 40.0)).round() as u16;
                let y = (100.0 + d[1] * (s - 40.0)).round() as u16;
                Event::on(x, y, k as Micros * 100)
            })
            .collect();
        let mut acc = EventAccumulator::<f64>::new(TimeScale::default());
        events.iter().for_each(|e| acc.add(e));
        if let Ok(fit) = PlaneFit::fit(&acc) {
            let g = fit.centroid_xy();
            let bins: Vec<i64> = events
                .iter()
                .map(|e| (((e.x as f64 - g[0]) * d[0] + (e.y as f64 - g[1]) * d[1]) / bin).floor() as i64)
                .collect();
            let want = brute_force_bin_chain(&bins) as f64 * bin;
            prop_assert_eq!(connected_length(&events, &fit, d, bin), want);
        }
    }

    #[test]
    fn incremental_moments_match_batch(
        ops in prop::collection::vec((any::<bool>(), 0u16..300, 0u16..200, 0i64..500), 1..2000),
    ) {
        let scale = TimeScale::default();
        let mut acc = EventAccumulator::<f64>::new(scale);
        let mut window = EventWindow::<f64>::new(scale);
        let mut live = std::collections::VecDeque::new();
        let mut t = 1_000_000_000;
        for (add, x, y, dt) in ops {
            if add || live.len() < 3 {
                t += dt;
                let e = Event::on(x, y, t);
                acc.add(&e);
                window.push(e);
                live.push_back(e);
            } else {
                let e: Event = live.pop_front().expect("non-empty");
                acc.remove(&e);
                window.drop_older_than(e.t + 1);
                while live.front().is_some_and(|f: &Event| f.t <= e.t) {
                    acc.remove(&live.pop_front().expect("checked"));
                }
            }
        }
        let points: Vec<[f64; 3]> = live
            .iter()
            .map(|e| [e.x as f64, e.y as f64, scale.scale::<f64>(e.t)])
            .collect();
        prop_assert_eq!(window.len(), live.len());
        if let Some((_, want)) = batch_moments(&points) {
            let norm = want.iter().flatten().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            for got in [acc.covariance().unwrap().to_rows(), window.accumulator().covariance().unwrap().to_rows()] {
                let diff = (0..3)
                    .flat_map(|r| (0..3).map(move |c| (r, c)))
                    .map(|(r, c)| (got[r][c] - want[r][c]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                prop_assert!(diff / norm <= 1e-6, "relative error {}", diff / norm);
            }
        }
    }
}

/// A straight run of `n` events from `(x0, y)` with slope `dy_per_px`.
fn segment(x0: u16, y: f64, dy_per_px: f64, n: u16, t0: Micros) -> Vec<Event> {
    (0..n)
        .map(|i| Event::on(x0 + i, (y + dy_per_px * i as f64).round() as u16, t0 + i as Micros * 50))
        .collect()
}

fn clusters_from(specs: &[(u16, f64, f64)]) -> Vec<Cluster<f64>> {
    specs
        .iter()
        .enumerate()
        .map(|(k, &(x0, y, slope))| {
            Cluster::from_events(k as u64, 0, TimeScale::default(), segment(x0, y, slope, 12, k as Micros * 7))
                .expect("non-degenerate")
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cluster_merge_is_order_independent(
        specs in prop::collection::vec((10u16..20, 40.0f64..42.0, -0.05f64..0.05), 2..6)
            .prop_flat_map(|s| {
                let n = s.len();
                (Just(s), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
            }),
    ) {
        let (specs, order) = specs;
        let e = Event::on(30, 41, 10_000);
        let cfg = ClusterConfig::default();
        let union = multiset(
            clusters_from(&specs).iter().flat_map(|c| c.events().iter().copied().collect::<Vec<_>>()).chain([e]),
        );
        for perm in [(0..specs.len()).collect::<Vec<_>>(), order] {
            let mut clusters = clusters_from(&specs);
            let mut refs: Vec<&mut Cluster<f64>> = Vec::new();
            let mut slots: Vec<Option<&mut Cluster<f64>>> = clusters.iter_mut().map(Some).collect();
            for &i in &perm {
                refs.push(slots[i].take().expect("permutation"));
            }
            let (target, absorbed) = resolve_candidates(&e, &mut refs, &cfg).expect("candidates");
            prop_assert_eq!(absorbed.len(), specs.len() - 1);
            prop_assert_eq!(multiset(refs[target].events().iter().copied()), union.clone());
        }
    }
}

fn line_at(key: u64, x: f64, y0: u16, len: u16) -> Line<f64> {
    // a half-pixel position alternates between two columns
    let column = move |y: u16| x.floor() as u16 + (y.is_multiple_of(2) && x.fract() > 0.0) as u16;
    let events: Vec<Event> = (0..4)
        .flat_map(|k| (y0..y0 + len).map(move |y| Event::on(column(y), y, k * 1000 + y as Micros % 7)))
        .collect();
    let mut c = Cluster::from_events(key, 0, TimeScale::default(), events).expect("non-degenerate");
    Line::promote(&mut c, key, 4000, &LineConfig::default()).expect("promotable")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn line_merge_is_order_independent(
        lines in prop::collection::vec((prop::sample::select(vec![50.0, 51.0, 52.5, 54.0, 80.0]), 10u16..40, 40u16..80), 2..6)
            .prop_flat_map(|s| {
                let n = s.len();
                (Just(s), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
            }),
    ) {
        let (specs, order) = lines;
        let cfg = LineConfig::default();
        let outcome = |perm: &[usize]| {
            let mut ls: Vec<Line<f64>> = perm
                .iter()
                .map(|&i| line_at(i as u64 + 1, specs[i].0, specs[i].1, specs[i].2))
                .collect();
            let mut refs: Vec<&mut Line<f64>> = ls.iter_mut().collect();
            merge_lines(&mut refs, 5000, &cfg);
            let mut out: Vec<(u64, Vec<EventKey>)> = ls
                .iter()
                .filter(|l| !l.is_empty())
                .map(|l| (l.key(), multiset(l.events().iter().copied())))
                .collect();
            out.sort();
            for l in &ls {
                assert!(audit_history(l.history()).is_ok());
            }
            out
        };
        let identity: Vec<usize> = (0..specs.len()).collect();
        prop_assert_eq!(outcome(&identity), outcome(&order));
    }
}

fn edge_strategy() -> impl Strategy<Value = Edge> {
    (any::<bool>(), 30.0f64..150.0, 0u16..40, 40u16..110, -0.3f64..0.3, 0u32..300, 100u32..700).prop_map(
        |(vertical, pos, from, len, speed_px_ms, start_ms, dur_ms)| Edge {
            vertical,
            pos,
            from,
            len,
            speed_px_ms,
            start_ms,
            dur_ms,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn life_cycle_invariants_hold(
        edges in prop::collection::vec(edge_strategy(), 1..4),
        period_us in prop::sample::select(vec![4000i64, 8000, 16_000]),
        hibernation in any::<bool>(),
    ) {
        let cfg = TrackerConfig {
            sensor: SensorSize::new(200, 160),
            hibernation_enabled: hibernation,
            ..TrackerConfig::default()
        };
        let events = edge_stream(&edges, period_us, 200, 160);
        let (tr, snaps) = run_with_boundaries(cfg.clone(), &events);

        let histories = tr.histories();
        let mut activations = Vec::new();
        let mut ids = Vec::new();
        for h in &histories {
            prop_assert!(audit_history(&h.transitions).is_ok(), "{:?}", h);
            if let Some(id) = h.id {
                ids.push(id);
            }
            for t in &h.transitions {
                if t.from == Some(LineState::Initializing) && t.to == Some(LineState::Active) {
                    activations.push((t.t, h.id.expect("active lines have ids")));
                }
                if !hibernation {
                    prop_assert!(t.to != Some(LineState::Hibernated));
                }
            }
        }
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), n, "duplicate ids");
        activations.sort_unstable();
        prop_assert!(activations.windows(2).all(|w| w[0].1 < w[1].1), "{:?}", activations);

        let age = cfg.line.cleanup_event_age_us;
        for s in &snaps {
            for l in s.lines.iter().filter(|l| l.state == LineState::Active) {
                prop_assert!(l.oldest_event.is_some_and(|o| o >= s.t - age), "line {:?} at {}", l.id, s.t);
            }
        }

        let (_, again) = run_with_boundaries(cfg, &events);
        prop_assert!(snaps == again, "runs differ");
    }
}
