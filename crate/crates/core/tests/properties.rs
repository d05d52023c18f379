use std::collections::HashSet;

use proptest::prelude::*;

use pdc::engine::{super_split, EngineParams, Optimizer};
use pdc::hierarchy::{collect_clusters, term_scores};
use pdc::termselect::benjamini_hochberg;
use pdc::{log_odds, LevelSnapshot, SigmaMatrix, TermStats};

fn matrix_strategy(max_order: usize) -> impl Strategy<Value = SigmaMatrix> {
    (2..=max_order).prop_flat_map(|n| {
        prop::collection::vec(-4.0f64..4.0, n * (n - 1) / 2).prop_map(move |vals| {
            // from_fn visits the strict lower triangle row by row
            let mut it = vals.into_iter();
            SigmaMatrix::from_fn(n, |_, _| it.next().unwrap())
        })
    })
}

fn stats_strategy() -> impl Strategy<Value = TermStats> {
    (1u64..500)
        .prop_flat_map(|n| (Just(n), 0..=n, 0..=n))
        .prop_flat_map(|(n, s, t)| {
            let lo = (s + t).saturating_sub(n);
            (Just(n), Just(s), Just(t), lo..=s.min(t))
        })
        .prop_map(|(n, s, t, st)| TermStats::new(n, s, t, st).unwrap())
}

fn recount(m: &SigmaMatrix, labels: &[usize], factor: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            if labels[i] == labels[j] {
                s += m.base(i, j) + factor;
            }
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_odds_sign_and_symmetry(t in stats_strategy()) {
        let v = log_odds(&t);
        let d = t.n_st as i128 * t.n_docs as i128 - t.n_s as i128 * t.n_t as i128;
        prop_assert_eq!(v > 0.0, d > 0);
        prop_assert_eq!(v < 0.0, d < 0);
        prop_assert_eq!(v, log_odds(&t.swapped()));
        prop_assert!(v.is_finite());
    }

    #[test]
    fn bookkeeping_survives_every_split(m in matrix_strategy(30), thr in 1usize..6, seed in any::<u64>()) {
        let params = EngineParams { rng_seed: seed, ..Default::default() };
        let mut opt = Optimizer::new(&m, &params);
        opt.set_factor(0.0);
        opt.one_cluster();
        opt.master_split(1);
        prop_assert!(opt.state().check_bookkeeping(&m, 1e-9).is_ok());
        let mut level = 0;
        while opt.largest_cluster() > thr {
            level += 1;
            opt.set_factor(-(level as f64) * 0.5);
            opt.master_split(thr);
            let check = opt.state().check_bookkeeping(&m, 1e-9);
            prop_assert!(check.is_ok(), "{:?}", check);
        }
    }

    #[test]
    fn snapshots_nest_and_report_true_objective(m in matrix_strategy(24), thr in 1usize..5, seed in any::<u64>()) {
        let params = EngineParams { rng_seed: seed, ..Default::default() };
        let run = super_split(&m, thr, 0.5, &params).unwrap();
        for (k, s) in run.snapshots.iter().enumerate() {
            prop_assert_eq!(s.level, k);
            prop_assert!((s.objective - recount(&m, &s.labels, s.factor)).abs() <= 1e-9);
            for (i, &l) in s.labels.iter().enumerate() {
                prop_assert!(l <= i && s.labels[l] == l);
            }
            if k > 0 {
                let prev = &run.snapshots[k - 1].labels;
                for c in s.clusters() {
                    prop_assert!(c.iter().all(|&p| prev[p] == prev[c[0]]));
                }
            }
        }
        let last = run.snapshots.last().unwrap();
        prop_assert!(last.clusters().iter().all(|c| c.len() <= thr));
    }

    #[test]
    fn same_seed_same_run(m in matrix_strategy(20), seed in any::<u64>()) {
        let params = EngineParams { rng_seed: seed, ..Default::default() };
        let a = super_split(&m, 3, 0.5, &params).unwrap();
        let b = super_split(&m, 3, 0.5, &params).unwrap();
        prop_assert_eq!(a.snapshots, b.snapshots);
    }

    #[test]
    fn hierarchy_keeps_first_appearances(m in matrix_strategy(24), seed in any::<u64>()) {
        let params = EngineParams { rng_seed: seed, ..Default::default() };
        let run = super_split(&m, 2, 0.5, &params).unwrap();
        let h = collect_clusters(&run.snapshots, &m).unwrap();
        prop_assert!(h.validate().is_ok());
        let mut seen = HashSet::new();
        let terms: Vec<String> = (0..m.order()).map(|i| format!("t{i:03}")).collect();
        for r in &h.records {
            prop_assert!(seen.insert(r.members.clone()));
            prop_assert!(r.size() >= 2 && r.score > 0.0);
            // the member set must not occur at any lower level
            for lower in &run.snapshots[..r.level] {
                prop_assert!(!lower.clusters().contains(&r.members));
            }
            let total: f64 = term_scores(r, &m, &terms).iter().map(|(_, s)| s).sum();
            prop_assert!((total - 2.0 * r.score).abs() <= 1e-9 * (1.0 + r.score.abs()));
            if !r.is_root() {
                let p = h.get(r.parent_id).unwrap();
                prop_assert!(p.level < r.level);
                prop_assert!(r.members.iter().all(|x| p.members.contains(x)));
            }
        }
    }

    #[test]
    fn bh_is_monotone_in_fdr(ps in prop::collection::vec(0.0f64..=1.0, 1..60), a in 0.001f64..0.5, b in 0.0f64..0.49) {
        let small: HashSet<usize> = benjamini_hochberg(&ps, a).into_iter().collect();
        let large: HashSet<usize> = benjamini_hochberg(&ps, a + b).into_iter().collect();
        prop_assert!(small.is_subset(&large));
        // selected p-values all lie below every rejected one
        if let Some(max_sel) = small.iter().map(|&i| ps[i]).reduce(f64::max) {
            prop_assert!(ps.iter().enumerate().filter(|(i, _)| !small.contains(i)).all(|(_, &p)| p >= max_sel));
        }
    }

    #[test]
    fn snapshot_tsv_round_trips(labels in prop::collection::vec(0usize..5, 1..40), level in 0usize..9, seed in any::<u64>()) {
        // canonicalize: each label becomes the smallest index sharing it
        let canon: Vec<usize> = labels.iter().map(|l| labels.iter().position(|x| x == l).unwrap()).collect();
        let snap = LevelSnapshot { level, factor: -(level as f64) * 0.5, objective: 1.25, labels: canon };
        let mut buf = Vec::new();
        snap.write_tsv(&mut buf, seed).unwrap();
        let back = LevelSnapshot::read_tsv(&buf[..]).unwrap();
        prop_assert_eq!(back, snap);
    }
}
