use dpconverse::baselines::{
    bec_converse, bec_converse_recurrence, bsc_converse, bsc_converse_recurrence, rc_achievability, RcOptions,
};
use dpconverse::bound::{optimize_threshold, BoundQuery};
use dpconverse::channel::file::{parse_channel, to_json};
use dpconverse::channel::{bec, blahut_arimoto, bsc, ca_output_dist, Dmc, InputDist, OutputDist};
use dpconverse::density::{build_bins, build_increments, exact_levels};
use dpconverse::dp::{success_landscape, success_probability, Backend, DpOptions, Recursion, Setup};
use dpconverse::dp::terminal_vector;
use dpconverse::kernel::BoundaryPolicy;
use proptest::prelude::*;

fn opts(backend: Backend) -> DpOptions {
    DpOptions { backend, ..DpOptions::default() }
}

/// Random channel with 2-3 inputs and 2-4 outputs, some entries zero.
fn channel() -> impl Strategy<Value = Dmc> {
    (2usize..=3, 2usize..=4)
        .prop_flat_map(|(nx, ny)| prop::collection::vec(prop::collection::vec(0u8..=10, ny), nx))
        .prop_filter_map("rows need mass", |raw| {
            let rows: Vec<Vec<f64>> = raw
                .iter()
                .map(|r| {
                    let s: f64 = r.iter().map(|&v| v as f64).sum();
                    r.iter().map(|&v| v as f64 / s).collect()
                })
                .collect();
            if rows.iter().any(|r| r.iter().any(|v| v.is_nan())) {
                return None;
            }
            Dmc::new(rows).ok()
        })
}

fn with_q(dmc: Dmc) -> Option<(Dmc, OutputDist)> {
    let g = InputDist::uniform(dmc.num_inputs()).ok()?;
    let q = ca_output_dist(&dmc, &g).ok()?;
    Some((dmc, q))
}

fn channel_and_q() -> impl Strategy<Value = (Dmc, OutputDist)> {
    channel().prop_filter_map("output distribution", with_q)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn backends_agree((dmc, q) in channel_and_q(), n in 1usize..=12, t in -6.0f64..6.0, fine in any::<bool>()) {
        let delta = if fine { 0.01 } else { 0.1 };
        let (a, _) = success_probability(&dmc, &q, n, t, delta, &opts(Backend::Sparse)).unwrap();
        let (b, _) = success_probability(&dmc, &q, n, t, delta, &opts(Backend::Fft)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }

    #[test]
    fn success_is_monotone_in_threshold((dmc, q) in channel_and_q(), n in 1usize..=10) {
        let setup = Setup::new(&dmc, &q, n, 0.05).unwrap();
        let (lo, hi) = setup.reach();
        let (land, _) = success_landscape(&setup, lo - 2..=hi + 2, &opts(Backend::Sparse)).unwrap();
        for w in land.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-15);
        }
        prop_assert_eq!(land.first().unwrap().1, 1.0);
        prop_assert_eq!(land.last().unwrap().1, 0.0);
    }

    #[test]
    fn success_vectors_are_monotone_and_bounded((dmc, q) in channel_and_q(), n in 1usize..=10, t in -4.0f64..4.0, fft in any::<bool>()) {
        // Zero padding reads 0 above the top bin, so after k steps only
        // positions at least k * max_shift below the top are meaningful.
        // Saturation makes the whole vector meaningful.
        let setup = Setup::new(&dmc, &q, n, 0.05).unwrap();
        let grid = setup.walk_grid(0..=0);
        let options = if fft {
            opts(Backend::Fft)
        } else {
            DpOptions { backend: Backend::Sparse, boundary: BoundaryPolicy::Saturate, ..DpOptions::default() }
        };
        let rec = Recursion::new(setup.kernels.clone(), grid, &options).unwrap();
        let mut next = terminal_vector(&grid, t).values;
        let mut ws = rec.workspace();
        let mut cur = vec![0.0; next.len()];
        let up = setup.max_shift.max(0) as usize;
        for k in 1..=n {
            rec.step_into(&next, &mut cur, None, &mut ws).unwrap();
            let valid = if fft { cur.len().saturating_sub(k * up) } else { cur.len() };
            for w in cur[..valid].windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
            prop_assert!(cur.iter().all(|v| (0.0..=1.0).contains(v)));
            std::mem::swap(&mut cur, &mut next);
        }
    }

    #[test]
    fn coarser_grid_dominates((dmc, q) in channel_and_q(), n in 1usize..=8, k in -40i64..40) {
        // thresholds on the common lattice of delta and 2 delta
        let delta = 0.05;
        let t = 2.0 * delta * k as f64;
        let (fine, _) = success_probability(&dmc, &q, n, t, delta, &opts(Backend::Sparse)).unwrap();
        let (coarse, _) = success_probability(&dmc, &q, n, t, 2.0 * delta, &opts(Backend::Sparse)).unwrap();
        prop_assert!(coarse >= fine - 1e-12, "{coarse} < {fine}");
    }

    #[test]
    fn boundary_policy_is_irrelevant_on_covering_grid((dmc, q) in channel_and_q(), n in 1usize..=8, t in -4.0f64..4.0) {
        let zero = DpOptions { backend: Backend::Sparse, boundary: BoundaryPolicy::Zero, ..DpOptions::default() };
        let sat = DpOptions { backend: Backend::Sparse, boundary: BoundaryPolicy::Saturate, ..DpOptions::default() };
        let (a, _) = success_probability(&dmc, &q, n, t, 0.05, &zero).unwrap();
        let (b, _) = success_probability(&dmc, &q, n, t, 0.05, &sat).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn dp_dominates_exact_oracle((dmc, q) in channel_and_q(), n in 1usize..=4, t in -4.0f64..4.0) {
        let exact = dpconverse::dp::exact_success_oracle(&dmc, &q, n, t, 1_000_000).unwrap();
        let (dp, _) = success_probability(&dmc, &q, n, t, 0.01, &opts(Backend::Sparse)).unwrap();
        prop_assert!(dp >= exact - 1e-12, "{dp} < {exact}");
    }

    #[test]
    fn level_sets_compose((dmc, q) in channel_and_q(), k in 0usize..=4) {
        let table = build_increments(&dmc, &q).unwrap();
        let a = exact_levels(&table, k, 1_000_000).unwrap();
        let b = exact_levels(&table, k + 1, 1_000_000).unwrap();
        for l in &a.levels {
            for g in table.distinct_increments() {
                prop_assert!(b.find(l + g, 1e-9).is_some());
            }
        }
        for l in &b.levels {
            let hit = table.distinct_increments().iter().any(|g| a.find(l - g, 1e-9).is_some());
            prop_assert!(hit);
        }
    }

    #[test]
    fn grid_contains_zero_and_extremes((dmc, q) in channel_and_q(), n in 1usize..=50, delta in 0.001f64..0.5) {
        let table = build_increments(&dmc, &q).unwrap();
        let g = build_bins(&table, n, delta).unwrap();
        prop_assert!(g.lower <= 0 && 0 <= g.upper);
        prop_assert!(g.boundary(g.upper) >= n as f64 * table.di_max() - 1e-9);
        prop_assert!(g.boundary(g.lower) <= n as f64 * table.di_min() + 1e-9);
    }

    #[test]
    fn output_distribution_marginalizes(dmc in channel(), w in prop::collection::vec(1u8..=9, 3)) {
        let k = dmc.num_inputs();
        let s: f64 = w[..k].iter().map(|&v| v as f64).sum();
        let g = InputDist::new(w[..k].iter().map(|&v| v as f64 / s).collect()).unwrap();
        let q = ca_output_dist(&dmc, &g).unwrap();
        prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for y in 0..dmc.num_outputs() {
            let m: f64 = (0..k).map(|x| g.probs()[x] * dmc.w(x, y)).sum();
            prop_assert!((q.probs()[y] - m).abs() < 1e-12);
        }
    }

    #[test]
    fn blahut_arimoto_is_monotone_and_bounded(dmc in channel()) {
        let c = blahut_arimoto(&dmc, 1e-12, 10_000).unwrap();
        for w in c.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        let cap = (dmc.num_inputs().min(dmc.num_outputs()) as f64).log2();
        prop_assert!(c.bits >= -1e-12 && c.bits <= cap + 1e-12);
    }

    #[test]
    fn channel_file_round_trips(dmc in channel()) {
        let back = parse_channel(&to_json(&dmc)).unwrap();
        prop_assert_eq!(back.to_rows(), dmc.to_rows());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn bound_is_monotone_in_epsilon(n in 2usize..=24, e1 in 1e-4f64..0.3, e2 in 1e-4f64..0.3) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let dmc = bsc(0.11).unwrap();
        let q = OutputDist::uniform(2).unwrap();
        let a = optimize_threshold(&dmc, &BoundQuery::new(n, lo, 0.01, q.clone())).unwrap();
        let b = optimize_threshold(&dmc, &BoundQuery::new(n, hi, 0.01, q)).unwrap();
        prop_assert!(a.rate_bound <= b.rate_bound + 1e-12);
    }

    #[test]
    fn converse_implementations_agree(n in 1usize..=3000, p in 0.001f64..0.499, pe in 0.001f64..0.999, le in -8.0f64..-0.5) {
        let eps = 10f64.powf(le);
        let a = bsc_converse(n, p, eps).unwrap();
        let b = bsc_converse_recurrence(n, p, eps).unwrap();
        prop_assert!((a - b).abs() < 1e-10, "bsc {a} {b}");
        let a = bec_converse(n, pe, eps).unwrap();
        let b = bec_converse_recurrence(n, pe, eps).unwrap();
        prop_assert!((a - b).abs() < 1e-10, "bec {a} {b}");
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn sandwich(n in 8usize..=120, le in -5.0f64..-1.0) {
        let eps = 10f64.powf(le);
        let g = InputDist::uniform(2).unwrap();
        let rc_opts = RcOptions { delta: 0.01, ..RcOptions::default() };

        let dmc = bsc(0.11).unwrap();
        let rc = rc_achievability(&dmc, &g, n, eps, &rc_opts).unwrap();
        let conv = bsc_converse(n, 0.11, eps).unwrap();
        let dpc = optimize_threshold(&dmc, &BoundQuery::new(n, eps, 0.01, OutputDist::uniform(2).unwrap())).unwrap();
        prop_assert!(rc <= conv + 1e-9 && conv <= dpc.rate_bound + 1e-9, "bsc {rc} {conv} {}", dpc.rate_bound);
        prop_assert!((0.0..=1.0).contains(&rc));

        let dmc = bec(0.3).unwrap();
        let rc = rc_achievability(&dmc, &g, n, eps, &rc_opts).unwrap();
        let conv = bec_converse(n, 0.3, eps).unwrap();
        let q = OutputDist::new(vec![0.35, 0.3, 0.35]).unwrap();
        let dpc = optimize_threshold(&dmc, &BoundQuery::new(n, eps, 0.01, q)).unwrap();
        prop_assert!(rc <= conv + 1e-9 && conv <= dpc.rate_bound + 1e-9, "bec {rc} {conv} {}", dpc.rate_bound);
    }
}
