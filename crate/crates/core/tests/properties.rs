use ergolab::katok_map::{frequency_check, pesin_block_check, KatokMap};
use ergolab::saturation::{self, Catalog, LevelSpec};
use ergolab::sft::{self, MarkovMeasure, TransitionMatrix};
use ergolab::toral::{self, golden_partition, Itinerary};
use ergolab::weakstar::{build_test_family, empirical_shift, weakstar_distance, MeasureHandle, Space};
use ergolab::Error;
use num_rational::Ratio;
use proptest::prelude::*;

fn mixing_matrix() -> impl Strategy<Value = TransitionMatrix> {
    (2usize..=5)
        .prop_flat_map(|l| prop::collection::vec(prop::collection::vec(prop::bool::weighted(0.6), l), l))
        .prop_filter_map("not mixing", |rows| {
            let rows: Vec<Vec<u8>> = rows.into_iter().map(|r| r.into_iter().map(u8::from).collect()).collect();
            let b = TransitionMatrix::new(rows).ok()?;
            sft::validate_transition_matrix(&b).ok().filter(|r| r.irreducible && r.aperiodic).map(|_| b)
        })
}

fn golden_chain() -> impl Strategy<Value = MarkovMeasure> {
    (0.05f64..0.95).prop_map(|p| MarkovMeasure::from_stochastic(vec![vec![p, 1.0 - p], vec![1.0, 0.0]]).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parry_entropy_and_consistency(b in mixing_matrix(), w in prop::collection::vec(0usize..5, 1..5)) {
        let m = sft::parry_measure(&b).unwrap();
        let pd = sft::perron_eigendata(&b).unwrap();
        prop_assert!((sft::markov_entropy(&m) - pd.lambda.ln()).abs() < 1e-9);
        prop_assert!(sft::stationarity_defect(&m) < 1e-12);
        let l = b.size();
        let w: Vec<usize> = w.into_iter().map(|s| s % l).collect();
        let base = sft::cylinder_measure(&m, &w).unwrap();
        let right: f64 = (0..l).map(|j| { let mut v = w.clone(); v.push(j); sft::cylinder_measure(&m, &v).unwrap() }).sum();
        let left: f64 = (0..l).map(|j| { let mut v = vec![j]; v.extend(&w); sft::cylinder_measure(&m, &v).unwrap() }).sum();
        prop_assert!((right - base).abs() < 1e-12);
        prop_assert!((left - base).abs() < 1e-12);
    }

    #[test]
    fn markov_entropy_below_parry(m in golden_chain()) {
        let h = sft::markov_entropy(&m);
        prop_assert!(h <= ((1.0 + 5f64.sqrt()) / 2.0).ln() + 1e-12);
    }

    #[test]
    fn weakstar_metric_axioms(a in golden_chain(), b in golden_chain(), c in golden_chain(), seed in 0u64..1000, t in 0.01f64..0.99) {
        let fam = build_test_family(Space::Shift(TransitionMatrix::golden_mean()), 16).unwrap();
        let w = sft::sample_itinerary(&a, 400, seed);
        let (ma, mb, mc) = (MeasureHandle::Markov(a), MeasureHandle::Markov(b), MeasureHandle::Markov(c));
        let e = MeasureHandle::Empirical(empirical_shift(&w, 300).unwrap());
        let d = |x: &MeasureHandle, y: &MeasureHandle| weakstar_distance(x, y, &fam).unwrap();
        prop_assert!(d(&ma, &ma) < 1e-15);
        prop_assert!((d(&ma, &mb) - d(&mb, &ma)).abs() < 1e-15);
        prop_assert!(d(&ma, &mc) <= d(&ma, &mb) + d(&mb, &mc) + 1e-15);
        prop_assert!(d(&e, &mc) <= d(&e, &ma) + d(&ma, &mc) + 1e-15);
        prop_assert!(d(&ma, &mb) <= 0.5 + 1e-15);
        let mix = MeasureHandle::combination(vec![(t, ma.clone()), (1.0 - t, mb.clone())]).unwrap();
        prop_assert!((d(&mix, &mb) - t * d(&ma, &mb)).abs() < 1e-12);
    }

    #[test]
    fn schedule_invariants(
        n in prop::collection::vec((20u64..200, 1i64..5, 1i64..5), 1..4),
        p in 0.1f64..0.9,
    ) {
        let b = TransitionMatrix::golden_mean();
        let measures = vec![sft::parry_measure(&b).unwrap(), MarkovMeasure::from_stochastic(vec![vec![p, 1.0 - p], vec![1.0, 0.0]]).unwrap()];
        let catalog = Catalog::new(b, measures, vec![vec![1, 2], vec![3, 1]]).unwrap();
        let levels: Vec<LevelSpec> = n.iter().enumerate().map(|(q, &(len, a, c))| LevelSpec {
            k: q as u64 + 1,
            components: vec![0, 1],
            weights: vec![Ratio::new(a, a + c), Ratio::new(c, a + c)],
            lengths: vec![len, len + 7],
        }).collect();
        let s = saturation::build_schedule(&levels, &catalog).unwrap();
        prop_assert!(s.check_invariants().is_ok());
        for w in s.levels.windows(2) {
            prop_assert!(w[1].t_k > w[0].t_k);
            prop_assert_eq!(w[1].m_k, w[0].m_k + w[0].y_k * w[0].t_k + w[0].s_cross);
        }
        let last = s.levels.last().unwrap();
        prop_assert_eq!(s.total_len, last.m_k + last.y_k * last.t_k);
        let starts = s.segment_starts();
        prop_assert!(starts.windows(2).all(|p| p[0].4 < p[1].4));
    }

    #[test]
    fn frequency_sets_nest(seed in 0u64..500, n in 0u64..20, dn in 0u64..10, g in 1u32..10, dg in 0u32..5) {
        let m = sft::parry_measure(&TransitionMatrix::golden_mean()).unwrap();
        let w = sft::sample_itinerary(&m, 301, seed);
        let flags: Vec<bool> = w.iter().map(|&s| s == 1).collect();
        let (gamma, gamma2) = (g as f64 / 100.0, (g + dg) as f64 / 100.0);
        let p1 = (m.p[1] * 1e6).round() / 1e6;
        if frequency_check(&flags, -150, n, gamma, p1).unwrap() {
            prop_assert!(frequency_check(&flags, -150, n + dn, gamma, p1).unwrap());
            prop_assert!(frequency_check(&flags, -150, n, gamma2, p1).unwrap());
        }
    }

    #[test]
    fn block_index_nests(x in 0.0f64..1.0, y in 0.0f64..1.0, e in 1u32..5, de in 0u32..5, b in 0.3f64..0.5) {
        let f = KatokMap::default();
        let lam = f.log_lambda;
        let (eps, eps2) = (e as f64 / 100.0, (e + de) as f64 / 100.0);
        let k = |beta: f64, eps: f64| pesin_block_check(&f, [x, y], 15, beta, beta, eps, 60).map(|r| r.k);
        match (k(b * lam, eps), k(b * lam, eps2), k(0.5 * b * lam, eps)) {
            (Ok(k0), Ok(k_eps), Ok(k_beta)) => {
                prop_assert!(k_eps <= k0);
                prop_assert!(k_beta <= k0);
            }
            (Err(Error::SplittingNotResolved(_)), _, _) | (_, Err(Error::SplittingNotResolved(_)), _) | (_, _, Err(Error::SplittingNotResolved(_))) => {}
            (r0, r1, r2) => prop_assert!(false, "{:?} {:?} {:?}", r0, r1, r2),
        }
    }

    #[test]
    fn coding_roundtrip(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let p = golden_partition();
        match toral::encode(&p, [x, y], -15, 15, toral::DEFAULT_MARGIN) {
            Ok(w) => {
                let d = toral::decode(&p, &w).unwrap();
                prop_assert!(toral::torus_dist(d.point, [x, y]) <= d.error_bound * 2f64.sqrt() + 1e-12);
                prop_assert_eq!(toral::encode(&p, d.point, -15, 15, toral::DEFAULT_MARGIN).ok(), Some(w.clone()));
                let s = w.shifted();
                prop_assert_eq!(s.symbols.len(), w.symbols.len());
                let _ = Itinerary::new(s.symbols, s.zero);
            }
            Err(Error::BoundaryAmbiguity(_)) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
