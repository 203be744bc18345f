use proptest::prelude::*;
use skt_core::audit::fischer::random_pairs;
use skt_core::audit::{
    entropy_balance_terms, fischer_bounds_check, fischer_ensemble, gronwall_probe,
    relative_entropy_series, GronwallBranch, Ladder,
};
use skt_core::entropy::{CutoffProfile, CutoffSpec};
use skt_core::model::H4Branch;
use skt_core::oracle::{random_h4_spec, SpecRanges};
use skt_core::solver::{prolong, simulate, NewtonOptions, StrongProxy};
use skt_core::{Field, Grid, ModelSpec, Trajectory};

fn profile() -> impl Strategy<Value = CutoffProfile> {
    prop_oneof![Just(CutoffProfile::Bump), Just(CutoffProfile::Smoothstep)]
}

fn unit_weights() -> ModelSpec {
    ModelSpec::new(1, vec![1.0, 1.0], vec![vec![1.0, 0.3], vec![0.3, 1.0]])
        .unwrap()
        .with_weights(vec![1.0, 1.0], vec![1.0, 1.0])
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn plateau_trajectories_zero_cutoff_terms(
        seed in any::<u64>(),
        amp in prop::collection::vec(0.0f64..0.5, 2),
        k in 3u32..10,
        eps in 0.01f64..0.49,
        p in profile(),
    ) {
        let spec = random_h4_spec(&SpecRanges::new(2), H4Branch::DetailedBalance, seed).unwrap();
        let g = Grid::line(1.0, 12).unwrap();
        let u0 = Field::from_fn(g.clone(), 2, |x, o| {
            o[0] = 1.0 + amp[0] * (3.0 * x[0]).cos();
            o[1] = 1.0 + amp[1] * (5.0 * x[0]).sin();
        })
        .unwrap();
        let v0 = Field::constant(g, &[1.2, 0.9]).unwrap();
        let opts = NewtonOptions::default();
        let tu = simulate(&spec, &u0, 0.0, 0.1, 0.025, &opts, None).unwrap();
        let tv = simulate(&spec, &v0, 0.0, 0.1, 0.025, &opts, None).unwrap();
        // sum(u + eps) <= 2 (1.5 + eps) < 4 <= L on the whole run
        let cut = CutoffSpec::new(k, 4.0, 8.0, eps, p).unwrap();
        let proxy = StrongProxy::FineGridRun { refinement: 1, trajectory: tv };
        let b = entropy_balance_terms(&spec, &cut, &tu, &proxy, (0.0, 0.1)).unwrap();
        prop_assert!(b.all_finite());
        for (name, v) in b.cutoff_derivative_terms() {
            prop_assert_eq!(v, 0.0, "{}", name);
        }
    }

    #[test]
    fn fischer_margins_nonnegative(seed in any::<u64>(), k in 3u32..6) {
        let g = Grid::line(1.0, 6).unwrap();
        let cut = CutoffSpec::new(k, 1.0, 2.0, 0.1, CutoffProfile::Bump).unwrap();
        let bounds = (0.5, 2.0);
        let pairs = random_pairs(&g, 2, 20, (1e-3, 1e3), bounds, seed).unwrap();
        let spec = unit_weights();
        let e = fischer_ensemble(&spec, &cut, &pairs, bounds, &Ladder::default()).unwrap();
        prop_assert!(e.min_margin1() >= 0.0 && e.ineq2_all());
        for (u, v) in &pairs {
            let c = fischer_bounds_check(&spec, &cut, u, v, bounds, &Ladder::default()).unwrap();
            prop_assert!(c.margin1 >= 0.0 && c.margin2 >= 0.0, "{c:?}");
        }
    }

    #[test]
    fn gronwall_recovers_rates(rate in -3.0f64..3.0, h0 in 1e-6f64..1e3) {
        let t: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64).collect();
        let h: Vec<f64> = t.iter().map(|t| h0 * (rate * t).exp()).collect();
        let fit = gronwall_probe(&t, &h, 0.0, 0.0).unwrap();
        prop_assert!((fit.c_hat - rate).abs() < 1e-6);
        prop_assert_eq!(fit.branch, GronwallBranch::Exponential);
    }

    #[test]
    fn series_invariant_under_refined_constant_proxy(
        v in prop::collection::vec(0.2f64..5.0, 2),
        r in 2usize..5,
    ) {
        let spec = unit_weights();
        let g = Grid::line(1.0, 8).unwrap();
        let u0 = Field::from_fn(g.clone(), 2, |x, o| {
            o[0] = 1.0 + 0.5 * x[0];
            o[1] = 2.0 - x[0];
        })
        .unwrap();
        let tu = simulate(&spec, &u0, 0.0, 0.06, 0.02, &NewtonOptions::default(), None).unwrap();
        let coarse_v = Field::constant(g.clone(), &v).unwrap();
        let fine_v = prolong(&coarse_v, &g.refined(r).unwrap()).unwrap();
        let cut = CutoffSpec::new(3, 10.0, 20.0, 0.1, CutoffProfile::Bump).unwrap();
        let constant = |f: &Field| {
            let mut t = Trajectory::new(f.clone(), 0.0);
            let meta = tu.meta()[0];
            for &s in &tu.times()[1..] {
                t.push(s, f.clone(), meta).unwrap();
            }
            t
        };
        let a = relative_entropy_series(&spec, &cut, &tu,
            &StrongProxy::FineGridRun { refinement: 1, trajectory: constant(&coarse_v) }).unwrap();
        let b = relative_entropy_series(&spec, &cut, &tu,
            &StrongProxy::FineGridRun { refinement: r, trajectory: constant(&fine_v) }).unwrap();
        prop_assert_eq!(a.h_rel, b.h_rel);
        prop_assert_eq!(a.h_kl, b.h_kl);
        prop_assert_eq!(a.h_keps, b.h_keps);
    }
}
