use agesirs::demography::solve_mckendrick;
use agesirs::infection::{lambda_apply, XiClamp};
use agesirs::linear::{full_semigroup_apply, reaction_exponential};
use agesirs::model::{derive_constants, ForceSpec, MixingKernel, MortalityModel};
use agesirs::solver::simulate_direct;
use agesirs::{AgeGrid, Model, RateSet, StateField};
use proptest::prelude::*;

const CELLS: usize = 16;

fn grid() -> AgeGrid {
    AgeGrid::new(1.0, CELLS).unwrap()
}

fn nodal(lo: f64, hi: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, CELLS + 1)
}

fn field(lo: f64, hi: f64) -> impl Strategy<Value = StateField> {
    (nodal(lo, hi), nodal(lo, hi), nodal(lo, hi)).prop_map(|(s, i, r)| StateField::new(s, i, r).unwrap())
}

fn rate_set() -> impl Strategy<Value = RateSet> {
    (nodal(0.1, 2.0), nodal(0.1, 2.0), nodal(0.1, 2.0), 0.0..=1.0, 0.0..=1.0)
        .prop_map(|(b, g, d, p, q)| RateSet::new(&grid(), b, g, d, p, q).unwrap())
}

fn mortality() -> impl Strategy<Value = MortalityModel> {
    (nodal(0.05, 1.0), 0.0..3.0).prop_map(|(m, theta)| MortalityModel::new(grid(), m, theta).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn l1_norm_is_homogeneous_and_subadditive(x in field(-2.0, 2.0), y in field(-2.0, 2.0), k in -3.0..3.0f64) {
        let g = grid();
        prop_assert!((x.scaled(k).l1_norm(&g) - k.abs() * x.l1_norm(&g)).abs() <= 1e-12);
        let mut sum = x.clone();
        sum.add_scaled(1.0, &y);
        prop_assert!(sum.l1_norm(&g) <= x.l1_norm(&g) + y.l1_norm(&g) + 1e-12);
    }

    #[test]
    fn reaction_preserves_nodal_totals_and_the_cone(rates in rate_set(), x in field(0.0, 2.0), t in 0.0..5.0f64) {
        let y = reaction_exponential(&x, t, &rates);
        prop_assert!(y.min_value() >= 0.0);
        for j in 0..x.len() {
            let before: f64 = x.node(j).iter().sum();
            let after: f64 = y.node(j).iter().sum();
            prop_assert!((before - after).abs() <= 1e-14 * before.max(1.0));
        }
    }

    #[test]
    fn reaction_exponential_composes(rates in rate_set(), x in field(-1.0, 1.0), t in 0.0..2.0f64, u in 0.0..2.0f64) {
        let g = grid();
        let once = reaction_exponential(&x, t + u, &rates);
        let twice = reaction_exponential(&reaction_exponential(&x, t, &rates), u, &rates);
        prop_assert!(once.difference(&twice).l1_norm(&g) <= 1e-13);
    }

    #[test]
    fn force_of_infection_is_linear(k in nodal(0.0, 1.0), x in nodal(-1.0, 1.0), y in nodal(-1.0, 1.0), c in -2.0..2.0f64) {
        let g = grid();
        let kernel = MixingKernel::separable(k.clone(), k.iter().rev().copied().collect()).unwrap();
        let combined: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + c * b).collect();
        let lhs = lambda_apply(&kernel, &g, &combined);
        let (lx, ly) = (lambda_apply(&kernel, &g, &x), lambda_apply(&kernel, &g, &y));
        for j in 0..lhs.len() {
            prop_assert!((lhs[j] - lx[j] - c * ly[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn clamp_is_bounded_monotone_and_exact_inside(z1 in 0.01..5.0f64, extra in 0.01..5.0f64, z in -50.0..50.0f64) {
        let clamp = XiClamp::new(z1, z1 + extra);
        let (v, d) = clamp.eval(z);
        prop_assert!(v.abs() <= clamp.z2);
        prop_assert!((0.0..=2.0).contains(&d));
        if z.abs() <= z1 {
            prop_assert_eq!(v, z);
        }
        prop_assert!(clamp.value(z + 1e-3) >= v);
    }

    #[test]
    fn constants_grow_with_the_initial_norm(rates in rate_set(), mort in mortality(), a in 0.0..3.0f64, b in 0.0..3.0f64) {
        let kernel = MixingKernel::constant(0.7, &grid());
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = derive_constants(&rates, &mort, &kernel, &ForceSpec::Identity, lo, 0.5).unwrap();
        let large = derive_constants(&rates, &mort, &kernel, &ForceSpec::Identity, hi, 0.5).unwrap();
        prop_assert!(small.c <= large.c && small.z1 <= large.z1 && small.r <= large.r);
        prop_assert!(small.z1 <= small.z2);
        prop_assert_eq!(small.m, large.m);
    }

    #[test]
    fn renewal_solution_is_order_preserving(rates in rate_set(), mort in mortality(), lo in nodal(0.0, 1.0), bump in nodal(0.0, 1.0)) {
        let hi: Vec<f64> = lo.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let small = solve_mckendrick(&lo, &rates, &mort, 1.0).unwrap();
        let large = solve_mckendrick(&hi, &rates, &mort, 1.0).unwrap();
        for (ns, nl) in small.densities.iter().zip(&large.densities) {
            for (s, l) in ns.iter().zip(nl) {
                prop_assert!(*s <= *l + 1e-12);
            }
        }
    }

    #[test]
    fn semigroup_has_the_evolution_property(rates in rate_set(), mort in mortality(), x in field(-1.0, 1.0), m in 0usize..8, k in 0usize..8) {
        let g = grid();
        let dt = g.step();
        let t = |n: usize| n as f64 * dt;
        let both = full_semigroup_apply(&x, t(m + k), 1.0, &rates, &mort).unwrap();
        let first = full_semigroup_apply(&x, t(m), 1.0, &rates, &mort).unwrap();
        let split = full_semigroup_apply(&first, t(k), 1.0, &rates, &mort).unwrap();
        prop_assert!(both.difference(&split).l1_norm(&g) <= 1e-12 * (1.0 + x.l1_norm(&g)));
    }

    #[test]
    fn direct_solver_keeps_the_cone(rates in rate_set(), mort in mortality(), x in field(0.0, 1.0), kval in 0.0..2.0f64, exponent in 0.2..1.0f64, family in 0usize..2) {
        let g = grid();
        let force = if family == 0 { ForceSpec::Identity } else { ForceSpec::Power { exponent } };
        let model = Model::new(g, 1.0, rates, mort, MixingKernel::constant(kval, &g), force).unwrap();
        let traj = simulate_direct(&model, &x).unwrap();
        prop_assert!(traj.min_value() >= -1e-12);
    }
}
