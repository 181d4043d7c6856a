use proptest::prelude::*;
use spillcast_core::r0::{exposed_survival, r0, r0_bird, r0_mosquito, R0Inputs};

prop_compose! {
    fn inputs()(
        beta_bm in 1e-6..1e-2f64,
        delta in 0.05..2.0f64,
        mu_b in 1e-4..0.1f64,
        lambda in 0.0..0.5f64,
        mu_wnd in 0.0..0.5f64,
        beta_mb in 1e-6..1e-2f64,
        pdr in 0.01..0.5f64,
        mu_m in 0.02..0.5f64,
        m_s in 0.0..1e6f64,
        b_s in 0.0..1e4f64,
    ) -> R0Inputs {
        R0Inputs {
            beta_bird_to_mosquito: beta_bm,
            bird_incubation: delta,
            bird_mortality: mu_b,
            bird_recovery: lambda,
            bird_wnd_mortality: mu_wnd,
            beta_mosquito_to_bird: beta_mb,
            pdr,
            mosquito_mortality: mu_m,
            susceptible_mosquitoes: m_s,
            susceptible_birds: b_s,
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn geometric_mean_of_the_two_factors(i in inputs()) {
        let expected = (r0_bird(&i).unwrap() * r0_mosquito(&i).unwrap()).sqrt();
        prop_assert!(close(r0(&i).unwrap(), expected, 1e-14));
    }

    #[test]
    fn exchanging_the_factor_values_leaves_r0_unchanged(i in inputs()) {
        let (b, m) = (r0_bird(&i).unwrap(), r0_mosquito(&i).unwrap());
        prop_assume!(b > 0.0 && m > 0.0);
        // Each factor is linear in its susceptible count, so rescaling the
        // counts swaps the two factor values.
        let swapped = R0Inputs {
            susceptible_mosquitoes: i.susceptible_mosquitoes * m / b,
            susceptible_birds: i.susceptible_birds * b / m,
            ..i
        };
        prop_assert!(close(r0_bird(&swapped).unwrap(), m, 1e-12));
        prop_assert!(close(r0_mosquito(&swapped).unwrap(), b, 1e-12));
        prop_assert!(close(r0(&swapped).unwrap(), r0(&i).unwrap(), 1e-12));
    }

    #[test]
    fn r0_scales_with_the_root_of_susceptible_counts(i in inputs(), c in 0.1..10.0f64) {
        let scaled = R0Inputs {
            susceptible_mosquitoes: c * i.susceptible_mosquitoes,
            susceptible_birds: c * i.susceptible_birds,
            ..i
        };
        prop_assert!(close(r0(&scaled).unwrap(), c * r0(&i).unwrap(), 1e-12));
    }

    #[test]
    fn infectious_duration_factorisation(i in inputs()) {
        let no_exit = R0Inputs { bird_recovery: 0.0, bird_wnd_mortality: 0.0, ..i };
        let expected = no_exit.beta_bird_to_mosquito
            * no_exit.susceptible_mosquitoes
            * exposed_survival(no_exit.bird_incubation, no_exit.bird_mortality).unwrap()
            / no_exit.bird_mortality;
        prop_assert!(close(r0_bird(&no_exit).unwrap(), expected, 1e-12));
    }

    #[test]
    fn survival_is_a_probability(a in 0.0..5.0f64, b in 1e-6..5.0f64) {
        let p = exposed_survival(a, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!(close(p + exposed_survival(b, a).unwrap(), 1.0, 1e-15));
    }
}

#[test]
fn zero_counts_give_zero_r0() {
    let i = R0Inputs {
        beta_bird_to_mosquito: 0.01,
        bird_incubation: 0.5,
        bird_mortality: 0.001,
        bird_recovery: 0.2,
        bird_wnd_mortality: 0.1,
        beta_mosquito_to_bird: 0.01,
        pdr: 0.1,
        mosquito_mortality: 0.1,
        susceptible_mosquitoes: 0.0,
        susceptible_birds: 0.0,
    };
    assert_eq!(r0(&i).unwrap(), 0.0);
}
