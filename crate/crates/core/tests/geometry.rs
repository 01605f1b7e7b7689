mod common;

use common::*;
use proptest::prelude::*;
use sgcca::{
    find_phi_root, phi, project_l1_ball, project_omega, solve_lm, Branch, RootDomain, Variant,
};

fn vec_and_budget() -> impl Strategy<Value = (Vec<f64>, f64)> {
    (2usize..=8).prop_flat_map(|n| {
        let hi = (n as f64).sqrt();
        (
            prop::collection::vec(-5.0f64..5.0, n),
            (1.0 + 1e-3)..(hi - 1e-3),
        )
    })
}

fn variant() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

proptest! {
    #[test]
    fn lm_output_agrees_in_sign_with_input((v, t) in vec_and_budget(), variant in variant()) {
        prop_assume!(v.iter().any(|&x| x != 0.0));
        let sol = solve_lm(&v, t, variant).unwrap();
        for (vi, xi) in v.iter().zip(&sol.x) {
            prop_assert!(vi * xi >= 0.0);
        }
    }

    #[test]
    fn lm_output_is_feasible((v, t) in vec_and_budget(), variant in variant()) {
        prop_assume!(v.iter().any(|&x| x != 0.0));
        let x = solve_lm(&v, t, variant).unwrap().x;
        prop_assert!(variant.is_feasible(&x, t), "x = {:?}, l1 = {}, l2 = {}", x, l1(&x), l2(&x));
    }

    #[test]
    fn p1_and_p3_reach_the_same_value((v, t) in vec_and_budget()) {
        prop_assume!(v.iter().any(|&x| x != 0.0));
        let p1 = solve_lm(&v, t, Variant::P1).unwrap().objective(&v);
        let p3 = solve_lm(&v, t, Variant::P3).unwrap().objective(&v);
        prop_assert!((p1 - p3).abs() <= 1e-10);
    }

    #[test]
    fn projection_is_feasible_and_deterministic((v, t) in vec_and_budget(), variant in variant()) {
        prop_assume!(v.iter().any(|&x| x != 0.0));
        let x = project_omega(&v, t, variant).unwrap();
        prop_assert!(variant.is_feasible(&x, t));
        let again = project_omega(&v, t, variant).unwrap();
        prop_assert_eq!(x.iter().map(|f| f.to_bits()).collect::<Vec<_>>(),
                        again.iter().map(|f| f.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn phi_root_is_accurate(v in prop::collection::vec(0.0f64..10.0, 2..40), frac in 0.05f64..0.95) {
        let n = v.len() as f64;
        let t = 1.0 + (n.sqrt() - 1.0) * frac;
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        if let Ok(lam) = find_phi_root(&v, t, RootDomain::HalfLine) {
            prop_assert!(phi(&v, t, lam).abs() <= 1e-12 * norm_sq.max(1.0) * n);
        }
        if let Ok(lam) = find_phi_root(&v, t, RootDomain::NonNegative) {
            prop_assert!(lam >= 0.0);
            prop_assert!(phi(&v, t, lam).abs() <= 1e-12 * norm_sq.max(1.0) * n);
        }
    }

    #[test]
    fn l1_ball_projection_lands_on_the_sphere(v in prop::collection::vec(-5.0f64..5.0, 1..20), t in 0.1f64..4.0) {
        let x = project_l1_ball(&v, t).unwrap();
        if l1(&v) <= t {
            prop_assert_eq!(x, v);
        } else {
            prop_assert!((l1(&x) - t).abs() <= 1e-10 * t.max(1.0));
            // common shrinkage on the surviving entries
            let shifts: Vec<f64> = v.iter().zip(&x).filter(|(_, xi)| **xi != 0.0)
                .map(|(vi, xi)| vi.abs() - xi.abs()).collect();
            for s in &shifts {
                prop_assert!((s - shifts[0]).abs() <= 1e-10);
            }
        }
    }
}

#[test]
fn lm_matches_enumeration_oracle() {
    let mut rng = rng(11);
    for _ in 0..200 {
        let n = 2 + (rng_index(&mut rng) % 4);
        let v = normal_vec(&mut rng, n);
        let t = random_budget(&mut rng, n);
        for variant in Variant::ALL {
            let got = solve_lm(&v, t, variant).unwrap().objective(&v);
            let want = lm_oracle(&v, t, variant);
            assert!(
                (got - want).abs() <= 1e-6,
                "{variant} v={v:?} t={t}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn projection_matches_enumeration_oracle() {
    let mut rng = rng(12);
    for i in 0..200 {
        let n = 2 + (rng_index(&mut rng) % 4);
        let scale = [0.1, 0.5, 1.0, 3.0][i % 4];
        let v: Vec<f64> = normal_vec(&mut rng, n)
            .into_iter()
            .map(|x| x * scale)
            .collect();
        let t = random_budget(&mut rng, n);
        for variant in Variant::ALL {
            let got = project_omega(&v, t, variant).unwrap();
            let want = projection_oracle(&v, t, variant);
            assert!(
                dist(&got, &want) <= 1e-8,
                "{variant} v={v:?} t={t}: {got:?} vs {want:?}"
            );
        }
    }
}

#[test]
fn tied_maximum_multiple_optima() {
    let v = [1.0, 1.0];
    for variant in [Variant::P1, Variant::P3] {
        let sol = solve_lm(&v, 1.2, variant).unwrap();
        assert_eq!(sol.branch, Branch::TiedFace);
        assert!((sol.objective(&v) - 1.2).abs() <= 1e-12);
    }
    // nothing feasible does better: dense sweep of Omega1, which contains Omega3
    let steps = 2000;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=steps {
        for j in 0..=steps {
            let x = [
                -1.0 + 2.0 * i as f64 / steps as f64,
                -1.0 + 2.0 * j as f64 / steps as f64,
            ];
            if l1(&x) <= 1.2 && l2(&x) <= 1.0 {
                best = best.max(dot(&v, &x));
            }
        }
    }
    assert!((1.2 - 1e-3..=1.2 + 1e-12).contains(&best));
}

fn rng_index(rng: &mut rand_chacha::ChaCha8Rng) -> usize {
    use rand::Rng;
    rng.random_range(0..1000)
}
