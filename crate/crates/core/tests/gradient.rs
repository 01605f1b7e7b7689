mod common;

use common::*;
use ndarray::Array1;
use sgcca::{
    fit_gp, gradient_h, lipschitz_bound, objective_h, project_omega, project_product, GpConfig,
    Scheme, Variant,
};

/// Central differences of `h` along each coordinate.
fn finite_difference(inst: &Instance) -> Vec<Array1<f64>> {
    let step = 1e-5;
    let mut out = Vec::new();
    for j in 0..inst.coefs.len() {
        let mut g = Array1::zeros(inst.coefs[j].len());
        for i in 0..g.len() {
            let mut plus = inst.coefs.clone();
            plus[j][i] += step;
            let mut minus = inst.coefs.clone();
            minus[j][i] -= step;
            let hp = objective_h(&inst.bs, &inst.dg, Scheme::Horst, &plus).unwrap();
            let hm = objective_h(&inst.bs, &inst.dg, Scheme::Horst, &minus).unwrap();
            g[i] = (hp - hm) / (2.0 * step);
        }
        out.push(g);
    }
    out
}

fn flat(v: &[Array1<f64>]) -> Vec<f64> {
    v.iter().flat_map(|a| a.to_vec()).collect()
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = rng(31);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let g = flat(&gradient_h(&inst.bs, &inst.dg, Scheme::Horst, &inst.coefs).unwrap());
        let fd = flat(&finite_difference(&inst));
        let err = dist(&g, &fd) / l2(&fd).max(1e-12);
        assert!(err <= 1e-6, "relative error {err}");
    }
}

#[test]
fn lipschitz_bound_holds_on_samples() {
    let mut rng = rng(32);
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        let lip = lipschitz_bound(&inst.bs, &inst.dg).unwrap();
        let b: Vec<Array1<f64>> = inst
            .coefs
            .iter()
            .map(|a| Array1::from(normal_vec(&mut rng, a.len())))
            .collect();
        let ga = flat(&gradient_h(&inst.bs, &inst.dg, Scheme::Horst, &inst.coefs).unwrap());
        let gb = flat(&gradient_h(&inst.bs, &inst.dg, Scheme::Horst, &b).unwrap());
        let lhs = dist(&ga, &gb);
        let rhs = lip * dist(&flat(&inst.coefs), &flat(&b));
        assert!(lhs <= rhs * (1.0 + 1e-9), "{lhs} > {rhs}");
    }
}

#[test]
fn product_projection_matches_joint_oracle() {
    // the squared distance is a sum over blocks, so the joint minimizer is the
    // blockwise one; check it against blockwise enumeration on tiny sizes
    let mut rng = rng(33);
    for _ in 0..100 {
        let dims: Vec<usize> = (0..3)
            .map(|_| 2 + (normal_vec(&mut rng, 1)[0].abs() * 10.0) as usize % 3)
            .collect();
        let raw: Vec<Array1<f64>> = dims
            .iter()
            .map(|&p| Array1::from(normal_vec(&mut rng, p)))
            .collect();
        let sparsity: Vec<f64> = dims.iter().map(|&p| random_budget(&mut rng, p)).collect();
        for variant in Variant::ALL {
            let got = project_product(&raw, &sparsity, variant).unwrap();
            for ((a, r), &s) in got.coefs().iter().zip(&raw).zip(&sparsity) {
                let want = projection_oracle(r.as_slice().unwrap(), s, variant);
                assert!(dist(a.as_slice().unwrap(), &want) <= 1e-8);
            }
        }
    }
}

#[test]
fn projection_leaves_feasible_blocks_alone() {
    let mut rng = rng(34);
    let raw: Vec<Array1<f64>> = [4, 5]
        .iter()
        .map(|&p| Array1::from(project_omega(&normal_vec(&mut rng, p), 1.5, Variant::P3).unwrap()))
        .collect();
    let got = project_product(&raw, &[1.5, 1.5], Variant::P3).unwrap();
    for (a, b) in got.coefs().iter().zip(&raw) {
        assert!(dist(a.as_slice().unwrap(), b.as_slice().unwrap()) <= 1e-12);
    }
}

#[test]
fn gp_iterates_are_feasible_and_ascending() {
    let mut rng = rng(35);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        for variant in Variant::ALL {
            let cfg = GpConfig::new(variant, inst.sparsity.clone());
            let rep = fit_gp(&inst.bs, &inst.dg, &cfg).unwrap();
            assert!(rep.state.is_feasible());
            assert!(rep.max_decrease() <= 1e-12 * rep.final_objective().abs().max(1.0));
            assert_eq!(rep.step_norms.len(), rep.iterations);
        }
    }
}
