use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use proptest::prelude::*;

use sphereflow::curvfun::FunctionSpec;
use sphereflow::dual::{check_dual_curvatures, polar_dual};
use sphereflow::flow::rhs_contracting;
use sphereflow::hypersurface::{
    derivatives, embed, perturbed_sphere, shape_operator, sphere, AxiGrid, GraphFunction,
};

const R: f64 = 0.7;
const AMP: f64 = 0.05;
const MODE: f64 = 2.0;

fn grid(n: usize) -> AxiGrid {
    AxiGrid::new(n, 2).unwrap()
}

fn add(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Principal curvatures of `u = R + AMP cos(MODE theta)` from the extrinsic
/// geometry of the profile curve `x(theta)` in `S^2`: the profile value is
/// `-<x'', nu> / |x'|^2`, the orbit value `nu_2 / (sin u sin theta)`.
fn extrinsic_curvatures(theta: f64) -> (f64, f64) {
    let u = R + AMP * (MODE * theta).cos();
    let u1 = -AMP * MODE * (MODE * theta).sin();
    let u2 = -AMP * MODE * MODE * (MODE * theta).cos();
    let (su, cu) = u.sin_cos();
    let (st, ct) = theta.sin_cos();
    let x = [cu, su * ct, su * st];
    let e_u = [-su, cu * ct, cu * st];
    let e_t = [0.0, -st, ct];
    let radial = [0.0, ct, st];
    let x1 = add([u1 * e_u[0], u1 * e_u[1], u1 * e_u[2]], e_t, su);
    // d e_u = -u' x + cos u e_theta, d e_theta = -radial
    let de_u = add([-u1 * x[0], -u1 * x[1], -u1 * x[2]], e_t, cu);
    let mut x2 = [u2 * e_u[0], u2 * e_u[1], u2 * e_u[2]];
    x2 = add(x2, de_u, u1);
    x2 = add(x2, e_t, u1 * cu);
    x2 = add(x2, radial, -su);
    let norm = (su * su + u1 * u1).sqrt();
    let nu = add(
        [su / norm * e_u[0], su / norm * e_u[1], su / norm * e_u[2]],
        e_t,
        -u1 / norm,
    );
    let profile = -dot(x2, nu) / dot(x1, x1);
    let orbit = if st.abs() < 1e-12 {
        profile
    } else {
        nu[2] / (su * st)
    };
    (profile, orbit)
}

fn curvature_errors(n: usize) -> (f64, f64) {
    let gr = grid(n);
    let g = perturbed_sphere(gr, R, AMP, MODE as usize).unwrap();
    let geo = shape_operator(&g, &FunctionSpec::MeanNormalized).unwrap();
    let (mut interior, mut poles) = (0.0f64, 0.0f64);
    for j in 0..gr.len() {
        let (p, o) = extrinsic_curvatures(gr.theta(j));
        let e = (geo.kappa_profile[j] - p)
            .abs()
            .max((geo.kappa_orbit[j] - o).abs());
        if j == 0 || j == n {
            poles = poles.max(e);
        } else {
            interior = interior.max(e);
        }
    }
    (interior, poles)
}

#[test]
fn curvatures_match_the_extrinsic_oracle() {
    let (interior, poles) = curvature_errors(256);
    assert!(interior < 1e-6 && poles < 1e-6, "{interior:e} {poles:e}");
}

#[test]
fn curvature_convergence_order() {
    let (i1, p1) = curvature_errors(64);
    let (i2, p2) = curvature_errors(128);
    let interior = (i1 / i2).log2();
    let poles = (p1 / p2).log2();
    assert!(interior >= 3.5, "interior order {interior}");
    assert!(poles >= 2.0, "pole order {poles}");
}

#[test]
fn sphere_embedding_normal_is_the_dual_direction() {
    let r = 0.6;
    let e = embed(&sphere(grid(64), r).unwrap()).unwrap();
    for (j, xt) in e.xt.iter().enumerate() {
        let (st, ct) = grid(64).theta(j).sin_cos();
        let expect = [-r.sin(), r.cos() * ct, r.cos() * st];
        for c in 0..3 {
            assert!((xt[c] - expect[c]).abs() < 1e-14);
        }
    }
}

/// Normal part of `x_tt + g_tt x + h_tt xt` from central differences of the
/// embedding; the tangential part carries the Christoffel term.
fn gauss_residual(n: usize) -> f64 {
    let gr = grid(n);
    let g = perturbed_sphere(gr, R, AMP, MODE as usize).unwrap();
    let e = embed(&g).unwrap();
    let geo = shape_operator(&g, &FunctionSpec::MeanNormalized).unwrap();
    let h = gr.h();
    let mut worst = 0.0f64;
    for j in 1..n {
        let (xm, x0, xp) = (e.x[j - 1], e.x[j], e.x[j + 1]);
        let xtt: Vec<f64> = (0..3)
            .map(|c| (xp[c] - 2.0 * x0[c] + xm[c]) / (h * h))
            .collect();
        let xt_: Vec<f64> = (0..3).map(|c| (xp[c] - xm[c]) / (2.0 * h)).collect();
        let gtt: f64 = xt_.iter().map(|a| a * a).sum();
        let htt = geo.kappa_profile[j] * gtt;
        let r: Vec<f64> = (0..3)
            .map(|c| xtt[c] + gtt * x0[c] + htt * e.xt[j][c])
            .collect();
        let along: f64 = r.iter().zip(&xt_).map(|(a, b)| a * b).sum::<f64>() / gtt;
        for c in 0..3 {
            worst = worst.max((r[c] - along * xt_[c]).abs());
        }
    }
    worst
}

#[test]
fn gauss_formula_residual_is_second_order() {
    let (a, b) = (gauss_residual(64), gauss_residual(128));
    assert!(b < 1e-3);
    assert!((a / b).log2() >= 1.8, "{a:e} {b:e}");
}

fn simpson(h: f64, f: &[f64]) -> f64 {
    let n = f.len() - 1;
    let inner: f64 = (1..n)
        .map(|j| if j % 2 == 1 { 4.0 } else { 2.0 } * f[j])
        .sum();
    h / 3.0 * (f[0] + f[n] + inner)
}

fn profile_length(n: usize, exact_derivative: bool) -> f64 {
    let gr = grid(n);
    let g = perturbed_sphere(gr, R, AMP, MODE as usize).unwrap();
    let (d1, _) = derivatives(&gr, g.values()).unwrap();
    let speed: Vec<f64> = (0..gr.len())
        .map(|j| {
            let t = gr.theta(j);
            let du = if exact_derivative {
                -AMP * MODE * (MODE * t).sin()
            } else {
                d1[j]
            };
            (du * du + g.values()[j].sin().powi(2)).sqrt()
        })
        .collect();
    simpson(gr.h(), &speed)
}

#[test]
fn discrete_arc_length_is_fourth_order() {
    let exact = profile_length(4096, true);
    let e1 = (profile_length(64, false) - exact).abs();
    let e2 = (profile_length(128, false) - exact).abs();
    assert!(e2 < 1e-7, "{e2:e}");
    assert!((e1 / e2).log2() >= 3.5, "{e1:e} {e2:e}");
}

#[test]
fn shrinking_sphere_orientation() {
    for r in [0.3, 0.8, 1.4] {
        let g = sphere(grid(64), r).unwrap();
        for spec in [FunctionSpec::SigmaK(2), FunctionSpec::MeanNormalized] {
            let udot = rhs_contracting(&g, &spec).unwrap();
            assert!(udot.iter().all(|d| (d + 1.0 / r.tan()).abs() < 1e-13));
        }
    }
}

fn reciprocity(n: usize) -> f64 {
    let g = perturbed_sphere(grid(n), FRAC_PI_4, AMP, 2).unwrap();
    check_dual_curvatures(&polar_dual(&g).unwrap(), &FunctionSpec::SigmaK(2))
        .unwrap()
        .reciprocity
}

#[test]
fn dual_reciprocity_is_second_order() {
    let (a, b) = (reciprocity(64), reciprocity(128));
    assert!(b <= 1e-3);
    assert!((a / b).log2() >= 2.0 - 0.05, "{a:e} {b:e}");
}

#[test]
fn double_dual_converges_at_second_order() {
    let err = |n: usize| {
        let g = perturbed_sphere(grid(n), FRAC_PI_4, AMP, 2).unwrap();
        let back = polar_dual(&polar_dual(&g).unwrap().dual).unwrap().dual;
        back.max_distance(&g).unwrap()
    };
    let (a, b) = (err(64), err(128));
    assert!((a / b).log2() >= 1.8, "{a:e} {b:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn umbilic_curvatures_are_exact(r in 0.05f64..1.5, n in 1usize..=6) {
        let g = sphere(AxiGrid::new(64, n).unwrap(), r).unwrap();
        let geo = shape_operator(&g, &FunctionSpec::MeanNormalized).unwrap();
        let cot = 1.0 / r.tan();
        for j in 0..geo.len() {
            prop_assert!((geo.kappa_profile[j] - cot).abs() <= 1e-13 * cot.max(1.0));
            prop_assert!((geo.kappa_orbit[j] - cot).abs() <= 1e-13 * cot.max(1.0));
            prop_assert_eq!(geo.v[j], 1.0);
        }
    }

    #[test]
    fn gradient_factor_at_least_one(r in 0.3f64..1.2, amp in 0.0f64..0.03, mode in 1usize..4) {
        let g = perturbed_sphere(grid(64), r, amp, mode).unwrap();
        let geo = shape_operator(&g, &FunctionSpec::MeanNormalized).unwrap();
        let (d1, _) = derivatives(g.grid(), g.values()).unwrap();
        prop_assert_eq!(geo.v[0], 1.0);
        prop_assert_eq!(geo.v[64], 1.0);
        for (v, d) in geo.v.iter().zip(&d1) {
            prop_assert!(*v >= 1.0);
            prop_assert_eq!(*v == 1.0, *d == 0.0 || d.abs() < 1e-8);
        }
    }

    #[test]
    fn embedding_is_orthonormal(r in 0.3f64..1.2, amp in 0.0f64..0.03, mode in 1usize..4) {
        let e = embed(&perturbed_sphere(grid(64), r, amp, mode).unwrap()).unwrap();
        for (x, xt) in e.x.iter().zip(&e.xt) {
            prop_assert!((dot(*x, *x) - 1.0).abs() <= 1e-12);
            prop_assert!((dot(*xt, *xt) - 1.0).abs() <= 1e-12);
            prop_assert!(dot(*x, *xt).abs() <= 1e-12);
        }
    }

    #[test]
    fn sphere_dual_is_complementary(r in 0.1f64..1.45) {
        let d = polar_dual(&sphere(grid(64), r).unwrap()).unwrap().dual;
        prop_assert!(d.values().iter().all(|u| (u - (FRAC_PI_2 - r)).abs() <= 1e-12));
    }

    #[test]
    fn dual_stays_in_the_opposite_hemisphere(r in 0.3f64..1.2, amp in 0.0f64..0.03, mode in 1usize..4) {
        let g = perturbed_sphere(grid(64), r, amp, mode).unwrap();
        let p = polar_dual(&g).unwrap();
        prop_assert_eq!(p.dual.center(), g.center().antipode());
        prop_assert!(p.dual.values().iter().all(|u| *u > 0.0 && *u < FRAC_PI_2));
        prop_assert!(p.node_map.theta_star.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn duality_reverses_inclusion(r in 0.4f64..1.0, gap in 0.01f64..0.2, amp in 0.0f64..0.02) {
        let inner = perturbed_sphere(grid(64), r, amp, 2).unwrap();
        let outer = perturbed_sphere(grid(64), r + gap, amp, 2).unwrap();
        let di = polar_dual(&inner).unwrap().dual;
        let d_o = polar_dual(&outer).unwrap().dual;
        prop_assert!(di.values().iter().zip(d_o.values()).all(|(a, b)| b < a));
    }

    #[test]
    fn snapshot_text_round_trips(r in 0.3f64..1.2, amp in 0.0f64..0.03) {
        let g = perturbed_sphere(grid(32), r, amp, 2).unwrap();
        let back = GraphFunction::from_text(&g.to_text()).unwrap();
        prop_assert_eq!(back, g);
    }
}
