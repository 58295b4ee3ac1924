use std::f64::consts::PI;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::*;
use crate::signals::{builtin_problem, parse_expression, GaussianTerm, InitialCondition, Potential};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn max_abs_diff(a: &WavefunctionGrid, b: &WavefunctionGrid) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn max_abs(a: &WavefunctionGrid) -> f64 {
    a.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

fn gaussian_spec(terms: Vec<GaussianTerm>, potential: Potential, epsilon: f64, t_max: f64) -> ProblemSpec {
    ProblemSpec::new("test", InitialCondition::GaussianSum(terms), potential, epsilon, t_max, (-6.0, 6.0)).unwrap()
}

fn problem3_like(epsilon: f64, t_max: f64) -> ProblemSpec {
    let zero = c(0.0, 0.0);
    gaussian_spec(vec![GaussianTerm::new(c(0.1, 0.7), zero, c(0.0, 3.0), zero)], Potential::Linear(1.0), epsilon, t_max)
}

#[test]
fn method_names_round_trip() {
    for m in [ReferenceMethod::Splitstep, ReferenceMethod::CrankNicolson, ReferenceMethod::ExactFreeGaussian] {
        assert_eq!(m.to_string().parse::<ReferenceMethod>().unwrap(), m);
    }
    assert_eq!("cn".parse::<ReferenceMethod>().unwrap(), ReferenceMethod::CrankNicolson);
    assert_eq!("exact".parse::<ReferenceMethod>().unwrap(), ReferenceMethod::ExactFreeGaussian);
    assert!("euler".parse::<ReferenceMethod>().is_err());
}

#[test]
fn exact_matches_propagator_quadrature() {
    // u(x,t) = ∫ (2πiεt)^{-1/2} e^{i(x−y)²/(2εt)} u₀(y) dy, evaluated with the
    // trapezoid rule, which converges spectrally for the decaying integrand.
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let epsilon = 0.5;
    let term = GaussianTerm::new(c(0.4, 0.9), c(0.3, -0.2), c(0.5, 1.5), c(-0.1, 0.2));
    let (y_min, y_max, n) = (-25.0, 25.0, 40_000);
    let dy = (y_max - y_min) / n as f64;
    for _ in 0..10 {
        let x: f64 = rng.gen_range(-2.0..2.0);
        let t: f64 = rng.gen_range(0.05..1.0);
        let prefactor = (Complex64::new(0.0, 2.0 * PI * epsilon * t)).sqrt().inv();
        let quadrature: Complex64 = (0..n)
            .map(|j| {
                let y = y_min + j as f64 * dy;
                let phase = Complex64::new(0.0, (x - y) * (x - y) / (2.0 * epsilon * t));
                (phase + term.exponent(y, epsilon)).exp()
            })
            .sum::<Complex64>()
            * dy
            * prefactor;
        let closed = free_gaussian_term(&term, epsilon, t, x);
        assert!((closed - quadrature).norm() < 1e-8 * closed.norm().max(1e-3), "x={x} t={t}: {closed} vs {quadrature}");
    }
}

#[test]
fn exact_at_time_zero_is_initial_data() {
    let spec = builtin_problem("problem4", 1.0 / 16.0).unwrap();
    let run = exact_free_gaussian(&spec, 2048, &[0.0]).unwrap();
    let u0 = sample_problem(&spec, 2048).unwrap();
    assert!(max_abs_diff(&run.snapshots[0].1, &u0) < 1e-13 * max_abs(&u0));
    assert_eq!(run.n_t, 0);
}

#[test]
fn exact_rejects_non_gaussian_problems() {
    let p3 = builtin_problem("problem3", 1.0 / 16.0).unwrap();
    assert!(matches!(exact_free_gaussian(&p3, 512, &[]), Err(Error::NotGaussian(_))));
    let p1 = builtin_problem("problem1", 1.0 / 16.0).unwrap();
    assert!(matches!(exact_free_gaussian(&p1, 512, &[]), Err(Error::NotGaussian(_))));
}

#[test]
fn splitstep_agrees_with_exact_for_problem4() {
    let spec = builtin_problem("problem4", 1.0 / 16.0).unwrap();
    let mesh = reference_mesh(&spec);
    let exact = exact_free_gaussian(&spec, mesh.n_x, &[0.1]).unwrap();
    let u_exact = &exact.snapshots[0].1;
    assert!(u_exact.boundary_ratio() < 1e-10, "packet reached the boundary");
    // V = 0: the split-step scheme is exact in time, so a handful of steps
    // must reproduce the closed form to spectral accuracy.
    let run = splitstep_solve(&spec, mesh.n_x, 3, &[0.1]).unwrap();
    let err = max_abs_diff(&run.snapshots[0].1, u_exact) / max_abs(u_exact);
    assert!(err < 1e-8, "relative max error {err:e}");
}

#[test]
fn splitstep_constant_potential_is_a_phase() {
    let spec = gaussian_spec(
        vec![GaussianTerm::new(c(0.2, 0.0), c(0.0, 0.0), c(0.0, 2.0), c(0.0, 0.0))],
        Potential::from_expr(parse_expression("0.75").unwrap()),
        0.1,
        0.4,
    );
    let free = Potential::Zero;
    let mut free_spec = spec.clone();
    free_spec.potential = free;
    let with_v = splitstep_solve(&spec, 1024, 7, &[]).unwrap();
    let without = splitstep_solve(&free_spec, 1024, 7, &[]).unwrap();
    let phase = Complex64::from_polar(1.0, -0.75 * 0.4 / 0.1);
    let u = &with_v.snapshots[0].1;
    let v = &without.snapshots[0].1;
    let err = u.values.iter().zip(&v.values).map(|(a, b)| (a - b * phase).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn crank_nicolson_plane_wave_has_discrete_dispersion() {
    // A lattice plane wave e^{iθj} is an eigenvector of the periodic matrix,
    // amplified each step by (1 − iΔtλ/2)/(1 + iΔtλ/2), λ = (ε/Δx²)(1 − cos θ).
    let (n, epsilon, length) = (64usize, 0.2, 4.0);
    let dx = length / n as f64;
    let mut cn = CrankNicolson::new(&Potential::Zero, 0.0, length, n, epsilon).unwrap();
    for m in [1usize, 5, 17] {
        let theta = 2.0 * PI * m as f64 / n as f64;
        let mut u: Vec<Complex64> = (0..n).map(|j| Complex64::from_polar(1.0, theta * j as f64)).collect();
        let (dt, steps) = (0.01, 25);
        cn.advance(&mut u, dt, steps).unwrap();
        let lambda = epsilon / (dx * dx) * (1.0 - theta.cos());
        let g = (1.0 - c(0.0, 0.5 * dt * lambda)) / (1.0 + c(0.0, 0.5 * dt * lambda));
        let g_total = g.powu(steps as u32);
        for (j, v) in u.iter().enumerate() {
            let expected = Complex64::from_polar(1.0, theta * j as f64) * g_total;
            assert!((v - expected).norm() < 1e-11, "m={m} j={j}: {v} vs {expected}");
        }
    }
}

#[test]
fn crank_nicolson_conserves_norm() {
    let spec = problem3_like(1.0 / 16.0, 0.3);
    let u0 = initial_data(&spec, 512).unwrap();
    let mut cn = CrankNicolson::new(&spec.potential, spec.x_min, spec.x_max, 512, spec.epsilon).unwrap();
    let mut u = u0.values.clone();
    cn.advance(&mut u, 0.003, 100).unwrap();
    let n0: f64 = u0.values.iter().map(|v| v.norm_sqr()).sum();
    let n1: f64 = u.iter().map(|v| v.norm_sqr()).sum();
    assert!((n1 / n0 - 1.0).abs() < 1e-10, "norm ratio {}", n1 / n0);
}

#[test]
fn schemes_are_second_order_in_time() {
    let spec = problem3_like(1.0 / 16.0, 0.2);
    for method in [ReferenceMethod::Splitstep, ReferenceMethod::CrankNicolson] {
        let runs: Vec<WavefunctionGrid> = [20, 40, 80]
            .iter()
            .map(|&n_t| solve(method, &spec, 512, n_t, &[]).unwrap().snapshots[0].1.clone())
            .collect();
        let d1 = max_abs_diff(&runs[0], &runs[1]);
        let d2 = max_abs_diff(&runs[1], &runs[2]);
        let ratio = d1 / d2;
        assert!((3.6..4.4).contains(&ratio), "{method}: successive-difference ratio {ratio}");
    }
}

#[test]
fn schemes_agree_on_a_resolved_problem() {
    let spec = problem3_like(1.0 / 8.0, 0.2);
    let ss = splitstep_solve(&spec, 4096, 200, &[]).unwrap();
    let cn = crank_nicolson_solve(&spec, 4096, 2000, &[]).unwrap();
    let (a, b) = (&ss.snapshots[0].1, &cn.snapshots[0].1);
    let err = max_abs_diff(a, b) / max_abs(a);
    assert!(err < 1e-3, "splitstep vs CN relative error {err:e}");
}

#[test]
fn zero_time_is_the_identity() {
    let spec = problem3_like(1.0 / 16.0, 0.2);
    let u0 = initial_data(&spec, 512).unwrap();
    for method in [ReferenceMethod::Splitstep, ReferenceMethod::CrankNicolson] {
        let run = solve(method, &spec, 512, 10, &[0.0]).unwrap();
        assert_eq!(run.snapshots[0].1, u0);
        assert_eq!(run.n_t, 0);
    }
}

#[test]
fn intermediate_outputs_match_separate_runs() {
    let spec = problem3_like(1.0 / 16.0, 0.2);
    let run = splitstep_solve(&spec, 512, 40, &[0.2, 0.1, 0.1]).unwrap();
    assert_eq!(run.snapshots.len(), 2);
    assert_eq!(run.snapshots[0].0, 0.1);
    let half = splitstep_solve(&spec, 512, 20, &[0.1]).unwrap();
    assert!(max_abs_diff(&run.snapshots[0].1, &half.snapshots[0].1) < 1e-12);
    assert!(run.at(0.2).is_some());
    assert_eq!(run.last().unwrap().0, 0.2);
    assert!(splitstep_solve(&spec, 512, 40, &[-1.0]).is_err());
}

#[test]
fn solvers_are_linear() {
    let zero = c(0.0, 0.0);
    let a = GaussianTerm::new(c(0.1, 0.7), zero, c(0.0, 3.0), zero);
    let b = GaussianTerm::new(c(0.05, -0.4), zero, c(-0.5, 0.0), c(0.3, 1.0));
    let eps = 1.0 / 16.0;
    let sa = gaussian_spec(vec![a], Potential::Linear(1.0), eps, 0.2);
    let sb = gaussian_spec(vec![b], Potential::Linear(1.0), eps, 0.2);
    let sab = gaussian_spec(vec![a, b], Potential::Linear(1.0), eps, 0.2);
    for method in [ReferenceMethod::Splitstep, ReferenceMethod::CrankNicolson] {
        let ua = solve(method, &sa, 512, 30, &[]).unwrap().snapshots[0].1.clone();
        let ub = solve(method, &sb, 512, 30, &[]).unwrap().snapshots[0].1.clone();
        let uab = solve(method, &sab, 512, 30, &[]).unwrap().snapshots[0].1.clone();
        let err = uab
            .values
            .iter()
            .zip(ua.values.iter().zip(&ub.values))
            .map(|(s, (x, y))| (s - x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12 * max_abs(&uab), "{method}: {err:e}");
    }
}

#[test]
fn boundary_decay_is_enforced() {
    let zero = c(0.0, 0.0);
    // Re a = 0.002/ε = 0.032 leaves |u(±6)| ≈ e^{-1.15}.
    let spec =
        gaussian_spec(vec![GaussianTerm::new(c(0.002, 0.0), zero, zero, zero)], Potential::Zero, 1.0 / 16.0, 0.1);
    for method in [ReferenceMethod::Splitstep, ReferenceMethod::CrankNicolson] {
        assert!(matches!(solve(method, &spec, 256, 10, &[]), Err(Error::BoundaryDecay { .. })));
    }
}

#[test]
fn mesh_policy_scales_with_epsilon() {
    let coarse = reference_mesh(&builtin_problem("problem4", 1.0 / 16.0).unwrap());
    let fine = reference_mesh(&builtin_problem("problem4", 1.0 / 32.0).unwrap());
    assert!(coarse.n_x >= 1024 && coarse.n_x.is_power_of_two());
    assert!(fine.n_x >= coarse.n_x);
    assert!(fine.n_t_splitstep >= 2 * coarse.n_t_splitstep - 1);
    assert!(fine.n_t_crank_nicolson >= 4 * coarse.n_t_crank_nicolson - 4);
}
