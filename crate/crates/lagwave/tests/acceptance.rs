//! End-to-end acceptance gate: nine numbered criteria, each a test that
//! prints one PASS line with its measured figures (failures panic with the
//! offending numbers).

use lagwave::driver::{
    error_metric, exact_acoustic_solution, run_acoustic, run_elastic, SimulationConfig,
};
use lagwave::field::Field2D;
use lagwave::krylov::{gmres_k, KrylovConfig};
use lagwave::laguerre::{
    conv_weight, eval_kernel_functions, forward_transform, inverse_series, series_prefactor,
    source_time_function, ConvAccumulators, LaguerreBasis,
};
use lagwave::medium::{AcousticMedium, ElasticMedium, Grid2D};
use lagwave::operators::{
    build_elastic_rhs, AcousticOperator, ElasticOperator, SourceKind, SourceSpec,
};
use lagwave::precond::build_elastic_preconditioner;
use lagwave::tridiag::{factor, thomas_solve, RhsBatch, TridiagonalMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

const C: f64 = 2000.0;
const F0: f64 = 30.0;

fn water() -> AcousticMedium {
    // kappa = 1, rho = 1/c^2 normalizes the surface trace to f(t - R/c)/(2 pi R)
    AcousticMedium::homogeneous(1.0, 1.0 / (C * C))
}

fn surface_monopole() -> SourceSpec {
    SourceSpec { kind: SourceKind::Monopole, r0: 0.0, z0: 0.01, f0: F0, t0: 0.2, gamma: 4.0 }
}

fn acoustic_config(
    grid: Grid2D,
    n: usize,
    receiver_r: f64,
    t_end: f64,
    dt: f64,
    tol: f64,
) -> SimulationConfig {
    SimulationConfig {
        grid,
        basis: LaguerreBasis::new(9, 400.0, n).unwrap(),
        source: surface_monopole(),
        amplitude: 1.0,
        receivers: vec![(receiver_r, 0.01)],
        snapshot_times: vec![],
        t_start: 0.0,
        t_end,
        dt,
        solver: KrylovConfig { tol, ..KrylovConfig::default() },
        workers: 1,
    }
}

/// eps of each surface trace against the closed-form arrival, using the
/// snapped (cell-center) receiver radii.
fn surface_trace_errors(config: &SimulationConfig) -> (Vec<f64>, usize) {
    let (seismogram, _, report) = run_acoustic(config, &water()).unwrap();
    let eps = config
        .receivers
        .iter()
        .zip(&seismogram.traces)
        .map(|(&(r, z), trace)| {
            let cell = config.grid.nearest_cell(r, z).unwrap();
            let dist = config.grid.r(cell.0);
            let exact: Vec<f64> = seismogram
                .times
                .iter()
                .map(|&t| exact_acoustic_solution(dist, t, C, &config.source).unwrap())
                .collect();
            error_metric(&exact, &trace.components[0], config.dt).unwrap()
        })
        .collect();
    (eps, report.max_iterations())
}

#[test]
fn criterion_1_analytic_accuracy_and_refinement() {
    // Phase (dispersion) error of a second-order scheme accumulates linearly
    // with propagation distance, so the 0.05 accuracy level holds at early
    // offsets on the lambda/40 mesh and at the far 20-lambda offset one
    // refinement later; the far-offset error itself shrinks at second order.
    let lambda = C / F0;
    let l = 30.0 * lambda;
    let near_r = 4.0 * lambda;
    let far_r = 20.0 * lambda;
    let mut eps_near = Vec::new();
    let mut eps_far = Vec::new();
    for cells_per_lambda in [40.0_f64, 80.0] {
        let n_side = (l / (lambda / cells_per_lambda)).round() as usize;
        let grid = Grid2D::build(l, l, n_side, n_side).unwrap();
        let mut config = acoustic_config(grid, 600, near_r, 1.0, 1.0 / 600.0, 1e-8);
        config.receivers.push((far_r, 0.01));
        let (e, max_it) = surface_trace_errors(&config);
        assert!(max_it <= 3, "constant medium took {max_it} PCG iterations");
        eps_near.push(e[0]);
        eps_far.push(e[1]);
    }
    let shrink = eps_far[0] / eps_far[1];
    assert!(eps_near[0] <= 0.05, "eps at 4 lambda, lambda/40 = {} > 0.05", eps_near[0]);
    assert!(eps_far[1] <= 0.05, "eps at 20 lambda, lambda/80 = {} > 0.05", eps_far[1]);
    assert!(eps_far[0] <= 0.25, "eps at 20 lambda, lambda/40 = {} > 0.25", eps_far[0]);
    assert!(
        (2.5..=6.0).contains(&shrink),
        "refinement shrink factor {shrink} outside [2.5, 6] (eps {} -> {})",
        eps_far[0],
        eps_far[1]
    );
    println!(
        "PASS criterion 1: eps(4 lambda, lambda/40) {:.4}; eps(20 lambda) {:.4} -> {:.4} \
         under refinement (shrink {:.2})",
        eps_near[0], eps_far[0], eps_far[1], shrink
    );
}

#[test]
fn criterion_2_sqrt_m_refinement_law() {
    // Doubling the modeled window lets the front travel twice as far, so the
    // receiver moves out with it; dispersion error ~ distance * h^2 stays put
    // when the step shrinks by sqrt(2). Domain is reflection-free for 0.6 s
    // plus the source delay at a 200 m offset.
    let (l1, l2) = (900.0, 850.0);
    let lambda = C / F0;
    let t = 0.3;

    let h40 = lambda / 40.0;
    let grid_a = Grid2D::build(l1, l2, (l1 / h40).round() as usize, (l2 / h40).round() as usize)
        .unwrap();
    let config_a = acoustic_config(grid_a, 400, 100.0, t, 1e-3, 1e-8);
    let (eps_a, _) = surface_trace_errors(&config_a);
    let eps_a = eps_a[0];

    let h_fine = h40 / 2.0_f64.sqrt();
    let grid_b =
        Grid2D::build(l1, l2, (l1 / h_fine).round() as usize, (l2 / h_fine).round() as usize)
            .unwrap();
    let config_b = acoustic_config(grid_b, 800, 200.0, 2.0 * t, 1e-3, 1e-8);
    let (eps_b, _) = surface_trace_errors(&config_b);
    let eps_b = eps_b[0];

    let ratio = eps_b / eps_a;
    assert!(
        (0.5..=2.0).contains(&ratio),
        "eps(2T, h/sqrt2) = {eps_b} vs eps(T, h) = {eps_a}: ratio {ratio} outside [0.5, 2]"
    );
    println!(
        "PASS criterion 2: eps(T) {:.4}, eps(2T, h/sqrt2) {:.4}, ratio {:.2} within factor 2",
        eps_a, eps_b, ratio
    );
}

#[test]
fn criterion_3_preconditioner_exactness() {
    let grid = Grid2D::build(220.0, 170.0, 132, 102).unwrap();
    let config = acoustic_config(grid, 200, 100.0, 0.3, 1e-3, 1e-10);
    let (_, _, report) = run_acoustic(&config, &water()).unwrap();
    let max_it = report.max_iterations();
    assert!(max_it <= 3, "constant-coefficient PCG needed {max_it} iterations to 1e-10");
    println!(
        "PASS criterion 3: constant medium reaches 1e-10 in <= {max_it} PCG iterations per harmonic ({:.3} s/harmonic)",
        report.total_seconds / report.harmonics.len() as f64
    );
}

#[test]
fn criterion_4_mesh_independent_iterations() {
    let medium =
        AcousticMedium::layered(vec![(85.0, 1.0, 2.5e-7), (f64::INFINITY, 2.0, 2.5e-7)]);
    let mut max_its = Vec::new();
    for n_side in [128usize, 512] {
        let grid = Grid2D::build(220.0, 170.0, n_side, n_side).unwrap();
        let config = acoustic_config(grid, 40, 100.0, 0.05, 0.01, 1e-8);
        let (_, _, report) = run_acoustic(&config, &medium).unwrap();
        max_its.push(report.max_iterations());
    }
    let (lo, hi) = (max_its[0].min(max_its[1]) as f64, max_its[0].max(max_its[1]) as f64);
    assert!(
        hi <= 1.5 * lo,
        "kappa-contrast-2 iterations differ by more than 50%: 128^2 -> {}, 512^2 -> {}",
        max_its[0],
        max_its[1]
    );
    println!(
        "PASS criterion 4: contrast-2 PCG iterations 128^2 -> {}, 512^2 -> {} (within 50%)",
        max_its[0], max_its[1]
    );
}

fn random_dominant(n: usize, rng: &mut ChaCha8Rng) -> TridiagonalMatrix {
    let lower: Vec<f64> =
        (0..n).map(|i| if i == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
    let upper: Vec<f64> =
        (0..n).map(|i| if i + 1 == n { 0.0 } else { rng.gen_range(-1.0..1.0) }).collect();
    let diag: Vec<f64> =
        (0..n).map(|i| lower[i].abs() + upper[i].abs() + rng.gen_range(1.0..2.0)).collect();
    TridiagonalMatrix::new(lower, diag, upper).unwrap()
}

#[test]
fn criterion_5_tridiagonal_oracle_and_scaling() {
    let n = 100_000;
    let batch_cols = 512;
    let mut rng = ChaCha8Rng::seed_from_u64(1_234);
    let t = random_dominant(n, &mut rng);
    let batch = RhsBatch::new(
        (0..batch_cols).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
    );
    let reference: Vec<Vec<f64>> =
        batch.columns.iter().map(|col| thomas_solve(&t, col).unwrap()).collect();

    let mut per_worker: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut worst_oracle: f64 = 0.0;
    for workers in [1usize, 2, 4, 8] {
        let f = factor(&t, workers).unwrap();
        let solved = f.solve_batched(&batch).unwrap();
        let rerun = f.solve_batched(&batch).unwrap();
        assert_eq!(solved.columns, rerun.columns, "rerun not bit-identical at {workers} workers");
        for (x, y) in solved.columns.iter().zip(&reference) {
            let scale = y.iter().fold(1e-300_f64, |a, v| a.max(v.abs()));
            for (a, b) in x.iter().zip(y) {
                worst_oracle = worst_oracle.max((a - b).abs() / scale);
            }
        }
        per_worker.push(solved.columns);
    }
    assert!(worst_oracle <= 1e-12, "max relative error vs Thomas = {worst_oracle:.3e}");

    let mut worst_cross: f64 = 0.0;
    for cols in &per_worker[1..] {
        for (x, y) in cols.iter().zip(&per_worker[0]) {
            let scale = y.iter().fold(1e-300_f64, |a, v| a.max(v.abs()));
            for (a, b) in x.iter().zip(y) {
                worst_cross = worst_cross.max((a - b).abs() / scale);
            }
        }
    }
    assert!(worst_cross <= 1e-10, "cross-worker-count disagreement {worst_cross:.3e}");

    // weak scaling: per-column time with the batch grown in proportion to the
    // worker count (single-host partition overhead, best of 3)
    let mut per_col = Vec::new();
    for (workers, cols) in [(1usize, 64usize), (8, 512)] {
        let f = factor(&t, workers).unwrap();
        let small = RhsBatch::new(batch.columns[..cols].to_vec());
        let _ = f.solve_batched(&small).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let tick = Instant::now();
            let _ = f.solve_batched(&small).unwrap();
            best = best.min(tick.elapsed().as_secs_f64());
        }
        per_col.push(best / cols as f64);
    }
    let growth = per_col[1] / per_col[0];
    assert!(growth <= 1.3, "per-column time grew {growth:.2}x from 1 to 8 workers");
    println!(
        "PASS criterion 5: oracle {:.2e}, cross-worker {:.2e}, bit-identical reruns, weak-scaling growth {:.2}x",
        worst_oracle, worst_cross, growth
    );
}

#[test]
fn criterion_6_laguerre_machinery() {
    // orthonormality of l_m(ht) = sqrt(h) x^(alpha/2) phi_m(x) under
    // integration in t, m, k <= 20
    let basis = LaguerreBasis::new(9, 400.0, 3000).unwrap();
    let (alpha, h) = (9u32, 400.0);
    let m_max = 20usize;
    let dt = 2e-5;
    let steps = 50_000; // t up to 1 s, x = ht up to 400: envelope long gone
    let mut gram = vec![0.0; (m_max + 1) * (m_max + 1)];
    for j in 0..=steps {
        let t = j as f64 * dt;
        let weight = if j == 0 || j == steps { 0.5 * dt } else { dt };
        let x = h * t;
        let phis = eval_kernel_functions(&basis, t, m_max).unwrap();
        let common = weight * h * x.powi(alpha as i32);
        for m in 0..=m_max {
            for k in m..=m_max {
                gram[m * (m_max + 1) + k] += common * phis[m] * phis[k];
            }
        }
    }
    let mut worst_ortho: f64 = 0.0;
    for m in 0..=m_max {
        for k in m..=m_max {
            let expect = if m == k { 1.0 } else { 0.0 };
            worst_ortho = worst_ortho.max((gram[m * (m_max + 1) + k] - expect).abs());
        }
    }
    assert!(worst_ortho <= 1e-6, "orthonormality defect {worst_ortho:.3e}");

    // roundtrip of the source pulse over [0, 2] s at full n = 3000
    let signal = |t: f64| source_time_function(t, 30.0, 0.2, 4.0);
    let series = forward_transform(signal, &basis, 1e-4, 2.0).unwrap();
    let mut max_f: f64 = 0.0;
    let mut max_err: f64 = 0.0;
    for j in 0..=400 {
        let t = 2.0 * j as f64 / 400.0;
        let f = signal(t);
        max_f = max_f.max(f.abs());
        max_err = max_err.max((inverse_series(&series, &basis, t).unwrap() - f).abs());
    }
    assert!(max_err <= 1e-6 * max_f, "roundtrip error {max_err:.3e} vs 1e-6*{max_f:.3}");

    // accumulators against the direct convolution sum, n = 200
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let alpha_acc = 5u32;
    let len = 3;
    let harmonics: Vec<Vec<f64>> =
        (0..200).map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut acc = ConvAccumulators::new(alpha_acc, len);
    let mut worst_acc: f64 = 0.0;
    for m in 0..200 {
        if m > 0 && m % 40 == 0 {
            let via: Vec<f64> = acc
                .sum(m)
                .unwrap()
                .iter()
                .map(|v| series_prefactor(m, alpha_acc) * v)
                .collect();
            let mut direct = vec![0.0; len];
            for (k, r_k) in harmonics.iter().enumerate().take(m) {
                let w = conv_weight(m, k, alpha_acc).unwrap();
                for (d, r) in direct.iter_mut().zip(r_k) {
                    *d += w * r;
                }
            }
            let scale = direct.iter().fold(1e-300_f64, |a, v| a.max(v.abs()));
            for (a, d) in via.iter().zip(&direct) {
                worst_acc = worst_acc.max((a - d).abs() / scale);
            }
        }
        acc.step(m, &harmonics[m]).unwrap();
    }
    assert!(worst_acc <= 1e-12, "accumulator defect {worst_acc:.3e}");
    println!(
        "PASS criterion 6: orthonormality {:.1e}, roundtrip {:.1e} (n=3000), accumulator {:.1e}",
        worst_ortho, max_err, worst_acc
    );
}

fn thin_layer_medium() -> ElasticMedium {
    // 8 m low-velocity surface layer (vp 1600, vs 800, rho 1200) over a
    // vp 2000, vs 1100, rho 1500 half-space
    let (mu1, rho1) = (1200.0 * 800.0_f64.powi(2), 1200.0);
    let lam1 = rho1 * 1600.0_f64.powi(2) - 2.0 * mu1;
    let (mu2, rho2) = (1500.0 * 1100.0_f64.powi(2), 1500.0);
    let lam2 = rho2 * 2000.0_f64.powi(2) - 2.0 * mu2;
    ElasticMedium::layered(vec![(8.0, lam1, mu1, rho1), (f64::INFINITY, lam2, mu2, rho2)])
}

fn elastic_config(grid: Grid2D) -> SimulationConfig {
    SimulationConfig {
        grid,
        basis: LaguerreBasis::new(8, 600.0, 200).unwrap(),
        source: SourceSpec {
            kind: SourceKind::CenterOfPressure,
            r0: 0.0,
            z0: 4.0,
            f0: 25.0,
            t0: 0.08,
            gamma: 4.0,
        },
        amplitude: 1.0,
        receivers: vec![(100.0, 4.0)],
        snapshot_times: vec![],
        t_start: 0.0,
        t_end: 0.24,
        dt: 5e-4,
        solver: KrylovConfig::default(),
        workers: 1,
    }
}

#[test]
fn criterion_7_elastic_restart_monotonicity_and_self_convergence() {
    let medium = thin_layer_medium();
    let (l1, l2) = (160.0, 130.0);
    let lambda_s = 800.0 / 25.0; // slowest shear wavelength

    // (a) GMRES(10) residual estimates at restart boundaries nonincreasing,
    // checked on hand-rolled harmonics of the middle mesh
    {
        let h_r = lambda_s / 45.0;
        let grid = Grid2D::build(
            l1,
            l2,
            (l1 / h_r).round() as usize,
            (l2 / h_r).round() as usize,
        )
        .unwrap();
        let config = elastic_config(grid);
        let op = ElasticOperator::new(&grid, &medium, config.basis.h()).unwrap();
        let precond =
            build_elastic_preconditioner(&grid, &medium, config.basis.h(), 1).unwrap();
        let f_series = config.source_spectrum().unwrap();
        let n_cells = grid.n_r * grid.n_z;
        let mut acc_q = ConvAccumulators::new(config.basis.alpha(), n_cells);
        let mut acc_u = ConvAccumulators::new(config.basis.alpha(), n_cells);
        let mut boundaries_checked = 0usize;
        for m in 0..12 {
            let (phi_q, phi_u) = build_elastic_rhs(
                m,
                f_series[m],
                &config.source,
                &acc_q,
                &acc_u,
                &op.rho,
                config.basis.h(),
                &grid,
            )
            .unwrap();
            let mut b: Vec<f64> = Vec::with_capacity(2 * n_cells);
            for i in 0..grid.n_r {
                for k in 0..grid.n_z {
                    b.push(-grid.r(i) * phi_q.at(i, k));
                }
            }
            for i in 0..grid.n_r {
                for k in 0..grid.n_z {
                    b.push(-grid.r(i) * phi_u.at(i, k));
                }
            }
            let apply_c = |v: &[f64]| {
                let q = Field2D::from_slice(grid.n_r, grid.n_z, &v[..n_cells]).unwrap();
                let u = Field2D::from_slice(grid.n_r, grid.n_z, &v[n_cells..]).unwrap();
                let (cq, cu) = op.apply(&q, &u).unwrap();
                let mut out = cq.into_vec();
                out.extend(cu.into_vec());
                out
            };
            let apply_k_inv = |v: &[f64]| {
                let q = Field2D::from_slice(grid.n_r, grid.n_z, &v[..n_cells]).unwrap();
                let u = Field2D::from_slice(grid.n_r, grid.n_z, &v[n_cells..]).unwrap();
                let (yq, yu) = precond.apply_inverse_pair(&q, &u).unwrap();
                let mut out = yq.into_vec();
                out.extend(yu.into_vec());
                out
            };
            let (x, stats) = gmres_k(apply_c, apply_k_inv, &b, &config.solver).unwrap();
            assert!(stats.converged, "harmonic {m} did not converge");
            // cycle-end estimates: history[0] = 1, then one entry per iteration
            let k = config.solver.restart_k;
            let mut cycle_ends: Vec<f64> = (1..)
                .map(|c| c * k)
                .take_while(|&idx| idx < stats.history.len())
                .map(|idx| stats.history[idx])
                .collect();
            cycle_ends.push(*stats.history.last().unwrap());
            for pair in cycle_ends.windows(2) {
                assert!(
                    pair[1] <= pair[0] * (1.0 + 1e-10),
                    "restart-boundary residual increased on harmonic {m}: {:?}",
                    cycle_ends
                );
            }
            boundaries_checked += cycle_ends.len();
            acc_q.step(m, &x[..n_cells]).unwrap();
            acc_u.step(m, &x[n_cells..]).unwrap();
        }
        assert!(boundaries_checked > 12, "solves converged before any restart happened");
    }

    // (b) self-convergence of the surface trace across mesh refinements
    let mut traces: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for cells_per_lambda in [20.0_f64, 45.0, 90.0] {
        let h_r = lambda_s / cells_per_lambda;
        let grid = Grid2D::build(
            l1,
            l2,
            (l1 / h_r).round() as usize,
            (l2 / h_r).round() as usize,
        )
        .unwrap();
        let config = elastic_config(grid);
        let (seismogram, _, report) = run_elastic(&config, &medium).unwrap();
        assert!(report.harmonics.iter().all(|s| s.residual <= config.solver.tol));
        let trace = &seismogram.traces[0];
        traces.push((trace.components[0].clone(), trace.components[1].clone()));
    }
    let dist = |a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>)| {
        let mut s = 0.0;
        for (x, y) in a.0.iter().zip(&b.0) {
            s += (x - y) * (x - y);
        }
        for (x, y) in a.1.iter().zip(&b.1) {
            s += (x - y) * (x - y);
        }
        s.sqrt()
    };
    let d_coarse = dist(&traces[0], &traces[1]);
    let d_fine = dist(&traces[1], &traces[2]);
    assert!(
        d_coarse >= 2.0 * d_fine,
        "self-convergence too slow: d(20,45) = {d_coarse:.3e}, d(45,90) = {d_fine:.3e}"
    );
    println!(
        "PASS criterion 7: restarts nonincreasing; trace distance {:.3e} -> {:.3e} ({:.2}x shrink)",
        d_coarse,
        d_fine,
        d_coarse / d_fine
    );
}

#[test]
fn criterion_8_cost_model_exact_values() {
    let run = |args: &[&str]| {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_lagwave"))
            .args(args)
            .output()
            .unwrap();
        (out.status.code(), String::from_utf8(out.stdout).unwrap())
    };
    let (code, stdout) =
        run(&["costmodel", "--p", "1,4", "--alpha-lat", "1", "--beta", "0", "--gamma", "0"]);
    assert_eq!(code, Some(0));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[1], "1 0 0 -");
    assert_eq!(lines[2], "4 4 6 1.5");

    let (code, stdout) = run(&[
        "costmodel", "--p", "2", "--alpha-lat", "0", "--beta", "1", "--gamma", "1", "--l", "2",
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(stdout.lines().nth(1).unwrap(), "2 1.5 3 2");

    let (code, _) = run(&["costmodel", "--p", "3"]);
    assert_eq!(code, Some(2), "non-power-of-two p must exit 2");
    println!("PASS criterion 8: cost model matches hand-evaluated values (p=1 -> 0/0, p=4 -> 4/6, p=2 -> 1.5/3)");
}

fn acoustic_dense(op: &AcousticOperator, grid: &Grid2D) -> nalgebra::DMatrix<f64> {
    let n = grid.n_r * grid.n_z;
    let mut a = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = op.apply_spd(&Field2D::from_slice(grid.n_r, grid.n_z, &e).unwrap()).unwrap();
        for (i, v) in col.as_slice().iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    a
}

#[test]
fn criterion_9_operator_correctness() {
    // adjointness + positive definiteness, dense 8x8 acoustic
    let grid = Grid2D::build(1.0, 1.0, 8, 8).unwrap();
    let medium = AcousticMedium::layered(vec![(0.4, 1.0, 1.0), (f64::INFINITY, 3.0, 2.0)]);
    let op = AcousticOperator::new(&grid, &medium, 2.0);
    let a = acoustic_dense(&op, &grid);
    let scale = a.amax();
    let asym = (&a - a.transpose()).amax();
    assert!(asym <= 1e-12 * scale, "acoustic asymmetry {asym:.3e}");
    let eigs = a.clone().symmetric_eigenvalues();
    let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min_eig > 0.0, "acoustic operator not positive definite: {min_eig:.3e}");

    // elastic positive definiteness on a dense 6x6 grid (symmetric part)
    let egrid = Grid2D::build(1.0, 1.0, 6, 6).unwrap();
    let emedium = ElasticMedium::homogeneous(2.0, 1.0, 1.3);
    let eop = ElasticOperator::new(&egrid, &emedium, 2.0).unwrap();
    let n = egrid.n_r * egrid.n_z;
    let mut c = nalgebra::DMatrix::zeros(2 * n, 2 * n);
    for j in 0..2 * n {
        let mut e = vec![0.0; 2 * n];
        e[j] = 1.0;
        let q = Field2D::from_slice(egrid.n_r, egrid.n_z, &e[..n]).unwrap();
        let u = Field2D::from_slice(egrid.n_r, egrid.n_z, &e[n..]).unwrap();
        let (cq, cu) = eop.apply(&q, &u).unwrap();
        for (i, v) in cq.as_slice().iter().chain(cu.as_slice()).enumerate() {
            c[(i, j)] = *v;
        }
    }
    let sym = (&c + c.transpose()) * 0.5;
    let emin = sym
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    assert!(emin > 0.0, "elastic symmetric part not positive definite: {emin:.3e}");

    // manufactured-solution convergence orders
    let ao = acoustic_mms_orders();
    for o in &ao {
        assert!((1.7..=2.3).contains(o), "acoustic MMS order {o} outside [1.7, 2.3]: {ao:?}");
    }
    let eo = elastic_mms_orders();
    for o in &eo {
        assert!((1.7..=2.3).contains(o), "elastic MMS order {o} outside [1.7, 2.3]: {eo:?}");
    }
    println!(
        "PASS criterion 9: acoustic symmetric ({:.1e}) and PD (min eig {:.2e}), elastic PD (min eig {:.2e}), MMS orders acoustic {:?} elastic {:?}",
        asym, min_eig, emin, ao, eo
    );
}

/// u = cos(a r) cos(b z) with kappa = 1: the continuous r-weighted operator is
/// u_r + r u_rr + r u_zz - r (rho h^2/4) u in closed form.
fn acoustic_mms_orders() -> Vec<f64> {
    let (l1, l2) = (1.0, 1.2);
    let (rho, h) = (1.3, 2.0);
    let a = std::f64::consts::PI / (2.0 * l1);
    let b = std::f64::consts::PI / l2;
    let w = rho * h * h / 4.0;
    let medium = AcousticMedium::homogeneous(1.0, rho);
    let mut errors = Vec::new();
    for n_side in [16usize, 32, 64] {
        let grid = Grid2D::build(l1, l2, n_side, (1.2 * n_side as f64) as usize).unwrap();
        let op = AcousticOperator::new(&grid, &medium, h);
        let u = Field2D::from_fn(grid.n_r, grid.n_z, |i, k| {
            (a * grid.r(i)).cos() * (b * grid.z(k)).cos()
        });
        let lu = op.apply(&u).unwrap();
        // z-boundary rows use the half-cell zero-flux closure (consistent
        // with the preconditioner's eigenbasis, pointwise low order); measure
        // the interior
        let mut err: f64 = 0.0;
        for i in 0..grid.n_r - 1 {
            let r = grid.r(i);
            for k in 1..grid.n_z - 1 {
                let z = grid.z(k);
                let uv = (a * r).cos() * (b * z).cos();
                let ur = -a * (a * r).sin() * (b * z).cos();
                let exact = ur + r * (-(a * a) - b * b - w) * uv;
                err = err.max((lu.at(i, k) - exact).abs());
            }
        }
        errors.push(err);
    }
    errors.windows(2).map(|p| (p[0] / p[1]).log2()).collect()
}

/// Q = sin(pr) (1 - cos(qz)), U = cos(pr/2) (1 - cos(qz)), constant
/// lambda, mu, rho; compares against the closed-form continuous operator.
fn elastic_mms_orders() -> Vec<f64> {
    let (l1, l2) = (1.0, 1.2);
    let (lam, mu, rho, h) = (2.0, 1.0, 1.3, 2.0);
    let p = std::f64::consts::PI / l1;
    let q = 2.0 * std::f64::consts::PI / l2;
    let w = rho * h * h / 4.0;
    let medium = ElasticMedium::homogeneous(lam, mu, rho);
    let mut errors = Vec::new();
    for n_side in [32usize, 64, 128] {
        let grid = Grid2D::build(l1, l2, n_side, (1.2 * n_side as f64) as usize).unwrap();
        let op = ElasticOperator::new(&grid, &medium, h).unwrap();
        let qf = Field2D::from_fn(grid.n_r, grid.n_z, |i, k| {
            (p * grid.r(i)).sin() * (1.0 - (q * grid.z(k)).cos())
        });
        let uf = Field2D::from_fn(grid.n_r, grid.n_z, |i, k| {
            (0.5 * p * grid.r(i)).cos() * (1.0 - (q * grid.z(k)).cos())
        });
        let (cq, cu) = op.apply(&qf, &uf).unwrap();
        // z-boundary rows use the half-cell zero-flux closure (consistent
        // with the preconditioner's eigenbasis, pointwise low order); measure
        // the interior
        let mut err: f64 = 0.0;
        for i in 0..grid.n_r - 1 {
            let r = grid.r(i);
            for k in 1..grid.n_z - 1 {
                let z = grid.z(k);
                let (sr, cr) = (p * r).sin_cos();
                let (sr2, cr2) = (0.5 * p * r).sin_cos();
                let (sz, cz) = (q * z).sin_cos();
                let g = 1.0 - cz; // z profile and derivatives
                let gz = q * sz;
                let gzz = q * q * cz;

                let qv = sr * g;
                let q_r = p * cr * g;
                let q_rr = -p * p * sr * g;
                let q_z = sr * gz;
                let q_zz = sr * gzz;
                let q_rz = p * cr * gz;
                let uv = cr2 * g;
                let u_r = -0.5 * p * sr2 * g;
                let u_rr = -0.25 * p * p * cr2 * g;
                let u_z = cr2 * gz;
                let u_zz = cr2 * gzz;
                let u_rz = -0.5 * p * sr2 * gz;

                // first component: d_r(r F) + d_z(r G) - lam(Q_r + U_z + Q/r)
                //                  - 2 mu Q/r - r w Q
                let f_val = (2.0 * mu + lam) * q_r + lam * (u_z + qv / r);
                let f_r = (2.0 * mu + lam) * q_rr + lam * (u_rz + q_r / r - qv / (r * r));
                let g_z = mu * (q_zz + u_rz);
                let l_q = f_val + r * f_r + r * g_z
                    - lam * (q_r + u_z + qv / r)
                    - 2.0 * mu * qv / r
                    - r * w * qv;

                // second component: d_r(r mu (Q_z + U_r))
                //                   + d_z(r ((lam+2mu) U_z + lam (Q_r + Q/r)))
                let l_u = mu * (q_z + u_r)
                    + r * mu * (q_rz + u_rr)
                    + r * ((lam + 2.0 * mu) * u_zz + lam * (q_rz + q_z / r))
                    - r * w * uv;

                err = err.max((cq.at(i, k) + l_q).abs().max((cu.at(i, k) + l_u).abs()));
            }
        }
        errors.push(err);
    }
    errors.windows(2).map(|p| (p[0] / p[1]).log2()).collect()
}
