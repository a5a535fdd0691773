//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `--nocapture` to see them). Tolerances are pinned in the
//! assertions.

use std::process::Command;
use std::time::Instant;

use mgmodes_core::closedform::{self, BsInputs, OptionKind};
use mgmodes_core::grid::GridSpec;
use mgmodes_core::kkmodes;
use mgmodes_core::mc::{mc_price, McConfig};
use mgmodes_core::model::{ModeIndex, PayoffSpec, RiskNeutralParams};
use mgmodes_core::num_complex::Complex;
use mgmodes_core::pde::{self, SolverConfig};
use mgmodes_core::sde::{self, Scheme};
use mgmodes_core::hedge;

/// Market data shared by criteria 1-4, 7 and 8.
fn market(mode: ModeIndex, xi: f64, rho: f64) -> RiskNeutralParams<f64> {
    RiskNeutralParams { r: 0.05, mu_bar: 0.0, xi, rho, mode, v0: 0.04 }
}

fn acceptance_grid() -> GridSpec<f64> {
    GridSpec::default_domain(100.0, 100.0, 0.04, 201, 51, 200)
}

fn atm_call() -> PayoffSpec<f64> {
    PayoffSpec::call(100.0, 1.0)
}

fn bs_oracle() -> f64 {
    closedform::bs_price(&BsInputs {
        s: 100.0,
        k: 100.0,
        r: 0.05,
        sigma: 0.2,
        tau: 1.0,
        kind: OptionKind::Call,
    })
    .unwrap()
}

#[test]
fn criterion_01_ground_state() {
    let start = Instant::now();
    let payoff = atm_call();
    let grid = acceptance_grid();
    let surface = pde::solve(
        &market(ModeIndex::GROUND, 0.3, -0.5),
        &payoff,
        &grid,
        &SolverConfig::default(),
    )
    .unwrap();
    let disc = (-0.05_f64).exp();
    let mut worst = 0.0_f64;
    for i in 0..grid.n_s {
        for j in 0..grid.n_v {
            let expected = disc * payoff.eval(grid.s(i), grid.v(j)).unwrap();
            worst = worst.max((surface.values[grid.idx(i, j)] - expected).abs());
        }
    }
    let elapsed = start.elapsed();
    assert!(worst <= 1e-10, "ground-state pointwise error {}", worst);
    assert!(elapsed.as_secs_f64() < 1.0, "ground state took {:?}", elapsed);
    println!(
        "criterion 1 (ground state pointwise <= 1e-10, < 1 s): PASS (err {:.2e}, {:?})",
        worst, elapsed
    );
}

#[test]
fn criterion_02_black_scholes_reduction() {
    let start = Instant::now();
    let surface = pde::solve(
        &market(ModeIndex::CLASSICAL, 0.0, 0.0),
        &atm_call(),
        &acceptance_grid(),
        &SolverConfig::default(),
    )
    .unwrap();
    let price = pde::price_at(&surface, 100.0, 0.04).unwrap();
    let oracle = bs_oracle();
    let elapsed = start.elapsed();
    assert!((oracle - 10.4506).abs() < 1e-4, "oracle {} drifted from its pin", oracle);
    let rel = (price - oracle).abs() / oracle;
    assert!(rel < 1e-3, "pde {} vs bs {} (rel {})", price, oracle, rel);
    assert!(elapsed.as_secs_f64() < 10.0, "solve took {:?}", elapsed);
    println!(
        "criterion 2 (Black-Scholes reduction within 0.1%, < 10 s): PASS (rel {:.2e}, {:?})",
        rel, elapsed
    );
}

#[test]
fn criterion_03_generalized_mode_anchor() {
    // The n = 2 closed form is pre-validated against a 10^6-path Monte Carlo
    // of the mode-(2,0) dynamics (constant variance: the log-euler terminal
    // distribution is exact for any step count).
    let rn = market(ModeIndex::new(2, 0), 0.0, 0.0);
    let payoff = atm_call();
    let formula = closedform::generalized_bs_price(
        &BsInputs {
            s: 100.0,
            k: 100.0,
            r: 0.05,
            sigma: 0.2,
            tau: 1.0,
            kind: OptionKind::Call,
        },
        2,
    )
    .unwrap();
    let est = mc_price(
        &rn,
        &payoff,
        100.0,
        &McConfig { paths: 1_000_000, steps: 16, seed: 314, scheme: Scheme::LogEuler, antithetic: false },
    )
    .unwrap();
    assert!(
        (est.price - formula).abs() < 3.0 * est.std_err,
        "closed form {} vs mc {} +- {}",
        formula,
        est.price,
        est.std_err
    );

    let surface = pde::solve(&rn, &payoff, &acceptance_grid(), &SolverConfig::default()).unwrap();
    let price = pde::price_at(&surface, 100.0, 0.04).unwrap();
    let rel = (price - formula).abs() / formula;
    assert!(rel < 1e-3, "pde {} vs closed form {} (rel {})", price, formula, rel);
    println!(
        "criterion 3 (mode-(2,0) anchor within 0.1%, formula MC-validated): PASS (rel {:.2e})",
        rel
    );
}

#[test]
fn criterion_04_stochastic_vol_cross_validation() {
    let start = Instant::now();
    let rn = market(ModeIndex::CLASSICAL, 0.3, -0.5);
    let payoff = atm_call();
    let surface = pde::solve(&rn, &payoff, &acceptance_grid(), &SolverConfig::default()).unwrap();
    let pde_price = pde::price_at(&surface, 100.0, 0.04).unwrap();
    let est = mc_price(
        &rn,
        &payoff,
        100.0,
        &McConfig { paths: 500_000, steps: 200, seed: 99, scheme: Scheme::LogEuler, antithetic: false },
    )
    .unwrap();
    let elapsed = start.elapsed();
    let gap = (pde_price - est.price).abs();
    assert!(
        gap < 3.0 * est.std_err,
        "pde {} vs mc {} +- {} (gap {})",
        pde_price,
        est.price,
        est.std_err,
        gap
    );
    assert!(elapsed.as_secs_f64() < 60.0, "cross-validation took {:?}", elapsed);
    println!(
        "criterion 4 (stochastic-vol PDE within 3 MC SE at 5e5 paths, < 60 s): PASS (gap {:.2e} vs 3SE {:.2e}, {:?})",
        gap,
        3.0 * est.std_err,
        elapsed
    );
}

#[test]
fn criterion_05_noise_fidelity() {
    let dt = 0.01;
    for rho in [-0.5, 0.0, 0.7] {
        let nm = sde::gen_noise::<f64>(1000, 1000, dt, rho, 7).unwrap();
        let n = 1_000_000.0_f64;
        for (label, var) in [("r", nm.sample_variance_r()), ("q", nm.sample_variance_q())] {
            assert!(
                (var - dt).abs() / dt < 0.01,
                "rho {}: {}-increment variance {} off dt {}",
                rho,
                label,
                var,
                dt
            );
        }
        let corr = nm.sample_correlation();
        let half_width = 2.576 * (1.0 - rho * rho) / n.sqrt();
        assert!(
            (corr - rho).abs() <= half_width,
            "rho {}: sample correlation {} outside 99% CI +-{}",
            rho,
            corr,
            half_width
        );
    }
    println!("criterion 5 (increment variance within 1% of dt, correlation in 99% CI): PASS");
}

#[test]
fn criterion_06_martingale_property() {
    let rn = market(ModeIndex::CLASSICAL, 0.3, -0.5);
    let dynamics = sde::Dynamics::risk_neutral(&rn);
    let steps = 100;
    let dt = 1.0 / steps as f64;
    let ts = sde::simulate_terminal(
        &dynamics,
        rn.mode,
        100.0,
        100_000,
        steps,
        dt,
        Scheme::LogEuler,
        4242,
    )
    .unwrap();
    let disc = (-0.05_f64).exp();
    let n = ts.s.len() as f64;
    let mean = ts.s.iter().map(|s| disc * s).sum::<f64>() / n;
    let var = ts.s.iter().map(|s| (disc * s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    assert!(
        (mean - 100.0).abs() < 3.0 * se,
        "discounted mean {} +- {} vs 100",
        mean,
        se
    );
    println!(
        "criterion 6 (discounted S_T mean within 3 SE of S0): PASS (mean {:.4} se {:.4})",
        mean, se
    );
}

#[test]
fn criterion_07_put_call_parity() {
    let rn = market(ModeIndex::CLASSICAL, 0.0, 0.0);
    let grid = acceptance_grid();
    let cfg = SolverConfig::default();
    let call = pde::solve(&rn, &atm_call(), &grid, &cfg).unwrap();
    let put = pde::solve(&rn, &PayoffSpec::put(100.0, 1.0), &grid, &cfg).unwrap();
    let price_error = (pde::price_at(&call, 100.0, 0.04).unwrap() - bs_oracle()).abs();
    let k_disc = 100.0 * (-0.05_f64).exp();
    let mut worst = 0.0_f64;
    for i in 1..grid.n_s - 1 {
        for j in 1..grid.n_v - 1 {
            let p = grid.idx(i, j);
            worst = worst.max((call.values[p] - put.values[p] - (grid.s(i) - k_disc)).abs());
        }
    }
    assert!(
        worst <= 2.0 * price_error,
        "parity residual {} above 2x price error {}",
        worst,
        price_error
    );
    println!(
        "criterion 7 (parity residual <= 2x price error): PASS ({:.2e} vs {:.2e})",
        worst,
        2.0 * price_error
    );
}

#[test]
fn criterion_08_convergence_order() {
    let rows = pde::convergence_study(
        &market(ModeIndex::CLASSICAL, 0.0, 0.0),
        &atm_call(),
        &acceptance_grid(),
        4,
        &SolverConfig::default(),
        100.0,
    )
    .unwrap();
    let order = rows[3].observed_order.expect("finest level carries an order");
    assert!(order >= 1.7, "observed order {} below 1.7 (errors {:?})", order, rows);
    println!(
        "criterion 8 (spatial order >= 1.7 between finest levels of 4): PASS (order {:.3})",
        order
    );
}

#[test]
fn criterion_09_hedge_algebra() {
    // Exact root of the first hedging row on 100 reproducible random inputs.
    let mut state = 0x2545f4914f6cdd1d_u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for k in 0..100 {
        let theta1 = 4.0 * next() - 2.0;
        let delta = 2.0 * next() - 1.0;
        let sigma = 0.01 + next();
        let s = 1.0 + 199.0 * next();
        let n = (next() * 4.0) as u32;
        let mode = ModeIndex::new(n, 1);
        let theta2 = -(n as f64 * theta1 * delta);
        let p = hedge::Portfolio { theta1, theta2, f: 1.0, s };
        let (res1, _) = hedge::hedge_matrix_residual(&p, delta, 0.7, sigma, 0.3, 0.04, s, mode);
        assert_eq!(res1, 0.0, "res1 not exactly zero at sample {}", k);

        let (_, res2) =
            hedge::hedge_matrix_residual(&p, delta, 0.7, sigma, 0.3, 0.04, s, ModeIndex::new(n, 0));
        assert_eq!(res2, 0.0, "res2 not identically zero for m = 0 at sample {}", k);
    }

    // Empirical delta hedge at xi = 0: P&L std ratio between 1x and 4x
    // rebalancing inside [0.4, 0.65].
    let rn = market(ModeIndex::CLASSICAL, 0.0, 0.0);
    let payoff = atm_call();
    let coarse = hedge::simulate_hedged_pnl(&rn, &payoff, 100.0, 52, 8_000, 7)
        .unwrap()
        .summary();
    let fine = hedge::simulate_hedged_pnl(&rn, &payoff, 100.0, 208, 8_000, 7)
        .unwrap()
        .summary();
    let ratio = fine.std / coarse.std;
    assert!(
        (0.4..=0.65).contains(&ratio),
        "P&L std ratio {} outside [0.4, 0.65]",
        ratio
    );
    println!(
        "criterion 9 (hedge row exact root; P&L std ratio in [0.4, 0.65]): PASS (ratio {:.3})",
        ratio
    );
}

#[test]
fn criterion_10_kk_module() {
    // Zero mode reproduces the rest term exactly.
    let params = kkmodes::KKParams {
        l: 0.25,
        mass: 1.5,
        c: 2.0,
        gamma: 1.25,
        signature: kkmodes::Signature::Spacelike,
    };
    assert_eq!(kkmodes::effective_mass(&params, 0), 1.5 * 1.5 * 2.0 * 2.0);

    // Round-trip and Parseval against the O(N^2) direct sum.
    let n = 256usize;
    let period = 1.0;
    let field = kkmodes::ModeField::from_fn(n, period, |x| {
        Complex::new(0.0, 14.0 * std::f64::consts::PI * x * x).exp()
            + Complex::new(0.4, -0.2) * Complex::new(0.0, -4.0 * std::f64::consts::PI * x).exp()
    })
    .unwrap();
    let coeffs = kkmodes::mode_decompose(&field);
    let direct: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            let mut acc = Complex::new(0.0, 0.0);
            for (j, &s) in field.samples.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                acc += s * Complex::new(ang.cos(), ang.sin());
            }
            acc / n as f64
        })
        .collect();
    let scale = field.samples.iter().map(|s| s.norm()).fold(1e-300, f64::max);
    for (a, b) in coeffs.iter().zip(&direct) {
        assert!(
            (a - b).norm() <= 1e-12 * scale,
            "fast transform drifts from direct sum"
        );
    }
    let back = kkmodes::mode_reconstruct(&coeffs, period, n).unwrap();
    let max_rel = field
        .samples
        .iter()
        .zip(&back.samples)
        .map(|(a, b)| (a - b).norm() / scale)
        .fold(0.0_f64, f64::max);
    assert!(max_rel <= 1e-12, "round-trip relative error {}", max_rel);
    let lhs = field.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / n as f64;
    let rhs = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>();
    assert!(
        (lhs - rhs).abs() <= 1e-12 * lhs,
        "Parseval gap {}",
        (lhs - rhs).abs()
    );

    // Momentum/radius identity closes on the realized increment.
    let increment = 0.01_f64;
    let radius = kkmodes::compactification_radius(0.7, 0.3, increment).unwrap();
    assert_eq!(kkmodes::quantized_momentum(1, radius).unwrap(), increment);
    println!("criterion 10 (KK formulas, transform round-trip, momentum identity): PASS");
}

#[test]
fn criterion_11_determinism_serial_vs_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.json");
    std::fs::write(
        &config_path,
        format!(
            r#"{{
  "phi": 0.1, "mu": 0.0, "v0": 0.04, "xi": 0.3, "rho": -0.5,
  "r": 0.05, "lambda2": 0.0, "mu_bar": 0.0,
  "n": 1, "m": 1, "s0": 100.0,
  "payoff": {{"kind": "call", "strike": 100.0, "maturity": 1.0}},
  "mc": {{"paths": 40000, "steps": 64, "seed": 20240, "scheme": "log-euler", "antithetic": false}},
  "out_dir": {:?}
}}"#,
            dir.path().join("out1")
        ),
    )
    .unwrap();

    let run = |threads: &str, config: &std::path::Path, out: &std::path::Path| {
        let output = Command::new(env!("CARGO_BIN_EXE_mgmodes"))
            .args(["mc", "--config"])
            .arg(config)
            .arg("--out")
            .arg(out)
            .env("MGMODES_THREADS", threads)
            .output()
            .expect("binary runs");
        assert!(output.status.success(), "mc failed: {:?}", output);
        output.stdout
    };

    let serial = run("1", &config_path, &dir.path().join("out1"));
    let parallel = run("4", &config_path, &dir.path().join("out2"));
    assert_eq!(serial, parallel, "serial vs parallel stdout differs");

    // Replaying the emitted manifest reproduces the run byte for byte.
    let manifest = dir.path().join("out1").join("manifest_mc.json");
    let replay = run("4", &manifest, &dir.path().join("out3"));
    assert_eq!(serial, replay, "manifest replay differs");
    println!("criterion 11 (MC byte-identical serial vs parallel and on replay): PASS");
}
