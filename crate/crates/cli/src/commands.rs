//! Subcommand implementations. Every command prints its headline numbers to
//! stdout with 10 significant digits, writes its CSV products into the
//! output directory, and finishes with a run manifest that can be fed back
//! through `--config` to replay the run.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use mgmodes_core::num_complex::Complex;
use serde_json::json;

use mgmodes_core::operator::{build_generator, residual, residual_norms};
use mgmodes_core::{fmt_sig, hedge, kkmodes, mc, pde};

use crate::config::RunConfig;
use crate::CliError;

pub struct CommandIo {
    pub out_dir: PathBuf,
    started: Instant,
}

impl CommandIo {
    pub fn new(out_dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&out_dir).map_err(|e| {
            CliError::config("out_dir", format!("cannot create {}: {}", out_dir.display(), e))
        })?;
        Ok(Self { out_dir, started: Instant::now() })
    }

    fn write_file(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes)
            .map_err(|e| CliError::Numerical(format!("cannot write {}: {}", path.display(), e)))?;
        Ok(path)
    }

    fn write_manifest(
        &self,
        command: &str,
        config: &RunConfig,
        seed: u64,
        results: serde_json::Value,
    ) -> Result<(), CliError> {
        let manifest = json!({
            "tool": "mgmodes",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "seed": seed,
            "duration_seconds": self.started.elapsed().as_secs_f64(),
            "config": config,
            "results": results,
        });
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Numerical(format!("manifest serialization: {}", e)))?;
        self.write_file(&format!("manifest_{}.json", command), text.as_bytes())?;
        Ok(())
    }
}

pub fn cmd_price(config: &RunConfig, io: &CommandIo) -> Result<(), CliError> {
    let rn = config.risk_neutral()?;
    let payoff = config.payoff_spec()?;
    let grid = config.grid_spec();
    let surface = pde::solve(&rn, &payoff, &grid, &config.solver_config())
        .map_err(CliError::from_core)?;
    let price =
        pde::price_at(&surface, config.spot(), config.v0).map_err(CliError::from_core)?;
    println!("price {}", fmt_sig(price));
    let mut csv = Vec::new();
    surface
        .write_csv(&mut csv)
        .map_err(|e| CliError::Numerical(format!("surface csv: {}", e)))?;
    io.write_file("surface.csv", &csv)?;
    io.write_manifest(
        "price",
        config,
        config.mc.seed,
        json!({ "price": price, "s0": config.spot(), "v0": config.v0 }),
    )
}

pub fn cmd_mc(config: &RunConfig, io: &CommandIo) -> Result<(), CliError> {
    let rn = config.risk_neutral()?;
    let payoff = config.payoff_spec()?;
    let mc_config = config.mc_config()?;
    let est = mc::mc_price(&rn, &payoff, config.spot(), &mc_config).map_err(CliError::from_core)?;
    println!("price {}", fmt_sig(est.price));
    println!("std_err {}", fmt_sig(est.std_err));
    println!("paths {}", est.paths);
    println!("v_clamps {}", est.v_clamps);
    io.write_manifest(
        "mc",
        config,
        mc_config.seed,
        json!({
            "price": est.price,
            "std_err": est.std_err,
            "paths": est.paths,
            "v_clamps": est.v_clamps,
        }),
    )
}

pub fn cmd_converge(config: &RunConfig, levels: usize, io: &CommandIo) -> Result<(), CliError> {
    let rn = config.risk_neutral()?;
    let payoff = config.payoff_spec()?;
    let rows = pde::convergence_study(
        &rn,
        &payoff,
        &config.grid_spec(),
        levels,
        &config.solver_config(),
        config.spot(),
    )
    .map_err(CliError::from_core)?;
    for row in &rows {
        println!(
            "level {} h_s {} dt {} price {} error {} order {}",
            row.level,
            fmt_sig(row.h_s),
            fmt_sig(row.dt),
            fmt_sig(row.price),
            fmt_sig(row.error),
            row.observed_order.map(fmt_sig).unwrap_or_else(|| "-".to_string()),
        );
    }
    let mut csv = Vec::new();
    pde::write_convergence_csv(&rows, &mut csv)
        .map_err(|e| CliError::Numerical(format!("convergence csv: {}", e)))?;
    io.write_file("converge.csv", &csv)?;
    let results: Vec<_> = rows
        .iter()
        .map(|r| {
            json!({
                "level": r.level,
                "price": r.price,
                "error": r.error,
                "order": r.observed_order,
            })
        })
        .collect();
    io.write_manifest("converge", config, config.mc.seed, json!({ "levels": results }))
}

pub fn cmd_residual(config: &RunConfig, io: &CommandIo) -> Result<(), CliError> {
    let rn = config.risk_neutral()?;
    let payoff = config.payoff_spec()?;
    let grid = config.grid_spec();
    if grid.n_t < 2 {
        return Err(CliError::config("grid.n_t", "residual check needs n_t >= 2".to_string()));
    }
    let mid = grid.n_t / 2;
    let (_, slices) = pde::solve_with_captures(
        &rn,
        &payoff,
        &grid,
        &config.solver_config(),
        &[mid, mid - 1],
    )
    .map_err(CliError::from_core)?;
    let gen = build_generator(&rn, &grid).map_err(CliError::from_core)?;
    let dt = payoff.maturity / grid.n_t as f64;
    let res = residual(&slices[0], &slices[1], &gen, dt).map_err(CliError::from_core)?;
    let (max, rms) = residual_norms(&res);
    println!("residual_max {}", fmt_sig(max));
    println!("residual_rms {}", fmt_sig(rms));
    println!("slice_t {}", fmt_sig(slices[0].t));

    let mut csv = Vec::new();
    writeln!(csv, "i,j,S,V,residual").unwrap();
    let cols = grid.n_v - 2;
    for i in 1..grid.n_s - 1 {
        for j in 1..grid.n_v - 1 {
            writeln!(
                csv,
                "{},{},{},{},{}",
                i,
                j,
                fmt_sig(grid.s(i)),
                fmt_sig(grid.v(j)),
                fmt_sig(res[(i - 1) * cols + (j - 1)])
            )
            .unwrap();
        }
    }
    io.write_file("residual.csv", &csv)?;
    io.write_manifest(
        "residual",
        config,
        config.mc.seed,
        json!({ "residual_max": max, "residual_rms": rms, "slice_t": slices[0].t }),
    )
}

pub fn cmd_hedge(config: &RunConfig, io: &CommandIo) -> Result<(), CliError> {
    let rn = config.risk_neutral()?;
    let payoff = config.payoff_spec()?;
    if config.hedge.rebalances.is_empty() {
        return Err(CliError::config("hedge.rebalances", "must list at least one count".to_string()));
    }
    let mut stats_csv = Vec::new();
    writeln!(stats_csv, "rebalances,paths,mean,std,std_err").unwrap();
    let mut results = Vec::new();
    for &rebalances in &config.hedge.rebalances {
        let dist = hedge::simulate_hedged_pnl(
            &rn,
            &payoff,
            config.spot(),
            rebalances,
            config.hedge.paths,
            config.mc.seed,
        )
        .map_err(CliError::from_core)?;
        let s = dist.summary();
        println!(
            "rebalances {} mean {} std {} std_err {}",
            rebalances,
            fmt_sig(s.mean),
            fmt_sig(s.std),
            fmt_sig(s.std_err)
        );
        writeln!(
            stats_csv,
            "{},{},{},{},{}",
            rebalances,
            s.paths,
            fmt_sig(s.mean),
            fmt_sig(s.std),
            fmt_sig(s.std_err)
        )
        .unwrap();
        let mut hist_csv = Vec::new();
        dist.write_histogram_csv(config.hedge.histogram_bins, &mut hist_csv)
            .map_err(|e| CliError::Numerical(format!("histogram csv: {}", e)))?;
        io.write_file(&format!("pnl_hist_{}.csv", rebalances), &hist_csv)?;
        results.push(json!({
            "rebalances": rebalances,
            "mean": s.mean,
            "std": s.std,
            "std_err": s.std_err,
        }));
    }
    io.write_file("pnl_stats.csv", &stats_csv)?;
    io.write_manifest("hedge", config, config.mc.seed, json!({ "rebalances": results }))
}

pub fn cmd_modes(config: &RunConfig, io: &CommandIo) -> Result<(), CliError> {
    let params = config.kk_params()?;
    if !(params.l > 0.0) {
        return Err(CliError::config("kk.l", format!("must be > 0 (got {})", params.l)));
    }
    if !(params.gamma >= 1.0) {
        return Err(CliError::config("kk.gamma", format!("must be >= 1 (got {})", params.gamma)));
    }

    let mut csv = Vec::new();
    writeln!(csv, "n,effective_mass").unwrap();
    for n in 0..=config.kk.n_max {
        let m_eff = kkmodes::effective_mass(&params, n);
        println!("effective_mass n={} {}", n, fmt_sig(m_eff));
        writeln!(csv, "{},{}", n, fmt_sig(m_eff)).unwrap();
    }
    io.write_file("kk_mass.csv", &csv)?;

    // Round-trip report on a deterministic broadband field over one period:
    // a chirp plus two pure modes, exercising every coefficient bin.
    let period = 2.0 * std::f64::consts::PI * params.l;
    let count = config.kk.samples;
    let field = kkmodes::ModeField::from_fn(count, period, |x| {
        let u = x / period;
        let chirp = Complex::new(0.0, std::f64::consts::PI * count as f64 * u * u).exp();
        let low = Complex::new(0.0, 2.0 * std::f64::consts::PI * u).exp();
        let mid = Complex::new(0.3, -0.1) * Complex::new(0.0, -6.0 * std::f64::consts::PI * u).exp();
        chirp + low + mid
    })
    .map_err(CliError::from_core)?;
    let coeffs = kkmodes::mode_decompose(&field);
    let back = kkmodes::mode_reconstruct(&coeffs, period, coeffs.len()).map_err(CliError::from_core)?;
    let scale = field.samples.iter().map(|s| s.norm()).fold(1e-300, f64::max);
    let max_rel = field
        .samples
        .iter()
        .zip(&back.samples)
        .map(|(a, b)| (a - b).norm() / scale)
        .fold(0.0, f64::max);
    let lhs: f64 =
        field.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / field.samples.len() as f64;
    let rhs: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    let parseval_gap = (lhs - rhs).abs() / lhs.max(1e-300);
    println!("roundtrip_max_rel_err {}", fmt_sig(max_rel));
    println!("parseval_rel_gap {}", fmt_sig(parseval_gap));
    io.write_manifest(
        "modes",
        config,
        config.mc.seed,
        json!({
            "roundtrip_max_rel_err": max_rel,
            "parseval_rel_gap": parseval_gap,
            "samples": config.kk.samples,
        }),
    )
}

