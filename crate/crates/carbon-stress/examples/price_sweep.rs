//! A full carbon-price sweep: loss curves across prices, pass-through
//! modes and production regimes, plus the choke-point discontinuity.
//!
//! ```bash
//! cargo run --release --example price_sweep
//! ```

use carbon_stress::production::ProductionFn;
use carbon_stress::scenario::{
    prepare_instance, run_cell, run_cells, write_reports, CellOptions, PassThroughAxis,
    ProductionFnAxis, RunConfig,
};
use carbon_stress::shock::ShockScenario;
use carbon_stress::synthetic::{generate, systemic_core_fixture, GeneratorConfig};

fn main() -> carbon_stress::Result<()> {
    let gen_cfg = GeneratorConfig {
        n_firms: 5000,
        n_banks: 15,
        seed: 99,
        ..Default::default()
    };
    let mut config = RunConfig::from_generator(gen_cfg.clone());
    config.prices = vec![10.0, 20.0, 45.0, 100.0, 200.0, 500.0, 1000.0];
    config.pass_through = PassThroughAxis::Both;
    config.production_fn = ProductionFnAxis::Both;
    config.output_dir = Some("target/sweep-example".into());

    let prepared = prepare_instance(generate(&gen_cfg)?.0, 0.0)?;
    let (cells, err) = run_cells(&prepared, &config);
    if let Some(e) = err {
        return Err(e);
    }
    write_reports(
        std::path::Path::new("target/sweep-example"),
        &cells,
        &config.to_provenance_toml(),
    )?;

    println!("losses as fractions of in-network sales / bank equity:\n");
    println!(
        "{:>6} {:>5} {:>7} {:>9} {:>9} {:>7} {:>9} {:>9}",
        "price", "mode", "fn", "direct", "total", "amp", "bank dir", "bank tot"
    );
    for c in &cells {
        let amp = if c.direct_output_loss > 0.0 {
            format!("{:.1}", c.total_output_loss / c.direct_output_loss)
        } else {
            "-".into()
        };
        println!(
            "{:>6} {:>5} {:>7} {:>9.4} {:>9.4} {:>7} {:>9.4} {:>9.4}",
            c.price,
            if c.pass_through { "on" } else { "off" },
            c.production_fn.label(),
            c.direct_output_loss,
            c.total_output_loss,
            amp,
            c.bank.system.direct,
            c.bank.system.total,
        );
    }
    println!("\nreports written to target/sweep-example/ (sweep.csv + per-cell JSON)");

    // The discontinuity: a choke-point supplier crosses its breakeven and
    // the non-substitutable economy falls off a cliff.
    println!("\nchoke-point fixture around the breakeven price of 300:");
    let prepared = prepare_instance(systemic_core_fixture(), 0.0)?;
    for regime in [ProductionFn::Gl, ProductionFn::Linear] {
        print!("  {:>6}:", regime.label());
        for price in [280.0, 290.0, 300.0, 310.0] {
            let cell =
                run_cell(&prepared, &ShockScenario::new(price, false, regime), &CellOptions::default())?;
            print!("  {price}/t -> {:.3}", cell.total_output_loss);
        }
        println!();
    }
    Ok(())
}
