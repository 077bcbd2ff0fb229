//! Firm-level CO₂ estimation on a generated economy: coverage accounting,
//! the heavy-tailed emission distribution, and carbon-to-profit ratios.
//!
//! ```bash
//! cargo run --release --example estimate_emissions
//! ```

use carbon_stress::emissions::{breakeven_price, carbon_to_profit, estimate_emissions};
use carbon_stress::synthetic::{generate, hill_exponent, GeneratorConfig};

fn main() -> carbon_stress::Result<()> {
    let cfg = GeneratorConfig {
        n_firms: 20_000,
        seed: 7,
        ..Default::default()
    };
    let (inst, report) = generate(&cfg)?;
    println!(
        "economy: {} firms, {} links, {} gas/oil distributors by sector config",
        inst.network.firm_count(),
        inst.network.edge_count(),
        inst.fuel_config.gas_sectors.len() + inst.fuel_config.oil_sectors.len(),
    );

    let estimate = estimate_emissions(&inst.network, &inst.fuel_config, &inst.book.sector);
    println!(
        "\n{} of {} firms have positive estimates ({:.1}%)",
        estimate.emitter_count(),
        inst.network.firm_count(),
        100.0 * estimate.emitter_count() as f64 / inst.network.firm_count() as f64
    );
    println!(
        "attributed {:.0} t of {:.0} t configured; {:.0} t dropped at excluded sectors",
        estimate.total_attributed_t(),
        inst.fuel_config.total_gas_emissions_t + inst.fuel_config.total_oil_emissions_t,
        estimate.excluded_mass_t
    );
    println!(
        "coverage: {:.2}% of gas, {:.2}% of oil",
        100.0 * estimate.covered_gas_share,
        100.0 * estimate.covered_oil_share
    );

    let hill = hill_exponent(&estimate.emissions, 500);
    println!(
        "\nemission tail exponent (Hill, top 500): {hill:.3} (generator target {}, report {:.3})",
        cfg.emission_tail_exponent, report.emission_tail_exponent
    );

    let mut top: Vec<usize> = (0..inst.network.firm_count()).collect();
    top.sort_by(|&a, &b| estimate.emissions[b].partial_cmp(&estimate.emissions[a]).unwrap());
    println!("\nlargest emitters:");
    for &i in top.iter().take(5) {
        println!(
            "  firm {i:5} [{}] {:>10.1} t",
            inst.book.sector[i],
            estimate.emissions[i]
        );
    }

    // Carbon-to-profit: how many firms turn unprofitable at which price.
    let cpr = carbon_to_profit(&estimate.emissions, &inst.book);
    let defined = cpr.iter().flatten().filter(|&&c| c > 0.0).count();
    println!("\ncarbon-to-profit ratio defined for {defined} profitable emitters");
    let breakevens = breakeven_price(&estimate.emissions, &inst.book);
    for cap in [10.0, 45.0, 100.0, 500.0, 1000.0] {
        let at_risk = breakevens
            .iter()
            .flatten()
            .filter(|&&b| b <= cap)
            .count();
        println!("  unprofitable at {cap:>6}/t: {at_risk} firms");
    }
    Ok(())
}
