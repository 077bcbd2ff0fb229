//! How carbon costs travel downstream: market shares set the passed
//! fraction, the circulating mass contracts geometrically, and the
//! retained costs land where bargaining power runs out.
//!
//! ```bash
//! cargo run --release --example cost_passthrough
//! ```

use carbon_stress::emissions::estimate_emissions;
use carbon_stress::network::{Edge, SupplyNetwork};
use carbon_stress::passthrough::{initial_costs, market_shares, pass_through, MarketShares};
use carbon_stress::sector::SectorCode;
use carbon_stress::synthetic::{generate, GeneratorConfig};

fn main() -> carbon_stress::Result<()> {
    // A hand-sized chain first: A (monopolist) -> B -> C, where B shares
    // its market with a competitor and C sells to households only.
    println!("== three-firm chain ==");
    let net = SupplyNetwork::from_edges(
        4,
        &[
            Edge { supplier: 0, buyer: 1, value: 10.0 },
            Edge { supplier: 1, buyer: 2, value: 8.0 },
            Edge { supplier: 3, buyer: 2, value: 8.0 },
        ],
    )?;
    let sectors: Vec<SectorCode> = ["D35.2.1", "C10.1.1", "G47.1.1", "C10.1.1"]
        .iter()
        .map(|c| SectorCode::parse(c).unwrap())
        .collect();
    let mu = market_shares(&net, &sectors);
    println!("market shares: {:?}", mu.values());
    let c0 = vec![100.0, 0.0, 0.0, 0.0];
    let r = pass_through(&net, &mu, &c0, 0.999999, None)?;
    println!(
        "initial costs {c0:?} -> retained {:?} after {} iterations",
        r.retained, r.iterations
    );
    println!("circulating mass per step: {:?}", r.circulating_mass);

    // No pass-through is the degenerate case of all-zero shares.
    let direct = pass_through(&net, &MarketShares::none(4), &c0, 0.999999, None)?;
    assert_eq!(direct.retained, c0);
    println!("zero shares keep costs at the emitter: {:?}", direct.retained);

    // On a generated economy: compare where costs sit with and without
    // pass-through at the same carbon price.
    println!("\n== generated economy at 45/t ==");
    let (inst, _) = generate(&GeneratorConfig {
        n_firms: 5000,
        seed: 12,
        ..Default::default()
    })?;
    let emissions = estimate_emissions(&inst.network, &inst.fuel_config, &inst.book.sector);
    let shares = market_shares(&inst.network, &inst.book.sector);
    let c0 = initial_costs(&emissions.emissions, 45.0);
    let r = pass_through(&inst.network, &shares, &c0, 0.999999, None)?;
    let emitters = c0.iter().filter(|&&c| c > 0.0).count();
    let holders = r.retained.iter().filter(|&&g| g > 0.0).count();
    println!(
        "{} firms emit, {} firms end up holding costs after {} iterations",
        emitters, holders, r.iterations
    );
    println!(
        "distributed {:.6}% of {:.0} in initial costs; residual {:.3e}",
        100.0 * r.distributed_fraction,
        c0.iter().sum::<f64>(),
        r.residual
    );
    let moved = c0
        .iter()
        .zip(&r.retained)
        .map(|(a, b)| (a - b).max(0.0))
        .sum::<f64>();
    println!(
        "{:.1}% of the cost mass moved away from its emitter",
        100.0 * moved / c0.iter().sum::<f64>()
    );
    Ok(())
}
