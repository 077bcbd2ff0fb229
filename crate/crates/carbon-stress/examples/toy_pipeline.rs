//! The five-firm golden fixture, walked through every pipeline stage.
//!
//! ```bash
//! cargo run --release --example toy_pipeline
//! ```

use carbon_stress::contagion::{kill_set, propagate, ContagionSettings};
use carbon_stress::emissions::{breakeven_price, estimate_emissions};
use carbon_stress::finance::{bank_losses, indirect_defaults, project_books};
use carbon_stress::passthrough::initial_costs;
use carbon_stress::production::{calibrate, ProductionFn};
use carbon_stress::shock::{direct_defaults, direct_output_loss};
use carbon_stress::synthetic::toy_fixture;

fn main() -> carbon_stress::Result<()> {
    let names = ["a (gas seller)", "b", "c", "d", "e (hub)"];
    let price = 45.0;
    let inst = toy_fixture();

    println!("== inputs ==");
    println!(
        "{} firms, {} links, {} banks; total in-network sales {}",
        inst.network.firm_count(),
        inst.network.edge_count(),
        inst.banks.bank_count(),
        inst.network.s_out().iter().sum::<f64>()
    );

    // Step 1: emissions from gas purchases.
    let emissions = estimate_emissions(&inst.network, &inst.fuel_config, &inst.book.sector);
    let breakevens = breakeven_price(&emissions.emissions, &inst.book);
    println!("\n== emission estimates ==");
    for i in 0..5 {
        print!("{:14} {:6.1} t", names[i], emissions.emissions[i]);
        match breakevens[i] {
            Some(b) => println!("  (profits exhausted at {b}/t)"),
            None => println!(),
        }
    }

    // Step 2: carbon costs at the ETS II cap price, no pass-through.
    let gamma = initial_costs(&emissions.emissions, price);

    // Step 3: direct defaults and direct output loss.
    let eligible = inst.book.eligibility();
    let chi_dir = direct_defaults(&inst.book, &gamma, &eligible);
    println!("\n== direct stage at {price}/t ==");
    for i in 0..5 {
        if chi_dir[i] {
            println!(
                "{:14} defaults directly: costs {} vs profits {}",
                names[i], gamma[i], inst.book.net_profit[i]
            );
        }
    }
    println!("direct output loss {:.5}", direct_output_loss(&inst.network, &chi_dir));

    // Step 4: cascade under the non-substitutable regime.
    let params = calibrate(&inst.network, &inst.book.sector, &inst.criticality)?;
    let h_init = kill_set(5, chi_dir.iter().enumerate().filter_map(|(i, &d)| d.then_some(i)));
    let result = propagate(
        &inst.network,
        &params,
        &h_init,
        &ContagionSettings::new(ProductionFn::Gl),
    )?;
    println!("\n== cascade ({} iterations) ==", result.iterations);
    for i in 0..5 {
        println!("{:14} production level {:.3}", names[i], result.h_final[i]);
    }
    println!(
        "output loss: direct {:.5} + indirect {:.5} = {:.5}",
        result.direct_loss, result.indirect_loss, result.total_loss
    );

    // Step 5: balance sheets, indirect defaults, bank write-offs.
    let projected = project_books(&inst.book, &result.h_final, &gamma, &chi_dir);
    let chi_indir = indirect_defaults(&projected, &chi_dir, &eligible);
    println!("\n== balance-sheet stage ==");
    for i in 0..5 {
        if chi_indir[i] {
            println!(
                "{:14} defaults indirectly (projected equity {:.0}, liquidity {:.0})",
                names[i], projected.equity[i], projected.liquidity[i]
            );
        }
    }
    let report = bank_losses(
        &inst.banks,
        &inst.book,
        &chi_dir,
        &chi_indir,
        1.0,
        Some(&emissions.emissions),
    );
    for b in &report.per_bank {
        println!(
            "bank {}: direct {:.0}% + indirect {:.0}% = {:.0}% of equity",
            b.bank_id,
            100.0 * b.direct,
            100.0 * b.indirect,
            100.0 * b.total
        );
    }
    println!(
        "system-wide equity loss {:.0}%",
        100.0 * report.system.total
    );
    Ok(())
}
