//! Direct defaults from carbon costs and the direct loss curve.
//!
//! A firm defaults directly when its retained carbon costs reach its net
//! profits (ties default). Only default-eligible firms are evaluated;
//! excluded firms still carry and pass on costs and still propagate
//! production shocks, they just never appear in a default vector.

use serde::{Deserialize, Serialize};

use crate::emissions::EmissionReport;
use crate::error::{Error, Result};
use crate::network::{FirmBook, SupplyNetwork};
use crate::passthrough::{initial_costs, pass_through, MarketShares, DEFAULT_COVERAGE};
use crate::production::ProductionFn;
use crate::sector::{csv_open_err, csv_row_err};

/// One grid cell of the stress test.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShockScenario {
    /// Carbon price in currency per tonne.
    pub price: f64,
    pub pass_through: bool,
    pub production_fn: ProductionFn,
    /// Loss given default applied to every written-off loan.
    pub lgd: f64,
    /// Pass-through stopping coverage.
    pub coverage: f64,
    /// Contagion convergence tolerance.
    pub epsilon: f64,
}

impl ShockScenario {
    pub fn new(price: f64, pass_through: bool, production_fn: ProductionFn) -> Self {
        ShockScenario {
            price,
            pass_through,
            production_fn,
            lgd: 1.0,
            coverage: DEFAULT_COVERAGE,
            epsilon: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.price.is_nan() || self.price < 0.0 {
            return Err(Error::Config(format!("price must be >= 0, got {}", self.price)));
        }
        if !(0.0..=1.0).contains(&self.lgd) {
            return Err(Error::Config(format!("lgd must lie in [0, 1], got {}", self.lgd)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

/// Direct default indicator: retained costs positive and at least as large
/// as net profits, among default-eligible firms.
pub fn direct_defaults(book: &FirmBook, retained_costs: &[f64], eligible: &[bool]) -> Vec<bool> {
    (0..book.len())
        .map(|i| {
            eligible[i] && retained_costs[i] > 0.0 && book.net_profit[i] <= retained_costs[i]
        })
        .collect()
}

/// Sales-weighted share of output lost to the given default set.
pub fn direct_output_loss(net: &SupplyNetwork, chi_dir: &[bool]) -> f64 {
    let total: f64 = net.s_out().iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let lost: f64 = net
        .s_out()
        .iter()
        .zip(chi_dir)
        .map(|(s, &d)| if d { *s } else { 0.0 })
        .sum();
    lost / total
}

/// One point of the direct (pre-contagion) loss curve.
#[derive(Debug, Clone, Serialize)]
pub struct DirectSweepPoint {
    pub price: f64,
    pub direct_output_loss: f64,
    pub direct_defaults_count: usize,
}

/// Checks a price grid: non-empty, ascending, non-negative.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("price grid is empty".into()));
    }
    for pair in grid.windows(2) {
        if pair[1] < pair[0] {
            return Err(Error::Config("price grid must be ascending".into()));
        }
    }
    if grid[0] < 0.0 {
        return Err(Error::Config("prices must be non-negative".into()));
    }
    Ok(())
}

/// The default grid: 10, 20, ..., 1000.
pub fn default_price_grid() -> Vec<f64> {
    (1..=100).map(|k| 10.0 * k as f64).collect()
}

/// Direct-only price sweep: per price, retained costs (with or without
/// pass-through), the default vector and the lost output share.
pub fn direct_price_sweep(
    net: &SupplyNetwork,
    book: &FirmBook,
    emissions: &EmissionReport,
    shares: Option<&MarketShares>,
    grid: &[f64],
    coverage: f64,
) -> Result<Vec<DirectSweepPoint>> {
    validate_grid(grid)?;
    let eligible = book.eligibility();
    let mut points = Vec::with_capacity(grid.len());
    for &price in grid {
        let c0 = initial_costs(&emissions.emissions, price);
        let retained = match shares {
            Some(mu) => pass_through(net, mu, &c0, coverage, None)?.retained,
            None => c0,
        };
        let chi = direct_defaults(book, &retained, &eligible);
        points.push(DirectSweepPoint {
            price,
            direct_output_loss: direct_output_loss(net, &chi),
            direct_defaults_count: chi.iter().filter(|&&d| d).count(),
        });
    }
    Ok(points)
}

/// Writes `price,direct_output_loss,direct_defaults_count`.
pub fn write_direct_sweep_csv(path: &str, points: &[DirectSweepPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_open_err(path, e))?;
    wtr.write_record(["price", "direct_output_loss", "direct_defaults_count"])
        .map_err(|e| csv_row_err(path, &e))?;
    for p in points {
        wtr.serialize((p.price, p.direct_output_loss, p.direct_defaults_count))
            .map_err(|e| csv_row_err(path, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emissions::{estimate_emissions, FuelSectorConfig};
    use crate::network::Edge;
    use crate::sector::SectorCode;

    fn sector(code: &str) -> SectorCode {
        SectorCode::parse(code).unwrap()
    }

    fn book_with_profits(profits: &[f64]) -> FirmBook {
        let n = profits.len();
        FirmBook {
            revenue: vec![100.0; n],
            material_costs: vec![50.0; n],
            other_income: vec![0.0; n],
            operating_profit: vec![50.0; n],
            net_profit: profits.to_vec(),
            equity: vec![100.0; n],
            liquidity: vec![50.0; n],
            retained_earnings: vec![0.0; n],
            sector: vec![sector("C10.1.1"); n],
            has_loan: vec![false; n],
        }
    }

    #[test]
    fn default_requires_positive_cost_and_boundary_ties() {
        let book = book_with_profits(&[1000.0, 1000.0, 1000.0]);
        let eligible = book.eligibility();
        // gamma = 4500 kills, gamma = 0 never does, gamma == profit kills.
        let chi = direct_defaults(&book, &[4500.0, 0.0, 1000.0], &eligible);
        assert_eq!(chi, vec![true, false, true]);
    }

    #[test]
    fn ineligible_firms_never_default_directly() {
        let mut book = book_with_profits(&[10.0]);
        book.equity[0] = -1.0;
        let chi = direct_defaults(&book, &[1e9], &book.eligibility());
        assert_eq!(chi, vec![false]);
    }

    #[test]
    fn output_loss_shares() {
        let net = SupplyNetwork::from_edges(
            3,
            &[
                Edge { supplier: 0, buyer: 2, value: 10.0 },
                Edge { supplier: 1, buyer: 2, value: 90.0 },
            ],
        )
        .unwrap();
        assert_eq!(direct_output_loss(&net, &[false, false, false]), 0.0);
        assert_eq!(direct_output_loss(&net, &[true, false, false]), 0.1);
        assert_eq!(direct_output_loss(&net, &[true, true, true]), 1.0);
        let empty = SupplyNetwork::from_edges(2, &[]).unwrap();
        assert_eq!(direct_output_loss(&empty, &[true, true]), 0.0);
    }

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[10.0, 5.0]).is_err());
        assert!(validate_grid(&[-1.0, 5.0]).is_err());
        assert!(validate_grid(&[0.0]).is_ok());
        let grid = default_price_grid();
        assert_eq!(grid.len(), 100);
        assert_eq!(grid[0], 10.0);
        assert_eq!(grid[99], 1000.0);
    }

    /// Fixture: one gas seller (firm 0) selling to two emitters whose
    /// breakeven prices are 10 and 50.
    fn sweep_fixture() -> (SupplyNetwork, FirmBook, EmissionReport) {
        let net = SupplyNetwork::from_edges(
            3,
            &[
                Edge { supplier: 0, buyer: 1, value: 20.0 },
                Edge { supplier: 0, buyer: 2, value: 80.0 },
                Edge { supplier: 1, buyer: 2, value: 40.0 },
            ],
        )
        .unwrap();
        let sectors = vec![sector("D35.2.1"), sector("C10.1.1"), sector("F41.2.0")];
        let cfg = FuelSectorConfig {
            gas_sectors: vec![sector("D35.2.1")],
            oil_sectors: vec![],
            total_gas_emissions_t: 100.0,
            total_oil_emissions_t: 0.0,
            excluded_sectors: vec![],
        };
        // Emissions: firm 1 gets 20 t, firm 2 gets 80 t.
        let report = estimate_emissions(&net, &cfg, &sectors);
        // CPR 0.1 for firm 1 (P = 200), CPR 0.02 for firm 2 (P = 4000).
        let book = book_with_profits(&[1_000_000.0, 200.0, 4000.0]);
        (net, book, report)
    }

    #[test]
    fn defaults_appear_exactly_at_breakeven_grid_points() {
        let (net, book, emissions) = sweep_fixture();
        let grid = [5.0, 10.0, 20.0, 49.0, 50.0, 100.0];
        let points =
            direct_price_sweep(&net, &book, &emissions, None, &grid, DEFAULT_COVERAGE)
                .unwrap();
        let counts: Vec<usize> = points.iter().map(|p| p.direct_defaults_count).collect();
        // Breakevens at 10 (firm 1) and 50 (firm 2); boundary uses <=.
        assert_eq!(counts, vec![0, 1, 1, 1, 2, 2]);
    }

    #[test]
    fn loss_curve_monotone_without_pass_through() {
        let (net, book, emissions) = sweep_fixture();
        let grid: Vec<f64> = (1..=20).map(|k| 5.0 * k as f64).collect();
        let points =
            direct_price_sweep(&net, &book, &emissions, None, &grid, DEFAULT_COVERAGE)
                .unwrap();
        for pair in points.windows(2) {
            assert!(pair[1].direct_output_loss >= pair[0].direct_output_loss);
            assert!(pair[1].direct_defaults_count >= pair[0].direct_defaults_count);
        }
    }

    #[test]
    fn zero_price_grid_has_no_losses() {
        let (net, book, emissions) = sweep_fixture();
        let points =
            direct_price_sweep(&net, &book, &emissions, None, &[0.0], DEFAULT_COVERAGE)
                .unwrap();
        assert_eq!(points[0].direct_defaults_count, 0);
        assert_eq!(points[0].direct_output_loss, 0.0);
    }
}
