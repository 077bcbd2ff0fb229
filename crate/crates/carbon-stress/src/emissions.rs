//! Firm-level CO₂ estimation from fuel purchases.
//!
//! National combustion totals for gas and oil are distributed to firms in
//! proportion to their purchases from gas- and oil-distributing sectors.
//! Distributors themselves and firms in excluded sectors get zero: their
//! share of the fuel mass is dropped, not redistributed, and the report
//! states how much of each total was actually attributed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FirmBook, SupplyNetwork};
use crate::sector::{csv_open_err, csv_row_err, SectorCode};

/// Which sectors distribute each fuel, the national combustion totals to
/// distribute (already net of household use), and sectors excluded from
/// attribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FuelSectorConfig {
    pub gas_sectors: Vec<SectorCode>,
    pub oil_sectors: Vec<SectorCode>,
    /// Tonnes CO₂ from gas combustion to distribute across firms.
    pub total_gas_emissions_t: f64,
    /// Tonnes CO₂ from oil combustion to distribute across firms.
    pub total_oil_emissions_t: f64,
    /// Sectors whose firms never receive an emission estimate
    /// (e.g. finance, fuel-trading agents).
    pub excluded_sectors: Vec<SectorCode>,
}

impl FuelSectorConfig {
    /// The default sector sets and 2022 totals: gas manufacture/distribution
    /// /trade (D35.2.x) and refined-petroleum manufacture plus fuel wholesale
    /// and retail (C19.2.0, G46.7.1, G47.3.0); finance (K) and fuel agents
    /// (G46.1.2) excluded; 12.5 Mt gas and 13.7 Mt oil.
    pub fn hungary_2022() -> Self {
        let parse = |codes: &[&str]| -> Vec<SectorCode> {
            codes.iter().map(|c| SectorCode::parse(c).unwrap()).collect()
        };
        FuelSectorConfig {
            gas_sectors: parse(&["D35.2.1", "D35.2.2", "D35.2.3"]),
            oil_sectors: parse(&["C19.2.0", "G46.7.1", "G47.3.0"]),
            total_gas_emissions_t: 12.5e6,
            total_oil_emissions_t: 13.7e6,
            excluded_sectors: parse(&["K", "G46.1.2"]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let totals_valid = self.total_gas_emissions_t >= 0.0 && self.total_oil_emissions_t >= 0.0;
        if !totals_valid {
            return Err(Error::Config(
                "emission totals must be non-negative".into(),
            ));
        }
        for g in &self.gas_sectors {
            for o in &self.oil_sectors {
                if g.is_within(o) || o.is_within(g) {
                    return Err(Error::Config(format!(
                        "gas and oil sector sets overlap: {g} vs {o}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn load_toml(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: FuelSectorConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{path}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn write_toml(&self, path: &str) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("serialize fuel config: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    fn matches_any(sector: &SectorCode, patterns: &[SectorCode]) -> bool {
        patterns.iter().any(|p| sector.is_within(p))
    }

    /// Per-firm classification. A firm matching both fuel sets counts as a
    /// gas distributor (the sets must not overlap hierarchically, but a firm
    /// code could still sit under patterns from both lists).
    pub fn classify(&self, sectors: &[SectorCode]) -> FuelRoles {
        let n = sectors.len();
        let mut gas = vec![false; n];
        let mut oil = vec![false; n];
        let mut excluded = vec![false; n];
        for i in 0..n {
            if Self::matches_any(&sectors[i], &self.gas_sectors) {
                gas[i] = true;
            } else if Self::matches_any(&sectors[i], &self.oil_sectors) {
                oil[i] = true;
            }
            if Self::matches_any(&sectors[i], &self.excluded_sectors) {
                excluded[i] = true;
            }
        }
        FuelRoles { gas, oil, excluded }
    }
}

/// Per-firm fuel roles derived from sector codes.
#[derive(Debug, Clone)]
pub struct FuelRoles {
    pub gas: Vec<bool>,
    pub oil: Vec<bool>,
    pub excluded: Vec<bool>,
}

impl FuelRoles {
    pub fn is_distributor(&self, firm: usize) -> bool {
        self.gas[firm] || self.oil[firm]
    }
}

/// Fuel-related in-strengths and the distributable denominators.
#[derive(Debug, Clone)]
pub struct FuelStrengths {
    /// Purchases from gas distributors, per firm.
    pub s_in_gas: Vec<f64>,
    /// Purchases from oil distributors, per firm.
    pub s_in_oil: Vec<f64>,
    /// Gas distributors' sales excluding intra- and inter-fuel-sector trade.
    pub s_out_gas: f64,
    /// Oil distributors' sales excluding intra- and inter-fuel-sector trade.
    pub s_out_oil: f64,
    /// No distributors found for the respective fuel.
    pub degenerate_gas: bool,
    pub degenerate_oil: bool,
    pub roles: FuelRoles,
}

/// Computes fuel purchase strengths per firm. Sales from one fuel
/// distributor to another (either fuel) are excluded from the denominators
/// to avoid double counting.
pub fn fuel_in_strengths(net: &SupplyNetwork, cfg: &FuelSectorConfig, sectors: &[SectorCode]) -> FuelStrengths {
    let n = net.firm_count();
    let roles = cfg.classify(sectors);
    let mut s_in_gas = vec![0.0f64; n];
    let mut s_in_oil = vec![0.0f64; n];
    let mut s_out_gas = 0.0;
    let mut s_out_oil = 0.0;
    for i in 0..n {
        if !roles.is_distributor(i) {
            continue;
        }
        let is_gas = roles.gas[i];
        for (buyer, value) in net.out_edges(i as u32) {
            let b = buyer as usize;
            if roles.is_distributor(b) {
                continue; // fuel-to-fuel trade
            }
            if is_gas {
                s_in_gas[b] += value;
                s_out_gas += value;
            } else {
                s_in_oil[b] += value;
                s_out_oil += value;
            }
        }
    }
    let degenerate_gas = !roles.gas.iter().any(|&g| g);
    let degenerate_oil = !roles.oil.iter().any(|&o| o);
    FuelStrengths {
        s_in_gas,
        s_in_oil,
        s_out_gas,
        s_out_oil,
        degenerate_gas,
        degenerate_oil,
        roles,
    }
}

/// Emission estimates plus attribution accounting.
#[derive(Debug, Clone)]
pub struct EmissionReport {
    /// Estimated tonnes CO₂ per firm.
    pub emissions: Vec<f64>,
    /// Fraction of each fuel total that was attributed to firms; the
    /// remainder went to excluded-sector purchasers and is dropped.
    pub covered_gas_share: f64,
    pub covered_oil_share: f64,
    /// Tonnes dropped because the purchaser sits in an excluded sector.
    pub excluded_mass_t: f64,
    pub degenerate_gas: bool,
    pub degenerate_oil: bool,
}

impl EmissionReport {
    pub fn total_attributed_t(&self) -> f64 {
        self.emissions.iter().sum()
    }

    pub fn emitter_count(&self) -> usize {
        self.emissions.iter().filter(|&&e| e > 0.0).count()
    }
}

/// Distributes the configured fuel totals proportionally to fuel purchases.
/// Distributors and excluded-sector firms receive zero.
pub fn estimate_emissions(
    net: &SupplyNetwork,
    cfg: &FuelSectorConfig,
    sectors: &[SectorCode],
) -> EmissionReport {
    let strengths = fuel_in_strengths(net, cfg, sectors);
    let n = net.firm_count();
    let mut emissions = vec![0.0f64; n];
    let mut covered_gas = 0.0;
    let mut covered_oil = 0.0;
    let mut excluded_gas = 0.0;
    let mut excluded_oil = 0.0;
    for (i, slot) in emissions.iter_mut().enumerate() {
        let gas_share = if strengths.s_out_gas > 0.0 {
            strengths.s_in_gas[i] / strengths.s_out_gas
        } else {
            0.0
        };
        let oil_share = if strengths.s_out_oil > 0.0 {
            strengths.s_in_oil[i] / strengths.s_out_oil
        } else {
            0.0
        };
        if strengths.roles.is_distributor(i) {
            continue; // combustion is attributed to purchasers
        }
        if strengths.roles.excluded[i] {
            excluded_gas += gas_share;
            excluded_oil += oil_share;
            continue;
        }
        covered_gas += gas_share;
        covered_oil += oil_share;
        *slot = gas_share * cfg.total_gas_emissions_t
            + oil_share * cfg.total_oil_emissions_t;
    }
    EmissionReport {
        emissions,
        covered_gas_share: covered_gas,
        covered_oil_share: covered_oil,
        excluded_mass_t: excluded_gas * cfg.total_gas_emissions_t
            + excluded_oil * cfg.total_oil_emissions_t,
        degenerate_gas: strengths.degenerate_gas,
        degenerate_oil: strengths.degenerate_oil,
    }
}

/// Carbon-to-profit ratio per firm: tonnes per currency unit of net profit.
/// `None` where net profit is not positive (the ratio is undefined there);
/// a firm without emissions has ratio zero and is never directly at risk.
pub fn carbon_to_profit(emissions: &[f64], book: &FirmBook) -> Vec<Option<f64>> {
    emissions
        .iter()
        .zip(&book.net_profit)
        .map(|(&e, &p)| if p > 0.0 { Some(e / p) } else { None })
        .collect()
}

/// The carbon price at which a firm's costs exhaust its profits
/// (`net_profit / emissions`). `None` for non-emitters and non-positive
/// profits.
pub fn breakeven_price(emissions: &[f64], book: &FirmBook) -> Vec<Option<f64>> {
    emissions
        .iter()
        .zip(&book.net_profit)
        .map(|(&e, &p)| {
            if e > 0.0 && p > 0.0 {
                Some(p / e)
            } else {
                None
            }
        })
        .collect()
}

/// Writes `firm_id,emissions_t`.
pub fn write_emissions_csv(path: &str, emissions: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_open_err(path, e))?;
    wtr.write_record(["firm_id", "emissions_t"])
        .map_err(|e| csv_row_err(path, &e))?;
    for (i, e) in emissions.iter().enumerate() {
        wtr.serialize((i as u64, e))
            .map_err(|e| csv_row_err(path, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;

    fn sector(code: &str) -> SectorCode {
        SectorCode::parse(code).unwrap()
    }

    fn edge(s: u32, b: u32, v: f64) -> Edge {
        Edge { supplier: s, buyer: b, value: v }
    }

    fn test_config() -> FuelSectorConfig {
        FuelSectorConfig {
            gas_sectors: vec![sector("D35.2.1")],
            oil_sectors: vec![sector("C19.2.0")],
            total_gas_emissions_t: 1000.0,
            total_oil_emissions_t: 500.0,
            excluded_sectors: vec![sector("K")],
        }
    }

    #[test]
    fn in_strengths_by_definition() {
        // Single gas seller: 20 to firm 1, 30 to firm 2.
        let net =
            SupplyNetwork::from_edges(3, &[edge(0, 1, 20.0), edge(0, 2, 30.0)]).unwrap();
        let sectors = vec![sector("D35.2.1"), sector("C10.1.1"), sector("F41.2.0")];
        let s = fuel_in_strengths(&net, &test_config(), &sectors);
        assert_eq!(s.s_in_gas, vec![0.0, 20.0, 30.0]);
        assert_eq!(s.s_out_gas, 50.0);
        assert!(!s.degenerate_gas);
        assert!(s.degenerate_oil);
        assert_eq!(s.s_out_oil, 0.0);
    }

    #[test]
    fn fuel_to_fuel_trade_is_excluded_from_denominator() {
        // Gas seller sells 10 to an oil seller: excluded from s_out_gas.
        let net = SupplyNetwork::from_edges(
            3,
            &[edge(0, 1, 20.0), edge(0, 2, 10.0)],
        )
        .unwrap();
        let sectors = vec![sector("D35.2.1"), sector("C10.1.1"), sector("C19.2.0")];
        let s = fuel_in_strengths(&net, &test_config(), &sectors);
        assert_eq!(s.s_out_gas, 20.0);
        assert_eq!(s.s_in_gas[2], 0.0);
    }

    #[test]
    fn proportional_distribution() {
        // Firm 1 buys 20 of 100 total gas sales, E_gas = 1000 t, no oil.
        let net = SupplyNetwork::from_edges(
            3,
            &[edge(0, 1, 20.0), edge(0, 2, 80.0)],
        )
        .unwrap();
        let sectors = vec![sector("D35.2.1"), sector("C10.1.1"), sector("F41.2.0")];
        let report = estimate_emissions(&net, &test_config(), &sectors);
        // Brute-force shares: 20/100 and 80/100 of 1000 t.
        assert!((report.emissions[1] - 200.0).abs() < 1e-12);
        assert!((report.emissions[2] - 800.0).abs() < 1e-12);
        assert_eq!(report.emissions[0], 0.0, "distributors get zero");
        assert!((report.covered_gas_share - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_purchases_equal_emissions() {
        let net = SupplyNetwork::from_edges(
            3,
            &[edge(0, 1, 42.0), edge(0, 2, 42.0)],
        )
        .unwrap();
        let sectors = vec![sector("D35.2.1"), sector("C10.1.1"), sector("F41.2.0")];
        let report = estimate_emissions(&net, &test_config(), &sectors);
        assert_eq!(report.emissions[1], report.emissions[2]);
    }

    #[test]
    fn no_fuel_purchases_no_emissions() {
        let net = SupplyNetwork::from_edges(
            3,
            &[edge(0, 1, 20.0), edge(1, 2, 30.0)],
        )
        .unwrap();
        let sectors = vec![sector("D35.2.1"), sector("C10.1.1"), sector("F41.2.0")];
        let report = estimate_emissions(&net, &test_config(), &sectors);
        assert_eq!(report.emissions[2], 0.0);
    }

    #[test]
    fn excluded_sector_mass_is_dropped_not_redistributed() {
        // K-sector firm buys 40 of 100; that 40% of the gas total is dropped.
        let net = SupplyNetwork::from_edges(
            3,
            &[edge(0, 1, 60.0), edge(0, 2, 40.0)],
        )
        .unwrap();
        let sectors = vec![sector("D35.2.1"), sector("C10.1.1"), sector("K64.1.9")];
        let report = estimate_emissions(&net, &test_config(), &sectors);
        assert_eq!(report.emissions[2], 0.0);
        assert!((report.emissions[1] - 600.0).abs() < 1e-12);
        assert!((report.covered_gas_share - 0.6).abs() < 1e-15);
        assert!((report.excluded_mass_t - 400.0).abs() < 1e-12);
        // Mass conservation: attributed + excluded = covered totals.
        let total = report.total_attributed_t() + report.excluded_mass_t;
        assert!((total - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn scaling_edges_leaves_emissions_unchanged() {
        let edges = [edge(0, 1, 20.0), edge(0, 2, 80.0), edge(1, 2, 5.0)];
        let scaled: Vec<Edge> = edges
            .iter()
            .map(|e| Edge { value: e.value * 7.0, ..*e })
            .collect();
        let sectors = vec![sector("D35.2.1"), sector("C10.1.1"), sector("F41.2.0")];
        let cfg = test_config();
        let r1 = estimate_emissions(
            &SupplyNetwork::from_edges(3, &edges).unwrap(),
            &cfg,
            &sectors,
        );
        let r2 = estimate_emissions(
            &SupplyNetwork::from_edges(3, &scaled).unwrap(),
            &cfg,
            &sectors,
        );
        for (a, b) in r1.emissions.iter().zip(&r2.emissions) {
            let rel = if *a != 0.0 { (a - b).abs() / a.abs() } else { (a - b).abs() };
            assert!(rel <= 1e-12);
        }
    }

    #[test]
    fn monotonicity_in_own_purchases() {
        let sectors = vec![sector("D35.2.1"), sector("C10.1.1"), sector("F41.2.0")];
        let cfg = test_config();
        let base = estimate_emissions(
            &SupplyNetwork::from_edges(3, &[edge(0, 1, 20.0), edge(0, 2, 30.0)]).unwrap(),
            &cfg,
            &sectors,
        );
        let more = estimate_emissions(
            &SupplyNetwork::from_edges(3, &[edge(0, 1, 40.0), edge(0, 2, 30.0)]).unwrap(),
            &cfg,
            &sectors,
        );
        assert!(more.emissions[1] >= base.emissions[1]);
        assert!(more.emissions[2] <= base.emissions[2]);
    }

    #[test]
    fn cpr_examples() {
        let mut book = FirmBook::default();
        book.net_profit = vec![1000.0, 2500.0, 500.0, -5.0];
        book.revenue = vec![0.0; 4];
        let emissions = [100.0, 50.0, 0.0, 10.0];
        let cpr = carbon_to_profit(&emissions, &book);
        assert_eq!(cpr[0], Some(0.1));
        assert_eq!(cpr[1], Some(0.02));
        assert_eq!(cpr[2], Some(0.0));
        assert_eq!(cpr[3], None);
        let be = breakeven_price(&emissions, &book);
        assert_eq!(be[0], Some(10.0));
        assert_eq!(be[1], Some(50.0));
        assert_eq!(be[2], None);
        // Breakeven property: pi * E > P iff pi > 1/CPR.
        for pi in [5.0, 9.999, 10.0, 10.001, 100.0] {
            let exceeds = pi * emissions[0] > book.net_profit[0];
            assert_eq!(exceeds, pi > 1.0 / cpr[0].unwrap());
        }
    }

    #[test]
    fn config_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fuel.toml");
        let cfg = FuelSectorConfig::hungary_2022();
        cfg.write_toml(path.to_str().unwrap()).unwrap();
        let loaded = FuelSectorConfig::load_toml(path.to_str().unwrap()).unwrap();
        assert_eq!(loaded.gas_sectors, cfg.gas_sectors);
        assert_eq!(loaded.total_oil_emissions_t, 13.7e6);

        let mut bad = cfg.clone();
        bad.oil_sectors.push(sector("D35.2.1"));
        assert!(bad.validate().is_err());
    }
}
