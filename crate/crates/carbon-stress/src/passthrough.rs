//! Downstream carbon-cost pass-through.
//!
//! A firm keeps the fraction `1 - mu` of any carbon cost it faces and passes
//! the rest to its buyers in proportion to sales, where `mu` is the firm's
//! market share within its sector. Received costs are split the same way,
//! and the iteration runs until almost all of the initial cost mass has
//! settled. The circulating mass contracts because passing is scaled by a
//! sub-stochastic matrix; firms without sales cannot pass anything on and
//! absorb what they receive.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::SupplyNetwork;
use crate::sector::{csv_open_err, csv_row_err, SectorCode};

/// Coverage at which the iteration stops: fraction of initial costs that
/// must have been retained by firms.
pub const DEFAULT_COVERAGE: f64 = 0.999999;

/// Market share of each firm within its sector, in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct MarketShares(Vec<f64>);

impl MarketShares {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All shares zero: the no-pass-through mode.
    pub fn none(n: usize) -> Self {
        MarketShares(vec![0.0; n])
    }

    /// Wraps externally computed shares; every value must lie in `[0, 1]`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "market share {v} outside [0, 1]"
                )));
            }
        }
        Ok(MarketShares(values))
    }
}

/// `mu_i = s_out_i / sum of s_out over the firm's sector`. Sectors without
/// any sales give all members share zero.
pub fn market_shares(net: &SupplyNetwork, sectors: &[SectorCode]) -> MarketShares {
    let n = net.firm_count();
    assert_eq!(sectors.len(), n, "one sector code per firm");
    let mut totals: std::collections::HashMap<&SectorCode, f64> =
        std::collections::HashMap::new();
    for (sector, s_out) in sectors.iter().zip(net.s_out()) {
        *totals.entry(sector).or_insert(0.0) += s_out;
    }
    let mu = (0..n)
        .map(|i| {
            let total = totals[&sectors[i]];
            if total > 0.0 {
                net.s_out()[i] / total
            } else {
                0.0
            }
        })
        .collect();
    MarketShares(mu)
}

/// Initial carbon costs `price * emissions` per firm.
pub fn initial_costs(emissions: &[f64], price: f64) -> Vec<f64> {
    emissions.iter().map(|e| e * price).collect()
}

/// Outcome of the pass-through iteration.
#[derive(Debug, Clone)]
pub struct PassThroughResult {
    /// Retained carbon cost per firm after distribution.
    pub retained: Vec<f64>,
    /// Iterations performed (0 when the initial split already reaches
    /// coverage, e.g. with all shares zero).
    pub iterations: usize,
    /// Fraction of the initial cost mass retained by firms.
    pub distributed_fraction: f64,
    /// Cost mass still circulating when the iteration stopped.
    pub residual: f64,
    /// Circulating mass after each iteration (diagnostics; index 0 is the
    /// mass still in flight after the initial split).
    pub circulating_mass: Vec<f64>,
}

/// Distributes initial costs `c0` downstream until `coverage` of the total
/// has been retained. Firms with zero out-strength keep everything they
/// receive regardless of their computed share.
///
/// Fails with the undistributed residual if coverage is not reached within
/// `max_iterations` (default `10 * n`), which requires full-share firms
/// passing mass around a closed cycle.
pub fn pass_through(
    net: &SupplyNetwork,
    shares: &MarketShares,
    c0: &[f64],
    coverage: f64,
    max_iterations: Option<usize>,
) -> Result<PassThroughResult> {
    let n = net.firm_count();
    assert_eq!(shares.len(), n, "one share per firm");
    assert_eq!(c0.len(), n, "one initial cost per firm");
    if !(0.0 < coverage && coverage < 1.0) {
        return Err(Error::Config(format!(
            "coverage must lie in (0, 1), got {coverage}"
        )));
    }
    for &c in c0 {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::NonFinite { context: "initial carbon costs" });
        }
    }
    let cap = max_iterations.unwrap_or(10 * n.max(1));

    // Firms without sales cannot pass costs on.
    let mu: Vec<f64> = (0..n)
        .map(|i| {
            if net.s_out()[i] > 0.0 {
                shares.values()[i]
            } else {
                0.0
            }
        })
        .collect();

    let total_c0: f64 = c0.iter().sum();
    let mut retained: Vec<f64> = (0..n).map(|i| (1.0 - mu[i]) * c0[i]).collect();
    let mut circulating: Vec<f64> = (0..n).map(|i| mu[i] * c0[i]).collect();
    let mut incoming = vec![0.0f64; n];
    let mut pass_factor = vec![0.0f64; n];
    let mut mass_trace = vec![circulating.iter().sum::<f64>()];

    let target = coverage * total_c0;
    let mut iterations = 0usize;
    let in_src = net.in_sources_flat();
    let in_val = net.in_values_flat();

    while retained.iter().sum::<f64>() < target {
        if iterations >= cap {
            let residual: f64 = circulating.iter().sum();
            return Err(Error::PassThroughStalled {
                coverage,
                iterations,
                residual,
                residual_fraction: if total_c0 > 0.0 { residual / total_c0 } else { 0.0 },
            });
        }
        iterations += 1;

        // incoming_i = sum over suppliers j of (mu_j c_j / s_out_j) W_ji.
        for i in 0..n {
            pass_factor[i] = if net.s_out()[i] > 0.0 {
                circulating[i] / net.s_out()[i]
            } else {
                0.0
            };
        }
        incoming
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, inc)| {
                let e0 = net.in_offset(i);
                let e1 = net.in_offset(i + 1);
                let mut acc = 0.0;
                for k in e0..e1 {
                    acc += in_val[k] * pass_factor[in_src[k] as usize];
                }
                *inc = acc;
            });
        for i in 0..n {
            retained[i] += (1.0 - mu[i]) * incoming[i];
            circulating[i] = mu[i] * incoming[i];
        }
        mass_trace.push(circulating.iter().sum::<f64>());
    }

    let distributed: f64 = retained.iter().sum();
    Ok(PassThroughResult {
        retained,
        iterations,
        distributed_fraction: if total_c0 > 0.0 { distributed / total_c0 } else { 1.0 },
        residual: total_c0 - distributed,
        circulating_mass: mass_trace,
    })
}

/// Writes `firm_id,retained_cost`.
pub fn write_retained_csv(path: &str, retained: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_open_err(path, e))?;
    wtr.write_record(["firm_id", "retained_cost"])
        .map_err(|e| csv_row_err(path, &e))?;
    for (i, c) in retained.iter().enumerate() {
        wtr.serialize((i as u64, c))
            .map_err(|e| csv_row_err(path, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
