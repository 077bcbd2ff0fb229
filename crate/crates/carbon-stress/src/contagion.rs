//! Shock propagation to a fixed point of production levels.
//!
//! Starting from an initial level vector (zeros mark failed firms), every
//! firm synchronously recomputes the level it can sustain:
//!
//! * supply side: the calibrated production function evaluated on current
//!   upstream deliveries (suppliers at reduced levels deliver
//!   proportionally less);
//! * demand side: customers at reduced levels buy proportionally less, so a
//!   firm does not produce beyond current demand (optional channel);
//! * no recovery: levels never rise within a scenario.
//!
//! Updates are Jacobi-style against the immutable previous state, so results
//! are identical for any worker count. Levels are monotone non-increasing
//! and bounded, which guarantees termination for any positive tolerance.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::finance::{bank_losses, indirect_defaults, project_books, BankRegister};
use crate::network::{FirmBook, SupplyNetwork};
use crate::production::{ProductionFn, ProductionParams};

/// Knobs for [`propagate`]. Defaults: GL regime, `epsilon = 1e-6`,
/// 10⁴ iteration cap, demand channel on, no trace.
#[derive(Debug, Clone)]
pub struct ContagionSettings {
    pub production_fn: ProductionFn,
    /// Convergence tolerance on the max-norm of the level change.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Propagate demand reductions downstream->upstream. Disable to study
    /// the pure supply channel.
    pub demand_channel: bool,
    /// Record the per-iteration max level change.
    pub record_trace: bool,
}

impl ContagionSettings {
    pub fn new(production_fn: ProductionFn) -> Self {
        ContagionSettings {
            production_fn,
            epsilon: 1e-6,
            max_iterations: 10_000,
            demand_channel: true,
            record_trace: false,
        }
    }
}

/// Outcome of one propagation run.
#[derive(Debug, Clone)]
pub struct ContagionResult {
    /// Final remaining production level per firm, in `[0, 1]`.
    pub h_final: Vec<f64>,
    pub iterations: usize,
    /// Sales-weighted output loss of the whole network.
    pub total_loss: f64,
    /// Loss already present in the initial shock.
    pub direct_loss: f64,
    /// `total_loss - direct_loss`.
    pub indirect_loss: f64,
    /// Per-iteration max level change, when requested.
    pub trace: Option<Vec<f64>>,
}

/// Sales-weighted fraction of output lost at level vector `h`.
pub fn output_loss(net: &SupplyNetwork, h: &[f64]) -> f64 {
    let total: f64 = net.s_out().iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let lost: f64 = net
        .s_out()
        .iter()
        .zip(h)
        .map(|(s, h)| s * (1.0 - h))
        .sum();
    lost / total
}

/// Runs the cascade from `h_init` until the max level change drops below
/// `settings.epsilon`.
pub fn propagate(
    net: &SupplyNetwork,
    params: &ProductionParams,
    h_init: &[f64],
    settings: &ContagionSettings,
) -> Result<ContagionResult> {
    let n = net.firm_count();
    assert_eq!(h_init.len(), n, "one level per firm");
    for &h in h_init {
        if !h.is_finite() {
            return Err(Error::NonFinite { context: "initial production levels" });
        }
        if !(0.0..=1.0).contains(&h) {
            return Err(Error::Config(format!(
                "initial production level {h} outside [0, 1]"
            )));
        }
    }

    let in_src = net.in_sources_flat();
    let in_val = net.in_values_flat();
    let out_tgt = net.out_targets_flat();
    let out_val = net.out_values_flat();
    let edge_group = params.edge_group();
    let s_out = net.s_out();
    let fn_kind = settings.production_fn;
    let demand = settings.demand_channel;

    let mut h_prev = h_init.to_vec();
    let mut h_next = vec![0.0f64; n];
    let mut trace = settings.record_trace.then(Vec::new);
    let mut iterations = 0usize;
    let mut last_delta = f64::INFINITY;

    loop {
        iterations += 1;
        if iterations > settings.max_iterations {
            return Err(Error::ContagionStalled {
                iterations: settings.max_iterations,
                max_delta: last_delta,
            });
        }

        (0..n)
            .into_par_iter()
            .map_init(Vec::<f64>::new, |buf, i| {
                let h_i = h_prev[i];
                if params.is_inert(i) || h_i == 0.0 {
                    return h_i;
                }
                let range = params.group_range(i);
                buf.clear();
                buf.resize(range.len(), 0.0);
                let e0 = net.in_offset(i);
                let e1 = net.in_offset(i + 1);
                let g0 = range.start as u32;
                for k in e0..e1 {
                    let slot = (edge_group[k] - g0) as usize;
                    buf[slot] += in_val[k] * h_prev[in_src[k] as usize];
                }
                let x = params.supply_output(i, buf, fn_kind);
                let s = s_out[i];
                let mut h_new = (x / s).min(h_i);
                if demand {
                    let mut sold = 0.0;
                    let o0 = net.out_offset(i);
                    let o1 = net.out_offset(i + 1);
                    for k in o0..o1 {
                        sold += out_val[k] * h_prev[out_tgt[k] as usize];
                    }
                    h_new = h_new.min(sold / s);
                }
                h_new.max(0.0)
            })
            .collect_into_vec(&mut h_next);

        let delta = max_delta(&h_prev, &h_next);
        last_delta = delta;
        if let Some(t) = trace.as_mut() {
            t.push(delta);
        }
        std::mem::swap(&mut h_prev, &mut h_next);
        if delta < settings.epsilon {
            break;
        }
    }

    let total_loss = output_loss(net, &h_prev);
    let direct_loss = output_loss(net, h_init);
    Ok(ContagionResult {
        total_loss,
        direct_loss,
        indirect_loss: total_loss - direct_loss,
        h_final: h_prev,
        iterations,
        trace,
    })
}

fn max_delta(prev: &[f64], next: &[f64]) -> f64 {
    prev.par_iter()
        .zip(next.par_iter())
        .map(|(p, n)| p - n)
        .reduce(|| 0.0, f64::max)
}

/// Level vector for an initial failure set: ones except the listed firms.
pub fn kill_set(n: usize, failed: impl IntoIterator<Item = usize>) -> Vec<f64> {
    let mut h = vec![1.0; n];
    for i in failed {
        h[i] = 0.0;
    }
    h
}

// The index scans run one cascade per firm with no per-run control, so
// they get a generous iteration budget; slowly mixing networks otherwise
// abort the whole ranking over a single badly conditioned cascade.
const INDEX_SCAN_ITERATION_CAP: usize = 1_000_000;

/// Economic systemic risk index: for each firm, the network-wide output loss
/// caused by its isolated hypothetical failure.
pub fn esri(
    net: &SupplyNetwork,
    params: &ProductionParams,
    production_fn: ProductionFn,
    epsilon: f64,
) -> Result<Vec<f64>> {
    let n = net.firm_count();
    let mut settings = ContagionSettings::new(production_fn);
    settings.epsilon = epsilon;
    settings.max_iterations = INDEX_SCAN_ITERATION_CAP;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let h_init = kill_set(n, [i]);
            propagate(net, params, &h_init, &settings).map(|r| r.total_loss)
        })
        .collect()
}

/// Financial systemic risk index: for each firm, the equity-weighted banking
/// system loss after its hypothetical failure cascades through the network
/// and the surviving firms' balance sheets are re-evaluated. The initiating
/// firm's own loans are written off; no carbon costs are involved.
pub fn fsri(
    net: &SupplyNetwork,
    params: &ProductionParams,
    production_fn: ProductionFn,
    epsilon: f64,
    banks: &BankRegister,
    book: &FirmBook,
    lgd: f64,
) -> Result<Vec<f64>> {
    let n = net.firm_count();
    let mut settings = ContagionSettings::new(production_fn);
    settings.epsilon = epsilon;
    settings.max_iterations = INDEX_SCAN_ITERATION_CAP;
    let zero_costs = vec![0.0f64; n];
    let eligible = book.eligibility();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let h_init = kill_set(n, [i]);
            let result = propagate(net, params, &h_init, &settings)?;
            let mut chi_dir = vec![false; n];
            chi_dir[i] = true;
            let projected = project_books(book, &result.h_final, &zero_costs, &chi_dir);
            let chi_indir = indirect_defaults(&projected, &chi_dir, &eligible);
            let report = bank_losses(banks, book, &chi_dir, &chi_indir, lgd, None);
            Ok(report.system.total)
        })
        .collect()
}
