//! Production-function calibration.
//!
//! Every firm produces with a generalized Leontief technology: output is the
//! minimum over its essential input sectors of a fixed-proportion term, and a
//! linear term over non-essential inputs on top of a value-added floor.
//! Parameters are calibrated so that at the unshocked network every producing
//! firm's output equals its out-strength exactly.
//!
//! Inputs are grouped by the supplier's sector. For firm `i` with essential
//! sector `k`, the fixed-proportion coefficient is the baseline input from
//! that sector divided by `s_out[i]`, so the term reproduces `s_out[i]` at
//! baseline. The floor is the firm's value added, `max(0, s_out - s_in)`,
//! which no input shock can remove. The non-essential term scales the
//! remaining output share with the surviving fraction of non-essential
//! input value; a firm with no non-essential inputs loses nothing through
//! that channel.

use crate::error::{Error, Result};
use crate::network::SupplyNetwork;
use crate::sector::{CriticalityTable, SectorCode};

/// Production regimes: `Gl` treats essential inputs as non-substitutable,
/// `Linear` treats every input as substitutable (all-linear).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductionFn {
    Gl,
    Linear,
}

impl ProductionFn {
    pub fn label(self) -> &'static str {
        match self {
            ProductionFn::Gl => "gl",
            ProductionFn::Linear => "linear",
        }
    }
}

impl std::fmt::Display for ProductionFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Linear production term: the value-added floor plus the output share
/// scaled by the surviving fraction of baseline input value. A firm with no
/// baseline input (ratio 0/0) loses nothing through this channel.
#[inline]
fn linear_term(s_out: f64, beta: f64, input: f64, baseline: f64) -> f64 {
    if baseline > 0.0 {
        s_out - (s_out - beta) * (1.0 - input / baseline)
    } else {
        s_out
    }
}

/// Calibrated per-firm production parameters, laid out flat for the
/// propagation kernel. Input groups (one per supplier sector per firm) are
/// indexed `group_offsets[i]..group_offsets[i+1]`; every in-edge of the
/// network carries the index of the group it feeds.
#[derive(Debug, Clone)]
pub struct ProductionParams {
    n: usize,
    group_offsets: Vec<u32>,
    group_baseline: Vec<f64>,
    group_essential: Vec<bool>,
    /// For each in-edge (in the network's in-CSR order), the global group index.
    edge_group: Vec<u32>,
    /// Baseline non-essential input value per firm.
    ne_baseline: Vec<f64>,
    /// Baseline total input value per firm, summed in group order.
    all_baseline: Vec<f64>,
    /// Value-added floor per firm.
    beta: Vec<f64>,
    /// Firms with zero out-strength produce nothing and are held at level 1.
    inert: Vec<bool>,
    s_out: Vec<f64>,
}

impl ProductionParams {
    pub fn firm_count(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn is_inert(&self, firm: usize) -> bool {
        self.inert[firm]
    }

    pub(crate) fn group_range(&self, firm: usize) -> std::ops::Range<usize> {
        self.group_offsets[firm] as usize..self.group_offsets[firm + 1] as usize
    }

    #[cfg(test)]
    pub(crate) fn group_baseline(&self) -> &[f64] {
        &self.group_baseline
    }

    #[cfg(test)]
    pub(crate) fn group_essential(&self) -> &[bool] {
        &self.group_essential
    }

    pub(crate) fn edge_group(&self) -> &[u32] {
        &self.edge_group
    }

    #[cfg(test)]
    pub(crate) fn ne_baseline(&self) -> &[f64] {
        &self.ne_baseline
    }

    /// Supply-feasible output of one firm given accumulated group inputs.
    /// `groups` must hold the current input value per group of this firm, in
    /// group order. Used by the propagation kernel and the calibration check.
    ///
    /// The linear term is evaluated as `s_out - (s_out - beta) * (1 - ratio)`
    /// so that a fully intact input bundle reproduces `s_out` bit-exactly
    /// (the unshocked network must be an exact fixed point).
    pub(crate) fn supply_output(&self, firm: usize, groups: &[f64], fn_kind: ProductionFn) -> f64 {
        let s_out = self.s_out[firm];
        let beta = self.beta[firm];
        let range = self.group_range(firm);
        match fn_kind {
            ProductionFn::Gl => {
                let mut x = f64::INFINITY;
                let mut ne_input = 0.0;
                for (slot, g) in range.clone().enumerate() {
                    if self.group_essential[g] {
                        // alpha = baseline / s_out; dividing by the baseline
                        // first keeps the intact case at exactly s_out.
                        x = x.min(groups[slot] / self.group_baseline[g] * s_out);
                    } else {
                        ne_input += groups[slot];
                    }
                }
                let ne_term = linear_term(s_out, beta, ne_input, self.ne_baseline[firm]);
                x.min(ne_term)
            }
            ProductionFn::Linear => {
                let total_input: f64 = groups.iter().sum();
                linear_term(s_out, beta, total_input, self.all_baseline[firm])
            }
        }
    }
}

/// Calibrates production parameters from the network and the criticality
/// table. Firms with zero out-strength are marked inert. Verifies that the
/// baseline network is an exact fixed point (relative 1e-9).
pub fn calibrate(
    net: &SupplyNetwork,
    sectors: &[SectorCode],
    criticality: &CriticalityTable,
) -> Result<ProductionParams> {
    let n = net.firm_count();
    assert_eq!(sectors.len(), n, "one sector code per firm");

    let mut group_offsets = vec![0u32; n + 1];
    let mut group_baseline: Vec<f64> = Vec::new();
    let mut group_essential: Vec<bool> = Vec::new();
    let mut edge_group: Vec<u32> = Vec::with_capacity(net.edge_count());
    let mut ne_baseline = vec![0.0f64; n];
    let mut all_baseline = vec![0.0f64; n];
    let mut beta = vec![0.0f64; n];
    let mut inert = vec![false; n];

    for i in 0..n {
        // In-edges arrive supplier-ascending; group them by supplier sector.
        // Sector changes between consecutive suppliers open a new group, and
        // a sector seen again later maps back to its existing group.
        let mut local: Vec<(SectorCode, u32)> = Vec::new();
        for (supplier, value) in net.in_edges(i as u32) {
            let sec = &sectors[supplier as usize];
            let gid = match local.iter().find(|(s, _)| s == sec) {
                Some((_, g)) => *g,
                None => {
                    let g = group_baseline.len() as u32;
                    let essential = criticality.is_essential(&sectors[i], sec);
                    group_baseline.push(0.0);
                    group_essential.push(essential);
                    local.push((sec.clone(), g));
                    g
                }
            };
            group_baseline[gid as usize] += value;
            edge_group.push(gid);
        }
        group_offsets[i + 1] = group_baseline.len() as u32;

        let s_out = net.s_out()[i];
        let s_in = net.s_in()[i];
        if s_out == 0.0 {
            inert[i] = true;
            continue;
        }
        beta[i] = (s_out - s_in).max(0.0);
        let range = group_offsets[i] as usize..group_offsets[i + 1] as usize;
        ne_baseline[i] = range
            .clone()
            .filter(|&g| !group_essential[g])
            .map(|g| group_baseline[g])
            .sum();
        all_baseline[i] = range.map(|g| group_baseline[g]).sum();
    }

    let params = ProductionParams {
        n,
        group_offsets,
        group_baseline,
        group_essential,
        edge_group,
        ne_baseline,
        all_baseline,
        beta,
        inert,
        s_out: net.s_out().to_vec(),
    };

    // Fixed-point check: the unshocked network must reproduce s_out.
    let mut groups: Vec<f64> = Vec::new();
    for i in 0..n {
        if params.inert[i] {
            continue;
        }
        let range = params.group_range(i);
        groups.clear();
        groups.resize(range.len(), 0.0);
        let base = range.start;
        let edge_base = net.in_offset(i);
        for (k, (_, value)) in net.in_edges(i as u32).enumerate() {
            let slot = params.edge_group[edge_base + k] as usize - base;
            groups[slot] += value;
        }
        let x = params.supply_output(i, &groups, ProductionFn::Gl);
        let s_out = net.s_out()[i];
        if (x - s_out).abs() > 1e-9 * s_out.abs() {
            return Err(Error::Calibration {
                firm: i,
                output: x,
                s_out,
            });
        }
    }

    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;

    fn sector(code: &str) -> SectorCode {
        SectorCode::parse(code).unwrap()
    }

    fn gl_eval(params: &ProductionParams, net: &SupplyNetwork, firm: usize, h: &[f64]) -> f64 {
        let range = params.group_range(firm);
        let base = range.start;
        let mut groups = vec![0.0; range.len()];
        for (k, (supplier, value)) in net.in_edges(firm as u32).enumerate() {
            let mut offset = 0;
            for f in 0..firm {
                offset += net.in_edges(f as u32).count();
            }
            let slot = params.edge_group()[offset + k] as usize - base;
            groups[slot] += value * h[supplier as usize];
        }
        params.supply_output(firm, &groups, ProductionFn::Gl)
    }

    #[test]
    fn essential_share_and_baseline() {
        // One essential supplier sector with input 4, s_out 10.
        let net = SupplyNetwork::from_edges(
            3,
            &[
                Edge { supplier: 0, buyer: 1, value: 4.0 },
                Edge { supplier: 1, buyer: 2, value: 10.0 },
            ],
        )
        .unwrap();
        let sectors = vec![sector("C10.1.1"), sector("C20.1.0"), sector("G46.9.0")];
        let mut crit = CriticalityTable::new();
        crit.set(sector("C20.1.0"), sector("C10.1.1"), true);
        let params = calibrate(&net, &sectors, &crit).unwrap();
        // alpha_es = 4/10 = 0.4: the stored baseline is 4 and s_out 10.
        let r = params.group_range(1);
        assert_eq!(r.len(), 1);
        assert_eq!(params.group_baseline()[r.start], 4.0);
        assert!(params.group_essential()[r.start]);
        // Baseline GL output equals s_out.
        let x = gl_eval(&params, &net, 1, &[1.0, 1.0, 1.0]);
        assert_eq!(x, 10.0);
    }

    #[test]
    fn no_inputs_means_full_floor() {
        let net = SupplyNetwork::from_edges(
            2,
            &[Edge { supplier: 0, buyer: 1, value: 10.0 }],
        )
        .unwrap();
        let sectors = vec![sector("A01.1.1"), sector("C10.1.1")];
        let params = calibrate(&net, &sectors, &CriticalityTable::new()).unwrap();
        assert_eq!(params.beta()[0], 10.0);
        // Output is invariant to any shock on (non-existent) inputs.
        let x = gl_eval(&params, &net, 0, &[0.0, 0.0]);
        assert_eq!(x, 10.0);
    }

    #[test]
    fn linear_branch_with_value_added_floor() {
        // s_in 6 (all non-essential), s_out 10 -> beta 4; halving inputs -> 7.
        let net = SupplyNetwork::from_edges(
            3,
            &[
                Edge { supplier: 0, buyer: 1, value: 6.0 },
                Edge { supplier: 1, buyer: 2, value: 10.0 },
            ],
        )
        .unwrap();
        let sectors = vec![sector("B08.1.1"), sector("C23.5.1"), sector("F41.2.0")];
        let params = calibrate(&net, &sectors, &CriticalityTable::new()).unwrap();
        assert_eq!(params.beta()[1], 4.0);
        assert_eq!(params.ne_baseline()[1], 6.0);
        let x = gl_eval(&params, &net, 1, &[0.5, 1.0, 1.0]);
        assert_eq!(x, 7.0);
    }

    #[test]
    fn negative_value_added_clamps_to_zero_floor() {
        // s_in 8 > s_out 5: beta = 0 and the linear term spans all of s_out.
        let net = SupplyNetwork::from_edges(
            3,
            &[
                Edge { supplier: 0, buyer: 1, value: 8.0 },
                Edge { supplier: 1, buyer: 2, value: 5.0 },
            ],
        )
        .unwrap();
        let sectors = vec![sector("B08.1.1"), sector("C23.5.1"), sector("F41.2.0")];
        let params = calibrate(&net, &sectors, &CriticalityTable::new()).unwrap();
        assert_eq!(params.beta()[1], 0.0);
        let x = gl_eval(&params, &net, 1, &[1.0, 1.0, 1.0]);
        assert_eq!(x, 5.0);
        let x_half = gl_eval(&params, &net, 1, &[0.5, 1.0, 1.0]);
        assert_eq!(x_half, 2.5);
    }

    #[test]
    fn zero_out_strength_is_inert() {
        let net = SupplyNetwork::from_edges(
            2,
            &[Edge { supplier: 0, buyer: 1, value: 3.0 }],
        )
        .unwrap();
        let sectors = vec![sector("A01.1.1"), sector("C10.1.1")];
        let params = calibrate(&net, &sectors, &CriticalityTable::new()).unwrap();
        assert!(!params.is_inert(0));
        assert!(params.is_inert(1));
    }

    #[test]
    fn all_essential_inputs_keep_exact_fixed_point() {
        // A firm whose only inputs are essential: s_out > beta but no
        // non-essential baseline. The linear branch must not cap output
        // below s_out at baseline.
        let net = SupplyNetwork::from_edges(
            3,
            &[
                Edge { supplier: 0, buyer: 1, value: 4.0 },
                Edge { supplier: 1, buyer: 2, value: 12.0 },
            ],
        )
        .unwrap();
        let sectors = vec![sector("C10.1.1"), sector("C20.1.0"), sector("G46.9.0")];
        let mut crit = CriticalityTable::new();
        crit.set(sector("C20.1.0"), sector("C10.1.1"), true);
        let params = calibrate(&net, &sectors, &crit).unwrap();
        let x = gl_eval(&params, &net, 1, &[1.0, 1.0, 1.0]);
        assert_eq!(x, 12.0);
        // Losing the essential input halts production entirely.
        let dead = gl_eval(&params, &net, 1, &[0.0, 1.0, 1.0]);
        assert_eq!(dead, 0.0);
    }
}
