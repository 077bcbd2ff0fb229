//! Supply chain network and firm registry.
//!
//! The network is a sparse directed weighted graph: `W[i][j]` is the annual
//! value supplier `i` sells to buyer `j`. Both adjacency directions are kept
//! in CSR form so that downstream iterations (pass-through, contagion) can
//! run deterministic per-firm reductions regardless of worker count.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sector::{csv_open_err, csv_row_err, SectorCode};

/// Dense non-negative firm identifier, contiguous `0..n` within a network.
pub type FirmId = u32;

/// One directed edge of the supply network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub supplier: FirmId,
    pub buyer: FirmId,
    pub value: f64,
}

/// Sparse directed weighted firm-to-firm transaction graph.
///
/// Invariants: no self-loops, all edge values strictly positive, and the
/// stored strengths are exactly the CSR-order sums of the edge values.
#[derive(Debug, Clone)]
pub struct SupplyNetwork {
    n: usize,
    // Outgoing edges, grouped by supplier, buyers sorted within each group.
    out_offsets: Vec<u32>,
    out_targets: Vec<FirmId>,
    out_values: Vec<f64>,
    // Incoming edges, grouped by buyer, suppliers sorted within each group.
    in_offsets: Vec<u32>,
    in_sources: Vec<FirmId>,
    in_values: Vec<f64>,
    s_out: Vec<f64>,
    s_in: Vec<f64>,
}

impl SupplyNetwork {
    /// Builds a network from an edge list. Duplicate (supplier, buyer) pairs
    /// are summed into a single edge; self-loops and non-positive values are
    /// rejected.
    pub fn from_edges(n: usize, edges: &[Edge]) -> Result<Self> {
        for e in edges {
            if e.supplier == e.buyer {
                return Err(Error::Config(format!(
                    "self-loop on firm {} in edge list",
                    e.supplier
                )));
            }
            if (e.supplier as usize) >= n || (e.buyer as usize) >= n {
                return Err(Error::Config(format!(
                    "edge ({}, {}) references a firm outside 0..{n}",
                    e.supplier, e.buyer
                )));
            }
            if !e.value.is_finite() || e.value <= 0.0 {
                return Err(Error::Config(format!(
                    "edge ({}, {}) has non-positive value {}",
                    e.supplier, e.buyer, e.value
                )));
            }
        }
        let mut sorted: Vec<Edge> = edges.to_vec();
        sorted.sort_by_key(|e| (e.supplier, e.buyer));
        // Merge duplicates.
        let mut merged: Vec<Edge> = Vec::with_capacity(sorted.len());
        for e in sorted {
            match merged.last_mut() {
                Some(last) if last.supplier == e.supplier && last.buyer == e.buyer => {
                    last.value += e.value;
                }
                _ => merged.push(e),
            }
        }
        Ok(Self::from_merged(n, merged))
    }

    fn from_merged(n: usize, merged: Vec<Edge>) -> Self {
        let m = merged.len();
        let mut out_offsets = vec![0u32; n + 1];
        for e in &merged {
            out_offsets[e.supplier as usize + 1] += 1;
        }
        for i in 0..n {
            out_offsets[i + 1] += out_offsets[i];
        }
        let mut out_targets = vec![0u32; m];
        let mut out_values = vec![0f64; m];
        {
            let mut cursor = out_offsets.clone();
            for e in &merged {
                let s = e.supplier as usize;
                let k = cursor[s] as usize;
                out_targets[k] = e.buyer;
                out_values[k] = e.value;
                cursor[s] += 1;
            }
        }
        // Transpose: group by buyer, keep supplier order ascending.
        let mut in_offsets = vec![0u32; n + 1];
        for e in &merged {
            in_offsets[e.buyer as usize + 1] += 1;
        }
        for i in 0..n {
            in_offsets[i + 1] += in_offsets[i];
        }
        let mut in_sources = vec![0u32; m];
        let mut in_values = vec![0f64; m];
        {
            let mut cursor = in_offsets.clone();
            // merged is sorted by supplier, so each buyer's suppliers arrive
            // in ascending order.
            for e in &merged {
                let b = e.buyer as usize;
                let k = cursor[b] as usize;
                in_sources[k] = e.supplier;
                in_values[k] = e.value;
                cursor[b] += 1;
            }
        }
        let mut s_out = vec![0f64; n];
        for i in 0..n {
            let (a, b) = (out_offsets[i] as usize, out_offsets[i + 1] as usize);
            s_out[i] = out_values[a..b].iter().sum();
        }
        let mut s_in = vec![0f64; n];
        for i in 0..n {
            let (a, b) = (in_offsets[i] as usize, in_offsets[i + 1] as usize);
            s_in[i] = in_values[a..b].iter().sum();
        }
        SupplyNetwork {
            n,
            out_offsets,
            out_targets,
            out_values,
            in_offsets,
            in_sources,
            in_values,
            s_out,
            s_in,
        }
    }

    pub fn firm_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.out_targets.len()
    }

    /// Out-strength per firm (annual sales into the network).
    pub fn s_out(&self) -> &[f64] {
        &self.s_out
    }

    /// In-strength per firm (annual purchases from the network).
    pub fn s_in(&self) -> &[f64] {
        &self.s_in
    }

    /// Sum of all edge values.
    pub fn total_value(&self) -> f64 {
        self.out_values.iter().sum()
    }

    /// Outgoing edges of `firm` as (buyer, value) pairs, buyer-ascending.
    pub fn out_edges(&self, firm: FirmId) -> impl Iterator<Item = (FirmId, f64)> + '_ {
        let (a, b) = (
            self.out_offsets[firm as usize] as usize,
            self.out_offsets[firm as usize + 1] as usize,
        );
        self.out_targets[a..b]
            .iter()
            .copied()
            .zip(self.out_values[a..b].iter().copied())
    }

    /// Incoming edges of `firm` as (supplier, value) pairs, supplier-ascending.
    pub fn in_edges(&self, firm: FirmId) -> impl Iterator<Item = (FirmId, f64)> + '_ {
        let (a, b) = (
            self.in_offsets[firm as usize] as usize,
            self.in_offsets[firm as usize + 1] as usize,
        );
        self.in_sources[a..b]
            .iter()
            .copied()
            .zip(self.in_values[a..b].iter().copied())
    }

    /// Offset of `firm`'s first in-edge in the flat in-CSR arrays.
    pub(crate) fn in_offset(&self, firm: usize) -> usize {
        self.in_offsets[firm] as usize
    }

    pub(crate) fn in_sources_flat(&self) -> &[FirmId] {
        &self.in_sources
    }

    pub(crate) fn in_values_flat(&self) -> &[f64] {
        &self.in_values
    }

    pub(crate) fn out_offset(&self, firm: usize) -> usize {
        self.out_offsets[firm] as usize
    }

    pub(crate) fn out_targets_flat(&self) -> &[FirmId] {
        &self.out_targets
    }

    pub(crate) fn out_values_flat(&self) -> &[f64] {
        &self.out_values
    }

    /// All edges in (supplier, buyer) order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.n as u32).flat_map(move |i| {
            self.out_edges(i).map(move |(j, v)| Edge {
                supplier: i,
                buyer: j,
                value: v,
            })
        })
    }

    /// Removes all edges with value `< min_edge_value`. Firms are retained
    /// as isolated nodes so identifiers stay comparable across thresholds.
    pub fn threshold(&self, min_edge_value: f64) -> ThresholdedNetwork {
        let total = self.total_value();
        let kept: Vec<Edge> = self.edges().filter(|e| e.value >= min_edge_value).collect();
        let kept_value: f64 = kept.iter().map(|e| e.value).sum();
        let network = SupplyNetwork::from_merged(self.n, kept);
        ThresholdedNetwork {
            retained_value_fraction: if total > 0.0 { kept_value / total } else { 1.0 },
            retained_edges: network.edge_count(),
            network,
        }
    }
}

/// Result of [`SupplyNetwork::threshold`].
#[derive(Debug, Clone)]
pub struct ThresholdedNetwork {
    pub network: SupplyNetwork,
    /// Fraction of total edge value that survived the cut.
    pub retained_value_fraction: f64,
    pub retained_edges: usize,
}

/// Per-firm financials and sector affiliation.
///
/// `other_income` is derived at load so that
/// `operating_profit = revenue - material_costs + other_income` holds exactly.
#[derive(Debug, Clone, Default)]
pub struct FirmBook {
    pub revenue: Vec<f64>,
    pub material_costs: Vec<f64>,
    pub other_income: Vec<f64>,
    pub operating_profit: Vec<f64>,
    pub net_profit: Vec<f64>,
    pub equity: Vec<f64>,
    pub liquidity: Vec<f64>,
    pub retained_earnings: Vec<f64>,
    pub sector: Vec<SectorCode>,
    pub has_loan: Vec<bool>,
}

impl FirmBook {
    pub fn len(&self) -> usize {
        self.revenue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.revenue.is_empty()
    }

    /// The non-negativity filter: only firms whose revenue, material costs,
    /// equity, liquidity and both profit lines are non-negative can default.
    pub fn default_eligible(&self, firm: usize) -> bool {
        self.revenue[firm] >= 0.0
            && self.material_costs[firm] >= 0.0
            && self.equity[firm] >= 0.0
            && self.liquidity[firm] >= 0.0
            && self.operating_profit[firm] >= 0.0
            && self.net_profit[firm] >= 0.0
    }

    /// Eligibility flags for all firms.
    pub fn eligibility(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.default_eligible(i)).collect()
    }
}

#[derive(Debug, serde::Deserialize)]
struct FirmRow {
    firm_id: u64,
    sector: String,
    revenue: f64,
    material_costs: f64,
    operating_profit: f64,
    net_profit: f64,
    equity: f64,
    liquidity: f64,
    retained_earnings: f64,
}

#[derive(Debug, serde::Deserialize)]
struct EdgeRow {
    supplier_id: u64,
    buyer_id: u64,
    value: f64,
}

/// Loads the firm registry and edge list from the two CSV schemas
/// (`firm_id,sector,revenue,...` and `supplier_id,buyer_id,value`).
///
/// Firm ids must be unique and contiguous `0..n`. Duplicate edges are summed;
/// edges naming unknown firms or self-loops are errors.
///
/// Edge values are pre-aggregated annual transaction totals. Sub-annual
/// records (e.g. quarterly link stability filters) belong in an upstream
/// preparation step; summing duplicate rows here is the hook where such a
/// pipeline would feed finer-grained data.
pub fn load_network(firms_path: &str, edges_path: &str) -> Result<(SupplyNetwork, FirmBook)> {
    let book = load_firms(firms_path)?;
    let n = book.len();

    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(edges_path)
        .map_err(|e| csv_open_err(edges_path, e))?;
    let headers = rdr
        .headers()
        .map_err(|e| csv_row_err(edges_path, &e))?
        .clone();
    let mut edges: Vec<Edge> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_row_err(edges_path, &e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: EdgeRow = rec.deserialize(Some(&headers)).map_err(|e| Error::MalformedRow {
            path: edges_path.into(),
            line,
            message: e.to_string(),
        })?;
        if row.supplier_id == row.buyer_id {
            return Err(Error::SelfLoop {
                path: edges_path.into(),
                line,
                firm: row.supplier_id,
            });
        }
        for id in [row.supplier_id, row.buyer_id] {
            if id >= n as u64 {
                return Err(Error::DanglingFirm {
                    path: edges_path.into(),
                    line,
                    firm: id,
                });
            }
        }
        if !row.value.is_finite() || row.value <= 0.0 {
            return Err(Error::MalformedRow {
                path: edges_path.into(),
                line,
                message: format!("edge value must be positive, got {}", row.value),
            });
        }
        edges.push(Edge {
            supplier: row.supplier_id as FirmId,
            buyer: row.buyer_id as FirmId,
            value: row.value,
        });
    }
    let network = SupplyNetwork::from_edges(n, &edges)?;
    Ok((network, book))
}

fn load_firms(path: &str) -> Result<FirmBook> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_open_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_row_err(path, &e))?.clone();
    let mut rows: Vec<(u64, u64, FirmRow)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_row_err(path, &e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: FirmRow = rec.deserialize(Some(&headers)).map_err(|e| Error::MalformedRow {
            path: path.into(),
            line,
            message: e.to_string(),
        })?;
        rows.push((line, row.firm_id, row));
    }
    let n = rows.len();
    let mut seen = vec![false; n];
    let mut book = FirmBook {
        revenue: vec![0.0; n],
        material_costs: vec![0.0; n],
        other_income: vec![0.0; n],
        operating_profit: vec![0.0; n],
        net_profit: vec![0.0; n],
        equity: vec![0.0; n],
        liquidity: vec![0.0; n],
        retained_earnings: vec![0.0; n],
        sector: vec![SectorCode::unknown(); n],
        has_loan: vec![false; n],
    };
    for (line, id, row) in rows {
        if id >= n as u64 || seen[id as usize] {
            return Err(Error::MalformedRow {
                path: path.into(),
                line,
                message: format!("firm ids must be unique and contiguous 0..{n}, got {id}"),
            });
        }
        seen[id as usize] = true;
        let i = id as usize;
        for (name, v) in [
            ("revenue", row.revenue),
            ("material_costs", row.material_costs),
            ("operating_profit", row.operating_profit),
            ("net_profit", row.net_profit),
            ("equity", row.equity),
            ("liquidity", row.liquidity),
            ("retained_earnings", row.retained_earnings),
        ] {
            if !v.is_finite() {
                return Err(Error::MalformedRow {
                    path: path.into(),
                    line,
                    message: format!("{name} is not finite"),
                });
            }
        }
        book.revenue[i] = row.revenue;
        book.material_costs[i] = row.material_costs;
        book.operating_profit[i] = row.operating_profit;
        book.net_profit[i] = row.net_profit;
        book.equity[i] = row.equity;
        book.liquidity[i] = row.liquidity;
        book.retained_earnings[i] = row.retained_earnings;
        // other income closes the identity p = r - c + o.
        book.other_income[i] = row.operating_profit - row.revenue + row.material_costs;
        book.sector[i] = SectorCode::parse(&row.sector).map_err(|e| Error::MalformedRow {
            path: path.into(),
            line,
            message: e.to_string(),
        })?;
    }
    Ok(book)
}

/// Writes a firm book in the firms CSV schema.
pub fn write_firms_csv(path: &str, book: &FirmBook) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_open_err(path, e))?;
    wtr.write_record([
        "firm_id",
        "sector",
        "revenue",
        "material_costs",
        "operating_profit",
        "net_profit",
        "equity",
        "liquidity",
        "retained_earnings",
    ])
    .map_err(|e| csv_row_err(path, &e))?;
    for i in 0..book.len() {
        wtr.serialize((
            i as u64,
            book.sector[i].as_str(),
            book.revenue[i],
            book.material_costs[i],
            book.operating_profit[i],
            book.net_profit[i],
            book.equity[i],
            book.liquidity[i],
            book.retained_earnings[i],
        ))
        .map_err(|e| csv_row_err(path, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes an edge list in the edges CSV schema.
pub fn write_edges_csv(path: &str, net: &SupplyNetwork) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| csv_open_err(path, e))?;
    wtr.write_record(["supplier_id", "buyer_id", "value"])
        .map_err(|e| csv_row_err(path, &e))?;
    for e in net.edges() {
        wtr.serialize((e.supplier as u64, e.buyer as u64, e.value))
            .map_err(|e| csv_row_err(path, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Summary line used by reports: firm/edge counts and total value.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkSummary {
    pub firms: usize,
    pub edges: usize,
    pub total_value: f64,
}

impl From<&SupplyNetwork> for NetworkSummary {
    fn from(net: &SupplyNetwork) -> Self {
        NetworkSummary {
            firms: net.firm_count(),
            edges: net.edge_count(),
            total_value: net.total_value(),
        }
    }
}
