use super::route::route_difference;
use super::{Allocation, FlowRoute, FlowSpec, ModelError, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub total_energy: f64,
    /// Hop count per flow; `None` for flows without a route.
    pub path_lengths: Vec<Option<usize>>,
    pub reconfiguration_overhead: usize,
    pub max_link_util: f64,
    pub avg_link_util: f64,
    pub max_server_util: f64,
    pub avg_server_util: f64,
}

impl MetricsReport {
    pub fn mean_path_length(&self) -> Option<f64> {
        let lens: Vec<usize> = self.path_lengths.iter().flatten().copied().collect();
        (!lens.is_empty()).then(|| lens.iter().sum::<usize>() as f64 / lens.len() as f64)
    }
}

/// Metrics of `allocation` against the previously installed routes.
///
/// `previous` may be empty, meaning nothing was installed.
pub fn compute_metrics(
    network: &Network,
    flows: &[FlowSpec],
    rates: &[f64],
    previous: &[Option<FlowRoute>],
    allocation: &Allocation,
) -> Result<MetricsReport, ModelError> {
    let n = network.node_count();
    let f = flows.len();
    if rates.len() != f || allocation.routes.len() != f {
        return Err(ModelError::DimensionMismatch(format!(
            "{f} flows, {} rates, {} routes",
            rates.len(),
            allocation.routes.len()
        )));
    }
    if !previous.is_empty() && previous.len() != f {
        return Err(ModelError::DimensionMismatch(format!(
            "{f} flows but {} installed routes",
            previous.len()
        )));
    }
    if allocation.server_states.len() != n {
        return Err(ModelError::DimensionMismatch(format!(
            "{} server states for {n} nodes",
            allocation.server_states.len()
        )));
    }

    let total_energy = network
        .servers
        .iter()
        .zip(&allocation.server_states)
        .map(|(s, &st)| s.power(st))
        .sum();

    let mut link_load = vec![0.0; n * n];
    let mut server_load = vec![0.0; n];
    for ((flow, route), &rate) in flows.iter().zip(&allocation.routes).zip(rates) {
        let Some(route) = route else { continue };
        for (i, j) in route.edges() {
            link_load[i * n + j] += rate;
        }
        for (node, x) in route.assignment(&flow.chain) {
            server_load[node] += rate * network.vnfs.processing(x);
        }
    }

    let links = network.topology.links();
    let link_utils: Vec<f64> = links
        .iter()
        .map(|&(i, j)| link_load[i * n + j] / network.topology.capacity(i, j))
        .collect();
    let server_utils: Vec<f64> = network
        .servers
        .iter()
        .enumerate()
        .filter(|(_, s)| s.capacity > 0.0)
        .map(|(i, s)| server_load[i] / s.capacity)
        .collect();

    let reconfiguration_overhead = allocation
        .routes
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let m = previous.get(k).and_then(Option::as_ref);
            route_difference(r.as_ref(), m)
        })
        .sum();

    Ok(MetricsReport {
        total_energy,
        path_lengths: allocation
            .routes
            .iter()
            .map(|r| r.as_ref().map(FlowRoute::hops))
            .collect(),
        reconfiguration_overhead,
        max_link_util: max_or_zero(&link_utils),
        avg_link_util: mean_or_zero(&link_utils),
        max_server_util: max_or_zero(&server_utils),
        avg_server_util: mean_or_zero(&server_utils),
    })
}

fn max_or_zero(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

fn mean_or_zero(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}
