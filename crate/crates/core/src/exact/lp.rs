//! Export of the linearized model in the LP file format.
//!
//! Variable names use 1-based indices: `R_f_i_j` and `Q_f_i_j` exist for
//! every directed link `i→j` plus `Q_f_d_d`; `U_f_i_x` for every node and VNF
//! type; `O_i` for every node in the energy-aware models. `f` is the flow's
//! position in the input list, starting at 1. Rows are named after their
//! constraint family, e.g. `eq24_1_2_1_3_4`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::model::{
    effective_support, resolve_rates, FlowSpec, Network, NetworkState, NodeId, ProblemMode,
};

use super::{SolverConfig, SolverError};

#[derive(Clone, Copy, PartialEq)]
enum Sense {
    Le,
    Ge,
    Eq,
}

struct Row {
    name: String,
    terms: Vec<(String, f64)>,
    sense: Sense,
    rhs: f64,
}

#[derive(Default)]
struct Builder {
    rows: Vec<Row>,
}

impl Builder {
    fn row(&mut self, name: String, terms: Vec<(String, f64)>, sense: Sense, rhs: f64) {
        if !terms.is_empty() {
            self.rows.push(Row {
                name,
                terms,
                sense,
                rhs,
            });
        }
    }
}

fn r(f: usize, i: NodeId, j: NodeId) -> String {
    format!("R_{}_{}_{}", f + 1, i + 1, j + 1)
}

fn q(f: usize, i: NodeId, j: NodeId) -> String {
    format!("Q_{}_{}_{}", f + 1, i + 1, j + 1)
}

fn u(f: usize, i: NodeId, x: usize) -> String {
    format!("U_{}_{}_{}", f + 1, i + 1, x + 1)
}

fn o(i: NodeId) -> String {
    format!("O_{}", i + 1)
}

fn write_terms(out: &mut String, terms: &[(String, f64)]) {
    for (k, (name, c)) in terms.iter().enumerate() {
        let sign = if *c < 0.0 { "-" } else { "+" };
        if k == 0 {
            if *c < 0.0 {
                let _ = write!(out, "- {} {}", -c, name);
            } else {
                let _ = write!(out, "{c} {name}");
            }
        } else {
            let _ = write!(out, " {sign} {} {}", c.abs(), name);
        }
    }
}

/// The complete linearized model for `config.mode` as LP text.
pub fn export_lp(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
    config: &SolverConfig,
) -> Result<String, SolverError> {
    config.validate()?;
    for f in flows {
        f.validate(network.node_count(), network.vnf_count())?;
    }
    let stand_in = match config.mode {
        ProblemMode::Sfra => config.stand_in_rate,
        _ => None,
    };
    let rates = resolve_rates(flows, stand_in).ok_or_else(|| SolverError::RatesUnknown {
        flow: flows.iter().find(|f| f.rate.is_none()).map(|f| f.id).unwrap_or(0),
    })?;

    let topo = &network.topology;
    let n = network.node_count();
    let nx = network.vnf_count();
    let links = topo.links();
    let mode = config.mode;
    let horizon = mode.horizon();
    let support = effective_support(network, &state.server_states, horizon);
    let big24 = 2.0 * n as f64 - 1.0;
    let mut b = Builder::default();

    for (f, flow) in flows.iter().enumerate() {
        let (s, d) = (flow.source, flow.destination);
        for x in 0..nx {
            b.row(
                format!("eq2_{}_{}", f + 1, x + 1),
                (0..n).map(|i| (u(f, i, x), 1.0)).collect(),
                Sense::Eq,
                flow.requests(x) as u8 as f64,
            );
        }
        for j in (0..n).filter(|&j| j != s) {
            for x in 0..nx {
                let mut t: Vec<(String, f64)> = topo.predecessors(j).iter().map(|&i| (r(f, i, j), 1.0)).collect();
                t.push((u(f, j, x), -1.0));
                b.row(format!("eq3_{}_{}_{}", f + 1, j + 1, x + 1), t, Sense::Ge, 0.0);
            }
        }
        for i in 0..n {
            for x in 0..nx {
                b.row(
                    format!("eq4_{}_{}_{}", f + 1, i + 1, x + 1),
                    vec![(u(f, i, x), 1.0)],
                    Sense::Le,
                    support[(i, x)] as u8 as f64,
                );
            }
        }
        for x in 0..nx {
            b.row(
                format!("eq5_{}_{}", f + 1, x + 1),
                (0..n).map(|i| (u(f, i, x), 1.0)).collect(),
                Sense::Le,
                1.0,
            );
        }
        for i in 0..n {
            let mut t: Vec<(String, f64)> = topo.successors(i).iter().map(|&j| (r(f, i, j), 1.0)).collect();
            t.extend(topo.predecessors(i).iter().map(|&j| (r(f, j, i), -1.0)));
            let rhs = if i == s {
                1.0
            } else if i == d {
                -1.0
            } else {
                0.0
            };
            b.row(format!("eq10_{}_{}", f + 1, i + 1), t, Sense::Eq, rhs);
            b.row(
                format!("eq11_{}_{}", f + 1, i + 1),
                topo.successors(i).iter().map(|&j| (r(f, i, j), 1.0)).collect(),
                Sense::Le,
                1.0,
            );
        }
        if config.enforce_delay && flow.delay_budget.is_finite() {
            b.row(
                format!("eq12_{}", f + 1),
                links.iter().map(|&(i, j)| (r(f, i, j), topo.delay(i, j).unwrap())).collect(),
                Sense::Le,
                flow.delay_budget,
            );
        }
        for &(i, j) in &links {
            b.row(
                format!("eq13_{}_{}_{}", f + 1, i + 1, j + 1),
                vec![(q(f, i, j), 1.0), (r(f, i, j), -1.0)],
                Sense::Ge,
                0.0,
            );
        }
        for &j in topo.successors(d) {
            b.row(format!("eq15_{}_{}", f + 1, j + 1), vec![(q(f, d, j), 1.0)], Sense::Eq, 0.0);
        }
        for i in (0..n).filter(|&i| i != s && i != d) {
            let mut t: Vec<(String, f64)> = topo.successors(i).iter().map(|&j| (q(f, i, j), 1.0)).collect();
            t.extend(topo.predecessors(i).iter().map(|&j| (q(f, j, i), -1.0)));
            t.extend(topo.predecessors(i).iter().map(|&j| (r(f, j, i), -1.0)));
            b.row(format!("eq16_{}_{}", f + 1, i + 1), t, Sense::Eq, 0.0);
        }
        let mut t = vec![(q(f, d, d), 1.0)];
        t.extend(topo.predecessors(d).iter().map(|&j| (q(f, j, d), -1.0)));
        t.extend(topo.predecessors(d).iter().map(|&j| (r(f, j, d), -1.0)));
        b.row(format!("eq17_{}", f + 1), t, Sense::Eq, 0.0);
        b.row(
            format!("eq18_{}", f + 1),
            topo.successors(s).iter().map(|&j| (q(f, s, j), 1.0)).collect(),
            Sense::Eq,
            1.0,
        );
        for &(i, j) in links.iter().filter(|&&(i, _)| i != d) {
            b.row(
                format!("eq23_{}_{}_{}", f + 1, i + 1, j + 1),
                vec![(q(f, i, j), 1.0), (r(f, i, j), -(n as f64))],
                Sense::Le,
                0.0,
            );
        }
        let step = |node: NodeId| -> Vec<(String, f64)> {
            let mut t: Vec<(String, f64)> = topo.successors(node).iter().map(|&j| (q(f, node, j), 1.0)).collect();
            if node == d {
                t.push((q(f, d, d), 1.0));
            }
            t
        };
        for (v, &kv) in flow.chain.iter().enumerate() {
            for (z, &kz) in flow.chain[..v].iter().enumerate() {
                for i in 0..n {
                    for big_i in 0..n {
                        let mut acc: BTreeMap<String, f64> = BTreeMap::new();
                        *acc.entry(u(f, i, kv)).or_default() -= big24;
                        *acc.entry(u(f, big_i, kz)).or_default() -= big24;
                        for (name, c) in step(i) {
                            *acc.entry(name).or_default() += c;
                        }
                        for (name, c) in step(big_i) {
                            *acc.entry(name).or_default() -= c;
                        }
                        let t: Vec<(String, f64)> = acc.into_iter().filter(|(_, c)| *c != 0.0).collect();
                        b.row(
                            format!("eq24_{}_{}_{}_{}_{}", f + 1, v + 1, z + 1, i + 1, big_i + 1),
                            t,
                            Sense::Ge,
                            -2.0 * big24,
                        );
                    }
                }
            }
        }
    }

    let realloc = mode.is_reallocation();
    let (srv, lnk) = if realloc { ("eq27", "eq28") } else { ("eq6", "eq7") };
    for i in 0..n {
        let t: Vec<(String, f64)> = (0..flows.len())
            .flat_map(|f| (0..nx).map(move |x| (f, x)))
            .map(|(f, x)| (u(f, i, x), rates[f] * network.vnfs.processing(x)))
            .collect();
        let mut rhs = state.caps.mu_s * network.servers[i].capacity;
        if !realloc {
            rhs -= state.processing.row(i).iter().sum::<f64>();
        }
        b.row(format!("{srv}_{}", i + 1), t, Sense::Le, rhs);
    }
    for &(i, j) in &links {
        let t: Vec<(String, f64)> = (0..flows.len()).map(|f| (r(f, i, j), rates[f])).collect();
        let mut rhs = state.caps.mu_l * topo.capacity(i, j);
        if !realloc {
            rhs -= state.load[(i, j)];
        }
        b.row(format!("{lnk}_{}_{}", i + 1, j + 1), t, Sense::Le, rhs);
    }

    if mode.is_energy_aware() {
        let big25 = 1.0 + (flows.len() * nx) as f64;
        for i in 0..n {
            let usage: Vec<(String, f64)> = (0..flows.len())
                .flat_map(|f| (0..nx).map(move |x| (u(f, i, x), -1.0)))
                .collect();
            let mut t = vec![(o(i), 1.0)];
            t.extend(usage.iter().cloned());
            b.row(format!("eq21_{}", i + 1), t, Sense::Le, 0.0);
            let mut t = vec![(o(i), big25)];
            t.extend(usage);
            b.row(format!("eq25_{}", i + 1), t, Sense::Ge, 0.0);
        }
    }

    // Objective.
    let mut obj: Vec<(String, f64)> = Vec::new();
    let mut constant = 0.0;
    match mode {
        ProblemMode::Sfra => {
            for f in 0..flows.len() {
                obj.extend(links.iter().map(|&(i, j)| (r(f, i, j), 1.0)));
            }
        }
        ProblemMode::EnergySfra(h) => {
            for i in 0..n {
                let c = if h.previously_on(state.server_states[i]) {
                    0.0
                } else {
                    h.energy_prime(&network.servers[i])
                };
                obj.push((o(i), c));
            }
        }
        ProblemMode::Grr(h) => {
            let norm = if n > 1 { ((n - 1) * flows.len()) as f64 } else { 0.0 };
            if norm > 0.0 && config.alpha > 0.0 {
                let w = config.alpha / norm;
                for f in 0..flows.len() {
                    let m = state.installed_route(f).map(|r| r.edge_set()).unwrap_or_default();
                    for &(i, j) in &links {
                        let installed = m.contains(&(i, j));
                        obj.push((r(f, i, j), if installed { -w } else { w }));
                        if installed {
                            constant += w;
                        }
                    }
                    // Installed entries off the link set cannot be matched.
                    constant += w * m.iter().filter(|&&(i, j)| !topo.has_link(i, j)).count() as f64;
                }
            }
            let total: f64 = network.servers.iter().map(|s| h.energy_prime(s)).sum();
            for i in 0..n {
                let c = if total > 0.0 {
                    (1.0 - config.alpha) * h.energy_prime(&network.servers[i]) / total
                } else {
                    0.0
                };
                obj.push((o(i), c));
            }
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "\\ sfc model, {} flows, {} nodes, {} VNF types", flows.len(), n, nx);
    out.push_str("Minimize\n obj: ");
    if obj.is_empty() {
        out.push('0');
    } else {
        write_terms(&mut out, &obj);
    }
    if constant != 0.0 {
        let _ = write!(out, " + {constant}");
    }
    out.push_str("\nSubject To\n");
    for row in &b.rows {
        let _ = write!(out, " {}: ", row.name);
        write_terms(&mut out, &row.terms);
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", row.rhs);
    }

    let mut generals = Vec::new();
    let mut binaries = Vec::new();
    for (f, flow) in flows.iter().enumerate() {
        for &(i, j) in &links {
            binaries.push(r(f, i, j));
            generals.push(q(f, i, j));
        }
        generals.push(q(f, flow.destination, flow.destination));
        for i in 0..n {
            for x in 0..nx {
                binaries.push(u(f, i, x));
            }
        }
    }
    if mode.is_energy_aware() {
        binaries.extend((0..n).map(o));
    }
    out.push_str("Bounds\n");
    for g in &generals {
        let _ = writeln!(out, " {g} >= 0");
    }
    if !generals.is_empty() {
        out.push_str("General\n");
        for g in &generals {
            let _ = writeln!(out, " {g}");
        }
    }
    if !binaries.is_empty() {
        out.push_str("Binary\n");
        for v in &binaries {
            let _ = writeln!(out, " {v}");
        }
    }
    out.push_str("End\n");
    Ok(out)
}

/// Number of rows in an exported model (lines inside `Subject To`).
pub fn row_count(lp: &str) -> usize {
    lp.lines()
        .skip_while(|l| !l.starts_with("Subject To"))
        .skip(1)
        .take_while(|l| l.starts_with(' '))
        .count()
}
