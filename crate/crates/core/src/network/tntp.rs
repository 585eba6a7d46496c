//! Reader and writer for the TNTP plain-text network and trips formats.

use std::fmt::Write as _;

use super::{DemandTable, Graph, Network, NodeId};
use crate::error::{Error, Result};

/// A parsed TNTP net/trips pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TntpInstance {
    pub network: Network,
    pub demand: DemandTable,
    /// `<FIRST THRU NODE>`; recorded only, zone pass-through is not restricted.
    pub first_thru_node: u64,
    /// `<TOTAL OD FLOW>` as declared in the trips header.
    pub declared_total_flow: Option<f64>,
    /// Number of `d : flow` entries listed in the trips file, zeros included.
    pub listed_od_entries: usize,
}

impl TntpInstance {
    pub fn into_parts(self) -> (Network, DemandTable) {
        (self.network, self.demand)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Returns the tag and value of a `<TAG> value` metadata line.
fn metadata(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix('<')?;
    let close = rest.find('>')?;
    Some((rest[..close].trim(), rest[close + 1..].trim()))
}

fn number<T: std::str::FromStr>(token: &str, line: usize, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| parse_err(line, format!("invalid {what} '{token}'")))
}

/// Parses a TNTP network file and its trips file.
///
/// Free-flow cost is taken from the `free_flow_time` column and capacity from
/// `capacity`; the remaining columns are read but unused.
pub fn parse_tntp(net_text: &str, trips_text: &str) -> Result<TntpInstance> {
    let mut node_count: Option<usize> = None;
    let mut declared_links: Option<usize> = None;
    let mut first_thru_node = 1u64;
    let mut in_metadata = true;
    let mut links = Vec::new();
    let mut costs = Vec::new();
    let mut capacities = Vec::new();

    for (idx, raw) in net_text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        if in_metadata {
            let Some((tag, value)) = metadata(line) else {
                return Err(parse_err(lineno, "expected metadata line"));
            };
            match tag {
                "END OF METADATA" => in_metadata = false,
                "NUMBER OF NODES" => node_count = Some(number(value, lineno, "node count")?),
                "NUMBER OF LINKS" => declared_links = Some(number(value, lineno, "link count")?),
                "FIRST THRU NODE" => first_thru_node = number(value, lineno, "first thru node")?,
                _ => {}
            }
            continue;
        }
        let body = line.trim_end_matches(';');
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() < 5 {
            return Err(parse_err(
                lineno,
                format!("link row needs at least 5 columns, found {}", fields.len()),
            ));
        }
        let tail: u64 = number(fields[0], lineno, "init_node")?;
        let head: u64 = number(fields[1], lineno, "term_node")?;
        let capacity: f64 = number(fields[2], lineno, "capacity")?;
        let _length: f64 = number(fields[3], lineno, "length")?;
        let free_flow_time: f64 = number(fields[4], lineno, "free_flow_time")?;
        for (k, tok) in fields.iter().enumerate().skip(5) {
            // B, power, speed, toll, type: validated as numbers, otherwise unused
            let _: f64 = number(tok, lineno, &format!("column {}", k + 1))?;
        }
        let n = node_count.ok_or_else(|| parse_err(lineno, "missing <NUMBER OF NODES>"))?;
        let node = |label: u64| -> Result<NodeId> {
            if label >= 1 && label <= n as u64 {
                Ok(label as usize - 1)
            } else {
                Err(Error::Structure(format!(
                    "line {lineno}: link references unknown node {label}"
                )))
            }
        };
        if capacity < 0.0 || free_flow_time < 0.0 {
            return Err(Error::Validation(format!(
                "line {lineno}: negative capacity or free-flow time"
            )));
        }
        links.push((node(tail)?, node(head)?));
        capacities.push(capacity);
        costs.push(free_flow_time);
    }
    if in_metadata {
        return Err(parse_err(net_text.lines().count(), "missing <END OF METADATA>"));
    }
    let n = node_count.ok_or_else(|| parse_err(1, "missing <NUMBER OF NODES>"))?;
    if let Some(m) = declared_links {
        if m != links.len() {
            return Err(Error::Structure(format!(
                "header declares {m} links but {} rows were read",
                links.len()
            )));
        }
    }
    let graph = Graph::new(n, &links)?;
    let network = Network::new(graph, costs, capacities)?;

    let (demand, declared_total_flow, listed_od_entries) = parse_trips(trips_text, n)?;
    Ok(TntpInstance {
        network,
        demand,
        first_thru_node,
        declared_total_flow,
        listed_od_entries,
    })
}

fn parse_trips(text: &str, node_count: usize) -> Result<(DemandTable, Option<f64>, usize)> {
    let mut demand = DemandTable::new(node_count);
    let mut total = None;
    let mut in_metadata = true;
    let mut origin: Option<NodeId> = None;
    let mut listed = 0usize;
    let node = |label: u64, lineno: usize| -> Result<NodeId> {
        if label >= 1 && label <= node_count as u64 {
            Ok(label as usize - 1)
        } else {
            Err(Error::Structure(format!(
                "line {lineno}: trips reference unknown node {label}"
            )))
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        if in_metadata {
            let Some((tag, value)) = metadata(line) else {
                return Err(parse_err(lineno, "expected metadata line"));
            };
            match tag {
                "END OF METADATA" => in_metadata = false,
                "TOTAL OD FLOW" => total = Some(number(value, lineno, "total OD flow")?),
                _ => {}
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix("Origin") {
            let label: u64 = number(rest.trim(), lineno, "origin")?;
            origin = Some(node(label, lineno)?);
            continue;
        }
        let o = origin.ok_or_else(|| parse_err(lineno, "trip entry before any 'Origin' line"))?;
        for entry in line.split(';') {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (d, flow) = entry
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected 'dest : flow', got '{entry}'")))?;
            let d = node(number(d.trim(), lineno, "destination")?, lineno)?;
            let flow: f64 = number(flow.trim(), lineno, "flow")?;
            if flow < 0.0 {
                return Err(Error::Validation(format!("line {lineno}: negative trip flow")));
            }
            listed += 1;
            if d != o {
                demand.add(o, d, flow)?;
            }
        }
    }
    if in_metadata && !text.trim().is_empty() {
        return Err(parse_err(text.lines().count(), "missing <END OF METADATA>"));
    }
    Ok((demand, total, listed))
}

/// Serializes a network and demand table as TNTP net and trips texts.
///
/// Nodes are written with their dense position + 1 as TNTP id.
pub fn write_tntp(network: &Network, demand: &DemandTable) -> (String, String) {
    let n = network.node_count();
    let mut net = String::new();
    let _ = writeln!(net, "<NUMBER OF ZONES> {n}");
    let _ = writeln!(net, "<NUMBER OF NODES> {n}");
    let _ = writeln!(net, "<FIRST THRU NODE> 1");
    let _ = writeln!(net, "<NUMBER OF LINKS> {}", network.link_count());
    let _ = writeln!(net, "<END OF METADATA>\n");
    let _ = writeln!(
        net,
        "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;"
    );
    for (l, (i, j)) in network.graph.links().enumerate() {
        let c = network.free_flow_cost[l];
        let _ = writeln!(
            net,
            "\t{}\t{}\t{}\t{}\t{}\t0.15\t4\t0\t0\t1\t;",
            i + 1,
            j + 1,
            network.capacity[l],
            c,
            c
        );
    }

    let mut trips = String::new();
    let _ = writeln!(trips, "<NUMBER OF ZONES> {n}");
    let _ = writeln!(trips, "<TOTAL OD FLOW> {}", demand.total());
    let _ = writeln!(trips, "<END OF METADATA>\n");
    for o in demand.origins() {
        let _ = writeln!(trips, "Origin\t{}", o + 1);
        for (d, q) in demand.iter() {
            if q[o] > 0.0 {
                let _ = write!(trips, "{} : {};  ", d + 1, q[o]);
            }
        }
        trips.push_str("\n\n");
    }
    (net, trips)
}
