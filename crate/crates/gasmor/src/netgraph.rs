//! Network topology: `.net` parsing, boundary classification, CFL refinement and
//! incidence matrices.

use crate::error::{Error, Result};
use crate::linalg::Csr;
use crate::scalar::Scalar;
use std::collections::{HashMap, HashSet, VecDeque};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Pipe,
    Shortcut,
    Compressor,
    Valve,
}

impl EdgeKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pipe" => Some(EdgeKind::Pipe),
            "shortcut" => Some(EdgeKind::Shortcut),
            "compressor" => Some(EdgeKind::Compressor),
            "valve" => Some(EdgeKind::Valve),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Pipe => "pipe",
            EdgeKind::Shortcut => "shortcut",
            EdgeKind::Compressor => "compressor",
            EdgeKind::Valve => "valve",
        }
    }
}

/// Directed edge between two node indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub kind: EdgeKind,
    pub from: usize,
    pub to: usize,
    /// meters
    pub length: f64,
    /// meters
    pub diameter: f64,
    /// height difference h(to) − h(from), meters
    pub incline: f64,
    /// meters
    pub roughness: f64,
}

impl Edge {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeRole {
    Supply,
    Demand,
    Internal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub supply: Vec<usize>,
    pub demand: Vec<usize>,
    pub internal: Vec<usize>,
}

impl Network {
    pub fn role(&self, node: usize) -> NodeRole {
        if self.supply.contains(&node) {
            NodeRole::Supply
        } else if self.demand.contains(&node) {
            NodeRole::Demand
        } else {
            NodeRole::Internal
        }
    }

    pub fn count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Indices of edges of the given kind in edge order.
    pub fn edges_of(&self, kind: EdgeKind) -> Vec<usize> {
        self.edges.iter().enumerate().filter(|(_, e)| e.kind == kind).map(|(i, _)| i).collect()
    }

    /// Canonical text form used for hashing.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for e in &self.edges {
            s.push_str(&format!(
                "{},{},{},{:e},{:e},{:e},{:e}\n",
                e.kind.as_str(),
                self.nodes[e.from],
                self.nodes[e.to],
                e.length,
                e.diameter,
                e.incline,
                e.roughness
            ));
        }
        s
    }
}

fn parse_num(field: &str, line: usize, name: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse { line, msg: format!("cannot parse {name} `{}`", field.trim()) })
}

/// Parses a `.net` CSV document and classifies its boundary nodes.
pub fn parse_net(text: &str) -> Result<Network> {
    let mut nodes: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut seen: HashSet<(usize, usize, EdgeKind)> = HashSet::new();
    let mut node_id = |name: &str, nodes: &mut Vec<String>| -> usize {
        if let Some(&i) = index.get(name) {
            return i;
        }
        nodes.push(name.to_string());
        index.insert(name.to_string(), nodes.len() - 1);
        nodes.len() - 1
    };
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = t.split(',').collect();
        if f.len() != 7 {
            return Err(Error::Parse { line, msg: format!("expected 7 fields, found {}", f.len()) });
        }
        let kind = EdgeKind::parse(f[0])
            .ok_or_else(|| Error::Parse { line, msg: format!("unknown edge kind `{}`", f[0].trim()) })?;
        let (a, b) = (f[1].trim(), f[2].trim());
        if a.is_empty() || b.is_empty() {
            return Err(Error::Parse { line, msg: "empty node id".into() });
        }
        if a == b {
            return Err(Error::Parse { line, msg: format!("self loop at `{a}`") });
        }
        let length = parse_num(f[3], line, "length")?;
        let diameter = parse_num(f[4], line, "diameter")?;
        let incline = parse_num(f[5], line, "incline")?;
        let roughness = parse_num(f[6], line, "roughness")?;
        if kind == EdgeKind::Pipe && (length <= 0.0 || diameter <= 0.0) {
            return Err(Error::Parse { line, msg: "pipe length and diameter must be positive".into() });
        }
        if roughness < 0.0 || length < 0.0 || diameter < 0.0 {
            return Err(Error::Parse { line, msg: "negative geometry value".into() });
        }
        let from = node_id(a, &mut nodes);
        let to = node_id(b, &mut nodes);
        if !seen.insert((from, to, kind)) {
            return Err(Error::Parse { line, msg: format!("duplicate {} edge {a} -> {b}", kind.as_str()) });
        }
        edges.push(Edge { kind, from, to, length, diameter, incline, roughness });
    }
    if edges.is_empty() {
        return Err(Error::Parse { line: 0, msg: "network has no edges".into() });
    }
    classify_boundary(Network { nodes, edges, supply: vec![], demand: vec![], internal: vec![] })
}

/// Marks leaves with a single outgoing edge as supply, with a single incoming edge as
/// demand; everything else is internal. Requires a connected graph.
pub fn classify_boundary(net: Network) -> Result<Network> {
    let n = net.nodes.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut out_deg = vec![0usize; n];
    let mut in_deg = vec![0usize; n];
    for e in &net.edges {
        adj[e.from].push(e.to);
        adj[e.to].push(e.from);
        out_deg[e.from] += 1;
        in_deg[e.to] += 1;
    }
    if let Some(i) = (0..n).find(|&i| adj[i].is_empty()) {
        return Err(Error::Topology(format!("isolated node `{}`", net.nodes[i])));
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Topology("graph is not connected".into()));
    }
    let (mut supply, mut demand, mut internal) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        match (in_deg[i], out_deg[i]) {
            (0, 1) => supply.push(i),
            (1, 0) => demand.push(i),
            _ => internal.push(i),
        }
    }
    for e in &net.edges {
        if supply.contains(&e.from) && supply.contains(&e.to) {
            return Err(Error::Topology(format!(
                "supplies `{}` and `{}` are directly connected",
                net.nodes[e.from], net.nodes[e.to]
            )));
        }
    }
    if supply.is_empty() {
        return Err(Error::Topology("network has no supply node".into()));
    }
    Ok(Network { supply, demand, internal, ..net })
}

/// CFL-driven nominal pipe length Δx = (1 − eps)·v_max·dt.
pub fn nominal_length(dt: f64, v_max: f64, eps: f64) -> Result<f64> {
    if !(dt > 0.0 && v_max > 0.0 && (0.0..1.0).contains(&eps)) {
        return Err(Error::Invalid(format!("nominal_length(dt={dt}, v_max={v_max}, eps={eps})")));
    }
    Ok((1.0 - eps) * v_max * dt)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementResult {
    pub refined: Network,
    /// Friction multiplier per refined edge.
    pub friction_scale: Vec<f64>,
    /// Original edge index per refined edge.
    pub virtual_of: Vec<usize>,
    pub dx: f64,
}

/// Splits pipes into segments of nominal length `dx`. Remainders are rounded up to a
/// full segment whose friction is scaled by remainder/dx; shortcuts, open valves and
/// compressors become single frictionless nominal-length edges.
pub fn refine(net: &Network, dx: f64) -> RefinementResult {
    assert!(dx > 0.0, "refine needs dx > 0");
    let mut nodes = net.nodes.clone();
    let mut edges = Vec::new();
    let mut friction_scale = Vec::new();
    let mut virtual_of = Vec::new();
    for (k, e) in net.edges.iter().enumerate() {
        match e.kind {
            EdgeKind::Pipe => {
                let ratio = e.length / dx;
                let mut nfull = ratio.floor() as usize;
                let mut rem = e.length - nfull as f64 * dx;
                if (ratio - ratio.round()).abs() < 1e-9 {
                    nfull = ratio.round() as usize;
                    rem = 0.0;
                }
                let mut pieces: Vec<f64> = vec![dx; nfull];
                if rem > 0.0 {
                    pieces.push(rem);
                }
                let count = pieces.len();
                let mut prev = e.from;
                for (s, piece) in pieces.iter().enumerate() {
                    let next = if s + 1 == count {
                        e.to
                    } else {
                        nodes.push(format!("{}~{}~{}", net.nodes[e.from], k, s + 1));
                        nodes.len() - 1
                    };
                    edges.push(Edge {
                        kind: EdgeKind::Pipe,
                        from: prev,
                        to: next,
                        length: dx,
                        diameter: e.diameter,
                        incline: e.incline * piece / e.length,
                        roughness: e.roughness,
                    });
                    friction_scale.push(piece / dx);
                    virtual_of.push(k);
                    prev = next;
                }
            }
            EdgeKind::Shortcut | EdgeKind::Valve | EdgeKind::Compressor => {
                let kind = if e.kind == EdgeKind::Compressor { EdgeKind::Compressor } else { EdgeKind::Shortcut };
                edges.push(Edge {
                    kind,
                    from: e.from,
                    to: e.to,
                    length: dx,
                    diameter: if e.diameter > 0.0 { e.diameter } else { 1.0 },
                    incline: 0.0,
                    roughness: e.roughness,
                });
                friction_scale.push(0.0);
                virtual_of.push(k);
            }
        }
    }
    let mut internal = net.internal.clone();
    internal.extend(net.nodes.len()..nodes.len());
    let refined = Network { nodes, edges, supply: net.supply.clone(), demand: net.demand.clone(), internal };
    RefinementResult { refined, friction_scale, virtual_of, dx }
}

/// Incidence matrix and its derived partial/reduced forms.
#[derive(Clone, Debug)]
pub struct TopologyMatrices<T: Scalar> {
    pub a: Csr<T>,
    pub a0: Csr<T>,
    pub ar: Csr<T>,
    pub al: Csr<T>,
    pub a0r: Csr<T>,
    pub a0l: Csr<T>,
    /// Supply rows of `a` (|N_S| × |E|).
    pub bs: Csr<T>,
    /// Demand port map (|N| × |N_D|).
    pub bd: Csr<T>,
    /// Demand port map restricted to non-supply rows (rows of `a0`).
    pub bd0: Csr<T>,
    /// Node index of each row of `a0`.
    pub a0_rows: Vec<usize>,
    /// Row of `a0` for each node (`None` for supplies).
    pub node_to_row: Vec<Option<usize>>,
}

pub fn incidence<T: Scalar>(net: &Network) -> TopologyMatrices<T> {
    let n = net.nodes.len();
    let m = net.edges.len();
    let one = T::one();
    let mut ta = Vec::with_capacity(2 * m);
    let mut tr = Vec::with_capacity(m);
    let mut tl = Vec::with_capacity(m);
    for (k, e) in net.edges.iter().enumerate() {
        ta.push((e.from, k, -one));
        ta.push((e.to, k, one));
        tr.push((e.to, k, one));
        tl.push((e.from, k, -one));
    }
    let a = Csr::from_triplets(n, m, &ta);
    let ar = Csr::from_triplets(n, m, &tr);
    let al = Csr::from_triplets(n, m, &tl);
    let a0_rows: Vec<usize> = (0..n).filter(|i| !net.supply.contains(i)).collect();
    let mut node_to_row = vec![None; n];
    for (r, &i) in a0_rows.iter().enumerate() {
        node_to_row[i] = Some(r);
    }
    let td: Vec<_> = net.demand.iter().enumerate().map(|(k, &i)| (i, k, one)).collect();
    let bd = Csr::from_triplets(n, net.demand.len(), &td);
    TopologyMatrices {
        a0: a.select_rows(&a0_rows),
        a0r: ar.select_rows(&a0_rows),
        a0l: al.select_rows(&a0_rows),
        bs: a.select_rows(&net.supply),
        bd0: bd.select_rows(&a0_rows),
        a,
        ar,
        al,
        bd,
        a0_rows,
        node_to_row,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_parse() {
        let net = parse_net("pipe,n1,n2,1000,0.5,0,1e-5").unwrap();
        assert_eq!(net.nodes.len(), 2);
        assert_eq!(net.edges.len(), 1);
        assert_eq!(net.edges[0].kind, EdgeKind::Pipe);
        assert_eq!(net.supply, vec![0]);
        assert_eq!(net.demand, vec![1]);
    }

    #[test]
    fn arity_and_kind_errors() {
        assert!(matches!(parse_net("pipe,n1,n2,1000"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_net("hose,n1,n2,1,1,0,0"), Err(Error::Parse { .. })));
        let dup = "pipe,a,b,1,1,0,0\npipe,a,b,2,1,0,0\n";
        assert!(parse_net(dup).is_err());
    }

    #[test]
    fn classify_path_and_components() {
        let net = parse_net("# c\npipe,n1,n2,1,1,0,0\npipe,n2,n3,1,1,0,0\n").unwrap();
        assert_eq!(net.supply, vec![0]);
        assert_eq!(net.demand, vec![2]);
        assert_eq!(net.internal, vec![1]);
        let two = "pipe,a,b,1,1,0,0\npipe,c,d,1,1,0,0\n";
        assert!(matches!(parse_net(two), Err(Error::Topology(_))));
        // leaf reached by an edge directed toward it is a demand
        let net = parse_net("pipe,s,x,1,1,0,0\npipe,x,y,1,1,0,0\npipe,z,x,1,1,0,0\npipe,x,w,1,1,0,0\n").unwrap();
        assert!(net.demand.contains(&2) && net.demand.contains(&4));
    }

    #[test]
    fn nominal_lengths() {
        assert!((nominal_length(60.0, 20.0, 0.01).unwrap() - 1188.0).abs() < 1e-9);
        assert!((nominal_length(20.0, 20.0, 0.01).unwrap() - 396.0).abs() < 1e-9);
        assert_eq!(nominal_length(60.0, 20.0, 0.0).unwrap(), 1200.0);
        assert!(nominal_length(0.0, 20.0, 0.01).is_err());
    }

    fn one_pipe(len: f64) -> Network {
        parse_net(&format!("pipe,a,b,{len},0.5,10,1e-5")).unwrap()
    }

    #[test]
    fn refine_examples() {
        let r = refine(&one_pipe(1000.0), 400.0);
        assert_eq!(r.friction_scale, vec![1.0, 1.0, 0.5]);
        assert!(r.refined.edges.iter().all(|e| e.length == 400.0));
        let inc: f64 = r.refined.edges.iter().map(|e| e.incline).sum();
        assert!((inc - 10.0).abs() < 1e-12);
        assert_eq!(refine(&one_pipe(400.0), 400.0).friction_scale, vec![1.0]);
        assert_eq!(refine(&one_pipe(100.0), 400.0).friction_scale, vec![0.25]);
        // chain connectivity
        let e = &r.refined.edges;
        assert_eq!(e[0].from, 0);
        assert_eq!(e[0].to, e[1].from);
        assert_eq!(e[2].to, 1);
    }

    #[test]
    fn incidence_example() {
        let net = parse_net("pipe,n1,n2,1,1,0,0\npipe,n2,n3,1,1,0,0\n").unwrap();
        let t = incidence::<f64>(&net);
        let a = nalgebra::DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 1.0, -1.0, 0.0, 1.0]);
        assert_eq!(t.a.to_dense(), a);
        assert_eq!(t.ar.to_dense(), nalgebra::DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]));
        assert_eq!(t.al.to_dense(), nalgebra::DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 0.0, 0.0]));
        assert_eq!(t.a0.nrows(), 2);
        assert_eq!(t.a0_rows, vec![1, 2]);
        assert_eq!(t.bs.to_dense(), nalgebra::DMatrix::from_row_slice(1, 2, &[-1.0, 0.0]));
    }
}
