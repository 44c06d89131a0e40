//! Text formats for hypergraphs and label vectors.
//!
//! Hypergraph: a header `n K q_1 .. q_K`, then one line `k v_1 .. v_q` per
//! hyperedge (0-based layer, sorted 0-based vertices), layer-major in
//! canonical order. Labels: one 0-based label per line.

use std::fmt::Write as _;
use std::path::Path;

use crate::hypergraph::{Assignment, LayeredHypergraph};
use crate::{Error, Result};

pub fn format_hypergraph(g: &LayeredHypergraph) -> String {
    let mut s = String::new();
    write!(s, "{} {}", g.n(), g.num_layers()).unwrap();
    for &q in g.q_sizes() {
        write!(s, " {q}").unwrap();
    }
    s.push('\n');
    for k in 0..g.num_layers() {
        for e in g.edges(k) {
            write!(s, "{k}").unwrap();
            for v in e {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
    }
    s
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn numbers(line: usize, text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| parse_err(line, format!("{t:?}: {e}")))
        })
        .collect()
}

pub fn parse_hypergraph(text: &str) -> Result<LayeredHypergraph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let h = numbers(hl, header)?;
    if h.len() < 2 || h.len() != 2 + h[1] {
        return Err(parse_err(hl, "header must be `n K q_1 .. q_K`"));
    }
    let (n, k_layers) = (h[0], h[1]);
    let q_sizes = h[2..].to_vec();
    let mut layers: Vec<Vec<Vec<u32>>> = vec![Vec::new(); k_layers];
    for (ln, l) in lines {
        let v = numbers(ln, l)?;
        let k = v[0];
        if k >= k_layers {
            return Err(parse_err(ln, format!("layer {k} out of range")));
        }
        if v.len() != 1 + q_sizes[k] {
            return Err(parse_err(ln, format!("expected {} vertices", q_sizes[k])));
        }
        if v[1..].iter().any(|&x| x >= n || x > u32::MAX as usize) {
            return Err(parse_err(ln, format!("vertex out of range 0..{n}")));
        }
        layers[k].push(v[1..].iter().map(|&x| x as u32).collect());
    }
    LayeredHypergraph::new(n, q_sizes, layers)
}

pub fn read_hypergraph(path: &Path) -> Result<LayeredHypergraph> {
    parse_hypergraph(&std::fs::read_to_string(path)?)
}

pub fn write_hypergraph(path: &Path, g: &LayeredHypergraph) -> Result<()> {
    std::fs::write(path, format_hypergraph(g))?;
    Ok(())
}

pub fn format_labels(a: &Assignment) -> String {
    let mut s = String::with_capacity(a.len() * 2);
    for l in &a.labels {
        writeln!(s, "{l}").unwrap();
    }
    s
}

pub fn parse_labels(text: &str) -> Result<Assignment> {
    let labels = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<u32>()
                .map_err(|e| parse_err(i + 1, format!("{l:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Assignment { labels })
}

pub fn read_labels(path: &Path) -> Result<Assignment> {
    parse_labels(&std::fs::read_to_string(path)?)
}

pub fn write_labels(path: &Path, a: &Assignment) -> Result<()> {
    std::fs::write(path, format_labels(a))?;
    Ok(())
}
