//! Penetration-depth statistics and 1-D tissue scenarios.
//!
//! A scenario is a chain of compartments starting at a vessel point. Chains
//! are cut from a tumour snapshot along lattice-axis rays, or taken from the
//! two fixed worst cases.
//!
//! Scenario file: one scenario per line, the id followed by one token per
//! compartment (`V` vessel, `C` cancer cell, `S` stem cell, `E` matrix),
//! separated by single spaces.

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use crate::tumour::{AgentType, Direction, TumourSnapshot};

/// Compartment edge length in metres.
pub const COMPARTMENT_LENGTH_M: f64 = 10e-6;
/// Compartment edge length in micrometres.
pub const VOXEL_UM: f64 = 10.0;
/// Cells behind the vessel in a default scenario.
pub const DEFAULT_DEPTH_CELLS: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompartmentKind {
    Vp,
    Cc,
    Csc,
    Ecm,
}

impl CompartmentKind {
    pub fn token(self) -> char {
        match self {
            CompartmentKind::Vp => 'V',
            CompartmentKind::Cc => 'C',
            CompartmentKind::Csc => 'S',
            CompartmentKind::Ecm => 'E',
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "V" => Some(CompartmentKind::Vp),
            "C" => Some(CompartmentKind::Cc),
            "S" => Some(CompartmentKind::Csc),
            "E" => Some(CompartmentKind::Ecm),
            _ => None,
        }
    }

    pub fn is_cell(self) -> bool {
        matches!(self, CompartmentKind::Cc | CompartmentKind::Csc)
    }

    /// Necrotic voxels and empty space both read as matrix.
    pub fn from_agent(kind: Option<AgentType>) -> Self {
        match kind {
            Some(AgentType::Vp) => CompartmentKind::Vp,
            Some(AgentType::Cc) => CompartmentKind::Cc,
            Some(AgentType::Csc) => CompartmentKind::Csc,
            Some(AgentType::Necrotic) | None => CompartmentKind::Ecm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub compartments: Vec<CompartmentKind>,
    /// Metres.
    pub length_per_compartment: f64,
}

impl Scenario {
    pub fn new(id: impl Into<String>, compartments: Vec<CompartmentKind>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig(format!("scenario id {id:?} must be a non-empty word")));
        }
        if compartments.len() < 2 {
            return Err(Error::InvalidConfig(format!("scenario {id} needs at least 2 compartments")));
        }
        if compartments[0] != CompartmentKind::Vp {
            return Err(Error::InvalidConfig(format!("scenario {id} must start at a vessel")));
        }
        Ok(Self {
            id,
            compartments,
            length_per_compartment: COMPARTMENT_LENGTH_M,
        })
    }

    pub fn len(&self) -> usize {
        self.compartments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.compartments.is_empty()
    }

    pub fn count(&self, kind: CompartmentKind) -> usize {
        self.compartments.iter().filter(|&&k| k == kind).count()
    }

    /// `[VP, CC × 22]`.
    pub fn worst_case_homogeneous() -> Self {
        let mut c = vec![CompartmentKind::Cc; DEFAULT_DEPTH_CELLS + 1];
        c[0] = CompartmentKind::Vp;
        Self::new("worst_homogeneous", c).expect("valid constant scenario")
    }

    /// `[VP, CC × 22]` with stem cells 140 μm and 180 μm from the vessel.
    pub fn worst_case_heterogeneous() -> Self {
        let mut c = Self::worst_case_homogeneous().compartments;
        c[14] = CompartmentKind::Csc;
        c[18] = CompartmentKind::Csc;
        Self::new("worst_heterogeneous", c).expect("valid constant scenario")
    }

    pub fn parse_line(line: &str, lineno: usize) -> Result<Self> {
        let err = |reason: String| Error::Parse {
            what: "scenario file",
            line: lineno,
            reason,
        };
        let mut tokens = line.split_whitespace();
        let id = tokens.next().ok_or_else(|| err("missing id".into()))?;
        let compartments = tokens
            .map(|t| CompartmentKind::from_token(t).ok_or_else(|| err(format!("unknown token {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(id, compartments).map_err(|e| err(e.to_string()))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)?;
        for c in &self.compartments {
            write!(f, " {}", c.token())?;
        }
        Ok(())
    }
}

pub fn write_scenarios<W: Write>(mut out: W, scenarios: &[Scenario]) -> Result<()> {
    for s in scenarios {
        writeln!(out, "{s}")?;
    }
    Ok(())
}

/// Blank lines are skipped.
pub fn read_scenarios<R: BufRead>(input: R) -> Result<Vec<Scenario>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(Scenario::parse_line(&line, i + 1)?);
        }
    }
    Ok(out)
}

/// Distances from every live cell to its nearest vessel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthStats {
    /// μm, in snapshot agent order (CC and CSC only).
    pub distances: Vec<f64>,
    /// Nearest-rank 95th percentile, μm.
    pub p95: f64,
    /// `ceil(p95 / 10 μm)`.
    pub depth_cells: usize,
}

/// Nearest-rank percentile of an ascending slice: the `ceil(q·n)`-th value.
pub fn nearest_rank<T: Copy>(sorted: &[T], q: f64) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Smallest `m` with `m² ≥ n`.
fn ceil_sqrt(n: u64) -> u64 {
    let mut m = (n as f64).sqrt() as u64;
    while m * m < n {
        m += 1;
    }
    while m > 0 && (m - 1) * (m - 1) >= n {
        m -= 1;
    }
    m
}

/// 1-D squared distance transform of `f` in place (lower envelope of
/// parabolas).
fn edt_1d(f: &mut [f64], v: &mut [usize], z: &mut [f64], d: &mut [f64]) {
    let n = f.len();
    let Some(first) = f.iter().position(|x| x.is_finite()) else {
        return;
    };
    let meet = |f: &[f64], q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64))
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s = meet(f, q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = meet(f, q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
    }
    f.copy_from_slice(&d[..n]);
}

/// Squared voxel distance from every voxel to the nearest seed voxel.
fn squared_distance_field(dims: [usize; 3], seeds: impl Iterator<Item = [i32; 3]>) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    let idx = |x: usize, y: usize, z: usize| (x * ny + y) * nz + z;
    let mut field = vec![f64::INFINITY; nx * ny * nz];
    for s in seeds {
        field[idx(s[0] as usize, s[1] as usize, s[2] as usize)] = 0.0;
    }
    let n = nx.max(ny).max(nz);
    let (mut line, mut v, mut z, mut d) = (vec![0.0; n], vec![0usize; n], vec![0.0; n + 1], vec![0.0; n]);
    let mut pass = |len: usize, at: &dyn Fn(usize, usize, usize) -> usize, outer: (usize, usize)| {
        for a in 0..outer.0 {
            for b in 0..outer.1 {
                for i in 0..len {
                    line[i] = field[at(a, b, i)];
                }
                edt_1d(&mut line[..len], &mut v, &mut z, &mut d);
                for i in 0..len {
                    field[at(a, b, i)] = line[i];
                }
            }
        }
    };
    pass(nz, &|x, y, i| idx(x, y, i), (nx, ny));
    pass(ny, &|x, z, i| idx(x, i, z), (nx, nz));
    pass(nx, &|y, z, i| idx(i, y, z), (ny, nz));
    field
}

/// Minimum Euclidean distance from each CC and CSC to any vessel point.
pub fn depth_stats(snapshot: &TumourSnapshot) -> Result<DepthStats> {
    if snapshot.agents_of(AgentType::Vp).next().is_none() {
        return Err(Error::MissingAgents("VP"));
    }
    let cells: Vec<[i32; 3]> = snapshot
        .agents
        .iter()
        .filter(|a| a.kind.is_live_cell())
        .map(|a| a.pos)
        .collect();
    if cells.is_empty() {
        return Err(Error::MissingAgents("CC"));
    }
    let field = squared_distance_field(snapshot.dims, snapshot.agents_of(AgentType::Vp).map(|a| a.pos));
    let [_, ny, nz] = snapshot.dims;
    let mut squared: Vec<u64> = cells
        .iter()
        .map(|p| field[(p[0] as usize * ny + p[1] as usize) * nz + p[2] as usize] as u64)
        .collect();
    let distances = squared.iter().map(|&d2| (d2 as f64).sqrt() * VOXEL_UM).collect();
    squared.sort_unstable();
    let p95_sq = nearest_rank(&squared, 0.95).expect("non-empty");
    Ok(DepthStats {
        distances,
        p95: (p95_sq as f64).sqrt() * VOXEL_UM,
        depth_cells: ceil_sqrt(p95_sq) as usize,
    })
}

/// Cut `n` scenarios of `depth_cells + 1` compartments along random axis
/// rays from random vessel points. Voxels beyond the lattice read as matrix.
pub fn extract_scenarios(snapshot: &TumourSnapshot, n: usize, depth_cells: usize, seed: u64) -> Result<Vec<Scenario>> {
    if depth_cells == 0 {
        return Err(Error::InvalidConfig("scenario depth must be at least 1 cell".into()));
    }
    let vessels: Vec<[i32; 3]> = snapshot.agents_of(AgentType::Vp).map(|a| a.pos).collect();
    if vessels.is_empty() {
        return Err(Error::MissingAgents("VP"));
    }
    let [nx, ny, nz] = snapshot.dims;
    let mut grid: Vec<Option<AgentType>> = vec![None; nx * ny * nz];
    let index = |p: [i32; 3]| -> Option<usize> {
        let inside = |c: i32, n: usize| c >= 0 && (c as usize) < n;
        (inside(p[0], nx) && inside(p[1], ny) && inside(p[2], nz))
            .then(|| (p[0] as usize * ny + p[1] as usize) * nz + p[2] as usize)
    };
    for a in &snapshot.agents {
        if let Some(i) = index(a.pos) {
            grid[i] = Some(a.kind);
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let start = vessels[rng.random_range(0..vessels.len())];
        let dir = Direction::random(&mut rng);
        let mut pos = start;
        let mut compartments = vec![CompartmentKind::Vp];
        for _ in 0..depth_cells {
            pos = dir.step(pos);
            compartments.push(CompartmentKind::from_agent(index(pos).and_then(|i| grid[i])));
        }
        out.push(Scenario::new(format!("s{s}"), compartments)?);
    }
    Ok(out)
}
