//! Immutable tumour snapshots and their text format.
//!
//! Snapshot file:
//!
//! ```text
//! step=<n> dims=<x>,<y>,<z>
//! <id>,<kind>,<x>,<y>,<z>,<dormant>
//! ...
//! ```
//!
//! `kind` is one of `CC`, `CSC`, `VP`, `NEC`; `dormant` is `0` or `1`. Agent
//! lines appear in id order. Lines end with `\n`.
//!
//! The oxygen sidecar holds one value per line in row-major order (`z`
//! fastest), printed with Rust's shortest round-trip `f64` formatting, so a
//! write/read cycle is lossless.

use std::io::{BufRead, Write};

use super::oxygen::OxygenField;
use super::{Agent, AgentType, TypeCounts};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TumourSnapshot {
    pub step: u64,
    pub dims: [usize; 3],
    pub agents: Vec<Agent>,
    pub oxygen: Option<OxygenField<f64>>,
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        what: "snapshot",
        line,
        reason: reason.into(),
    }
}

impl TumourSnapshot {
    pub fn type_counts(&self) -> TypeCounts {
        TypeCounts::from_agents(&self.agents)
    }

    pub fn agents_of(&self, kind: AgentType) -> impl Iterator<Item = &Agent> + '_ {
        self.agents.iter().filter(move |a| a.kind == kind)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let [x, y, z] = self.dims;
        writeln!(out, "step={} dims={x},{y},{z}", self.step)?;
        for a in &self.agents {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                a.id,
                a.kind.code(),
                a.pos[0],
                a.pos[1],
                a.pos[2],
                u8::from(a.dormant)
            )?;
        }
        Ok(())
    }

    pub fn write_oxygen<W: Write>(&self, mut out: W) -> Result<()> {
        if let Some(field) = &self.oxygen {
            for v in field.values() {
                writeln!(out, "{v}")?;
            }
        }
        Ok(())
    }

    /// Parse a snapshot file. The oxygen field is left empty.
    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
        let (step, dims) = parse_header(&header?).map_err(|r| parse_err(1, r))?;
        let mut agents = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (i, line) in lines {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let agent = parse_agent(&line, dims).map_err(|r| parse_err(lineno, r))?;
            if !seen.insert(agent.pos) {
                return Err(parse_err(lineno, format!("voxel {:?} occupied twice", agent.pos)));
            }
            agents.push(agent);
        }
        Ok(Self {
            step,
            dims,
            agents,
            oxygen: None,
        })
    }

    /// Attach an oxygen sidecar to a parsed snapshot.
    pub fn read_oxygen<R: BufRead>(&mut self, input: R) -> Result<()> {
        let mut values = Vec::with_capacity(self.dims.iter().product());
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: f64 = line.trim().parse().map_err(|_| Error::Parse {
                what: "oxygen field",
                line: i + 1,
                reason: format!("not a number: {line:?}"),
            })?;
            values.push(v);
        }
        let n = values.len();
        self.oxygen = Some(OxygenField::from_values(self.dims, values).ok_or_else(|| Error::Parse {
            what: "oxygen field",
            line: n,
            reason: format!("expected {} values", self.dims.iter().product::<usize>()),
        })?);
        Ok(())
    }
}

fn parse_header(line: &str) -> std::result::Result<(u64, [usize; 3]), String> {
    let mut step = None;
    let mut dims = None;
    for field in line.split_whitespace() {
        match field.split_once('=') {
            Some(("step", v)) => step = Some(v.parse().map_err(|_| format!("bad step {v:?}"))?),
            Some(("dims", v)) => {
                let parts: Vec<usize> = v
                    .split(',')
                    .map(|p| p.parse().map_err(|_| format!("bad dims {v:?}")))
                    .collect::<std::result::Result<_, _>>()?;
                if parts.len() != 3 || parts.contains(&0) {
                    return Err(format!("bad dims {v:?}"));
                }
                dims = Some([parts[0], parts[1], parts[2]]);
            }
            _ => return Err(format!("unexpected header field {field:?}")),
        }
    }
    Ok((step.ok_or("missing step")?, dims.ok_or("missing dims")?))
}

fn parse_agent(line: &str, dims: [usize; 3]) -> std::result::Result<Agent, String> {
    let fields: Vec<&str> = line.trim().split(',').collect();
    if fields.len() != 6 {
        return Err(format!("expected 6 fields, found {}", fields.len()));
    }
    let id = fields[0].parse().map_err(|_| format!("bad id {:?}", fields[0]))?;
    let kind = AgentType::from_code(fields[1]).ok_or_else(|| format!("unknown kind {:?}", fields[1]))?;
    let mut pos = [0i32; 3];
    for k in 0..3 {
        let c: i32 = fields[2 + k].parse().map_err(|_| format!("bad coordinate {:?}", fields[2 + k]))?;
        if c < 0 || c as usize >= dims[k] {
            return Err(format!("coordinate {c} outside lattice"));
        }
        pos[k] = c;
    }
    let dormant = match fields[5] {
        "0" => false,
        "1" => true,
        other => return Err(format!("bad dormant flag {other:?}")),
    };
    Ok(Agent {
        id,
        kind,
        pos,
        dormant,
        vp_direction: None,
        vp_tip: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn agent(id: u64, kind: AgentType, pos: [i32; 3]) -> Agent {
        Agent {
            id,
            kind,
            pos,
            dormant: kind == AgentType::Csc,
            vp_direction: None,
            vp_tip: false,
        }
    }

    fn sample() -> TumourSnapshot {
        TumourSnapshot {
            step: 7,
            dims: [3, 2, 2],
            agents: vec![
                agent(0, AgentType::Cc, [1, 1, 1]),
                agent(1, AgentType::Vp, [0, 0, 0]),
                agent(2, AgentType::Csc, [2, 1, 0]),
                agent(3, AgentType::Necrotic, [2, 0, 1]),
            ],
            oxygen: OxygenField::from_values([3, 2, 2], (0..12).map(|i| 0.1 * i as f64 + 1e-17).collect()),
        }
    }

    #[test]
    fn text_format_is_exact() {
        let mut buf = Vec::new();
        sample().write(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "step=7 dims=3,2,2\n0,CC,1,1,1,0\n1,VP,0,0,0,0\n2,CSC,2,1,0,1\n3,NEC,2,0,1,0\n"
        );
    }

    #[test]
    fn round_trip_with_oxygen() {
        let snap = sample();
        let (mut text, mut o2) = (Vec::new(), Vec::new());
        snap.write(&mut text).unwrap();
        snap.write_oxygen(&mut o2).unwrap();
        let mut back = TumourSnapshot::read(text.as_slice()).unwrap();
        back.read_oxygen(o2.as_slice()).unwrap();
        assert_eq!(back.agents, snap.agents);
        assert_eq!(back.oxygen, snap.oxygen);
        assert_eq!(back.type_counts().get(AgentType::Necrotic), 1);
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let bad = "step=0 dims=4,4,4\n0,CC,1,1,1,0\n1,XX,0,0,0,0\n";
        match TumourSnapshot::read(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let outside = "step=0 dims=4,4,4\n0,CC,4,1,1,0\n";
        assert!(TumourSnapshot::read(outside.as_bytes()).is_err());
        let dup = "step=0 dims=4,4,4\n0,CC,1,1,1,0\n1,VP,1,1,1,0\n";
        assert!(TumourSnapshot::read(dup.as_bytes()).is_err());
        assert!(TumourSnapshot::read("dims=1,1\n".as_bytes()).is_err());
        assert!(TumourSnapshot::read("".as_bytes()).is_err());
    }

    #[test]
    fn short_oxygen_sidecar_rejected() {
        let mut snap = sample();
        assert!(snap.read_oxygen("1.0\n2.0\n".as_bytes()).is_err());
    }
}
