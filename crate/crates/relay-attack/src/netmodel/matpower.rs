//! Import of the MATPOWER case format (the subset of columns this crate needs).

use super::{Bus, BusId, GenId, Generator, Line, LineId, Network, NetworkError};
use std::collections::HashMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MatpowerError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: cannot parse number {token:?}")]
    Number { line: usize, token: String },
    #[error("missing section mpc.{0}")]
    Missing(&'static str),
    #[error("line {line}: mpc.{section} row has {got} columns, need at least {need}")]
    ShortRow { section: &'static str, line: usize, got: usize, need: usize },
    #[error("line {line}: unknown bus {bus}")]
    DanglingBus { line: usize, bus: f64 },
    #[error("line {line}: duplicate bus {bus}")]
    DuplicateBus { line: usize, bus: u64 },
    #[error("line {line}: invalid bus number {bus}")]
    BusNumber { line: usize, bus: f64 },
    #[error("line {line}: non-positive branch reactance {x}")]
    Reactance { line: usize, x: f64 },
    #[error("line {line}: negative demand {pd} MW")]
    NegativeDemand { line: usize, pd: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Handling of buses with negative PD (net injections modeled as loads).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeDemand {
    /// Set D_b = 0.
    #[default]
    Clamp,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParseOptions {
    pub negative_demand: NegativeDemand,
    /// Use |x| for branches with negative reactance instead of failing.
    /// Zero reactance is always an error.
    pub absolute_reactance: bool,
    /// Keep generators with GEN_STATUS = 0 as zero-capacity units instead
    /// of dropping them. Counts then follow the rows of the case file.
    pub keep_inactive_generators: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            negative_demand: NegativeDemand::Clamp,
            absolute_reactance: false,
            keep_inactive_generators: false,
        }
    }
}

/// What the importer changed or dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    pub dropped_branches: usize,
    pub dropped_generators: usize,
    pub clamped_demands: usize,
    pub unlimited_lines: usize,
    pub flipped_reactances: usize,
}

pub fn parse_matpower(text: &str) -> Result<Network, MatpowerError> {
    parse_matpower_with(text, &ParseOptions::default()).map(|(n, _)| n)
}

struct Row {
    line: usize,
    vals: Vec<f64>,
}

#[derive(Default)]
struct Sections {
    base_mva: Option<(usize, f64)>,
    mats: HashMap<String, Vec<Row>>,
}

fn number(tok: &str, line: usize) -> Result<f64, MatpowerError> {
    tok.parse::<f64>()
        .map_err(|_| MatpowerError::Number { line, token: tok.to_string() })
}

fn strip_comment(s: &str) -> &str {
    match s.find('%') {
        Some(i) => &s[..i],
        None => s,
    }
}

fn scan(text: &str) -> Result<Sections, MatpowerError> {
    enum State {
        Top,
        Matrix(String, Vec<Row>),
        Cell,
    }
    let mut out = Sections::default();
    let mut state = State::Top;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut rest = strip_comment(raw).trim();
        loop {
            match &mut state {
                State::Top => {
                    if rest.is_empty() {
                        break;
                    }
                    let Some(stmt) = rest.strip_prefix("mpc.") else {
                        // function header, blank assignments to other variables, etc.
                        break;
                    };
                    let Some(eq) = stmt.find('=') else {
                        return Err(MatpowerError::Syntax { line, msg: "expected '='".into() });
                    };
                    let name = stmt[..eq].trim().to_string();
                    let rhs = stmt[eq + 1..].trim_start();
                    if let Some(body) = rhs.strip_prefix('[') {
                        state = State::Matrix(name, Vec::new());
                        rest = body;
                    } else if rhs.starts_with('{') {
                        state = State::Cell;
                        rest = &rhs[1..];
                    } else {
                        if name == "baseMVA" {
                            let v = rhs.trim_end_matches(';').trim();
                            out.base_mva = Some((line, number(v, line)?));
                        }
                        break;
                    }
                }
                State::Cell => {
                    if let Some(end) = rest.find('}') {
                        state = State::Top;
                        rest = rest[end + 1..].trim_start_matches(';').trim();
                    } else {
                        break;
                    }
                }
                State::Matrix(_, rows) => {
                    let (body, closed) = match rest.find(']') {
                        Some(end) => (&rest[..end], true),
                        None => (rest, false),
                    };
                    for chunk in body.split(';') {
                        let vals = chunk
                            .split(|c: char| c.is_whitespace() || c == ',')
                            .filter(|t| !t.is_empty())
                            .map(|t| number(t, line))
                            .collect::<Result<Vec<_>, _>>()?;
                        if !vals.is_empty() {
                            rows.push(Row { line, vals });
                        }
                    }
                    if closed {
                        let tail = rest[body.len() + 1..].trim_start_matches(';').trim();
                        let State::Matrix(name, rows) = std::mem::replace(&mut state, State::Top) else {
                            unreachable!()
                        };
                        out.mats.insert(name, rows);
                        rest = tail;
                    } else {
                        break;
                    }
                }
            }
        }
    }
    match state {
        State::Top => Ok(out),
        State::Matrix(name, _) => Err(MatpowerError::Syntax {
            line: text.lines().count(),
            msg: format!("unterminated matrix mpc.{name}"),
        }),
        State::Cell => Err(MatpowerError::Syntax {
            line: text.lines().count(),
            msg: "unterminated cell array".into(),
        }),
    }
}

fn section<'a>(s: &'a Sections, name: &'static str, need: usize) -> Result<&'a [Row], MatpowerError> {
    let rows = s.mats.get(name).ok_or(MatpowerError::Missing(name))?;
    for r in rows {
        if r.vals.len() < need {
            return Err(MatpowerError::ShortRow { section: name, line: r.line, got: r.vals.len(), need });
        }
    }
    Ok(rows)
}

fn bus_number(v: f64, line: usize) -> Result<u64, MatpowerError> {
    if v.is_finite() && v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as u64)
    } else {
        Err(MatpowerError::BusNumber { line, bus: v })
    }
}

/// Parse a MATPOWER case into a per-unit network.
///
/// Out-of-service branches are dropped, as are out-of-service generators
/// unless `keep_inactive_generators` is set. Branches with RATE_A = 0 are
/// treated as unlimited and get F̄_k = Σ_b D_b.
pub fn parse_matpower_with(text: &str, opts: &ParseOptions) -> Result<(Network, ParseReport), MatpowerError> {
    const BUS_I: usize = 0;
    const PD: usize = 2;
    const GEN_BUS: usize = 0;
    const GEN_STATUS: usize = 7;
    const PMAX: usize = 8;
    const F_BUS: usize = 0;
    const T_BUS: usize = 1;
    const BR_X: usize = 3;
    const RATE_A: usize = 5;
    const BR_STATUS: usize = 10;

    let s = scan(text)?;
    let (_, base) = s.base_mva.ok_or(MatpowerError::Missing("baseMVA"))?;
    if !(base.is_finite() && base > 0.0) {
        return Err(NetworkError::BadBase(base).into());
    }
    let mut report = ParseReport::default();

    let mut index = HashMap::new();
    let mut buses = Vec::new();
    for r in section(&s, "bus", PD + 1)? {
        let id = bus_number(r.vals[BUS_I], r.line)?;
        if index.insert(id, buses.len()).is_some() {
            return Err(MatpowerError::DuplicateBus { line: r.line, bus: id });
        }
        let mut pd = r.vals[PD];
        if pd < 0.0 {
            match opts.negative_demand {
                NegativeDemand::Error => return Err(MatpowerError::NegativeDemand { line: r.line, pd }),
                NegativeDemand::Clamp => {
                    report.clamped_demands += 1;
                    pd = 0.0;
                }
            }
        }
        buses.push(Bus { id: BusId(id), demand: pd / base });
    }
    let total: f64 = buses.iter().map(|b| b.demand).sum();
    let lookup = |v: f64, line: usize| -> Result<usize, MatpowerError> {
        let id = bus_number(v, line).map_err(|_| MatpowerError::DanglingBus { line, bus: v })?;
        index.get(&id).copied().ok_or(MatpowerError::DanglingBus { line, bus: v })
    };

    let mut generators = Vec::new();
    for (g, r) in section(&s, "gen", PMAX + 1)?.iter().enumerate() {
        let bus = lookup(r.vals[GEN_BUS], r.line)?;
        let active = r.vals[GEN_STATUS] > 0.0;
        if !active && !opts.keep_inactive_generators {
            report.dropped_generators += 1;
            continue;
        }
        let pmax = if active { r.vals[PMAX].max(0.0) / base } else { 0.0 };
        generators.push(Generator { id: GenId(g as u64 + 1), bus, pmax });
    }

    let mut lines = Vec::new();
    for (k, r) in section(&s, "branch", BR_STATUS + 1)?.iter().enumerate() {
        let from = lookup(r.vals[F_BUS], r.line)?;
        let to = lookup(r.vals[T_BUS], r.line)?;
        if r.vals[BR_STATUS] <= 0.0 {
            report.dropped_branches += 1;
            continue;
        }
        let mut x = r.vals[BR_X];
        if !(x > 0.0) {
            if opts.absolute_reactance && x < 0.0 {
                report.flipped_reactances += 1;
                x = -x;
            } else {
                return Err(MatpowerError::Reactance { line: r.line, x });
            }
        }
        let rate = r.vals[RATE_A];
        let limit = if rate == 0.0 {
            report.unlimited_lines += 1;
            total
        } else {
            rate / base
        };
        lines.push(Line { id: LineId(k as u64 + 1), from, to, susceptance: 1.0 / x, limit });
    }
    let net = Network::new(base, buses, lines, generators)?;
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIAD: &str = r#"
function mpc = triad
%% a three bus cycle
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	230	1	1.1	0.9;
	2	1	100	0	0	0	1	1	0	230	1	1.1	0.9;
	3	1	100	0	0	0	1	1	0	230	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	300	-300	1	100	1	300	0;
];
mpc.branch = [
	1	2	0	1	0	200	200	200	0	0	1	-360	360;
	2	3	0	0.5	0	200	200	200	0	0	1	-360	360;
	1	3	0	1	0	0	0	0	0	0	1	-360	360;
];
mpc.bus_name = {
	'one';
	'two';
};
"#;

    #[test]
    fn triad_case() {
        let (net, rep) = parse_matpower_with(TRIAD, &ParseOptions::default()).unwrap();
        assert_eq!((net.n_buses(), net.n_lines(), net.n_generators()), (3, 3, 1));
        assert_eq!(net.buses()[1].demand, 1.0);
        assert_eq!(net.lines()[1].susceptance, 2.0);
        assert_eq!(net.lines()[0].limit, 2.0);
        // rateA = 0 means unlimited: total demand
        assert_eq!(net.lines()[2].limit, 2.0);
        assert_eq!(rep.unlimited_lines, 1);
        assert_eq!(net.generators()[0].pmax, 3.0);
    }

    #[test]
    fn one_bus_no_lines() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [1 3 10 0 0 0 1 1 0 1 1 1 1];\nmpc.gen = [1 0 0 0 0 1 100 1 50 0];\nmpc.branch = [];\n";
        let net = parse_matpower(text).unwrap();
        assert_eq!(net.n_buses(), 1);
        assert_eq!(net.n_lines(), 0);
        assert_eq!(net.generators()[0].pmax, 0.5);
    }

    #[test]
    fn status_zero_dropped() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0 0; 2 1 0 0];\n\
            mpc.gen = [1 0 0 0 0 1 100 0 50 0];\n\
            mpc.branch = [1 2 0 0.1 0 10 0 0 0 0 0; 1 2 0 0.1 0 10 0 0 0 0 1];\n";
        let (net, rep) = parse_matpower_with(text, &ParseOptions::default()).unwrap();
        assert_eq!(net.n_generators(), 0);
        assert_eq!(net.n_lines(), 1);
        assert_eq!(net.lines()[0].id, LineId(2));
        assert_eq!((rep.dropped_generators, rep.dropped_branches), (1, 1));
        let opts = ParseOptions { keep_inactive_generators: true, ..Default::default() };
        let (net, _) = parse_matpower_with(text, &opts).unwrap();
        assert_eq!(net.n_generators(), 1);
        assert_eq!(net.generators()[0].pmax, 0.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0;\n2 1 x 0;\n];\n";
        assert_eq!(parse_matpower(bad), Err(MatpowerError::Number { line: 4, token: "x".into() }));
        let short = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0; 2 1];\nmpc.gen = [];\nmpc.branch = [];\n";
        assert!(matches!(parse_matpower(short), Err(MatpowerError::ShortRow { line: 2, .. })));
        let dangling = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0];\nmpc.gen = [9 0 0 0 0 1 1 1 1 0];\nmpc.branch = [];\n";
        assert!(matches!(parse_matpower(dangling), Err(MatpowerError::DanglingBus { line: 3, .. })));
        let negx = "mpc.baseMVA = 100;\nmpc.bus = [1 3 0; 2 1 0];\nmpc.gen = [];\nmpc.branch = [1 2 0 -0.1 0 0 0 0 0 0 1];\n";
        assert!(matches!(parse_matpower(negx), Err(MatpowerError::Reactance { line: 4, .. })));
        let opts = ParseOptions { absolute_reactance: true, ..Default::default() };
        let (net, rep) = parse_matpower_with(negx, &opts).unwrap();
        assert_eq!(net.lines()[0].susceptance, 10.0);
        assert_eq!(rep.flipped_reactances, 1);
        assert_eq!(parse_matpower("mpc.bus = [1 3 0];"), Err(MatpowerError::Missing("baseMVA")));
        assert!(matches!(parse_matpower("mpc.baseMVA = 100;\nmpc.bus = [1 3 0\n"), Err(MatpowerError::Syntax { .. })));
    }

    #[test]
    fn negative_demand_policy() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [1 3 -5];\nmpc.gen = [];\nmpc.branch = [];\n";
        assert_eq!(parse_matpower(text).unwrap().buses()[0].demand, 0.0);
        let opts = ParseOptions { negative_demand: NegativeDemand::Error, ..Default::default() };
        assert!(matches!(parse_matpower_with(text, &opts), Err(MatpowerError::NegativeDemand { .. })));
    }

    #[test]
    fn comma_separated_and_multiline() {
        let text = "mpc.baseMVA = 10;\nmpc.bus = [1, 3, 5; 2, 1, 5];\nmpc.gen = [1, 0, 0, 0, 0, 1, 1, 1, 20, 0];\nmpc.branch = [\n 1 2 0 0.2 0 30 0 0 0 0 1\n];\n";
        let net = parse_matpower(text).unwrap();
        assert_eq!(net.buses()[0].demand, 0.5);
        assert_eq!(net.lines()[0].limit, 3.0);
        assert_eq!(net.generators()[0].pmax, 2.0);
    }
}
