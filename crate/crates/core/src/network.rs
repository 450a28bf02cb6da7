//! Power network model and the MATPOWER-style case-file subset it is read from.
//!
//! All quantities are stored in per-unit on the case's MVA base. The line model is
//! a plain series admittance: branch charging, taps and phase shifters are read
//! from the file but ignored.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::ComplexQuantity;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("missing section `{0}`")]
    MissingSection(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("no slack (type 3) bus")]
    NoSlackBus,
    #[error("more than one slack bus ({0} and {1})")]
    DuplicateSlack(i64, i64),
    #[error("unsupported generator cost model at line {line} (only polynomial model 2 with up to 3 coefficients)")]
    UnsupportedCostModel { line: usize },
    #[error("reference to unknown bus {0}")]
    UnknownBus(i64),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("expected {expected} reference dispatches, got {found}")]
    DispatchCountMismatch { expected: usize, found: usize },
    #[error("reference dispatch of generator {gen} ({value}) is outside its bounds")]
    DispatchOutOfBounds { gen: usize, value: ComplexQuantity },
    #[error("reference dispatch file: {0}")]
    DispatchFile(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: i64,
    pub voltage_min: f64,
    pub voltage_max: f64,
    pub is_slack: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus_id: i64,
    pub s_min: ComplexQuantity,
    pub s_max: ComplexQuantity,
    /// Quadratic cost coefficient on per-unit active power.
    pub cost_c2: f64,
    pub cost_c1: f64,
    pub cost_c0: f64,
    /// Publicly known cost of the original optimal dispatch.
    pub reference_cost: Option<f64>,
}

impl Generator {
    /// Dispatch cost of active power `p` (per-unit).
    pub fn cost(&self, p: f64) -> f64 {
        self.cost_c2 * p * p + self.cost_c1 * p + self.cost_c0
    }

    pub fn within_bounds(&self, s: ComplexQuantity) -> bool {
        self.s_min.re <= s.re && s.re <= self.s_max.re && self.s_min.im <= s.im && s.im <= self.s_max.im
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus_id: i64,
    pub demand: ComplexQuantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: i64,
    pub to_bus: i64,
    /// Series impedance as given in the case file (per-unit).
    pub resistance: f64,
    pub reactance: f64,
    /// `1 / (r + jx)`.
    pub admittance: ComplexQuantity,
    /// Apparent-power limit per line end; `f64::INFINITY` when unrated.
    pub thermal_limit: f64,
    /// Bound on the voltage angle difference, radians.
    pub angle_limit: f64,
}

/// Which end of a line a directed flow leaves from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum End {
    From,
    To,
}

impl End {
    pub const BOTH: [End; 2] = [End::From, End::To];

    pub fn index(self) -> usize {
        match self {
            End::From => 0,
            End::To => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineEnd {
    pub line: usize,
    pub end: End,
}

/// Immutable, validated network. Built through [`NetworkModel::new`] or
/// [`parse_case`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    base_mva: f64,
    buses: Vec<Bus>,
    generators: Vec<Generator>,
    loads: Vec<Load>,
    lines: Vec<Line>,
    bus_index: BTreeMap<i64, usize>,
    adjacency: Vec<Vec<LineEnd>>,
    bus_loads: Vec<Vec<usize>>,
    bus_generators: Vec<Vec<usize>>,
    slack: usize,
}

impl NetworkModel {
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        generators: Vec<Generator>,
        loads: Vec<Load>,
        lines: Vec<Line>,
    ) -> Result<Self, NetworkError> {
        let invalid = |msg: String| Err(NetworkError::Invalid(msg));
        if !(base_mva.is_finite() && base_mva > 0.0) {
            return invalid(format!("baseMVA must be positive, got {base_mva}"));
        }
        let mut bus_index = BTreeMap::new();
        let mut slack: Option<usize> = None;
        for (k, bus) in buses.iter().enumerate() {
            if bus_index.insert(bus.id, k).is_some() {
                return invalid(format!("duplicate bus id {}", bus.id));
            }
            if !(bus.voltage_min > 0.0 && bus.voltage_min <= bus.voltage_max && bus.voltage_max.is_finite()) {
                return invalid(format!("bus {} has voltage bounds [{}, {}]", bus.id, bus.voltage_min, bus.voltage_max));
            }
            if bus.is_slack {
                if let Some(first) = slack {
                    return Err(NetworkError::DuplicateSlack(buses[first].id, bus.id));
                }
                slack = Some(k);
            }
        }
        let slack = slack.ok_or(NetworkError::NoSlackBus)?;
        if generators.is_empty() {
            return invalid("network has no generator".into());
        }
        if loads.is_empty() {
            return invalid("network has no load".into());
        }
        let lookup = |id: i64| bus_index.get(&id).copied().ok_or(NetworkError::UnknownBus(id));

        let mut bus_generators = vec![Vec::new(); buses.len()];
        for (k, gen) in generators.iter().enumerate() {
            bus_generators[lookup(gen.bus_id)?].push(k);
            if !(gen.s_min.is_finite() && gen.s_max.is_finite()) {
                return invalid(format!("generator {k} has non-finite bounds"));
            }
            if gen.s_min.re > gen.s_max.re || gen.s_min.im > gen.s_max.im {
                return invalid(format!("generator {k} has crossed bounds"));
            }
            if !(gen.cost_c2 >= 0.0 && gen.cost_c1.is_finite() && gen.cost_c0.is_finite() && gen.cost_c2.is_finite()) {
                return invalid(format!("generator {k} has an invalid cost curve"));
            }
        }
        let mut bus_loads = vec![Vec::new(); buses.len()];
        for (k, load) in loads.iter().enumerate() {
            bus_loads[lookup(load.bus_id)?].push(k);
            if !load.demand.is_finite() {
                return invalid(format!("load {k} has non-finite demand"));
            }
        }
        let mut adjacency = vec![Vec::new(); buses.len()];
        for (k, line) in lines.iter().enumerate() {
            let (f, t) = (lookup(line.from_bus)?, lookup(line.to_bus)?);
            if f == t {
                return invalid(format!("line {k} connects bus {} to itself", line.from_bus));
            }
            if !(line.thermal_limit > 0.0) {
                return invalid(format!("line {k} has thermal limit {}", line.thermal_limit));
            }
            if !(line.angle_limit > 0.0 && line.angle_limit <= FRAC_PI_2) {
                return invalid(format!("line {k} has angle limit {}", line.angle_limit));
            }
            if !line.admittance.is_finite() {
                return invalid(format!("line {k} has zero impedance"));
            }
            adjacency[f].push(LineEnd { line: k, end: End::From });
            adjacency[t].push(LineEnd { line: k, end: End::To });
        }
        Ok(Self {
            base_mva,
            buses,
            generators,
            loads,
            lines,
            bus_index,
            adjacency,
            bus_loads,
            bus_generators,
            slack,
        })
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn loads(&self) -> &[Load] {
        &self.loads
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn slack_index(&self) -> usize {
        self.slack
    }

    /// Position of the bus with identifier `id`.
    pub fn bus_index(&self, id: i64) -> Option<usize> {
        self.bus_index.get(&id).copied()
    }

    /// Bus position of each end of `line`.
    pub fn line_buses(&self, line: usize) -> [usize; 2] {
        let l = &self.lines[line];
        [self.bus_index[&l.from_bus], self.bus_index[&l.to_bus]]
    }

    /// Line ends incident to bus `bus` (by position), ascending line index.
    pub fn incident_lines(&self, bus: usize) -> &[LineEnd] {
        &self.adjacency[bus]
    }

    pub fn loads_at(&self, bus: usize) -> &[usize] {
        &self.bus_loads[bus]
    }

    pub fn generators_at(&self, bus: usize) -> &[usize] {
        &self.bus_generators[bus]
    }

    pub fn load_bus(&self, load: usize) -> usize {
        self.bus_index[&self.loads[load].bus_id]
    }

    pub fn generator_bus(&self, gen: usize) -> usize {
        self.bus_index[&self.generators[gen].bus_id]
    }

    pub fn has_reference_costs(&self) -> bool {
        self.generators.iter().all(|g| g.reference_cost.is_some())
    }

    /// Returns a copy with each generator's reference cost set from its
    /// reference dispatch.
    pub fn load_reference_costs(&self, dispatch: &[ComplexQuantity]) -> Result<NetworkModel, NetworkError> {
        if dispatch.len() != self.generators.len() {
            return Err(NetworkError::DispatchCountMismatch {
                expected: self.generators.len(),
                found: dispatch.len(),
            });
        }
        let mut out = self.clone();
        for (k, (gen, &s)) in out.generators.iter_mut().zip(dispatch).enumerate() {
            if !s.is_finite() || !gen.within_bounds(s) {
                return Err(NetworkError::DispatchOutOfBounds { gen: k, value: s });
            }
            gen.reference_cost = Some(gen.cost(s.re));
        }
        Ok(out)
    }

    /// Copy of the model with its loads replaced (same count and buses).
    pub fn with_loads(&self, loads: Vec<Load>) -> Result<NetworkModel, NetworkError> {
        if loads.len() != self.loads.len() || loads.iter().zip(&self.loads).any(|(a, b)| a.bus_id != b.bus_id) {
            return Err(NetworkError::Invalid("replacement loads must keep count and buses".into()));
        }
        NetworkModel::new(self.base_mva, self.buses.clone(), self.generators.clone(), loads, self.lines.clone())
    }

    /// Canonical case text. Parsing it reproduces this model exactly (except
    /// reference costs, which are not part of the case format).
    pub fn to_case_text(&self) -> String {
        let base = self.base_mva;
        let mw = |pu: f64| encode_exact(pu, |v| v / base, pu * base);
        let mut out = String::new();
        out.push_str("function mpc = canonical\nmpc.version = '2';\n");
        let _ = writeln!(out, "mpc.baseMVA = {:?};", base);

        out.push_str("\n%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\nmpc.bus = [\n");
        for (k, bus) in self.buses.iter().enumerate() {
            let demand = self.bus_loads[k]
                .first()
                .map(|&l| self.loads[l].demand)
                .unwrap_or(ComplexQuantity::ZERO);
            let kind = if bus.is_slack {
                3
            } else if self.bus_generators[k].is_empty() {
                1
            } else {
                2
            };
            let _ = writeln!(
                out,
                "\t{}\t{}\t{:?}\t{:?}\t0\t0\t1\t1\t0\t0\t1\t{:?}\t{:?};",
                bus.id,
                kind,
                mw(demand.re),
                mw(demand.im),
                bus.voltage_max,
                bus.voltage_min
            );
        }
        out.push_str("];\n\n%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\nmpc.gen = [\n");
        for gen in &self.generators {
            let _ = writeln!(
                out,
                "\t{}\t0\t0\t{:?}\t{:?}\t1\t{:?}\t1\t{:?}\t{:?};",
                gen.bus_id,
                mw(gen.s_max.im),
                mw(gen.s_min.im),
                base,
                mw(gen.s_max.re),
                mw(gen.s_min.re)
            );
        }
        out.push_str(
            "];\n\n%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\nmpc.branch = [\n",
        );
        for line in &self.lines {
            let rate = if line.thermal_limit.is_finite() {
                mw(line.thermal_limit)
            } else {
                0.0
            };
            let angle = encode_exact(line.angle_limit, angle_from_degrees, line.angle_limit.to_degrees());
            let _ = writeln!(
                out,
                "\t{}\t{}\t{:?}\t{:?}\t0\t{:?}\t0\t0\t0\t0\t1\t{:?}\t{:?};",
                line.from_bus, line.to_bus, line.resistance, line.reactance, rate, -angle, angle
            );
        }
        out.push_str("];\n\n%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0\nmpc.gencost = [\n");
        for gen in &self.generators {
            let c2 = encode_exact(gen.cost_c2, |v| v * base * base, gen.cost_c2 / (base * base));
            let c1 = encode_exact(gen.cost_c1, |v| v * base, gen.cost_c1 / base);
            let _ = writeln!(out, "\t2\t0\t0\t3\t{:?}\t{:?}\t{:?};", c2, c1, gen.cost_c0);
        }
        out.push_str("];\n");
        out
    }
}

/// Finds a value near `guess` that `decode` maps exactly onto `target`, so that
/// unit conversions survive a text round trip bit-for-bit.
fn encode_exact(target: f64, decode: impl Fn(f64) -> f64, guess: f64) -> f64 {
    if !guess.is_finite() || decode(guess) == target {
        return guess;
    }
    let (mut lo, mut hi) = (guess, guess);
    for _ in 0..256 {
        lo = lo.next_down();
        if decode(lo) == target {
            return lo;
        }
        hi = hi.next_up();
        if decode(hi) == target {
            return hi;
        }
    }
    guess
}

/// Degrees to radians, with 0 and anything at or beyond 90 degrees meaning
/// "unconstrained", which the line model caps at a quarter turn.
fn angle_from_degrees(deg: f64) -> f64 {
    if deg == 0.0 || deg >= 90.0 || deg.is_nan() {
        FRAC_PI_2
    } else {
        deg.to_radians()
    }
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

impl Row {
    fn get(&self, col: usize, what: &str) -> Result<f64, NetworkError> {
        self.values.get(col).copied().ok_or_else(|| NetworkError::MalformedRow {
            line: self.line,
            reason: format!("missing column {} ({what})", col + 1),
        })
    }
}

/// Scans `mpc.<name> = [ ... ];` blocks and the `mpc.baseMVA` scalar.
struct CaseSections {
    base_mva: Option<(usize, f64)>,
    matrices: BTreeMap<String, Vec<Row>>,
}

fn scan_sections(text: &str) -> Result<CaseSections, NetworkError> {
    let mut base_mva = None;
    let mut matrices: BTreeMap<String, Vec<Row>> = BTreeMap::new();
    let mut current: Option<(String, Vec<Row>)> = None;
    let mut pending: Vec<f64> = Vec::new();
    let mut pending_line = 0;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let mut body = raw.split('%').next().unwrap_or("").trim();
        if current.is_none() {
            let Some(rest) = body.strip_prefix("mpc.") else { continue };
            let Some((name, rhs)) = rest.split_once('=') else { continue };
            let name = name.trim();
            let rhs = rhs.trim();
            if name == "baseMVA" {
                let value = rhs.trim_end_matches(';').trim();
                let v = value.parse::<f64>().map_err(|_| NetworkError::MalformedRow {
                    line: line_no,
                    reason: format!("bad baseMVA `{value}`"),
                })?;
                base_mva = Some((line_no, v));
                continue;
            }
            let Some(after) = rhs.strip_prefix('[') else { continue };
            current = Some((name.to_string(), Vec::new()));
            body = after;
        }
        let (name, rows) = current.as_mut().expect("inside a matrix");
        let (content, closed) = match body.find(']') {
            Some(i) => (&body[..i], true),
            None => (body, false),
        };
        for (k, chunk) in content.split(';').enumerate() {
            if k > 0 && !pending.is_empty() {
                rows.push(Row { line: pending_line, values: std::mem::take(&mut pending) });
            }
            for token in chunk.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                let v = token.parse::<f64>().map_err(|_| NetworkError::MalformedRow {
                    line: line_no,
                    reason: format!("bad number `{token}` in {name}"),
                })?;
                if pending.is_empty() {
                    pending_line = line_no;
                }
                pending.push(v);
            }
        }
        // A newline also ends a row.
        if !pending.is_empty() {
            rows.push(Row { line: pending_line, values: std::mem::take(&mut pending) });
        }
        if closed {
            let (name, rows) = current.take().expect("inside a matrix");
            matrices.insert(name, rows);
        }
    }
    if let Some((name, _)) = current {
        return Err(NetworkError::MissingSection(format!("closing `];` for {name}")));
    }
    Ok(CaseSections { base_mva, matrices })
}

/// Parses a MATPOWER-style case into a per-unit [`NetworkModel`].
pub fn parse_case(text: &str) -> Result<NetworkModel, NetworkError> {
    let mut sections = scan_sections(text)?;
    let (_, base) = sections
        .base_mva
        .ok_or_else(|| NetworkError::MissingSection("baseMVA".into()))?;
    let mut take = |name: &str| {
        sections
            .matrices
            .remove(name)
            .ok_or_else(|| NetworkError::MissingSection(name.into()))
    };
    let bus_rows = take("bus")?;
    let gen_rows = take("gen")?;
    let branch_rows = take("branch")?;
    let cost_rows = take("gencost")?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut loads = Vec::new();
    let mut slack: Option<i64> = None;
    for row in &bus_rows {
        let id = integer(row, 0, "bus_i")?;
        let kind = integer(row, 1, "type")?;
        if kind == 3 {
            if let Some(first) = slack {
                return Err(NetworkError::DuplicateSlack(first, id));
            }
            slack = Some(id);
        }
        let pd = row.get(2, "Pd")?;
        let qd = row.get(3, "Qd")?;
        if pd != 0.0 || qd != 0.0 {
            loads.push(Load { bus_id: id, demand: ComplexQuantity::new(pd / base, qd / base) });
        }
        buses.push(Bus {
            id,
            voltage_max: row.get(11, "Vmax")?,
            voltage_min: row.get(12, "Vmin")?,
            is_slack: kind == 3,
        });
    }
    if slack.is_none() {
        return Err(NetworkError::NoSlackBus);
    }

    if cost_rows.len() < gen_rows.len() {
        return Err(NetworkError::MissingSection(format!(
            "gencost rows for all {} generators",
            gen_rows.len()
        )));
    }
    let mut generators = Vec::with_capacity(gen_rows.len());
    for (row, cost) in gen_rows.iter().zip(&cost_rows) {
        if row.get(7, "status")? <= 0.0 {
            continue;
        }
        let (c2, c1, c0) = polynomial_cost(cost)?;
        generators.push(Generator {
            bus_id: integer(row, 0, "bus")?,
            s_min: ComplexQuantity::new(row.get(9, "Pmin")? / base, row.get(4, "Qmin")? / base),
            s_max: ComplexQuantity::new(row.get(8, "Pmax")? / base, row.get(3, "Qmax")? / base),
            cost_c2: c2 * base * base,
            cost_c1: c1 * base,
            cost_c0: c0,
            reference_cost: None,
        });
    }

    let mut lines = Vec::with_capacity(branch_rows.len());
    for row in &branch_rows {
        if row.get(10, "status")? <= 0.0 {
            continue;
        }
        let r = row.get(2, "r")?;
        let x = row.get(3, "x")?;
        if r == 0.0 && x == 0.0 {
            return Err(NetworkError::MalformedRow { line: row.line, reason: "zero branch impedance".into() });
        }
        let rate = row.get(5, "rateA")?;
        let angle_deg = match (row.values.get(11), row.values.get(12)) {
            (Some(lo), Some(hi)) => lo.abs().min(hi.abs()),
            _ => 0.0,
        };
        lines.push(Line {
            from_bus: integer(row, 0, "fbus")?,
            to_bus: integer(row, 1, "tbus")?,
            resistance: r,
            reactance: x,
            admittance: ComplexQuantity::new(r, x).recip(),
            thermal_limit: if rate > 0.0 { rate / base } else { f64::INFINITY },
            angle_limit: angle_from_degrees(angle_deg),
        });
    }

    NetworkModel::new(base, buses, generators, loads, lines)
}

fn integer(row: &Row, col: usize, what: &str) -> Result<i64, NetworkError> {
    let v = row.get(col, what)?;
    if v.fract() != 0.0 || !v.is_finite() {
        return Err(NetworkError::MalformedRow { line: row.line, reason: format!("{what} must be an integer") });
    }
    Ok(v as i64)
}

fn polynomial_cost(row: &Row) -> Result<(f64, f64, f64), NetworkError> {
    let model = integer(row, 0, "cost model")?;
    if model != 2 {
        return Err(NetworkError::UnsupportedCostModel { line: row.line });
    }
    let n = integer(row, 3, "ncost")?;
    if n < 0 {
        return Err(NetworkError::MalformedRow { line: row.line, reason: "negative coefficient count".into() });
    }
    let n = n as usize;
    let coeffs = (0..n).map(|k| row.get(4 + k, "cost coefficient")).collect::<Result<Vec<_>, _>>()?;
    if n > 3 && coeffs[..n - 3].iter().any(|&c| c != 0.0) {
        return Err(NetworkError::UnsupportedCostModel { line: row.line });
    }
    let mut padded = [0.0; 3];
    for (slot, c) in padded.iter_mut().rev().zip(coeffs.iter().rev()) {
        *slot = *c;
    }
    Ok((padded[0], padded[1], padded[2]))
}

/// Reads a `gen_index,p_ref,q_ref` CSV of per-unit reference dispatches.
pub fn parse_reference_dispatch(text: &str) -> Result<Vec<ComplexQuantity>, NetworkError> {
    #[derive(Deserialize)]
    struct Record {
        gen_index: usize,
        p_ref: f64,
        q_ref: f64,
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (k, record) in reader.deserialize::<Record>().enumerate() {
        let record = record.map_err(|e| NetworkError::DispatchFile(e.to_string()))?;
        if record.gen_index != k {
            return Err(NetworkError::DispatchFile(format!(
                "row {} has gen_index {}, expected {k}",
                k + 1,
                record.gen_index
            )));
        }
        out.push(ComplexQuantity::new(record.p_ref, record.q_ref));
    }
    Ok(out)
}

pub fn read_case_file(path: &Path) -> Result<NetworkModel, NetworkError> {
    let text = std::fs::read_to_string(path).map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))?;
    parse_case(&text)
}

pub fn read_reference_dispatch(path: &Path) -> Result<Vec<ComplexQuantity>, NetworkError> {
    let text = std::fs::read_to_string(path).map_err(|e| NetworkError::Io(format!("{}: {e}", path.display())))?;
    parse_reference_dispatch(&text)
}
