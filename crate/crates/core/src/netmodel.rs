//! Radial feeder description and its linearized voltage sensitivity model.
//!
//! Bus 0 is the slack (substation). Non-slack buses are numbered `1..=n` in
//! files and on the command line; internally bus `k` lives at index `k - 1`.
//! All quantities are per-unit.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};

/// Reference voltage-rise limit (per-unit) used to normalize synthetic solar.
pub const REFERENCE_LIMIT: f64 = 0.05;

pub const LINES_HEADER: &str = "LINES: from,to,r,x";
pub const BUSES_HEADER: &str = "BUSES: id,p_e,q_e,p_av,has_inverter";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Bus {
    pub p_e: f64,
    pub q_e: f64,
    pub p_av: f64,
    pub has_inverter: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialNetwork {
    pub lines: Vec<Line>,
    /// Non-slack buses; `buses[k]` is bus id `k + 1`.
    pub buses: Vec<Bus>,
    pub v0_mag: f64,
}

/// Parent links of a validated tree, indexed by bus id (entry 0 is the root).
#[derive(Clone, Debug)]
struct TreeIndex {
    parent: Vec<Option<usize>>,
    /// Line index connecting a bus to its parent.
    parent_line: Vec<Option<usize>>,
    depth: Vec<usize>,
}

impl RadialNetwork {
    pub fn n(&self) -> usize {
        self.buses.len()
    }

    pub fn p_av(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.p_av).collect()
    }

    pub fn p_e(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.p_e).collect()
    }

    pub fn q_e(&self) -> Vec<f64> {
        self.buses.iter().map(|b| b.q_e).collect()
    }

    pub fn inverter_buses(&self) -> Vec<usize> {
        self.buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.has_inverter)
            .map(|(k, _)| k + 1)
            .collect()
    }

    /// Checks the tree structure, impedance signs and solar data.
    pub fn validate(&self) -> Result<()> {
        self.tree_index()?;
        for l in &self.lines {
            if !(l.r > 0.0) || !(l.x > 0.0) || !l.r.is_finite() || !l.x.is_finite() {
                return Err(Error::NonPositiveImpedance { from: l.from, to: l.to, r: l.r, x: l.x });
            }
        }
        if !(self.v0_mag > 0.0) {
            return Err(Error::DimensionMismatch(format!(
                "slack voltage magnitude must be positive, got {}",
                self.v0_mag
            )));
        }
        for (k, b) in self.buses.iter().enumerate() {
            if !(b.p_av >= 0.0) {
                return Err(Error::DimensionMismatch(format!(
                    "bus {} has negative available solar {}",
                    k + 1,
                    b.p_av
                )));
            }
            if !b.has_inverter && b.p_av != 0.0 {
                return Err(Error::DimensionMismatch(format!(
                    "bus {} has solar {} but no inverter",
                    k + 1,
                    b.p_av
                )));
            }
        }
        Ok(())
    }

    fn tree_index(&self) -> Result<TreeIndex> {
        let n = self.n();
        if self.lines.len() != n {
            return Err(Error::NotATree(format!("{} buses need {} lines, got {}", n, n, self.lines.len())));
        }
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + 1];
        for (idx, l) in self.lines.iter().enumerate() {
            if l.from > n || l.to > n {
                return Err(Error::NotATree(format!("line {}-{} references an unknown bus", l.from, l.to)));
            }
            if l.from == l.to {
                return Err(Error::NotATree(format!("line {}-{} is a self loop", l.from, l.to)));
            }
            adj[l.from].push((l.to, idx));
            adj[l.to].push((l.from, idx));
        }
        let mut parent = vec![None; n + 1];
        let mut parent_line = vec![None; n + 1];
        let mut depth = vec![0; n + 1];
        let mut seen = vec![false; n + 1];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for &(v, idx) in &adj[u] {
                if seen[v] {
                    continue;
                }
                seen[v] = true;
                parent[v] = Some(u);
                parent_line[v] = Some(idx);
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::NotATree(format!("bus {k} is not reachable from the slack bus")));
        }
        Ok(TreeIndex { parent, parent_line, depth })
    }
}

/// Linear plant `x = R u^p + X u^q + e`, with `B = [R X]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityModel {
    pub r: Matrix,
    pub x: Matrix,
    pub b: Matrix,
    pub e: Vec<f64>,
}

impl SensitivityModel {
    pub fn from_network(net: &RadialNetwork) -> Result<Self> {
        let (r, x) = build_impedance_matrices(net)?;
        let e = compute_baseline_drop(&r, &x, net)?;
        let b = stack_columns(&r, &x);
        Ok(SensitivityModel { r, x, b, e })
    }

    pub fn n(&self) -> usize {
        self.e.len()
    }
}

/// `[R X]` as one `n x 2n` matrix.
pub fn stack_columns(r: &Matrix, x: &Matrix) -> Matrix {
    let n = r.rows();
    let mut b = Matrix::zeros(n, 2 * n);
    for i in 0..n {
        b.row_mut(i)[..n].copy_from_slice(r.row(i));
        b.row_mut(i)[n..].copy_from_slice(x.row(i));
    }
    b
}

/// Inverts the reduced complex admittance matrix and scales by `1 / |v0|`.
///
/// The complex system `(G + jS)(R + jX) = I` is solved in its real form
/// `[[G, -S], [S, G]] [R; X] = [I; 0]`.
pub fn build_impedance_matrices(net: &RadialNetwork) -> Result<(Matrix, Matrix)> {
    net.validate()?;
    let n = net.n();
    let mut g = Matrix::zeros(n + 1, n + 1);
    let mut s = Matrix::zeros(n + 1, n + 1);
    for l in &net.lines {
        let d = l.r * l.r + l.x * l.x;
        let (gy, sy) = (l.r / d, -l.x / d);
        for (a, b) in [(l.from, l.to), (l.to, l.from)] {
            g[(a, a)] += gy;
            s[(a, a)] += sy;
            g[(a, b)] -= gy;
            s[(a, b)] -= sy;
        }
    }
    let mut m = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let (gv, sv) = (g[(i + 1, j + 1)], s[(i + 1, j + 1)]);
            m[(i, j)] = gv;
            m[(i, j + n)] = -sv;
            m[(i + n, j)] = sv;
            m[(i + n, j + n)] = gv;
        }
    }
    let lu = Lu::factor(&m)?;
    let mut r = Matrix::zeros(n, n);
    let mut x = Matrix::zeros(n, n);
    let mut rhs = vec![0.0; 2 * n];
    for j in 0..n {
        rhs.iter_mut().for_each(|v| *v = 0.0);
        rhs[j] = 1.0;
        let col = lu.solve(&rhs)?;
        for i in 0..n {
            r[(i, j)] = col[i] / net.v0_mag;
            x[(i, j)] = col[i + n] / net.v0_mag;
        }
    }
    Ok((r, x))
}

/// Path-sum construction: `Z_jk` is the impedance of the lines shared by the
/// root paths of buses `j` and `k`. No matrix inversion involved.
pub fn common_path_oracle(net: &RadialNetwork) -> Result<(Matrix, Matrix)> {
    let tree = net.tree_index()?;
    let n = net.n();
    let mut cum_r = vec![0.0; n + 1];
    let mut cum_x = vec![0.0; n + 1];
    let mut order: Vec<usize> = (1..=n).collect();
    order.sort_by_key(|&k| tree.depth[k]);
    for &k in &order {
        let p = tree.parent[k].expect("non-root bus has a parent");
        let line = &net.lines[tree.parent_line[k].expect("non-root bus has a parent line")];
        cum_r[k] = cum_r[p] + line.r;
        cum_x[k] = cum_x[p] + line.x;
    }
    let lca = |mut a: usize, mut b: usize| {
        while tree.depth[a] > tree.depth[b] {
            a = tree.parent[a].unwrap();
        }
        while tree.depth[b] > tree.depth[a] {
            b = tree.parent[b].unwrap();
        }
        while a != b {
            a = tree.parent[a].unwrap();
            b = tree.parent[b].unwrap();
        }
        a
    };
    let mut r = Matrix::zeros(n, n);
    let mut x = Matrix::zeros(n, n);
    for j in 1..=n {
        for k in j..=n {
            let c = lca(j, k);
            let (rv, xv) = (cum_r[c] / net.v0_mag, cum_x[c] / net.v0_mag);
            r[(j - 1, k - 1)] = rv;
            r[(k - 1, j - 1)] = rv;
            x[(j - 1, k - 1)] = xv;
            x[(k - 1, j - 1)] = xv;
        }
    }
    Ok((r, x))
}

/// `e = R (p_av - p_e) - X q_e`.
pub fn compute_baseline_drop(r: &Matrix, x: &Matrix, net: &RadialNetwork) -> Result<Vec<f64>> {
    let n = net.n();
    if r.rows() != n || r.cols() != n || x.rows() != n || x.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "network has {n} buses but R is {}x{} and X is {}x{}",
            r.rows(),
            r.cols(),
            x.rows(),
            x.cols()
        )));
    }
    let net_p: Vec<f64> = net.buses.iter().map(|b| b.p_av - b.p_e).collect();
    let neg_q: Vec<f64> = net.buses.iter().map(|b| -b.q_e).collect();
    let rp = r.matvec(&net_p)?;
    let xq = x.matvec(&neg_q)?;
    Ok(rp.iter().zip(&xq).map(|(a, b)| a + b).collect())
}

/// Seeded random feeder with an overvoltage problem.
///
/// The tree grows as a trunk with occasional laterals. Solar on inverter buses
/// is scaled so that `overload_factor = 1` puts the largest uncontrolled
/// voltage rise exactly at [`REFERENCE_LIMIT`]; larger factors overload.
pub fn generate_synthetic_feeder(n: usize, seed: u64, overload_factor: f64) -> RadialNetwork {
    assert!(n >= 1, "feeder needs at least one non-slack bus");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::with_capacity(n);
    for k in 1..=n {
        let parent = if k == 1 || rng.gen_bool(0.75) { k - 1 } else { rng.gen_range(0..k - 1) };
        let r = rng.gen_range(0.0005..0.002);
        let x = r * rng.gen_range(0.5..1.5);
        lines.push(Line { from: parent, to: k, r, x });
    }
    let mut buses: Vec<Bus> = (0..n)
        .map(|_| {
            let p_e = rng.gen_range(0.01..0.06);
            Bus { p_e, q_e: p_e * rng.gen_range(0.2..0.5), p_av: 0.0, has_inverter: rng.gen_bool(0.5) }
        })
        .collect();
    if !buses.iter().any(|b| b.has_inverter) {
        buses[n - 1].has_inverter = true;
    }
    let shape: Vec<f64> =
        buses.iter().map(|b| if b.has_inverter { rng.gen_range(0.5..1.5) } else { 0.0 }).collect();

    let mut net = RadialNetwork { lines, buses, v0_mag: 1.0 };
    let (r, x) = common_path_oracle(&net).expect("generated tree is valid");
    let slope = r.matvec(&shape).unwrap();
    let offset = compute_baseline_drop(&r, &x, &net).unwrap();
    let scale = slope
        .iter()
        .zip(&offset)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, d)| (REFERENCE_LIMIT - d) / a)
        .fold(f64::INFINITY, f64::min);
    for (bus, s) in net.buses.iter_mut().zip(&shape) {
        bus.p_av = overload_factor.max(0.0) * scale * s;
    }
    net
}

pub fn write_network_csv(net: &RadialNetwork) -> String {
    let mut out = String::new();
    out.push_str(LINES_HEADER);
    out.push('\n');
    for l in &net.lines {
        let _ = writeln!(out, "{},{},{},{}", l.from, l.to, l.r, l.x);
    }
    out.push_str(BUSES_HEADER);
    out.push('\n');
    for (k, b) in net.buses.iter().enumerate() {
        let _ = writeln!(out, "{},{},{},{},{}", k + 1, b.p_e, b.q_e, b.p_av, u8::from(b.has_inverter));
    }
    out
}

pub fn save_network(net: &RadialNetwork, path: &Path) -> Result<()> {
    std::fs::write(path, write_network_csv(net)).map_err(|e| Error::io(path, e))
}

pub fn load_network(path: &Path) -> Result<RadialNetwork> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network_csv(&text, path)
}

/// Parses the two-section network CSV. Slack voltage defaults to 1 pu.
pub fn parse_network_csv(text: &str, path: &Path) -> Result<RadialNetwork> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Lines,
        Buses,
    }
    let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), line, message };
    let num = |field: &str, line: usize, name: &str| -> Result<f64> {
        field
            .trim()
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("{name} `{}` is not a number", field.trim())))
    };
    let idx = |field: &str, line: usize, name: &str| -> Result<usize> {
        field
            .trim()
            .parse::<usize>()
            .map_err(|_| parse_err(line, format!("{name} `{}` is not a bus index", field.trim())))
    };

    let mut section = Section::None;
    let mut lines = Vec::new();
    let mut rows: Vec<(usize, usize, Bus)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let row = raw.trim();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        if row.starts_with("LINES") {
            if row != LINES_HEADER {
                return Err(parse_err(lineno, format!("expected header `{LINES_HEADER}`")));
            }
            section = Section::Lines;
            continue;
        }
        if row.starts_with("BUSES") {
            if row != BUSES_HEADER {
                return Err(parse_err(lineno, format!("expected header `{BUSES_HEADER}`")));
            }
            section = Section::Buses;
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        match section {
            Section::None => return Err(parse_err(lineno, "data row before any section header".into())),
            Section::Lines => {
                if fields.len() != 4 {
                    return Err(parse_err(lineno, format!("line row needs 4 fields, got {}", fields.len())));
                }
                lines.push(Line {
                    from: idx(fields[0], lineno, "from")?,
                    to: idx(fields[1], lineno, "to")?,
                    r: num(fields[2], lineno, "r")?,
                    x: num(fields[3], lineno, "x")?,
                });
            }
            Section::Buses => {
                if fields.len() != 5 {
                    return Err(parse_err(lineno, format!("bus row needs 5 fields, got {}", fields.len())));
                }
                let id = idx(fields[0], lineno, "id")?;
                if id == 0 {
                    return Err(parse_err(lineno, "the slack bus 0 must not be listed in BUSES".into()));
                }
                let has_inverter = match fields[4].trim() {
                    "1" | "true" => true,
                    "0" | "false" => false,
                    other => return Err(parse_err(lineno, format!("has_inverter `{other}` must be 0 or 1"))),
                };
                let bus = Bus {
                    p_e: num(fields[1], lineno, "p_e")?,
                    q_e: num(fields[2], lineno, "q_e")?,
                    p_av: num(fields[3], lineno, "p_av")?,
                    has_inverter,
                };
                rows.push((lineno, id, bus));
            }
        }
    }
    let n = rows.len();
    let mut buses = vec![None; n];
    for (lineno, id, bus) in rows {
        if id > n {
            return Err(Error::Validation {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("bus id {id} out of range 1..={n}"),
            });
        }
        if buses[id - 1].replace(bus).is_some() {
            return Err(Error::Validation {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("bus id {id} listed twice"),
            });
        }
    }
    let net = RadialNetwork {
        lines,
        buses: buses.into_iter().map(|b| b.expect("all ids filled")).collect(),
        v0_mag: 1.0,
    };
    net.validate()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_spd;

    fn bus() -> Bus {
        Bus::default()
    }

    fn chain() -> RadialNetwork {
        RadialNetwork {
            lines: vec![
                Line { from: 0, to: 1, r: 0.1, x: 0.05 },
                Line { from: 1, to: 2, r: 0.2, x: 0.1 },
            ],
            buses: vec![bus(), bus()],
            v0_mag: 1.0,
        }
    }

    fn assert_close(a: &Matrix, b: &Matrix, tol: f64) {
        assert_eq!((a.rows(), a.cols()), (b.rows(), b.cols()));
        let d = a.sub(b).unwrap().max_abs();
        assert!(d <= tol, "max diff {d}\n{a:?}\n{b:?}");
    }

    #[test]
    fn single_line() {
        let net = RadialNetwork {
            lines: vec![Line { from: 0, to: 1, r: 0.1, x: 0.05 }],
            buses: vec![bus()],
            v0_mag: 1.0,
        };
        let (r, x) = build_impedance_matrices(&net).unwrap();
        assert!((r[(0, 0)] - 0.1).abs() < 1e-12);
        assert!((x[(0, 0)] - 0.05).abs() < 1e-12);
        let (ro, xo) = common_path_oracle(&net).unwrap();
        assert_close(&r, &ro, 1e-12);
        assert_close(&x, &xo, 1e-12);
    }

    #[test]
    fn chain_matches_hand_values() {
        let (r, x) = build_impedance_matrices(&chain()).unwrap();
        assert_close(&r, &Matrix::from_rows(&[&[0.1, 0.1], &[0.1, 0.3]]), 1e-9);
        assert_close(&x, &Matrix::from_rows(&[&[0.05, 0.05], &[0.05, 0.15]]), 1e-9);
        assert!(r.is_symmetric(1e-10));
        let (ro, xo) = common_path_oracle(&chain()).unwrap();
        assert_close(&r, &ro, 1e-9);
        assert_close(&x, &xo, 1e-9);
    }

    #[test]
    fn star_has_zero_off_diagonals() {
        let net = RadialNetwork {
            lines: (1..=3).map(|k| Line { from: 0, to: k, r: 1.0, x: 1.0 }).collect(),
            buses: vec![bus(); 3],
            v0_mag: 1.0,
        };
        let (r, _) = common_path_oracle(&net).unwrap();
        assert_close(&r, &Matrix::identity(3), 1e-15);
        let (ri, _) = build_impedance_matrices(&net).unwrap();
        assert_close(&ri, &Matrix::identity(3), 1e-9);
    }

    #[test]
    fn rejects_non_trees() {
        let mut net = chain();
        net.lines[1] = Line { from: 1, to: 1, r: 0.2, x: 0.1 };
        assert!(matches!(build_impedance_matrices(&net), Err(Error::NotATree(_))));

        let mut net = chain();
        net.lines.pop();
        assert!(matches!(common_path_oracle(&net), Err(Error::NotATree(_))));

        // two lines but both join buses 1 and 2, so bus 0 is cut off
        let net = RadialNetwork {
            lines: vec![Line { from: 1, to: 2, r: 0.1, x: 0.1 }, Line { from: 2, to: 1, r: 0.1, x: 0.1 }],
            buses: vec![bus(), bus()],
            v0_mag: 1.0,
        };
        assert!(matches!(net.validate(), Err(Error::NotATree(_))));
    }

    #[test]
    fn rejects_non_positive_impedance() {
        let mut net = chain();
        net.lines[0].x = 0.0;
        assert!(matches!(build_impedance_matrices(&net), Err(Error::NonPositiveImpedance { .. })));
    }

    #[test]
    fn baseline_drop() {
        let r = Matrix::from_rows(&[&[0.1]]);
        let x = Matrix::from_rows(&[&[0.05]]);
        let net = RadialNetwork {
            lines: vec![Line { from: 0, to: 1, r: 0.1, x: 0.05 }],
            buses: vec![Bus { p_e: 1.0, q_e: 1.0, p_av: 3.0, has_inverter: true }],
            v0_mag: 1.0,
        };
        let e = compute_baseline_drop(&r, &x, &net).unwrap();
        assert!((e[0] - 0.15).abs() < 1e-15);

        let balanced = RadialNetwork {
            buses: vec![Bus { p_e: 0.4, q_e: 0.0, p_av: 0.4, has_inverter: true }],
            ..net
        };
        assert_eq!(compute_baseline_drop(&r, &x, &balanced).unwrap(), vec![0.0]);
    }

    #[test]
    fn doubling_slack_voltage_halves_sensitivities() {
        let net = generate_synthetic_feeder(12, 5, 1.2);
        let (r1, x1) = build_impedance_matrices(&net).unwrap();
        let net2 = RadialNetwork { v0_mag: 2.0, ..net };
        let (r2, x2) = build_impedance_matrices(&net2).unwrap();
        assert_close(&r2, &r1.scale(0.5), 1e-12);
        assert_close(&x2, &x1.scale(0.5), 1e-12);
    }

    #[test]
    fn synthetic_feeder_is_deterministic_and_overloaded() {
        let a = generate_synthetic_feeder(56, 42, 1.3);
        let b = generate_synthetic_feeder(56, 42, 1.3);
        assert_eq!(a, b);
        a.validate().unwrap();
        let model = SensitivityModel::from_network(&a).unwrap();
        let max_e = model.e.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max_e > REFERENCE_LIMIT, "max e = {max_e}");
        assert!(is_spd(&model.r) && is_spd(&model.x));

        let at_limit = generate_synthetic_feeder(56, 42, 1.0);
        let e = SensitivityModel::from_network(&at_limit).unwrap().e;
        let max_e = e.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max_e - REFERENCE_LIMIT).abs() < 1e-10);

        let dark = generate_synthetic_feeder(56, 42, 0.0);
        assert!(dark.p_av().iter().all(|&p| p == 0.0));
        let e = SensitivityModel::from_network(&dark).unwrap().e;
        assert!(e.iter().all(|&v| v < REFERENCE_LIMIT));
    }

    #[test]
    fn baseline_drop_increases_with_solar() {
        let net = generate_synthetic_feeder(10, 9, 1.0);
        let model = SensitivityModel::from_network(&net).unwrap();
        let mut more = net.clone();
        for b in more.buses.iter_mut().filter(|b| b.has_inverter) {
            b.p_av += 0.1;
        }
        let e2 = compute_baseline_drop(&model.r, &model.x, &more).unwrap();
        assert!(e2.iter().zip(&model.e).all(|(a, b)| a > b));
    }

    #[test]
    fn csv_round_trip() {
        let net = generate_synthetic_feeder(8, 3, 1.4);
        let text = write_network_csv(&net);
        assert!(text.starts_with(LINES_HEADER));
        let back = parse_network_csv(&text, Path::new("mem.csv")).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let text = "LINES: from,to,r,x\n0,1,0.1,abc\nBUSES: id,p_e,q_e,p_av,has_inverter\n1,0,0,0,0\n";
        match parse_network_csv(text, Path::new("f.csv")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "LINES: from,to,r,x\n0,1,0.1,0.1\nBUSES: id,p_e,q_e,p_av,has_inverter\n0,0,0,0,0\n";
        assert!(matches!(parse_network_csv(text, Path::new("f.csv")), Err(Error::Parse { line: 4, .. })));
    }
}
