//! Total unimodularity of the network-flow dual system [G h].

use super::OracleError;
use crate::netmodel::Network;
use serde::{Deserialize, Serialize};

/// Integer matrix with labelled rows and columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuMatrix {
    pub entries: Vec<Vec<i64>>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
}

impl TuMatrix {
    pub fn n_rows(&self) -> usize {
        self.entries.len()
    }
    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }
}

/// The dual feasibility system of the network-flow defender written as
/// Gx ≤ h, with h appended as the last column.
///
/// Columns: λ⁺ (per line), λ⁻, μ (per bus), γ (per generator), α, β, h.
/// Rows: dual flow as two inequalities, dual dispatch, dual shed, then
/// sign rows for α, β, λ⁺, λ⁻, γ.
pub fn assemble_gh(net: &Network) -> Result<TuMatrix, OracleError> {
    let worst = net.generators_at().iter().map(Vec::len).max().unwrap_or(0);
    if worst > 1 {
        return Err(OracleError::MultipleGenerators(worst));
    }
    let (nk, nb, ng) = (net.n_lines(), net.n_buses(), net.n_generators());
    let lp = |k: usize| k;
    let lm = |k: usize| nk + k;
    let mu = |b: usize| 2 * nk + b;
    let ga = |g: usize| 2 * nk + nb + g;
    let al = |b: usize| 2 * nk + nb + ng + b;
    let be = |b: usize| 2 * nk + 2 * nb + ng + b;
    let h = 2 * nk + 3 * nb + ng;
    let ncols = h + 1;

    let mut col_labels = Vec::with_capacity(ncols);
    col_labels.extend((0..nk).map(|k| format!("lambda_plus_{k}")));
    col_labels.extend((0..nk).map(|k| format!("lambda_minus_{k}")));
    col_labels.extend((0..nb).map(|b| format!("mu_{b}")));
    col_labels.extend((0..ng).map(|g| format!("gamma_{g}")));
    col_labels.extend((0..nb).map(|b| format!("alpha_{b}")));
    col_labels.extend((0..nb).map(|b| format!("beta_{b}")));
    col_labels.push("h".into());

    let mut entries = Vec::new();
    let mut row_labels = Vec::new();
    let mut push = |label: String, nz: &[(usize, i64)]| {
        let mut row = vec![0i64; ncols];
        for &(c, v) in nz {
            row[c] += v;
        }
        entries.push(row);
        row_labels.push(label);
    };
    for (k, line) in net.lines().iter().enumerate() {
        push(format!("flow_le_{k}"), &[(lp(k), 1), (lm(k), -1), (mu(line.to), 1), (mu(line.from), -1)]);
    }
    for (k, line) in net.lines().iter().enumerate() {
        push(format!("flow_ge_{k}"), &[(lp(k), -1), (lm(k), 1), (mu(line.to), -1), (mu(line.from), 1)]);
    }
    for (g, gen) in net.generators().iter().enumerate() {
        push(format!("dispatch_{g}"), &[(mu(gen.bus), 1), (ga(g), -1)]);
    }
    for b in 0..nb {
        push(format!("shed_{b}"), &[(mu(b), 1), (al(b), 1), (be(b), -1), (h, 1)]);
    }
    for b in 0..nb {
        push(format!("alpha_nonneg_{b}"), &[(al(b), -1)]);
    }
    for b in 0..nb {
        push(format!("beta_nonneg_{b}"), &[(be(b), -1)]);
    }
    for k in 0..nk {
        push(format!("lambda_plus_nonneg_{k}"), &[(lp(k), -1)]);
    }
    for k in 0..nk {
        push(format!("lambda_minus_nonneg_{k}"), &[(lm(k), -1)]);
    }
    for g in 0..ng {
        push(format!("gamma_nonneg_{g}"), &[(ga(g), -1)]);
    }
    Ok(TuMatrix { entries, row_labels, col_labels })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuLimits {
    /// Largest minor order enumerated.
    pub max_order: usize,
    /// Total number of minors the enumeration may visit.
    pub max_minors: u64,
    /// Largest core width for the column-partition check.
    pub gh_max_cols: usize,
}

impl Default for TuLimits {
    fn default() -> Self {
        TuLimits { max_order: 12, max_minors: 20_000_000, gh_max_cols: 16 }
    }
}

/// A square submatrix, in original row and column indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Minor {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub det: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GhouilaHouri {
    pub subsets_checked: u64,
    /// A column subset (original indices) that admits no valid signing.
    pub failing_subset: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuReport {
    /// No counterexample was found.
    pub passed: bool,
    /// The checks performed cover every square submatrix.
    pub proved: bool,
    pub witness: Option<Minor>,
    /// Rows and columns left after removing unit, zero, repeated and
    /// negated lines, which cannot change the outcome.
    pub core_rows: Vec<usize>,
    pub core_cols: Vec<usize>,
    pub minors_checked: u64,
    pub max_order_checked: usize,
    pub ghouila_houri: Option<GhouilaHouri>,
}

/// Drop rows and columns that cannot create a bad minor: all-zero lines,
/// lines with a single ±1 (Laplace expansion along it), and lines equal to
/// or the negation of an earlier one.
fn reduce(a: &[Vec<i64>]) -> (Vec<usize>, Vec<usize>) {
    let mut rows: Vec<usize> = (0..a.len()).collect();
    let mut cols: Vec<usize> = (0..a.first().map_or(0, Vec::len)).collect();
    loop {
        let before = (rows.len(), cols.len());
        let row_of = |r: usize, cols: &[usize]| cols.iter().map(|&c| a[r][c]).collect::<Vec<_>>();
        let mut seen: Vec<Vec<i64>> = Vec::new();
        rows.retain(|&r| {
            let v = row_of(r, &cols);
            let nz = v.iter().filter(|x| **x != 0).count();
            let neg: Vec<i64> = v.iter().map(|x| -x).collect();
            if nz <= 1 || seen.contains(&v) || seen.contains(&neg) {
                return false;
            }
            seen.push(v);
            true
        });
        let col_of = |c: usize, rows: &[usize]| rows.iter().map(|&r| a[r][c]).collect::<Vec<_>>();
        let mut seen: Vec<Vec<i64>> = Vec::new();
        cols.retain(|&c| {
            let v = col_of(c, &rows);
            let nz = v.iter().filter(|x| **x != 0).count();
            let neg: Vec<i64> = v.iter().map(|x| -x).collect();
            if nz <= 1 || seen.contains(&v) || seen.contains(&neg) {
                return false;
            }
            seen.push(v);
            true
        });
        if (rows.len(), cols.len()) == before {
            return (rows, cols);
        }
    }
}

/// Exact integer determinant by fraction-free elimination.
pub(crate) fn det_bareiss(mut m: Vec<Vec<i64>>) -> i64 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut sign = 1;
    let mut prev = 1i64;
    for k in 0..n - 1 {
        if m[k][k] == 0 {
            let Some(p) = (k + 1..n).find(|&i| m[i][k] != 0) else { return 0 };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
            m[i][k] = 0;
        }
        prev = m[k][k];
    }
    sign * m[n - 1][n - 1]
}

fn binom(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i + 1) as u64)
}

fn combos(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) -> bool {
    if k > n {
        return true;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        if !f(&cur) {
            return false;
        }
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else { return true };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Minors of order 2..=max_order of the core. Returns the first bad one.
fn check_minors(core: &[Vec<i64>], max_order: usize, checked: &mut u64) -> Option<(Vec<usize>, Vec<usize>, i64)> {
    let r = core.len();
    let c = core.first().map_or(0, Vec::len);
    for k in 2..=max_order.min(r).min(c) {
        let mut bad = None;
        combos(r, k, |rs| {
            combos(c, k, |cs| {
                // a line with at most one nonzero reduces to a smaller,
                // already checked minor
                let thin_row = rs.iter().any(|&i| cs.iter().filter(|&&j| core[i][j] != 0).count() < 2);
                let thin_col = cs.iter().any(|&j| rs.iter().filter(|&&i| core[i][j] != 0).count() < 2);
                if thin_row || thin_col {
                    return true;
                }
                *checked += 1;
                let sub: Vec<Vec<i64>> = rs.iter().map(|&i| cs.iter().map(|&j| core[i][j]).collect()).collect();
                let d = det_bareiss(sub);
                if d.abs() > 1 {
                    bad = Some((rs.to_vec(), cs.to_vec(), d));
                    return false;
                }
                true
            })
        });
        if bad.is_some() {
            return bad;
        }
    }
    None
}

/// Every column subset must split into two groups whose difference of sums
/// has entries in {−1, 0, 1}.
fn ghouila_houri(core: &[Vec<i64>], checked: &mut u64) -> Option<Vec<usize>> {
    let c = core.first().map_or(0, Vec::len);
    for mask in 1u64..(1u64 << c) {
        *checked += 1;
        let cols: Vec<usize> = (0..c).filter(|j| mask >> j & 1 == 1).collect();
        let mut ok = false;
        // the first column's sign can be fixed
        for signs in 0u64..(1u64 << (cols.len() - 1)) {
            let good = core.iter().all(|row| {
                let s: i64 = cols
                    .iter()
                    .enumerate()
                    .map(|(t, &j)| if t > 0 && signs >> (t - 1) & 1 == 1 { -row[j] } else { row[j] })
                    .sum();
                s.abs() <= 1
            });
            if good {
                ok = true;
                break;
            }
        }
        if !ok {
            return Some(cols);
        }
    }
    None
}

/// Check that every square submatrix has determinant in {−1, 0, 1}.
///
/// Entries are checked first, then the matrix is reduced to a core and its
/// minors enumerated up to `max_order`. When that does not reach the full
/// order, the column-partition criterion is run on the core if it is narrow
/// enough.
pub fn verify_total_unimodularity(m: &TuMatrix, limits: &TuLimits) -> Result<TuReport, OracleError> {
    let a = &m.entries;
    if a.iter().any(|r| r.len() != m.n_cols()) {
        return Err(OracleError::Limits("ragged matrix".into()));
    }
    let mut report = TuReport {
        passed: true,
        proved: false,
        witness: None,
        core_rows: Vec::new(),
        core_cols: Vec::new(),
        minors_checked: 0,
        max_order_checked: 1,
        ghouila_houri: None,
    };
    for (i, row) in a.iter().enumerate() {
        if let Some(j) = row.iter().position(|x| x.abs() > 1) {
            report.passed = false;
            report.proved = true;
            report.witness = Some(Minor { rows: vec![i], cols: vec![j], det: row[j] });
            return Ok(report);
        }
    }
    let (rows, cols) = reduce(a);
    let core: Vec<Vec<i64>> = rows.iter().map(|&i| cols.iter().map(|&j| a[i][j]).collect()).collect();
    report.core_rows = rows.clone();
    report.core_cols = cols.clone();
    let full = rows.len().min(cols.len());
    if full <= 1 {
        report.proved = true;
        report.max_order_checked = full.max(1);
        return Ok(report);
    }

    let mut order = 1;
    let mut budget = 0u64;
    for k in 2..=limits.max_order.min(full) {
        budget = budget.saturating_add(binom(rows.len(), k).saturating_mul(binom(cols.len(), k)));
        if budget > limits.max_minors {
            break;
        }
        order = k;
    }
    if order >= 2 {
        if let Some((rs, cs, det)) = check_minors(&core, order, &mut report.minors_checked) {
            report.passed = false;
            report.proved = true;
            report.witness = Some(Minor { rows: rs.iter().map(|&i| rows[i]).collect(), cols: cs.iter().map(|&j| cols[j]).collect(), det });
            return Ok(report);
        }
    }
    report.max_order_checked = order;
    if order == full {
        report.proved = true;
        return Ok(report);
    }
    if cols.len() <= limits.gh_max_cols {
        let mut checked = 0;
        let failing = ghouila_houri(&core, &mut checked).map(|s| s.iter().map(|&j| cols[j]).collect::<Vec<_>>());
        report.passed = failing.is_none();
        report.proved = true;
        report.ghouila_houri = Some(GhouilaHouri { subsets_checked: checked, failing_subset: failing });
        return Ok(report);
    }
    if order < 2 {
        return Err(OracleError::Limits(format!(
            "core is {}x{}; raise max_minors or gh_max_cols",
            rows.len(),
            cols.len()
        )));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::fixtures::triad;
    use crate::netmodel::{aggregate_generators, Bus, BusId, GenId, Generator, Line, LineId};

    fn two_bus() -> Network {
        let buses = vec![Bus { id: BusId(1), demand: 0.0 }, Bus { id: BusId(2), demand: 1.0 }];
        let lines = vec![Line { id: LineId(1), from: 0, to: 1, susceptance: 1.0, limit: 1.0 }];
        let gens = vec![
            Generator { id: GenId(1), bus: 0, pmax: 0.5 },
            Generator { id: GenId(2), bus: 0, pmax: 0.7 },
            Generator { id: GenId(3), bus: 1, pmax: 0.2 },
        ];
        Network::new(1.0, buses, lines, gens).unwrap()
    }

    #[test]
    fn dimensions() {
        let net = aggregate_generators(&two_bus());
        let m = assemble_gh(&net).unwrap();
        let (k, b, g) = (1, 2, 2);
        assert_eq!(m.n_rows(), 4 * k + 2 * g + 3 * b);
        assert_eq!(m.n_cols(), 2 * k + 3 * b + g + 1);
        assert!(matches!(assemble_gh(&two_bus()), Err(OracleError::MultipleGenerators(2))));
    }

    fn full_minor_scan(a: &[Vec<i64>]) -> bool {
        let r = a.len();
        let c = a[0].len();
        let mut ok = true;
        for k in 1..=r.min(c) {
            combos(r, k, |rs| {
                combos(c, k, |cs| {
                    let sub = rs.iter().map(|&i| cs.iter().map(|&j| a[i][j]).collect()).collect();
                    ok &= det_bareiss(sub).abs() <= 1;
                    ok
                })
            });
        }
        ok
    }

    #[test]
    fn two_bus_is_tu_by_every_route() {
        let net = aggregate_generators(&two_bus());
        let m = assemble_gh(&net).unwrap();
        let rep = verify_total_unimodularity(&m, &TuLimits::default()).unwrap();
        assert!(rep.passed && rep.proved);
        // the reduction must not hide anything: compare with a scan of the raw matrix
        assert!(full_minor_scan(&m.entries));
    }

    #[test]
    fn triad_to_order_six() {
        let m = assemble_gh(&triad()).unwrap();
        assert!(m.entries.iter().flatten().all(|x| x.abs() <= 1));
        let rep = verify_total_unimodularity(&m, &TuLimits { max_order: 6, ..Default::default() }).unwrap();
        assert!(rep.passed, "{rep:?}");
        let gh = verify_total_unimodularity(&m, &TuLimits { max_order: 1, max_minors: 0, gh_max_cols: 16 }).unwrap();
        assert!(gh.passed && gh.ghouila_houri.is_some());
    }

    #[test]
    fn corrupted_entry_is_caught() {
        let mut m = assemble_gh(&triad()).unwrap();
        m.entries[0][0] = 2;
        let rep = verify_total_unimodularity(&m, &TuLimits::default()).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.witness.unwrap(), Minor { rows: vec![0], cols: vec![0], det: 2 });
    }

    #[test]
    fn non_tu_core_gets_a_witness() {
        // odd cycle incidence: determinant 2
        let m = TuMatrix {
            entries: vec![vec![1, 1, 0], vec![0, 1, 1], vec![1, 0, 1]],
            row_labels: vec!["a".into(), "b".into(), "c".into()],
            col_labels: vec!["x".into(), "y".into(), "z".into()],
        };
        let rep = verify_total_unimodularity(&m, &TuLimits::default()).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.witness.unwrap().det.abs(), 2);
        let gh = verify_total_unimodularity(&m, &TuLimits { max_order: 2, max_minors: 1000, gh_max_cols: 8 }).unwrap();
        assert!(!gh.passed);
        assert!(gh.ghouila_houri.unwrap().failing_subset.is_some());
    }

    #[test]
    fn bareiss_matches_known_values() {
        assert_eq!(det_bareiss(vec![vec![2, 1], vec![1, 3]]), 5);
        assert_eq!(det_bareiss(vec![vec![0, 1], vec![1, 0]]), -1);
        assert_eq!(det_bareiss(vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 10]]), -3);
    }
}
