//! Binary LDPC codes: parity-check storage, alist I/O, systematic encoding by
//! GF(2) elimination, seeded progressive-edge-growth construction and a
//! flooding sum-product decoder.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BitBeliefs, BeliefKind, LLR_CLAMP};
use crate::{Error, Result};

/// Default cap on sum-product iterations per decoder call.
pub const DEFAULT_BP_ITERS: usize = 50;

/// Dense GF(2) row packed into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
struct BitRow(Vec<u64>);

impl BitRow {
    fn zeros(len: usize) -> Self {
        Self(vec![0; len.div_ceil(64)])
    }

    fn get(&self, i: usize) -> bool {
        (self.0[i / 64] >> (i % 64)) & 1 == 1
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn xor_assign(&mut self, other: &BitRow) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }
}

/// Parity-check code with `n` coded bits and `k` information bits.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    /// Variable indices of each check.
    checks: Vec<Vec<usize>>,
    /// Check indices of each variable.
    vars: Vec<Vec<usize>>,
    /// Information positions in ascending order.
    info_pos: Vec<usize>,
    /// `(parity position, info-index dependencies)` from the reduced form.
    parity_rules: Vec<(usize, Vec<usize>)>,
}

impl LdpcCode {
    /// Builds a code from the variable lists of its checks.
    pub fn from_checks(n: usize, checks: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 || checks.is_empty() {
            return Err(Error::invalid("code needs at least one bit and one check"));
        }
        let mut vars = vec![Vec::new(); n];
        for (c, row) in checks.iter().enumerate() {
            if row.is_empty() {
                return Err(Error::invalid(format!("check {c} is empty")));
            }
            for (i, &v) in row.iter().enumerate() {
                if v >= n {
                    return Err(Error::invalid(format!("check {c} references bit {v} >= {n}")));
                }
                if row[..i].contains(&v) {
                    return Err(Error::invalid(format!("check {c} lists bit {v} twice")));
                }
                vars[v].push(c);
            }
        }
        let (info_pos, parity_rules) = systematic_form(n, &checks);
        let k = info_pos.len();
        if k == 0 || k == n {
            return Err(Error::invalid(format!("code has {k} information bits out of {n}")));
        }
        Ok(Self {
            n,
            k,
            checks,
            vars,
            info_pos,
            parity_rules,
        })
    }

    /// Rate-`k/n` code whose parity part is a dual-diagonal staircase and whose
    /// information columns have weights 3, 4 and 5 (a quarter, a half and a
    /// quarter of them) placed by progressive edge growth. Deterministic in
    /// `seed`.
    pub fn generate(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::invalid(format!("need 0 < k < n, got k={k}, n={n}")));
        }
        let m = n - k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut col_checks: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut check_cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for j in 0..m {
            let v = k + j;
            col_checks[v].push(j);
            check_cols[j].push(v);
            if j + 1 < m {
                col_checks[v].push(j + 1);
                check_cols[j + 1].push(v);
            }
        }
        let mut degrees: Vec<usize> = (0..k)
            .map(|i| match 4 * i / k {
                0 => 3,
                3 => 5,
                _ => 4,
            })
            .map(|d: usize| d.min(m))
            .collect();
        degrees.shuffle(&mut rng);
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&v| degrees[v]);
        for v in order {
            for _ in 0..degrees[v] {
                let candidates = peg_candidates(v, &col_checks, &check_cols, m);
                let min_deg = candidates.iter().map(|&c| check_cols[c].len()).min().unwrap_or(0);
                let lightest: Vec<usize> = candidates
                    .into_iter()
                    .filter(|&c| check_cols[c].len() == min_deg)
                    .collect();
                let &c = lightest
                    .choose(&mut rng)
                    .ok_or_else(|| Error::Numerical("edge placement found no check".into()))?;
                col_checks[v].push(c);
                check_cols[c].push(v);
            }
        }
        for row in &mut check_cols {
            row.sort_unstable();
        }
        Self::from_checks(n, check_cols)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_checks(&self) -> usize {
        self.checks.len()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_pos
    }

    pub fn edges(&self) -> usize {
        self.checks.iter().map(Vec::len).sum()
    }

    pub fn parity_ok(&self, bits: &[u8]) -> bool {
        bits.len() == self.n
            && self
                .checks
                .iter()
                .all(|row| row.iter().fold(0u8, |acc, &v| acc ^ bits[v]) == 0)
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k {
            return Err(Error::Dimension {
                what: "information bits",
                expected: self.k,
                got: info.len(),
            });
        }
        if let Some(b) = info.iter().find(|b| **b > 1) {
            return Err(Error::invalid(format!("non-binary information bit {b}")));
        }
        let mut cw = vec![0u8; self.n];
        for (&pos, &b) in self.info_pos.iter().zip(info) {
            cw[pos] = b;
        }
        for (pos, deps) in &self.parity_rules {
            cw[*pos] = deps.iter().fold(0u8, |acc, &i| acc ^ info[i]);
        }
        Ok(cw)
    }

    /// Information bits at their positions in a codeword.
    pub fn extract_info(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_pos.iter().map(|&p| codeword[p]).collect()
    }

    /// MacKay alist text with zero padding.
    pub fn to_alist(&self) -> String {
        let max_col = self.vars.iter().map(Vec::len).max().unwrap_or(0);
        let max_row = self.checks.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.n, self.checks.len());
        let _ = writeln!(out, "{max_col} {max_row}");
        let join = |xs: &mut dyn Iterator<Item = usize>| xs.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(out, "{}", join(&mut self.vars.iter().map(Vec::len)));
        let _ = writeln!(out, "{}", join(&mut self.checks.iter().map(Vec::len)));
        for list in &self.vars {
            let padded = list.iter().map(|c| c + 1).chain(std::iter::repeat(0)).take(max_col);
            let _ = writeln!(out, "{}", join(&mut padded.into_iter()));
        }
        for list in &self.checks {
            let padded = list.iter().map(|v| v + 1).chain(std::iter::repeat(0)).take(max_row);
            let _ = writeln!(out, "{}", join(&mut padded.into_iter()));
        }
        out
    }

    pub fn parse_alist(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next_numbers = |what: &str| -> Result<(usize, Vec<usize>)> {
            let (line, text) = lines.next().ok_or(Error::Parse {
                line: 0,
                msg: format!("missing {what}"),
            })?;
            let nums = text
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|e| Error::Parse {
                        line,
                        msg: format!("{what}: {t:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((line, nums))
        };
        let (line, dims) = next_numbers("dimensions")?;
        let [n, m] = dims[..] else {
            return Err(Error::Parse {
                line,
                msg: "expected `n m`".into(),
            });
        };
        next_numbers("maximum degrees")?;
        let (line, col_deg) = next_numbers("column degrees")?;
        if col_deg.len() != n {
            return Err(Error::Parse {
                line,
                msg: format!("{} column degrees for {n} columns", col_deg.len()),
            });
        }
        let (line, row_deg) = next_numbers("row degrees")?;
        if row_deg.len() != m {
            return Err(Error::Parse {
                line,
                msg: format!("{} row degrees for {m} rows", row_deg.len()),
            });
        }
        let mut from_cols = vec![Vec::new(); m];
        for (v, &d) in col_deg.iter().enumerate() {
            let (line, entries) = next_numbers("column list")?;
            let list: Vec<usize> = entries.into_iter().filter(|&x| x != 0).collect();
            if list.len() != d || list.iter().any(|&c| c > m) {
                return Err(Error::Parse {
                    line,
                    msg: format!("column {} does not list {d} checks in 1..={m}", v + 1),
                });
            }
            for c in list {
                from_cols[c - 1].push(v);
            }
        }
        let mut checks = Vec::with_capacity(m);
        for (c, &d) in row_deg.iter().enumerate() {
            let (line, entries) = next_numbers("row list")?;
            let list: Vec<usize> = entries.into_iter().filter(|&x| x != 0).collect();
            if list.len() != d || list.iter().any(|&v| v > n) {
                return Err(Error::Parse {
                    line,
                    msg: format!("row {} does not list {d} bits in 1..={n}", c + 1),
                });
            }
            let mut row: Vec<usize> = list.into_iter().map(|v| v - 1).collect();
            let mut check = row.clone();
            check.sort_unstable();
            from_cols[c].sort_unstable();
            if check != from_cols[c] {
                return Err(Error::Parse {
                    line,
                    msg: format!("row {} disagrees with the column lists", c + 1),
                });
            }
            row.sort_unstable();
            checks.push(row);
        }
        Self::from_checks(n, checks)
    }

    pub fn load_alist(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_alist(&text)
    }

    pub fn save_alist(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_alist()).map_err(|e| Error::io(path, e))
    }

    /// Flooding sum-product decoding of `prior` (LLRs `ln P0/P1`).
    pub fn decode(&self, prior: &BitBeliefs, max_iters: usize) -> Result<DecodeOutput> {
        if prior.len() != self.n {
            return Err(Error::Dimension {
                what: "decoder input",
                expected: self.n,
                got: prior.len(),
            });
        }
        let llr_in = prior.llrs();
        let mut post: Vec<f64> = llr_in.to_vec();
        let mut hard: Vec<u8> = post.iter().map(|&l| u8::from(l < 0.0)).collect();
        let mut parity_ok = self.parity_ok(&hard);
        let mut iters = 0;

        // Edge e of check c sits at offsets[c] + position in checks[c].
        let mut offsets = Vec::with_capacity(self.checks.len() + 1);
        offsets.push(0);
        for row in &self.checks {
            offsets.push(offsets.last().unwrap() + row.len());
        }
        let mut c2v = vec![0.0; self.edges()];
        let mut v2c = vec![0.0; self.edges()];
        let mut tanh = vec![0.0; self.edges()];
        while !parity_ok && iters < max_iters {
            for (c, row) in self.checks.iter().enumerate() {
                let base = offsets[c];
                for (i, &v) in row.iter().enumerate() {
                    v2c[base + i] = post[v] - c2v[base + i];
                }
                check_update(
                    &v2c[base..base + row.len()],
                    &mut tanh[base..base + row.len()],
                    &mut c2v[base..base + row.len()],
                );
            }
            post.copy_from_slice(llr_in);
            for (c, row) in self.checks.iter().enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    post[v] += c2v[offsets[c] + i];
                }
            }
            for (h, &l) in hard.iter_mut().zip(&post) {
                *h = u8::from(l < 0.0);
            }
            iters += 1;
            parity_ok = self.parity_ok(&hard);
        }
        for l in &mut post {
            *l = l.clamp(-LLR_CLAMP, LLR_CLAMP);
        }
        let info = self.extract_info(&hard);
        Ok(DecodeOutput {
            posterior: BitBeliefs::from_llrs(BeliefKind::Posterior, post),
            codeword: hard,
            info,
            parity_ok,
            iters,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub posterior: BitBeliefs,
    pub codeword: Vec<u8>,
    pub info: Vec<u8>,
    pub parity_ok: bool,
    pub iters: usize,
}

/// Tanh rule for one check: `out[e] = 2 atanh(prod_{f != e} tanh(in[f]/2))`,
/// with the leave-one-out products formed from prefix and suffix products.
fn check_update(incoming: &[f64], tanh: &mut [f64], out: &mut [f64]) {
    for (t, &x) in tanh.iter_mut().zip(incoming) {
        let e = (-x.abs()).exp();
        *t = ((1.0 - e) / (1.0 + e)).copysign(x);
    }
    let mut prefix = 1.0;
    for (o, &t) in out.iter_mut().zip(tanh.iter()) {
        *o = prefix;
        prefix *= t;
    }
    let mut suffix = 1.0;
    for (o, &t) in out.iter_mut().zip(tanh.iter()).rev() {
        let p = *o * suffix;
        let mag = ((1.0 + p.abs()) / (1.0 - p.abs()).max(1e-300)).ln().min(LLR_CLAMP);
        *o = mag.copysign(p);
        suffix *= t;
    }
}

/// Checks farthest from `v` in the current Tanner graph, or those it cannot
/// reach at all.
fn peg_candidates(v: usize, col_checks: &[Vec<usize>], check_cols: &[Vec<usize>], m: usize) -> Vec<usize> {
    if col_checks[v].is_empty() {
        return (0..m).collect();
    }
    let mut seen_check = vec![false; m];
    let mut seen_var = vec![false; col_checks.len()];
    seen_var[v] = true;
    let mut frontier = vec![v];
    let mut layer: Vec<usize> = Vec::new();
    let mut reached = 0;
    loop {
        let mut next_layer = Vec::new();
        for &u in &frontier {
            for &c in &col_checks[u] {
                if !seen_check[c] {
                    seen_check[c] = true;
                    next_layer.push(c);
                }
            }
        }
        reached += next_layer.len();
        if next_layer.is_empty() || reached == m {
            if reached < m {
                return (0..m).filter(|&c| !seen_check[c]).collect();
            }
            return if next_layer.is_empty() { layer } else { next_layer };
        }
        let mut next_vars = Vec::new();
        for &c in &next_layer {
            for &u in &check_cols[c] {
                if !seen_var[u] {
                    seen_var[u] = true;
                    next_vars.push(u);
                }
            }
        }
        layer = next_layer;
        frontier = next_vars;
    }
}

/// Reduced row echelon form of `H`, pivoting from the last column so that
/// parity positions fall at the end when the structure allows. Returns the
/// information positions and, for each pivot, the information indices whose
/// sum gives that parity bit.
fn systematic_form(n: usize, checks: &[Vec<usize>]) -> (Vec<usize>, Vec<(usize, Vec<usize>)>) {
    let mut rows: Vec<BitRow> = checks
        .iter()
        .map(|row| {
            let mut r = BitRow::zeros(n);
            for &v in row {
                r.set(v);
            }
            r
        })
        .collect();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut next_row = 0;
    for col in (0..n).rev() {
        if next_row == rows.len() {
            break;
        }
        let Some(found) = (next_row..rows.len()).find(|&r| rows[r].get(col)) else {
            continue;
        };
        rows.swap(next_row, found);
        let pivot = rows[next_row].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != next_row && row.get(col) {
                row.xor_assign(&pivot);
            }
        }
        pivots.push((next_row, col));
        next_row += 1;
    }
    let mut is_pivot = vec![false; n];
    for &(_, col) in &pivots {
        is_pivot[col] = true;
    }
    let info_pos: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let mut rules: Vec<(usize, Vec<usize>)> = pivots
        .iter()
        .map(|&(r, col)| {
            let deps = info_pos
                .iter()
                .enumerate()
                .filter(|(_, &p)| rows[r].get(p))
                .map(|(i, _)| i)
                .collect();
            (col, deps)
        })
        .collect();
    rules.sort_by_key(|(col, _)| *col);
    (info_pos, rules)
}
