//! Zonal polynomial coefficients in the monomial symmetric basis.
//!
//! `C_κ = Σ_{λ ≤ κ} c_{κλ} m_λ`. The unnormalised rows come from James'
//! recurrence
//!
//! ```text
//! c_{κλ} = Σ_{λ<μ≤κ} (l_i − l_j + 2t) c_{κμ} / (ρ_κ − ρ_λ),   ρ_κ = Σ k_i (k_i − i)
//! ```
//!
//! where `μ` runs over the rearrangements of `(…, l_i + t, …, l_j − t, …)`.
//! Up to [`EXACT_WEIGHT_MAX`] the rows are then scaled in exact rational
//! arithmetic so that `Σ_{|κ|=k} C_κ = (tr)^k`; beyond that the recurrence
//! runs in `f64` and each row is scaled to hit the closed form for `C_κ(I_d)`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use super::partition::partitions_of;

/// Largest weight whose table is built in exact arithmetic.
pub const EXACT_WEIGHT_MAX: usize = 20;

/// Environment variable naming a directory for the on-disk table cache.
pub const CACHE_ENV: &str = "NCW_ZONAL_CACHE";

const CACHE_VERSION: u32 = 1;

/// Coefficients of every `C_κ` with `|κ| = weight` and `ℓ(κ) ≤ max_len`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalTable {
    pub weight: usize,
    pub max_len: usize,
    /// Partitions of `weight`, lexicographically descending; rows and columns
    /// of the coefficient matrices follow this order.
    pub partitions: Vec<Vec<usize>>,
    /// `coeffs[a][b] = c_{κ_a κ_b}` (zero for `b < a`).
    pub coeffs: Vec<Vec<f64>>,
    /// Exact coefficients when `weight ≤ EXACT_WEIGHT_MAX`.
    pub exact: Option<Vec<Vec<BigRational>>>,
    index: HashMap<Vec<usize>, usize>,
}

impl ZonalTable {
    pub fn index_of(&self, parts: &[usize]) -> Option<usize> {
        self.index.get(parts).copied()
    }

    /// `C_κ(x)` for every `κ` in the table, at spectrum `eigs`.
    pub fn evaluate_all(&self, eigs: &[f64]) -> Vec<f64> {
        let mons = monomials(&self.partitions, eigs, 0);
        self.combine(&mons)
    }

    /// `C_κ(x) / det x` for every `κ` in the table, which must all have full
    /// length `eigs.len()`. Evaluated through `m_λ / Π x_i = m_{λ − (1,…,1)}`
    /// so it stays finite as eigenvalues approach zero.
    pub fn evaluate_all_over_det(&self, eigs: &[f64]) -> Vec<f64> {
        let mons = monomials(&self.partitions, eigs, 1);
        self.combine(&mons)
    }

    fn combine(&self, mons: &[f64]) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|row| row.iter().zip(mons).map(|(c, m)| c * m).sum())
            .collect()
    }
}

/// Monomial symmetric functions `m_λ(eigs)` (with every part reduced by
/// `shift` first) for each `λ`; partitions too long for `eigs` give zero.
pub fn monomials(parts: &[Vec<usize>], eigs: &[f64], shift: usize) -> Vec<f64> {
    let n = eigs.len();
    let mut memo = HashMap::new();
    parts
        .iter()
        .map(|p| {
            if p.len() > n || (shift > 0 && p.len() < n) {
                return 0.0;
            }
            let mut q: Vec<usize> = p.iter().map(|&v| v - shift).filter(|&v| v > 0).collect();
            q.sort_unstable_by(|a, b| b.cmp(a));
            msym(&q, eigs, &mut memo)
        })
        .collect()
}

fn msym(parts: &[usize], x: &[f64], memo: &mut HashMap<(Vec<usize>, usize), f64>) -> f64 {
    if parts.is_empty() {
        return 1.0;
    }
    let n = x.len();
    if parts.len() > n {
        return 0.0;
    }
    let key = (parts.to_vec(), n);
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let last = x[n - 1];
    let rest = &x[..n - 1];
    let mut total = msym(parts, rest, memo);
    let mut prev = None;
    for i in 0..parts.len() {
        if prev == Some(parts[i]) {
            continue;
        }
        prev = Some(parts[i]);
        let mut reduced = parts.to_vec();
        reduced.remove(i);
        total += last.powi(parts[i] as i32) * msym(&reduced, rest, memo);
    }
    memo.insert(key, total);
    total
}

fn rho(parts: &[usize]) -> i64 {
    parts
        .iter()
        .enumerate()
        .map(|(i, &k)| k as i64 * (k as i64 - i as i64 - 1))
        .sum()
}

/// Arithmetic the recurrence needs; implemented for `f64` and `BigRational`.
trait Coef: Clone {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn from_i64(v: i64) -> Self;
    fn add_scaled(&mut self, other: &Self, factor: i64);
    fn div_i64(&self, v: i64) -> Self;
}

impl Coef for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn add_scaled(&mut self, other: &Self, factor: i64) {
        *self += other * factor as f64;
    }
    fn div_i64(&self, v: i64) -> Self {
        self / v as f64
    }
}

impl Coef for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn add_scaled(&mut self, other: &Self, factor: i64) {
        *self += other * BigRational::from_integer(BigInt::from(factor));
    }
    fn div_i64(&self, v: i64) -> Self {
        self / BigRational::from_integer(BigInt::from(v))
    }
}

/// Unnormalised rows (`c_{κκ} = 1`).
fn james_rows<T: Coef>(
    partitions: &[Vec<usize>],
    index: &HashMap<Vec<usize>, usize>,
) -> Vec<Vec<T>> {
    let n = partitions.len();
    let rhos: Vec<i64> = partitions.iter().map(|p| rho(p)).collect();
    let mut rows = vec![vec![T::zero(); n]; n];
    for a in 0..n {
        rows[a][a] = T::from_i64(1);
        for b in a + 1..n {
            let lam = &partitions[b];
            let mut num = T::zero();
            for i in 0..lam.len() {
                for j in i + 1..lam.len() {
                    for t in 1..=lam[j] {
                        let mut mu = lam.clone();
                        mu[i] += t;
                        mu[j] -= t;
                        let mut mu: Vec<usize> = mu.into_iter().filter(|&v| v > 0).collect();
                        mu.sort_unstable_by(|x, y| y.cmp(x));
                        // μ above κ in lexicographic order has no coefficient in this row
                        let Some(&c) = index.get(&mu) else { continue };
                        if c < a {
                            continue;
                        }
                        let factor = lam[i] as i64 - lam[j] as i64 + 2 * t as i64;
                        let src = rows[a][c].clone();
                        num.add_scaled(&src, factor);
                    }
                }
            }
            if !num.is_zero() {
                let denom = rhos[a] - rhos[b];
                assert!(denom != 0, "zonal recurrence: ρ tie with nonzero numerator");
                rows[a][b] = num.div_i64(denom);
            }
        }
    }
    rows
}

fn multinomial(weight: usize, parts: &[usize]) -> BigInt {
    let fact = |n: usize| (1..=n).fold(BigInt::one(), |acc, v| acc * BigInt::from(v));
    parts.iter().fold(fact(weight), |acc, &p| acc / fact(p))
}

fn build(weight: usize, max_len: usize) -> ZonalTable {
    let partitions = partitions_of(weight, max_len);
    let index: HashMap<Vec<usize>, usize> = partitions
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, p)| (p, i))
        .collect();
    let n = partitions.len();
    if weight <= EXACT_WEIGHT_MAX {
        let mut rows: Vec<Vec<BigRational>> = james_rows(&partitions, &index);
        // (tr x)^k = Σ_λ k!/Π λ_i! m_λ; solve for the row scales top-down.
        let mut scale: Vec<BigRational> = Vec::with_capacity(n);
        for b in 0..n {
            let mut s = BigRational::from_integer(multinomial(weight, &partitions[b]));
            for a in 0..b {
                s -= &scale[a] * &rows[a][b];
            }
            scale.push(s);
        }
        for (row, s) in rows.iter_mut().zip(&scale) {
            for c in row.iter_mut() {
                *c *= s;
            }
        }
        let coeffs = rows
            .iter()
            .map(|r| r.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect())
            .collect();
        ZonalTable {
            weight,
            max_len,
            partitions,
            coeffs,
            exact: Some(rows),
            index,
        }
    } else {
        let mut rows: Vec<Vec<f64>> = james_rows(&partitions, &index);
        let ones = vec![1.0; max_len];
        let mons = monomials(&partitions, &ones, 0);
        for (row, p) in rows.iter_mut().zip(&partitions) {
            let at_identity: f64 = row.iter().zip(&mons).map(|(c, m)| c * m).sum();
            let kappa = super::Partition::new(p, max_len).expect("length bounded by max_len");
            let target = super::c_kappa_identity_f64(&kappa, max_len);
            let s = target / at_identity;
            row.iter_mut().for_each(|c| *c *= s);
        }
        ZonalTable {
            weight,
            max_len,
            partitions,
            coeffs: rows,
            exact: None,
            index,
        }
    }
}

static MEMORY: Lazy<Mutex<HashMap<(usize, usize), Arc<ZonalTable>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));
static DISK_OVERRIDE: Lazy<Mutex<Option<Option<PathBuf>>>> = Lazy::new(|| Mutex::new(None));

/// Overrides the on-disk cache directory (`None` disables it). Without an
/// override the directory comes from [`CACHE_ENV`].
pub fn set_cache_dir(dir: Option<PathBuf>) {
    *DISK_OVERRIDE.lock().expect("cache lock") = Some(dir);
}

fn cache_dir() -> Option<PathBuf> {
    if let Some(o) = DISK_OVERRIDE.lock().expect("cache lock").clone() {
        return o;
    }
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

/// Table for `(max_len, weight)`, built once per process and shared.
pub fn table(weight: usize, max_len: usize) -> Arc<ZonalTable> {
    let key = (max_len, weight);
    if let Some(t) = MEMORY.lock().expect("cache lock").get(&key) {
        return Arc::clone(t);
    }
    let dir = cache_dir();
    let t = dir
        .as_deref()
        .and_then(|d| load_table(d, weight, max_len))
        .unwrap_or_else(|| {
            let t = build(weight, max_len);
            if let Some(d) = dir.as_deref() {
                // the cache is an optimisation; failures to write are ignored
                let _ = store_table(d, &t);
            }
            t
        });
    let t = Arc::new(t);
    MEMORY
        .lock()
        .expect("cache lock")
        .entry(key)
        .or_insert_with(|| Arc::clone(&t));
    t
}

/// Builds a table without touching either cache.
pub fn table_uncached(weight: usize, max_len: usize) -> ZonalTable {
    build(weight, max_len)
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    version: u32,
    d: usize,
    weight: usize,
    partitions: Vec<Vec<usize>>,
    coeffs: Vec<Vec<f64>>,
    exact: Option<Vec<Vec<String>>>,
}

fn cache_path(dir: &Path, weight: usize, max_len: usize) -> PathBuf {
    dir.join(format!("zonal_v{CACHE_VERSION}_d{max_len}_w{weight}.json"))
}

pub fn store_table(dir: &Path, t: &ZonalTable) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let file = TableFile {
        version: CACHE_VERSION,
        d: t.max_len,
        weight: t.weight,
        partitions: t.partitions.clone(),
        coeffs: t.coeffs.clone(),
        exact: t.exact.as_ref().map(|rows| {
            rows.iter()
                .map(|r| r.iter().map(|c| c.to_string()).collect())
                .collect()
        }),
    };
    let json = serde_json::to_string(&file).map_err(std::io::Error::other)?;
    std::fs::write(cache_path(dir, t.weight, t.max_len), json)
}

pub fn load_table(dir: &Path, weight: usize, max_len: usize) -> Option<ZonalTable> {
    let text = std::fs::read_to_string(cache_path(dir, weight, max_len)).ok()?;
    let f: TableFile = serde_json::from_str(&text).ok()?;
    if f.version != CACHE_VERSION || f.d != max_len || f.weight != weight {
        return None;
    }
    let exact = match f.exact {
        Some(rows) => Some(
            rows.iter()
                .map(|r| {
                    r.iter()
                        .map(|s| s.parse::<BigRational>().ok())
                        .collect::<Option<Vec<_>>>()
                })
                .collect::<Option<Vec<_>>>()?,
        ),
        None => None,
    };
    let index = f
        .partitions
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, p)| (p, i))
        .collect();
    Some(ZonalTable {
        weight,
        max_len,
        partitions: f.partitions,
        coeffs: f.coeffs,
        exact,
        index,
    })
}
