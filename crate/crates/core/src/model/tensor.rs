use std::collections::BTreeMap;

use crate::{Error, Result};

/// Symmetric order-`q` probability tensor over `r` communities.
///
/// Entries are keyed by composition: the count vector `l` with `l_i` the
/// number of tensor indices equal to `i`, so `sum l_i = q`. Missing keys are
/// zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    q: usize,
    r: usize,
    entries: BTreeMap<Vec<u32>, f64>,
}

impl SymTensor {
    pub fn zeros(q: usize, r: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidTensor(format!("hyperedge size q = {q} < 2")));
        }
        if r == 0 {
            return Err(Error::InvalidTensor("r = 0".into()));
        }
        Ok(Self {
            q,
            r,
            entries: BTreeMap::new(),
        })
    }

    pub fn from_entries<I>(q: usize, r: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, f64)>,
    {
        let mut t = Self::zeros(q, r)?;
        for (k, v) in entries {
            t.set(&k, v)?;
        }
        Ok(t)
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn set(&mut self, comp: &[u32], p: f64) -> Result<()> {
        self.check_key(comp)?;
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidTensor(format!(
                "entry {comp:?} = {p} is not a finite non-negative number"
            )));
        }
        if p == 0.0 {
            self.entries.remove(comp);
        } else {
            self.entries.insert(comp.to_vec(), p);
        }
        Ok(())
    }

    fn check_key(&self, comp: &[u32]) -> Result<()> {
        if comp.len() != self.r {
            return Err(Error::InvalidTensor(format!(
                "composition {comp:?} has {} parts, expected {}",
                comp.len(),
                self.r
            )));
        }
        let s: u32 = comp.iter().sum();
        if s as usize != self.q {
            return Err(Error::InvalidTensor(format!(
                "composition {comp:?} sums to {s}, expected {}",
                self.q
            )));
        }
        Ok(())
    }

    /// Entry at a composition (0 when absent).
    pub fn get(&self, comp: &[u32]) -> f64 {
        self.entries.get(comp).copied().unwrap_or(0.0)
    }

    /// Entry `p_{i_1..i_q}` for an ordered type tuple.
    pub fn get_types(&self, types: &[usize]) -> f64 {
        let mut c = vec![0u32; self.r];
        for &t in types {
            c[t] += 1;
        }
        self.get(&c)
    }

    /// Non-zero entries in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u32>, f64)> {
        self.entries.iter().map(|(k, &v)| (k, v))
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.values().fold(0.0f64, |m, &v| m.max(v))
    }

    pub fn validate(&self) -> Result<()> {
        for (k, &v) in &self.entries {
            self.check_key(k)?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidTensor(format!("entry {k:?} = {v}")));
            }
        }
        Ok(())
    }
}

/// All compositions of `total` into `parts` non-negative parts, in
/// lexicographically decreasing order (`[total, 0, ..]` first).
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<u32>> {
    fn rec(rem: u32, idx: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let parts = cur.len();
        if idx == parts - 1 {
            cur[idx] = rem;
            out.push(cur.clone());
            return;
        }
        for v in (0..=rem).rev() {
            cur[idx] = v;
            rec(rem - v, idx + 1, cur, out);
        }
    }
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    rec(total as u32, 0, &mut vec![0; parts], &mut out);
    out
}

/// Multinomial coefficient `(sum c)! / prod c_i!`, as f64.
pub fn multinomial(c: &[u32]) -> f64 {
    let mut acc = 1.0;
    let mut n = 0u32;
    for &k in c {
        for j in 1..=k {
            n += 1;
            acc *= n as f64 / j as f64;
        }
    }
    acc.round()
}

/// `(a_in, b_out)` of the two-parameter tensor whose layer has expected
/// degree `d` and non-Perron eigenvalue `mu` when communities are balanced.
pub fn two_param_from_degree(r: usize, q: usize, d: f64, mu: f64) -> (f64, f64) {
    let b = d - mu;
    let a = b + mu * (r as f64).powi(q as i32 - 1);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn composition_counts_match_stars_and_bars() {
        for total in 0..6 {
            for parts in 1..5 {
                let cs = compositions(total, parts);
                assert_eq!(cs.len(), binom(total + parts - 1, parts - 1));
                assert!(cs.iter().all(|c| c.iter().sum::<u32>() as usize == total));
            }
        }
        assert_eq!(compositions(2, 2), vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn multinomials_sum_to_power() {
        // sum over compositions of multinomial = parts^total
        for total in 0..6 {
            for parts in 1..4 {
                let s: f64 = compositions(total, parts).iter().map(|c| multinomial(c)).sum();
                assert_eq!(s, (parts as f64).powi(total as i32));
            }
        }
        assert_eq!(multinomial(&[2, 1, 1]), 12.0);
    }

    #[test]
    fn rejects_bad_keys_and_values() {
        let mut t = SymTensor::zeros(3, 2).unwrap();
        assert!(t.set(&[2, 0], 1.0).is_err());
        assert!(t.set(&[2, 1, 0], 1.0).is_err());
        assert!(t.set(&[2, 1], -1.0).is_err());
        assert!(t.set(&[2, 1], f64::NAN).is_err());
        assert!(SymTensor::zeros(1, 2).is_err());
        t.set(&[2, 1], 0.5).unwrap();
        assert_eq!(t.get_types(&[1, 0, 0]), 0.5);
        assert_eq!(t.get_types(&[0, 1, 0]), 0.5);
        assert_eq!(t.get(&[1, 2]), 0.0);
    }

    #[test]
    fn two_param_solution_matches_hand_values() {
        assert_eq!(two_param_from_degree(2, 2, 2.0, 1.0), (3.0, 1.0));
        assert_eq!(two_param_from_degree(2, 4, 4.0, 1.0), (11.0, 3.0));
    }
}
