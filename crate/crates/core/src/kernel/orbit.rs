//! Hyperoctahedral orbit bookkeeping.
//!
//! Every site of the box `{x : |x|_inf <= R}` is represented by its canonical
//! form: the sorted vector of absolute coordinates. Orbit representatives are
//! enumerated in lexicographic order of these sorted tuples.

use rand::Rng;

/// Iterates over nondecreasing tuples `0 <= x_1 <= ... <= x_d <= radius`.
pub struct OrbitIter {
    current: Vec<u32>,
    radius: u32,
    done: bool,
}

impl OrbitIter {
    pub fn new(d: usize, radius: u32) -> Self {
        Self {
            current: vec![0; d],
            radius,
            done: d == 0,
        }
    }

    fn advance(&mut self) {
        let d = self.current.len();
        let mut i = d;
        while i > 0 {
            i -= 1;
            if self.current[i] < self.radius {
                let v = self.current[i] + 1;
                for c in &mut self.current[i..] {
                    *c = v;
                }
                return;
            }
        }
        self.done = true;
    }

    /// Calls `f` for every tuple, in order.
    pub fn for_each(mut self, mut f: impl FnMut(&[u32])) {
        while !self.done {
            f(&self.current);
            self.advance();
        }
    }
}

/// Number of orbit representatives in a box of the given radius.
pub fn orbit_count(d: usize, radius: u64) -> f64 {
    crate::numeric::binomial(radius + d as u64, d as u64)
}

/// Number of distinct images of a canonical tuple under signed permutations.
pub fn multiplicity(tuple: &[u32]) -> u32 {
    let d = tuple.len();
    let nonzero = tuple.iter().filter(|&&x| x != 0).count() as u32;
    let mut perms = factorial(d);
    let mut i = 0;
    while i < d {
        let mut j = i;
        while j < d && tuple[j] == tuple[i] {
            j += 1;
        }
        perms /= factorial(j - i);
        i = j;
    }
    perms << nonzero
}

pub fn factorial(n: usize) -> u32 {
    (1..=n as u32).product::<u32>().max(1)
}

/// Canonical (sorted absolute value) form of a site.
pub fn canonical(site: &[i64]) -> Vec<u32> {
    let mut c: Vec<u32> = site.iter().map(|x| x.unsigned_abs() as u32).collect();
    c.sort_unstable();
    c
}

/// All permutations of `0..d` in lexicographic order.
pub fn permutations(d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..d).collect();
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (1..d).rev().find(|&i| p[i - 1] < p[i]) else {
            break;
        };
        let j = (i..d).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// Writes a uniformly random signed permutation of `tuple` into `out`.
#[inline]
pub fn random_image<R: Rng + ?Sized>(tuple: &[u32], out: &mut [i64], rng: &mut R) {
    let d = tuple.len();
    for (o, &t) in out.iter_mut().zip(tuple) {
        *o = t as i64;
    }
    for i in (1..d).rev() {
        let j = rng.gen_range(0..=i);
        out.swap(i, j);
    }
    let signs: u32 = rng.gen();
    for (i, o) in out.iter_mut().enumerate() {
        if signs >> i & 1 == 1 {
            *o = -*o;
        }
    }
}

/// Calls `f` on every distinct signed permutation of `tuple`.
pub fn for_each_image(tuple: &[u32], perms: &[Vec<usize>], mut f: impl FnMut(&[i64])) {
    let d = tuple.len();
    let mut buf = vec![0i64; d];
    'perm: for p in perms {
        // among equal values keep only the order-preserving arrangement
        for i in 0..d {
            for j in i + 1..d {
                if tuple[p[i]] == tuple[p[j]] && p[i] > p[j] {
                    continue 'perm;
                }
            }
        }
        for signs in 0u32..(1 << d) {
            let mut skip = false;
            for i in 0..d {
                let v = tuple[p[i]] as i64;
                if signs >> i & 1 == 1 {
                    if v == 0 {
                        skip = true;
                        break;
                    }
                    buf[i] = -v;
                } else {
                    buf[i] = v;
                }
            }
            if !skip {
                f(&buf);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_box() {
        for d in 1..=4 {
            for r in 0..5u32 {
                let mut reps = 0u64;
                let mut sites = 0u64;
                OrbitIter::new(d, r).for_each(|t| {
                    reps += 1;
                    sites += multiplicity(t) as u64;
                });
                assert_eq!(reps as f64, orbit_count(d, r as u64));
                assert_eq!(sites, (2 * r as u64 + 1).pow(d as u32));
            }
        }
    }

    #[test]
    fn images_match_multiplicity() {
        let perms = permutations(3);
        for t in [[0u32, 0, 0], [0, 1, 1], [1, 2, 3], [2, 2, 2], [0, 0, 5]] {
            let mut n = 0;
            for_each_image(&t, &perms, |img| {
                assert_eq!(canonical(img), t.to_vec());
                n += 1;
            });
            assert_eq!(n, multiplicity(&t));
        }
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(1), vec![vec![0]]);
    }
}
