use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{BilliardError, Result};

/// A cyclic bounce sequence, stored in its lexicographically minimal rotation.
///
/// Symbols are 0-based obstacle indices; the textual form is 1-based
/// (`"123"`, or `"1-2-10"` once a label has more than one digit).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Itinerary {
    symbols: Vec<usize>,
}

fn min_rotation(s: &[usize]) -> usize {
    (0..s.len())
        .min_by(|&a, &b| {
            let ra = s[a..].iter().chain(&s[..a]);
            let rb = s[b..].iter().chain(&s[..b]);
            ra.cmp(rb)
        })
        .unwrap_or(0)
}

impl Itinerary {
    pub fn new(symbols: Vec<usize>) -> Result<Self> {
        let n = symbols.len();
        if n < 2 {
            return Err(BilliardError::InvalidItinerary(
                "an itinerary needs at least two bounces".into(),
            ));
        }
        if let Some(k) = (0..n).find(|&k| symbols[k] == symbols[(k + 1) % n]) {
            return Err(BilliardError::InvalidItinerary(format!(
                "obstacle {} repeats at cyclic position {}",
                symbols[k] + 1,
                k
            )));
        }
        let r = min_rotation(&symbols);
        let mut canon = symbols[r..].to_vec();
        canon.extend_from_slice(&symbols[..r]);
        Ok(Itinerary { symbols: canon })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Not a proper power of a shorter word.
    pub fn is_primitive(&self) -> bool {
        let n = self.symbols.len();
        (1..n)
            .filter(|d| n.is_multiple_of(*d))
            .all(|d| (0..n).any(|i| self.symbols[i] != self.symbols[(i + d) % n]))
    }

    pub fn max_symbol(&self) -> usize {
        self.symbols.iter().copied().max().unwrap_or(0)
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wide = self.symbols.iter().any(|&s| s >= 9);
        for (i, s) in self.symbols.iter().enumerate() {
            if wide && i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{}", s + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Itinerary {
    type Err = BilliardError;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || BilliardError::InvalidItinerary(format!("cannot parse itinerary `{text}`"));
        let labels: Vec<usize> = if text.contains('-') {
            text.split('-')
                .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
                .collect::<Result<_>>()?
        } else {
            text.chars()
                .map(|c| c.to_digit(10).map(|d| d as usize).ok_or_else(bad))
                .collect::<Result<_>>()?
        };
        if labels.contains(&0) {
            return Err(bad());
        }
        Itinerary::new(labels.into_iter().map(|l| l - 1).collect())
    }
}

impl Serialize for Itinerary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Itinerary {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Lyndon test: strictly smaller than every proper rotation.
fn is_lyndon(w: &[usize]) -> bool {
    let n = w.len();
    (1..n).all(|r| {
        let rot = w[r..].iter().chain(&w[..r]);
        w.iter().lt(rot)
    })
}

/// All primitive itineraries over `n_obstacles` symbols with lengths
/// `2..=max_len`, ordered by length and then lexicographically.
pub fn enumerate_itineraries(n_obstacles: usize, max_len: usize) -> Vec<Itinerary> {
    let mut out = Vec::new();
    if n_obstacles < 2 {
        return out;
    }
    for len in 2..=max_len {
        let mut word = Vec::with_capacity(len);
        // A Lyndon word starts with its smallest symbol.
        for first in 0..n_obstacles {
            word.clear();
            word.push(first);
            extend_words(n_obstacles, len, first, &mut word, &mut out);
        }
    }
    out
}

fn extend_words(n: usize, len: usize, first: usize, word: &mut Vec<usize>, out: &mut Vec<Itinerary>) {
    if word.len() == len {
        if word[len - 1] != word[0] && is_lyndon(word) {
            out.push(Itinerary {
                symbols: word.clone(),
            });
        }
        return;
    }
    let last = *word.last().unwrap();
    for s in first..n {
        if s != last {
            word.push(s);
            extend_words(n, len, first, word, out);
            word.pop();
        }
    }
}

/// Number of prime cycles of length `n` of the full shift on `n_obstacles`
/// symbols with no immediate repeats, from the Moebius-inverted traces
/// `tr A^d = (N-1)^d + (N-1)(-1)^d` of the off-diagonal-ones matrix.
pub fn prime_cycle_count(n_obstacles: usize, n: usize) -> usize {
    if n_obstacles < 2 || n == 0 {
        return 0;
    }
    let m = (n_obstacles - 1) as i128;
    let tr = |d: u32| m.pow(d) + m * if d.is_multiple_of(2) { 1 } else { -1 };
    let sum: i128 = (1..=n)
        .filter(|d| n.is_multiple_of(*d))
        .map(|d| mobius(n / d) as i128 * tr(d as u32))
        .sum();
    (sum / n as i128) as usize
}

fn mobius(mut n: usize) -> i32 {
    let mut result = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            result = -result;
        }
        p += 1;
    }
    if n > 1 {
        result = -result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[Itinerary]) -> Vec<String> {
        v.iter().map(|i| i.to_string()).collect()
    }

    #[test]
    fn three_symbol_counts() {
        let all = enumerate_itineraries(3, 4);
        let by_len = |n| all.iter().filter(|i| i.len() == n).cloned().collect::<Vec<_>>();
        assert_eq!(labels(&by_len(2)), ["12", "13", "23"]);
        assert_eq!(labels(&by_len(3)), ["123", "132"]);
        assert_eq!(by_len(4).len(), 3);
        assert_eq!(prime_cycle_count(3, 2), 3);
        assert_eq!(prime_cycle_count(3, 3), 2);
        assert_eq!(prime_cycle_count(3, 4), 3);
    }

    #[test]
    fn enumeration_matches_transfer_matrix_oracle() {
        // Direct brute force over all words as an independent count.
        fn brute(n_sym: usize, len: usize) -> usize {
            let total = n_sym.pow(len as u32);
            let mut seen = std::collections::BTreeSet::new();
            for code in 0..total {
                let mut c = code;
                let w: Vec<usize> = (0..len)
                    .map(|_| {
                        let s = c % n_sym;
                        c /= n_sym;
                        s
                    })
                    .collect();
                if let Ok(it) = Itinerary::new(w) {
                    if it.is_primitive() {
                        seen.insert(it);
                    }
                }
            }
            seen.len()
        }
        for n_sym in 2..=4 {
            let all = enumerate_itineraries(n_sym, 10);
            for len in 2..=10 {
                let got = all.iter().filter(|i| i.len() == len).count();
                assert_eq!(got, prime_cycle_count(n_sym, len), "N={n_sym} n={len}");
                if n_sym.pow(len as u32) <= 300_000 {
                    assert_eq!(got, brute(n_sym, len), "brute N={n_sym} n={len}");
                }
            }
        }
    }

    #[test]
    fn two_symbols_only_one_prime_cycle() {
        let all = enumerate_itineraries(2, 60);
        assert_eq!(labels(&all), ["12"]);
        assert!(enumerate_itineraries(1, 6).is_empty());
    }

    #[test]
    fn canonical_rotation_and_primitivity() {
        let it = Itinerary::new(vec![2, 0, 1]).unwrap();
        assert_eq!(it.symbols(), &[0, 1, 2]);
        assert!(it.is_primitive());
        let sq = Itinerary::new(vec![1, 0, 1, 0]).unwrap();
        assert_eq!(sq.symbols(), &[0, 1, 0, 1]);
        assert!(!sq.is_primitive());
        assert!(Itinerary::new(vec![0, 0]).is_err());
        assert!("11".parse::<Itinerary>().is_err());
        assert!(Itinerary::new(vec![0, 1, 0]).is_err());
        let wide: Itinerary = "1-10-3".parse().unwrap();
        assert_eq!(wide.symbols(), &[0, 9, 2]);
        assert_eq!(wide.to_string(), "1-10-3");
    }
}
