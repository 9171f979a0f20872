use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A service or arrival sequence over robots `0..n`, optionally carrying its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Order {
    sequence: Vec<usize>,
    pub probability: Option<f64>,
}

impl Order {
    /// Validates that `sequence` is a permutation of `0..sequence.len()`.
    pub fn new(sequence: Vec<usize>) -> Result<Self> {
        let n = sequence.len();
        let mut seen = vec![false; n];
        for &i in &sequence {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidOrder { len: n });
            }
        }
        Ok(Self {
            sequence,
            probability: None,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            sequence: (0..n).collect(),
            probability: None,
        }
    }

    pub fn with_probability(mut self, p: f64) -> Self {
        self.probability = Some(p);
        self
    }

    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Position of every robot in the sequence.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.sequence.len()];
        for (k, &i) in self.sequence.iter().enumerate() {
            pos[i] = k;
        }
        pos
    }

    pub(crate) fn check_len(&self, arrivals: usize) -> Result<()> {
        if self.sequence.len() != arrivals {
            return Err(Error::LengthMismatch {
                order: self.sequence.len(),
                arrivals,
            });
        }
        Ok(())
    }

    /// The `n − 1` orders reached by swapping one pair of adjacent robots.
    pub fn neighbors(&self) -> Vec<Order> {
        (0..self.sequence.len().saturating_sub(1))
            .map(|k| {
                let mut s = self.sequence.clone();
                s.swap(k, k + 1);
                Order {
                    sequence: s,
                    probability: None,
                }
            })
            .collect()
    }

    /// Number of adjacent transpositions separating two orders (Kendall tau distance).
    pub fn swap_distance(&self, other: &Order) -> usize {
        let pos = other.positions();
        let mapped: Vec<usize> = self.sequence.iter().map(|&i| pos[i]).collect();
        let mut inversions = 0;
        for i in 0..mapped.len() {
            for j in i + 1..mapped.len() {
                if mapped[i] > mapped[j] {
                    inversions += 1;
                }
            }
        }
        inversions
    }
}

/// See [`Order::neighbors`].
pub fn neighbor_orders(order: &Order) -> Vec<Order> {
    order.neighbors()
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_orders(n: usize) -> Vec<Order> {
    let mut out = Vec::new();
    let mut seq: Vec<usize> = (0..n).collect();
    loop {
        out.push(Order {
            sequence: seq.clone(),
            probability: None,
        });
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| seq[i - 1] < seq[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| seq[j] > seq[i - 1]).unwrap();
        seq.swap(i - 1, j);
        seq[i..].reverse();
    }
    out
}

impl fmt::Display for Order {
    /// Robots 0..26 print as letters (`ABC`), larger sets as dash-separated indices.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sequence.len() <= 26 {
            for &i in &self.sequence {
                write!(f, "{}", (b'A' + i as u8) as char)?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.sequence.iter().map(|i| i.to_string()).collect();
            write!(f, "{}", parts.join("-"))
        }
    }
}
