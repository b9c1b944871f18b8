//! Tail probabilities of the poll count.
//!
//! Poll sizes are small (at most [`MAX_POLL`](crate::rule::MAX_POLL)), so every tail is a
//! direct sum of at most `m + 1` terms in double precision.

use crate::error::{Error, Result};
use crate::rule::MAX_POLL;

fn check_probability(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("probability {x} outside [0,1]")));
    }
    Ok(())
}

fn check_poll(m: u32) -> Result<()> {
    if m > MAX_POLL {
        return Err(Error::Domain(format!("poll size {m} exceeds {MAX_POLL}")));
    }
    Ok(())
}

/// Binomial probability mass `P(Z = k)` for `Z ~ Bin(m, x)`, all `k` at once.
fn binomial_pmf(m: u32, x: f64) -> Vec<f64> {
    let m_us = m as usize;
    let mut coef = 1.0f64;
    let mut out = Vec::with_capacity(m_us + 1);
    for k in 0..=m {
        if k > 0 {
            coef = coef * f64::from(m - k + 1) / f64::from(k);
        }
        out.push(coef * x.powi(k as i32) * (1.0 - x).powi((m - k) as i32));
    }
    out
}

/// `P(Z >= d)` for `Z ~ Bin(m, x)`.
pub fn binomial_tail_ge(m: u32, x: f64, d: u32) -> Result<f64> {
    check_probability(x)?;
    check_poll(m)?;
    if d > m {
        return Err(Error::Domain(format!("threshold {d} outside 0..={m}")));
    }
    Ok(binomial_pmf(m, x)[d as usize..].iter().sum())
}

/// `P(Z <= k)` for `Z ~ Bin(m, x)`.
pub fn binomial_tail_le(m: u32, x: f64, k: u32) -> Result<f64> {
    check_probability(x)?;
    check_poll(m)?;
    if k > m {
        return Err(Error::Domain(format!("count {k} outside 0..={m}")));
    }
    Ok(binomial_pmf(m, x)[..=k as usize].iter().sum())
}

/// Probability mass of the number of marked items in a size-`m` draw without
/// replacement from `population` items of which `marked` are marked.
fn hypergeometric_pmf(population: u64, marked: u64, m: u32) -> Vec<f64> {
    let n = population as f64;
    let marked_f = marked as f64;
    let unmarked = n - marked_f;
    let mut out = Vec::with_capacity(m as usize + 1);
    let mut binom = 1.0f64;
    for k in 0..=m {
        if k > 0 {
            binom = binom * f64::from(m - k + 1) / f64::from(k);
        }
        // C(m,k) * [marked]_k [unmarked]_{m-k} / [N]_m
        let mut p = binom;
        for j in 0..k {
            let j = f64::from(j);
            p *= (marked_f - j).max(0.0) / (n - j);
        }
        for j in 0..(m - k) {
            let j = f64::from(j);
            p *= (unmarked - j).max(0.0) / (n - f64::from(k) - j);
        }
        out.push(p);
    }
    out
}

fn check_hypergeometric(population: u64, marked: u64, m: u32) -> Result<()> {
    check_poll(m)?;
    if marked > population {
        return Err(Error::Domain(format!(
            "{marked} marked items in a population of {population}"
        )));
    }
    if u64::from(m) > population {
        return Err(Error::Domain(format!(
            "cannot draw {m} items without replacement from {population}"
        )));
    }
    Ok(())
}

/// `P(at least d marked)` when drawing `m` of `population` items without replacement.
pub fn hypergeometric_tail_ge(population: u64, marked: u64, m: u32, d: u32) -> Result<f64> {
    check_hypergeometric(population, marked, m)?;
    if d > m {
        return Err(Error::Domain(format!("threshold {d} outside 0..={m}")));
    }
    Ok(hypergeometric_pmf(population, marked, m)[d as usize..]
        .iter()
        .sum())
}

/// `P(at most k marked)` when drawing `m` of `population` items without replacement.
pub fn hypergeometric_tail_le(population: u64, marked: u64, m: u32, k: u32) -> Result<f64> {
    check_hypergeometric(population, marked, m)?;
    if k > m {
        return Err(Error::Domain(format!("count {k} outside 0..={m}")));
    }
    Ok(hypergeometric_pmf(population, marked, m)[..=k as usize]
        .iter()
        .sum())
}
