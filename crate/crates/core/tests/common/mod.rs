#![allow(dead_code)]

pub mod fixtures;
pub mod oracle;

use multiref::textproc::{Granularity, TokenSequence};

pub fn seq(tokens: &[String]) -> TokenSequence {
    TokenSequence::new(tokens.iter().map(String::as_str), Granularity::Word)
}

pub fn seqs(refs: &[Vec<String>]) -> Vec<TokenSequence> {
    refs.iter().map(|r| seq(r)).collect()
}

pub fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
