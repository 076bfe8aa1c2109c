//! Root sets under perturbations of the delay.
//!
//! The coefficients stay at their nominal values; only the delay moves to
//! `tau + k epsilon` for `k = -K..=K`. Entry `k = 0` is the nominal
//! spectrum. Each entry keeps its signed `k` so a renderer can shade
//! smaller delays (k < 0) and larger delays (k > 0) differently.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quasipoly::Quasipolynomial;
use crate::rootfinder::{find_roots_with, FinderConfig, Rectangle, RootSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivitySweep {
    pub nominal_tau: f64,
    pub epsilon: f64,
    #[serde(rename = "K")]
    pub k_max: usize,
    pub rectangle: Rectangle,
    /// Root sets keyed by `k`.
    pub sets: BTreeMap<i64, RootSet>,
    /// Error names of the `k` entries whose search failed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub failed: BTreeMap<i64, String>,
}

impl SensitivitySweep {
    pub fn delay(&self, k: i64) -> f64 {
        self.nominal_tau + k as f64 * self.epsilon
    }

    /// `k,tau,re,im,multiplicity` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,tau,re,im,multiplicity\n");
        for (k, set) in &self.sets {
            for r in &set.roots {
                let _ = writeln!(out, "{k},{:?},{:?},{:?},{}", self.delay(*k), r.re, r.im, r.multiplicity);
            }
        }
        out
    }
}

pub fn delay_sweep(qp: &Quasipolynomial, rect: &Rectangle, epsilon: f64, k_max: usize) -> Result<SensitivitySweep> {
    delay_sweep_with(qp, rect, epsilon, k_max, &FinderConfig::default())
}

pub fn delay_sweep_with(
    qp: &Quasipolynomial,
    rect: &Rectangle,
    epsilon: f64,
    k_max: usize,
    config: &FinderConfig,
) -> Result<SensitivitySweep> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if k_max == 0 {
        return Err(Error::invalid("K must be positive"));
    }
    let min_tau = qp.tau() - k_max as f64 * epsilon;
    if min_tau <= 0.0 {
        return Err(Error::InvalidPerturbation { min_tau });
    }

    let k_max_signed = k_max as i64;
    let results: Vec<(i64, Result<RootSet>)> = (-k_max_signed..=k_max_signed)
        .into_par_iter()
        .map(|k| {
            let tau = qp.tau() + k as f64 * epsilon;
            let outcome = qp.with_tau(tau).and_then(|perturbed| find_roots_with(&perturbed, rect, config));
            (k, outcome)
        })
        .collect();

    let mut sets = BTreeMap::new();
    let mut failed = BTreeMap::new();
    for (k, outcome) in results {
        match outcome {
            Ok(set) => {
                sets.insert(k, set);
            }
            Err(Error::BudgetExceeded) => return Err(Error::BudgetExceeded),
            Err(e) => {
                failed.insert(k, e.name().to_string());
            }
        }
    }
    Ok(SensitivitySweep {
        nominal_tau: qp.tau(),
        epsilon,
        k_max,
        rectangle: *rect,
        sets,
        failed,
    })
}
