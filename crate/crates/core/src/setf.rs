//! Price-weighted synthetic ETFs.
//!
//! A restructure sets each constituent's weight to its share of the summed
//! constituent prices. Between restructures the ETF is priced as the dot
//! product of those stale weights with current prices.

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SetfError {
    #[error("sector {sector}: no usable price for constituent {ticker}")]
    MissingPrice { sector: String, ticker: String },
    #[error("sector {sector}: no constituent is priced")]
    NothingPriced { sector: String },
    #[error("sector {0}: weights have not been set by a restructure")]
    NotRestructured(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sector {0} has no constituents")]
    Empty(String),
}

fn usable(p: Option<f64>) -> Option<f64> {
    p.filter(|v| v.is_finite() && *v > 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEtf {
    label: String,
    constituents: Vec<String>,
    weights: Vec<f64>,
    last_restructure: Option<NaiveDate>,
}

impl SyntheticEtf {
    pub fn new(label: impl Into<String>, constituents: Vec<String>) -> Result<Self, SetfError> {
        let label = label.into();
        if constituents.is_empty() {
            return Err(SetfError::Empty(label));
        }
        let n = constituents.len();
        Ok(Self {
            label,
            constituents,
            weights: vec![0.0; n],
            last_restructure: None,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn constituents(&self) -> &[String] {
        &self.constituents
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn last_restructure(&self) -> Option<NaiveDate> {
        self.last_restructure
    }

    /// Reset weights to `P_i / Σ P_j`. Every constituent must be priced.
    /// Returns the previous weights.
    pub fn restructure(&mut self, prices: &[f64], date: NaiveDate) -> Result<Vec<f64>, SetfError> {
        self.check_len(prices.len())?;
        let opt: Vec<Option<f64>> = prices.iter().map(|&p| Some(p)).collect();
        if let Some(i) = opt.iter().position(|p| usable(*p).is_none()) {
            return Err(SetfError::MissingPrice {
                sector: self.label.clone(),
                ticker: self.constituents[i].clone(),
            });
        }
        self.restructure_available(&opt, date)
    }

    /// Like [`restructure`](Self::restructure), but constituents without a
    /// price get zero weight and the rest renormalize. Fails only when nothing
    /// is priced. Returns the previous weights.
    pub fn restructure_available(
        &mut self,
        prices: &[Option<f64>],
        date: NaiveDate,
    ) -> Result<Vec<f64>, SetfError> {
        self.check_len(prices.len())?;
        let mut total = 0.0;
        for p in prices.iter().filter_map(|p| usable(*p)) {
            total += p;
        }
        if total <= 0.0 {
            return Err(SetfError::NothingPriced {
                sector: self.label.clone(),
            });
        }
        let new: Vec<f64> = prices
            .iter()
            .map(|p| usable(*p).map_or(0.0, |v| v / total))
            .collect();
        self.last_restructure = Some(date);
        Ok(std::mem::replace(&mut self.weights, new))
    }

    /// Synthetic price: stale weights dotted with current prices. A missing
    /// price is only an error for a constituent that carries weight.
    pub fn price(&self, prices: &[Option<f64>]) -> Result<f64, SetfError> {
        self.check_len(prices.len())?;
        if self.last_restructure.is_none() {
            return Err(SetfError::NotRestructured(self.label.clone()));
        }
        let mut acc = 0.0;
        for (i, (&w, p)) in self.weights.iter().zip(prices).enumerate() {
            if w == 0.0 {
                continue;
            }
            match usable(*p) {
                Some(p) => acc += w * p,
                None => {
                    return Err(SetfError::MissingPrice {
                        sector: self.label.clone(),
                        ticker: self.constituents[i].clone(),
                    })
                }
            }
        }
        Ok(acc)
    }

    fn check_len(&self, got: usize) -> Result<(), SetfError> {
        if got != self.constituents.len() {
            return Err(SetfError::LengthMismatch {
                left: self.constituents.len(),
                right: got,
            });
        }
        Ok(())
    }
}

/// `Σ_i |w_new_i − w_old_i| · P_i`.
pub fn restructuring_turnover(w_old: &[f64], w_new: &[f64], prices: &[f64]) -> Result<f64, SetfError> {
    weighted_abs_change(w_old, w_new, prices)
}

pub(crate) fn weighted_abs_change(old: &[f64], new: &[f64], prices: &[f64]) -> Result<f64, SetfError> {
    if old.len() != new.len() || old.len() != prices.len() {
        return Err(SetfError::LengthMismatch {
            left: old.len(),
            right: if old.len() != new.len() { new.len() } else { prices.len() },
        });
    }
    // Value each side before differencing; for positive prices this equals
    // |Δw|·P and keeps round price-weight products exact.
    let mut acc = 0.0;
    for i in 0..old.len() {
        if new[i] != old[i] {
            acc += (new[i] * prices[i] - old[i] * prices[i]).abs();
        }
    }
    Ok(acc)
}
