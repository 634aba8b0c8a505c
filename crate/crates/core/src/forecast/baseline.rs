//! Competition baseline: each meter's mean observed monthly total, repeated.

use crate::data::io::MonthlyTable;
use crate::data::MonthlySeries;
use crate::error::{Error, Result};

pub fn naive_baseline(monthly: &[MonthlySeries]) -> Result<MonthlyTable> {
    monthly
        .iter()
        .map(|m| {
            let obs: Vec<f64> = m.observed().map(|(_, v)| v).collect();
            if obs.is_empty() {
                return Err(Error::EmptyMeter(m.meter_id.0.clone()));
            }
            let mean = obs.iter().sum::<f64>() / obs.len() as f64;
            Ok((m.meter_id.clone(), [mean; 12]))
        })
        .collect()
}
