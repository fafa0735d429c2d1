//! Executable plans: timed port calls, legs and the onboard-volume trace.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::instance::FuelMode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CallSite {
    /// Vessel delivery point at the start of the rent period.
    Start,
    Contract { id: String },
    /// Redelivery point at the end of the rent period.
    End,
}

/// One stop. Volumes are m³; `traded` is always non-negative and its
/// direction follows the contract kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortCall {
    pub site: CallSite,
    pub port: String,
    /// Service day (arrival day for the end terminal).
    pub day: u32,
    pub volume_before: f64,
    #[serde(default)]
    pub traded: f64,
    /// Out-of-contract LNG bought at the port's free price.
    #[serde(default)]
    pub free_purchase: f64,
    /// LNG discharged beyond a sell contract's volume.
    #[serde(default)]
    pub over_delivery: f64,
    pub volume_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub fuel_mode: FuelMode,
    pub speed: f64,
    pub laden: bool,
    pub sail_hours: f64,
    pub idle_hours: f64,
    pub lng_burn: f64,
    pub fuel_cost: f64,
}

/// Route of one vessel: `legs[i]` joins `calls[i]` and `calls[i + 1]`.
/// An unused vessel has no calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselPlan {
    pub vessel: String,
    pub calls: Vec<PortCall>,
    pub legs: Vec<Leg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// Which model produced the plan.
    pub provenance: String,
    pub vessels: Vec<VesselPlan>,
    /// Artificial over-delivery penalty charged by the producing model.
    #[serde(default)]
    pub penalty: f64,
}

impl Schedule {
    pub fn empty(provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            vessels: Vec::new(),
            penalty: 0.0,
        }
    }

    pub fn plan(&self, vessel: &str) -> Option<&VesselPlan> {
        self.vessels.iter().find(|p| p.vessel == vessel)
    }

    /// Contract ids served, in vessel then call order.
    pub fn served_contracts(&self) -> Vec<&str> {
        self.vessels
            .iter()
            .flat_map(|p| p.calls.iter())
            .filter_map(|c| match &c.site {
                CallSite::Contract { id } => Some(id.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn total_over_delivery(&self) -> f64 {
        self.vessels
            .iter()
            .flat_map(|p| p.calls.iter())
            .map(|c| c.over_delivery)
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Volume trace for plotting: one row per call with the onboard volume
    /// before and after the operation.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["vessel", "seq", "day", "port", "site", "volume_before", "volume_after"])?;
        for p in &self.vessels {
            for (i, c) in p.calls.iter().enumerate() {
                let site = match &c.site {
                    CallSite::Start => "start".to_string(),
                    CallSite::End => "end".to_string(),
                    CallSite::Contract { id } => id.clone(),
                };
                w.write_record([
                    p.vessel.clone(),
                    i.to_string(),
                    c.day.to_string(),
                    c.port.clone(),
                    site,
                    c.volume_before.to_string(),
                    c.volume_after.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
