//! Latency and energy accounting over step traces, and normalized
//! cross-design comparison tables.
//!
//! All technology constants are explicit configuration with documented
//! defaults; none of them are measured values, and every report embeds the
//! constants it was computed with so results stay reproducible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{StepTrace, TraceTotals};
use crate::error::{Result, SimError};
use crate::wdm::{transmitter_power, WdmConfig, TIA_MW_PER_OUTPUT};

/// Note embedded in every report next to the constants.
pub const CONSTANTS_NOTE: &str =
    "technology constants are artifact assumptions, not measured silicon values";

/// Timing and per-event energy constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TechConstants {
    pub step_time_epcm_s: f64,
    pub step_time_opcm_s: f64,
    pub e_adc_conversion_j: f64,
    pub e_sa_activation_j: f64,
    pub e_counter_increment_j: f64,
    pub e_tree_reduction_j: f64,
    pub wdm: WdmConfig,
}

impl Default for TechConstants {
    fn default() -> Self {
        Self {
            step_time_epcm_s: 100e-9,
            step_time_opcm_s: 1e-9,
            e_adc_conversion_j: 2e-12,
            e_sa_activation_j: 0.1e-12,
            e_counter_increment_j: 0.05e-12,
            e_tree_reduction_j: 0.5e-12,
            wdm: WdmConfig::default(),
        }
    }
}

impl TechConstants {
    fn validate(&self) -> Result<()> {
        let vals = [
            self.step_time_epcm_s,
            self.step_time_opcm_s,
            self.e_adc_conversion_j,
            self.e_sa_activation_j,
            self.e_counter_increment_j,
            self.e_tree_reduction_j,
            self.wdm.laser_power_mw,
            self.wdm.step_time_s,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SimError::InvalidConfig {
                detail: "technology constants must be finite and non-negative".into(),
            });
        }
        Ok(())
    }
}

/// Per-component energy in joules.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub adc_j: f64,
    pub sa_j: f64,
    pub counter_j: f64,
    pub tree_j: f64,
    pub tia_j: f64,
    pub transmitter_j: f64,
}

impl EnergyBreakdown {
    pub fn total_j(&self) -> f64 {
        self.adc_j + self.sa_j + self.counter_j + self.tree_j + self.tia_j + self.transmitter_j
    }

    fn add(&mut self, other: &EnergyBreakdown) {
        self.adc_j += other.adc_j;
        self.sa_j += other.sa_j;
        self.counter_j += other.counter_j;
        self.tree_j += other.tree_j;
        self.tia_j += other.tia_j;
        self.transmitter_j += other.transmitter_j;
    }
}

/// Host-side work for full-precision boundary layers; tracked separately
/// and excluded from crossbar step totals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostCost {
    pub full_layers: usize,
    pub mac_ops: u64,
}

/// Cost of one layer's trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub layer_index: usize,
    pub steps: u64,
    pub time_s: f64,
    pub energy: EnergyBreakdown,
    pub totals: TraceTotals,
}

/// Full cost report for one (design, workload) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub design: String,
    pub workload: String,
    pub workload_hash: String,
    pub total_steps: u64,
    pub total_time_s: f64,
    pub energy: EnergyBreakdown,
    pub total_energy_j: f64,
    pub per_layer: Vec<LayerCost>,
    pub host: HostCost,
    pub constants: TechConstants,
    pub constants_note: String,
}

/// Steps and wall-clock seconds of a trace: electronic and photonic steps
/// are timed with their own step times and summed.
pub fn latency_report(trace: &StepTrace, tech: &TechConstants) -> (u64, f64) {
    let t = trace.totals();
    let seconds = t.electronic_steps as f64 * tech.step_time_epcm_s
        + t.optical_steps as f64 * tech.step_time_opcm_s;
    (t.steps, seconds)
}

/// Per-component energy of a trace.
///
/// Event-counted components (ADC, SA, counters, tree) multiply trace
/// counters by per-event energies. Photonic power components (TIA,
/// transmitter) integrate power over the time each activation spans:
/// `P * step_time * duration` per MMM record, with the transmitter always
/// running at full configured capacity even for partial batches.
pub fn energy_breakdown(trace: &StepTrace, tech: &TechConstants) -> EnergyBreakdown {
    let t = trace.totals();
    let mut e = EnergyBreakdown {
        adc_j: t.adc_conversions as f64 * tech.e_adc_conversion_j,
        sa_j: t.sa_activations as f64 * tech.e_sa_activation_j,
        counter_j: t.counter_increments as f64 * tech.e_counter_increment_j,
        tree_j: t.tree_reductions as f64 * tech.e_tree_reduction_j,
        tia_j: 0.0,
        transmitter_j: 0.0,
    };
    for r in trace.records() {
        if r.kind.is_optical() {
            let span = tech.step_time_opcm_s * r.duration as f64;
            e.tia_j += r.adc_conversions as f64 * TIA_MW_PER_OUTPUT * 1e-3 * span;
            e.transmitter_j +=
                transmitter_power(&tech.wdm, r.rows_driven as usize) * 1e-3 * span;
        }
    }
    e
}

/// Build a [`CostReport`] from per-layer traces.
pub fn energy_report(
    design: &str,
    workload: &str,
    workload_hash: &str,
    layer_traces: &[(usize, StepTrace)],
    host: HostCost,
    tech: &TechConstants,
) -> Result<CostReport> {
    tech.validate()?;
    let mut per_layer = Vec::with_capacity(layer_traces.len());
    let mut total_steps = 0u64;
    let mut total_time = 0.0f64;
    let mut energy = EnergyBreakdown::default();
    for (layer_index, trace) in layer_traces {
        let (steps, time_s) = latency_report(trace, tech);
        let e = energy_breakdown(trace, tech);
        total_steps += steps;
        total_time += time_s;
        energy.add(&e);
        per_layer.push(LayerCost {
            layer_index: *layer_index,
            steps,
            time_s,
            energy: e,
            totals: trace.totals(),
        });
    }
    Ok(CostReport {
        design: design.to_string(),
        workload: workload.to_string(),
        workload_hash: workload_hash.to_string(),
        total_steps,
        total_time_s: total_time,
        total_energy_j: energy.total_j(),
        energy,
        per_layer,
        host,
        constants: *tech,
        constants_note: CONSTANTS_NOTE.to_string(),
    })
}

/// One design x workload line of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub design: String,
    pub network: String,
    pub steps: u64,
    pub time_s: f64,
    pub energy_j: f64,
    /// `baseline_time / design_time`; above 1 means faster than baseline.
    pub latency_improvement: f64,
    /// `design_energy / baseline_energy`; below 1 means cheaper than baseline.
    pub energy_ratio: f64,
}

/// Geometric-mean aggregate across networks for one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeomeanRow {
    pub design: String,
    pub latency_improvement: f64,
    pub energy_ratio: f64,
}

/// Normalized comparison in the shape of a latency/energy summary figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
    pub geomean: Vec<GeomeanRow>,
}

/// Normalize reports against the design labelled `baseline`.
///
/// Ratios are computed per network first (refusing any network whose
/// workload hash differs from the baseline's) and aggregated with the
/// geometric mean, the standard mean for ratios.
pub fn compare(reports: &[CostReport], baseline: &str) -> Result<ComparisonTable> {
    // (design -> network -> report), BTreeMaps for deterministic output order.
    let mut by_design: BTreeMap<&str, BTreeMap<&str, &CostReport>> = BTreeMap::new();
    for r in reports {
        let slot = by_design
            .entry(&r.design)
            .or_default()
            .insert(&r.workload, r);
        if slot.is_some() {
            return Err(SimError::WorkloadMismatch {
                detail: format!(
                    "duplicate report for design '{}' on workload '{}'",
                    r.design, r.workload
                ),
            });
        }
    }
    let base = by_design
        .get(baseline)
        .ok_or_else(|| SimError::WorkloadMismatch {
            detail: format!("baseline design '{baseline}' not present in reports"),
        })?
        .clone();
    let mut rows = Vec::new();
    let mut geomean = Vec::new();
    for (design, nets) in &by_design {
        let mut log_lat = 0.0f64;
        let mut log_energy = 0.0f64;
        let mut count = 0usize;
        for (network, report) in nets {
            let b = base.get(network).ok_or_else(|| SimError::WorkloadMismatch {
                detail: format!("baseline has no run for workload '{network}'"),
            })?;
            if b.workload_hash != report.workload_hash {
                return Err(SimError::WorkloadMismatch {
                    detail: format!(
                        "workload '{network}' hash differs between '{design}' and baseline"
                    ),
                });
            }
            let latency_improvement = b.total_time_s / report.total_time_s;
            let energy_ratio = report.total_energy_j / b.total_energy_j;
            log_lat += latency_improvement.ln();
            log_energy += energy_ratio.ln();
            count += 1;
            rows.push(ComparisonRow {
                design: design.to_string(),
                network: network.to_string(),
                steps: report.total_steps,
                time_s: report.total_time_s,
                energy_j: report.total_energy_j,
                latency_improvement,
                energy_ratio,
            });
        }
        geomean.push(GeomeanRow {
            design: design.to_string(),
            latency_improvement: (log_lat / count as f64).exp(),
            energy_ratio: (log_energy / count as f64).exp(),
        });
    }
    Ok(ComparisonTable {
        baseline: baseline.to_string(),
        rows,
        geomean,
    })
}

impl ComparisonTable {
    /// CSV with one row per design x network plus `geomean` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "design,network,steps,time_s,energy_J,latency_improvement,energy_ratio\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.design, r.network, r.steps, r.time_s, r.energy_j, r.latency_improvement,
                r.energy_ratio
            ));
        }
        for g in &self.geomean {
            out.push_str(&format!(
                "{},geomean,,,,{},{}\n",
                g.design, g.latency_improvement, g.energy_ratio
            ));
        }
        out
    }
}

impl CostReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Single-run CSV:`design,workload,steps,time_s,energy_J` plus the
    /// breakdown columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "design,workload,steps,time_s,energy_J,adc_J,sa_J,counter_J,tree_J,tia_J,transmitter_J\n",
        );
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            self.design,
            self.workload,
            self.total_steps,
            self.total_time_s,
            self.total_energy_j,
            self.energy.adc_j,
            self.energy.sa_j,
            self.energy.counter_j,
            self.energy.tree_j,
            self.energy.tia_j,
            self.energy.transmitter_j
        ));
        out
    }
}
