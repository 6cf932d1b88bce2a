//! Browser bindings. Every export takes and returns JSON strings; the
//! `*_json` functions hold the logic so native tests can call them.

use pairllc::config::Pattern;
use pairllc::garibaldi::aged_cost;
use pairllc::metrics::offline::{analyze_trace, AnalysisKind};
use pairllc::{simulate, GaribaldiConfig, HierarchyConfig, PolicySpec, SimConfig, SimReport, TraceGenConfig};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Upper bound on generated accesses, to keep the page responsive.
pub const MAX_ACCESSES: u64 = 2_000_000;

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoParams {
    pub pattern: Pattern,
    pub policy: String,
    pub seed: u64,
    pub cores: u32,
    pub steps_per_core: u64,
    pub n_instr_lines: u64,
    pub n_data_lines: u64,
    pub stream_factor: u64,
    pub llc_kib: u64,
    pub llc_ways: usize,
    pub k: usize,
}

impl Default for DemoParams {
    fn default() -> Self {
        DemoParams {
            pattern: Pattern::ManyToFew,
            policy: "lru".into(),
            seed: 7,
            cores: 4,
            steps_per_core: 20_000,
            n_instr_lines: 4096,
            n_data_lines: 1024,
            stream_factor: 8,
            llc_kib: 384,
            llc_ways: 12,
            k: 1,
        }
    }
}

impl DemoParams {
    fn parse(json: &str) -> Result<Self, String> {
        let p: DemoParams = serde_json::from_str(json).map_err(|e| e.to_string())?;
        let per_step = 1 + u64::from(p.pattern.default_config().accesses_per_instr);
        if p.cores as u64 * p.steps_per_core * per_step > MAX_ACCESSES {
            return Err(format!("trace too large for the demo (limit {MAX_ACCESSES} accesses)"));
        }
        Ok(p)
    }

    fn trace_config(&self) -> TraceGenConfig {
        TraceGenConfig {
            cores: self.cores,
            steps_per_core: self.steps_per_core,
            n_instr_lines: self.n_instr_lines,
            n_data_lines: self.n_data_lines,
            stream_factor: if self.pattern == Pattern::ManyToFew { self.stream_factor } else { 0 },
            rng_seed: self.seed,
            ..self.pattern.default_config()
        }
    }

    fn hierarchy(&self) -> HierarchyConfig {
        HierarchyConfig {
            private_capacity: 32 * 1024,
            llc_capacity: self.llc_kib * 1024,
            llc_associativity: self.llc_ways,
            ..HierarchyConfig::default()
        }
    }

    fn policy(&self) -> Result<PolicySpec, String> {
        self.policy.parse().map_err(|e: pairllc::replacement::UnknownPolicy| e.to_string())
    }
}

#[derive(Debug, Serialize)]
struct AgingRow {
    current_color: u8,
    aged_cost: u8,
    protected: bool,
}

/// Aged miss cost of one pair-table entry at every color, and whether it
/// clears `threshold`.
pub fn aging_table_json(cost: u8, last_color: u8, color_bits: u32, threshold: u8) -> Result<String, String> {
    if !(1..=6).contains(&color_bits) {
        return Err(format!("color_bits must be in 1..=6, got {color_bits}"));
    }
    let colors = 1u16 << color_bits;
    if u16::from(last_color) >= colors {
        return Err(format!("last_color must be below {colors}"));
    }
    let rows: Vec<AgingRow> = (0..colors as u8)
        .map(|c| {
            let aged = aged_cost(cost.min(63), last_color, c, color_bits);
            AgingRow { current_color: c, aged_cost: aged, protected: aged > threshold }
        })
        .collect();
    Ok(serde_json::to_string(&rows).expect("rows serialize"))
}

#[derive(Debug, Serialize)]
struct RunSummary {
    i_llc_misses: u64,
    d_llc_misses: u64,
    i_llc_miss_rate: Option<f64>,
    d_llc_miss_rate: Option<f64>,
    stall_cycles: u64,
    protections_granted: u64,
    prefetches_issued: u64,
}

impl From<&SimReport> for RunSummary {
    fn from(r: &SimReport) -> Self {
        let h = &r.hierarchy;
        RunSummary {
            i_llc_misses: h.instruction.llc_misses,
            d_llc_misses: h.data.llc_misses,
            i_llc_miss_rate: h.instruction.llc_miss_rate(),
            d_llc_miss_rate: h.data.llc_miss_rate(),
            stall_cycles: r.stall.total_cycles,
            protections_granted: h.protections_granted,
            prefetches_issued: h.prefetches_issued,
        }
    }
}

#[derive(Debug, Serialize)]
struct Comparison {
    accesses: u64,
    bare: RunSummary,
    layered: RunSummary,
    ideal_instructions: RunSummary,
}

/// Runs the chosen policy bare, with the pairing layer, and under the
/// instruction oracle on one generated trace.
pub fn compare_json(params: &str) -> Result<String, String> {
    let p = DemoParams::parse(params)?;
    let trace = p.pattern.generate(&p.trace_config()).map_err(|e| e.to_string())?;
    let policy = p.policy()?;
    let hier = p.hierarchy();
    let g = GaribaldiConfig { k: p.k, ..GaribaldiConfig::default() };
    let run = |cfg: SimConfig| simulate(&trace, &cfg).map(|r| r.report).map_err(|e| e.to_string());
    let bare = run(SimConfig::bare(hier.clone(), policy.clone()))?;
    let layered = run(SimConfig::new(hier.clone(), policy.clone(), Some(g)))?;
    let oracle = match policy {
        PolicySpec::IOracle(_) => policy,
        other => PolicySpec::IOracle(Box::new(other)),
    };
    let ideal = run(SimConfig::bare(hier, oracle))?;
    let out = Comparison {
        accesses: trace.len() as u64,
        bare: (&bare).into(),
        layered: (&layered).into(),
        ideal_instructions: (&ideal).into(),
    };
    Ok(serde_json::to_string(&out).expect("comparison serializes"))
}

/// LLC reuse-distance histograms (log2 buckets) for instructions and data.
pub fn reuse_json(params: &str) -> Result<String, String> {
    let p = DemoParams::parse(params)?;
    let trace = p.pattern.generate(&p.trace_config()).map_err(|e| e.to_string())?;
    let cfg = SimConfig::bare(p.hierarchy(), p.policy()?);
    let a = analyze_trace(&trace, &cfg, &[AnalysisKind::Reuse, AnalysisKind::Profile]).map_err(|e| e.to_string())?;
    let out = serde_json::json!({ "reuse": a.reuse, "llc_profile": a.llc_profile });
    Ok(out.to_string())
}

#[wasm_bindgen]
pub fn aging_table(cost: u8, last_color: u8, color_bits: u32, threshold: u8) -> Result<String, JsError> {
    aging_table_json(cost, last_color, color_bits, threshold).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn compare(params: &str) -> Result<String, JsError> {
    compare_json(params).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn reuse(params: &str) -> Result<String, JsError> {
    reuse_json(params).map_err(|e| JsError::new(&e))
}
