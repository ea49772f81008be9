//! Stable file formats: observed-path files (JSON canonical, CSV for
//! spreadsheets), run configuration files, and report writers.
//!
//! Floats in path files are written with 18 significant digits
//! (`{:.17e}`), which round-trips `f64` losslessly and byte-stably.

use bass_mle::{BoundCheck, MseReport, ObservedPath, PricePath, PriceSegment};
use serde::{Deserialize, Serialize};

/// Format a float losslessly and byte-stably.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.17e}")
}

// ---------------------------------------------------------------------------
// Path files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathFileJson {
    m: u64,
    horizon: f64,
    price_segments: Vec<SegmentJson>,
    adoption_times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentJson {
    pub start: f64,
    pub end: f64,
    pub price: f64,
}

/// Canonical JSON form of an observed path.
pub fn path_to_json(path: &ObservedPath) -> String {
    let mut out = String::from("{\n");
    out.push_str(&format!("  \"m\": {},\n", path.m()));
    out.push_str(&format!("  \"horizon\": {},\n", fmt_f64(path.horizon())));
    out.push_str("  \"price_segments\": [");
    for (k, seg) in path.price_path().segments().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&format!(
            "\n    {{\"start\": {}, \"end\": {}, \"price\": {}}}",
            fmt_f64(seg.start),
            fmt_f64(seg.end),
            fmt_f64(seg.price)
        ));
    }
    if !path.price_path().segments().is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("],\n  \"adoption_times\": [");
    for (k, &t) in path.adoption_times().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push_str(&format!("\n    {}", fmt_f64(t)));
    }
    if !path.adoption_times().is_empty() {
        out.push_str("\n  ");
    }
    out.push_str("]\n}\n");
    out
}

/// Parse the JSON path format, re-validating every path invariant.
pub fn path_from_json(text: &str) -> Result<ObservedPath, String> {
    let raw: PathFileJson =
        serde_json::from_str(text).map_err(|e| format!("invalid path JSON: {e}"))?;
    let segments = raw
        .price_segments
        .iter()
        .map(|s| PriceSegment {
            start: s.start,
            end: s.end,
            price: s.price,
        })
        .collect();
    let price_path = PricePath::new(segments).map_err(|e| e.to_string())?;
    ObservedPath::new(raw.m, raw.horizon, raw.adoption_times, price_path).map_err(|e| e.to_string())
}

/// CSV form: a `#m=<int>,horizon=<float>` header, a `#segments` section
/// with a `start,end,price` header row, then `#adoptions` with one time
/// per line.
pub fn path_to_csv(path: &ObservedPath) -> String {
    let mut out = format!("#m={},horizon={}\n", path.m(), fmt_f64(path.horizon()));
    out.push_str("#segments\nstart,end,price\n");
    for seg in path.price_path().segments() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(seg.start),
            fmt_f64(seg.end),
            fmt_f64(seg.price)
        ));
    }
    out.push_str("#adoptions\n");
    for &t in path.adoption_times() {
        out.push_str(&fmt_f64(t));
        out.push('\n');
    }
    out
}

pub fn path_from_csv(text: &str) -> Result<ObservedPath, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty path CSV")?;
    let header = header
        .strip_prefix("#m=")
        .ok_or("path CSV must start with '#m=<int>,horizon=<float>'")?;
    let (m_str, rest) = header
        .split_once(",horizon=")
        .ok_or("path CSV header missing ',horizon='")?;
    let m: u64 = m_str.parse().map_err(|e| format!("bad m: {e}"))?;
    let horizon: f64 = rest.parse().map_err(|e| format!("bad horizon: {e}"))?;

    if lines.next() != Some("#segments") {
        return Err("expected '#segments' section".into());
    }
    if lines.next() != Some("start,end,price") {
        return Err("expected 'start,end,price' header".into());
    }
    let mut segments = Vec::new();
    let mut adoption_times = Vec::new();
    let mut in_adoptions = false;
    for line in lines {
        if line == "#adoptions" {
            in_adoptions = true;
            continue;
        }
        if in_adoptions {
            adoption_times.push(
                line.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad adoption time '{line}': {e}"))?,
            );
        } else {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(format!(
                    "segment row must have exactly 3 fields, got '{line}'"
                ));
            }
            let parse = |name: &str, s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("bad segment {name} '{line}': {e}"))
            };
            segments.push(PriceSegment {
                start: parse("start", fields[0])?,
                end: parse("end", fields[1])?,
                price: parse("price", fields[2])?,
            });
        }
    }
    if !in_adoptions {
        return Err("expected '#adoptions' section".into());
    }
    let price_path = PricePath::new(segments).map_err(|e| e.to_string())?;
    ObservedPath::new(m, horizon, adoption_times, price_path).map_err(|e| e.to_string())
}

/// Parse a bare price-schedule CSV (`start,end,price` header plus rows).
pub fn price_path_from_csv(text: &str) -> Result<PricePath, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some("start,end,price") {
        return Err("price file must start with a 'start,end,price' header".into());
    }
    let mut segments = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(format!("expected 3 fields per row, got '{line}'"));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| format!("bad number '{s}': {e}"))
        };
        segments.push(PriceSegment {
            start: parse(fields[0])?,
            end: parse(fields[1])?,
            price: parse(fields[2])?,
        });
    }
    PricePath::new(segments).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Run configuration files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaturalParamsSpec {
    pub alpha: f64,
    pub beta: f64,
    pub m: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformedParamsSpec {
    pub alpha_p: f64,
    pub beta_p: f64,
    pub m: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsSpec {
    Natural(NaturalParamsSpec),
    Transformed(TransformedParamsSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XSpec {
    /// "const" or "exp".
    pub kind: String,
    /// Constant value for kind = "const" (default 1.0).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    /// "constant", "feedback" or "schedule".
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_adoption: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<Vec<SegmentJson>>,
}

/// JSON mirror of an experiment configuration; unknown keys rejected,
/// every key below required (except the optional policy fields their kind
/// does not use).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub params: ParamsSpec,
    pub x: XSpec,
    pub policy: PolicySpec,
    pub n_grid: Vec<u64>,
    pub replications: u32,
    pub master_seed: u64,
    pub tail: f64,
    pub delta_bar_1: f64,
    pub delta_bar_2: f64,
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// One row per grid point, plot-ready.
pub fn mse_report_to_csv(report: &MseReport) -> String {
    let mut out = String::from(
        "n,replications,excluded,mse_alpha_p,mse_beta_p,mse_beta_natural,mse_total,mse_total_scaled,mc_stderr,valid\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.replications,
            r.excluded,
            fmt_f64(r.mse_alpha_p),
            fmt_f64(r.mse_beta_p),
            fmt_f64(r.mse_beta_natural),
            fmt_f64(r.mse_total),
            fmt_f64(r.mse_total_scaled),
            fmt_f64(r.mc_stderr),
            r.valid
        ));
    }
    out
}

/// Full JSON report: config echo, rows, slope and the bound check.
pub fn experiment_report_json(
    config: &RunConfigFile,
    report: &MseReport,
    bound: &BoundCheck,
) -> String {
    let value = serde_json::json!({
        "config": config,
        "rows": report.rows,
        "slope": report.slope,
        "bound_check": bound,
    });
    let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use bass_mle::{simulate_until_n, ConstantPolicy, MarketParams, PriceResponse};

    fn sample_path() -> ObservedPath {
        let params = MarketParams::new(0.5, 0.2, 30).unwrap();
        let policy = ConstantPolicy { price: 0.75 };
        simulate_until_n(params, PriceResponse::Exponential, &policy, 7, 0.0, 99).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let path = sample_path();
        let text = path_to_json(&path);
        let back = path_from_json(&text).unwrap();
        assert_eq!(path, back);
        // serialization is deterministic
        assert_eq!(text, path_to_json(&back));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let path = sample_path();
        let text = path_to_csv(&path);
        let back = path_from_csv(&text).unwrap();
        assert_eq!(path, back);
    }

    #[test]
    fn empty_path_round_trips() {
        let path = ObservedPath::new(5, 0.0, vec![], PricePath::new(vec![]).unwrap()).unwrap();
        assert_eq!(path, path_from_json(&path_to_json(&path)).unwrap());
        assert_eq!(path, path_from_csv(&path_to_csv(&path)).unwrap());
    }

    #[test]
    fn json_rejects_unknown_keys_and_bad_paths() {
        assert!(path_from_json(
            "{\"m\":1,\"horizon\":1.0,\"price_segments\":[],\"adoption_times\":[],\"extra\":0}"
        )
        .is_err());
        // adoption beyond horizon must be rejected on load
        let bad = "{\"m\":2,\"horizon\":1.0,\"price_segments\":[{\"start\":0.0,\"end\":1.0,\"price\":1.0}],\"adoption_times\":[2.0]}";
        assert!(path_from_json(bad).is_err());
    }

    #[test]
    fn price_schedule_csv_parses() {
        let p = price_path_from_csv("start,end,price\n0.0,1.0,2.0\n1.0,4.0,1.5\n").unwrap();
        assert_eq!(p.segments().len(), 2);
        assert_eq!(p.horizon(), 4.0);
        assert!(price_path_from_csv("0.0,1.0,2.0\n").is_err());
    }

    #[test]
    fn run_config_rejects_unknown_and_missing_keys() {
        let good = r#"{
            "params": {"alpha": 0.3, "beta": 0.1, "m": 100},
            "x": {"kind": "const", "value": 1.0},
            "policy": {"kind": "constant", "price": 1.0},
            "n_grid": [10, 20],
            "replications": 5,
            "master_seed": 7,
            "tail": 0.0,
            "delta_bar_1": 1.0,
            "delta_bar_2": 1.0
        }"#;
        let parsed: RunConfigFile = serde_json::from_str(good).unwrap();
        assert_eq!(parsed.n_grid, vec![10, 20]);
        assert!(matches!(parsed.params, ParamsSpec::Natural(_)));

        let unknown = good.replace("\"tail\": 0.0,", "\"tail\": 0.0, \"bogus\": 1,");
        assert!(serde_json::from_str::<RunConfigFile>(&unknown).is_err());

        let missing = good.replace("\"master_seed\": 7,", "");
        assert!(serde_json::from_str::<RunConfigFile>(&missing).is_err());

        let transformed = good.replace(
            "{\"alpha\": 0.3, \"beta\": 0.1, \"m\": 100}",
            "{\"alpha_p\": 0.2, \"beta_p\": 0.5, \"m\": 100}",
        );
        let parsed: RunConfigFile = serde_json::from_str(&transformed).unwrap();
        assert!(matches!(parsed.params, ParamsSpec::Transformed(_)));
    }
}
