//! Machine-readable report formatting.
//!
//! Every float is printed with 17 significant digits so reports are
//! reproducible and diffable; JSON is emitted by hand for the same reason.

use crate::conditioning::DValues;
use crate::mc::{BoundCheckRow, KSResult};
use crate::scalar::{asymptotic_product_prob, ProductLawTable};

/// 17-significant-digit float formatting shared by all outputs.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn json_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

pub fn bound_check_csv(rows: &[BoundCheckRow]) -> String {
    let mut out =
        String::from("eps,n,m,spec_hash,trials,hits,p_hat,ci_low,ci_high,bound,verdict\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_float(r.eps),
            r.n,
            r.m,
            r.spec_hash,
            r.trials,
            r.hits,
            fmt_float(r.p_hat),
            fmt_float(r.ci_low),
            fmt_float(r.ci_high),
            fmt_float(r.bound),
            if r.verdict { "pass" } else { "fail" }
        ));
    }
    out
}

pub fn bound_check_json(rows: &[BoundCheckRow]) -> String {
    let mut out = String::from("[\n");
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&format!(
            "  {{\"eps\": {}, \"n\": {}, \"m\": {}, \"spec_hash\": {}, \"trials\": {}, \"hits\": {}, \"p_hat\": {}, \"ci_low\": {}, \"ci_high\": {}, \"bound\": {}, \"verdict\": {}}}{}\n",
            fmt_float(r.eps),
            r.n,
            r.m,
            json_str(&r.spec_hash),
            r.trials,
            r.hits,
            fmt_float(r.p_hat),
            fmt_float(r.ci_low),
            fmt_float(r.ci_high),
            fmt_float(r.bound),
            if r.verdict { "true" } else { "false" },
            if i + 1 < rows.len() { "," } else { "" }
        ));
    }
    out.push_str("]\n");
    out
}

/// `t,cdf` table; with `with_asymptotic`, appends the asymptotic value and
/// the exact/asymptotic ratio (nan outside the eps < 1 regime).
pub fn product_law_csv(table: &ProductLawTable, with_asymptotic: bool) -> String {
    let mut out = String::new();
    if with_asymptotic {
        out.push_str("t,cdf,asymptotic,ratio\n");
    } else {
        out.push_str("t,cdf\n");
    }
    for (t, &cdf) in table.grid().zip(table.cdf_values()) {
        if with_asymptotic {
            let asym = if t < 0.0 {
                asymptotic_product_prob(table.n(), t.exp()).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_float(t),
                fmt_float(cdf),
                fmt_float(asym),
                fmt_float(cdf / asym)
            ));
        } else {
            out.push_str(&format!("{},{}\n", fmt_float(t), fmt_float(cdf)));
        }
    }
    out
}

/// JSON sidecar carrying the table metadata.
pub fn product_law_sidecar_json(table: &ProductLawTable) -> String {
    let (u_min, u_max) = table.truncation_bounds();
    format!(
        "{{\n  \"n\": {},\n  \"t_min\": {},\n  \"t_max\": {},\n  \"grid_step\": {},\n  \"points\": {},\n  \"u_min\": {},\n  \"u_max\": {},\n  \"error_estimate\": {}\n}}\n",
        table.n(),
        fmt_float(table.t_min()),
        fmt_float(table.t_max()),
        fmt_float(table.grid_step()),
        table.len(),
        fmt_float(u_min),
        fmt_float(u_max),
        fmt_float(table.error_estimate())
    )
}

/// Rows `k,d_k,scale_prefix` where scale_prefix = ∏_{i<=k} d_i^{1/2}; the
/// last row's prefix is the full ε₀ divisor.
pub fn d_values_csv(d: &DValues) -> String {
    let mut out = String::from("k,d_k,scale_prefix\n");
    let mut prefix = 1.0f64;
    for (i, &v) in d.values().iter().enumerate() {
        prefix *= v.sqrt();
        out.push_str(&format!(
            "{},{},{}\n",
            i + 1,
            fmt_float(v),
            fmt_float(prefix)
        ));
    }
    out
}

pub fn d_values_json(d: &DValues) -> String {
    let mut out = String::from("{\n  \"d\": [");
    for (i, &v) in d.values().iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&fmt_float(v));
    }
    out.push_str(&format!(
        "],\n  \"epsilon0_scale\": {}\n}}\n",
        fmt_float(d.epsilon0_scale())
    ));
    out
}

pub fn ks_csv(ks: &KSResult, label: &str) -> String {
    format!(
        "law,statistic,sample_size,p_value_bound\n{},{},{},{}\n",
        label,
        fmt_float(ks.statistic),
        ks.sample_size,
        fmt_float(ks.p_value_bound)
    )
}

pub fn ks_json(ks: &KSResult, label: &str) -> String {
    format!(
        "{{\n  \"law\": {},\n  \"statistic\": {},\n  \"sample_size\": {},\n  \"p_value_bound\": {}\n}}\n",
        json_str(label),
        fmt_float(ks.statistic),
        ks.sample_size,
        fmt_float(ks.p_value_bound)
    )
}
