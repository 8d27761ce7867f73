//! CSV and JSON writers for traces, single solves and paths. Every file
//! carries the resolved run configuration so counters can be reproduced.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::fw::TraceRow;
use crate::path::PathResult;
use crate::problem::Solution;

pub const SCHEMA_VERSION: u32 = 1;

/// `# {"schema":1,"config":...}`, the first line of every CSV output.
pub fn write_header<W: Write>(out: &mut W, config: &Value) -> Result<()> {
    let head = json!({ "schema": SCHEMA_VERSION, "config": config });
    writeln!(out, "# {}", serde_json::to_string(&head)?)?;
    Ok(())
}

/// Reads the JSON header back from a CSV written by this module.
pub fn parse_header(line: &str) -> Option<Value> {
    serde_json::from_str(line.strip_prefix("# ")?).ok()
}

/// `k,objective,nnz,dot_products[,gap]`.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &[TraceRow], with_gap: bool) -> Result<()> {
    if with_gap {
        writeln!(out, "k,objective,nnz,dot_products,gap")?;
    } else {
        writeln!(out, "k,objective,nnz,dot_products")?;
    }
    for r in trace {
        write!(out, "{},{},{},{}", r.k, r.objective, r.nnz, r.dot_products)?;
        if with_gap {
            match r.gap {
                Some(g) => write!(out, ",{g}")?,
                None => write!(out, ",")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One row per nonzero coefficient.
pub fn write_solution_csv<W: Write>(out: &mut W, sol: &Solution, config: &Value) -> Result<()> {
    write_header(out, config)?;
    writeln!(
        out,
        "# objective={} iterations={} stop={:?} dot_products={}",
        sol.objective, sol.iterations, sol.stop_reason, sol.counters.dot_products
    )?;
    writeln!(out, "index,value")?;
    for (j, v) in &sol.coef {
        writeln!(out, "{j},{v}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: u32,
    config: &'a Value,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<W: Write, T: Serialize>(out: &mut W, body: &T, config: &Value) -> Result<()> {
    let env = Envelope {
        schema: SCHEMA_VERSION,
        config,
        body,
    };
    serde_json::to_writer_pretty(&mut *out, &env)?;
    writeln!(out)?;
    Ok(())
}

pub const PATH_CSV_COLUMNS: &str =
    "index,param,l1_norm,nnz,train_mse,test_mse,iterations,dot_products,wall_time_s,seed,stop_reason,error";

/// One row per grid point; coefficients are only in the JSON form.
pub fn write_path_csv<W: Write>(out: &mut W, result: &PathResult, config: &Value) -> Result<()> {
    write_header(out, config)?;
    if result.parallel_cold {
        writeln!(out, "# mode=parallel_cold (independent zero starts, no warm start)")?;
    }
    writeln!(out, "{PATH_CSV_COLUMNS}")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut *out);
    for r in &result.records {
        w.write_record([
            r.index.to_string(),
            r.param.to_string(),
            r.l1_norm.to_string(),
            r.nnz.to_string(),
            r.train_mse.to_string(),
            r.test_mse.map(|v| v.to_string()).unwrap_or_default(),
            r.iterations.to_string(),
            r.dot_products.to_string(),
            r.wall_time_s.to_string(),
            r.seed.to_string(),
            r.stop_reason
                .map(|s| format!("{s:?}").to_lowercase())
                .unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
