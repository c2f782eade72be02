//! On-disk layout of a run.
//!
//! ```text
//! out_dir/
//!   results.json     statistics and verdicts (no timestamps, reproducible)
//!   samples.csv      one row per replication
//!   config.json      the validated config with defaults filled in
//!   histogram.svg    \
//!   qq.svg            } only when the experiment has a plot and a non-empty battery
//!   trace.svg        /
//!   manifest.json    version, hash, seed, timestamps, file list; written last
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::harness::{ExperimentResult, SampleTable, TOOL_VERSION};
use crate::svg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub runtime_seconds: f64,
    pub passed: bool,
    pub files: Vec<String>,
}

/// Writes `bytes` to `dir/name` through a temporary file and a rename.
fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

/// Header `rep,<columns>` then one line per replication, `\n` terminated.
pub fn samples_csv(samples: &SampleTable) -> String {
    let mut s = String::from("rep");
    for c in &samples.columns {
        s.push(',');
        if c.contains([',', '"', '\n']) {
            s.push('"');
            s.push_str(&c.replace('"', "\"\""));
            s.push('"');
        } else {
            s.push_str(c);
        }
    }
    s.push('\n');
    for (i, row) in samples.rows.iter().enumerate() {
        s.push_str(&i.to_string());
        for v in row {
            s.push(',');
            // shortest round-trip representation, always with '.' as separator
            s.push_str(&format!("{v:?}"));
        }
        s.push('\n');
    }
    s
}

pub fn results_json(result: &ExperimentResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)? + "\n")
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes every artefact of `result` into `out_dir` and returns the manifest.
pub fn emit_outputs(
    result: &ExperimentResult,
    config: &ExperimentConfig,
    out_dir: &Path,
    started: DateTime<Utc>,
) -> Result<RunManifest> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: &[u8]| -> Result<()> {
        write_atomic(out_dir, name, bytes)?;
        files.push(name.to_string());
        Ok(())
    };
    put("results.json", results_json(result)?.as_bytes())?;
    put("samples.csv", samples_csv(&result.samples).as_bytes())?;
    put("config.json", (serde_json::to_string_pretty(config)? + "\n").as_bytes())?;
    if let Some(plot) = &result.plot {
        let values = result.samples.column(plot.column);
        let var = plot.target_sd.map(|s| s * s);
        put("histogram.svg", svg::histogram(&values, plot.target_sd, &plot.title).as_bytes())?;
        put("qq.svg", svg::qq_plot(&values, plot.target_sd, &format!("QQ plot of {}", plot.title)).as_bytes())?;
        put("trace.svg", svg::variance_trace(&values, var, &format!("variance trace of {}", plot.title)).as_bytes())?;
    }
    let finished = Utc::now();
    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        experiment: result.experiment.clone(),
        config_hash: result.config_hash.clone(),
        seed: result.seed,
        started_at: timestamp(started),
        finished_at: timestamp(finished),
        runtime_seconds: result.runtime.as_secs_f64(),
        passed: result.passed,
        files: files.clone(),
    };
    write_atomic(out_dir, "manifest.json", (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let t = SampleTable { columns: vec!["a".into(), "b,c".into()], rows: vec![vec![1.0, -0.5], vec![1e-20, 3.0]] };
        assert_eq!(samples_csv(&t), "rep,a,\"b,c\"\n0,1.0,-0.5\n1,1e-20,3.0\n");
    }
}
