use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use hybrid_sketch::experiments::Record;

use crate::args::{Format, RunArgs};

/// Everything needed to rerun a command, echoed into every report.
#[derive(Serialize)]
pub struct RunConfig<'a> {
    pub command: &'a str,
    pub version: &'static str,
    pub args: &'a RunArgs,
}

#[derive(Serialize)]
struct JsonReport<'a, T: Serialize> {
    config: &'a RunConfig<'a>,
    result: T,
    records: &'a [Record],
}

pub fn render<T: Serialize>(config: &RunConfig, format: Format, result: T, records: &[Record]) -> anyhow::Result<String> {
    Ok(match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&JsonReport {
                config,
                result,
                records,
            })?;
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut s = format!("# config: {}\n{}\n", serde_json::to_string(config)?, Record::CSV_HEADER);
            for r in records {
                s.push_str(&r.to_csv());
                s.push('\n');
            }
            s
        }
    })
}

pub fn emit<T: Serialize>(
    config: &RunConfig,
    args: &RunArgs,
    default: Format,
    result: T,
    records: &[Record],
) -> anyhow::Result<()> {
    let text = render(config, args.format.unwrap_or(default), result, records)?;
    match &args.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `dir/report.json` + `"sketch"` → `dir/report.sketch.mtx`.
pub fn sibling(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{tag}.mtx"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;
    use hybrid_sketch::experiments::Trial;

    #[test]
    fn csv_has_config_header_and_fixed_columns() {
        let cli = crate::args::Cli::try_parse_from(["hybrid-sketch", "sparsify", "--gen", "power-law"]).unwrap();
        let args = cli.command.args();
        let cfg = RunConfig {
            command: "sparsify",
            version: "0",
            args,
        };
        let recs = vec![Record::new("l2", Some(0.0), 10, 5, Trial::Index(0), "rel_error", 0.5)];
        let csv = render(&cfg, Format::Csv, (), &recs).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with("# config: {\"command\":\"sparsify\""));
        assert_eq!(lines[1], "law,alpha,s,k,trial,metric,value");
        assert_eq!(lines[2], "l2,0,10,5,0,rel_error,0.5");
        let json: serde_json::Value = serde_json::from_str(&render(&cfg, Format::Json, 3, &recs).unwrap()).unwrap();
        assert_eq!(json["config"]["args"]["gen"], "power-law");
        assert_eq!(json["result"], 3);
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("out/r.json"), "sketch"), PathBuf::from("out/r.sketch.mtx"));
        assert_eq!(sibling(Path::new("r"), "components"), PathBuf::from("r.components.mtx"));
    }
}
