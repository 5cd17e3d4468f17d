//! One-dimensional scans over any key of another command.

use mtqed::par::{self, Execution};

use crate::commands::{Command, Outcome};
use crate::config::{split_list, Config};
use crate::CliError;

pub fn sweep(cfg: &Config, exec: Execution) -> Result<Outcome, CliError> {
    let mut base = cfg.clone();
    let command = Command::from_name(
        &base
            .remove("command")
            .ok_or_else(|| CliError::Config("sweep needs `command`".into()))?,
    )?;
    let key = base
        .remove("sweep_key")
        .ok_or_else(|| CliError::Config("sweep needs `sweep_key`".into()))?;
    let values = split_list(
        &base
            .remove("sweep_values")
            .ok_or_else(|| CliError::Config("sweep needs `sweep_values`".into()))?,
    );
    if !command.keys().contains(&key.as_str()) {
        return Err(CliError::Config(format!(
            "`sweep_key` = `{key}` is not a key of `{}`",
            command.name()
        )));
    }
    if values.is_empty() {
        return Err(CliError::Config("`sweep_values` is empty".into()));
    }
    base.restrict(command.name(), &command.keys())?;

    let outcomes = par::try_map(exec, &values, |v| {
        let mut point = base.clone();
        point.set(&key, v);
        command.run(&point, exec)
    })?;

    let names: Vec<&str> = outcomes[0]
        .record
        .iter()
        .map(|(n, _)| *n)
        .filter(|n| *n != key)
        .collect();
    let mut body = String::from(key.as_str());
    for n in &names {
        body.push(',');
        body.push_str(n);
    }
    body.push('\n');
    for (v, o) in values.iter().zip(&outcomes) {
        body.push_str(&match v.parse::<f64>() {
            Ok(x) => format!("{x:.16e}"),
            Err(_) => v.clone(),
        });
        for (n, x) in &o.record {
            if *n != key {
                body.push_str(&format!(",{x:.16e}"));
            }
        }
        body.push('\n');
    }
    let gates_pass = outcomes.iter().all(|o| o.gates_pass);
    Ok(Outcome {
        body,
        summary: format!("sweep: {} over {} values of `{key}`", command.name(), values.len()),
        record: Vec::new(),
        gates_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_follow_grid_order() {
        let cfg = Config::parse("command = spectrum\nsweep_key = N\nsweep_values = 9, 1, 4").unwrap();
        let o = sweep(&cfg, Execution::default()).unwrap();
        let lines: Vec<&str> = o.body.lines().collect();
        assert_eq!(lines[0], "N,lambda,delta,lower,upper,splitting,splitting_exact");
        assert!(lines[1].starts_with("9.0000000000000000e0,"));
        assert!(lines[2].starts_with("1.0000000000000000e0,"));
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn bad_sweep_key() {
        let cfg = Config::parse("command = cat\nsweep_key = lambda\nsweep_values = 1").unwrap();
        assert_eq!(sweep(&cfg, Execution::Sequential).unwrap_err().exit_code(), 2);
    }
}
