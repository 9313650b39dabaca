use std::ffi::OsString;
use std::fs;

use serde_json::Value;

use crate::Failure;

/// Splices flags from a `--config` JSON object in front of the explicit
/// flags, so that anything given on the command line wins.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, Failure> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Failure::usage(format!("cannot read config {path}: {e}")))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("config {path} is not valid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(Failure::usage(format!(
            "config {path} must be a JSON object"
        )));
    };
    let mut injected = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        if flag == "--config" {
            continue;
        }
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => injected.push(flag.into()),
            Value::Array(items) => {
                let joined: Vec<String> = items.iter().map(scalar).collect::<Result<_, _>>()?;
                injected.push(flag.into());
                injected.push(joined.join(",").into());
            }
            other => {
                injected.push(flag.into());
                injected.push(scalar(&other)?.into());
            }
        }
    }
    // Program name and subcommand stay first.
    let split = args.len().min(2);
    let mut out: Vec<OsString> = args[..split].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[split..]);
    Ok(out)
}

fn scalar(v: &Value) -> Result<String, Failure> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Failure::usage(format!("unsupported config value {other}"))),
    }
}

fn config_path(args: &[OsString]) -> Option<String> {
    let mut it = args.iter().skip(2).map(|a| a.to_string_lossy());
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().map(|s| s.into_owned());
        }
        if let Some(rest) = a.strip_prefix("--config=") {
            return Some(rest.to_owned());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_flags_precede_explicit_ones() {
        let dir = std::env::temp_dir().join(format!("qst-config-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.json");
        fs::write(
            &path,
            r#"{"waveguides": 12, "pair": [2, 5], "bessel": true, "no_refine": false}"#,
        )
        .unwrap();
        let args: Vec<OsString> = [
            "qst",
            "impulse",
            "--config",
            path.to_str().unwrap(),
            "--waveguides",
            "9",
        ]
        .iter()
        .map(Into::into)
        .collect();
        let out: Vec<String> = expand(args)
            .unwrap()
            .into_iter()
            .map(|s| s.into_string().unwrap())
            .collect();
        assert_eq!(&out[..2], ["qst", "impulse"]);
        let injected = &out[2..out.len() - 4];
        assert!(injected.windows(2).any(|w| w == ["--waveguides", "12"]));
        assert!(injected.windows(2).any(|w| w == ["--pair", "2,5"]));
        assert!(injected.contains(&"--bessel".to_string()));
        assert!(!injected.contains(&"--no-refine".to_string()));
        assert_eq!(&out[out.len() - 2..], ["--waveguides", "9"]);
    }
}
