// SPDX-License-Identifier: Apache-2.0

//! `key=value` run configuration files.

use std::collections::BTreeMap;

use thiserror::Error;
use warpkit::cpu::{CoreConfig, Mutation};
use warpkit::stagegraph::{validate_stage_map, StageMap, VirtualStage};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

fn number<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    let v = value.replace('_', "");
    let parsed = match v.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16).ok().and_then(|n| n.to_string().parse().ok()),
        None => v.parse().ok(),
    };
    parsed.ok_or_else(|| err(line, format!("`{key}`: `{value}` is not a valid number")))
}

pub fn parse_config(text: &str) -> Result<CoreConfig, ConfigError> {
    let mut config = CoreConfig::default();
    let mut preset: Option<(usize, u32)> = None;
    let mut explicit: BTreeMap<VirtualStage, u32> = BTreeMap::new();
    let mut first_stage_line = 0;
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if let Some(prev) = seen.insert(key.to_string(), line) {
            return Err(err(line, format!("`{key}` already set on line {prev}")));
        }
        match key {
            "stages" => {
                let n: u32 = number(line, key, value)?;
                if StageMap::preset(n).is_none() {
                    return Err(err(line, format!("`stages`: no preset with {n} stages (use 1, 5 or 7)")));
                }
                preset = Some((line, n));
            }
            "mem_latency" => config.mem_latency = number(line, key, value)?,
            "mem_size" => config.mem_size = number(line, key, value)?,
            "max_cycles" => config.max_cycles = number(line, key, value)?,
            "max_pending_loads" => config.max_pending_loads = number(line, key, value)?,
            "mutation" => {
                config.mutation = if value == "none" {
                    None
                } else {
                    Some(value.parse::<Mutation>().map_err(|m| err(line, m))?)
                }
            }
            _ => match key.strip_prefix("stage.") {
                Some(stage) => {
                    let v: VirtualStage = stage
                        .parse()
                        .map_err(|_| err(line, format!("unknown key `{key}`")))?;
                    if explicit.is_empty() {
                        first_stage_line = line;
                    }
                    explicit.insert(v, number(line, key, value)?);
                }
                None => return Err(err(line, format!("unknown key `{key}`"))),
            },
        }
    }

    match (preset, explicit.is_empty()) {
        (Some((line, _)), false) => {
            return Err(err(line, "`stages` and explicit `stage.*` keys are mutually exclusive"))
        }
        (Some((_, n)), true) => config.stage_map = StageMap::preset(n).expect("checked"),
        (None, false) => {
            let mut physical = [0u32; 7];
            for v in VirtualStage::ALL {
                physical[v.index()] = *explicit.get(&v).ok_or_else(|| {
                    err(first_stage_line, format!("missing key `stage.{}`", v.name()))
                })?;
            }
            let map = StageMap::new("custom", physical);
            validate_stage_map(&map).map_err(|e| err(first_stage_line, e.to_string()))?;
            config.stage_map = map;
        }
        (None, true) => {}
    }
    config
        .validate()
        .map_err(|e| err(0, e.to_string()))?;
    Ok(config)
}
