//! Run configuration files: `key = value` lines, `#` comments, blank lines
//! ignored. Every key has a default, so an empty file is valid; an unknown
//! key is an error that names it rather than a silent no-op.

use std::error::Error;
use std::fmt;

use autoasm_core::trainer::TrainConfig;

#[derive(Debug)]
pub struct ConfigError {
    /// 1-based line of the offending entry.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}: {}", self.line, self.message)
    }
}

impl Error for ConfigError {}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| ConfigError {
        line,
        message: format!("bad value for `{key}`: {e}"),
    })
}

/// Parses a comma-separated list of positive sampling temperatures.
pub fn parse_temperature_list(value: &str) -> Result<Vec<f64>, String> {
    let temps = value
        .split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|e| format!("bad temperature `{t}`: {e}"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if temps.is_empty() || temps.iter().any(|&t| t <= 0.0) {
        return Err("temperatures must be a non-empty list of positive reals".into());
    }
    Ok(temps)
}

fn parse_temperatures(value: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
    parse_temperature_list(value).map_err(|message| ConfigError { line, message })
}

/// Applies `text` on top of `base`. Later lines override earlier ones.
pub fn apply_train_config(text: &str, mut base: TrainConfig) -> Result<TrainConfig, ConfigError> {
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| ConfigError {
            line,
            message: format!("expected `key = value`, got `{trimmed}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "temperatures" => base.temperatures = parse_temperatures(value, line)?,
            "batch_size" => base.batch_size = parse_value(key, value, line)?,
            "epochs" => base.epochs = parse_value(key, value, line)?,
            "gamma" => base.gamma = parse_value(key, value, line)?,
            "lambda0" => base.lambda0 = parse_value(key, value, line)?,
            "lambda_decay" => base.lambda_decay = parse_value(key, value, line)?,
            "max_steps" => base.max_steps = parse_value(key, value, line)?,
            "policy_lr" => base.policy_lr = parse_value(key, value, line)?,
            "value_lr" => base.value_lr = parse_value(key, value, line)?,
            "per_step_returns" => base.per_step_returns = parse_value(key, value, line)?,
            "pretrain_epochs" => base.pretrain_epochs = parse_value(key, value, line)?,
            "pretrain_batch" => base.pretrain_batch = parse_value(key, value, line)?,
            "pretrain_lr" => base.pretrain_lr = parse_value(key, value, line)?,
            "holdout_fraction" => base.holdout_fraction = parse_value(key, value, line)?,
            "pretrain_target_accuracy" => {
                base.pretrain_target_accuracy = parse_value(key, value, line)?
            }
            "plateau_window" => base.plateau_window = parse_value(key, value, line)?,
            "plateau_min_gain" => base.plateau_min_gain = parse_value(key, value, line)?,
            "seed" => base.seed = parse_value(key, value, line)?,
            _ => {
                return Err(ConfigError {
                    line,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
    }
    Ok(base)
}

/// Renders a config in the same syntax [`apply_train_config`] reads.
pub fn render_train_config(config: &TrainConfig) -> String {
    let temps = config
        .temperatures
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "temperatures = {temps}\n\
         batch_size = {}\n\
         epochs = {}\n\
         gamma = {}\n\
         lambda0 = {}\n\
         lambda_decay = {}\n\
         max_steps = {}\n\
         policy_lr = {}\n\
         value_lr = {}\n\
         per_step_returns = {}\n\
         pretrain_epochs = {}\n\
         pretrain_batch = {}\n\
         pretrain_lr = {}\n\
         holdout_fraction = {}\n\
         pretrain_target_accuracy = {}\n\
         plateau_window = {}\n\
         plateau_min_gain = {}\n\
         seed = {}\n",
        config.batch_size,
        config.epochs,
        config.gamma,
        config.lambda0,
        config.lambda_decay,
        config.max_steps,
        config.policy_lr,
        config.value_lr,
        config.per_step_returns,
        config.pretrain_epochs,
        config.pretrain_batch,
        config.pretrain_lr,
        config.holdout_fraction,
        config.pretrain_target_accuracy,
        config.plateau_window,
        config.plateau_min_gain,
        config.seed,
    )
}
