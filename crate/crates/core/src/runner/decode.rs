use serde::Serialize;

use crate::constants::C2;
use crate::error::{Error, Result};
use crate::observables::decode::{estimate_period, measure_interval, measure_response_time, DecodeOptions};
use crate::observables::rate::RateSeries;
use crate::oracle::response_time;
use crate::potentials::{Envelope, FieldSpec};
use crate::runner::config::{parse_config, RunConfig};

/// Rate series read back from a rate CSV.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub config: Option<RunConfig>,
    pub energy: Option<f64>,
    pub rate: RateSeries,
    pub baseline: Option<RateSeries>,
}

/// Parses a rate CSV written by the runner. The `#` header, when it holds
/// a configuration echo, supplies the field and envelope.
pub fn parse_rate_csv(text: &str) -> Result<RateTable> {
    let mut header = String::new();
    let mut energy = None;
    let mut rows = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            if let Some(v) = rest.strip_prefix("E_star = ") {
                energy = v.trim().parse::<f64>().ok();
            } else if !rest.starts_with("level_energy") && !rest.starts_with("species") {
                header.push_str(rest);
                header.push('\n');
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if columns.is_none() {
            columns = Some(line.split(',').map(|s| s.trim().to_string()).collect());
            continue;
        }
        let vals = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::Csv(format!("line {}: {e}", i + 1)))?;
        rows.push(vals);
    }
    let columns = columns.ok_or_else(|| Error::Csv("missing column header".into()))?;
    let col = |name: &str| columns.iter().position(|c| c == name);
    let (t_col, mu_col) = match (col("t"), col("mu")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Csv("need columns `t` and `mu`".into())),
    };
    if rows.len() < 3 {
        return Err(Error::Csv("fewer than three data rows".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != columns.len()) {
        return Err(Error::Csv(format!("row {} has {} fields", bad + 1, rows[bad].len())));
    }
    let get = |c: usize| rows.iter().map(|r| r[c]).collect::<Vec<f64>>();
    let times = get(t_col);
    let level = col("N_level").map_or_else(|| vec![0.0; times.len()], get);
    let e = energy.unwrap_or(f64::NAN);
    let rate = RateSeries {
        energy: e,
        level_energy: e,
        smoothing: 0.0,
        times: times.clone(),
        level,
        rate: get(mu_col),
    };
    let baseline = col("baseline").map(get).filter(|b| b.iter().all(|v| v.is_finite())).map(|b| RateSeries {
        energy: e,
        level_energy: e,
        smoothing: 0.0,
        times,
        level: vec![0.0; b.len()],
        rate: b,
    });
    let config = if header.trim().is_empty() {
        None
    } else {
        Some(parse_config(&header)?)
    };
    Ok(RateTable {
        config,
        energy,
        rate,
        baseline,
    })
}

/// A measured quantity next to the value encoded in the control field.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub measured: Option<f64>,
    pub expected: f64,
    pub relative_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Comparison {
    fn new(measured: Result<f64>, expected: f64) -> Self {
        match measured {
            Ok(m) => Self {
                measured: Some(m),
                expected,
                relative_error: Some((m - expected) / expected),
                error: None,
            },
            Err(e) => Self {
                measured: None,
                expected,
                relative_error: None,
                error: Some(e.to_string()),
            },
        }
    }

    pub fn within(&self, tolerance: f64) -> bool {
        self.relative_error.is_some_and(|r| r.abs() <= tolerance)
    }
}

/// Decoded temporal information of one rate series.
#[derive(Debug, Clone, Serialize)]
pub struct DecodedReport {
    pub envelope: Envelope,
    pub response_time: Comparison,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<Comparison>,
}

impl DecodedReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// True when every quantity the envelope encodes was recovered.
    pub fn decoded(&self) -> bool {
        [Some(&self.response_time), self.period.as_ref(), self.interval.as_ref()]
            .into_iter()
            .flatten()
            .all(|c| c.measured.is_some())
    }
}

/// Decodes response time and, depending on the envelope, the period or
/// the pulse interval of `rate` against its no-control `baseline`.
pub fn decode_rate(
    rate: &RateSeries,
    baseline: &RateSeries,
    field: &FieldSpec,
    options: &DecodeOptions,
) -> Result<DecodedReport> {
    let energy = if rate.energy.is_finite() { rate.energy } else { 1.25 * C2 };
    let expected_tau = response_time(field.separation, energy)?;
    let tau = measure_response_time(rate, baseline, &field.envelope, options);
    let env = field.envelope.clone();
    let period = match env {
        Envelope::Sinusoid { omega, .. } | Envelope::GaussSin { omega, .. } => Some(Comparison::new(
            estimate_period(rate, Some(baseline), 0.0, options),
            2.0 * std::f64::consts::PI / omega,
        )),
        _ => None,
    };
    let interval = match env {
        Envelope::DoubleGauss { first, second, .. } => Some(Comparison::new(
            measure_interval(rate, baseline, options),
            second - first,
        )),
        _ => None,
    };
    Ok(DecodedReport {
        envelope: env,
        response_time: Comparison::new(tau, expected_tau),
        period,
        interval,
    })
}

/// Decodes a rate CSV. `field` overrides the configuration echoed in the
/// header.
pub fn decode_csv(text: &str, field: Option<&FieldSpec>, options: &DecodeOptions) -> Result<DecodedReport> {
    let table = parse_rate_csv(text)?;
    let field = match (field, &table.config) {
        (Some(f), _) => f.clone(),
        (None, Some(c)) => c.field.clone(),
        (None, None) => return Err(Error::Csv("no envelope given and none in the header".into())),
    };
    let baseline = table
        .baseline
        .as_ref()
        .ok_or_else(|| Error::Csv("rate file has no baseline column".into()))?;
    decode_rate(&table.rate, baseline, &field, options)
}
