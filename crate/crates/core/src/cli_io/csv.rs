//! Frontier CSV: fixed header, 12 significant digits, `\n` line endings.

use std::io::Read;

use super::CliError;
use crate::frontier::FrontierPoint;
use crate::signal_model::StrategyKind;

pub const FRONTIER_HEADER: &str = "gain,qber,dc,M,M_min,q,mu_beta,lambda,strategy";

const SIG_DIGITS: usize = 12;

/// `printf("%.12g")`: fixed notation for decimal exponents in `[-4, 12)`,
/// scientific otherwise, trailing zeros removed.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn frontier_row(p: &FrontierPoint) -> String {
    let lambda = p.lambda.map(format_sig).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{}",
        format_sig(p.gain),
        format_sig(p.qber),
        format_sig(p.dc),
        p.block_len,
        p.min_run,
        format_sig(p.send_prob),
        format_sig(p.mu_beta),
        lambda,
        p.strategy.as_str()
    )
}

pub fn frontier_csv(points: &[FrontierPoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(FRONTIER_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&frontier_row(p));
        out.push('\n');
    }
    out
}

fn bad(line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::input(format!("frontier CSV line {line}: {msg}"))
}

/// Parses a frontier CSV written by [`frontier_csv`]. Errors name the line.
pub fn read_frontier_csv(reader: impl Read) -> Result<Vec<FrontierPoint>, CliError> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut points = Vec::new();
    let mut saw_header = false;
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            bad(line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if !saw_header {
            let header: Vec<&str> = record.iter().collect();
            if header.join(",") != FRONTIER_HEADER {
                return Err(bad(line, format!("expected header `{FRONTIER_HEADER}`")));
            }
            saw_header = true;
            continue;
        }
        if record.len() != 9 {
            return Err(bad(line, format!("expected 9 fields, found {}", record.len())));
        }
        let float = |i: usize, name: &str| -> Result<f64, CliError> {
            let raw = &record[i];
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(line, format!("{name}: not a finite number: {raw:?}")))
        };
        let int = |i: usize, name: &str| -> Result<usize, CliError> {
            let raw = &record[i];
            raw.parse::<usize>()
                .map_err(|_| bad(line, format!("{name}: not a non-negative integer: {raw:?}")))
        };
        let strategy = StrategyKind::parse(&record[8])
            .ok_or_else(|| bad(line, format!("strategy: unknown kind {:?}", &record[8])))?;
        let lambda = match (&record[7], strategy) {
            ("", StrategyKind::Med) => return Err(bad(line, "lambda: required for med")),
            ("", _) => None,
            (_, StrategyKind::Med) => Some(float(7, "lambda")?),
            (raw, kind) => return Err(bad(line, format!("lambda: {raw:?} given for {kind}"))),
        };
        let point = FrontierPoint {
            gain: float(0, "gain")?,
            qber: float(1, "qber")?,
            dc: float(2, "dc")?,
            block_len: int(3, "M")?,
            min_run: int(4, "M_min")?,
            send_prob: float(5, "q")?,
            mu_beta: float(6, "mu_beta")?,
            lambda,
            strategy,
        };
        point.policy().map_err(|e| bad(line, e))?;
        points.push(point);
    }
    if !saw_header {
        return Err(bad(1, format!("missing header `{FRONTIER_HEADER}`")));
    }
    Ok(points)
}
