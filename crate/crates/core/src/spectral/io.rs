use super::{Family, Mode, OperatorSpec, SpectralBasis, SpectralError};
use crate::textfmt::{g17, parse_g17};
use std::fmt::Write as _;

const MAGIC: &str = "# hypolab spectral basis v1";

/// Line-oriented text form of a basis: a `key=value` header followed by one
/// line per mode, `n branch λ v₀ … v_{N−1}`, all floats as `%.17g`.
pub fn write_basis(basis: &SpectralBasis) -> String {
    let spec = basis.spec();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "family={}", spec.family.as_str());
    let _ = writeln!(out, "gamma={}", spec.gamma);
    let _ = writeln!(out, "grid_n={}", spec.grid_n);
    let _ = writeln!(out, "fourier_max={}", spec.fourier_max);
    let _ = writeln!(out, "branch_max={}", spec.branch_max);
    match spec.lambda_cutoff {
        Some(c) => {
            let _ = writeln!(out, "lambda_cutoff={}", g17(c));
        }
        None => {
            let _ = writeln!(out, "lambda_cutoff=none");
        }
    }
    let _ = writeln!(out, "modes={}", basis.len());
    for m in basis.modes() {
        let _ = write!(out, "{} {} {}", m.fourier_n, m.branch, g17(m.lambda));
        for v in &m.profile {
            out.push(' ');
            out.push_str(&g17(*v));
        }
        out.push('\n');
    }
    out
}

pub fn read_basis(text: &str) -> Result<SpectralBasis, SpectralError> {
    let perr = |line: usize, reason: String| SpectralError::Parse { line, reason };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == MAGIC => {}
        _ => return Err(perr(1, "missing basis header".into())),
    }
    let mut header = |key: &str| -> Result<(usize, String), SpectralError> {
        let (no, line) = lines.next().ok_or_else(|| perr(0, format!("missing header key {key}")))?;
        match line.split_once('=') {
            Some((k, v)) if k.trim() == key => Ok((no, v.trim().to_string())),
            _ => Err(perr(no, format!("expected {key}=…"))),
        }
    };
    fn int<T: std::str::FromStr>(no: usize, v: &str) -> Result<T, SpectralError> {
        v.parse().map_err(|_| SpectralError::Parse {
            line: no,
            reason: format!("not an integer: {v}"),
        })
    }
    let (no, v) = header("family")?;
    let family = Family::parse(&v).ok_or_else(|| perr(no, format!("unknown family {v}")))?;
    let (no, v) = header("gamma")?;
    let gamma = int(no, &v)?;
    let (no, v) = header("grid_n")?;
    let grid_n = int(no, &v)?;
    let (no, v) = header("fourier_max")?;
    let fourier_max = int(no, &v)?;
    let (no, v) = header("branch_max")?;
    let branch_max = int(no, &v)?;
    let (no, v) = header("lambda_cutoff")?;
    let lambda_cutoff = if v == "none" {
        None
    } else {
        Some(parse_g17(&v).ok_or_else(|| perr(no, format!("not a number: {v}")))?)
    };
    let (no, v) = header("modes")?;
    let count: usize = int(no, &v)?;
    let spec = OperatorSpec {
        family,
        gamma,
        grid_n,
        fourier_max,
        branch_max,
        lambda_cutoff,
    };
    spec.validate()?;
    let torus = family == Family::GrushinTorus;
    let mut modes = Vec::with_capacity(count);
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_ascii_whitespace();
        let mut next = |what: &str| fields.next().ok_or_else(|| perr(no, format!("missing {what}")));
        let fourier_n: i64 = int(no, next("fourier index")?)?;
        let branch: usize = int(no, next("branch")?)?;
        let lv = next("lambda")?;
        let lambda = parse_g17(lv).ok_or_else(|| perr(no, format!("not a number: {lv}")))?;
        let profile = fields
            .map(|f| parse_g17(f).ok_or_else(|| perr(no, format!("not a number: {f}"))))
            .collect::<Result<Vec<f64>, _>>()?;
        if profile.len() != grid_n {
            return Err(perr(no, format!("expected {grid_n} profile values, got {}", profile.len())));
        }
        if (!torus && fourier_n < 1) || fourier_n.unsigned_abs() as usize > fourier_max || branch == 0 {
            return Err(perr(no, format!("mode ({fourier_n}, {branch}) outside fourier_max × branch_max")));
        }
        let w = spec.x2_frequency(fourier_n);
        let x2 = match (torus, fourier_n) {
            (true, 0) => super::X2Mode::Constant,
            (true, n) if n > 0 => super::X2Mode::Cosine(w),
            _ => super::X2Mode::Sine(w),
        };
        modes.push(Mode {
            fourier_n,
            branch,
            lambda,
            x2,
            profile,
        });
    }
    if modes.len() != count {
        return Err(perr(0, format!("header announces {count} modes, found {}", modes.len())));
    }
    SpectralBasis::from_modes(spec, modes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::build_basis;

    #[test]
    fn roundtrip_is_bit_exact() {
        for family in [Family::GrushinRectangle, Family::GrushinTorus] {
            let spec = OperatorSpec {
                family,
                lambda_cutoff: Some(400.0),
                ..OperatorSpec::grushin(1, 129, 5, 3)
            };
            let basis = build_basis(&spec).unwrap();
            let text = write_basis(&basis);
            let back = read_basis(&text).unwrap();
            assert_eq!(back, basis);
            assert_eq!(write_basis(&back), text);
        }
    }

    #[test]
    fn reports_line_numbers() {
        let basis = build_basis(&OperatorSpec::grushin(1, 129, 2, 1)).unwrap();
        let text = write_basis(&basis).replacen("grid_n=129", "grid_n=abc", 1);
        match read_basis(&text) {
            Err(SpectralError::Parse { line: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
        let mut text = write_basis(&basis);
        text.push_str("1 1 oops\n");
        assert!(matches!(read_basis(&text), Err(SpectralError::Parse { line: 11, .. })));
    }
}
