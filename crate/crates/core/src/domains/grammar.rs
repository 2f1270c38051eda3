//! Text syntax for domains, points and complex numbers.
//!
//! ```text
//! ball:r=2            ball:r=1,n=3          ball:r=1,c=0.5,0
//! polydisk:r=1,1      product(ball:r=1,polydisk:r=1,2)
//! affine(ball:r=1,n=2;matrix=1,0|0,2i;offset=0,1)
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::DomainModel;
use crate::error::{Error, Result};
use crate::forms::ComplexPoint;

const KINDS: [&str; 4] = ["ball", "polydisk", "product", "affine"];

/// Parses `1.5`, `-2i`, `i`, `0.5-0.25i`, `3e-2+1e-1i`.
pub fn parse_complex(s: &str) -> Result<Complex64> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Parse(format!("invalid complex number '{s}'"));
    if s.is_empty() {
        return Err(bad());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().map(|x| Complex64::new(x, 0.0)).map_err(|_| bad());
    };
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let imag = |t: &str| -> Result<f64> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().map_err(|_| bad())?;
            Ok(Complex64::new(re, imag(&body[k..])?))
        }
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

/// Parses a comma-separated point; a single `0` expands to the origin of `dim`.
pub fn parse_point(s: &str, dim: usize) -> Result<ComplexPoint> {
    let coords = s
        .split(',')
        .map(parse_complex)
        .collect::<Result<Vec<_>>>()?;
    if coords.len() == 1 && dim > 1 && coords[0] == Complex64::new(0.0, 0.0) {
        return Ok(ComplexPoint::origin(dim));
    }
    if coords.len() != dim {
        return Err(Error::Parse(format!(
            "point '{s}' has {} coordinates, domain dimension is {dim}",
            coords.len()
        )));
    }
    Ok(ComplexPoint::new(coords))
}

fn split_top_level(s: &str, sep: char) -> Result<Vec<&str>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            c if c == sep && depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(Error::Parse(format!("unbalanced parentheses in '{s}'")));
        }
    }
    if depth != 0 {
        return Err(Error::Parse(format!("unbalanced parentheses in '{s}'")));
    }
    parts.push(&s[start..]);
    Ok(parts)
}

fn starts_with_kind(s: &str) -> bool {
    let s = s.trim_start();
    KINDS.iter().any(|k| {
        s.strip_prefix(k)
            .is_some_and(|rest| rest.starts_with(':') || rest.starts_with('('))
    })
}

/// `key=v1,v2,key2=v3` → `[(key, [v1, v2]), (key2, [v3])]`.
fn key_values(s: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    for token in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((k, v)) = token.split_once('=') {
            out.push((k.trim().to_string(), vec![v.trim().to_string()]));
        } else if let Some(last) = out.last_mut() {
            last.1.push(token.to_string());
        } else {
            return Err(Error::Parse(format!("expected key=value, found '{token}'")));
        }
    }
    Ok(out)
}

fn floats(vals: &[String]) -> Result<Vec<f64>> {
    vals.iter()
        .map(|v| v.parse::<f64>().map_err(|_| Error::Parse(format!("invalid number '{v}'"))))
        .collect()
}

/// Parses a domain specification. `default_dim` supplies the dimension of a
/// ball written without `n=` (otherwise 1).
pub fn parse_domain(s: &str, default_dim: Option<usize>) -> Result<DomainModel> {
    let s = s.trim();
    if let Some(rest) = s.strip_prefix("product(").and_then(|r| r.strip_suffix(')')) {
        let mut factors: Vec<String> = Vec::new();
        for piece in split_top_level(rest, ',')? {
            match factors.last_mut() {
                Some(last) if !starts_with_kind(piece) => {
                    last.push(',');
                    last.push_str(piece);
                }
                _ => factors.push(piece.to_string()),
            }
        }
        let parsed = factors
            .iter()
            .map(|f| parse_domain(f, Some(1)))
            .collect::<Result<Vec<_>>>()?;
        return DomainModel::product(parsed);
    }
    if let Some(rest) = s.strip_prefix("affine(").and_then(|r| r.strip_suffix(')')) {
        let parts = split_top_level(rest, ';')?;
        let base = parse_domain(parts[0], default_dim)?;
        let n = base.dim();
        let mut matrix = DMatrix::identity(n, n);
        let mut offset = DVector::zeros(n);
        for part in &parts[1..] {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value in '{part}'")))?;
            match key.trim() {
                "matrix" => {
                    let rows: Vec<Vec<Complex64>> = value
                        .split('|')
                        .map(|row| row.split(',').map(parse_complex).collect::<Result<Vec<_>>>())
                        .collect::<Result<_>>()?;
                    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                        return Err(Error::Parse(format!("matrix must be {n}x{n}")));
                    }
                    matrix = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                }
                "offset" => {
                    offset = parse_point(value, n)?.to_dvector();
                }
                other => return Err(Error::Parse(format!("unknown affine key '{other}'"))),
            }
        }
        return DomainModel::affine_image(base, matrix, offset);
    }
    let (kind, args) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("unrecognised domain '{s}'")))?;
    let kv = key_values(args)?;
    let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_slice());
    for (k, _) in &kv {
        let allowed: &[&str] = match kind {
            "ball" => &["r", "n", "c"],
            "polydisk" => &["r"],
            _ => &[],
        };
        if !allowed.contains(&k.as_str()) {
            return Err(Error::Parse(format!("unknown key '{k}' for {kind}")));
        }
    }
    match kind.trim() {
        "ball" => {
            let r = floats(get("r").unwrap_or(&["1".to_string()]))?;
            if r.len() != 1 {
                return Err(Error::Parse("ball takes a single radius".into()));
            }
            let center = match get("c") {
                Some(vals) => ComplexPoint::new(vals.iter().map(|v| parse_complex(v)).collect::<Result<_>>()?),
                None => {
                    let n = match get("n") {
                        Some(v) => floats(v)?.first().copied().unwrap_or(1.0) as usize,
                        None => default_dim.unwrap_or(1),
                    };
                    ComplexPoint::origin(n)
                }
            };
            if let Some(v) = get("n") {
                let n = floats(v)?.first().copied().unwrap_or(0.0) as usize;
                if n != center.dim() {
                    return Err(Error::Parse(format!("n={n} disagrees with centre dimension {}", center.dim())));
                }
            }
            DomainModel::ball(center, r[0])
        }
        "polydisk" => {
            let radii = floats(get("r").ok_or_else(|| Error::Parse("polydisk needs r=".into()))?)?;
            DomainModel::polydisk(radii)
        }
        other => Err(Error::Parse(format!("unknown domain kind '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::DomainKind;

    #[test]
    fn complex_literals() {
        let cases = [
            ("1.5", (1.5, 0.0)),
            ("-2i", (0.0, -2.0)),
            ("i", (0.0, 1.0)),
            ("-i", (0.0, -1.0)),
            ("0.5-0.25i", (0.5, -0.25)),
            ("1e-1+2e-1i", (0.1, 0.2)),
            ("3+i", (3.0, 1.0)),
        ];
        for (s, (re, im)) in cases {
            assert_eq!(parse_complex(s).unwrap(), Complex64::new(re, im), "{s}");
        }
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn domains() {
        let d = parse_domain("ball:r=2", Some(3)).unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.as_ball().unwrap().1, 2.0);
        let d = parse_domain("polydisk:r=1,1", None).unwrap();
        assert!(matches!(d.kind(), DomainKind::Polydisk { radii } if radii == &vec![1.0, 1.0]));
        let d = parse_domain("product(ball:r=1,ball:r=1)", None).unwrap();
        assert_eq!(d.dim(), 2);
        let d = parse_domain("product(polydisk:r=1,2,ball:r=1,n=2)", None).unwrap();
        assert_eq!(d.dim(), 4);
        let d = parse_domain("affine(ball:r=1,n=2;matrix=1,0|0,2i;offset=0,1)", None).unwrap();
        assert!(d.contains(&ComplexPoint::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.5)])).unwrap());
        let d = parse_domain("ball:r=1,c=0.5,1+i", None).unwrap();
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn malformed_domains() {
        for s in ["ball", "cube:r=1", "ball:q=1", "product(ball:r=1", "affine(ball:r=1;matrix=1,2)", "ball:r=-1"] {
            assert!(parse_domain(s, None).is_err(), "{s}");
        }
    }

    #[test]
    fn points() {
        assert_eq!(parse_point("0", 3).unwrap(), ComplexPoint::origin(3));
        assert_eq!(parse_point("0.5,0", 2).unwrap(), ComplexPoint::real(&[0.5, 0.0]));
        assert!(parse_point("0.5,0", 3).is_err());
    }
}
