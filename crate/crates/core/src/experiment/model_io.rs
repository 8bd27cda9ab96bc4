use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::dynamics::RngStream;
use crate::error::{Error, Result};
use crate::spin::{Edge, IsingModel};

/// Parses the line format
///
/// ```text
/// n <count>
/// e <u> <v> <J>
/// h <v> <H>
/// ```
///
/// with `#` comments and blank lines ignored.
pub fn parse_model_str(text: &str) -> Result<IsingModel> {
    let mut n: Option<(usize, usize)> = None;
    let mut edges: Vec<(usize, Edge)> = Vec::new();
    let mut fields: Vec<(usize, usize, f64)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        let int = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| err(format!("'{s}' is not a nonnegative integer")))
        };
        let real = |s: &str| -> Result<f64> {
            let x: f64 = s.parse().map_err(|_| err(format!("'{s}' is not a number")))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(err(format!("'{s}' is not finite")))
            }
        };
        match (tok[0], tok.len()) {
            ("n", 2) => {
                if n.is_some() {
                    return Err(err("vertex count given twice".into()));
                }
                n = Some((int(tok[1])?, line_no));
            }
            ("e", 4) => {
                let (u, v, j) = (int(tok[1])?, int(tok[2])?, real(tok[3])?);
                if j < 0.0 {
                    return Err(err(format!(
                        "coupling {j} is negative; the model must be ferromagnetic (J >= 0)"
                    )));
                }
                edges.push((line_no, Edge { u, v, j }));
            }
            ("h", 3) => fields.push((line_no, int(tok[1])?, real(tok[2])?)),
            ("n" | "e" | "h", k) => {
                return Err(err(format!("'{}' takes {} values, got {}", tok[0], expect_len(tok[0]), k - 1)))
            }
            (other, _) => return Err(err(format!("unknown record '{other}'"))),
        }
    }
    let (n, _) = n.ok_or(Error::Parse {
        line: 0,
        message: "missing 'n <count>' line".into(),
    })?;
    let mut field = vec![0.0; n];
    for &(line, v, h) in &fields {
        if v >= n {
            return Err(Error::Parse {
                line,
                message: format!("vertex {v} outside [0, {n})"),
            });
        }
        field[v] = h;
    }
    for (line, e) in &edges {
        if e.u >= n || e.v >= n {
            return Err(Error::Parse {
                line: *line,
                message: format!("edge ({}, {}) has a vertex outside [0, {n})", e.u, e.v),
            });
        }
    }
    let plain: Vec<Edge> = edges.iter().map(|&(_, e)| e).collect();
    IsingModel::with_field(n, plain, field).map_err(|e| match e {
        Error::InvalidModel(message) => Error::Parse { line: 0, message },
        other => other,
    })
}

fn expect_len(tag: &str) -> usize {
    match tag {
        "n" => 1,
        "e" => 3,
        _ => 2,
    }
}

pub fn parse_model(path: &Path) -> Result<IsingModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_model_str(&text)
}

/// Inverse of [`parse_model_str`]; floats use the shortest round-trip form.
pub fn write_model(model: &IsingModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "n {}", model.n());
    for e in model.edges() {
        let _ = writeln!(s, "e {} {} {:?}", e.u, e.v, e.j);
    }
    for (v, &h) in model.field().iter().enumerate() {
        if h != 0.0 {
            let _ = writeln!(s, "h {v} {h:?}");
        }
    }
    s
}

/// Random graph and coupling families.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Empty { n: usize },
    Path { n: usize, j: f64 },
    Cycle { n: usize, j: f64 },
    Complete { n: usize, j: f64 },
    Grid2d { width: usize, height: usize, j: f64 },
    ErdosRenyi { n: usize, p: f64, j: f64 },
    /// `G(n, p)` with `J` uniform on `[j_min, j_max]` per edge.
    RandomJ { n: usize, p: f64, j_min: f64, j_max: f64 },
}

impl GeneratorSpec {
    /// Parses `kind:key=value,...`, e.g. `cycle:n=4,j=1` or
    /// `random-j:n=6,p=0.5,jmin=0,jmax=2`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut kv = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("expected key=value, got '{part}'")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::InvalidInput(format!("'{v}' is not a number")))?;
            kv.insert(k.to_string(), v);
        }
        let get = |k: &str, default: Option<f64>| -> Result<f64> {
            kv.get(k)
                .copied()
                .or(default)
                .ok_or_else(|| Error::InvalidInput(format!("generator '{kind}' needs '{k}'")))
        };
        let count = |k: &str| -> Result<usize> {
            let x = get(k, None)?;
            if x < 1.0 || x.fract() != 0.0 {
                return Err(Error::InvalidInput(format!("'{k}' must be a positive integer")));
            }
            Ok(x as usize)
        };
        let spec = match kind {
            "empty" => Self::Empty { n: count("n")? },
            "path" => Self::Path {
                n: count("n")?,
                j: get("j", Some(1.0))?,
            },
            "cycle" => Self::Cycle {
                n: count("n")?,
                j: get("j", Some(1.0))?,
            },
            "complete" => Self::Complete {
                n: count("n")?,
                j: get("j", Some(1.0))?,
            },
            "grid2d" => Self::Grid2d {
                width: count("w")?,
                height: count("h")?,
                j: get("j", Some(1.0))?,
            },
            "erdos-renyi" => Self::ErdosRenyi {
                n: count("n")?,
                p: get("p", None)?,
                j: get("j", Some(1.0))?,
            },
            "random-j" => Self::RandomJ {
                n: count("n")?,
                p: get("p", Some(1.0))?,
                j_min: get("jmin", Some(0.0))?,
                j_max: get("jmax", Some(1.0))?,
            },
            other => return Err(Error::InvalidInput(format!("unknown generator '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        match *self {
            Self::Path { j, .. } | Self::Cycle { j, .. } | Self::Complete { j, .. } | Self::Grid2d { j, .. }
                if !(j >= 0.0 && j.is_finite()) =>
            {
                bad("couplings must be finite and nonnegative")
            }
            Self::ErdosRenyi { p, j, .. } if !(0.0..=1.0).contains(&p) || !(j >= 0.0 && j.is_finite()) => {
                bad("need 0 <= p <= 1 and finite J >= 0")
            }
            Self::RandomJ { p, j_min, j_max, .. }
                if !(0.0..=1.0).contains(&p) || !(0.0 <= j_min && j_min <= j_max && j_max.is_finite()) =>
            {
                bad("need 0 <= p <= 1 and 0 <= jmin <= jmax")
            }
            Self::Cycle { n, .. } if n < 3 => bad("a cycle needs at least 3 vertices"),
            _ => Ok(()),
        }
    }
}

/// Builds the model; deterministic given `seed`.
pub fn generate_model(spec: &GeneratorSpec, seed: u64) -> Result<IsingModel> {
    spec.validate()?;
    let mut rng = RngStream::new(seed, 0);
    let edge = |u: usize, v: usize, j: f64| Edge { u, v, j };
    match *spec {
        GeneratorSpec::Empty { n } => IsingModel::empty(n),
        GeneratorSpec::Path { n, j } => IsingModel::new(n, (1..n).map(|v| edge(v - 1, v, j)).collect()),
        GeneratorSpec::Cycle { n, j } => IsingModel::new(n, (0..n).map(|v| edge(v, (v + 1) % n, j)).collect()),
        GeneratorSpec::Complete { n, j } => {
            let mut es = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    es.push(edge(u, v, j));
                }
            }
            IsingModel::new(n, es)
        }
        GeneratorSpec::Grid2d { width, height, j } => {
            let id = |x: usize, y: usize| y * width + x;
            let mut es = Vec::new();
            for y in 0..height {
                for x in 0..width {
                    if x + 1 < width {
                        es.push(edge(id(x, y), id(x + 1, y), j));
                    }
                    if y + 1 < height {
                        es.push(edge(id(x, y), id(x, y + 1), j));
                    }
                }
            }
            IsingModel::new(width * height, es)
        }
        GeneratorSpec::ErdosRenyi { n, p, j } => {
            let mut es = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.rng().random::<f64>() < p {
                        es.push(edge(u, v, j));
                    }
                }
            }
            IsingModel::new(n, es)
        }
        GeneratorSpec::RandomJ { n, p, j_min, j_max } => {
            let mut es = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    let keep = rng.rng().random::<f64>() < p;
                    let j = j_min + (j_max - j_min) * rng.rng().random::<f64>();
                    if keep {
                        es.push(edge(u, v, j));
                    }
                }
            }
            IsingModel::new(n, es)
        }
    }
}

/// A file path, or `gen:<generator spec>`.
pub fn load_model(source: &str, seed: u64) -> Result<IsingModel> {
    match source.strip_prefix("gen:") {
        Some(spec) => generate_model(&GeneratorSpec::parse(spec)?, seed),
        None => parse_model(Path::new(source)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_examples() {
        let m = parse_model_str("n 2\ne 0 1 0.5\n").unwrap();
        assert_eq!(m.edges(), &[Edge { u: 0, v: 1, j: 0.5 }]);
        let m = parse_model_str("# field\nn 2\nh 0 0.3 # trailing\n").unwrap();
        assert_eq!(m.field(), &[0.3, 0.0]);
        let e = parse_model_str("n 2\ne 0 1 -0.1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(e.to_string().contains("ferromagnetic"));
        assert!(matches!(parse_model_str("n 2\nx 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_model_str("n 2\ne 0 5 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_model_str("e 0 1 1\n"), Err(Error::Parse { line: 0, .. })));
    }

    #[test]
    fn generator_examples() {
        let m = load_model("gen:empty:n=5", 0).unwrap();
        assert_eq!((m.n(), m.edges().len()), (5, 0));
        let m = load_model("gen:cycle:n=4,j=1", 0).unwrap();
        assert_eq!(m.edges().len(), 4);
        assert!(m.edges().iter().all(|e| e.j == 1.0));
        let m = load_model("gen:grid2d:w=3,h=3", 0).unwrap();
        assert_eq!(m.edges().len(), 12);
        assert_eq!(load_model("gen:complete:n=5,j=0.2", 0).unwrap().edges().len(), 10);
        let a = load_model("gen:random-j:n=8,p=0.5,jmax=2", 7).unwrap();
        assert_eq!(a, load_model("gen:random-j:n=8,p=0.5,jmax=2", 7).unwrap());
        assert!(load_model("gen:erdos-renyi:n=4", 0).is_err());
        assert!(load_model("gen:path:n=3,j=-1", 0).is_err());
        assert!(load_model("gen:torus:n=3", 0).is_err());
    }
}
