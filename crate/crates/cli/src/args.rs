use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "pconvex",
    version,
    about = "Uniform convexity of paranormed spaces p(x) = φ⁻¹(Σ aᵢ φ(|xᵢ|))"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every generator condition on a grid.
    Audit(AuditArgs),
    /// Certify paranorm and uniform-convexity routes for a generator and weights.
    Certify(CertifyArgs),
    /// Tabulate a modulus of convexity over an (r, eps) grid.
    Modulus(ModulusArgs),
    /// Compare a modulus against a seeded brute-force search. Exits 1 on any violation.
    Verify(VerifyArgs),
    /// Sample the boundary of a planar ball.
    Ball(BallArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct Space {
    /// Generator: power:p=2, exp:a=e, powexp:p=2,a=e, cubicrational:p=3 or expr:<formula in t>.
    #[arg(long)]
    pub phi: String,
    /// Comma-separated point masses.
    #[arg(long, default_value = "1,1")]
    pub weights: String,
    /// Condition grid lo:hi:n:log|lin (default 1e-4:30:120:log, capped for fast generators).
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub phi: String,
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub space: Space,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct Points {
    /// Radii: a value, a comma list, or lo:hi:n (inclusive, linear).
    #[arg(long, default_value = "0.5:2.5:5")]
    pub r: ValueList,
    /// Separations, same syntax as --r.
    #[arg(long, conflicts_with = "eps_frac")]
    pub eps: Option<ValueList>,
    /// Separations as fractions of 2r (used when --eps is absent).
    #[arg(long, default_value = "0.1:0.9:9")]
    pub eps_frac: ValueList,
}

#[derive(Debug, Clone, Args)]
pub struct ModulusArgs {
    #[command(flatten)]
    pub space: Space,
    /// eA, eF, thm5, clarkson or psi.
    #[arg(long)]
    pub method: String,
    /// Transform for --method psi.
    #[arg(long)]
    pub psi: Option<String>,
    /// Base method for --method psi.
    #[arg(long, default_value = "eA")]
    pub base: String,
    /// Compute even when the method's route is not certified.
    #[arg(long)]
    pub allow_uncertified: bool,
    #[command(flatten)]
    pub points: Points,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub space: Space,
    /// eA, eF, thm5 or clarkson; by default the first certified of thm5, eA, eF.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub allow_uncertified: bool,
    #[arg(long, default_value_t = 20_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub points: Points,
    /// Multiplies the theoretical modulus (mutation testing).
    #[arg(long, hide = true, default_value_t = 1.0)]
    pub corrupt_delta: f64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct BallArgs {
    #[command(flatten)]
    pub space: Space,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Number of boundary points (at least 4).
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[command(flatten)]
    pub output: Output,
}

/// `1.5`, `0.5,1,2` or `lo:hi:n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueList {
    pub text: String,
    pub values: Vec<f64>,
}

impl FromStr for ValueList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{t}` is not a finite number"))
        };
        let values = if s.contains(':') {
            let parts: Vec<&str> = s.split(':').collect();
            let [lo, hi, n] = parts[..] else {
                return Err(format!("range `{s}` must be lo:hi:n"));
            };
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n.trim().parse().map_err(|_| format!("`{n}` is not a count"))?;
            match n {
                0 => return Err("range needs n >= 1".into()),
                1 => vec![lo],
                _ => (0..n)
                    .map(|i| {
                        if i + 1 == n {
                            hi
                        } else {
                            lo + (hi - lo) * i as f64 / (n - 1) as f64
                        }
                    })
                    .collect(),
            }
        } else {
            s.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        Ok(ValueList {
            text: s.to_string(),
            values,
        })
    }
}

impl Points {
    /// (r, eps) pairs, r-major.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for &r in &self.r.values {
            match &self.eps {
                Some(eps) => out.extend(eps.values.iter().map(|&e| (r, e))),
                None => out.extend(self.eps_frac.values.iter().map(|&f| (r, 2.0 * r * f))),
            }
        }
        out
    }
}
