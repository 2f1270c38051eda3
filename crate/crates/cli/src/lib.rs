//! Argument handling and report assembly for the `volforms` binary.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use volforms::curvature::{curvature_at, KahlerPotential};
use volforms::domains::{parse_domain, parse_point, DomainKind, DomainModel};
use volforms::forms::{ComplexPoint, QuadratureConfig};
use volforms::harness::{check_chain_full, check_metric_chain, run_suite, CheckRecord, Side, Suite, SuiteConfig};
use volforms::metrics::{
    ball_metric_matrix, bergman_metric, caratheodory_metric_lower, ke_metric, kobayashi_metric_upper,
};
use volforms::optimize::MapSearchConfig;
use volforms::quotient::{
    build_polygon, canonical_volume_curve, caratheodory_measure, check_corollary, check_corollary_with,
    quotient_quadrature,
};
use volforms::report::{Cell, Report, Table};
use volforms::squeezing::{metric_comparison_constants, squeezing_constants, volume_comparison_constant};
use volforms::volumes::{
    bergman_density_closed, bergman_density_numeric, caratheodory_lower, default_bergman_degree, ke_density,
    kobayashi_upper, BoundKind, KeNormalization, VolumeEstimate,
};
use volforms::{DensityConvention, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "volforms", version, about = "Invariant volume forms, metrics and inequality checks on model domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Multi-start count of the extremal searches.
    #[arg(long, global = true, default_value_t = 8)]
    pub starts: usize,
    /// Nelder–Mead iterations per start.
    #[arg(long, global = true, default_value_t = 2000)]
    pub local_steps: usize,
    /// Convergence tolerance of the extremal searches.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub search_tol: f64,
    /// Relative tolerance of the adaptive quadrature.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub quad_tol: f64,
    /// Maximum number of quadrature refinements.
    #[arg(long, global = true, default_value_t = 4)]
    pub quad_refinements: usize,
}

impl Common {
    fn search(&self) -> MapSearchConfig {
        MapSearchConfig {
            starts: self.starts,
            local_steps: self.local_steps,
            tolerance: self.search_tol,
            seed: self.seed,
            ..MapSearchConfig::default()
        }
    }

    fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            max_refinements: self.quad_refinements,
            seed: self.seed,
            ..QuadratureConfig::default().with_tolerance(self.quad_tol)
        }
    }
}

#[derive(Debug, Args)]
pub struct DomainArgs {
    /// Domain, e.g. `ball:r=2`, `polydisk:r=1,1`, `product(ball:r=1,polydisk:r=1)`.
    #[arg(long)]
    pub domain: String,
    /// Dimension of a ball written without `n=`.
    #[arg(long)]
    pub dim: Option<usize>,
}

impl DomainArgs {
    fn parse(&self) -> Result<DomainModel> {
        parse_domain(&self.domain, self.dim)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Curvature of the canonical potential of a ball or polydisk.
    Curvature {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value = "0")]
        point: String,
    },
    /// Uniform squeezing constants over an interior sample.
    Squeeze {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Relative depth of the sample points.
        #[arg(long, default_value_t = 0.9)]
        depth: f64,
    },
    /// Bergman density: closed form against the numeric construction.
    Bergman {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value = "0")]
        point: String,
        /// Polynomial degree of the numeric construction.
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Volume densities at a point.
    Volumes {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value = "0")]
        point: String,
    },
    /// Invariant metrics at a point along a tangent vector.
    Metrics {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value = "0")]
        point: String,
        /// Tangent vector; defaults to the first coordinate direction.
        #[arg(long)]
        vector: Option<String>,
    },
    /// Runs a check suite.
    Verify {
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1000)]
        grid_points: usize,
        #[arg(long, default_value_t = 24)]
        search_points: usize,
        #[arg(long, default_value_t = 20)]
        maps: usize,
        #[arg(long, default_value_t = 0.9)]
        depth: f64,
    },
    /// Carathéodory measure and canonical volume of a compact disc quotient.
    Quotient {
        #[arg(long, default_value_t = 2)]
        genus: u32,
    },
}

fn point_arg(s: &str, n: usize) -> Result<ComplexPoint> {
    let p = parse_point(s, n)?;
    if p.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.dim() });
    }
    Ok(p)
}

fn kind_name(k: BoundKind) -> &'static str {
    match k {
        BoundKind::Exact => "exact",
        BoundKind::Lower => "lower",
        BoundKind::Upper => "upper",
    }
}

fn estimate_row(name: &str, e: &VolumeEstimate) -> Vec<Cell> {
    vec![
        name.into(),
        e.density().into(),
        kind_name(e.bound_kind).into(),
        e.diagnostics.family.clone().into(),
    ]
}

/// Equality check against a closed-form golden with absolute tolerance `tol`.
fn golden(id: String, anchor: &str, value: f64, expect: f64, tol: f64) -> CheckRecord {
    let scale = value.abs().max(expect.abs()).max(f64::MIN_POSITIVE);
    CheckRecord::inequality(id, anchor, Side::exact(value), Side::exact(expect))
        .with_tolerance(tol / scale)
        .expect_equality()
}

/// Runs one command and assembles its report.
pub fn run(cli: &Cli) -> Result<Report> {
    let common = &cli.common;
    let seed = Some(common.seed);
    match &cli.command {
        Command::Curvature { domain, point } => {
            let model = domain.parse()?;
            let n = model.dim();
            let z = point_arg(point, n)?;
            let (phi, kind) = potential(&model)?;
            let rep = curvature_at(&phi, &z)?;
            let mut report = Report::new("curvature", Some(domain.domain.clone()), seed);
            let mut table = Table::new("curvature", &["quantity", "re", "im"]);
            for i in 0..n {
                for j in 0..n {
                    let g = rep.metric[(i, j)];
                    table.push(vec![format!("g[{i},{j}]").into(), g.re.into(), g.im.into()]);
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let r = rep.ricci[(i, j)];
                    table.push(vec![format!("ric[{i},{j}]").into(), r.re.into(), r.im.into()]);
                }
            }
            for (name, v) in [
                ("hsc", rep.hsc),
                ("scalar", rep.scalar),
                ("fd_step", rep.fd_step),
                ("outer_step", rep.outer_step),
                ("symmetry_defect", rep.symmetry_defect),
                ("error_estimate", rep.error_estimate),
            ] {
                table.push(vec![name.into(), v.into(), 0.0.into()]);
            }
            report.tables.push(table);
            // goldens: ball metric, HSC = -2, Ric = -(n+1) g on balls and -2 g on polydisks
            let (expected_metric, ricci_factor) = match kind {
                Potential::Ball { center, radius } => (ball_metric_matrix(radius, &z.sub(&center))?, -((n + 1) as f64)),
                Potential::Polydisk { radii } => {
                    let diag: Vec<f64> = radii
                        .iter()
                        .zip(z.coords())
                        .map(|(r, w)| r * r / (r * r - w.norm_sqr()).powi(2))
                        .collect();
                    let m = DMatrix::from_fn(n, n, |i, j| {
                        Complex64::new(if i == j { diag[i] } else { 0.0 }, 0.0)
                    });
                    (m, -2.0)
                }
            };
            for i in 0..n {
                for j in 0..n {
                    let expect = expected_metric[(i, j)].re;
                    let scale = expected_metric[(i, i)].re;
                    report.records.push(golden(
                        format!("curvature/metric/{i}{j}"),
                        "g_ij(0) = delta_ij / r^2",
                        rep.metric[(i, j)].re,
                        expect,
                        1e-6 * scale,
                    ));
                    report.records.push(golden(
                        format!("curvature/ricci/{i}{j}"),
                        "Ric = -(n+1) g",
                        rep.ricci[(i, j)].re,
                        ricci_factor * expect,
                        1e-5,
                    ));
                }
            }
            report.records.push(golden("curvature/hsc".into(), "HSC = -2", rep.hsc, -2.0, 1e-5));
            report.records.push(golden(
                "curvature/scalar".into(),
                "S = -n(n+1)",
                rep.scalar,
                ricci_factor * n as f64,
                1e-5,
            ));
            Ok(report)
        }
        Command::Squeeze { domain, samples, depth } => {
            let model = domain.parse()?;
            let n = model.dim();
            let sample = model.interior_samples(*samples, *depth, common.seed);
            let c = squeezing_constants(&model, &sample)?;
            let m = metric_comparison_constants(&c, n);
            let mut report = Report::new("squeeze", Some(domain.domain.clone()), seed);
            let mut table = Table::new("squeezing", &["quantity", "value"]);
            for (name, v) in [
                ("a", c.a),
                ("b", c.b),
                ("volume_constant", volume_comparison_constant(&c, n)),
                ("kobayashi_caratheodory", m.kobayashi_caratheodory),
                ("bergman_kobayashi", m.bergman_kobayashi),
                ("ke_lower", m.ke_lower),
                ("ke_upper", m.ke_upper),
            ] {
                table.push(vec![name.into(), v.into()]);
            }
            table.push(vec!["exact".into(), if c.is_exact() { "yes" } else { "no" }.into()]);
            report.tables.push(table);
            Ok(report)
        }
        Command::Bergman { domain, point, degree } => {
            let model = domain.parse()?;
            let n = model.dim();
            let p = point_arg(point, n)?;
            let degree = degree.unwrap_or_else(|| default_bergman_degree(n));
            let closed = bergman_density_closed(&model, &p)?;
            let numeric = bergman_density_numeric(&model, &p, degree, &common.quadrature())?;
            let mut report = Report::new("bergman", Some(domain.domain.clone()), seed);
            let mut table = Table::new("bergman", &["quantity", "value"]);
            table.push(vec!["closed".into(), closed.density().into()]);
            table.push(vec!["numeric".into(), numeric.density().into()]);
            table.push(vec!["degree".into(), (degree as f64).into()]);
            table.push(vec![
                "truncation_estimate".into(),
                numeric.diagnostics.error_estimate.unwrap_or(f64::NAN).into(),
            ]);
            report.tables.push(table);
            report.records.push(
                CheckRecord::inequality(
                    "bergman/numeric_below_closed",
                    "truncated kernel sums increase to K(p, p)",
                    Side::from(&numeric),
                    Side::from(&closed),
                )
                .with_meta(format!("degree={degree}")),
            );
            Ok(report)
        }
        Command::Volumes { domain, point } => {
            let model = domain.parse()?;
            let n = model.dim();
            let p = point_arg(point, n)?;
            let cfg = common.search();
            let mut report = Report::new("volumes", Some(domain.domain.clone()), seed);
            let mut table = Table::new("volumes", &["quantity", "value", "bound", "family"]);
            table.push(estimate_row("caratheodory", &caratheodory_lower(&model, &p, &cfg)?));
            table.push(estimate_row("kobayashi", &kobayashi_upper(&model, &p, &cfg)?));
            table.push(estimate_row("bergman", &bergman_density_closed(&model, &p)?));
            if model.as_ball_image().is_some() {
                table.push(estimate_row("kahler_einstein", &ke_density(&model, &p, KeNormalization::Identity)?));
            }
            report.tables.push(table);
            report.records = check_chain_full(&model, &[p], &cfg)?;
            Ok(report)
        }
        Command::Metrics { domain, point, vector } => {
            let model = domain.parse()?;
            let n = model.dim();
            let p = point_arg(point, n)?;
            let v = match vector {
                Some(s) => point_arg(s, n)?,
                None => {
                    let mut e = vec![0.0; n];
                    e[0] = 1.0;
                    ComplexPoint::real(&e)
                }
            };
            let cfg = common.search();
            let mut report = Report::new("metrics", Some(domain.domain.clone()), seed);
            let mut table = Table::new("metrics", &["quantity", "value", "bound"]);
            let rows = [
                ("caratheodory", caratheodory_metric_lower(&model, &p, &v, &cfg)?),
                ("kobayashi", kobayashi_metric_upper(&model, &p, &v, &cfg)?),
                ("bergman", bergman_metric(&model, &p, &v)?),
            ];
            for (name, m) in &rows {
                table.push(vec![(*name).into(), m.value.into(), kind_name(m.bound_kind).into()]);
            }
            if model.as_ball_image().is_some() {
                let m = ke_metric(&model, &p, &v)?;
                table.push(vec!["kahler_einstein".into(), m.value.into(), kind_name(m.bound_kind).into()]);
            }
            report.tables.push(table);
            report.records = check_metric_chain(&model, &[(p, v)], &cfg)?;
            Ok(report)
        }
        Command::Verify {
            domain,
            suite,
            grid_points,
            search_points,
            maps,
            depth,
        } => {
            let model = domain.parse()?;
            let suite: Suite = suite.parse()?;
            let cfg = SuiteConfig {
                grid_points: *grid_points,
                search_points: *search_points,
                maps: *maps,
                depth: *depth,
                seed: common.seed,
                search: common.search(),
            };
            if !(cfg.depth > 0.0 && cfg.depth < 1.0) || cfg.search_points == 0 || cfg.grid_points == 0 {
                return Err(Error::InvalidConfig("depth must lie in (0, 1) and point counts must be positive".into()));
            }
            let mut report = Report::new("verify", Some(domain.domain.clone()), seed);
            report.records = run_suite(&model, suite, &cfg)?;
            Ok(report)
        }
        Command::Quotient { genus } => {
            let poly = build_polygon(*genus)?;
            let quad = quotient_quadrature();
            let measure = caratheodory_measure(&poly, &quad)?;
            let mut report = Report::new("quotient", None, seed);
            let mut table = Table::new("quotient", &["quantity", "value"]);
            let worst_angle = poly
                .measured_angles()
                .iter()
                .map(|a| (a - poly.interior_angle()).abs())
                .fold(0.0, f64::max);
            for (name, v) in [
                ("genus", *genus as f64),
                ("sides", poly.sides() as f64),
                ("vertex_radius", poly.vertex_radius),
                ("caratheodory_measure", measure.value),
                ("quadrature_error", measure.error),
                ("hyperbolic_area", 4.0 * measure.value),
                ("angle_defect", worst_angle),
                ("canonical_volume", canonical_volume_curve(*genus)?),
            ] {
                table.push(vec![name.into(), v.into()]);
            }
            report.tables.push(table);
            report.records.push(check_corollary(&poly, &quad)?);
            report.records.push(check_corollary_with(&poly, &quad, DensityConvention::WedgeScaled)?);
            Ok(report)
        }
    }
}

enum Potential {
    Ball { center: ComplexPoint, radius: f64 },
    Polydisk { radii: Vec<f64> },
}

fn potential(model: &DomainModel) -> Result<(KahlerPotential, Potential)> {
    let n = model.dim();
    match model.kind() {
        DomainKind::Ball { center, radius } => {
            let (c, r) = (center.clone(), *radius);
            let shift = c.clone();
            let phi = KahlerPotential::from_fn(n, r, move |z| -(r * r - z.sub(&shift).norm_sqr()).ln())?;
            Ok((phi, Potential::Ball { center: c, radius: r }))
        }
        DomainKind::Polydisk { radii } => {
            let rs = radii.clone();
            let min = rs.iter().copied().fold(f64::INFINITY, f64::min);
            let phi = KahlerPotential::from_fn(n, min, move |z| {
                rs.iter()
                    .zip(z.coords())
                    .map(|(r, w)| -(r * r - w.norm_sqr()).ln())
                    .sum()
            })?;
            Ok((phi, Potential::Polydisk { radii: radii.clone() }))
        }
        _ => Err(Error::UnsupportedDomain("curvature needs a ball or a polydisk".into())),
    }
}

/// 0 when every decisive check passed, 1 otherwise.
pub fn exit_status(report: &Report) -> u8 {
    if report.all_pass() {
        0
    } else {
        1
    }
}

/// Serializes the report in the requested format.
pub fn render(report: &Report, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => render_csv(report).map_err(|e| Error::InvalidConfig(e.to_string())),
    }
}

fn render_csv(report: &Report) -> std::result::Result<Vec<u8>, Box<dyn std::error::Error>> {
    let mut out = Vec::new();
    for table in &report.tables {
        writeln!(out, "# {}", table.name)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        out.extend(w.into_inner()?);
        out.push(b'\n');
    }
    if !report.records.is_empty() {
        writeln!(out, "# records")?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "anchor", "lhs", "rhs", "margin", "pass", "kind"])?;
        for r in &report.records {
            let pass = match r.pass {
                Some(true) => "true",
                Some(false) => "false",
                None => "",
            };
            let kind = match r.kind {
                volforms::harness::CheckKind::Decisive => "decisive",
                volforms::harness::CheckKind::Informational => "informational",
            };
            w.write_record([
                r.id.clone(),
                r.anchor.clone(),
                format!("{:e}", r.lhs),
                format!("{:e}", r.rhs),
                format!("{:e}", r.margin),
                pass.to_string(),
                kind.to_string(),
            ])?;
        }
        out.extend(w.into_inner()?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_checks_exit_one() {
        let mut report = Report::new("verify", None, Some(7));
        report.records.push(CheckRecord::inequality("ok", "", Side::exact(1.0), Side::exact(2.0)));
        assert_eq!(exit_status(&report), 0);
        // informational records never fail a run
        report.records.push(CheckRecord::inequality("info", "", Side::upper(3.0), Side::exact(2.0)));
        assert_eq!(exit_status(&report), 0);
        report.records.push(CheckRecord::inequality("bad", "", Side::exact(3.0), Side::exact(2.0)));
        assert_eq!(exit_status(&report), 1);
    }

    #[test]
    fn cli_parses_global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["volforms", "quotient", "--genus", "3", "--format", "csv", "--seed", "11"]).unwrap();
        assert_eq!(cli.common.format, Format::Csv);
        assert_eq!(cli.common.seed, 11);
        assert!(Cli::try_parse_from(["volforms", "verify"]).is_err());
    }
}
