use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use orbigw::amodel::{f_gn_a_with, AModel, Windows};
use orbigw::bmodel::{critical_points, f_gn_b_with, BModel, ExtrasSource};
use orbigw::eo::SpectralCurve;
use orbigw::mirrormap::mirror_map_series;
use orbigw::psi::psi_intersection;
use orbigw::{build_orbifold, Error, OrbifoldData, OrbifoldInput, Precision};

mod checks;
mod out;

use out::{to_json, Cx, Envelope, Re, SeriesJson};

#[derive(Parser, Debug)]
#[command(name = "orbigw", version, about = "Open-closed orbifold Gromov-Witten potentials by A- and B-model graph sums")]
struct Cli {
    #[command(flatten)]
    orb: OrbArgs,
    #[arg(long, global = true, value_enum, default_value = "json")]
    output: Format,
    #[arg(long, global = true, value_enum, default_value = "double")]
    precision: Prec,
    /// Worker threads (overrides ORBIGW_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write to a file instead of stdout.
    #[arg(long = "out", global = true)]
    out_path: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
struct OrbArgs {
    #[arg(long, global = true, default_value_t = 1)]
    r: i64,
    #[arg(long, global = true, default_value_t = 1)]
    m: i64,
    #[arg(long, global = true, default_value_t = 0)]
    s: i64,
    #[arg(long, global = true, default_value_t = 1)]
    f: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Prec {
    Double,
    Extended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Side {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Extras {
    Curve,
    Laplace,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EoCheck {
    Pants,
    Doss,
    CKernel,
    Theta,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Group data, weights, age-1 elements and critical points.
    Describe,
    /// Exact <tau_k1 ... tau_kn>_g.
    Psi {
        #[arg(long)]
        g: u32,
        /// Comma-separated descendant exponents.
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<u32>,
    },
    /// F_{g,n} (side a) or F-check_{g,n} (side b) as a coefficient table in the 1' basis.
    Fgn {
        #[arg(long, value_enum)]
        side: Side,
        #[arg(long)]
        g: u32,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        max_winding: usize,
        #[arg(long, default_value_t = 0)]
        tau_degree: u32,
        /// Height window of the graph sum; defaults to the largest height that can occur.
        #[arg(long)]
        heights: Option<usize>,
        /// Source of the unstable B-side pieces.
        #[arg(long, value_enum, default_value = "curve")]
        extras: Extras,
    },
    /// F-check_{g,n}(0; X) straight from the spectral curve, or a check of the recursion.
    Eo {
        #[arg(long, default_value_t = 0)]
        g: u32,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        max_winding: usize,
        #[command(subcommand)]
        action: Option<EoAction>,
    },
    /// Run verification checks over the built-in catalog.
    Check {
        #[arg(value_enum, default_value = "all")]
        which: checks::Which,
    },
    /// tau_a(q) and q_a(tau) through total degree Q.
    Mirrormap {
        #[arg(long, default_value_t = 4)]
        degree: u32,
    },
}

#[derive(Subcommand, Debug)]
enum EoAction {
    Check {
        #[arg(value_enum)]
        which: EoCheck,
    },
}

enum Failure {
    Error(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn provenance(cli: &Cli, extra: serde_json::Value) -> serde_json::Value {
    let mut p = json!({
        "tool": "orbigw",
        "version": env!("CARGO_PKG_VERSION"),
        "command": format!("{:?}", cli.cmd),
        "orbifold": cli.orb,
        "precision": cli.precision,
    });
    if let (Some(o), serde_json::Value::Object(e)) = (p.as_object_mut(), extra) {
        for (k, v) in e {
            o.insert(k, v);
        }
    }
    p
}

fn precision(p: Prec) -> Precision {
    match p {
        Prec::Double => Precision::Double,
        Prec::Extended => Precision::Extended,
    }
}

fn orbifold(cli: &Cli) -> Result<OrbifoldData, Error> {
    let o = cli.orb;
    build_orbifold(OrbifoldInput::new(o.r, o.m, o.s, o.f))
}

#[derive(Serialize)]
struct CriticalJson {
    alpha: usize,
    x: Cx,
    y: Cx,
}

#[derive(Serialize)]
struct Describe {
    orbifold: orbigw::orbifold::OrbifoldJson,
    order: usize,
    genus: usize,
    p: usize,
    critical_points: Vec<CriticalJson>,
}

#[derive(Serialize)]
struct PsiJson {
    g: u32,
    ks: Vec<u32>,
    exact: String,
    value: Re,
}

#[derive(Serialize)]
struct MapTerm {
    exponent: Vec<u32>,
    exact: Option<String>,
    value: Re,
}

#[derive(Serialize)]
struct MapJson {
    degree: u32,
    p: usize,
    tau: Vec<Vec<MapTerm>>,
    inverse: Vec<Vec<MapTerm>>,
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let table = cli.output == Format::Table;
    let prec = precision(cli.precision);
    match &cli.cmd {
        Cmd::Describe => {
            let d = orbifold(cli)?;
            let cps = critical_points(&d)
                .into_iter()
                .map(|c| CriticalJson { alpha: c.alpha, x: Cx(c.x_c()), y: Cx(c.y_c()) })
                .collect();
            let r = Describe { orbifold: d.to_json(), order: d.order, genus: d.genus, p: d.p, critical_points: cps };
            if table {
                return Ok(format!(
                    "(r,m,s,f) = ({},{},{},{})  |G| = {}  genus = {}  p = {}  punctures = {}\n",
                    d.input.r, d.input.m, d.input.s, d.input.f, d.order, d.genus, d.p, d.punctures
                ));
            }
            Ok(to_json(&Envelope { result: r, provenance: provenance(cli, json!({})) }))
        }
        Cmd::Psi { g, ks } => {
            let v = psi_intersection(*g, ks)?;
            let f = num_traits::ToPrimitive::to_f64(&v).unwrap_or(f64::NAN);
            if table {
                return Ok(format!("<{ks:?}>_{g} = {v}\n"));
            }
            let r = PsiJson { g: *g, ks: ks.clone(), exact: v.to_string(), value: Re(f) };
            Ok(to_json(&Envelope { result: r, provenance: provenance(cli, json!({})) }))
        }
        Cmd::Fgn { side, g, n, max_winding, tau_degree, heights, extras } => {
            let d = orbifold(cli)?;
            let mut win = Windows::new(*tau_degree, *max_winding);
            win.precision = prec;
            let h = heights.unwrap_or_else(|| win.height_bound(*g, *n));
            let s = match side {
                Side::A => f_gn_a_with(&AModel::new(&d, h, *max_winding, prec)?, *g, *n, *tau_degree)?,
                Side::B => {
                    let src = match extras {
                        Extras::Curve => ExtrasSource::Curve,
                        Extras::Laplace => ExtrasSource::Laplace,
                    };
                    f_gn_b_with(&BModel::new(&d, h, *max_winding, prec)?, *g, *n, *tau_degree, src)?
                }
            };
            let sj = SeriesJson::new(&s);
            if table {
                return Ok(sj.table());
            }
            let extra = json!({"windows": {"tau_degree": tau_degree, "winding": max_winding, "heights": h}, "side": side});
            Ok(to_json(&Envelope { result: sj, provenance: provenance(cli, extra) }))
        }
        Cmd::Eo { g, n, max_winding, action } => {
            let d = orbifold(cli)?;
            if let Some(EoAction::Check { which }) = action {
                let name = match which {
                    EoCheck::Pants => "pants",
                    EoCheck::Doss => "doss",
                    EoCheck::CKernel => "c-kernel",
                    EoCheck::Theta => "theta",
                };
                let rows = checks::eo_rows(&d, Some(name))?;
                return render_checks(cli, rows);
            }
            let c = SpectralCurve::new(&d)?;
            let (s, ord) = match (*g, *n) {
                (0, 1) => (c.disk_zero(*max_winding)?, c.order),
                (0, 2) => (c.annulus_zero(*max_winding)?, c.order),
                (g, n) if 2 * g as i64 - 2 + n as i64 > 0 => {
                    let (w, ord) = c.omega_stable(g, n)?;
                    (c.expand_potential(&w, g, n, *max_winding).to_prime(), ord)
                }
                _ => return Err(Error::Validation(format!("({g},{n}) has no potential")).into()),
            };
            let sj = SeriesJson::new(&s);
            if table {
                return Ok(sj.table());
            }
            let extra = json!({"windows": {"winding": max_winding, "series_order": ord}});
            Ok(to_json(&Envelope { result: sj, provenance: provenance(cli, extra) }))
        }
        Cmd::Check { which } => {
            let rows = checks::run(*which, prec)?;
            render_checks(cli, rows)
        }
        Cmd::Mirrormap { degree } => {
            let d = orbifold(cli)?;
            let mm = mirror_map_series(&d, *degree)?;
            let tau = (0..mm.p)
                .map(|a| {
                    mm.tau[a]
                        .iter()
                        .map(|(e, v)| MapTerm { exponent: e.clone(), exact: mm.exact[a].get(e).map(|x| x.to_string()), value: Re(*v) })
                        .collect()
                })
                .collect();
            let inverse = (0..mm.p)
                .map(|a| mm.inverse[a].iter().map(|(e, v)| MapTerm { exponent: e.clone(), exact: None, value: Re(*v) }).collect())
                .collect();
            let r = MapJson { degree: *degree, p: mm.p, tau, inverse };
            if table {
                let mut s = String::new();
                for (a, terms) in r.tau.iter().enumerate() {
                    for t in terms {
                        s.push_str(&format!("tau_{} q^{:?}  {}\n", a + 1, t.exponent, t.exact.as_deref().unwrap_or("")));
                    }
                }
                return Ok(s);
            }
            Ok(to_json(&Envelope { result: r, provenance: provenance(cli, json!({})) }))
        }
    }
}

fn render_checks(cli: &Cli, rows: Vec<checks::Row>) -> Result<String, Failure> {
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.check).collect();
    let text = if cli.output == Format::Table {
        let mut s = format!("{:<44} {:>24} {:>24}  {}\n", "check", "deviation", "tolerance", "result");
        for r in &rows {
            s.push_str(&format!(
                "{:<44} {:>24.16e} {:>24.16e}  {}  {}\n",
                r.check,
                r.deviation.0,
                r.tolerance.0,
                if r.pass { "PASS" } else { "FAIL" },
                r.note
            ));
        }
        s
    } else {
        to_json(&Envelope { result: &rows, provenance: provenance(cli, json!({})) })
    };
    if failed.is_empty() {
        Ok(text)
    } else {
        Err(Failure::Check(format!("{text}failed: {}\n", failed.join(", "))))
    }
}

fn emit(cli: &Cli, text: &str, to_stderr: bool) -> std::io::Result<()> {
    if let Some(p) = &cli.out_path {
        return std::fs::write(p, text);
    }
    if to_stderr {
        std::io::stderr().write_all(text.as_bytes())
    } else {
        std::io::stdout().write_all(text.as_bytes())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| std::env::var("ORBIGW_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(text) => {
            if emit(&cli, &text, false).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Check(text)) => {
            let _ = emit(&cli, &text, false);
            ExitCode::from(4)
        }
        Err(Failure::Error(e)) => {
            eprintln!("orbigw: {e}");
            ExitCode::from(match e {
                Error::Validation(_) | Error::Unsupported(_) => 2,
                Error::Window(_) => 3,
                Error::Numeric(_) => 1,
            })
        }
    }
}
