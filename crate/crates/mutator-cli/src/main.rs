mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mutator::calculators::{
    family_first, family_first_excess, family_second, kronecker_dual_dims, pn_quotient_dims, pn_singular_rhos, rho_prime,
    KroneckerData, P2Family,
};
use mutator::census::{kronecker_census, mutation_census, orbit_census, transfer_check};
use mutator::exactla::{fmt_ratio, parse_ratio, Field};
use mutator::mutation::{mutate_rs_point_with_choices, mutate_rs_spec, transport_polarization, window_predicates};
use mutator::rs_spec::{field_to_json, mat_to_json, parse_point, parse_spec, serialize_point, serialize_spec, validate, DimVector, RsSpec};
use mutator::stability::{g_semistable, gred_semistable, Mode, Polarization};
use mutator::Error;
use num_rational::BigRational;
use serde_json::{json, Value};

use config::{parse_field, parse_format, Config, Format};

#[derive(Parser)]
#[command(name = "mutator", version, about = "Morphism spaces of type (r,s): validation, mutation, stability and orbit censuses")]
struct Cli {
    /// JSON config file; defaults to $MUTATOR_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Field override: Q or GF:p.
    #[arg(long, global = true)]
    field: Option<String>,
    /// Seed for sampled checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// json or table.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long = "budget-points", global = true)]
    budget_points: Option<u64>,
    #[arg(long = "budget-group", global = true)]
    budget_group: Option<u64>,
    #[arg(long = "budget-subspaces", global = true)]
    budget_subspaces: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the composition axioms of a spec.
    Validate { spec: PathBuf },
    /// Mutate a spec and a point at index p.
    Mutate {
        #[arg(long)]
        p: usize,
        spec: PathBuf,
        point: PathBuf,
        /// Polarization "λ1,..,λr;μ1,..,μs" to transport.
        #[arg(long)]
        pol: Option<String>,
    },
    /// Decide (semi)stability of a point.
    Stability {
        spec: PathBuf,
        point: PathBuf,
        #[arg(long)]
        pol: String,
        #[arg(long, value_enum, default_value_t = StabMode::Auto)]
        mode: StabMode,
        /// Number of random subspace tuples in sampled mode.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Check only the reductive part of the group.
        #[arg(long)]
        reductive: bool,
    },
    /// Exhaustive orbit experiments over a prime field.
    Census {
        spec: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = CensusMode::Orbits)]
        mode: CensusMode,
        /// Multiplicities "m1,..,mr;n1,..,ns".
        #[arg(long)]
        dims: Option<String>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        pol: Option<String>,
        /// Kronecker mode: dim L, dim M, dim N.
        #[arg(long)]
        q: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Closed-form numbers.
    Examples {
        #[command(subcommand)]
        which: Example,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StabMode {
    Auto,
    Exhaustive,
    Sampled,
}

#[derive(Clone, Copy, ValueEnum)]
enum CensusMode {
    Orbits,
    Mutation,
    Transfer,
    Kronecker,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyId {
    First,
    Second,
}

#[derive(Subcommand)]
enum Example {
    /// Weight ratio after mutating maps into O⊗C^n on the plane.
    RhoPrime {
        #[arg(long)]
        m1: u64,
        #[arg(long)]
        m2: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        rho: String,
    },
    /// Singular weight ratios and quotient dimensions on projective n-space.
    SingularRhos {
        #[arg(long)]
        n: i64,
    },
    /// One member of an extremal family on the plane.
    Family {
        #[arg(long, value_enum)]
        id: FamilyId,
        #[arg(long)]
        m: u64,
        #[arg(long, default_value = "1/1000")]
        eps: String,
    },
    /// Dimensions of the dual Kronecker problem.
    KroneckerDual {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
    },
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError { code: 2, kind: "usage", message: msg.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> CliError {
        let (code, kind) = match &e {
            Error::Budget(_) => (3, "budget"),
            Error::Parse { .. } => (2, "parse"),
            Error::Shape(_) => (2, "shape"),
            Error::Field(_) => (2, "field"),
            Error::Invalid(_) => (2, "invalid"),
            Error::Precondition(_) => (2, "precondition"),
            Error::Descent(_) => (2, "descent"),
            Error::NoSolution => (2, "no_solution"),
        };
        CliError { code, kind, message: e.to_string() }
    }
}

/// Output document and exit code.
struct Outcome {
    doc: Value,
    code: u8,
}

fn run(cli: Cli) -> Result<(Outcome, Format), CliError> {
    let path = cli.config.clone().or_else(|| std::env::var_os("MUTATOR_CONFIG").map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => Config::load(&p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = &cli.format {
        cfg.format = parse_format(f)?;
    }
    for (flag, dst) in [(cli.budget_points, &mut cfg.max_points), (cli.budget_group, &mut cfg.max_group), (cli.budget_subspaces, &mut cfg.max_subspaces)] {
        if let Some(b) = flag {
            if b == 0 {
                return Err(CliError::usage("budgets must be positive"));
            }
            *dst = b;
        }
    }
    let field = cli.field.as_deref().map(parse_field).transpose()?;
    let format = cfg.format;
    Ok((dispatch(cli.cmd, &cfg, field)?, format))
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError { code: 2, kind: "parse", message: format!("{}: {e}", path.display()) })
}

fn load_spec(path: &Path, field: Option<Field>, default: Field) -> Result<RsSpec, CliError> {
    let mut v = read_json(path)?;
    if let Some(obj) = v.as_object_mut() {
        match field {
            Some(f) => {
                obj.insert("field".into(), field_to_json(f));
            }
            None => {
                obj.entry("field").or_insert_with(|| field_to_json(default));
            }
        }
    }
    Ok(parse_spec(&v)?)
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T, CliError>) -> Result<Vec<T>, CliError> {
    s.split(',').filter(|x| !x.trim().is_empty()).map(|x| f(x.trim())).collect()
}

fn parse_rat(s: &str) -> Result<BigRational, CliError> {
    Ok(parse_ratio(s)?)
}

fn split_pair(s: &str, what: &str) -> Result<(String, String), CliError> {
    s.split_once(';').map(|(a, b)| (a.to_string(), b.to_string())).ok_or_else(|| CliError::usage(format!("{what} must look like \"a,b;c\"")))
}

fn parse_dims(s: &str) -> Result<DimVector, CliError> {
    let (a, b) = split_pair(s, "--dims")?;
    let num = |x: &str| x.parse::<usize>().map_err(|_| CliError::usage(format!("bad multiplicity {x:?}")));
    Ok(DimVector::new(parse_list(&a, num)?, parse_list(&b, num)?))
}

fn parse_pol(s: &str, dims: &DimVector) -> Result<Polarization, CliError> {
    let (a, b) = split_pair(s, "--pol")?;
    Ok(Polarization::new(parse_list(&a, parse_rat)?, parse_list(&b, parse_rat)?, dims)?)
}

fn dispatch(cmd: Cmd, cfg: &Config, field: Option<Field>) -> Result<Outcome, CliError> {
    match cmd {
        Cmd::Validate { spec } => {
            let spec = load_spec(&spec, field, cfg.default_field)?;
            let rep = validate(&spec);
            Ok(Outcome { doc: rep.to_json(), code: if rep.ok() { 0 } else { 2 } })
        }
        Cmd::Mutate { p, spec, point, pol } => {
            let spec = load_spec(&spec, field, cfg.default_field)?;
            let (w, dims) = parse_point(&spec, &read_json(&point)?)?;
            let ms = mutate_rs_spec(&spec, &dims, p)?;
            let z = mutate_rs_point_with_choices(&spec, &dims, &ms, &w)?;
            let transported = match pol {
                Some(s) => {
                    let pol = parse_pol(&s, &dims)?;
                    let t = transport_polarization(&pol, &spec, &dims, p)?;
                    let win = window_predicates(&pol, &dims, p);
                    json!({
                        "polarization": t.polarization().to_json(),
                        "normalizer": fmt_ratio(&t.c),
                        "windows": {
                            "instability_forward": win.instability_forward,
                            "instability_back": win.instability_back,
                            "semistable_in_open_set": win.semistable_in_open_set,
                            "mutated_semistable_in_open_set": win.mutated_semistable_in_open_set,
                            "quotients_agree": win.quotients_agree,
                        },
                    })
                }
                None => Value::Null,
            };
            let doc = json!({
                "p": p,
                "mutated_spec": serialize_spec(&ms.spec),
                "mutated_point": serialize_point(&ms.spec, &ms.dims, &z.point),
                "u": z.u.iter().skip(1).map(mat_to_json).collect::<Vec<_>>(),
                "alpha": mat_to_json(&z.alpha),
                "transported_polarization": transported,
            });
            Ok(Outcome { doc, code: 0 })
        }
        Cmd::Stability { spec, point, pol, mode, samples, reductive } => {
            let spec = load_spec(&spec, field, cfg.default_field)?;
            let (w, dims) = parse_point(&spec, &read_json(&point)?)?;
            let pol = parse_pol(&pol, &dims)?;
            let sampled = match mode {
                StabMode::Auto => !spec.field.is_finite(),
                StabMode::Exhaustive => false,
                StabMode::Sampled => true,
            };
            let m = if sampled { Mode::Sampled { samples, seed: cfg.seed } } else { Mode::Exhaustive { budget: cfg.enumeration_budget() } };
            let v = if reductive { gred_semistable(&spec, &dims, &w, &pol, &m)? } else { g_semistable(&spec, &dims, &w, &pol, &m)? };
            let mut doc = v.to_json();
            doc["group"] = json!(if reductive { "reductive" } else { "full" });
            if sampled {
                doc["seed"] = json!(cfg.seed);
                doc["samples"] = json!(samples);
            }
            Ok(Outcome { doc, code: if v.semistable { 0 } else { 1 } })
        }
        Cmd::Census { spec, mode, dims, p, pol, q, m, n } => {
            if let CensusMode::Kronecker = mode {
                let need = |x: Option<usize>, k: &str| x.ok_or_else(|| CliError::usage(format!("kronecker census needs --{k}")));
                let f = field.unwrap_or(cfg.default_field);
                let kc = kronecker_census(f, need(q, "q")?, need(m, "m")?, need(n, "n")?, cfg.max_points)?;
                return Ok(Outcome { code: if kc.ok() { 0 } else { 1 }, doc: kc.to_json() });
            }
            let spec_path = spec.ok_or_else(|| CliError::usage("census needs a spec file"))?;
            let spec = load_spec(&spec_path, field, cfg.default_field)?;
            let dims = parse_dims(&dims.ok_or_else(|| CliError::usage("census needs --dims"))?)?;
            dims.check(&spec)?;
            let need_p = || p.ok_or_else(|| CliError::usage("this census mode needs --p"));
            let (doc, ok) = match mode {
                CensusMode::Orbits => {
                    let r = orbit_census(&spec, &dims, p, cfg.max_points)?;
                    (r.to_json(), r.ok())
                }
                CensusMode::Mutation => {
                    let r = mutation_census(&spec, &dims, need_p()?, cfg.max_points)?;
                    (r.to_json(), r.ok())
                }
                CensusMode::Transfer => {
                    let pol = parse_pol(&pol.ok_or_else(|| CliError::usage("transfer census needs --pol"))?, &dims)?;
                    let mode = Mode::Exhaustive { budget: cfg.enumeration_budget() };
                    let r = transfer_check(&spec, &dims, need_p()?, &pol, cfg.max_points, &mode)?;
                    (r.to_json(), r.ok())
                }
                CensusMode::Kronecker => unreachable!(),
            };
            Ok(Outcome { doc, code: if ok { 0 } else { 1 } })
        }
        Cmd::Examples { which } => examples(which),
    }
}

fn examples(which: Example) -> Result<Outcome, CliError> {
    let doc = match which {
        Example::RhoPrime { m1, m2, n, rho } => {
            let fam = P2Family::new(m1, m2, n, parse_rat(&rho)?)?;
            let rp = rho_prime(&fam)?;
            json!({"m1": m1, "m2": m2, "n": n, "rho": fmt_ratio(&fam.rho), "rho_prime": fmt_ratio(&rp), "mutated_source": fam.mutated_source()})
        }
        Example::SingularRhos { n } => {
            let rhos = pn_singular_rhos(n)?;
            let d = pn_quotient_dims(n)?;
            json!({
                "n": n,
                "singular_rhos": rhos.iter().map(fmt_ratio).collect::<Vec<_>>(),
                "quotient_count": d.count,
                "singular_quotients": d.singular,
                "generic_dim": fmt_ratio(&d.generic_dim),
                "special_dim": fmt_ratio(&d.special_dim),
                "mutated_source": n * (n + 3) / 2,
            })
        }
        Example::Family { id, m, eps } => {
            let e = parse_rat(&eps)?;
            let fam = match id {
                FamilyId::First => family_first(m, &e)?,
                FamilyId::Second => family_second(m, &e)?,
            };
            let rp = rho_prime(&fam)?;
            let mut doc = json!({
                "m1": fam.m1, "m2": fam.m2, "n": fam.n,
                "rho": fmt_ratio(&fam.rho),
                "rho_prime": fmt_ratio(&rp),
                "rho_prime_above_3": rp > BigRational::from_integer(3.into()),
                "mutated_source": fam.mutated_source(),
            });
            if let FamilyId::First = id {
                doc["closed_form_excess"] = json!(fmt_ratio(&family_first_excess(m, &e)));
            }
            doc
        }
        Example::KroneckerDual { q, m, n } => {
            let d = kronecker_dual_dims(KroneckerData::new(q, m, n)?)?;
            json!({"q": d.q, "m": d.m, "n": d.n})
        }
    };
    Ok(Outcome { doc, code: 0 })
}

fn table(v: &Value, prefix: &str, out: &mut String) {
    match v {
        Value::Object(o) => {
            for (k, x) in o {
                let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                table(x, &p, out);
            }
        }
        _ => {
            out.push_str(prefix);
            out.push('\t');
            out.push_str(&v.to_string());
            out.push('\n');
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((out, format)) => {
            let mut text = String::new();
            match format {
                Format::Table => table(&out.doc, "", &mut text),
                Format::Json => {
                    text = serde_json::to_string_pretty(&out.doc).expect("serializable");
                    text.push('\n');
                }
            }
            // A closed pipe downstream is not an error of ours.
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind, "message": e.message}));
            ExitCode::from(e.code)
        }
    }
}
