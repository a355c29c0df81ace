use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use chiral_core::brst::{cohomology, mirror_compare as mirror_compare_run, BrstError, CohomologyConfig, CohomologyReport, SectorRegion};
use chiral_core::lattice::{build_cy_n2, lattice_system};
use chiral_core::rational::{fmt_q, parse_q, q, Q};
use chiral_core::superconf::{
    build_n2, build_virasoro, character, render_character_tsv, verify_n2, verify_virasoro, CharacterTable,
    SystemKind,
};
use chiral_core::toric::{is_reflexive_pair, is_smooth_fan, lattice_points, ReflexiveData};

#[derive(Parser, Debug)]
#[command(name = "chiral", version, about = "Exact vertex algebra and toric BRST computations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[arg(long, default_value = "1", global = true, value_parser = parse_cutoff)]
    cutoff: Q,
    #[arg(long, default_value_t = 1, global = true)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
    Structured,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SystemName {
    Boson,
    Fermions,
    Bcbg,
    Msv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Central charge and Virasoro bracket law of a free-field system.
    VerifyVoa {
        #[arg(long, value_enum)]
        system: SystemName,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Flips the sign of the Virasoro element's first term (negative control).
        #[arg(long, hide = true)]
        inject_sign_error: bool,
    },
    /// N=2 relations and c_hat of bc-beta-gamma, MSV or a Calabi-Yau lattice structure.
    VerifyN2 {
        #[arg(long, value_enum, required_unless_present = "polytope")]
        system: Option<SystemName>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Uses the Calabi-Yau N=2 fields of this reflexive pair instead.
        #[arg(long)]
        polytope: Option<PathBuf>,
    },
    /// Reflexivity, fan and lattice point data of a polytope file.
    ToricCheck {
        #[arg(long)]
        polytope: PathBuf,
    },
    /// BRST cohomology of a reflexive pair.
    Cohomology {
        #[arg(long)]
        polytope: PathBuf,
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Supertrace table of a free-field vacuum module or of a cohomology run.
    Character {
        #[arg(long, value_enum, required_unless_present = "polytope")]
        system: Option<SystemName>,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        polytope: Option<PathBuf>,
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Compares a cohomology run with the run of the mirror pair under j -> -j.
    MirrorCompare {
        #[arg(long)]
        polytope: PathBuf,
        #[command(flatten)]
        region: RegionArgs,
    },
}

#[derive(clap::Args, Debug, Clone)]
struct RegionArgs {
    /// Shift `R` of the cone containing the `M` sectors.
    #[arg(long, default_value_t = 1)]
    slack: i64,
    /// Larger shift used to discard boundary classes.
    #[arg(long)]
    stable_slack: Option<i64>,
    /// Lower bound on `deg*.m` in the larger region.
    #[arg(long, allow_hyphen_values = true)]
    stable_floor: Option<i64>,
    /// Point `g` of `M`, comma separated, whose translate `g + K` joins the larger region.
    #[arg(long = "stable-generator", allow_hyphen_values = true, value_parser = parse_point)]
    stable_generators: Vec<Point>,
    /// Smallest `L_CY[0]` weight scanned.
    #[arg(long, default_value = "0", allow_hyphen_values = true, value_parser = parse_rational)]
    min_weight: Q,
    /// Largest twisted weight `w - j/2` scanned (the smallest is 0).
    #[arg(long, default_value = "0", value_parser = parse_rational)]
    twisted_max: Q,
    #[arg(long, default_value_t = -1, allow_hyphen_values = true)]
    k_min: i64,
    #[arg(long, default_value_t = 3)]
    k_max: i64,
    /// Second coefficient seed whose dimensions must agree.
    #[arg(long)]
    compare_seed: Option<u64>,
}

fn parse_rational(s: &str) -> Result<Q, String> {
    parse_q(s).ok_or_else(|| format!("`{s}` is not a rational number"))
}

#[derive(Clone, Debug)]
struct Point(Vec<i64>);

fn parse_point(s: &str) -> Result<Point, String> {
    s.split(',')
        .map(|x| x.trim().parse::<i64>().map_err(|_| format!("`{s}` is not a comma-separated integer point")))
        .collect::<Result<Vec<i64>, String>>()
        .map(Point)
}

fn parse_cutoff(s: &str) -> Result<Q, String> {
    let x = parse_rational(s)?;
    if x < Q::from_integer(0.into()) {
        return Err("cutoff must be non-negative".into());
    }
    Ok(x)
}

/// Outcome of a command: a report plus whether all verifications held.
struct Outcome {
    ok: bool,
    text: String,
    tsv: String,
    structured: Value,
}

enum Failure {
    Parse(String),
    Internal(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            let body = match cli.format {
                Format::Text => out.text,
                Format::Tsv => out.tsv,
                Format::Structured => serde_json::to_string_pretty(&out.structured).expect("json") + "\n",
            };
            print!("{body}");
            ExitCode::from(if out.ok { 0 } else { 1 })
        }
        Err(Failure::Parse(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn kind(system: SystemName, dim: usize) -> SystemKind {
    match system {
        SystemName::Boson => SystemKind::Boson,
        SystemName::Fermions => SystemKind::FermionPairs(dim),
        SystemName::Bcbg => SystemKind::BcBg(dim),
        SystemName::Msv => SystemKind::Msv(dim),
    }
}

fn load(path: &PathBuf) -> Result<ReflexiveData, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    ReflexiveData::from_json(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn header(cli: &Cli) -> String {
    format!("seed {} cutoff {}\n", cli.seed, fmt_q(&cli.cutoff))
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::VerifyVoa {
            system,
            dim,
            inject_sign_error,
        } => verify_voa(cli, kind(*system, *dim), *inject_sign_error),
        Command::VerifyN2 { system, dim, polytope } => match polytope {
            Some(p) => verify_cy_n2(cli, &load(p)?),
            None => verify_free_n2(cli, kind(system.expect("required by clap"), *dim)),
        },
        Command::ToricCheck { polytope } => toric_check(cli, &load(polytope)?),
        Command::Cohomology { polytope, region } => {
            let report = run_cohomology(cli, &load(polytope)?, region)?;
            Ok(cohomology_outcome(&report))
        }
        Command::Character {
            system,
            dim,
            polytope,
            region,
        } => match polytope {
            Some(p) => {
                let report = run_cohomology(cli, &load(p)?, region)?;
                Ok(character_outcome(cli, &report.character(), report.verified()))
            }
            None => {
                let sys = kind(system.expect("required by clap"), *dim).system();
                let table = character(&sys, None, &cli.cutoff, &cli.cutoff).map_err(|e| Failure::Internal(e.to_string()))?;
                Ok(character_outcome(cli, &table, true))
            }
        },
        Command::MirrorCompare { polytope, region } => mirror_compare(cli, &load(polytope)?, region),
    }
}

fn verify_voa(cli: &Cli, kind: SystemKind, inject: bool) -> Result<Outcome, Failure> {
    let sys = kind.system();
    let mut l = build_virasoro(&sys, kind).map_err(|e| Failure::Internal(e.to_string()))?;
    if inject {
        let (first, c) = l.terms().next().map(|(m, c)| (m.clone(), c.clone())).expect("nonzero Virasoro element");
        l.add_term(first, -(c * q(2)));
    }
    let (ok, c, detail) = match verify_virasoro(&sys, &l, &cli.cutoff) {
        Ok(c) => {
            let ok = c == kind.expected_c();
            (ok, Some(c), String::new())
        }
        Err(e) => (false, None, e.to_string()),
    };
    let c_text = c.as_ref().map_or("-".to_string(), fmt_q);
    let mut text = header(cli);
    text.push_str(&format!("system {}\nc = {c_text}\nexpected {}\n", sys.name, fmt_q(&kind.expected_c())));
    if !detail.is_empty() {
        text.push_str(&format!("failures: {detail}\n"));
    }
    text.push_str(if ok { "ok\n" } else { "FAILED\n" });
    Ok(Outcome {
        ok,
        tsv: format!("system\tc\texpected\tok\n{}\t{c_text}\t{}\t{ok}\n", sys.name, fmt_q(&kind.expected_c())),
        structured: json!({
            "command": "verify-voa", "seed": cli.seed, "cutoff": fmt_q(&cli.cutoff),
            "system": sys.name, "c": c.as_ref().map(fmt_q), "expected_c": fmt_q(&kind.expected_c()),
            "ok": ok, "failures": detail,
        }),
        text,
    })
}

fn n2_outcome(cli: &Cli, name: &str, expected: Q, result: Result<Q, String>) -> Outcome {
    let (ok, c_hat, detail) = match result {
        Ok(c) => (c == expected, Some(c), String::new()),
        Err(e) => (false, None, e),
    };
    let c_text = c_hat.as_ref().map_or("-".to_string(), fmt_q);
    let mut text = header(cli);
    text.push_str(&format!("system {name}\nc_hat = {c_text}\nexpected {}\n", fmt_q(&expected)));
    if !detail.is_empty() {
        text.push_str(&format!("failures: {detail}\n"));
    }
    text.push_str(if ok { "ok\n" } else { "FAILED\n" });
    Outcome {
        ok,
        tsv: format!("system\tc_hat\texpected\tok\n{name}\t{c_text}\t{}\t{ok}\n", fmt_q(&expected)),
        structured: json!({
            "command": "verify-n2", "seed": cli.seed, "cutoff": fmt_q(&cli.cutoff),
            "system": name, "c_hat": c_hat.as_ref().map(fmt_q), "expected_c_hat": fmt_q(&expected),
            "ok": ok, "failures": detail,
        }),
        text,
    }
}

fn verify_free_n2(cli: &Cli, kind: SystemKind) -> Result<Outcome, Failure> {
    let sys = kind.system();
    let fields = match build_n2(&sys, kind) {
        Ok(f) => f,
        Err(e) => return Err(Failure::Parse(format!("no N=2 structure on {}: {e}", sys.name))),
    };
    let expected = fields.c_hat.clone();
    let result = verify_n2(&sys, &fields, &cli.cutoff).map(|c| c.c_hat).map_err(|e| e.to_string());
    Ok(n2_outcome(cli, &sys.name, expected, result))
}

fn verify_cy_n2(cli: &Cli, data: &ReflexiveData) -> Result<Outcome, Failure> {
    let sys = lattice_system(data.rank());
    let fields = build_cy_n2(&sys);
    let expected = q(data.d() as i64);
    let result = verify_n2(&sys, &fields, &cli.cutoff).map(|c| c.c_hat).map_err(|e| e.to_string());
    Ok(n2_outcome(cli, &format!("cy(d={})", data.d()), expected, result))
}

fn toric_check(cli: &Cli, data: &ReflexiveData) -> Result<Outcome, Failure> {
    let reflexive = is_reflexive_pair(&data.delta1, &data.delta1_star);
    let smooth = is_smooth_fan(&data.fan1);
    let boundary: Vec<Vec<i64>> = lattice_points(&data.delta1_star, 1)
        .map_err(|e| Failure::Internal(e.to_string()))?
        .into_iter()
        .map(|mut p| {
            p.pop();
            p
        })
        .filter(|p| p.iter().any(|x| *x != 0))
        .collect();
    let rays_ok = data.fan1.rays().iter().all(|r| boundary.contains(r));
    let mirror_smooth = data.mirror_fan1.as_ref().map(is_smooth_fan);
    let ok = reflexive && rays_ok;
    let mut text = header(cli);
    text.push_str(&format!(
        "d {}\nreflexive {reflexive}\nfan rays on Delta1* {rays_ok}\nsmooth fan {smooth}\n",
        data.d()
    ));
    text.push_str(&format!(
        "points Delta {}\npoints Delta* {}\n",
        data.delta_points().len(),
        data.delta_star_points().len()
    ));
    text.push_str(&format!("Delta1* vertices {:?}\n", data.delta1_star));
    if let Some(s) = mirror_smooth {
        text.push_str(&format!("mirror fan smooth {s}\n"));
    }
    text.push_str(if ok { "ok\n" } else { "FAILED\n" });
    Ok(Outcome {
        ok,
        tsv: format!(
            "d\treflexive\trays_on_boundary\tsmooth\tpoints_delta\tpoints_delta_star\n{}\t{reflexive}\t{rays_ok}\t{smooth}\t{}\t{}\n",
            data.d(),
            data.delta_points().len(),
            data.delta_star_points().len()
        ),
        structured: json!({
            "command": "toric-check", "seed": cli.seed, "cutoff": fmt_q(&cli.cutoff),
            "d": data.d(), "reflexive": reflexive, "rays_on_boundary": rays_ok, "smooth": smooth,
            "mirror_smooth": mirror_smooth, "delta1_star": data.delta1_star,
            "points_delta": data.delta_points().len(), "points_delta_star": data.delta_star_points().len(),
            "ok": ok,
        }),
        text,
    })
}

fn config(cli: &Cli, region: &RegionArgs) -> CohomologyConfig {
    CohomologyConfig {
        cutoff: cli.cutoff.clone(),
        min_weight: region.min_weight.clone(),
        twisted: (Q::from_integer(0.into()), region.twisted_max.clone()),
        k_range: (region.k_min, region.k_max),
        seed: cli.seed,
        compare_seed: region.compare_seed,
        region: SectorRegion {
            m_slack: region.slack,
            ..SectorRegion::default()
        },
        stable_region: region.stable_slack.map(|r| SectorRegion {
            m_slack: r,
            s_floor: region.stable_floor,
            extra_generators: region.stable_generators.iter().map(|p| p.0.clone()).collect(),
            ..SectorRegion::default()
        }),
        ..CohomologyConfig::default()
    }
}

fn brst_failure(e: BrstError) -> Failure {
    match e {
        BrstError::RegionsNotNested(_) | BrstError::MissingMirrorFan => Failure::Parse(e.to_string()),
        _ => Failure::Internal(e.to_string()),
    }
}

fn check_region(region: &RegionArgs) -> Result<(), Failure> {
    if region.slack < 0 || region.stable_slack.is_some_and(|r| r < region.slack) {
        return Err(Failure::Parse("region shifts must satisfy 0 <= slack <= stable-slack".into()));
    }
    Ok(())
}

fn run_cohomology(cli: &Cli, data: &ReflexiveData, region: &RegionArgs) -> Result<CohomologyReport, Failure> {
    check_region(region)?;
    cohomology(data, &config(cli, region)).map_err(brst_failure)
}

fn report_json(report: &CohomologyReport) -> Value {
    let blocks: Vec<Value> = report
        .blocks
        .iter()
        .map(|b| {
            json!({
                "weight": fmt_q(&b.key.weight), "j": fmt_q(&b.key.j), "k": b.key.k,
                "twisted_weight": fmt_q(&b.key.twisted_weight()), "dim_ambient": b.dim_ambient,
                "rank_in": b.rank_in, "rank_out": b.rank_out, "dim_region": b.dim_cohomology,
                "dim_cohomology": b.dim(),
            })
        })
        .collect();
    json!({
        "seed": report.seed, "cutoff": fmt_q(&report.cutoff), "m_slack": report.m_slack,
        "stable_slack": report.stable_slack,
        "flags": {
            "square_zero": report.square_zero_verified, "gradings": report.gradings_verified,
            "n2_commutation": report.n2_commutation_verified, "conjectural": report.conjectural,
            "seeds_compared": report.seeds_compared.map(|(a, b, same)| json!({"seeds": [a, b], "agree": same})),
        },
        "negative_weight_ambient": report.negative_weight_ambient,
        "blocks": blocks,
        "character": character_json(&report.character()),
    })
}

fn character_json(table: &CharacterTable) -> Value {
    Value::Array(
        table
            .iter()
            .map(|((y, w), c)| json!({"y": fmt_q(y), "q": fmt_q(w), "coefficient": c}))
            .collect(),
    )
}

fn summary(report: &CohomologyReport) -> String {
    let mut out = String::from("character (y exponent, q exponent, supertrace)\n");
    for ((y, w), c) in report.character() {
        out.push_str(&format!("  {}\t{}\t{c}\n", fmt_q(&y), fmt_q(&w)));
    }
    out.push_str(&format!(
        "total at twisted weight 0: {}\n",
        report.total_at_twisted_weight(&Q::from_integer(0.into()))
    ));
    out
}

fn cohomology_outcome(report: &CohomologyReport) -> Outcome {
    let ok = report.verified();
    let mut text = report.render();
    text.push_str(&summary(report));
    text.push_str(if ok { "ok\n" } else { "FAILED\n" });
    let mut structured = report_json(report);
    structured["command"] = json!("cohomology");
    structured["ok"] = json!(ok);
    Outcome {
        ok,
        text,
        tsv: report.render_tsv(),
        structured,
    }
}

fn character_outcome(cli: &Cli, table: &CharacterTable, ok: bool) -> Outcome {
    let tsv = render_character_tsv(table);
    Outcome {
        ok,
        text: header(cli) + &tsv + if ok { "ok\n" } else { "FAILED\n" },
        tsv,
        structured: json!({
            "command": "character", "seed": cli.seed, "cutoff": fmt_q(&cli.cutoff),
            "character": character_json(table), "ok": ok,
        }),
    }
}

fn mirror_compare(cli: &Cli, data: &ReflexiveData, region: &RegionArgs) -> Result<Outcome, Failure> {
    if data.mirror_fan1.is_none() {
        return Err(Failure::Parse("polytope file has no mirror fan".into()));
    }
    check_region(region)?;
    let cmp = mirror_compare_run(data, &config(cli, region)).map_err(brst_failure)?;
    let (a, b) = (&cmp.original, &cmp.mirror);
    let (compared, tables_agree, chars_agree, ok) = (cmp.blocks_compared, cmp.tables_agree, cmp.characters_agree, cmp.ok());
    let mut text = header(cli);
    text.push_str(&format!("blocks compared {compared}\n"));
    text.push_str(&format!("dimension tables agree under j -> -j: {tables_agree}\n"));
    text.push_str(&format!("characters agree under y -> 1/y: {chars_agree}\n"));
    text.push_str("original\n");
    text.push_str(&a.render_tsv());
    text.push_str("mirror\n");
    text.push_str(&b.render_tsv());
    text.push_str(if ok { "ok\n" } else { "FAILED\n" });
    Ok(Outcome {
        ok,
        tsv: format!("blocks_compared\ttables_agree\tcharacters_agree\n{compared}\t{tables_agree}\t{chars_agree}\n"),
        structured: json!({
            "command": "mirror-compare", "seed": cli.seed, "cutoff": fmt_q(&cli.cutoff),
            "blocks_compared": compared, "tables_agree": tables_agree, "characters_agree": chars_agree,
            "original": report_json(a), "mirror": report_json(b), "ok": ok,
        }),
        text,
    })
}
