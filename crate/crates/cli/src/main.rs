//! Command-line front end: construct certified packings, verify any
//! document, search difference matrices, browse the embedded catalog and
//! export pattern codes.
//!
//! Exit codes: 0 success / positive certificate, 1 negative certificate or
//! failed search, 2 usage error, 3 blocked plan (missing difference matrix).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use diffpack::catalog::{self, CatalogItem};
use diffpack::compose::certify_claim;
use diffpack::diffmat::{
    dm_search, verify_dm, DmDocument, DmProvider, DmRegistry, SearchOutcome, DEFAULT_BUDGET,
    DEFAULT_SEED,
};
use diffpack::engine;
use diffpack::error::Error;
use diffpack::files::{parse_document, Document, OospcFile, PackingFile};
use diffpack::oospc::{to_patterns, verify_oospc};
use diffpack::packing::{verify_dp, verify_optimal_bdp, Certificate};
use diffpack::Group;

#[derive(Parser)]
#[command(name = "diffpack", version, about = "certified balanced difference packings and signature pattern codes")]
struct Cli {
    /// Directory of difference-matrix JSON documents that overrides the
    /// built-in registry
    #[arg(long, global = true, env = "DIFFPACK_REGISTRY")]
    registry: Option<PathBuf>,

    /// Node budget for difference-matrix search
    #[arg(long, global = true)]
    budget: Option<u64>,

    /// Seed for the search value order (0 = lexicographic)
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a certified optimal balanced packing over Z_4u x Z_8v
    Construct {
        /// Odd u
        u: Option<u64>,
        /// Odd v
        v: Option<u64>,
        /// Instead build one direct family: "8xP" or "24xP" for a prime P
        #[arg(long, value_name = "GxP", conflicts_with_all = ["u", "v"])]
        direct: Option<String>,
        /// Write the packing document here
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the derivation tree
        #[arg(long)]
        explain: bool,
        /// Skip per-node re-certification (the final output is still verified)
        #[arg(long)]
        no_recertify: bool,
    },
    /// Re-verify a packing, difference-matrix or pattern-code document
    Verify { file: PathBuf },
    /// Difference matrices
    Dm {
        #[command(subcommand)]
        cmd: DmCmd,
    },
    /// Embedded base data
    Catalog {
        #[command(subcommand)]
        cmd: CatalogCmd,
    },
    /// Optical orthogonal signature pattern codes
    Oospc {
        #[command(subcommand)]
        cmd: OospcCmd,
    },
}

#[derive(Subcommand)]
enum DmCmd {
    /// Search for a (G, k; 1) difference matrix
    Find {
        /// Group as moduli joined by 'x', e.g. 2x6 or 27
        #[arg(long)]
        group: String,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a stored difference-matrix document
    Verify { file: PathBuf },
}

#[derive(Subcommand)]
enum CatalogCmd {
    /// List entry ids
    List,
    /// Print one entry as an interchange document
    Show { id: String },
}

#[derive(Subcommand)]
enum OospcCmd {
    /// Convert a verified packing document into a pattern code
    Export {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the correlation bounds of a pattern-code document
    Check { file: PathBuf },
}

fn parse_group(text: &str) -> Result<Group, Error> {
    let moduli = text
        .split('x')
        .map(|part| {
            part.trim()
                .parse::<u32>()
                .map_err(|_| Error::Format(format!("bad group spec: {text}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Group::new(moduli)
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn summarize(cert: &Certificate) {
    let counts: Vec<String> = cert
        .blocks_by_size
        .iter()
        .map(|(k, c)| format!("{c} of size {k}"))
        .collect();
    println!(
        "certificate: {} | blocks: {} | leave size {}{}",
        if cert.ok { "POSITIVE" } else { "NEGATIVE" },
        if counts.is_empty() {
            "none".to_string()
        } else {
            counts.join(", ")
        },
        cert.leave_size,
        match cert.bound {
            Some(b) => format!(" | bound {b} per size"),
            None => String::new(),
        }
    );
    if let Some(f) = &cert.failure {
        println!("witness: {f:?}");
    }
}

fn provider_from(cli: &Cli) -> Result<DmProvider, Error> {
    let registry = match &cli.registry {
        Some(dir) => DmRegistry::from_dir(dir)?,
        None => DmRegistry::builtin()?,
    };
    Ok(DmProvider::new(
        registry,
        cli.budget.unwrap_or(DEFAULT_BUDGET),
        cli.seed.unwrap_or(DEFAULT_SEED),
    ))
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Construct {
            u,
            v,
            direct,
            out,
            explain,
            no_recertify,
        } => {
            if let Some(spec) = direct {
                let (g, p) = spec
                    .split_once('x')
                    .ok_or_else(|| Error::Format(format!("bad --direct spec: {spec}")))?;
                let p: u64 = p
                    .parse()
                    .map_err(|_| Error::Format(format!("bad prime in --direct: {spec}")))?;
                let split = match g {
                    "8" => diffpack::direct::bdp_4x8p(p)?,
                    "24" => diffpack::direct::bdp_4x24p(p)?,
                    _ => return Err(Error::Format(format!("bad --direct spec: {spec}"))),
                };
                let packing = diffpack::direct::merge_to_two_coords(&split)?;
                let cert = certify_claim(&packing)?;
                summarize(&cert);
                let doc = PackingFile::from_packing(&packing, Some(cert.clone()));
                if out.is_some() {
                    write_or_print(out, &serde_json::to_string_pretty(&doc)?)?;
                }
                return Ok(if cert.ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                });
            }
            let (u, v) = match (u, v) {
                (Some(u), Some(v)) => (*u, *v),
                _ => {
                    return Err(Error::Format(
                        "construct needs both u and v (or --direct)".into(),
                    ))
                }
            };
            let provider = provider_from(cli)?;
            println!(
                "# construct {u} {v} --seed {} --budget {}",
                provider.seed, provider.budget
            );
            let plan = engine::plan(u, v, &provider)?;
            if !plan.blocked.is_empty() {
                println!("plan is blocked; missing difference matrices:");
                for m in &plan.blocked {
                    println!(
                        "  (Z{}, 5; 1)",
                        m.iter()
                            .map(|x| x.to_string())
                            .collect::<Vec<_>>()
                            .join(" x Z")
                    );
                }
                return Ok(ExitCode::from(3));
            }
            if *explain {
                let mut text = String::new();
                plan.root.render(0, &mut text);
                print!("{text}");
            }
            let result = engine::execute(&plan, &provider, !*no_recertify)?;
            summarize(&result.certificate);
            let doc = PackingFile::from_packing(&result.packing, Some(result.certificate.clone()));
            if out.is_some() {
                write_or_print(out, &serde_json::to_string_pretty(&doc)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify { file } => {
            let text = std::fs::read_to_string(file)?;
            let cert = match parse_document(&text)? {
                Document::Packing(doc) => {
                    let packing = doc.to_packing()?;
                    match (&packing.claimed_leave, &doc.certificate) {
                        (Some(shape), _) => {
                            diffpack::packing::verify_regular_shape(&packing, shape)?
                        }
                        (None, Some(c)) if matches!(c.kind, diffpack::packing::CertKind::OptimalBdp) => {
                            verify_optimal_bdp(&packing)?
                        }
                        _ => verify_dp(&packing)?,
                    }
                }
                Document::Dm(doc) => verify_dm(&doc.to_matrix()?),
                Document::Oospc(doc) => verify_oospc(&doc.to_patterns()?)?,
            };
            summarize(&cert);
            Ok(if cert.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }

        Command::Dm { cmd } => match cmd {
            DmCmd::Find { group, k, out } => {
                let g = parse_group(group)?;
                let budget = cli.budget.unwrap_or(DEFAULT_BUDGET);
                let seed = cli.seed.unwrap_or(DEFAULT_SEED);
                println!("# dm find --group {group} --k {k} --budget {budget} --seed {seed}");
                match dm_search(&g, *k, budget, seed)? {
                    SearchOutcome::Found(d) => {
                        let cert = verify_dm(&d);
                        assert!(cert.ok, "search output must verify");
                        println!("found a ({g}, {k}; 1) difference matrix");
                        let doc = DmDocument::from_matrix(&d, seed, "search");
                        write_or_print(out, &serde_json::to_string_pretty(&doc)?)?;
                        Ok(ExitCode::SUCCESS)
                    }
                    SearchOutcome::Exhausted { nodes } => {
                        println!("exhausted after {nodes} nodes: no ({g}, {k}; 1) difference matrix exists");
                        Ok(ExitCode::from(1))
                    }
                    SearchOutcome::OutOfBudget { nodes } => {
                        println!("budget exhausted after {nodes} nodes (try another --seed or a larger --budget)");
                        Ok(ExitCode::from(1))
                    }
                }
            }
            DmCmd::Verify { file } => {
                let text = std::fs::read_to_string(file)?;
                let doc: DmDocument = serde_json::from_str(&text)?;
                let cert = verify_dm(&doc.to_matrix()?);
                summarize(&cert);
                Ok(if cert.ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                })
            }
        },

        Command::Catalog { cmd } => match cmd {
            CatalogCmd::List => {
                for id in catalog::catalog_ids() {
                    println!("{id}");
                }
                Ok(ExitCode::SUCCESS)
            }
            CatalogCmd::Show { id } => {
                match catalog::catalog_entry(id)? {
                    CatalogItem::Packing(p) => {
                        let doc = PackingFile::from_packing(&p, None);
                        println!("{}", serde_json::to_string_pretty(&doc)?);
                    }
                    CatalogItem::Sdf { lambda, family } => {
                        let blocks: Vec<Vec<Vec<u32>>> = family
                            .iter()
                            .map(|b| {
                                b.elements()
                                    .iter()
                                    .map(|e| e.coords().to_vec())
                                    .collect()
                            })
                            .collect();
                        let doc = serde_json::json!({
                            "group": [4, 8],
                            "lambda": lambda,
                            "blocks": blocks,
                        });
                        println!("{}", serde_json::to_string_pretty(&doc)?);
                    }
                }
                Ok(ExitCode::SUCCESS)
            }
        },

        Command::Oospc { cmd } => match cmd {
            OospcCmd::Export { file, out } => {
                let text = std::fs::read_to_string(file)?;
                let Document::Packing(doc) = parse_document(&text)? else {
                    return Err(Error::Format("oospc export expects a packing document".into()));
                };
                let packing = doc.to_packing()?;
                let patterns = to_patterns(&packing)?;
                let cert = verify_oospc(&patterns)?;
                summarize(&cert);
                let out_doc = OospcFile::from_patterns(&patterns);
                write_or_print(out, &serde_json::to_string_pretty(&out_doc)?)?;
                Ok(if cert.ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                })
            }
            OospcCmd::Check { file } => {
                let text = std::fs::read_to_string(file)?;
                let Document::Oospc(doc) = parse_document(&text)? else {
                    return Err(Error::Format("oospc check expects a pattern-code document".into()));
                };
                let cert = verify_oospc(&doc.to_patterns()?)?;
                summarize(&cert);
                Ok(if cert.ok {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(1)
                })
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(Error::BlockedPlan(missing)) => {
            eprintln!("plan is blocked; missing: {missing}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
