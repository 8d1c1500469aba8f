//! `syk-lab`: command-line front end for the SYK laboratory.

mod artifact;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use syk_core::hamiltonian::{
    assemble_dense, coupling_stream, index_set_len, sample_couplings, Provenance,
};
use syk_core::harness::{
    clt_normality, empirical_covariance, exact_covariance_oracle, lipschitz_concentration_audit,
    run_ensemble, variance_bound_audit_from, FunctionSpec,
};
use syk_core::moments::{covariance_limit, moment_table, DecayRate};
use syk_core::output::{write_eigenvalues_csv, write_samples_csv};
use syk_core::setcomb::{
    count_bm_bruteforce, hypergeometric_pmf, intersection_histogram, poisson_pmf,
    total_variation, total_variation_to_poisson,
};
use syk_core::smoothing::{fejer_eval, sup_error, FejerKernel, UniformGrid};
use syk_core::spectrum::{eigenvalues, Tabulated};
use syk_core::Error;

use artifact::{Artifacts, Meta};
use config::{load_experiment, CliError};

#[derive(Parser, Debug)]
#[command(name = "syk-lab", version, about = "Finite-size experiments on the SYK model")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Global {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration field, e.g. `--set n=12` or `--set dist.kind=rademacher`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory.
    #[arg(long, env = "SYK_LAB_OUT", default_value = ".", global = true)]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true)]
    parallel_width: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Table of the limiting moments m_k^a.
    Moments {
        #[arg(long, default_value_t = 8)]
        k_max: usize,
        /// Comma-separated rates; `inf` is accepted.
        #[arg(long, default_value = "0,1,inf", value_delimiter = ',')]
        a: Vec<DecayRate>,
    },
    /// Couplings and spectrum of one Hamiltonian.
    Sample {
        #[arg(long, default_value_t = 0)]
        sample_id: u64,
    },
    /// Ensemble run with the normality check of the scaled fluctuations.
    Clt,
    /// Scaled covariances of normalized trace moments.
    Cov {
        /// Pairs `k:k'`, comma separated.
        #[arg(long, default_value = "2:2,2:3,2:4", value_delimiter = ',')]
        pairs: Vec<String>,
    },
    /// Counts of index-set tuples whose word product is ±identity.
    Bm {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        m: usize,
        /// Require pairwise distinct sets.
        #[arg(long)]
        distinct: bool,
    },
    /// Overlap law of two random q-subsets against its Poisson limit.
    PoissonCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
    },
    /// Féjer kernel values and smoothing errors for a clipped |x|.
    Fejer {
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 10.0)]
        x_max: f64,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        #[arg(long, default_value = "4,16,64", value_delimiter = ',')]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 3.0)]
        clip: f64,
    },
    /// Variance-bound and concentration audits.
    Audit {
        #[arg(long, value_enum, default_value_t = AuditKind::Variance)]
        kind: AuditKind,
        /// Moment orders for the variance audit.
        #[arg(long, default_value = "2,3,4,6", value_delimiter = ',')]
        k: Vec<usize>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AuditKind {
    Variance,
    Lipschitz,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind, "message": e.message }));
            ExitCode::from(e.code)
        }
    }
}

fn g(x: f64) -> String {
    format!("{x:.16e}")
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let global = cli.global;
    match cli.command {
        Command::Moments { k_max, a } => {
            let params = json!({ "k_max": k_max, "a": a });
            let out = Artifacts::new(&global.out, Meta::new("moments", &params, None))?;
            let mut body = String::from("k,a,value\n");
            for row in moment_table(k_max, &a)? {
                body += &format!("{},{},{}\n", row.k, row.a, g(row.value));
            }
            out.csv("moments.csv", &body)
        }
        Command::Sample { sample_id } => {
            let cfg = load_experiment(&global)?;
            let params = json!({ "config": config::hashable(&cfg), "sample_id": sample_id });
            let out = Artifacts::new(&global.out, Meta::new("sample", &params, Some(cfg.seed)))?;
            let mut rng = coupling_stream(cfg.seed, sample_id);
            let couplings = sample_couplings(&cfg.dist, cfg.n, cfg.q, &mut rng)?;
            let mut h = assemble_dense(&couplings)?;
            h.provenance = Provenance {
                seed: Some(cfg.seed),
                sample_id: Some(sample_id),
            };
            let spectrum = eigenvalues(&h)?;
            let mut buf = Vec::new();
            couplings.write_csv(&mut buf)?;
            out.csv("couplings.csv", &String::from_utf8_lossy(&buf))?;
            let mut body = String::from("rank,lambda\n");
            for (rank, l) in spectrum.eigenvalues.iter().enumerate() {
                body += &format!("{rank},{}\n", g(*l));
            }
            out.csv("spectrum.csv", &body)
        }
        Command::Clt => {
            let cfg = load_experiment(&global)?;
            let params = json!({ "config": config::hashable(&cfg) });
            let out = Artifacts::new(&global.out, Meta::new("clt", &params, Some(cfg.seed)))?;
            let rec = run_ensemble(&cfg)?;
            rec.audit()?;
            let ks = clt_normality(&rec, rec.summary.reference_variance)?;
            let mut buf = Vec::new();
            write_samples_csv(&rec, &mut buf)?;
            out.csv("samples.csv", &String::from_utf8_lossy(&buf))?;
            if cfg.dump_eigenvalues {
                let mut buf = Vec::new();
                write_eigenvalues_csv(&rec, &mut buf)?;
                out.csv("eigenvalues.csv", &String::from_utf8_lossy(&buf))?;
            }
            out.json("config.json", &serde_json::to_value(&cfg).map_err(Error::from)?)?;
            out.json(
                "summary.json",
                &json!({ "summary": rec.summary, "normality": ks }),
            )?;
            println!(
                "scaled_variance={} reference_variance={} ks={} p={} pass={}",
                g(rec.summary.scaled_variance),
                g(rec.summary.reference_variance),
                g(ks.statistic),
                g(ks.p_value),
                ks.pass
            );
            Ok(())
        }
        Command::Cov { pairs } => {
            let mut cfg = load_experiment(&global)?;
            cfg.record_moments = true;
            let pairs = pairs
                .iter()
                .map(|p| parse_pair(p))
                .collect::<Result<Vec<_>, _>>()?;
            let params = json!({ "config": config::hashable(&cfg), "pairs": pairs });
            let out = Artifacts::new(&global.out, Meta::new("cov", &params, Some(cfg.seed)))?;
            let rec = run_ensemble(&cfg)?;
            let a = DecayRate::from_sizes(cfg.n, cfg.q)?;
            let mut body = String::from("k,k_prime,empirical,se,limit,exact\n");
            for (k, kp) in pairs {
                let est = empirical_covariance(&rec, k, kp)?;
                let limit = covariance_limit(k, kp, a, cfg.dist.gamma())?;
                let exact = match exact_covariance_oracle(cfg.n, cfg.q, k, kp, &cfg.dist) {
                    Ok(v) => g(v),
                    Err(Error::Resource(_)) => String::new(),
                    Err(e) => return Err(e.into()),
                };
                body += &format!("{k},{kp},{},{},{},{exact}\n", g(est.value), g(est.se), g(limit));
            }
            out.csv("cov.csv", &body)
        }
        Command::Bm { n, q, m, distinct } => {
            let params = json!({ "n": n, "q": q, "m": m, "distinct": distinct });
            let out = Artifacts::new(&global.out, Meta::new("bm", &params, None))?;
            let mut body = String::from("n,q,m,distinct,count,ratio\n");
            for &n in &n {
                let count = count_bm_bruteforce(n, q, m, distinct)?;
                let len = index_set_len(n, q)? as f64;
                let ratio = count as f64 * (n as f64).sqrt() / len.powi(m as i32 - 1);
                body += &format!("{n},{q},{m},{distinct},{count},{}\n", g(ratio));
            }
            out.csv("bm.csv", &body)
        }
        Command::PoissonCheck { n, q, trials } => {
            let seed = global.seed.unwrap_or(0);
            let params = json!({ "n": n, "q": q, "trials": trials });
            let out = Artifacts::new(&global.out, Meta::new("poisson-check", &params, Some(seed)))?;
            let a = (q * q) as f64 / n as f64;
            let exact = hypergeometric_pmf(n, q)?;
            let empirical = intersection_histogram(n, q, trials, &mut coupling_stream(seed, 0))?;
            let poisson = poisson_pmf(a, exact.len());
            let mut body = String::from("overlap,empirical,hypergeometric,poisson\n");
            for j in 0..exact.len() {
                body += &format!("{j},{},{},{}\n", g(empirical[j]), g(exact[j]), g(poisson[j]));
            }
            out.csv("poisson.csv", &body)?;
            println!(
                "tv_hypergeometric_poisson={} tv_empirical_hypergeometric={}",
                g(total_variation_to_poisson(&exact, a)),
                g(total_variation(&empirical, &exact))
            );
            Ok(())
        }
        Command::Fejer {
            lambda,
            x_max,
            points,
            lambdas,
            clip,
        } => {
            let params = json!({
                "lambda": lambda, "x_max": x_max, "points": points, "lambdas": lambdas, "clip": clip,
            });
            let out = Artifacts::new(&global.out, Meta::new("fejer", &params, None))?;
            let kernel = FejerKernel::new(lambda)?;
            let grid = UniformGrid::spanning(-x_max, x_max, points)?;
            let mut body = String::from("x,kernel\n");
            for x in grid.points() {
                body += &format!("{},{}\n", g(x), g(fejer_eval(&kernel, x)));
            }
            out.csv("kernel.csv", &body)?;
            let f = Tabulated::clipped_abs(clip, 2001)?;
            let grid = UniformGrid::spanning(-2.0 * clip, 2.0 * clip, points)?;
            let mut body = String::from("lambda,sup_error\n");
            for &l in &lambdas {
                body += &format!("{},{}\n", g(l), g(sup_error(&f, l, &grid)?));
            }
            out.csv("sup_error.csv", &body)
        }
        Command::Audit { kind, k } => {
            let mut cfg = load_experiment(&global)?;
            match kind {
                AuditKind::Variance => {
                    cfg.record_moments = true;
                    cfg.f = FunctionSpec::monomial(2);
                    let params = json!({ "config": config::hashable(&cfg), "kind": "variance", "k": k });
                    let out = Artifacts::new(&global.out, Meta::new("audit", &params, Some(cfg.seed)))?;
                    let rec = run_ensemble(&cfg)?;
                    let mut body = String::from("k,constant,ratio,se,pass\n");
                    let mut failed = Vec::new();
                    for &k in &k {
                        let audit = variance_bound_audit_from(&rec, k)?;
                        if !audit.passes() {
                            failed.push(k);
                        }
                        body += &format!(
                            "{k},{},{},{},{}\n",
                            g(audit.constant),
                            g(audit.ratio.value),
                            g(audit.ratio.se),
                            audit.passes()
                        );
                    }
                    out.csv("audit.csv", &body)?;
                    if !failed.is_empty() {
                        return Err(Error::Validation(format!("variance bound exceeded for k = {failed:?}")).into());
                    }
                    Ok(())
                }
                AuditKind::Lipschitz => {
                    let params = json!({ "config": config::hashable(&cfg), "kind": "lipschitz" });
                    let out = Artifacts::new(&global.out, Meta::new("audit", &params, Some(cfg.seed)))?;
                    let audit = lipschitz_concentration_audit(&cfg)?;
                    let mut body = String::from("lipschitz,scaled_variance,se,bound,t,tail_fraction\n");
                    for (t, frac) in &audit.tail {
                        body += &format!(
                            "{},{},{},{},{},{}\n",
                            g(audit.lipschitz),
                            g(audit.scaled_variance.value),
                            g(audit.scaled_variance.se),
                            g(audit.bound),
                            g(*t),
                            g(*frac)
                        );
                    }
                    out.csv("lipschitz.csv", &body)?;
                    if !audit.passes() {
                        return Err(Error::Validation(format!(
                            "scaled variance {} exceeds {}",
                            audit.scaled_variance.value, audit.bound
                        ))
                        .into());
                    }
                    Ok(())
                }
            }
        }
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::schema(format!("expected a pair like 2:4, got {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}
