//! Command-line front end. Results go to stdout (or `--out`) as CSV; the resolved
//! configuration is echoed to stderr.

use crate::bundled;
use crate::error::{Error, Result};
use crate::figures::pinned_figures;
use crate::mdp::{Policy, RewardFunction, RewardlessMdp};
use crate::power::copies::{find_copies, max_copies, CopyConstraints};
use crate::power::dist::parse_vector_text;
use crate::power::orbit::{orbit_vote, OrbitMode, OrbitQuantity};
use crate::power::{
    au_distance, au_distance_normalized, optimality_probability, power, EstimateWithCI, OptTarget,
    RewardDistributionSpec, Sampling,
};
use crate::retarget::{
    bandit_orbit_check, bandit_train_prob, decision_prob, orbit_tendency_check, BanditConfig, DecisionRule,
    OutcomeProblem,
};
use crate::sideffects::delayed::{solve_with_moments, ValueMoments};
use crate::sideffects::experiment::{run_experiment, ExperimentConfig};
use crate::sideffects::qlearn::QLearningConfig;
use crate::sideffects::regret::{corrigibility_bound_check, proportional_regret, PolicySpec};
use crate::visit::{
    classify_child_distributions, enumerate_visit_functions, non_dominated, rsd_nondominated, WITNESS_GAMMAS,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SIZE_CAP: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "POWERMDP_THREADS";

#[derive(Parser, Debug, Serialize)]
#[command(name = "powermdp", version, about = "POWER, optimality probability and side-effect analysis for finite MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MdpArgs {
    /// MDP JSON file, or the name of a bundled example.
    #[arg(long)]
    pub mdp: String,
    #[arg(long)]
    pub state: Option<String>,
    /// Discount rate; 0 and 1 select the limits where supported.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleArgs {
    /// Reward distribution, e.g. `uniform01`, `cdfpow:2`, `indep:uniform01,cdfpow:2`.
    #[arg(long, default_value = "uniform01")]
    pub dist: String,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Confidence level of reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub ci: f64,
}

impl SampleArgs {
    fn sampling(&self) -> Sampling {
        Sampling::new(self.samples, self.seed).with_confidence(self.ci)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutArgs {
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum NdKind {
    /// Visit distribution functions from the state.
    Visit,
    /// One-step child distributions.
    Child,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// POWER of a state.
    Power {
        #[command(flatten)]
        mdp: MdpArgs,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Probability that an action is optimal at a state.
    Optprob {
        #[command(flatten)]
        mdp: MdpArgs,
        #[arg(long)]
        action: String,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Non-dominated visit or child distributions.
    Nondominated {
        #[command(flatten)]
        mdp: MdpArgs,
        #[arg(long, value_enum, default_value_t = NdKind::Visit)]
        kind: NdKind,
        /// Also list dominated members.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recurrent state distributions reachable from a state.
    Rsd {
        #[command(flatten)]
        mdp: MdpArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Attainable-utility distance between starting in `--state` and in `--other`.
    AuDist {
        #[command(flatten)]
        mdp: MdpArgs,
        #[arg(long)]
        other: String,
        /// Report the (1 − γ)-normalized distance.
        #[arg(long)]
        normalized: bool,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Tally a comparison over the permutation orbit of the reward distribution.
    OrbitVote {
        #[command(flatten)]
        mdp: MdpArgs,
        /// Compare POWER of `--state` against this state.
        #[arg(long, conflicts_with_all = ["action", "action2"])]
        other: Option<String>,
        /// Compare optimality probabilities of two actions at `--state`.
        #[arg(long, requires = "action2")]
        action: Option<String>,
        #[arg(long, requires = "action")]
        action2: Option<String>,
        /// Use this many random permutations instead of the full orbit.
        #[arg(long)]
        permutations: Option<usize>,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Largest number of involution copies of set `a` inside set `b`.
    Copies {
        /// JSON file `{"a": [[..]], "b": [[..]], "dim": k, "fixed": [..]}`.
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Decision-rule probabilities and orbit-level retargetability.
    Retarget {
        /// Problem JSON `{"vectors", "a", "b"}`, or `cards`.
        #[arg(long, default_value = "cards")]
        problem: String,
        /// argmax | fraction-optimal | anti-argmax | boltzmann:T | satisfice:t | best-of-k:k |
        /// quantilizer:q | uniform-random | stubborn:i
        #[arg(long)]
        rule: String,
        /// Comma separated utilities, one per outcome coordinate.
        #[arg(long)]
        utility: String,
        /// Ratio the orbit tally must reach.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        permutations: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// ε-greedy bandit training: arm selection probabilities, or an orbit tally with `--orbit-n`.
    Bandit {
        #[arg(long, default_value = "5,4,3,2,1")]
        utility: String,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        orbit_n: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        ci: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train vanilla and AUP agents on a gridworld and score them.
    AupTrain {
        #[arg(long, value_parser = ["options", "damage"])]
        env: String,
        #[arg(long, default_value = "0,1,2,3,4")]
        seeds: String,
        #[arg(long, default_value_t = 0.996)]
        gamma: f64,
        #[arg(long, default_value_t = 0.01)]
        lambda: f64,
        #[arg(long, default_value_t = 20)]
        aux: usize,
        #[arg(long, default_value_t = 5000)]
        episodes: usize,
        #[arg(long, default_value_t = 10)]
        t_correct: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Optimal prefix policy under a geometric correction time.
    DelayedSpec {
        #[command(flatten)]
        mdp: MdpArgs,
        /// Per-step probability that the true reward is revealed.
        #[arg(long)]
        p: f64,
        #[command(flatten)]
        sample: SampleArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Proportional regret of a policy, optionally corrected after `--switch-at` steps.
    Regret {
        #[command(flatten)]
        mdp: MdpArgs,
        /// Reward per state: comma separated, a JSON array, or a JSON object keyed by state.
        #[arg(long)]
        reward: String,
        /// One action per state (names or indices, comma separated), or a single action for all.
        #[arg(long)]
        policy: String,
        #[arg(long)]
        switch_at: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Recompute the pinned reference values and report pass/fail for each.
    Figures {
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.95)]
        ci: f64,
        #[command(flatten)]
        out: OutArgs,
    },
}

/// CSV table with a fixed header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

const ESTIMATE_HEADER: [&str; 7] = ["quantity", "state", "gamma", "estimate", "ci_radius", "n", "seed"];

fn estimate_row(quantity: &str, state: &str, gamma: f64, e: &EstimateWithCI) -> Vec<String> {
    vec![
        quantity.into(),
        state.into(),
        gamma.to_string(),
        e.estimate.to_string(),
        e.radius.to_string(),
        e.n.to_string(),
        e.seed.to_string(),
    ]
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn load_mdp(spec: &str) -> Result<RewardlessMdp> {
    let path = std::path::Path::new(spec);
    if path.is_file() {
        RewardlessMdp::load(path)
    } else {
        bundled::load(spec).map_err(|_| {
            let known: Vec<&str> = bundled::names().collect();
            Error::input(format!("'{spec}' is neither a readable file nor a bundled MDP ({})", known.join(", ")))
        })
    }
}

fn required_state(m: &RewardlessMdp, args: &MdpArgs) -> Result<(usize, String)> {
    let name = args.state.as_deref().ok_or_else(|| Error::input("--state is required"))?;
    Ok((m.state_index(name)?, name.to_string()))
}

fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::input(format!("bad number '{t}': {e}"))))
        .collect()
}

fn parse_action(m: &RewardlessMdp, token: &str) -> Result<usize> {
    m.action_index(token).or_else(|e| match token.parse::<usize>() {
        Ok(i) if i < m.n_actions() => Ok(i),
        _ => Err(e),
    })
}

fn parse_policy(m: &RewardlessMdp, text: &str) -> Result<Policy> {
    let acts: Vec<usize> = text.split(',').map(|t| parse_action(m, t.trim())).collect::<Result<_>>()?;
    let pi = match acts.len() {
        1 => Policy(vec![acts[0]; m.n_states()]),
        n if n == m.n_states() => Policy(acts),
        n => return Err(Error::input(format!("policy lists {n} actions for {} states", m.n_states()))),
    };
    pi.check(m)?;
    Ok(pi)
}

pub fn parse_rule(text: &str) -> Result<DecisionRule> {
    let (name, arg) = match text.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (text.trim(), None),
    };
    let num = |what: &str| -> Result<f64> {
        let a = arg.ok_or_else(|| Error::input(format!("rule '{name}' needs a {what} after ':'")))?;
        a.parse::<f64>().map_err(|e| Error::input(format!("bad {what} '{a}': {e}")))
    };
    let int = |what: &str| -> Result<u64> {
        let a = arg.ok_or_else(|| Error::input(format!("rule '{name}' needs a {what} after ':'")))?;
        a.parse::<u64>().map_err(|e| Error::input(format!("bad {what} '{a}': {e}")))
    };
    let rule = match name {
        "argmax" => DecisionRule::Argmax,
        "fraction-optimal" => DecisionRule::FractionOptimal,
        "anti-argmax" => DecisionRule::AntiArgmax,
        "uniform-random" => DecisionRule::UniformRandom,
        "boltzmann" => DecisionRule::Boltzmann { temperature: num("temperature")? },
        "satisfice" => DecisionRule::Satisfice { threshold: num("threshold")? },
        "best-of-k" => DecisionRule::BestOfK {
            k: u32::try_from(int("sample count")?).map_err(|_| Error::input("best-of-k count too large"))?,
        },
        "quantilizer" => DecisionRule::Quantilizer { q: num("quantile")?, base: None },
        "stubborn" => DecisionRule::Stubborn { index: int("outcome index")? as usize },
        other => return Err(Error::input(format!("unknown decision rule '{other}'"))),
    };
    Ok(rule)
}

fn orbit_mode(permutations: Option<usize>, seed: u64) -> OrbitMode {
    match permutations {
        Some(p) => OrbitMode::Sampled { permutations: p, seed },
        None => OrbitMode::Exact,
    }
}

#[derive(serde::Deserialize)]
struct CopiesProblem {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    dim: Option<usize>,
    #[serde(default)]
    fixed: Vec<usize>,
}

fn execute(cmd: &Command) -> Result<Table> {
    match cmd {
        Command::Power { mdp, sample, .. } => {
            let m = load_mdp(&mdp.mdp)?;
            let (s, name) = required_state(&m, mdp)?;
            let spec = RewardDistributionSpec::parse(&sample.dist, &m)?;
            let e = power(&m, s, mdp.gamma, &spec, &sample.sampling())?;
            let mut t = Table::new(&ESTIMATE_HEADER);
            t.push(estimate_row("power", &name, mdp.gamma, &e));
            Ok(t)
        }
        Command::Optprob { mdp, action, sample, .. } => {
            let m = load_mdp(&mdp.mdp)?;
            let (s, name) = required_state(&m, mdp)?;
            let a = parse_action(&m, action)?;
            let spec = RewardDistributionSpec::parse(&sample.dist, &m)?;
            let e = optimality_probability(&m, s, &OptTarget::Action(a), mdp.gamma, &spec, &sample.sampling())?;
            let mut t = Table::new(&ESTIMATE_HEADER);
            t.push(estimate_row(&format!("optprob:{action}"), &name, mdp.gamma, &e));
            Ok(t)
        }
        Command::Nondominated { mdp, kind, all, .. } => {
            let m = load_mdp(&mdp.mdp)?;
            let (s, _) = required_state(&m, mdp)?;
            let names = m.action_names();
            let mut t = Table::new(&["kind", "index", "actions", "status", "margin", "vector"]);
            match kind {
                NdKind::Visit => {
                    let set = enumerate_visit_functions(&m, s)?;
                    let status = non_dominated(&set)?;
                    for (i, (f, d)) in set.functions.iter().zip(&status).enumerate() {
                        if *all || d.is_non_dominated() {
                            let acts: Vec<&str> = f.policy.0.iter().map(|&a| names[a].as_str()).collect();
                            t.push(vec![
                                format!("visit@{}", WITNESS_GAMMAS[1]),
                                i.to_string(),
                                acts.join(" "),
                                d.label().into(),
                                d.margin().to_string(),
                                join(f.at_half()),
                            ]);
                        }
                    }
                }
                NdKind::Child => {
                    for (i, (c, d)) in classify_child_distributions(&m, s)?.into_iter().enumerate() {
                        if *all || d.is_non_dominated() {
                            let acts: Vec<&str> = c.actions.iter().map(|&a| names[a].as_str()).collect();
                            t.push(vec![
                                "child".into(),
                                i.to_string(),
                                acts.join(" "),
                                d.label().into(),
                                d.margin().to_string(),
                                join(&c.dist),
                            ]);
                        }
                    }
                }
            }
            Ok(t)
        }
        Command::Rsd { mdp, .. } => {
            let m = load_mdp(&mdp.mdp)?;
            let (s, _) = required_state(&m, mdp)?;
            let names = m.action_names();
            let mut t = Table::new(&["index", "actions", "status", "margin", "distribution"]);
            for (i, (r, d)) in rsd_nondominated(&m, s)?.into_iter().enumerate() {
                let acts: Vec<&str> = r.policy.0.iter().map(|&a| names[a].as_str()).collect();
                t.push(vec![i.to_string(), acts.join(" "), d.label().into(), d.margin().to_string(), join(&r.dist)]);
            }
            Ok(t)
        }
        Command::AuDist { mdp, other, normalized, sample, .. } => {
            let m = load_mdp(&mdp.mdp)?;
            let (s, name) = required_state(&m, mdp)?;
            let o = m.state_index(other)?;
            let spec = RewardDistributionSpec::parse(&sample.dist, &m)?;
            let (d1, d2) = (crate::mdp::unit(m.n_states(), s), crate::mdp::unit(m.n_states(), o));
            let e = if *normalized {
                au_distance_normalized(&m, &d1, &d2, mdp.gamma, &spec, &sample.sampling())?
            } else {
                au_distance(&m, &d1, &d2, mdp.gamma, &spec, &sample.sampling())?
            };
            let q = if *normalized { "au_dist_normalized" } else { "au_dist" };
            let mut t = Table::new(&ESTIMATE_HEADER);
            t.push(estimate_row(q, &format!("{name}|{other}"), mdp.gamma, &e));
            Ok(t)
        }
        Command::OrbitVote { mdp, other, action, action2, permutations, sample, .. } => {
            let m = load_mdp(&mdp.mdp)?;
            let (s, name) = required_state(&m, mdp)?;
            let spec = RewardDistributionSpec::parse(&sample.dist, &m)?;
            let (quantity, first, second) = match (other, action, action2) {
                (Some(o), _, _) => (
                    OrbitQuantity::Power { first: s, second: m.state_index(o)?, gamma: mdp.gamma },
                    format!("power:{name}"),
                    format!("power:{o}"),
                ),
                (None, Some(a), Some(b)) => (
                    OrbitQuantity::OptProb {
                        state: s,
                        first: OptTarget::Action(parse_action(&m, a)?),
                        second: OptTarget::Action(parse_action(&m, b)?),
                        gamma: mdp.gamma,
                    },
                    format!("optprob:{name}:{a}"),
                    format!("optprob:{name}:{b}"),
                ),
                _ => return Err(Error::input("give either --other or both --action and --action2")),
            };
            let tally = orbit_vote(&m, &quantity, &spec, orbit_mode(*permutations, sample.seed), &sample.sampling())?;
            let mut t = Table::new(&[
                "first", "second", "gamma", "greater", "less", "equal", "orbit_size", "exhaustive", "n", "seed",
            ]);
            t.push(vec![
                first,
                second,
                mdp.gamma.to_string(),
                tally.greater.to_string(),
                tally.less.to_string(),
                tally.equal.to_string(),
                tally.orbit_size.to_string(),
                tally.exhaustive.to_string(),
                sample.samples.to_string(),
                sample.seed.to_string(),
            ]);
            Ok(t)
        }
        Command::Copies { problem, .. } => {
            let text = std::fs::read_to_string(problem)
                .map_err(|e| Error::input(format!("cannot read {}: {e}", problem.display())))?;
            let p: CopiesProblem =
                serde_json::from_str(&text).map_err(|e| Error::input(format!("copies problem: {e}")))?;
            let dim = p.dim.or_else(|| p.a.first().map(Vec::len)).ok_or_else(|| Error::input("set a is empty"))?;
            let constraints = CopyConstraints { fixed: p.fixed, ..CopyConstraints::default() };
            let n = max_copies(&p.a, &p.b, dim, &constraints)?;
            let witnesses = find_copies(&p.a, &p.b, n, dim, &constraints)?.unwrap_or_default();
            let mut t = Table::new(&["copies", "index", "involution"]);
            for (i, phi) in witnesses.iter().enumerate() {
                let cycles: String = phi
                    .cycles()
                    .iter()
                    .filter(|c| c.len() > 1)
                    .map(|c| format!("({})", join(c)))
                    .collect();
                t.push(vec![n.to_string(), i.to_string(), if cycles.is_empty() { "()".into() } else { cycles }]);
            }
            if witnesses.is_empty() {
                t.push(vec!["0".into(), String::new(), String::new()]);
            }
            Ok(t)
        }
        Command::Retarget { problem, rule, utility, n, permutations, seed, .. } => {
            let prob = if problem == "cards" {
                OutcomeProblem::cards()
            } else {
                let text = std::fs::read_to_string(problem)
                    .map_err(|e| Error::input(format!("cannot read {problem}: {e}")))?;
                let p: OutcomeProblem =
                    serde_json::from_str(&text).map_err(|e| Error::input(format!("outcome problem: {e}")))?;
                p.validate()?;
                p
            };
            let r = parse_rule(rule)?;
            let u = parse_numbers(utility)?;
            let pa = decision_prob(&r, &prob.a, &prob, &u)?;
            let pb = decision_prob(&r, &prob.b, &prob, &u)?;
            let c = orbit_tendency_check(&r, &prob, &u, *n, orbit_mode(*permutations, *seed))?;
            let mut t = Table::new(&[
                "rule", "p_a", "p_b", "b_greater", "a_greater", "ties", "orbit_size", "exhaustive", "ratio", "holds",
            ]);
            t.push(vec![
                rule.clone(),
                pa.to_string(),
                pb.to_string(),
                c.b_greater.to_string(),
                c.a_greater.to_string(),
                c.ties.to_string(),
                c.orbit_size.to_string(),
                c.exhaustive.to_string(),
                n.to_string(),
                c.holds.to_string(),
            ]);
            Ok(t)
        }
        Command::Bandit { utility, epsilon, trials, orbit_n, samples, seed, ci, .. } => {
            let cfg = BanditConfig::new(parse_numbers(utility)?, *epsilon, *trials)?;
            let sampling = Sampling::new(*samples, *seed).with_confidence(*ci);
            match orbit_n {
                None => {
                    let mut t = Table::new(&["arm", "utility", "estimate", "ci_radius", "n", "seed"]);
                    for (i, e) in bandit_train_prob(&cfg, &sampling)?.iter().enumerate() {
                        t.push(vec![
                            i.to_string(),
                            cfg.utilities[i].to_string(),
                            e.estimate.to_string(),
                            e.radius.to_string(),
                            e.n.to_string(),
                            e.seed.to_string(),
                        ]);
                    }
                    Ok(t)
                }
                Some(n) => {
                    let c = bandit_orbit_check(&cfg, *n, OrbitMode::Exact, &sampling)?;
                    let mut t =
                        Table::new(&["b_greater", "a_greater", "ties", "orbit_size", "ratio", "holds", "n", "seed"]);
                    t.push(vec![
                        c.b_greater.to_string(),
                        c.a_greater.to_string(),
                        c.ties.to_string(),
                        c.orbit_size.to_string(),
                        n.to_string(),
                        c.holds.to_string(),
                        samples.to_string(),
                        seed.to_string(),
                    ]);
                    Ok(t)
                }
            }
        }
        Command::AupTrain { env, seeds, gamma, lambda, aux, episodes, t_correct, .. } => {
            let seeds: Vec<u64> = seeds
                .split(',')
                .map(|s| s.trim().parse::<u64>().map_err(|e| Error::input(format!("bad seed '{s}': {e}"))))
                .collect::<Result<_>>()?;
            let cfg = ExperimentConfig {
                gamma: *gamma,
                lambda: *lambda,
                aux_count: *aux,
                qlearning: QLearningConfig { episodes: *episodes, ..QLearningConfig::default() },
                t_correct: *t_correct,
            };
            let rep = run_experiment(env, &seeds, &cfg)?;
            for s in &rep.seeds {
                eprintln!(
                    "rollout seed={} vanilla goal={} side_effect={} aup goal={} side_effect={}",
                    s.seed, s.vanilla.reached_goal, s.vanilla.side_effect, s.aup.reached_goal, s.aup.side_effect
                );
            }
            let mut t = Table::new(&["seed", "condition", "dist", "score", "residual"]);
            for r in rep.rows() {
                let cond = serde_json::to_value(r.condition).map_err(|e| Error::input(e.to_string()))?;
                let dist = serde_json::to_value(r.dist).map_err(|e| Error::input(e.to_string()))?;
                t.push(vec![
                    r.seed.to_string(),
                    cond.as_str().unwrap_or_default().into(),
                    dist.as_str().unwrap_or_default().into(),
                    r.score.to_string(),
                    r.residual.to_string(),
                ]);
            }
            Ok(t)
        }
        Command::DelayedSpec { mdp, p, sample, .. } => {
            let m = load_mdp(&mdp.mdp)?;
            let spec = RewardDistributionSpec::parse(&sample.dist, &m)?;
            let moments = ValueMoments::compute(&m, &spec, mdp.gamma, &sample.sampling())?;
            let sol = solve_with_moments(&m, moments, *p)?;
            let names = m.action_names();
            let mut t = Table::new(&[
                "state", "mean_reward", "mean_value", "surrogate", "gamma_aup", "action", "optimal_actions", "n", "seed",
            ]);
            let n = if sol.moments.exact { 1 } else { sample.samples };
            for s in 0..m.n_states() {
                let opt: Vec<&str> = sol.optimal.actions[s].iter().map(|&a| names[a].as_str()).collect();
                t.push(vec![
                    m.state_names()[s].clone(),
                    sol.moments.mean_reward[s].to_string(),
                    sol.moments.mean_value[s].to_string(),
                    sol.surrogate[s].to_string(),
                    sol.gamma_aup.to_string(),
                    names[sol.policy.0[s]].clone(),
                    opt.join(" "),
                    n.to_string(),
                    sample.seed.to_string(),
                ]);
            }
            Ok(t)
        }
        Command::Regret { mdp, reward, policy, switch_at, .. } => {
            let m = load_mdp(&mdp.mdp)?;
            let (s, name) = required_state(&m, mdp)?;
            let r = RewardFunction::state(parse_vector_text(reward, &m)?);
            let pi = parse_policy(&m, policy)?;
            let mut t = Table::new(&[
                "state", "gamma", "switch_at", "pregret", "v_star", "v_pi", "v_min", "pregret_negated", "bound",
            ]);
            let (rep, bound) = match switch_at {
                Some(k) => {
                    let c = corrigibility_bound_check(&m, &pi, &r, s, mdp.gamma, *k)?;
                    (c.report, c.bound.to_string())
                }
                None => (proportional_regret(&m, &PolicySpec::Stationary(pi.clone()), &r, s, mdp.gamma)?, String::new()),
            };
            let spec = match switch_at {
                Some(k) => PolicySpec::Switch { prefix: pi, steps: *k },
                None => PolicySpec::Stationary(pi),
            };
            let neg = proportional_regret(&m, &spec, &r.negated(), s, mdp.gamma)?;
            t.push(vec![
                name,
                mdp.gamma.to_string(),
                switch_at.map(|k| k.to_string()).unwrap_or_default(),
                rep.pregret.to_string(),
                rep.v_star.to_string(),
                rep.v_pi.to_string(),
                rep.v_min.to_string(),
                neg.pregret.to_string(),
                bound,
            ]);
            Ok(t)
        }
        Command::Figures { samples, seed, ci, .. } => {
            let sampling = Sampling::new(*samples, *seed).with_confidence(*ci);
            let mut t = Table::new(&[
                "figure", "quantity", "gamma", "estimate", "ci_radius", "target", "tolerance", "pass", "n", "seed",
            ]);
            for f in pinned_figures(&sampling)? {
                t.push(vec![
                    f.figure.into(),
                    f.quantity.clone(),
                    f.gamma.to_string(),
                    f.value.estimate.to_string(),
                    f.value.radius.to_string(),
                    f.target.to_string(),
                    f.tolerance.to_string(),
                    if f.passes() { "PASS" } else { "FAIL" }.into(),
                    f.value.n.to_string(),
                    f.value.seed.to_string(),
                ]);
            }
            Ok(t)
        }
    }
}

fn out_path(cmd: &Command) -> Option<&PathBuf> {
    match cmd {
        Command::Power { out, .. }
        | Command::Optprob { out, .. }
        | Command::Nondominated { out, .. }
        | Command::Rsd { out, .. }
        | Command::AuDist { out, .. }
        | Command::OrbitVote { out, .. }
        | Command::Copies { out, .. }
        | Command::Retarget { out, .. }
        | Command::Bandit { out, .. }
        | Command::AupTrain { out, .. }
        | Command::DelayedSpec { out, .. }
        | Command::Regret { out, .. }
        | Command::Figures { out, .. } => out.out.as_ref(),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Input(_) | Error::Domain(_) => EXIT_INPUT,
        Error::SizeCap { .. } => EXIT_SIZE_CAP,
        Error::Numerical(_) | Error::Io(_) => EXIT_OTHER,
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("{THREADS_VAR} must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(Error::input(format!("{THREADS_VAR} must be at least 1")));
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Run a parsed command, writing CSV to `stdout` unless `--out` is given.
pub fn run_command(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let config = serde_json::to_string(cli).map_err(|e| Error::input(e.to_string()))?;
    writeln!(stderr, "config: {config}")?;
    configure_threads()?;
    let table = execute(&cli.command)?;
    let bytes = table.to_csv()?;
    match out_path(&cli.command) {
        Some(p) => std::fs::write(p, bytes)?,
        None => stdout.write_all(&bytes)?,
    }
    Ok(())
}

/// Full entry point: parse `argv`, run, and return the process exit code.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            if code == 0 {
                let _ = stdout.write_all(text.as_bytes());
            } else {
                let _ = stderr.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match run_command(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("powermdp").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn rule_parsing() {
        assert_eq!(parse_rule("boltzmann:0.5").unwrap(), DecisionRule::Boltzmann { temperature: 0.5 });
        assert_eq!(parse_rule("best-of-k:3").unwrap(), DecisionRule::BestOfK { k: 3 });
        assert_eq!(parse_rule("argmax").unwrap(), DecisionRule::Argmax);
        assert!(parse_rule("boltzmann").is_err());
        assert!(parse_rule("oracle").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run_str(&["power", "--bogus"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("Usage"));
    }

    #[test]
    fn power_row_and_config() {
        let (code, out, err) =
            run_str(&["power", "--mdp", "case_study", "--state", "empty", "--samples", "200", "--seed", "3"]);
        assert_eq!(code, 0, "{err}");
        let mut lines = out.lines();
        assert_eq!(lines.next().unwrap(), ESTIMATE_HEADER.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[0], "power");
        assert_eq!(row[5], "200");
        assert_eq!(row[6], "3");
        assert!(err.starts_with("config: "));
    }

    #[test]
    fn bad_state_and_gamma_are_input_errors() {
        assert_eq!(run_str(&["power", "--mdp", "case_study", "--state", "nowhere"]).0, EXIT_INPUT);
        assert_eq!(run_str(&["power", "--mdp", "case_study", "--state", "empty", "--gamma", "1.5"]).0, EXIT_INPUT);
        assert_eq!(run_str(&["power", "--mdp", "no_such_file.json", "--state", "s"]).0, EXIT_INPUT);
    }
}
