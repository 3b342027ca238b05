//! Small example MDPs shipped with the crate, available by name.

use crate::error::{Error, Result};
use crate::mdp::RewardlessMdp;

const FILES: &[(&str, &str)] = &[
    ("case_study", include_str!("../data/case_study.json")),
    ("counterex_powerseeking", include_str!("../data/counterex_powerseeking.json")),
    ("impossibility_graphical", include_str!("../data/impossibility_graphical.json")),
    ("nd_not_geo", include_str!("../data/nd_not_geo.json")),
    ("no_transfer_greedy", include_str!("../data/no_transfer_greedy.json")),
    ("opt_prob_half_prob", include_str!("../data/opt_prob_half_prob.json")),
    ("order_not_preserved", include_str!("../data/order_not_preserved.json")),
    ("power_calc", include_str!("../data/power_calc.json")),
    ("power_not_ic", include_str!("../data/power_not_ic.json")),
    ("robust_impossible", include_str!("../data/robust_impossible.json")),
    ("same_dist", include_str!("../data/same_dist.json")),
    ("same_succ", include_str!("../data/same_succ.json")),
    ("sharp_bound", include_str!("../data/sharp_bound.json")),
    ("sim_rsd_loss", include_str!("../data/sim_rsd_loss.json")),
    ("stoch_vf_indifference", include_str!("../data/stoch_vf_indifference.json")),
    ("uniform", include_str!("../data/uniform.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(n, _)| *n)
}

/// Look up a bundled MDP; accepts the bare name or `name.json`, with `-` or `_`.
pub fn load(name: &str) -> Result<RewardlessMdp> {
    let key = name.trim_end_matches(".json").replace('-', "_");
    let (_, text) = FILES
        .iter()
        .find(|(n, _)| *n == key)
        .ok_or_else(|| Error::input(format!("no bundled MDP named '{name}'")))?;
    RewardlessMdp::from_json_str(text)
}
